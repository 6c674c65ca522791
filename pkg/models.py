"""
SQLAlchemy ORM models for stored experiment runs.
Timestamps are integer Unix epochs; configuration and metadata are JSON text.
"""
from sqlalchemy import Column, Float, ForeignKey, Integer, String, Text  # type: ignore
from sqlalchemy.orm import declarative_base, relationship  # type: ignore

Base = declarative_base()


class ExperimentRun(Base):
    """
    One invocation of an experiment config.
    status is 'complete' or 'failed'; failed runs keep the x that aborted them.
    """
    __tablename__ = "experiment_runs"

    id = Column(Integer, primary_key=True)
    created_at = Column(Integer, index=True)
    status = Column(String, nullable=False, default="complete")
    failed_x = Column(Integer, nullable=True)
    error = Column(Text)
    config = Column(Text, nullable=False)
    run_metadata = Column("metadata", Text)

    # Cascade delete: removing a run removes its rows
    rows = relationship(
        "ReportRow",
        cascade="all, delete-orphan",
        back_populates="run",
        order_by="ReportRow.x",
    )

    def __repr__(self) -> str:
        return f"<ExperimentRun(id={self.id}, status={self.status})>"


class ReportRow(Base):
    """One grid point of a run."""
    __tablename__ = "report_rows"

    id = Column(Integer, primary_key=True)
    run_id = Column(Integer, ForeignKey("experiment_runs.id", ondelete="CASCADE"), nullable=False, index=True)
    x = Column(Integer, nullable=False)
    lhs = Column(Float)
    rhs_theorem_core = Column(Float)
    rhs_corollary_core = Column(Float)
    fitted_D = Column(Float)
    majorant_violations = Column(Integer, default=0)
    runtime_ms = Column(Integer, default=0)

    run = relationship("ExperimentRun", back_populates="rows")

    def __repr__(self) -> str:
        return f"<ReportRow(run={self.run_id}, x={self.x}, fitted_D={self.fitted_D})>"
