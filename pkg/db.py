"""
Results database using SQLAlchemy with thread-safe session management.
All methods are synchronous but safe to call from asyncio via asyncio.to_thread().
SQLite by default; any SQLAlchemy URL works.
"""
import json
import logging
import os
import time
from contextlib import contextmanager
from typing import Any, Dict, List, Optional

from sqlalchemy import create_engine, event
from sqlalchemy.orm import Session, scoped_session, sessionmaker
from sqlalchemy.pool import StaticPool

from models import Base, ExperimentRun, ReportRow

logger = logging.getLogger("SieveLab.db")

DEFAULT_DB_URL = "sqlite:///./data/sievelab.db"


class ResultsDB:
    """
    Thread-safe store for experiment runs and their report rows.
    Uses scoped_session so block workers may record from their threads.
    """

    def __init__(self, db_url: Optional[str] = None):
        """
        Initialize database connection.

        Args:
            db_url: SQLAlchemy connection string. Defaults to env SIEVELAB_DB_URL or sqlite.
        """
        self.db_url = db_url or os.getenv("SIEVELAB_DB_URL", DEFAULT_DB_URL)

        if self.db_url.startswith("sqlite"):
            connect_args = {"check_same_thread": False}
            if ":memory:" in self.db_url:
                self.engine = create_engine(
                    self.db_url,
                    connect_args=connect_args,
                    poolclass=StaticPool,
                    future=True
                )
            else:
                path = self.db_url.split("///", 1)[-1]
                if os.path.dirname(path):
                    os.makedirs(os.path.dirname(path), exist_ok=True)
                self.engine = create_engine(self.db_url, connect_args=connect_args, future=True)

            @event.listens_for(self.engine, "connect")
            def set_sqlite_pragma(dbapi_conn, connection_record):
                cursor = dbapi_conn.cursor()
                cursor.execute("PRAGMA journal_mode=WAL")
                cursor.execute("PRAGMA synchronous=NORMAL")
                cursor.execute("PRAGMA foreign_keys=ON")
                cursor.close()
        else:
            self.engine = create_engine(self.db_url, future=True, pool_pre_ping=True)

        session_factory = sessionmaker(bind=self.engine, autoflush=False, expire_on_commit=False)
        self.Session = scoped_session(session_factory)

        Base.metadata.create_all(self.engine)
        logger.info(f"Results database initialized: {self.db_url}")

    @contextmanager
    def session_scope(self):
        """
        Provide a transactional scope for database operations.
        Automatically commits on success, rolls back on error.
        """
        session = self.Session()
        try:
            yield session
            session.commit()
        except Exception:
            session.rollback()
            raise
        finally:
            session.close()

    def session(self) -> Session:
        """Get a new session. Caller must close it."""
        return self.Session()

    # === Run Methods ===

    def record_report(self, config: Dict[str, Any], report) -> int:
        """Store a finished report; returns the run id."""
        with self.session_scope() as s:
            run = ExperimentRun(
                created_at=int(time.time()),
                status="complete",
                config=json.dumps(config, sort_keys=True),
                run_metadata=json.dumps(report.metadata, sort_keys=True),
            )
            for row in report.rows:
                run.rows.append(ReportRow(
                    x=row.x,
                    lhs=row.lhs,
                    rhs_theorem_core=row.rhs_theorem_core,
                    rhs_corollary_core=row.rhs_corollary_core,
                    fitted_D=row.fitted_D,
                    majorant_violations=row.majorant_violations,
                    runtime_ms=row.runtime_ms,
                ))
            s.add(run)
            s.flush()
            run_id = run.id
            logger.info(f"Recorded run {run_id} with {len(report.rows)} rows")
            return run_id

    def record_failure(self, config: Dict[str, Any], failed_x: int, error: str) -> int:
        """Store a run that aborted at failed_x."""
        with self.session_scope() as s:
            run = ExperimentRun(
                created_at=int(time.time()),
                status="failed",
                failed_x=failed_x,
                error=error,
                config=json.dumps(config, sort_keys=True),
            )
            s.add(run)
            s.flush()
            run_id = run.id
            logger.warning(f"Recorded failed run {run_id} at x={failed_x}")
            return run_id

    def list_runs(self, status: Optional[str] = None) -> List[ExperimentRun]:
        """All runs, newest first, optionally filtered by status."""
        with self.session_scope() as s:
            q = s.query(ExperimentRun)
            if status:
                q = q.filter_by(status=status)
            return q.order_by(ExperimentRun.id.desc()).all()

    def get_run(self, run_id: int) -> Optional[ExperimentRun]:
        with self.session_scope() as s:
            return s.get(ExperimentRun, run_id)

    def get_run_rows(self, run_id: int) -> List[ReportRow]:
        """Rows of a run in increasing x."""
        with self.session_scope() as s:
            return (
                s.query(ReportRow)
                .filter_by(run_id=run_id)
                .order_by(ReportRow.x)
                .all()
            )

    def remove_run(self, run_id: int) -> bool:
        """Remove a run and its rows. Returns True if removed."""
        with self.session_scope() as s:
            run = s.get(ExperimentRun, run_id)
            if run:
                s.delete(run)
                logger.info(f"Removed run {run_id}")
                return True
            return False
