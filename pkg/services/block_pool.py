"""
BlockPool: runs CPU-bound blocks on worker threads and hands results back in block order.
Block boundaries are fixed by the caller, so reductions do not depend on the worker count.
"""
import asyncio
import logging
import math
from typing import Any, Callable, Dict, Iterable, List, Sequence, Tuple, TypeVar

logger = logging.getLogger("SieveLab.block_pool")

T = TypeVar("T")
R = TypeVar("R")


class BlockPool:
    """
    Asynchronous block runner with:
    - A bounded number of concurrent worker threads
    - Results returned in submission order
    - Failure logging before the error propagates
    - Per-pool statistics
    """

    def __init__(self, workers: int = 1):
        """
        Initialize BlockPool.

        Args:
            workers: Maximum number of blocks processed concurrently
        """
        if workers < 1:
            raise ValueError(f"workers must be >= 1, got {workers}")
        self._workers = workers
        self._semaphore = None
        self._stats = {"blocks": 0, "failed": 0}

    @property
    def workers(self) -> int:
        return self._workers

    def get_stats(self) -> Dict[str, int]:
        """Get processing statistics."""
        return self._stats.copy()

    async def _run_one(self, fn: Callable[[T], R], block: T, block_id: int) -> R:
        async with self._semaphore:
            logger.debug(f"Block {block_id}: started")
            try:
                result = await asyncio.to_thread(fn, block)
            except Exception:
                self._stats["failed"] += 1
                logger.exception(f"Block {block_id}: failed")
                raise
            self._stats["blocks"] += 1
            logger.debug(f"Block {block_id}: done")
            return result

    async def map_blocks(self, fn: Callable[[T], R], blocks: Sequence[T]) -> List[R]:
        """Apply fn to every block; the result list follows the order of blocks."""
        self._semaphore = asyncio.Semaphore(self._workers)
        tasks = [
            asyncio.create_task(self._run_one(fn, block, i))
            for i, block in enumerate(blocks)
        ]
        try:
            return await asyncio.gather(*tasks)
        finally:
            for task in tasks:
                task.cancel()


def run_blocks(fn: Callable[[T], R], blocks: Sequence[T], workers: int = 1) -> List[R]:
    """Synchronous entry point; one worker runs the blocks inline."""
    if workers <= 1:
        return [fn(block) for block in blocks]
    pool = BlockPool(workers)
    results = asyncio.run(pool.map_blocks(fn, blocks))
    logger.debug(f"BlockPool finished: {pool.get_stats()}")
    return results


def integer_blocks(lo: int, hi: int, block_size: int) -> List[Tuple[int, int]]:
    """Split (lo, hi] into consecutive half-open blocks (a, b] of at most block_size integers."""
    if block_size < 1:
        raise ValueError(f"block_size must be >= 1, got {block_size}")
    blocks = []
    a = lo
    while a < hi:
        b = min(a + block_size, hi)
        blocks.append((a, b))
        a = b
    return blocks


def ordered_fsum(parts: Iterable[float]) -> float:
    """Correctly rounded sum of partial results, taken in block order."""
    return math.fsum(parts)
