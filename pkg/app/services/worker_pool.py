"""Ordered fan-out of independent work items over joblib threads."""

import logging
import os
from typing import Callable, Iterable, List, Optional, TypeVar

from joblib import Parallel, delayed

from app.core.config import Settings, settings as default_settings

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


class WorkerPool:
    def __init__(self, config: Optional[Settings] = None):
        self.settings = config or default_settings

    def resolve_threads(self, threads: Optional[int] = None) -> int:
        """Explicit cap, else POLARITON_LAB_THREADS, else one worker per CPU."""
        if threads is not None and threads > 0:
            return threads
        if self.settings.POLARITON_LAB_THREADS > 0:
            return self.settings.POLARITON_LAB_THREADS
        return os.cpu_count() or 1

    def map(self, func: Callable[[T], R], items: Iterable[T], threads: Optional[int] = None) -> List[R]:
        """Results in submission order regardless of the worker count."""
        items = list(items)
        n_jobs = min(self.resolve_threads(threads), max(len(items), 1))
        if n_jobs == 1:
            return [func(item) for item in items]
        logger.debug("Dispatching %d items over %d threads", len(items), n_jobs)
        return Parallel(n_jobs=n_jobs, prefer="threads")(delayed(func)(item) for item in items)


worker_pool = WorkerPool()
