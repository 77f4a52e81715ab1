"""Thread fan-out for independent fits."""
import logging

from django.conf import settings
from joblib import Parallel, delayed

logger = logging.getLogger(__name__)


def worker_count(n_jobs=None):
    """Workers to use; falls back to LSVAR_THREADS."""
    if n_jobs is None:
        n_jobs = getattr(settings, 'LSVAR_THREADS', 1)
    return max(1, int(n_jobs))


def parallel_map(func, items, n_jobs=None):
    """Apply `func` to every item; results keep input order."""
    items = list(items)
    n_jobs = worker_count(n_jobs)
    if n_jobs == 1 or len(items) < 2:
        return [func(item) for item in items]
    logger.debug(f"Dispatching {len(items)} jobs on {n_jobs} threads")
    return Parallel(n_jobs=n_jobs, prefer="threads")(delayed(func)(item) for item in items)
