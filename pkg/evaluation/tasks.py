"""Celery tasks for benchmark replicates."""
from celery import shared_task

from .utils import run_replicate


@shared_task
def run_replicate_task(name, seed, method='two-step', options=None):
    """Simulate, detect and score one replicate of a catalog scenario."""
    return run_replicate(name, seed, method, options)
