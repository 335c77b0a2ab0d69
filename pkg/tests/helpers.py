"""Shared, cached fixtures for the slower end-to-end tests."""
import time
from functools import lru_cache

from fracwest.experiments import ExperimentConfig, reconstruct

ACCEPTANCE_LINES = []


@lru_cache(maxsize=None)
def timed_reconstruction(case: str = "A", noise: float = 0.001, **kw):
    t0 = time.perf_counter()
    rec = reconstruct(ExperimentConfig(case=case, noise_rel=noise, **kw))
    return rec, time.perf_counter() - t0


def reconstruction(case: str = "A", noise: float = 0.001, **kw):
    return timed_reconstruction(case, noise, **kw)[0]
