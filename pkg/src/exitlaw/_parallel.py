"""Deterministic fan-out of independent trajectories over a worker pool.

Work is cut into fixed-size blocks and block ``b`` of stage ``s`` always
draws from ``SeedSequence(seed, spawn_key=(*s, b))``, so results do not depend
on the number of workers.  A stage is an int or a tuple of ints.
"""

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

BLOCK_SIZE = 50_000


def worker_count() -> int:
    env = os.environ.get("EXITLAW_THREADS")
    if env:
        n = int(env)
        if n < 1:
            raise ValueError("EXITLAW_THREADS must be >= 1")
        return n
    return os.cpu_count() or 1


def stream(seed: int, stage, block: int = 0) -> np.random.Generator:
    key = tuple(stage) if isinstance(stage, tuple) else (stage,)
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key + (block,)))


def block_sizes(n_total: int, block_size: int = BLOCK_SIZE) -> list:
    full, rest = divmod(n_total, block_size)
    return [block_size] * full + ([rest] if rest else [])


def fan_out(task, n_total: int, seed: int, stage, *, block_size: int = BLOCK_SIZE,
            workers: int | None = None) -> list:
    """Run ``task(n, rng)`` on every block; results come back in block order."""
    jobs = [(n, stream(seed, stage, b)) for b, n in enumerate(block_sizes(n_total, block_size))]
    workers = worker_count() if workers is None else workers
    if workers == 1 or len(jobs) == 1:
        return [task(n, rng) for n, rng in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda job: task(*job), jobs))
