"""Counter-based random streams.

Every random draw in the package comes from a Philox generator keyed by a
master seed plus a tuple of integer stream ids (phase, trial, receiver, ...).
Because the key fully determines the stream, results do not depend on the
order in which trials are evaluated or on how many worker threads run them.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")

# Stream-id namespaces. Keeping them distinct guarantees that, e.g., the
# calibration noise for trial 3 never coincides with the detection noise
# for trial 3.
PHASE_CALIBRATION = 0
PHASE_VALIDATION = 1
PHASE_DETECTION = 2
PHASE_GOF_NULL = 3
PHASE_BOOTSTRAP = 4
PHASE_FADING = 5
PHASE_NOISE = 6

MASK64 = (1 << 64) - 1


def stream(master_seed: int, *key: int) -> np.random.Generator:
    """Return the generator for ``(master_seed, *key)``."""
    seq = np.random.SeedSequence(entropy=int(master_seed) & MASK64,
                                 spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(seq))


def complex_normal(rng: np.random.Generator, shape, power: float = 1.0) -> np.ndarray:
    """Circularly symmetric complex Gaussian samples with E|z|^2 = power."""
    if isinstance(shape, (int, np.integer)):
        shape = (int(shape),)
    z = rng.standard_normal(tuple(shape) + (2,))
    return np.sqrt(power / 2.0) * (z[..., 0] + 1j * z[..., 1])


def worker_count(workers: int | None = None) -> int:
    """Resolve the worker-thread count.

    An explicit argument wins; otherwise ``SPECSENSE_THREADS`` caps the
    pool, defaulting to the CPU count.
    """
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get("SPECSENSE_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return max(1, os.cpu_count() or 1)


def chunked_map(fn: Callable[[int, int], T], total: int, workers: int | None = None,
                chunk: int = 256) -> list[T]:
    """Apply ``fn(start, stop)`` over fixed-size index chunks of ``range(total)``.

    Results come back in chunk order whatever the scheduling, so callers that
    key their randomness by index get identical output for any thread count.
    """
    bounds: Sequence[tuple[int, int]] = [(s, min(s + chunk, total))
                                         for s in range(0, total, chunk)]
    n = worker_count(workers)
    if n == 1 or len(bounds) <= 1:
        return [fn(a, b) for a, b in bounds]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(lambda ab: fn(*ab), bounds))
