"""Seed derivation and deterministic worker-pool helpers.

All randomness in the package flows from a single integer seed. Stage and
sentence seeds are derived by hashing, never by sharing one RNG stream, so
results do not depend on processing order or worker count.
"""

import hashlib
import random
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Iterator, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def derive_seed(seed: int, *labels) -> int:
    """Derive a stable 64-bit sub-seed from a root seed and label path."""
    digest = hashlib.sha256()
    digest.update(str(seed).encode())
    for label in labels:
        digest.update(b"/")
        digest.update(str(label).encode())
    return int.from_bytes(digest.digest()[:8], "big")


def sentence_rng(seed: int, index: int) -> random.Random:
    """Private RNG for one sentence; independent of batching and threads."""
    return random.Random(derive_seed(seed, index))


def ordered_map(
    fn: Callable[[T], R],
    items: Iterable[T],
    threads: int = 1,
    window: int = 256,
) -> Iterator[R]:
    """map() preserving input order, optionally fanned out over a thread pool.

    Keeps at most `window` tasks in flight so streams are never fully
    materialized. With threads <= 1 this is a plain map.
    """
    if threads <= 1:
        yield from map(fn, items)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        pending = deque()
        iterator = iter(items)
        for item in iterator:
            pending.append(pool.submit(fn, item))
            if len(pending) >= window:
                yield pending.popleft().result()
        while pending:
            yield pending.popleft().result()
