"""Deterministic random streams fanned out from one root seed.

Every command takes a single root seed; independent parts of a run (data
sampling, weight init, time plans, augmentation, shuffling) each pull from a
named stream so that perturbing one knob leaves the other streams untouched.
Streams are keyed by ``(root_seed, stable_hash(name), *indices)`` through
``numpy.random.SeedSequence``, which is stable across platforms and numpy
versions.  Deriving per-epoch or per-sample generators from explicit indices
(rather than drawing sequentially from one long stream) is what makes
checkpoint resume bit-exact.
"""

from __future__ import annotations

import hashlib
import os

import numpy as np

from .errors import ConfigurationError

STREAMS = ("data-train", "data-test", "init", "time-plans", "augmentation", "shuffle")


def stream_key(name: str) -> int:
    """Stable 64-bit integer key for a stream name."""
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def named_generator(root_seed: int, name: str, *indices: int) -> np.random.Generator:
    """Generator for stream `name` of `root_seed`, optionally sub-indexed.

    The same ``(root_seed, name, indices)`` triple always yields a generator
    producing the identical draw sequence.
    """
    entropy = [int(root_seed), stream_key(name), *[int(i) for i in indices]]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def child_seed(root_seed: int, name: str, *indices: int) -> int:
    """Derived integer seed, for APIs that take a seed rather than a generator."""
    entropy = [int(root_seed), stream_key(name), *[int(i) for i in indices]]
    return int(np.random.SeedSequence(entropy).generate_state(1, np.uint64)[0])


def worker_count() -> int:
    """Worker cap honoring the OPFLOW_THREADS environment variable.

    Parallel sections (independent tapes, per-time evaluation) use at most
    this many threads; unset or invalid values fall back to the CPU count.
    """
    raw = os.environ.get("OPFLOW_THREADS")
    available = os.cpu_count() or 1
    if raw is None or raw == "":
        return available
    try:
        requested = int(raw)
    except ValueError as exc:
        raise ConfigurationError(f"OPFLOW_THREADS must be an integer, got {raw!r}") from exc
    if requested < 1:
        raise ConfigurationError(f"OPFLOW_THREADS must be >= 1, got {requested}")
    return min(requested, available)
