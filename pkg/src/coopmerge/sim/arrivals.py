"""Seeded arrival processes for the three entry streams."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError

STREAM_INNER = 0
STREAM_OUTER = 1
STREAM_RAMP = 2


def stream_rng(seed: int, stream: int, purpose: int = 0) -> np.random.Generator:
    """Independent generator for one (seed, stream, purpose) triple."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(stream), int(purpose)]))


def spawn_stream(
    flow: float, duration: float, seed: int, min_headway: float = 1.0, stream: int = 0
) -> np.ndarray:
    """Arrival times of a shifted-exponential headway process.

    Args:
        flow: Mean flow in vehicles per hour.
        duration: Horizon in seconds; arrivals are strictly before it.
        seed: Base seed.
        min_headway: Shift of the headway distribution in seconds.
        stream: Stream key so different entries draw independent sequences.

    Returns:
        Sorted arrival times.

    Raises:
        ConfigError: the mean headway does not exceed ``min_headway``.
    """
    if flow < 0:
        raise ConfigError("flow must be non-negative")
    if flow == 0 or duration <= 0:
        return np.empty(0)
    mean = 3600.0 / flow
    if mean <= min_headway and min_headway > 0:
        raise ConfigError(f"flow {flow} veh/h too high for a {min_headway} s minimum headway")
    rng = stream_rng(seed, stream)
    scale = mean - min_headway
    chunks = []
    t_last = 0.0
    n = int(duration / mean * 1.2) + 16
    while True:
        h = min_headway + rng.exponential(scale, n)
        times = t_last + np.cumsum(h)
        chunks.append(times)
        t_last = float(times[-1])
        if t_last >= duration:
            break
    # the first arrival follows one headway after t=0
    out = np.concatenate(chunks)
    return out[out < duration]


def class_draws(n: int, cat_share: float, seed: int, stream: int) -> np.ndarray:
    """Vehicle classes for ``n`` arrivals: 0 for CAV, 1 for CAT."""
    if n == 0:
        return np.empty(0, np.int64)
    rng = stream_rng(seed, stream, purpose=1)
    return (rng.random(n) < cat_share).astype(np.int64)
