"""Random sinusoidal excitation schedules for data collection.

A schedule is a sum of one to three sinusoids per joint, drawn
deterministically from a seed. Amplitudes are re-drawn (and finally scaled)
until the signal spends at least the required fraction of samples beyond
both dead-zone edges, so the conditioned-signal map is identifiable from the
data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ExcitationRanges:
    """Draw ranges plus the dead-zone band the signal must cross."""

    amp_min: float = 0.3
    amp_max: float = 0.8
    freq_min: float = 0.05   # Hz
    freq_max: float = 0.4    # Hz
    max_components: int = 3
    dead_left: tuple = (-0.2, -0.1)
    dead_right: tuple = (0.1, 0.2)
    min_coverage: float = 0.10
    max_redraws: int = 20

    def __post_init__(self):
        if not 0.0 <= self.amp_min <= self.amp_max:
            raise ValueError("need 0 <= amp_min <= amp_max")
        if not 0.0 < self.freq_min <= self.freq_max:
            raise ValueError("need 0 < freq_min <= freq_max")
        if not 1 <= self.max_components <= 8:
            raise ValueError("max_components must be in 1..8")


def _joint_signal(rng, ranges: ExcitationRanges, t: np.ndarray) -> np.ndarray:
    k = int(rng.integers(1, ranges.max_components + 1))
    amps = rng.uniform(ranges.amp_min, ranges.amp_max, size=k) / k
    freqs = rng.uniform(ranges.freq_min, ranges.freq_max, size=k)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=k)
    u = np.zeros_like(t)
    for a, f, ph in zip(amps, freqs, phases):
        u += a * np.sin(2.0 * np.pi * f * t + ph)
    return u


def coverage(u: np.ndarray, dead_left: float,
             dead_right: float) -> tuple[float, float]:
    """Fractions of samples above the right and below the left edge."""
    n = u.shape[0]
    return float(np.sum(u > dead_right) / n), float(np.sum(u < dead_left) / n)


def gen_excitation(seed: int, ranges: ExcitationRanges, duration: float,
                   dt: float) -> np.ndarray:
    """Input schedule of shape (n_samples, 2), deterministic per seed.

    A zero amplitude range yields the all-zero schedule (coverage is then
    not enforced).
    """
    if duration <= 0.0 or dt <= 0.0:
        raise ValueError("duration and dt must be positive")
    rng = np.random.default_rng(seed)
    t = np.arange(0.0, duration, dt)
    u = np.zeros((t.shape[0], 2))
    if ranges.amp_max == 0.0:
        return u
    for j in range(2):
        dl, dr = ranges.dead_left[j], ranges.dead_right[j]
        sig = _joint_signal(rng, ranges, t)
        for _ in range(ranges.max_redraws):
            above, below = coverage(sig, dl, dr)
            if above >= ranges.min_coverage and below >= ranges.min_coverage:
                break
            sig = _joint_signal(rng, ranges, t)
        else:
            # last resort: scale up to the band edge requirement
            need = 2.0 * max(abs(dl), dr)
            peak = np.max(np.abs(sig))
            if peak > 0.0:
                sig = sig * max(1.0, need / peak)
        u[:, j] = sig
    return u
