"""Tracking-error and prediction-accuracy metrics.

Trajectory error compares time-aligned points; path error measures each
actual sample against the nearest point of the densely sampled reference
path, so a purely phase-lagged run scores near zero path error. Both default
to the standard root-mean-square of Euclidean distances; the literal
square-root-of-mean-norms variant is available behind a flag.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _distances(actual: np.ndarray, reference: np.ndarray) -> np.ndarray:
    actual = np.asarray(actual, dtype=float)
    reference = np.asarray(reference, dtype=float)
    if actual.shape != reference.shape:
        raise ValueError("series must have equal shapes")
    if actual.shape[0] == 0:
        raise ValueError("empty series")
    return np.linalg.norm(actual - reference, axis=1)


def rmse_trajectory(actual, reference, printed_formula: bool = False) -> float:
    """Time-aligned tracking error over two equal-length (N, 2) series."""
    d = _distances(actual, reference)
    if printed_formula:
        return float(np.sqrt(np.mean(d)))
    return float(np.sqrt(np.mean(d ** 2)))


def rmse_path(actual, reference_path, printed_formula: bool = False) -> float:
    """Time-free path error: nearest reference sample per actual sample."""
    actual = np.asarray(actual, dtype=float)
    ref = np.asarray(reference_path, dtype=float)
    if actual.shape[0] == 0 or ref.shape[0] == 0:
        raise ValueError("empty series")
    # (N, M) pairwise distances; series are small enough to hold in memory
    diff = actual[:, None, :] - ref[None, :, :]
    d = np.min(np.linalg.norm(diff, axis=2), axis=1)
    if printed_formula:
        return float(np.sqrt(np.mean(d)))
    return float(np.sqrt(np.mean(d ** 2)))


@dataclass(frozen=True)
class EtaResult:
    """Prediction-accuracy summary: histogram-expected eta plus bookkeeping."""

    eta: float
    n_used: int
    n_excluded: int
    histogram: np.ndarray  # counts over 1% bins, centers 0.00 .. 1.00


def prediction_accuracy(predicted_delta, actual_delta,
                        floor: float = 1e-5) -> EtaResult:
    """Expected per-sample accuracy ``1 - |(pred - actual)/actual|``.

    Samples with ``|actual| < floor`` are excluded (the ratio is undefined as
    the change vanishes); remaining accuracies are clipped to [0, 1], binned
    at 1% resolution, and averaged over the histogram. Raises ``ValueError``
    when every sample is excluded.
    """
    pred = np.asarray(predicted_delta, dtype=float).ravel()
    act = np.asarray(actual_delta, dtype=float).ravel()
    if pred.shape != act.shape:
        raise ValueError("series must have equal length")
    keep = np.abs(act) >= floor
    n_excluded = int(np.sum(~keep))
    if not np.any(keep):
        raise ValueError("all samples below the magnitude floor; "
                         "eta undefined")
    eta = 1.0 - np.abs((pred[keep] - act[keep]) / act[keep])
    binned = np.clip(np.round(eta * 100.0), 0.0, 100.0).astype(int)
    hist = np.bincount(binned, minlength=101)
    centers = np.arange(101) / 100.0
    expected = float(np.sum(hist * centers) / np.sum(hist))
    return EtaResult(eta=expected, n_used=int(np.sum(keep)),
                     n_excluded=n_excluded, histogram=hist)


@dataclass(frozen=True)
class Metrics:
    """Per-episode summary; path error can never exceed trajectory error."""

    rmse_path: float
    rmse_trajectory: float
    eta: tuple | None            # per joint, None when no model ran
    saturation_fraction: float
    max_abs_z1: float
    printed_formula: bool = False

    def __post_init__(self):
        if self.rmse_path > self.rmse_trajectory + 1e-12:
            raise ValueError("rmse_path exceeds rmse_trajectory")

    def as_dict(self) -> dict:
        d = {"rmse_path": self.rmse_path,
             "rmse_trajectory": self.rmse_trajectory,
             "saturation_fraction": self.saturation_fraction,
             "max_abs_z1": self.max_abs_z1,
             "printed_formula": self.printed_formula}
        if self.eta is not None:
            for i, e in enumerate(self.eta):
                d[f"eta_joint{i}"] = e
        return d
