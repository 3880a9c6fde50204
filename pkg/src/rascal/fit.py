"""Residual fit statistics.

INFIT is the information-weighted mean square ``sum V z^2 / sum V``; OUTFIT
is the plain mean of ``z^2``.  Both are standardised to ZSTD with the
Wilson-Hilferty cube-root transform, using the model variance of the
mean-square built from fourth central moments of each response.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .model import score_moments

ZSTD_DISPLAY_CAP = 9.9


class FitPreconditionError(ValueError):
    """A defined cell has zero model variance."""


@dataclass(frozen=True)
class FitThresholds:
    lower: float = 0.5
    upper: float = 1.5
    advisory_mnsq: float = 1.4
    advisory_zstd: float = 2.0


@dataclass
class ResidualMatrix:
    z: np.ndarray
    raw: np.ndarray
    expected: np.ndarray
    variance: np.ndarray
    kurtosis: np.ndarray

    @property
    def observed(self):
        return ~np.isnan(self.z)


@dataclass
class FitRecord:
    infit_mnsq: float
    outfit_mnsq: float
    infit_zstd: float
    outfit_zstd: float
    flag: str = "ok"
    advisory: bool = False

    @property
    def worst_misfit(self) -> float:
        return max(abs(self.infit_mnsq - 1.0), abs(self.outfit_mnsq - 1.0))

    def as_dict(self):
        return asdict(self)


@dataclass
class FitReport:
    persons: list
    items: list
    residuals: ResidualMatrix
    thresholds: FitThresholds

    def item_array(self, attr):
        return np.array([getattr(r, attr) for r in self.items])

    def person_array(self, attr):
        return np.array([getattr(r, attr) for r in self.persons])


def standardized_residuals(matrix, calibration) -> ResidualMatrix:
    """Standardised residuals ``(x - E) / sqrt(V)``; missing cells stay NaN."""
    probs = calibration.category_probs()
    e, v, kurt = score_moments(probs)
    obs = matrix.observed
    if np.any(v[obs] <= 0):
        raise FitPreconditionError("zero model variance in a defined cell; measures are not finite")
    x = matrix.cells
    raw = np.where(obs, x - e, np.nan)
    z = np.where(obs, raw / np.sqrt(np.where(obs, v, 1.0)), np.nan)
    return ResidualMatrix(z=z, raw=raw, expected=np.where(obs, e, np.nan),
                          variance=np.where(obs, v, np.nan), kurtosis=np.where(obs, kurt, np.nan))


def wilson_hilferty(mnsq, q):
    """ZSTD from a mean-square and the standard deviation ``q`` of its sampling distribution."""
    mnsq = np.asarray(mnsq, dtype=float)
    q = np.asarray(q, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return (np.cbrt(mnsq) - 1.0) * (3.0 / q) + q / 3.0


def _mean_squares(res: ResidualMatrix, axis: int):
    obs = res.observed
    z2 = np.where(obs, res.z**2, 0.0)
    v = np.where(obs, res.variance, 0.0)
    c = np.where(obs, res.kurtosis, 0.0)
    n = obs.sum(axis=axis)
    infit = (v * z2).sum(axis=axis) / v.sum(axis=axis)
    outfit = z2.sum(axis=axis) / n
    with np.errstate(divide="ignore", invalid="ignore"):
        # Var(z^2) per cell is C / V^2 - 1; Var((x-E)^2) is C - V^2.
        q2_out = np.where(obs, c / np.where(obs, v, 1.0) ** 2 - 1.0, 0.0).sum(axis=axis) / n**2
        q2_in = (c - v**2).sum(axis=axis) / v.sum(axis=axis) ** 2
    q_out = np.sqrt(np.maximum(q2_out, 0.0))
    q_in = np.sqrt(np.maximum(q2_in, 0.0))
    return infit, outfit, wilson_hilferty(infit, q_in), wilson_hilferty(outfit, q_out)


def classify(infit, outfit, infit_zstd, outfit_zstd, thresholds=FitThresholds()):
    """Return ``(flag, advisory)`` for one set of fit statistics."""
    if max(infit, outfit) > thresholds.upper:
        flag = "underfit"
    elif min(infit, outfit) < thresholds.lower:
        flag = "overfit"
    else:
        flag = "ok"
    advisory = bool(
        max(infit, outfit) > thresholds.advisory_mnsq
        or max(abs(infit_zstd), abs(outfit_zstd)) > thresholds.advisory_zstd
    )
    return flag, advisory


def fit_statistics(residuals: ResidualMatrix, calibration=None,
                   thresholds: FitThresholds | None = None) -> FitReport:
    """Per-person and per-item INFIT/OUTFIT mean squares and ZSTD."""
    thresholds = thresholds or FitThresholds()
    records = []
    for axis in (1, 0):
        stats = _mean_squares(residuals, axis)
        rows = []
        for infit, outfit, zin, zout in zip(*stats):
            flag, advisory = classify(infit, outfit, zin, zout, thresholds)
            rows.append(FitRecord(float(infit), float(outfit), float(zin), float(zout), flag, advisory))
        records.append(rows)
    return FitReport(persons=records[0], items=records[1], residuals=residuals, thresholds=thresholds)


def display_zstd(value: float) -> float:
    """ZSTD clipped to the +/-9.9 range used in printed tables."""
    return float(np.clip(value, -ZSTD_DISPLAY_CAP, ZSTD_DISPLAY_CAP))
