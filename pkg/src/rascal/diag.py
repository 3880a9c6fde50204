"""Dimensionality and classical-test diagnostics.

PCA of a persons x items matrix (standardised residuals or raw scores),
Kaiser-normalised varimax, KMO and Bartlett's sphericity test, Horn's
parallel analysis, and Cronbach's alpha with item-total statistics.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .simulate import RNG_ALGORITHM, spawn_rngs

SMITH_MIAO_CUTOFF = 1.4
SINGULAR_DET = 1e-12


class DiagnosticError(ValueError):
    pass


@dataclass
class PcaResult:
    correlation: np.ndarray
    determinant: float
    kmo: float
    bartlett_chi2: float
    bartlett_df: int
    bartlett_p: float
    eigenvalues: np.ndarray
    loadings: np.ndarray
    rotated_loadings: np.ndarray | None
    variance_pct: np.ndarray
    n_obs: int = 0
    annotations: dict = field(default_factory=dict)

    def as_dict(self):
        d = {}
        for k, v in asdict(self).items():
            d[k] = v.tolist() if isinstance(v, np.ndarray) else v
        return d


@dataclass
class ParallelResult:
    replications: int
    mean_eigenvalues: np.ndarray
    pct95_eigenvalues: np.ndarray
    retained: int | None = None
    seed: int | None = None
    rng: str = RNG_ALGORITHM

    def as_dict(self):
        return {
            "replications": self.replications,
            "seed": self.seed,
            "rng": self.rng,
            "mean_eigenvalues": self.mean_eigenvalues.tolist(),
            "pct95_eigenvalues": self.pct95_eigenvalues.tolist(),
            "retained": self.retained,
        }


@dataclass
class ItemTotal:
    item_id: str
    scale_mean_if_deleted: float
    scale_variance_if_deleted: float
    corrected_item_total: float
    squared_multiple_correlation: float
    alpha_if_deleted: float


@dataclass
class CttResult:
    alpha: float
    alpha_standardized: float
    n_items: int
    n_cases: int
    items: list

    def as_dict(self):
        return asdict(self)


# -- correlation-matrix statistics -----------------------------------------

def correlation_matrix(data) -> np.ndarray:
    x = np.asarray(data, dtype=float)
    sd = x.std(axis=0)
    if np.any(sd == 0):
        raise DiagnosticError(f"constant columns {np.flatnonzero(sd == 0).tolist()} have no correlation")
    return np.corrcoef(x, rowvar=False)


def kmo(corr) -> float:
    """Overall Kaiser-Meyer-Olkin adequacy from the anti-image correlations."""
    corr = np.asarray(corr, dtype=float)
    inv = np.linalg.pinv(corr)
    d = np.sqrt(np.outer(np.diag(inv), np.diag(inv)))
    partial = -inv / d
    off = ~np.eye(corr.shape[0], dtype=bool)
    r2 = np.sum(corr[off] ** 2)
    p2 = np.sum(partial[off] ** 2)
    if r2 + p2 == 0:
        return math.nan  # no off-diagonal structure at all
    return float(r2 / (r2 + p2))


def bartlett_sphericity(determinant, n, p):
    """Bartlett statistic ``-(n - 1 - (2p + 5)/6) ln|R|`` with df and upper-tail p.

    A zero determinant yields an infinite statistic.
    """
    df = p * (p - 1) // 2
    if determinant <= 0:
        return math.inf, df, 0.0
    chi2 = -(n - 1 - (2 * p + 5) / 6.0) * math.log(determinant)
    return chi2, df, float(stats.chi2.sf(chi2, df))


def varimax(loadings, normalize=True, tol=1e-6, max_iter=500):
    """Orthogonal varimax rotation.

    Returns
    -------
    rotated : ndarray
    rotation : ndarray
        ``rotated = loadings @ rotation``.
    """
    a = np.array(loadings, dtype=float)
    p, k = a.shape
    if k < 2:
        return a.copy(), np.eye(k)
    h = np.sqrt(np.sum(a**2, axis=1)) if normalize else np.ones(p)
    h_safe = np.where(h > 0, h, 1.0)
    a_n = a / h_safe[:, None]
    rot = np.eye(k)
    crit = 0.0
    for _ in range(max_iter):
        lam = a_n @ rot
        grad = a_n.T @ (lam**3 - lam @ np.diag(np.sum(lam**2, axis=0)) / p)
        u, s, vt = np.linalg.svd(grad)
        rot = u @ vt
        new = np.sum(s)
        if new < crit * (1 + tol):
            break
        crit = new
    rotated = (a_n @ rot) * h_safe[:, None]
    return rotated, rot


def _orient(vectors):
    # Make the largest-magnitude entry of each component positive.
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def pca(data, n_components=2) -> PcaResult:
    """Principal components of the column correlation matrix.

    Rows containing missing values are dropped.  A singular correlation
    matrix is reported with determinant 0 and no rotation.
    """
    x = np.asarray(data, dtype=float)
    x = x[~np.isnan(x).any(axis=1)]
    n, length = x.shape
    if length < 2:
        raise DiagnosticError("PCA needs at least two columns")
    if n <= length:
        raise DiagnosticError(f"PCA needs more complete rows ({n}) than columns ({length})")
    corr = correlation_matrix(x)
    evals, evecs = np.linalg.eigh(corr)
    order = np.argsort(evals)[::-1]
    evals = evals[order]
    evecs = _orient(evecs[:, order])
    loadings = evecs * np.sqrt(np.clip(evals, 0.0, None))
    det = float(np.linalg.det(corr))
    singular = det < SINGULAR_DET
    if singular:
        det = 0.0
    chi2, df, p = bartlett_sphericity(det, n, length)
    k = int(min(max(n_components, 1), length))
    rotated = None if singular else varimax(loadings[:, :k])[0]
    annotations = {
        "n_eigen_gt_1": int(np.sum(evals > 1.0)),
        "n_eigen_gt_1_4": int(np.sum(evals > SMITH_MIAO_CUTOFF)),
        "first_to_second_ratio": float(evals[0] / evals[1]) if evals[1] > 0 else math.inf,
        "first_component_pct": float(100 * evals[0] / length),
    }
    if rotated is not None:
        annotations["rotated_variance"] = np.sum(rotated**2, axis=0).tolist()
    if singular:
        annotations["warning"] = "singular correlation matrix; rotation refused"
    return PcaResult(
        correlation=corr,
        determinant=det,
        kmo=kmo(corr),
        bartlett_chi2=chi2,
        bartlett_df=df,
        bartlett_p=p,
        eigenvalues=evals,
        loadings=loadings[:, :k],
        rotated_loadings=rotated,
        variance_pct=100 * evals / length,
        n_obs=n,
        annotations=annotations,
    )


def full_loadings(result: PcaResult) -> np.ndarray:
    """All ``L`` component loadings (reconstructs the correlation matrix)."""
    evals, evecs = np.linalg.eigh(result.correlation)
    order = np.argsort(evals)[::-1]
    return _orient(evecs[:, order]) * np.sqrt(np.clip(evals[order], 0.0, None))


# -- parallel analysis -----------------------------------------------------

def nearest_rank(sorted_values, pct):
    """Nearest-rank percentile along axis 0 of an ascending-sorted array."""
    r = sorted_values.shape[0]
    rank = max(1, math.ceil(pct / 100.0 * r))
    return sorted_values[rank - 1]


def random_eigenvalues(n, length, replications, seed):
    """Descending correlation eigenvalues of seeded standard-normal matrices."""
    out = np.empty((replications, length))
    for k, rng in enumerate(spawn_rngs(seed, replications)):
        x = rng.standard_normal((n, length))
        if length == 1:
            out[k] = 1.0
            continue
        out[k] = np.sort(np.linalg.eigvalsh(np.corrcoef(x, rowvar=False)))[::-1]
    return out


def parallel_analysis(n, length, replications=100, seed=0, observed=None, percentile=95) -> ParallelResult:
    """Horn's parallel analysis on ``n x length`` random normal data.

    ``retained`` counts components whose observed eigenvalue exceeds the
    95th-percentile random eigenvalue of the same root.
    """
    if replications < 1:
        raise DiagnosticError("replications must be at least 1")
    ev = random_eigenvalues(n, length, replications, seed)
    srt = np.sort(ev, axis=0)
    mean = ev.mean(axis=0)
    pct = nearest_rank(srt, percentile)
    retained = None
    if observed is not None:
        observed = np.asarray(observed, dtype=float)
        retained = int(np.sum(observed[:length] > pct))
    return ParallelResult(replications, mean, pct, retained, seed)


def scree_csv(observed, parallel: ParallelResult) -> str:
    lines = ["root,observed,mean_random,pct95_random"]
    for k, (o, m, p) in enumerate(zip(observed, parallel.mean_eigenvalues, parallel.pct95_eigenvalues), 1):
        lines.append(f"{k},{o:.6f},{m:.6f},{p:.6f}")
    return "\n".join(lines) + "\n"


# -- classical test theory -------------------------------------------------

def cronbach_alpha(x) -> float:
    x = np.asarray(x, dtype=float)
    k = x.shape[1]
    total_var = x.sum(axis=1).var(ddof=1)
    if total_var == 0:
        raise DiagnosticError("alpha undefined: total score has zero variance")
    return float(k / (k - 1) * (1 - x.var(axis=0, ddof=1).sum() / total_var))


def ctt_summary(matrix) -> CttResult:
    """Cronbach's alpha and item-total statistics on complete cases.

    Scores are reported in external points (internal score plus the item's
    minimum category).
    """
    x = matrix.external() if getattr(matrix, "scored", False) else np.asarray(
        getattr(matrix, "cells", matrix), dtype=float)
    item_ids = list(getattr(matrix, "item_ids", range(1, x.shape[1] + 1)))
    x = x[~np.isnan(x).any(axis=1)]
    n, k = x.shape
    if k < 2:
        raise DiagnosticError("alpha needs at least two items")
    alpha = cronbach_alpha(x)
    corr = np.corrcoef(x, rowvar=False)
    mean_r = corr[~np.eye(k, dtype=bool)].mean()
    alpha_std = k * mean_r / (1 + (k - 1) * mean_r)
    with np.errstate(divide="ignore", invalid="ignore"):
        smc = 1.0 - 1.0 / np.diag(np.linalg.pinv(corr))
    total = x.sum(axis=1)
    rows = []
    for i in range(k):
        rest = total - x[:, i]
        others = np.delete(x, i, axis=1)
        r_it = np.corrcoef(x[:, i], rest)[0, 1]
        a_del = cronbach_alpha(others) if k > 2 else math.nan
        rows.append(ItemTotal(str(item_ids[i]), float(rest.mean()), float(rest.var(ddof=1)),
                              float(r_it), float(smc[i]), a_del))
    return CttResult(alpha, float(alpha_std), k, n, rows)
