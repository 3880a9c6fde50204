"""PROX starting values and joint maximum-likelihood (UCON) calibration.

Persons, items and rating-scale thresholds are updated in alternating
Newton-Raphson sweeps.  Each sweep is Jacobi-style: every person update in
a sweep uses the same item and threshold values, and vice versa.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import DataError, DegenerateMatrixError, ResponseMatrix, TrimLog
from .model import CategoryStructure, rsm_category_probs

log = logging.getLogger(__name__)

PROX_VARIANCE_SCALE = 1.7**2


@dataclass(frozen=True)
class EstimationConfig:
    tolerance: float = 0.001
    max_iter: int = 100
    damping: float = 1.0
    bias_correction: bool = False
    # Largest |observed - expected| raw score still counted as converged.
    residual_tolerance: float = 0.01

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if not self.residual_tolerance > 0:
            raise ValueError("residual_tolerance must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if not self.damping > 0:
            raise ValueError("damping must be positive")


@dataclass(frozen=True)
class ProxInputs:
    H: float
    M: float
    omega2: float
    sigma2: float

    @property
    def X(self) -> float:
        return math.sqrt(1.0 + self.omega2 / PROX_VARIANCE_SCALE)

    @property
    def Y(self) -> float:
        return math.sqrt(1.0 + self.sigma2 / PROX_VARIANCE_SCALE)


@dataclass
class ProxEstimate:
    person: np.ndarray
    item: np.ndarray
    person_se: np.ndarray
    item_se: np.ndarray
    inputs: ProxInputs

    def __iter__(self):
        # Unpacks as (person measures, item measures).
        return iter((self.person, self.item))


@dataclass
class PersonRecord:
    person_id: str
    raw_score: float
    count: int
    measure: float
    se: float
    extreme: bool = False


@dataclass
class ItemRecord:
    item_id: str
    raw_score: float
    count: int
    measure: float
    se: float


@dataclass
class ConvergenceTrace:
    max_dbeta: list = field(default_factory=list)
    max_ddelta: list = field(default_factory=list)
    max_dtau: list = field(default_factory=list)
    loglik: list = field(default_factory=list)
    max_residual: list = field(default_factory=list)
    converged: bool = False

    @property
    def iterations(self) -> int:
        return len(self.loglik)

    def as_dict(self):
        d = asdict(self)
        d["iterations"] = self.iterations
        return d


@dataclass
class Calibration:
    """Result of :func:`jmle_calibrate`.

    ``matrix`` is the trimmed, scored matrix the parameters refer to.
    """

    matrix: ResponseMatrix
    persons: list
    items: list
    structure: CategoryStructure
    trace: ConvergenceTrace
    trim_log: TrimLog = field(default_factory=TrimLog)
    config: EstimationConfig = field(default_factory=EstimationConfig)

    @property
    def beta(self) -> np.ndarray:
        return np.array([p.measure for p in self.persons])

    @property
    def delta(self) -> np.ndarray:
        return np.array([i.measure for i in self.items])

    @property
    def tau(self) -> np.ndarray:
        return self.structure.tau

    @property
    def converged(self) -> bool:
        return self.trace.converged

    def category_probs(self) -> np.ndarray:
        """N x L x (m+1) model probabilities."""
        return rsm_category_probs(self.beta[:, None], self.delta[None, :], self.tau)

    def as_dict(self):
        s = self.structure
        return {
            "converged": self.trace.converged,
            "config": asdict(self.config),
            "trim_log": self.trim_log.as_dict(),
            "persons": [asdict(p) for p in self.persons],
            "items": [asdict(i) for i in self.items],
            "structure": {
                "tau": s.tau.tolist(),
                "tau_se": s.tau_se.tolist(),
                "thurstone": s.thurstone.tolist(),
                "category_measures": s.category_measures.tolist(),
                "observed_counts": s.observed_counts.tolist(),
            },
            "trace": self.trace.as_dict(),
        }


# -- PROX ------------------------------------------------------------------

def _logodds_inputs(matrix: ResponseMatrix):
    r = matrix.person_scores()
    r_max = matrix.person_max_scores()
    s = matrix.item_scores()
    s_max = matrix.item_max_scores()
    if np.any((r <= 0) | (r >= r_max)) or np.any((s <= 0) | (s >= s_max)):
        raise DataError("PROX needs a matrix without zero or perfect scores; run trim_extremes first")
    return np.log(r / (r_max - r)), np.log((s_max - s) / s)


def prox_initialize(matrix: ResponseMatrix, passes: int = 2) -> ProxEstimate:
    """Normal-approximation starting values.

    The first pass uses raw log-odds (H = M = 0, X = Y = 1).  Later passes
    expand by the spread of the other facet from the previous pass.  Item
    difficulties are centred at 0 on exit.
    """
    person_lo, item_lo = _logodds_inputs(matrix)
    # Pass 1: H = M = 0, X = Y = 1.
    b = person_lo
    d = item_lo - item_lo.mean()
    inputs = ProxInputs(0.0, 0.0, 0.0, 0.0)
    for _ in range(passes - 1):
        # H is the item mean (0 by identification); centring d absorbs M.
        inputs = ProxInputs(0.0, float(b.mean()), float(np.var(d)), float(np.var(b)))
        b = inputs.H + inputs.X * person_lo
        d = inputs.M + inputs.Y * item_lo
        d = d - d.mean()
    count_l = matrix.observed.sum(axis=1)
    count_n = matrix.observed.sum(axis=0)
    return ProxEstimate(
        person=b,
        item=d,
        person_se=2.5 / np.sqrt(count_l),
        item_se=2.5 / np.sqrt(count_n),
        inputs=inputs,
    )


# -- likelihood ------------------------------------------------------------

def _log_normalizer(theta, tau):
    steps = np.arange(tau.size + 1, dtype=float)
    cum_tau = np.concatenate([[0.0], np.cumsum(tau)])
    expo = steps * theta[..., None] - cum_tau
    top = expo.max(axis=-1)
    return top + np.log(np.exp(expo - top[..., None]).sum(axis=-1))


def loglikelihood(matrix, beta, delta, tau=None) -> float:
    """Joint log-likelihood over observed cells.

    For dichotomous data (``tau`` None or ``[0]``) this is
    ``sum r_v beta_v - sum s_i delta_i - sum ln(1 + exp(beta_v - delta_i))``.
    """
    x = matrix.cells if isinstance(matrix, ResponseMatrix) else np.asarray(matrix, float)
    if x.size == 0:
        return 0.0
    tau = np.zeros(1) if tau is None else np.atleast_1d(np.asarray(tau, float))
    beta = np.asarray(beta, float)
    delta = np.asarray(delta, float)
    obs = ~np.isnan(x)
    xf = np.where(obs, x, 0).astype(int)
    theta = beta[:, None] - delta[None, :]
    cum_tau = np.concatenate([[0.0], np.cumsum(tau)])
    cell = xf * theta - cum_tau[xf] - _log_normalizer(theta, tau)
    return float(np.sum(cell[obs]))


# -- JMLE ------------------------------------------------------------------

def _moments(beta, delta, tau, obs):
    probs = rsm_category_probs(beta[:, None], delta[None, :], tau)
    x = np.arange(tau.size + 1, dtype=float)
    e = probs @ x
    v = np.maximum(probs @ (x**2) - e**2, 0.0)
    return probs, np.where(obs, e, 0.0), np.where(obs, v, 0.0)


def _clamp(step, cap):
    return np.clip(step, -cap, cap)


def _person_sweep(x, obs, r, beta, delta, tau, cap):
    _, e, v = _moments(beta, delta, tau, obs)
    step = (r - e.sum(axis=1)) / v.sum(axis=1)
    return beta + _clamp(step, cap)


def _item_sweep(x, obs, s, beta, delta, tau, cap):
    _, e, v = _moments(beta, delta, tau, obs)
    step = -(s - e.sum(axis=0)) / v.sum(axis=0)
    return delta + _clamp(step, cap)


def _tail_counts(x, obs, m):
    xf = np.where(obs, x, -1)
    return np.array([np.sum(xf >= k) for k in range(1, m + 1)], dtype=float)


def _tau_sweep(obs, tail_obs, beta, delta, tau, cap):
    probs, _, _ = _moments(beta, delta, tau, obs)
    # P(X >= k) for k = 1..m
    tail = np.cumsum(probs[..., ::-1], axis=-1)[..., ::-1][..., 1:]
    tail = np.where(obs[..., None], tail, 0.0)
    expected = tail.sum(axis=(0, 1))
    info = (tail * (1.0 - tail)).sum(axis=(0, 1))
    step = (expected - tail_obs) / info
    return tau + _clamp(step, cap), info


def _recenter(beta, delta, tau):
    # Shifting all tau by c is the same as shifting every delta by c.
    c = tau.mean()
    tau = tau - c
    delta = delta + c
    shift = delta.mean()
    return beta - shift, delta - shift, tau


def _standard_errors(beta, delta, tau, obs):
    _, _, v = _moments(beta, delta, tau, obs)
    with np.errstate(divide="ignore"):
        return 1.0 / np.sqrt(v.sum(axis=1)), 1.0 / np.sqrt(v.sum(axis=0))


def _tau_standard_errors(beta, delta, tau, obs):
    probs, _, _ = _moments(beta, delta, tau, obs)
    tail = np.cumsum(probs[..., ::-1], axis=-1)[..., ::-1][..., 1:]
    tail = np.where(obs[..., None], tail, 0.0)
    info = (tail * (1.0 - tail)).sum(axis=(0, 1))
    return 1.0 / np.sqrt(info)


def estimate_persons(matrix, delta, tau, beta0=None, tolerance=1e-6, max_iter=100, damping=1.0):
    """Person measures with items and thresholds held fixed."""
    x = matrix.cells
    obs = matrix.observed
    r = matrix.person_scores()
    beta = np.zeros(x.shape[0]) if beta0 is None else np.array(beta0, float)
    for _ in range(max_iter):
        new = _person_sweep(x, obs, r, beta, delta, tau, damping)
        change = np.max(np.abs(new - beta))
        beta = new
        if change < tolerance:
            break
    return beta


def jmle_calibrate(matrix: ResponseMatrix, config: EstimationConfig | None = None,
                   trim_log: TrimLog | None = None, start=None) -> Calibration:
    """Joint maximum-likelihood calibration under the rating scale model.

    Parameters
    ----------
    matrix : ResponseMatrix
        Scored matrix without extreme persons or items.
    config : EstimationConfig, optional
    trim_log : TrimLog, optional
        Carried into the result for reporting.
    start : tuple of arrays, optional
        ``(beta, delta, tau)`` starting values; PROX is used otherwise.

    Returns
    -------
    Calibration
        ``trace.converged`` is False when ``max_iter`` sweeps were not enough.
    """
    config = config or EstimationConfig()
    if not matrix.scored:
        raise DataError("jmle_calibrate expects a scored matrix")
    n, length = matrix.shape
    if n < 1 or length < 1:
        raise DegenerateMatrixError("degenerate matrix: nothing to calibrate")
    m = matrix.n_steps
    x = matrix.cells
    obs = matrix.observed
    r = matrix.person_scores()
    s = matrix.item_scores()
    tail_obs = _tail_counts(x, obs, m)
    if m > 1 and (np.any(tail_obs == 0) or np.any(tail_obs == obs.sum())):
        raise DegenerateMatrixError("degenerate matrix: a rating category above the bottom is never used")

    if start is None:
        prox = prox_initialize(matrix)
        beta, delta, tau = prox.person, prox.item, np.zeros(m)
    else:
        beta, delta, tau = (np.array(a, dtype=float) for a in start)

    trace = ConvergenceTrace()
    cap = config.damping
    for it in range(config.max_iter):
        prev = beta, delta, tau
        beta = _person_sweep(x, obs, r, beta, delta, tau, cap)
        delta = _item_sweep(x, obs, s, beta, delta, tau, cap)
        if m > 1:
            tau, _ = _tau_sweep(obs, tail_obs, beta, delta, tau, cap)
        beta, delta, tau = _recenter(beta, delta, tau)
        db = float(np.max(np.abs(beta - prev[0])))
        dd = float(np.max(np.abs(delta - prev[1])))
        dt = float(np.max(np.abs(tau - prev[2]))) if m > 1 else 0.0
        trace.max_dbeta.append(db)
        trace.max_ddelta.append(dd)
        trace.max_dtau.append(dt)
        trace.loglik.append(loglikelihood(x, beta, delta, tau))
        _, e, _ = _moments(beta, delta, tau, obs)
        resid = float(max(np.max(np.abs(r - e.sum(axis=1))), np.max(np.abs(s - e.sum(axis=0)))))
        trace.max_residual.append(resid)
        if max(db, dd, dt) < config.tolerance and resid < config.residual_tolerance:
            trace.converged = True
            break
    if not trace.converged:
        log.warning("JMLE did not converge in %d iterations", config.max_iter)

    if config.bias_correction and length > 1:
        factor = (length - 1) / length
        delta = delta * factor
        tau = tau * factor
        beta = estimate_persons(matrix, delta, tau, beta0=beta, damping=cap)

    person_se, item_se = _standard_errors(beta, delta, tau, obs)
    tau_se = _tau_standard_errors(beta, delta, tau, obs) if m > 1 else np.full(1, np.nan)
    counts = np.array([np.sum(x[obs] == k) for k in range(m + 1)])
    structure = CategoryStructure.from_tau(tau, tau_se, counts)

    persons = [
        PersonRecord(pid, float(r[v]), int(obs[v].sum()), float(beta[v]), float(person_se[v]))
        for v, pid in enumerate(matrix.person_ids)
    ]
    items = [
        ItemRecord(iid, float(s[i]), int(obs[:, i].sum()), float(delta[i]), float(item_se[i]))
        for i, iid in enumerate(matrix.item_ids)
    ]
    return Calibration(matrix, persons, items, structure, trace,
                       trim_log if trim_log is not None else TrimLog(), config)
