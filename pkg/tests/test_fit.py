
import numpy as np
import pytest

from conftest import scored_matrix
from rascal.data import apply_scoring, trim_extremes
from rascal.estimate import jmle_calibrate
from rascal.fit import (FitPreconditionError, FitThresholds, ResidualMatrix, classify, display_zstd,
                        fit_statistics, standardized_residuals, wilson_hilferty)
from rascal.model import category_measures
from rascal.simulate import simulate_rsm


class FixedCalibration:
    """Stand-in calibration exposing only fixed category probabilities."""

    def __init__(self, probs):
        self._probs = np.asarray(probs, dtype=float)

    def category_probs(self):
        return self._probs


def test_dichotomous_residuals_at_half():
    m = scored_matrix([[1, 0]])
    res = standardized_residuals(m, FixedCalibration(np.full((1, 2, 2), 0.5)))
    np.testing.assert_array_equal(res.z, [[1.0, -1.0]])
    np.testing.assert_array_equal(res.raw, [[0.5, -0.5]])


def test_polytomous_residual_example():
    # Categories 0..3 with E = 1.2 and V = 0.8.
    p = np.array([0.22, 0.46, 0.22, 0.10])
    assert p @ np.arange(4) == pytest.approx(1.2, abs=1e-12)
    assert p @ np.arange(4) ** 2 - 1.2**2 == pytest.approx(0.8, abs=1e-12)
    res = standardized_residuals(scored_matrix([[3]], m=3), FixedCalibration(p[None, None, :]))
    assert res.z[0, 0] == pytest.approx(2.0124611797498106, abs=1e-12)
    assert res.raw[0, 0] == pytest.approx(1.8, abs=1e-12)


def test_missing_cells_stay_missing():
    m = scored_matrix([[1, np.nan]])
    res = standardized_residuals(m, FixedCalibration(np.full((1, 2, 2), 0.5)))
    assert np.isnan(res.z[0, 1]) and res.z[0, 0] == 1.0


def test_zero_variance_is_precondition_error():
    probs = np.array([[[0.0, 1.0], [0.5, 0.5]]])
    with pytest.raises(FitPreconditionError):
        standardized_residuals(scored_matrix([[1, 0]]), FixedCalibration(probs))


def test_unit_residuals_give_unit_mean_squares():
    shape = (4, 3)
    res = ResidualMatrix(z=np.where(np.arange(12).reshape(shape) % 2, 1.0, -1.0), raw=np.zeros(shape),
                         expected=np.zeros(shape), variance=np.full(shape, 0.25), kurtosis=np.full(shape, 0.0625))
    rep = fit_statistics(res)
    np.testing.assert_allclose(rep.item_array("infit_mnsq"), 1.0)
    np.testing.assert_allclose(rep.item_array("outfit_mnsq"), 1.0)
    np.testing.assert_allclose(rep.person_array("infit_mnsq"), 1.0)


def test_infit_downweights_low_information_outlier():
    z = np.array([[0.5], [0.5], [0.5], [6.0]])
    v = np.array([[0.25], [0.25], [0.25], [0.01]])
    res = ResidualMatrix(z=z, raw=z * np.sqrt(v), expected=np.zeros_like(z), variance=v, kurtosis=v**2 * 3)
    rec = fit_statistics(res).items[0]
    assert rec.outfit_mnsq == pytest.approx((3 * 0.25 + 36) / 4)
    assert rec.infit_mnsq == pytest.approx((3 * 0.25 * 0.25 + 0.01 * 36) / 0.76)
    assert rec.outfit_mnsq > 3 * rec.infit_mnsq


def test_wilson_hilferty():
    assert wilson_hilferty(1.0, 0.3) == pytest.approx(0.1)
    assert wilson_hilferty(8.0, 1.5) == pytest.approx(2.5)
    assert wilson_hilferty(1.2, 0.2) > 0 > wilson_hilferty(0.8, 0.2)


def test_classification_of_worst_reported_item():
    flag, advisory = classify(1.39, 1.45, 9.9, 9.9)
    assert flag == "ok" and advisory
    assert classify(1.0, 1.2, 0.5, 1.0) == ("ok", False)
    assert classify(1.0, 1.39, 0.5, 2.1) == ("ok", True)
    assert classify(1.6, 1.2, 0, 0)[0] == "underfit"
    assert classify(0.45, 0.9, 0, 0)[0] == "overfit"
    assert classify(0.45, 1.6, 0, 0)[0] == "underfit"


def test_custom_thresholds():
    assert classify(1.3, 1.3, 0, 0, FitThresholds(upper=1.2))[0] == "underfit"


def test_display_cap():
    assert display_zstd(12.3) == 9.9
    assert display_zstd(-15) == -9.9
    assert display_zstd(1.234) == 1.234


def test_dichotomous_simulation_infit():
    rng = np.random.default_rng(200)
    beta = rng.normal(size=200)
    delta = np.linspace(-1.5, 1.5, 10)
    p = 1 / (1 + np.exp(-(beta[:, None] - delta[None, :])))
    x = (rng.random(p.shape) < p).astype(float)
    trimmed, _ = trim_extremes(scored_matrix(x))
    cal = jmle_calibrate(trimmed)
    rep = fit_statistics(standardized_residuals(cal.matrix, cal), cal)
    infit = rep.item_array("infit_mnsq")
    assert np.all((infit > 0.8) & (infit < 1.2))


def test_rsm_simulation_mean_squares(rsm_fit):
    assert abs(rsm_fit.item_array("infit_mnsq").mean() - 1) < 0.05
    assert abs(rsm_fit.item_array("outfit_mnsq").mean() - 1) < 0.05
    assert np.all(rsm_fit.person_array("outfit_mnsq") >= 0)
    assert np.all(np.isfinite(rsm_fit.item_array("infit_zstd")))


def test_raw_residual_sums_tie_to_estimation(rsm_calibration, rsm_fit):
    person_sums = np.nansum(rsm_fit.residuals.raw, axis=1)
    assert np.max(np.abs(person_sums)) < 0.01


def test_random_responder_outfit():
    delta = np.linspace(-2, 2, 7)
    tau = (-1.0, 0.0, 1.0)
    raw, _ = simulate_rsm(500, delta, tau, seed=4)
    scored = apply_scoring(raw)
    cells = np.vstack([scored.cells, np.random.default_rng(4).integers(0, 4, size=(1, 7))])
    m = scored_matrix(cells, m=3)
    trimmed, _ = trim_extremes(m)
    cal = jmle_calibrate(trimmed)
    rep = fit_statistics(standardized_residuals(cal.matrix, cal), cal)
    assert cal.matrix.person_ids[-1] == "P501"
    assert rep.persons[-1].outfit_mnsq > 1.5
    # sanity: category measures still ordered after adding the responder
    assert np.all(np.diff(category_measures(0.0, cal.tau)) > 0)
