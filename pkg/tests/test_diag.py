import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import scored_matrix
from oracles import alpha_by_sums
from rascal.diag import (DiagnosticError, bartlett_sphericity, cronbach_alpha, ctt_summary, full_loadings, kmo,
                         nearest_rank, parallel_analysis, pca, random_eigenvalues, scree_csv, varimax)



def test_identity_correlation():
    x = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], float)
    x = np.vstack([x, x])
    res = pca(x)
    np.testing.assert_allclose(res.eigenvalues, 1.0, atol=1e-12)
    assert res.determinant == pytest.approx(1.0, abs=1e-12)
    assert res.bartlett_chi2 == pytest.approx(0.0, abs=1e-12)
    assert res.bartlett_df == 3
    assert math.isnan(res.kmo)


def test_two_column_eigenvalues():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(500, 2))
    rho = np.corrcoef(x, rowvar=False)[0, 1]
    np.testing.assert_allclose(pca(x).eigenvalues, [1 + abs(rho), 1 - abs(rho)], atol=1e-12)


def test_bartlett_reported():
    chi2, df, p = bartlett_sphericity(0.00532, 4026, 7)
    assert df == 21
    assert chi2 == pytest.approx(21059.206, rel=0.005)
    assert p == 0.0
    # determinant implied by the reported statistic
    implied = math.exp(-21059.206 / (4026 - 1 - 19 / 6))
    assert implied == pytest.approx(0.00532, rel=0.001)


def test_bartlett_singular():
    assert bartlett_sphericity(0.0, 100, 3)[0] == math.inf


def test_singular_matrix_refuses_rotation():
    rng = np.random.default_rng(2)
    a = rng.normal(size=(50, 2))
    x = np.column_stack([a, a.sum(axis=1)])
    res = pca(x)
    assert res.determinant == 0.0
    assert res.rotated_loadings is None
    assert "singular" in res.annotations["warning"]


def test_constant_column_rejected():
    with pytest.raises(DiagnosticError):
        pca(np.column_stack([np.arange(10.0), np.ones(10)]))


def test_kmo_bounds_and_independence():
    rng = np.random.default_rng(3)
    f = rng.normal(size=(400, 1))
    x = f + 0.5 * rng.normal(size=(400, 5))
    value = kmo(np.corrcoef(x, rowvar=False))
    assert 0.8 < value <= 1.0


@pytest.fixture(scope="module")
def two_factor():
    rng = np.random.default_rng(7)
    f = rng.normal(size=(600, 2))
    load = np.array([[0.8, 0], [0.7, 0.1], [0.75, 0], [0.1, 0.8], [0, 0.7], [0, 0.75]])
    return pca(f @ load.T + 0.5 * rng.normal(size=(600, 6)))


def test_eigenvalue_sum_and_reconstruction(two_factor):
    assert two_factor.eigenvalues.sum() == pytest.approx(6.0, abs=1e-9)
    full = full_loadings(two_factor)
    np.testing.assert_allclose(full @ full.T, two_factor.correlation, atol=1e-8)
    assert np.all(np.diff(two_factor.eigenvalues) <= 0)


def test_varimax_preserves_communality(two_factor):
    a = two_factor.loadings
    rot, t = varimax(a)
    np.testing.assert_allclose((rot**2).sum(axis=1), (a**2).sum(axis=1), atol=1e-9)
    np.testing.assert_allclose(t @ t.T, np.eye(2), atol=1e-9)
    # simple structure: each variable loads mainly on one component
    assert np.all(np.max(np.abs(rot), axis=1) > 0.6)


def test_annotations(two_factor):
    ann = two_factor.annotations
    assert ann["n_eigen_gt_1"] == 2
    assert ann["first_to_second_ratio"] == pytest.approx(two_factor.eigenvalues[0] / two_factor.eigenvalues[1])
    assert ann["first_component_pct"] == pytest.approx(two_factor.variance_pct[0])


def test_listwise_deletion():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(40, 3))
    y = x.copy()
    y[0, 1] = np.nan
    assert pca(y).n_obs == 39
    np.testing.assert_allclose(pca(y).correlation, np.corrcoef(x[1:], rowvar=False))


def test_nearest_rank():
    v = np.arange(1.0, 101.0)[:, None]
    assert nearest_rank(v, 95)[0] == 95.0
    assert nearest_rank(np.arange(1.0, 11.0)[:, None], 95)[0] == 10.0


def test_parallel_single_column():
    res = parallel_analysis(30, 1, replications=5, seed=1)
    np.testing.assert_array_equal(res.mean_eigenvalues, [1.0])


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 8))
def test_parallel_trace(seed, length):
    ev = random_eigenvalues(50, length, 3, seed)
    np.testing.assert_allclose(ev.sum(axis=1), length, atol=1e-9)
    assert np.all(np.diff(ev, axis=1) <= 1e-12)


def test_parallel_deterministic_and_envelope():
    a = parallel_analysis(200, 5, replications=20, seed=9)
    b = parallel_analysis(200, 5, replications=20, seed=9)
    np.testing.assert_array_equal(a.mean_eigenvalues, b.mean_eigenvalues)
    assert np.all(a.pct95_eigenvalues >= a.mean_eigenvalues - 1e-12)
    c = parallel_analysis(200, 5, replications=20, seed=10)
    assert not np.array_equal(a.mean_eigenvalues, c.mean_eigenvalues)


def test_parallel_retained():
    res = parallel_analysis(200, 3, replications=20, seed=1, observed=[2.0, 0.6, 0.4])
    assert res.retained == 1
    assert scree_csv([2.0, 0.6, 0.4], res).splitlines()[0] == "root,observed,mean_random,pct95_random"


def test_parallel_rejects_zero_reps():
    with pytest.raises(DiagnosticError):
        parallel_analysis(10, 3, replications=0)


def test_alpha_spearman_brown():
    # two standardized items correlated at exactly 0.5
    a = np.array([1, -1, 1, -1, 1, -1, 1, -1], float)
    b = np.array([1, 1, -1, -1, 1, 1, -1, -1], float)
    y = 0.5 * a + math.sqrt(0.75) * b
    assert np.corrcoef(a, y)[0, 1] == pytest.approx(0.5)
    assert cronbach_alpha(np.column_stack([a, y])) == pytest.approx(2 * 0.5 / 1.5)


def test_alpha_identical_columns():
    col = np.array([1, 2, 3, 4, 2, 3], float)
    assert cronbach_alpha(np.column_stack([col, col, col])) == pytest.approx(1.0)


def test_alpha_matches_variance_sums():
    rows = [[1, 2, 2], [2, 2, 3], [3, 3, 4], [4, 4, 4], [1, 1, 2],
            [2, 3, 2], [3, 2, 3], [4, 3, 4], [2, 1, 1], [3, 4, 3]]
    assert cronbach_alpha(np.array(rows, float)) == pytest.approx(alpha_by_sums(rows), abs=1e-12)


def test_ctt_summary_external_points():
    cells = np.array([[0, 1, 1], [1, 1, 2], [2, 2, 3], [3, 3, 3], [0, 0, 1], [1, 2, 1]], float)
    res = ctt_summary(scored_matrix(cells, m=3))
    ext = cells + 0  # keys start at 0, so external equals internal here
    assert res.alpha == pytest.approx(alpha_by_sums(ext.tolist()), abs=1e-12)
    assert res.n_cases == 6 and res.n_items == 3
    item = res.items[0]
    rest = ext[:, 1:].sum(axis=1)
    assert item.scale_mean_if_deleted == pytest.approx(rest.mean())
    assert item.corrected_item_total == pytest.approx(np.corrcoef(ext[:, 0], rest)[0, 1])
    assert item.alpha_if_deleted == pytest.approx(cronbach_alpha(ext[:, 1:]))
    assert 0 <= item.squared_multiple_correlation <= 1


def test_alpha_zero_variance():
    with pytest.raises(DiagnosticError):
        cronbach_alpha(np.ones((5, 3)))
