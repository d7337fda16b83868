import numpy as np
import pytest

from coarea_scatter.csvio import read_csv
from coarea_scatter.gpc import GpcTable
from coarea_scatter.nullfield import surface_rule
from coarea_scatter.oracle import (
    McEstimate,
    compare,
    draw_parameters,
    monte_carlo,
    solve_realization,
)
from coarea_scatter.shape import circle_shape, ellipse_shape, random_octagon
from coarea_scatter.specfun import truncation_order

from oracles import circle_coefficient


@pytest.mark.parametrize("ka", [1.0, 3.0, 10.0])
def test_circle_realization(ka):
    a = 3.0
    kappa = ka / a
    b = solve_realization(circle_shape(a), 0.0, kappa, 50)
    mu = truncation_order(kappa, a)
    exact = np.array([circle_coefficient(m, kappa, a) for m in range(-mu, mu + 1)])
    assert np.max(np.abs(b - exact)) <= 1e-6


def test_ellipse_half_turn_symmetry():
    e = ellipse_shape(5.0, 1.0)
    b0 = solve_realization(e, 0.7, 0.4, 50)
    b1 = solve_realization(e, 0.7 + np.pi, 0.4, 50)
    assert np.max(np.abs(b0 - b1)) <= 1e-8


def test_mirror_symmetric_realization():
    # an obstacle symmetric about the x-axis under e^{i kappa x} gives b_{-m} = (-1)^m b_m
    e = ellipse_shape(5.0, 1.0)
    b = solve_realization(e, 0.0, 0.4, 50)
    m = np.arange(-(b.size // 2), b.size // 2 + 1)
    assert np.max(np.abs(b[::-1] - (-1.0) ** m * b)) <= 1e-8


def test_octagon_dense_rule_refinement():
    o = random_octagon(5.0, 4.0)
    for z in (-0.8, 0.1):
        coarse = solve_realization(o, z, 1.0, 60, surface_rule(o, 160), source_order=0)
        fine = solve_realization(o, z, 1.0, 60, surface_rule(o, 320), source_order=0)
        assert np.max(np.abs(coarse - fine)) <= 1e-4


def test_full_result_fields():
    res, kernel = solve_realization(circle_shape(2.0), 0.3, 1.0, 20, full=True)
    assert res.z == 0.3
    assert res.b.shape == res.satisfied.shape == (2 * truncation_order(1.0, 2.0) + 1,)
    assert kernel.coefficients.shape[1] == 60


# -- Monte Carlo ---------------------------------------------------------------------


def test_draws_are_seeded_and_in_range():
    o = random_octagon(5.0, 4.0)
    a = draw_parameters(o, 100, 7)
    assert np.array_equal(a, draw_parameters(o, 100, 7))
    assert not np.array_equal(a, draw_parameters(o, 100, 8))
    assert np.all((a >= -1) & (a < 1))
    e = draw_parameters(ellipse_shape(5.0, 1.0), 100, 7)
    assert np.all((e >= 0) & (e < 2 * np.pi))


def test_mc_estimate_statistics():
    rng = np.random.default_rng(0)
    s = rng.normal(size=(50, 3)) + 1j * rng.normal(size=(50, 3))
    est = McEstimate.from_samples([-1, 0, 1], s)
    assert np.allclose(est.mean, s.mean(axis=0), rtol=1e-15)
    assert np.allclose(est.half_width, 1.96 * np.std(s, axis=0, ddof=1) / np.sqrt(50), rtol=1e-14)
    with pytest.raises(ValueError):
        McEstimate.from_samples([0], s[:1, :1])


def test_circle_monte_carlo_has_no_spread():
    c = circle_shape(3.0)
    mc = monte_carlo(c, 1.0, 50, 4, seed=3)
    exact = np.array([circle_coefficient(int(m), 1.0, 3.0) for m in mc.modes])
    assert np.max(mc.half_width) <= 1e-8
    assert np.max(np.abs(mc.mean - exact)) <= 1e-6
    assert mc.n_failed == 0
    with pytest.raises(ValueError):
        monte_carlo(c, 1.0, 30, 1, seed=3)


def test_monte_carlo_is_deterministic_across_threads():
    o = random_octagon(5.0, 4.0)
    kw = dict(dense_rule=surface_rule(o, 40), source_order=0, mu=3)
    a = monte_carlo(o, 1.0, 24, 6, seed=11, threads=1, **kw)
    b = monte_carlo(o, 1.0, 24, 6, seed=11, threads=3, **kw)
    c = monte_carlo(o, 1.0, 24, 6, seed=12, threads=1, **kw)
    assert np.array_equal(a.samples, b.samples)
    assert np.array_equal(a.mean, b.mean) and np.array_equal(a.half_width, b.half_width)
    assert not np.array_equal(a.mean, c.mean)
    assert a.metadata["seed"] == 11 and a.metadata["rng"] == "numpy.random.PCG64"


# -- comparison ------------------------------------------------------------------------


def _mc(modes, mean, hw):
    return McEstimate(np.array(modes), np.asarray(mean, complex), np.asarray(hw, float), n_samples=10)


def test_compare_with_injected_mean():
    mean = np.array([0.1 + 0.2j, -0.3j, 0.5])
    mc = _mc([-1, 0, 1], mean, [1e-3, 1e-3, 1e-3])
    table = GpcTable(np.array([-1, 0, 1]), mean[:, None], np.ones((3, 1), bool))
    rep = compare(mc, table)
    assert rep.max_error == 0.0
    assert rep.within.all()


def test_compare_common_modes_and_tolerance(tmp_path):
    mc = _mc([-2, -1, 0, 1, 2], [0, 1, 2, 3, 4], [0.1] * 5)
    table = GpcTable(np.array([-1, 0, 1]), np.array([[1.0], [2.3], [3.05]], complex), np.ones((3, 1), bool))
    rep = compare(mc, table, tolerance=0.1)
    assert list(rep.modes) == [-1, 0, 1]
    assert np.allclose(rep.abs_err, [0.0, 0.3, 0.05])
    assert list(rep.within) == [True, False, True]
    assert rep.max_error == pytest.approx(0.3)
    meta, header, rows = read_csv(rep.to_csv(tmp_path / "r.csv", {"seed": 1}))
    assert header[0] == "m" and header[-2:] == ["abs_err", "half_width"]
    assert meta["seed"] == "1" and len(rows) == 3
