"""Numerical kernel tests.

Distribution tails are checked against high-precision mpmath evaluations;
the optimizer against analytic minimizers; least squares against exact
constructions; the simplex projection against its optimality conditions.
"""

import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tsblend.numerics import (
    OptimResult,
    RngStream,
    chi2_sf,
    nelder_mead,
    normal_quantile,
    normal_sf,
    ols,
    project_simplex,
    t_sf,
)


class TestNelderMead:
    def test_quadratic_reaches_analytic_minimum(self):
        target = np.array([1.5, -2.0, 0.25])

        def f(x):
            return float(np.sum((x - target) ** 2) + 3.0)

        res = nelder_mead(f, np.zeros(3), tolerance=1e-10)
        assert res.converged
        assert np.allclose(res.x, target, atol=1e-6)
        assert abs(res.fun - 3.0) < 1e-10

    def test_reported_value_matches_objective(self):
        def f(x):
            return float((x[0] - 2.0) ** 4 + x[1] ** 2)

        res = nelder_mead(f, np.array([0.0, 1.0]))
        assert abs(f(res.x) - res.fun) < 1e-12

    def test_rosenbrock(self):
        def rosen(x):
            return float(100.0 * (x[1] - x[0] ** 2) ** 2 + (1.0 - x[0]) ** 2)

        res = nelder_mead(rosen, np.array([-1.2, 1.0]), tolerance=1e-10,
                          max_iter=2000)
        assert np.all(np.abs(res.x - 1.0) < 1e-3)
        assert res.iterations <= 4000

    def test_nonfinite_region_is_avoided(self):
        def f(x):
            if x[0] < 0:
                return float("nan")
            return float((x[0] - 0.5) ** 2)

        res = nelder_mead(f, np.array([1.0]))
        assert abs(res.x[0] - 0.5) < 1e-6

    def test_nonfinite_start_rejected(self):
        with pytest.raises(ValueError):
            nelder_mead(lambda x: float("inf"), np.array([0.0]))

    def test_deterministic(self):
        def f(x):
            return float(np.sum(x ** 2) + math.sin(x[0]))

        a = nelder_mead(f, np.array([3.0, -1.0]))
        b = nelder_mead(f, np.array([3.0, -1.0]))
        assert np.array_equal(a.x, b.x) and a.fun == b.fun


class TestOls:
    def test_exact_recovery(self):
        rng = RngStream(seed=11).generator()
        X = rng.standard_normal((40, 4))
        beta = np.array([2.0, -1.0, 0.5, 3.0])
        y = X @ beta
        res = ols(X, y)
        assert np.allclose(res.coef, beta, atol=1e-10)
        assert np.allclose(res.residuals, 0.0, atol=1e-10)

    def test_residual_orthogonality(self):
        rng = RngStream(seed=12).generator()
        X = rng.standard_normal((60, 3))
        y = rng.standard_normal(60)
        res = ols(X, y)
        dots = X.T @ res.residuals
        scale = np.linalg.norm(X, axis=0) * np.linalg.norm(res.residuals)
        assert np.all(np.abs(dots) <= 1e-8 * np.maximum(scale, 1.0))

    def test_rank_deficiency_names_column(self):
        rng = RngStream(seed=13).generator()
        X = rng.standard_normal((30, 3))
        X = np.column_stack([X, X[:, 0] + X[:, 1]])
        with pytest.raises(ValueError, match="rank deficient.*column"):
            ols(X, rng.standard_normal(30))

    def test_stderr_against_direct_formula(self):
        rng = RngStream(seed=14).generator()
        X = np.column_stack([np.ones(50), rng.standard_normal((50, 2))])
        y = X @ np.array([1.0, 2.0, -0.5]) + rng.standard_normal(50)
        res = ols(X, y)
        cov = np.linalg.inv(X.T @ X) * res.sigma2
        assert np.allclose(res.stderr, np.sqrt(np.diag(cov)), rtol=1e-8)


class TestProjectSimplex:
    def test_interior_point_untouched(self):
        v = np.array([0.2, 0.3, 0.5])
        assert np.allclose(project_simplex(v), v, atol=1e-12)

    def test_spec_example(self):
        assert np.allclose(project_simplex(np.array([0.6, 0.6])), [0.5, 0.5])

    def test_negative_coordinates_clipped(self):
        w = project_simplex(np.array([1.4, -0.4]))
        assert np.allclose(w, [1.0, 0.0])

    @given(st.lists(st.floats(-50, 50), min_size=1, max_size=12))
    @settings(max_examples=200, deadline=None)
    def test_kkt_conditions(self, vals):
        v = np.array(vals, dtype=float)
        w = project_simplex(v)
        assert abs(w.sum() - 1.0) < 1e-9
        assert np.all(w >= 0.0)
        # support coordinates share a common shift tau; zero coordinates sit
        # at or below it
        support = w > 1e-12
        taus = v[support] - w[support]
        assert np.ptp(taus) < 1e-8 if support.any() else True
        if support.any():
            tau = taus.mean()
            assert np.all(v[~support] <= tau + 1e-8)

    def test_projection_is_closest_point(self):
        rng = RngStream(seed=15).generator()
        for _ in range(25):
            v = rng.standard_normal(5) * 3
            w = project_simplex(v)
            for _ in range(40):
                u = rng.dirichlet(np.ones(5))
                assert np.linalg.norm(v - w) <= np.linalg.norm(v - u) + 1e-9


class TestDistributions:
    def test_chi2_against_mpmath_grid(self):
        for df in (1, 2, 5, 10, 20, 50):
            for x in (0.1, 0.5, 1.0, 3.0, 8.0, 20.0, 41.0, 80.0):
                want = float(mpmath.gammainc(df / 2, x / 2, mpmath.inf,
                                             regularized=True))
                assert abs(chi2_sf(x, df) - want) < 1e-6

    def test_normal_against_mpmath_grid(self):
        for z in (-4.0, -1.0, -0.3, 0.0, 0.5, 1.96, 3.5, 6.0):
            want = float(0.5 * mpmath.erfc(z / mpmath.sqrt(2)))
            assert abs(normal_sf(z) - want) < 1e-9

    def test_t_against_mpmath_grid(self):
        for df in (1, 3, 8, 30, 120):
            for x in (-3.0, -0.5, 0.0, 1.0, 2.5, 5.0):
                want = float(
                    mpmath.betainc(df / 2, mpmath.mpf(1) / 2,
                                   x2=df / (df + x * x), regularized=True) / 2
                )
                if x < 0:
                    want = 1.0 - want
                assert abs(t_sf(x, df) - want) < 1e-6

    def test_portmanteau_anchor(self):
        assert abs(chi2_sf(24.673, 20) - 0.2142) < 0.005

    def test_quantile_inverts_sf(self):
        for p in (0.6, 0.9, 0.975, 0.995):
            z = normal_quantile(p)
            assert abs((1.0 - normal_sf(z)) - p) < 1e-12

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            chi2_sf(1.0, 0)
        with pytest.raises(ValueError):
            t_sf(1.0, -2)
        with pytest.raises(ValueError):
            normal_quantile(1.0)


class TestRngStream:
    def test_reopening_reproduces_draws(self):
        s = RngStream(seed=99, path=(3,))
        a = s.generator().standard_normal(50)
        b = s.generator().standard_normal(50)
        assert np.array_equal(a, b)

    def test_substreams_differ_and_decorrelate(self):
        s = RngStream(seed=7)
        a = s.substream(0).generator().standard_normal(10_000)
        b = s.substream(1).generator().standard_normal(10_000)
        assert not np.array_equal(a, b)
        r = np.corrcoef(a, b)[0, 1]
        assert abs(r) < 0.05

    def test_path_composition(self):
        s = RngStream(seed=5)
        assert s.substream(1).substream(2) == s.substream(1, 2)
