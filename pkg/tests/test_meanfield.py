import numpy as np
import pytest

from mflq.errors import NotStabilizing
from mflq.meanfield import (
    check_rho_integrable,
    offset_quadrature,
    solve_mean_field_path,
    solve_offset_finite,
    solve_offset_infinite,
)
from mflq.model import derived_weights
from mflq.riccati import FiniteRiccatiPath, scalar_candidates, solve_are, solve_dre

from conftest import scalar_variant
from oracles import scalar_offset_constant_coeff

PI_MAX = 0.46124515496597124
S_INF = 1.8672177814626811
# Variation-of-constants value at t = 0 for the frozen-Pi equation on [0, 5].
S0_FROZEN_PI_T5 = 1.6811745619449239


def constant_pi_path(p, pi_value, T, M):
    """Synthetic Riccati path holding Pi constant, for offset testing."""
    grid = np.linspace(0.0, T, M + 1)
    shape = (M + 1, p.n, p.n)
    Pi = np.full(shape, pi_value)
    return FiniteRiccatiPath(grid=grid, P=np.zeros(shape), K=Pi.copy(),
                             Pi=Pi, s=np.zeros((M + 1, p.n)))


class TestOffsetFinite:
    def test_zero_forcing_zero_offset(self):
        p = scalar_variant(eta=0.0, f=0.0)
        path = solve_dre(p, 2.0, 400)
        s = solve_offset_finite(p, path)
        assert np.allclose(s, 0.0, atol=1e-14)

    def test_terminal_zero(self, scalar_problem):
        path = solve_dre(scalar_problem, 2.0, 400)
        s = solve_offset_finite(scalar_problem, path)
        assert s[-1][0] == 0.0

    def test_frozen_pi_variation_of_constants(self, scalar_problem):
        p = scalar_problem
        path = constant_pi_path(p, PI_MAX, 5.0, 2000)
        s = solve_offset_finite(p, path)
        assert s[0][0] == pytest.approx(S0_FROZEN_PI_T5, abs=1e-8)
        m = float(p.A[0, 0] + p.G[0, 0] - p.S[0, 0] * PI_MAX)
        c = PI_MAX * 1.0 - (-0.4)
        for k in (0, 500, 1500):
            want = scalar_offset_constant_coeff(m, p.rho, c, 5.0, path.grid[k])
            assert s[k][0] == pytest.approx(want, abs=1e-8)

    def test_matches_jointly_integrated_offset(self, scalar_problem):
        path = solve_dre(scalar_problem, 2.0, 1000)
        s = solve_offset_finite(scalar_problem, path)
        assert np.max(np.abs(s - path.s)) < 1e-7

    def test_ode_residual_by_finite_differences(self, scalar_problem):
        p = scalar_problem
        path = solve_dre(p, 2.0, 2000)
        dw = derived_weights(p)
        grid, s, Pi = path.grid, path.s, path.Pi
        h = grid[1] - grid[0]
        ds = (s[2:] - s[:-2]) / (2 * h)
        for k in range(1, len(grid) - 1, 97):
            lhs = p.rho * s[k]
            M = p.A + p.G - p.S @ Pi[k]
            rhs = ds[k - 1] + M.T @ s[k] + Pi[k] @ p.f(grid[k]) \
                - dw.eta_bar(grid[k])
            assert np.max(np.abs(lhs - rhs)) < 5e-6


class TestOffsetInfinite:
    def test_scalar_benchmark_value(self, scalar_problem):
        p = scalar_problem
        pi = solve_are(p.A + p.G, p.S, np.array([[-0.064]]), p.rho)
        off = solve_offset_infinite(p, pi)
        assert off.stationary and not off.marginal
        assert off.s0[0] == pytest.approx(S_INF, rel=1e-12)

    def test_zero_forcing(self):
        # eta tuned so Pi f = eta_bar exactly: offset vanishes.
        p0 = scalar_variant()
        pi = solve_are(p0.A + p0.G, p0.S, np.array([[-0.064]]), p0.rho)
        pi_val = float(pi.X[0, 0])
        q, gamma = -0.1, 0.2
        eta = pi_val / (q * (1 - gamma))
        p = scalar_variant(eta=eta)
        off = solve_offset_infinite(p, pi)
        assert off.s0[0] == pytest.approx(0.0, abs=1e-12)

    def test_singular_regime_zero_offset(self, singular_problem):
        p = singular_problem
        pi = scalar_candidates(float(p.A[0, 0] + p.G[0, 0]),
                               float(p.S[0, 0]), 0.0, p.rho)[-1]
        off = solve_offset_infinite(p, pi)
        assert off.marginal
        assert abs(off.s0[0]) < 1e-12

    def test_stationary_agrees_with_quadrature(self, scalar_problem,
                                               planar_problem):
        for p in (scalar_problem, planar_problem):
            dw = derived_weights(p)
            pi = solve_are(p.A + p.G, p.S, dw.Q_bar, p.rho)
            off = solve_offset_infinite(p, pi)
            quad = offset_quadrature(p, pi)
            assert np.max(np.abs(off.s0 - quad)) < 1e-6

    def test_not_stabilizing_rejected(self):
        p = scalar_variant(A=1.5, G=0.0)
        # Pi = 0 leaves the loop at 1.5 > rho/2: offset not unique.
        with pytest.raises(NotStabilizing):
            solve_offset_infinite(p, np.zeros((1, 1)))

    def test_table_signal_quadrature(self):
        p = scalar_variant(f={"times": [0.0, 1.0, 2.0],
                              "values": [[0.0], [1.0], [1.0]]})
        dw = derived_weights(p)
        pi = solve_are(p.A + p.G, p.S, dw.Q_bar, p.rho)
        off = solve_offset_infinite(p, pi)
        assert not off.stationary and off.quadrature_truncated
        # Beyond the last knot the forcing is constant, so the offset must
        # match the stationary solve of the tail problem.
        tail = scalar_variant(f=1.0)
        off_tail = solve_offset_infinite(tail, pi)
        assert off.signal(2.0)[0] == pytest.approx(off_tail.s0[0], rel=1e-9)
        quad0 = offset_quadrature(p, pi, t=0.0)
        assert off.s0[0] == pytest.approx(quad0[0], abs=1e-6)


class TestMeanFieldPath:
    def test_zero_everything(self):
        p = scalar_variant(init_mean=0.0, f=0.0, eta=0.0)
        mf = solve_mean_field_path(p, np.array([[PI_MAX]]),
                                   np.zeros(1), 5.0, 500)
        assert np.allclose(mf.xbar, 0.0, atol=1e-14)

    def test_scalar_benchmark_stationary_point(self, scalar_problem):
        p = scalar_problem
        pi = solve_are(p.A + p.G, p.S, np.array([[-0.064]]), p.rho)
        off = solve_offset_infinite(p, pi)
        mf = solve_mean_field_path(p, pi, off, 20.0, 2000)
        assert mf.xbar_limit[0] == pytest.approx(6.25, rel=1e-10)
        # The stationary point annihilates the flow field.
        cl = float(p.A[0, 0] + p.G[0, 0] - p.S[0, 0] * float(pi.X[0, 0]))
        flow = cl * mf.xbar_limit[0] - float(p.S[0, 0] * off.s0[0]) + 1.0
        assert abs(flow) < 1e-12
        assert mf.rho_integrable

    def test_superposition(self, scalar_problem):
        p = scalar_problem
        pi = np.array([[PI_MAX]])
        base = solve_mean_field_path(p, pi, np.zeros(1), 5.0, 500,
                                     x0=np.zeros(1))
        from_init = solve_mean_field_path(
            scalar_variant(f=0.0), pi, np.zeros(1), 5.0, 500,
            x0=np.array([2.0]))
        from_offset = solve_mean_field_path(
            scalar_variant(f=0.0), pi, np.array([0.7]), 5.0, 500,
            x0=np.zeros(1))
        combined = solve_mean_field_path(
            p, pi, np.array([0.7]), 5.0, 500, x0=np.array([2.0]))
        recon = base.xbar + from_init.xbar + from_offset.xbar
        assert np.max(np.abs(recon - combined.xbar)) < 1e-10

    def test_singular_regime_integrability(self, singular_problem):
        p = singular_problem
        pi = np.zeros((1, 1))
        mf_bad = solve_mean_field_path(p, pi, np.zeros(1), 50.0, 2000)
        assert not mf_bad.rho_integrable
        x_star = np.array([-2.0 * 1.0 / p.rho])
        mf_good = solve_mean_field_path(p, pi, np.zeros(1), 50.0, 2000,
                                        x0=x_star)
        assert mf_good.rho_integrable


class TestRhoIntegrable:
    def test_zero_path(self):
        grid = np.linspace(0, 10, 101)
        assert check_rho_integrable(grid, np.zeros((101, 1)), 0.6)

    def test_supercritical_growth(self):
        rho = 0.6
        grid = np.linspace(0, 40, 401)
        vals = np.exp((rho / 2 + 0.1) * grid)[:, None]
        assert not check_rho_integrable(grid, vals, rho)

    def test_constant_path_certified_by_tail(self):
        rho = 0.6
        grid = np.linspace(0, 50, 2001)
        vals = np.full((2001, 1), -2.0 / rho)
        assert check_rho_integrable(grid, vals, rho)
