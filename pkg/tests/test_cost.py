import numpy as np
import pytest

from mflq.cost import (
    analytic_social_cost,
    asymptotic_average_optimum,
    q_finite,
    q_infinite,
)
from mflq.errors import BlowUp
from mflq.meanfield import solve_offset_infinite
from mflq.model import build_problem, derived_weights
from mflq.riccati import solve_are, solve_dre

from conftest import PLANAR_CONFIG, scalar_variant

# Frozen scalar benchmark values (quadratic roots, stationary offset, and
# the constant-integrand closed form [sig^2 (P + Pi) - s^2 + 2 s f] / rho).
P_MAX = 0.8872983346207417
PI_MAX = 0.46124515496597124
S_INF = 1.8672177814626811
Q_INF = 0.5031250984973568
AVG_OPT = 30.97262128765967
# 3 sig^2 (P + Pi) / rho: shift of q_inf when sigma doubles.
SIGMA_DOUBLING_SHIFT = 0.26970869791734264


def infinite_solutions(p):
    dw = derived_weights(p)
    P = solve_are(p.A, p.S, p.Q, p.rho)
    Pi = solve_are(p.A + p.G, p.S, dw.Q_bar, p.rho)
    off = solve_offset_infinite(p, Pi)
    return P, Pi, off


class TestQFinite:
    def test_all_zero(self):
        p = scalar_variant(sigma=0.0, f=0.0, eta=0.0)
        path = solve_dre(p, 2.0, 400)
        assert q_finite(p, path) == pytest.approx(0.0, abs=1e-14)

    def test_offset_only_is_nonpositive(self):
        p = scalar_variant(sigma=0.0, f=0.0)     # eta = 5 still drives s
        path = solve_dre(p, 2.0, 400)
        assert q_finite(p, path) < 0.0

    def test_blown_path_rejected(self, scalar_problem):
        path = solve_dre(scalar_problem, 10.0, 2000)
        with pytest.raises(BlowUp):
            q_finite(scalar_problem, path)

    def test_cauchy_in_horizon(self):
        # PSD-weight planar instance: q_T settles at the e^{-rho T} rate.
        p = build_problem(PLANAR_CONFIG)
        qs = {T: q_finite(p, solve_dre(p, T, int(200 * T)))
              for T in (10.0, 20.0, 40.0)}
        gap1 = abs(qs[20.0] - qs[10.0])
        gap2 = abs(qs[40.0] - qs[20.0])
        assert gap2 < gap1
        assert gap1 <= 10.0 * np.exp(-p.rho * 10.0)

    def test_matches_infinite_limit(self):
        p = build_problem(PLANAR_CONFIG)
        path = solve_dre(p, 50.0, 10000)
        P, Pi, off = infinite_solutions(p)
        assert abs(q_finite(p, path) - q_infinite(p, P, Pi, off)) < 1e-4


class TestQInfinite:
    def test_all_zero(self):
        p = scalar_variant(sigma=0.0, f=0.0, eta=0.0)
        P, Pi, off = infinite_solutions(p)
        assert q_infinite(p, P, Pi, off) == pytest.approx(0.0, abs=1e-14)

    def test_scalar_benchmark_closed_form(self, scalar_problem):
        P, Pi, off = infinite_solutions(scalar_problem)
        assert q_infinite(scalar_problem, P, Pi, off) == pytest.approx(
            Q_INF, rel=1e-12)

    def test_sigma_doubling_shift(self, scalar_problem):
        p1 = scalar_problem
        p2 = scalar_variant(sigma=0.4)
        P, Pi, off = infinite_solutions(p1)
        d = q_infinite(p2, P, Pi, off) - q_infinite(p1, P, Pi, off)
        assert d == pytest.approx(SIGMA_DOUBLING_SHIFT, rel=1e-12)

    def test_table_signal_tail(self):
        # sigma ramps to its final value; beyond the last knot the closed
        # form for the constant tail applies.
        p = scalar_variant(sigma={"times": [0.0, 1.0], "values": [[0.0], [0.2]]})
        P, Pi, off = infinite_solutions(p)
        lo = q_infinite(scalar_variant(sigma=0.0), P, Pi, off)
        hi = q_infinite(scalar_variant(), P, Pi, off)
        mid = q_infinite(p, P, Pi, off)
        assert lo < mid < hi


class TestAnalyticSocialCost:
    def test_all_zero(self):
        p = scalar_variant(sigma=0.0, f=0.0, eta=0.0, init_mean=0.0,
                           init_cov=0.0)
        path = solve_dre(p, 2.0, 400)
        cb = analytic_social_cost(p, path, N=7)
        assert cb.total == pytest.approx(0.0, abs=1e-14)

    def test_single_agent_form(self, scalar_problem):
        # N = 1: the own-deviation term (N - 1) tr(P Cov) drops out.
        p = scalar_problem
        path = solve_dre(p, 2.0, 400)
        cb = analytic_social_cost(p, path, N=1)
        Pi0, s0 = path.Pi[0][0, 0], path.s[0][0]
        mean, cov = 5.0, 0.3
        want = Pi0 * cov + Pi0 * mean ** 2 + 2 * s0 * mean
        assert cb.initial_term == pytest.approx(want, rel=1e-12)

    def test_total_composition(self, scalar_problem):
        path = solve_dre(scalar_problem, 2.0, 400)
        cb = analytic_social_cost(scalar_problem, path, N=30, epsilon_T=0.01)
        assert cb.total == pytest.approx(
            cb.initial_term + 30 * cb.q_term + 30 * 0.01)


class TestAsymptoticOptimum:
    def test_all_zero(self):
        p = scalar_variant(sigma=0.0, f=0.0, eta=0.0, init_mean=0.0,
                           init_cov=0.0)
        P, Pi, off = infinite_solutions(p)
        rec = asymptotic_average_optimum(p, P, Pi, off)
        assert rec.value == pytest.approx(0.0, abs=1e-14)

    def test_scalar_benchmark(self, scalar_problem):
        P, Pi, off = infinite_solutions(scalar_problem)
        rec = asymptotic_average_optimum(scalar_problem, P, Pi, off)
        assert rec.value == pytest.approx(AVG_OPT, rel=1e-12)
        # Indefinite weight: both quadratic roots are positive, so the
        # negative-definite solution hypothesis fails and is reported.
        assert rec.negdef_hypothesis is False

    def test_negdef_hypothesis_detected(self):
        # Strongly negative weight with stable dynamics: the quadratic
        # keeps a negative root for both equations.
        p = scalar_variant(A=-1.0, G=0.0, Q=-0.5, Gamma=0.0, eta=0.0, f=0.0)
        P, Pi, off = infinite_solutions(p)
        rec = asymptotic_average_optimum(p, P, Pi, off)
        assert rec.negdef_hypothesis is True

    def test_cov_doubling_moves_only_first_term(self, scalar_problem):
        P, Pi, off = infinite_solutions(scalar_problem)
        rec1 = asymptotic_average_optimum(scalar_problem, P, Pi, off)
        p2 = scalar_variant(init_cov=0.6)
        rec2 = asymptotic_average_optimum(p2, P, Pi, off)
        tr = float(P.X[0, 0]) * 0.3
        assert rec2.value - rec1.value == pytest.approx(tr, rel=1e-12)
        assert rec2.q_infinity == rec1.q_infinity
