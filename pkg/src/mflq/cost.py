"""Closed-form cost functionals for the decentralized laws.

The social cost under the decentralized law splits into an initial-state
term, N times a per-agent running constant q, and N times the mean-field
tracking gap epsilon:

    J_soc = sum_i E( |x_{i0} - x_avg(0)|_P^2 + |x_avg(0)|_Pi^2
                     + 2 s(0)^T x_avg(0) )  +  N q  +  N epsilon,

with q the discounted integral of
    |sigma|_P^2 + |sigma|_Pi^2 - |B^T s|_{R^{-1}}^2 + 2 s^T f.

The infinite-horizon limit of the per-agent average drops epsilon and uses
the stationary P, Pi, s.  The limit formula is computed whenever
rho-stabilizing solutions exist; whether the stronger hypothesis behind it
(existence of negative definite solutions to both AREs) holds is reported
separately and never repaired.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson

from .errors import BlowUp
from .model import ProblemData, Signal
from .riccati import AlgebraicSolution, FiniteRiccatiPath, scalar_candidates


@dataclass(frozen=True)
class CostBreakdown:
    initial_term: float
    q_term: float
    epsilon_term: float
    N: int

    @property
    def total(self) -> float:
        return self.initial_term + self.N * self.q_term + self.N * self.epsilon_term


@dataclass(frozen=True)
class AsymptoticOptimum:
    value: float
    initial_term: float
    q_infinity: float
    negdef_hypothesis: bool | None   # verified only for n = 1


def _q_integrand_nodes(p: ProblemData, grid: np.ndarray, P_nodes: np.ndarray,
                       Pi_nodes: np.ndarray, s_nodes: np.ndarray) -> np.ndarray:
    sig = p.sigma.sample(grid)
    f = p.f.sample(grid)
    S = p.S
    term_p = np.einsum("kn,knm,km->k", sig, P_nodes, sig)
    term_pi = np.einsum("kn,knm,km->k", sig, Pi_nodes, sig)
    term_s = np.einsum("kn,nm,km->k", s_nodes, S, s_nodes)
    term_f = 2.0 * np.einsum("kn,kn->k", s_nodes, f)
    return np.exp(-p.rho * grid) * (term_p + term_pi - term_s + term_f)


def q_finite(p: ProblemData, path: FiniteRiccatiPath) -> float:
    """Simpson quadrature of the running constant over the path's grid."""
    if path.blowup_time is not None:
        raise BlowUp(
            f"q undefined: Riccati path escaped at t = {path.blowup_time:.6g}")
    vals = _q_integrand_nodes(p, path.grid, path.P, path.Pi, path.s)
    return float(simpson(vals, x=path.grid))


def q_infinite(p: ProblemData, P: AlgebraicSolution, Pi: AlgebraicSolution,
               s) -> float:
    """Discounted integral of the running constant with stationary P, Pi.

    Constant signals give the closed form c / rho.  Table signals are
    integrated by Simpson up to the last knot, then closed form for the
    constant tail.
    """
    if isinstance(s, np.ndarray):
        s = Signal.constant(s)
    elif not isinstance(s, Signal):
        s = s.signal            # InfiniteOffset

    last = max(p.sigma.last_knot(), p.f.last_knot(), s.last_knot())
    n = p.n

    def integrand_at(grid):
        P_nodes = np.broadcast_to(P.X, (len(grid), n, n))
        Pi_nodes = np.broadcast_to(Pi.X, (len(grid), n, n))
        return _q_integrand_nodes(p, grid, P_nodes, Pi_nodes, s.sample(grid))

    if last == 0.0:
        c = integrand_at(np.array([0.0]))[0]
        return float(c / p.rho)

    steps = max(400, int(np.ceil(last / 0.005)))
    if steps % 2:
        steps += 1
    grid = np.linspace(0.0, last, steps + 1)
    head = simpson(integrand_at(grid), x=grid)
    # Beyond the last knot every signal is constant, so the discounted
    # integrand decays exactly like e^{-rho t}.
    c_last = integrand_at(np.array([last]))[0]
    tail = c_last / p.rho       # int_last^inf e^{-rho(t-last)} c dt, discount folded in
    return float(head + tail)


def analytic_social_cost(p: ProblemData, path: FiniteRiccatiPath, N: int,
                         epsilon_T: float = 0.0) -> CostBreakdown:
    """Theoretical social cost of the finite-horizon decentralized law.

    The initial term is evaluated in closed form from the iid initial
    statistics:
        sum_i E|x_{i0} - x_avg(0)|_P^2 = (N-1) tr(P(0) Cov),
        sum_i E|x_avg(0)|_Pi^2 = tr(Pi(0) Cov) + N |mean|_Pi^2,
        sum_i 2 s(0)^T E x_avg(0) = 2 N s(0)^T mean.
    epsilon_T comes from simulation, or 0 in the deterministic regime.
    """
    if path.blowup_time is not None:
        raise BlowUp(
            f"cost undefined: Riccati path escaped at t = {path.blowup_time:.6g}")
    P0, Pi0, s0 = path.P[0], path.Pi[0], path.s[0]
    mean, cov = p.init_mean, p.init_cov
    initial = ((N - 1) * np.trace(P0 @ cov)
               + np.trace(Pi0 @ cov) + N * mean @ Pi0 @ mean
               + 2.0 * N * s0 @ mean)
    return CostBreakdown(initial_term=float(initial),
                         q_term=q_finite(p, path),
                         epsilon_term=float(epsilon_T), N=N)


def asymptotic_average_optimum(p: ProblemData, P: AlgebraicSolution,
                               Pi: AlgebraicSolution, s) -> AsymptoticOptimum:
    """Per-agent social optimum in the infinite-population limit.

    value = tr(P Cov) + |mean|_Pi^2 + 2 s(0)^T mean + q_inf, assuming equal
    initial variances across agents.  For n = 1 the negative-definite
    solution hypothesis behind the limit theorem is checked by enumerating
    the quadratic roots; for n > 1 it is left unverified (None).
    """
    if isinstance(s, np.ndarray):
        s0 = s
    elif isinstance(s, Signal):
        s0 = s(0.0)
    else:
        s0 = s.s0
    mean, cov = p.init_mean, p.init_cov
    qi = q_infinite(p, P, Pi, s)
    initial = float(np.trace(P.X @ cov) + mean @ Pi.X @ mean + 2.0 * s0 @ mean)

    negdef = None
    if p.n == 1:
        from .model import derived_weights
        dw = derived_weights(p)
        s_ker = float(p.S[0, 0])
        roots_p = scalar_candidates(float(p.A[0, 0]), s_ker,
                                    float(p.Q[0, 0]), p.rho)
        roots_pi = scalar_candidates(float(p.A[0, 0] + p.G[0, 0]), s_ker,
                                     float(dw.Q_bar[0, 0]), p.rho)
        def has_neg(roots):
            return any(float(r.X[0, 0]) < 0 for r in roots)
        negdef = bool(roots_p and roots_pi and has_neg(roots_p) and has_neg(roots_pi))

    return AsymptoticOptimum(value=initial + qi, initial_term=initial,
                             q_infinity=qi, negdef_hypothesis=negdef)
