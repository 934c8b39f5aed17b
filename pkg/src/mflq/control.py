"""Control laws as evaluable gain schedules.

Every law evaluates u = -(Fown x + Fagg aggregate + foff) on a shared time
grid, where the aggregate is either the precomputed deterministic mean-field
path (decentralized laws never read other agents' states; the fold happens
inside the law) or the live empirical average (centralized law only).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridMismatch, NotStabilizing, RegimeViolation
from .meanfield import MeanFieldPath, solve_mean_field_path, solve_offset_infinite
from .model import ProblemData, derived_weights
from .riccati import AlgebraicSolution, FiniteRiccatiPath, require_complete, solve_are


@dataclass(frozen=True)
class ControlLaw:
    kind: str                 # decentralized_finite | decentralized_infinite
                              # | centralized_finite | legacy_feedback
    grid: np.ndarray          # (M+1,)
    Fown: np.ndarray          # (M+1, r, n): R^{-1} B^T P
    Fagg: np.ndarray          # (M+1, r, n): R^{-1} B^T K  (or equivalents)
    foff: np.ndarray          # (M+1, r):   R^{-1} B^T s
    aggregates_on: str        # "xbar" | "xN"
    xbar: np.ndarray | None   # (M+1, n) when aggregates_on == "xbar"

    def control(self, k: int, x: np.ndarray,
                empirical_mean: np.ndarray | None = None) -> np.ndarray:
        """u at grid index k for states x (..., n).

        Decentralized laws take no aggregate argument; the centralized law
        requires the live empirical mean.
        """
        if self.aggregates_on == "xbar":
            if empirical_mean is not None:
                raise GridMismatch(
                    "decentralized law does not accept a live aggregate")
            agg = self.xbar[k]
        else:
            if empirical_mean is None:
                raise GridMismatch("centralized law needs the live average")
            agg = empirical_mean
        u = -(x @ self.Fown[k].T + agg @ self.Fagg[k].T + self.foff[k])
        return u


def _gain_arrays(p: ProblemData, P_path: np.ndarray, K_path: np.ndarray,
                 s_path: np.ndarray):
    RB = np.linalg.solve(p.R, p.B.T)            # (r, n)
    Fown = np.einsum("rn,knm->krm", RB, P_path)
    Fagg = np.einsum("rn,knm->krm", RB, K_path)
    foff = s_path @ RB.T
    return Fown, Fagg, foff


def _check_same_grid(a: np.ndarray, b: np.ndarray):
    if len(a) != len(b) or not np.allclose(a, b, rtol=0, atol=1e-12):
        raise GridMismatch("paths are not on the same time grid")


def decentralized_law_finite(path: FiniteRiccatiPath, mf: MeanFieldPath,
                             p: ProblemData) -> ControlLaw:
    """u_i(t) = -R^{-1} B^T (P(t) x_i + K(t) xbar(t) + s(t))."""
    require_complete(path)
    _check_same_grid(path.grid, mf.grid)
    Fown, Fagg, foff = _gain_arrays(p, path.P, path.K, path.s)
    return ControlLaw(kind="decentralized_finite", grid=path.grid,
                      Fown=Fown, Fagg=Fagg, foff=foff,
                      aggregates_on="xbar", xbar=mf.xbar)


def centralized_law_finite(path: FiniteRiccatiPath, p: ProblemData) -> ControlLaw:
    """u_i(t) = -R^{-1} B^T (P(t) x_i + K(t) x_avg(t) + s(t)) with the live average."""
    require_complete(path)
    Fown, Fagg, foff = _gain_arrays(p, path.P, path.K, path.s)
    return ControlLaw(kind="centralized_finite", grid=path.grid,
                      Fown=Fown, Fagg=Fagg, foff=foff,
                      aggregates_on="xN", xbar=None)


def decentralized_law_infinite(P: AlgebraicSolution, Pi: AlgebraicSolution,
                               mf: MeanFieldPath, p: ProblemData) -> ControlLaw:
    """Stationary law u_i = -R^{-1} B^T (P x_i + (Pi - P) xbar(t) + s(t))."""
    if not (P.stabilizing_with_margin() and Pi.stabilizing_with_margin()):
        raise NotStabilizing("stationary law needs rho-stabilizing P and Pi")
    Mn = len(mf.grid)
    P_path = np.broadcast_to(P.X, (Mn, p.n, p.n))
    K_path = np.broadcast_to(Pi.X - P.X, (Mn, p.n, p.n))
    Fown, Fagg, foff = _gain_arrays(p, P_path, K_path, mf.s)
    return ControlLaw(kind="decentralized_infinite", grid=mf.grid,
                      Fown=Fown, Fagg=Fagg, foff=foff,
                      aggregates_on="xbar", xbar=mf.xbar)


@dataclass(frozen=True)
class LegacyPieces:
    K_bar: AlgebraicSolution
    phi0: np.ndarray
    x_dagger: np.ndarray      # (M+1, n)
    law: ControlLaw


def legacy_law(P: AlgebraicSolution, p: ProblemData, T: float, M: int) -> LegacyPieces:
    """Prior-work feedback u_i = -R^{-1} B^T (P x_i + K_bar x_dag(t) + phi(t)).

    Valid only in the comparison regime f = 0, G = 0.  K_bar solves the
    ARE on (A_bar, -Xi) with A_bar = A - S P; phi and x_dag reuse the
    offset and mean-field machinery with Pi replaced by P + K_bar.
    """
    zero_f = p.f.is_constant() and np.allclose(p.f(0.0), 0.0)
    if not zero_f or not np.allclose(p.G, 0.0):
        raise RegimeViolation("legacy law defined only for f = 0 and G = 0")

    dw = derived_weights(p)
    Abar = p.A - p.S @ P.X
    K_bar = solve_are(Abar, p.S, -dw.Xi, p.rho)

    # phi solves the same backward equation as the offset with Pi -> P + K_bar
    # and zero drift forcing, so reuse the stationary/quadrature machinery.
    offset = solve_offset_infinite(p, P.X + K_bar.X)
    mf = solve_mean_field_path(p, P.X + K_bar.X, offset.signal, T, M)

    Mn = M + 1
    P_path = np.broadcast_to(P.X, (Mn, p.n, p.n))
    K_path = np.broadcast_to(K_bar.X, (Mn, p.n, p.n))
    Fown, Fagg, foff = _gain_arrays(p, P_path, K_path, mf.s)
    law = ControlLaw(kind="legacy_feedback", grid=mf.grid,
                     Fown=Fown, Fagg=Fagg, foff=foff,
                     aggregates_on="xbar", xbar=mf.xbar)
    return LegacyPieces(K_bar=K_bar, phi0=offset.s0, x_dagger=mf.xbar, law=law)


@dataclass(frozen=True)
class RepresentationReport:
    max_state_deviation: float
    cost_rel_difference: float
    state_tol: float
    cost_tol: float
    dev_over_time: np.ndarray | None = None

    @property
    def passed(self) -> bool:
        return (self.max_state_deviation < self.state_tol
                and self.cost_rel_difference < self.cost_tol)

    def to_dict(self) -> dict:
        return {
            "max_state_deviation": self.max_state_deviation,
            "cost_rel_difference": self.cost_rel_difference,
            "state_tol": self.state_tol,
            "cost_tol": self.cost_tol,
            "passed": self.passed,
        }


def representation_check(law_a: ControlLaw, law_b: ControlLaw, p: ProblemData,
                         cfg, state_tol: float = 1e-6,
                         cost_tol: float = 1e-6) -> RepresentationReport:
    """Co-simulate two laws on identical noise and compare paths and costs.

    Two laws represent each other when they generate the same trajectories
    and the same cost along them.
    """
    from .simulator import simulate  # local import avoids cycle

    _check_same_grid(law_a.grid, law_b.grid)
    res_a = simulate(p, law_a, cfg, keep_paths=True)
    res_b = simulate(p, law_b, cfg, keep_paths=True)
    gap = np.abs(res_a.paths.states - res_b.paths.states)
    dev = float(np.max(gap))
    profile = gap.max(axis=(0, 1, 3))
    ja, jb = res_a.j_soc_mean, res_b.j_soc_mean
    rel = abs(ja - jb) / max(1.0, abs(ja))
    return RepresentationReport(max_state_deviation=dev,
                                cost_rel_difference=rel,
                                state_tol=state_tol, cost_tol=cost_tol,
                                dev_over_time=profile)
