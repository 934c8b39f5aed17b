"""Backward differential Riccati paths and discounted algebraic Riccati equations.

Finite horizon, with terminal conditions zero at t = T:

    rho P  = P'  + A^T P + P A + Q - P S P
    rho K  = K'  + (A+G)^T K + K (A+G) + G^T P + P G
                 - (P+K) S (P+K) + P S P - Xi
    rho Pi = Pi' + (A+G)^T Pi + Pi (A+G) + Q_bar - Pi S Pi
    rho s  = s'  + (A + G - S (P+K))^T s + (P+K) f(t) - eta_bar(t)

with S = B R^{-1} B^T, Xi and Q_bar = Q - Xi from the coupling weights.
Pi equals P + K along exact solutions; both are integrated independently so
the identity doubles as an integration check.  With indefinite Q these paths
can escape in finite time; escapes are detected and reported, not repaired.

Infinite horizon, the stationary counterpart

    rho X = A_eff^T X + X A_eff - X S X + Q_eff

is solved for the rho-stabilizing solution through the ordered real Schur
form of the Hamiltonian matrix

    M = [[A_eff - (rho/2) I,  S], [Q_eff, -A_eff^T + (rho/2) I]].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import (
    AsymmetricResult,
    BlowUp,
    ImaginaryAxisEigenvalue,
    StepTooCoarse,
    SubspaceNotGraph,
)
from .model import ProblemData, derived_weights

BLOWUP_THRESHOLD = 1e12
# Scale-aware margin for "no eigenvalues on the imaginary axis".
IMAG_AXIS_TOL = 1e-8


@dataclass(frozen=True)
class FiniteRiccatiPath:
    """Backward Riccati solutions stored on a uniform grid over [0, T].

    Arrays are indexed by grid point; entries earlier than a finite escape
    are NaN and `blowup_time` records the first unreachable grid time.
    """

    grid: np.ndarray        # (M+1,)
    P: np.ndarray           # (M+1, n, n)
    K: np.ndarray           # (M+1, n, n)
    Pi: np.ndarray          # (M+1, n, n)
    s: np.ndarray           # (M+1, n)
    blowup_time: float | None = None

    @property
    def complete(self) -> bool:
        return self.blowup_time is None

    @property
    def first_valid_index(self) -> int:
        if self.blowup_time is None:
            return 0
        return int(np.searchsorted(self.grid, self.blowup_time)) + 1

    def pi_defect(self) -> float:
        """max_t |Pi(t) - P(t) - K(t)| over the valid part of the grid."""
        k0 = self.first_valid_index
        return float(np.max(np.abs(self.Pi[k0:] - self.P[k0:] - self.K[k0:])))


@dataclass(frozen=True)
class AlgebraicSolution:
    """One constant solution of the discounted algebraic Riccati equation."""

    X: np.ndarray
    closed_loop: np.ndarray          # A_eff - S X
    residual: float
    spectral_abscissa: float         # max Re eig(closed_loop)
    is_rho_stabilizing: bool
    rho: float

    def stabilizing_with_margin(self, tol: float = 1e-9) -> bool:
        """Strictly inside the rho/2 bound by a scale-aware margin.

        Marginal solutions (loop sitting on the boundary up to rounding)
        fail this even when the literal strict comparison happens to pass.
        """
        scale = max(1.0, float(np.linalg.norm(self.closed_loop)))
        return bool(self.spectral_abscissa < 0.5 * self.rho - tol * scale)


@dataclass(frozen=True)
class Classification:
    is_rho_stabilizing: bool
    is_maximal: bool | None          # verified for n = 1, else None
    other_roots: tuple[float, ...]   # scalar case only


def are_residual(X: np.ndarray, A_eff: np.ndarray, S: np.ndarray,
                 Q_eff: np.ndarray, rho: float) -> float:
    """Frobenius norm of rho X - A_eff^T X - X A_eff + X S X - Q_eff."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    res = rho * X - A_eff.T @ X - X @ A_eff + X @ S @ X - Q_eff
    return float(np.linalg.norm(res))


def hamiltonian(A_eff: np.ndarray, S: np.ndarray, Q_eff: np.ndarray,
                rho: float) -> np.ndarray:
    n = A_eff.shape[0]
    shift = A_eff - 0.5 * rho * np.eye(n)
    return np.block([[shift, S], [Q_eff, -shift.T]])


def solve_are(A_eff: np.ndarray, S: np.ndarray, Q_eff: np.ndarray,
              rho: float) -> AlgebraicSolution:
    """Rho-stabilizing solution of the discounted ARE via Hamiltonian Schur form.

    The stable invariant subspace of M is the graph of -X: substituting
    shows M [I; -X] = [I; -X] (A_eff - S X - (rho/2) I) exactly when X
    solves the Riccati equation, so with an ordered real Schur basis
    [X1; X2] of that subspace, X = -X2 X1^{-1}.  When the subspace exists
    and is a graph this X is the unique rho-stabilizing solution, which is
    also the maximal one.
    """
    A_eff = np.atleast_2d(np.asarray(A_eff, dtype=float))
    S = np.atleast_2d(np.asarray(S, dtype=float))
    Q_eff = np.atleast_2d(np.asarray(Q_eff, dtype=float))
    n = A_eff.shape[0]
    M = hamiltonian(A_eff, S, Q_eff, rho)

    scale = max(1.0, np.linalg.norm(M, 2))
    eigs = np.linalg.eigvals(M)
    if np.min(np.abs(eigs.real)) <= IMAG_AXIS_TOL * scale:
        raise ImaginaryAxisEigenvalue(
            "Hamiltonian matrix has an eigenvalue within "
            f"{IMAG_AXIS_TOL * scale:.3e} of the imaginary axis")

    _, Z, sdim = linalg.schur(M, output="real", sort="lhp")
    if sdim != n:
        raise ImaginaryAxisEigenvalue(
            f"stable subspace has dimension {sdim}, expected {n}")
    X1 = Z[:n, :n]
    X2 = Z[n:, :n]
    sv = np.linalg.svd(X1, compute_uv=False)
    if sv[-1] <= 1e-12 * max(1.0, sv[0]):
        raise SubspaceNotGraph(
            "stable subspace is not a graph over the state space "
            "(stabilizing solution does not exist)")
    X = -np.linalg.solve(X1.T, X2.T).T

    asym = np.linalg.norm(X - X.T)
    if asym > 1e-7 * (1.0 + np.linalg.norm(X)):
        raise AsymmetricResult(
            f"Schur solution asymmetric beyond tolerance: {asym:.3e}")
    X = 0.5 * (X + X.T)

    # One defect-correction pass: Newton step via the Sylvester equation
    # C^T D + D C = residual with C the shifted closed loop.
    C = A_eff - S @ X - 0.5 * rho * np.eye(n)
    res = rho * X - A_eff.T @ X - X @ A_eff + X @ S @ X - Q_eff
    if np.linalg.norm(res) > 0:
        try:
            D = linalg.solve_sylvester(C.T, C, res)
            Xc = 0.5 * ((X + D) + (X + D).T)
            if are_residual(Xc, A_eff, S, Q_eff, rho) < np.linalg.norm(res):
                X = Xc
        except np.linalg.LinAlgError:
            pass

    closed_loop = A_eff - S @ X
    abscissa = float(np.max(np.linalg.eigvals(closed_loop).real))
    return AlgebraicSolution(
        X=X,
        closed_loop=closed_loop,
        residual=are_residual(X, A_eff, S, Q_eff, rho),
        spectral_abscissa=abscissa,
        is_rho_stabilizing=abscissa < 0.5 * rho,
        rho=rho,
    )


def scalar_candidates(a_eff: float, s: float, q_eff: float,
                      rho: float) -> list[AlgebraicSolution]:
    """All real solutions of the scalar ARE s x^2 - (2 a_eff - rho) x - q_eff = 0.

    Returns them sorted increasingly; with s = 0 the equation is linear.
    Used for maximality verification and as a reporting fallback when the
    Hamiltonian method refuses a marginal instance.
    """
    roots: list[float] = []
    if s == 0.0:
        denom = rho - 2.0 * a_eff
        if denom != 0.0:
            roots = [q_eff / denom]
    else:
        disc = (2.0 * a_eff - rho) ** 2 + 4.0 * s * q_eff
        if disc > 0:
            roots = [((2.0 * a_eff - rho) - np.sqrt(disc)) / (2.0 * s),
                     ((2.0 * a_eff - rho) + np.sqrt(disc)) / (2.0 * s)]
        elif disc == 0:
            roots = [(2.0 * a_eff - rho) / (2.0 * s)]
    out = []
    for x in sorted(roots):
        cl = a_eff - s * x
        out.append(AlgebraicSolution(
            X=np.array([[x]]),
            closed_loop=np.array([[cl]]),
            residual=are_residual(np.array([[x]]), np.array([[a_eff]]),
                                  np.array([[s]]), np.array([[q_eff]]), rho),
            spectral_abscissa=cl,
            is_rho_stabilizing=cl < 0.5 * rho,
            rho=rho,
        ))
    return out


def classify_solution(sol: AlgebraicSolution, A_eff: np.ndarray, S: np.ndarray,
                      Q_eff: np.ndarray, rho: float) -> Classification:
    """Report stabilization status; verify maximality by root enumeration for n = 1.

    For n > 1 maximality is not re-verified (a rho-stabilizing solution is
    maximal whenever one exists), so `is_maximal` is None there.
    """
    n = sol.X.shape[0]
    if n != 1:
        return Classification(
            is_rho_stabilizing=sol.is_rho_stabilizing,
            is_maximal=None, other_roots=())
    cands = scalar_candidates(float(np.atleast_2d(A_eff)[0, 0]),
                              float(np.atleast_2d(S)[0, 0]),
                              float(np.atleast_2d(Q_eff)[0, 0]), rho)
    x = float(sol.X[0, 0])
    others = tuple(float(c.X[0, 0]) for c in cands
                   if abs(float(c.X[0, 0]) - x) > 1e-9 * (1.0 + abs(x)))
    is_max = all(x >= o for o in others) if cands else None
    return Classification(
        is_rho_stabilizing=sol.is_rho_stabilizing,
        is_maximal=is_max,
        other_roots=others,
    )


def _dre_rates(p: ProblemData, Xi: np.ndarray, Q_bar: np.ndarray):
    """Forward-time derivatives of (P, K, Pi, s); backward steps negate them."""
    A, G, Q, S, rho = p.A, p.G, p.Q, p.S, p.rho
    AG = A + G

    def rates(P, K, Pi, s, f_t, eb_t):
        PK = P + K
        dP = rho * P - A.T @ P - P @ A - Q + P @ S @ P
        dK = (rho * K - AG.T @ K - K @ AG - G.T @ P - P @ G
              + PK @ S @ PK - P @ S @ P + Xi)
        dPi = rho * Pi - AG.T @ Pi - Pi @ AG - Q_bar + Pi @ S @ Pi
        ds = rho * s - (AG - S @ PK).T @ s - PK @ f_t + eb_t
        return dP, dK, dPi, ds

    return rates


def solve_dre(p: ProblemData, T: float, M: int,
              check_grid: bool = False) -> FiniteRiccatiPath:
    """Integrate the backward Riccati system from zero terminal conditions.

    Classical RK4 with fixed step on a uniform grid; P, K, Pi are
    symmetrized after every step.  A finite escape (any entry beyond 1e12,
    or a non-finite value) truncates the path and sets `blowup_time`.

    With check_grid=True the solve is repeated at half resolution and
    StepTooCoarse is raised when P(0) moves by more than 1e-6 relative.
    """
    if T <= 0:
        raise ValueError(f"horizon T must be positive, got {T}")
    if M < 2:
        raise ValueError(f"step count M must be at least 2, got {M}")

    n = p.n
    dw = derived_weights(p)
    rates = _dre_rates(p, dw.Xi, dw.Q_bar)
    grid = np.linspace(0.0, T, M + 1)
    h = T / M

    P = np.full((M + 1, n, n), np.nan)
    K = np.full((M + 1, n, n), np.nan)
    Pi = np.full((M + 1, n, n), np.nan)
    s = np.full((M + 1, n), np.nan)
    P[M] = K[M] = Pi[M] = np.zeros((n, n))
    s[M] = np.zeros(n)

    blowup_time = None
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(M, 0, -1):
            t = grid[k]
            fs = (p.f(t), p.f(t - 0.5 * h), p.f(t - h))
            ebs = (dw.eta_bar(t), dw.eta_bar(t - 0.5 * h), dw.eta_bar(t - h))

            def back(Pv, Kv, Piv, sv, stage):
                dP, dK, dPi, ds = rates(Pv, Kv, Piv, sv, fs[stage], ebs[stage])
                return -dP, -dK, -dPi, -ds

            y = (P[k], K[k], Pi[k], s[k])
            k1 = back(*y, 0)
            k2 = back(*(y[i] + 0.5 * h * k1[i] for i in range(4)), 1)
            k3 = back(*(y[i] + 0.5 * h * k2[i] for i in range(4)), 1)
            k4 = back(*(y[i] + h * k3[i] for i in range(4)), 2)
            new = [y[i] + (h / 6.0) * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i])
                   for i in range(4)]
            new[0] = 0.5 * (new[0] + new[0].T)
            new[1] = 0.5 * (new[1] + new[1].T)
            new[2] = 0.5 * (new[2] + new[2].T)

            worst = max(np.max(np.abs(a)) for a in new)
            if not np.isfinite(worst) or worst > BLOWUP_THRESHOLD:
                blowup_time = float(grid[k - 1])
                break
            P[k - 1], K[k - 1], Pi[k - 1], s[k - 1] = new

    path = FiniteRiccatiPath(grid=grid, P=P, K=K, Pi=Pi, s=s,
                             blowup_time=blowup_time)

    if check_grid and blowup_time is None and M >= 4:
        coarse = solve_dre(p, T, M // 2)
        if coarse.blowup_time is None:
            num = np.linalg.norm(path.P[0] - coarse.P[0])
            den = 1.0 + np.linalg.norm(path.P[0])
            if num / den > 1e-6:
                raise StepTooCoarse(
                    f"halving M changes P(0) by {num / den:.3e} relative")
    return path


def require_complete(path: FiniteRiccatiPath) -> None:
    """Raise BlowUp when a path carries a finite-escape truncation."""
    if path.blowup_time is not None:
        raise BlowUp(
            f"Riccati path escaped; values undefined for t <= {path.blowup_time:.6g}")
