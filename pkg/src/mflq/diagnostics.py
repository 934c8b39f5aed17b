"""Stabilization certificates for the mean-field LQ system.

Checks the standing assumptions (stabilizability, observability or
detectability of the weighted pairs, imaginary-axis-free Hamiltonians) and
evaluates the two sides of the uniform-stabilization equivalence:

  (ii)  both AREs admit solutions with the definiteness demanded by the
        applicable case, and the averaged closed loop A_bar + G - (rho/2) I
        is Hurwitz (A_bar = A - B R^{-1} B^T P);
  (iii) both shifted pairs are PBH-stabilizable and the same closed loop is
        Hurwitz.

The report never guesses outside the hypotheses: when no case applies the
verdict is absent and the case tag is "unclassified".
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotPSD
from .model import ProblemData, derived_weights
from .riccati import AlgebraicSolution, hamiltonian, solve_are

# Rank decisions use singular values against 1e-9 * sigma_max; eigenvalue
# sign tests use an absolute 1e-9.  Explicit thresholds keep verdicts
# reproducible.
RANK_TOL = 1e-9
EIG_TOL = 1e-9


@dataclass(frozen=True)
class PBHCertificate:
    ok: bool
    mode: str                                   # stabilizable | observable | detectable
    tested: tuple[tuple[complex, float], ...]   # (eigenvalue, smallest singular value)
    threshold: float

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "mode": self.mode,
            "tested": [{"eig_re": ev.real, "eig_im": ev.imag, "sigma_min": sv}
                       for ev, sv in self.tested],
            "threshold": self.threshold,
        }


def pbh_stabilizable(A_eff: np.ndarray, B: np.ndarray, rho: float) -> PBHCertificate:
    """PBH test of (A_eff - (rho/2) I, B): every eigenvalue with
    Re >= -tol must leave [lambda I - A, B] at full row rank."""
    A_eff = np.atleast_2d(np.asarray(A_eff, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    n = A_eff.shape[0]
    Ash = A_eff - 0.5 * rho * np.eye(n)
    tested = []
    ok = True
    for ev in np.linalg.eigvals(Ash):
        if ev.real < -EIG_TOL:
            continue
        Mtx = np.hstack([ev * np.eye(n) - Ash, B.astype(complex)])
        sv = np.linalg.svd(Mtx, compute_uv=False)
        tested.append((complex(ev), float(sv[-1])))
        if sv[-1] <= RANK_TOL * max(1.0, sv[0]):
            ok = False
    return PBHCertificate(ok=ok, mode="stabilizable", tested=tuple(tested),
                          threshold=RANK_TOL)


def sqrt_psd(Q: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root; raises NotPSD below the -1e-10 eigenvalue floor."""
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    w, V = np.linalg.eigh(0.5 * (Q + Q.T))
    if w.min() < -1e-10 * max(1.0, np.abs(w).max()):
        raise NotPSD(f"matrix has eigenvalue {w.min():.3e} < 0, no real square root")
    w = np.clip(w, 0.0, None)
    return (V * np.sqrt(w)) @ V.T


def pbh_observable(A_eff: np.ndarray, C: np.ndarray, rho: float,
                   mode: str = "observable") -> PBHCertificate:
    """Dual PBH test of (A_eff - (rho/2) I, C).

    mode "observable" tests every eigenvalue; "detectable" only those with
    Re >= -tol.
    """
    if mode not in ("observable", "detectable"):
        raise ValueError(f"unknown mode {mode!r}")
    A_eff = np.atleast_2d(np.asarray(A_eff, dtype=float))
    C = np.atleast_2d(np.asarray(C, dtype=float))
    n = A_eff.shape[0]
    Ash = A_eff - 0.5 * rho * np.eye(n)
    tested = []
    ok = True
    for ev in np.linalg.eigvals(Ash):
        if mode == "detectable" and ev.real < -EIG_TOL:
            continue
        Mtx = np.vstack([ev * np.eye(n) - Ash, C.astype(complex)])
        sv = np.linalg.svd(Mtx, compute_uv=False)
        tested.append((complex(ev), float(sv[-1])))
        if sv[-1] <= RANK_TOL * max(1.0, sv[0]):
            ok = False
    return PBHCertificate(ok=ok, mode=mode, tested=tuple(tested), threshold=RANK_TOL)


def hamiltonian_matrices(p: ProblemData) -> tuple[np.ndarray, np.ndarray]:
    """The two 2n x 2n Hamiltonians governing existence of stabilizing solutions.

    M1 pairs (A, Q); M2 pairs (A + G, Q - Xi).
    """
    dw = derived_weights(p)
    M1 = hamiltonian(p.A, p.S, p.Q, p.rho)
    M2 = hamiltonian(p.A + p.G, p.S, p.Q - dw.Xi, p.rho)
    return M1, M2


def imaginary_axis_free(M: np.ndarray, tol: float = 1e-8):
    """True when every eigenvalue keeps |Re| above tol * max(1, |M|_2)."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[0] != M.shape[1] or M.shape[0] % 2:
        raise ValueError(f"expected a square even-dimension matrix, got {M.shape}")
    eigs = np.linalg.eigvals(M)
    margin = tol * max(1.0, np.linalg.norm(M, 2))
    return bool(np.min(np.abs(eigs.real)) > margin), eigs


def _psd(Q: np.ndarray) -> bool:
    w = np.linalg.eigvalsh(0.5 * (Q + Q.T))
    return bool(w.min() >= -1e-10 * max(1.0, np.abs(w).max()))


def _definite_enough(sol: AlgebraicSolution, case: str) -> bool:
    w = np.linalg.eigvalsh(sol.X)
    scale = max(np.abs(w).max(), 1e-300)
    if case == "observable":        # strict: X > 0
        return bool(w.min() > 1e-9 * scale)
    if case == "detectable":        # X >= 0
        return bool(w.min() > -1e-9 * scale)
    return sol.is_rho_stabilizing   # hamiltonian case


@dataclass(frozen=True)
class StabilizationReport:
    case_tag: str                       # observable | detectable | hamiltonian | unclassified
    a2_holds: bool
    stab_A: PBHCertificate
    stab_AG: PBHCertificate
    obs_or_det_A: PBHCertificate | None
    obs_or_det_AG: PBHCertificate | None
    m1_free: bool
    m2_free: bool
    are_P: AlgebraicSolution | None
    are_Pi: AlgebraicSolution | None
    are_P_failure: str | None
    are_Pi_failure: str | None
    condition_ii: bool
    condition_iii: bool
    abar_plus_G_hurwitz: bool | None
    abar_plus_G_abscissa: float | None
    verdict: bool | None

    @property
    def equivalence_holds(self) -> bool | None:
        if self.case_tag == "unclassified":
            return None
        return self.condition_ii == self.condition_iii

    def to_dict(self) -> dict:
        def sol_dict(sol, failure):
            if sol is None:
                return {"failure": failure}
            return {
                "X": sol.X.tolist(),
                "residual": sol.residual,
                "spectral_abscissa": sol.spectral_abscissa,
                "is_rho_stabilizing": sol.is_rho_stabilizing,
            }
        return {
            "case_tag": self.case_tag,
            "a2_holds": self.a2_holds,
            "stabilizable_A": self.stab_A.to_dict(),
            "stabilizable_A_plus_G": self.stab_AG.to_dict(),
            "observability_A": None if self.obs_or_det_A is None
                               else self.obs_or_det_A.to_dict(),
            "observability_A_plus_G": None if self.obs_or_det_AG is None
                                      else self.obs_or_det_AG.to_dict(),
            "hamiltonians_imaginary_axis_free": [self.m1_free, self.m2_free],
            "are_P": sol_dict(self.are_P, self.are_P_failure),
            "are_Pi": sol_dict(self.are_Pi, self.are_Pi_failure),
            "condition_ii": self.condition_ii,
            "condition_iii": self.condition_iii,
            "abar_plus_G_hurwitz": self.abar_plus_G_hurwitz,
            "abar_plus_G_abscissa": self.abar_plus_G_abscissa,
            "verdict": self.verdict,
            "equivalence_holds": self.equivalence_holds,
        }


def stabilization_report(p: ProblemData) -> StabilizationReport:
    """Classify the instance and evaluate both sides of the equivalence.

    Case selection: "observable" when Q >= 0 and both weighted pairs are
    observable; else "detectable" when Q >= 0 and both are detectable; else
    "hamiltonian" when both Hamiltonians are imaginary-axis free; else
    "unclassified" (verdict absent).
    """
    dw = derived_weights(p)
    eye = np.eye(p.n)

    # Classification evidence.
    q_psd = _psd(p.Q)
    obs_A = obs_AG = det_A = det_AG = None
    if q_psd:
        C1 = sqrt_psd(p.Q)
        C2 = C1 @ (eye - p.Gamma)
        obs_A = pbh_observable(p.A, C1, p.rho, "observable")
        obs_AG = pbh_observable(p.A + p.G, C2, p.rho, "observable")
        det_A = pbh_observable(p.A, C1, p.rho, "detectable")
        det_AG = pbh_observable(p.A + p.G, C2, p.rho, "detectable")
    M1, M2 = hamiltonian_matrices(p)
    m1_free, _ = imaginary_axis_free(M1)
    m2_free, _ = imaginary_axis_free(M2)

    if q_psd and obs_A.ok and obs_AG.ok:
        case = "observable"
        cert_A, cert_AG = obs_A, obs_AG
    elif q_psd and det_A.ok and det_AG.ok:
        case = "detectable"
        cert_A, cert_AG = det_A, det_AG
    elif m1_free and m2_free:
        case = "hamiltonian"
        cert_A, cert_AG = None, None
    else:
        case = "unclassified"
        cert_A, cert_AG = None, None

    # ARE solve attempts are recorded even when they fail; a failure is a
    # distinguishable state, not a verdict.
    are_P = are_Pi = None
    fail_P = fail_Pi = None
    try:
        are_P = solve_are(p.A, p.S, p.Q, p.rho)
    except Exception as exc:            # noqa: BLE001 - recorded, not raised
        fail_P = f"{type(exc).__name__}: {exc}"
    try:
        are_Pi = solve_are(p.A + p.G, p.S, dw.Q_bar, p.rho)
    except Exception as exc:            # noqa: BLE001
        fail_Pi = f"{type(exc).__name__}: {exc}"

    hurwitz = None
    abscissa = None
    if are_P is not None:
        Abar = p.A - p.S @ are_P.X
        shifted = Abar + p.G - 0.5 * p.rho * eye
        abscissa = float(np.max(np.linalg.eigvals(shifted).real))
        hurwitz = abscissa < 0.0

    stab_A = pbh_stabilizable(p.A, p.B, p.rho)
    stab_AG = pbh_stabilizable(p.A + p.G, p.B, p.rho)
    a2 = bool(stab_A.ok and stab_AG.ok and (hurwitz is True))

    if case == "unclassified":
        cond_ii = False
        verdict = None
    else:
        cond_ii = bool(
            are_P is not None and are_Pi is not None
            and _definite_enough(are_P, case)
            and _definite_enough(are_Pi, case)
            and hurwitz is True)
        verdict = a2

    return StabilizationReport(
        case_tag=case,
        a2_holds=a2,
        stab_A=stab_A,
        stab_AG=stab_AG,
        obs_or_det_A=cert_A,
        obs_or_det_AG=cert_AG,
        m1_free=m1_free,
        m2_free=m2_free,
        are_P=are_P,
        are_Pi=are_Pi,
        are_P_failure=fail_P,
        are_Pi_failure=fail_Pi,
        condition_ii=cond_ii,
        condition_iii=a2,
        abar_plus_G_hurwitz=hurwitz,
        abar_plus_G_abscissa=abscissa,
        verdict=verdict,
    )
