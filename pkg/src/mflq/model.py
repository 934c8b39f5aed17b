"""Problem data for mean-field linear-quadratic social control.

A population of agents shares one set of coefficients.  Each agent's state
follows

    dx_i = (A x_i + B u_i + G x_avg + f(t)) dt + sigma(t) dW_i,

where x_avg is the empirical average of all agent states, and each agent pays
the discounted cost

    J_i = E int_0^inf e^{-rho t} ( |x_i - Gamma x_avg - eta(t)|_Q^2
                                   + |u_i|_R^2 ) dt.

The state weight Q may be indefinite; R must be positive definite.  Signals
f, sigma, eta are either constants or interpolated tables.  Everything here
is immutable after construction and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    NegativeTime,
    NonPositiveRho,
    NotPositiveDefinite,
    NotSymmetric,
)

# Relative asymmetry above which Q or R is rejected instead of symmetrized.
SYM_TOL = 1e-9


def _as_matrix(value, name: str) -> np.ndarray:
    m = np.atleast_2d(np.asarray(value, dtype=float))
    if m.ndim != 2:
        raise DimensionMismatch(f"{name} must be a 2-d matrix, got shape {m.shape}")
    return m


def _as_vector(value, name: str) -> np.ndarray:
    v = np.atleast_1d(np.asarray(value, dtype=float))
    if v.ndim != 1:
        raise DimensionMismatch(f"{name} must be a vector, got shape {v.shape}")
    return v


def _symmetrize_or_reject(m: np.ndarray, name: str) -> np.ndarray:
    asym = np.linalg.norm(m - m.T)
    if asym > SYM_TOL * (1.0 + np.linalg.norm(m)):
        raise NotSymmetric(f"{name} is not symmetric: |{name} - {name}^T| = {asym:.3e}")
    return 0.5 * (m + m.T)


@dataclass(frozen=True)
class Signal:
    """Time signal: a constant vector, or a table with linear interpolation.

    Table knots must be strictly increasing.  Beyond the last knot the signal
    stays at its last value, so evaluation is defined for every t >= 0.
    """

    kind: str                       # "constant" | "table"
    value: np.ndarray | None = None         # (n,) for constant
    times: np.ndarray | None = None         # (k,) strictly increasing
    values: np.ndarray | None = None        # (k, n)

    @staticmethod
    def constant(value) -> "Signal":
        return Signal(kind="constant", value=_as_vector(value, "signal"))

    @staticmethod
    def table(times, values) -> "Signal":
        t = _as_vector(times, "signal times")
        v = np.atleast_2d(np.asarray(values, dtype=float))
        if v.shape[0] != t.shape[0]:
            raise DimensionMismatch(
                f"signal table has {t.shape[0]} knots but {v.shape[0]} value rows")
        if t.shape[0] < 1:
            raise DimensionMismatch("signal table needs at least one knot")
        if np.any(np.diff(t) <= 0):
            raise DimensionMismatch("signal table knots must be strictly increasing")
        return Signal(kind="table", times=t, values=v)

    @property
    def dim(self) -> int:
        return self.value.shape[0] if self.kind == "constant" else self.values.shape[1]

    def is_constant(self) -> bool:
        if self.kind == "constant":
            return True
        return bool(np.all(self.values == self.values[0]))

    def last_knot(self) -> float:
        return 0.0 if self.kind == "constant" else float(self.times[-1])

    def __call__(self, t: float) -> np.ndarray:
        if t < 0:
            raise NegativeTime(f"signal evaluated at t = {t} < 0")
        if self.kind == "constant":
            return self.value
        out = np.empty(self.values.shape[1])
        for j in range(self.values.shape[1]):
            out[j] = np.interp(t, self.times, self.values[:, j])
        return out

    def sample(self, grid: np.ndarray) -> np.ndarray:
        """Evaluate on a grid of times, returning (len(grid), n)."""
        if np.any(np.asarray(grid) < 0):
            raise NegativeTime("signal grid contains negative times")
        if self.kind == "constant":
            return np.tile(self.value, (len(grid), 1))
        cols = [np.interp(grid, self.times, self.values[:, j])
                for j in range(self.values.shape[1])]
        return np.stack(cols, axis=1)

    def map(self, matrix: np.ndarray) -> "Signal":
        """New signal t -> matrix @ self(t)."""
        if self.kind == "constant":
            return Signal.constant(matrix @ self.value)
        return Signal.table(self.times, self.values @ matrix.T)


def signal_eval(sig: Signal, t: float) -> np.ndarray:
    """Evaluate a signal at time t >= 0."""
    return sig(t)


def as_signal(value, n: int, name: str) -> Signal:
    """Coerce a raw value (scalar, vector, Signal) to an n-dimensional Signal."""
    if isinstance(value, Signal):
        sig = value
    elif np.isscalar(value):
        sig = Signal.constant(np.full(n, float(value)))
    else:
        sig = Signal.constant(value)
    if sig.dim != n:
        raise DimensionMismatch(f"signal {name} has dimension {sig.dim}, expected {n}")
    return sig


@dataclass(frozen=True)
class ProblemData:
    """Validated coefficients of one mean-field LQ problem instance."""

    A: np.ndarray
    B: np.ndarray
    G: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    Gamma: np.ndarray
    rho: float
    f: Signal
    sigma: Signal
    eta: Signal
    init_mean: np.ndarray
    init_cov: np.ndarray

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def r(self) -> int:
        return self.B.shape[1]

    @property
    def S(self) -> np.ndarray:
        """Control kernel B R^{-1} B^T."""
        return self.B @ np.linalg.solve(self.R, self.B.T)

    @property
    def R_inv(self) -> np.ndarray:
        return np.linalg.inv(self.R)


@dataclass(frozen=True)
class DerivedWeights:
    """Weights induced by the mean-field coupling Gamma.

    Xi = Gamma^T Q + Q Gamma - Gamma^T Q Gamma
    eta_bar(t) = Q eta(t) - Gamma^T Q eta(t)
    Q_bar = Q - Xi = (I - Gamma)^T Q (I - Gamma)
    """

    Xi: np.ndarray
    eta_bar: Signal
    Q_bar: np.ndarray


def build_problem(config: dict) -> ProblemData:
    """Validate a parsed problem mapping and return immutable ProblemData.

    Q and R are symmetrized when the asymmetry is below tolerance and
    rejected otherwise; R must be positive definite and rho positive.
    Initial states are iid Gaussian(init_mean, init_cov) per agent.
    """
    A = _as_matrix(config["A"], "A")
    n = A.shape[0]
    if A.shape != (n, n):
        raise DimensionMismatch(f"A must be square, got {A.shape}")

    B = np.asarray(config["B"], dtype=float)
    if B.ndim == 0:
        B = B.reshape(1, 1)
    elif B.ndim == 1:
        B = B.reshape(-1, 1)
    if B.shape[0] != n:
        raise DimensionMismatch(f"B has {B.shape[0]} rows, state dimension is {n}")
    r = B.shape[1]

    def square(name, default=None):
        if name not in config or config[name] is None:
            if default is None:
                raise DimensionMismatch(f"matrix {name} missing")
            return default.copy()
        m = _as_matrix(config[name], name)
        if m.shape != (n, n):
            raise DimensionMismatch(f"{name} must be {n}x{n}, got {m.shape}")
        return m

    G = square("G", np.zeros((n, n)))
    Gamma = square("Gamma", np.zeros((n, n)))
    Q = _symmetrize_or_reject(square("Q"), "Q")

    R = _as_matrix(config["R"], "R")
    if R.shape != (r, r):
        raise DimensionMismatch(f"R must be {r}x{r} for {r} inputs, got {R.shape}")
    R = _symmetrize_or_reject(R, "R")
    r_eigs = np.linalg.eigvalsh(R)
    if r_eigs.min() <= 0:
        raise NotPositiveDefinite(
            f"R must be positive definite, smallest eigenvalue {r_eigs.min():.3e}")

    rho = float(config["rho"])
    if rho <= 0:
        raise NonPositiveRho(f"rho must be positive, got {rho}")

    def sig(name):
        raw = config.get(name, 0.0)
        if isinstance(raw, dict):
            return as_signal(Signal.table(raw["times"], raw["values"]), n, name)
        return as_signal(raw, n, name)

    f = sig("f")
    sigma = sig("sigma")
    eta = sig("eta")

    init_mean = _as_vector(config.get("init_mean", np.zeros(n)), "init_mean")
    if init_mean.shape[0] != n:
        raise DimensionMismatch(f"init_mean has dimension {init_mean.shape[0]}, expected {n}")
    init_cov = square("init_cov", np.zeros((n, n)))
    init_cov = _symmetrize_or_reject(init_cov, "init_cov")
    cov_eigs = np.linalg.eigvalsh(init_cov)
    if cov_eigs.min() < -1e-10 * max(1.0, abs(cov_eigs).max()):
        raise NotPositiveDefinite(
            f"init_cov must be PSD, smallest eigenvalue {cov_eigs.min():.3e}")

    return ProblemData(A=A, B=B, G=G, Q=Q, R=R, Gamma=Gamma, rho=rho,
                       f=f, sigma=sigma, eta=eta,
                       init_mean=init_mean, init_cov=init_cov)


def derived_weights(p: ProblemData) -> DerivedWeights:
    """Compute Xi, eta_bar, Q_bar from the coupling Gamma."""
    eye = np.eye(p.n)
    Xi = p.Gamma.T @ p.Q + p.Q @ p.Gamma - p.Gamma.T @ p.Q @ p.Gamma
    Xi = 0.5 * (Xi + Xi.T)
    Q_bar = (eye - p.Gamma).T @ p.Q @ (eye - p.Gamma)
    Q_bar = 0.5 * (Q_bar + Q_bar.T)
    eta_bar = p.eta.map(p.Q - p.Gamma.T @ p.Q)
    return DerivedWeights(Xi=Xi, eta_bar=eta_bar, Q_bar=Q_bar)
