"""Independent oracles used by the tests.

Each routine recomputes a quantity by a route the library does not take:
quadratic formulas for scalar Riccati roots, the 2n x 2n matrix-exponential
representation for the backward Riccati path, and variation of constants
for linear offset equations.  Keep these free of mflq solver imports.
"""

import numpy as np
from scipy.linalg import expm


def scalar_are_roots(a, b, g, q, gamma, r, rho, averaged=False):
    """Both roots of the scalar Riccati quadratic, ascending.

    averaged=False: (b^2/r) p^2 - (2a - rho) p - q = 0.
    averaged=True : same with a -> a + g and q -> q (1 - gamma)^2.
    """
    if averaged:
        a = a + g
        q = q * (1.0 - gamma) ** 2
    s = b * b / r
    disc = (2.0 * a - rho) ** 2 + 4.0 * s * q
    if disc < 0:
        return ()
    lo = ((2.0 * a - rho) - np.sqrt(disc)) / (2.0 * s)
    hi = ((2.0 * a - rho) + np.sqrt(disc)) / (2.0 * s)
    return (lo, hi)


def dre_expm(A, S, Q, rho, tau):
    """Backward Riccati solution at time-to-go tau via the matrix exponential.

    With H = [[A - (rho/2) I, -S], [-Q, -A^T + (rho/2) I]] and
    [X; Y] = e^{-H tau} [I; 0], the terminal-zero solution is Y X^{-1}.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    S = np.atleast_2d(np.asarray(S, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    n = A.shape[0]
    Ash = A - 0.5 * rho * np.eye(n)
    H = np.block([[Ash, -S], [-Q, -Ash.T]])
    E = expm(-H * tau)
    X = E[:n, :n]
    Y = E[n:, :n]
    return np.linalg.solve(X.T, Y.T).T


def dre_expm_det(A, S, Q, rho, tau):
    """Determinant whose zero crossing marks the finite escape of dre_expm."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[0]
    Ash = A - 0.5 * rho * np.eye(n)
    H = np.block([[Ash, -S], [-Q, -Ash.T]])
    E = expm(-H * tau)
    return float(np.linalg.det(E[:n, :n]))


def scalar_offset_constant_coeff(m, rho, c, T, t):
    """Terminal-zero solution of rho s = s' + m s + c on [0, T] at time t."""
    s_star = c / (rho - m)
    return s_star * (1.0 - np.exp((rho - m) * (t - T)))


def scalar_escape_time(a, b, q, r, rho):
    """Time-to-go at which the terminal-zero scalar Riccati path escapes.

    Exists when both quadratic roots are real with the same sign and the
    terminal value 0 lies outside [lo, hi]; returns None otherwise.
    """
    roots = scalar_are_roots(a, b, 0.0, q, 0.0, r, rho)
    if not roots:
        return None
    lo, hi = roots
    if lo <= 0.0 <= hi:
        return None
    disc = np.sqrt((2.0 * a - rho) ** 2 + 4.0 * (b * b / r) * q)
    return float(np.log(hi / lo) / disc) if lo > 0 else None


def discounted_quad(grid, values, rho):
    """Left-endpoint quadrature of e^{-rho t} values(t)."""
    h = grid[1] - grid[0]
    return float(np.sum(np.exp(-rho * grid[:-1]) * values[:-1]) * h)
