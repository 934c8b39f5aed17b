"""Euler-Maruyama simulation of the N-agent system under a control law.

Agents share the drift dx_i = (A x_i + B u_i + G x_avg + f) dt + sigma dW_i
with one scalar Brownian motion per agent.  The running cost uses
left-endpoint quadrature, matching the Euler order.  All randomness is
counter-derived: stream key = (master seed, replication, agent, purpose),
so results are bit-identical for a given (seed, N, M, replications)
regardless of execution order, thread count, or later N extensions.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import GridMismatch, NonFiniteState
from .model import ProblemData

_PURPOSE_INIT = 0
_PURPOSE_NOISE = 1


@dataclass(frozen=True)
class SimulationConfig:
    N: int
    T: float
    M: int
    replications: int = 64
    seed: int = 0
    threads: int = 1
    block: int = 16          # replications per work unit

    def __post_init__(self):
        if self.N < 1 or self.M < 2 or self.replications < 1:
            raise ValueError("need N >= 1, M >= 2, replications >= 1")

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.M + 1)


@dataclass(frozen=True)
class TrajectoryBatch:
    grid: np.ndarray          # (M+1,)
    states: np.ndarray        # (reps, N, M+1, n)
    controls: np.ndarray      # (reps, N, M, r)
    xbar_ref: np.ndarray | None   # (M+1, n)


@dataclass(frozen=True)
class SimulationResult:
    j_soc_mean: float
    j_soc_se: float
    consistency_sup: float | None
    consistency_int: float | None
    epsilon_hat: float | None
    per_rep_cost: np.ndarray              # (reps,)
    per_rep_epsilon: np.ndarray | None    # (reps,)
    per_time_xN_mean: np.ndarray          # (M+1, n), mean over replications
    xbar_ref: np.ndarray | None
    grid: np.ndarray
    tail_flag: bool
    paths: TrajectoryBatch | None = None


def _init_state(seed: int, rep: int, agent: int, mean: np.ndarray,
                cov_root: np.ndarray) -> np.ndarray:
    ss = np.random.SeedSequence(seed, spawn_key=(rep, agent, _PURPOSE_INIT))
    gen = np.random.Generator(np.random.Philox(ss))
    return mean + cov_root @ gen.standard_normal(mean.shape[0])


def _noise_path(seed: int, rep: int, agent: int, M: int, sqrt_h: float) -> np.ndarray:
    ss = np.random.SeedSequence(seed, spawn_key=(rep, agent, _PURPOSE_NOISE))
    gen = np.random.Generator(np.random.Philox(ss))
    return gen.standard_normal(M) * sqrt_h


def _cov_root(cov: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(cov)
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T


def _simulate_block(p: ProblemData, law, cfg: SimulationConfig,
                    reps: range, keep_paths: bool):
    """Advance one block of replications; returns per-rep accumulators."""
    n, r = p.n, p.r
    N, M = cfg.N, cfg.M
    grid = law.grid
    h = grid[1] - grid[0]
    b = len(reps)

    cov_root = _cov_root(p.init_cov)
    X = np.empty((b, N, n))
    dW = np.empty((b, N, M))
    for j, rep in enumerate(reps):
        for i in range(N):
            X[j, i] = _init_state(cfg.seed, rep, i, p.init_mean, cov_root)
            dW[j, i] = _noise_path(cfg.seed, rep, i, M, np.sqrt(h))

    f_nodes = p.f.sample(grid)          # (M+1, n)
    sig_nodes = p.sigma.sample(grid)
    eta_nodes = p.eta.sample(grid)
    disc = np.exp(-p.rho * grid)

    xbar = law.xbar                     # None for the centralized law
    cost = np.zeros(b)
    eps = np.zeros(b) if xbar is not None else None
    dev2 = np.zeros((b, M + 1)) if xbar is not None else None
    xN_path = np.empty((b, M + 1, n))

    states = controls = None
    if keep_paths:
        states = np.empty((b, N, M + 1, n))
        controls = np.empty((b, N, M, r))
        states[:, :, 0] = X

    A_T, B_T, G_T = p.A.T, p.B.T, p.G.T
    Q, R, Gamma = p.Q, p.R, p.Gamma

    xN = X.mean(axis=1)
    xN_path[:, 0] = xN

    # States above this square into the overflow range; the guard below
    # reports them before any accumulator degrades.
    state_cap = 1e140

    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(M):
            if law.aggregates_on == "xbar":
                U = law.control(k, X)
            else:
                U = law.control(k, X, xN[:, None, :])

            # Discounted running cost, left endpoint.
            track = X - xN[:, None, :] @ Gamma.T - eta_nodes[k]
            state_term = np.einsum("bin,nm,bim->b", track, Q, track)
            input_term = np.einsum("bir,rs,bis->b", U, R, U)
            cost += disc[k] * (state_term + input_term) * h

            if dev2 is not None:
                d = xN - xbar[k]
                dev2[:, k] = np.sum(d * d, axis=1)
                # |B^T K d|^2_{R^{-1}} = (Fagg d)^T R (Fagg d), Fagg = R^{-1} B^T K.
                w = d @ law.Fagg[k].T
                eps += disc[k] * np.einsum("br,rs,bs->b", w, R, w) * h

            drift = X @ A_T + U @ B_T + xN[:, None, :] @ G_T + f_nodes[k]
            X = X + h * drift + sig_nodes[k] * dW[:, :, k, None]
            if not np.all(np.isfinite(X)) or np.max(np.abs(X)) > state_cap:
                raise NonFiniteState(
                    f"agent state overflow at step {k + 1}", time_index=k + 1)

            if keep_paths:
                controls[:, :, k] = U
                states[:, :, k + 1] = X
            xN = X.mean(axis=1)
            xN_path[:, k + 1] = xN

        if dev2 is not None:
            d = xN - xbar[M]
            dev2[:, M] = np.sum(d * d, axis=1)

    final_m2 = np.einsum("bin,bin->b", X, X) / N
    return cost, eps, dev2, xN_path, final_m2, states, controls


def simulate(p: ProblemData, law, cfg: SimulationConfig,
             keep_paths: bool = False) -> SimulationResult:
    """Monte Carlo run of the N-agent system under one law.

    Replication blocks are independent work units; with cfg.threads > 1
    they run on a thread pool, but every per-rep quantity lands in a
    preallocated slot and the final reductions walk replication order, so
    the result is bit-identical for any thread count.
    """
    grid = cfg.grid
    if len(law.grid) != len(grid) or not np.allclose(law.grid, grid,
                                                     rtol=0, atol=1e-12):
        raise GridMismatch(
            f"law grid ({len(law.grid)} pts to {law.grid[-1]:.6g}) does not "
            f"cover the requested horizon ({len(grid)} pts to {grid[-1]:.6g})")

    reps = cfg.replications
    blocks = [range(lo, min(lo + cfg.block, reps))
              for lo in range(0, reps, cfg.block)]
    results = [None] * len(blocks)

    def work(idx):
        results[idx] = _simulate_block(p, law, cfg, blocks[idx], keep_paths)

    if cfg.threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            list(pool.map(work, range(len(blocks))))
    else:
        for idx in range(len(blocks)):
            work(idx)

    cost = np.concatenate([res[0] for res in results])
    has_ref = law.xbar is not None
    eps = np.concatenate([res[1] for res in results]) if has_ref else None
    dev2 = np.concatenate([res[2] for res in results]) if has_ref else None
    xN_path = np.concatenate([res[3] for res in results])
    final_m2 = np.concatenate([res[4] for res in results])

    paths = None
    if keep_paths:
        states = np.concatenate([res[5] for res in results])
        controls = np.concatenate([res[6] for res in results])
        paths = TrajectoryBatch(grid=grid, states=states, controls=controls,
                                xbar_ref=law.xbar)

    j_mean = float(np.mean(cost))
    j_se = float(np.std(cost, ddof=1) / np.sqrt(reps)) if reps > 1 else 0.0
    tail = bool(np.exp(-p.rho * cfg.T) * float(np.mean(final_m2))
                > 1e-6 * max(abs(j_mean), 1e-300))

    cons_sup = cons_int = eps_hat = None
    per_rep_eps = None
    if has_ref:
        cons_sup = float(np.max(np.mean(dev2, axis=0)))
        h = grid[1] - grid[0]
        disc = np.exp(-p.rho * grid[:-1])
        cons_int = float(np.mean(dev2[:, :-1] @ disc * h))
        eps_hat = float(np.mean(eps))
        per_rep_eps = eps

    return SimulationResult(
        j_soc_mean=j_mean, j_soc_se=j_se,
        consistency_sup=cons_sup, consistency_int=cons_int,
        epsilon_hat=eps_hat,
        per_rep_cost=cost, per_rep_epsilon=per_rep_eps,
        per_time_xN_mean=xN_path.mean(axis=0),
        xbar_ref=law.xbar, grid=grid, tail_flag=tail, paths=paths)


def social_cost_mc(batch: TrajectoryBatch, p: ProblemData):
    """Social cost (mean, standard error) recomputed from stored paths."""
    grid = batch.grid
    h = grid[1] - grid[0]
    disc = np.exp(-p.rho * grid[:-1])
    eta_nodes = p.eta.sample(grid)
    X = batch.states           # (reps, N, M+1, n)
    U = batch.controls         # (reps, N, M, r)
    xN = X.mean(axis=1)        # (reps, M+1, n)

    track = X[:, :, :-1] - xN[:, None, :-1] @ p.Gamma.T - eta_nodes[:-1]
    state_term = np.einsum("bikn,nm,bikm->bk", track, p.Q, track)
    input_term = np.einsum("bikr,rs,biks->bk", U, p.R, U)
    per_rep = (state_term + input_term) @ disc * h
    reps = per_rep.shape[0]
    se = float(np.std(per_rep, ddof=1) / np.sqrt(reps)) if reps > 1 else 0.0
    return float(np.mean(per_rep)), se


def consistency_error(batch: TrajectoryBatch, xbar: np.ndarray, rho: float):
    """Sample sup_t E|x_avg - xbar|^2 and E int e^{-rho t} |x_avg - xbar|^2 dt."""
    grid = batch.grid
    h = grid[1] - grid[0]
    xN = batch.states.mean(axis=1)          # (reps, M+1, n)
    d2 = np.sum((xN - xbar) ** 2, axis=2)   # (reps, M+1)
    sup_metric = float(np.max(np.mean(d2, axis=0)))
    disc = np.exp(-rho * grid[:-1])
    int_metric = float(np.mean(d2[:, :-1] @ disc * h))
    return sup_metric, int_metric


def gap_epsilon(batch: TrajectoryBatch, K, xbar: np.ndarray,
                p: ProblemData) -> float:
    """Quadrature of e^{-rho t} |B^T K (x_avg - xbar)|^2_{R^{-1}}.

    K is either a constant matrix (stationary gain Pi - P) or a gridded
    path (M+1, n, n).
    """
    grid = batch.grid
    h = grid[1] - grid[0]
    K = np.asarray(K, dtype=float)
    M = len(grid) - 1
    if K.ndim == 2:
        K_nodes = np.broadcast_to(K, (M + 1,) + K.shape)
    else:
        K_nodes = K
    xN = batch.states.mean(axis=1)
    d = xN[:, :-1] - xbar[None, :-1]                       # (reps, M, n)
    v = np.einsum("kml,bkl->bkm", K_nodes[:-1], d)         # K d
    bv = v @ p.B                                           # B^T K d, (reps, M, r)
    integ = np.einsum("bkr,rs,bks->bk", bv, p.R_inv, bv)
    disc = np.exp(-p.rho * grid[:-1])
    return float(np.mean(integ @ disc * h))
