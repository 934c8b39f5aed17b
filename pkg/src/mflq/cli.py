"""Command-line entry point: scenario in, CSVs, JSON reports and figures out.

Subcommands:
    solve      Riccati paths (finite) or ARE solutions (infinite), offset,
               mean-field path, analytic cost.
    diagnose   Stabilization certificates and the equivalence verdict.
    simulate   N-agent Monte Carlo run, time-series and summary CSVs.
    sweep      Per-N summary CSV over the scenario's sweep list.
    compare    Co-simulation of the stationary law against the legacy
               feedback representation (f = 0, G = 0 regime).

All artifacts land in one output directory (flag --out, environment
variable MFLQ_OUT_DIR, or the scenario's outputs.dir, in that order).
Every run is deterministic given the resolved configuration; CSVs are
byte-identical across repeats and thread counts.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import control, cost, diagnostics, figures, meanfield, riccati, simulator
from .errors import IoError, MFLQError, MissingField, NotStabilizing
from .model import ProblemData, derived_weights
from .scenario import Scenario, parse_scenario

_ENV_OUT = "MFLQ_OUT_DIR"


@dataclass(frozen=True)
class RunOptions:
    seed: int
    N: int | None
    steps: int
    out_dir: Path
    quiet: bool
    threads: int
    render_figures: bool


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def emit_csv(header, rows, path) -> Path:
    """Write an RFC-4180-style CSV: header row, LF endings, 17-digit floats."""
    path = Path(path)
    try:
        with open(path, "w", newline="") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(_fmt(v) for v in row) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    return path


def _write_json(doc: dict, path: Path) -> Path:
    try:
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True, default=_json_default)
            fh.write("\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    return path


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    raise TypeError(f"not JSON-serializable: {type(obj)}")


def _matrix_headers(name: str, n: int, m: int):
    return [f"{name}_{i + 1}{j + 1}" for i in range(n) for j in range(m)]


def _vector_headers(name: str, n: int):
    return [f"{name}_{i + 1}" for i in range(n)]


def _solve_are_reporting(A_eff, S, Q_eff, rho, n):
    """ARE solve with the scalar-root fallback for marginal instances.

    When the Hamiltonian method refuses a scalar instance (eigenvalue on
    the imaginary axis), the real quadratic roots still identify the
    solution set; the maximal real root is reported with its stabilization
    status, which may be False.
    """
    try:
        return riccati.solve_are(A_eff, S, Q_eff, rho), False
    except riccati.ImaginaryAxisEigenvalue:
        if n != 1:
            raise
        cands = riccati.scalar_candidates(
            float(np.atleast_2d(A_eff)[0, 0]), float(np.atleast_2d(S)[0, 0]),
            float(np.atleast_2d(Q_eff)[0, 0]), rho)
        if not cands:
            raise
        return cands[-1], True


def run(command: str, sc: Scenario, opts: RunOptions) -> dict:
    """Execute one subcommand; returns a manifest of written artifacts."""
    out = opts.out_dir
    out.mkdir(parents=True, exist_ok=True)
    p = sc.build_problem()
    if command == "solve":
        return _run_solve(p, sc, opts)
    if command == "diagnose":
        return _run_diagnose(p, sc, opts)
    if command == "simulate":
        return _run_simulate(p, sc, opts)
    if command == "sweep":
        return _run_sweep(p, sc, opts)
    if command == "compare":
        return _run_compare(p, sc, opts)
    raise ValueError(f"unknown subcommand {command!r}")


def _riccati_csv(path_obj: riccati.FiniteRiccatiPath, n: int, out: Path) -> Path:
    header = (["t"] + _matrix_headers("P", n, n) + _matrix_headers("K", n, n)
              + _matrix_headers("Pi", n, n) + _vector_headers("s", n))
    rows = []
    for k, t in enumerate(path_obj.grid):
        rows.append([t, *path_obj.P[k].ravel(), *path_obj.K[k].ravel(),
                     *path_obj.Pi[k].ravel(), *path_obj.s[k]])
    return emit_csv(header, rows, out / "riccati_path.csv")


def _meanfield_csv(grid, xbar, s, out: Path) -> Path:
    n = xbar.shape[1]
    header = ["t"] + _vector_headers("xbar", n) + _vector_headers("s", n)
    rows = [[t, *xbar[k], *s[k]] for k, t in enumerate(grid)]
    return emit_csv(header, rows, out / "meanfield_path.csv")


def _run_solve(p: ProblemData, sc: Scenario, opts: RunOptions) -> dict:
    out = opts.out_dir
    manifest: dict = {"artifacts": []}
    if sc.horizon_kind == "finite":
        path_obj = riccati.solve_dre(p, sc.T, opts.steps)
        manifest["artifacts"].append(str(_riccati_csv(path_obj, p.n, out)))
        summary: dict = {
            "horizon": {"kind": "finite", "T": sc.T, "steps": opts.steps},
            "blowup_time": path_obj.blowup_time,
        }
        if path_obj.complete:
            summary["pi_defect"] = path_obj.pi_defect()
            mf = meanfield.solve_mean_field_path(p, path_obj.Pi, path_obj.s,
                                                 sc.T, opts.steps)
            manifest["artifacts"].append(
                str(_meanfield_csv(mf.grid, mf.xbar, mf.s, out)))
            N = opts.N if opts.N is not None else 1
            breakdown = cost.analytic_social_cost(p, path_obj, N)
            manifest["artifacts"].append(str(emit_csv(
                ["N", "initial_term", "q_term", "epsilon_term", "total"],
                [[breakdown.N, breakdown.initial_term, breakdown.q_term,
                  breakdown.epsilon_term, breakdown.total]],
                out / "cost_breakdown.csv")))
            summary["q_T"] = breakdown.q_term
            summary["analytic_social_cost"] = breakdown.total
            summary["cost_N"] = N
            summary["rho_integrable"] = mf.rho_integrable
            if opts.render_figures:
                figures.riccati_paths(path_obj.grid, path_obj.P, path_obj.K,
                                      path_obj.Pi, out / "riccati_paths.png")
                figures.mean_field(mf.grid, mf.xbar, mf.s,
                                   out / "meanfield.png")
                manifest["artifacts"] += [str(out / "riccati_paths.png"),
                                          str(out / "meanfield.png")]
        manifest["artifacts"].append(
            str(_write_json(summary, out / "solve_summary.json")))
        if not opts.quiet:
            if path_obj.complete:
                print(f"solve: finite horizon T={sc.T}, q_T={summary['q_T']:.6g}")
            else:
                print(f"solve: finite escape at t={path_obj.blowup_time:.6g} "
                      "(partial path written)")
        return manifest

    # Infinite horizon.
    dw = derived_weights(p)
    P_sol, p_fb = _solve_are_reporting(p.A, p.S, p.Q, p.rho, p.n)
    Pi_sol, pi_fb = _solve_are_reporting(p.A + p.G, p.S, dw.Q_bar, p.rho, p.n)
    offset = meanfield.solve_offset_infinite(p, Pi_sol)
    mf = meanfield.solve_mean_field_path(p, Pi_sol.X, offset, sc.T, opts.steps)

    rows = []
    for name, sol in (("P", P_sol), ("Pi", Pi_sol)):
        for i in range(p.n):
            for j in range(p.n):
                rows.append([name, i + 1, j + 1, sol.X[i, j]])
    manifest["artifacts"].append(str(emit_csv(
        ["matrix", "row", "col", "value"], rows, out / "are_solutions.csv")))
    manifest["artifacts"].append(
        str(_meanfield_csv(mf.grid, mf.xbar, mf.s, out)))

    q_inf = cost.q_infinite(p, P_sol, Pi_sol, offset)
    optimum = cost.asymptotic_average_optimum(p, P_sol, Pi_sol, offset)
    manifest["artifacts"].append(str(emit_csv(
        ["q_infinity", "asymptotic_average_optimum", "initial_term",
         "negdef_hypothesis", "rho_integrable"],
        [[q_inf, optimum.value, optimum.initial_term,
          optimum.negdef_hypothesis, mf.rho_integrable]],
        out / "cost_summary.csv")))

    summary = {
        "horizon": {"kind": "infinite", "truncation_T": sc.T,
                    "steps": opts.steps},
        "P": P_sol.X, "Pi": Pi_sol.X,
        "P_residual": P_sol.residual, "Pi_residual": Pi_sol.residual,
        "P_rho_stabilizing": P_sol.is_rho_stabilizing,
        "Pi_rho_stabilizing": Pi_sol.is_rho_stabilizing,
        "P_scalar_fallback": p_fb, "Pi_scalar_fallback": pi_fb,
        "s0": offset.s0,
        "offset_stationary": offset.stationary,
        "offset_marginal": offset.marginal,
        "offset_quadrature_truncated": offset.quadrature_truncated,
        "xbar_limit": mf.xbar_limit,
        "rho_integrable": mf.rho_integrable,
        "q_infinity": q_inf,
        "asymptotic_average_optimum": optimum.value,
        "negdef_hypothesis": optimum.negdef_hypothesis,
    }
    manifest["artifacts"].append(
        str(_write_json(summary, out / "solve_summary.json")))
    if opts.render_figures:
        figures.mean_field(mf.grid, mf.xbar, mf.s, out / "meanfield.png")
        manifest["artifacts"].append(str(out / "meanfield.png"))
    if not opts.quiet:
        print(f"solve: infinite horizon, q_inf={q_inf:.6g}, "
              f"rho_integrable={mf.rho_integrable}")
    manifest["summary"] = summary
    return manifest


def _run_diagnose(p: ProblemData, sc: Scenario, opts: RunOptions) -> dict:
    report = diagnostics.stabilization_report(p)
    M1, M2 = diagnostics.hamiltonian_matrices(p)
    doc = report.to_dict()
    doc["M1"] = M1
    doc["M2"] = M2
    out_path = _write_json(doc, opts.out_dir / "stabilization_report.json")
    if not opts.quiet:
        print(f"diagnose: case={report.case_tag} verdict={report.verdict} "
              f"shift={report.abar_plus_G_abscissa}")
    return {"artifacts": [str(out_path)], "report": doc}


def _build_law(p: ProblemData, sc: Scenario, opts: RunOptions):
    """Decentralized law and mean-field path for the scenario's horizon."""
    if sc.horizon_kind == "finite":
        path_obj = riccati.solve_dre(p, sc.T, opts.steps)
        riccati.require_complete(path_obj)
        mf = meanfield.solve_mean_field_path(p, path_obj.Pi, path_obj.s,
                                             sc.T, opts.steps)
        law = control.decentralized_law_finite(path_obj, mf, p)
        return law, mf, {"path": path_obj}
    dw = derived_weights(p)
    P_sol, _ = _solve_are_reporting(p.A, p.S, p.Q, p.rho, p.n)
    Pi_sol, _ = _solve_are_reporting(p.A + p.G, p.S, dw.Q_bar, p.rho, p.n)
    offset = meanfield.solve_offset_infinite(p, Pi_sol)
    mf = meanfield.solve_mean_field_path(p, Pi_sol.X, offset, sc.T, opts.steps)
    law = control.decentralized_law_infinite(P_sol, Pi_sol, mf, p)
    return law, mf, {"P": P_sol, "Pi": Pi_sol, "offset": offset}


def _require_N(opts: RunOptions) -> int:
    if opts.N is None:
        raise MissingField("simulate needs simulation.N (or --agents)")
    return opts.N


def _run_simulate(p: ProblemData, sc: Scenario, opts: RunOptions) -> dict:
    out = opts.out_dir
    N = _require_N(opts)
    law, mf, _ = _build_law(p, sc, opts)
    cfg = simulator.SimulationConfig(N=N, T=sc.T, M=opts.steps,
                                     replications=sc.replications,
                                     seed=opts.seed, threads=opts.threads)
    res = simulator.simulate(p, law, cfg)

    n = p.n
    header = (["t"] + _vector_headers("xbar", n)
              + _vector_headers("xN_mean", n))
    rows = [[t, *mf.xbar[k], *res.per_time_xN_mean[k]]
            for k, t in enumerate(res.grid)]
    ts_path = emit_csv(header, rows, out / "timeseries.csv")

    sum_path = emit_csv(
        ["N", "j_soc_mean", "j_soc_se", "consistency_sup", "consistency_int",
         "epsilon_hat", "tail_flag"],
        [[N, res.j_soc_mean, res.j_soc_se, res.consistency_sup,
          res.consistency_int, res.epsilon_hat, res.tail_flag]],
        out / "summary.csv")

    manifest = {"artifacts": [str(ts_path), str(sum_path)],
                "result": {"j_soc_mean": res.j_soc_mean,
                           "j_soc_se": res.j_soc_se,
                           "consistency_sup": res.consistency_sup,
                           "consistency_int": res.consistency_int,
                           "epsilon_hat": res.epsilon_hat,
                           "tail_flag": res.tail_flag}}
    if opts.render_figures:
        figures.tracking(res.grid, mf.xbar, res.per_time_xN_mean,
                         out / "tracking.png")
        manifest["artifacts"].append(str(out / "tracking.png"))
        # One replication rerun on the same streams for agent fan charts.
        cfg1 = simulator.SimulationConfig(N=N, T=sc.T, M=opts.steps,
                                          replications=1, seed=opts.seed)
        res1 = simulator.simulate(p, law, cfg1, keep_paths=True)
        for comp in range(n):
            fp = out / f"agents_state{comp + 1}.png"
            figures.agent_states(res1.grid, res1.paths.states[0], comp, fp)
            manifest["artifacts"].append(str(fp))
    if not opts.quiet:
        print(f"simulate: N={N} J_soc={res.j_soc_mean:.6g} "
              f"(se {res.j_soc_se:.3g}) eps={res.epsilon_hat}")
    return manifest


def _run_sweep(p: ProblemData, sc: Scenario, opts: RunOptions) -> dict:
    out = opts.out_dir
    if not sc.sweep:
        raise MissingField("sweep needs a 'sweep' list in the scenario")
    law, mf, _ = _build_law(p, sc, opts)
    rows = []
    results = {}
    for N in sc.sweep:
        cfg = simulator.SimulationConfig(N=N, T=sc.T, M=opts.steps,
                                         replications=sc.replications,
                                         seed=opts.seed, threads=opts.threads)
        res = simulator.simulate(p, law, cfg)
        rows.append([N, res.j_soc_mean, res.j_soc_se, res.consistency_int,
                     res.epsilon_hat])
        results[N] = res
        if not opts.quiet:
            print(f"sweep: N={N} consistency_int={res.consistency_int:.6g} "
                  f"eps={res.epsilon_hat:.6g}")
    sum_path = emit_csv(
        ["N", "j_soc_mean", "j_soc_se", "consistency_int", "epsilon_hat"],
        rows, out / "sweep_summary.csv")
    manifest = {"artifacts": [str(sum_path)],
                "rows": rows}
    if opts.render_figures:
        Ns = [row[0] for row in rows]
        eps = [row[4] for row in rows]
        cons = [row[3] for row in rows]
        figures.sweep_curves(Ns, eps, cons, out / "epsilon_vs_N.png",
                             out / "consistency_vs_N.png")
        manifest["artifacts"] += [str(out / "epsilon_vs_N.png"),
                                  str(out / "consistency_vs_N.png")]
    return manifest


def _run_compare(p: ProblemData, sc: Scenario, opts: RunOptions) -> dict:
    out = opts.out_dir
    dw = derived_weights(p)
    P_sol = riccati.solve_are(p.A, p.S, p.Q, p.rho)
    Pi_sol = riccati.solve_are(p.A + p.G, p.S, dw.Q_bar, p.rho)
    offset = meanfield.solve_offset_infinite(p, Pi_sol)
    mf = meanfield.solve_mean_field_path(p, Pi_sol.X, offset, sc.T, opts.steps)
    law_new = control.decentralized_law_infinite(P_sol, Pi_sol, mf, p)
    legacy = control.legacy_law(P_sol, p, sc.T, opts.steps)

    N = opts.N if opts.N is not None else 10
    cfg = simulator.SimulationConfig(N=N, T=sc.T, M=opts.steps,
                                     replications=min(sc.replications, 8),
                                     seed=opts.seed, threads=opts.threads)
    report = control.representation_check(law_new, legacy.law, p, cfg)

    kbar_gap = float(np.max(np.abs(legacy.K_bar.X - (Pi_sol.X - P_sol.X))))
    doc = report.to_dict()
    doc["kbar_vs_pi_minus_p"] = kbar_gap
    doc["phi0_vs_s0"] = float(np.max(np.abs(legacy.phi0 - offset.s0)))
    out_path = _write_json(doc, out / "representation_report.json")
    manifest = {"artifacts": [str(out_path)], "report": doc}
    if opts.render_figures and report.dev_over_time is not None:
        figures.deviation(mf.grid, report.dev_over_time, out / "deviation.png")
        manifest["artifacts"].append(str(out / "deviation.png"))
    if not opts.quiet:
        print(f"compare: passed={report.passed} "
              f"max_dev={report.max_state_deviation:.3e} "
              f"kbar_gap={kbar_gap:.3e}")
    return manifest


def _parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="mflq",
        description="Mean-field LQ social control toolkit")
    sub = top.add_subparsers(dest="command", required=True)
    for name, doc in (("solve", "Riccati paths / ARE solutions and mean field"),
                      ("diagnose", "stabilization certificates and verdict"),
                      ("simulate", "N-agent Monte Carlo run"),
                      ("sweep", "per-N summary over the sweep list"),
                      ("compare", "representation check against legacy law")):
        sp = sub.add_parser(name, help=doc)
        sp.add_argument("--config", required=True, help="scenario JSON path")
        sp.add_argument("--seed", type=int, default=None,
                        help="override the scenario seed")
        sp.add_argument("--agents", type=int, default=None,
                        help="override simulation.N")
        sp.add_argument("--steps", type=int, default=None,
                        help="override grid_steps")
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--format", choices=["csv"], default="csv")
        sp.add_argument("--threads", type=int, default=1,
                        help="worker threads for replication blocks")
        sp.add_argument("--quiet", action="store_true")
        sp.add_argument("--no-figures", action="store_true",
                        help="skip matplotlib renderings")
    return top


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise IoError(f"cannot read scenario {args.config}: {exc}") from exc
        sc = parse_scenario(text)
        out_dir = args.out or os.environ.get(_ENV_OUT) or sc.out_dir or "mflq_out"
        opts = RunOptions(
            seed=args.seed if args.seed is not None else sc.seed,
            N=args.agents if args.agents is not None else sc.N,
            steps=args.steps if args.steps is not None else sc.grid_steps,
            out_dir=Path(out_dir),
            quiet=args.quiet,
            threads=max(1, args.threads),
            render_figures=not args.no_figures,
        )
        run(args.command, sc, opts)
        return 0
    except Exception as exc:     # noqa: BLE001 - single structured record
        record = {"error": {"type": type(exc).__name__, "message": str(exc)}}
        print(json.dumps(record, sort_keys=True), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
