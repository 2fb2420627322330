"""Command-line experiments: ``solve``, ``interpolate``, ``gamma``, ``particles``, ``selftest``.

Exit codes: 0 success, 1 acceptance failures (``selftest`` only),
2 input or precondition error, 3 solver failure, 4 statistical degeneracy.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .entropy import PreconditionError, relative_entropy
from .interpolation import (
    ConsistencyError,
    action_value,
    build_path,
    current_equation_residual,
    entropy_convexity_check,
    hjb_residual,
)
from .io import (
    InputError,
    atomic_write,
    csv_text,
    parse_marginal,
    read_graph,
    read_json,
    read_marginal,
    sha256_file,
    svg_line_chart,
    write_json,
)
from .particles import NoAcceptanceError, SimulationConfig, condition_and_compare
from .schrodinger_system import BridgePotentials, ConvergenceError, solve, verify_schrodinger_system
from .transport import entropic_midpoint_vs_displacement, gamma_sweep_gaussian, gamma_sweep_graph

EXIT_OK, EXIT_FAILED, EXIT_INPUT, EXIT_SOLVER, EXIT_STAT = 0, 1, 2, 3, 4


class CommandError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _manifest(out_dir: Path, command: str, params: dict, inputs: dict, outputs: list[str],
              seed=None, started: float | None = None) -> None:
    """Write ``manifest.json``; wall time lives only here, never in the outputs."""
    write_json(out_dir / "manifest.json", {
        "command": command,
        "parameters": params,
        "inputs": {k: {"path": str(v), "sha256": sha256_file(v)} for k, v in inputs.items()},
        "outputs": {name: sha256_file(out_dir / name) for name in outputs},
        "seed": seed,
        "tool_version": __version__,
        "wall_time_seconds": None if started is None else time.perf_counter() - started,
    })


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise InputError(f"cannot parse number list {text!r}") from None


# solve


def cmd_solve(args) -> int:
    started = time.perf_counter()
    chain = read_graph(args.graph)
    mu0 = read_marginal(args.mu0, chain.n)
    mu1 = read_marginal(args.mu1, chain.n)
    m = chain.m.weights
    for name, mu in (("mu0", mu0), ("mu1", mu1)):
        bad = np.flatnonzero((mu > 0) & (m <= 0))
        if bad.size:
            raise PreconditionError(f"{name} not absolutely continuous w.r.t. m at state {bad[0]}")
    try:
        sol = solve(chain, mu0, mu1, tol=args.tol, max_iter=args.max_iter)
    except ConvergenceError as exc:
        raise CommandError(str(exc), EXIT_SOLVER) from exc
    check = verify_schrodinger_system(sol, chain, mu0, mu1)
    out = Path(args.out_dir)
    record = {
        "primal_value": sol.primal_value,
        "dual_value": sol.dual_value,
        "iterations": sol.iterations,
        "residual": sol.potentials.residual,
        "f0": sol.potentials.f0,
        "g1": sol.potentials.g1,
        "log_f0": sol.potentials.log_f0,
        "log_g1": sol.potentials.log_g1,
        "normalization": sol.potentials.normalization,
        "coupling": sol.coupling,
        "mu0": mu0,
        "mu1": mu1,
        "graph": {"path": str(Path(args.graph).resolve()), "sha256": sha256_file(args.graph)},
    }
    write_json(out / "solution.json", record)
    write_json(out / "residuals.json", {
        "schrodinger_system": check,
        "duality_gap": sol.duality_gap,
        "residual_history": sol.residual_history,
    })
    _manifest(out, "solve", {"tol": args.tol, "max_iter": args.max_iter},
              {"graph": args.graph, "mu0": args.mu0, "mu1": args.mu1},
              ["solution.json", "residuals.json"], started=started)
    print(f"primal {sol.primal_value!r}  dual {sol.dual_value!r}  sweeps {sol.iterations}  "
          f"system residual {check['residual']:.3e}")
    return EXIT_OK


# interpolate


def cmd_interpolate(args) -> int:
    started = time.perf_counter()
    sol_path = Path(args.solution)
    if sol_path.is_dir():
        sol_path = sol_path / "solution.json"
    rec = read_json(sol_path)
    try:
        graph_file = Path(args.graph or rec["graph"]["path"])
        digest = rec["graph"]["sha256"]
        log_f0 = np.array([float(v) for v in rec["log_f0"]])
        log_g1 = np.array([float(v) for v in rec["log_g1"]])
        primal = float(rec["primal_value"])
        mu0 = np.array(rec["mu0"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{sol_path}: not a solve output ({exc})") from exc
    if not graph_file.exists():
        raise InputError(f"graph file {graph_file} referenced by {sol_path} is missing")
    if sha256_file(graph_file) != digest:
        raise InputError(f"{sol_path} is stale: graph file {graph_file} changed since the solve "
                         "(sha256 mismatch)")
    chain = read_graph(graph_file)
    if log_f0.size != chain.n:
        raise InputError(f"{sol_path}: potentials do not match the graph's {chain.n} states")
    pots = BridgePotentials(log_f0, log_g1, float(rec.get("normalization", 0.0)),
                            float(rec.get("residual", 0.0)))
    try:
        path = build_path(chain, pots, args.grid_size)
    except ConsistencyError as exc:
        raise InputError(f"{sol_path}: {exc}") from exc

    rows = []
    for i, t in enumerate(path.times):
        for x in range(chain.n):
            rows.append((float(t), x, path.mu[i, x], path.f[i, x], path.g[i, x],
                         path.phi[i, x], path.psi[i, x]))
    out = Path(args.out_dir)
    atomic_write(out / "interpolation.csv", csv_text(["t", "state", "mu", "f", "g", "phi", "psi"], rows))

    diag = {
        "grid_size": args.grid_size,
        "hjb_max_residual": hjb_residual(path, chain)["max"],
        "current_eq_residual": current_equation_residual(path, chain)["max"],
        "action": action_value(path, chain),
        "action_target": primal - relative_entropy(mu0, chain.m.weights),
        "entropy_profile": path.entropy_profile(),
    }
    diag["action_gap"] = abs(diag["action"] - diag["action_target"])
    if np.all(path.mu[1:-1] > 0):
        conv = entropy_convexity_check(path, chain)
        diag["convexity_mismatch"] = {
            "max_abs": conv["max_abs_mismatch"],
            "max_relative": conv["max_relative_mismatch"],
            "normalization": 0.5,
            "measured_constant": conv["measured_constant"],
        }
    else:
        diag["convexity_mismatch"] = None
    write_json(out / "diagnostics.json", diag)
    _manifest(out, "interpolate", {"grid_size": args.grid_size},
              {"solution": sol_path, "graph": graph_file},
              ["interpolation.csv", "diagnostics.json"], started=started)
    print(f"HJB {diag['hjb_max_residual']:.3e}  current {diag['current_eq_residual']:.3e}  "
          f"action gap {diag['action_gap']:.3e}")
    return EXIT_OK


# gamma


def _parse_grid(text: str) -> np.ndarray:
    try:
        lo, hi, n = text.split(":")
        x = np.linspace(float(lo), float(hi), int(n))
    except ValueError:
        raise InputError(f"grid must be 'start:stop:points', got {text!r}") from None
    if x.size < 2 or not x[-1] > x[0]:
        raise InputError("grid needs at least 2 increasing points")
    return x


def cmd_gamma(args) -> int:
    started = time.perf_counter()
    ks = _float_list(args.k)
    if (args.graph is None) == (args.grid is None):
        raise InputError("give exactly one of --graph and --grid")
    inputs = {"mu0": args.mu0, "mu1": args.mu1}
    if args.graph is not None:
        chain = read_graph(args.graph)
        inputs["graph"] = args.graph
        n = chain.n
    else:
        x = _parse_grid(args.grid)
        n = x.size
    mu0 = read_marginal(args.mu0, n)
    mu1 = read_marginal(args.mu1, n)
    kw = dict(tol=args.tol, max_iter=args.max_iter, record_failures=True)
    if args.graph is not None:
        rep = gamma_sweep_graph(chain, mu0, mu1, ks, **kw)
        tv = [float("nan")] * len(rep.k_values)
    else:
        rep = gamma_sweep_gaussian(x, np.ones(n), mu0, mu1, ks, **kw)
        tv = entropic_midpoint_vs_displacement(rep, x).tolist()

    out = Path(args.out_dir)
    rows = [(k, v, g, d) for k, v, g, d in zip(rep.k_values, rep.normalized_values, rep.cost_gaps, tv)]
    atomic_write(out / "gamma_sweep.csv",
                 csv_text(["k", "normalized_value", "cost_gap", "tv_midpoint_distance"], rows))
    summary = {
        "case": "graph" if args.graph is not None else "grid",
        "speed": rep.speed,
        "mk_value": rep.mk_value,
        "mk_coupling": rep.mk_coupling,
        "k_values": rep.k_values,
        "normalized_values": rep.normalized_values,
        "cost_gaps": rep.cost_gaps,
        "tv_midpoint_distance": tv,
        "couplings": rep.couplings,
        "iterations": rep.iterations,
        "last_is_closest": rep.last_is_closest() if rep.k_values else None,
        "failures": {repr(k): msg for k, msg in rep.failures.items()},
    }
    write_json(out / "gamma_summary.json", summary)
    outputs = ["gamma_sweep.csv", "gamma_summary.json"]
    if rep.k_values:
        atomic_write(out / "gamma_sweep.svg", svg_line_chart(
            {f"inf(S^k) / {rep.speed}": (np.log10(rep.k_values), rep.normalized_values)},
            "Slowing-down sweep", "log10 k", "normalized value", {f"MK value {rep.mk_value:.6g}": rep.mk_value}))
        outputs.append("gamma_sweep.svg")
    _manifest(out, "gamma", {"k": ks, "grid": args.grid, "tol": args.tol, "max_iter": args.max_iter},
              inputs, outputs, started=started)
    for k, v, g in zip(rep.k_values, rep.normalized_values, rep.cost_gaps):
        print(f"k={k:<10g} normalized {v:.6f}  cost gap {g:.3e}")
    print(f"MK value {float(rep.mk_value)!r}")
    if rep.failures:
        for k, msg in rep.failures.items():
            print(f"k={k:g} failed: {msg}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


# particles


def _config_marginal(value, base: Path, n: int, key: str) -> np.ndarray:
    if isinstance(value, str):
        return read_marginal(base / value, n)
    if isinstance(value, list):
        try:
            return parse_marginal("\n".join(f"{i},{float(w)!r}" for i, w in enumerate(value)), n, key)
        except (TypeError, ValueError):
            raise InputError(f"config field {key!r} must be a list of numbers") from None
    raise InputError(f"config field {key!r} must be a CSV path or a list of weights")


def cmd_particles(args) -> int:
    started = time.perf_counter()
    cfg_path = Path(args.config)
    cfg = read_json(cfg_path)
    if not isinstance(cfg, dict):
        raise InputError(f"{cfg_path}: expected a JSON object")
    base = cfg_path.parent
    known = {"graph", "mu0", "mu1", "n", "epsilon", "seed", "batches", "min_accepted",
             "bootstrap", "mid_time"}
    unknown = sorted(set(cfg) - known)
    if unknown:
        raise InputError(f"{cfg_path}: unknown config fields {unknown}")
    missing = sorted({"graph", "mu0", "mu1", "n", "epsilon", "seed", "batches"} - set(cfg))
    if missing:
        raise InputError(f"{cfg_path}: missing config fields {missing}")
    graph_file = base / cfg["graph"]
    chain = read_graph(graph_file)
    mu0 = _config_marginal(cfg["mu0"], base, chain.n, "mu0")
    mu1 = _config_marginal(cfg["mu1"], base, chain.n, "mu1")
    try:
        n, seed, batches = int(cfg["n"]), int(cfg["seed"]), int(cfg["batches"])
        eps = float(cfg["epsilon"])
        min_acc = None if cfg.get("min_accepted") is None else int(cfg["min_accepted"])
        boot = int(cfg.get("bootstrap", 1000))
        mid_time = float(cfg.get("mid_time", 0.5))
    except (TypeError, ValueError) as exc:
        raise InputError(f"{cfg_path}: bad numeric field ({exc})") from None
    if not 0 <= seed < 2**64:
        raise InputError("seed must be a 64-bit unsigned integer")
    if not 0 < mid_time < 1:
        raise InputError("mid_time must lie in (0, 1)")
    try:
        sol = solve(chain, mu0, mu1, tol=1e-12)
    except ConvergenceError as exc:
        raise CommandError(str(exc), EXIT_SOLVER) from exc
    grid = 1000
    path = build_path(chain, sol.potentials, grid)
    mid = path.mu[int(round(mid_time * grid))]
    config = SimulationConfig.from_profile(chain, n, mu0, mu1, eps, seed, batches,
                                           min_accepted=min_acc, mid_time=mid_time)
    try:
        rep = condition_and_compare(config, sol, mid, bootstrap=boot)
    except NoAcceptanceError as exc:
        raise CommandError(f"{exc}", EXIT_STAT) from exc
    record = rep.to_dict()
    record["config"] = {
        "graph": str(graph_file), "mu0": mu0, "mu1": mu1, "n": n, "epsilon": eps, "seed": seed,
        "batches": batches, "min_accepted": min_acc, "bootstrap": boot, "mid_time": mid_time,
        "initial_positions": config.initial_positions,
    }
    record["primal_value"] = sol.primal_value
    out = Path(args.out_dir)
    write_json(out / "conditional_report.json", record)
    _manifest(out, "particles", record["config"], {"config": cfg_path, "graph": graph_file},
              ["conditional_report.json"], seed=seed, started=started)
    print(f"accepted {rep.accepted}/{rep.batches_run}  TV to mu_t {rep.tv_to_interpolation:.4f}  "
          f"rate {rep.rate_estimate:.5f} (SE {rep.standard_errors['rate']:.1e})  "
          f"reference {rep.reference_value:.5f}")
    return EXIT_OK


# selftest


def cmd_selftest(args) -> int:
    from .acceptance import CRITERIA, run

    selected = None
    if args.criteria:
        selected = [int(v) for v in args.criteria.split(",")]
        bad = [i for i in selected if i not in CRITERIA]
        if bad:
            raise InputError(f"unknown criteria {bad}; choose from 1..{len(CRITERIA)}")
    results = run(selected, stream=sys.stdout)
    passed = sum(c.passed for c in results)
    print(f"{passed}/{len(results)} criteria passed")
    return EXIT_OK if passed == len(results) else EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="schrodinger-lab", description=__doc__.splitlines()[0],
                                allow_abbrev=False)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve the static problem for a graph and two marginals",
                       allow_abbrev=False)
    s.add_argument("--graph", required=True)
    s.add_argument("--mu0", required=True)
    s.add_argument("--mu1", required=True)
    s.add_argument("--tol", type=float, default=1e-10)
    s.add_argument("--max-iter", type=int, default=100_000)
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("interpolate", help="time marginals and diagnostics of a solved bridge",
                       allow_abbrev=False)
    s.add_argument("--solution", required=True, help="solve output directory or solution.json")
    s.add_argument("--graph", help="graph file (default: the path recorded by solve)")
    s.add_argument("--grid-size", type=int, default=1000)
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_interpolate)

    s = sub.add_parser("gamma", help="slowing-down sweep against optimal transport",
                       allow_abbrev=False)
    s.add_argument("--graph", help="graph file (graph-distance cost, speed log k)")
    s.add_argument("--grid", help="start:stop:points (quadratic cost, speed k)")
    s.add_argument("--mu0", required=True)
    s.add_argument("--mu1", required=True)
    s.add_argument("--k", default="10,100,1000,10000,100000,1000000",
                   help="comma-separated increasing slow-down factors")
    s.add_argument("--tol", type=float, default=1e-10)
    s.add_argument("--max-iter", type=int, default=100_000)
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_gamma)

    s = sub.add_parser("particles", help="conditioned particle experiment from a JSON config",
                       allow_abbrev=False)
    s.add_argument("--config", required=True)
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_particles)

    s = sub.add_parser("selftest", help="run the acceptance suite", allow_abbrev=False)
    s.add_argument("--criteria", help="comma-separated criterion numbers (default all)")
    s.set_defaults(func=cmd_selftest)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CommandError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (PreconditionError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
