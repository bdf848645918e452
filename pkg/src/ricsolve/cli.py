"""Command-line front end: ``ricsolve {solve,bench-table1,bench-toeplitz,bench-grcar,certify}``.

Exit codes: 0 success, 1 error, 2 non-convergence (max-dim stop or failed checks).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import bench, dense_core
from .errors import RicsolveError
from .problem_io import GENERATORS, load_instance
from .rksm import SolverOptions, solve

logger = logging.getLogger("ricsolve")

EXIT_OK, EXIT_ERROR, EXIT_NOT_CONVERGED = 0, 1, 2

_DEFAULT_PARAMS = {
    "laplacian": {"n0": 30, "t": 1e3},
    "toeplitz": {"n": 700, "t": 5e-1},
    "grcar": {"n": 400, "p_b": 20, "seed": 0},
    "random": {"n": 40, "q": 2, "p": 2, "seed": 0},
}


@dataclass
class RunConfig:
    """Everything one invocation needs; round-trips through JSON."""

    problem: str = "laplacian"
    params: dict = field(default_factory=dict)
    a_path: str | None = None
    b_path: str | None = None
    c_path: str | None = None
    solver: dict = field(default_factory=dict)
    oracle: bool = True
    figures: bool = True
    timings: bool = False
    out: str = "ricsolve_out"
    seed: int | None = None

    def __post_init__(self):
        if self.problem not in (*GENERATORS, "file"):
            raise ValueError(f"unknown problem {self.problem!r}; choose from "
                             f"{sorted(GENERATORS) + ['file']}")
        SolverOptions.from_dict(self.solver)  # validates keys and values

    def to_json(self):
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config key(s): {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def solver_options(self):
        return SolverOptions.from_dict(self.solver)

    def instance(self):
        if self.problem == "file":
            if not (self.a_path and self.b_path and self.c_path):
                raise ValueError("problem 'file' needs --A, --B and --C paths")
            return load_instance(self.a_path, self.b_path, self.c_path)
        params = {**_DEFAULT_PARAMS[self.problem], **self.params}
        if self.seed is not None and "seed" in params:
            params["seed"] = self.seed
        return GENERATORS[self.problem](**params)


def _parse_shift_mode(text):
    if text.startswith("fixed:"):
        shifts = [complex(s.replace(" ", "")) for s in text[6:].split(",") if s.strip()]
        return "fixed", [[s.real, s.imag] for s in shifts]
    mode = text.replace("-", "_")
    if mode not in ("t", "closed_loop"):
        raise argparse.ArgumentTypeError(f"bad shift mode {text!r}")
    return mode, None


def _on_off(text):
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected 'on' or 'off'")
    return text == "on"


def build_parser():
    parser = argparse.ArgumentParser(prog="ricsolve",
                                     description="Low-rank rational Krylov Riccati solver.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON RunConfig; command-line flags override it")
        p.add_argument("--problem", choices=[*GENERATORS, "file"])
        p.add_argument("--n0", type=int)
        p.add_argument("--n", type=int)
        p.add_argument("--t", type=float)
        p.add_argument("--q", type=int)
        p.add_argument("--p", type=int)
        p.add_argument("--A", dest="a_path")
        p.add_argument("--B", dest="b_path")
        p.add_argument("--C", dest="c_path")
        p.add_argument("--shift-mode", type=_parse_shift_mode)
        p.add_argument("--tol", type=float)
        p.add_argument("--tol-mode", choices=["abs", "rel"])
        p.add_argument("--max-dim", type=int)
        p.add_argument("--history-union", action="store_true", default=None)
        p.add_argument("--stride", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--out")
        p.add_argument("--dense-cap", type=int)
        p.add_argument("--oracle", type=_on_off)
        p.add_argument("--no-figures", dest="figures", action="store_false", default=None)
        p.add_argument("--timings", action="store_true", default=None,
                       help="record wall-clock times in CSV (breaks byte-identical output)")

    for name, help_ in (("solve", "solve one instance"),
                        ("bench-table1", "Laplacian sweep over t and both shift modes"),
                        ("bench-toeplitz", "Toeplitz sweep over t and both shift modes"),
                        ("bench-grcar", "Grcar error history and rate estimate"),
                        ("certify", "run every identity and bound check on a small instance")):
        common(sub.add_parser(name, help=help_))
    return parser


def config_from_args(args, default_problem="laplacian"):
    if args.config:
        cfg = RunConfig.from_json(Path(args.config).read_text())
    else:
        cfg = RunConfig(problem=default_problem)
    if args.problem:
        cfg.problem = args.problem
    if args.a_path or args.b_path or args.c_path:
        cfg.problem = "file"
        cfg.a_path, cfg.b_path, cfg.c_path = args.a_path, args.b_path, args.c_path
    params = dict(cfg.params)
    for key in ("n0", "n", "t", "q", "p"):
        val = getattr(args, key)
        if val is not None:
            params[key] = val
    cfg.params = params
    solver = dict(cfg.solver)
    if args.shift_mode is not None:
        solver["shift_mode"], fixed = args.shift_mode
        if fixed is not None:
            solver["fixed_shifts"] = fixed
    for flag, key in (("tol", "tol"), ("tol_mode", "tol_mode"), ("max_dim", "max_dim"),
                      ("history_union", "history_union"), ("stride", "stride"),
                      ("dense_cap", "dense_cap")):
        val = getattr(args, flag)
        if val is not None:
            solver[key] = val
    cfg.solver = solver
    for key in ("seed", "out", "oracle", "figures", "timings"):
        val = getattr(args, key)
        if val is not None:
            setattr(cfg, key, val)
    cfg.__post_init__()
    return cfg


def _outdir(cfg):
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _print_checks(result):
    for line in result.summary_lines():
        print(line)


# --------------------------------------------------------------------------
# commands


def cmd_solve(cfg: RunConfig) -> int:
    inst = cfg.instance()
    opts = cfg.solver_options()
    sol, rec = solve(inst, opts)
    out = _outdir(cfg)
    np.save(out / "V.npy", sol.V)
    np.save(out / "Y.npy", sol.Y)
    rec.to_csv(out / "convergence.csv", timings=cfg.timings)
    meta = rec.to_json_dict(timings=cfg.timings)
    meta["config"] = json.loads(cfg.to_json())
    if cfg.oracle and inst.n <= opts.dense_cap:
        A, B, C = inst.dense()
        X = dense_core.solve_riccati_dense(A, B, C, dense_cap=opts.dense_cap)
        meta["oracle"] = {"x_norm": float(np.linalg.norm(X)),
                          "err_norm": float(np.linalg.norm(X - sol.dense()))}
    (out / "run.json").write_text(json.dumps(meta, indent=2))
    if cfg.figures:
        from . import plotting
        plotting.plot_convergence({f"{inst.label}_{opts.shift_mode}": rec},
                                  out / "convergence.png", title=inst.label)
    status = "converged" if rec.converged else "stopped at max_dim"
    print(f"{inst.label}: {status} after {rec.iterations} iterations, dim {rec.final_dim}, "
          f"||R||_F = {rec.final_residual:.3e}")
    return EXIT_OK if rec.converged else EXIT_NOT_CONVERGED


def _write_runs(result, out, timings):
    for label, rec in result.runs.items():
        rec.to_csv(out / f"convergence_{label}.csv", timings=timings)


def cmd_bench_table1(cfg: RunConfig) -> int:
    opts = cfg.solver
    res = bench.run_table1(n0=cfg.params.get("n0", 30), tol=opts.get("tol", bench.TABLE1_RES_TOL),
                           oracle=cfg.oracle, max_dim=opts.get("max_dim", 200))
    out = _outdir(cfg)
    res.write_csv(out / "table1.csv")
    _write_runs(res, out, cfg.timings)
    res.write_summary(out / "table1_summary.json")
    if cfg.figures:
        from . import plotting
        plotting.plot_convergence(res.runs, out / "table1_convergence.png",
                                  title="Laplacian, residual vs dimension")
    _print_checks(res)
    return EXIT_OK if res.passed else EXIT_NOT_CONVERGED


def cmd_bench_toeplitz(cfg: RunConfig) -> int:
    opts = cfg.solver
    res = bench.run_toeplitz(n=cfg.params.get("n", 700), tol=opts.get("tol", 1e-9),
                             tol_mode=opts.get("tol_mode", "abs"), max_dim=opts.get("max_dim", 200))
    out = _outdir(cfg)
    res.write_csv(out / "toeplitz.csv")
    _write_runs(res, out, cfg.timings)
    res.write_summary(out / "toeplitz_summary.json")
    hull_rows = ["run,k,vertex,re,im"]
    for label, rec in res.runs.items():
        for row in rec.rows:
            if row.region:
                for j, (re, im) in enumerate(row.region["vertices"]):
                    hull_rows.append(f"{label},{row.k},{j},{re!r},{im!r}")
    (out / "toeplitz_hulls.csv").write_text("\n".join(hull_rows) + "\n")
    if cfg.figures:
        from . import plotting
        plotting.plot_convergence(res.runs, out / "toeplitz_convergence.png",
                                  title="Toeplitz, residual vs iteration", xaxis="k")
        tmax = max(bench.TOEPLITZ_T)
        plotting.plot_hull(res.runs[f"t{tmax:g}_closed_loop"], out / "toeplitz_hull.png",
                           title=f"projected spectra, t = {tmax:g}")
    _print_checks(res)
    return EXIT_OK if res.passed else EXIT_NOT_CONVERGED


def cmd_bench_grcar(cfg: RunConfig) -> int:
    params = {**_DEFAULT_PARAMS["grcar"], **cfg.params}
    seed = cfg.seed if cfg.seed is not None else params["seed"]
    res = bench.run_grcar(n=params["n"], p_b=params["p_b"], seed=seed,
                          dense_cap=cfg.solver.get("dense_cap", dense_core.DENSE_CAP))
    out = _outdir(cfg)
    res.write_csv(out / "grcar.csv")
    res.write_summary(out / "grcar_summary.json", exclude=("fov", "eig_A", "eig_closed"))
    if cfg.figures:
        from . import plotting
        plotting.plot_grcar(res, out / "grcar.png")
    ex = res.extra
    _print_checks(res)
    print(f"fitted rate {ex['fitted_rate']:.4f}; gamma at measured disk "
          f"(c/r = {ex['normalized_center']:.4f}) = {ex['gamma_measured_disk']:.4f}")
    return EXIT_OK if res.passed else EXIT_NOT_CONVERGED


def cmd_certify(cfg: RunConfig) -> int:
    from . import certify, diagnostics

    inst = cfg.instance()
    res = certify.run_certify(inst, cfg.solver_options())
    out = _outdir(cfg)
    diagnostics.reports_to_csv(res.reports, out / "certify_reports.csv")
    (out / "certify.json").write_text(json.dumps(res.to_dict(), indent=2))
    print(f"{inst.label}: {len(res.identities)} identity checks "
          f"({len(res.identity_failures)} failed), {len(res.reports)} bound reports "
          f"({len(res.violations)} violated, {len(res.not_applicable)} not applicable), "
          f"oracle rel. error {res.oracle_rel_error:.2e}")
    for c in res.identity_failures:
        print(f"  identity {c.name} at k={c.k}: {c.value:.3e} > {c.tol:.0e}")
    for r in res.violations:
        print(f"  bound {r.name}: {r.left_value:.3e} > {r.right_value:.3e} ({r.notes})")
    return EXIT_OK if res.passed else EXIT_ERROR


COMMANDS = {
    "solve": (cmd_solve, "laplacian"),
    "bench-table1": (cmd_bench_table1, "laplacian"),
    "bench-toeplitz": (cmd_bench_toeplitz, "toeplitz"),
    "bench-grcar": (cmd_bench_grcar, "grcar"),
    "certify": (cmd_certify, "random"),
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    fn, default_problem = COMMANDS[args.command]
    try:
        cfg = config_from_args(args, default_problem)
        return fn(cfg)
    except (OSError, ValueError, RicsolveError) as exc:
        print(f"ricsolve {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
