"""Command-line front end: ``qcrb bound``, ``qcrb verify`` and ``qcrb experiment``.

Exit codes: 0 success, 1 usage error or failed verification, 2 solver
failure, 3 invalid model or unsupported input.

Option precedence is command line > ``QCRB_SEED``/``QCRB_JOBS`` > ``--config``
file > built-in defaults.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__, bounds, experiments, gellmann, povm, sdp
from .errors import InvalidModelError, QcrbError, SolverError, UnsupportedDimensionError
from .model import (
    StatModel,
    depolarized_plus_model,
    gmm_model,
    gmm_subset_model,
    load_model,
    qubit_model,
    rank_deficient_min_model,
)

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_SOLVER = 2
EXIT_INVALID = 3

MODEL_KINDS = ("gmm", "gmm-subset", "qubit", "rho-max", "rho-min")
SUITES = ("gmm-identities", "mm-certificates", "sic", "xsol")
EXPERIMENTS = ("purity-sweep", "table1", "grid", "weighted", "gm-vs-nh")


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_FAIL, f"{self.prog}: error: {message}\n")


def fmt(x: float) -> str:
    """Six significant digits for human output."""
    return f"{x:#.6g}"


def parse_range(text: str) -> list[int]:
    """``"3"``, ``"2,4"`` or ``"2..8"`` (inclusive)."""
    out: list[int] = []
    for part in str(text).split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..", 1)
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError(f"empty range {text!r}")
    return out


def _floats(text: str) -> list[float]:
    return [float(x) for x in str(text).split(",") if x.strip()]


def _ints(text: str) -> list[int]:
    return [int(x) for x in str(text).split(",") if x.strip()]


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("solver")
    g.add_argument("--gap-tol", type=float, default=None, help="relative duality gap target")
    g.add_argument("--feas-tol", type=float, default=None, help="relative feasibility target")
    g.add_argument("--max-iter", type=int, default=None, help="interior-point iteration cap")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--json", action="store_true", help="machine-readable output on stdout")
    p.add_argument("--config", type=Path, default=None, help="JSON file whose keys mirror the long flags")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qcrb", description="Multiparameter quantum Cramer-Rao bounds.")
    parser.add_argument("--version", action="version", version=f"qcrb {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    b = sub.add_parser("bound", help="compute all bounds for one model")
    src = b.add_mutually_exclusive_group()
    src.add_argument("--model", choices=MODEL_KINDS, default=None, help="named model constructor")
    src.add_argument("--model-file", type=Path, default=None, help="model JSON file")
    b.add_argument("--d", type=int, default=None, help="qudit dimension")
    b.add_argument("--theta", type=str, default=None, help="comma-separated GMM coefficients; a single 0 means all zero")
    b.add_argument("--k", type=str, default=None, help="1-based GMM indices for gmm-subset, e.g. 1,2")
    b.add_argument("--p", type=float, default=None, help="mixing weight for rho-max / rho-min")
    b.add_argument("--r", type=float, default=None, help="Bloch radius for the qubit model")
    b.add_argument("--branch", type=int, default=None, help="rho-min branch (2..d)")
    b.add_argument("--eps", type=float, default=None, help="regularization weight toward 1/d")
    b.add_argument("--output", type=Path, default=None, help="write the JSON report here")
    _add_solver_flags(b)
    _add_common(b)

    v = sub.add_parser("verify", help="run a verification suite")
    v.add_argument("--suite", choices=SUITES, default=None, required=False)
    v.add_argument("--d", type=str, default=None, help="dimension or range such as 2..8")
    v.add_argument("--output", type=Path, default=None)
    _add_common(v)

    e = sub.add_parser("experiment", help="run a sampling experiment")
    e.add_argument("name", choices=EXPERIMENTS)
    e.add_argument("--d", type=str, default=None, help="dimension or range")
    e.add_argument("--n", type=str, default=None, help="parameter count or range (grid)")
    e.add_argument("--samples", type=int, default=None)
    e.add_argument("--seed", type=int, default=None)
    e.add_argument("--jobs", type=int, default=None)
    e.add_argument("--sampler", choices=experiments.SAMPLERS, default=None, help="state sampler (grid)")
    e.add_argument("--deriv-mode", choices=experiments.DERIV_MODES, default=None, help="derivative sampler (grid)")
    e.add_argument("--no-forced", action="store_true", help="grid: skip the maximally mixed subset models")
    e.add_argument("--no-extremal", action="store_true", help="purity sweep: skip the extremal curves")
    e.add_argument("--subset-n", type=int, default=None, help="gm-vs-nh: estimate random n-subsets")
    e.add_argument("--output", type=Path, default=None, help="CSV path; a manifest is written next to it")
    e.add_argument("--resume", action="store_true", help="reuse matching records from an existing --output CSV")
    _add_solver_flags(e)
    _add_common(e)
    return parser


# ---------------------------------------------------------------------------
# option resolution


def _resolve(args: argparse.Namespace, defaults: dict[str, Any]) -> argparse.Namespace:
    """Fill unset options from the config file, the environment and ``defaults``."""
    config: dict[str, Any] = {}
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            config = {k.replace("-", "_"): v for k, v in json.load(fh).items()}
    env = {}
    if os.environ.get("QCRB_SEED"):
        env["seed"] = int(os.environ["QCRB_SEED"])
    if os.environ.get("QCRB_JOBS"):
        env["jobs"] = int(os.environ["QCRB_JOBS"])
    for key in set(defaults) | set(config) | set(env):
        if getattr(args, key, None) in (None, False):
            for layer in (env, config, defaults):
                if key in layer:
                    val = layer[key]
                    if isinstance(val, str) and key in ("model_file", "output"):
                        val = Path(val)
                    setattr(args, key, val)
                    break
    return args


def _solver_options(args: argparse.Namespace) -> sdp.SdpOptions:
    kw = {}
    for name in ("gap_tol", "feas_tol", "max_iter"):
        val = getattr(args, name, None)
        if val is not None:
            kw[name] = val
    return sdp.SdpOptions(**kw)


def _emit(args: argparse.Namespace, payload: dict[str, Any], lines: Sequence[str]) -> None:
    if args.json:
        print(json.dumps(payload, indent=1, sort_keys=True, default=_default))
    else:
        print("\n".join(lines))


def _default(o: Any) -> Any:
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    if hasattr(o, "__dataclass_fields__"):
        return asdict(o)
    raise TypeError(f"not serializable: {type(o).__name__}")


# ---------------------------------------------------------------------------
# bound


def _theta(text: str | None, size: int) -> np.ndarray | None:
    if text is None:
        return None
    vals = _floats(text)
    if len(vals) == 1 and vals[0] == 0.0:
        return np.zeros(size)
    if len(vals) != size:
        raise InvalidModelError(f"--theta needs {size} values, got {len(vals)}")
    return np.array(vals)


def build_model(args: argparse.Namespace) -> StatModel:
    if args.model_file is not None:
        return load_model(args.model_file)
    kind = args.model or "gmm"
    if kind == "qubit":
        return qubit_model(0.0 if args.r is None else args.r)
    if args.d is None:
        raise InvalidModelError("--d is required for named models")
    d = args.d
    if kind == "gmm":
        return gmm_model(d, _theta(args.theta, d * d - 1))
    if kind == "gmm-subset":
        if not args.k:
            raise InvalidModelError("--k is required for gmm-subset")
        ks = _ints(args.k)
        return gmm_subset_model(d, ks, _theta(args.theta, len(ks)))
    if kind == "rho-max":
        return depolarized_plus_model(d, 0.0 if args.p is None else args.p, eps=args.eps or 0.0)
    if kind == "rho-min":
        branch = args.branch or 2
        p = args.p if args.p is not None else 1.0 / branch
        return rank_deficient_min_model(d, branch, p, eps=args.eps if args.eps is not None else 1e-6)
    raise InvalidModelError(f"unknown model {kind!r}")


def cmd_bound(args: argparse.Namespace) -> int:
    args = _resolve(args, {})
    try:
        model = build_model(args)
    except (InvalidModelError, UnsupportedDimensionError, ValueError) as exc:
        print(f"invalid model: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        reps = bounds.all_bounds(model, _solver_options(args))
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except QcrbError as exc:
        print(f"invalid model: {exc}", file=sys.stderr)
        return EXIT_INVALID
    h, nh = reps["HCRB"].value, reps["NHCRB"].value
    ratios = {
        "NHCRB/HCRB": nh / h,
        "HCRB/SLD": h / reps["SLD"].value,
        "NHCRB/GMCRB": nh / reps["GMCRB"].value,
    }
    payload = {
        "model": {"label": model.label, "d": model.dim, "n": model.n_params, "hash": model.content_hash()},
        "bounds": {k: r.to_dict() for k, r in reps.items()},
        "ratios": ratios,
        "ordering_violation": bounds.ordering_violation(reps),
    }
    if args.output:
        Path(args.output).write_text(json.dumps(payload, indent=1, sort_keys=True, default=_default), encoding="utf-8")
    lines = [f"model {model.label or '(file)'}  d={model.dim} n={model.n_params}"]
    lines += [f"  {k:<12} {fmt(r.value)}" for k, r in reps.items()]
    lines += [f"  ratio {k:<12} {fmt(v)}" for k, v in ratios.items()]
    _emit(args, payload, lines)
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify


def _suite_checks(suite: str, d: int) -> tuple[dict[str, tuple[bool, float]], dict[str, Any]]:
    """``{check: (passed, residual)}`` and extra facts for one dimension."""
    if suite == "gmm-identities":
        basis = gellmann.gmm_basis(d)
        rep = gellmann.verify_identities(basis)
        sc = gellmann.structure_constants(basis)
        r_d, r_f = gellmann.circled_sums(sc, d)
        res = {
            "square_sum": rep.square_sum,
            "sandwich": rep.sandwich,
            "quartic": rep.quartic,
            "circled_d": r_d,
            "circled_f": r_f,
            "product_rule": gellmann.product_rule_residual(basis, sc),
        }
        return {k: (v <= 1e-10, v) for k, v in res.items()}, {}
    if suite == "mm-certificates":
        rep = bounds.verify_mm_certificates(d)
        return {k: (bool(ok), float(r)) for k, (ok, r) in rep.checks.items()}, {"value": str(rep.value), "value_float": float(rep.value)}
    if suite == "sic":
        s = povm.sic_povm(d)
        closure = float(np.max(np.abs(s.elements.sum(axis=0) - np.eye(d))))
        ov = povm.pairwise_overlaps(s)
        checks = {
            "closure": (closure <= povm.CLOSURE_TOL, closure),
            "overlaps": (povm.overlap_deviation(s) <= povm.SIC_OVERLAP_TOL, povm.overlap_deviation(s)),
            "fiducial": (povm.fiducial_residual(s.fiducial) <= povm.FIDUCIAL_TOL, povm.fiducial_residual(s.fiducial)),
        }
        return checks, {"overlap": float(ov.mean()), "target": 1.0 / (d * d * (d + 1))}
    if suite == "xsol":
        m = gmm_model(d)
        rep = bounds.micrb_feasible(m)
        sep = bounds.verify_xsol_separable(d)
        checks = {
            "c1": (rep.residuals["c1"] <= 1e-10, rep.residuals["c1"]),
            "c2": (rep.residuals["c2"] <= 1e-10, rep.residuals["c2"]),
            "psd": (rep.residuals["min_eig"] >= -1e-10, rep.residuals["min_eig"]),
            "separable_reconstruction": (sep.reconstruction_residual <= 1e-8, sep.reconstruction_residual),
        }
        return checks, {"value": rep.value}
    raise ValueError(f"unknown suite {suite!r}")


def cmd_verify(args: argparse.Namespace) -> int:
    args = _resolve(args, {"suite": "gmm-identities", "d": "2..8"})
    try:
        dims = parse_range(args.d)
    except (ValueError, argparse.ArgumentTypeError) as exc:
        print(f"bad --d: {exc}", file=sys.stderr)
        return EXIT_FAIL
    results: dict[str, Any] = {}
    lines = []
    ok_all = True
    for d in dims:
        try:
            checks, facts = _suite_checks(args.suite, d)
        except (UnsupportedDimensionError, InvalidModelError, ValueError) as exc:
            print(f"unsupported input for d={d}: {exc}", file=sys.stderr)
            return EXIT_INVALID
        except SolverError as exc:
            print(f"solver failure for d={d}: {exc}", file=sys.stderr)
            return EXIT_SOLVER
        passed = all(ok for ok, _ in checks.values())
        ok_all &= passed
        results[str(d)] = {"passed": passed, "checks": {k: {"passed": ok, "residual": r} for k, (ok, r) in checks.items()}, **facts}
        lines.append(f"{args.suite} d={d}: {'PASS' if passed else 'FAIL'}" + "".join(f"  {k}={fmt(v) if isinstance(v, float) else v}" for k, v in facts.items()))
        lines += [f"  {'pass' if ok else 'FAIL'}  {k:<26} {r:.3e}" for k, (ok, r) in checks.items()]
    payload = {"suite": args.suite, "passed": ok_all, "dims": results}
    if args.output:
        Path(args.output).write_text(json.dumps(payload, indent=1, sort_keys=True), encoding="utf-8")
    _emit(args, payload, lines)
    return EXIT_OK if ok_all else EXIT_FAIL


# ---------------------------------------------------------------------------
# experiment


_EXPERIMENT_DEFAULTS = {"seed": 0, "jobs": 1, "samples": 100, "d": "3"}


def _run_experiment(args: argparse.Namespace, opts: sdp.SdpOptions) -> experiments.ExperimentResult:
    dims = parse_range(args.d)
    name = args.name
    if name == "purity-sweep":
        resume = []
        if args.resume and args.output and Path(args.output).exists():
            resume = experiments.records_from_csv(args.output)
        return experiments.purity_sweep(
            dims[0], args.samples, args.seed, include_extremal=not args.no_extremal, opts=opts, jobs=args.jobs, resume=resume
        )
    if name == "table1":
        rows = experiments.table1_reproduce(opts, args.jobs)
        res = experiments.ExperimentResult("table1", {"d": 3})
        res.table = rows
        res.solver_options = asdict(opts)
        return res
    if name == "grid":
        ns = parse_range(args.n) if args.n else list(range(2, dims[0] ** 2))
        return experiments.ratio_grid(
            dims,
            ns,
            args.samples,
            args.seed,
            sampler=args.sampler or "bloch-reject",
            deriv_mode=args.deriv_mode or "random-directions",
            include_forced=not args.no_forced,
            opts=opts,
            jobs=args.jobs,
        )
    if name == "weighted":
        return experiments.weighted_experiment(dims[0], args.samples, args.seed, opts, args.jobs)
    if name == "gm-vs-nh":
        return experiments.gm_vs_nh_experiment(dims[0], args.samples, args.seed, subset_n=args.subset_n, opts=opts, jobs=args.jobs)
    raise ValueError(f"unknown experiment {name!r}")


def _summary_lines(res: experiments.ExperimentResult) -> list[str]:
    lines = [f"experiment {res.name}: {len(res.records)} records, {len(res.quarantined)} quarantined, {len(res.failures)} failed"]
    if res.name == "table1" and res.table:
        lines.append("  n  HCRB      NHCRB min  NHCRB max  max ratio")
        for r in res.table:
            lines.append(f"  {r.n}  {fmt(r.hcrb):<9} {fmt(r.nhcrb_min):<10} {fmt(r.nhcrb_max):<10} {fmt(r.max_ratio)}")
    elif res.name == "grid" and res.table:
        lines.append("  d  n  raw min/mean/max            forced max  max")
        for c in res.table:
            raw = "/".join("-" if v is None else fmt(v) for v in (c.raw_min, c.raw_mean, c.raw_max))
            lines.append(f"  {c.d}  {c.n}  {raw:<27} {'-' if c.forced_max is None else fmt(c.forced_max):<11} {'-' if c.empty else fmt(c.max_ratio)}")
    for key, val in res.extra.items():
        if isinstance(val, float):
            lines.append(f"  {key} {fmt(val)}")
    return lines


def cmd_experiment(args: argparse.Namespace) -> int:
    args = _resolve(args, dict(_EXPERIMENT_DEFAULTS))
    opts = _solver_options(args)
    try:
        res = _run_experiment(args, opts)
    except (UnsupportedDimensionError, InvalidModelError, ValueError) as exc:
        print(f"invalid experiment input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    manifest = res.manifest()
    if args.output:
        mpath = res.write(args.output)
        manifest["manifest_path"] = str(mpath)
        manifest["output"] = str(args.output)
    payload = dict(manifest)
    if args.json and not args.output:
        payload["csv"] = res.csv_text()
    _emit(args, payload, _summary_lines(res))
    produced = len(res.records) + len(res.quarantined) + (len(res.table) if res.table else 0)
    produced += sum(len(v) for v in res.extra.values() if isinstance(v, list))
    if produced == 0 and res.failures:
        return EXIT_SOLVER
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = {"bound": cmd_bound, "verify": cmd_verify, "experiment": cmd_experiment}[args.command]
    return handler(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
