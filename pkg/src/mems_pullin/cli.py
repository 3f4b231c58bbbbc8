"""``mems-pullin`` command-line frontend.

Each subcommand writes a deterministic JSON result (sorted keys, full config
echo) and a separate ``.meta.json`` holding the timestamp and wall-clock
time. Exit status: 0 success, 1 a verified ordering or bound failed, 2 solver
or I/O error, 3 configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .config import (
    SUBCOMMANDS,
    RunConfig,
    build_config,
    parse_domain,
    parse_nonlinearity,
    parse_operator,
    parse_profile,
    read_config_file,
)
from .domain import write_grid_csv
from .errors import ConfigError, InvalidArgument, PullInError
from .mems import pull_in_voltage, pullin_compare, talenti_check
from .newton import (
    KernelQuadrature,
    newton_mu1,
    newton_pull_in,
    pullin_upper_bound,
    pullin_upper_bound_weighted,
)
from .rearrange import distribution_function, rearrange
from .spectral import dirichlet_eig1, faber_krahn_check
from .suites import random_density, random_mask, talenti_case

log = logging.getLogger("mems_pullin")

EXIT_OK, EXIT_VIOLATION, EXIT_SOLVER, EXIT_CONFIG = 0, 1, 2, 3
TOOL = "mems-pullin"


class Outcome:
    """Result payload of one run, its verification verdict and optional CSV data."""

    def __init__(self, result: dict, violation: bool = False, csv=None):
        self.result = result
        self.violation = violation
        self.csv = csv  # (functions, names) or None


# ------------------------------------------------------------ subcommands


def _pullin(cfg: RunConfig) -> Outcome:
    dom = parse_domain(cfg.domain)
    op = parse_operator(cfg.op, dom)
    g = parse_nonlinearity(cfg.g)
    f = parse_profile(cfg.f, dom)
    res = pull_in_voltage(op, dom, f, g, cfg.pullin_config())
    return Outcome(res.to_dict(), csv=([res.u_at_lo, f], ("u_at_lo", "f")))


def _compare_case(cfg: RunConfig, dom, f) -> dict:
    op = parse_operator(cfg.op, dom)
    g = parse_nonlinearity(cfg.g)
    rep = pullin_compare(dom, f, op, g, cfg.pullin_config(), cfg.ordering_slack, cfg.n_radial)
    return rep.to_dict()


def _compare(cfg: RunConfig) -> Outcome:
    if cfg.random:
        cases = _map(cfg, _compare_random_case, range(cfg.random))
        return Outcome({"cases": cases, "all_ordered": all(c["ordered"] for c in cases)},
                       violation=not all(c["ordered"] for c in cases))
    dom = parse_domain(cfg.domain)
    rep = _compare_case(cfg, dom, parse_profile(cfg.f, dom))
    return Outcome(rep, violation=not rep["ordered"])


def _compare_random_case(args) -> dict:
    cfg, index = args
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(cfg.random)[index])
    dom = random_mask(rng, cfg.random_h)
    f = random_density(rng, dom, positive=True)
    out = _compare_case(cfg, dom, f)
    out.update(index=index, n_cells=dom.n_cells, measure=dom.measure)
    return out


def _talenti_random_case(args) -> dict:
    cfg, index = args
    case = talenti_case(index, np.random.SeedSequence(cfg.seed).spawn(cfg.random)[index], cfg.random_h)
    rep = talenti_check(case.domain, case.f, case.p, cfg.n_radial, cfg.grid_slack, cfg.solver_config())
    out = rep.to_dict()
    out.update(index=index, p=case.p, n_cells=case.domain.n_cells, measure=case.domain.measure)
    return out


def _talenti(cfg: RunConfig) -> Outcome:
    if cfg.random:
        cases = _map(cfg, _talenti_random_case, range(cfg.random))
        ok = all(c["passed"] for c in cases)
        return Outcome({"cases": cases, "all_passed": ok}, violation=not ok)
    dom = parse_domain(cfg.domain)
    f = parse_profile(cfg.f, dom)
    rep = talenti_check(dom, f, cfg.p, cfg.n_radial, cfg.grid_slack, cfg.solver_config())
    return Outcome(rep.to_dict(), violation=not rep.passed, csv=([rep.u_star, rep.v], ("u_star", "v")))


def _rearrange(cfg: RunConfig) -> Outcome:
    dom = parse_domain(cfg.domain)
    f = parse_profile(cfg.f, dom)
    fs = rearrange(f, cfg.n_radial)
    levels = np.quantile(f.values, [0.1, 0.25, 0.5, 0.75, 0.9])
    checks = [
        {"level": float(t), "measure": distribution_function(f, t), "measure_star": fs.shell_distribution(t)}
        for t in levels
    ]
    result = {
        "max": f.max(),
        "max_star": fs.max(),
        "integral": f.integral(),
        "integral_star": fs.integral(),
        "radius": fs.ball.radius,
        "n_radial": fs.ball.n_cells,
        "levels": checks,
    }
    return Outcome(result, csv=([fs.as_grid_function()], ("f_star",)))


def _eigen(cfg: RunConfig) -> Outcome:
    if cfg.op not in ("dirichlet-laplace", "laplace"):
        raise ConfigError("eigen supports --operator dirichlet-laplace only", "op")
    dom = parse_domain(cfg.domain)
    eig = dirichlet_eig1(dom, cfg.eigen_config())
    return Outcome(eig.to_dict(), csv=([eig.phi1], ("phi1",)))


def _fk_check(cfg: RunConfig) -> Outcome:
    rep = faber_krahn_check(parse_domain(cfg.domain), cfg.fk_slack, cfg.n_radial, cfg.eigen_config())
    return Outcome(rep.to_dict(), violation=not rep.ordered)


def _newton_setup(cfg: RunConfig):
    dom = parse_domain(cfg.domain)
    if dom.kind not in ("mask", "ball") or dom.dim not in (3, 4):
        raise ConfigError("Newton-potential runs need a 3D or 4D mask or ball support", "domain")
    quad = KernelQuadrature(dom, cfg.dense_max_cells)
    f = parse_profile(cfg.f, dom)
    return quad, f


def _newton_eigen(cfg: RunConfig) -> Outcome:
    quad, _ = _newton_setup(cfg)
    eig = newton_mu1(quad, cfg.eigen_config())
    out = eig.to_dict()
    out["kernel"] = quad.describe()
    return Outcome(out, csv=([eig.phi1], ("phi1",)))


def _newton_bound(cfg: RunConfig) -> Outcome:
    quad, f = _newton_setup(cfg)
    eig = newton_mu1(quad, cfg.eigen_config())
    inf_f = float(np.min(f.values))
    if not inf_f > 0:
        raise InvalidArgument("the 4/27 bound needs inf f > 0")
    out = {
        "mu1": eig.mu1,
        "inf_f": inf_f,
        "bound_4_27": pullin_upper_bound(eig.mu1, inf_f),
        "bound_weighted": pullin_upper_bound_weighted(eig, f),
        "eigen": eig.to_dict(),
        "kernel": quad.describe(),
    }
    return Outcome(out)


def _newton_pullin(cfg: RunConfig) -> Outcome:
    quad, f = _newton_setup(cfg)
    g = parse_nonlinearity(cfg.g)
    eig = newton_mu1(quad, cfg.eigen_config())
    res = newton_pull_in(quad, f, g, cfg.pullin_config())
    inf_f = float(np.min(f.values))
    b1 = pullin_upper_bound(eig.mu1, inf_f)
    b2 = pullin_upper_bound_weighted(eig, f)
    slack = cfg.bisection_rtol * res.lambda_hi
    checks = {
        "lambda_hi_below_4_27_bound": bool(res.lambda_hi <= b1 + slack),
        "lambda_hi_below_weighted_bound": bool(res.lambda_hi <= b2 + slack),
    }
    out = {
        "pull_in": res.to_dict(),
        "mu1": eig.mu1,
        "bound_4_27": b1,
        "bound_weighted": b2,
        "checks": checks,
    }
    # the 4/27 bound is only derived for g = (1-u)^-2
    if g.kind != "power" or g.m != 2:
        checks.clear()
        out["checks_note"] = "bounds are stated for g = (1-u)^-2 and were not checked"
    return Outcome(out, violation=not all(checks.values()), csv=([res.u_at_lo, eig.phi1], ("u_at_lo", "phi1")))


def _sweep(cfg: RunConfig) -> Outcome:
    if not cfg.sweep or cfg.values is None:
        raise ConfigError("sweep needs --sweep KEY and --values", "sweep")
    key = cfg.sweep.replace("-", "_")
    if key in ("subcommand", "sweep", "values", "base", "output", "csv", "jobs"):
        raise ConfigError(f"cannot sweep over {key!r}", "sweep")
    variants = []
    base = replace(cfg, subcommand=cfg.base, sweep=None, values=None, output=None, csv=None, jobs=1)
    for raw in cfg.values.split(";"):
        overrides = {k: v for k, v in base.to_dict().items() if v is not None}
        overrides[key] = raw.strip()
        variants.append(build_config(None, overrides))
    runs = _map(cfg, _sweep_entry, variants)
    for i, (run, raw) in enumerate(zip(runs, cfg.values.split(";"))):
        run.update(index=i, value=raw.strip())
    bad = [r for r in runs if r["status"] == "error"]
    if bad:
        raise _SweepError(bad[0]["error"], runs)
    return Outcome({"key": key, "runs": runs}, violation=any(r["status"] == "violation" for r in runs))


class _SweepError(PullInError):
    def __init__(self, message, runs):
        super().__init__(message)
        self.runs = runs


def _sweep_entry(cfg: RunConfig) -> dict:
    try:
        out = HANDLERS[cfg.subcommand](cfg)
    except PullInError as exc:
        return {"status": "error", "error": str(exc), "config": cfg.to_dict()}
    return {"status": "violation" if out.violation else "ok", "result": out.result, "config": cfg.to_dict()}


HANDLERS = {
    "pullin": _pullin,
    "compare": _compare,
    "talenti": _talenti,
    "rearrange": _rearrange,
    "eigen": _eigen,
    "fk-check": _fk_check,
    "newton-pullin": _newton_pullin,
    "newton-eigen": _newton_eigen,
    "newton-bound": _newton_bound,
    "sweep": _sweep,
}


def _map(cfg: RunConfig, fn, items):
    """Ordered map, in worker processes when ``jobs > 1``."""
    items = list(items)
    args = items if fn is _sweep_entry else [(cfg, i) for i in items]
    if cfg.jobs > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            return list(pool.map(fn, args))
    return [fn(a) for a in args]


# ---------------------------------------------------------------- output


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def render_json(payload: dict) -> str:
    return json.dumps(_jsonable(payload), sort_keys=True, indent=2, allow_nan=False) + "\n"


def emit_report(cfg: RunConfig, status: str, result: dict, csv=None, wall: float = 0.0, error=None) -> Path:
    """Write the result JSON, its ``.meta.json`` companion and the CSV profile."""
    out = Path(cfg.output or f"{cfg.subcommand}.json")
    payload = {
        "tool": TOOL,
        "version": __version__,
        "subcommand": cfg.subcommand,
        "status": status,
        "config": cfg.to_dict(),
        "result": result,
    }
    if error is not None:
        payload["error"] = error
    out.write_text(render_json(payload))
    meta = out.with_name(out.stem + ".meta.json")
    meta.write_text(render_json({
        "result_file": out.name,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "wall_clock_seconds": round(wall, 3),
    }))
    if cfg.csv and csv is not None:
        functions, names = csv
        write_grid_csv(cfg.csv, *functions, names=names)
    return out


# ------------------------------------------------------------------ parser


class _Parser(argparse.ArgumentParser):
    """Malformed command lines are configuration errors (exit 3), not usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: config error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog=TOOL, description="Pull-in voltages of p-MEMS and symmetrization checks.")
    parser.add_argument("--version", action="version", version=f"{TOOL} {__version__}")
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", help="key = value run-configuration file (flags override it)")
    parser.add_argument("-v", "--verbose", action="store_true")
    knobs = parser.add_argument_group("run configuration")
    for name in RunConfig.__dataclass_fields__:
        if name == "subcommand":
            continue
        flags = ["--" + name.replace("_", "-")]
        if name == "op":
            flags.append("--operator")
        if name == "values":
            knobs.add_argument(*flags, dest=name, nargs="+", default=None)
            continue
        knobs.add_argument(*flags, dest=name, default=None, metavar=name.upper())
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    flags = {k: v for k, v in vars(args).items() if k in RunConfig.__dataclass_fields__ and v is not None}
    if isinstance(flags.get("values"), list):
        flags["values"] = ";".join(flags["values"])
    flags["subcommand"] = args.subcommand
    fallback = RunConfig(subcommand=args.subcommand, output=flags.get("output"))
    try:
        file_values = read_config_file(args.config) if args.config else {}
        file_values.pop("subcommand", None)
        cfg = build_config(file_values, flags)
    except ConfigError as exc:
        print(f"config error [{exc.key}]: {exc}", file=sys.stderr)
        _safe_emit(fallback, "error", {}, error=f"config error [{exc.key}]: {exc}")
        return EXIT_CONFIG

    start = time.perf_counter()
    try:
        outcome = HANDLERS[cfg.subcommand](cfg)
    except ConfigError as exc:
        print(f"config error [{exc.key}]: {exc}", file=sys.stderr)
        _safe_emit(cfg, "error", {}, error=f"config error [{exc.key}]: {exc}")
        return EXIT_CONFIG
    except InvalidArgument as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        _safe_emit(cfg, "error", {}, error=f"invalid input: {exc}")
        return EXIT_CONFIG
    except _SweepError as exc:
        print(f"sweep error: {exc}", file=sys.stderr)
        _safe_emit(cfg, "error", {"runs": exc.runs}, error=str(exc))
        return EXIT_SOLVER
    except PullInError as exc:
        print(f"solver error: {type(exc).__name__}: {exc}", file=sys.stderr)
        _safe_emit(cfg, "error", {}, error=f"{type(exc).__name__}: {exc}")
        return EXIT_SOLVER
    wall = time.perf_counter() - start
    status = "violation" if outcome.violation else "ok"
    try:
        path = emit_report(cfg, status, outcome.result, outcome.csv, wall)
    except OSError as exc:
        print(f"cannot write results: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    print(f"{cfg.subcommand}: {status} -> {path}")
    return EXIT_VIOLATION if outcome.violation else EXIT_OK


def _safe_emit(cfg, status, result, error):
    try:
        emit_report(cfg, status, result, error=error)
    except OSError as exc:
        print(f"cannot write results: {exc}", file=sys.stderr)


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
