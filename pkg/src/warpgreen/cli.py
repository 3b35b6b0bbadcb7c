"""Command-line front end.

    warpgreen {analyze,criterion,solve,sharpness,verify} --config FILE [--out DIR] [--seed N] [--quiet]

Each command reads a JSON config, writes ``report.<command>.json`` and any CSV
tables into ``--out``, and exits with 0 (success), 2 (config error),
3 (numerical failure) or 4 (a verification check failed).  Wall-clock timing
goes to a separate ``timing.<command>.json`` so reports stay byte-identical
between runs.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import re
import sys
import time
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from warpgreen import _kernels, checks
from warpgreen.criterion import (
    THM1,
    THM2,
    SourceFunction,
    corollary_threshold,
    evaluate_series,
    green_family,
    model_threshold,
    term_thm1,
    term_thm2,
    default_horizon,
)
from warpgreen.errors import ConfigError, NumericalError, TailDivergence, WarpGreenError
from warpgreen.geometry import (
    EUCLIDEAN,
    HYPERBOLIC,
    KINDS,
    LINEAR_TAIL,
    POWER_EXP,
    POWER_LAW,
    TABULATED,
    ModelManifold,
    WarpingFamily,
    build_omega_table,
)
from warpgreen.green import (
    build_kernel,
    gradient_bound_ratio,
    green_weight,
    hardy_weight,
    sandwich_fit,
)
from warpgreen.numerics import QuadratureConfig
from warpgreen.solver import (
    VANISH_AT_INFINITY,
    ZERO_AT_ORIGIN,
    residual_check,
    sharpness_scan,
    solve_radial,
)

log = logging.getLogger("warpgreen")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_VERIFY = 4

COMMANDS = ("analyze", "criterion", "solve", "sharpness", "verify")
THREADS_ENV = "WARPGREEN_THREADS"

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_int = {"type": "integer"}


def _obj(props: dict, required=()) -> dict:
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


VERIFY_GROUPS = (
    "identities",
    "hardy",
    "thresholds",
    "sharpness",
    "omega",
    "solver",
    "sandwich",
    "tail_energy",
    "poincare",
)

SCHEMA = _obj(
    {
        "manifold": _obj(
            {
                "family": {"enum": list(KINDS)},
                "dim": {"type": "integer", "minimum": 3},
                "params": _obj(
                    {
                        "B": _pos,
                        "gamma": _num,
                        "delta": {"type": "number", "exclusiveMinimum": 1},
                        "knots": {
                            "type": "array",
                            "minItems": 3,
                            "items": {"type": "array", "items": _num, "minItems": 4, "maxItems": 4},
                        },
                    }
                ),
            },
            required=("family", "dim"),
        ),
        "source": _obj(
            {"family": {"enum": ["power_decay", "zero"]}, "C": _pos, "alpha": _num},
            required=("family",),
        ),
        "weight": _obj({"kind": {"enum": ["green", "hardy"]}, "gamma": _num, "Cprime": _pos}),
        "numerics": _obj(
            {
                "abs_tol": _pos,
                "rel_tol": _pos,
                "m0": {"type": "integer", "minimum": 2},
                "m_max": _int,
                "margin": _pos,
                "r_max": _pos,
                "h": _pos,
                "seed": {"type": "integer", "minimum": 0},
            }
        ),
        "analyze": _obj(
            {
                "probe_radii": {"type": "array", "items": _pos, "minItems": 1},
                "table_r_max": {"type": "integer", "minimum": 2},
                "levels": {"type": "integer", "minimum": 4},
            }
        ),
        "criterion": _obj(
            {
                "variant": {"enum": [THM1, THM2]},
                "mode": {"enum": ["series", "corollary"]},
                "gamma1": _num,
                "gamma2": _num,
                "model_gamma": _num,
            }
        ),
        "solve": _obj({"normalization": {"enum": [VANISH_AT_INFINITY, ZERO_AT_ORIGIN]}}),
        "sharpness": _obj(
            {
                "gammas": {"type": "array", "items": _num, "minItems": 1},
                "alphas": {"type": "array", "items": _num, "minItems": 1},
                "offset": _pos,
                "dim": {"type": "integer", "minimum": 3},
                "B": _pos,
                "delta": {"type": "number", "exclusiveMinimum": 1},
            }
        ),
        "verify": _obj(
            {
                "groups": {"type": "array", "items": {"enum": list(VERIFY_GROUPS)}, "minItems": 1},
                "trials": {"type": "integer", "minimum": 1},
            }
        ),
    }
)


# config ingestion ---------------------------------------------------------


def _reject_constant(name: str):
    raise ValueError(f"non-finite number {name} is not allowed")


def _line_of(text: str, path) -> int | None:
    pos = 0
    found = False
    for key in path:
        if not isinstance(key, str):
            continue
        idx = text.find(f'"{key}"', pos)
        if idx < 0:
            break
        pos, found = idx, True
    return text.count("\n", 0, pos) + 1 if found else None


def load_config(path: str | Path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        cfg = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", line=exc.lineno) from exc
    except ValueError as exc:
        bad = re.search(r"-?\b(NaN|Infinity)\b", text)
        raise ConfigError(str(exc), line=text.count("\n", 0, bad.start()) + 1 if bad else None) from exc
    validator = jsonschema.Draft7Validator(SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        err = errors[0]
        path_parts = [str(p) for p in err.absolute_path]
        if err.validator == "required":
            missing = [k for k in err.validator_value if k not in err.instance]
            path_parts.append(missing[0])
        elif err.validator == "additionalProperties":
            extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
            path_parts.append(extra[0])
        field = ".".join(path_parts) or "<root>"
        located = path_parts if err.validator == "additionalProperties" else list(err.absolute_path)
        raise ConfigError(err.message, field=field, line=_line_of(text, located))
    return cfg


def _need(cfg: dict, dotted: str):
    node: Any = cfg
    for part in dotted.split("."):
        if not isinstance(node, dict) or part not in node:
            raise ConfigError("required for this command", field=dotted)
        node = node[part]
    return node


def manifold_from(cfg: dict) -> ModelManifold:
    block = _need(cfg, "manifold")
    family = block["family"]
    dim = _need(cfg, "manifold.dim")
    params = block.get("params", {})

    def p(key):
        if key not in params:
            raise ConfigError(f"family {family} needs parameter {key}", field=f"manifold.params.{key}")
        return params[key]

    try:
        if family == EUCLIDEAN:
            warp = WarpingFamily.euclidean()
        elif family == HYPERBOLIC:
            warp = WarpingFamily.hyperbolic()
        elif family == POWER_EXP:
            warp = WarpingFamily.power_exp(p("B"), p("gamma"))
        elif family == POWER_LAW:
            warp = WarpingFamily.power_law(p("delta"))
        elif family == LINEAR_TAIL:
            warp = WarpingFamily.linear_tail()
        elif family == TABULATED:
            warp = WarpingFamily.tabulated(p("knots"))
        else:  # pragma: no cover - schema enum
            raise ConfigError(f"unknown family {family}", field="manifold.family")
        return ModelManifold(dim, warp)
    except ValueError as exc:
        raise ConfigError(str(exc), field="manifold") from exc


def source_from(cfg: dict) -> SourceFunction:
    block = _need(cfg, "source")
    if block["family"] == "zero":
        return SourceFunction.zero()
    return SourceFunction.power_decay(block.get("C", 1.0), _need(cfg, "source.alpha"))


def quad_from(cfg: dict) -> QuadratureConfig:
    num = cfg.get("numerics", {})
    return QuadratureConfig(abs_tol=num.get("abs_tol", 1e-10), rel_tol=num.get("rel_tol", 1e-9))


def family_gamma(M: ModelManifold) -> float | None:
    """Curvature growth exponent of the built-in family, if it has one."""
    kind = M.warp.kind
    if kind == POWER_EXP:
        return M.warp.param["gamma"]
    if kind == HYPERBOLIC:
        return 0.0
    if kind == POWER_LAW:
        return -2.0
    if kind in (EUCLIDEAN, LINEAR_TAIL):
        return -math.inf
    return None


def workers() -> int | None:
    raw = os.environ.get(THREADS_ENV)
    if not raw:
        return None
    try:
        return max(int(raw), 1)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None


# output ------------------------------------------------------------------


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return obj


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def write_csv(path: Path, header: list[str], rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def write_json(path: Path, data: dict) -> None:
    path.write_text(json.dumps(_clean(data), indent=2, allow_nan=False) + "\n")


# commands ------------------------------------------------------------------


def cmd_analyze(cfg: dict, seed: int) -> tuple[dict, dict]:
    M = manifold_from(cfg)
    opts = cfg.get("analyze", {})
    quad = quad_from(cfg)
    K = build_kernel(M, cfg=quad)
    table_max = int(opts.get("table_r_max", 100))
    table = build_omega_table(M, r_max=max(table_max, 2), cfg=quad)
    result: dict = {"manifold": M.label, "parabolic": K.parabolic}
    tables: dict = {}
    grid = table.grid[table.grid <= table_max]
    if K.parabolic:
        result["green_checks"] = "skipped: manifold is parabolic (no positive Green's function)"
        tables["analyze"] = (["r", "omega", "rho", "G"], [(r, table.omega(r), math.nan, math.nan) for r in grid])
        return {"results": result, "checks": []}, tables
    rho = green_weight(K)
    probes = [float(r) for r in opts.get("probe_radii", [0.5, 1.0, 2.0, 5.0, 10.0])]
    result["rho"] = {fmt(r): float(rho(r)) for r in probes}
    result["G"] = {fmt(r): K.G(r) for r in probes}
    b_fit, a_fit = sandwich_fit(K, table, np.linspace(2.0, min(100.0, table_max), 99))
    result["sandwich_fit"] = {"B": b_fit, "A": a_fit}
    ratios = [gradient_bound_ratio(K, float(r)) for r in np.geomspace(1.0, 100.0, 41)]
    result["gradient_bound_ratio"] = {"min": min(ratios), "max": max(ratios)}
    result["omega"] = {fmt(r): table.omega(float(r)) for r in grid if r in (1.0, 2.0, 5.0, 10.0, 50.0, 100.0)}
    rng = np.random.default_rng(seed)
    levels = int(opts.get("levels", 16))
    found = [
        checks.flux_check(K, levels),
        checks.log_level_check(K, rng, levels),
        checks.sandwich_check(K, build_omega_table(M, cfg=quad)),
        checks.tail_energy_check(K),
    ]
    tables["analyze"] = (
        ["r", "omega", "rho", "G"],
        [(r, table.omega(float(r)), float(rho(float(r))), K.G(float(r))) for r in grid],
    )
    return {"results": result, "checks": [c.to_dict() for c in found]}, tables


def _threshold_lines(cfg: dict, M: ModelManifold | None) -> dict:
    out = {}
    block = cfg.get("criterion", {})
    gamma = block.get("model_gamma")
    if gamma is None and M is not None:
        gamma = family_gamma(M)
    if gamma is not None:
        out["model_alpha_star"] = model_threshold(gamma)
        out["threshold_line"] = f"model α* = {model_threshold(gamma):g}"
    if "gamma1" in block or "gamma2" in block:
        g1 = _need(cfg, "criterion.gamma1")
        g2 = _need(cfg, "criterion.gamma2")
        try:
            out["corollary_alpha_star"] = corollary_threshold(g1, g2)
        except ValueError as exc:
            raise ConfigError(str(exc), field="criterion.gamma1") from exc
        out["corollary_line"] = f"corollary α* = {out['corollary_alpha_star']:g}"
    return out


def cmd_criterion(cfg: dict, seed: int) -> tuple[dict, dict]:
    block = cfg.get("criterion", {})
    if block.get("mode", "series") == "corollary":
        lines = _threshold_lines(cfg, None)
        if "corollary_alpha_star" not in lines and "model_alpha_star" not in lines:
            raise ConfigError("corollary mode needs gamma1/gamma2 or model_gamma", field="criterion.gamma1")
        return {"results": lines, "checks": []}, {}
    M = manifold_from(cfg)
    f = source_from(cfg)
    num = cfg.get("numerics", {})
    m0 = int(num.get("m0", 2))
    m_max = int(num.get("m_max", 512))
    margin = float(num.get("margin", 0.15))
    if m_max < m0 + 16:
        raise ConfigError("m_max must be at least m0 + 16", field="numerics.m_max")
    quad = quad_from(cfg)
    table = build_omega_table(M, r_max=max(600.0, m_max + 2.0), cfg=quad)
    variant = block.get("variant", THM2)
    horizon = default_horizon(m_max)
    K = build_kernel(M, cfg=quad)
    if variant == THM2:
        term = lambda m: term_thm2(K, table, f, m, horizon)  # noqa: E731
    else:
        wb = cfg.get("weight", {})
        if wb.get("kind", "green") == "hardy":
            rho = hardy_weight(M, wb.get("gamma", -2.0), wb.get("Cprime", 0.25))
            family = lambda m: rho  # noqa: E731
        else:
            family = green_family(K)
        term = lambda m: term_thm1(M, table, family, f, m, horizon)  # noqa: E731
    if K.parabolic and variant == THM2:
        raise ConfigError("thm2 needs a non-parabolic manifold", field="manifold")
    rep = evaluate_series(term, m0, m_max, margin, variant, workers())
    result = {"manifold": M.label, "source": f.label, **rep.to_dict(), **_threshold_lines(cfg, M)}
    rows = [(m, t, s) for (m, t), s in zip(rep.terms, rep.partial_sums)]
    return {"results": result, "verdicts": {variant: rep.verdict}, "checks": []}, {
        "criterion": (["m", "term", "partial_sum"], rows)
    }


def cmd_solve(cfg: dict, seed: int) -> tuple[dict, dict]:
    M = manifold_from(cfg)
    f = source_from(cfg)
    num = cfg.get("numerics", {})
    norm = cfg.get("solve", {}).get("normalization", VANISH_AT_INFINITY)
    try:
        sol = solve_radial(M, f, num.get("r_max"), num.get("h"), norm)
    except TailDivergence as exc:
        gamma = family_gamma(M)
        ctx = f"alpha={f.alpha:g}" if f.kind == "power_decay" else f"source={f.label}"
        if gamma is not None:
            ctx += f", model threshold alpha*={model_threshold(gamma):g}"
        raise TailDivergence(f"{exc} ({ctx})") from exc
    res = residual_check(M, sol, f)
    result = {
        "manifold": M.label,
        "source": f.label,
        "normalization": norm,
        "sign_convention": sol.sign_convention,
        "r_max": float(sol.grid[-1]),
        "h": sol.h,
        "residual_max": res,
        "u0": float(sol.u[0]),
    }
    rows = zip(sol.grid, sol.u, sol.u_prime, sol.residual)
    return {"results": result, "checks": []}, {"solution": (["r", "u", "u_prime", "residual"], rows)}


def cmd_sharpness(cfg: dict, seed: int) -> tuple[dict, dict]:
    block = cfg.get("sharpness", {})
    gammas = [float(g) for g in block.get("gammas", [2.0, 0.0, -2.0, -3.0])]
    offset = float(block.get("offset", 0.5))
    n = int(block.get("dim", 3))
    rows = []
    found = []
    for g in gammas:
        a_star = model_threshold(g)
        alphas = block.get("alphas") or [a_star - offset, a_star + offset]
        scan = sharpness_scan(g, alphas, n, block.get("B", 1.0), block.get("delta", 2.0), workers())
        for alpha, conv in scan:
            rows.append((g, alpha, conv, a_star))
        consistent = [conv == (alpha > a_star) for alpha, conv in scan if alpha != a_star]
        found.append(
            checks.Check(
                f"sharpness flip [gamma={g:g}]", a_star, "converges iff alpha > alpha*", 0.0, all(consistent)
            )
        )
    result = {"rows": [{"gamma": g, "alpha": a, "converged": c, "alpha_star": s} for g, a, c, s in rows]}
    return {"results": result, "checks": [c.to_dict() for c in found]}, {
        "sharpness": (["gamma", "alpha", "converged", "alpha_star"], rows)
    }


def cmd_verify(cfg: dict, seed: int) -> tuple[dict, dict]:
    block = cfg.get("verify", {})
    groups = block.get("groups", list(VERIFY_GROUPS))
    trials = int(block.get("trials", 256))
    rng = np.random.default_rng(seed)
    threads = workers()
    found: list[checks.Check] = []
    euclid3 = ModelManifold(3, WarpingFamily.euclidean())
    hyper3 = ModelManifold(3, WarpingFamily.hyperbolic())
    for group in VERIFY_GROUPS:
        if group not in groups:
            continue
        log.info("verify: %s", group)
        if group == "identities":
            for n, w in [
                (3, WarpingFamily.euclidean()),
                (5, WarpingFamily.euclidean()),
                (3, WarpingFamily.hyperbolic()),
                (3, WarpingFamily.power_exp(0.2, 1.0)),
                (3, WarpingFamily.power_law(2.0)),
            ]:
                K = build_kernel(ModelManifold(n, w))
                found += [checks.flux_check(K), checks.log_level_check(K, rng)]
        elif group == "hardy":
            found += [checks.hardy_reproduction_check(n) for n in (3, 4, 5, 8)]
        elif group == "thresholds":
            found += [
                checks.series_verdict_check(euclid3, 1.5, "Diverges", threads),
                checks.series_verdict_check(euclid3, 2.5, "Converges", threads),
                checks.potential_check(euclid3, 1.5, False),
                checks.potential_check(euclid3, 2.5, True),
                checks.beta_integral_check(),
                checks.series_verdict_check(hyper3, 0.5, "Diverges", threads),
                checks.series_verdict_check(hyper3, 1.5, "Converges", threads),
            ]
        elif group == "sharpness":
            found += checks.sharpness_checks(workers=threads)
        elif group == "omega":
            for g, w, want in [
                (0, WarpingFamily.power_exp(1.0, 0.0), 0.0),
                (1, WarpingFamily.power_exp(1.0, 1.0), 0.5),
                (2, WarpingFamily.power_exp(1.0, 2.0), 1.0),
                (-3, WarpingFamily.linear_tail(), -1.0),
            ]:
                found.append(checks.omega_exponent_check(ModelManifold(3, w), want))
        elif group == "solver":
            found.append(checks.quadratic_check())
            for w in checks.builtin_families():
                found += checks.manufactured_checks(ModelManifold(3, w))
            found.append(checks.fubini_check(hyper3))
            found.append(checks.fubini_check(euclid3))
        elif group == "sandwich":
            for w in checks.builtin_families():
                M = ModelManifold(3, w)
                found.append(checks.sandwich_check(build_kernel(M), build_omega_table(M, r_max=120)))
        elif group == "tail_energy":
            for w in checks.builtin_families():
                found.append(checks.tail_energy_check(build_kernel(ModelManifold(3, w))))
        elif group == "poincare":
            found += checks.poincare_checks(trials, seed)
    return {"checks": [c.to_dict() for c in found]}, {}


HANDLERS = {
    "analyze": cmd_analyze,
    "criterion": cmd_criterion,
    "solve": cmd_solve,
    "sharpness": cmd_sharpness,
    "verify": cmd_verify,
}


# entry point -------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="warpgreen", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--out", default="./out", help="output directory (default ./out)")
        p.add_argument("--seed", type=int, default=None, help="overrides numerics.seed")
        p.add_argument("--quiet", action="store_true", help="suppress progress output")
    return parser


def run(command: str, config_path: str, out_dir: str, seed: int | None = None) -> tuple[int, dict]:
    """Run one command; returns (exit code, report)."""
    from warpgreen import __version__

    cfg = load_config(config_path)
    if seed is not None:
        cfg.setdefault("numerics", {})["seed"] = seed
    seed_val = int(cfg.get("numerics", {}).get("seed", 0))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    body, tables = HANDLERS[command](cfg, seed_val)
    elapsed = time.perf_counter() - start
    check_list = body.get("checks", [])
    all_pass = all(c["pass"] for c in check_list)
    report = {
        "tool_version": __version__,
        "command": command,
        "config": cfg,
        **body,
        "all_pass": all_pass,
    }
    write_json(out / f"report.{command}.json", report)
    for name, (header, rows) in tables.items():
        write_csv(out / f"{name}.csv", header, rows)
    write_json(out / f"timing.{command}.json", {"seconds": elapsed, "backend": _kernels.BACKEND})
    code = EXIT_OK
    if command in ("verify", "sharpness") and not all_pass:
        code = EXIT_VERIFY
    return code, report


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    try:
        code, report = run(args.command, args.config, args.out, args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except WarpGreenError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    if not args.quiet:
        for c in report.get("checks", []):
            print(f"{'PASS' if c['pass'] else 'FAIL'}  {c['name']}  value={fmt(c['value'])}")
        verdicts = report.get("verdicts")
        if verdicts:
            for k, v in verdicts.items():
                print(f"{k}: {v}")
        print(f"wrote {Path(args.out) / f'report.{args.command}.json'}")
    return code
