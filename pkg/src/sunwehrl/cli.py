"""Command-line verification campaigns with JSON/CSV reports.

Exit codes: 0 success, 1 a check or majorization test failed,
2 invalid input, 3 resource guard or overflow.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path
from typing import Any, Optional

import numpy as np

from . import __version__
from .channels import (
    HermitianOperator,
    cloning_apply,
    coherence_defect,
    coherent_output_levels,
    coherent_output_spectrum,
    decomposition_constants,
    measure_prepare,
    random_density,
    random_state,
    trace_factor,
)
from .errors import ResourceLimitError
from .fock import DEFAULT_MAX_DIM, StateVector, coherent_vector, dimension, enumerate_basis
from .majorization import ConcaveFn, Verdict, majorizes, spectrum
from .rep import commutant_dimension
from .seeding import resolve_seed, stream
from .wehrl import (
    berezin_lieb_gap,
    coherent_wehrl_closed_form,
    resolution_residual,
    sample_haar_state,
    semiclassical_trace,
    wehrl_entropy,
)

log = logging.getLogger("sunwehrl")

EXIT_OK, EXIT_FAIL, EXIT_INVALID, EXIT_RESOURCE = 0, 1, 2, 3
CHECKS = ("identity", "gram", "trace", "resolution", "berezin-lieb", "irreducible", "defect")

DEFAULTS: dict[str, Any] = {
    "n": 2, "m": 1, "k": 1, "trials": 100, "samples": 100_000, "f": "entropy",
    "state": None, "method": "auto", "check": None, "tol": None, "format": "json",
    "output": None, "max_dim": DEFAULT_MAX_DIM, "workers": 1, "ks": None, "k_max": 512,
}
STATE_DEFAULTS = {"spectrum": "coherent", "majorize": "random", "entropy": "coherent"}


class UsageError(ValueError):
    """Invalid parameters; maps to exit code 2."""


def parse_fspec(spec: str) -> ConcaveFn:
    """Parse ``entropy``, ``power:p``, ``kink:t``, ``const:c``, ``affine:a,b`` or ``table:path``.

    A table file is JSON ``{"x": [...], "y": [...]}`` or two-column CSV.
    """
    name, _, arg = spec.partition(":")
    try:
        if name == "entropy" and not arg:
            return ConcaveFn.entropy()
        if name == "power":
            return ConcaveFn.power(float(arg))
        if name == "kink":
            return ConcaveFn.kink(float(arg))
        if name == "const":
            return ConcaveFn.const(float(arg))
        if name == "affine":
            a, b = (float(v) for v in arg.split(","))
            return ConcaveFn.affine(a, b)
        if name == "table":
            path = Path(arg)
            if path.suffix == ".json":
                data = json.loads(path.read_text())
                xs, ys = data["x"], data["y"]
            else:
                pts = np.loadtxt(path, delimiter=",", ndmin=2)
                xs, ys = pts[:, 0], pts[:, 1]
            return ConcaveFn("table", (tuple(xs), tuple(ys)), label=f"table:{arg}")
    except (ValueError, KeyError, OSError) as exc:
        raise UsageError(f"bad f-spec {spec!r}: {exc}") from exc
    raise UsageError(f"unknown f-spec {spec!r}")


def load_state_file(path: str, n: int, m: int) -> StateVector:
    """JSON ``{"n_modes": N, "level": M, "real": [...], "imag": [...]}`` in canonical basis order."""
    data = json.loads(Path(path).read_text())
    if (data.get("n_modes"), data.get("level")) != (n, m):
        raise UsageError(f"state file is for N={data.get('n_modes')}, M={data.get('level')}")
    coeffs = np.asarray(data["real"], float) + 1j * np.asarray(data.get("imag", 0.0), float)
    psi = StateVector(enumerate_basis(n, m), coeffs)
    if not psi.is_normalized():
        raise UsageError("state in file is not normalized")
    return psi


def make_state(source: str, n: int, m: int, seed: int, trial: int = 0) -> HermitianOperator:
    """Density matrix for a state source: coherent, mixed, random[:s], density[:s], file:path."""
    space = enumerate_basis(n, m)
    name, _, arg = source.partition(":")
    if name in ("random", "density", "coherent"):
        base = int(arg) if arg else seed
        rng = stream(base, f"state:{name}", trial)
        if name == "random":
            return HermitianOperator.projector(random_state(space, rng))
        if name == "density":
            return random_density(space, rng)
        u = np.eye(n)[0] if not arg and trial == 0 else sample_haar_state(n, rng)
        return HermitianOperator.projector(coherent_vector(space, u))
    if name == "mixed":
        return HermitianOperator.maximally_mixed(space)
    if name == "file":
        return HermitianOperator.projector(load_state_file(arg, n, m))
    raise UsageError(f"unknown state source {source!r}")


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", type=Path, help="JSON file of parameters; flags take precedence")
    p.add_argument("--n", type=int, help="number of modes N")
    p.add_argument("--m", type=int, help="level M of the input space")
    p.add_argument("--seed", type=int, help="root seed (default: $SUNWEHRL_SEED or 0)")
    p.add_argument("--format", choices=("json", "csv"))
    p.add_argument("--output", help="write the report here instead of stdout")
    p.add_argument("--max-dim", dest="max_dim", type=int, help="dense dimension guard")
    p.add_argument("--workers", type=int, help="threads for sampling")
    p.add_argument("--tol", type=float, help="override the check tolerance")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sunwehrl", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", help="spectrum of T^k applied to a state")
    _common(p)
    p.add_argument("--k", type=int)
    p.add_argument("--state", help="coherent | random[:seed] | file:path")

    p = sub.add_parser("majorize", help="test majorization by the coherent output")
    _common(p)
    p.add_argument("--k", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--state", help="random (pure) | density (mixed) | coherent")

    p = sub.add_parser("verify", help="run one named identity or inequality check")
    _common(p)
    p.add_argument("--check", choices=CHECKS)
    p.add_argument("--k", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--f", help="concave function spec (berezin-lieb)")

    p = sub.add_parser("entropy", help="Wehrl-type entropy of a state and its gap")
    _common(p)
    p.add_argument("--f", help="entropy | power:p | kink:t | const:c | table:path")
    p.add_argument("--state", help="coherent | mixed | random[:s] | density[:s] | file:path")
    p.add_argument("--method", choices=("auto", "closed-form", "mc"))
    p.add_argument("--samples", type=int)

    p = sub.add_parser("limit-scan", help="finite-k coherent traces against the limit integral")
    _common(p)
    p.add_argument("--f")
    p.add_argument("--ks", help="comma-separated k values")
    p.add_argument("--k-max", dest="k_max", type=int, help="scan 0,1,2,4,... up to this")
    return parser


def resolve_config(args: argparse.Namespace) -> dict[str, Any]:
    """Merge flags over the config file over defaults; the seed falls back to the env var."""
    file_cfg: dict[str, Any] = {}
    if args.config is not None:
        try:
            file_cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(file_cfg, dict):
            raise UsageError("config file must hold a JSON object")
    cfg: dict[str, Any] = {"command": args.command}
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    for key in sorted(set(DEFAULTS) | set(flags) | {"seed"}):
        val = flags.get(key)
        if val is None:
            val = file_cfg.get(key)
        if val is None:
            val = DEFAULTS.get(key)
        cfg[key] = val
    if cfg["state"] is None:
        cfg["state"] = STATE_DEFAULTS.get(args.command)
    if args.command == "limit-scan" and flags.get("format") is None and "format" not in file_cfg:
        cfg["format"] = "csv"
    cfg["seed"] = resolve_seed(cfg["seed"])
    if cfg["n"] < 1 or cfg["m"] < 0 or (cfg.get("k") is not None and cfg["k"] < 0):
        raise UsageError("need n >= 1, m >= 0, k >= 0")
    return cfg


# ---------------------------------------------------------------------------
# commands: each returns (status, result dict, csv rows)
# ---------------------------------------------------------------------------

def cmd_spectrum(cfg):
    n, m, k = cfg["n"], cfg["m"], cfg["k"]
    _guard(dimension(n, m + k), cfg["max_dim"])
    rho = make_state(cfg["state"], n, m, cfg["seed"])
    spec = spectrum(cloning_apply(rho, k, cfg["max_dim"]))
    levels = spec.distinct(1e-9)
    result = {
        "eigenvalues": spec.values.tolist(),
        "levels": [{"value": v, "multiplicity": c} for v, c in levels],
        "sum": spec.total,
        "dim": len(spec),
        "expected_sum": float(trace_factor(n, m, k)),
    }
    status = "ok"
    if cfg["state"].partition(":")[0] == "coherent":
        closed = coherent_output_spectrum(n, m, k, cfg["max_dim"])
        dev = float(np.max(np.abs(closed.values - spec.values)))
        tol = cfg["tol"] if cfg["tol"] is not None else 1e-10 * max(1.0, closed.values[0])
        result["closed_form"] = [{"value": v, "multiplicity": c}
                                 for v, c in coherent_output_levels(n, m, k)]
        result["max_deviation"] = dev
        status = "pass" if dev <= tol else "fail"
    rows = [{"value": v, "multiplicity": c} for v, c in levels]
    return status, result, rows


def cmd_majorize(cfg):
    n, m, k, trials = cfg["n"], cfg["m"], cfg["k"], cfg["trials"]
    if trials < 1:
        raise UsageError("trials must be >= 1")
    _guard(dimension(n, m + k), cfg["max_dim"])
    reference = coherent_output_spectrum(n, m, k, cfg["max_dim"])
    kind = cfg["state"].partition(":")[0]
    if kind not in ("random", "density", "coherent"):
        raise UsageError("majorize supports random, density or coherent states")
    verdicts, violations, non_strict = [], 0, 0
    min_margin: Optional[float] = None
    for t in range(trials):
        rho = make_state(cfg["state"], n, m, cfg["seed"], trial=t)
        out = spectrum(cloning_apply(rho, k, cfg["max_dim"]))
        res = majorizes(reference, out, cfg["tol"])
        defect = None
        if kind == "random" and m >= 1:
            w, v = np.linalg.eigh(rho.matrix)
            defect = coherence_defect(StateVector(rho.space, v[:, -1]))
        if not res.holds:
            violations += 1
        if kind != "coherent" and (defect is None or defect > 1e-6):
            min_margin = res.margin if min_margin is None else min(min_margin, res.margin)
            if kind == "random" and m >= 2 and k > 0 and res.verdict is not Verdict.STRICT:
                non_strict += 1
        verdicts.append({"trial": t, "verdict": res.verdict.value, "margin": res.margin,
                         "first_violation": res.first_violation, "coherence_defect": defect})
    result = {"trials": trials, "violations": violations, "non_strict": non_strict,
              "min_margin": min_margin, "verdicts": verdicts}
    return ("pass" if violations == 0 else "fail"), result, verdicts


def _guard(dim: int, limit: int):
    if dim > limit:
        raise ResourceLimitError("requested space", dim, limit)


def _check_identity(cfg):
    n, m, k = cfg["n"], cfg["m"], cfg["k"]
    fit = decomposition_constants(n, m, k, max(cfg["trials"], k + 2), cfg["seed"])
    held_out = [random_state(enumerate_basis(n, m), stream(cfg["seed"], "identity:holdout", t))
                for t in range(5)]
    resid = max(fit.residual_on(psi) for psi in held_out)
    tol = cfg["tol"] if cfg["tol"] is not None else 1e-8
    ok = resid <= tol and min(fit.values) >= -1e-9
    return ok, {"constants": list(fit.values), "fit_residual": fit.residual,
                "holdout_residual": resid, "condition": fit.condition, "tol": tol}


def _check_gram(cfg):
    n, m, k = cfg["n"], cfg["m"], cfg["k"]
    space = enumerate_basis(n, m)
    worst = 0.0
    for t in range(cfg["trials"]):
        psi = random_state(space, stream(cfg["seed"], "gram", t))
        a = spectrum(cloning_apply(HermitianOperator.projector(psi), k))
        b = spectrum(measure_prepare(psi, k)).padded(len(a))
        worst = max(worst, float(np.max(np.abs(a.values - b.values))))
    tol = cfg["tol"] if cfg["tol"] is not None else 1e-9
    return worst <= tol, {"max_spectral_mismatch": worst, "tol": tol}


def _check_trace(cfg):
    n, m, k = cfg["n"], cfg["m"], cfg["k"]
    space = enumerate_basis(n, m)
    expected = trace_factor(n, m, k)
    worst, ratios = 0.0, []
    for t in range(cfg["trials"]):
        g = random_density(space, stream(cfg["seed"], "trace", t))
        ratio = cloning_apply(g, k).trace / g.trace
        ratios.append(ratio)
        worst = max(worst, abs(ratio - expected) / expected)
    tol = cfg["tol"] if cfg["tol"] is not None else 1e-10
    return worst <= tol, {"expected_ratio": float(expected), "ratio": ratios[0],
                          "max_relative_error": worst, "tol": tol}


def _check_resolution(cfg):
    samples = cfg["samples"]
    resid = resolution_residual(cfg["n"], cfg["m"], samples, cfg["seed"], cfg["workers"])
    tol = cfg["tol"] if cfg["tol"] is not None else 0.05 * math.sqrt(1e5 / samples)
    return resid <= tol, {"residual": resid, "samples": samples, "tol": tol}


def _check_berezin_lieb(cfg):
    n, m, k = cfg["n"], cfg["m"], cfg["k"]
    f = parse_fspec(cfg["f"])
    space = enumerate_basis(n, m)
    rows, ok = [], True
    samples = min(cfg["samples"], 20_000)
    for t in range(cfg["trials"]):
        g = random_density(space, stream(cfg["seed"], "berezin-lieb", t))
        bl = berezin_lieb_gap(g, k, f, samples, cfg["seed"] + t, cfg["workers"])
        ok &= bl.holds()
        rows.append({"lhs": bl.lhs, "rhs": bl.rhs.mean, "rhs_stderr": bl.rhs.stderr})
    worst = max(r["lhs"] - r["rhs"] - 3 * r["rhs_stderr"] for r in rows)
    return ok, {"f": f.label, "samples": samples, "worst_excess": worst, "trials": rows}


def _check_irreducible(cfg):
    d = commutant_dimension(enumerate_basis(cfg["n"], cfg["m"]))
    return d == 1, {"commutant_dimension": d}


def _check_defect(cfg):
    n, m = cfg["n"], cfg["m"]
    if m < 1:
        raise UsageError("defect check needs m >= 1")
    space = enumerate_basis(n, m)
    coh = [coherence_defect(coherent_vector(space, sample_haar_state(n, stream(cfg["seed"], "defect:u", t))))
           for t in range(cfg["trials"])]
    rnd = [coherence_defect(random_state(space, stream(cfg["seed"], "defect:psi", t)))
           for t in range(cfg["trials"])]
    ok = max(coh) <= 1e-10 and (m == 1 and max(rnd) <= 1e-10 or m > 1 and min(rnd) > 1e-6)
    return ok, {"max_coherent_defect": max(coh), "min_random_defect": min(rnd),
                "max_random_defect": max(rnd)}


def cmd_verify(cfg):
    check = cfg["check"]
    if check not in CHECKS:
        raise UsageError(f"unknown or missing check {check!r}; choose from {', '.join(CHECKS)}")
    runner = globals()["_check_" + check.replace("-", "_")]
    ok, result = runner(cfg)
    result = {"check": check, "passed": bool(ok), **result}
    row = {k: v for k, v in result.items() if not isinstance(v, (list, dict))}
    return ("pass" if ok else "fail"), result, [row]


def cmd_entropy(cfg):
    n, m = cfg["n"], cfg["m"]
    f = parse_fspec(cfg["f"])
    rho = make_state(cfg["state"], n, m, cfg["seed"])
    est = wehrl_entropy(rho, f, cfg["method"], cfg["samples"], cfg["seed"], cfg["workers"])
    ref = coherent_wehrl_closed_form(n, m, f)
    result = {"f": f.label, "state": cfg["state"], "method": cfg["method"],
              "exact": est.samples == 0, "value": est.mean, "stderr": est.stderr,
              "samples": est.samples, "coherent_value": ref, "gap": est.mean - ref}
    ok = result["gap"] >= -3 * est.stderr - 1e-12
    return ("pass" if ok else "fail"), result, [result]


def _scan_ks(cfg) -> list[int]:
    if cfg["ks"]:
        try:
            return [int(v) for v in str(cfg["ks"]).split(",") if v.strip()]
        except ValueError as exc:
            raise UsageError(f"bad --ks {cfg['ks']!r}") from exc
    ks, k = [0], 1
    while k <= cfg["k_max"]:
        ks.append(k)
        k *= 2
    return ks


def cmd_limit_scan(cfg):
    n, m = cfg["n"], cfg["m"]
    f = parse_fspec(cfg["f"])
    limit = coherent_wehrl_closed_form(n, m, f)
    rows, skipped, prev = [], [], None
    for k in _scan_ks(cfg):
        try:
            finite = semiclassical_trace(n, m, k, f)
        except (OverflowError, ValueError) as exc:
            log.warning("k=%d skipped: %s", k, exc)
            skipped.append(k)
            continue
        gap = finite - limit
        shrinking = prev is None or abs(gap) <= abs(prev)
        rows.append({"k": k, "finite_trace": finite, "limit_value": limit, "gap": gap,
                     "shrinking": shrinking})
        prev = gap
    result = {"f": f.label, "limit_value": limit, "rows": rows, "skipped": skipped,
              "monotone": all(r["shrinking"] for r in rows)}
    return "ok", result, rows


COMMANDS = {"spectrum": cmd_spectrum, "majorize": cmd_majorize, "verify": cmd_verify,
            "entropy": cmd_entropy, "limit-scan": cmd_limit_scan}


def _to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    fields = list(rows[0]) if rows else ["empty"]
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n", extrasaction="ignore")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
    return buf.getvalue()


def _emit(text: str, output: Optional[str]):
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def run(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        status, result, rows = COMMANDS[args.command](cfg)
    except (UsageError, ValueError, KeyError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ResourceLimitError, OverflowError, MemoryError) as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    report = {"command": args.command, "version": __version__, "status": status,
              "config": cfg, "result": result}
    if cfg["format"] == "csv":
        _emit(_to_csv(rows), cfg["output"])
    else:
        _emit(json.dumps(report, indent=2, default=_jsonable) + "\n", cfg["output"])
    return EXIT_FAIL if status == "fail" else EXIT_OK


def _jsonable(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
