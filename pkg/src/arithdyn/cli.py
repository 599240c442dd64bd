"""``workbench`` command line: run one experiment config, write its reports.

Every run writes ``report.json``, ``report.csv`` and ``provenance.txt`` to the
output directory.  Outputs carry no timestamps, so identical configs and
seeds give byte-identical files.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import platform
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import metadata
from pathlib import Path

import mpmath

from . import atiyah as at
from .config import KINDS, ExperimentConfig, load_config
from .cones import (
    DilationVerdict,
    canonicalize,
    dilation_criterion,
    map_cone,
    ray_count_criterion,
    separates_eigenspace,
)
from .dynsys import ModelSystem, OrbitCache, ProjPoint, build_system, iterate, power_map
from .errors import (
    BudgetExceeded,
    IntervalSeparationFailure,
    PreconditionViolated,
    SchemaError,
    ThresholdAmbiguous,
    WorkbenchError,
)
from .exactlin import IntMatrix, ModulusVerdict, rational_spectrum, same_modulus_test
from .goodeigen import Verdict, good_eigenspace_check, model_kappa, projective_bundle_kappa
from .heights import (
    PlantedJordanBlock,
    classify_point,
    jordan_heights,
    survey_small_set,
    vh_eigenclasses,
    weil_height,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_SCHEMA = 2
EXIT_BUDGET = 3
EXIT_INCONCLUSIVE = 4


@dataclass
class RunResult:
    report: dict
    rows: list[list] = field(default_factory=list)
    status: int = EXIT_OK


def _system(spec: dict) -> ModelSystem:
    if "powers" in spec:
        return power_map(*spec["powers"])
    return build_system(spec)


def _point(v) -> ProjPoint:
    if isinstance(v, str):
        return ProjPoint.parse(v)
    return ProjPoint(tuple(tuple(c) for c in v))


def _matrix(rows) -> IntMatrix:
    return IntMatrix(tuple(tuple(r) for r in rows))


def _f(x) -> str:
    return mpmath.nstr(x, 17) if isinstance(x, mpmath.mpf) else repr(float(x))


def run_spectrum(cfg: ExperimentConfig) -> RunResult:
    M = _matrix(cfg.payload["matrix"])
    width = Fraction(1, 2 ** cfg.payload.get("width_bits", 40))
    try:
        spec = rational_spectrum(M, width)
        verdict = same_modulus_test(M)
    except IntervalSeparationFailure as exc:
        return RunResult({"error": str(exc)}, status=EXIT_INCONCLUSIVE)
    rows = [["value", "algebraic_multiplicity", "geometric_multiplicity", "jordan_block_sizes", "modulus_lo", "modulus_hi"]]
    for e in spec.entries:
        lo, hi = e.modulus()
        d = e.to_dict()
        value = d["value"] if isinstance(d["value"], str) else json.dumps(d["value"], sort_keys=True)
        blocks = " ".join(map(str, e.jordan_block_sizes)) if e.jordan_block_sizes else ""
        rows.append([value, e.algebraic_multiplicity, e.geometric_multiplicity, blocks, str(lo), str(hi)])
    report = {"spectrum": spec.to_dict(), "same_modulus": verdict.value}
    status = EXIT_INCONCLUSIVE if verdict is ModulusVerdict.INCONCLUSIVE else EXIT_OK
    return RunResult(report, rows, status)


def run_cone(cfg: ExperimentConfig) -> RunResult:
    M = _matrix(cfg.payload["matrix"])
    C = canonicalize(cfg.payload["rays"])
    report: dict = {"rays": C.to_list(), "proper": C.is_proper}
    status = EXIT_OK
    mc = map_cone(M, C)
    report["map"] = mc.to_dict()
    if mc.invariant and C.is_proper:
        dil = dilation_criterion(M, C)
        report["dilation"] = dil.to_dict()
        if dil.verdict is DilationVerdict.INCONCLUSIVE:
            status = EXIT_INCONCLUSIVE
    elif mc.verdict is DilationVerdict.INCONCLUSIVE:
        status = EXIT_INCONCLUSIVE
    if C.is_proper and len(mc.eigen_rays) == len(C.rays):
        try:
            report["ray_count"] = ray_count_criterion(M, C).to_dict()
        except PreconditionViolated as exc:
            report["ray_count"] = {"skipped": str(exc)}
        if "lambda" in cfg.payload:
            sep = separates_eigenspace(M, C, Fraction(str(cfg.payload["lambda"])))
            report["separation"] = {
                "separates": sep.separates,
                "eigen_rays": list(sep.eigen_rays),
                "witness": [list(w) for w in sep.witness] if sep.witness else None,
            }
    eig = dict(mc.eigen_rays)
    rows = [["ray_index", "ray", "image", "eigenvalue"]]
    for i, r in enumerate(C.rays):
        rows.append([i, " ".join(map(str, r)), " ".join(map(str, M @ r)), str(eig[i]) if i in eig else ""])
    return RunResult(report, rows, status)


def run_orbit(cfg: ExperimentConfig, log_only: bool = False) -> RunResult:
    f = _system(cfg.payload["system"])
    P = _point(cfg.payload["point"])
    n = cfg.payload["n"]
    log_only = log_only or cfg.payload.get("log_heights_only", False)
    orbit = iterate(f, P, n, cfg.digit_budget)
    if not log_only and hasattr(sys, "set_int_max_str_digits"):
        # exact decimal coordinates can run to digit_budget digits
        sys.set_int_max_str_digits(max(sys.get_int_max_str_digits(), cfg.digit_budget + 1))
    if log_only:
        header = ["n", *[f"logh_{i + 1}" for i in range(f.k)]]
    else:
        header = ["n", *[c for i in range(f.k) for c in (f"x_{i + 1}", f"y_{i + 1}")]]
    rows = [header]
    with mpmath.workprec(cfg.precision):
        for j, Q in enumerate(orbit.points):
            if log_only:
                rows.append([j, *[_f(weil_height(ProjPoint((c,)), cfg.precision).value) for c in Q.coords]])
            else:
                rows.append([j, *[str(t) for c in Q.coords for t in c]])
    report = {
        "system": f.to_dict(),
        "digest": f.digest,
        "start": str(P),
        "requested": n,
        "computed": len(orbit) - 1,
        "truncated": orbit.truncated,
    }
    return RunResult(report, rows, EXIT_BUDGET if orbit.truncated else EXIT_OK)


def run_heights(cfg: ExperimentConfig, cache: OrbitCache | None = None) -> RunResult:
    p = cfg.payload
    if "synthetic" in p:
        s = p["synthetic"]
        gen = PlantedJordanBlock(
            Fraction(str(s["lambda"])), [mpmath.mpf(x) for x in s["planted"]],
            float(s.get("noise", 0.0)), cfg.seed, cfg.precision,
        )
        jh = jordan_heights(gen.lam, gen.m, gen, s.get("n", 60), cfg.precision)
        rows = [["index", "planted", "recovered", "residual", "law_residual"]]
        for i, hv in enumerate(jh.values):
            rows.append([i, repr(float(s["planted"][i])), _f(hv.value), _f(hv.residual), _f(jh.law_residuals[i])])
        report = {
            "synthetic": {"lambda": str(s["lambda"]), "noise": s.get("noise", 0.0), "seed": cfg.seed},
            "values": [hv.to_dict() for hv in jh.values],
            "law_residuals": [float(x) for x in jh.law_residuals],
        }
        return RunResult(report, rows)
    f = _system(p["system"])
    H = p.get("H", [1] * f.k)
    n_max = p.get("n_max", 15)
    tau = p.get("tau", 1e-8)
    _, classes = vh_eigenclasses(f, H)
    records, status = [], EXIT_OK
    rows = [["point", "class", "eigenvalue", "hhat", "residual", "n_used", "alpha"]]
    for raw in p["points"]:
        P = _point(raw)
        orbit = cache.get(f, P, max(n_max, 30), cfg.digit_budget) if cache else None
        try:
            rec = classify_point(
                f, H, P, tau, n_max, cfg.digit_budget, cfg.precision, orbit=orbit, classes=classes
            )
        except ThresholdAmbiguous as exc:
            rec = exc.record
            status = EXIT_INCONCLUSIVE
        records.append(rec.to_dict())
        for label, hv in rec.block_heights:
            lam, D = label.split(":", 1)
            rows.append([str(P), D, lam, _f(hv.value), _f(hv.residual), hv.n_used, repr(rec.alpha)])
    report = {"system": f.to_dict(), "H": list(H), "tau": tau, "points": records}
    return RunResult(report, rows, status)


def run_survey(cfg: ExperimentConfig, cache: OrbitCache | None = None) -> RunResult:
    p = cfg.payload
    f = _system(p["system"])
    H = p.get("H", [1] * f.k)
    rep = survey_small_set(
        f, H, p["bound"], p.get("tau", 1e-8), p.get("n_max", 12),
        min(cfg.digit_budget, p.get("digit_budget", 20_000)), cfg.precision,
        cache=cache, norm=p.get("norm", "sum"),
    )
    summary = rep.summary()
    status = EXIT_INCONCLUSIVE if rep.ambiguous else EXIT_OK
    return RunResult({"system": f.to_dict(), "bound": p["bound"], "H": list(H), **summary}, rep.csv_rows(), status)


def run_atiyah(cfg: ExperimentConfig) -> RunResult:
    p = cfg.payload
    op = p["op"]
    group = None
    if op == "tensor":
        result = at.atiyah_tensor(p["r"], p["s"])
    elif op == "sym":
        result = at.atiyah_sym(p["d"], p["r"])
    else:
        group, E = at.parse_bundle(p["bundle"])
        if op == "sym_bundle":
            result = at.sym_bundle(E, p["d"])
        elif op == "det":
            L = at.det_bundle(E)
            return RunResult({"op": op, "det": group.format(L)}, [["det"], [group.format(L)]])
        elif op == "h0":
            n = at.h0(E)
            return RunResult({"op": op, "h0": n}, [["h0"], [n]])
        elif op == "anticanonical":
            m = p.get("m", 1)
            n = at.anticanonical_h0(E, m)
            return RunResult({"op": op, "m": m, "h0": n, "model": at.MODEL}, [["m", "h0"], [m, n]])
        else:
            est = at.iitaka_estimate(E, p.get("m_max", 6))
            rows = [["m", "h0"]] + [[m + 1, h] for m, h in enumerate(est.sequence)]
            status = EXIT_INCONCLUSIVE if est.verdict is at.IitakaVerdict.INDETERMINATE else EXIT_OK
            return RunResult({"op": op, **est.to_dict()}, rows, status)
    d = result.to_dict(group)
    rows = [["r", "twist", "multiplicity"]]
    counts: dict = {}
    for r, L in result.terms:
        key = (r, group.format(L) if group else "O")
        counts[key] = counts.get(key, 0) + 1
    rows += [[r, tw, m] for (r, tw), m in counts.items()]
    return RunResult({"op": op, **d}, rows)


def run_good(cfg: ExperimentConfig) -> RunResult:
    p = cfg.payload
    if "system" in p:
        rep = good_eigenspace_check(_system(p["system"]))
    else:
        cone = canonicalize(p["rays"])
        if p["kappa"] == "model":
            rep = good_eigenspace_check(matrix=_matrix(p["matrix"]), cone=cone, kappa=model_kappa)
        else:
            _, E = at.parse_bundle(p["kappa"]["bundle"])
            rep = good_eigenspace_check(matrix=_matrix(p["matrix"]), cone=cone, kappa=projective_bundle_kappa(E))
    d = rep.to_dict()
    rows = [["condition", "holds"]] + [[k, v] for k, v in d["conditions"].items()]
    status = EXIT_INCONCLUSIVE if rep.verdict is Verdict.INCONCLUSIVE else EXIT_OK
    return RunResult(d, rows, status)


def run(cfg: ExperimentConfig, *, log_heights_only: bool = False, cache: OrbitCache | None = None) -> RunResult:
    if cfg.kind == "spectrum":
        return run_spectrum(cfg)
    if cfg.kind == "cone":
        return run_cone(cfg)
    if cfg.kind == "orbit":
        return run_orbit(cfg, log_heights_only)
    if cfg.kind == "heights":
        return run_heights(cfg, cache)
    if cfg.kind == "survey":
        return run_survey(cfg, cache)
    if cfg.kind == "atiyah":
        return run_atiyah(cfg)
    return run_good(cfg)


def _versions() -> dict:
    out = {"python": platform.python_version()}
    for pkg in ("arithdyn", "mpmath", "PyYAML"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = "unknown"
    return out


def write_outputs(cfg: ExperimentConfig, result: RunResult, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    report = {"kind": cfg.kind, "seed": cfg.seed, "precision": cfg.precision, "exit_status": result.status, **result.report}
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True, default=str) + "\n")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerows(result.rows)
    (out / "report.csv").write_text(buf.getvalue())
    lines = ["# config", cfg.dump(with_out=False).rstrip(), "# versions"]
    lines += [f"{k}: {v}" for k, v in sorted(_versions().items())]
    lines += ["# seed", str(cfg.seed), ""]
    (out / "provenance.txt").write_text("\n".join(lines))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="workbench", description="Arithmetic-dynamics experiment runner.")
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        sp = sub.add_parser(kind)
        sp.add_argument("--config", required=True, help="YAML or JSON experiment config")
        sp.add_argument("--out", help="output directory (default: config 'out' or ./out)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--precision", type=int, help="working precision in bits")
        sp.add_argument("--digit-budget", type=int, dest="digit_budget")
        if kind in ("orbit", "heights", "survey"):
            sp.add_argument("--cache", help="JSON-lines orbit cache file")
        if kind == "orbit":
            sp.add_argument("--log-heights-only", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if cfg.kind != args.command:
            raise SchemaError(f"config kind '{cfg.kind}' does not match subcommand '{args.command}'", field="kind", line=cfg.lines.get("kind"))
        for name in ("seed", "precision", "digit_budget", "out"):
            value = getattr(args, name, None)
            if value is not None:
                setattr(cfg, name, value)
        if cfg.seed < 0 or cfg.seed >= 2**64:
            raise SchemaError("seed must be an unsigned 64-bit integer", field="seed")
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    cache = OrbitCache(args.cache) if getattr(args, "cache", None) else None
    try:
        result = run(cfg, log_heights_only=getattr(args, "log_heights_only", False), cache=cache)
    except BudgetExceeded as exc:
        print(f"budget exhausted: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except IntervalSeparationFailure as exc:
        print(f"inconclusive: {exc}", file=sys.stderr)
        return EXIT_INCONCLUSIVE
    except (WorkbenchError, ValueError) as exc:
        print(f"{cfg.kind} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    write_outputs(cfg, result, Path(cfg.out))
    return result.status


if __name__ == "__main__":
    sys.exit(main())
