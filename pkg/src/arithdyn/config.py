"""Experiment configs: one YAML/JSON format with a ``kind`` discriminator.

Validation runs before any computation and reports the offending field with
its line in the source file when the text came from disk.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Mapping

import yaml

from .errors import SchemaError

KINDS = ("spectrum", "cone", "orbit", "heights", "survey", "atiyah", "good-eigenspace")
ATIYAH_OPS = ("tensor", "sym", "sym_bundle", "det", "h0", "anticanonical", "iitaka")


@dataclass
class ExperimentConfig:
    kind: str
    payload: dict
    seed: int = 0
    precision: int = 128
    digit_budget: int = 200_000
    out: str = "out"
    lines: dict = field(default_factory=dict, repr=False, compare=False)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("lines")
        return d

    def dump(self, with_out: bool = True) -> str:
        d = self.to_dict()
        if not with_out:
            d.pop("out")
        return yaml.safe_dump(d, sort_keys=True)


def _line_map(node, prefix: str = "", out: dict | None = None) -> dict:
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            key = f"{prefix}.{k.value}" if prefix else str(k.value)
            out[key] = k.start_mark.line + 1
            _line_map(v, key, out)
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            key = f"{prefix}[{i}]"
            out[key] = v.start_mark.line + 1
            _line_map(v, key, out)
    return out


def parse_config(text: str) -> ExperimentConfig:
    try:
        data = yaml.safe_load(text)
        lines = _line_map(yaml.compose(text))
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise SchemaError(f"unparsable config: {exc}", line=mark.line + 1 if mark else None) from exc
    if not isinstance(data, Mapping):
        raise SchemaError("config must be a mapping")
    return validate(dict(data), lines)


def load_config(path: str | Path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


class _Checker:
    def __init__(self, lines: Mapping[str, int]):
        self.lines = lines

    def fail(self, msg: str, path: str):
        raise SchemaError(msg, field=path, line=self.lines.get(path))

    def int_(self, v, path, lo=None):
        if isinstance(v, bool) or not isinstance(v, int):
            self.fail("expected an integer", path)
        if lo is not None and v < lo:
            self.fail(f"must be >= {lo}", path)
        return v

    def rational(self, v, path):
        if isinstance(v, bool):
            self.fail("expected a rational", path)
        try:
            return Fraction(str(v))
        except (ValueError, ZeroDivisionError):
            self.fail("expected a rational such as 3 or 2/5", path)

    def int_list(self, v, path, length=None):
        if not isinstance(v, list):
            self.fail("expected a list of integers", path)
        for i, x in enumerate(v):
            self.int_(x, f"{path}[{i}]")
        if length is not None and len(v) != length:
            self.fail(f"expected {length} entries", path)
        return v

    def matrix(self, v, path, square=True):
        if not isinstance(v, list) or not v:
            self.fail("expected a nonempty list of rows", path)
        for i, row in enumerate(v):
            self.int_list(row, f"{path}[{i}]", len(v[0]))
        if square and len(v) != len(v[0]):
            self.fail("matrix must be square", path)
        return v

    def require(self, d: Mapping, key: str, path: str):
        if key not in d:
            self.fail(f"missing required field '{key}'", path or key)
        return d[key]

    def mapping(self, v, path):
        if not isinstance(v, Mapping):
            self.fail("expected a mapping", path)
        return v

    def choice(self, v, options, path):
        if v not in options:
            self.fail(f"expected one of {list(options)}", path)
        return v

    def system(self, v, path):
        self.mapping(v, path)
        if "powers" in v:
            self.int_list(v["powers"], f"{path}.powers")
            return
        k = self.int_(self.require(v, "k", f"{path}.k"), f"{path}.k", 1)
        if "perm" in v:
            self.int_list(v["perm"], f"{path}.perm", k)
        comps = self.require(v, "components", f"{path}.components")
        if not isinstance(comps, list) or len(comps) != k:
            self.fail(f"expected {k} components", f"{path}.components")
        for i, c in enumerate(comps):
            p = f"{path}.components[{i}]"
            self.mapping(c, p)
            F = self.int_list(self.require(c, "F_coeffs", f"{p}.F_coeffs"), f"{p}.F_coeffs")
            G = self.int_list(self.require(c, "G_coeffs", f"{p}.G_coeffs"), f"{p}.G_coeffs")
            if len(F) != len(G):
                self.fail("F_coeffs and G_coeffs must have equal length", p)
            if "degree" in c and self.int_(c["degree"], f"{p}.degree") != len(F) - 1:
                self.fail("degree disagrees with the coefficient count", f"{p}.degree")

    def point(self, v, path):
        if isinstance(v, str):
            return
        if not isinstance(v, list):
            self.fail("expected a point string or a list of [x, y] pairs", path)
        for i, c in enumerate(v):
            self.int_list(c, f"{path}[{i}]", 2)
            if c == [0, 0]:
                self.fail("[0:0] is not a point", f"{path}[{i}]")

    def bundle(self, v, path):
        self.mapping(v, path)
        names = set()
        for i, g in enumerate(v.get("generators", [])):
            p = f"{path}.generators[{i}]"
            self.mapping(g, p)
            names.add(str(self.require(g, "name", f"{p}.name")))
            self.int_(g.get("order", 0), f"{p}.order", 0)
        terms = self.require(v, "terms", f"{path}.terms")
        if not isinstance(terms, list) or not terms:
            self.fail("expected a nonempty list of terms", f"{path}.terms")
        for i, t in enumerate(terms):
            p = f"{path}.terms[{i}]"
            self.mapping(t, p)
            self.int_(self.require(t, "r", f"{p}.r"), f"{p}.r", 1)
            for name, e in (t.get("twist") or {}).items():
                if str(name) not in names:
                    self.fail(f"unknown generator '{name}'", f"{p}.twist")
                self.int_(e, f"{p}.twist.{name}")


def _spectrum(c: _Checker, p: dict):
    c.matrix(c.require(p, "matrix", "payload.matrix"), "payload.matrix")
    if "width_bits" in p:
        c.int_(p["width_bits"], "payload.width_bits", 1)


def _cone(c: _Checker, p: dict):
    M = c.matrix(c.require(p, "matrix", "payload.matrix"), "payload.matrix")
    rays = c.require(p, "rays", "payload.rays")
    c.matrix(rays, "payload.rays", square=False)
    if len(rays[0]) != len(M):
        c.fail("rays and matrix live in different dimensions", "payload.rays")
    if "lambda" in p:
        c.rational(p["lambda"], "payload.lambda")


def _orbit(c: _Checker, p: dict):
    c.system(c.require(p, "system", "payload.system"), "payload.system")
    c.point(c.require(p, "point", "payload.point"), "payload.point")
    c.int_(c.require(p, "n", "payload.n"), "payload.n", 0)
    if "log_heights_only" in p and not isinstance(p["log_heights_only"], bool):
        c.fail("expected true or false", "payload.log_heights_only")


def _heights(c: _Checker, p: dict):
    if "synthetic" in p:
        s = c.mapping(p["synthetic"], "payload.synthetic")
        lam = c.rational(c.require(s, "lambda", "payload.synthetic.lambda"), "payload.synthetic.lambda")
        if abs(lam) <= 1:
            c.fail("|lambda| must exceed 1", "payload.synthetic.lambda")
        planted = c.require(s, "planted", "payload.synthetic.planted")
        if not isinstance(planted, list) or not planted:
            c.fail("expected a nonempty list of planted heights", "payload.synthetic.planted")
        for i, x in enumerate(planted):
            if isinstance(x, bool) or not isinstance(x, (int, float)):
                c.fail("expected a number", f"payload.synthetic.planted[{i}]")
        if "noise" in s and (isinstance(s["noise"], bool) or not isinstance(s["noise"], (int, float))):
            c.fail("expected a number", "payload.synthetic.noise")
        if "n" in s:
            c.int_(s["n"], "payload.synthetic.n", 3)
        return
    c.system(c.require(p, "system", "payload.system"), "payload.system")
    pts = c.require(p, "points", "payload.points")
    if not isinstance(pts, list) or not pts:
        c.fail("expected a nonempty list of points", "payload.points")
    for i, x in enumerate(pts):
        c.point(x, f"payload.points[{i}]")
    if "H" in p:
        c.int_list(p["H"], "payload.H")
    if "n_max" in p:
        c.int_(p["n_max"], "payload.n_max", 1)
    if "tau" in p and not isinstance(p["tau"], (int, float)):
        c.fail("expected a number", "payload.tau")


def _survey(c: _Checker, p: dict):
    c.system(c.require(p, "system", "payload.system"), "payload.system")
    c.int_(c.require(p, "bound", "payload.bound"), "payload.bound", 1)
    if "H" in p:
        c.int_list(p["H"], "payload.H")
    if "norm" in p:
        c.choice(p["norm"], ("sum", "max"), "payload.norm")
    if "n_max" in p:
        c.int_(p["n_max"], "payload.n_max", 1)


def _atiyah(c: _Checker, p: dict):
    op = c.choice(c.require(p, "op", "payload.op"), ATIYAH_OPS, "payload.op")
    if op == "tensor":
        c.int_(c.require(p, "r", "payload.r"), "payload.r", 1)
        c.int_(c.require(p, "s", "payload.s"), "payload.s", 1)
    elif op == "sym":
        c.int_(c.require(p, "d", "payload.d"), "payload.d", 0)
        c.int_(c.require(p, "r", "payload.r"), "payload.r", 1)
    else:
        c.bundle(c.require(p, "bundle", "payload.bundle"), "payload.bundle")
        if op == "sym_bundle":
            c.int_(c.require(p, "d", "payload.d"), "payload.d", 0)
        if op == "anticanonical" and "m" in p:
            c.int_(p["m"], "payload.m", 1)
        if op == "iitaka" and "m_max" in p:
            m = c.int_(p["m_max"], "payload.m_max", 2)
            if m > 8:
                c.fail("m_max is capped at 8", "payload.m_max")


def _good(c: _Checker, p: dict):
    if "system" in p:
        c.system(p["system"], "payload.system")
        return
    M = c.matrix(c.require(p, "matrix", "payload.matrix"), "payload.matrix")
    rays = c.require(p, "rays", "payload.rays")
    c.matrix(rays, "payload.rays", square=False)
    if len(rays[0]) != len(M):
        c.fail("rays and matrix live in different dimensions", "payload.rays")
    kappa = c.require(p, "kappa", "payload.kappa")
    if kappa == "model":
        return
    c.mapping(kappa, "payload.kappa")
    c.bundle(c.require(kappa, "bundle", "payload.kappa.bundle"), "payload.kappa.bundle")


PAYLOAD_SCHEMAS: dict[str, Callable[[_Checker, dict], None]] = {
    "spectrum": _spectrum,
    "cone": _cone,
    "orbit": _orbit,
    "heights": _heights,
    "survey": _survey,
    "atiyah": _atiyah,
    "good-eigenspace": _good,
}


def validate(data: dict, lines: Mapping[str, int] | None = None) -> ExperimentConfig:
    c = _Checker(lines or {})
    known = {"kind", "payload", "seed", "precision", "digit_budget", "out"}
    for key in data:
        if key not in known:
            c.fail(f"unknown top-level field '{key}'", key)
    kind = c.choice(c.require(data, "kind", "kind"), KINDS, "kind")
    payload = c.mapping(c.require(data, "payload", "payload"), "payload")
    seed = c.int_(data.get("seed", 0), "seed", 0)
    if seed >= 2**64:
        c.fail("seed must fit in 64 bits", "seed")
    precision = c.int_(data.get("precision", 128), "precision", 53)
    budget = c.int_(data.get("digit_budget", 200_000), "digit_budget", 1)
    out = data.get("out", "out")
    if not isinstance(out, str):
        c.fail("expected a path", "out")
    PAYLOAD_SCHEMAS[kind](c, payload)
    return ExperimentConfig(kind, dict(payload), seed, precision, budget, out, dict(lines or {}))

