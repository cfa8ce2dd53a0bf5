"""Metric definition files.

A small sectioned key/value format, UTF-8 with LF or CRLF line endings::

    # generalized Kropina metric on a flat plane
    [metric]
    dimension = 2
    coords = u, v          # optional display names
    m = 2
    a11 = 1
    a22 = 1                # off-diagonal entries default to 0

    [oneform]
    b1 = 1.2
    b2 = 1.6

    [domain]
    x1 = -1, 1
    x2 = -1, 1

    [options]
    eps_beta = 1e-6
    s_window = 0.05, 0.95
    tol_residual = 1e-6
    tol_k = 1e-4
    samples = 200
    riemannian = false     # true: analyse F = alpha alone, [oneform] optional

Expressions use the variables ``x1 .. xn`` whatever the display names are.
"""
from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import expr as _expr
from .errors import ParseError, ValidationError
from .kropina import M_EXCLUDED_TOL, KropinaMetric
from .riemann import MetricField, OneFormField, RiemannianSpace

SECTIONS = ("metric", "oneform", "domain", "options")


class MetricFileError(ValidationError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class Options:
    eps_beta: float = 1e-6
    s_window: tuple[float, float] = (0.05, 0.95)
    tol_residual: float = 1e-6
    tol_k: float = 1e-4
    samples: int = 200
    riemannian: bool = False


@dataclass(frozen=True)
class MetricFile:
    dimension: int
    a: tuple[str, ...]              # upper triangle, row-major
    b: tuple[str, ...]
    m: float | None
    domain: tuple[tuple[float, float], ...]
    coords: tuple[str, ...] = ()
    options: Options = field(default_factory=Options)

    def entry(self, i: int, j: int) -> str:
        if i > j:
            i, j = j, i
        n = self.dimension
        return self.a[i * n - i * (i - 1) // 2 + (j - i)]

    def metric_field(self) -> MetricField:
        n = self.dimension
        return MetricField(n, tuple(_expr.parse(s, n) for s in self.a))

    def oneform_field(self) -> OneFormField:
        return OneFormField(tuple(_expr.parse(s, self.dimension) for s in self.b))

    def space(self):
        """The analysed space: a Kropina metric, or the Riemannian baseline."""
        if self.options.riemannian:
            return RiemannianSpace(self.metric_field())
        return KropinaMetric(self.metric_field(), self.oneform_field(), self.m,
                             eps_beta=self.options.eps_beta)


def _floats(text: str, count: int, key: str, line: int) -> tuple[float, ...]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != count:
        raise MetricFileError(f"{key} needs {count} comma-separated numbers", line)
    try:
        values = tuple(float(p) for p in parts)
    except ValueError:
        raise MetricFileError(f"{key} must be numeric, got {text!r}", line) from None
    if not all(math.isfinite(v) for v in values):
        raise MetricFileError(f"{key} must be finite", line)
    return values


def _bool(text: str, key: str, line: int) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise MetricFileError(f"{key} must be true or false", line)


def _strip_comment(raw: str) -> str:
    return raw.split("#", 1)[0].strip()


def loads(text: str) -> MetricFile:
    """Parse and validate the text of a metric file."""
    entries: dict[str, dict[str, tuple[str, int]]] = {s: {} for s in SECTIONS}
    section = None
    for lineno, raw in enumerate(text.replace("\r\n", "\n").split("\n"), start=1):
        line = _strip_comment(raw)
        if not line:
            continue
        m = re.fullmatch(r"\[\s*([A-Za-z_]+)\s*\]", line)
        if m:
            section = m.group(1).lower()
            if section not in SECTIONS:
                raise MetricFileError(f"unknown section [{section}]", lineno)
            continue
        if "=" not in line:
            raise MetricFileError(f"expected 'key = value', got {line!r}", lineno)
        if section is None:
            raise MetricFileError("entry outside of any section", lineno)
        key, value = (p.strip() for p in line.split("=", 1))
        key = key.lower()
        if not value:
            raise MetricFileError(f"empty value for {key}", lineno)
        if key in entries[section]:
            raise MetricFileError(f"duplicate key {key} in [{section}]", lineno)
        entries[section][key] = (value, lineno)

    metric = entries["metric"]
    if "dimension" not in metric:
        raise MetricFileError("[metric] must define dimension")
    dim_text, dim_line = metric.pop("dimension")
    try:
        n = int(dim_text)
    except ValueError:
        raise MetricFileError(f"dimension must be an integer, got {dim_text!r}", dim_line) from None
    if not 2 <= n <= 9:
        raise MetricFileError("dimension must be between 2 and 9", dim_line)

    coords: tuple[str, ...] = ()
    if "coords" in metric:
        c_text, c_line = metric.pop("coords")
        coords = tuple(p.strip() for p in c_text.split(","))
        if len(coords) != n or not all(coords):
            raise MetricFileError(f"coords must list {n} names", c_line)

    opts = Options()
    updates = {}
    for key, (value, lineno) in entries["options"].items():
        if key in ("eps_beta", "tol_residual", "tol_k"):
            v = _floats(value, 1, key, lineno)[0]
            if v <= 0:
                raise MetricFileError(f"{key} must be positive", lineno)
            updates[key] = v
        elif key == "s_window":
            lo, hi = _floats(value, 2, key, lineno)
            if not 0 <= lo < hi <= 1:
                raise MetricFileError("s_window must satisfy 0 <= lo < hi <= 1", lineno)
            updates[key] = (lo, hi)
        elif key == "samples":
            try:
                updates[key] = int(value)
            except ValueError:
                raise MetricFileError("samples must be an integer", lineno) from None
            if updates[key] < 1:
                raise MetricFileError("samples must be positive", lineno)
        elif key == "riemannian":
            updates[key] = _bool(value, key, lineno)
        else:
            raise MetricFileError(f"unknown option {key}", lineno)
    opts = replace(opts, **updates)

    m_value = None
    if "m" in metric:
        m_text, m_line = metric.pop("m")
        m_value = _floats(m_text, 1, "m", m_line)[0]
        if abs(m_value) < M_EXCLUDED_TOL or abs(m_value + 1.0) < M_EXCLUDED_TOL:
            raise MetricFileError("m must not be 0 or -1", m_line)
    elif not opts.riemannian:
        raise MetricFileError("[metric] must define m (or set riemannian = true)")

    def check_expr(value: str, lineno: int) -> str:
        try:
            _expr.parse(value, n)
        except ParseError as exc:
            raise MetricFileError(str(exc), lineno) from None
        return value

    cells: dict[tuple[int, int], str] = {}
    for key, (value, lineno) in metric.items():
        km = re.fullmatch(r"a([1-9])([1-9])", key)
        if km is None:
            raise MetricFileError(f"unknown key {key} in [metric]", lineno)
        i, j = sorted((int(km.group(1)) - 1, int(km.group(2)) - 1))
        if j >= n:
            raise MetricFileError(f"{key} is outside dimension {n}", lineno)
        if (i, j) in cells:
            raise MetricFileError(f"{key} duplicates its symmetric partner", lineno)
        cells[i, j] = check_expr(value, lineno)
    upper = []
    for i in range(n):
        for j in range(i, n):
            if (i, j) not in cells and i == j:
                raise MetricFileError(f"missing diagonal entry a{i + 1}{i + 1}")
            upper.append(cells.get((i, j), "0"))

    b_cells: dict[int, str] = {}
    for key, (value, lineno) in entries["oneform"].items():
        bm = re.fullmatch(r"b([1-9])", key)
        if bm is None or int(bm.group(1)) > n:
            raise MetricFileError(f"unknown key {key} in [oneform]", lineno)
        b_cells[int(bm.group(1)) - 1] = check_expr(value, lineno)
    if b_cells or not opts.riemannian:
        missing = [f"b{i + 1}" for i in range(n) if i not in b_cells]
        if missing:
            raise MetricFileError(f"[oneform] is missing {', '.join(missing)}")
    b = tuple(b_cells[i] for i in range(n)) if b_cells else ()

    box: dict[int, tuple[float, float]] = {}
    for key, (value, lineno) in entries["domain"].items():
        dm = re.fullmatch(r"x([1-9])", key)
        if dm is None or int(dm.group(1)) > n:
            raise MetricFileError(f"unknown key {key} in [domain]", lineno)
        lo, hi = _floats(value, 2, key, lineno)
        if not lo < hi:
            raise MetricFileError(f"{key}: lower bound must be below upper bound", lineno)
        box[int(dm.group(1)) - 1] = (lo, hi)
    missing = [f"x{i + 1}" for i in range(n) if i not in box]
    if missing:
        raise MetricFileError(f"[domain] is missing {', '.join(missing)}")

    return MetricFile(n, tuple(upper), b, m_value, tuple(box[i] for i in range(n)),
                      coords, opts)


def load(path) -> MetricFile:
    return loads(Path(path).read_bytes().decode("utf-8"))


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def dumps(mf: MetricFile) -> str:
    """Canonical text; ``loads(dumps(mf)) == mf``."""
    n = mf.dimension
    out = ["[metric]", f"dimension = {n}"]
    if mf.coords:
        out.append("coords = " + ", ".join(mf.coords))
    if mf.m is not None:
        out.append(f"m = {mf.m!r}")
    for i in range(n):
        for j in range(i, n):
            out.append(f"a{i + 1}{j + 1} = {mf.entry(i, j)}")
    if mf.b:
        out += ["", "[oneform]"] + [f"b{i + 1} = {v}" for i, v in enumerate(mf.b)]
    out += ["", "[domain]"] + [f"x{i + 1} = {lo!r}, {hi!r}" for i, (lo, hi) in enumerate(mf.domain)]
    o = mf.options
    out += [
        "", "[options]",
        f"eps_beta = {o.eps_beta!r}",
        f"s_window = {o.s_window[0]!r}, {o.s_window[1]!r}",
        f"tol_residual = {o.tol_residual!r}",
        f"tol_k = {o.tol_k!r}",
        f"samples = {o.samples}",
        f"riemannian = {'true' if o.riemannian else 'false'}",
    ]
    return "\n".join(out) + "\n"
