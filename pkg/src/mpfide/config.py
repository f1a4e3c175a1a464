"""Problem files.

An INI-style file (read with :mod:`configparser`); see ``docs/config_format.md``
for the full reference.  Matrices are written row-major with ``,`` between
entries and ``;`` between rows (both are plain separators; only the count
matters).  Coefficients are expressions (:mod:`mpfide.expr`); boundary data
are numbers.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .expr import ExprDomainError, ExprSyntaxError, evaluate, parse
from .model import (
    DegenerateKernel,
    GeneralKernel,
    MultipointCondition,
    Problem,
    SolverOptions,
)


class ConfigError(ValueError):
    """Unreadable or inconsistent problem file."""

    def __init__(self, message: str, location: str = "", offset: int | None = None,
                 expression: str | None = None):
        self.location = location
        self.offset = offset
        self.expression = expression
        self.reason = message
        where = f"{location}: " if location else ""
        super().__init__(where + message)

    def as_dict(self) -> dict:
        out = {"message": self.reason, "location": self.location}
        if self.offset is not None:
            out["offset"] = self.offset
            out["expression"] = self.expression
        return out


@dataclass(frozen=True)
class LoadedConfig:
    problem: Problem
    options: SolverOptions
    kind: str  # "degenerate" | "general"


_SEP = re.compile(r"[,;]")


def _split(text: str) -> list[str]:
    return [part.strip() for part in _SEP.split(text) if part.strip()]


def _compile(text: str, count: int, location: str, allowed: tuple[str, ...]):
    """Parse ``count`` expressions and return ``fn(t, tau) -> flat array``."""
    parts = _split(text)
    if len(parts) != count:
        raise ConfigError(f"expected {count} entries, found {len(parts)}", location)
    exprs = []
    for i, src in enumerate(parts):
        loc = f"{location}[{i}]"
        try:
            e = parse(src)
        except ExprSyntaxError as exc:
            raise ConfigError(exc.reason, loc, exc.offset, src) from None
        for var in ("t", "tau"):
            if var not in allowed and e.mentions(var):
                raise ConfigError(f"variable {var!r} not allowed here", loc, None, src)
        exprs.append(e)
    if not any(e.mentions(v) for e in exprs for v in allowed):
        try:
            frozen = np.array([evaluate(e, 0.0, 0.0) for e in exprs])
        except ExprDomainError as exc:
            raise ConfigError(exc.reason, location, None, exc.subtree.to_source()) from None
        return lambda t, tau=0.0: frozen.copy()
    return lambda t, tau=0.0: np.array([evaluate(e, t, tau) for e in exprs])


def _matrix_fn(text, n, location, var="t"):
    fn = _compile(text, n * n, location, (var,))
    if var == "t":
        return lambda t: fn(t).reshape(n, n)
    return lambda tau: fn(0.0, tau).reshape(n, n)


def _numbers(text: str, count: int, location: str) -> np.ndarray:
    parts = _split(text)
    if len(parts) != count:
        raise ConfigError(f"expected {count} numbers, found {len(parts)}", location)
    try:
        return np.array([float(p) for p in parts])
    except ValueError as exc:
        raise ConfigError(f"not a number: {exc}", location) from None


def _get(cp, section, key, location=None):
    if not cp.has_section(section):
        raise ConfigError(f"missing section [{section}]")
    if not cp.has_option(section, key):
        raise ConfigError(f"missing key {key!r}", location or f"[{section}]")
    return cp.get(section, key)


def _typed(cp, key, conv, default):
    if not cp.has_option("solver", key):
        return default
    raw = cp.get("solver", key)
    try:
        return conv(raw)
    except ValueError:
        raise ConfigError(f"bad value {raw!r}", f"[solver] {key}") from None


def _kernel_terms(cp, prefix: str) -> list[tuple[int, str]]:
    pat = re.compile(rf"{prefix}\.(\d+)$")
    terms = []
    for key in cp.options("kernel"):
        m = pat.match(key)
        if m:
            terms.append((int(m.group(1)), key))
    return sorted(terms)


def loads(text: str) -> LoadedConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    cp.optionxform = str  # case-sensitive keys
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed file: {exc}") from None

    try:
        n = int(_get(cp, "problem", "n"))
        T = float(_get(cp, "problem", "T"))
    except ValueError as exc:
        raise ConfigError(f"bad header value: {exc}", "[problem]") from None
    if n < 1:
        raise ConfigError("n must be positive", "[problem] n")

    a_fn = _matrix_fn(_get(cp, "A", "entries"), n, "A")
    f_flat = _compile(_get(cp, "f", "entries"), n, "f", ("t",))
    f_fn = lambda t: f_flat(t)  # noqa: E731

    kind = _get(cp, "kernel", "kind").strip()
    if kind == "degenerate":
        phis = _kernel_terms(cp, "phi")
        psis = _kernel_terms(cp, "psi")
        if not phis or [j for j, _ in phis] != [j for j, _ in psis]:
            raise ConfigError("phi.j and psi.j must be given for the same indices j", "[kernel]")
        kernel = DegenerateKernel(
            tuple(_matrix_fn(cp.get("kernel", key), n, f"kernel.{key}") for _, key in phis),
            tuple(_matrix_fn(cp.get("kernel", key), n, f"kernel.{key}", var="tau") for _, key in psis),
        )
    elif kind == "general":
        K_flat = _compile(_get(cp, "kernel", "K"), n * n, "kernel.K", ("t", "tau"))
        kernel = GeneralKernel(lambda t, tau: K_flat(t, tau).reshape(n, n))
    else:
        raise ConfigError(f"unknown kernel kind {kind!r}", "[kernel] kind")

    d = _numbers(_get(cp, "condition", "d"), n, "condition.d")
    points = []
    for section in cp.sections():
        if section.startswith("point."):
            try:
                t = float(_get(cp, section, "t"))
            except ValueError:
                raise ConfigError("t is not a number", f"[{section}]") from None
            B = _numbers(_get(cp, section, "B"), n * n, f"{section}.B").reshape(n, n)
            points.append((t, B))
    if not points:
        raise ConfigError("no [point.*] sections", "[condition]")
    condition = MultipointCondition(tuple(t for t, _ in points), tuple(B for _, B in points), d)

    steps = _typed(cp, "steps", int, None)
    try:
        options = SolverOptions(
            h_max=_typed(cp, "h_max", float, None),
            steps=steps,
            max_refinements=_typed(cp, "max_refinements", int, 6),
            degree=_typed(cp, "degree", int, 6),
            max_iter=_typed(cp, "max_iter", int, 50),
            tol=_typed(cp, "tol", float, 1e-10),
            certify=_typed(cp, "certify", _boolean, True),
        )
    except ValueError as exc:
        raise ConfigError(str(exc), "[solver]") from None
    return LoadedConfig(Problem(n, T, a_fn, kernel, f_fn, condition), options, kind)


def _boolean(raw: str) -> bool:
    v = raw.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(raw)


def load(path) -> LoadedConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return loads(text)
