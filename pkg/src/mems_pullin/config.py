"""Run configuration: ``key = value`` files, flag overrides and spec strings.

Spec strings name domains, operators, nonlinearities and permittivity
profiles compactly, e.g. ``square:1.0:64``, ``plaplace:3``, ``power:2`` or
``bump:1.0:0.5``. See :func:`parse_domain` and friends for the grammar.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .domain import (
    DomainSpec,
    GridFunction,
    box_mask,
    cube_mask,
    ellipse_mask,
    load_bitmap,
    lshape_mask,
    make_ball,
    make_interval,
    square_mask,
)
from .errors import ConfigError, PullInError
from .mems import IterationConfig, Nonlinearity, PullInConfig
from .operators import EllipticOperator, SolverConfig
from .spectral import EigenConfig

SUBCOMMANDS = (
    "pullin",
    "compare",
    "talenti",
    "rearrange",
    "eigen",
    "fk-check",
    "newton-pullin",
    "newton-eigen",
    "newton-bound",
    "sweep",
)


@dataclass
class RunConfig:
    """Every knob a run can use, with its documented default.

    The whole resolved record is echoed into each result file.
    """

    subcommand: str = "pullin"
    domain: str = "interval:1.0:128"
    op: str = "laplace"
    g: str = "power:2"
    f: str = "const:1"
    p: float = 2.0
    # linear / nonlinear solver
    tol: float = 1e-8
    max_iter: int = 10000
    regularization_eps: float = 1e-10
    relaxation: Optional[float] = None
    # Picard and bisection
    picard_tol: float = 1e-8
    touchdown_margin: float = 1e-3
    max_picard: int = 2000
    lambda_seed: float = 0.1
    growth: float = 2.0
    bisection_rtol: float = 1e-3
    # comparisons
    ordering_slack: float = 0.05
    grid_slack: float = 5.0
    fk_slack: float = 0.02
    n_radial: Optional[int] = None
    # eigen / kernel
    eigen_tol: float = 1e-8
    eigen_max_iter: int = 10000
    dense_max_cells: int = 4000
    # randomized suites and sweeps
    seed: int = 0
    random: int = 0
    random_h: float = 1 / 64
    jobs: int = 1
    base: str = "pullin"
    sweep: Optional[str] = None
    values: Optional[str] = None
    # outputs
    output: Optional[str] = None
    csv: Optional[str] = None

    def validate(self) -> "RunConfig":
        positive = ("tol", "regularization_eps", "picard_tol", "bisection_rtol", "eigen_tol", "lambda_seed", "random_h")
        for key in positive:
            if not getattr(self, key) > 0:
                raise ConfigError(f"{key} must be positive", key)
        for key in ("max_iter", "max_picard", "eigen_max_iter", "jobs", "dense_max_cells"):
            if getattr(self, key) < 1:
                raise ConfigError(f"{key} must be >= 1", key)
        for key in ("ordering_slack", "grid_slack", "fk_slack", "random", "seed"):
            if getattr(self, key) < 0:
                raise ConfigError(f"{key} must be >= 0", key)
        if not 0 < self.touchdown_margin < 1:
            raise ConfigError("touchdown_margin must lie in (0, 1)", "touchdown_margin")
        if not self.growth > 1:
            raise ConfigError("growth must exceed 1", "growth")
        if not self.bisection_rtol < 1:
            raise ConfigError("bisection_rtol must be below 1", "bisection_rtol")
        if self.relaxation is not None and not 0 < self.relaxation <= 1:
            raise ConfigError("relaxation must lie in (0, 1]", "relaxation")
        if not self.p > 1:
            raise ConfigError("p must exceed 1", "p")
        if self.n_radial is not None and self.n_radial < 2:
            raise ConfigError("n_radial must be >= 2", "n_radial")
        if self.subcommand not in SUBCOMMANDS:
            raise ConfigError(f"unknown subcommand {self.subcommand!r}", "subcommand")
        if self.base not in SUBCOMMANDS or self.base == "sweep":
            raise ConfigError(f"sweep base must be a non-sweep subcommand, got {self.base!r}", "base")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    # ---------------------------------------------------------- builders
    def solver_config(self) -> SolverConfig:
        return SolverConfig(self.tol, self.max_iter, self.regularization_eps, self.relaxation)

    def pullin_config(self) -> PullInConfig:
        it = IterationConfig(self.picard_tol, self.touchdown_margin, self.max_picard, self.solver_config())
        return PullInConfig(self.lambda_seed, self.growth, self.bisection_rtol, iteration=it)

    def eigen_config(self) -> EigenConfig:
        return EigenConfig(self.eigen_tol, self.eigen_max_iter)


_FIELDS = {f.name: f for f in fields(RunConfig)}


def _coerce(key: str, raw):
    if raw is None:
        return None
    kind = _FIELDS[key].type
    text = str(raw).strip()
    if "Optional" in kind and text.lower() in ("", "none", "null"):
        return None
    try:
        if "int" in kind:
            return int(text)
        if "float" in kind:
            value = float(text)
            if not math.isfinite(value):
                raise ValueError
            return value
    except ValueError:
        raise ConfigError(f"bad value {text!r} for {key}", key) from None
    return text


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment. Unknown keys are errors."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}", "config") from None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'", line)
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _FIELDS:
            raise ConfigError(f"unknown config key {key!r}", key)
        out[key] = _coerce(key, value)
    return out


def build_config(file_values: Optional[dict] = None, overrides: Optional[dict] = None) -> RunConfig:
    """Defaults, then file values, then flag overrides (flags win)."""
    values = {}
    for source in (file_values or {}, overrides or {}):
        for key, raw in source.items():
            if key not in _FIELDS:
                raise ConfigError(f"unknown config key {key!r}", key)
            values[key] = _coerce(key, raw)
    return RunConfig(**values).validate()


# ------------------------------------------------------------ spec strings


def _numbers(parts, key, kinds):
    if len(parts) != len(kinds):
        raise ConfigError(f"{key} spec needs {len(kinds)} parameters", key)
    try:
        return [kind(x) for kind, x in zip(kinds, parts)]
    except ValueError:
        raise ConfigError(f"non-numeric parameter in {key} spec", key) from None


def parse_domain(spec: str) -> DomainSpec:
    """Domain from a spec string.

    ``interval:L:n``          (0, L) with n interior nodes
    ``square:side:n``         square mask, spacing side/n
    ``rect:a:b:n``            a x b rectangle, spacing min(a, b)/n
    ``disk:R:n``              disk mask, spacing R/n
    ``ellipse:a:b:n``         semi-axes a, b, spacing min(a, b)/n
    ``lshape:side:n``         square minus a quadrant, spacing side/n
    ``cube:side:n``           3D cube mask, spacing side/n
    ``ball:d:R:n``            radial d-ball with n radial nodes
    ``file:path``             plain-text bitmap
    """
    kind, _, rest = spec.partition(":")
    parts = rest.split(":") if rest else []
    try:
        if kind == "file":
            return load_bitmap(rest)
        if kind == "interval":
            L, n = _numbers(parts, "domain", (float, int))
            return make_interval(L, n)
        if kind == "square":
            s, n = _numbers(parts, "domain", (float, int))
            return square_mask(s, s / n)
        if kind == "rect":
            a, b, n = _numbers(parts, "domain", (float, float, int))
            return box_mask([a, b], min(a, b) / n)
        if kind == "disk":
            r, n = _numbers(parts, "domain", (float, int))
            return ellipse_mask(r, r, r / n)
        if kind == "ellipse":
            a, b, n = _numbers(parts, "domain", (float, float, int))
            return ellipse_mask(a, b, min(a, b) / n)
        if kind == "lshape":
            s, n = _numbers(parts, "domain", (float, int))
            return lshape_mask(s, s / n)
        if kind == "cube":
            s, n = _numbers(parts, "domain", (float, int))
            return cube_mask(s, s / n)
        if kind == "ball":
            d, r, n = _numbers(parts, "domain", (int, float, int))
            return make_ball(d, r, n)
    except ConfigError:
        raise
    except (PullInError, OSError, ValueError) as exc:
        raise ConfigError(f"invalid domain {spec!r}: {exc}", "domain") from None
    raise ConfigError(f"unknown domain kind {kind!r}", "domain")


def parse_operator(spec: str, domain: Optional[DomainSpec] = None) -> EllipticOperator:
    """``laplace``, ``plaplace:p``, ``elliptic:a11,a12,a22``, ``elliptic:iso:c``
    or ``elliptic:file:path`` (one ``a11,a12,a22`` row per cell)."""
    kind, _, rest = spec.partition(":")
    try:
        if kind == "laplace" and not rest:
            return EllipticOperator.laplace()
        if kind == "plaplace":
            (p,) = _numbers([rest], "op", (float,))
            return EllipticOperator.plaplace(p)
        if kind == "elliptic":
            if rest.startswith("iso:"):
                (c,) = _numbers([rest[4:]], "op", (float,))
                return EllipticOperator.elliptic(c)
            if rest.startswith("file:"):
                rows = np.loadtxt(rest[5:], delimiter=",", ndmin=2)
                if rows.shape[1] != 3:
                    raise ConfigError("coefficient file needs a11,a12,a22 columns", "op")
                coeff = np.stack([rows[:, [0, 1]], rows[:, [1, 2]]], axis=1)
                return EllipticOperator.elliptic(coeff)
            a11, a12, a22 = _numbers(rest.split(","), "op", (float, float, float))
            return EllipticOperator.elliptic(np.array([[a11, a12], [a12, a22]]))
    except ConfigError:
        raise
    except (PullInError, OSError, ValueError) as exc:
        raise ConfigError(f"invalid operator {spec!r}: {exc}", "op") from None
    raise ConfigError(f"unknown operator {spec!r}", "op")


def parse_nonlinearity(spec: str) -> Nonlinearity:
    """``power:m`` or ``casimir:sigma``."""
    kind, _, rest = spec.partition(":")
    try:
        if kind == "power":
            (m,) = _numbers([rest], "g", (int,))
            return Nonlinearity.power(m)
        if kind == "casimir":
            (s,) = _numbers([rest], "g", (float,))
            return Nonlinearity.casimir(s)
    except ConfigError:
        raise
    except PullInError as exc:
        raise ConfigError(f"invalid nonlinearity {spec!r}: {exc}", "g") from None
    raise ConfigError(f"unknown nonlinearity {spec!r}", "g")


def parse_profile(spec: str, domain: DomainSpec) -> GridFunction:
    """Permittivity profile on ``domain``.

    ``const:c``      constant c
    ``bump:a:s``     1 + a exp(-|x|^2 / s^2)
    ``tilt:a``       1 + a (x_1 - min x_1) / (max x_1 - min x_1), off-center and positive
    ``file:path``    one value per cell, whitespace separated
    """
    kind, _, rest = spec.partition(":")
    parts = rest.split(":") if rest else []
    c = domain.coords
    c = c[:, None] if c.ndim == 1 else c
    if kind == "const":
        (v,) = _numbers(parts, "f", (float,))
        vals = np.full(domain.n_cells, v)
    elif kind == "bump":
        a, s = _numbers(parts, "f", (float, float))
        if not s > 0:
            raise ConfigError("bump width must be positive", "f")
        vals = 1.0 + a * np.exp(-np.sum(c**2, axis=1) / s**2)
    elif kind == "tilt":
        (a,) = _numbers(parts, "f", (float,))
        x = c[:, 0]
        span = float(x.max() - x.min()) or 1.0
        vals = 1.0 + a * (x - x.min()) / span
    elif kind == "file":
        try:
            vals = np.loadtxt(rest, ndmin=1).ravel()
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read profile {rest}: {exc}", "f") from None
        if vals.size != domain.n_cells:
            raise ConfigError(f"profile has {vals.size} values for {domain.n_cells} cells", "f")
    else:
        raise ConfigError(f"unknown profile {spec!r}", "f")
    if np.any(vals < 0):
        raise ConfigError("profile must be nonnegative", "f")
    return GridFunction(domain, vals)
