"""Discretized domains and grid functions.

Three kinds of domain are supported:

``interval``
    ``(0, L)`` with ``n`` interior nodes at spacing ``L / (n + 1)``; the two
    end nodes carry the Dirichlet value 0 and are not stored.
``mask``
    A boolean bitmap of uniform Cartesian cells in 1, 2 or 3 dimensions.
    Unknowns live at cell centers and the Dirichlet value 0 is imposed on the
    faces between a true cell and a false (or out-of-bitmap) one.
``ball``
    An origin-centered ball stored radially: nodes ``r_k = k * h`` for
    ``k = 0 .. N`` with ``r_N = R``. The last node is the boundary node. Node
    ``k`` owns the shell ``[r_k - h/2, r_k + h/2]`` clipped to ``[0, R]`` so the
    node volumes sum to the ball's measure exactly.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import ndimage

from .errors import InvalidArgument

KINDS = ("interval", "mask", "ball")


def sphere_area(d: int) -> float:
    """Surface area of the unit sphere in R^d, 2 pi^(d/2) / Gamma(d/2)."""
    if d < 1:
        raise InvalidArgument(f"dimension must be >= 1, got {d}")
    return 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)


def ball_volume(d: int, radius: float) -> float:
    return sphere_area(d) * radius**d / d


def ball_radius(d: int, volume: float) -> float:
    """Radius of the d-ball with the given volume."""
    return (d * volume / sphere_area(d)) ** (1.0 / d)


@dataclass(frozen=True, eq=False)
class DomainSpec:
    """An immutable discretized domain. Build with the ``make_*`` helpers."""

    kind: str
    dim: int
    spacing: float
    n_cells: int
    length: Optional[float] = None
    radius: Optional[float] = None
    bitmap: Optional[np.ndarray] = field(default=None, repr=False)
    origin: Optional[tuple] = None
    connected: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidArgument(f"unknown domain kind {self.kind!r}")
        if not self.spacing > 0:
            raise InvalidArgument("spacing must be positive")
        if self.bitmap is not None:
            self.bitmap.setflags(write=False)

    @property
    def measure(self) -> float:
        return measure(self)

    @cached_property
    def cell_volumes(self) -> np.ndarray:
        if self.kind == "ball":
            r = self.radii
            h = self.spacing
            lo = np.clip(r - h / 2, 0.0, self.radius)
            hi = np.clip(r + h / 2, 0.0, self.radius)
            vol = sphere_area(self.dim) / self.dim * (hi**self.dim - lo**self.dim)
        else:
            vol = np.full(self.n_cells, self.spacing**self.dim)
        vol.setflags(write=False)
        return vol

    @cached_property
    def radii(self) -> np.ndarray:
        """Radial node positions ``r_0 = 0 .. r_N = R`` (ball only)."""
        if self.kind != "ball":
            raise InvalidArgument("radii are only defined for ball domains")
        r = np.arange(self.n_cells) * self.spacing
        r[-1] = self.radius
        r.setflags(write=False)
        return r

    @cached_property
    def coords(self) -> np.ndarray:
        """Cell centers, shape ``(n_cells, dim)``; radii for a ball."""
        if self.kind == "ball":
            return self.radii
        if self.kind == "interval":
            x = (np.arange(self.n_cells) + 1.0) * self.spacing
            out = x[:, None]
        else:
            idx = np.argwhere(self.bitmap)
            out = np.asarray(self.origin) + (idx + 0.5) * self.spacing
        out.setflags(write=False)
        return out

    @cached_property
    def cell_index(self) -> np.ndarray:
        """Bitmap-shaped array of cell numbers, -1 outside (mask only)."""
        if self.kind != "mask":
            raise InvalidArgument("cell_index is only defined for mask domains")
        idx = np.full(self.bitmap.shape, -1, dtype=np.int64)
        idx[self.bitmap] = np.arange(self.n_cells)
        idx.setflags(write=False)
        return idx

    @property
    def extent(self) -> tuple[np.ndarray, np.ndarray]:
        """Bounding box ``(lower, upper)``."""
        if self.kind == "interval":
            return np.array([0.0]), np.array([self.length])
        if self.kind == "ball":
            return np.full(self.dim, -self.radius), np.full(self.dim, self.radius)
        lo = np.asarray(self.origin, dtype=float)
        return lo, lo + np.asarray(self.bitmap.shape) * self.spacing

    def describe(self) -> dict:
        """JSON-friendly summary used in reports."""
        out = {
            "kind": self.kind,
            "dim": self.dim,
            "spacing": self.spacing,
            "n_cells": self.n_cells,
            "measure": self.measure,
        }
        if self.kind == "interval":
            out["length"] = self.length
        elif self.kind == "ball":
            out["radius"] = self.radius
        else:
            out["shape"] = list(self.bitmap.shape)
            out["connected"] = self.connected
        return out


def make_interval(length: float, n: int) -> DomainSpec:
    """``(0, length)`` with ``n`` interior nodes.

    The measure is reported as ``length``; the ``n`` stored nodes own
    ``n * spacing`` of it and the two half-cells at the ends belong to the
    implicit boundary nodes.
    """
    if not length > 0:
        raise InvalidArgument(f"interval length must be positive, got {length}")
    if int(n) != n or n < 2:
        raise InvalidArgument(f"interval needs at least 2 interior nodes, got {n}")
    n = int(n)
    return DomainSpec("interval", 1, length / (n + 1), n, length=float(length))


def make_mask(dim: int, bitmap, spacing: float, origin: Optional[Sequence[float]] = None) -> DomainSpec:
    """Cell-mask domain from a boolean array.

    ``origin`` is the lower corner of cell ``[0, ..., 0]``; by default the
    bitmap is centered on the coordinate origin. A mask with more than one
    face-connected component is accepted with a warning and
    ``connected=False``.
    """
    if dim not in (1, 2, 3):
        raise InvalidArgument(f"mask dimension must be 1, 2 or 3, got {dim}")
    bitmap = np.array(bitmap, dtype=bool)
    if bitmap.ndim != dim:
        raise InvalidArgument(f"bitmap has {bitmap.ndim} axes, expected {dim}")
    if bitmap.size == 0 or not bitmap.any():
        raise InvalidArgument("mask must contain at least one cell")
    if not spacing > 0:
        raise InvalidArgument("spacing must be positive")
    if origin is None:
        origin = tuple(-0.5 * s * spacing for s in bitmap.shape)
    origin = tuple(float(o) for o in origin)
    if len(origin) != dim:
        raise InvalidArgument("origin length must equal dim")
    _, n_comp = ndimage.label(bitmap)
    connected = n_comp == 1
    if not connected:
        warnings.warn(f"mask has {n_comp} disconnected components", stacklevel=2)
    return DomainSpec(
        "mask", dim, float(spacing), int(bitmap.sum()), bitmap=bitmap, origin=origin, connected=connected
    )


def make_ball(dim: int, radius: float, n_radial: int) -> DomainSpec:
    """Radial ball with ``n_radial`` nodes from ``r = 0`` to ``r = radius``."""
    if dim < 1:
        raise InvalidArgument("dimension must be >= 1")
    if not radius > 0:
        raise InvalidArgument("radius must be positive")
    if int(n_radial) != n_radial or n_radial < 2:
        raise InvalidArgument("a ball needs at least 2 radial nodes")
    n_radial = int(n_radial)
    return DomainSpec("ball", int(dim), radius / (n_radial - 1), n_radial, radius=float(radius))


def measure(domain: DomainSpec) -> float:
    """Lebesgue measure of the domain (cell counting for masks)."""
    if domain.kind == "interval":
        return domain.length
    if domain.kind == "ball":
        return ball_volume(domain.dim, domain.radius)
    return domain.n_cells * domain.spacing**domain.dim


def default_radial_nodes(domain: DomainSpec, refine: float = 4.0) -> int:
    """Radial node count resolving ``domain`` about ``refine`` times finer."""
    if domain.kind == "ball":
        return domain.n_cells
    radius = ball_radius(domain.dim, measure(domain))
    return max(8, int(math.ceil(refine * radius / domain.spacing)) + 1)


def symmetrize_domain(domain: DomainSpec, n_radial: Optional[int] = None) -> DomainSpec:
    """The origin-centered ball of equal measure (Schwarz symmetrization of the set)."""
    m = measure(domain)
    if not m > 0:
        raise InvalidArgument("domain has zero measure")
    if n_radial is None:
        n_radial = default_radial_nodes(domain)
    radius = domain.radius if domain.kind == "ball" else ball_radius(domain.dim, m)
    return make_ball(domain.dim, radius, n_radial)


# ---------------------------------------------------------------- built-ins


def _centered_grid(half_widths, h):
    counts = [max(1, int(round(2 * w / h))) for w in half_widths]
    origin = tuple(-0.5 * c * h for c in counts)
    axes = [origin[k] + (np.arange(c) + 0.5) * h for k, c in enumerate(counts)]
    return np.meshgrid(*axes, indexing="ij"), origin


def box_mask(sides: Sequence[float], h: float) -> DomainSpec:
    """Axis-aligned box centered at the origin."""
    grids, origin = _centered_grid([s / 2 for s in sides], h)
    return make_mask(len(sides), np.ones(grids[0].shape, dtype=bool), h, origin)


def square_mask(side: float, h: float) -> DomainSpec:
    return box_mask([side, side], h)


def cube_mask(side: float, h: float) -> DomainSpec:
    return box_mask([side, side, side], h)


def ellipse_mask(a: float, b: float, h: float) -> DomainSpec:
    """Cells whose centers lie inside x^2/a^2 + y^2/b^2 < 1."""
    (x, y), origin = _centered_grid([a, b], h)
    return make_mask(2, (x / a) ** 2 + (y / b) ** 2 < 1.0, h, origin)


def disk_mask(radius: float, h: float) -> DomainSpec:
    return ellipse_mask(radius, radius, h)


def ball_mask(radius: float, h: float, dim: int = 3) -> DomainSpec:
    """Rasterized ball (cell centers inside the sphere)."""
    grids, origin = _centered_grid([radius] * dim, h)
    r2 = sum(g**2 for g in grids)
    return make_mask(dim, r2 < radius**2, h, origin)


def lshape_mask(side: float, h: float) -> DomainSpec:
    """Square of the given side with its upper-right quadrant removed."""
    (x, y), origin = _centered_grid([side / 2, side / 2], h)
    return make_mask(2, ~((x > 0) & (y > 0)), h, origin)


# ---------------------------------------------------------------- file I/O


def load_bitmap(path) -> DomainSpec:
    """Read a mask from the plain-text bitmap format.

    First line: ``dim nx [ny [nz]] spacing``. The rest holds ``nx*ny*nz``
    characters ``0``/``1`` in row-major order (last axis fastest); line
    breaks and spaces are ignored.
    """
    text = Path(path).read_text().split("\n", 1)
    header = text[0].split()
    if not header:
        raise InvalidArgument(f"{path}: empty bitmap header")
    try:
        dim = int(header[0])
        shape = tuple(int(v) for v in header[1 : 1 + dim])
        spacing = float(header[1 + dim])
    except (ValueError, IndexError) as exc:
        raise InvalidArgument(f"{path}: malformed header {text[0]!r}") from exc
    if len(header) != dim + 2:
        raise InvalidArgument(f"{path}: header must be 'dim nx [ny [nz]] spacing'")
    body = "".join(text[1].split()) if len(text) > 1 else ""
    if set(body) - {"0", "1"}:
        raise InvalidArgument(f"{path}: bitmap body may only contain 0 and 1")
    if len(body) != int(np.prod(shape)):
        raise InvalidArgument(f"{path}: expected {int(np.prod(shape))} cells, found {len(body)}")
    bits = np.frombuffer(body.encode(), dtype=np.uint8) == ord("1")
    return make_mask(dim, bits.reshape(shape), spacing)


def save_bitmap(domain: DomainSpec, path) -> None:
    if domain.kind != "mask":
        raise InvalidArgument("only mask domains can be saved as bitmaps")
    shape = domain.bitmap.shape
    rows = domain.bitmap.reshape(-1, shape[-1]).astype(np.uint8)
    lines = [f"{domain.dim} " + " ".join(str(s) for s in shape) + f" {domain.spacing!r}"]
    lines += ["".join("1" if v else "0" for v in row) for row in rows]
    Path(path).write_text("\n".join(lines) + "\n")


# ----------------------------------------------------------- grid functions


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Real values on the cells (or radial nodes) of a domain."""

    domain: DomainSpec
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float).reshape(-1)
        if values.shape[0] != self.domain.n_cells:
            raise InvalidArgument(
                f"grid function has {values.shape[0]} values, domain has {self.domain.n_cells} cells"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(cls, domain: DomainSpec, value: float) -> "GridFunction":
        return cls(domain, np.full(domain.n_cells, float(value)))

    @classmethod
    def from_callable(cls, domain: DomainSpec, fn: Callable) -> "GridFunction":
        """Evaluate ``fn`` on cell centers.

        For masks and intervals ``fn`` receives one array per coordinate axis;
        for balls it receives the radii.
        """
        if domain.kind == "ball":
            vals = fn(domain.radii)
        else:
            vals = fn(*domain.coords.T)
        return cls(domain, np.broadcast_to(np.asarray(vals, dtype=float), (domain.n_cells,)))

    def with_values(self, values) -> "GridFunction":
        return GridFunction(self.domain, values)

    def max(self) -> float:
        return float(self.values.max())

    def min(self) -> float:
        return float(self.values.min())

    @property
    def is_nonnegative(self) -> bool:
        return bool(self.values.min() >= 0.0)

    def integral(self) -> float:
        return float(np.dot(self.values, self.domain.cell_volumes))

    def to_csv(self, path) -> None:
        write_grid_csv(path, self)


def write_grid_csv(path, *functions: GridFunction, names: Sequence[str] = ("value",)) -> int:
    """Write one row per cell: ``index,coord...,value...``; returns the row count.

    All functions must live on the same domain.
    """
    if not functions:
        raise InvalidArgument("nothing to write")
    domain = functions[0].domain
    if any(fn.domain is not domain for fn in functions):
        raise InvalidArgument("grid functions live on different domains")
    if len(names) != len(functions):
        names = ["value"] if len(functions) == 1 else [f"value{k}" for k in range(len(functions))]
    if domain.kind == "ball":
        coord_names = ["r"]
        coords = domain.radii[:, None]
    else:
        coord_names = ["x", "y", "z"][: domain.dim]
        coords = domain.coords
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", *coord_names, *names])
        for i in range(domain.n_cells):
            writer.writerow([i, *(repr(float(c)) for c in coords[i]), *(repr(float(fn.values[i])) for fn in functions)])
    return domain.n_cells


def read_grid_csv(path, domain: DomainSpec, column: str = "value") -> GridFunction:
    """Read a column of a CSV with one row per cell, in cell order."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or column not in rows[0]:
        raise InvalidArgument(f"{path}: missing column {column!r}")
    return GridFunction(domain, [float(row[column]) for row in rows])
