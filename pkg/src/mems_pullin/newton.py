"""Whole-space problem in integral form: the Newtonian potential.

The solution of ``-Delta u = lam f g(u)`` on R^d (d >= 3) with ``f``
supported in a bounded set is ``u = lam * K[f g(u)]``, where ``K`` convolves
with the fundamental solution ``eps_d``. The equation closes on the support,
so every quantity lives on the support's cells.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .domain import DomainSpec, GridFunction, sphere_area
from .errors import EigenDiverged, InvalidArgument, SingularityError
from .mems import (
    IterationConfig,
    IterationOutcome,
    Nonlinearity,
    PullInConfig,
    PullInResult,
    _picard_loop,
    bracket_pull_in,
)
from .spectral import EigenConfig

#: int over [-1/2, 1/2]^3 of 1/|x| dx
CUBE_INVERSE_DISTANCE = 3.0 * math.log((math.sqrt(3) + 1) / (math.sqrt(3) - 1)) - math.pi / 2.0


def fundamental_solution(d: int, r):
    """``eps_d(r) = 1 / ((d - 2) sigma_d r^(d-2))``, the Newtonian kernel on R^d."""
    if int(d) != d or d < 3:
        raise InvalidArgument("the Newtonian kernel needs d >= 3")
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise SingularityError("eps_d is singular at r = 0")
    out = 1.0 / ((d - 2) * sphere_area(d) * r ** (d - 2))
    return float(out) if out.ndim == 0 else out


def cell_self_integral(d: int, h: float) -> float:
    """Integral of ``eps_d`` over a cell of side ``h`` centred at the singularity.

    Exact for d = 3 (closed form of the cube integral of 1/|x|). For d >= 4
    the cube is replaced by the ball of equal volume, whose integral is
    ``rho^2 / (2 (d - 2))``.
    """
    if d == 3:
        return CUBE_INVERSE_DISTANCE * h**2 / (4.0 * math.pi)
    rho = (d * h**d / sphere_area(d)) ** (1.0 / d)
    return rho**2 / (2.0 * (d - 2))


class KernelQuadrature:
    """Discrete Newtonian potential on the cells of a support domain.

    ``K[i, j] = eps_d(|x_i - x_j|) * vol_j`` for ``i != j`` (midpoint rule),
    with the exact self-cell integral on the diagonal. Mask supports use
    the cell grid directly; ball supports use radial shells, where the
    potential of a thin shell of radius ``s`` at radius ``r`` is
    ``eps_d(max(r, s))`` times its mass.

    The weights ``W = K V^-1`` are symmetric and positive. Supports with at
    most ``dense_max_cells`` cells store ``K``; larger ones evaluate it block
    by block on every application.
    """

    def __init__(self, domain: DomainSpec, dense_max_cells: int = 4000, block: int = 256):
        if domain.kind not in ("mask", "ball"):
            raise InvalidArgument("the Newtonian potential needs a mask or ball support")
        if domain.dim < 3:
            raise InvalidArgument("the Newtonian potential needs d >= 3")
        self.support_domain = domain
        self.dim = domain.dim
        self.n = domain.n_cells
        self.vol = np.asarray(domain.cell_volumes, dtype=float)
        self.block = int(block)
        self.dense = self.n <= dense_max_cells
        if domain.kind == "mask":
            self._idx = np.argwhere(domain.bitmap).astype(np.int64)
            span = np.asarray(domain.bitmap.shape) - 1
            r2max = int(np.sum(span**2))
            table = np.empty(r2max + 1)
            table[0] = 0.0
            table[1:] = fundamental_solution(self.dim, domain.spacing * np.sqrt(np.arange(1, r2max + 1)))
            self._table = table
            self.cell_self_weight = cell_self_integral(self.dim, domain.spacing)
            self._diag_w = np.full(self.n, self.cell_self_weight / domain.spacing**self.dim)
        else:
            self._eps = self._radial_eps(domain.radii)
            self._diag_w = self._shell_self_weights(domain)
            self.cell_self_weight = self._diag_w * self.vol
        self._matrix = self._assemble() if self.dense else None

    # ------------------------------------------------------------ geometry
    def _radial_eps(self, r):
        out = np.empty_like(r, dtype=float)
        pos = r > 0
        out[pos] = fundamental_solution(self.dim, r[pos])
        out[~pos] = np.inf
        return out

    def _shell_self_weights(self, ball: DomainSpec) -> np.ndarray:
        d, h, r = ball.dim, ball.spacing, ball.radii
        a = np.clip(r - h / 2, 0.0, ball.radius)
        b = np.clip(r + h / 2, 0.0, ball.radius)
        inner = np.zeros_like(r)
        pos = r > 0
        inner[pos] = self._eps[pos] * sphere_area(d) / d * (r[pos] ** d - a[pos] ** d)
        outer = (b**2 - r**2) / (2.0 * (d - 2))
        return (inner + outer) / self.vol

    def weights(self, rows) -> np.ndarray:
        """Symmetric weights ``W[rows, :]``, so that ``K = W diag(vol)``."""
        rows = np.asarray(rows)
        if self.support_domain.kind == "mask":
            diff = self._idx[rows, None, :] - self._idx[None, :, :]
            w = self._table[np.einsum("ijk,ijk->ij", diff, diff)]
        else:
            w = self._eps[np.maximum.outer(rows, np.arange(self.n))]
        w[np.arange(rows.size), rows] = self._diag_w[rows]
        return w

    def _assemble(self) -> np.ndarray:
        out = np.empty((self.n, self.n))
        for start in range(0, self.n, self.block):
            rows = np.arange(start, min(start + self.block, self.n))
            out[rows] = self.weights(rows)
            out[rows] *= self.vol
        return out

    def matrix(self) -> np.ndarray:
        """Dense ``K`` (built on demand for matrix-free supports)."""
        if self._matrix is not None:
            return self._matrix
        return self._assemble()

    def symmetric_matrix(self) -> np.ndarray:
        """``V^1/2 W V^1/2``, similar to ``K`` and symmetric."""
        s = np.sqrt(self.vol)
        return s[:, None] * (self.matrix() / self.vol) * s[None, :]

    # ----------------------------------------------------------- evaluation
    def apply(self, density: np.ndarray) -> np.ndarray:
        density = np.asarray(density, dtype=float)
        if self._matrix is not None:
            return self._matrix @ density
        mass = self.vol * density
        out = np.empty(self.n)
        for start in range(0, self.n, self.block):
            rows = np.arange(start, min(start + self.block, self.n))
            out[rows] = self.weights(rows) @ mass
        return out

    def describe(self) -> dict:
        return {
            "dim": self.dim,
            "support": self.support_domain.describe(),
            "mode": "dense" if self.dense else "matrix_free",
        }


def newton_potential(quad: KernelQuadrature, density: GridFunction) -> GridFunction:
    """Discrete ``int eps_d(x - y) density(y) dy`` at every support cell."""
    if density.domain.n_cells != quad.n or density.domain.kind != quad.support_domain.kind:
        raise InvalidArgument("density does not live on the quadrature's support")
    return GridFunction(quad.support_domain, quad.apply(density.values))


def potential_at(quad: KernelQuadrature, density: GridFunction, points) -> np.ndarray:
    """Midpoint-rule potential at arbitrary points off the support cells (mask only)."""
    dom = quad.support_domain
    if dom.kind != "mask":
        raise InvalidArgument("off-grid evaluation is implemented for mask supports")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    dist = np.linalg.norm(pts[:, None, :] - dom.coords[None, :, :], axis=2)
    return fundamental_solution(quad.dim, dist) @ (quad.vol * density.values)


# --------------------------------------------------------- Picard, pull-in


def _check_density(quad: KernelQuadrature, f: GridFunction):
    if f.domain.n_cells != quad.n:
        raise InvalidArgument("f does not live on the quadrature's support")
    if np.any(f.values < 0):
        raise InvalidArgument("f must be nonnegative")


def newton_minimal_solution(
    quad: KernelQuadrature,
    lam: float,
    f: GridFunction,
    g: Optional[Nonlinearity] = None,
    config: Optional[IterationConfig] = None,
    start: Optional[GridFunction] = None,
) -> IterationOutcome:
    """Picard iteration ``u_m = lam K[f g(u_{m-1})]`` from ``u_0 = 0``."""
    g = g or Nonlinearity.power(2)
    config = config or IterationConfig()
    _check_density(quad, f)
    if lam < 0:
        raise InvalidArgument("lam must be nonnegative")
    fv = np.asarray(f.values, dtype=float)

    def step(u, _tol):
        return lam * quad.apply(fv * g(u))

    return _picard_loop(step, quad.n, quad.support_domain, config, start, lambda u: u)


def newton_pull_in(
    quad: KernelQuadrature,
    f: GridFunction,
    g: Optional[Nonlinearity] = None,
    config: Optional[PullInConfig] = None,
) -> PullInResult:
    """Bracket the pull-in voltage of the integral equation."""
    g = g or Nonlinearity.power(2)
    config = config or PullInConfig()
    _check_density(quad, f)
    if not np.all(f.values > 0):
        raise InvalidArgument("pull-in needs f > 0 on the support")

    def probe(lam, start):
        return newton_minimal_solution(quad, lam, f, g, config.iteration, start=start)

    lo, hi, u_lo, steps, trace = bracket_pull_in(probe, config)
    echo = {"kernel": quad.describe(), "nonlinearity": g.describe(), "pull_in": config.describe()}
    return PullInResult(lo, hi, u_lo, steps, trace, echo)


# --------------------------------------------------------------- spectrum


@dataclass
class EigenResult:
    mu1: float
    phi1: GridFunction
    residual: float
    iterations: int

    def to_dict(self) -> dict:
        return {"mu1": self.mu1, "residual": self.residual, "iterations": self.iterations}


def newton_mu1(quad: KernelQuadrature, config: Optional[EigenConfig] = None) -> EigenResult:
    """First eigenpair of ``phi = mu K phi`` by power iteration.

    Runs on the symmetric form ``S = V^1/2 W V^1/2`` from the all-ones
    vector, so every iterate stays positive. Stops once the Rayleigh
    quotient changes by at most ``eigen_tol`` relative and
    ``max|phi - mu K phi| <= eigen_tol`` with ``max(phi) = 1``.
    """
    config = config or EigenConfig()
    sq = np.sqrt(quad.vol)

    def apply_s(v):
        return sq * quad.apply(v / sq)

    v = sq.copy()
    v /= np.linalg.norm(v)
    rho_prev = np.inf
    res = np.inf
    for it in range(1, config.max_iter + 1):
        w = apply_s(v)
        rho = float(v @ w)
        if not rho > 0:
            raise EigenDiverged("kernel is not positive definite on the iterate", res, it)
        phi = v / sq
        res = float(np.max(np.abs(phi - w / sq / rho)) / np.max(phi))
        if abs(rho - rho_prev) <= config.eigen_tol * rho and res <= config.eigen_tol:
            break
        rho_prev = rho
        v = w / np.linalg.norm(w)
    else:
        raise EigenDiverged(f"power iteration did not settle in {config.max_iter} steps", res, config.max_iter)
    phi = v / sq
    phi = phi / phi.max()
    return EigenResult(1.0 / rho, GridFunction(quad.support_domain, phi), res, it)


def pullin_upper_bound(mu1: float, inf_f: float) -> float:
    """``4 mu_1 / (27 inf f)``: no solution exists above this voltage."""
    if not (mu1 > 0 and inf_f > 0):
        raise InvalidArgument("mu1 and inf f must be positive")
    return 4.0 * mu1 / (27.0 * inf_f)


def pullin_upper_bound_weighted(eig: EigenResult, f: GridFunction) -> float:
    """Smaller of the eigenfunction-weighted bound and the ``4/27`` bound.

    The weighted estimate reduces to ``mu_1 * int(phi)/int(phi) = mu_1``
    without knowledge of the solution, so the result is
    ``min(mu_1, 4 mu_1 / (27 inf f))``.
    """
    if f.domain.n_cells != eig.phi1.domain.n_cells:
        raise InvalidArgument("f does not match the eigenfunction's support")
    inf_f = float(np.min(f.values))
    vol = eig.phi1.domain.cell_volumes
    mass = float(np.sum(eig.phi1.values * vol))
    return min(eig.mu1 * mass / mass, pullin_upper_bound(eig.mu1, inf_f))
