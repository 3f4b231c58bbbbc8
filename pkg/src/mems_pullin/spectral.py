"""First Dirichlet eigenpair of the Laplacian and the bounds built on it."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse.linalg as spla

from .domain import DomainSpec, GridFunction, symmetrize_domain
from .errors import EigenDiverged, InvalidArgument
from .operators import Stencil


@dataclass(frozen=True)
class EigenConfig:
    """Stopping rule shared by the Dirichlet and Newton-potential eigensolvers.

    Iteration stops once the eigenvalue estimate changes by at most
    ``eigen_tol`` relative and the eigen-residual is below ``eigen_tol``
    (scaled as documented by each solver).
    """

    eigen_tol: float = 1e-8
    max_iter: int = 10000

    def __post_init__(self):
        if not self.eigen_tol > 0:
            raise InvalidArgument("eigen_tol must be positive")
        if self.max_iter < 1:
            raise InvalidArgument("max_iter must be >= 1")

    def describe(self) -> dict:
        return {"eigen_tol": self.eigen_tol, "max_iter": self.max_iter}


@dataclass
class DirichletEigenResult:
    lambda1: float
    phi1: GridFunction
    residual: float
    iterations: int

    def to_dict(self) -> dict:
        return {"lambda1": self.lambda1, "residual": self.residual, "iterations": self.iterations}


def dirichlet_eig1(domain: DomainSpec, config: Optional[EigenConfig] = None) -> DirichletEigenResult:
    """Smallest eigenvalue of the discrete Dirichlet Laplacian by inverse iteration.

    Solves the generalized problem ``L x = lambda V x`` with the symmetric
    stencil matrix ``L`` and the cell volumes ``V``, starting from the
    all-ones vector. ``residual`` is ``max |(-Delta_h) phi - lambda phi|``
    with ``max(phi) = 1``; iteration stops once it is at most
    ``eigen_tol * lambda`` and the eigenvalue has settled to ``eigen_tol``.
    """
    config = config or EigenConfig()
    st = Stencil(domain)
    vol = st.vol
    mat = st.matrix(st.e_geom, st.b_geom)
    lu = spla.splu(mat.tocsc())
    x = np.ones(st.n)
    lam_prev = np.inf
    for it in range(1, config.max_iter + 1):
        y = lu.solve(vol * x)
        lam = float(x @ (vol * x)) / float(x @ (vol * y))
        x = y / np.max(np.abs(y))
        res = float(np.max(np.abs((mat @ x) / vol - lam * x)))
        if abs(lam - lam_prev) <= config.eigen_tol * lam and res <= config.eigen_tol * lam:
            break
        lam_prev = lam
    else:
        raise EigenDiverged(f"inverse iteration did not settle in {config.max_iter} steps", res, config.max_iter)
    # Rayleigh quotient of the final vector
    lam = float(x @ (mat @ x)) / float(x @ (vol * x))
    res = float(np.max(np.abs((mat @ x) / vol - lam * x)))
    values = np.append(x, 0.0) if domain.kind == "ball" else x
    return DirichletEigenResult(lam, GridFunction(domain, values), res, it)


def dirichlet_pullin_bound(eig: DirichletEigenResult, f: GridFunction) -> float:
    """``(4 lambda_1 / 3) * int(phi_1) / int(phi_1 f)``, an upper bound for the pull-in voltage."""
    phi = eig.phi1
    if f.domain.n_cells != phi.domain.n_cells:
        raise InvalidArgument("f does not match the eigenfunction's domain")
    vol = phi.domain.cell_volumes
    num = float(np.sum(phi.values * vol))
    den = float(np.sum(phi.values * f.values * vol))
    if not den > 0:
        raise InvalidArgument("f vanishes on the support of the eigenfunction")
    return 4.0 * eig.lambda1 / 3.0 * num / den


@dataclass
class FaberKrahnReport:
    lambda_domain: float
    lambda_ball: float
    ordered: bool
    slack: float

    def to_dict(self) -> dict:
        return {
            "lambda_domain": self.lambda_domain,
            "lambda_ball": self.lambda_ball,
            "ordered": self.ordered,
            "slack": self.slack,
        }


def faber_krahn_check(
    domain: DomainSpec,
    slack: float = 0.02,
    n_radial: Optional[int] = None,
    config: Optional[EigenConfig] = None,
) -> FaberKrahnReport:
    """Compare the first eigenvalue of ``domain`` with that of the equal-measure ball."""
    lam_d = dirichlet_eig1(domain, config).lambda1
    ball = symmetrize_domain(domain, n_radial)
    lam_b = dirichlet_eig1(ball, config).lambda1
    return FaberKrahnReport(lam_d, lam_b, bool(lam_b <= lam_d * (1.0 + slack)), slack)
