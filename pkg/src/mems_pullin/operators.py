"""Dirichlet solvers for -Laplace, the p-Laplacian and -div(A grad).

Every operator is discretized in flux (finite-volume) form on the same
stencil graph: an edge joins two neighbouring unknowns, a boundary edge joins
an unknown to a Dirichlet ghost carrying 0. With per-edge conductances
``w_e >= 0`` the discrete operator reads

    (A u)_i = (1 / V_i) * [ sum_e w_e (u_i - u_j) + sum_b w_b u_i ],

so ``L = V A`` is a symmetric M-matrix and ``f >= 0`` gives ``u >= 0``.
The conductance is ``geom_e * k_e``: ``geom_e`` is face area over node
distance and ``k_e`` is 1 (Laplace), a face-averaged coefficient (elliptic),
or ``(|grad u|^2 + eps^2)^((p-2)/2)`` evaluated on the face (p-Laplace).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .domain import DomainSpec, GridFunction, sphere_area
from .errors import InvalidArgument, SolverDiverged

log = logging.getLogger(__name__)

OPERATOR_KINDS = ("laplace", "plaplace", "elliptic")

# below this many unknowns every linear solve is a fresh sparse LU
_DIRECT_LIMIT = 3000
_STALE_ITERS = 4


@dataclass(frozen=True, eq=False)
class EllipticOperator:
    """Operator tag plus parameters.

    ``coeff`` (elliptic only) may be a scalar, a ``(d, d)`` matrix, a
    per-cell ``(n,)`` isotropic field or a per-cell ``(n, d, d)`` field.
    """

    kind: str = "laplace"
    p: float = 2.0
    coeff: Optional[object] = None
    ellipticity_floor: Optional[float] = None

    def __post_init__(self):
        if self.kind not in OPERATOR_KINDS:
            raise InvalidArgument(f"unknown operator kind {self.kind!r}")
        if not self.p > 1:
            raise InvalidArgument(f"p must exceed 1, got {self.p}")
        if self.kind == "elliptic" and self.coeff is None:
            raise InvalidArgument("elliptic operator needs a coefficient field")
        if self.ellipticity_floor is not None and not self.ellipticity_floor > 0:
            raise InvalidArgument("ellipticity floor must be positive")

    @classmethod
    def laplace(cls) -> "EllipticOperator":
        return cls("laplace")

    @classmethod
    def plaplace(cls, p: float) -> "EllipticOperator":
        return cls("plaplace", p=float(p))

    @classmethod
    def elliptic(cls, coeff, ellipticity_floor: Optional[float] = None) -> "EllipticOperator":
        return cls("elliptic", coeff=coeff, ellipticity_floor=ellipticity_floor)

    def coefficient_field(self, domain: DomainSpec) -> np.ndarray:
        """Per-cell coefficient matrices, shape ``(n_cells, d, d)``, validated."""
        if self.kind != "elliptic":
            eye = np.eye(domain.dim)
            return np.broadcast_to(eye, (domain.n_cells, domain.dim, domain.dim))
        d, n = domain.dim, domain.n_cells
        a = np.asarray(self.coeff, dtype=float)
        if a.ndim == 0:
            field = np.broadcast_to(a * np.eye(d), (n, d, d))
        elif a.ndim == 2 and a.shape == (d, d):
            field = np.broadcast_to(a, (n, d, d))
        elif a.ndim == 1 and a.shape == (n,):
            field = a[:, None, None] * np.eye(d)
        elif a.shape == (n, d, d):
            field = a
        else:
            raise InvalidArgument(f"coefficient shape {a.shape} does not fit a {d}-D domain with {n} cells")
        if not np.allclose(field, np.swapaxes(field, 1, 2), rtol=0, atol=1e-14):
            raise InvalidArgument("coefficient matrices must be symmetric")
        off = field.copy()
        off[:, np.arange(d), np.arange(d)] = 0.0
        if d != 2 and np.any(off != 0):
            raise InvalidArgument("off-diagonal coefficients are only supported in 2-D")
        if domain.kind == "ball" and np.any(off != 0):
            raise InvalidArgument("radial problems need an isotropic coefficient")
        if domain.kind == "ball" and d > 1 and not np.allclose(field[:, 0, 0][:, None], np.diagonal(field, axis1=1, axis2=2)):
            raise InvalidArgument("radial problems need an isotropic coefficient")
        lam_min = float(np.linalg.eigvalsh(field).min())
        if not lam_min > 0:
            raise InvalidArgument("coefficient field is not uniformly elliptic")
        if self.ellipticity_floor is not None and self.ellipticity_floor > lam_min * (1 + 1e-12):
            raise InvalidArgument(
                f"ellipticity floor {self.ellipticity_floor} exceeds smallest eigenvalue {lam_min}"
            )
        return field

    def floor(self, domain: DomainSpec) -> float:
        """Ellipticity constant c: given, or the smallest eigenvalue of the field."""
        if self.kind != "elliptic":
            return 1.0
        if self.ellipticity_floor is not None:
            self.coefficient_field(domain)
            return float(self.ellipticity_floor)
        return float(np.linalg.eigvalsh(self.coefficient_field(domain)).min())

    def describe(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "plaplace":
            out["p"] = self.p
        if self.kind == "elliptic":
            a = np.asarray(self.coeff, dtype=float)
            out["coeff"] = a.tolist() if a.size <= 9 else f"field{list(a.shape)}"
            if self.ellipticity_floor is not None:
                out["ellipticity_floor"] = self.ellipticity_floor
        return out


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-8
    max_iter: int = 10_000
    regularization_eps: float = 1e-10
    relaxation: Optional[float] = None

    def __post_init__(self):
        if not self.tol > 0:
            raise InvalidArgument("tol must be positive")
        if self.max_iter < 1:
            raise InvalidArgument("max_iter must be >= 1")
        if self.regularization_eps < 0:
            raise InvalidArgument("regularization_eps must be >= 0")
        if self.relaxation is not None and not 0 < self.relaxation <= 1:
            raise InvalidArgument("relaxation must lie in (0, 1]")

    def relaxation_for(self, op: EllipticOperator) -> float:
        if self.relaxation is not None:
            return self.relaxation
        return 0.7 if op.kind == "plaplace" else 1.0

    def describe(self, op: Optional[EllipticOperator] = None) -> dict:
        out = {
            "tol": self.tol,
            "max_iter": self.max_iter,
            "regularization_eps": self.regularization_eps,
        }
        out["relaxation"] = self.relaxation_for(op) if op is not None else self.relaxation
        return out


# ------------------------------------------------------------------ stencil


class Stencil:
    """Edge graph of the unknowns of a domain (see module docstring)."""

    def __init__(self, domain: DomainSpec):
        self.domain = domain
        h, d = domain.spacing, domain.dim
        self.neighbors = None
        self.diag_edges = None
        if domain.kind == "interval":
            n = domain.n_cells
            self.n = n
            self.vol = np.full(n, h)
            self.ei = np.arange(n - 1)
            self.ej = self.ei + 1
            self.e_axis = np.zeros(n - 1, dtype=int)
            self.e_dist = np.full(n - 1, h)
            self.e_geom = np.full(n - 1, 1.0 / h)
            self.bi = np.array([0, n - 1])
            self.b_axis = np.zeros(2, dtype=int)
            self.b_dist = np.full(2, h)
            self.b_geom = np.full(2, 1.0 / h)
        elif domain.kind == "ball":
            n = domain.n_cells - 1
            self.n = n
            self.vol = np.array(domain.cell_volumes[:n])
            faces = (np.arange(n) + 0.5) * h
            area = sphere_area(d) * faces ** (d - 1)
            self.ei = np.arange(n - 1)
            self.ej = self.ei + 1
            self.e_axis = np.zeros(n - 1, dtype=int)
            self.e_dist = np.full(n - 1, h)
            self.e_geom = area[:-1] / h
            self.bi = np.array([n - 1])
            self.b_axis = np.zeros(1, dtype=int)
            self.b_dist = np.full(1, h)
            self.b_geom = area[-1:] / h
            self.face_area = area
        else:
            self._build_mask(domain)
        self._build_pattern()

    def _build_mask(self, domain):
        h, d = domain.spacing, domain.dim
        idx = np.pad(domain.cell_index, 1, constant_values=-1)
        inner = tuple(slice(1, -1) for _ in range(d))
        me = idx[inner]
        inside = me >= 0
        self.n = domain.n_cells
        self.vol = np.full(self.n, h**d)
        geom = h ** (d - 2)
        ei, ej, eax, bi, bax = [], [], [], [], []
        plus, minus = [], []
        for ax in range(d):
            up = tuple(slice(2, None) if k == ax else slice(1, -1) for k in range(d))
            dn = tuple(slice(None, -2) if k == ax else slice(1, -1) for k in range(d))
            nb_up, nb_dn = idx[up], idx[dn]
            p_arr = np.full(self.n, -1, dtype=np.int64)
            m_arr = np.full(self.n, -1, dtype=np.int64)
            p_arr[me[inside]] = nb_up[inside]
            m_arr[me[inside]] = nb_dn[inside]
            plus.append(p_arr)
            minus.append(m_arr)
            sel = inside & (nb_up >= 0)
            ei.append(me[sel])
            ej.append(nb_up[sel])
            eax.append(np.full(sel.sum(), ax))
            for nb in (nb_up, nb_dn):
                sel = inside & (nb < 0)
                bi.append(me[sel])
                bax.append(np.full(sel.sum(), ax))
        self.ei = np.concatenate(ei)
        self.ej = np.concatenate(ej)
        self.e_axis = np.concatenate(eax)
        self.e_dist = np.full(self.ei.size, h)
        self.e_geom = np.full(self.ei.size, geom)
        self.bi = np.concatenate(bi)
        self.b_axis = np.concatenate(bax)
        # Dirichlet face sits half a cell away from the unknown
        self.b_dist = np.full(self.bi.size, h / 2)
        self.b_geom = np.full(self.bi.size, 2 * geom)
        self.neighbors = (plus, minus)
        if d == 2:
            diag = {}
            for name, (sx, sy) in {"ne": (2, 2), "nw": (2, 0)}.items():
                nb = idx[sx : sx + me.shape[0], sy : sy + me.shape[1]]
                back = idx[2 - sx : 2 - sx + me.shape[0], 2 - sy : 2 - sy + me.shape[1]]
                sel = inside & (nb >= 0)
                pair = (me[sel], nb[sel])
                outs = np.concatenate([me[inside & (nb < 0)], me[inside & (back < 0)]])
                diag[name] = (pair, outs)
            self.diag_edges = diag

    def _build_pattern(self):
        """Map edge weights to CSR data of L in one bincount."""
        i, j, b = self.ei, self.ej, self.bi
        extra_i, extra_j, extra_b = [], [], []
        if self.diag_edges is not None:
            for (pi, pj), outs in self.diag_edges.values():
                extra_i.append(pi)
                extra_j.append(pj)
                extra_b.append(outs)
        self.all_i = np.concatenate([i, *extra_i]).astype(np.int64)
        self.all_j = np.concatenate([j, *extra_j]).astype(np.int64)
        self.all_b = np.concatenate([b, *extra_b]).astype(np.int64)
        rows = np.concatenate([self.all_i, self.all_j, self.all_i, self.all_j, self.all_b])
        cols = np.concatenate([self.all_j, self.all_i, self.all_i, self.all_j, self.all_b])
        keys = rows * self.n + cols
        uniq, inverse = np.unique(keys, return_inverse=True)
        self._inverse = inverse
        self._nnz = uniq.size
        self._indices = (uniq % self.n).astype(np.int32)
        self._indptr = np.searchsorted(uniq // self.n, np.arange(self.n + 1)).astype(np.int32)

    def _pad(self, w_edges, w_bnd):
        # axis-only weights leave the cross-derivative edges at zero
        if w_edges.size < self.all_i.size:
            w_edges = np.concatenate([w_edges, np.zeros(self.all_i.size - w_edges.size)])
        if w_bnd.size < self.all_b.size:
            w_bnd = np.concatenate([w_bnd, np.zeros(self.all_b.size - w_bnd.size)])
        return w_edges, w_bnd

    def matrix(self, w_edges: np.ndarray, w_bnd: np.ndarray) -> sp.csr_matrix:
        """Symmetric ``L`` from edge and boundary conductances (in pattern order)."""
        w_edges, w_bnd = self._pad(w_edges, w_bnd)
        vals = np.concatenate([-w_edges, -w_edges, w_edges, w_edges, w_bnd])
        data = np.bincount(self._inverse, weights=vals, minlength=self._nnz)
        return sp.csr_matrix((data, self._indices, self._indptr), shape=(self.n, self.n))

    def apply(self, u: np.ndarray, w_edges: np.ndarray, w_bnd: np.ndarray) -> np.ndarray:
        """``L u`` without forming the matrix."""
        w_edges, w_bnd = self._pad(w_edges, w_bnd)
        flux = w_edges * (u[self.all_i] - u[self.all_j])
        out = np.bincount(self.all_i, weights=flux, minlength=self.n)
        out -= np.bincount(self.all_j, weights=flux, minlength=self.n)
        out += np.bincount(self.all_b, weights=w_bnd * u[self.all_b], minlength=self.n)
        return out

    # -- gradients on faces, for the p-Laplacian
    def face_gradient_sq(self, u: np.ndarray):
        g_e = ((u[self.ej] - u[self.ei]) / self.e_dist) ** 2
        g_b = (u[self.bi] / self.b_dist) ** 2
        if self.neighbors is not None and self.domain.dim > 1:
            h = self.domain.spacing
            plus, minus = self.neighbors
            central = []
            for p_arr, m_arr in zip(plus, minus):
                up = np.where(p_arr >= 0, u[np.maximum(p_arr, 0)], -u)
                dn = np.where(m_arr >= 0, u[np.maximum(m_arr, 0)], -u)
                central.append((up - dn) / (2 * h))
            for ax in range(self.domain.dim):
                me = self.e_axis == ax
                mb = self.b_axis == ax
                for other in range(self.domain.dim):
                    if other == ax:
                        continue
                    c = central[other]
                    g_e[me] += (0.5 * (c[self.ei[me]] + c[self.ej[me]])) ** 2
                    g_b[mb] += c[self.bi[mb]] ** 2
        return g_e, g_b


def _harmonic(a, b):
    return 2.0 * a * b / (a + b)


class DirichletProblem:
    """A bound (operator, domain, config) triple with cached factorizations.

    Reusing one instance across many right-hand sides (as the Picard
    iteration does) keeps the linear-solve cost down: the linear operators
    are factorized once, the p-Laplacian reuses an earlier factorization as a
    preconditioner until it stops paying off.
    """

    def __init__(self, op: EllipticOperator, domain: DomainSpec, config: Optional[SolverConfig] = None):
        self.op = op
        self.domain = domain
        self.config = config or SolverConfig()
        self.stencil = Stencil(domain)
        self._lu = None
        self._lu_stale = None
        self._refactor = False
        self.last_iterations = 0
        self._linear_weights = None
        if op.kind != "plaplace":
            self._linear_weights = self._static_weights()

    # ---------------------------------------------------------------- weights
    def _static_weights(self):
        st = self.stencil
        n_diag = st.all_i.size - st.ei.size
        n_bdiag = st.all_b.size - st.bi.size
        if self.op.kind == "laplace":
            return (
                np.concatenate([st.e_geom, np.zeros(n_diag)]),
                np.concatenate([st.b_geom, np.zeros(n_bdiag)]),
            )
        a = self.op.coefficient_field(self.domain)
        if self.domain.kind == "ball":
            a = a[: st.n]
        diag = np.diagonal(a, axis1=1, axis2=2)
        d = self.domain.dim
        b = a[:, 0, 1] if d == 2 else np.zeros(a.shape[0])
        absb = np.abs(b)
        ax_e, ax_b = st.e_axis, st.b_axis
        k_e = _harmonic(diag[st.ei, ax_e], diag[st.ej, ax_e]) - 0.5 * (absb[st.ei] + absb[st.ej])
        k_b = diag[st.bi, ax_b] - absb[st.bi]
        if np.any(k_e < -1e-14) or np.any(k_b < -1e-14):
            raise InvalidArgument(
                "cross-derivative stencil is not monotone: need a_jj >= |a_12| at every cell"
            )
        w_e = [st.e_geom * np.maximum(k_e, 0.0)]
        w_b = [st.b_geom * np.maximum(k_b, 0.0)]
        if st.diag_edges is not None:
            geom = self.domain.spacing ** (d - 2)
            for name, sign in (("ne", 1.0), ("nw", -1.0)):
                (pi, pj), outs = st.diag_edges[name]
                part = np.maximum(sign * b, 0.0)
                w_e.append(geom * 0.5 * (part[pi] + part[pj]))
                w_b.append(geom * part[outs])
        return np.concatenate(w_e), np.concatenate(w_b)

    def weights(self, u: Optional[np.ndarray] = None):
        if self._linear_weights is not None:
            return self._linear_weights
        st = self.stencil
        eps2 = self.config.regularization_eps**2
        g_e, g_b = st.face_gradient_sq(u)
        expo = (self.op.p - 2.0) / 2.0
        return st.e_geom * (g_e + eps2) ** expo, st.b_geom * (g_b + eps2) ** expo

    # --------------------------------------------------------------- operator
    def apply(self, u: np.ndarray) -> np.ndarray:
        """Discrete ``A_h(u)`` on the unknowns."""
        w_e, w_b = self.weights(u)
        return self.stencil.apply(u, w_e, w_b) / self.stencil.vol

    def residual(self, u: np.ndarray, f: np.ndarray) -> float:
        return float(np.max(np.abs(self.apply(u) - f))) if u.size else 0.0

    def target(self, f: np.ndarray) -> float:
        return self.config.tol * max(1.0, float(np.max(np.abs(f))) if f.size else 0.0)

    # ----------------------------------------------------------------- solves
    def _linear_solve(self, w_e, w_b, rhs, x0, lin_tol, refresh=False):
        st = self.stencil
        mat = st.matrix(w_e, w_b)
        if self.op.kind != "plaplace":
            if self._lu is None:
                self._lu = spla.splu(mat.tocsc())
            return self._lu.solve(rhs)
        if st.n <= _DIRECT_LIMIT or refresh or self._lu_stale is None or self._refactor:
            self._lu_stale = spla.splu(mat.tocsc())
            self._refactor = False
            return self._lu_stale.solve(rhs)
        x = self._pcg(mat, rhs, x0, lin_tol)
        if x is None:
            self._lu_stale = spla.splu(mat.tocsc())
            x = self._lu_stale.solve(rhs)
        return x

    def _pcg(self, mat, rhs, x0, lin_tol, max_it=30):
        """CG on ``L x = rhs`` preconditioned by a stale LU; None if too slow.

        Needing more than ``_STALE_ITERS`` iterations schedules a fresh
        factorization for the next solve: one factorization costs about as
        much as a few dozen back-substitutions.
        """
        vol = self.stencil.vol
        x = x0.copy()
        r = rhs - mat @ x
        if np.max(np.abs(r / vol)) <= lin_tol:
            return x
        z = self._lu_stale.solve(r)
        p = z.copy()
        rz = r @ z
        for k in range(max_it):
            q = mat @ p
            alpha = rz / (p @ q)
            x += alpha * p
            r -= alpha * q
            if np.max(np.abs(r / vol)) <= lin_tol:
                self._refactor = k >= _STALE_ITERS
                return x
            z = self._lu_stale.solve(r)
            rz_new = r @ z
            p = z + (rz_new / rz) * p
            rz = rz_new
        return None

    def _cold_start(self, f):
        """Laplace solution rescaled so that energy balances for the p-Laplacian."""
        st = self.stencil
        w = spla.spsolve(st.matrix(st.e_geom, st.b_geom).tocsc(), st.vol * f)
        if not np.any(w):
            return w
        g_e, g_b = st.face_gradient_sq(w)
        p = self.op.p
        # sum of |grad w|^p over face volumes, matched against int f w
        energy = np.sum(st.e_geom * st.e_dist**2 * g_e ** (p / 2)) + np.sum(
            st.b_geom * st.b_dist**2 * g_b ** (p / 2)
        )
        work = float(np.dot(st.vol * f, w))
        if energy <= 0 or work <= 0:
            return w
        return w * (work / energy) ** (1.0 / (p - 1.0))

    def solve(self, f: np.ndarray, u0: Optional[np.ndarray] = None, tol: Optional[float] = None) -> np.ndarray:
        """Unknown values of the solution of ``A_h(u) = f``.

        ``tol`` loosens the residual target of the p-Laplace fixed point for
        callers (such as an outer Picard loop) that only need a rough solve;
        it never tightens it below the configured target.
        """
        if self.domain.kind == "ball":
            return _radial_solve(self, f)
        st = self.stencil
        f = np.asarray(f, dtype=float)
        target = self.target(f)
        if tol is not None:
            target = max(target, tol)
        rhs = st.vol * f
        if self.op.kind != "plaplace":
            u = self._linear_solve(*self._linear_weights, rhs, None, 0.1 * target)
            self.last_iterations = 1
            res = self.residual(u, f)
            if res > target:
                raise SolverDiverged(f"linear solve residual {res:.3e} above {target:.3e}", res, 1)
            return u
        if not np.any(f):
            self.last_iterations = 0
            return np.zeros(st.n)
        omega = self.config.relaxation_for(self.op)
        # a zero guess makes every face weight eps^(p-2); start from a scaled Laplace solve
        u = self._cold_start(f) if u0 is None or not np.any(u0) else np.array(u0, dtype=float)
        w_e, w_b = self.weights(u)
        res = float(np.max(np.abs(st.apply(u, w_e, w_b) / st.vol - f)))
        it = 0
        while res > target:
            if it >= self.config.max_iter or not np.isfinite(res):
                raise SolverDiverged(
                    f"p-Laplace fixed point stalled at residual {res:.3e} after {it} iterations", res, it
                )
            # the linear solve only needs to beat the current nonlinear residual
            x = self._linear_solve(w_e, w_b, rhs, u, max(0.1 * target, 0.05 * res))
            u = (1.0 - omega) * u + omega * x
            w_e, w_b = self.weights(u)
            res = float(np.max(np.abs(st.apply(u, w_e, w_b) / st.vol - f)))
            it += 1
        self.last_iterations = it
        return u

    def full(self, unknowns: np.ndarray) -> np.ndarray:
        """Append the boundary node value of a ball; identity elsewhere."""
        if self.domain.kind == "ball":
            return np.append(unknowns, 0.0)
        return unknowns

    def unknowns(self, values: np.ndarray) -> np.ndarray:
        return values[: self.stencil.n]


def _invert_flux(q: np.ndarray, p: float, eps: float) -> np.ndarray:
    """Solve ``s (s^2 + eps^2)^((p-2)/2) = q`` for ``s`` componentwise."""
    expo = (p - 2.0) / 2.0
    sign = np.sign(q)
    q = np.abs(q)
    s = q ** (1.0 / (p - 1.0))
    if eps == 0.0 or p == 2.0:
        return sign * s
    lo = np.zeros_like(q)
    hi = np.maximum(s, q / np.maximum(eps**expo * 2.0, 1e-300)) * 2.0 + 1e-300
    for _ in range(100):
        base = s * s + eps * eps
        phi = s * base**expo - q
        dphi = base ** (expo - 1.0) * ((p - 1.0) * s * s + eps * eps)
        lo = np.where(phi < 0, s, lo)
        hi = np.where(phi > 0, s, hi)
        step = np.where(dphi > 0, phi / np.where(dphi > 0, dphi, 1.0), 0.0)
        nxt = s - step
        bad = (nxt <= lo) | (nxt >= hi) | ~np.isfinite(nxt)
        nxt = np.where(bad, 0.5 * (lo + hi), nxt)
        if np.all(np.abs(nxt - s) <= 1e-15 * np.maximum(s, 1e-300)):
            s = nxt
            break
        s = nxt
    return sign * s


def _radial_solve(problem: DirichletProblem, f: np.ndarray) -> np.ndarray:
    """Exact solve of the radial flux balance, integrating from the center out.

    The flux through the face ``r_{k+1/2}`` equals the source enclosed by it,
    which fixes each face difference directly; the values then follow by
    summation inward from the Dirichlet node.
    """
    st = problem.stencil
    op = problem.op
    f = np.asarray(f, dtype=float)[: st.n]
    enclosed = np.cumsum(f * st.vol)
    q = enclosed / st.face_area
    if op.kind == "plaplace":
        slope = _invert_flux(q, op.p, problem.config.regularization_eps)
    elif op.kind == "elliptic":
        a = op.coefficient_field(problem.domain)[:, 0, 0]
        k_face = np.append(_harmonic(a[: st.n - 1], a[1 : st.n]), a[st.n - 1])
        slope = q / k_face
    else:
        slope = q
    h = problem.domain.spacing
    u = np.cumsum((h * slope)[::-1])[::-1]
    problem.last_iterations = 1
    res = problem.residual(u, f)
    target = problem.target(f)
    if res > target:
        raise SolverDiverged(f"radial solve residual {res:.3e} above {target:.3e}", res, 1)
    return u


# --------------------------------------------------------------- public API


def solve(
    operator: EllipticOperator,
    domain: DomainSpec,
    f: GridFunction,
    config: Optional[SolverConfig] = None,
    u0: Optional[GridFunction] = None,
) -> GridFunction:
    """Solve ``A_h(u) = f`` with zero Dirichlet data.

    Raises
    ------
    SolverDiverged
        If the residual ``max|A_h(u) - f|`` does not drop below
        ``tol * max(1, max|f|)`` within ``max_iter`` iterations.
    """
    if f.domain is not domain and f.domain.n_cells != domain.n_cells:
        raise InvalidArgument("right-hand side lives on a different domain")
    if domain.kind == "ball":
        return solve_radial(operator, domain, f, config)
    problem = DirichletProblem(operator, domain, config)
    start = None if u0 is None else u0.values
    return GridFunction(domain, problem.solve(f.values, start))


def solve_radial(
    operator: EllipticOperator, ball: DomainSpec, f_radial: GridFunction, config: Optional[SolverConfig] = None
) -> GridFunction:
    """Radial fast path: ``u'(0) = 0``, ``u(R) = 0``, ``r^(d-1)`` weighted fluxes."""
    if ball.kind != "ball":
        raise InvalidArgument("solve_radial needs a ball domain")
    problem = DirichletProblem(operator, ball, config)
    u = problem.solve(f_radial.values)
    return GridFunction(ball, problem.full(u))


def residual(operator: EllipticOperator, domain: DomainSpec, u: GridFunction, f: GridFunction,
             config: Optional[SolverConfig] = None) -> float:
    """``max |A_h(u) - f|`` over the unknowns (zero extension outside)."""
    problem = DirichletProblem(operator, domain, config)
    n = problem.stencil.n
    return problem.residual(u.values[:n], f.values[:n])


def comparison_check(
    operator: EllipticOperator,
    domain: DomainSpec,
    f1: GridFunction,
    f2: GridFunction,
    config: Optional[SolverConfig] = None,
) -> bool:
    """True iff ``solve(f1) <= solve(f2) + tol`` everywhere, for ``0 <= f1 <= f2``."""
    if np.any(f1.values < 0) or np.any(f1.values > f2.values):
        raise InvalidArgument("comparison_check needs 0 <= f1 <= f2")
    config = config or SolverConfig()
    u1 = solve(operator, domain, f1, config)
    u2 = solve(operator, domain, f2, config)
    return bool(np.all(u1.values <= u2.values + config.tol))


def with_relaxation(config: SolverConfig, relaxation: float) -> SolverConfig:
    return replace(config, relaxation=relaxation)
