"""Singular nonlinearities, minimal solutions and pull-in voltages.

The minimal solution at voltage ``lam`` is the limit of the monotone Picard
sequence ``A(u_m) = lam * f * g(u_{m-1})`` started from ``u_0 = 0``; the
problem is solvable exactly when this sequence stays bounded below 1. The
pull-in voltage is then bracketed by bisection on the converged/touchdown
dichotomy.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional

import numpy as np

from .domain import DomainSpec, GridFunction, symmetrize_domain
from .errors import BracketFailure, DomainError, InvalidArgument
from .operators import DirichletProblem, EllipticOperator, SolverConfig
from .rearrange import product_assumption_residual, rearrange

log = logging.getLogger(__name__)

_INNER_FACTOR = 0.5

CONVERGED = "converged"
TOUCHDOWN = "touchdown"
ITERATION_LIMIT = "iteration_limit"


class Touchdown(DomainError):
    """An iterate reached the singularity u = 1."""


@dataclass(frozen=True)
class Nonlinearity:
    """``(1-u)^-m`` (power) or ``(1-u)^-2 + sigma (1-u)^-4`` (Casimir)."""

    kind: str = "power"
    m: int = 2
    sigma: float = 0.0

    singular = True

    def __post_init__(self):
        if self.kind not in ("power", "casimir"):
            raise InvalidArgument(f"unknown nonlinearity {self.kind!r}")
        if self.kind == "power" and (int(self.m) != self.m or self.m < 1):
            raise InvalidArgument("power exponent m must be an integer >= 1")
        if self.sigma < 0:
            raise InvalidArgument("Casimir weight sigma must be >= 0")

    @classmethod
    def power(cls, m: int = 2) -> "Nonlinearity":
        return cls("power", m=int(m))

    @classmethod
    def casimir(cls, sigma: float) -> "Nonlinearity":
        return cls("casimir", m=2, sigma=float(sigma))

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if np.any(u >= 1.0):
            raise DomainError("g(u) is singular at u >= 1")
        gap = 1.0 - u
        if self.kind == "power":
            return gap ** (-self.m)
        return gap**-2 + self.sigma * gap**-4

    def describe(self) -> dict:
        if self.kind == "power":
            return {"kind": "power", "m": self.m}
        return {"kind": "casimir", "sigma": self.sigma}


def eval_g(g: Nonlinearity, u: float) -> float:
    if not 0.0 <= u < 1.0:
        raise DomainError(f"g is defined on [0, 1), got u = {u}")
    return float(g(u))


@dataclass(frozen=True)
class IterationConfig:
    picard_tol: float = 1e-8
    touchdown_margin: float = 1e-3
    max_picard: int = 2000
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        if not self.picard_tol > 0:
            raise InvalidArgument("picard_tol must be positive")
        if not 0 < self.touchdown_margin < 1:
            raise InvalidArgument("touchdown_margin must lie in (0, 1)")
        if self.max_picard < 1:
            raise InvalidArgument("max_picard must be >= 1")

    def describe(self, op: Optional[EllipticOperator] = None) -> dict:
        return {
            "picard_tol": self.picard_tol,
            "touchdown_margin": self.touchdown_margin,
            "max_picard": self.max_picard,
            "solver": self.solver.describe(op),
        }


@dataclass
class IterationOutcome:
    status: str
    solution: Optional[GridFunction]
    iterations: int
    max_u_trace: List[float]
    last_iterate: Optional[GridFunction] = None

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED


@dataclass(frozen=True)
class PullInConfig:
    lambda_seed: float = 0.1
    growth: float = 2.0
    bisection_rtol: float = 1e-3
    max_shrink: int = 20
    max_growth: int = 200
    warm_start: bool = True
    iteration: IterationConfig = field(default_factory=IterationConfig)

    def __post_init__(self):
        if not self.lambda_seed > 0:
            raise InvalidArgument("lambda_seed must be positive")
        if not self.growth > 1:
            raise InvalidArgument("growth factor must exceed 1")
        if not 0 < self.bisection_rtol < 1:
            raise InvalidArgument("bisection_rtol must lie in (0, 1)")

    def describe(self, op: Optional[EllipticOperator] = None) -> dict:
        return {
            "lambda_seed": self.lambda_seed,
            "growth": self.growth,
            "bisection_rtol": self.bisection_rtol,
            "max_shrink": self.max_shrink,
            "warm_start": self.warm_start,
            "iteration": self.iteration.describe(op),
        }


@dataclass(frozen=True)
class Probe:
    lam: float
    status: str
    iterations: int


@dataclass
class PullInResult:
    """Bracket ``[lambda_lo, lambda_hi]`` around the pull-in voltage."""

    lambda_lo: float
    lambda_hi: float
    u_at_lo: GridFunction
    bisection_steps: int
    trace: List[Probe]
    config: dict = field(default_factory=dict)

    @property
    def lambda_mid(self) -> float:
        return 0.5 * (self.lambda_lo + self.lambda_hi)

    @property
    def relative_width(self) -> float:
        return (self.lambda_hi - self.lambda_lo) / self.lambda_hi

    def to_dict(self) -> dict:
        return {
            "lambda_lo": self.lambda_lo,
            "lambda_hi": self.lambda_hi,
            "relative_width": self.relative_width,
            "bisection_steps": self.bisection_steps,
            "max_u_at_lo": self.u_at_lo.max(),
            "probes": [{"lambda": p.lam, "status": p.status, "iterations": p.iterations} for p in self.trace],
            "config": self.config,
        }


# ------------------------------------------------------------------ Picard


def _check_rhs(domain: DomainSpec, f: GridFunction):
    if f.domain.n_cells != domain.n_cells:
        raise InvalidArgument("permittivity profile does not match the domain")
    if np.any(f.values < 0):
        raise InvalidArgument("permittivity profile must be nonnegative")


def picard_step(
    op: EllipticOperator,
    domain: DomainSpec,
    lam: float,
    f: GridFunction,
    g: Nonlinearity,
    u_prev: GridFunction,
    config: Optional[SolverConfig] = None,
    problem: Optional[DirichletProblem] = None,
) -> GridFunction:
    """One Picard update: solve ``A(u) = lam f g(u_prev)``, zero Dirichlet data."""
    _check_rhs(domain, f)
    if lam < 0:
        raise InvalidArgument("lam must be nonnegative")
    if u_prev.max() >= 1.0:
        raise Touchdown("previous iterate touches u = 1")
    problem = problem or DirichletProblem(op, domain, config)
    n = problem.stencil.n
    prev = u_prev.values[:n]
    rhs = lam * f.values[:n] * g(prev)
    return GridFunction(domain, problem.full(problem.solve(rhs, u0=prev)))


def minimal_solution(
    op: EllipticOperator,
    domain: DomainSpec,
    lam: float,
    f: GridFunction,
    g: Nonlinearity,
    config: Optional[IterationConfig] = None,
    start: Optional[GridFunction] = None,
    problem: Optional[DirichletProblem] = None,
) -> IterationOutcome:
    """Iterate :func:`picard_step` from ``u_0 = 0`` (or a subsolution ``start``).

    Stops with ``converged`` once successive iterates differ by at most
    ``picard_tol``, ``touchdown`` once an iterate reaches
    ``1 - touchdown_margin``, or ``iteration_limit`` after ``max_picard``
    steps.
    """
    config = config or IterationConfig()
    _check_rhs(domain, f)
    if lam < 0:
        raise InvalidArgument("lam must be nonnegative")
    problem = problem or DirichletProblem(op, domain, config.solver)
    fv = f.values[: problem.stencil.n]

    def step(u, tol):
        return problem.solve(lam * fv * g(u), u0=u, tol=tol)

    return _picard_loop(step, problem.stencil.n, domain, config, start, problem.full)


def _picard_loop(step: Callable, n: int, domain, config: IterationConfig, start, full) -> IterationOutcome:
    u = np.zeros(n) if start is None else np.array(start.values[:n], dtype=float)
    ceiling = 1.0 - config.touchdown_margin
    trace: List[float] = []
    inner_tol = None
    for m in range(1, config.max_picard + 1):
        nxt = step(u, inner_tol)
        top = float(nxt.max()) if nxt.size else 0.0
        trace.append(top)
        if not np.isfinite(top) or top >= ceiling:
            return IterationOutcome(TOUCHDOWN, None, m, trace, GridFunction(domain, full(u)))
        diff = float(np.max(np.abs(nxt - u))) if n else 0.0
        # inexact inner solves: accuracy tracks how far the outer loop still moves
        inner_tol = _INNER_FACTOR * diff
        u = nxt
        if diff <= config.picard_tol:
            sol = GridFunction(domain, full(u))
            return IterationOutcome(CONVERGED, sol, m, trace, sol)
    return IterationOutcome(ITERATION_LIMIT, None, config.max_picard, trace, GridFunction(domain, full(u)))


# -------------------------------------------------------------- bisection


def bracket_pull_in(probe: Callable[[float, Optional[GridFunction]], IterationOutcome], config: PullInConfig):
    """Up-scan then bisect on the converged / non-converged dichotomy.

    ``probe(lam, start)`` runs the minimal-solution iteration; ``start`` is
    the last converged solution at a smaller voltage (a subsolution), or None.
    Returns ``(lo, hi, u_lo, bisection_steps, trace)``.
    """
    trace: List[Probe] = []

    def run(lam, start):
        out = probe(lam, start if config.warm_start else None)
        trace.append(Probe(lam, out.status, out.iterations))
        log.debug("probe lambda=%.6g -> %s after %d iterations", lam, out.status, out.iterations)
        return out

    lam = config.lambda_seed
    out = run(lam, None)
    shrinks = 0
    while not out.converged:
        shrinks += 1
        if shrinks > config.max_shrink:
            raise BracketFailure(f"no converged voltage found down to {lam:.3e}")
        hi_seed = lam
        lam /= 2.0
        out = run(lam, None)
    lo, u_lo = lam, out.solution
    hi = hi_seed if shrinks else None
    steps = 0
    while hi is None:
        steps += 1
        if steps > config.max_growth:
            raise BracketFailure(f"iteration still converged at lambda = {lo:.3e}")
        cand = lo * config.growth
        out = run(cand, u_lo)
        if out.converged:
            lo, u_lo = cand, out.solution
        else:
            hi = cand
    bisections = 0
    while (hi - lo) / hi > config.bisection_rtol:
        mid = 0.5 * (lo + hi)
        out = run(mid, u_lo)
        bisections += 1
        if out.converged:
            lo, u_lo = mid, out.solution
        else:
            hi = mid
    return lo, hi, u_lo, bisections, trace


def pull_in_voltage(
    op: EllipticOperator,
    domain: DomainSpec,
    f: GridFunction,
    g: Nonlinearity,
    config: Optional[PullInConfig] = None,
) -> PullInResult:
    """Bracket the pull-in voltage of ``A(u) = lam f g(u)`` on ``domain``."""
    config = config or PullInConfig()
    _check_rhs(domain, f)
    if domain.kind == "ball":
        if not np.all(f.values[:-1] > 0):
            raise InvalidArgument("pull-in needs f > 0")
    elif not np.all(f.values > 0):
        raise InvalidArgument("pull-in needs f > 0")
    problem = DirichletProblem(op, domain, config.iteration.solver)

    def probe(lam, start):
        return minimal_solution(op, domain, lam, f, g, config.iteration, start=start, problem=problem)

    lo, hi, u_lo, steps, trace = bracket_pull_in(probe, config)
    echo = {
        "operator": op.describe(),
        "nonlinearity": g.describe(),
        "domain": domain.describe(),
        "pull_in": config.describe(op),
    }
    return PullInResult(lo, hi, u_lo, steps, trace, echo)


# ------------------------------------------------------ comparison checks


@dataclass
class ComparisonReport:
    max_violation: float
    passed: bool
    grid_slack: float
    u_star: GridFunction
    v: GridFunction
    max_u: float
    max_u_star: float

    def to_dict(self) -> dict:
        return {
            "max_violation": self.max_violation,
            "passed": self.passed,
            "grid_slack": self.grid_slack,
            "max_u": self.max_u,
            "max_u_star": self.max_u_star,
            "max_v": self.v.max(),
            "max_preserved": self.max_u == self.max_u_star,
        }


def _p_operator(p: float) -> EllipticOperator:
    return EllipticOperator.laplace() if p == 2 else EllipticOperator.plaplace(p)


def talenti_check(
    domain: DomainSpec,
    f: GridFunction,
    p: float,
    n_radial: Optional[int] = None,
    slack_constant: float = 5.0,
    config: Optional[SolverConfig] = None,
) -> ComparisonReport:
    """Compare ``u*`` with the symmetrized solution ``v`` on the ball.

    ``u`` solves ``-Delta_p u = f`` on ``domain``, ``v`` solves
    ``-Delta_p v = f*`` on the ball of equal measure. Passes when
    ``max(u* - v) <= slack_constant * h * max(v)``.
    """
    if not p > 1:
        raise InvalidArgument("p must exceed 1")
    if not f.is_nonnegative:
        raise InvalidArgument("Talenti comparison needs f >= 0")
    op = _p_operator(p)
    from .operators import solve, solve_radial

    u = solve(op, domain, f, config)
    ball = symmetrize_domain(domain, n_radial)
    f_star = rearrange(f, ball=ball).as_grid_function()
    v = solve_radial(op, ball, f_star, config)
    u_star = rearrange(u, ball=ball)
    violation = float(np.max(u_star.values - v.values))
    slack = slack_constant * domain.spacing * v.max()
    return ComparisonReport(
        violation, violation <= slack, slack, u_star.as_grid_function(), v, u.max(), u_star.max()
    )


@dataclass
class OrderingReport:
    lambda_ball: PullInResult
    lambda_domain: PullInResult
    ordered: bool
    ordering_slack: float
    ball_operator: EllipticOperator
    assumption_residual: float = float("nan")

    def to_dict(self) -> dict:
        return {
            "lambda_ball": self.lambda_ball.to_dict(),
            "lambda_domain": self.lambda_domain.to_dict(),
            "ordered": self.ordered,
            "ordering_slack": self.ordering_slack,
            "ball_operator": self.ball_operator.describe(),
            "assumption_residual": self.assumption_residual,
        }


def ball_operator_for(op: EllipticOperator, domain: DomainSpec) -> EllipticOperator:
    """Operator posed on the symmetrized ball.

    Same p for the p-Laplacian; for ``-div(A grad)`` the Laplacian scaled by
    the ellipticity constant c of ``A``.
    """
    if op.kind == "elliptic":
        return EllipticOperator.elliptic(op.floor(domain))
    return op


def pullin_compare(
    domain: DomainSpec,
    f: GridFunction,
    op: EllipticOperator,
    g: Nonlinearity,
    config: Optional[PullInConfig] = None,
    ordering_slack: float = 0.05,
    n_radial: Optional[int] = None,
) -> OrderingReport:
    """Pull-in voltage on ``domain`` versus the symmetrized ball with ``f*``."""
    config = config or PullInConfig()
    if not np.all(f.values > 0):
        raise InvalidArgument("pull-in comparison needs f > 0")
    ball = symmetrize_domain(domain, n_radial)
    f_star = rearrange(f, ball=ball).as_grid_function()
    ball_op = ball_operator_for(op, domain)
    lam_domain = pull_in_voltage(op, domain, f, g, config)
    lam_ball = pull_in_voltage(ball_op, ball, f_star, g, config)
    ordered = lam_ball.lambda_hi <= lam_domain.lambda_lo * (1.0 + ordering_slack)
    resid = product_assumption_residual(f, g, lam_domain.u_at_lo, ball.n_cells)
    return OrderingReport(lam_ball, lam_domain, bool(ordered), ordering_slack, ball_op, resid)


def with_solver(config: PullInConfig, solver: SolverConfig) -> PullInConfig:
    return replace(config, iteration=replace(config.iteration, solver=solver))
