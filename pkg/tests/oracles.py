"""Independent reference computations used to freeze expected test values.

Nothing here imports the package under test. Each oracle works from closed
forms, ODE shooting or plain quadrature, so agreement with the finite-volume
code is a genuine cross-check.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate, optimize

# Frozen outputs of the oracles below (regenerate with ``python tests/oracles.py``).
LAMBDA_STAR_1D = 1.4000165
LAMBDA_STAR_DISK = 0.78922927
J01 = 2.404825557695773
CUBE_INVERSE_DISTANCE = 2.380077363979553
PICARD_U2_MID = 0.15609593
NEWTON_MU1_UNIT_BALL_3D = math.pi**2 / 4


def lambda_of_alpha_1d(alpha: float) -> float:
    """Voltage whose symmetric solution on (0, 1) has maximum ``alpha``.

    From the first integral ``u'^2/2 = lam (1/(1-alpha) - 1/(1-u))`` and the
    substitution ``u = alpha (1 - t^2)``, the half-width condition becomes
    ``sqrt(lam) = 2 int_0^1 sqrt(2 alpha (1-alpha)(1-u(t))) dt``.
    """

    def integrand(t):
        u = alpha * (1.0 - t * t)
        return math.sqrt(2.0 * alpha * (1.0 - alpha) * (1.0 - u))

    val, _ = integrate.quad(integrand, 0.0, 1.0, epsabs=1e-13, epsrel=1e-13)
    return (2.0 * val) ** 2


def lambda_star_1d() -> float:
    res = optimize.minimize_scalar(lambda a: -lambda_of_alpha_1d(a), bounds=(0.05, 0.95), method="bounded",
                                   options={"xatol": 1e-10})
    return -res.fun


def _disk_scale(alpha: float) -> float:
    """Radius ``s0`` where the radial solution of ``w'' + w'/s = -(1-w)^-2``, ``w(0) = alpha`` hits 0."""
    s0 = 1e-4
    # series start: w = alpha - s^2 / (4 (1 - alpha)^2)
    c = 1.0 / (4.0 * (1.0 - alpha) ** 2)
    y0 = [alpha - c * s0**2, -2.0 * c * s0]

    def rhs(s, y):
        return [y[1], -y[1] / s - (1.0 - y[0]) ** -2]

    def hit(s, y):
        return y[0]

    hit.terminal = True
    hit.direction = -1
    sol = integrate.solve_ivp(rhs, (s0, 50.0), y0, events=hit, rtol=1e-11, atol=1e-13)
    return float(sol.t_events[0][0])


def lambda_star_disk() -> float:
    """Fold of ``lam = s0(alpha)^2``: rescaling ``u(r) = w(s0 r)`` maps onto the unit disk."""
    res = optimize.minimize_scalar(lambda a: -_disk_scale(a) ** 2, bounds=(0.05, 0.9), method="bounded",
                                   options={"xatol": 1e-9})
    return -res.fun


def bessel_j0(x: float) -> float:
    total, term, k = 0.0, 1.0, 0
    while abs(term) > 1e-18 or k < 5:
        total += term
        k += 1
        term *= -((x / 2.0) ** 2) / (k * k)
    return total


def j01() -> float:
    lo, hi = 2.0, 3.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if bessel_j0(lo) * bessel_j0(mid) <= 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def cube_inverse_distance() -> float:
    """``int over [-1/2, 1/2]^3 of 1/|x|`` by nested quadrature (8 octants)."""
    val, _ = integrate.tplquad(lambda z, y, x: 1.0 / math.sqrt(x * x + y * y + z * z), 0, 0.5, 0, 0.5, 0, 0.5,
                               epsabs=1e-12, epsrel=1e-12)
    return 8.0 * val


def picard_u2_mid() -> float:
    """Second Picard iterate at x = 1/2 on (0, 1), lam = 1, g = (1-u)^-2, f = 1.

    ``u_1 = x(1-x)/2`` and ``u_2(x) = int G(x, y) g(u_1(y)) dy`` with the
    Green function ``G(x, y) = min(x, y)(1 - max(x, y))``.
    """
    g = lambda y: (1.0 - y * (1.0 - y) / 2.0) ** -2  # noqa: E731
    left, _ = integrate.quad(lambda y: y * 0.5 * g(y), 0.0, 0.5, epsabs=1e-13)
    right, _ = integrate.quad(lambda y: 0.5 * (1.0 - y) * g(y), 0.5, 1.0, epsabs=1e-13)
    return left + right


def plaplace_ball_solution(d: int, p: float, radius: float, r):
    """Closed form of ``-Delta_p u = 1`` on the d-ball, zero on the sphere."""
    q = p / (p - 1.0)
    r = np.asarray(r, dtype=float)
    return (p - 1.0) / p * d ** (-1.0 / (p - 1.0)) * (radius**q - r**q)


def plaplace_ball_by_quadrature(d: int, p: float, radius: float, r: float) -> float:
    """Same solution from integrating the radial flux balance ``|u'|^(p-1) = r/d`` inward."""
    val, _ = integrate.quad(lambda s: (s / d) ** (1.0 / (p - 1.0)), r, radius, epsabs=1e-13)
    return val


def uniform_ball_potential(radius: float, r):
    """Newtonian potential of the indicator of the 3-ball, inside the ball."""
    return (3.0 * radius**2 - np.asarray(r, dtype=float) ** 2) / 6.0


def laplace_mu1_rectangle(a: float, b: float) -> float:
    return math.pi**2 * (1.0 / a**2 + 1.0 / b**2)


if __name__ == "__main__":
    print("LAMBDA_STAR_1D", f"{lambda_star_1d():.8g}")
    print("LAMBDA_STAR_DISK", f"{lambda_star_disk():.8g}")
    print("J01", repr(j01()))
    print("CUBE_INVERSE_DISTANCE", repr(cube_inverse_distance()))
    print("PICARD_U2_MID", f"{picard_u2_mid():.8g}")
