"""Reduced planar bi-linear control system on the Bloch disk.

State q = (x, y) with a scalar control u:

    xdot = b1 + alpha1*x - u*y
    ydot = b2 + alpha2*y + u*x

The drift rates alpha1, alpha2 must be strictly negative.  The purity
rate f(q) = <q, b + Bq> does not depend on u; the control only swirls
the state around the origin.  This module provides the dynamics, a
fixed-step RK4 integrator, fixed-point formulas, the constant-control
cubic analysis, and recovery of the control profile from a geometric
curve y(x).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import cumulative_simpson


class ChimneyViolation(RuntimeError):
    """Curve or state leaves the escape chimney (f <= 0 where f > 0 is required)."""


class RadiusTurnaround(RuntimeError):
    """x + y*y' lost its sign: the radius is not monotone along the curve."""


class IntegrationError(RuntimeError):
    """Non-finite state encountered; carries the last valid trajectory prefix."""

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


@dataclass(frozen=True)
class PlanarSystem:
    b1: float
    b2: float
    alpha1: float
    alpha2: float

    def __post_init__(self):
        vals = (self.b1, self.b2, self.alpha1, self.alpha2)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"non-finite planar parameters {vals}")
        if self.alpha1 >= 0 or self.alpha2 >= 0:
            raise ValueError(
                f"drift rates must be negative, got alpha1={self.alpha1}, alpha2={self.alpha2}"
            )
        if self.alpha2 >= self.alpha1:
            # conventional ordering only; several worked examples violate it
            warnings.warn(
                f"alpha2={self.alpha2} >= alpha1={self.alpha1} breaks the alpha2 < alpha1 convention",
                stacklevel=2,
            )

    @property
    def b(self) -> np.ndarray:
        return np.array([self.b1, self.b2])


@dataclass
class Trajectory:
    """Sampled trajectory: parallel arrays, one row per time sample."""

    t: np.ndarray
    q: np.ndarray  # shape (n, 2) or (n, 3)
    u: np.ndarray

    @property
    def r(self) -> np.ndarray:
        return np.linalg.norm(self.q, axis=1)

    @property
    def purity(self) -> np.ndarray:
        return 0.5 * (1.0 + self.r**2)

    def check(self, ball_tol: float = 1e-9):
        if not np.all(np.diff(self.t) > 0):
            raise ValueError("trajectory times are not strictly increasing")
        rmax = float(self.r.max())
        if rmax > 1.0 + ball_tol:
            raise ValueError(f"trajectory leaves the unit ball, max radius {rmax}")
        return self


def rhs_planar(q, u: float, system: PlanarSystem) -> np.ndarray:
    x, y = q
    return np.array([
        system.b1 + system.alpha1 * x - u * y,
        system.b2 + system.alpha2 * y + u * x,
    ])


def purity_rate(x, y, system: PlanarSystem):
    """f(q) = <q, b + Bq>, vectorized over x, y."""
    return (system.b1 + system.alpha1 * x) * x + (system.b2 + system.alpha2 * y) * y


def drift_fixed_point(system: PlanarSystem) -> np.ndarray:
    return np.array([-system.b1 / system.alpha1, -system.b2 / system.alpha2])


def constant_control_fixed_point(u: float, system: PlanarSystem) -> np.ndarray:
    a1, a2 = system.alpha1, system.alpha2
    den = u * u + a1 * a2
    if abs(den) < 1e-15:
        raise ValueError(f"degenerate fixed point, u^2 + alpha1*alpha2 = {den}")
    return np.array([-a2 * system.b1 - system.b2 * u, -a1 * system.b2 + system.b1 * u]) / den


def integrate(q0, control, system: PlanarSystem, dt: float = 1e-3, T: float = 1.0) -> Trajectory:
    """Classical RK4 with fixed step dt and a partial final step to land on T.

    `control` is a callable t -> u sampled at the stage times.
    """
    if dt <= 0 or T <= 0:
        raise ValueError(f"need dt > 0 and T > 0, got dt={dt}, T={T}")
    n_full = int(math.floor(T / dt + 1e-12))
    steps = [dt] * n_full
    rem = T - n_full * dt
    if rem > 1e-12:
        steps.append(rem)

    ts = [0.0]
    qs = [np.asarray(q0, dtype=float)]
    us = [float(control(0.0))]
    t, q = 0.0, qs[0]
    for h in steps:
        k1 = rhs_planar(q, control(t), system)
        k2 = rhs_planar(q + 0.5 * h * k1, control(t + 0.5 * h), system)
        k3 = rhs_planar(q + 0.5 * h * k2, control(t + 0.5 * h), system)
        k4 = rhs_planar(q + h * k3, control(t + h), system)
        q = q + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = t + h
        if not np.all(np.isfinite(q)):
            prefix = Trajectory(np.array(ts), np.array(qs), np.array(us))
            raise IntegrationError(f"state blew up at t={t}", prefix)
        ts.append(t)
        qs.append(q)
        us.append(float(control(t)))
    return Trajectory(np.array(ts), np.array(qs), np.array(us))


def piecewise_constant(times, values):
    """Right-continuous step control: u(t) = values[k] for times[k] <= t < times[k+1]."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.shape != values.shape or times.ndim != 1:
        raise ValueError("times and values must be equal-length 1-d arrays")
    if not np.all(np.diff(times) > 0):
        raise ValueError("breakpoints must be strictly increasing")

    def u(t):
        k = int(np.searchsorted(times, t, side="right")) - 1
        return float(values[max(k, 0)])

    return u


@dataclass(frozen=True)
class CubicAnalysis:
    """Constant-control feasibility cubic p(u) = a u^3 + b u^2 + c u + d.

    Every constant-control fixed point lies on the ellipsoid f = 0; the
    cubic picks out the controls whose fixed point sits in a direction
    where the chimney radius is critical (generically the apogee
    direction).  A root u in [-1, 1] means an admissible constant control
    can park there.  `condition_case` records which of the three analytic
    conditions fired ("i": p(1) = 0, "ii": p(-1)/p(1) <= 0, "iii": an
    interior critical point of p enters the unit interval); the direct
    companion-matrix solve is carried alongside as a check.
    """

    a: float
    b: float
    c: float
    d: float
    variant: str = "printed"
    real_roots: tuple = field(default_factory=tuple)
    roots_in_unit_interval: tuple = field(default_factory=tuple)
    condition_case: str | None = None
    condition_holds: bool = False

    @property
    def discriminant(self) -> float:
        return 4.0 * self.b**2 - 12.0 * self.a * self.c

    @property
    def scale(self) -> float:
        return max(1.0, abs(self.a), abs(self.b), abs(self.c), abs(self.d))

    def p(self, u):
        return ((self.a * u + self.b) * u + self.c) * u + self.d

    def dp(self, u):
        return (3.0 * self.a * u + 2.0 * self.b) * u + self.c

    @property
    def best_root(self) -> float | None:
        # smallest-magnitude admissible root: least control effort
        return self.roots_in_unit_interval[0] if self.roots_in_unit_interval else None


def cubic_coefficients(system: PlanarSystem, variant: str = "printed") -> CubicAnalysis:
    """Coefficients of the constant-control cubic.

    The linear coefficient carries a factor (b2 - b1) in the "printed"
    variant and (b2^2 - b1^2) in the "squared" variant; the two are kept
    side by side because neither form is settled.
    """
    b1, b2, a1, a2 = system.b1, system.b2, system.alpha1, system.alpha2
    if variant == "printed":
        cross = b2 - b1
    elif variant == "squared":
        cross = b2 * b2 - b1 * b1
    else:
        raise ValueError(f"unknown cubic variant {variant!r}")
    return CubicAnalysis(
        a=b1 * b1 + b2 * b2,
        b=3.0 * b1 * b2 * (a2 - a1),
        c=2.0 * a2 * a2 * b1 * b1 + 2.0 * a1 * a1 * b2 * b2 - a1 * a2 * cross,
        d=a1 * a2 * b1 * b2 * (a1 - a2),
        variant=variant,
    )


def _polish_real_roots(ca: CubicAnalysis, roots: np.ndarray) -> list[float]:
    out = []
    for r in roots:
        u = float(r)
        for _ in range(3):
            slope = ca.dp(u)
            if abs(slope) < 1e-14 * ca.scale:
                break
            u -= ca.p(u) / slope
        if not any(abs(u - v) <= 1e-9 for v in out):
            out.append(u)
    return sorted(out)


def root_in_unit_interval(ca: CubicAnalysis, tol: float = 1e-12) -> CubicAnalysis:
    """Evaluate the three analytic root-location conditions and the direct solve.

    Returns a completed copy of `ca`; `condition_holds` is the analytic
    verdict, `roots_in_unit_interval` comes from the companion-matrix
    solve (Newton-polished, sorted by magnitude).
    """
    if ca.a <= 0:
        raise ValueError(f"leading coefficient must be positive, got a={ca.a}")
    scale = ca.scale
    p1 = ca.p(1.0)
    pm1 = ca.p(-1.0)

    case: str | None = None
    if abs(p1) <= tol * scale:
        case = "i"
    elif pm1 / p1 <= 0.0:
        case = "ii"
    else:
        delta = ca.discriminant
        if delta >= 0.0:
            sq = math.sqrt(delta)
            u_plus = (-2.0 * ca.b + sq) / (6.0 * ca.a)
            u_minus = (-2.0 * ca.b - sq) / (6.0 * ca.a)
            if pm1 / p1 > 0.0 and min(abs(u_plus), abs(u_minus)) < 1.0:
                case = "iii"

    roots = np.roots([ca.a, ca.b, ca.c, ca.d])
    real = roots[np.abs(roots.imag) <= 1e-9 * max(1.0, np.abs(roots).max())].real
    real = _polish_real_roots(ca, real)
    in_unit = sorted((u for u in real if abs(u) <= 1.0 + tol), key=abs)

    return replace(
        ca,
        real_roots=tuple(real),
        roots_in_unit_interval=tuple(in_unit),
        condition_case=case,
        condition_holds=case is not None,
    )


@dataclass
class ControlProfile:
    """Control and time law recovered from a curve y(x), on a uniform x grid."""

    x: np.ndarray
    y: np.ndarray
    yp: np.ndarray
    u: np.ndarray
    t: np.ndarray
    dtdx: np.ndarray

    @property
    def travel_time(self) -> float:
        return float(self.t[-1])

    @property
    def energy(self) -> float:
        # integral of u^2 dt over the traversal
        return float(cumulative_simpson(self.u**2 * self.dtdx, x=self.x, initial=0.0)[-1])


def recover_control(curve, system: PlanarSystem, x0: float, xf: float, n: int = 2001) -> ControlProfile:
    """Recover u(x) and the time law t(x) from a curve y(x) with derivative.

    `curve` is a callable x -> (y, y').  The traversal must stay strictly
    inside the chimney (f > 0) and keep the radius monotone in the travel
    direction (sign(xf - x0) * (x + y y') > 0); the velocities follow from
    the time law xdot = f/(x + y y') and the control is solved from the
    dynamics pointwise.
    """
    if x0 == xf:
        raise ValueError("degenerate x-range")
    xs = np.linspace(x0, xf, n)
    y, yp = curve(xs)
    y = np.asarray(y, dtype=float)
    yp = np.asarray(yp, dtype=float)

    f = purity_rate(xs, y, system)
    if np.any(f <= 0.0):
        raise ChimneyViolation(f"f <= 0 on the curve, min f = {float(f.min())}")
    radial = xs + y * yp
    sgn = 1.0 if xf > x0 else -1.0
    if np.any(sgn * radial <= 0.0):
        raise RadiusTurnaround("x + y*y' is not positive along the travel direction")

    xdot = f / radial
    ydot = yp * xdot
    r2 = xs * xs + y * y
    u = (
        xs * ydot - y * xdot
        - xs * system.b2 - system.alpha2 * xs * y
        + y * system.b1 + system.alpha1 * xs * y
    ) / r2
    dtdx = radial / f
    t = cumulative_simpson(dtdx, x=xs, initial=0.0)
    return ControlProfile(x=xs, y=y, yp=yp, u=u, t=t, dtdx=dtdx)
