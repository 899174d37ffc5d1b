"""Bounded-control time-minimal synthesis via the switching map.

With |u| <= 1 the maximum principle makes optimal controls bang-bang:
u = -sign(<p, g(q)>) with g(q) = (-y, x).  Instead of shooting for the
costate, consecutive switching times are computed algebraically: the
affine fields live in the semi-direct product gl(2) x R^2, where the
arc generator is Z = (B + eps*C, b) with C = [[0,-1],[1,0]], and a
switch occurs at the first t > 0 where

    det( g(q0), [exp(-t ad_Z)(C, 0)](q0) ) = 0,

taking the initial point of each arc as the previous switching point.
The adjoint exponential is a 6x6 matrix exponential evaluated by
scaling and squaring.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .planar_system import PlanarSystem, Trajectory, integrate

T_MIN = 1e-6
SCAN_STEP = 1e-3
BISECT_TOL = 1e-10

C_MATRIX = np.array([[0.0, -1.0], [1.0, 0.0]])


@dataclass(frozen=True)
class LieElement:
    """Element (M, v) of gl(2) x R^2, acting on the plane affinely as M q + v."""

    M: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "M", np.asarray(self.M, dtype=float))
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float))

    def apply(self, q) -> np.ndarray:
        return self.M @ np.asarray(q, dtype=float) + self.v

    def coords(self) -> np.ndarray:
        return np.array([self.M[0, 0], self.M[0, 1], self.M[1, 0], self.M[1, 1],
                         self.v[0], self.v[1]])

    @staticmethod
    def from_coords(z) -> "LieElement":
        z = np.asarray(z, dtype=float)
        return LieElement(M=np.array([[z[0], z[1]], [z[2], z[3]]]), v=z[4:6].copy())


BASIS = tuple(LieElement.from_coords(np.eye(6)[i]) for i in range(6))


def bracket(a: LieElement, b: LieElement) -> LieElement:
    return LieElement(M=a.M @ b.M - b.M @ a.M, v=a.M @ b.v - b.M @ a.v)


def g_field(q) -> np.ndarray:
    x, y = q
    return np.array([-y, x])


def pmp_hamiltonian(q, p, u, system: PlanarSystem) -> float:
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    drift = system.b + np.array([system.alpha1 * q[0], system.alpha2 * q[1]])
    return 1.0 + float(p @ (drift + u * g_field(q)))


def bang_control(q, p):
    """Extremal control, or None on the switching locus <p, g(q)> = 0."""
    phi = float(np.asarray(p, dtype=float) @ g_field(q))
    if abs(phi) <= 1e-12:
        return None
    return 1.0 if phi < 0.0 else -1.0


def arc_generator(system: PlanarSystem, eps: float) -> LieElement:
    return LieElement(
        M=np.array([[system.alpha1, 0.0], [0.0, system.alpha2]]) + eps * C_MATRIX,
        v=system.b,
    )


def ad_matrix(system: PlanarSystem, eps: float) -> np.ndarray:
    """6x6 adjoint of the arc generator: column i holds coords of [Z, e_i]."""
    Z = arc_generator(system, eps)
    return np.stack([bracket(Z, e).coords() for e in BASIS], axis=1)


def expm_small(A: np.ndarray) -> np.ndarray:
    """Matrix exponential by scaling and squaring with a series kernel.

    Squarings bring the norm under 0.5, where the truncated Taylor
    series converges past double precision.
    """
    A = np.asarray(A, dtype=float)
    norm = float(np.linalg.norm(A, np.inf))
    s = max(0, math.ceil(math.log2(norm / 0.5))) if norm > 0.5 else 0
    X = A / (2.0**s)
    E = np.eye(A.shape[0]) + X
    term = X
    for k in range(2, 24):
        term = term @ X / k
        E = E + term
        if float(np.abs(term).max()) < 1e-18:
            break
    for _ in range(s):
        E = E @ E
    return E


def lie_exp_apply(t: float, adZ: np.ndarray, elem: LieElement) -> LieElement:
    return LieElement.from_coords(expm_small(-t * adZ) @ elem.coords())


def switching_determinant(t: float, q0, eps: float, system: PlanarSystem,
                          adZ: np.ndarray | None = None) -> float:
    q0 = np.asarray(q0, dtype=float)
    if adZ is None:
        adZ = ad_matrix(system, eps)
    w = lie_exp_apply(t, adZ, LieElement(M=C_MATRIX, v=np.zeros(2))).apply(q0)
    g0 = g_field(q0)
    return float(g0[0] * w[1] - g0[1] * w[0])


def next_switch_time(q0, eps: float, system: PlanarSystem,
                     t_min: float = T_MIN, t_max: float = 10.0,
                     step: float = SCAN_STEP):
    """Smallest root of the switching determinant in (t_min, t_max], or None.

    Uniform scan for a sign change, then bisection; t_min shields the
    structural root at t = 0, where the transported field still equals
    g(q0).
    """
    if not 0.0 < t_min < t_max:
        raise ValueError(f"need 0 < t_min < t_max, got {t_min}, {t_max}")
    q0 = np.asarray(q0, dtype=float)
    adZ = ad_matrix(system, eps)
    c_step = expm_small(-step * adZ)
    g0 = g_field(q0)

    def det_of(z):
        w = LieElement.from_coords(z).apply(q0)
        return float(g0[0] * w[1] - g0[1] * w[0])

    t_prev = t_min
    z = expm_small(-t_min * adZ) @ LieElement(M=C_MATRIX, v=np.zeros(2)).coords()
    d_prev = det_of(z)
    if d_prev == 0.0:
        return t_min
    while t_prev < t_max:
        t_next = min(t_prev + step, t_max)
        z = c_step @ z if t_next == t_prev + step else \
            expm_small(-t_next * adZ) @ LieElement(M=C_MATRIX, v=np.zeros(2)).coords()
        d_next = det_of(z)
        if d_next == 0.0:
            return t_next
        if d_prev * d_next < 0.0:
            lo, hi, d_lo = t_prev, t_next, d_prev
            while hi - lo > BISECT_TOL:
                mid = 0.5 * (lo + hi)
                d_mid = switching_determinant(mid, q0, eps, system, adZ)
                if d_mid == 0.0:
                    return mid
                if d_lo * d_mid < 0.0:
                    hi = mid
                else:
                    lo, d_lo = mid, d_mid
            return 0.5 * (lo + hi)
        t_prev, d_prev = t_next, d_next
    return None


@dataclass(frozen=True)
class BangBangSchedule:
    initial_sign: float
    switches: tuple  # of (time, state 2-vector)
    horizon: float

    @property
    def switch_times(self) -> np.ndarray:
        return np.array([t for t, _ in self.switches])

    @property
    def gaps(self) -> np.ndarray:
        return np.diff(np.concatenate([[0.0], self.switch_times]))


@dataclass(frozen=True)
class SynthesisResult:
    schedule: BangBangSchedule
    arcs: tuple  # per-arc Trajectory, times relative to the arc start
    constant_plus: Trajectory
    constant_minus: Trajectory

    @property
    def trajectory(self) -> Trajectory:
        """Arcs concatenated on the absolute clock, junction samples deduplicated."""
        ts, qs, us = [self.arcs[0].t], [self.arcs[0].q], [self.arcs[0].u]
        offset = float(self.arcs[0].t[-1])
        for arc in self.arcs[1:]:
            ts.append(arc.t[1:] + offset)
            qs.append(arc.q[1:])
            us.append(arc.u[1:])
            offset += float(arc.t[-1])
        return Trajectory(np.concatenate(ts), np.concatenate(qs), np.concatenate(us))

    @property
    def arc_index(self) -> np.ndarray:
        """Arc label per sample of the concatenated trajectory."""
        counts = [self.arcs[0].t.size] + [arc.t.size - 1 for arc in self.arcs[1:]]
        return np.repeat(np.arange(len(self.arcs)), counts)


def synthesize(q0, eps0: float, system: PlanarSystem, horizon: float,
               max_switches: int = 16, dt: float = 1e-3,
               t_min: float = T_MIN, step: float = SCAN_STEP) -> SynthesisResult:
    """Concatenate bang arcs, switching whenever the transported field
    realigns with g at the arc's start point.

    Each arc is integrated by RK4 up to its switch (or the horizon), the
    switch state is recorded, and the sign flips.  The two constant-sign
    trajectories over the same horizon are returned for comparison.
    """
    if eps0 not in (+1.0, -1.0, +1, -1):
        raise ValueError(f"initial sign must be +1 or -1, got {eps0}")
    q0 = np.asarray(q0, dtype=float)
    if np.linalg.norm(q0) > 1.0 + 1e-9:
        raise ValueError("initial state outside the closed unit ball")

    arcs = []
    switches = []
    eps = float(eps0)
    q, elapsed = q0, 0.0
    while True:
        remaining = horizon - elapsed
        t_sw = None
        if len(switches) < max_switches and remaining > t_min:
            t_sw = next_switch_time(q, eps, system, t_min=t_min, t_max=remaining, step=step)
        T_arc = remaining if t_sw is None else t_sw
        arc = integrate(q, lambda t: eps, system, dt=dt, T=T_arc)
        arcs.append(arc)
        q = arc.q[-1]
        elapsed += T_arc
        if t_sw is None or elapsed >= horizon - 1e-12:
            break
        switches.append((elapsed, q.copy()))
        eps = -eps

    schedule = BangBangSchedule(initial_sign=float(eps0), switches=tuple(switches), horizon=horizon)
    const_plus = integrate(q0, lambda t: 1.0, system, dt=dt, T=horizon)
    const_minus = integrate(q0, lambda t: -1.0, system, dt=dt, T=horizon)
    return SynthesisResult(schedule=schedule, arcs=tuple(arcs),
                           constant_plus=const_plus, constant_minus=const_minus)
