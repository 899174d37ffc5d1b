"""Bloch-ball representation of a dissipative two-level system.

A set of Lindblad vectors l_j (the traceless parts of the jump
operators) induces an affine drift on the Bloch vector q,

    qdot = b + B q + u x q,      B = A - tr(A) I,

with A built from symmetrized outer products of the l_j and b from
their cross products with their conjugates.  The control u only rotates
q, so the purity P = (1 + |q|^2)/2 changes at the control-independent
rate f(q) = <q, b + Bq>.  The set where f >= 0 (the escape chimney) is
bounded by an ellipsoid through the origin; the chimney's farthest
point from the origin (the apogee) is the state of maximal reachable
purity.  This module builds the model, evaluates the chimney geometry,
and fixes the boundary states used by the planar solvers.

Geometry helpers accept 2-vectors as well, for models already reduced
to the plane.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .planar_system import PlanarSystem, Trajectory

_IMAG_TOL = 1e-12


class ReductionError(ValueError):
    """Model does not admit the planar reduction."""


@dataclass(frozen=True)
class LindbladSpec:
    """Traceless parts of the jump operators, as complex 3-vectors."""

    lindblad_vectors: tuple
    control_vector: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if len(self.lindblad_vectors) == 0:
            raise ValueError("need at least one Lindblad vector")
        for l in self.lindblad_vectors:
            arr = np.asarray(l, dtype=complex)
            if arr.shape != (3,) or not np.all(np.isfinite(arr.view(float))):
                raise ValueError(f"Lindblad vectors must be finite complex 3-vectors, got {l!r}")
        u = np.asarray(self.control_vector, dtype=float)
        if u.shape != (3,) or not np.all(np.isfinite(u)):
            raise ValueError(f"control vector must be a finite real 3-vector, got {self.control_vector!r}")


@dataclass(frozen=True)
class DissipationModel:
    """Affine drift data (A, b, B).  A may be None for geometry-only models."""

    A: np.ndarray | None
    b: np.ndarray
    B: np.ndarray
    n_lindblad: int | None = None

    @property
    def dim(self) -> int:
        return self.b.shape[0]

    @cached_property
    def B_eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(0.5 * (self.B + self.B.T))

    @property
    def is_negative_definite(self) -> bool:
        return bool(self.B_eigenvalues.max() < -1e-12)

    def require_negative_definite(self):
        if not self.is_negative_definite:
            raise ValueError(
                f"B must be negative definite for chimney geometry, eigenvalues {self.B_eigenvalues}"
            )
        return self


def model_from_planar(system: PlanarSystem) -> DissipationModel:
    """Geometry-only planar model with b = (b1, b2) and B = diag(alpha1, alpha2)."""
    return DissipationModel(
        A=None,
        b=np.array([system.b1, system.b2]),
        B=np.diag([system.alpha1, system.alpha2]),
    )


def build_dissipation(spec: LindbladSpec) -> DissipationModel:
    """Assemble (A, b, B) from the Lindblad vectors.

    A = (1/2) sum_j (l_j conj(l_j)^T + conj(l_j) l_j^T) and
    b = i sum_j l_j x conj(l_j) are real by construction; a residue
    above tolerance signals a bug, not bad input.
    """
    A = np.zeros((3, 3), dtype=complex)
    b = np.zeros(3, dtype=complex)
    for l in spec.lindblad_vectors:
        l = np.asarray(l, dtype=complex)
        A += 0.5 * (np.outer(l, l.conj()) + np.outer(l.conj(), l))
        b += 1j * np.cross(l, l.conj())
    residue = max(float(np.abs(A.imag).max()), float(np.abs(b.imag).max()))
    if residue > _IMAG_TOL:
        raise ArithmeticError(f"imaginary residue {residue} in (A, b); construction is broken")
    A = A.real
    return DissipationModel(
        A=A,
        b=b.real,
        B=A - np.trace(A) * np.eye(3),
        n_lindblad=len(spec.lindblad_vectors),
    )


def bloch_rhs(q, u, m: DissipationModel) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return m.b + m.B @ q + np.cross(u, q)


def purity(q) -> float:
    r2 = float(np.dot(q, q))
    if r2 > 1.0 + 2e-9:
        raise ValueError(f"state outside the Bloch ball, |q| = {math.sqrt(r2)}")
    return 0.5 * (1.0 + r2)


def purity_derivative(q, m: DissipationModel) -> float:
    q = np.asarray(q, dtype=float)
    return float(q @ (m.b + m.B @ q))


def chimney_radius(qhat, m: DissipationModel):
    """Nonzero root g(qhat) of f along the ray through qhat.

    Vectorized: qhat may be a single direction or an (n, dim) stack of
    unit vectors.
    """
    m.require_negative_definite()
    qhat = np.asarray(qhat, dtype=float)
    single = qhat.ndim == 1
    Q = qhat[None, :] if single else qhat
    norms = np.linalg.norm(Q, axis=1)
    if np.any(np.abs(norms - 1.0) > 1e-9):
        raise ValueError("directions must be unit vectors")
    denom = np.einsum("ni,ij,nj->n", Q, m.B, Q)
    g = -(Q @ m.b) / denom
    return float(g[0]) if single else g


@dataclass(frozen=True)
class ChimneyGeometry:
    apogee: np.ndarray
    apogee_radius: float
    apogee_direction: np.ndarray
    degenerate: bool = False


def _circle_dirs(thetas):
    return np.stack([np.cos(thetas), np.sin(thetas)], axis=1)


def _sphere_dirs(thetas, phis):
    th, ph = np.meshgrid(thetas, phis, indexing="ij")
    return np.stack(
        [np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], axis=-1
    ).reshape(-1, 3)


def apogee(m: DissipationModel) -> ChimneyGeometry:
    """Maximize g over directions: dense angular grid, then local refinement.

    g is smooth and the grid is fine enough that the refined grid argmax
    is the global maximum.  A zero b makes every direction a root of f;
    that case is flagged instead of maximized.
    """
    m.require_negative_definite()
    if np.linalg.norm(m.b) < 1e-15:
        zero = np.zeros(m.dim)
        return ChimneyGeometry(apogee=zero, apogee_radius=0.0, apogee_direction=zero, degenerate=True)

    if m.dim == 2:
        thetas = np.linspace(0.0, 2.0 * math.pi, 4096, endpoint=False)
        g = chimney_radius(_circle_dirs(thetas), m)
        k = int(np.argmax(g))
        step = thetas[1] - thetas[0]

        def neg_g(th):
            return -chimney_radius(np.array([math.cos(th), math.sin(th)]), m)

        res = minimize_scalar(
            neg_g,
            bounds=(thetas[k] - step, thetas[k] + step),
            method="bounded",
            options={"xatol": 1e-12},
        )
        direction = np.array([math.cos(res.x), math.sin(res.x)])
        radius = -float(res.fun)
    elif m.dim == 3:
        thetas = np.linspace(0.0, math.pi, 256)
        phis = np.linspace(0.0, 2.0 * math.pi, 512, endpoint=False)
        dirs = _sphere_dirs(thetas, phis)
        g = chimney_radius(dirs, m)
        k = int(np.argmax(g))
        th0, ph0 = math.acos(np.clip(dirs[k, 2], -1, 1)), math.atan2(dirs[k, 1], dirs[k, 0])

        def neg_g(angles):
            th, ph = angles
            d = np.array([math.sin(th) * math.cos(ph), math.sin(th) * math.sin(ph), math.cos(th)])
            return -chimney_radius(d, m)

        res = minimize(
            neg_g, np.array([th0, ph0]), method="Nelder-Mead",
            options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 2000},
        )
        th, ph = res.x
        direction = np.array([math.sin(th) * math.cos(ph), math.sin(th) * math.sin(ph), math.cos(th)])
        radius = -float(res.fun)
    else:
        raise ValueError(f"unsupported dimension {m.dim}")

    return ChimneyGeometry(
        apogee=radius * direction, apogee_radius=radius, apogee_direction=direction
    )


def endpoints(m: DissipationModel, eps: float = 1e-3, delta: float = 1e-3):
    """Boundary states: q0 just off the origin along b, qf just short of the apogee."""
    bnorm = np.linalg.norm(m.b)
    if bnorm < 1e-15:
        raise ValueError("b = 0: no canonical initial direction and a degenerate apogee")
    if eps <= 0:
        raise ValueError("eps must be positive; the origin itself is a dynamics singularity")
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    geo = apogee(m)
    q0 = eps * m.b / bnorm
    qf = (1.0 - delta) * geo.apogee
    return q0, qf


def drift_reaches_apogee(system: PlanarSystem):
    """Whether the uncontrolled flow alone attains the apogee, with the case label.

    Case 1: isotropic drift.  Cases 2 and 3: b on a coordinate axis with
    the transverse rate dominating.
    """
    a1, a2 = system.alpha1, system.alpha2
    if a1 == a2:
        return True, 1
    if system.b1 == 0.0 and 2.0 * a1 - a2 < 0.0:
        return True, 2
    if system.b2 == 0.0 and 2.0 * a2 - a1 < 0.0:
        return True, 3
    return False, None


def reduce_to_planar(m: DissipationModel):
    """Rotate a single-Lindblad model into the plane spanned by b and one
    transverse eigenvector of B.

    Returns (PlanarSystem, R) with R orthonormal, rows the new axes: new
    coordinates are R @ q, the first axis is along b, and the dropped
    third axis is an eigenvector of B (its coordinate decays on its own).
    The transverse eigenvalue kept is the smallest remaining one, which
    honors the alpha2 < alpha1 convention whenever some choice does.
    """
    if m.n_lindblad != 1:
        raise ReductionError(f"planar reduction requires exactly one Lindblad vector, model has {m.n_lindblad}")
    bnorm = np.linalg.norm(m.b)
    if bnorm < 1e-15:
        raise ReductionError("b = 0: no distinguished plane")
    bhat = m.b / bnorm
    lam = float(bhat @ m.B @ bhat)
    if np.linalg.norm(m.B @ m.b - lam * m.b) / bnorm > 1e-9:
        raise ReductionError("b is not an eigenvector of B; the plane does not decouple")

    # b's axis is B-invariant, so the orthogonal complement is too:
    # diagonalize B restricted to the complement to pick the kept axis.
    k = int(np.argmin(np.abs(bhat)))
    s1 = np.eye(3)[k] - bhat[k] * bhat
    s1 /= np.linalg.norm(s1)
    s2 = np.cross(bhat, s1)
    S = np.stack([s1, s2], axis=1)
    w, V = np.linalg.eigh(S.T @ (0.5 * (m.B + m.B.T)) @ S)

    r0 = bhat
    r1 = S @ V[:, 0]  # eigh sorts ascending, so column 0 is the smaller rate
    R = np.stack([r0, r1, np.cross(r0, r1)])

    b_new = R @ m.b
    system = PlanarSystem(b1=float(b_new[0]), b2=float(b_new[1]), alpha1=lam, alpha2=float(w[0]))
    return system, R


def integrate_bloch(q0, control, m: DissipationModel, dt: float = 1e-3, T: float = 1.0) -> Trajectory:
    """Fixed-step RK4 for the full 3-d dynamics; `control` maps t to a 3-vector."""
    if dt <= 0 or T <= 0:
        raise ValueError(f"need dt > 0 and T > 0, got dt={dt}, T={T}")
    n_full = int(math.floor(T / dt + 1e-12))
    steps = [dt] * n_full
    rem = T - n_full * dt
    if rem > 1e-12:
        steps.append(rem)

    ts = [0.0]
    qs = [np.asarray(q0, dtype=float)]
    us = [np.asarray(control(0.0), dtype=float)]
    t, q = 0.0, qs[0]
    for h in steps:
        k1 = bloch_rhs(q, control(t), m)
        k2 = bloch_rhs(q + 0.5 * h * k1, control(t + 0.5 * h), m)
        k3 = bloch_rhs(q + 0.5 * h * k2, control(t + 0.5 * h), m)
        k4 = bloch_rhs(q + h * k3, control(t + h), m)
        q = q + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = t + h
        ts.append(t)
        qs.append(q)
        us.append(np.asarray(control(t), dtype=float))
    return Trajectory(np.array(ts), np.array(qs), np.array(us))
