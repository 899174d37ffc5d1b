"""Variational solver for the unbounded-control time-minimum problem.

The travel time along a curve y(x) through the chimney is

    T[y] = int (x + y y') / f(x, y) dx,       f = <q, b + Bq>,

so a time-minimal curve zeroes the gradient of T restricted to a
polynomial trial family: y(x) = chord + sum_i c_i (x - x0)(x - xf)^i.
The solver finds coefficient vectors where every partial I_{c_i}
vanishes, by multi-start nonlinear least squares on the residual
vector, and ranks the converged candidates by travel time.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.integrate import simpson
from scipy.optimize import least_squares, minimize

from . import bloch_model
from .planar_system import (
    ChimneyViolation,
    ControlProfile,
    PlanarSystem,
    Trajectory,
    purity_rate,
    recover_control,
)

NU_TOL = 1e-6
PENALTY = 1e6


class SolverFailure(RuntimeError):
    def __init__(self, message, best_nu=None):
        super().__init__(message)
        self.best_nu = best_nu


@dataclass(frozen=True)
class RitzProblem:
    system: PlanarSystem
    x0: float
    y0: float
    xf: float
    yf: float
    order: int
    n_nodes: int = 2001

    def __post_init__(self):
        if self.order < 1:
            raise ValueError(f"order must be >= 1, got {self.order}")
        if self.x0 == self.xf:
            raise ValueError("degenerate problem: x0 == xf")
        if self.n_nodes < 3 or self.n_nodes % 2 == 0:
            raise ValueError("n_nodes must be odd and >= 3 for Simpson quadrature")
        for x, y, label in ((self.x0, self.y0, "initial"), (self.xf, self.yf, "final")):
            if purity_rate(x, y, self.system) <= 0.0:
                raise ChimneyViolation(f"{label} endpoint is outside the escape chimney")

    @cached_property
    def xs(self) -> np.ndarray:
        return np.linspace(self.x0, self.xf, self.n_nodes)

    @cached_property
    def _chord(self):
        slope = (self.yf - self.y0) / (self.xf - self.x0)
        return self.y0 + slope * (self.xs - self.x0), slope

    @cached_property
    def _basis_matrices(self):
        # rows i = 1..order of y^i and (y^i)' on the node grid
        xs = self.xs
        Phi = np.empty((self.order, xs.size))
        dPhi = np.empty((self.order, xs.size))
        for i in range(1, self.order + 1):
            Phi[i - 1] = (xs - self.x0) * (xs - self.xf) ** i
            dPhi[i - 1] = (xs - self.xf) ** (i - 1) * ((xs - self.xf) + i * (xs - self.x0))
        return Phi, dPhi


def ritz_problem(system: PlanarSystem, order: int, eps: float = 1e-3, delta: float = 1e-3,
                 n_nodes: int = 2001) -> RitzProblem:
    """Problem with the canonical boundary states of the planar model."""
    q0, qf = bloch_model.endpoints(bloch_model.model_from_planar(system), eps, delta)
    return RitzProblem(system=system, x0=float(q0[0]), y0=float(q0[1]),
                       xf=float(qf[0]), yf=float(qf[1]), order=order, n_nodes=n_nodes)


def basis(i: int, x, problem: RitzProblem):
    """Value and derivative of the i-th trial function, i = 0 the chord."""
    x = np.asarray(x, dtype=float)
    if i == 0:
        slope = (problem.yf - problem.y0) / (problem.xf - problem.x0)
        return problem.y0 + slope * (x - problem.x0), np.full_like(x, slope)
    if i < 0 or i > problem.order:
        raise ValueError(f"basis index {i} outside 0..{problem.order}")
    val = (x - problem.x0) * (x - problem.xf) ** i
    der = (x - problem.xf) ** (i - 1) * ((x - problem.xf) + i * (x - problem.x0))
    return val, der


def curve(c, x, problem: RitzProblem):
    y, yp = basis(0, x, problem)
    for i in range(1, problem.order + 1):
        v, d = basis(i, x, problem)
        y = y + c[i - 1] * v
        yp = yp + c[i - 1] * d
    return y, yp


def curve_fn(c, problem: RitzProblem):
    return lambda x: curve(c, x, problem)


def lagrangian(x, y, yp, system: PlanarSystem):
    f = purity_rate(x, y, system)
    if np.any(np.abs(f) < 1e-12):
        raise ValueError("singular integrand: the curve touches the ellipsoid f = 0")
    return (x + y * yp) / f


def _grid_fields(c, problem: RitzProblem):
    chord, slope = problem._chord
    Phi, dPhi = problem._basis_matrices
    c = np.asarray(c, dtype=float)
    y = chord + c @ Phi
    yp = slope + c @ dPhi
    return y, yp


def chimney_depth(c, problem: RitzProblem) -> float:
    """How far the trial curve dips out of the chimney; 0 when feasible."""
    y, _ = _grid_fields(c, problem)
    f = purity_rate(problem.xs, y, problem.system)
    return float(max(0.0, -f.min()))


def residuals(c, problem: RitzProblem) -> np.ndarray:
    """Partial derivatives I_{c_i} of the travel-time functional.

    Outside the chimney the exact integrand is meaningless, so a large
    finite penalty (scaled so its norm is PENALTY*(1 + depth)) keeps the
    minimizers pointed back toward the feasible basin.
    """
    sys_ = problem.system
    xs = problem.xs
    y, yp = _grid_fields(c, problem)
    D = purity_rate(xs, y, sys_)
    if D.min() <= 0.0:
        depth = float(-D.min())
        return np.full(problem.order, PENALTY * (1.0 + depth) / np.sqrt(problem.order))
    Phi, dPhi = problem._basis_matrices
    N = xs + y * yp
    dD = sys_.b2 + 2.0 * sys_.alpha2 * y
    integrand = ((yp * Phi + y * dPhi) * D - N * dD * Phi) / D**2
    return simpson(integrand, x=xs, axis=-1)


def nu(c, problem: RitzProblem) -> float:
    return float(np.linalg.norm(residuals(c, problem)))


def travel_time(c, problem: RitzProblem) -> float:
    y, yp = _grid_fields(c, problem)
    D = purity_rate(problem.xs, y, problem.system)
    if D.min() <= 0.0:
        raise ChimneyViolation("curve leaves the escape chimney")
    return float(simpson((problem.xs + y * yp) / D, x=problem.xs))


def control_energy(c, problem: RitzProblem) -> float:
    return recover_profile(c, problem).energy


def recover_profile(c, problem: RitzProblem) -> ControlProfile:
    return recover_control(curve_fn(c, problem), problem.system,
                           problem.x0, problem.xf, n=problem.n_nodes)


@dataclass(frozen=True)
class RitzCandidate:
    restart: int
    c: np.ndarray
    nu: float
    converged: bool
    feasible: bool
    travel_time: float | None
    energy: float | None


@dataclass(frozen=True)
class RitzSolution:
    c: np.ndarray
    nu: float
    travel_time: float
    energy: float
    trajectory: Trajectory


@dataclass(frozen=True)
class RitzResult:
    problem: RitzProblem
    best: RitzSolution
    candidates: tuple


def _feasibility(c, problem):
    y, yp = _grid_fields(c, problem)
    f = purity_rate(problem.xs, y, problem.system)
    sgn = 1.0 if problem.xf > problem.x0 else -1.0
    return bool(f.min() > 0.0), bool((sgn * (problem.xs + y * yp)).min() > 0.0)


def solve(problem: RitzProblem, restarts: int = 25, seed: int = 0,
          nu_tol: float = NU_TOL) -> RitzResult:
    """Multi-start search for residual zeros, best candidate by travel time.

    Restart k draws its start from its own generator (seed + k), uniform
    on the l-inf ball of radius 2, so the result is reproducible and
    independent of evaluation order.
    """
    if restarts < 1:
        raise ValueError("need at least one restart")
    candidates = []
    for k in range(restarts):
        rng = np.random.default_rng(seed + k)
        c0 = rng.uniform(-2.0, 2.0, problem.order)
        res = least_squares(residuals, c0, args=(problem,), method="lm",
                            max_nfev=500 * (problem.order + 1))
        c_best, nu_best = res.x, nu(res.x, problem)
        if nu_best > nu_tol:
            # ill-conditioned Jacobian or a penalty plateau: derivative-free retry
            nm = minimize(nu, c_best, args=(problem,), method="Nelder-Mead",
                          options={"maxiter": 500 * problem.order,
                                   "xatol": 1e-12, "fatol": 1e-14})
            if nm.fun < nu_best:
                c_best, nu_best = nm.x, float(nm.fun)
        chimney_ok, radial_ok = _feasibility(c_best, problem)
        converged = nu_best <= nu_tol
        usable = converged and chimney_ok and radial_ok
        t = e = None
        if usable:
            profile = recover_profile(c_best, problem)
            t, e = profile.travel_time, profile.energy
        candidates.append(RitzCandidate(
            restart=k, c=np.array(c_best), nu=nu_best, converged=converged,
            feasible=chimney_ok and radial_ok, travel_time=t, energy=e,
        ))

    usable = [cand for cand in candidates if cand.travel_time is not None]
    if not usable:
        best_nu = min(cand.nu for cand in candidates)
        raise SolverFailure(
            f"no restart converged to a feasible curve; best nu = {best_nu:.3e}", best_nu)
    winner = min(usable, key=lambda cand: cand.travel_time)

    profile = recover_profile(winner.c, problem)
    trajectory = Trajectory(
        t=profile.t, q=np.column_stack([profile.x, profile.y]), u=profile.u)
    best = RitzSolution(c=winner.c, nu=winner.nu, travel_time=winner.travel_time,
                        energy=winner.energy, trajectory=trajectory)
    return RitzResult(problem=problem, best=best, candidates=tuple(candidates))
