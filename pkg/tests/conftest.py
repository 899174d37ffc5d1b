import numpy as np
import pytest

import blochpurity as bp


def random_lindblad_model(rng, n_vectors=None, require_b=False):
    """Random dissipation model with B negative definite (rejection sampled)."""
    while True:
        n = int(n_vectors) if n_vectors else int(rng.integers(1, 4))
        ls = tuple(
            tuple(complex(a, b) for a, b in zip(rng.normal(size=3), rng.normal(size=3)))
            for _ in range(n)
        )
        m = bp.build_dissipation(bp.LindbladSpec(ls))
        if not m.is_negative_definite:
            continue
        if require_b and np.linalg.norm(m.b) < 1e-6:
            continue
        return m


def random_planar_system(rng, b_scale=2.0):
    return bp.PlanarSystem(
        b1=float(rng.uniform(-b_scale, b_scale)),
        b2=float(rng.uniform(-b_scale, b_scale)),
        alpha1=float(rng.uniform(-5.0, -0.5)),
        alpha2=float(rng.uniform(-5.0, -0.5)),
    )


def batched_ball_run(models, controls, q0s, T=10.0, dt=1e-3):
    """RK4 for a stack of models at once; returns max radius seen anywhere.

    `controls` is (n_models, n_segments, 3); segment s covers
    [s*T/n_segments, (s+1)*T/n_segments).
    """
    Bs = np.stack([m.B for m in models])
    bs = np.stack([m.b for m in models])
    n_seg = controls.shape[1]

    def rhs(q, u):
        return bs + np.einsum("nij,nj->ni", Bs, q) + np.cross(u, q)

    q = q0s.copy()
    rmax = float(np.linalg.norm(q, axis=1).max())
    steps = int(round(T / dt))
    for k in range(steps):
        t = k * dt
        u = controls[:, min(int(t / (T / n_seg)), n_seg - 1), :]
        k1 = rhs(q, u)
        k2 = rhs(q + 0.5 * dt * k1, u)
        k3 = rhs(q + 0.5 * dt * k2, u)
        k4 = rhs(q + dt * k3, u)
        q = q + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        rmax = max(rmax, float(np.linalg.norm(q, axis=1).max()))
    return rmax


@pytest.fixture
def table_system():
    return bp.PlanarSystem(1.0, 2.0, -3.0, -4.0)
