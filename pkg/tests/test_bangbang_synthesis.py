import math

import numpy as np
import pytest
from scipy.linalg import expm as scipy_expm

import blochpurity as bb
from blochpurity import LieElement, PlanarSystem
from blochpurity import bangbang_synthesis as bs
from conftest import random_planar_system


def random_element(rng):
    return LieElement(M=rng.normal(size=(2, 2)), v=rng.normal(size=2))


@pytest.fixture
def table2_system():
    return PlanarSystem(-2.0, -1.0, -4.0, -3.0)


# -------------------------------------------------------------- pmp and law

def test_hamiltonian_at_zero_costate(table_system):
    assert bb.pmp_hamiltonian([0.3, -0.2], [0.0, 0.0], 0.7, table_system) == 1.0


def test_hamiltonian_linear_in_control(table_system):
    rng = np.random.default_rng(1)
    for _ in range(20):
        q = rng.normal(size=2)
        p = rng.normal(size=2)
        phi = p @ np.array([-q[1], q[0]])
        gap = (bb.pmp_hamiltonian(q, p, 1.0, table_system)
               - bb.pmp_hamiltonian(q, p, -1.0, table_system))
        assert gap == pytest.approx(2.0 * phi, rel=1e-12, abs=1e-14)


def test_hamiltonian_worked_value():
    s = PlanarSystem(0.0, 0.0, -1.0, -1.0)
    # 1 + <(0,1), (-1,0) + (0,1)> = 2
    assert bb.pmp_hamiltonian([1.0, 0.0], [0.0, 1.0], 1.0, s) == pytest.approx(2.0, rel=1e-15)


def test_bang_control_cases():
    q = [1.0, 0.0]  # g(q) = (0, 1)
    assert bb.bang_control(q, [0.0, -1.0]) == 1.0
    assert bb.bang_control(q, [0.0, 1.0]) == -1.0
    assert bb.bang_control(q, [1.0, 0.0]) is None


# ------------------------------------------------------------------ algebra

def test_bracket_matrix_units():
    e1, e2 = bs.BASIS[0], bs.BASIS[1]
    out = bb.bracket(e1, e2)
    assert np.array_equal(out.coords(), e2.coords())


def test_bracket_generator_with_translation(table_system):
    Z = bs.arc_generator(table_system, 1.0)
    out = bb.bracket(Z, bs.BASIS[4])
    # (0, alpha1*e5 + eps*e6)
    assert np.array_equal(out.coords(), [0.0, 0.0, 0.0, 0.0, -3.0, 1.0])


def test_bracket_antisymmetry_and_self():
    rng = np.random.default_rng(6)
    for _ in range(50):
        a = random_element(rng)
        b = random_element(rng)
        assert np.all(bb.bracket(a, a).coords() == 0.0)
        assert np.array_equal(bb.bracket(a, b).coords(), -bb.bracket(b, a).coords())


def test_bracket_jacobi_identity():
    rng = np.random.default_rng(8)
    for _ in range(1000):
        a, b, c = (random_element(rng) for _ in range(3))
        j = (bb.bracket(a, bb.bracket(b, c)).coords()
             + bb.bracket(b, bb.bracket(c, a)).coords()
             + bb.bracket(c, bb.bracket(a, b)).coords())
        assert np.max(np.abs(j)) <= 1e-12


def test_adjoint_matches_structural_bracket():
    rng = np.random.default_rng(9)
    for _ in range(100):
        s = random_planar_system(rng)
        for eps in (1.0, -1.0):
            ad = bb.ad_matrix(s, eps)
            Z = bs.arc_generator(s, eps)
            for i, e in enumerate(bs.BASIS):
                assert np.array_equal(ad @ e.coords(), bb.bracket(Z, e).coords())
            z = random_element(rng)
            assert np.max(np.abs(ad @ z.coords() - bb.bracket(Z, z).coords())) <= 1e-12


def test_adjoint_action_on_e2(table_system):
    for eps in (1.0, -1.0):
        ad = bb.ad_matrix(table_system, eps)
        want = [-eps, table_system.alpha1 - table_system.alpha2, 0.0, eps,
                -table_system.b2, 0.0]
        assert np.array_equal(ad @ np.eye(6)[1], want)


def test_adjoint_action_on_e5_worked(table2_system):
    ad = bb.ad_matrix(table2_system, 1.0)
    assert np.array_equal(ad @ np.eye(6)[4], [0.0, 0.0, 0.0, 0.0, -4.0, 1.0])


def test_adjoint_sign_flip(table2_system):
    plus = bb.ad_matrix(table2_system, 1.0)
    minus = bb.ad_matrix(table2_system, -1.0)
    neutral = bb.ad_matrix(table2_system, 0.0)
    assert np.array_equal(plus + minus, 2.0 * neutral)
    assert np.any(plus != minus)


# -------------------------------------------------------------- exponential

def _expm_longdouble(A, terms=30):
    # series kernel in 80-bit arithmetic after norm reduction
    A = A.astype(np.longdouble)
    norm = float(np.abs(A).sum(axis=1).max())
    s = max(0, math.ceil(math.log2(norm / 0.25))) if norm > 0.25 else 0
    X = A / np.longdouble(2.0) ** s
    E = np.eye(A.shape[0], dtype=np.longdouble)
    term = np.eye(A.shape[0], dtype=np.longdouble)
    for k in range(1, terms + 1):
        term = term @ X / np.longdouble(k)
        E = E + term
    for _ in range(s):
        E = E @ E
    return E.astype(float)


def test_expm_identity_at_zero(table2_system):
    ad = bb.ad_matrix(table2_system, 1.0)
    assert np.array_equal(bs.expm_small(0.0 * ad), np.eye(6))


def test_expm_against_series_and_pade():
    # the adjoint has eigenvalues with positive real part, so these
    # exponentials can be huge; compare relative to the oracle's scale
    rng = np.random.default_rng(12)
    for _ in range(10):
        s = random_planar_system(rng)
        ad = bb.ad_matrix(s, 1.0 if rng.random() < 0.5 else -1.0)
        for t in rng.uniform(-5.0, 5.0, 4):
            E = bs.expm_small(-t * ad)
            oracle = _expm_longdouble(-t * ad)
            scale = max(1.0, float(np.abs(oracle).max()))
            assert np.max(np.abs(E - oracle)) <= 1e-9 * scale
            assert np.max(np.abs(E - scipy_expm(-t * ad))) <= 1e-9 * scale


def test_expm_matches_plain_taylor_in_convergent_regime():
    # a bare 30-term series needs ||tA|| small; unit-norm directions keep
    # the truncation far below the comparison tolerance over |t| <= 5
    rng = np.random.default_rng(13)
    for _ in range(5):
        s = random_planar_system(rng)
        ad = bb.ad_matrix(s, 1.0)
        A = ad / np.linalg.norm(ad, np.inf)
        for t in rng.uniform(-5.0, 5.0, 3):
            series = np.eye(6)
            term = np.eye(6)
            for k in range(1, 31):
                term = term @ (t * A) / k
                series = series + term
            assert np.max(np.abs(bs.expm_small(t * A) - series)) <= 1e-9


def test_expm_semigroup(table2_system):
    ad = bb.ad_matrix(table2_system, -1.0)
    rng = np.random.default_rng(14)
    for _ in range(10):
        t1, t2 = rng.uniform(-2.5, 2.5, 2)
        lhs = bs.expm_small(-t1 * ad) @ bs.expm_small(-t2 * ad)
        rhs = bs.expm_small(-(t1 + t2) * ad)
        assert np.max(np.abs(lhs - rhs)) <= 1e-9


def test_lie_exp_derivative_at_zero(table2_system):
    rng = np.random.default_rng(15)
    ad = bb.ad_matrix(table2_system, 1.0)
    Z = bs.arc_generator(table2_system, 1.0)
    elem = random_element(rng)
    h = 1e-6
    fd = (bb.lie_exp_apply(h, ad, elem).coords()
          - bb.lie_exp_apply(-h, ad, elem).coords()) / (2.0 * h)
    want = -bb.bracket(Z, elem).coords()
    assert np.max(np.abs(fd - want)) <= 1e-6


def test_lie_exp_identity(table2_system):
    ad = bb.ad_matrix(table2_system, 1.0)
    elem = LieElement(M=[[1.0, 2.0], [3.0, 4.0]], v=[5.0, 6.0])
    out = bb.lie_exp_apply(0.0, ad, elem)
    assert np.array_equal(out.coords(), elem.coords())


# ---------------------------------------------------------------- switching

def test_switching_determinant_vanishes_at_zero(table2_system):
    q0 = 1e-3 * np.array([-2.0, -1.0]) / np.sqrt(5.0)
    assert bb.switching_determinant(0.0, q0, 1.0, table2_system) == 0.0


def test_next_switch_time_root_contract(table2_system):
    q0 = 1e-3 * np.array([-2.0, -1.0]) / np.sqrt(5.0)
    for eps in (1.0, -1.0):
        t = bb.next_switch_time(q0, eps, table2_system, t_max=6.0)
        assert t is not None
        assert t > bs.T_MIN
        assert abs(bb.switching_determinant(t, q0, eps, table2_system)) <= 1e-8


def test_next_switch_time_validates_window(table2_system):
    q0 = np.array([0.1, 0.1])
    with pytest.raises(ValueError):
        bb.next_switch_time(q0, 1.0, table2_system, t_min=0.0, t_max=1.0)
    with pytest.raises(ValueError):
        bb.next_switch_time(q0, 1.0, table2_system, t_min=2.0, t_max=1.0)


def test_equal_gaps_without_translation():
    # b = 0 makes the problem scale-free in time: gaps between successive
    # switches repeat exactly
    s = PlanarSystem(0.0, 0.0, -3.0, -0.6)
    res = bb.synthesize(np.array([0.1, 0.4]), 1.0, s, horizon=2.5)
    gaps = res.schedule.gaps
    assert gaps.size >= 3
    assert np.max(np.abs(gaps[1:] - gaps[0])) <= 1e-6


def test_flow_transport_equivalence():
    # the adjoint exponential evaluated at the arc start must agree with
    # transporting g(q(t)) back along the linearized flow
    rng = np.random.default_rng(19)
    for trial in range(4):
        s = random_planar_system(rng)
        eps = 1.0 if trial % 2 == 0 else -1.0
        t_end = 2.0 if trial < 2 else 0.7
        q0 = rng.uniform(-0.2, 0.2, 2)
        ad = bb.ad_matrix(s, eps)
        w = bb.lie_exp_apply(t_end, ad, LieElement(M=bs.C_MATRIX, v=np.zeros(2))).apply(q0)

        traj = bb.integrate(q0, lambda t: eps, s, dt=1e-4, T=t_end)
        ZM = np.diag([s.alpha1, s.alpha2]) + eps * bs.C_MATRIX
        v = bs.C_MATRIX @ traj.q[-1]
        dt = 1e-4
        n = int(round(t_end / dt))
        for _ in range(n):  # RK4 on vdot = -ZM v, constant coefficients
            k1 = -ZM @ v
            k2 = -ZM @ (v + 0.5 * dt * k1)
            k3 = -ZM @ (v + 0.5 * dt * k2)
            k4 = -ZM @ (v + dt * k3)
            v = v + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        assert np.max(np.abs(w - v)) <= 1e-5


# ---------------------------------------------------------------- synthesis

def test_synthesize_validates_inputs(table2_system):
    with pytest.raises(ValueError):
        bb.synthesize(np.array([0.1, 0.1]), 0.5, table2_system, horizon=1.0)
    with pytest.raises(ValueError):
        bb.synthesize(np.array([2.0, 0.0]), 1.0, table2_system, horizon=1.0)


def test_synthesize_no_switch_budget(table2_system):
    q0 = 1e-3 * np.array([-2.0, -1.0]) / np.sqrt(5.0)
    res = bb.synthesize(q0, 1.0, table2_system, horizon=1.0, max_switches=0)
    assert len(res.arcs) == 1
    assert res.schedule.switches == ()
    traj = res.trajectory
    assert np.array_equal(traj.q, res.constant_plus.q)
    assert np.array_equal(traj.t, res.constant_plus.t)


def test_synthesize_switch_contract(table2_system):
    q0 = 1e-3 * np.array([-2.0, -1.0]) / np.sqrt(5.0)
    res = bb.synthesize(q0, 1.0, table2_system, horizon=6.0)
    sched = res.schedule
    assert len(sched.switches) >= 2
    times = sched.switch_times
    assert np.all(times > 0)
    assert np.all(np.diff(times) > 0)
    assert np.all(sched.gaps > 0)

    # switch states sit on the concatenated trajectory at the switch times
    traj = res.trajectory
    for t_sw, state in sched.switches:
        idx = int(np.argmin(np.abs(traj.t - t_sw)))
        assert abs(traj.t[idx] - t_sw) <= 1e-9
        assert np.max(np.abs(traj.q[idx] - state)) <= 1e-6

    # the determinant vanishes at every recorded switch, each arc taking
    # the previous switch state as its base point
    eps = sched.initial_sign
    prev_t, prev_q = 0.0, q0
    for t_sw, state in sched.switches:
        det = bb.switching_determinant(t_sw - prev_t, prev_q, eps, table2_system)
        assert abs(det) <= 1e-8
        prev_t, prev_q, eps = t_sw, state, -eps

    # arc labels cover the samples one arc at a time
    labels = res.arc_index
    assert labels.size == traj.t.size
    assert labels[0] == 0
    assert labels[-1] == len(res.arcs) - 1
    assert np.all(np.diff(labels) >= 0)


def test_synthesize_horizon_reached(table2_system):
    q0 = 1e-3 * np.array([-2.0, -1.0]) / np.sqrt(5.0)
    res = bb.synthesize(q0, -1.0, table2_system, horizon=3.0)
    assert res.trajectory.t[-1] == pytest.approx(3.0, abs=1e-9)
    assert res.constant_plus.t[-1] == pytest.approx(3.0, abs=1e-9)
    assert res.constant_minus.t[-1] == pytest.approx(3.0, abs=1e-9)
    # all three runs stay in the closed unit ball
    for traj in (res.trajectory, res.constant_plus, res.constant_minus):
        assert traj.r.max() <= 1.0 + 1e-9
