import math
import warnings

import numpy as np
import pytest

import oracles
from ratebv import model
from ratebv.errors import ArgumentError, InvariantViolation, NumericalError
from ratebv.model import DoubleWellF, LoadPath, ProblemSpec
from ratebv.problems import double_well, scalar_convex, scalar_play
from ratebv.viscous import (ViscousTrajectory, characteristic_time, edb_residual,
                            nu_delta_initial, solve_autonomous, solve_viscous,
                            step_energy_defects)


def test_stationary_epsilon_system():
    s = scalar_convex()
    traj = solve_viscous(s, LoadPath.constant(1.0, [0.0]), [0.0], 1e-2, 1e-2)
    assert np.all(traj.states == 0.0)
    assert np.max(np.abs(edb_residual(s, traj, LoadPath.constant(1.0, [0.0])))) <= 1e-12


def test_play_closed_form():
    P = scalar_play()
    traj = solve_viscous(P.spec, P.load, P.z0, 1e-3, 1e-4)
    err = np.abs(traj.states[:, 0] - oracles.play_solution(traj.times))
    assert traj.states[-1, 0] == pytest.approx(1.0, abs=5e-3)
    assert err.max() <= 5e-3


def test_general_method_matches_separable():
    P = scalar_play()
    a = solve_viscous(P.spec, P.load, P.z0, 1e-2, 1e-2, method="separable")
    b = solve_viscous(P.spec, P.load, P.z0, 1e-2, 1e-2, method="general")
    assert np.max(np.abs(a.states - b.states)) <= 1e-8


def test_coupled_system_energy_inequality(rng):
    A = np.array([[2.0, 0.4], [0.4, 1.0]])
    V = np.array([[1.0, 0.2], [0.2, 1.5]])
    s = ProblemSpec(n=2, A=A, V=V, kappa=[0.5, 1.0], F=DoubleWellF(0.5))
    L = LoadPath([0, 1, 2], [[0, 0], [3, -2], [1, 1]])
    traj = solve_viscous(s, L, [0.0, 0.0], 5e-2, 1e-2)
    assert traj.meta["method"] == "general"
    assert np.max(step_energy_defects(s, traj, L)) <= 1e-9


def _onset_load(traj, load):
    k = int(np.argmax(np.abs(traj.rates[:, 0])))
    return float(load(traj.times[k])[0])


def test_double_well_onset_matches_reference():
    P = double_well()
    coarse = solve_viscous(P.spec, P.load, P.z0, 1e-3, 5e-5)
    with warnings.catch_warnings():
        # the reference run uses tau = 1e-5 at eps = 1e-4 (eps/tau below 2 lambda)
        warnings.simplefilter("ignore", RuntimeWarning)
        ref = solve_viscous(P.spec, P.load, P.z0, 1e-4, 1e-5)
    jumps = np.abs(np.diff(coarse.states[:, 0]))
    assert coarse.states[-1, 0] > 1.0 and jumps.max() > 10 * np.median(jumps)
    assert abs(_onset_load(coarse, P.load) - _onset_load(ref, P.load)) <= 2e-2


def test_step_condition_warning():
    P = double_well()
    with pytest.warns(RuntimeWarning):
        solve_viscous(P.spec, LoadPath.constant(0.1, [0.0]), P.z0, 1e-3, 1e-3)


def test_numerical_error_carries_step():
    P = double_well()
    with pytest.raises(NumericalError) as info:
        solve_viscous(P.spec, P.load, P.z0, 1e-3, 1e-3, max_inner=1, check_step_condition=False)
    assert info.value.step == 0


def test_argument_errors():
    P = scalar_play()
    with pytest.raises(ArgumentError):
        solve_viscous(P.spec, P.load, P.z0, 0.0, 1e-3)
    with pytest.raises(ArgumentError):
        solve_viscous(P.spec, P.load, P.z0, 1e-3, 5.0)
    with pytest.raises(ArgumentError):
        ViscousTrajectory(np.array([0.0, 0.0]), np.zeros((2, 1)), np.zeros((1, 1)), np.zeros(2),
                          np.zeros(1), np.zeros(1), 1e-3, 1e-3)


# --- autonomous system -------------------------------------------------------

def test_autonomous_stationary():
    s = scalar_convex()
    traj = solve_autonomous(s, [0.5], [0.0], tau=1e-3)
    assert traj.n_steps == 0 and traj.converged and np.all(traj.states == 0.0)


def test_autonomous_closed_form():
    s = scalar_convex()
    traj = solve_autonomous(s, [3.0], [0.0], tau=1e-4, stop_gap=1e-6)
    ref = oracles.autonomous_scalar(traj.times)
    assert np.max(np.abs(traj.states[:, 0] - ref)) <= 1e-3
    t5 = np.interp(5.0, traj.times, traj.states[:, 0])
    assert t5 == pytest.approx(2 * (1 - math.exp(-5)), abs=1e-3)
    assert traj.converged and traj.terminal_gap <= 1e-6


def test_autonomous_edb_bound():
    s = scalar_convex()
    tau = 1e-4
    traj = solve_autonomous(s, [3.0], [0.0], tau=tau, stop_gap=1e-6)
    assert np.max(np.abs(edb_residual(s, traj))) <= 10 * tau


def test_autonomous_double_well_crosses():
    P = double_well()
    z_fold = -math.sqrt(0.3)  # 30 z^2 - 9 = 0: the left branch loses stability here
    ell_star = 1.0 + 10 * z_fold ** 3 - 9 * z_fold + 1e-3
    traj = solve_autonomous(P.spec, [ell_star], [z_fold], tau=1e-4, stop_gap=1e-6)
    assert traj.converged and traj.terminal_gap <= 1e-6
    assert traj.states[-1, 0] > 1.0


def test_autonomous_energy_monotone():
    P = double_well()
    traj = solve_autonomous(P.spec, [4.5], [-0.6], tau=1e-4, stop_gap=1e-8)
    E = model.energies_I(P.spec, traj.states) - 4.5 * traj.states[:, 0]
    assert np.all(np.diff(E) <= traj.tau)


def test_autonomous_order_in_tau():
    s = scalar_convex()
    runs = [solve_autonomous(s, [3.0], [0.0], tau=t, stop_gap=1e-6, horizon_cap=5.0)
            for t in (2e-2, 1e-2, 5e-3)]

    def sup_diff(a, b):
        grid = np.linspace(0, min(a.times[-1], b.times[-1]), 2001)
        return np.max(np.abs(np.interp(grid, a.times, a.states[:, 0])
                             - np.interp(grid, b.times, b.states[:, 0])))

    d1 = sup_diff(runs[0], runs[1])
    d2 = sup_diff(runs[1], runs[2])
    assert math.log2(d1 / d2) >= 0.9


def test_autonomous_uniform_bounds():
    P = double_well()
    s = P.spec
    ell = np.array([4.5])
    z0 = np.array([-0.6])
    for delta in (0.0, 0.5):
        traj = solve_autonomous(s, ell, z0, delta=delta, tau=1e-4, stop_gap=1e-8)
        E0 = model.energy_E(s, ell, z0)
        la = float(np.sqrt(ell @ np.linalg.solve(s.A, ell)))
        bound_A = la + math.sqrt(la * la + 2 * E0)  # from 1/2|z|_A^2 - <l,z> <= E0, F >= 0
        assert max(s.norm_A(z) for z in traj.states) <= bound_A + 1e-9
        box = math.sqrt(float(s.kappa @ np.abs(s.Vinv) @ s.kappa))
        for z, r in zip(traj.states[:-1], traj.rates):
            force = s.dual_norm_V(model.grad_I(s, z) - ell)
            assert force <= box + s.norm_V(r) + delta * s.dual_norm_V(s.A @ r) + 1e-9


def test_autonomous_delta_cauchy():
    P = double_well()
    finals = [solve_autonomous(P.spec, [4.5], [-0.6], delta=d, tau=1e-4, stop_gap=1e-8)
              for d in (1e-2, 1e-3, 1e-4)]
    grid = np.linspace(0, min(f.times[-1] for f in finals), 1001)
    paths = [np.interp(grid, f.times, f.states[:, 0]) for f in finals]
    d1 = np.max(np.abs(paths[0] - paths[1]))
    d2 = np.max(np.abs(paths[1] - paths[2]))
    assert d2 < d1


def test_characteristic_time():
    s = ProblemSpec(n=2, A=np.diag([2.0, 4.0]), V=np.eye(2), kappa=[1, 1])
    assert characteristic_time(s) == pytest.approx(0.5)


# --- EDB residual -------------------------------------------------------------

def test_edb_first_order_play():
    P = scalar_play()
    r = [np.max(np.abs(edb_residual(P.spec, solve_viscous(P.spec, P.load, P.z0, 1e-3, t), P.load)))
         for t in (1e-3, 5e-4)]
    assert 1.7 <= r[0] / r[1] <= 2.3


def test_edb_midpoint_is_smaller():
    P = scalar_play()
    traj = solve_viscous(P.spec, P.load, P.z0, 1e-3, 1e-3)
    mid = np.max(np.abs(edb_residual(P.spec, traj, P.load, quadrature="midpoint")))
    sch = np.max(np.abs(edb_residual(P.spec, traj, P.load)))
    assert mid < sch


def test_per_step_energy_inequality():
    for P in (scalar_play(), double_well()):
        traj = solve_viscous(P.spec, P.load, P.z0, 1e-2, 5e-4)
        assert np.max(step_energy_defects(P.spec, traj, P.load)) <= 1e-9


# --- nu_delta -------------------------------------------------------------------

def test_nu_delta_stable():
    assert nu_delta_initial(scalar_convex(), 1.0, [0.5], [0.0]) == (0.0, 0.0)


def test_nu_delta_scalar():
    nu, bound = nu_delta_initial(scalar_convex(), 1.0, [3.0], [0.0])
    assert nu == pytest.approx(math.sqrt(2)) and bound == pytest.approx(2.0)


def test_nu_delta_violation_raises(monkeypatch):
    import ratebv.viscous as vmod
    monkeypatch.setattr(vmod.model, "prox_Gdelta", lambda spec, d, xi: 10 * np.ones(spec.n))
    with pytest.raises(InvariantViolation):
        nu_delta_initial(scalar_convex(), 1.0, [3.0], [0.0])
