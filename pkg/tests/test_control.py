import math

import numpy as np
import pytest

import oracles
from ratebv import model
from ratebv.control import (FDGradientDescent, FullExtraction, NelderMead, Surrogate,
                            optimize, reduced_objective)
from ratebv.errors import ArgumentError, EvaluationError, NumericalError
from ratebv.model import ControlObjective, LoadPath


@pytest.fixture(scope="module")
def zero_load(play):
    return play.load.with_values(np.zeros((2, 1)))


def test_reduced_objective_ramp_full(play):
    obj = ControlObjective(np.ones(1), 1e-2)
    J, j, h1, p = reduced_objective(play.spec, play.z0, play.load, obj, FullExtraction())
    assert j <= 1e-3
    assert h1 == pytest.approx(oracles.h1_quadrature(lambda t: t, lambda t: 1.0, 2.0), rel=1e-8)
    assert J == pytest.approx(j + 1e-2 * h1, abs=1e-12)
    assert p.provenance  # full sweep records its members


def test_reduced_objective_ramp_surrogate_lag(play):
    # a single viscous run lags the rate-independent limit by O(eps)
    obj = ControlObjective(np.ones(1), 1e-2)
    _, j, _, _ = reduced_objective(play.spec, play.z0, play.load, obj, Surrogate())
    assert 0 < j <= 5e-3


def test_reduced_objective_zero_load(play, zero_load):
    obj = ControlObjective(np.ones(1), 1e-2)
    J, j, h1, _ = reduced_objective(play.spec, play.z0, zero_load, obj)
    assert h1 == 0.0 and J == pytest.approx(1.0, abs=1e-12)


def test_reduced_objective_errors(play, monkeypatch):
    with pytest.raises(ArgumentError):
        reduced_objective(play.spec, play.z0, play.load, ControlObjective(np.ones(2), 1.0))
    with pytest.raises(ArgumentError):
        reduced_objective(play.spec, play.z0, play.load, ControlObjective(np.ones(1), 1.0), "fast")
    import ratebv.control as cmod

    def boom(*a, **k):
        raise NumericalError("inner solve diverged")

    monkeypatch.setattr(cmod, "solve_viscous", boom)
    with pytest.raises(EvaluationError) as info:
        reduced_objective(play.spec, play.z0, play.load, ControlObjective(np.ones(1), 1.0))
    assert info.value.load is play.load


def test_optimize_improves(opt_play):
    r = opt_play
    assert r.best_J < 1.0 and r.certificate.passed
    assert r.evaluations <= 500
    assert r.best_J == pytest.approx(r.best_j + r.alpha * r.best_h1, abs=1e-12)
    assert r.best_load.node_values.shape == (2, 1)


def test_history_nonincreasing(opt_play):
    values = [J for _, J in opt_play.history]
    assert all(b <= a for a, b in zip(values, values[1:]))
    assert [c for c, _ in opt_play.history] == list(range(1, opt_play.evaluations + 1))


def test_coercivity_witness(opt_play):
    J_init = opt_play.history[0][1]
    assert opt_play.best_h1 <= J_init / opt_play.alpha


def test_tikhonov_monotone(opt_play, opt_play_2alpha):
    # doubling alpha cannot increase the optimal control norm
    assert opt_play_2alpha.best_h1 <= opt_play.best_h1 + 1e-2


def test_optimize_global_minimum_returns_immediately(play):
    r = optimize(play.spec, play.z0, ControlObjective(np.zeros(1), 1e-2),
                 play.load.with_values(np.zeros((2, 1))), budget=500)
    assert r.best_J == 0.0 and r.evaluations == 1 and r.converged


def test_optimize_budget(play, zero_load):
    obj = ControlObjective(np.ones(1), 1e-2)
    fid = Surrogate(epsilon=1e-2, tau=1e-3, s_samples=201)
    r = optimize(play.spec, play.z0, obj, zero_load, budget=7, fidelity=fid)
    assert r.evaluations == 7 and len(r.history) == 7
    with pytest.raises(NumericalError):
        optimize(play.spec, play.z0, obj, zero_load, budget=0, fidelity=fid)


def test_optimize_deterministic(play, zero_load):
    obj = ControlObjective(np.ones(1), 1e-2)
    fid = Surrogate(epsilon=1e-2, tau=1e-3, s_samples=201)
    opt = NelderMead(restarts=1)
    a = optimize(play.spec, play.z0, obj, zero_load, opt, budget=30, fidelity=fid, seed=3)
    b = optimize(play.spec, play.z0, obj, zero_load, opt, budget=30, fidelity=fid, seed=3)
    assert a.history == b.history
    assert np.array_equal(a.best_load.node_values, b.best_load.node_values)


def test_fd_descent_from_ramp(play):
    # start off the elastic plateau so the reduced map has a slope
    obj = ControlObjective(np.full(1, 0.5), 1e-3)
    fid = Surrogate(epsilon=1e-2, tau=1e-3, s_samples=201)
    r = optimize(play.spec, play.z0, obj, play.load, FDGradientDescent(), budget=40,
                 fidelity=fid)
    values = [J for _, J in r.history]
    assert values[-1] < values[0]
    assert all(b <= a for a, b in zip(values, values[1:]))


def test_optimize_rejects_bad_optimizer(play, zero_load):
    with pytest.raises(ArgumentError):
        optimize(play.spec, play.z0, ControlObjective(np.ones(1), 1.0), zero_load, "bfgs")


def test_h1_norm_matches_quadrature(play):
    L = LoadPath([0, 0.5, 2], [[0.0], [1.0], [-1.0]])
    f = lambda t: float(L(t)[0])
    df = lambda t: float(L.derivative(t)[0])
    ref = oracles.h1_quadrature(f, df, 2.0)
    assert model.h1_norm(play.spec, L) == pytest.approx(ref, rel=1e-8)
    assert math.isfinite(ref)
