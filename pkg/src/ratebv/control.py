"""
Tikhonov-regularized optimal control of the load.

The reduced objective ``J(l) = ||z_hat(S) - z_des||_V + alpha ||l||_H1`` is
minimized over the node values of a piecewise-linear load with a fixed node
grid.  The state is the solver's deterministic selection of a BV solution: a
single viscous run during the search and a full vanishing-viscosity sweep,
with a certificate, for the final incumbent.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import model
from .certify import certify, detect_G, lambda_recover
from .errors import ArgumentError, EvaluationError, InvariantViolation, NumericalError, RateBVError
from .reparam import extract_bv, reparametrize
from .viscous import solve_viscous

__all__ = [
    "Surrogate",
    "FullExtraction",
    "NelderMead",
    "FDGradientDescent",
    "ControlResult",
    "reduced_objective",
    "optimize",
]


@dataclass(frozen=True)
class Surrogate:
    """One viscous run at fixed ``epsilon`` and ``tau``."""

    epsilon: float = 1e-3
    tau: float = 1e-4
    s_samples: int = 2001


@dataclass(frozen=True)
class FullExtraction:
    """A vanishing-viscosity sweep; ``tau = tau_ratio * eps`` for each member."""

    eps_list: tuple = (1e-2, 1e-3, 1e-4)
    tau_ratio: float = 0.1
    s_samples: int = 3001


@dataclass(frozen=True)
class NelderMead:
    """Simplex search; ``initial_step`` defaults to ``2 max(kappa)`` per coordinate.

    A simplex smaller than the elastic range of the dissipation sees a flat
    objective around a load that does not move the state.
    """

    initial_step: float | None = None
    xatol: float = 1e-6
    fatol: float = 1e-9
    restarts: int = 0


@dataclass(frozen=True)
class FDGradientDescent:
    """Forward-difference gradient with Armijo backtracking.

    Unreliable near loads at which a jump sets in, where the reduced map is
    not differentiable.
    """

    h_fd: float = 1e-4
    step: float = 1.0
    shrink: float = 0.5
    armijo: float = 1e-4
    min_step: float = 1e-10


@dataclass
class ControlResult:
    """Outcome of :func:`optimize`.

    ``history`` holds ``(evaluation, incumbent J)`` pairs; ``trace`` holds
    ``(evaluation, J, j, h1)`` for every evaluation, with ``J = inf`` on failure.
    """

    best_load: model.LoadPath
    best_J: float
    best_j: float
    best_h1: float
    history: list
    state: object
    certificate: object
    evaluations: int
    successful_evaluations: int
    search_J: float
    alpha: float
    converged: bool
    notes: list = field(default_factory=list)
    trace: list = field(default_factory=list)


def _fidelity(fidelity):
    if fidelity is None:
        return Surrogate()
    if isinstance(fidelity, (Surrogate, FullExtraction)):
        return fidelity
    raise ArgumentError("fidelity must be a Surrogate or a FullExtraction")


def reduced_objective(spec, z0, load, objective, fidelity=None):
    """Evaluate ``(J, j, h1, ptraj)`` for one load.

    Raises
    ------
    EvaluationError
        When the state solve fails; the offending load is attached.
    """
    fid = _fidelity(fidelity)
    z0 = spec.check_state(z0)
    if objective.z_des.shape != (spec.n,):
        raise ArgumentError("z_des dimension does not match the problem")
    try:
        if isinstance(fid, Surrogate):
            traj = solve_viscous(spec, load, z0, fid.epsilon, fid.tau, check_step_condition=False)
            ptraj = reparametrize(spec, traj, load, fid.s_samples)
        else:
            ptraj, _ = extract_bv(spec, load, z0, fid.eps_list,
                                  lambda e: fid.tau_ratio * e, fid.s_samples)
    except RateBVError as exc:
        raise EvaluationError(f"state solve failed: {exc}", load=load) from exc
    j_val = float(objective.j(spec, ptraj.z_hat[-1]))
    h1 = model.h1_norm(spec, load)
    return j_val + objective.alpha * h1, j_val, h1, ptraj


class _BudgetExhausted(Exception):
    pass


def _eval_task(args):
    spec, z0, load, objective, fid = args
    try:
        J, j_val, h1, _ = reduced_objective(spec, z0, load, objective, fid)
        return J, j_val, h1
    except EvaluationError:
        return math.inf, math.inf, model.h1_norm(spec, load)


class _Tracker:
    """Counts evaluations, keeps the incumbent and checks the coercivity witness."""

    def __init__(self, spec, z0, objective, template, fid, budget, workers):
        self.spec, self.z0, self.objective = spec, z0, objective
        self.template, self.fid = template, fid
        self.budget, self.workers = int(budget), int(workers)
        self.count = 0
        self.ok = 0
        self.best = (math.inf, None, math.inf, math.inf)
        self.history = []
        self.trace = []
        self.J_init = None

    def load_of(self, x):
        return self.template.with_values(x)

    def _record(self, x, J, j_val, h1):
        self.count += 1
        self.trace.append((self.count, J, j_val, h1))
        if math.isfinite(J):
            self.ok += 1
            if self.J_init is not None and J <= self.J_init:
                # inf j = 0 for a distance objective
                if h1 > self.J_init / self.objective.alpha * (1 + 1e-12) + 1e-15:
                    raise InvariantViolation(
                        f"coercivity witness violated: h1={h1} > J_init/alpha")
            if J < self.best[0]:
                self.best = (J, np.array(x, dtype=float), j_val, h1)
        self.history.append((self.count, self.best[0]))

    def __call__(self, x):
        return self.many([x])[0]

    def many(self, xs):
        room = self.budget - self.count
        if room <= 0:
            raise _BudgetExhausted
        xs = list(xs)
        truncated = len(xs) > room
        xs = xs[:room]
        tasks = [(self.spec, self.z0, self.load_of(x), self.objective, self.fid) for x in xs]
        if self.workers > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=self.workers) as pool:
                results = list(pool.map(_eval_task, tasks))
        else:
            results = [_eval_task(t) for t in tasks]
        # sequential reduction in candidate order keeps runs deterministic
        for x, (J, j_val, h1) in zip(xs, results):
            self._record(x, J, j_val, h1)
        if truncated:
            raise _BudgetExhausted
        return [r[0] for r in results]


def _nelder_mead(track, x0, opts, rng):
    step = opts.initial_step
    if step is None:
        step = 2.0 * float(np.max(track.spec.kappa))
    starts = [x0] + [x0 + step * rng.standard_normal(x0.size) for _ in range(opts.restarts)]
    converged = False
    for start in starts:
        simplex = np.vstack([start] + [start + step * e for e in np.eye(start.size)])
        try:
            res = minimize(lambda x: track(x), start, method="Nelder-Mead",
                           options={"initial_simplex": simplex, "xatol": opts.xatol,
                                    "fatol": opts.fatol, "maxfev": 10 ** 9})
            converged = bool(res.success)
        except _BudgetExhausted:
            return False
    return converged


def _fd_descent(track, x0, opts):
    x = np.array(x0, dtype=float)
    fx = track(x)
    if not math.isfinite(fx):
        return False
    try:
        while True:
            probes = [x + opts.h_fd * e for e in np.eye(x.size)]
            g = (np.array(track.many(probes)) - fx) / opts.h_fd
            if not np.all(np.isfinite(g)):
                return False
            gg = float(g @ g)
            if gg == 0.0:
                return True
            eta = opts.step
            while eta >= opts.min_step:
                cand = x - eta * g
                fc = track(cand)
                if fc <= fx - opts.armijo * eta * gg:
                    x, fx = cand, fc
                    break
                eta *= opts.shrink
            else:
                return True
    except _BudgetExhausted:
        return False


def optimize(spec, z0, objective, init_load, optimizer=None, budget=500, fidelity=None, *,
             final_fidelity=None, seed=0, workers=1, certify_profile="standard"):
    """Minimize the reduced objective over the node values of ``init_load``.

    Parameters
    ----------
    optimizer : NelderMead or FDGradientDescent, optional
        Defaults to :class:`NelderMead`.
    budget : int
        Cap on reduced-objective evaluations during the search.
    fidelity : Surrogate or FullExtraction, optional
        State model used during the search.
    final_fidelity : FullExtraction, optional
        State model for the incumbent; by default a three-member sweep around
        the surrogate viscosity with the same ``tau / eps`` ratio.
    seed : int
        Seeds the random restarts of the simplex search.

    Raises
    ------
    NumericalError
        When no evaluation succeeded (including ``budget = 0``).
    """
    z0 = spec.check_state(z0)
    optimizer = NelderMead() if optimizer is None else optimizer
    if not isinstance(optimizer, (NelderMead, FDGradientDescent)):
        raise ArgumentError("optimizer must be NelderMead or FDGradientDescent")
    fid = _fidelity(fidelity)
    if final_fidelity is None:
        if isinstance(fid, Surrogate):
            e = fid.epsilon
            final_fidelity = FullExtraction((10 * e, e, e / 10), fid.tau / e, fid.s_samples)
        else:
            final_fidelity = fid
    track = _Tracker(spec, z0, objective, init_load, fid, budget, workers)
    x0 = init_load.node_values.reshape(-1).copy()
    rng = np.random.default_rng(seed)
    notes = []
    converged = False
    try:
        J0 = track(x0)
    except _BudgetExhausted:
        J0 = math.inf
    track.J_init = J0 if math.isfinite(J0) else None
    if math.isfinite(J0) and J0 <= 0.0:
        notes.append("initial load is a global minimizer (J = 0)")
        converged = True
    elif track.count > 0:
        if isinstance(optimizer, NelderMead):
            converged = _nelder_mead(track, x0, optimizer, rng)
        else:
            converged = _fd_descent(track, x0, optimizer)
    if track.ok == 0:
        raise NumericalError(f"no successful objective evaluation within budget {budget}")

    search_J, x_best, _, _ = track.best
    best_load = init_load.with_values(x_best)
    J, j_val, h1, ptraj = reduced_objective(spec, z0, best_load, objective, final_fidelity)
    if not isinstance(final_fidelity, FullExtraction):
        g = detect_G(ptraj)
        lam, _ = lambda_recover(spec, best_load, ptraj, g)
        ptraj = ptraj.copy(g_mask=g, lam=lam)
    cert = certify(spec, best_load, z0, ptraj, certify_profile)
    if not cert.passed:
        notes.append("certificate of the incumbent failed: " + ", ".join(cert.failures))
    return ControlResult(
        best_load=best_load, best_J=j_val + objective.alpha * h1, best_j=j_val, best_h1=h1,
        history=track.history, state=ptraj, certificate=cert, evaluations=track.count,
        successful_evaluations=track.ok, search_J=search_J, alpha=objective.alpha,
        converged=converged, notes=notes, trace=track.trace)
