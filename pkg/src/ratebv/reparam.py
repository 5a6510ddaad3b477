"""
Contact-potential arc-length reparametrization and vanishing-viscosity extraction.

A viscous trajectory ``t -> z_eps(t)`` is rewritten as ``s -> (t_hat(s), z_hat(s))``
with ``ds = dt + p(dz, -DE)``, where ``p(v, xi) = R(v) + ||v||_V dist_V(xi, dR(0))``
is the vanishing-viscosity contact potential.  Jumps of the viscous solution
become segments of the arc-length interval on which ``t_hat`` is (nearly)
constant.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import model
from .errors import ArgumentError
from .viscous import solve_viscous

__all__ = [
    "ParamTrajectory",
    "ConvergenceReport",
    "arclength",
    "reparametrize",
    "extract_bv",
    "default_gap_threshold",
    "jump_steps",
]


def default_gap_threshold(spec, epsilon=None):
    """Gap level separating the jump regime from viscous sliding.

    At viscosity ``eps`` a sliding viscous solution carries a gap of order
    ``eps ||z'||_V``; ``sqrt(eps) * max(kappa)`` sits between that level and
    the O(1) gaps inside jumps.  Without ``eps`` the floor ``1e-4 max(kappa)``
    is returned.
    """
    base = 1e-4
    if epsilon is not None and epsilon > 0:
        base = max(base, math.sqrt(epsilon))
    return base * float(np.max(spec.kappa))


@dataclass(eq=False)
class ParamTrajectory:
    """Samples of ``(t_hat, z_hat)`` on a uniform grid of ``[0, S]``."""

    S: float
    s_grid: np.ndarray
    t_hat: np.ndarray
    z_hat: np.ndarray
    gap: np.ndarray
    lam: np.ndarray
    g_mask: np.ndarray
    provenance: list = field(default_factory=list)
    gap_threshold: float = 1e-4
    meta: dict = field(default_factory=dict)

    @property
    def h_s(self):
        return self.S / (self.s_grid.size - 1)

    @property
    def n(self):
        return self.z_hat.shape[1]

    def at(self, s):
        """Piecewise-linear evaluation ``(t_hat(s), z_hat(s))``; constant beyond S."""
        s = np.asarray(s, dtype=float)
        t = np.interp(s, self.s_grid, self.t_hat)
        z = np.stack([np.interp(s, self.s_grid, self.z_hat[:, j]) for j in range(self.n)], axis=-1)
        return t, z

    def copy(self, **changes):
        kw = dict(S=self.S, s_grid=self.s_grid.copy(), t_hat=self.t_hat.copy(),
                  z_hat=self.z_hat.copy(), gap=self.gap.copy(), lam=self.lam.copy(),
                  g_mask=self.g_mask.copy(), provenance=list(self.provenance),
                  gap_threshold=self.gap_threshold, meta=dict(self.meta))
        kw.update(changes)
        return ParamTrajectory(**kw)


@dataclass
class ConvergenceReport:
    """Cauchy table of an epsilon sweep."""

    eps_list: list
    taus: list
    S_values: list
    distances: list
    S_differences: list
    distances_constant: list
    distances_affine: list
    extend_constant: bool
    excised_time: list
    g_intervals: list
    cauchy: bool
    cauchy_affine: bool
    cauchy_constant: bool
    notes: list = field(default_factory=list)

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


# ---------------------------------------------------------------------------
# arc length
# ---------------------------------------------------------------------------

def _check_pair(spec, traj, load):
    if traj.autonomous:
        raise ArgumentError("arc length needs an epsilon-trajectory on [0, T]")
    if load.n != spec.n or traj.states.shape[1] != spec.n:
        raise ArgumentError("trajectory, load and problem dimensions differ")
    if abs(load.T - traj.times[-1]) > 1e-12 * max(1.0, load.T) or traj.times[0] != 0.0:
        raise ArgumentError("trajectory time span does not match the load")


def arclength(spec, traj, load):
    """``s_eps(t_k)`` with midpoint evaluation of the contact potential.

    ``s(t_{k+1}) = s(t_k) + tau_k + tau_k p(rate_k, -DE(t_{k+1/2}, z_{k+1/2}))``,
    so increments are at least ``tau_k``.
    """
    _check_pair(spec, traj, load)
    t = traj.times
    dts = np.diff(t)
    Zm = 0.5 * (traj.states[1:] + traj.states[:-1])
    Xi = load(0.5 * (t[1:] + t[:-1])) - model.grads_I(spec, Zm)
    gaps = model.force_gaps(spec, Xi)
    R = traj.rates
    p = np.abs(R) @ spec.kappa + model.norms_V(spec, R) * gaps
    return np.concatenate([[0.0], np.cumsum(dts + dts * p)])


def jump_steps(spec, traj, load, gap_threshold):
    """Boolean mask of time steps belonging to the jump regime.

    A step is a jump step when the state moves and the stability gap exceeds
    ``gap_threshold / 2`` at one of its end points or at its midpoint.
    """
    t = traj.times
    Z = traj.states
    g_nodes = model.force_gaps(spec, load(t) - model.grads_I(spec, Z))
    Zm = 0.5 * (Z[1:] + Z[:-1])
    g_mid = model.force_gaps(spec, load(0.5 * (t[1:] + t[:-1])) - model.grads_I(spec, Zm))
    gmax = np.maximum(np.maximum(g_nodes[1:], g_nodes[:-1]), g_mid)
    moving = np.any(np.diff(Z, axis=0) != 0, axis=1)
    return (gmax > 0.5 * gap_threshold) & moving


def _runs(mask):
    """(start, stop) index pairs of maximal True runs, stop exclusive."""
    m = np.concatenate([[False], mask, [False]]).astype(np.int8)
    d = np.diff(m)
    return list(zip(np.flatnonzero(d == 1), np.flatnonzero(d == -1)))


def _excised_time_increments(dts, jumps):
    """Time increments with jump steps frozen and their duration restored later.

    The time spent inside each run of jump steps is handed to the following
    non-jump steps (up to the next run), proportionally to their length; a
    run at the very end hands it back to the preceding steps instead.
    """
    dt_hat = np.where(jumps, 0.0, dts)
    runs = _runs(jumps)
    N = dts.size
    for i, (a, b) in enumerate(runs):
        lost = float(np.sum(dts[a:b]))
        nxt = runs[i + 1][0] if i + 1 < len(runs) else N
        idx = np.arange(b, nxt)
        if idx.size == 0:
            prev = runs[i - 1][1] if i > 0 else 0
            idx = np.arange(prev, a)
        if idx.size == 0:
            return None
        w = dts[idx] / np.sum(dts[idx])
        dt_hat[idx] += lost * w
    return dt_hat


def _refined_path(spec, traj, load, dt_hat, sub_gap=2e-3, q_max=4000):
    """Exact contact-potential arc length of the polygonal path.

    Each step is subdivided so that the gap varies by at most ``sub_gap``
    between sub-points; the arc-length integrand is integrated by the
    trapezoidal rule along the segment with the load evaluated at ``t_hat``.
    """
    Z = traj.states
    N = Z.shape[0] - 1
    dZ = np.diff(Z, axis=0)
    t_nodes = np.concatenate([[0.0], np.cumsum(dt_hat)])
    t_nodes[-1] = load.T
    g_nodes = model.force_gaps(spec, load(t_nodes) - model.grads_I(spec, Z))
    Zm = Z[:-1] + 0.5 * dZ
    g_mid = model.force_gaps(spec, load(t_nodes[:-1] + 0.5 * dt_hat) - model.grads_I(spec, Zm))
    var = np.abs(g_mid - g_nodes[:-1]) + np.abs(g_nodes[1:] - g_mid)
    Q = np.clip(np.ceil(var / sub_gap), 1, q_max).astype(int)
    step_of = np.repeat(np.arange(N), Q)
    offsets = np.concatenate([[0], np.cumsum(Q)[:-1]])
    local = np.arange(step_of.size) - offsets[step_of]
    theta = local / Q[step_of]
    # sub-points of every step (theta < 1) followed by the final node
    Zp = np.vstack([Z[step_of] + theta[:, None] * dZ[step_of], Z[-1:]])
    Tp = np.concatenate([t_nodes[step_of] + theta * dt_hat[step_of], [t_nodes[-1]]])
    gp = np.empty(Tp.size)
    is_node = np.concatenate([local == 0, [True]])
    node_idx = np.concatenate([step_of[local == 0], [N]])
    gp[is_node] = g_nodes[node_idx]
    sub = ~is_node
    if np.any(sub):
        gp[sub] = model.force_gaps(spec, load(Tp[sub]) - model.grads_I(spec, Zp[sub]))
    R_step = np.abs(dZ) @ spec.kappa
    V_step = model.norms_V(spec, dZ)
    dtheta = np.diff(np.concatenate([theta, [1.0]]))
    # the interval after the last sub-point of step k ends at node k+1
    dtheta = np.where(np.concatenate([local[1:] == 0, [True]]), 1.0 - theta, dtheta)
    k = step_of
    ds = dtheta * (dt_hat[k] + R_step[k] + V_step[k] * 0.5 * (gp[:-1] + gp[1:]))
    s = np.concatenate([[0.0], np.cumsum(ds)])
    return s, Tp, Zp, gp, np.flatnonzero(is_node)


def reparametrize(spec, traj, load, s_samples, *, excise_jumps=True, gap_threshold=None):
    """Sample ``(t_hat, z_hat)`` on a uniform grid of ``s_samples`` points of ``[0, S]``.

    The arc length is that of the polygonal viscous path with density
    ``dt + R(dz) + ||dz||_V gap``.  With ``excise_jumps`` the time increments
    of jump steps (see :func:`jump_steps`) are set to zero and their total
    duration is restored on the subsequent non-jump steps, so ``t_hat`` is
    exactly flat across every jump while ``t_hat(S) = T`` still holds.

    ``lam`` and ``g_mask`` are left at zero; ``certify.detect_G`` and
    ``certify.lambda_recover`` fill them.
    """
    if int(s_samples) < 2:
        raise ArgumentError("s_samples must be at least 2")
    _check_pair(spec, traj, load)
    thr = default_gap_threshold(spec, traj.epsilon) if gap_threshold is None else float(gap_threshold)
    dts = np.diff(traj.times)
    dt_hat = dts.copy()
    jumps = np.zeros(dts.size, dtype=bool)
    if excise_jumps:
        jumps = jump_steps(spec, traj, load, thr)
        if np.any(jumps):
            candidate = _excised_time_increments(dts, jumps)
            if candidate is not None:
                dt_hat = candidate
            else:
                jumps[:] = False
    s_fine, t_fine, z_fine, _, node_pos = _refined_path(spec, traj, load, dt_hat)
    S = float(s_fine[-1])
    s_grid = np.linspace(0.0, S, int(s_samples))
    t_hat = np.interp(s_grid, s_fine, t_fine)
    t_hat[-1] = load.T
    z_hat = np.stack([np.interp(s_grid, s_fine, z_fine[:, j]) for j in range(spec.n)], axis=1)
    z_hat[0] = traj.states[0]
    gap = model.force_gaps(spec, load(t_hat) - model.grads_I(spec, z_hat))
    node_s = s_fine[node_pos]
    meta = {
        "excised_time": float(np.sum(dts[jumps])),
        "jump_steps": int(np.count_nonzero(jumps)),
        "node_s": node_s,
        "fine_points": int(s_fine.size),
        "epsilon": traj.epsilon,
        "tau": traj.tau,
    }
    return ParamTrajectory(
        S=S, s_grid=s_grid, t_hat=t_hat, z_hat=z_hat, gap=gap,
        lam=np.zeros(s_grid.size), g_mask=np.zeros(s_grid.size, dtype=bool),
        provenance=[(traj.epsilon, traj.tau, S)], gap_threshold=thr, meta=meta)


# ---------------------------------------------------------------------------
# vanishing-viscosity sweep
# ---------------------------------------------------------------------------

def _member(args):
    spec, load, z0, eps, tau, s_samples, excise = args
    traj = solve_viscous(spec, load, z0, eps, tau)
    return reparametrize(spec, traj, load, s_samples, excise_jumps=excise)


def _sup_distance(spec, a, b):
    return float(np.max(model.norms_V(spec, a - b)))


def _strictly_decreasing(d):
    return all(d[i + 1] < d[i] for i in range(len(d) - 1))


def extract_bv(spec, load, z0, eps_list, tau_rule, s_samples, *, extend_constant=False,
               excise_jumps=True, workers=1):
    """Run the viscous solver for each epsilon and compare the reparametrizations.

    Parameters
    ----------
    eps_list : sequence of float
        Strictly decreasing viscosities.
    tau_rule : callable or float
        ``tau = tau_rule(eps)``, or a fixed step.
    s_samples : int
        Grid size of every reparametrized member.
    extend_constant : bool
        Selects which comparison convention is reported as ``distances``:
        members extended by their end state to the largest ``S`` (True), or
        affinely rescaled onto a common interval (False).  Both are computed.
    workers : int
        Members are solved in a process pool when greater than one.

    Returns
    -------
    (ParamTrajectory, ConvergenceReport)
        The finest member, with ``g_mask`` and ``lam`` filled, and the Cauchy table.
    """
    from .certify import detect_G, g_components, lambda_recover

    eps_list = [float(e) for e in eps_list]
    if len(eps_list) < 2:
        raise ArgumentError("eps_list needs at least two viscosities")
    if any(e <= 0 for e in eps_list) or not _strictly_decreasing(eps_list):
        raise ArgumentError("eps_list must be positive and strictly decreasing")
    taus = [float(tau_rule(e)) if callable(tau_rule) else float(tau_rule) for e in eps_list]
    z0 = spec.check_state(z0)
    jobs = [(spec, load, z0, e, t, int(s_samples), excise_jumps) for e, t in zip(eps_list, taus)]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=int(workers)) as pool:
            members = list(pool.map(_member, jobs))
    else:
        members = [_member(j) for j in jobs]

    S_values = [m.S for m in members]
    d_affine = [_sup_distance(spec, a.z_hat, b.z_hat) for a, b in zip(members, members[1:])]
    S_max = max(S_values)
    grid = np.linspace(0.0, S_max, int(s_samples))
    extended = [m.at(grid)[1] for m in members]
    d_const = [_sup_distance(spec, a, b) for a, b in zip(extended, extended[1:])]
    dS = [abs(a - b) for a, b in zip(S_values, S_values[1:])]
    # jump intervals are compared at one threshold, the largest member threshold
    common_thr = max(m.gap_threshold for m in members)
    distances = d_const if extend_constant else d_affine
    notes = []
    if not _strictly_decreasing(distances):
        notes.append("successive distances are not strictly decreasing")
    report = ConvergenceReport(
        eps_list=eps_list, taus=taus, S_values=S_values, distances=distances,
        S_differences=dS, distances_constant=d_const, distances_affine=d_affine,
        extend_constant=bool(extend_constant),
        excised_time=[m.meta["excised_time"] for m in members],
        g_intervals=[[(float(m.s_grid[a]), float(m.s_grid[b]))
                      for a, b in g_components(detect_G(m, common_thr))] for m in members],
        cauchy=_strictly_decreasing(distances),
        cauchy_affine=_strictly_decreasing(d_affine),
        cauchy_constant=_strictly_decreasing(d_const), notes=notes)

    best = members[-1]
    g_mask = detect_G(best)
    lam, _ = lambda_recover(spec, load, best, g_mask)
    best = best.copy(g_mask=g_mask, lam=lam,
                     provenance=[(e, t, S) for e, t, S in zip(eps_list, taus, S_values)])
    return best, report
