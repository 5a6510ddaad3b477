"""
Certificates for parametrized BV solutions.

Given samples ``(t_hat, z_hat)`` on a uniform arc-length grid, the functions
here measure how far the samples are from satisfying

* complementarity      ``t_hat' * gap = 0``,
* normalization        ``t_hat' + R[z_hat'] + 1_G ||z_hat'||_V gap = 1``,
* energy-dissipation balance along ``[0, S]``,

together with the structural properties of the jump set ``G = {gap > 0}``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import model
from .errors import ArgumentError
from .reparam import ParamTrajectory
from .viscous import ViscousTrajectory, solve_autonomous

__all__ = [
    "Tolerances",
    "PROFILES",
    "CertificateReport",
    "detect_G",
    "g_components",
    "lambda_recover",
    "certify",
    "jump_transient",
    "component_transient",
    "chain_rule_residual",
]


@dataclass(frozen=True)
class Tolerances:
    """Pass/fail thresholds of a certificate."""

    normalization: float
    complementarity: float
    edb: float
    plateau: float = 1e-10
    inclusion: float = 1e-2
    endpoint: float = 1e-9
    chain_rule: float | None = None
    force_bound: float | None = None

    @property
    def chain_rule_tol(self):
        return self.edb if self.chain_rule is None else self.chain_rule


PROFILES = {
    "strict": Tolerances(normalization=1e-3, complementarity=1e-4, edb=1e-2),
    "standard": Tolerances(normalization=2e-2, complementarity=1e-3, edb=5e-2),
}


def _tolerances(tol):
    if tol is None:
        return PROFILES["standard"]
    if isinstance(tol, Tolerances):
        return tol
    if isinstance(tol, str):
        try:
            return PROFILES[tol]
        except KeyError:
            raise ArgumentError(f"unknown tolerance profile {tol!r}; "
                                f"expected one of {sorted(PROFILES)}") from None
    if isinstance(tol, dict):
        return Tolerances(**tol)
    raise ArgumentError("tolerances must be a profile name, a dict or a Tolerances")


@dataclass
class CertificateReport:
    normalization_defect: float
    complementarity_defect: float
    edb_defect: float
    endpoint_checks: dict
    g_components: list
    force_bound: dict
    apriori: dict
    chain_rule_defect: float
    s_identity_defect: float
    lambda_info: dict
    gap_threshold: float
    tolerances: dict
    failures: list = field(default_factory=list)
    passed: bool = False

    def to_dict(self):
        return asdict(self)


# ---------------------------------------------------------------------------
# G and lambda
# ---------------------------------------------------------------------------

def _runs(mask):
    m = np.concatenate([[False], mask, [False]]).astype(np.int8)
    d = np.diff(m)
    return list(zip(np.flatnonzero(d == 1), np.flatnonzero(d == -1) - 1))


def detect_G(ptraj, gap_threshold=None):
    """Nodes with ``gap > gap_threshold``, single-node runs discarded.

    ``gap_threshold`` defaults to the value stored on ``ptraj``.
    """
    thr = ptraj.gap_threshold if gap_threshold is None else float(gap_threshold)
    mask = np.asarray(ptraj.gap) > thr
    for a, b in _runs(mask):
        if a == b:
            mask[a] = False
    return mask


def g_components(g_mask):
    """Inclusive ``(i_start, i_end)`` node ranges of the runs of ``g_mask``."""
    return [(int(a), int(b)) for a, b in _runs(np.asarray(g_mask, dtype=bool))]


def _derivatives(ptraj):
    h = ptraj.h_s
    if ptraj.s_grid.size < 3:
        raise ArgumentError("a parametrized trajectory needs at least 3 nodes")
    tp = np.gradient(ptraj.t_hat, h)
    zp = np.gradient(ptraj.z_hat, h, axis=0)
    return tp, zp


def lambda_recover(spec, load, ptraj, g_mask=None):
    """Multiplier ``lambda = gap / ||z_hat'||_V`` on G and 0 elsewhere.

    Returns
    -------
    lam : ndarray
    info : dict
        ``zero_speed``: G nodes where ``||z_hat'||_V < 1e-12`` (lambda set to 0);
        ``inclusion_residual``: largest violation over interior G nodes of
        ``-DE - lambda V z_hat' in dR(z_hat')``, relative to ``1 + |DE|``.
    """
    g = detect_G(ptraj) if g_mask is None else np.asarray(g_mask, dtype=bool)
    _, zp = _derivatives(ptraj)
    speed = model.norms_V(spec, zp)
    lam = np.zeros(ptraj.s_grid.size)
    zero = g & (speed < 1e-12)
    ok = g & ~zero
    lam[ok] = ptraj.gap[ok] / speed[ok]
    resid = 0.0
    interior = np.zeros_like(g)
    for a, b in g_components(g):
        interior[a + 1:b] = True
    interior &= ok
    if np.any(interior):
        Xi = load(ptraj.t_hat[interior]) - model.grads_I(spec, ptraj.z_hat[interior])
        for xi, w, la in zip(Xi, zp[interior], lam[interior]):
            r = model.prox_certificate(spec, la * spec.V, xi, w)
            resid = max(resid, r / (1.0 + float(np.max(np.abs(xi)))))
    return lam, {"zero_speed": np.flatnonzero(zero).tolist(), "inclusion_residual": resid}


# ---------------------------------------------------------------------------
# residuals
# ---------------------------------------------------------------------------

def chain_rule_residual(spec, traj, load=None):
    """Defect of the integrated chain rule along a sampled path.

    ``|I(z_end) - I(z_0) - sum <DI(z_mid), dz>|``; for a parametrized path and
    a load, the composed-load defect ``sum ||d(l o t_hat) - l'(t_hat) dt_hat||``
    in the dual norm is added.
    """
    if isinstance(traj, ParamTrajectory):
        Z, t = traj.z_hat, traj.t_hat
    elif isinstance(traj, ViscousTrajectory):
        Z, t = traj.states, traj.times
    else:
        raise ArgumentError("expected a ParamTrajectory or a ViscousTrajectory")
    if Z.shape[0] < 3:
        raise ArgumentError("chain rule residual needs at least 3 nodes")
    dZ = np.diff(Z, axis=0)
    G = model.grads_I(spec, 0.5 * (Z[1:] + Z[:-1]))
    work = float(np.sum(G * dZ))
    res = abs(model.energy_I(spec, Z[-1]) - model.energy_I(spec, Z[0]) - work)
    if isinstance(traj, ParamTrajectory) and load is not None:
        dl = np.diff(load(t), axis=0) - load.derivative(t[:-1]) * np.diff(t)[:, None]
        res += float(np.sum(model.dual_norms_V(spec, dl)))
    return res


def _edb_profile(spec, load, z0, ptraj, g_mask):
    """Cumulative discrete energy-dissipation balance at every s-node."""
    Z, t = ptraj.z_hat, ptraj.t_hat
    dZ = np.diff(Z, axis=0)
    diss = np.abs(dZ) @ spec.kappa
    seg_G = g_mask[1:] | g_mask[:-1]
    gap_mid = 0.5 * (ptraj.gap[1:] + ptraj.gap[:-1])
    diss = diss + np.where(seg_G, model.norms_V(spec, dZ) * gap_mid, 0.0)
    L = load(t)
    # <l' t_hat', z> integrated by the trapezoidal rule on each segment
    work = np.sum(np.diff(L, axis=0) * 0.5 * (Z[1:] + Z[:-1]), axis=1)
    E = model.energies_I(spec, Z) - np.sum(L * Z, axis=1)
    E0 = model.energy_E(spec, load(0.0), z0)
    res = E - E0 + np.concatenate([[0.0], np.cumsum(diss + work)])
    return res, diss


def _box_dual_radius(spec):
    k = spec.kappa
    return math.sqrt(float(k @ np.abs(spec.Vinv) @ k))


def certify(spec, load, z0, ptraj, tolerances="standard"):
    """Check a parametrized trajectory against the definition of a BV solution.

    Parameters
    ----------
    tolerances : {"standard", "strict"}, dict or Tolerances

    Returns
    -------
    CertificateReport
        ``passed`` is true iff every defect is within tolerance and every flag holds.
    """
    tol = _tolerances(tolerances)
    z0 = spec.check_state(z0)
    if ptraj.z_hat.ndim != 2 or ptraj.z_hat.shape[1] != spec.n or load.n != spec.n:
        raise ArgumentError("trajectory, load and problem dimensions differ")
    if ptraj.s_grid.size < 3:
        raise ArgumentError("a parametrized trajectory needs at least 3 nodes")
    thr = ptraj.gap_threshold
    g = detect_G(ptraj)
    tp, zp = _derivatives(ptraj)
    speed = model.norms_V(spec, zp)
    norm = tp + np.abs(zp) @ spec.kappa + np.where(g, speed * ptraj.gap, 0.0) - 1.0
    norm_def = float(np.max(np.abs(norm[1:-1])))
    comp_def = float(np.max(np.abs(tp * ptraj.gap)))
    edb, diss = _edb_profile(spec, load, z0, ptraj, g)
    edb_def = float(np.max(np.abs(edb)))

    end_t = abs(ptraj.t_hat[-1] - load.T)
    end_z = float(np.max(np.abs(ptraj.z_hat[0] - z0)))
    endpoints = {
        "t_hat_S_equals_T": bool(end_t <= tol.endpoint * max(1.0, load.T)),
        "z_hat_0_equals_z0": bool(end_z <= tol.endpoint * max(1.0, float(np.max(np.abs(z0))))),
        "t_hat_0_zero": bool(abs(ptraj.t_hat[0]) <= tol.endpoint),
        "t_hat_nondecreasing": bool(np.all(np.diff(ptraj.t_hat) >= -1e-12)),
    }

    lam, linfo = lambda_recover(spec, load, ptraj, g)
    comps = []
    h = ptraj.h_s
    for a, b in g_components(g):
        lo, hi = max(a - 1, 0), min(b + 1, ptraj.s_grid.size - 1)
        inner = lam[a + 1:b]
        comps.append({
            "s_start": float(ptraj.s_grid[a]), "s_end": float(ptraj.s_grid[b]),
            "i_start": a, "i_end": b,
            "t_hat": float(ptraj.t_hat[a]),
            "t_hat_spread": float(np.ptp(ptraj.t_hat[a:b + 1])),
            "t_hat_spread_closure": float(np.ptp(ptraj.t_hat[lo:hi + 1])),
            "t_hat_constant": bool(np.ptp(ptraj.t_hat[a:b + 1]) <= tol.plateau),
            "lambda_positive": bool(inner.size == 0 or np.all(inner > 0)),
            # diagnostic only: 1/lambda is not integrable on a component
            "inv_lambda_sum": float(np.sum(h / inner)) if inner.size and np.all(inner > 0) else None,
        })

    Xi = load(ptraj.t_hat) - model.grads_I(spec, ptraj.z_hat)
    forces = model.dual_norms_V(spec, Xi)
    off_bound = _box_dual_radius(spec) + thr
    force = {
        "sup": float(np.max(forces)),
        "sup_off_G": float(np.max(forces[~g])) if np.any(~g) else 0.0,
        "sup_on_G": float(np.max(forces[g])) if np.any(g) else 0.0,
        "off_G_bound": off_bound,
        "configured_bound": tol.force_bound,
    }
    force["finite"] = bool(np.isfinite(force["sup"]))
    force["passed"] = force["finite"] and force["sup_off_G"] <= off_bound * (1 + 1e-9) and (
        tol.force_bound is None or force["sup"] <= tol.force_bound)

    bounds = model.apriori_bounds(spec, z0, load)
    state_sup = float(np.max(np.linalg.norm(ptraj.z_hat, axis=1)))
    total_diss = float(np.sum(diss))
    apriori = {
        "state_sup": state_sup, "state_sup_bound": bounds["state_sup"],
        "dissipation": total_diss, "dissipation_bound": bounds["dissipation"],
        "S": ptraj.S, "S_bound": load.T + bounds["dissipation"],
    }
    apriori["passed"] = bool(state_sup <= bounds["state_sup"] * (1 + 1e-9)
                             and total_diss <= bounds["dissipation"] * (1 + 1e-9)
                             and ptraj.S <= apriori["S_bound"] * (1 + 1e-9))

    chain = chain_rule_residual(spec, ptraj, load)
    s_ident = abs(ptraj.S - (load.T + total_diss))

    failures = []
    checks = [
        ("normalization", norm_def <= tol.normalization),
        ("complementarity", comp_def <= tol.complementarity),
        ("edb", edb_def <= tol.edb),
        ("chain_rule", chain <= tol.chain_rule_tol),
        ("s_identity", s_ident <= tol.edb),
        ("force_bound", force["passed"]),
        ("apriori", apriori["passed"]),
        ("lambda_inclusion", linfo["inclusion_residual"] <= tol.inclusion),
    ]
    checks += [(f"endpoint:{k}", v) for k, v in endpoints.items()]
    for key in ("t_hat_constant", "lambda_positive"):
        bad = [i for i, c in enumerate(comps) if not c[key]]
        if bad:
            checks.append((f"G:{key} (components {bad[:5]}{'...' if len(bad) > 5 else ''})", False))
    failures = [name for name, ok in checks if not ok]
    return CertificateReport(
        normalization_defect=norm_def, complementarity_defect=comp_def, edb_defect=edb_def,
        endpoint_checks=endpoints, g_components=comps, force_bound=force, apriori=apriori,
        chain_rule_defect=chain, s_identity_defect=s_ident, lambda_info=linfo,
        gap_threshold=thr, tolerances=asdict(tol), failures=failures, passed=not failures)


# ---------------------------------------------------------------------------
# jump transients
# ---------------------------------------------------------------------------

def jump_transient(spec, ell_star, z_a, delta=0.0, tau=1e-4, stop_gap=1e-8, horizon_cap=None):
    """Heteroclinic orbit of the autonomous viscous flow started at ``z_a``.

    Returns ``(orbit, z_b)``; ``orbit.converged`` flags whether the terminal
    gap reached ``stop_gap`` within the horizon.
    """
    orbit = solve_autonomous(spec, ell_star, z_a, delta=delta, tau=tau, stop_gap=stop_gap,
                             horizon_cap=horizon_cap)
    return orbit, orbit.states[-1].copy()


def component_transient(spec, load, ptraj, component, *, nudge=1e-6, delta=0.0, tau=1e-4,
                        stop_gap=1e-8, horizon_cap=None):
    """Run :func:`jump_transient` across one G component of ``ptraj``.

    The orbit starts at the node preceding the component, nudged by ``nudge``
    (in V-norm) toward the next node, with the load frozen at the plateau
    value of ``t_hat``.

    Returns
    -------
    orbit, z_b, distance
        ``distance`` is the V-norm gap between ``z_b`` and the node following
        the component.
    """
    if isinstance(component, dict):
        a, b = component["i_start"], component["i_end"]
    else:
        a, b = component
    i0 = max(a - 1, 0)
    i1 = min(b + 1, ptraj.s_grid.size - 1)
    z_a = ptraj.z_hat[i0].copy()
    d = ptraj.z_hat[i0 + 1] - z_a
    dn = float(model.norms_V(spec, d[None])[0])
    if dn > 0:
        z_a = z_a + nudge * d / dn
    ell_star = load(ptraj.t_hat[a])
    orbit, z_b = jump_transient(spec, ell_star, z_a, delta=delta, tau=tau, stop_gap=stop_gap,
                                horizon_cap=horizon_cap)
    dist = float(model.norms_V(spec, (z_b - ptraj.z_hat[i1])[None])[0])
    return orbit, z_b, dist
