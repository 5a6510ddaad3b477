"""
Time integration of the viscous systems.

``solve_viscous`` integrates the epsilon-regularized system on [0, T] by
incremental minimization (implicit in the state); ``solve_autonomous``
integrates the frozen-load viscous flow on R_+ explicitly through the
resolvent ``(dR + V + delta A)^{-1}``.  ``edb_residual`` evaluates the
discrete energy-dissipation balance along either kind of trajectory.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from . import model
from .errors import ArgumentError, DomainError, InvariantViolation, NumericalError
from .model import LoadPath

__all__ = [
    "ViscousTrajectory",
    "solve_viscous",
    "solve_autonomous",
    "edb_residual",
    "nu_delta_initial",
    "step_energy_defects",
    "characteristic_time",
]

INNER_TOL = 1e-9


@dataclass(eq=False)
class ViscousTrajectory:
    """Discrete solution of a viscous system.

    ``epsilon = 0`` marks the autonomous system, whose viscosity is the
    fixed ``V + delta A`` term; ``ell_star`` then holds the frozen load.
    """

    times: np.ndarray
    states: np.ndarray
    rates: np.ndarray
    energies: np.ndarray
    diss_R: np.ndarray
    diss_visc: np.ndarray
    epsilon: float
    tau: float
    delta: float = 0.0
    ell_star: np.ndarray | None = None
    converged: bool = True
    terminal_gap: float = float("nan")
    max_inner_residual: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def autonomous(self):
        return self.epsilon == 0

    @property
    def n_steps(self):
        return self.times.size - 1

    def __post_init__(self):
        if self.states.shape[0] != self.times.size:
            raise ArgumentError("states row count must equal the number of times")
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise ArgumentError("times must be strictly increasing")


# ---------------------------------------------------------------------------
# grid and helpers
# ---------------------------------------------------------------------------

def _time_grid(T, tau):
    if not tau > 0:
        raise ArgumentError("tau must be positive")
    if tau > T * (1 + 1e-12):
        raise ArgumentError("tau must not exceed T")
    m = T / tau
    N = int(round(m))
    if abs(N - m) > 1e-9 * max(1.0, m):
        N = int(math.ceil(m))
    times = np.arange(N + 1, dtype=float) * tau
    times[-1] = T
    if times[-2] >= T:
        raise ArgumentError("degenerate time grid")
    return times


def characteristic_time(spec):
    """Relaxation time of the linear part: ``1 / lambda_min(V^{-1} A)``."""
    lam = float(linalg.eigh(spec.A, spec.V, eigvals_only=True)[0])
    return 1.0 / lam


def _step_condition(spec, z0, load, epsilon, tau):
    bounds = model.apriori_bounds(spec, z0, load)
    rho = math.sqrt(float(np.linalg.eigvalsh(spec.A)[-1])) * bounds["state_sup"]
    lam = model.lambda_convexity(spec, rho, samples=200)
    if epsilon / tau < 2 * lam:
        warnings.warn(
            f"epsilon/tau = {epsilon / tau:.3g} below 2*lambda(rho) = {2 * lam:.3g}; "
            "incremental problems may be nonconvex",
            RuntimeWarning,
            stacklevel=3,
        )
    return lam


# ---------------------------------------------------------------------------
# incremental minimization step
# ---------------------------------------------------------------------------

def _scalar_increment(z, ell, c, Vi, Ai, ki, derivs, tol, max_iter):
    """Local minimiser of k|u| + c/2 V u^2 + A/2 (z+u)^2 + f(z+u) - ell (z+u)."""
    f1, _ = derivs(z)
    xi = ell - Ai * z - f1
    tol = tol * (1.0 + abs(ell) + ki + abs(Ai * z))
    if abs(xi) <= ki:
        return 0.0, max(abs(xi) - ki, 0.0)
    s = 1.0 if xi > 0 else -1.0
    cV = c * Vi
    u = 0.0
    a = 0.0          # s*g(a) < 0
    b = None         # s*g(b) > 0
    for _ in range(max_iter):
        x = z + u
        f1, f2 = derivs(x)
        g = cV * u + Ai * x + f1 - ell + s * ki
        if abs(g) <= tol:
            return u, abs(g)
        if s * g < 0:
            a = u
        else:
            b = u
        gp = cV + Ai + f2
        u_new = u - g / gp if gp > 0 else None
        if b is None:
            if u_new is None or s * (u_new - a) <= 0:
                u_new = a + s * max(abs(a), abs(xi - s * ki) / (cV + Ai), 1e-12)
        elif u_new is None or not (min(a, b) < u_new < max(a, b)):
            u_new = 0.5 * (a + b)
        if u_new == u:
            break
        u = u_new
    x = z + u
    f1, _ = derivs(x)
    g = cV * u + Ai * x + f1 - ell + s * ki
    if abs(g) <= tol:
        return u, abs(g)
    raise NumericalError(f"scalar increment did not converge (residual {abs(g):.3e})",
                         residual=abs(g))


def _inclusion_residual(spec, u, r):
    """Violation of ``r in dR(u)`` coordinatewise (prox certificate form)."""
    k = spec.kappa
    nz = u != 0
    viol = np.where(nz, np.abs(r - k * np.sign(u)), np.maximum(np.abs(r) - k, 0.0))
    return float(np.max(viol))


def _general_increment(spec, z, ell, c, tol, max_iter):
    """Proximal Newton iteration on the increment u = z_new - z."""
    cV = c * spec.V
    u = np.zeros(spec.n)
    kappa = spec.kappa

    def smooth(u):
        x = z + u
        return 0.5 * float(u @ cV @ u) + model.energy_I(spec, x) - float(ell @ x)

    def phi(u):
        return smooth(u) + float(kappa @ np.abs(u))

    for it in range(max_iter):
        x = z + u
        g = cV @ u + model.grad_I(spec, x) - ell
        res = _inclusion_residual(spec, u, -g)
        if res <= tol:
            return u, res
        H = cV + model.hess_I(spec, x)
        lmin = float(np.linalg.eigvalsh(H)[0])
        floor = 1e-8 * max(1.0, float(np.max(np.abs(H))))
        if lmin < floor:
            H = H + (floor - lmin) * np.eye(spec.n)
        w = model.prox_matrix(spec, H, H @ u - g)
        d = w - u
        decrease = float(g @ d) + float(kappa @ np.abs(w)) - float(kappa @ np.abs(u))
        f0 = phi(u)
        step = 1.0
        while phi(u + step * d) > f0 + 1e-4 * step * decrease + 1e-15 * abs(f0):
            step *= 0.5
            if step < 1e-12:
                break
        u = w if step == 1.0 else u + step * d
    x = z + u
    g = cV @ u + model.grad_I(spec, x) - ell
    res = _inclusion_residual(spec, u, -g)
    if res <= tol:
        return u, res
    raise NumericalError(f"incremental problem did not converge (residual {res:.3e})",
                         residual=res)


def solve_viscous(spec, load, z0, epsilon, tau, *, tol=INNER_TOL, max_inner=200,
                  method="auto", check_step_condition=True):
    """Integrate ``0 in dR(z') + eps V z' + DI(z) - ell(t)`` on [0, T].

    Each step solves the incremental problem

        z_{k+1} = argmin_v R(v - z_k) + eps/(2 tau) ||v - z_k||_V^2 + E(t_{k+1}, v)

    locally, starting from ``z_k``, until the inclusion residual of the
    discrete equation is below ``tol`` in every coordinate.

    Parameters
    ----------
    method : {"auto", "separable", "general"}
        ``separable`` uses exact scalar root finding per coordinate and
        needs diagonal A, V and a coordinatewise F; ``general`` runs a
        proximal Newton iteration; ``auto`` picks the former when possible.

    Raises
    ------
    NumericalError
        Inner iteration failed; ``.step`` holds the step index.
    """
    if not epsilon > 0:
        raise ArgumentError("epsilon must be positive")
    if load.n != spec.n:
        raise ArgumentError("load dimension does not match the problem")
    z0 = spec.check_state(z0, "z0")
    times = _time_grid(load.T, tau)
    if method == "auto":
        method = "separable" if spec.separable else "general"
    if method == "separable" and not spec.separable:
        raise ArgumentError("separable method needs diagonal A, V and separable F")
    if check_step_condition:
        _step_condition(spec, z0, load, epsilon, tau)
    N = times.size - 1
    L = load(times)
    dts = np.diff(times)
    states = np.empty((N + 1, spec.n))
    states[0] = z0
    max_res = 0.0
    if method == "separable":
        Vd = np.diag(spec.V).tolist()
        Ad = np.diag(spec.A).tolist()
        kd = spec.kappa.tolist()
        derivs = spec.F.scalar_derivs
        z = z0.tolist()
        Ll = L.tolist()
        inc = _scalar_increment
        rng_n = range(spec.n)
        for k in range(N):
            c = epsilon / dts[k]
            ell = Ll[k + 1]
            for i in rng_n:
                try:
                    u, r = inc(z[i], ell[i], c, Vd[i], Ad[i], kd[i], derivs,
                               tol * 1e-3, max_inner)
                except NumericalError as exc:
                    raise NumericalError(f"step {k}: {exc}", residual=exc.residual, step=k)
                z[i] += u
                if r > max_res:
                    max_res = r
            states[k + 1] = z
    else:
        z = z0.copy()
        for k in range(N):
            c = epsilon / dts[k]
            try:
                u, r = _general_increment(spec, z, L[k + 1], c, tol, max_inner)
            except NumericalError as exc:
                raise NumericalError(f"step {k}: {exc}", residual=exc.residual, step=k)
            z = z + u
            states[k + 1] = z
            max_res = max(max_res, r)
    if not np.all(np.isfinite(states)):
        raise DomainError("non-finite state encountered")
    dZ = np.diff(states, axis=0)
    rates = dZ / dts[:, None]
    energies = model.energies_I(spec, states) - np.einsum("ij,ij->i", L, states)
    if not np.all(np.isfinite(energies)):
        raise DomainError("non-finite energy encountered")
    diss_R = np.abs(dZ) @ spec.kappa
    diss_visc = epsilon / dts * np.einsum("ij,jk,ik->i", dZ, spec.V, dZ)
    return ViscousTrajectory(times, states, rates, energies, diss_R, diss_visc,
                             epsilon=float(epsilon), tau=float(tau),
                             max_inner_residual=max_res,
                             meta={"method": method})


# ---------------------------------------------------------------------------
# autonomous system on R_+
# ---------------------------------------------------------------------------

def solve_autonomous(spec, ell_star, z0, delta=0.0, tau=1e-3, stop_gap=1e-8,
                     horizon_cap=None):
    """Integrate ``0 in dR(z') + (V + delta A) z' + DI(z) - ell_star`` for t > 0.

    Explicit Euler on ``z' = G_delta(-DI(z) + ell_star)``.  Stops as soon as
    the stability gap drops to ``stop_gap`` or the time exceeds
    ``horizon_cap`` (default ``1e3`` characteristic times).  Hitting the cap
    is reported through ``converged = False``, not raised.
    """
    z0 = spec.check_state(z0, "z0")
    ell_star = spec.check_state(ell_star, "ell_star")
    delta = float(delta)
    if delta < 0:
        raise ArgumentError("delta must be nonnegative")
    if not stop_gap > 0:
        raise ArgumentError("stop_gap must be positive")
    if not tau > 0:
        raise ArgumentError("tau must be positive")
    if horizon_cap is None:
        horizon_cap = 1e3 * characteristic_time(spec)
    max_steps = int(math.ceil(horizon_cap / tau)) + 1
    M = spec.V + delta * spec.A
    zs = [z0.copy()]
    converged = False
    if spec.separable:
        Md = np.diag(M).tolist()
        Ad = np.diag(spec.A).tolist()
        Vinv = np.diag(spec.Vinv).tolist()
        kd = spec.kappa.tolist()
        ls = ell_star.tolist()
        derivs = spec.F.scalar_derivs
        z = z0.tolist()
        rng_n = range(spec.n)
        for k in range(max_steps):
            gap2 = 0.0
            w = [0.0] * spec.n
            for i in rng_n:
                xi = ls[i] - Ad[i] * z[i] - derivs(z[i])[0]
                e = abs(xi) - kd[i]
                if e > 0:
                    gap2 += e * e * Vinv[i]
                    w[i] = (e if xi > 0 else -e) / Md[i]
            if math.sqrt(gap2) <= stop_gap:
                converged = True
                break
            if k == max_steps - 1:
                break
            z = [z[i] + tau * w[i] for i in rng_n]
            zs.append(z)
        states = np.array(zs, dtype=float).reshape(-1, spec.n)
    else:
        z = z0.copy()
        for k in range(max_steps):
            xi = ell_star - model.grad_I(spec, z)
            gap, _ = model.force_gap(spec, xi)
            if gap <= stop_gap:
                converged = True
                break
            if k == max_steps - 1:
                break
            z = z + tau * model.prox_matrix(spec, M, xi, M_is_diag=spec.diagonal)
            zs.append(z)
        states = np.array(zs)
    if not np.all(np.isfinite(states)):
        raise DomainError("non-finite state encountered")
    times = tau * np.arange(states.shape[0], dtype=float)
    terminal_gap = model.stability_gap(spec, ell_star, states[-1])[0]
    dZ = np.diff(states, axis=0)
    rates = dZ / tau
    energies = model.energies_I(spec, states) - states @ ell_star
    diss_R = np.abs(dZ) @ spec.kappa
    diss_visc = np.einsum("ij,jk,ik->i", dZ, M, dZ) / tau
    return ViscousTrajectory(times, states, rates, energies, diss_R, diss_visc,
                             epsilon=0.0, tau=float(tau), delta=delta,
                             ell_star=ell_star, converged=converged,
                             terminal_gap=float(terminal_gap))


# ---------------------------------------------------------------------------
# energy-dissipation balance
# ---------------------------------------------------------------------------

def _conj_rows(spec, metric, Xi):
    """Row-wise ``1/2 dist(xi, dR(0))^2`` in the dual norm of ``metric``."""
    if spec.diagonal:
        D = Xi - np.clip(Xi, -spec.kappa, spec.kappa)
        return 0.5 * np.einsum("ij,j,ij->i", D, 1.0 / np.diag(metric), D)
    Minv = np.linalg.inv(metric)
    out = np.empty(Xi.shape[0])
    for k, xi in enumerate(Xi):
        sigma, _ = model.box_qp(Minv, xi, spec.kappa)
        d = xi - sigma
        out[k] = 0.5 * float(d @ Minv @ d)
    return out


def edb_residual(spec, traj, load=None, quadrature="scheme"):
    """Per-node residual of the discrete energy-dissipation balance.

    For the epsilon-system, node ``b`` gives

        E(t_b, z_b) - E(0, z_0)
        + sum_{k<b} [R(dz) + tau (eps/2) ||z'||_V^2 + tau/(2 eps) dist_V(-DE_k*)^2]
        + sum_{k<b} <ell(t_{k+1}) - ell(t_k), (z_k + z_{k+1})/2>

    For the autonomous trajectory the quadratic terms are those of
    ``R + 1/2||.||_V^2 + delta/2||.||_A^2`` (dual term in the norm of
    ``V + delta A``) and the load work vanishes.

    Parameters
    ----------
    load : LoadPath, array_like or None
        The load of an epsilon-trajectory, or the frozen load of an
        autonomous one (defaults to ``traj.ell_star``).
    quadrature : {"scheme", "midpoint"}
        Where the dual term ``DE_k*`` is evaluated.  ``scheme`` uses the node
        the integrator itself evaluates the force at (the new node for the
        implicit epsilon-scheme, the old node for the explicit autonomous
        one) and yields a residual of first order in tau; ``midpoint`` uses
        the step midpoint.
    """
    if quadrature not in ("scheme", "midpoint"):
        raise ArgumentError(f"unknown quadrature {quadrature!r}")
    Z = traj.states
    dts = np.diff(traj.times)
    if Z.shape[0] == 1:
        return np.zeros(1)
    Zm = 0.5 * (Z[1:] + Z[:-1])
    if traj.autonomous:
        ell_star = traj.ell_star if load is None else np.asarray(load, dtype=float)
        if ell_star is None or ell_star.shape != (spec.n,):
            raise ArgumentError("autonomous trajectory needs a constant load vector")
        M = spec.V + traj.delta * spec.A
        E = model.energies_I(spec, Z) - Z @ ell_star
        Zc = Z[:-1] if quadrature == "scheme" else Zm
        Xi = ell_star - model.grads_I(spec, Zc)
        R = traj.rates
        per_step = dts * (np.abs(R) @ spec.kappa
                          + 0.5 * np.einsum("ij,jk,ik->i", R, M, R)
                          + _conj_rows(spec, M, Xi))
        work = np.zeros_like(per_step)
    else:
        if not isinstance(load, LoadPath):
            raise ArgumentError("epsilon-trajectory needs its LoadPath")
        if load.n != spec.n or abs(load.T - traj.times[-1]) > 1e-12 * max(1.0, load.T):
            raise ArgumentError("trajectory and load are inconsistent")
        eps = traj.epsilon
        L = load(traj.times)
        E = model.energies_I(spec, Z) - np.einsum("ij,ij->i", L, Z)
        if quadrature == "scheme":
            Xi = L[1:] - model.grads_I(spec, Z[1:])
        else:
            Xi = load(0.5 * (traj.times[1:] + traj.times[:-1])) - model.grads_I(spec, Zm)
        R = traj.rates
        per_step = dts * (np.abs(R) @ spec.kappa
                          + 0.5 * eps * np.einsum("ij,jk,ik->i", R, spec.V, R)
                          + _conj_rows(spec, spec.V, Xi) / eps)
        work = np.einsum("ij,ij->i", np.diff(L, axis=0), Zm)
    acc = np.concatenate([[0.0], np.cumsum(per_step + work)])
    return E - E[0] + acc


def step_energy_defects(spec, traj, load):
    """Per-step violation of the incremental-minimization energy inequality.

    ``E(t_{k+1}, z_{k+1}) + R(dz) + eps/(2 tau) ||dz||_V^2 - E(t_{k+1}, z_k)``,
    which is nonpositive for a step that decreased the incremental objective.
    """
    Z = traj.states
    L = load(traj.times)
    I = model.energies_I(spec, Z)
    dZ = np.diff(Z, axis=0)
    dts = np.diff(traj.times)
    e_new = I[1:] - np.einsum("ij,ij->i", L[1:], Z[1:])
    e_old = I[:-1] - np.einsum("ij,ij->i", L[1:], Z[:-1])
    quad = traj.epsilon / (2 * dts) * np.einsum("ij,jk,ik->i", dZ, spec.V, dZ)
    return e_new + np.abs(dZ) @ spec.kappa + quad - e_old


def nu_delta_initial(spec, delta, ell_star, z0, check=True):
    """Initial speed ``nu_delta(0)`` of the delta-regularized flow and its bound.

    Returns ``(nu0, bound)`` with ``nu0 = sqrt(||z'(0)||_V^2 + delta ||z'(0)||_A^2)``
    and ``bound = dist_V(-DI(z0) + ell_star, dR(0))``.
    """
    if not delta > 0:
        raise ArgumentError("delta must be positive")
    z0 = spec.check_state(z0, "z0")
    xi = np.asarray(ell_star, dtype=float) - model.grad_I(spec, z0)
    v = model.prox_Gdelta(spec, delta, xi)
    nu0 = math.sqrt(spec.norm_V(v) ** 2 + delta * spec.norm_A(v) ** 2)
    bound, _ = model.force_gap(spec, xi)
    if check and nu0 > bound + 1e-9:
        raise InvariantViolation(f"nu_delta(0) = {nu0:.6g} exceeds the bound {bound:.6g}")
    return nu0, bound
