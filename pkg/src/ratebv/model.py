"""
Problem data and pointwise primitives of the semilinear rate-independent system.

The state space is R^n carrying three norms: the energy norm induced by ``A``,
the viscous norm ``||v||_V = sqrt(<Vv, v>)`` and the l1-type norm behind the
dissipation ``R(v) = sum_i kappa_i |v_i|``.  The stable set ``dR(0)`` is the
box ``prod_i [-kappa_i, kappa_i]``.

All functions are pure; arrays handed in are never modified.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, linalg

from .errors import ArgumentError, DomainError, NumericalError

__all__ = [
    "ZeroF",
    "DoubleWellF",
    "CustomF",
    "ProblemSpec",
    "LoadPath",
    "ControlObjective",
    "energy_I",
    "energy_E",
    "grad_I",
    "R_value",
    "variation",
    "stability_gap",
    "force_gap",
    "contact_potential",
    "prox_Gdelta",
    "prox_certificate",
    "prox_matrix",
    "conj_Rdelta",
    "h1_norm",
    "h1_norm_quadrature",
    "hess_I",
    "lambda_convexity",
    "box_qp",
    "energies_I",
    "grads_I",
    "force_gaps",
    "dual_norms_V",
    "norms_V",
    "apriori_bounds",
]

QP_TOL = 1e-10
PROX_TOL = 1e-10


# ---------------------------------------------------------------------------
# nonconvex lower order terms
# ---------------------------------------------------------------------------

class ZeroF:
    """F identically zero."""

    kind = "zero"
    separable = True

    def value(self, z):
        return 0.0

    def grad(self, z):
        return np.zeros_like(z)

    def hess_diag(self, z):
        return np.zeros_like(z)

    def hess(self, z):
        return np.zeros((z.size, z.size))

    def scalar_derivs(self, x):
        return 0.0, 0.0

    def values(self, Z):
        return np.zeros(Z.shape[0])

    def grads(self, Z):
        return np.zeros_like(Z)

    def to_dict(self):
        return {"kind": "zero"}


class DoubleWellF:
    """F(z) = beta * sum_i (z_i^2 - 1)^2 / 4, wells at z_i = +-1."""

    kind = "double_well"
    separable = True

    def __init__(self, beta):
        beta = float(beta)
        if not beta >= 0:
            raise ArgumentError("double_well beta must be nonnegative")
        self.beta = beta

    def value(self, z):
        return self.beta * float(np.sum((z * z - 1.0) ** 2)) / 4.0

    def grad(self, z):
        return self.beta * z * (z * z - 1.0)

    def hess_diag(self, z):
        return self.beta * (3.0 * z * z - 1.0)

    def hess(self, z):
        return np.diag(self.hess_diag(z))

    def scalar_derivs(self, x):
        b = self.beta
        x2 = x * x
        return b * x * (x2 - 1.0), b * (3.0 * x2 - 1.0)

    def values(self, Z):
        return self.beta * np.sum((Z * Z - 1.0) ** 2, axis=1) / 4.0

    def grads(self, Z):
        return self.beta * Z * (Z * Z - 1.0)

    def to_dict(self):
        return {"kind": "double_well", "beta": self.beta}

    def __repr__(self):
        return f"DoubleWellF(beta={self.beta})"


class CustomF:
    """User supplied F given by value, gradient and Hessian callbacks.

    The callbacks receive a 1-d float array.  ``hessian`` must return an
    (n, n) array.  No differentiation is attempted.
    """

    kind = "custom"
    separable = False

    def __init__(self, value, gradient, hessian):
        self._value = value
        self._gradient = gradient
        self._hessian = hessian

    def value(self, z):
        v = float(self._value(z))
        if v < 0:
            raise DomainError(f"custom F returned negative value {v}")
        return v

    def grad(self, z):
        return np.asarray(self._gradient(z), dtype=float)

    def hess(self, z):
        return np.asarray(self._hessian(z), dtype=float)

    def hess_diag(self, z):
        return np.diag(self.hess(z)).copy()

    def values(self, Z):
        return np.array([self.value(z) for z in Z])

    def grads(self, Z):
        return np.array([self.grad(z) for z in Z]).reshape(Z.shape)

    def to_dict(self):
        raise ArgumentError("custom F callbacks cannot be serialized")


def make_F(desc):
    """Build an F object from ``None``, a kind string or a dict descriptor."""
    if desc is None:
        return ZeroF()
    if isinstance(desc, (ZeroF, DoubleWellF, CustomF)):
        return desc
    if isinstance(desc, str):
        desc = {"kind": desc}
    kind = desc.get("kind")
    if kind == "zero":
        return ZeroF()
    if kind == "double_well":
        return DoubleWellF(desc.get("beta", 1.0))
    raise ArgumentError(f"unknown F kind {kind!r}")


# ---------------------------------------------------------------------------
# data types
# ---------------------------------------------------------------------------

def _as_spd(M, name, n):
    M = np.array(M, dtype=float)
    if M.ndim == 0 or M.ndim == 1 and M.size == 1:
        M = np.eye(n) * float(M.reshape(-1)[0])
    elif M.ndim == 1:
        M = np.diag(M)
    if M.shape != (n, n):
        raise ArgumentError(f"{name} must be {n}x{n}, got {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ArgumentError(f"{name} has non-finite entries")
    scale = max(np.max(np.abs(M)), 1e-300)
    if np.max(np.abs(M - M.T)) > 1e-12 * scale:
        raise ArgumentError(f"{name} is not symmetric")
    M = 0.5 * (M + M.T)
    eig = np.linalg.eigvalsh(M)
    if eig[0] <= 0:
        raise ArgumentError(f"{name} is not positive definite (min eig {eig[0]:.3e})")
    M.setflags(write=False)
    return M, float(eig[0]), float(eig[-1])


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """The rate-independent system (A, V, kappa, F) on R^n.

    Parameters
    ----------
    n : int
        State dimension.
    A, V : array_like
        Symmetric positive definite (n, n) matrices; a scalar or a vector is
        expanded to a (diagonal) matrix.
    kappa : array_like
        Strictly positive dissipation weights, ``R(v) = sum kappa_i |v_i|``.
    F : ZeroF, DoubleWellF, CustomF, str or dict
        Nonconvex lower order term, ``F >= 0``.
    q : float
        Growth exponent of the Hessian bound of F (reported only).
    """

    n: int
    A: np.ndarray
    V: np.ndarray
    kappa: np.ndarray
    F: object = None
    q: float = 2.0
    alpha: float = field(init=False)
    gamma: float = field(init=False)
    Vinv: np.ndarray = field(init=False, repr=False)
    diagonal: bool = field(init=False, repr=False)

    def __post_init__(self):
        n = int(self.n)
        if n < 1:
            raise ArgumentError("n must be a positive integer")
        object.__setattr__(self, "n", n)
        A, a_min, _ = _as_spd(self.A, "A", n)
        V, v_min, _ = _as_spd(self.V, "V", n)
        kappa = np.array(self.kappa, dtype=float).reshape(-1)
        if kappa.size == 1 and n > 1:
            kappa = np.full(n, kappa[0])
        if kappa.shape != (n,):
            raise ArgumentError(f"kappa must have length {n}")
        bad = np.flatnonzero(~(kappa > 0) | ~np.isfinite(kappa))
        if bad.size:
            raise ArgumentError(f"kappa[{bad[0]}] must be strictly positive")
        kappa.setflags(write=False)
        if float(self.q) < 0:
            raise ArgumentError("q must be nonnegative")
        Vinv = np.linalg.inv(V)
        Vinv = 0.5 * (Vinv + Vinv.T)
        Vinv.setflags(write=False)
        F = make_F(self.F)
        diag = (
            np.count_nonzero(A - np.diag(np.diag(A))) == 0
            and np.count_nonzero(V - np.diag(np.diag(V))) == 0
        )
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "kappa", kappa)
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "q", float(self.q))
        object.__setattr__(self, "alpha", a_min)
        object.__setattr__(self, "gamma", v_min)
        object.__setattr__(self, "Vinv", Vinv)
        object.__setattr__(self, "diagonal", bool(diag))

    @property
    def separable(self):
        """True when A, V are diagonal and F acts coordinatewise."""
        return self.diagonal and self.F.separable

    def check_state(self, z, name="z"):
        z = np.asarray(z, dtype=float).reshape(-1)
        if z.shape != (self.n,):
            raise DomainError(f"{name} must have length {self.n}, got {z.shape}")
        if not np.all(np.isfinite(z)):
            raise DomainError(f"{name} has non-finite entries")
        return z

    def norm_V(self, v):
        v = np.asarray(v, dtype=float)
        return math.sqrt(max(float(v @ self.V @ v), 0.0))

    def norm_A(self, v):
        v = np.asarray(v, dtype=float)
        return math.sqrt(max(float(v @ self.A @ v), 0.0))

    def dual_norm_V(self, xi):
        """``||xi||_{V^-1}``."""
        xi = np.asarray(xi, dtype=float)
        return math.sqrt(max(float(xi @ self.Vinv @ xi), 0.0))

    def to_dict(self):
        return {
            "n": self.n,
            "A": self.A.tolist(),
            "V": self.V.tolist(),
            "kappa": self.kappa.tolist(),
            "F": self.F.to_dict(),
            "q": self.q,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(n=d["n"], A=d["A"], V=d["V"], kappa=d["kappa"],
                   F=d.get("F"), q=d.get("q", 2.0))


@dataclass(frozen=True, eq=False)
class LoadPath:
    """Piecewise linear load t -> ell(t) in R^n on [0, T]."""

    node_times: np.ndarray
    node_values: np.ndarray

    def __post_init__(self):
        t = np.array(self.node_times, dtype=float).reshape(-1)
        vals = np.array(self.node_values, dtype=float)
        if vals.ndim == 1:
            vals = vals.reshape(-1, 1)
        if t.size < 2:
            raise ArgumentError("a load path needs at least two nodes")
        if vals.shape[0] != t.size:
            raise ArgumentError("node_values must have one row per node time")
        if t[0] != 0.0:
            raise ArgumentError("first node time must be 0")
        if np.any(np.diff(t) <= 0):
            raise ArgumentError("node times must be strictly increasing")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(vals))):
            raise ArgumentError("load path has non-finite entries")
        t.setflags(write=False)
        vals.setflags(write=False)
        object.__setattr__(self, "node_times", t)
        object.__setattr__(self, "node_values", vals)

    @property
    def T(self):
        return float(self.node_times[-1])

    @property
    def n(self):
        return self.node_values.shape[1]

    @classmethod
    def constant(cls, T, value):
        value = np.atleast_1d(np.asarray(value, dtype=float))
        return cls([0.0, float(T)], np.vstack([value, value]))

    @classmethod
    def linear(cls, T, start, end):
        start = np.atleast_1d(np.asarray(start, dtype=float))
        end = np.atleast_1d(np.asarray(end, dtype=float))
        return cls([0.0, float(T)], np.vstack([start, end]))

    def __call__(self, t):
        """Evaluate the interpolant; scalar t gives shape (n,), arrays (m, n)."""
        ts = np.asarray(t, dtype=float)
        flat = np.clip(ts.reshape(-1), 0.0, self.T)
        out = np.empty((flat.size, self.n))
        for j in range(self.n):
            out[:, j] = np.interp(flat, self.node_times, self.node_values[:, j])
        if ts.ndim == 0:
            return out[0]
        return out

    def slopes(self):
        """Per-segment derivative, shape (m, n)."""
        return np.diff(self.node_values, axis=0) / np.diff(self.node_times)[:, None]

    def derivative(self, t):
        """Right derivative (left derivative at T); piecewise constant."""
        ts = np.asarray(t, dtype=float)
        flat = ts.reshape(-1)
        idx = np.searchsorted(self.node_times, flat, side="right") - 1
        idx = np.clip(idx, 0, self.node_times.size - 2)
        out = self.slopes()[idx]
        if ts.ndim == 0:
            return out[0]
        return out

    def with_values(self, values):
        return LoadPath(self.node_times, np.asarray(values, dtype=float).reshape(self.node_values.shape))

    def to_dict(self):
        return {"T": self.T, "node_times": self.node_times.tolist(),
                "node_values": self.node_values.tolist()}

    @classmethod
    def from_dict(cls, d):
        load = cls(d["node_times"], d["node_values"])
        if "T" in d and abs(float(d["T"]) - load.T) > 1e-12 * max(1.0, load.T):
            raise ArgumentError("load T does not match the last node time")
        return load


@dataclass(frozen=True)
class ControlObjective:
    """j(z) = ||z - z_des||_V plus Tikhonov weight ``alpha`` on ||ell||_H1."""

    z_des: np.ndarray
    alpha: float
    j_kind: str = "v_norm_distance"

    def __post_init__(self):
        z = np.atleast_1d(np.asarray(self.z_des, dtype=float))
        object.__setattr__(self, "z_des", z)
        if not self.alpha > 0:
            raise ArgumentError("Tikhonov parameter alpha must be positive")
        if self.j_kind != "v_norm_distance":
            raise ArgumentError(f"unsupported j_kind {self.j_kind!r}")

    def j(self, spec, z):
        return spec.norm_V(np.asarray(z) - self.z_des)


# ---------------------------------------------------------------------------
# energies
# ---------------------------------------------------------------------------

def energy_I(spec, z):
    """Stored energy ``1/2 <Az, z> + F(z)``."""
    z = spec.check_state(z)
    return 0.5 * float(z @ spec.A @ z) + spec.F.value(z)


def energy_E(spec, ell_value, z):
    """Total energy ``I(z) - <ell, z>`` for a frozen load value."""
    z = spec.check_state(z)
    return energy_I(spec, z) - float(np.asarray(ell_value, dtype=float) @ z)


def grad_I(spec, z):
    """``DI(z) = Az + DF(z)``; ``DE(t, z) = grad_I(z) - ell(t)``."""
    z = spec.check_state(z)
    return spec.A @ z + spec.F.grad(z)


def hess_I(spec, z):
    if spec.F.separable:
        return spec.A + np.diag(spec.F.hess_diag(z))
    return spec.A + spec.F.hess(z)


def R_value(spec, v):
    """Dissipation ``sum_i kappa_i |v_i|``."""
    return float(spec.kappa @ np.abs(np.asarray(v, dtype=float)))


def variation(spec, path):
    """Discrete R-variation ``sum_k R(z_{k+1} - z_k)`` of an ordered path."""
    P = np.asarray(path, dtype=float)
    if P.ndim == 1:
        P = P.reshape(-1, spec.n) if spec.n > 1 else P.reshape(-1, 1)
    if P.shape[0] == 0:
        raise ArgumentError("path must be non-empty")
    if P.shape[0] == 1:
        return 0.0
    return float(np.sum(np.abs(np.diff(P, axis=0)) @ spec.kappa))


# ---------------------------------------------------------------------------
# box-constrained quadratic projection
# ---------------------------------------------------------------------------

def box_qp(W, xi, bound, tol=QP_TOL, max_iter=500):
    """Minimise ``1/2 (s - xi)^T W (s - xi)`` over the box ``|s_i| <= bound_i``.

    Projected Newton iteration with active-set identification.  For a
    quadratic objective the iteration terminates once the active set is
    right, which for small n happens after a handful of steps.

    Returns
    -------
    sigma : ndarray
        The minimiser.
    iterations : int
    """
    xi = np.asarray(xi, dtype=float)
    lo, hi = -bound, bound
    s = np.clip(xi, lo, hi)
    scale = 1.0 + float(np.max(np.abs(xi)))
    wmax = float(np.max(np.abs(W)))

    def q(x):
        d = x - xi
        return 0.5 * float(d @ W @ d)

    for it in range(max_iter):
        g = W @ (s - xi)
        pg = s - np.clip(s - g / wmax, lo, hi)
        if np.max(np.abs(pg)) <= tol * scale:
            return s, it
        fixed = ((s <= lo) & (g > 0)) | ((s >= hi) & (g < 0))
        free = ~fixed
        d = np.zeros_like(s)
        if np.any(free):
            Wf = W[np.ix_(free, free)]
            d[free] = -np.linalg.solve(Wf, g[free])
        q0 = q(s)
        step = 1.0
        while True:
            cand = np.clip(s + step * d, lo, hi)
            if q(cand) <= q0 + 1e-4 * float(g @ (cand - s)) or step < 1e-14:
                break
            step *= 0.5
        if step < 1e-14:
            # projected gradient fallback
            cand = np.clip(s - g / np.linalg.eigvalsh(W)[-1], lo, hi)
        s = cand
    g = W @ (s - xi)
    res = float(np.max(np.abs(s - np.clip(s - g / wmax, lo, hi))))
    raise NumericalError(f"box QP did not converge (residual {res:.3e})", residual=res)


def _project_box(spec, xi, W, W_is_diag):
    if W_is_diag:
        return np.clip(xi, -spec.kappa, spec.kappa)
    sigma, _ = box_qp(W, xi, spec.kappa)
    return sigma


def _dist(spec, xi, W, W_is_diag):
    sigma = _project_box(spec, xi, W, W_is_diag)
    d = xi - sigma
    return math.sqrt(max(float(d @ W @ d), 0.0)), sigma


def stability_gap(spec, ell_value, z):
    """Distance of the driving force to the stable set.

    Returns
    -------
    gap : float
        ``dist_V(-DI(z) + ell, dR(0))`` measured in ``||.||_{V^-1}``.
    projection : ndarray
        The closest point of the box ``dR(0)``.
    """
    xi = -grad_I(spec, z) + np.asarray(ell_value, dtype=float)
    return force_gap(spec, xi)


def force_gap(spec, xi):
    """``dist_V(xi, dR(0))`` and the projection, for a force ``xi``."""
    xi = np.asarray(xi, dtype=float)
    return _dist(spec, xi, spec.Vinv, spec.diagonal)


def contact_potential(spec, v, xi):
    """Vanishing-viscosity contact potential ``R(v) + ||v||_V dist_V(xi, dR(0))``."""
    v = np.asarray(v, dtype=float)
    if not np.any(v):
        return 0.0
    gap, _ = force_gap(spec, xi)
    return R_value(spec, v) + spec.norm_V(v) * gap


# ---------------------------------------------------------------------------
# resolvent of dR + M and the conjugate of the regularized dissipation
# ---------------------------------------------------------------------------

def _metric(spec, delta):
    delta = float(delta)
    if delta < 0:
        raise ArgumentError("delta must be nonnegative")
    return spec.V + delta * spec.A if delta else spec.V


def prox_matrix(spec, M, xi, M_is_diag=None):
    """Minimiser of ``R(w) + 1/2 <Mw, w> - <xi, w>`` for an SPD matrix M."""
    xi = np.asarray(xi, dtype=float)
    if M_is_diag is None:
        M_is_diag = np.count_nonzero(M - np.diag(np.diag(M))) == 0
    if M_is_diag:
        return np.sign(xi) * np.maximum(np.abs(xi) - spec.kappa, 0.0) / np.diag(M)
    Minv = np.linalg.inv(M)
    Minv = 0.5 * (Minv + Minv.T)
    sigma, _ = box_qp(Minv, xi, spec.kappa)
    w = Minv @ (xi - sigma)
    # coordinates with the multiplier strictly inside the box must vanish
    inside = np.abs(sigma) < spec.kappa * (1 - 1e-12)
    w[inside & (np.abs(w) < 1e-13 * (1.0 + np.max(np.abs(w))))] = 0.0
    res = prox_certificate(spec, M, xi, w)
    if res > PROX_TOL * (1.0 + float(np.linalg.norm(xi))) * max(1.0, float(np.max(np.abs(M)))):
        raise NumericalError(f"prox optimality residual {res:.3e} above tolerance", residual=res)
    return w


def prox_certificate(spec, M, xi, w):
    """Largest violation of ``xi - Mw in dR(w)``, coordinatewise."""
    r = np.asarray(xi, dtype=float) - M @ w
    k = spec.kappa
    nz = w != 0
    viol = np.where(nz, np.abs(r - k * np.sign(w)), np.maximum(np.abs(r) - k, 0.0))
    return float(np.max(viol)) if viol.size else 0.0


def prox_Gdelta(spec, delta, xi):
    """Single-valued inverse of ``dR + V + delta A`` applied to ``xi``.

    Returns the unique ``w`` with ``0 in dR(w) + (V + delta A) w - xi``.  With
    ``delta = 0`` this is the velocity of the autonomous viscous flow driven
    by the force ``xi``.
    """
    M = _metric(spec, delta)
    return prox_matrix(spec, M, xi, M_is_diag=spec.diagonal)


def conj_Rdelta(spec, delta, eta):
    """Fenchel conjugate of ``R + 1/2||.||_V^2 + delta/2 ||.||_A^2``.

    Equal to ``1/2 dist(eta, dR(0))^2`` in the dual norm of ``V + delta A``,
    i.e. the inf-convolution of the two quadratic conjugates restricted to
    decompositions with ``eta - eta2 - eta3`` in the box.
    """
    M = _metric(spec, delta)
    Minv = np.linalg.inv(M) if not spec.diagonal else np.diag(1.0 / np.diag(M))
    d, _ = _dist(spec, np.asarray(eta, dtype=float), Minv, spec.diagonal)
    return 0.5 * d * d


# ---------------------------------------------------------------------------
# load norms and convexity constants
# ---------------------------------------------------------------------------

def h1_norm(spec, load):
    """``(int_0^T ||ell||_{V^-1}^2 + ||ell'||_{V^-1}^2 dt)^(1/2)``, exact per segment."""
    t = load.node_times
    vals = load.node_values
    if vals.shape[1] != spec.n:
        raise ArgumentError("load dimension does not match the problem")
    W = spec.Vinv
    total = 0.0
    for k in range(t.size - 1):
        h = t[k + 1] - t[k]
        a = vals[k]
        b = (vals[k + 1] - vals[k]) / h
        aa = float(a @ W @ a)
        ab = float(a @ W @ b)
        bb = float(b @ W @ b)
        total += h * aa + h * h * ab + h ** 3 * bb / 3.0 + h * bb
    return math.sqrt(max(total, 0.0))


def h1_norm_quadrature(spec, load):
    """Adaptive-quadrature evaluation of ``h1_norm``; used as an oracle."""
    t = load.node_times
    total = 0.0
    for k in range(t.size - 1):
        slope = load.slopes()[k]
        ds = float(slope @ spec.Vinv @ slope)

        def f(s):
            v = load(s)
            return float(v @ spec.Vinv @ v) + ds

        val, _ = integrate.quad(f, t[k], t[k + 1], epsabs=1e-13, epsrel=1e-13)
        total += val
    return math.sqrt(total)


def lambda_convexity(spec, rho, samples=2000, seed=0):
    """Empirical lambda(rho) of the lambda-convexity estimate.

    Smallest ``lam >= 0`` with
    ``<DI(z1) - DI(z2), z1 - z2> >= alpha/2 |z1 - z2|^2 - lam ||z1 - z2||_V^2``
    for ``||z_i||_A <= rho``, where ``alpha = lambda_min(A)`` and ``|.|`` is the
    Euclidean norm.  The Hessian of F is sampled over the ball (plus its
    centre); the result is an estimate, not a bound.
    """
    rng = np.random.default_rng(seed)
    n = spec.n
    L = np.linalg.cholesky(spec.A)
    pts = [np.zeros(n)]
    dirs = rng.normal(size=(samples, n))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = rho * rng.uniform(size=samples) ** (1.0 / n)
    # map the Euclidean ball onto the A-ball: z = L^{-T} u
    U = dirs * radii[:, None]
    Z = linalg.solve_triangular(L.T, U.T, lower=False).T
    pts.extend(Z)
    mu = np.inf
    for z in pts:
        if spec.F.separable:
            mu = min(mu, float(np.min(spec.F.hess_diag(z))))
        else:
            mu = min(mu, float(np.linalg.eigvalsh(spec.F.hess(z))[0]))
    K = spec.A - 0.5 * spec.alpha * np.eye(n) + mu * np.eye(n)
    lam_min = float(linalg.eigh(K, spec.V, eigvals_only=True)[0])
    return max(0.0, -lam_min)


# ---------------------------------------------------------------------------
# batched evaluation along trajectories
# ---------------------------------------------------------------------------

def energies_I(spec, Z):
    """Row-wise ``I(z)`` for a (m, n) array of states."""
    Z = np.asarray(Z, dtype=float)
    return 0.5 * np.einsum("ij,jk,ik->i", Z, spec.A, Z) + spec.F.values(Z)


def grads_I(spec, Z):
    """Row-wise ``DI(z)`` for a (m, n) array of states."""
    Z = np.asarray(Z, dtype=float)
    return Z @ spec.A + spec.F.grads(Z)


def force_gaps(spec, Xi):
    """Row-wise ``dist_V(xi, dR(0))`` for a (m, n) array of forces."""
    Xi = np.asarray(Xi, dtype=float)
    if spec.diagonal:
        D = Xi - np.clip(Xi, -spec.kappa, spec.kappa)
        return np.sqrt(np.einsum("ij,j,ij->i", D, np.diag(spec.Vinv), D))
    return np.array([force_gap(spec, xi)[0] for xi in Xi])


def dual_norms_V(spec, Xi):
    Xi = np.asarray(Xi, dtype=float)
    return np.sqrt(np.maximum(np.einsum("ij,jk,ik->i", Xi, spec.Vinv, Xi), 0.0))


def norms_V(spec, Vs):
    Vs = np.asarray(Vs, dtype=float)
    return np.sqrt(np.maximum(np.einsum("ij,jk,ik->i", Vs, spec.V, Vs), 0.0))


def apriori_bounds(spec, z0, load):
    """Explicit a priori bounds for parametrized solutions with data (z0, load).

    Uses ``alpha = lambda_min(A)``, the Euclidean norm on states and the
    pairing estimate ``|<ell, z>| <= c_Z ||ell||_{V^-1} |z|`` with
    ``c_Z = sqrt(lambda_max(V))``.

    Returns
    -------
    dict
        ``state_sup``: bound on ``sup_s |z(s)|``;
        ``dissipation``: bound on the total dissipated energy, so that
        ``S <= T + dissipation``.
    """
    z0 = spec.check_state(z0)
    alpha = spec.alpha
    c_z = math.sqrt(float(np.linalg.eigvalsh(spec.V)[-1]))
    ell_sup = float(np.max(dual_norms_V(spec, load.node_values)))
    seg = np.diff(load.node_values, axis=0)
    l1 = float(np.sum(dual_norms_V(spec, seg)))
    e0 = energy_E(spec, load(0.0), z0)
    shift = c_z * c_z * ell_sup * ell_sup / alpha
    # alpha/4 M^2 - shift <= e0 + c_z l1 M
    a, b, c = alpha / 4.0, -c_z * l1, -(e0 + shift)
    m_bound = (-b + math.sqrt(max(b * b - 4 * a * c, 0.0))) / (2 * a)
    diss = e0 + shift + c_z * l1 * m_bound
    return {"state_sup": m_bound, "dissipation": diss, "alpha": alpha,
            "c_Z": c_z, "ell_sup": ell_sup, "ell_prime_L1": l1, "E0": e0}
