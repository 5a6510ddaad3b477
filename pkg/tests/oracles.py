"""Independent reference computations used by the tests.

None of these call into the package's solvers; they rely on closed forms,
brute-force search or scipy.
"""
import numpy as np
from scipy.integrate import quad
from scipy.optimize import minimize


def play_solution(t, kappa=1.0):
    """Play operator response to l(t) = t from rest: max(0, t - kappa)."""
    return np.maximum(0.0, np.asarray(t, dtype=float) - kappa)


def autonomous_scalar(t, ell_star=3.0, kappa=1.0):
    """z' = max(l* - z - kappa, 0), z(0) = 0, with A = V = 1: (l* - kappa)(1 - e^{-t})."""
    return (ell_star - kappa) * (1.0 - np.exp(-np.asarray(t, dtype=float)))


def prox_bruteforce(M, kappa, xi, box=3.0, step=1e-2):
    """argmin_w  kappa.|w| + 1/2 w'Mw - xi.w  for n = 2 by grid search and refinement."""
    M = np.asarray(M, float)
    kappa = np.asarray(kappa, float)
    xi = np.asarray(xi, float)
    g = np.arange(-box, box + step / 2, step)
    W1, W2 = np.meshgrid(g, g, indexing="ij")
    f = (kappa[0] * np.abs(W1) + kappa[1] * np.abs(W2)
         + 0.5 * (M[0, 0] * W1 ** 2 + 2 * M[0, 1] * W1 * W2 + M[1, 1] * W2 ** 2)
         - xi[0] * W1 - xi[1] * W2)
    i = np.unravel_index(np.argmin(f), f.shape)
    w0 = np.array([W1[i], W2[i]])

    def obj(w):
        return float(kappa @ np.abs(w) + 0.5 * w @ M @ w - xi @ w)

    res = minimize(obj, w0, method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 20000})
    return res.x


def conj_decomposition(V, A, kappa, delta, eta):
    """min 1/2|e2|^2_{V^-1} + 1/(2 delta)|e3|^2_{A^-1} over eta - e2 - e3 in the box."""
    V = np.asarray(V, float)
    A = np.asarray(A, float)
    kappa = np.asarray(kappa, float)
    eta = np.asarray(eta, float)
    n = eta.size
    Vi = np.linalg.inv(V)
    Ai = np.linalg.inv(A)

    def obj(x):
        e2, sig = x[:n], x[n:]
        e3 = eta - e2 - sig
        val = 0.5 * e2 @ Vi @ e2 + 0.5 / delta * e3 @ Ai @ e3
        g2 = Vi @ e2 - Ai @ e3 / delta
        gs = -Ai @ e3 / delta
        return val, np.concatenate([g2, gs])

    best = np.inf
    for start in (np.zeros(2 * n), np.concatenate([eta / 2, np.clip(eta, -kappa, kappa)])):
        res = minimize(obj, start, jac=True, method="L-BFGS-B",
                       bounds=[(None, None)] * n + [(-k, k) for k in kappa],
                       options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 10000})
        best = min(best, res.fun)
    return best


def conj_grid_scalar(delta, eta, kappa=1.0, step=1e-3, span=5.0):
    """Scalar decomposition minimum by a 2-variable grid over (e2, e3)."""
    g = np.arange(-span, span + step / 2, step)
    E2, E3 = np.meshgrid(g, g, indexing="ij")
    feasible = np.abs(eta - E2 - E3) <= kappa + 1e-12
    vals = np.where(feasible, 0.5 * E2 ** 2 + 0.5 / delta * E3 ** 2, np.inf)
    return float(vals.min())


def h1_quadrature(f, df, T):
    """sqrt(int_0^T f^2 + df^2) for scalar callables."""
    val, _ = quad(lambda t: f(t) ** 2 + df(t) ** 2, 0.0, T, epsabs=1e-13, epsrel=1e-13, limit=200)
    return float(np.sqrt(val))


def central_gradient(fun, z, h=1e-5):
    z = np.asarray(z, float)
    g = np.empty_like(z)
    for i in range(z.size):
        e = np.zeros_like(z)
        e[i] = h
        g[i] = (fun(z + e) - fun(z - e)) / (2 * h)
    return g


def box_projection_V(V, kappa, xi):
    """dist_V(xi, box) by scipy bound-constrained minimization (reference, slow)."""
    Vi = np.linalg.inv(np.asarray(V, float))
    xi = np.asarray(xi, float)

    def obj(s):
        r = xi - s
        return 0.5 * r @ Vi @ r, -(Vi @ r)

    res = minimize(obj, np.clip(xi, -kappa, kappa), jac=True, method="L-BFGS-B",
                   bounds=[(-k, k) for k in kappa], options={"ftol": 1e-16, "gtol": 1e-13})
    return float(np.sqrt(2 * res.fun)), res.x
