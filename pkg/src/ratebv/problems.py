"""Reference problems with known qualitative behaviour."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import DoubleWellF, LoadPath, ProblemSpec

__all__ = ["Problem", "scalar_play", "double_well", "scalar_convex"]


@dataclass(frozen=True)
class Problem:
    spec: ProblemSpec
    load: LoadPath
    z0: np.ndarray
    eps_list: tuple
    tau_ratio: float
    s_samples: int

    def tau(self, epsilon):
        return epsilon * self.tau_ratio


def scalar_play(T=2.0):
    """Play operator ``z' in d1_[-1,1](t - z)`` with ``l(t) = t``.

    The exact solution is ``z(t) = max(0, t - 1)``; the arc length of the BV
    solution is ``S = T + Var = 2T - 1``.
    """
    one = np.eye(1)
    spec = ProblemSpec(n=1, A=one, V=one, kappa=np.ones(1))
    load = LoadPath(np.array([0.0, T]), np.array([[0.0], [T]]))
    return Problem(spec, load, np.zeros(1), (1e-2, 1e-3, 1e-4), 0.1, 3001)


def double_well(beta=10.0, T=5.0, ell_end=5.0):
    """``I(z) = z^2/2 + beta (z^2 - 1)^2 / 4`` driven from the left well by a ramp.

    With ``beta = 10`` the left branch of equilibria loses stability at
    ``l ~ 4.286``, so the ramp to 5 forces one jump into the right well.
    """
    one = np.eye(1)
    spec = ProblemSpec(n=1, A=one, V=one, kappa=np.ones(1), F=DoubleWellF(beta))
    load = LoadPath(np.array([0.0, T]), np.array([[0.0], [ell_end]]))
    return Problem(spec, load, -np.ones(1), (1e-2, 1e-3, 1e-4), 0.05, 50001)


def scalar_convex():
    """``I(z) = z^2/2``, ``R = |.|``: the autonomous flow under ``l* = 3`` is ``2(1 - e^{-t})``."""
    one = np.eye(1)
    return ProblemSpec(n=1, A=one, V=one, kappa=np.ones(1))
