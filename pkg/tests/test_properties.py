"""Property tests over randomly drawn problem data."""
import numpy as np
from hypothesis import given, settings, strategies as st

from ratebv import io, model
from ratebv.model import DoubleWellF, LoadPath, ProblemSpec
from ratebv.viscous import nu_delta_initial, solve_viscous, step_energy_defects

SETTINGS = settings(max_examples=60, deadline=None)
seeds = st.integers(0, 2 ** 32 - 1)
dims = st.integers(1, 5)


def _spd(rng, n, diagonal=False):
    if diagonal:
        return np.diag(rng.uniform(0.3, 3.0, n))
    B = rng.standard_normal((n, n))
    return B @ B.T + 0.3 * np.eye(n)


def _spec(seed, n, diagonal=False, F=None):
    rng = np.random.default_rng(seed)
    return ProblemSpec(n=n, A=_spd(rng, n, diagonal), V=_spd(rng, n, diagonal),
                       kappa=rng.uniform(0.2, 2.0, n), F=F), rng


@SETTINGS
@given(seeds, dims, st.floats(-10, 10))
def test_R_homogeneous_and_bounded(seed, n, c):
    s, rng = _spec(seed, n, diagonal=True)
    v = rng.standard_normal(n)
    R = model.R_value(s, v)
    assert np.isclose(model.R_value(s, c * v), abs(c) * R, rtol=1e-12, atol=1e-12)
    l1 = np.abs(v).sum()
    assert s.kappa.min() * l1 - 1e-12 <= R <= s.kappa.max() * l1 + 1e-12


@SETTINGS
@given(seeds, dims)
def test_gap_projection_variational_inequality(seed, n):
    s, rng = _spec(seed, n)
    xi = 3 * rng.standard_normal(n)
    gap, sigma = model.force_gap(s, xi)
    assert np.all(np.abs(sigma) <= s.kappa * (1 + 1e-12))
    g = s.Vinv @ (xi - sigma)
    for _ in range(20):
        b = rng.uniform(-s.kappa, s.kappa)
        assert g @ (b - sigma) <= 1e-8 * (1 + np.abs(xi).max())
    inside = rng.uniform(-s.kappa, s.kappa)
    assert model.force_gap(s, inside)[0] <= 1e-12


@SETTINGS
@given(seeds, dims, st.sampled_from([0.0, 1e-2, 1.0, 10.0]))
def test_prox_certificate_and_lipschitz(seed, n, delta):
    s, rng = _spec(seed, n)
    M = s.V + delta * s.A
    x1, x2 = 3 * rng.standard_normal((2, n))
    w1, w2 = model.prox_Gdelta(s, delta, x1), model.prox_Gdelta(s, delta, x2)
    for x, w in ((x1, w1), (x2, w2)):
        assert model.prox_certificate(s, M, x, w) <= 1e-8 * (1 + np.abs(x).max())
    lmin = np.linalg.eigvalsh(M).min()
    assert np.linalg.norm(w1 - w2) <= np.linalg.norm(x1 - x2) / lmin * (1 + 1e-8) + 1e-10


@SETTINGS
@given(seeds, dims, st.sampled_from([1e-2, 1.0, 10.0]))
def test_fenchel_young(seed, n, delta):
    s, rng = _spec(seed, n)

    def psi(v):
        return model.R_value(s, v) + 0.5 * v @ s.V @ v + 0.5 * delta * v @ s.A @ v

    eta = 3 * rng.standard_normal(n)
    conj = model.conj_Rdelta(s, delta, eta)
    for v in rng.standard_normal((10, n)):
        assert conj >= eta @ v - psi(v) - 1e-9
    w = model.prox_Gdelta(s, delta, eta)
    assert np.isclose(conj, eta @ w - psi(w), rtol=1e-7, atol=1e-9)


@SETTINGS
@given(seeds, dims, st.sampled_from([1e-2, 1.0, 10.0]))
def test_nu_delta_bound(seed, n, delta):
    s, rng = _spec(seed, n, F=DoubleWellF(0.5))
    nu, bound = nu_delta_initial(s, delta, 3 * rng.standard_normal(n), rng.standard_normal(n),
                                 check=False)
    assert nu <= bound + 1e-9


@SETTINGS
@given(seeds, dims)
def test_contact_potential_bounds(seed, n):
    s, rng = _spec(seed, n)
    v, xi = rng.standard_normal((2, n))
    p = model.contact_potential(s, v, 3 * xi)
    assert p >= model.R_value(s, v) - 1e-12
    inside = rng.uniform(-s.kappa, s.kappa)
    assert np.isclose(model.contact_potential(s, v, inside), model.R_value(s, v), atol=1e-10)


@settings(max_examples=15, deadline=None)
@given(seeds, st.integers(1, 3))
def test_viscous_step_energy_inequality(seed, n):
    s, rng = _spec(seed, n, F=DoubleWellF(0.3))
    L = LoadPath([0.0, 0.25, 0.5], 2 * rng.standard_normal((3, n)))
    traj = solve_viscous(s, L, np.zeros(n), 0.1, 0.01)
    assert np.max(step_energy_defects(s, traj, L)) <= 1e-8


@SETTINGS
@given(seeds, st.integers(2, 6), st.floats(0, 1))
def test_load_interpolation_stays_in_hull(seed, k, frac):
    rng = np.random.default_rng(seed)
    times = np.cumsum(rng.uniform(0.1, 1.0, k)) - 0.1
    times[0] = 0.0
    L = LoadPath(times, rng.standard_normal((k, 2)))
    v = L(frac * L.T)
    assert np.all(v >= L.node_values.min(axis=0) - 1e-12)
    assert np.all(v <= L.node_values.max(axis=0) + 1e-12)


@SETTINGS
@given(st.lists(st.floats(1e-3, 1e3), min_size=1, max_size=4))
def test_config_round_trip(kappa):
    n = len(kappa)
    cfg = {"model": {"n": n, "kappa": kappa},
           "load": {"node_times": [0.0, 1.0], "node_values": [[0.0] * n, [1.0] * n]}}
    text = io.dump_config(io.parse_config(cfg))
    assert io.dump_config(io.parse_config(text)) == text
