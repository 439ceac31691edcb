import numpy as np
import pytest

from spinlab import kernels, sampler
from spinlab.hamiltonian import sample_disorder, uniform_sphere
from spinlab.mixture import Mixture
from spinlab.sampler import ChainOptions

compiled = pytest.importorskip("spinlab._core")
PY = kernels.get("python")
MIX = Mixture({2: 0.4, 3: 0.4, 4: 0.2})


def _model(d):
    return sampler._model(d)


def test_backend_selected():
    assert kernels.BACKEND == "compiled"


def test_energies_agree():
    d = sample_disorder(MIX, 12, seed=0)
    X = uniform_sphere(np.random.default_rng(0), 12, 50)
    a = compiled.energies(*_model(d), X)
    b = PY.energies(*_model(d), X)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(a, d.energy(X), rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("band", [False, True])
def test_chain_kernels_agree(band):
    N, C, S = 10, 3, 200
    d = sample_disorder(MIX, N, seed=1)
    rng = np.random.default_rng(1)
    X0 = uniform_sphere(rng, N, C)
    noise = rng.standard_normal((S, C, N))
    unif = rng.random((S, C))
    beta = np.array([0.5, 1.0, 2.0])
    step = np.full(C, 0.3)
    kw = {}
    if band:
        n = uniform_sphere(rng, N, 1)[0] / np.sqrt(N)
        kw = {"band_dir": n, "band_lo": -0.5, "band_hi": 0.5}
        X0 = X0 - np.outer(X0 @ n, n)
        X0 *= np.sqrt(N) / np.linalg.norm(X0, axis=1, keepdims=True)
    outs = []
    for k in (compiled, PY):
        X = X0.copy()
        E = np.ascontiguousarray(k.energies(*_model(d), X))
        acc, rej = k.run_chains(*_model(d), X, E, beta, step, noise, unif, 1.0, **kw)
        outs.append((X, E, np.asarray(acc), np.asarray(rej)))
    (Xa, Ea, aa, ra), (Xb, Eb, ab, rb) = outs
    np.testing.assert_allclose(Xa, Xb, rtol=0, atol=1e-9)
    np.testing.assert_allclose(Ea, Eb, rtol=0, atol=1e-9)
    assert np.array_equal(aa, ab) and np.array_equal(ra, rb)


def test_cs_functional_agrees():
    rng = np.random.default_rng(2)
    for _ in range(50):
        k = int(rng.integers(1, 5))
        atoms = np.sort(rng.uniform(0, 0.95, k))
        masses = np.append(np.sort(rng.uniform(0, 1, k - 1)), 1.0)
        nu = MIX(np.append(atoms, 1.0))
        assert compiled.cs_functional(atoms, masses, nu, 2.3) == pytest.approx(
            PY.cs_functional(atoms, masses, nu, 2.3), abs=1e-13)


def test_sampler_backends_give_same_chain():
    d = sample_disorder(MIX, 8, seed=3)
    o = ChainOptions(n_chains=2, n_samples=20, burn_in=200, seed=4)
    a = sampler.mcmc_chain(d, 1.0, opts=ChainOptions(**{**o.__dict__, "backend": "compiled"}))
    b = sampler.mcmc_chain(d, 1.0, opts=ChainOptions(**{**o.__dict__, "backend": "python"}))
    np.testing.assert_allclose(a.points, b.points, rtol=0, atol=1e-8)
