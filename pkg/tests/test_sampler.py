import math

import numpy as np
import pytest
from oracles import (
    band_log_volume_reference,
    free_energy_quadratic,
    mean_energy_quadratic,
    quadratic_form_matrix,
)

from spinlab import sampler
from spinlab.geometry import BandSpec, band_log_volume
from spinlab.hamiltonian import energy, sample_disorder, uniform_sphere
from spinlab.mixture import Mixture
from spinlab.sampler import ChainOptions, SampleSet

TWO = Mixture({2: 1.0})
FAST = ChainOptions(n_chains=4, n_samples=100, thin=10, burn_in=1000)


def _center(N, q, seed=0):
    return uniform_sphere(np.random.default_rng(seed), N, 1, q)[0]


def test_uniform_chains_are_isotropic():
    N = 64
    d = sample_disorder(TWO, N, seed=0)
    ss = sampler.mcmc_chain(d, 0.0, opts=FAST)
    assert ss.check_constraints()
    P = ss.energy_traces().shape[0]
    X = ss.points.reshape(P, -1, N)
    R = np.einsum("ij,ij->i", X[0], X[1]) / N
    assert abs(R.mean()) < 5 / math.sqrt(N)


def test_band_chains_stay_in_band():
    N = 32
    d = sample_disorder(TWO, N, seed=1)
    band = BandSpec(_center(N, 0.5), 0.1)
    for beta in (0.0, 1.0):
        ss = sampler.mcmc_chain(d, beta, band=band, opts=FAST)
        assert ss.check_constraints()


def test_inner_sphere_radius_respected():
    d = sample_disorder(TWO, 16, seed=2)
    ss = sampler.mcmc_chain(d, 1.0, radius_sq=0.3, opts=FAST)
    assert ss.check_constraints()


def test_two_spin_mean_energy_matches_eigenbasis_oracle():
    N, beta = 64, 4.0
    d = sample_disorder(TWO, N, seed=3)
    ss = sampler.mcmc_chain(d, beta, opts=ChainOptions(n_samples=300, burn_in=3000))
    mean, se = sampler.batch_mean_error(ss.energy_traces())
    ref = mean_energy_quadratic(quadratic_form_matrix(d), beta)
    assert abs(mean / N - ref) <= 3 * se / N
    assert 0.3 <= ss.acceptance <= 0.5


def test_free_energy_zero_beta_is_zero():
    d = sample_disorder(TWO, 16, seed=0)
    est = sampler.free_energy_ti(d, 0.0)
    assert est.value == 0.0 and est.std_error == 0.0


@pytest.mark.parametrize("seed", [0, 5])
def test_ti_matches_exact_finite_n_oracle(seed):
    N, beta = 64, 0.5
    d = sample_disorder(TWO, N, seed=seed)
    est = sampler.free_energy_ti(d, beta, opts=ChainOptions(seed=seed))
    ref = free_energy_quadratic(quadratic_form_matrix(d), beta)
    assert abs(est.value - ref) <= 3 * est.std_error
    assert est.std_error > 0 and np.all(np.diff(est.grid) > 0) and est.grid[0] == 0.0


def test_ti_low_outlier_disorder_matches_its_oracle():
    """Disorder 2 at N=128 sits far below 0.125; TI tracks its exact value."""
    d = sample_disorder(TWO, 128, seed=2)
    est = sampler.free_energy_ti(d, 0.5, opts=ChainOptions(seed=2))
    ref = free_energy_quadratic(quadratic_form_matrix(d), 0.5)
    assert ref < 0.125 - 0.01
    assert abs(est.value - ref) <= 3 * est.std_error


def test_annealed_bound_on_disorder_average():
    N, beta = 64, 0.5
    vals = [sampler.free_energy_ti(sample_disorder(TWO, N, seed=s), beta, opts=sampler.with_seed(FAST, s)).value
            for s in range(6)]
    se = np.std(vals, ddof=1) / math.sqrt(len(vals))
    assert np.mean(vals) <= 0.5 * beta**2 + 3 * se


def test_band_free_energy_zero_beta_is_band_volume():
    N = 32
    d = sample_disorder(TWO, N, seed=0)
    band = BandSpec(_center(N, 0.5), 0.2)
    est = sampler.band_free_energy(d, 0.0, band)
    assert est.value == band_log_volume(0.5, 0.2, N)
    assert est.value == pytest.approx(band_log_volume_reference(0.5, 0.2, N), abs=1e-10)


def test_wide_band_matches_full_sphere():
    N, beta = 32, 0.8
    d = sample_disorder(TWO, N, seed=4)
    band = BandSpec(_center(N, 0.5), 1.0)
    a = sampler.band_free_energy(d, beta, band, opts=FAST)
    b = sampler.free_energy_ti(d, beta, opts=FAST)
    assert abs(a.value - b.value) <= 3 * math.hypot(a.std_error, b.std_error)


def test_band_free_energy_below_total():
    N, beta = 32, 1.0
    d = sample_disorder(TWO, N, seed=6)
    total = sampler.free_energy_ti(d, beta, opts=FAST)
    for s in range(2):
        band = BandSpec(_center(N, 0.5, seed=10 + s), 0.1)
        est = sampler.band_free_energy(d, beta, band, opts=FAST)
        assert est.value <= total.value + 3 * math.hypot(est.std_error, total.std_error)


def test_split_rhat():
    rng = np.random.default_rng(0)
    same = rng.standard_normal((4, 500))
    assert sampler.split_rhat(same) < 1.05
    shifted = same + np.arange(4)[:, None]
    assert sampler.split_rhat(shifted) > sampler.RHAT_LIMIT


def test_batch_mean_error_iid():
    rng = np.random.default_rng(1)
    tr = rng.standard_normal((4, 4000))
    mean, se = sampler.batch_mean_error(tr, batches_per_chain=20)
    assert se == pytest.approx(1 / math.sqrt(tr.size), rel=0.35)


def test_geometric_ladder_ratio():
    lad = sampler.geometric_ladder(0.1, 3.0)
    r = lad[1:] / lad[:-1]
    assert np.allclose(r, r[0]) and r[0] <= 1.25 and lad[0] == 0.1 and lad[-1] == pytest.approx(3.0)


def test_tempering_swaps_accept():
    d = sample_disorder(Mixture({3: 1.0}), 16, seed=0)
    run = sampler.run_tempering(d, sampler.geometric_ladder(0.5, 2.0), opts=FAST)
    assert np.all(run["swap_rate"] > 0)


def test_sample_set_roundtrip(tmp_path):
    d = sample_disorder(TWO, 8, seed=0)
    ss = sampler.mcmc_chain(d, 1.0, opts=ChainOptions(n_chains=2, n_samples=10, burn_in=100))
    ss.save(tmp_path / "s.bin")
    assert np.array_equal(SampleSet.load_points(tmp_path / "s.bin"), ss.points)


def test_chain_determinism():
    d = sample_disorder(TWO, 8, seed=0)
    o = ChainOptions(n_chains=2, n_samples=20, burn_in=200, seed=9)
    a = sampler.mcmc_chain(d, 1.0, opts=o)
    b = sampler.mcmc_chain(d, 1.0, opts=o)
    assert np.array_equal(a.points, b.points)


# -- constrained replicas ------------------------------------------------------------

def test_vacuous_overlap_constraint():
    N = 16
    d = sample_disorder(TWO, N, seed=0)
    band = BandSpec(_center(N, 0.5), 0.2)
    est = sampler.conditional_overlap_prob(d, 1.0, band, 3, 1.0)
    assert est.value == 0.0


def test_pair_overlap_probability_matches_beta_marginal():
    """m=2, q=0, rho=0.2: P(|R| < rho) for independent uniform points."""
    from scipy.special import betainc

    N, rho = 64, 0.2
    pts = uniform_sphere(np.random.default_rng(5), N, 600)
    res = sampler.constrained_probability(pts, 2, rho, 0.0, trials=20000, seed=1)
    a = (N - 1) / 2
    ref = betainc(a, a, (1 + rho) / 2) - betainc(a, a, (1 - rho) / 2)
    assert abs(res["p"] - ref) <= 5 * res["se"]
    val = math.log(res["p"]) / (2 * N)
    assert abs(val) < 0.01


def test_clique_estimator_exact_on_small_pool():
    """Knuth estimator vs brute-force enumeration of ordered cliques."""
    import itertools

    rng = np.random.default_rng(2)
    pts = uniform_sphere(rng, 6, 9)
    adj = sampler.pair_constraint_graph(pts, 0.0, 0.5)
    m = 3
    count = sum(all(adj[i, j] for i, j in itertools.combinations(t, 2))
                for t in itertools.permutations(range(9), m))
    exact = count / math.perm(9, m)
    res = sampler.constrained_probability(pts, m, 0.5, 0.0, trials=40000, groups=0, seed=3)
    assert abs(res["p"] - exact) <= 5 * res["se"]


def test_planted_cluster_probability_stays_positive():
    from spinlab.acceptance import planted_clusters

    rng = np.random.default_rng(4)
    X, _, _ = planted_clusters(rng, 64, 1, 200, 0.7)
    ps = [sampler.constrained_probability(X, m, 0.1, 0.7, trials=500, seed=0)["p"] for m in (2, 4, 8)]
    assert min(ps) > 0.5
    # two antipodal clusters: only same-sign tuples qualify, p = 2^(1-m)
    Y = np.vstack([X, -X])
    for m in (2, 4):
        res = sampler.constrained_probability(Y, m, 0.1, 0.7, trials=4000, seed=0)
        assert abs(res["p"] - 2.0 ** (1 - m)) <= 5 * res["se"] + 0.02


def test_centered_constrained_collapses():
    N, beta = 32, 0.7
    d = sample_disorder(TWO, N, seed=7)
    band = BandSpec(_center(N, 0.5), 0.2)
    # rho = 1: the constraint is vacuous
    r = sampler.centered_constrained_fe(d, beta, band, 4, 1.0, opts=FAST)
    h0 = energy(d, band.center) / N
    assert r["centered"].value == pytest.approx(r["band"].value + beta * h0, abs=1e-14)
    # m = 1: constrained and unconstrained coincide
    r1 = sampler.centered_constrained_fe(d, beta, band, 1, 0.2, opts=FAST)
    assert r1["constrained"].value == r1["band"].value


def test_centered_constrained_zero_beta():
    N = 32
    d = sample_disorder(TWO, N, seed=8)
    band = BandSpec(_center(N, 0.5), 0.2)
    r = sampler.centered_constrained_fe(d, 0.0, band, 3, 0.3)
    assert r["centered"].value == pytest.approx(band_log_volume(0.5, 0.2, N) + r["conditional"].value, abs=1e-14)


def test_concentration_scale_formula():
    m = Mixture({2: 1.0})
    assert sampler.concentration_scale(m, 1.0, 64, 8, 0.2) == pytest.approx(math.sqrt((1 / 8 + 0.2) / 64))
    assert sampler.lipschitz_scale(m, 1.0, 64, 1, 0.5) == pytest.approx(1 / 8)


def test_default_schedules():
    s = sampler.default_schedules(256)
    assert s["delta"] == pytest.approx(0.25) and s["m"] == 8 and s["rho"] == pytest.approx(256 ** -0.125)


def test_negative_beta_rejected():
    d = sample_disorder(TWO, 8, seed=0)
    with pytest.raises(ValueError):
        sampler.free_energy_ti(d, -1.0)
    with pytest.raises(ValueError):
        sampler.mcmc_chain(d, -0.5)
