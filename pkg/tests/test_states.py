import json
import math

import numpy as np
import pytest
from oracles import iid_ultrametric_defect
from scipy import stats

from spinlab import states
from spinlab.acceptance import orthonormal_frame, planted_clusters, planted_tree
from spinlab.hamiltonian import uniform_sphere
from spinlab.states import OverlapMatrix, StateDecomposition


def _exact_two_clusters(rng, N, per, q):
    """Two orthogonal clusters whose overlaps are exactly q (same) and 0 (cross)."""
    X, labels, _, _ = planted_tree(rng, N, 2, 1, per, 0.5 * q, q, exact=True)
    return X, labels


def _same_groups(groups, labels):
    found = sorted(tuple(sorted(g.tolist())) for g in groups)
    truth = sorted(tuple(np.flatnonzero(labels == c).tolist()) for c in np.unique(labels))
    return found == truth


# -- overlap matrix ------------------------------------------------------------------

def test_overlap_matrix_examples():
    assert np.array_equal(states.overlap_matrix(np.array([[3.0, 4.0]])).values, [[1.0]])
    M = states.overlap_matrix(np.array([[1.0, 0.0], [0.0, 2.0]]))
    assert M.values[0, 1] == 0.0
    D = states.overlap_matrix(np.array([[1.0, 2.0], [1.0, 2.0]]))
    assert D.values[0, 1] == pytest.approx(1.0)
    with pytest.raises(ValueError):
        states.overlap_matrix(np.array([[1.0, 0.0], [0.0, 0.0]]))


def test_overlap_matrix_invariants():
    X = uniform_sphere(np.random.default_rng(0), 20, 30)
    R = states.overlap_matrix(X).values
    assert np.array_equal(R, R.T) and np.all(np.diag(R) == 1.0) and np.all(np.abs(R) <= 1.0)
    with pytest.raises(ValueError):
        OverlapMatrix(np.array([[1.0, 0.2], [0.3, 1.0]]))


def test_histogram_examples():
    edges, pmf = states.overlap_histogram(states.overlap_matrix(np.eye(2)))
    assert pmf.sum() == pytest.approx(1.0)
    i = np.searchsorted(edges, 0.0, side="right") - 1
    assert pmf[i] == 1.0


def test_histogram_uniform_matches_beta_marginal():
    N = 64
    X = uniform_sphere(np.random.default_rng(1), N, 400)
    edges, pmf = states.overlap_histogram(states.overlap_matrix(X), bins=20)
    a = (N - 1) / 2
    ref = np.diff(stats.beta(a, a, loc=-1, scale=2).cdf(edges))
    # pairs from a shared pool are not independent; compare bin masses loosely
    assert np.max(np.abs(pmf - ref)) < 0.01
    inner = (edges[:-1] >= -0.5) & (edges[1:] <= 0.5)
    assert pmf[inner].sum() > 0.999


def test_histogram_planted_bimodal():
    X, _ = _exact_two_clusters(np.random.default_rng(2), 128, 20, 0.6)
    edges, pmf = states.overlap_histogram(states.overlap_matrix(X), bins=40)
    mids = 0.5 * (edges[:-1] + edges[1:])
    # 2 * C(20, 2) same-cluster pairs at 0.6, 400 cross pairs at 0
    same, cross = 380 / 780, 400 / 780
    # both values sit on bin edges, so count the two adjacent bins
    assert pmf[np.abs(mids - 0.6) < 0.03].sum() == pytest.approx(same)
    assert pmf[np.abs(mids) < 0.03].sum() == pytest.approx(cross)


# -- clusters -----------------------------------------------------------------------

def test_identical_points_single_cluster():
    x = uniform_sphere(np.random.default_rng(3), 16, 1)[0]
    dec = states.cluster_states(np.tile(x, (5, 1)), 0.5, 0.1)
    assert dec.n_clusters == 1 and dec.weights[0] == 1.0


def test_uniform_points_are_singletons():
    X = uniform_sphere(np.random.default_rng(4), 128, 60)
    dec = states.cluster_states(X, 0.5, 0.1)
    assert dec.n_clusters == 60


def test_planted_antipodal_clusters():
    N, q = 128, 0.7
    rng = np.random.default_rng(5)
    c = orthonormal_frame(rng, N, 1)[0] * math.sqrt(N * q)
    X, _, _ = planted_clusters(rng, N, 1, 30, q)
    # replace the planted center by c on both sides of the origin
    noise = X - X.mean(axis=0)
    noise -= np.outer(noise @ c / (c @ c), c)
    noise *= math.sqrt(N * (1 - q)) / np.linalg.norm(noise, axis=1, keepdims=True)
    Y = np.vstack([c + noise, -c + noise])
    dec = states.cluster_states(Y, q, 0.1)
    assert dec.n_clusters == 2
    err = sorted(min(np.linalg.norm(z - c), np.linalg.norm(z + c)) / math.sqrt(N) for z in dec.centers)
    assert err[-1] < 1e-2


def test_cluster_invariants_and_idempotence():
    X, labels, _ = planted_clusters(np.random.default_rng(6), 96, 3, 10, 0.75)
    X = np.vstack([X, X[:5]])
    labels = np.concatenate([labels, labels[:5]])
    dec = states.cluster_states(X, 0.75, 0.1)
    assert _same_groups(dec.clusters, labels)
    assert np.all(np.diff(dec.weights) <= 0)
    np.testing.assert_allclose(np.sum(dec.centers**2, axis=1) / 96, 0.75, rtol=1e-8)
    assert dec.violation_fraction == 0.0
    for g in dec.clusters:
        again = states.cluster_states(X[g], 0.75, 0.1)
        assert again.n_clusters == 1


def test_cluster_argument_checks():
    with pytest.raises(ValueError):
        states.cluster_states(np.eye(3), 0.5, 0.6)


# -- ultrametricity ---------------------------------------------------------------

def test_single_violating_triple():
    R = np.array([[1.0, 0.8, 0.1], [0.8, 1.0, 0.8], [0.1, 0.8, 1.0]])
    assert states.ultrametricity_defect(OverlapMatrix(R), 0.05) == 1.0


def test_exact_planted_hierarchy_is_ultrametric():
    X, *_ = planted_tree(np.random.default_rng(7), 128, 2, 2, 30, 0.3, 0.8, exact=True)
    assert states.ultrametricity_defect(states.overlap_matrix(X), 0.1) < 0.01


def test_iid_defect_matches_three_point_law():
    ref = iid_ultrametric_defect(128, 0.1)
    vals = [states.ultrametricity_defect(states.overlap_matrix(uniform_sphere(np.random.default_rng(s), 128, 150)), 0.1)
            for s in range(10)]
    se = np.std(vals, ddof=1) / math.sqrt(len(vals))
    assert abs(np.mean(vals) - ref) <= 4 * se
    assert iid_ultrametric_defect(2048, 0.1) < 1e-4


def test_iid_example_literal():
    """i.i.d. uniform points at N=128, eps=0.1 should have defect below 0.01."""
    X = uniform_sphere(np.random.default_rng(8), 128, 300)
    assert states.ultrametricity_defect(states.overlap_matrix(X), 0.1) < 0.01


def test_defect_monotone_in_eps_and_subsampling():
    X = uniform_sphere(np.random.default_rng(9), 64, 120)
    M = states.overlap_matrix(X)
    d = [states.ultrametricity_defect(M, e) for e in (0.0, 0.05, 0.1, 0.2)]
    assert all(a >= b for a, b in zip(d, d[1:]))
    sub = states.ultrametricity_defect(M, 0.05, max_exact=10, samples=200000)
    assert abs(sub - d[1]) < 5 * math.sqrt(d[1] * (1 - d[1]) / 200000) + 1e-3


# -- Ghirlanda-Guerra ---------------------------------------------------------------

def _draws(seed, n_draws=12, reps=6):
    rng = np.random.default_rng(seed)
    return [states.overlap_matrix(planted_clusters(rng, 64, 2, reps // 2, 0.7)[0]) for _ in range(n_draws)]


def test_gg_n1_f_one_is_exactly_zero():
    assert states.gg_defect(_draws(0), 1, psi="x^2", f="one") == 0.0


@pytest.mark.parametrize("n,f", [(2, "one"), (2, "R12"), (3, "R12R23")])
def test_gg_constant_psi_cancels(n, f):
    sets = _draws(1)
    assert states.gg_defect(sets, n, psi="const", f=f) == pytest.approx(0.0, abs=1e-12)
    # with the sum added instead, the constant terms leave 2(n-1) c E<f>
    disp = states.gg_defect(sets, n, psi="const", f=f, convention="displayed")
    assert disp > 1e-3 or f != "one"


def test_gg_non_exchangeable_sampler():
    """Replicas stored as blocks (A, A, B) from two orthogonal clusters: the
    order is informative and the identity fails by psi(q) + psi(q)."""
    rng = np.random.default_rng(2)
    sets = []
    for _ in range(12):
        X, labels = _exact_two_clusters(rng, 64, 8, 0.7)
        a, b = X[labels == 0], X[labels == 1]
        blocks = [np.vstack([a[2 * i], a[2 * i + 1], b[i]]) for i in range(4)]
        sets.append(states.overlap_matrix(np.vstack(blocks)))
    v = states.gg_defect(sets, 2, psi="x^2", f="one", ordered=True)
    assert v == pytest.approx(2 * 0.7**2, abs=1e-12)
    # a random relabelling of the same replicas sees a smaller defect
    assert states.gg_defect(sets, 2, psi="x^2", f="one") < 0.5 * v


def test_gg_argument_checks():
    sets = _draws(3, reps=4)
    with pytest.raises(ValueError):
        states.gg_defect(sets, 4)
    with pytest.raises(ValueError):
        states.gg_defect(sets, 1, f="R12")
    with pytest.raises(ValueError):
        states.gg_defect(sets, 1, psi="sin")


def test_gg_bootstrap_error():
    v, err = states.gg_defect(_draws(4), 2, psi="x^2", f="R12", return_error=True)
    assert err > 0 and np.isfinite(v)


# -- ultrametric tree ---------------------------------------------------------------

def _singletons(C, q_star):
    K = len(C)
    return StateDecomposition([np.array([k]) for k in range(K)], np.full(K, 1.0 / K), C, q_star, 0.1)


def test_tree_single_center():
    C = orthonormal_frame(np.random.default_rng(10), 32, 1) * math.sqrt(32 * 0.8)
    tree = states.build_ultratree(_singletons(C, 0.8), [0.2, 0.5])
    assert tree.report["classes_per_level"] == [1, 1]
    assert tree.report["nested"]


def test_tree_orthogonal_centers_split():
    C = orthonormal_frame(np.random.default_rng(11), 32, 2) * math.sqrt(32 * 0.8)
    tree = states.build_ultratree(_singletons(C, 0.8), [0.4], theta=0.05)
    assert tree.report["classes_per_level"] == [2]


@pytest.mark.parametrize("leaves", [2, 64])
def test_planted_tree_recovered(leaves):
    q1, qs, N = 0.3, 0.8, 256
    _, _, group_of_leaf, C = planted_tree(np.random.default_rng(12), N, 2, leaves, 1, q1, qs)
    tree = states.build_ultratree(_singletons(C, qs), [q1])
    assert _same_groups(tree.levels[0].classes, group_of_leaf)
    assert tree.report["nested"] and tree.report["mass_nesting_residual"] == 0.0
    mu = (qs + (leaves - 1) * q1) / leaves
    analytic = abs(2 * q1 - 2 * math.sqrt(q1 * mu))
    assert tree.report["orthogonality_residual"] == pytest.approx(analytic, abs=1e-10)
    if leaves == 64:
        assert tree.report["orthogonality_residual"] < 1e-2
    radii = np.sum(tree.levels[0].centers**2, axis=1) / N
    np.testing.assert_allclose(radii, q1, rtol=1e-10)


def test_tree_signature_and_json():
    _, _, _, C = planted_tree(np.random.default_rng(13), 128, 2, 2, 1, 0.3, 0.8)
    tree = states.build_ultratree(_singletons(C, 0.8), [0.3])
    assert states.tree_signature(tree) == (("leaf", "leaf"), ("leaf", "leaf"))
    js = json.loads(json.dumps(tree.to_json()))
    assert len(js["children"]) == 2 and all(len(c["children"]) == 2 for c in js["children"])


def test_tree_argument_checks():
    C = orthonormal_frame(np.random.default_rng(14), 16, 2) * math.sqrt(16 * 0.8)
    with pytest.raises(ValueError):
        states.build_ultratree(_singletons(C, 0.8), [0.5, 0.3])
    with pytest.raises(ValueError):
        states.build_ultratree(_singletons(C, 0.8), [0.9])


# -- supports ------------------------------------------------------------------------

def test_support_identical_sides_include():
    sets = _draws(5)
    # positive-mass proxy on the Gibbs side, so both sides use the same criterion
    rep = states.overlap_support(sets, np.linspace(-1, 1, 41), ground_sets=sets, mass_threshold=0.0)
    assert rep.inclusion_pass and not rep.flags
    assert rep.checked.any()


def test_support_planted_points():
    rng = np.random.default_rng(6)
    sets = [states.overlap_matrix(_exact_two_clusters(rng, 128, 10, 0.6)[0]) for _ in range(12)]
    grid = np.round(np.arange(-1, 1.0001, 0.1), 10)
    rep = states.overlap_support(sets, grid, eps=0.05, N=128)
    found = set(grid[rep.gibbs_frequency > 0.5])
    assert found == {0.0, 0.6}
    assert len(rep.rows()) == grid.size


def test_support_low_power_flag():
    rep = states.overlap_support(_draws(7, n_draws=3), [0.0], N=64)
    assert "low-power" in rep.flags


def test_support_two_spin_rs():
    from oracles import quadratic_form_matrix

    from spinlab import sampler
    from spinlab.hamiltonian import sample_disorder
    from spinlab.mixture import Mixture

    N, beta = 64, 0.5
    opts = sampler.ChainOptions(n_chains=4, n_samples=10, thin=10, burn_in=500)
    gibbs, ground = [], []
    for s in range(10):
        d = sample_disorder(Mixture({2: 1.0}), N, seed=s)
        ss = sampler.mcmc_chain(d, beta, opts=sampler.with_seed(opts, s))
        gibbs.append(states.overlap_matrix(ss.points.reshape(-1, N)[::5]))
        v = np.linalg.eigh(quadratic_form_matrix(d))[1][:, 0] * math.sqrt(N)
        ground.append(np.vstack([v, -v]))
    grid = np.round(np.arange(-1, 1.0001, 0.25), 10)
    rep = states.overlap_support(gibbs, grid, eps=0.2, N=N, ground_sets=ground, check_points=[0.0])
    assert set(grid[rep.gibbs_frequency > 0.5]) == {0.0}
    assert rep.ground_frequency[0] == 1.0 and rep.ground_frequency[grid == 0.0][0] == 0.0
    assert rep.inclusion_pass
