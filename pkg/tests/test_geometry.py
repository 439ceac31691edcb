import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import band_log_volume_reference
from scipy.special import logsumexp

from spinlab.geometry import (
    BandSpec,
    band_complement_log_volume,
    band_log_volume,
    band_mask,
    default_delta,
    in_band,
    overlap,
    projection_mean,
    sample_uniform_band,
)
from spinlab.hamiltonian import uniform_sphere


def _center(N, q, rng=None):
    rng = rng or np.random.default_rng(0)
    return uniform_sphere(rng, N, 1, q)[0]


def test_overlap_examples():
    x = np.array([1.0, 2.0, -1.0])
    assert overlap(x, x) == pytest.approx(1.0)
    assert overlap(x, -x) == pytest.approx(-1.0)
    assert overlap([1.0, 0.0], [0.0, 3.0]) == 0.0
    with pytest.raises(ValueError):
        overlap(x, np.zeros(3))


def test_band_spec_validation():
    with pytest.raises(ValueError):
        BandSpec(_center(10, 1.0), 0.1)
    with pytest.raises(ValueError):
        BandSpec(_center(10, 0.5), 0.0)
    with pytest.raises(ValueError):
        BandSpec(_center(10, 0.5), 1.5)


@pytest.mark.parametrize("q", [0.1, 0.5, 0.9])
def test_center_ray_membership(q):
    N = 20
    c = _center(N, q)
    sigma = math.sqrt(N) * c / np.linalg.norm(c)
    gap = 1 - math.sqrt(q)
    assert in_band(sigma, BandSpec(c, min(1.0, gap + 1e-9)))
    assert not in_band(sigma, BandSpec(c, gap - 1e-6))


def test_orthogonal_point_outside():
    N = 20
    c = np.zeros(N)
    c[0] = math.sqrt(N * 0.25)
    sigma = np.zeros(N)
    sigma[1] = math.sqrt(N)
    assert not in_band(sigma, BandSpec(c, 0.4))


def test_width_one_admits_random_points():
    # the excluded cap t < sqrt(q) - 1 has mass about 0.83^(N/2), negligible here
    N = 400
    c = _center(N, 0.5)
    pts = uniform_sphere(np.random.default_rng(1), N, 2000)
    assert band_mask(pts, BandSpec(c, 1.0)).all()


def test_in_band_requires_outer_sphere():
    c = _center(10, 0.5)
    with pytest.raises(ValueError):
        in_band(np.ones(10) * 0.5, BandSpec(c, 0.5))


@pytest.mark.parametrize("N", [5, 50, 200, 600])
@pytest.mark.parametrize("q,delta", [(0.5, 0.01), (0.3, 0.2), (0.9, 0.05), (0.04, 0.5)])
def test_band_volume_matches_incomplete_beta(N, q, delta):
    ref = band_log_volume_reference(q, delta, N)
    assert band_log_volume(q, delta, N) == pytest.approx(ref, abs=1e-10)


def test_whole_sphere_interval():
    assert band_log_volume(0.25, 1.6, 100) == 0.0


def test_band_and_complement_partition_the_sphere():
    for N in (10, 100, 1000):
        b = band_log_volume(0.5, 0.1, N) * N
        c = band_complement_log_volume(0.5, 0.1, N) * N
        assert logsumexp([b, c]) == pytest.approx(0.0, abs=1e-9)


def test_band_entropy_example_fixed_width():
    """q=0.5, delta=0.01, N=1e4 should sit within 0.01 of 1/2 log(1/2)."""
    assert abs(band_log_volume(0.5, 0.01, 10**4) - 0.5 * math.log(0.5)) < 0.01


def test_fixed_width_monotone_approach_to_its_limit():
    q, delta = 0.5, 0.01
    limit = 0.5 * math.log(1 - (math.sqrt(q) - delta) ** 2)
    vals = [band_log_volume(q, delta, N) for N in (10**2, 10**3, 10**4, 10**5)]
    gaps = [abs(v - limit) for v in vals]
    assert all(g1 > g2 for g1, g2 in zip(gaps, gaps[1:]))
    assert gaps[-1] < 1e-3


def test_shrinking_width_reaches_entropy():
    """With delta_N = N^{-1/4} the gap to 1/2 log(1-q) shrinks like
    delta_N sqrt(q)/(1-q), the slope of 1/2 log(1-(sqrt q - delta)^2)."""
    q = 0.5
    Ns = [10**k for k in range(3, 9)]
    gaps = [abs(band_log_volume(q, default_delta(N), N) - 0.5 * math.log(1 - q)) for N in Ns]
    assert all(g1 > g2 for g1, g2 in zip(gaps, gaps[1:]))
    slope = math.sqrt(q) / (1 - q)
    assert gaps[-1] / default_delta(Ns[-1]) == pytest.approx(slope, rel=0.05)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(0.01, 1.0), st.integers(4, 400))
def test_band_volume_nonpositive_and_monotone_in_width(q, delta, N):
    v = band_log_volume(q, delta, N)
    assert v <= 1e-12
    assert band_log_volume(q, min(1.0, delta * 1.5), N) >= v - 1e-12


def test_band_sampler_points_in_band_and_mean():
    N = 64
    band = BandSpec(_center(N, 0.5), 0.1)
    pts = sample_uniform_band(band, 1, 5000)
    assert band_mask(pts, band).all()
    np.testing.assert_allclose(np.sum(pts * pts, axis=1) / N, 1.0, rtol=1e-12)
    t = band.projection(pts)
    a, b = band.interval
    ref = projection_mean(a, b, N)
    assert abs(t.mean() - ref) <= 5 * t.std(ddof=1) / math.sqrt(t.size)


def test_band_sampler_seeds():
    N = 32
    band = BandSpec(_center(N, 0.3), 0.2)
    x = sample_uniform_band(band, 1, 4000)
    y = sample_uniform_band(band, 2, 4000)
    assert not np.array_equal(x, y)
    assert np.array_equal(x, sample_uniform_band(band, 1, 4000))
    tx, ty = band.projection(x), band.projection(y)
    se = math.hypot(tx.std(), ty.std()) / math.sqrt(4000)
    assert abs(tx.mean() - ty.mean()) <= 5 * se


def test_band_sampler_transverse_isotropy():
    """The component orthogonal to the center direction is isotropic."""
    N = 16
    band = BandSpec(_center(N, 0.5, np.random.default_rng(3)), 0.05)
    pts = sample_uniform_band(band, 4, 20000)
    n = band.direction
    perp = pts - np.outer(pts @ n, n)
    e = np.linalg.svd(np.eye(N) - np.outer(n, n))[0][:, 0]
    comp = perp @ e
    # second moment of one transverse coordinate: N (1 - E t^2) / (N - 1)
    t = band.projection(pts)
    ref = N * (1 - np.mean(t * t)) / (N - 1)
    assert abs(np.mean(comp**2) - ref) <= 5 * np.std(comp**2) / math.sqrt(comp.size)
