import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gibbsddrm.oracle import adaptive_posterior_mean, quadrature_posterior_mean
from gibbsddrm.priors import (
    CountingDenoiser,
    GaussianPrior,
    GmmPrior,
    NoiseSchedule,
    gaussian_denoise,
    gmm_denoise,
    load_gmm_json,
    make_geometric_schedule,
    make_linear_schedule,
    save_gmm_json,
)


def test_linear_schedule_examples():
    assert make_linear_schedule(1, 2.0).sigmas == (0.0, 2.0)
    assert make_linear_schedule(4, 1.0).sigmas == (0.0, 0.25, 0.5, 0.75, 1.0)
    for bad in [(0, 1.0), (-1, 1.0), (3, 0.0), (3, -1.0), (2.5, 1.0)]:
        with pytest.raises(ValueError):
            make_linear_schedule(*bad)


def test_schedule_invariants():
    with pytest.raises(ValueError):
        NoiseSchedule((0.1, 0.2))
    with pytest.raises(ValueError):
        NoiseSchedule((0.0, 0.5, 0.5))
    with pytest.raises(ValueError):
        NoiseSchedule((0.0,))
    s = make_geometric_schedule(5, 0.01, 3.0)
    assert s.T == 5 and s[0] == 0.0 and s[1] == pytest.approx(0.01) and s[5] == pytest.approx(3.0)
    assert all(a < b for a, b in zip(s.sigmas[:-1], s.sigmas[1:]))


def test_gaussian_denoise_examples():
    p = GaussianPrior(0.0, 1.0)
    assert gaussian_denoise(p, [2.0], 1.0) == pytest.approx([1.0])
    assert gaussian_denoise(p, [3.0], 0.0) == pytest.approx([3.0])
    p2 = GaussianPrior([1.0, 1.0], 4.0)
    np.testing.assert_allclose(gaussian_denoise(p2, [5.0, 1.0], 2.0), [3.0, 1.0], rtol=0, atol=1e-15)
    with pytest.raises(ValueError):
        gaussian_denoise(p2, [1.0, 2.0, 3.0], 1.0)
    with pytest.raises(ValueError):
        gaussian_denoise(p2, [1.0, 2.0], -1.0)


def test_gaussian_denoise_matches_quadrature():
    p2 = GaussianPrior([1.0, 1.0], 4.0)
    q = quadrature_posterior_mean(p2, np.eye(2), [5.0, 1.0], 2.0, grid=[(-25, 27, 801)] * 2)
    np.testing.assert_allclose(q.mean, [3.0, 1.0], atol=1e-8)


@settings(max_examples=50, deadline=None)
@given(
    st.lists(st.floats(-5, 5), min_size=3, max_size=3),
    st.lists(st.floats(-5, 5), min_size=3, max_size=3),
    st.floats(-3, 3),
    st.floats(0.01, 5),
)
def test_gaussian_denoise_is_affine(a, b, c, sigma):
    p = GaussianPrior([0.3, -0.2, 1.0], 0.7)
    a, b = np.array(a), np.array(b)
    lhs = gaussian_denoise(p, c * a + (1 - c) * b, sigma)
    rhs = c * gaussian_denoise(p, a, sigma) + (1 - c) * gaussian_denoise(p, b, sigma)
    np.testing.assert_allclose(lhs, rhs, atol=1e-9)


def test_gmm_validation():
    with pytest.raises(ValueError):
        GmmPrior([], np.zeros((0, 1)), 1.0)
    with pytest.raises(ValueError):
        GmmPrior([1.2, -0.2], [[0.0], [1.0]], 1.0)
    with pytest.raises(ValueError):
        GmmPrior([0.5, 0.4], [[0.0], [1.0]], 1.0)
    with pytest.raises(ValueError):
        GmmPrior([0.5, 0.5], [[0.0]], 1.0)
    with pytest.raises(ValueError):
        GmmPrior([1.0], [[0.0]], 0.0)


def test_gmm_examples():
    single = GmmPrior([1.0], [[0.4, -1.0]], 2.5)
    gp = GaussianPrior([0.4, -1.0], 2.5)
    x = np.array([1.3, 2.2])
    np.testing.assert_array_equal(gmm_denoise(single, x, 0.7), gaussian_denoise(gp, x, 0.7))
    sym = GmmPrior([0.5, 0.5], [[-3.0], [3.0]], 0.5)
    assert gmm_denoise(sym, [0.0], 1.3) == pytest.approx([0.0], abs=1e-15)
    ex = GmmPrior([0.5, 0.5], [[-2.0], [2.0]], 0.25)
    val = gmm_denoise(ex, [1.0], 1.0)
    q = quadrature_posterior_mean(ex, np.eye(1), [1.0], 1.0, grid=[(-8, 8, 4001)])
    assert abs(val[0] - q.mean[0]) <= 1e-6 * abs(q.mean[0])
    # closed form: responsibility 1/(1+exp(-3.2)) on component means 1.8 and -1.4
    r = 1.0 / (1.0 + np.exp(-3.2))
    assert val[0] == pytest.approx(1.8 * r - 1.4 * (1 - r), abs=1e-12)
    assert val[0] == pytest.approx(1.6746697, abs=1e-6)


def test_gmm_identity_at_zero_noise_and_types():
    p = GmmPrior([0.3, 0.7], [[0.0, 1.0], [2.0, -1.0]], 0.4)
    x = np.array([5.0, -3.0])
    np.testing.assert_array_equal(gmm_denoise(p, x, 0.0), x)
    with pytest.raises(TypeError):
        gmm_denoise(p, x + 0j, 1.0)
    with pytest.raises(ValueError):
        gmm_denoise(p, [1.0], 1.0)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=2), st.floats(1e-3, 50))
def test_denoisers_finite(x, sigma):
    p = GmmPrior([0.2, 0.5, 0.3], [[0.0, 1.0], [2.0, -1.0], [-5, 5]], 0.1)
    out = gmm_denoise(p, np.array(x), sigma)
    assert np.all(np.isfinite(out))
    lo, hi = p.means.min(axis=0) - 1e-9, p.means.max(axis=0) + 1e-9
    x = np.array(x)
    # the estimate lies between the component means and the input
    assert np.all(out >= np.minimum(lo, x) - 1e-9) and np.all(out <= np.maximum(hi, x) + 1e-9)


def test_gmm_denoise_matches_two_integrators(rng):
    for d in (1, 1, 1, 2):
        k = rng.integers(1, 4)
        w = rng.dirichlet(np.ones(k))
        p = GmmPrior(w, rng.normal(0, 2, (k, d)), rng.uniform(0.2, 1.0))
        sigma = rng.uniform(0.3, 1.5)
        x = rng.normal(0, 2, d)
        grid = [(-12, 12, 481)] * d
        q = quadrature_posterior_mean(p, np.eye(d), x, sigma, grid=grid)
        a = adaptive_posterior_mean(p, np.eye(d), x, sigma, grid=grid)
        np.testing.assert_allclose(q.mean, a, atol=1e-4)
        np.testing.assert_allclose(gmm_denoise(p, x, sigma), q.mean, atol=1e-6)


def test_counting_denoiser():
    c = CountingDenoiser(GaussianPrior(0.0, 1.0))
    c([1.0], 1.0)
    c([1.0], 0.5)
    assert c.calls == 2


def test_gmm_json_roundtrip(tmp_path):
    p = GmmPrior([0.25, 0.75], [[0.1, 0.2], [0.3, 0.4]], 0.05)
    path = tmp_path / "gmm.json"
    save_gmm_json(p, path)
    q = load_gmm_json(path)
    np.testing.assert_array_equal(q.weights, p.weights)
    np.testing.assert_array_equal(q.means, p.means)
    assert q.variance == p.variance
    path.write_text(json.dumps({"weights": [1.0], "means": [[0.0]]}))
    with pytest.raises(ValueError, match="variance"):
        load_gmm_json(path)
