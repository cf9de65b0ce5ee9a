import numpy as np
import pytest

from gibbsddrm.oracle import ToyModel, tv_distance
from gibbsddrm.pcgs import validate_schedule
from gibbsddrm.reference import VARIANTS, reference_schedule, run_reference_samplers


def toy():
    return ToyModel(prior_mean=0.5, prior_var=1.0, A=[[1.0]], sigma_y=0.5, sigmas=(0.0, 1.0, 2.0, 3.0),
                    phi_values=[0.5, 1.0, 1.5, 2.0], phi_weights=[1, 1, 1, 1], y=[1.2])


def joint_samples(x0, phi):
    return np.column_stack([x0[:, 0], phi])


def joint_tv(a, b, values):
    # x_0 binned on a shared range, phi on its discrete support
    xr = (min(a[:, 0].min(), b[:, 0].min()), max(a[:, 0].max(), b[:, 0].max()))
    lo, hi = values.min() - 0.25, values.max() + 0.25
    return tv_distance(a, b, bins=(40, values.size * 2 + 1), range=[xr, (lo, hi)])


def test_sampler1_two_variable_gaussian_moments():
    model = ToyModel(prior_mean=0.3, prior_var=1.0, A=[[1.0]], sigma_y=0.6, sigmas=(0.0, 0.8),
                     phi_values=[1.0], phi_weights=[1.0], y=[0.9])
    n = 100_000
    # many chains, last sweep only: independent draws after burn-in
    chain = run_reference_samplers(model, "sampler1", 1, np.random.default_rng(0), n_chains=n, burn_in=30)
    z = chain.x[:, :, 0]
    mean, cov = model.joint(0)
    # x_{0:1} | y from the joint Gaussian
    g = np.linalg.solve(cov[2:, 2:], cov[2:, :2]).T
    post_mean = mean[:2] + g @ (model.y - mean[2:])
    post_cov = cov[:2, :2] - g @ cov[2:, :2]
    se_mean = np.sqrt(np.diag(post_cov) / n)
    assert np.all(np.abs(z.mean(axis=0) - post_mean) < 3 * se_mean)
    emp = np.cov(z.T)
    # standard error of a sample covariance entry: sqrt((s_ij^2 + s_ii s_jj) / n)
    se_cov = np.sqrt((post_cov**2 + np.outer(np.diag(post_cov), np.diag(post_cov))) / n)
    assert np.all(np.abs(emp - post_cov) < 3 * se_cov)


@pytest.mark.parametrize("variant", VARIANTS)
def test_every_variant_preserves_posterior(variant):
    model = toy()
    chain = run_reference_samplers(model, variant, 50, np.random.default_rng(1), n_chains=2000, burn_in=20)
    x0, phi = model.sample_posterior(100_000, np.random.default_rng(2))
    tv = joint_tv(joint_samples(chain.x0, chain.phi), joint_samples(x0, phi), model.phi_values)
    assert tv < 0.05


def test_sampler1_vs_pcgs():
    model = toy()
    s1 = run_reference_samplers(model, "sampler1", 50, np.random.default_rng(3), n_chains=2000, burn_in=20)
    pc = run_reference_samplers(model, "pcgs", 50, np.random.default_rng(4), n_chains=2000, burn_in=20)
    tv = joint_tv(joint_samples(s1.x0, s1.phi), joint_samples(pc.x0, pc.phi), model.phi_values)
    assert tv < 0.05


def test_phi_marginal_frequencies():
    model = toy()
    chain = run_reference_samplers(model, "pcgs", 50, np.random.default_rng(5), n_chains=2000, burn_in=20,
                                   M=(2, 1, 0))
    freq = np.bincount(chain.phi_index, minlength=model.K) / chain.phi.size
    np.testing.assert_allclose(freq, model.exact_phi_posterior(), atol=0.01)


def test_input_validation():
    model = toy()
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        run_reference_samplers(model, "sampler9", 1, rng)
    with pytest.raises(ValueError):
        run_reference_samplers("not a toy", "sampler1", 1, rng)
    with pytest.raises(ValueError):
        run_reference_samplers(model, "sampler1", 0, rng)
    with pytest.raises(ValueError):
        run_reference_samplers(model, "pcgs", 1, rng, M=(1, 1))
    with pytest.raises(ValueError):
        reference_schedule("sampler9", 2, (1, 1))


@pytest.mark.parametrize("variant", VARIANTS)
def test_reference_schedules_are_valid(variant):
    validate_schedule(reference_schedule(variant, 3, (1, 2, 0)))


def test_chain_shapes():
    chain = run_reference_samplers(toy(), "sampler3", 4, np.random.default_rng(0), n_chains=7)
    assert chain.x.shape == (28, 4, 1) and chain.phi.shape == (28,) and chain.x0.shape == (28, 1)
