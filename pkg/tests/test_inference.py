import math
import time

import numpy as np
import pytest

from binary_iop.grid_pde import GridSpec, ModelParams
from binary_iop.inference import (
    Chain,
    ChainStalledError,
    PosteriorSpec,
    PriorBox,
    calibrate_sigma_eps,
    conditional_mean,
    effective_sample_size,
    log_posterior,
    mh_step,
    posterior_histogram,
    run_chain,
)
from binary_iop.synthetic import generate

SMALL = GridSpec(n_y=41, n_tau=40)


def gaussian(x):
    return -0.5 * float(x @ x)


@pytest.fixture(scope="module")
def small_spec():
    truth = ModelParams(1.0, 0.0, 0.0, 1.0, 0.05)
    ms = generate(truth, SMALL)
    return PosteriorSpec(ms.observed(), SMALL, 0.05, PriorBox(), calibrate_sigma_eps(ms.values, 0.0))


@pytest.fixture(scope="module")
def small_chain(small_spec):
    return run_chain(small_spec, [0.5, 0.2, -0.2, 0.8], k_total=3000, k_burn=1000, seed=11, stall_check=1000)


class TestPrior:
    def test_box_checks(self):
        with pytest.raises(ValueError):
            PriorBox(lower=[0, 0, 0, 0.0], upper=[1, 1, 1, 1])
        with pytest.raises(ValueError):
            PriorBox(lower=[0, 0, 0, 1.0], upper=[1, 1, 1, 1])

    def test_project(self):
        np.testing.assert_array_equal(PriorBox().project([20, -20, 0, 0]), [10, -10, 0, 0.05])


class TestLogPosterior:
    def test_zero_at_truth(self, example1_spec):
        assert log_posterior(example1_spec, [1.0, 0.0, 0.0, 1.0]) == 0.0

    def test_outside_box(self, example1_spec):
        assert log_posterior(example1_spec, [11.0, 0, 0, 1]) == -math.inf
        assert log_posterior(example1_spec, [1.0, 0, 0, 0.01]) == -math.inf

    def test_monotone_in_residual(self, example1_spec):
        near, far = [1.05, 0, 0, 1], [1.3, 0, 0, 1]
        rn = np.linalg.norm(example1_spec.observed - example1_spec.predict(near))
        rf = np.linalg.norm(example1_spec.observed - example1_spec.predict(far))
        assert rn < rf
        assert example1_spec(near) > example1_spec(far)

    def test_sigma_eps_calibration(self):
        v = np.array([3.0, 4.0])
        rms = math.sqrt(12.5)
        assert calibrate_sigma_eps(v, 0.0) == pytest.approx(0.01 * rms)
        assert calibrate_sigma_eps(v, 0.05) == pytest.approx(0.05 * rms)

    def test_spec_drops_truth(self, grid, truth1):
        ms = generate(truth1, grid)
        spec = PosteriorSpec(ms, grid, 0.05)
        assert not hasattr(spec.data, "truth")

    def test_rejects_bad_sigma(self, example1_spec):
        with pytest.raises(ValueError):
            PosteriorSpec(example1_spec.data, sigma_eps=0.0)


class TestMhStep:
    def test_outside_rejected(self):
        box = PriorBox(lower=[-1, -1, -1, 0.5], upper=[1, 1, 1, 2])
        target = lambda t: 0.0 if box.contains(t) else -math.inf
        theta = np.array([0.99, 0, 0, 1.0])
        rng = np.random.default_rng(0)
        for _ in range(200):
            res = mh_step(target, theta, 0.0, [5, 0, 0, 0.0001], rng)
            if not box.contains(res.proposal):
                assert not res.accepted
                assert np.array_equal(res.theta, theta)

    def test_uphill_always_accepted(self):
        target = lambda t: -float(t @ t)
        rng = np.random.default_rng(1)
        theta = np.array([3.0])
        for _ in range(100):
            res = mh_step(target, theta, target(theta), [0.01], rng)
            if res.proposal_log_post >= target(theta):
                assert res.accepted
            theta = res.theta

    def test_rule_matches_uniform(self):
        rng = np.random.default_rng(2)
        theta, lp = np.array([0.0]), 0.0
        for _ in range(500):
            res = mh_step(gaussian, theta, lp, [2.4], rng)
            delta = res.proposal_log_post - lp
            assert res.accepted == (res.uniform < min(1.0, math.exp(delta)))
            theta, lp = res.theta, res.log_post


class TestRunChain:
    def test_gaussian_target(self):
        start = time.perf_counter()
        ch = run_chain(gaussian, [0.0], k_total=100_000, k_burn=0, gamma=[2.4], seed=0, adapt=False)
        elapsed = time.perf_counter() - start
        x = ch.samples[:, 0]
        assert abs(x.mean()) <= 0.05
        assert abs(x.var() - 1.0) <= 0.1
        assert elapsed < 2.0  # generous under load; the acceptance suite checks 1 s

    def test_support_confinement(self, small_chain, small_spec):
        assert all(small_spec.prior.contains(s) for s in small_chain.samples)

    def test_repeat_on_reject(self, small_chain):
        prev = np.vstack([small_chain.init, small_chain.samples[:-1]])
        rej = ~small_chain.accepted
        np.testing.assert_array_equal(small_chain.samples[rej], prev[rej])
        assert np.all(np.any(small_chain.samples[~rej] != prev[~rej], axis=1))

    def test_acceptance_replay(self, small_chain):
        prev_lp = np.concatenate([[np.nan], small_chain.log_posts[:-1]])
        for k in range(1, len(small_chain)):
            d = small_chain.proposal_log_posts[k] - prev_lp[k]
            expect = small_chain.uniforms[k] < min(1.0, math.exp(d)) if np.isfinite(d) else False
            assert bool(small_chain.accepted[k]) == expect

    def test_truth_dominates_samples(self, small_chain, small_spec):
        assert small_spec([1.0, 0.0, 0.0, 1.0]) >= small_chain.log_posts.max()

    def test_counts(self, small_chain):
        assert 0 <= small_chain.accept_count <= len(small_chain)
        assert 0.05 < small_chain.acceptance_rate < 0.8

    def test_deterministic(self, small_spec):
        a = run_chain(small_spec, [1, 0, 0, 1], k_total=200, k_burn=50, seed=5)
        b = run_chain(small_spec, [1, 0, 0, 1], k_total=200, k_burn=50, seed=5)
        np.testing.assert_array_equal(a.samples, b.samples)

    def test_single_step(self, small_spec):
        ch = run_chain(small_spec, [1, 0, 0, 1], k_total=1, k_burn=0, seed=0)
        assert len(ch) == 1
        s = ch.samples[0]
        assert np.array_equal(s, [1, 0, 0, 1]) or ch.accepted[0]

    def test_adaptation_freezes_at_burn_in(self):
        ch = run_chain(gaussian, [0.0], k_total=6000, k_burn=3000, gamma=[0.01], seed=3)
        steps = [k for k, _ in ch.gamma_history]
        assert max(steps) <= 3000
        assert ch.proposal_gamma[0] > 0.01

    def test_stall(self):
        spike = lambda t: -1e12 * float(t @ t)
        with pytest.raises(ChainStalledError, match="acceptance rate"):
            run_chain(spike, [0.0], k_total=6000, k_burn=0, gamma=[1.0], adapt=False)

    @pytest.mark.parametrize("kw", [dict(k_total=0), dict(k_total=10, k_burn=10), dict(gamma=[0.0])])
    def test_argument_checks(self, kw):
        args = dict(k_total=10, k_burn=0, gamma=[1.0])
        args.update(kw)
        with pytest.raises(ValueError):
            run_chain(gaussian, [0.0], **args)

    def test_start_outside_box(self, small_spec):
        with pytest.raises(ValueError):
            run_chain(small_spec, [20, 0, 0, 1], k_total=10, k_burn=0)


class TestSummaries:
    def _chain(self, samples, burn_in=0):
        s = np.asarray(samples, dtype=float)
        n = s.shape[0]
        return Chain(s, np.zeros(n), np.ones(n, bool), burn_in, np.ones(s.shape[1]), 0, s[0])

    def test_mean_of_constant(self):
        ch = self._chain(np.tile([0.3, 0.1, -0.2, 1.1], (10, 1)))
        np.testing.assert_allclose(conditional_mean(ch), [0.3, 0.1, -0.2, 1.1], rtol=1e-15)

    def test_mean_arithmetic(self):
        ch = self._chain([[0, 0, 0, 1], [2, 0, 0, 1]])
        np.testing.assert_array_equal(conditional_mean(ch), [1, 0, 0, 1])
        assert conditional_mean(ch, r=0.05) == ModelParams(1, 0, 0, 1, 0.05)

    def test_burn_in_bounds(self):
        with pytest.raises(ValueError):
            self._chain([[0, 0, 0, 1]], burn_in=1)

    def test_mean_from_serialized_chain(self, tmp_path, small_chain):
        small_chain.to_csv(tmp_path / "c.csv")
        back = Chain.from_csv(tmp_path / "c.csv", burn_in=small_chain.burn_in)
        np.testing.assert_array_equal(back.samples, small_chain.samples)
        np.testing.assert_array_equal(back.accepted, small_chain.accepted)
        np.testing.assert_array_equal(conditional_mean(back), conditional_mean(small_chain))

    def test_histogram_single_bin(self):
        h = posterior_histogram(self._chain(np.tile([0.5, 0, 0, 1], (20, 1))), "theta1", 10)
        assert np.count_nonzero(h.mass) == 1 and h.mass.sum() == 1.0

    def test_histogram_uniform(self):
        x = np.random.default_rng(0).random(100_000)
        s = np.column_stack([x, x, x, x + 1])
        h = posterior_histogram(self._chain(s), 0, 10)
        assert np.all(np.abs(h.mass - 0.1) <= 0.03)

    def test_histogram_mass_and_range(self, small_chain, tmp_path):
        for c in range(4):
            h = posterior_histogram(small_chain, c, 25)
            assert h.mass.sum() == pytest.approx(1.0)
            x = small_chain.retained[:, c]
            assert h.edges[0] == x.min() and h.edges[-1] == x.max()
        h.to_csv(tmp_path / "h.csv")
        back = type(h).from_csv(tmp_path / "h.csv")
        np.testing.assert_array_equal(back.edges, h.edges)
        np.testing.assert_array_equal(back.mass, h.mass)

    def test_ess(self):
        rng = np.random.default_rng(0)
        iid = rng.standard_normal(20_000)
        assert effective_sample_size(iid) > 15_000
        ar = np.empty(20_000)
        ar[0] = 0
        for i in range(1, ar.size):
            ar[i] = 0.9 * ar[i - 1] + rng.standard_normal()
        # AR(1) with rho = 0.9 has ESS ~ n (1 - rho) / (1 + rho)
        assert 600 < effective_sample_size(ar) < 1600
