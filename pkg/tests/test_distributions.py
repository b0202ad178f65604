import math

import numpy as np
import pytest
from scipy import integrate

from knnentropy.distributions import (DistributionSpec, SmoothnessSpec, density, envelopes,
                                      read_dataset_csv, sample, sample_gaussian_pair, splitmix64,
                                      substream_seed, true_entropy, write_dataset_csv)
from knnentropy.spaces import distances_to, euclidean, flat_torus


class TestSeeding:
    def test_splitmix64_reference(self):
        # first outputs of the reference generator seeded with 0
        state = 0
        outs = []
        for _ in range(3):
            state = (state + 0x9E3779B97F4A7C15) & (2 ** 64 - 1)
            outs.append(splitmix64(state))
        assert outs == [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]

    def test_substreams_distinct(self):
        seeds = {substream_seed(42, i) for i in range(10_000)}
        assert len(seeds) == 10_000
        assert all(0 <= s < 2 ** 64 for s in seeds)


class TestSample:
    def test_torus_determinism(self):
        dist = DistributionSpec("uniform_torus", 1)
        a = sample(dist, 5, 7).points
        b = sample(dist, 5, 7).points
        assert a.tobytes() == b.tobytes()
        assert np.all((a >= 0) & (a < 1))
        assert a.shape == (5, 1)

    def test_different_seeds_differ(self):
        dist = DistributionSpec("gaussian", 2)
        assert not np.array_equal(sample(dist, 10, 1).points, sample(dist, 10, 2).points)

    def test_gaussian_mean_clt(self):
        pts = sample(DistributionSpec("gaussian", 1), 10 ** 6, 123).points
        assert abs(pts.mean()) < 4 / 1000

    def test_sine_bump_support_and_mean(self):
        pts = sample(DistributionSpec("sine_bump", 1), 10 ** 5, 5).points
        assert np.all((pts > 0) & (pts < 1))
        # symmetric about 1/2, variance 1/4 - 2/pi^2
        assert abs(pts.mean() - 0.5) < 4 * math.sqrt((0.25 - 2 / math.pi ** 2) / 10 ** 5)

    def test_invalid_n(self):
        with pytest.raises(ValueError):
            sample(DistributionSpec("gaussian", 1), 0, 1)

    def test_invalid_family(self):
        with pytest.raises(ValueError):
            DistributionSpec("cauchy", 1)

    def test_spaces(self):
        assert DistributionSpec("uniform_torus", 2).space == flat_torus(2)
        assert DistributionSpec("gaussian", 3).space == euclidean(3)

    def test_gaussian_pair_correlation(self):
        x, y = sample_gaussian_pair(200_000, 0.5, 3)
        r = np.corrcoef(x.points[:, 0], y.points[:, 0])[0, 1]
        assert abs(r - 0.5) < 0.01


class TestTrueEntropy:
    def test_uniform(self):
        assert true_entropy(DistributionSpec("uniform_cube", 3)) == 0.0
        assert true_entropy(DistributionSpec("uniform_torus", 2)) == 0.0

    def test_gaussian(self):
        assert true_entropy(DistributionSpec("gaussian", 1)) == pytest.approx(1.4189385332046727)
        assert true_entropy(DistributionSpec("gaussian", 3, 2.0)) == pytest.approx(
            1.5 * math.log(2 * math.pi * math.e * 4.0))

    def test_sine_bump_against_quadrature(self):
        dist = DistributionSpec("sine_bump", 1)

        def neg_p_log_p(t):
            p = 0.5 * math.pi * math.sin(math.pi * t)
            return -p * math.log(p) if p > 0 else 0.0

        oracle, _ = integrate.quad(neg_p_log_p, 0.0, 1.0, epsabs=1e-13, epsrel=1e-13)
        assert true_entropy(dist) == pytest.approx(oracle, abs=1e-10)
        assert oracle == pytest.approx(-0.14472988584940017, abs=1e-10)


class TestDensity:
    def test_examples(self):
        assert density(DistributionSpec("uniform_torus", 1), [0.3]) == 1.0
        assert density(DistributionSpec("gaussian", 1), [0.0]) == pytest.approx(1 / math.sqrt(2 * math.pi))
        assert density(DistributionSpec("sine_bump", 1), [0.5]) == pytest.approx(math.pi / 2)

    def test_outside_support(self):
        assert density(DistributionSpec("uniform_cube", 2), [0.5, 1.5]) == 0.0
        assert density(DistributionSpec("sine_bump", 1), [-0.1]) == 0.0

    @pytest.mark.parametrize("family,lo,hi", [("uniform_cube", 0, 1), ("uniform_torus", 0, 1),
                                              ("gaussian", -math.inf, math.inf),
                                              ("sine_bump", 0, 1)])
    def test_normalized(self, family, lo, hi):
        dist = DistributionSpec(family, 1)
        total, _ = integrate.quad(lambda t: density(dist, [t]), lo, hi, epsabs=1e-12)
        assert total == pytest.approx(1.0, abs=1e-6)

    def test_nonnegative(self):
        rng = np.random.default_rng(0)
        pts = rng.uniform(-3, 3, (1000, 1))
        for family in ("uniform_cube", "gaussian", "sine_bump"):
            assert np.all(density(DistributionSpec(family, 1), pts) >= 0)


class TestEnvelopes:
    def test_torus_exact(self):
        env = envelopes(DistributionSpec("uniform_torus", 1))
        for x in (0.0, 0.3, 0.99):
            assert env.gamma_star_fn([x]) == env.gamma_sup_fn([x]) == 2.0
        assert env.Gamma_0 == 1.0
        assert env.C_T == 0.0

    def test_cube(self):
        env = envelopes(DistributionSpec("uniform_cube", 1))
        assert env.gamma_star_fn([0.0]) == 1.0
        assert env.gamma_sup_fn([0.0]) == 2.0
        assert env.rho <= 0.5

    def test_gaussian_flags_divergence(self):
        env = envelopes(DistributionSpec("gaussian", 2))
        assert env.Gamma_0 == math.inf
        assert math.isfinite(env.Gamma_0_truncated(3.0))
        assert env.Gamma_0_truncated(6.0) > env.Gamma_0_truncated(3.0)
        assert math.isfinite(env.Gamma)
        assert env.Gamma_star_lambda(1.0) < math.inf
        assert env.Gamma_star_lambda(2.0) == math.inf

    def test_gaussian_gamma_against_mc(self):
        # Gamma = E[gamma^*(X) / gamma_*(X)]
        dist = DistributionSpec("gaussian", 2)
        env = envelopes(dist)
        pts = sample(dist, 200_000, 1).points
        ratios = np.array([env.gamma_sup_fn(p) / env.gamma_star_fn(p) for p in pts[:20_000]])
        se = ratios.std() / math.sqrt(len(ratios))
        assert abs(ratios.mean() - env.Gamma) < 4 * se

    def test_sine_bump(self):
        env = envelopes(DistributionSpec("sine_bump", 1))
        assert env.Gamma_0 == math.inf
        assert env.Gamma_B(1.0) == math.inf
        assert math.isfinite(env.Gamma_B(0.5))
        assert env.gamma_star_fn([0.5]) <= env.gamma_sup_fn([0.5])
        assert env.gamma_sup_fn([0.5]) == pytest.approx(math.pi, rel=1e-6)

    @pytest.mark.parametrize("family,D", [("uniform_torus", 2), ("uniform_cube", 2),
                                          ("gaussian", 2), ("sine_bump", 1)])
    def test_envelope_validity_monte_carlo(self, family, D):
        dist = DistributionSpec(family, D)
        env = envelopes(dist)
        space = dist.space
        draws = sample(dist, 10 ** 5, 99).points
        rng = np.random.default_rng(7)
        support = sample(dist, 1000, 100).points
        for x in support:
            r = rng.uniform(0.01, 1.0) * env.rho
            p_hat = float(np.mean(distances_to(space, draws, x) <= r))
            lo = env.gamma_star_fn(x) * r ** D
            hi = env.gamma_sup_fn(x) * r ** D
            se = math.sqrt(max(p_hat * (1 - p_hat), 1.0 / 10 ** 5) / 10 ** 5)
            assert lo - 4 * se <= p_hat <= hi + 4 * se


def test_smoothness_spec_validation():
    with pytest.raises(ValueError):
        SmoothnessSpec(beta=0.0, C_beta=1.0, L=1.0)
    SmoothnessSpec(beta=2.0, C_beta=1.0, L=1.0)


def test_csv_round_trip(tmp_path):
    data = sample(DistributionSpec("gaussian", 3), 500, 11)
    path = tmp_path / "pts.csv"
    write_dataset_csv(data, path)
    back = read_dataset_csv(path, euclidean(3))
    assert back.points.tobytes() == data.points.tobytes()
