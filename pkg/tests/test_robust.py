import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from compresslearn.compression import Gaussian1DFamily, MixtureFamily, UniformBoxFamily
from compresslearn.densities import GaussianNoise, IsoGaussian, LaplaceNoise, SeededRng, UniformBox, draw_samples, distance
from compresslearn.robust import (
    AdversaryBudget,
    AdversaryStrategy,
    CliqueNotFound,
    build_grid,
    compression_block_size,
    corrupt_adversarial,
    epsilon_for_budget,
    find_clique,
    inv_cdf_noise,
    learn_adversarial,
    learn_clean,
    learn_noisy,
    mills_ratio_bound,
    moment_fit,
    partition_groups,
)

# ---------------------------------------------------------------- quantiles


def test_laplace_median_quantile_is_zero():
    assert inv_cdf_noise(LaplaceNoise(1.0), 0.5) == 0.0


def test_laplace_quantile_closed_form():
    assert inv_cdf_noise(LaplaceNoise(1.0), 1 / (2 * math.e)) == pytest.approx(1.0, abs=1e-15)


def test_gaussian_median_quantile_is_zero():
    assert inv_cdf_noise(GaussianNoise(1.0), 0.5) == 0.0


@pytest.mark.parametrize("delta", [1e-9, 1e-4, 0.01, 0.2, 0.7])
def test_quantiles_match_scipy(delta):
    assert inv_cdf_noise(GaussianNoise(0.3), delta) == pytest.approx(abs(stats.norm.ppf(delta, scale=0.3)), rel=1e-12)
    assert inv_cdf_noise(LaplaceNoise(0.4), delta) == pytest.approx(abs(stats.laplace.ppf(delta, scale=0.4)), rel=1e-12)


@pytest.mark.parametrize("delta", [1e-12, 1e-6, 0.01, 0.3])
def test_mills_ratio_bound_dominates_exact(delta):
    g = GaussianNoise(2.0)
    assert mills_ratio_bound(g, delta) >= inv_cdf_noise(g, delta)


def test_quantile_domain():
    with pytest.raises(ValueError):
        inv_cdf_noise(GaussianNoise(1.0), 0.0)
    with pytest.raises(ValueError):
        mills_ratio_bound(GaussianNoise(1.0), 0.5)


# ---------------------------------------------------------------- grids


def test_grid_unit_range():
    g = build_grid(1.0, 0.25)
    assert g.points == (-1.0, -0.5, 0.0, 0.5, 1.0)


def test_grid_degenerate_range():
    assert build_grid(0.0, 0.1).points == (0.0,)


def test_grid_collapses_when_range_below_eta():
    assert build_grid(0.05, 0.1).points == (0.0,)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, 20.0), st.floats(0.01, 5.0))
def test_grid_covers_range_within_eta(R, eta):
    g = build_grid(R, eta)
    pts = np.asarray(g.points)
    assert np.all(np.diff(pts) > 0)
    assert np.all(np.diff(pts) <= 2 * eta * (1 + 1e-9))
    ys = np.linspace(-R, R, 501)
    assert np.abs(ys[:, None] - pts[None, :]).min(axis=1).max() <= eta * (1 + 1e-9)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 40), st.floats(0.01, 2.0))
def test_grid_symmetric_for_integral_ratio(K, eta):
    g = build_grid(K * eta, eta)
    pts = np.asarray(g.points)
    assert len(pts) == K + 1
    np.testing.assert_allclose(pts, -pts[::-1], atol=1e-12)


# ---------------------------------------------------------------- corruption


def test_zero_budget_is_identity():
    x = draw_samples(IsoGaussian([0.0], 1.0), 20, SeededRng(0))
    rec = corrupt_adversarial(x, AdversaryBudget(0, 3.0), AdversaryStrategy("MeanShift"), rng=SeededRng(1))
    np.testing.assert_array_equal(rec.samples, x)
    assert not rec.mask.any()


def test_mean_shift_moves_two_rows_by_c():
    x = draw_samples(IsoGaussian([0.0], 1.0), 20, SeededRng(0))
    rec = corrupt_adversarial(x, AdversaryBudget(2, 3.0), AdversaryStrategy("MeanShift"), rng=SeededRng(1))
    diff = (rec.samples - x)[:, 0]
    assert np.count_nonzero(diff) == 2
    np.testing.assert_allclose(diff[diff != 0], 3.0, rtol=1e-12)
    np.testing.assert_array_equal(diff != 0, rec.mask)


@settings(max_examples=60, deadline=None)
@given(
    st.integers(0, 6),
    st.floats(0.0, 50.0),
    st.sampled_from(["MeanShift", "DecoyCluster", "GreedyConfuser"]),
    st.integers(1, 3),
    st.integers(0, 1000),
)
def test_corruption_respects_budget(s, C, kind, d, seed):
    x = draw_samples(IsoGaussian([0.0] * d, 1.0), 30, SeededRng(seed))
    rec = corrupt_adversarial(x, AdversaryBudget(s, C), AdversaryStrategy(kind), target=IsoGaussian([7.0] * d, 1.0), rng=SeededRng(seed, (1,)))
    dev = np.abs(rec.samples - x).max(axis=1)
    assert rec.mask.sum() <= s
    assert np.all(dev <= C + 1e-12)
    assert np.all(dev[~rec.mask] == 0)


def test_decoy_cluster_reaches_target_within_budget():
    x = np.zeros((10, 1))
    rec = corrupt_adversarial(x, AdversaryBudget(3, 50.0), AdversaryStrategy("DecoyCluster", (20.0,)), rng=SeededRng(2))
    np.testing.assert_array_equal(rec.samples[rec.mask, 0], 20.0)
    rec = corrupt_adversarial(x, AdversaryBudget(3, 5.0), AdversaryStrategy("DecoyCluster", (20.0,)), rng=SeededRng(2))
    np.testing.assert_array_equal(rec.samples[rec.mask, 0], 5.0)


def test_budget_validation():
    with pytest.raises(ValueError):
        AdversaryBudget(-1, 1.0)
    with pytest.raises(ValueError):
        AdversaryStrategy("Teleport")


# ---------------------------------------------------------------- partition and pigeonhole


@pytest.mark.parametrize("s", [0, 1, 2, 3])
def test_partition_shape(s):
    p = partition_groups(100, 30, s)
    assert len(p.groups) == 2 * s + 1
    sizes = {len(g) for g in p.groups}
    assert len(sizes) == 1
    seen = set(p.compression)
    for g in p.groups:
        assert seen.isdisjoint(g)
        seen |= set(g)


@pytest.mark.parametrize("s", [0, 1, 2, 3])
def test_pigeonhole_every_corruption_pattern(s):
    p = partition_groups(7 * (2 * s + 1) + 5, 5, s)
    rows = range(5, 5 + 7 * (2 * s + 1))
    for bad in itertools.combinations(rows, s):
        clean = sum(1 for g in p.groups if not set(bad) & set(g))
        assert clean >= s + 1


# ---------------------------------------------------------------- cliques


def _brute_clique(hyps, thr, oracle):
    m = len(hyps)
    for size in range(m, 0, -1):
        for sub in itertools.combinations(range(m), size):
            if all(oracle(hyps[i], hyps[j]) <= thr for i, j in itertools.combinations(sub, 2)):
                return list(sub)
    return []


def _abs_oracle(a, b):
    return abs(a.mean[0] - b.mean[0])


def test_clique_triple_among_outliers():
    hyps = [IsoGaussian([m], 1.0) for m in (0.0, 9.0, 0.05, -0.03, -8.0)]
    assert find_clique(hyps, 0.2, 3) == [0, 2, 3]


def test_clique_all_identical():
    f = IsoGaussian([0.0], 1.0)
    assert find_clique([f] * 5, 0.0, 3) == [0, 1, 2, 3, 4]


def test_clique_none_close():
    hyps = [IsoGaussian([10.0 * i], 1.0) for i in range(4)]
    with pytest.raises(CliqueNotFound):
        find_clique(hyps, 0.1, 2)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 12), min_size=1, max_size=9), st.integers(0, 4))
def test_clique_matches_brute_force(centres, thr):
    hyps = [IsoGaussian([float(c)], 1.0) for c in centres]
    got = find_clique(hyps, float(thr), 1, _abs_oracle)
    assert got == _brute_clique(hyps, float(thr), _abs_oracle)


# ---------------------------------------------------------------- learners


def test_block_size_rules():
    fam = Gaussian1DFamily()
    assert compression_block_size(fam, 0.3, 0.1, 10_000) == math.ceil(fam.scheme.m(0.15) * math.log(10))
    assert compression_block_size(fam, 0.01, 0.1, 100) == 50


def test_epsilon_for_budget_fits():
    fam = Gaussian1DFamily()
    for n in (500, 2000, 8000):
        eps = epsilon_for_budget(n, fam, 0.1)
        nc = math.ceil(fam.scheme.m(eps / 2) * math.log(10))
        log_m = 2 * math.log(nc)
        assert nc + math.ceil((2 * log_m + math.log(10)) / (2 * eps**2)) <= n
    assert epsilon_for_budget(500, fam, 0.1) > epsilon_for_budget(8000, fam, 0.1)


def test_clean_learner_gaussian():
    truth = IsoGaussian([1.0], 1.5)
    x = draw_samples(truth, 3000, SeededRng(1))
    fit = learn_clean(x, Gaussian1DFamily(), 0.2, 0.1, SeededRng(2))
    assert distance(fit.density, truth).value < 0.1
    assert fit.candidate_count == fit.block_size**2


def test_clean_learner_box():
    truth = UniformBox([0.0], [1.0])
    x = draw_samples(truth, 2000, SeededRng(3))
    fit = learn_clean(x, UniformBoxFamily(1, 0.5), 0.4, 0.1, SeededRng(4))
    assert distance(fit.density, truth).value < 0.2


def test_noise_free_limit_matches_clean_learner():
    x = draw_samples(IsoGaussian([1.0], 1.5), 1500, SeededRng(1))
    fam = Gaussian1DFamily()
    clean = learn_clean(x, fam, 0.3, 0.1, SeededRng(5))
    noisy = learn_noisy(x, fam, GaussianNoise(1e-12), 0.3, 0.1, SeededRng(5))
    assert noisy.grid_size == 1
    assert noisy.density == clean.density


def test_zero_budget_adversarial_matches_clean_learner():
    x = draw_samples(IsoGaussian([1.0], 1.5), 1500, SeededRng(1))
    fam = Gaussian1DFamily()
    clean = learn_clean(x, fam, 0.3, 0.1, SeededRng(5))
    adv = learn_adversarial(x, 0, fam, 5.0, 0.3, 0.1, SeededRng(5))
    assert adv.density == clean.density and adv.clique == (0,)


def test_noisy_learner_box():
    truth, noise = UniformBox([0.0], [1.0]), GaussianNoise(0.2)
    x = draw_samples(truth, 2000, SeededRng(6)) + draw_samples(noise, 2000, SeededRng(7))
    fit = learn_noisy(x, UniformBoxFamily(1, 1.0), noise, 0.2, 0.1, SeededRng(8), cap=200)
    assert fit.grid_size > 1 and fit.truncated
    assert distance(fit.density, truth).value < 0.2


def test_adversarial_learner_beats_moment_fit():
    truth = IsoGaussian([0.0], 1.0)
    x = draw_samples(truth, 900, SeededRng(9))
    rec = corrupt_adversarial(x, AdversaryBudget(2, 50.0), AdversaryStrategy("DecoyCluster", (50.0,)), rng=SeededRng(10))
    fit = learn_adversarial(rec.samples, 2, Gaussian1DFamily(), 50.0, 0.45, 0.1, SeededRng(11), cap=1000)
    assert len(fit.clique) >= 3 and len(fit.winners) == 5
    assert distance(fit.density, truth).value < 0.2
    assert distance(moment_fit(rec.samples), truth).value > 0.2


def test_mixture_learner_runs():
    truth_parts = [UniformBox([0.0], [1.0]), UniformBox([3.0], [4.0])]
    x = np.concatenate([draw_samples(p, 600, SeededRng(12, (i,))) for i, p in enumerate(truth_parts)])
    x = x[np.random.default_rng(0).permutation(len(x))]
    fam = MixtureFamily(UniformBoxFamily(1, 0.5), 2)
    fit = learn_clean(x, fam, 0.5, 0.1, SeededRng(13), cap=300)
    assert fit.truncated and fit.evaluated <= 300
    assert fit.density.dim == 1
