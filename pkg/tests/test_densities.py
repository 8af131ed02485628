import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, optimize, special, stats

from compresslearn.densities import (
    Convolved,
    GaussianNoise,
    IsoGaussian,
    LaplaceNoise,
    Mixture,
    SeededRng,
    UniformBox,
    convolve_noise,
    density_from_dict,
    distance,
    draw_samples,
    pdf_eval,
    tv_gaussian1d_closed,
)

# Frozen oracle values.
# 2 * Phi(1/2) - 1
TV_N01_N11 = 0.38292492254802624
# scipy quad of |N(0,1) - N(0,2)| / 2 split at the crossings +-sqrt(8 log 2 / 3)
TV_N01_N02 = 0.3226745688347691
# scipy quad of the U[0,1] * N(0, 0.04) convolution integral at x = 0.5
BOX_CONV_AT_HALF = 0.9875806693484479


# ---------------------------------------------------------------- pdf_eval


def test_gaussian_pdf_at_mode():
    assert pdf_eval(IsoGaussian([0.0], 1.0), [0.0]) == pytest.approx(1 / math.sqrt(2 * math.pi), rel=1e-15)


def test_unit_square_pdf():
    assert pdf_eval(UniformBox([0, 0], [1, 1]), [0.5, 0.5]) == 1.0


def test_mixture_only_second_component_active():
    m = Mixture([0.5, 0.5], [UniformBox([0], [1]), UniformBox([1], [2])])
    assert pdf_eval(m, [1.5]) == pytest.approx(0.5, rel=1e-15)


def test_pdf_dimension_mismatch():
    with pytest.raises(ValueError):
        pdf_eval(IsoGaussian([0.0, 0.0], 1.0), [0.0])


def test_gaussian_pdf_matches_scipy():
    g = IsoGaussian([0.3, -1.0], 0.7)
    x = np.array([[0.1, 0.2], [-2.0, 1.0]])
    want = stats.multivariate_normal([0.3, -1.0], 0.49 * np.eye(2)).pdf(x)
    np.testing.assert_allclose(g.pdf(x), want, rtol=1e-12)


# ---------------------------------------------------------------- types


def test_box_rejects_narrow_side():
    with pytest.raises(ValueError):
        UniformBox([0.0], [0.5], min_width=1.0)


def test_mixture_rejects_off_simplex():
    with pytest.raises(ValueError):
        Mixture([0.7, 0.3001], [UniformBox([0], [1]), UniformBox([1], [2])])


def test_nonpositive_sigma_rejected():
    with pytest.raises(ValueError):
        IsoGaussian([0.0], 0.0)


@pytest.mark.parametrize(
    "f",
    [
        IsoGaussian([1.0, 2.0], 0.5),
        UniformBox([0, 0], [1, 2], 0.5),
        Mixture([0.25, 0.75], [IsoGaussian([0.0], 1.0), UniformBox([1], [3])]),
        Convolved(UniformBox([0], [1]), LaplaceNoise(0.3)),
        GaussianNoise(0.2, 2),
    ],
)
def test_json_round_trip(f):
    obj = json.loads(json.dumps(f.to_dict()))
    g = density_from_dict(obj)
    assert g == f and g.key == f.key


# ---------------------------------------------------------------- sampling


def test_box_samples_inside_support():
    x = draw_samples(UniformBox([0], [1]), 100, SeededRng(7))
    assert x.shape == (100, 1) and np.all((x >= 0) & (x <= 1))


def test_sampling_is_deterministic():
    f = Mixture([0.3, 0.7], [IsoGaussian([0.0], 1.0), UniformBox([2], [3])])
    a = draw_samples(f, 50, SeededRng(7))
    b = draw_samples(f, 50, SeededRng(7))
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, draw_samples(f, 50, SeededRng(7, (1,))))


def test_gaussian_sample_mean():
    x = draw_samples(IsoGaussian([0.0], 1.0), 100_000, SeededRng(1))
    assert abs(x.mean()) < 0.02


def test_substreams_differ_and_repeat():
    r = SeededRng(3)
    assert r.child(1).generator().random() == SeededRng(3, (1,)).generator().random()
    assert r.child(1).generator().random() != r.child(2).generator().random()


# ---------------------------------------------------------------- convolution


def test_gaussian_plus_gaussian_noise_is_gaussian():
    h = convolve_noise(IsoGaussian([0.0], 1.0), GaussianNoise(1.0))
    assert isinstance(h, IsoGaussian)
    assert h.sigma == pytest.approx(math.sqrt(2), rel=1e-15)


def test_box_conv_pdf_matches_quadrature_oracle():
    h = convolve_noise(UniformBox([0], [1]), GaussianNoise(0.2))
    assert pdf_eval(h, [0.5]) == pytest.approx(BOX_CONV_AT_HALF, abs=1e-6)
    live = integrate.quad(lambda y: stats.norm.pdf(0.5 - y, 0, 0.2), 0, 1, epsabs=1e-13)[0]
    assert pdf_eval(h, [0.5]) == pytest.approx(live, abs=1e-6)


@pytest.mark.parametrize("noise", [GaussianNoise(0.3), LaplaceNoise(0.4)])
@pytest.mark.parametrize(
    "base",
    [UniformBox([-0.5], [1.0]), IsoGaussian([0.2], 0.6), Mixture([0.4, 0.6], [UniformBox([0], [1]), IsoGaussian([3.0], 0.5)])],
)
def test_convolved_pdf_against_direct_integral(base, noise):
    h = convolve_noise(base, noise)
    g = noise
    for x in (-1.0, 0.3, 2.0):
        lo, hi = base.support()
        pts = sorted({float(lo[0]), float(hi[0]), x} | {b for b in base.breakpoints(0) if lo[0] <= b <= hi[0]})
        want = integrate.quad(
            lambda y: base.pdf(np.array([[y]]))[0] * g.pdf(np.array([[x - y]]))[0],
            float(lo[0]),
            float(hi[0]),
            points=pts[1:-1] or None,
            limit=400,
            epsabs=1e-12,
        )[0]
        assert pdf_eval(h, [x]) == pytest.approx(want, abs=1e-6)


def test_convolved_sampling_matches_sum_in_distribution():
    base, noise = UniformBox([0], [1]), GaussianNoise(0.2)
    h = Convolved(base, noise)
    a = h.sample(10_000, SeededRng(5))[:, 0]
    b = (base.sample(10_000, SeededRng(6)) + noise.sample(10_000, SeededRng(7)))[:, 0]
    assert stats.ks_2samp(a, b).statistic < 0.05


def test_high_dim_numeric_composite_refuses_pdf():
    h = Convolved(Mixture([0.5, 0.5], [IsoGaussian([0, 0, 0], 1.0), IsoGaussian([1, 1, 1], 1.0)]), GaussianNoise(0.2, 3))
    assert h.sample(10, SeededRng(0)).shape == (10, 3)
    with pytest.raises(NotImplementedError):
        h.pdf(np.zeros((1, 3)))


# ---------------------------------------------------------------- distances


def test_tv_identical_is_zero():
    f = IsoGaussian([0.0], 1.0)
    assert distance(f, f).value == 0.0


def test_tv_half_overlap():
    assert distance(UniformBox([0], [1]), UniformBox([0.5], [1.5])).value == pytest.approx(0.5, abs=1e-10)


def test_tv_unit_shift_gaussians():
    assert distance(IsoGaussian([0.0], 1.0), IsoGaussian([1.0], 1.0)).value == pytest.approx(TV_N01_N11, abs=1e-12)
    assert tv_gaussian1d_closed(0, 1, 1, 1) == pytest.approx(2 * special.ndtr(0.5) - 1, abs=1e-15)


def test_tv_closed_form_scale_change():
    assert tv_gaussian1d_closed(0, 1, 0, 1) == 0.0
    assert tv_gaussian1d_closed(0, 1, 0, 2) == pytest.approx(TV_N01_N02, abs=1e-10)


def test_l1_is_twice_tv_quadrature():
    f, g = UniformBox([0], [1]), IsoGaussian([0.7], 0.4)
    assert distance(f, g, "L1").value == pytest.approx(2 * distance(f, g, "TV").value, abs=1e-12)


def test_l2_between_boxes():
    # ||U[0,1] - U[0.3,1.3]||_2^2 = 0.3 + 0.3
    assert distance(UniformBox([0], [1]), UniformBox([0.3], [1.3]), "L2").value == pytest.approx(math.sqrt(0.6), rel=1e-10)


def test_quadrature_2d_matches_product_form():
    f, g = IsoGaussian([0, 0], 1.0), IsoGaussian([0.5, 0], 1.0)
    # shift along one axis reduces to the 1D closed form
    assert distance(f, g).value == pytest.approx(tv_gaussian1d_closed(0, 1, 0.5, 1), abs=1e-5)


def test_monte_carlo_agrees_with_quadrature():
    pairs = [
        (IsoGaussian([0.0], 1.0), IsoGaussian([1.0], 1.0)),
        (UniformBox([0], [1]), UniformBox([0.5], [1.5])),
        (IsoGaussian([0.0], 1.0), UniformBox([-1], [1])),
    ]
    for k, (f, g) in enumerate(pairs):
        for metric in ("TV", "L2"):
            q = distance(f, g, metric).value
            mc = distance(f, g, metric, method="monte_carlo", budget=100_000, rng=SeededRng(10, (k,)))
            assert abs(mc.value - q) <= 3 * mc.stderr + 1e-12


def test_monte_carlo_standard_error_bound():
    mc = distance(IsoGaussian([0.0], 1.0), IsoGaussian([1.0], 1.0), method="monte_carlo", budget=100_000, rng=SeededRng(1))
    assert 0 < mc.stderr <= 1 / math.sqrt(100_000)


def test_quadrature_limited_to_two_dims():
    f = IsoGaussian([0, 0, 0], 1.0)
    with pytest.raises(ValueError):
        distance(f, IsoGaussian([1, 0, 0], 1.0), method="quadrature")


def test_monte_carlo_is_deterministic():
    f, g = IsoGaussian([0, 0, 0], 1.0), IsoGaussian([1, 0, 0], 1.0)
    a = distance(f, g, rng=SeededRng(4), budget=20_000)
    b = distance(f, g, rng=SeededRng(4), budget=20_000)
    assert a == b


# ---------------------------------------------------------------- properties

gauss1d = st.builds(
    lambda m, s: IsoGaussian([m], s),
    st.floats(-3, 3),
    st.floats(0.3, 3),
)
box1d = st.builds(lambda a, w: UniformBox([a], [a + w]), st.floats(-3, 3), st.floats(0.2, 3))
dens1d = st.one_of(gauss1d, box1d)


@settings(max_examples=40, deadline=None)
@given(dens1d, dens1d)
def test_tv_symmetric_and_bounded(f, g):
    a, b = distance(f, g).value, distance(g, f).value
    assert 0.0 <= a <= 1.0
    assert a == pytest.approx(b, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(gauss1d, gauss1d)
def test_closed_form_tv_matches_quadrature(f, g):
    closed = tv_gaussian1d_closed(f.mean[0], f.sigma, g.mean[0], g.sigma)
    lo = min(f.mean[0] - 12 * f.sigma, g.mean[0] - 12 * g.sigma)
    hi = max(f.mean[0] + 12 * f.sigma, g.mean[0] + 12 * g.sigma)
    h = lambda x: stats.norm.pdf(x, f.mean[0], f.sigma) - stats.norm.pdf(x, g.mean[0], g.sigma)
    # split at numerically located sign changes so each panel is smooth
    xs = np.linspace(lo, hi, 20001)
    v = h(xs)
    cross = [optimize.brentq(h, xs[i], xs[i + 1], xtol=1e-15) for i in np.flatnonzero(v[:-1] * v[1:] < 0)]
    touch = [xs[i] for i in np.flatnonzero(v[1:-1] == 0) + 1 if v[i - 1] * v[i + 1] < 0]
    pts = sorted([lo, *cross, *touch, hi])
    quad = 0.5 * sum(abs(integrate.quad(h, a, b, epsabs=1e-14)[0]) for a, b in zip(pts[:-1], pts[1:]))
    assert closed == pytest.approx(quad, abs=1e-8)


@settings(max_examples=30, deadline=None)
@given(dens1d, dens1d, dens1d)
def test_tv_triangle_inequality(f, g, h):
    assert distance(f, h).value <= distance(f, g).value + distance(g, h).value + 1e-9


@settings(max_examples=20, deadline=None)
@given(st.one_of(gauss1d, box1d, st.builds(lambda a, b: Mixture([0.5, 0.5], [a, b]), gauss1d, box1d)))
def test_total_mass_is_one(f):
    lo, hi = f.support()
    pts = sorted({float(lo[0]), float(hi[0])} | {b for b in f.breakpoints(0) if lo[0] < b < hi[0]})
    mass = sum(integrate.quad(lambda x: f.pdf(np.array([[x]]))[0], a, b, epsabs=1e-12)[0] for a, b in zip(pts[:-1], pts[1:]))
    assert mass == pytest.approx(1.0, abs=1e-5)
