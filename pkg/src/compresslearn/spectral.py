"""Fourier-side tools: noise characteristic functions, low-frequency
certificates, the noisy-regime L2 error bound and water-filling TV bounds."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

import numpy as np
from scipy import integrate, special

from .densities import DensityHandle, GaussianNoise, LaplaceNoise, NoiseModel, distance

__all__ = [
    "LowFreqCertificate",
    "GaussianIsoClass",
    "KMixUniform1DClass",
    "KMixUniformDClass",
    "SpectralEnergy",
    "InsufficientGrid",
    "WaterFillResult",
    "ConstantOnBox",
    "GaussianEnvelope",
    "BoundedSupport",
    "SubGaussian",
    "char_fn",
    "b_lower",
    "zeta",
    "xi_certificate",
    "spectral_energy",
    "lowfreq_ratio",
    "verify_certificate",
    "l2_error_bound",
    "waterfill",
    "tv_from_l2",
    "fit_c2",
]


# ----------------------------------------------------------------------------
# Noise transforms
# ----------------------------------------------------------------------------


def char_fn(g: NoiseModel, omega) -> float | np.ndarray:
    """|F{G}(omega)| in closed form; one vector gives a float, a stack gives an array."""
    w = np.asarray(omega, dtype=float)
    single = w.ndim <= 1
    if single:
        w = w.reshape(1, -1)
    if isinstance(g, GaussianNoise):
        out = np.exp(-0.5 * g.sigma**2 * np.sum(w * w, axis=1))
    elif isinstance(g, LaplaceNoise):
        out = np.prod(1.0 / (1.0 + (g.b * w) ** 2), axis=1)
    else:
        raise TypeError(f"unsupported noise {type(g).__name__}")
    return float(out[0]) if single else out


def b_lower(g: NoiseModel, alpha: float, d: int) -> float:
    """inf of |F{G}| over the ball of radius alpha.

    Gaussian: exp(-(sigma alpha)^2 / 2). Laplace: (1 + (b alpha)^2 / d)^(-d),
    attained where the frequency is spread evenly over the d coordinates.
    """
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    if isinstance(g, GaussianNoise):
        return math.exp(-0.5 * (g.sigma * alpha) ** 2)
    if isinstance(g, LaplaceNoise):
        return (1.0 + (g.b * alpha) ** 2 / d) ** (-d)
    raise TypeError(f"unsupported noise {type(g).__name__}")


_GL20 = np.polynomial.legendre.leggauss(20)


def zeta(h: float) -> float:
    """(2/pi) * integral_0^h sin(u)^2 / u^2 du.

    Gauss-Legendre on pi-length panels below 1e4; beyond that the tail
    integral is replaced by its asymptotic value 1/(2h).
    """
    h = float(h)
    if h < 0:
        raise ValueError("h must be nonnegative")
    if h == 0:
        return 0.0
    if h >= 1e4:
        return 1.0 - 1.0 / (math.pi * h)
    edges = np.append(np.arange(0.0, h, math.pi), h)
    mid = 0.5 * (edges[1:] + edges[:-1])[:, None]
    half = 0.5 * (edges[1:] - edges[:-1])[:, None]
    x, w = _GL20
    u = mid + half * x
    vals = np.sinc(u / math.pi) ** 2
    return float(2.0 / math.pi * np.sum(half * w * vals))


# ----------------------------------------------------------------------------
# Certificates
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class GaussianIsoClass:
    sigma0: float
    d: int = 1


@dataclass(frozen=True)
class KMixUniform1DClass:
    T: float
    k: int
    epsilon: float


@dataclass(frozen=True)
class KMixUniformDClass:
    T: float
    k: int
    epsilon: float
    d: int
    c: float = 2.0


@dataclass(frozen=True)
class LowFreqCertificate:
    """High-frequency energy beyond ``alpha`` is at most ``xi`` of the total."""

    alpha: float
    xi: float
    family: str
    epsilon: float | None = None
    verified: bool = False
    measured_ratio: float | None = None

    def __post_init__(self):
        if self.alpha < 0 or not self.xi < 1:
            raise ValueError("certificate needs alpha >= 0 and xi < 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, obj: dict) -> "LowFreqCertificate":
        return cls(**obj)


def xi_certificate(family, alpha: float) -> LowFreqCertificate:
    """Closed-form (alpha, xi) for a supported family description."""
    alpha = float(alpha)
    if isinstance(family, GaussianIsoClass):
        d, s0 = family.d, family.sigma0
        floor = math.sqrt((d + 4) * math.log(2)) / s0
        if not alpha > floor:
            raise ValueError(f"Gaussian certificate needs alpha > {floor:.6g}")
        xi = 2.0 ** (d / 2 + 2) * math.exp(-0.5 * (s0 * alpha) ** 2)
        return LowFreqCertificate(alpha, xi, f"GaussianIso(sigma0={s0},d={d})")
    if alpha <= 0:
        raise ValueError("uniform-mixture certificates need alpha > 0")
    if isinstance(family, KMixUniform1DClass):
        T, k, e = family.T, family.k, family.epsilon
        xi = 1.0 - zeta(alpha * T * T * e * e / (2 * (4 * k - 1)))
        return LowFreqCertificate(alpha, xi, f"KMixUniform1D(T={T},k={k})", e)
    if isinstance(family, KMixUniformDClass):
        T, k, e, d, c = family.T, family.k, family.epsilon, family.d, family.c
        xi = 1.0 - zeta(alpha * (T * e) ** (2.0 / d) / (2 * c * k * math.sqrt(d))) ** d
        return LowFreqCertificate(alpha, xi, f"KMixUniformD(T={T},k={k},d={d},c={c})", e)
    raise TypeError(f"no certificate for {family!r}")


class InsufficientGrid(RuntimeError):
    """The sampling grid does not resolve the pair (aliasing or Parseval mismatch)."""


@dataclass(frozen=True)
class SpectralEnergy:
    total_spatial: float
    total_spectral: float
    low: float
    nyquist_fraction: float

    @property
    def ratio(self) -> float:
        return max(self.total_spectral - self.low, 0.0) / self.total_spectral


def _spectrum_1d(p, q, alpha, grid_size):
    lo = float(min(p.support()[0][0], q.support()[0][0]))
    hi = float(max(p.support()[1][0], q.support()[1][0]))
    n = int(grid_size or 1 << 16)
    h = (hi - lo) / n
    x = (lo + h * (np.arange(n) + 0.5))[:, None]
    diff = p.pdf(x) - q.pdf(x)
    # zero padding refines the frequency spacing to alpha / 100
    size = n
    while alpha > 0 and 2 * math.pi / (size * h) > alpha / 100 and size < 1 << 21:
        size *= 2
    spec = np.abs(h * np.fft.rfft(diff, size)) ** 2
    w = 2 * math.pi * np.fft.rfftfreq(size, h)
    dw = w[1]
    # one-sided spectrum: every bin but DC (and an even-length Nyquist bin) counts twice
    mult = np.full(w.size, 2.0)
    mult[0] = 1.0
    if size % 2 == 0:
        mult[-1] = 1.0
    e = spec * mult * dw / (2 * math.pi)
    total = float(e.sum())
    # each bin stands for a cell of width dw; the one straddling alpha counts in part
    frac = np.clip((alpha - w) / dw + 0.5, 0.0, 1.0)
    frac[0] = 1.0 if alpha > 0 else 0.0
    low = float(e @ frac)
    top = float(e[w >= 0.9 * w[-1]].sum()) / total
    return total, low, top


def _spectrum_2d(p, q, alpha, grid_size):
    lo = np.minimum(p.support()[0], q.support()[0])
    hi = np.maximum(p.support()[1], q.support()[1])
    n = int(grid_size or 1024)
    h = (hi - lo) / n
    axes = [lo[a] + h[a] * (np.arange(n) + 0.5) for a in range(2)]
    X, Y = np.meshgrid(*axes, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel()])
    diff = (p.pdf(pts) - q.pdf(pts)).reshape(n, n)
    spec = np.abs(h[0] * h[1] * np.fft.fft2(diff)) ** 2
    wx = 2 * math.pi * np.fft.fftfreq(n, h[0])
    wy = 2 * math.pi * np.fft.fftfreq(n, h[1])
    cell = (wx[1] * wy[1]) / (2 * math.pi) ** 2
    total = float(spec.sum() * cell)
    # top decade of the spectrum along either axis
    edge = (np.abs(wx)[:, None] >= 0.9 * np.abs(wx).max()) | (np.abs(wy)[None, :] >= 0.9 * np.abs(wy).max())
    top = float(spec[edge].sum() * cell) / total
    low = 0.0
    if alpha > 0:
        # polar quadrature of the analytic transforms over the disc |w| < alpha
        reach = float(np.max(np.abs(np.concatenate([lo, hi]))))
        panels = max(4, math.ceil(alpha * reach / 1.5))
        edges = np.linspace(0.0, alpha, panels + 1)
        xg, wg = _GL20
        mid = 0.5 * (edges[1:] + edges[:-1])[:, None]
        half = 0.5 * (edges[1:] - edges[:-1])[:, None]
        r = (mid + half * xg).ravel()
        wr = (half * wg).ravel()
        m = max(64, 2 * math.ceil(2 * alpha * reach) + 64)
        th = 2 * math.pi * np.arange(m) / m
        W = np.stack([np.outer(r, np.cos(th)).ravel(), np.outer(r, np.sin(th)).ravel()], axis=1)
        vals = np.abs(p.fourier(W) - q.fourier(W)).reshape(r.size, m) ** 2
        low = float(np.sum((wr * r)[:, None] * vals) * (2 * math.pi / m) / (2 * math.pi) ** 2)
    return total, low, top


def spectral_energy(p: DensityHandle, q: DensityHandle, alpha: float, grid_size: int | None = None) -> SpectralEnergy:
    """Total and low-band (|w| < alpha) energy of p - q, with Parseval and aliasing checks.

    1D: FFT of p - q on ``grid_size`` (default 2^16) cell-centred points over the
    joint support, zero padded until the frequency step is below alpha / 100.
    2D: FFT on a ``grid_size``^2 (default 1024^2) grid gives the total; the low
    band comes from the analytic transforms by polar quadrature.
    """
    if p.dim != q.dim:
        raise ValueError("dimension mismatch")
    if p.dim > 2:
        raise ValueError("spectral measurement is limited to d <= 2")
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    if p == q:
        raise ValueError("p and q coincide: the energy ratio is undefined")
    fn = _spectrum_1d if p.dim == 1 else _spectrum_2d
    total, low, top = fn(p, q, float(alpha), grid_size)
    spatial = distance(p, q, "L2").value ** 2
    if spatial <= 0:
        raise ValueError("p and q coincide in L2")
    if top > 1e-3:
        raise InsufficientGrid(f"top decade of the spectrum holds {top:.2e} of the energy")
    if abs(total - spatial) > 0.01 * spatial:
        raise InsufficientGrid(f"Parseval mismatch: spectral {total:.6g} vs spatial {spatial:.6g}")
    return SpectralEnergy(spatial, total, min(low, total), top)


def lowfreq_ratio(p: DensityHandle, q: DensityHandle, alpha: float, grid_size: int | None = None) -> float:
    """Fraction of the energy of p - q at frequencies |w| >= alpha."""
    return spectral_energy(p, q, alpha, grid_size).ratio


def verify_certificate(cert: LowFreqCertificate, p, q, tol: float = 0.02, grid_size=None) -> LowFreqCertificate:
    measured = lowfreq_ratio(p, q, cert.alpha, grid_size)
    return replace(cert, verified=bool(measured <= cert.xi + tol), measured_ratio=measured)


def l2_error_bound(epsilon: float, g: NoiseModel, certs) -> float:
    """epsilon * min over certificates of 24 / sqrt(B_G(alpha) (1 - xi))."""
    certs = list(certs)
    if not certs:
        raise ValueError("need at least one certificate")
    best = math.inf
    for c in certs:
        denom = b_lower(g, c.alpha, g.dim) * (1.0 - c.xi)
        if denom > 0:
            best = min(best, 24.0 / math.sqrt(denom))
    return epsilon * best


# ----------------------------------------------------------------------------
# Water filling
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class ConstantOnBox:
    c: float
    volume: float


@dataclass(frozen=True)
class GaussianEnvelope:
    """g(x) = C1 exp(-gamma |x|^2) on R^d."""

    C1: float
    gamma: float
    d: int = 1


@dataclass(frozen=True)
class WaterFillResult:
    level: float
    l1_bound: float
    region: dict

    def to_dict(self) -> dict:
        return asdict(self)


def _ball_volume(d: int) -> float:
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


def _radial(env: GaussianEnvelope, level: float, power: int) -> tuple[float, float]:
    """(radius, integral of min(level, g)^power) for the Gaussian envelope."""
    C1, gam, d = env.C1, env.gamma, env.d
    rho = math.sqrt(max(math.log(C1 / level), 0.0) / gam)
    shell = d * _ball_volume(d)
    tail, _ = integrate.quad(
        lambda r: (C1 * math.exp(-gam * r * r)) ** power * r ** (d - 1), rho, np.inf, epsabs=0, epsrel=1e-13, limit=200
    )
    return rho, level**power * _ball_volume(d) * rho**d + shell * tail


def waterfill(envelope, epsilon_l2: float) -> WaterFillResult:
    """Largest L1 mass of f with 0 <= f <= g and ||f||_2 = epsilon.

    The optimizer is min(level, g); the level solves integral min(level, g)^2 =
    epsilon^2 and is found by bisection (in log scale) to relative tolerance 1e-10.
    """
    eps = float(epsilon_l2)
    if not eps > 0:
        raise ValueError("epsilon must be positive")
    if isinstance(envelope, ConstantOnBox):
        c, V = envelope.c, envelope.volume
        energy = lambda lam: min(lam, c) ** 2 * V
        full = c * c * V
        top = c
    elif isinstance(envelope, GaussianEnvelope):
        energy = lambda lam: _radial(envelope, lam, 2)[1]
        full = envelope.C1**2 * (math.pi / (2 * envelope.gamma)) ** (envelope.d / 2)
        top = envelope.C1
    else:
        raise TypeError(f"unsupported envelope {envelope!r}")
    if eps * eps > full * (1 + 1e-12):
        raise ValueError(f"infeasible: epsilon^2 = {eps * eps:.6g} exceeds the envelope energy {full:.6g}")
    if eps * eps >= full:
        level = top
    else:
        lo, hi = top * 1e-300, top
        while hi - lo > 1e-10 * hi:
            mid = math.sqrt(lo * hi) if hi / lo > 4 else 0.5 * (lo + hi)
            if energy(mid) < eps * eps:
                lo = mid
            else:
                hi = mid
        level = 0.5 * (lo + hi)
    if isinstance(envelope, ConstantOnBox):
        return WaterFillResult(level, min(level, envelope.c) * envelope.volume, {"kind": "box", "volume": envelope.volume})
    rho, l1 = _radial(envelope, level, 1)
    return WaterFillResult(level, l1, {"kind": "ball", "radius": rho, "d": envelope.d})


@dataclass(frozen=True)
class BoundedSupport:
    R: float
    d: int


@dataclass(frozen=True)
class SubGaussian:
    C1: float
    gamma: float
    d: int
    C2: float


def tv_from_l2(bound_kind, epsilon_l2: float) -> float:
    """TV bound implied by an L2 error for bounded-support or sub-Gaussian families."""
    eps = float(epsilon_l2)
    if not eps > 0:
        raise ValueError("epsilon must be positive")
    if isinstance(bound_kind, BoundedSupport):
        return (2 * bound_kind.R) ** (bound_kind.d / 2) * eps
    if isinstance(bound_kind, SubGaussian):
        if eps >= 1:
            raise ValueError("the sub-Gaussian bound needs epsilon < 1")
        return bound_kind.C2 * eps * math.log(1 / eps) ** (bound_kind.d / 2)
    raise TypeError(f"unsupported bound {bound_kind!r}")


def fit_c2(C1: float, gamma: float, d: int, eps_grid=(1e-1, 1e-2, 1e-3, 1e-4)) -> float:
    """Smallest C2 making the sub-Gaussian bound dominate the water-filling L1 on ``eps_grid``."""
    env = GaussianEnvelope(C1, gamma, d)
    return max(waterfill(env, e).l1_bound / (e * math.log(1 / e) ** (d / 2)) for e in eps_grid)
