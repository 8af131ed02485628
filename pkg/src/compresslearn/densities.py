"""Density handles, seeded sampling, noise convolution and distance estimation.

Every handle is immutable, evaluates on arrays of shape ``(m, d)`` and draws
samples of shape ``(n, d)`` from an explicitly passed :class:`SeededRng`.
"""

from __future__ import annotations

import hashlib
import json
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate, special

__all__ = [
    "SeededRng",
    "DensityHandle",
    "IsoGaussian",
    "UniformBox",
    "Mixture",
    "NoiseModel",
    "GaussianNoise",
    "LaplaceNoise",
    "Convolved",
    "DistanceEstimate",
    "pdf_eval",
    "draw_samples",
    "convolve_noise",
    "distance",
    "tv_gaussian1d_closed",
    "density_from_dict",
]

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_GL16 = np.polynomial.legendre.leggauss(16)


# ----------------------------------------------------------------------------
# Random streams
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class SeededRng:
    """Master seed plus a stream path.

    The stream path is mixed with the master seed by ``numpy.random.SeedSequence``
    (a fixed, documented hash). Identical ``(seed, stream)`` pairs give identical
    draws and distinct paths give statistically independent streams.

    Parameters
    ----------
    seed : int
        Master seed in ``[0, 2**64)``.
    stream : tuple of int
        Substream path. ``child(k)`` appends ``k``.
    """

    seed: int
    stream: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "stream", tuple(int(s) for s in self.stream))
        if any(s < 0 for s in self.stream):
            raise ValueError("stream ids must be nonnegative")

    def child(self, *keys: int) -> "SeededRng":
        return SeededRng(self.seed, self.stream + tuple(int(k) for k in keys))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self.stream)
        return np.random.default_rng(ss)


def as_rng(rng: SeededRng | int | None) -> SeededRng:
    if isinstance(rng, SeededRng):
        return rng
    return SeededRng(0 if rng is None else int(rng))


def stable_hash(text: str) -> int:
    """63-bit content hash used to key substreams on handle contents."""
    digest = hashlib.blake2b(text.encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little") >> 1


# ----------------------------------------------------------------------------
# Handles
# ----------------------------------------------------------------------------


def _points(x, d: int) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1) if d > 1 or arr.shape[0] == 1 else arr.reshape(-1, 1)
    if arr.shape[-1] != d:
        raise ValueError(f"dimension mismatch: expected {d}, got {arr.shape[-1]}")
    return arr


def _vec(v, name: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(v, dtype=float)).copy()
    if arr.ndim != 1 or arr.size == 0 or not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be a finite nonempty vector")
    arr.setflags(write=False)
    return arr


class DensityHandle(ABC):
    """Evaluable, sampleable probability density over R^d."""

    closed_form: str | None = None

    @property
    @abstractmethod
    def dim(self) -> int: ...

    @abstractmethod
    def logpdf(self, x) -> np.ndarray:
        """Log density on points of shape ``(m, d)``; returns shape ``(m,)``."""

    def pdf(self, x) -> np.ndarray:
        return np.exp(self.logpdf(x))

    @abstractmethod
    def _draw(self, n: int, gen: np.random.Generator) -> np.ndarray: ...

    def sample(self, n: int, rng: SeededRng) -> np.ndarray:
        """Draw ``n`` i.i.d. points, shape ``(n, d)``."""
        if n < 1:
            raise ValueError("n must be at least 1")
        return self._draw(int(n), as_rng(rng).generator())

    def fourier(self, w) -> np.ndarray:
        """Fourier transform ``F(w) = E[exp(-i w.X)]`` at frequencies of shape ``(m, d)``."""
        raise NotImplementedError(f"no analytic transform for {type(self).__name__}")

    @abstractmethod
    def support(self) -> tuple[np.ndarray, np.ndarray]:
        """Axis-aligned box holding all but a negligible (< 1e-6) part of the mass."""

    @abstractmethod
    def breakpoints(self, axis: int) -> list[float]:
        """Coordinates along ``axis`` where the density is non-smooth or has features."""

    @abstractmethod
    def scale(self) -> float:
        """Smallest length scale of the density, used to size quadrature cells."""

    @abstractmethod
    def to_dict(self) -> dict: ...

    @property
    def key(self) -> str:
        # handles are immutable once built, so the canonical form is cached
        k = self.__dict__.get("_key")
        if k is None:
            k = self.__dict__["_key"] = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return k

    def __eq__(self, other) -> bool:
        return isinstance(other, DensityHandle) and self.key == other.key

    def __hash__(self) -> int:
        return hash(self.key)

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.to_dict()['params']})"


class IsoGaussian(DensityHandle):
    """N(mean, sigma^2 I_d)."""

    closed_form = "gaussian"

    def __init__(self, mean, sigma: float):
        self.mean = _vec(mean, "mean")
        sigma = float(sigma)
        if not (sigma > 0 and math.isfinite(sigma)):
            raise ValueError("sigma must be positive")
        self.sigma = sigma

    @property
    def dim(self) -> int:
        return self.mean.size

    def logpdf(self, x) -> np.ndarray:
        pts = _points(x, self.dim)
        sq = np.sum((pts - self.mean) ** 2, axis=1)
        return -0.5 * sq / self.sigma**2 - self.dim * (math.log(self.sigma) + _LOG_SQRT_2PI)

    def _draw(self, n, gen):
        return self.mean + self.sigma * gen.standard_normal((n, self.dim))

    def fourier(self, w):
        w = _points(w, self.dim)
        return np.exp(-1j * (w @ self.mean) - 0.5 * self.sigma**2 * np.sum(w * w, axis=1))

    def support(self):
        return self.mean - 6 * self.sigma, self.mean + 6 * self.sigma

    def breakpoints(self, axis):
        return list(self.mean[axis] + self.sigma * np.arange(-6.0, 6.5, 1.0))

    def scale(self):
        return self.sigma

    def to_dict(self):
        return {"kind": "IsoGaussian", "params": {"mean": self.mean.tolist(), "sigma": self.sigma}}


class UniformBox(DensityHandle):
    """Uniform density on ``[lower, upper]`` with every side at least ``min_width``."""

    closed_form = "box"

    def __init__(self, lower, upper, min_width: float | None = None):
        self.lower = _vec(lower, "lower")
        self.upper = _vec(upper, "upper")
        if self.lower.shape != self.upper.shape:
            raise ValueError("lower and upper differ in dimension")
        widths = self.upper - self.lower
        if min_width is None:
            min_width = float(widths.min())
        min_width = float(min_width)
        if not min_width > 0:
            raise ValueError("min_width must be positive")
        if np.any(widths < min_width * (1 - 1e-12)):
            raise ValueError("box side narrower than min_width")
        self.min_width = min_width
        self._logvol = float(np.sum(np.log(widths)))

    @property
    def dim(self) -> int:
        return self.lower.size

    def logpdf(self, x) -> np.ndarray:
        pts = _points(x, self.dim)
        inside = np.all((pts >= self.lower) & (pts <= self.upper), axis=1)
        return np.where(inside, -self._logvol, -np.inf)

    def _draw(self, n, gen):
        return gen.uniform(self.lower, self.upper, size=(n, self.dim))

    def fourier(self, w):
        w = _points(w, self.dim)
        half = 0.5 * (self.upper - self.lower)
        centre = 0.5 * (self.upper + self.lower)
        return np.exp(-1j * (w @ centre)) * np.prod(np.sinc(w * half / np.pi), axis=1)

    def support(self):
        return self.lower.copy(), self.upper.copy()

    def breakpoints(self, axis):
        return [float(self.lower[axis]), float(self.upper[axis])]

    def scale(self):
        return float(np.min(self.upper - self.lower))

    def to_dict(self):
        return {
            "kind": "UniformBox",
            "params": {
                "lower": self.lower.tolist(),
                "upper": self.upper.tolist(),
                "min_width": self.min_width,
            },
        }


class Mixture(DensityHandle):
    """Finite mixture ``sum_i w_i f_i`` of handles of equal dimension."""

    def __init__(self, weights, components: Sequence[DensityHandle]):
        w = np.asarray(weights, dtype=float).ravel()
        comps = list(components)
        if w.size < 1 or w.size != len(comps):
            raise ValueError("need one weight per component and k >= 1")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must lie on the probability simplex")
        if len({c.dim for c in comps}) != 1:
            raise ValueError("components differ in dimension")
        w.setflags(write=False)
        self.weights = w
        self.components = tuple(comps)
        self.closed_form = "mixture" if all(c.closed_form for c in comps) else None

    @property
    def dim(self) -> int:
        return self.components[0].dim

    def logpdf(self, x) -> np.ndarray:
        pts = _points(x, self.dim)
        with np.errstate(divide="ignore"):
            logw = np.log(self.weights)
        parts = np.stack([lw + c.logpdf(pts) for lw, c in zip(logw, self.components)])
        return special.logsumexp(parts, axis=0)

    def _draw(self, n, gen):
        counts = gen.multinomial(n, self.weights)
        out = np.concatenate([c._draw(int(m), gen) for c, m in zip(self.components, counts) if m])
        return out[gen.permutation(n)]

    def fourier(self, w):
        return sum(a * c.fourier(w) for a, c in zip(self.weights, self.components))

    def support(self):
        lows, highs = zip(*(c.support() for c in self.components))
        return np.min(lows, axis=0), np.max(highs, axis=0)

    def breakpoints(self, axis):
        return [b for c in self.components for b in c.breakpoints(axis)]

    def scale(self):
        return min(c.scale() for c in self.components)

    def to_dict(self):
        return {
            "kind": "Mixture",
            "params": {
                "weights": self.weights.tolist(),
                "components": [c.to_dict() for c in self.components],
            },
        }


# ----------------------------------------------------------------------------
# Noise
# ----------------------------------------------------------------------------


class NoiseModel(DensityHandle):
    """Symmetric product noise with i.i.d. coordinates."""

    closed_form = "noise"

    def __init__(self, scale_param: float, dim: int = 1):
        scale_param = float(scale_param)
        if not (scale_param > 0 and math.isfinite(scale_param)):
            raise ValueError("noise scale must be positive")
        if int(dim) < 1:
            raise ValueError("dim must be at least 1")
        self._s = scale_param
        self._d = int(dim)

    @property
    def dim(self) -> int:
        return self._d

    def logpdf(self, x) -> np.ndarray:
        pts = _points(x, self.dim)
        return np.sum(self.logpdf1d(pts), axis=1)

    def support(self):
        pad = self.tail_pad()
        return np.full(self.dim, -pad), np.full(self.dim, pad)

    def breakpoints(self, axis):
        return [0.0]

    def fourier(self, w):
        return self.char_fn(_points(w, self.dim)).astype(complex)

    @abstractmethod
    def char_fn(self, w: np.ndarray) -> np.ndarray:
        """Real, symmetric characteristic function on frequencies ``(m, d)``."""

    def scale(self):
        return self._s

    @abstractmethod
    def logpdf1d(self, z) -> np.ndarray: ...

    @abstractmethod
    def cdf1d(self, z) -> np.ndarray: ...

    @abstractmethod
    def log_interval_mass(self, lo, hi) -> np.ndarray:
        """``log P(lo < Z < hi)`` for one coordinate, stable in the tails."""

    @abstractmethod
    def tail_pad(self) -> float:
        """Half-width outside which one coordinate carries below 1e-6 of the mass."""

    @abstractmethod
    def with_dim(self, dim: int) -> "NoiseModel": ...


class GaussianNoise(NoiseModel):
    @property
    def sigma(self) -> float:
        return self._s

    def logpdf1d(self, z):
        z = np.asarray(z, dtype=float)
        return -0.5 * (z / self._s) ** 2 - math.log(self._s) - _LOG_SQRT_2PI

    def cdf1d(self, z):
        return special.ndtr(np.asarray(z, dtype=float) / self._s)

    def log_interval_mass(self, lo, hi):
        lo = np.asarray(lo, dtype=float) / self._s
        hi = np.asarray(hi, dtype=float) / self._s
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            right = lo > 0
            # mirror to the left tail where log_ndtr is accurate
            a = np.where(right, -hi, lo)
            b = np.where(right, -lo, hi)
            lb = special.log_ndtr(b)
            la = special.log_ndtr(a)
            return lb + np.log1p(-np.exp(la - lb))

    def tail_pad(self):
        return 6.0 * self._s

    def char_fn(self, w):
        return np.exp(-0.5 * self._s**2 * np.sum(np.asarray(w, dtype=float) ** 2, axis=-1))

    def _draw(self, n, gen):
        return self._s * gen.standard_normal((n, self.dim))

    def with_dim(self, dim):
        return GaussianNoise(self._s, dim)

    def to_dict(self):
        return {"kind": "GaussianNoise", "params": {"sigma": self._s, "dim": self._d}}


class LaplaceNoise(NoiseModel):
    @property
    def b(self) -> float:
        return self._s

    def logpdf1d(self, z):
        z = np.asarray(z, dtype=float)
        return -np.abs(z) / self._s - math.log(2 * self._s)

    def cdf1d(self, z):
        z = np.asarray(z, dtype=float) / self._s
        return np.where(z < 0, 0.5 * np.exp(np.minimum(z, 0)), 1 - 0.5 * np.exp(-np.maximum(z, 0)))

    def log_interval_mass(self, lo, hi):
        u = np.asarray(hi, dtype=float) / self._s
        v = np.asarray(lo, dtype=float) / self._s
        w = u - v
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            left = math.log(0.5) + u + np.log1p(-np.exp(-w))
            right = math.log(0.5) - v + np.log1p(-np.exp(-w))
            mid = np.log1p(-0.5 * (np.exp(-np.abs(u)) + np.exp(-np.abs(v))))
            return np.where(u <= 0, left, np.where(v >= 0, right, mid))

    def tail_pad(self):
        return 14.0 * self._s

    def char_fn(self, w):
        return np.prod(1.0 / (1.0 + (self._s * np.asarray(w, dtype=float)) ** 2), axis=-1)

    def _draw(self, n, gen):
        return gen.laplace(0.0, self._s, size=(n, self.dim))

    def with_dim(self, dim):
        return LaplaceNoise(self._s, dim)

    def to_dict(self):
        return {"kind": "LaplaceNoise", "params": {"b": self._s, "dim": self._d}}


def _log_erfc(x: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore", over="ignore", under="ignore"):
        pos = np.log(special.erfcx(np.maximum(x, 0.0))) - np.maximum(x, 0.0) ** 2
        neg = np.log(special.erfc(np.minimum(x, 0.0)))
    return np.where(x > 0, pos, neg)


def _gauss_laplace_logpdf1d(z: np.ndarray, s: float, b: float) -> np.ndarray:
    # density of N(0, s^2) + Laplace(0, b) at z
    r = s * s / (2 * b * b)
    t1 = r - z / b + _log_erfc((s / b - z / s) / math.sqrt(2))
    t2 = r + z / b + _log_erfc((s / b + z / s) / math.sqrt(2))
    return np.logaddexp(t1, t2) - math.log(4 * b)


class Convolved(DensityHandle):
    """Law of ``X + Z`` with ``X ~ base`` and independent noise ``Z``.

    Closed forms: box plus any product noise (interval masses of the noise) and
    isotropic Gaussian plus Laplace noise. Anything else falls back to numerical
    smoothing quadrature over the noise variable, available for d <= 2.
    """

    def __init__(self, base: DensityHandle, noise: NoiseModel):
        if base.dim != noise.dim:
            raise ValueError("dimension mismatch between density and noise")
        self.base = base
        self.noise = noise
        if isinstance(base, UniformBox):
            self.closed_form = "box*noise"
        elif isinstance(base, IsoGaussian) and isinstance(noise, LaplaceNoise):
            self.closed_form = "gaussian*laplace"
        else:
            self.closed_form = None

    @property
    def dim(self) -> int:
        return self.base.dim

    def logpdf(self, x) -> np.ndarray:
        pts = _points(x, self.dim)
        if isinstance(self.base, UniformBox):
            lo, hi = self.base.lower, self.base.upper
            terms = self.noise.log_interval_mass(pts - hi, pts - lo)
            return np.sum(terms, axis=1) - self.base._logvol
        if self.closed_form == "gaussian*laplace":
            z = pts - self.base.mean
            return np.sum(_gauss_laplace_logpdf1d(z, self.base.sigma, self.noise.b), axis=1)
        return self._numeric_logpdf(pts)

    def _numeric_logpdf(self, pts: np.ndarray) -> np.ndarray:
        if self.dim > 2:
            raise NotImplementedError("pdf of this composite is only available for d <= 2")
        pad = self.noise.tail_pad()
        nodes, weights = _composite_nodes([-pad, 0.0, pad], pad, self.noise.scale() / 8)
        lw = np.log(weights) + self.noise.logpdf1d(nodes)
        if self.dim == 1:
            grid = pts[:, :1] - nodes[None, :]
            vals = self.base.logpdf(grid.reshape(-1, 1)).reshape(grid.shape) + lw
            return special.logsumexp(vals, axis=1)
        z1, z2 = np.meshgrid(nodes, nodes, indexing="ij")
        lw2 = (lw[:, None] + lw[None, :]).ravel()
        zs = np.column_stack([z1.ravel(), z2.ravel()])
        out = np.empty(len(pts))
        for k, p in enumerate(pts):
            out[k] = special.logsumexp(self.base.logpdf(p - zs) + lw2)
        return out

    def _draw(self, n, gen):
        return self.base._draw(n, gen) + self.noise._draw(n, gen)

    def fourier(self, w):
        w = _points(w, self.dim)
        return self.base.fourier(w) * self.noise.char_fn(w)

    def sample(self, n, rng):
        # base draws use the caller's stream, so they match unconvolved draws
        rng = as_rng(rng)
        if n < 1:
            raise ValueError("n must be at least 1")
        return self.base._draw(int(n), rng.generator()) + self.noise._draw(int(n), rng.child(1).generator())

    def support(self):
        lo, hi = self.base.support()
        pad = self.noise.tail_pad()
        return lo - pad, hi + pad

    def breakpoints(self, axis):
        pad = self.noise.tail_pad()
        pts = self.base.breakpoints(axis)
        return pts + [p - pad for p in pts] + [p + pad for p in pts]

    def scale(self):
        return max(self.base.scale(), self.noise.scale())

    def to_dict(self):
        return {"kind": "Convolved", "params": {"base": self.base.to_dict(), "noise": self.noise.to_dict()}}


def density_from_dict(obj: dict) -> DensityHandle:
    """Inverse of ``to_dict`` for every handle kind."""
    kind, p = obj["kind"], obj.get("params", {})
    if kind == "IsoGaussian":
        return IsoGaussian(p["mean"], p["sigma"])
    if kind == "UniformBox":
        return UniformBox(p["lower"], p["upper"], p.get("min_width"))
    if kind == "Mixture":
        return Mixture(p["weights"], [density_from_dict(c) for c in p["components"]])
    if kind == "GaussianNoise":
        return GaussianNoise(p["sigma"], p.get("dim", 1))
    if kind == "LaplaceNoise":
        return LaplaceNoise(p["b"], p.get("dim", 1))
    if kind == "Convolved":
        return Convolved(density_from_dict(p["base"]), density_from_dict(p["noise"]))
    raise ValueError(f"unknown density kind {kind!r}")


# ----------------------------------------------------------------------------
# Operations
# ----------------------------------------------------------------------------


def pdf_eval(f: DensityHandle, x):
    """f(x) at one point (returns float) or many points (returns array)."""
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 0 or (arr.ndim == 1 and (f.dim > 1 or arr.size == 1))
    if single and arr.size != f.dim:
        raise ValueError(f"dimension mismatch: expected {f.dim}, got {arr.size}")
    vals = f.pdf(arr)
    return float(vals[0]) if single else vals


def draw_samples(f: DensityHandle, n: int, rng: SeededRng) -> np.ndarray:
    return f.sample(n, rng)


def convolve_noise(f: DensityHandle, g: NoiseModel) -> DensityHandle:
    """Handle for f * g, simplified to a closed form whenever one exists."""
    if f.dim != g.dim:
        raise ValueError("dimension mismatch between density and noise")
    if isinstance(f, IsoGaussian) and isinstance(g, GaussianNoise):
        return IsoGaussian(f.mean, math.hypot(f.sigma, g.sigma))
    if isinstance(f, Mixture):
        return Mixture(f.weights, [convolve_noise(c, g) for c in f.components])
    if isinstance(f, Convolved) and isinstance(f.noise, GaussianNoise) and isinstance(g, GaussianNoise):
        return Convolved(f.base, GaussianNoise(math.hypot(f.noise.sigma, g.sigma), g.dim))
    return Convolved(f, g)


@dataclass(frozen=True)
class DistanceEstimate:
    value: float
    stderr: float
    metric: str
    method: str

    def __float__(self) -> float:
        return self.value


def _composite_nodes(breaks, half_span, max_width):
    """Gauss-Legendre nodes over consecutive break intervals, each cut to <= max_width."""
    b = np.unique(np.clip(np.asarray(breaks, dtype=float), -half_span, half_span))
    nodes, weights = [], []
    x16, w16 = _GL16
    for lo, hi in zip(b[:-1], b[1:]):
        pieces = max(1, int(math.ceil((hi - lo) / max_width)))
        edges = np.linspace(lo, hi, pieces + 1)
        mid = 0.5 * (edges[1:] + edges[:-1])[:, None]
        half = 0.5 * (edges[1:] - edges[:-1])[:, None]
        nodes.append((mid + half * x16).ravel())
        weights.append((half * w16).ravel())
    return np.concatenate(nodes), np.concatenate(weights)


def _axis_breaks(f: DensityHandle, g: DensityHandle, axis: int, lo: float, hi: float) -> list[float]:
    pts = [lo, hi] + f.breakpoints(axis) + g.breakpoints(axis)
    return sorted(p for p in set(pts) if lo <= p <= hi)


def _integrand(f, g, metric):
    def h(pts):
        a, b = f.pdf(pts), g.pdf(pts)
        return np.abs(a - b) if metric in ("TV", "L1") else (a - b) ** 2

    return h


def _quadrature(f: DensityHandle, g: DensityHandle, metric: str) -> float:
    flo, fhi = f.support()
    glo, ghi = g.support()
    lo, hi = np.minimum(flo, glo), np.maximum(fhi, ghi)
    h = _integrand(f, g, metric)
    if f.dim == 1:
        breaks = _axis_breaks(f, g, 0, lo[0], hi[0])
        total = 0.0
        for a, b in zip(breaks[:-1], breaks[1:]):
            if b > a:
                val, _ = integrate.quad(lambda t: float(h(np.array([[t]]))[0]), a, b, limit=200, epsabs=1e-13, epsrel=1e-11)
                total += val
    else:
        axes = []
        for ax in range(2):
            width = min(f.scale(), g.scale()) / 6
            breaks = _axis_breaks(f, g, ax, lo[ax], hi[ax])
            centre = 0.5 * (lo[ax] + hi[ax])
            span = 0.5 * (hi[ax] - lo[ax])
            n, w = _composite_nodes([b - centre for b in breaks], span, width)
            axes.append((n + centre, w))
        (x1, w1), (x2, w2) = axes
        total = 0.0
        for start in range(0, x1.size, 256):
            xs = x1[start : start + 256]
            grid = np.column_stack([np.repeat(xs, x2.size), np.tile(x2, xs.size)])
            vals = h(grid).reshape(xs.size, x2.size)
            total += float(w1[start : start + 256] @ vals @ w2)
    if metric == "TV":
        total *= 0.5
    return total


def _monte_carlo(f, g, metric, budget, rng):
    rng = as_rng(rng)
    half = max(1, budget // 2)
    chunk = 1 << 16
    stats = []
    for which, (src, key) in enumerate(((f, 0), (g, 1))):
        vals = []
        for c, start in enumerate(range(0, half, chunk)):
            m = min(chunk, half - start)
            pts = src.sample(m, rng.child(key, c))
            lf, lg = f.logpdf(pts), g.logpdf(pts)
            if metric in ("TV", "L1"):
                with np.errstate(invalid="ignore"):
                    d = np.where(lf == lg, 0.0, np.abs(np.tanh(0.5 * (lf - lg))))
            else:
                a, b = np.exp(lf), np.exp(lg)
                d = 2 * (a - b) ** 2 / (a + b)
            vals.append(d)
        v = np.concatenate(vals)
        stats.append((v.mean(), v.var(ddof=1) / v.size if v.size > 1 else 0.0))
    est = 0.5 * (stats[0][0] + stats[1][0])
    se = 0.5 * math.sqrt(stats[0][1] + stats[1][1])
    if metric == "L1":
        est, se = 2 * est, 2 * se
    return est, se


def distance(
    f: DensityHandle,
    g: DensityHandle,
    metric: str = "TV",
    method: str | None = None,
    budget: int = 100_000,
    rng: SeededRng | int | None = None,
) -> DistanceEstimate:
    """TV, L1 or squared-free L2 distance between two handles.

    Parameters
    ----------
    metric : {"TV", "L1", "L2"}
        ``TV = L1 / 2``. ``L2`` is the norm ``||f - g||_2`` (not squared).
    method : {"quadrature", "monte_carlo"}, optional
        Defaults to quadrature for d <= 2 and Monte Carlo above.
    budget : int
        Monte Carlo draws, split evenly between ``f`` and ``g``; the balanced
        mixture ``(f + g) / 2`` is the proposal, so the TV integrand is bounded.

    Returns
    -------
    DistanceEstimate
        Value and standard error (zero for quadrature).
    """
    metric = metric.upper()
    if metric not in ("TV", "L1", "L2"):
        raise ValueError(f"unknown metric {metric!r}")
    if f.dim != g.dim:
        raise ValueError("dimension mismatch")
    if method is None:
        method = "quadrature" if f.dim <= 2 else "monte_carlo"
    if method == "quadrature":
        if f.dim > 2:
            raise ValueError("quadrature is only supported for d <= 2")
        if f == g:
            return DistanceEstimate(0.0, 0.0, metric, method)
        if metric == "TV" and f.dim == 1 and isinstance(f, IsoGaussian) and isinstance(g, IsoGaussian):
            val = tv_gaussian1d_closed(f.mean[0], f.sigma, g.mean[0], g.sigma)
            return DistanceEstimate(val, 0.0, metric, method)
        val = _quadrature(f, g, "L1" if metric == "L1" else metric)
        if metric == "L2":
            val = math.sqrt(max(val, 0.0))
        elif metric == "TV":
            val = min(max(val, 0.0), 1.0)
        return DistanceEstimate(val, 0.0, metric, method)
    if method == "monte_carlo":
        est, se = _monte_carlo(f, g, metric, int(budget), rng)
        if metric == "L2":
            root = math.sqrt(max(est, 0.0))
            se = se / (2 * root) if root > 0 else math.sqrt(se)
            est = root
        return DistanceEstimate(float(est), float(se), metric, method)
    raise ValueError(f"unknown method {method!r}")


def _scheffe_interval(mu1, s1, mu2, s2):
    """Region where N(mu1, s1) exceeds N(mu2, s2), as (lo, hi, inside).

    ``inside`` means the region is (lo, hi); otherwise it is its complement.
    Works elementwise on arrays.
    """
    mu1, s1, mu2, s2 = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (mu1, s1, mu2, s2)))
    a = 0.5 / s2**2 - 0.5 / s1**2
    b = mu1 / s1**2 - mu2 / s2**2
    c = 0.5 * mu2**2 / s2**2 - 0.5 * mu1**2 / s1**2 + np.log(s2 / s1)
    lo = np.full(a.shape, -np.inf)
    hi = np.full(a.shape, np.inf)
    inside = np.ones(a.shape, dtype=bool)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        scale = np.maximum(np.maximum(1 / s1**2, 1 / s2**2), 1e-300)
        lin = np.abs(a) <= 1e-14 * scale
        # linear case: b x + c > 0
        root = -c / b
        lo = np.where(lin & (b > 0), root, lo)
        hi = np.where(lin & (b < 0), root, hi)
        empty_lin = lin & (b == 0) & ~(c > 0)
        disc = b * b - 4 * a * c
        quad = ~lin
        sq = np.sqrt(np.maximum(disc, 0.0))
        q = -0.5 * (b + np.where(b >= 0, sq, -sq))
        r1 = q / a
        r2 = np.where(q != 0, c / q, -r1)
        rlo, rhi = np.minimum(r1, r2), np.maximum(r1, r2)
        has_roots = quad & (disc > 0)
        # a > 0: positive outside the roots; a < 0: positive between them
        lo = np.where(has_roots, rlo, lo)
        hi = np.where(has_roots, rhi, hi)
        inside = np.where(has_roots, a < 0, inside)
        empty_quad = quad & ~(disc > 0) & (a < 0)
        empty = empty_lin | empty_quad
    lo = np.where(empty, 0.0, lo)
    hi = np.where(empty, 0.0, hi)
    inside = np.where(empty, True, inside)
    return lo, hi, inside


def tv_gaussian1d_closed(mu1: float, sigma1: float, mu2: float, sigma2: float) -> float:
    """Exact TV between two univariate Gaussians via their pdf crossing points."""
    if not (sigma1 > 0 and sigma2 > 0):
        raise ValueError("sigmas must be positive")
    if mu1 == mu2 and sigma1 == sigma2:
        return 0.0
    lo, hi, inside = (np.asarray(v).item() for v in _scheffe_interval(mu1, sigma1, mu2, sigma2))

    def mass(mu, s):
        return float(special.ndtr((hi - mu) / s) - special.ndtr((lo - mu) / s))

    diff = mass(mu1, sigma1) - mass(mu2, sigma2)
    return float(min(max(abs(diff), 0.0), 1.0))
