"""Sample-compression decoders and exhaustive candidate enumeration.

A decoder maps a short sequence of samples plus a few bits to a member of a
density family. Enumerating every (index tuple, bit string, offset tuple)
over a block of samples yields a finite candidate set that contains a good
approximation of the sampling density with high probability.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .densities import DensityHandle, IsoGaussian, Mixture, SeededRng, UniformBox, as_rng

__all__ = [
    "DegenerateSampleError",
    "SchemeProfile",
    "Candidate",
    "CandidateList",
    "Family",
    "Gaussian1DFamily",
    "GaussianIsoFamily",
    "UniformBoxFamily",
    "MixtureFamily",
    "decode_gaussian_pair",
    "decode_gaussian_iso",
    "decode_uniform_box",
    "decode_mixture",
    "weights_from_bits",
    "candidate_space_size",
    "enumerate_candidates",
]


class DegenerateSampleError(ValueError):
    """Raised when a decoder receives inputs it cannot turn into a valid density."""


@dataclass(frozen=True)
class SchemeProfile:
    """The (tau, t, m) functions of a compression scheme, each mapping epsilon to an integer."""

    family: str
    tau: Callable[[float], int]
    t: Callable[[float], int]
    m: Callable[[float], int]

    def at(self, epsilon: float) -> tuple[int, int, int]:
        return self.tau(epsilon), self.t(epsilon), self.m(epsilon)


def _log_inv(eps: float) -> float:
    return max(math.log(1.0 / eps), 1.0)


# ----------------------------------------------------------------------------
# Decoders
# ----------------------------------------------------------------------------


def decode_gaussian_pair(xi: float, xj: float) -> IsoGaussian:
    """N((xi + xj) / 2, (xj - xi)^2 / 4): the two samples sit one sigma either side of the mean."""
    xi, xj = float(xi), float(xj)
    if xi == xj:
        raise DegenerateSampleError("equal samples give zero variance")
    return IsoGaussian([(xi + xj) / 2], abs(xj - xi) / 2)


def decode_gaussian_iso(samples, sigma0: float) -> IsoGaussian:
    """Mean of the samples, variance max(sigma0^2, mean squared Euclidean deviation).

    The squared deviation is summed over coordinates and used as the
    per-coordinate variance without dividing by d, so for d > 1 the
    variance is inflated by roughly a factor d.
    """
    pts = np.asarray(samples, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.shape[0] == 0:
        raise DegenerateSampleError("no samples to decode")
    mu = pts.mean(axis=0)
    spread = float(np.mean(np.sum((pts - mu) ** 2, axis=1)))
    return IsoGaussian(mu, math.sqrt(max(sigma0**2, spread)))


def decode_uniform_box(samples, T: float) -> UniformBox:
    """Coordinatewise [min, max], widened about the midpoint to width T where narrower."""
    pts = np.asarray(samples, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.shape[0] == 0:
        raise DegenerateSampleError("no samples to decode")
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    narrow = hi - lo < T
    mid = 0.5 * (lo + hi)
    lo = np.where(narrow, mid - 0.5 * T, lo)
    hi = np.where(narrow, lo + T, hi)
    return UniformBox(lo, hi, T)


def decode_mixture(
    sample_groups: Sequence,
    quantized_weights,
    base_decoder: Callable[..., DensityHandle],
    base_params: dict | None = None,
) -> Mixture:
    """Mixture of per-group decodes with the given lattice weights."""
    w = np.asarray(quantized_weights, dtype=float).ravel()
    if w.size != len(sample_groups) or w.size == 0:
        raise ValueError("need one weight per sample group")
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
        raise ValueError("weights must lie on the probability simplex")
    if any(len(g) == 0 for g in sample_groups):
        raise DegenerateSampleError("empty sample group")
    params = base_params or {}
    return Mixture(w, [base_decoder(g, **params) for g in sample_groups])


def weights_from_bits(bits: Sequence[int], k: int, epsilon: float) -> np.ndarray | None:
    """Decode k lattice weights (multiples of epsilon / (4k)) from a bit string.

    The bits are read as k fixed-width integers. The first k - 1 give weights
    directly and the last weight is the remainder, so the result always sums to
    one; None means the first k - 1 weights already exceed one.
    """
    if k == 1:
        return np.ones(1)
    width = max(1, math.ceil(math.log2(4 * k / epsilon)))
    unit = epsilon / (4 * k)
    vals = []
    for i in range(k - 1):
        chunk = bits[i * width : (i + 1) * width]
        vals.append(sum(b << (len(chunk) - 1 - p) for p, b in enumerate(chunk)) * unit)
    last = 1.0 - sum(vals)
    if last < -1e-12:
        return None
    return np.array(vals + [max(last, 0.0)])


# ----------------------------------------------------------------------------
# Families
# ----------------------------------------------------------------------------


class Family:
    """A density family with a registered decoder, scheme and Lipschitz constant."""

    name: str = "family"
    dim: int = 1
    scheme: SchemeProfile
    lipschitz: float

    def decode(self, points: np.ndarray, bits: tuple[int, ...], epsilon: float) -> DensityHandle:
        raise NotImplementedError

    def describe(self) -> dict:
        raise NotImplementedError


class Gaussian1DFamily(Family):
    """Univariate Gaussians, decoded from two samples at mean - sigma and mean + sigma."""

    name = "Gaussian1D"

    def __init__(self, sigma0: float = 1.0, r_const: float = 1.0):
        self.dim = 1
        self.sigma0 = float(sigma0)
        self.lipschitz = r_const / (self.sigma0 * math.sqrt(math.log(2.0)))
        self.scheme = SchemeProfile(
            self.name,
            tau=lambda eps: 2,
            t=lambda eps: 0,
            m=lambda eps: max(2, math.ceil(_log_inv(eps) / eps)),
        )

    def decode(self, points, bits, epsilon):
        return decode_gaussian_pair(points[0, 0], points[1, 0])

    def describe(self):
        return {"kind": self.name, "sigma0": self.sigma0}


class GaussianIsoFamily(Family):
    """Isotropic Gaussians N(mu, s^2 I) with s >= sigma0."""

    name = "GaussianIso"

    def __init__(self, d: int, sigma0: float, r_const: float = 1.0):
        self.dim = int(d)
        self.sigma0 = float(sigma0)
        dl = self.dim * math.log(2 * self.dim)
        self.lipschitz = r_const / (self.sigma0 * math.sqrt(dl))
        tau = math.ceil(dl) + 1
        self.scheme = SchemeProfile(
            self.name,
            tau=lambda eps: tau,
            t=lambda eps: 0,
            m=lambda eps: max(tau, math.ceil(tau * _log_inv(eps) / eps)),
        )

    def decode(self, points, bits, epsilon):
        return decode_gaussian_iso(points, self.sigma0)

    def describe(self):
        return {"kind": self.name, "d": self.dim, "sigma0": self.sigma0}


class UniformBoxFamily(Family):
    """Uniform densities on axis-aligned boxes with every side at least T."""

    name = "UniformBox"

    def __init__(self, d: int, T: float, r_const: float = 8.0):
        self.dim = int(d)
        self.T = float(T)
        self.lipschitz = r_const * self.dim / self.T
        d_ = self.dim
        self.scheme = SchemeProfile(
            self.name,
            tau=lambda eps: 2 * d_,
            t=lambda eps: 0,
            m=lambda eps: max(2 * d_, math.ceil(2 * d_ / eps * math.log(3 * d_))),
        )

    def decode(self, points, bits, epsilon):
        return decode_uniform_box(points, self.T)

    def describe(self):
        return {"kind": self.name, "d": self.dim, "T": self.T}


class MixtureFamily(Family):
    """k-mixtures of a base family; the index tuple is split into k contiguous groups."""

    def __init__(self, base: Family, k: int, m_const: float | None = None):
        self.base = base
        self.k = int(k)
        self.dim = base.dim
        self.name = f"KMix{base.name}"
        self.lipschitz = base.lipschitz * math.sqrt(self.k)
        k_, d_ = self.k, self.dim
        bscheme = base.scheme

        def bits(eps):
            return k_ * max(1, math.ceil(math.log2(4 * k_ / eps))) + k_ * bscheme.t(eps)

        if isinstance(base, UniformBoxFamily):
            const = 288.0 if m_const is None else m_const

            def m(eps):
                return math.ceil(const * d_ * k_ / eps * math.log(6 * k_ / eps) * math.log(3 * d_))

        else:
            const = 1.0 if m_const is None else m_const

            def m(eps):
                return math.ceil(const * k_ * math.log(max(k_, 2)) * bscheme.m(eps))

        self.scheme = SchemeProfile(self.name, tau=lambda eps: k_ * bscheme.tau(eps), t=bits, m=m)

    def decode(self, points, bits, epsilon):
        w = weights_from_bits(bits, self.k, epsilon)
        if w is None:
            raise DegenerateSampleError("bit string decodes to weights off the simplex")
        per = points.shape[0] // self.k
        groups = [points[i * per : (i + 1) * per] for i in range(self.k)]
        return decode_mixture(groups, w, lambda g: self.base.decode(g, (), epsilon))

    def describe(self):
        return {"kind": self.name, "k": self.k, "base": self.base.describe()}


# ----------------------------------------------------------------------------
# Enumeration
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class Candidate:
    """A decoded density with its provenance; ``density`` is None for degenerate inputs."""

    density: DensityHandle | None
    sample_indices: tuple[int, ...]
    bits: tuple[int, ...] = ()
    offsets: tuple[tuple[float, ...], ...] | None = None

    def provenance(self) -> dict:
        return {
            "sample_indices": list(self.sample_indices),
            "bits": list(self.bits),
            "offsets": None if self.offsets is None else [list(o) for o in self.offsets],
        }


class CandidateList(list):
    """List of candidates plus the untruncated space size and a truncation flag."""

    def __init__(self, items=(), total: int = 0, truncated: bool = False):
        super().__init__(items)
        self.total = int(total)
        self.truncated = bool(truncated)


def candidate_space_size(n: int, tau: int, t: int, grid_size: int = 1, d: int = 1) -> int:
    return n**tau * 2**t * grid_size ** (d * tau)


def _sample_ranks(total: int, k: int, gen: np.random.Generator) -> list[int]:
    if k <= 0:
        return []
    if total < 2**62:
        return sorted(int(v) for v in gen.choice(total, size=k, replace=False))
    seeded = random.Random(int(gen.integers(2**62)))
    return sorted(seeded.sample(range(total), k))


def _offset_values(grid, d: int) -> np.ndarray:
    pts = np.asarray(grid.points, dtype=float)
    gdim = getattr(grid, "dim", None)
    if gdim is not None and gdim != d:
        raise ValueError("grid dimension does not match the samples")
    if not np.any(pts == 0.0):
        pts = np.sort(np.append(pts, 0.0))
    return pts


def enumerate_candidates(
    samples,
    family: Family,
    scheme: SchemeProfile | None = None,
    epsilon: float = 0.1,
    bit_budget: int | None = None,
    grid=None,
    cap: int | None = None,
    rng: SeededRng | int | None = None,
) -> CandidateList:
    """Every decoder input over ``samples`` in lexicographic order.

    The order is (index tuple, bit string, offset tuple), most significant first.
    With a grid, each chosen sample has a grid offset subtracted per coordinate;
    zero is always one of the offsets. Above ``cap`` a seeded subsample is
    returned and flagged as truncated: when the zero-offset candidates alone fit
    under the cap they are all kept and the rest of the cap is filled uniformly
    from the remaining space, otherwise the whole space is subsampled uniformly.
    """
    pts = np.asarray(samples, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    n, d = pts.shape
    scheme = scheme or family.scheme
    tau = scheme.tau(epsilon)
    t = scheme.t(epsilon) if bit_budget is None else int(bit_budget)
    if n < 1:
        raise ValueError("need at least one sample")
    if cap is not None and cap < 1:
        raise ValueError("cap must be at least 1")
    offsets = _offset_values(grid, d) if grid is not None else np.zeros(1)
    G = offsets.size
    n_off = G ** (d * tau)
    n_bits = 2**t
    total = n**tau * n_bits * n_off

    truncated = cap is not None and total > cap
    if not truncated:
        ranks = range(total)
    else:
        gen = as_rng(rng).generator()
        zero = int(np.flatnonzero(offsets == 0.0)[0])
        zcode = sum(zero * G**p for p in range(d * tau))
        n_zero = total // n_off
        if grid is not None and n_off > 1 and n_zero <= cap:
            rest = _sample_ranks(total - n_zero, cap - n_zero, gen)
            extra = []
            for r in rest:
                prefix, off = divmod(r, n_off - 1)
                extra.append(prefix * n_off + (off if off < zcode else off + 1))
            ranks = sorted([p * n_off + zcode for p in range(n_zero)] + extra)
        else:
            ranks = _sample_ranks(total, cap, gen)

    out = CandidateList(total=total, truncated=truncated)
    for rank in ranks:
        rest, off_code = divmod(rank, n_off)
        idx_code, bit_code = divmod(rest, n_bits)
        idx = []
        for _ in range(tau):
            idx_code, r = divmod(idx_code, n)
            idx.append(r)
        idx = tuple(reversed(idx))
        bits = tuple((bit_code >> (t - 1 - p)) & 1 for p in range(t))
        chosen = pts[list(idx)]
        off = None
        if grid is not None:
            digits = []
            for _ in range(d * tau):
                off_code, r = divmod(off_code, G)
                digits.append(r)
            shift = offsets[list(reversed(digits))].reshape(tau, d)
            chosen = chosen - shift
            off = tuple(tuple(float(v) for v in row) for row in shift)
        try:
            dens = family.decode(chosen, bits, epsilon)
        except DegenerateSampleError:
            dens = None
        out.append(Candidate(dens, idx, bits, off))
    return out
