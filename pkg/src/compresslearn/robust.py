"""Learning from noisy or adversarially corrupted samples.

Both learners reuse clean compression: noisy samples are denoised by subtracting
every offset of a quantization grid from the chosen samples, and adversarial
samples are handled by running the tournament on 2s+1 disjoint groups and
keeping a hypothesis that a strict majority of the group winners agree on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import special

from .compression import Candidate, CandidateList, Family, enumerate_candidates
from .densities import (
    DensityHandle,
    GaussianNoise,
    IsoGaussian,
    LaplaceNoise,
    Mixture,
    NoiseModel,
    SeededRng,
    UniformBox,
    Convolved,
    as_rng,
    convolve_noise,
    distance,
)
from .select import ScheffeResult, select_min_distance

__all__ = [
    "QuantGrid",
    "AdversaryBudget",
    "AdversaryStrategy",
    "CorruptionRecord",
    "GroupPartition",
    "Fit",
    "CliqueNotFound",
    "inv_cdf_noise",
    "mills_ratio_bound",
    "build_grid",
    "compression_block_size",
    "epsilon_for_budget",
    "learn_clean",
    "learn_noisy",
    "corrupt_adversarial",
    "partition_groups",
    "learn_adversarial",
    "find_clique",
    "moment_fit",
]


# ----------------------------------------------------------------------------
# Types
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class QuantGrid:
    """Symmetric 1D lattice with spacing 2*eta, applied to every coordinate."""

    eta: float
    half_range: float
    points: tuple[float, ...]
    dim: int | None = None

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class AdversaryBudget:
    s: int
    C: float

    def __post_init__(self):
        if self.s < 0 or self.C < 0:
            raise ValueError("adversary budget must be nonnegative")


STRATEGIES = ("MeanShift", "DecoyCluster", "GreedyConfuser")


@dataclass(frozen=True)
class AdversaryStrategy:
    """How corrupted rows are moved. ``target`` is an optional decoy point."""

    kind: str
    target: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in STRATEGIES:
            raise ValueError(f"unknown adversary strategy {self.kind!r}")


@dataclass(frozen=True)
class CorruptionRecord:
    samples: np.ndarray
    mask: np.ndarray


@dataclass(frozen=True)
class GroupPartition:
    compression: range
    groups: tuple[range, ...]


@dataclass
class Fit:
    """Learner output: the chosen density plus what it took to find it."""

    density: DensityHandle
    candidate_count: int
    evaluated: int
    truncated: bool
    block_size: int
    selections: tuple[ScheffeResult, ...] = ()
    winners: tuple[int, ...] = ()
    clique: tuple[int, ...] | None = None
    grid_size: int = 1


class CliqueNotFound(RuntimeError):
    """No s+1 group winners are pairwise close: the guarantee failed for this run."""

    def __init__(self, message: str, winners: Sequence[DensityHandle] = (), best: int = 0):
        super().__init__(message)
        self.winners = tuple(winners)
        self.best = best


# ----------------------------------------------------------------------------
# Grids and noise quantiles
# ----------------------------------------------------------------------------


def inv_cdf_noise(g: NoiseModel, delta: float) -> float:
    """|Phi_G^{-1}(delta)| for one noise coordinate.

    Exact for both kinds: the Gaussian quantile through the inverse error
    function, the Laplace one as b log(1 / (2 delta)) (mirrored above 1/2).
    """
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if isinstance(g, GaussianNoise):
        return abs(g.sigma * special.ndtri(delta))
    if isinstance(g, LaplaceNoise):
        return g.b * abs(math.log(2.0 * min(delta, 1.0 - delta)))
    raise TypeError(f"unsupported noise {type(g).__name__}")


def mills_ratio_bound(g: GaussianNoise, delta: float) -> float:
    """Upper bound sigma * sqrt(2 log(1 / (sqrt(2 pi) delta))) on the Gaussian tail quantile."""
    if not 0.0 < delta < 1.0 / math.sqrt(2 * math.pi):
        raise ValueError("bound needs 0 < delta < 1/sqrt(2 pi)")
    return g.sigma * math.sqrt(2.0 * math.log(1.0 / (math.sqrt(2 * math.pi) * delta)))


def build_grid(half_range: float, eta: float, dim: int | None = None) -> QuantGrid:
    """Points -R, -R + 2 eta, ... continued until +R, the last one clamped to +R.

    Every y in [-R, R] is within eta of a point. When R < eta the single point 0
    already covers the range and the grid collapses to {0}.
    """
    if not eta > 0:
        raise ValueError("eta must be positive")
    R = float(half_range)
    if R < 0:
        raise ValueError("half_range must be nonnegative")
    if R == 0 or R < eta:
        return QuantGrid(float(eta), R, (0.0,), dim)
    ratio = R / eta
    if abs(ratio - round(ratio)) < 1e-9 * max(1.0, ratio):
        K = int(round(ratio))
        pts = -R + 2.0 * eta * np.arange(K + 1)
        pts[-1] = R
        pts = 0.5 * (pts - pts[::-1])
        pts[K // 2] = 0.0 if K % 2 == 0 else pts[K // 2]
    else:
        K = math.ceil(ratio)
        pts = np.append(-R + 2.0 * eta * np.arange(K), R)
    return QuantGrid(float(eta), R, tuple(float(p) for p in pts), dim)


# ----------------------------------------------------------------------------
# Shared learner plumbing
# ----------------------------------------------------------------------------


def compression_block_size(family: Family, epsilon: float, delta: float, n: int) -> int:
    """ceil(m(eps/2) log(1/delta)) samples, never more than half of n."""
    tau = family.scheme.tau(epsilon / 2)
    want = math.ceil(family.scheme.m(epsilon / 2) * math.log(1.0 / delta))
    return max(tau, min(want, n // 2))


def epsilon_for_budget(n: int, family: Family, delta: float) -> float:
    """Smallest epsilon whose compression block plus tournament test block fit in n samples."""

    def need(eps):
        nc = math.ceil(family.scheme.m(eps / 2) * math.log(1 / delta))
        tau, t = family.scheme.tau(eps / 2), family.scheme.t(eps / 2)
        log_m = tau * math.log(nc) + t * math.log(2)
        return nc + math.ceil((2 * log_m + math.log(1 / delta)) / (2 * eps * eps))

    lo, hi = 1e-4, 0.999
    if need(hi) > n:
        return hi
    for _ in range(60):
        mid = math.sqrt(lo * hi)
        if need(mid) <= n:
            hi = mid
        else:
            lo = mid
    return hi


def _points(samples) -> np.ndarray:
    pts = np.asarray(samples, dtype=float)
    return pts[:, None] if pts.ndim == 1 else pts


def _distinct(cands: CandidateList) -> list[DensityHandle]:
    seen, out = set(), []
    for c in cands:
        if c.density is None:
            continue
        k = c.density.key
        if k not in seen:
            seen.add(k)
            out.append(c.density)
    if not out:
        raise ValueError("every candidate was degenerate")
    return out


def learn_clean(
    samples,
    family: Family,
    epsilon: float,
    delta: float,
    rng: SeededRng | int | None = None,
    cap: int | None = 2_000_000,
    mass_budget: int = 20_000,
    scheffe: str = "auto",
) -> Fit:
    """Plain compression learner: decode candidates from a first block, select on the rest."""
    rng = as_rng(rng)
    pts = _points(samples)
    nc = compression_block_size(family, epsilon, delta, len(pts))
    cands = enumerate_candidates(pts[:nc], family, epsilon=epsilon / 2, cap=cap, rng=rng.child(1))
    dens = _distinct(cands)
    res = select_min_distance(dens, pts[nc:], mass_budget, rng.child(2, 0), scheffe)
    return Fit(dens[res.chosen_index], cands.total, len(dens), cands.truncated, nc, (res,))


def learn_noisy(
    noisy_samples,
    family: Family,
    noise: NoiseModel,
    epsilon: float,
    delta: float,
    rng: SeededRng | int | None = None,
    cap: int | None = 2_000_000,
    mass_budget: int = 20_000,
    scheffe: str = "auto",
) -> Fit:
    """Learn f from samples of f * G by enumerating grid-denoised candidates.

    Grid spacing is 2 eta with eta = eps / (r sqrt(d tau(eps/2))) and the grid
    spans |Phi_G^{-1}(delta / (4 n d))|. Candidates are convolved with the noise
    for the tournament on the noisy test block; the unconvolved winner is returned.
    """
    rng = as_rng(rng)
    pts = _points(noisy_samples)
    n, d = pts.shape
    if noise.dim != d:
        noise = noise.with_dim(d)
    nc = compression_block_size(family, epsilon, delta, n)
    tau = family.scheme.tau(epsilon / 2)
    eta = epsilon / (family.lipschitz * math.sqrt(d * tau))
    grid = build_grid(inv_cdf_noise(noise, delta / (4 * n * d)), eta)
    cands = enumerate_candidates(pts[:nc], family, epsilon=epsilon / 2, grid=grid, cap=cap, rng=rng.child(1))
    dens = _distinct(cands)
    smooth = [convolve_noise(f, noise) for f in dens]
    res = select_min_distance(smooth, pts[nc:], mass_budget, rng.child(2, 0), scheffe)
    return Fit(dens[res.chosen_index], cands.total, len(dens), cands.truncated, nc, (res,), grid_size=len(grid))


# ----------------------------------------------------------------------------
# Adversarial regime
# ----------------------------------------------------------------------------


def _center(f: DensityHandle) -> np.ndarray:
    if isinstance(f, IsoGaussian):
        return np.asarray(f.mean)
    if isinstance(f, UniformBox):
        return 0.5 * (f.lower + f.upper)
    if isinstance(f, Mixture):
        return sum(w * _center(c) for w, c in zip(f.weights, f.components))
    if isinstance(f, Convolved):
        return _center(f.base)
    raise TypeError(f"no center for {type(f).__name__}")


def moment_fit(samples) -> IsoGaussian:
    """Non-robust baseline: Gaussian with the sample mean and pooled sample deviation."""
    pts = _points(samples)
    sd = float(np.sqrt(np.mean(np.var(pts, axis=0))))
    return IsoGaussian(pts.mean(axis=0), max(sd, 1e-12))


def corrupt_adversarial(
    samples,
    budget: AdversaryBudget,
    strategy: AdversaryStrategy,
    target: DensityHandle | None = None,
    rng: SeededRng | int | None = None,
) -> CorruptionRecord:
    """Modify min(s, n) rows, each by at most C in the infinity norm."""
    pts = _points(samples).copy()
    n, d = pts.shape
    m = min(budget.s, n)
    mask = np.zeros(n, dtype=bool)
    if m == 0:
        return CorruptionRecord(pts, mask)
    gen = as_rng(rng).generator()
    rows = np.sort(gen.choice(n, size=m, replace=False))
    mask[rows] = True
    x = pts[rows]
    C = budget.C
    if strategy.kind == "MeanShift":
        moved = x + C
    else:
        if strategy.target is not None:
            aim = np.asarray(strategy.target, dtype=float)
        elif target is not None:
            aim = _center(target)
        else:
            aim = pts.mean(axis=0) + C
        if strategy.kind == "GreedyConfuser":
            ref = moment_fit(pts)
            decoy = target if target is not None else IsoGaussian(aim, ref.sigma)

            def gap(t):
                p = ref.mean + t * (aim - ref.mean)
                return float(ref.logpdf(p[None])[0] - decoy.logpdf(p[None])[0])

            lo, hi = 0.0, 1.0
            if gap(lo) * gap(hi) < 0:
                for _ in range(60):
                    mid = 0.5 * (lo + hi)
                    lo, hi = (mid, hi) if gap(mid) * gap(hi) < 0 else (lo, mid)
            aim = ref.mean + 0.5 * (lo + hi) * (aim - ref.mean)
        moved = np.broadcast_to(aim, x.shape)
    pts[rows] = np.clip(moved, x - C, x + C)
    return CorruptionRecord(pts, mask)


def partition_groups(n: int, block: int, s: int) -> GroupPartition:
    """First ``block`` rows for compression, the rest cut into 2s+1 equal groups."""
    k = 2 * s + 1
    size = (n - block) // k
    if size < 1:
        raise ValueError(f"{n - block} samples cannot fill {k} test groups")
    groups = tuple(range(block + g * size, block + (g + 1) * size) for g in range(k))
    return GroupPartition(range(0, block), groups)


def _l1(f: DensityHandle, g: DensityHandle) -> float:
    return distance(f, g, "L1").value


def find_clique(
    hypotheses: Sequence[DensityHandle],
    threshold: float,
    min_size: int,
    distance_oracle: Callable[[DensityHandle, DensityHandle], float] | None = None,
) -> list[int]:
    """Maximum clique of the graph joining hypotheses within ``threshold`` (L1 by default).

    Among maximum cliques the lexicographically smallest index set is returned.
    """
    m = len(hypotheses)
    if m > 64:
        raise ValueError("clique search is limited to 64 hypotheses")
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")
    oracle = distance_oracle or _l1
    adj = [set() for _ in range(m)]
    for i in range(m):
        for j in range(i + 1, m):
            if hypotheses[i] == hypotheses[j] or oracle(hypotheses[i], hypotheses[j]) <= threshold:
                adj[i].add(j)
                adj[j].add(i)
    best: list[tuple[int, ...]] = [()]

    def expand(clique: list[int], cand: list[int]):
        if len(clique) + len(cand) < len(best[0]):
            return
        if not cand:
            key = tuple(clique)
            if len(key) > len(best[0]) or (len(key) == len(best[0]) and key < best[0]):
                best[0] = key
            return
        for pos, v in enumerate(cand):
            expand(clique + [v], [u for u in cand[pos + 1 :] if u in adj[v]])
        if len(clique) >= len(best[0]):
            key = tuple(clique)
            if len(key) > len(best[0]) or (len(key) == len(best[0]) and key < best[0]):
                best[0] = key

    expand([], list(range(m)))
    if len(best[0]) < min_size:
        raise CliqueNotFound(f"largest clique has {len(best[0])} < {min_size} members", hypotheses)
    return list(best[0])


def learn_adversarial(
    samples,
    s: int,
    family: Family,
    C: float,
    epsilon: float,
    delta: float,
    rng: SeededRng | int | None = None,
    cap: int | None = 2_000_000,
    mass_budget: int = 20_000,
    scheffe: str = "auto",
    eps_prime: float | None = None,
    eps_dprime: float | None = None,
    distance_oracle: Callable[[DensityHandle, DensityHandle], float] | None = None,
) -> Fit:
    """Learn from samples where up to s rows moved by at most C (infinity norm).

    Candidates come from the compression block with per-slot offsets on a grid
    over [-C, C] (eta = eps / (r sqrt(d s)), zero included). Each of the 2s+1
    test groups runs its own tournament and the result is the lowest-index
    member of a clique of >= s+1 winners within 2 eps' + 8 eps'' in L1.
    Raises :class:`CliqueNotFound` when no such clique exists.
    """
    rng = as_rng(rng)
    pts = _points(samples)
    n, d = pts.shape
    nc = compression_block_size(family, epsilon, delta, n)
    part = partition_groups(n, nc, s)
    if s == 0:
        grid = build_grid(0.0, 1.0)
    else:
        grid = build_grid(C, epsilon / (family.lipschitz * math.sqrt(d * s)))
    cands = enumerate_candidates(pts[:nc], family, epsilon=epsilon / 2, grid=grid, cap=cap, rng=rng.child(1))
    dens = _distinct(cands)
    results = []
    for g, rows in enumerate(part.groups):
        results.append(select_min_distance(dens, pts[rows.start : rows.stop], mass_budget, rng.child(2, g), scheffe))
    winners = tuple(r.chosen_index for r in results)
    hyps = [dens[w] for w in winners]
    e1 = epsilon / 6 if eps_prime is None else eps_prime
    e2 = epsilon / 24 if eps_dprime is None else eps_dprime
    clique = find_clique(hyps, 2 * e1 + 8 * e2, s + 1, distance_oracle)
    return Fit(
        hyps[clique[0]],
        cands.total,
        len(dens),
        cands.truncated,
        nc,
        tuple(results),
        winners,
        tuple(clique),
        grid_size=len(grid),
    )
