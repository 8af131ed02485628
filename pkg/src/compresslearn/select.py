"""Minimum-distance selection among candidate densities (Scheffé tournament)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import special

from .densities import DensityHandle, IsoGaussian, SeededRng, _scheffe_interval, as_rng, stable_hash

__all__ = ["ScheffeResult", "empirical_scheffe_stats", "select_min_distance"]


@dataclass(frozen=True)
class ScheffeResult:
    chosen_index: int
    deltas: tuple[float, ...]
    test_sample_count: int
    method: str = "monte_carlo"
    pruned: int = 0  # candidates whose delta is only a lower bound (all above the winner's)

    def to_dict(self) -> dict:
        return {
            "chosen_index": self.chosen_index,
            "deltas": list(self.deltas),
            "test_sample_count": self.test_sample_count,
            "method": self.method,
            "pruned": self.pruned,
        }


def _as_2d(x) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    return arr[:, None] if arr.ndim == 1 else arr


def _stream(rng: SeededRng, f: DensityHandle) -> SeededRng:
    # keyed on content so that reordering candidates leaves every draw unchanged
    return rng.child(stable_hash(f.key))


def empirical_scheffe_stats(fi, fj, test_samples, mass_budget: int = 20_000, rng=None):
    """Masses of A = {fi > fj} under fi and fj (Monte Carlo) and its empirical frequency."""
    rng = as_rng(rng)
    test = _as_2d(test_samples)
    if fi == fj:
        return 0.0, 0.0, 0.0
    emp = float(np.mean(fi.logpdf(test) > fj.logpdf(test)))
    xi = fi.sample(mass_budget, _stream(rng, fi))
    xj = fj.sample(mass_budget, _stream(rng, fj))
    mass_i = float(np.mean(fi.logpdf(xi) > fj.logpdf(xi)))
    mass_j = float(np.mean(fi.logpdf(xj) > fj.logpdf(xj)))
    return mass_i, mass_j, emp


def _unique(cands: Sequence[DensityHandle]):
    keys, first, inverse = {}, [], []
    for c in cands:
        k = c.key
        if k not in keys:
            keys[k] = len(first)
            first.append(c)
        inverse.append(keys[k])
    return first, np.asarray(inverse)


def _deltas_monte_carlo(cands, test, mass_budget, rng):
    M = len(cands)
    T = np.stack([c.logpdf(test) for c in cands])
    deltas = np.zeros(M)
    for i, fi in enumerate(cands):
        xs = fi.sample(mass_budget, _stream(rng, fi))
        L = np.stack([c.logpdf(xs) for c in cands])
        mass = np.mean(L[i] > L, axis=1)
        emp = np.mean(T[i] > T, axis=1)
        gap = np.abs(mass - emp)
        gap[i] = 0.0
        deltas[i] = gap.max()
    return deltas


def _deltas_exact_gauss1d(cands, test):
    # Scheffé sets of two univariate Gaussians are an interval or its complement,
    # so masses come from normal CDFs and counts from the sorted test sample.
    mu = np.array([c.mean[0] for c in cands])
    sd = np.array([c.sigma for c in cands])
    xs = np.sort(test[:, 0])
    n = xs.size
    M = mu.size
    deltas = np.zeros(M)
    for i in range(M - 1):
        mj, sj = mu[i + 1 :], sd[i + 1 :]
        lo, hi, inside = _scheffe_interval(mu[i], sd[i], mj, sj)
        mass_i = special.ndtr((hi - mu[i]) / sd[i]) - special.ndtr((lo - mu[i]) / sd[i])
        mass_j = special.ndtr((hi - mj) / sj) - special.ndtr((lo - mj) / sj)
        open_count = np.searchsorted(xs, hi, "left") - np.searchsorted(xs, lo, "right")
        closed_count = np.searchsorted(xs, hi, "right") - np.searchsorted(xs, lo, "left")
        emp = np.where(inside, open_count, n - closed_count) / n
        mass_i = np.where(inside, mass_i, 1.0 - mass_i)
        mass_j = np.where(inside, mass_j, 1.0 - mass_j)
        # a duplicate pair has an empty Scheffé set
        same = (mj == mu[i]) & (sj == sd[i])
        gi = np.where(same, 0.0, np.abs(mass_i - emp))
        gj = np.where(same, 0.0, np.abs(mass_j - emp))
        deltas[i] = max(deltas[i], gi.max())
        np.maximum(deltas[i + 1 :], gj, out=deltas[i + 1 :])
    return deltas


def _gaps_gauss1d(mu_i, sd_i, mu_j, sd_j, xs):
    """|f_i(A_ij) - emp(A_ij)| elementwise over broadcast candidate pairs."""
    lo, hi, inside = _scheffe_interval(mu_i, sd_i, mu_j, sd_j)
    n = xs.size
    mass = special.ndtr((hi - mu_i) / sd_i) - special.ndtr((lo - mu_i) / sd_i)
    open_count = np.searchsorted(xs, hi, "left") - np.searchsorted(xs, lo, "right")
    closed_count = np.searchsorted(xs, hi, "right") - np.searchsorted(xs, lo, "left")
    emp = np.where(inside, open_count, n - closed_count) / n
    mass = np.where(inside, mass, 1.0 - mass)
    same = (mu_i == mu_j) & (sd_i == sd_j)
    return np.where(same, 0.0, np.abs(mass - emp))


def _deltas_exact_gauss1d_pruned(cands, test, refs=64):
    # Lower bounds against a few promising references rule out most candidates;
    # the rest are evaluated in full, so the argmin is the same as without pruning.
    mu = np.array([c.mean[0] for c in cands])
    sd = np.array([c.sigma for c in cands])
    xs = np.sort(test[:, 0])
    n, M = xs.size, mu.size
    probe = xs[np.unique(np.linspace(0, n - 1, min(n, 512)).astype(int))]
    ecdf = np.searchsorted(xs, probe, "right") / n
    score = np.empty(M)
    for s in range(0, M, 2048):
        F = special.ndtr((probe[None, :] - mu[s : s + 2048, None]) / sd[s : s + 2048, None])
        score[s : s + 2048] = np.abs(F - ecdf).max(axis=1)
    ref = np.argsort(score, kind="stable")[:refs]
    lower = np.empty(M)
    for s in range(0, M, 1024):
        g = _gaps_gauss1d(mu[s : s + 1024, None], sd[s : s + 1024, None], mu[ref][None, :], sd[ref][None, :], xs)
        lower[s : s + 1024] = g.max(axis=1)
    deltas = lower.copy()
    best = np.inf
    pruned = M
    for i in np.argsort(lower, kind="stable"):
        if lower[i] > best:
            break
        deltas[i] = _gaps_gauss1d(mu[i], sd[i], mu, sd, xs).max()
        best = min(best, deltas[i])
        pruned -= 1
    return deltas, pruned


def _deltas_grid1d(cands, test, points):
    # midpoint rule on one shared grid over the union of supports
    lo = min(float(c.support()[0][0]) for c in cands)
    hi = max(float(c.support()[1][0]) for c in cands)
    h = (hi - lo) / points
    xs = (lo + h * (np.arange(points) + 0.5))[:, None]
    L = np.stack([c.logpdf(xs) for c in cands])
    P = np.exp(L) * h
    T = np.stack([c.logpdf(test) for c in cands])
    deltas = np.zeros(len(cands))
    for i in range(len(cands)):
        mass = (L[i] > L).astype(float) @ P[i]
        emp = np.mean(T[i] > T, axis=1)
        gap = np.abs(mass - emp)
        gap[i] = 0.0
        deltas[i] = gap.max()
    return deltas


def select_min_distance(
    candidates: Sequence[DensityHandle],
    test_samples,
    mass_budget: int = 20_000,
    rng: SeededRng | int | None = None,
    method: str = "monte_carlo",
    grid_points: int = 4096,
    prune: bool | None = None,
) -> ScheffeResult:
    """Pick the candidate minimising the worst Scheffé-set discrepancy.

    For each ordered pair the Scheffé set is ``A_ij = {f_i > f_j}``;
    ``delta_i = max_j |f_i(A_ij) - empirical(A_ij)|`` and the argmin wins,
    lowest index on ties.

    ``method`` is "monte_carlo" (masses from ``mass_budget`` draws of each
    candidate), "exact" (1D Gaussian candidates only, CDF masses), "grid"
    (1D only, midpoint rule on ``grid_points`` cells) or "auto" (exact for
    1D Gaussians, grid for other 1D candidates, Monte Carlo otherwise).

    With the exact method, ``prune`` (default: on above 1500 distinct
    candidates) skips candidates whose lower bound already exceeds the best
    delta found; their reported deltas are those lower bounds.
    """
    cands = list(candidates)
    if not cands:
        raise ValueError("no candidates to select from")
    test = _as_2d(test_samples)
    if test.shape[0] < 1:
        raise ValueError("need at least one test sample")
    rng = as_rng(rng)
    pruned = 0
    uniq, inverse = _unique(cands)
    gauss1d = all(isinstance(c, IsoGaussian) and c.dim == 1 for c in uniq)
    if method == "auto":
        method = "exact" if gauss1d else ("grid" if uniq[0].dim == 1 else "monte_carlo")
    if len(uniq) == 1:
        deltas_u = np.zeros(1)
    elif method == "exact":
        if not gauss1d:
            raise ValueError("exact Scheffé masses need 1D Gaussian candidates")
        if prune or (prune is None and len(uniq) > 1500):
            deltas_u, pruned = _deltas_exact_gauss1d_pruned(uniq, test)
        else:
            deltas_u = _deltas_exact_gauss1d(uniq, test)
    elif method == "grid":
        if uniq[0].dim != 1:
            raise ValueError("grid Scheffé masses are 1D only")
        deltas_u = _deltas_grid1d(uniq, test, int(grid_points))
    elif method == "monte_carlo":
        deltas_u = _deltas_monte_carlo(uniq, test, int(mass_budget), rng)
    else:
        raise ValueError(f"unknown method {method!r}")
    deltas = deltas_u[inverse]
    chosen = int(np.argmin(deltas))
    return ScheffeResult(chosen, tuple(float(v) for v in deltas), int(test.shape[0]), method, int(pruned))
