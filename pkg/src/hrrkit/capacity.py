"""Monte-Carlo benchmarks for binding capacity and query-response stability.

The workload is the key-value statement

    S = sum_{i=1..n} bind(x_i, y_i)

Retrieval protocol: unbind each key y_i, compare the estimate against the
true x_i and a pool of n fresh distractors by cosine similarity; the item
is an error when any distractor scores strictly higher. The pair count n
is swept over rounded powers of sqrt(2) and the reported capacity is the
grid point at which the pooled error fraction first exceeds the threshold
t (the breaking point). When even the smallest tested n exceeds t the
capacity is that smallest n, which keeps hopeless configurations plottable
on a log axis instead of reporting zero.
"""

from __future__ import annotations

import dataclasses
import warnings

import numpy as np

from . import core
from .seeds import mix64
from .vsa import VsaKind, vsa_bind, vsa_unbind

__all__ = [
    "CapacityCurve",
    "CapacityTrialConfig",
    "ResponseStats",
    "RetrievalErrorEstimate",
    "build_statement",
    "capacity_at_threshold",
    "capacity_curve",
    "capacity_sweep",
    "query_response_distribution",
    "retrieval_error_probability",
    "sqrt2_grid",
]

DEFAULT_THRESHOLD = 0.03
DEFAULT_TRIALS = 10


@dataclasses.dataclass(frozen=True)
class CapacityTrialConfig:
    kind: VsaKind
    d: int
    n: int
    trials: int = DEFAULT_TRIALS
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"pair count must be >= 1, got {self.n}")
        if self.trials < 1:
            raise ValueError(f"trial count must be >= 1, got {self.trials}")


@dataclasses.dataclass(frozen=True)
class RetrievalErrorEstimate:
    kind: VsaKind
    d: int
    n: int
    trials: int
    p_error: float
    std: float
    per_trial_errors: tuple

    def __post_init__(self):
        if not 0.0 <= self.p_error <= 1.0:
            raise ValueError(f"p_error out of range: {self.p_error}")


@dataclasses.dataclass(frozen=True)
class ResponseStats:
    n: int
    mean_present: float
    std_present: float
    mean_absent: float
    std_absent: float


@dataclasses.dataclass(frozen=True)
class CapacityCurve:
    kind: VsaKind
    threshold: float
    points: tuple  # ((d, capacity), ...) in ascending d


def sqrt2_grid(n_max, j_min=6):
    """Pair counts round(sqrt(2)**j) for j >= j_min, deduplicated, <= n_max."""
    grid = []
    j = j_min
    while True:
        n = int(round(2.0 ** (j / 2.0)))
        if n > n_max:
            break
        if not grid or n != grid[-1]:
            grid.append(n)
        j += 1
    return grid


def _sample_rows(kind, d, count, seed):
    # One generator per batch; rows are i.i.d. draws from the VSA's
    # initialization distribution.
    rng = np.random.Generator(np.random.PCG64(seed))
    if kind is VsaKind.MAP_C:
        return rng.uniform(-1.0, 1.0, size=(count, d))
    rows = rng.standard_normal((count, d)) / np.sqrt(d)
    if kind is VsaKind.HRR_PROJECTED:
        rows = core.project(rows, eps=0.0)
    return rows


def build_statement(kind, pairs):
    """Superpose the bindings of (value, key) pairs into one statement.

    Binding itself is linear for every kind. MAP-C statements are
    saturated elementwise to {-1, 0, +1} after the summation; entries of a
    multi-pair sum leave the unit range almost surely, and the hard
    saturation is what reproduces the published MAP-C capacity knees (a
    soft clip retains noticeably more capacity than reported).
    """
    kind = VsaKind(kind)
    if len(pairs) == 0:
        raise ValueError("at least one pair is required")
    xs = np.stack([np.asarray(x, dtype=np.float64) for x, _ in pairs])
    ys = np.stack([np.asarray(y, dtype=np.float64) for _, y in pairs])
    if xs.shape != ys.shape:
        raise ValueError("pair members must share one dimension")
    return _statement(kind, xs, ys)


def _statement(kind, xs, ys):
    if kind is VsaKind.MAP_C:
        return np.sign((xs * ys).sum(axis=0))
    return vsa_bind(kind, xs, ys).sum(axis=0)


def retrieval_error_probability(cfg):
    """Estimate the per-item retrieval error rate for one (kind, d, n) cell."""
    kind = VsaKind(cfg.kind)
    n, d = cfg.n, cfg.d
    errors = []
    for trial in range(cfg.trials):
        base = mix64(cfg.seed, trial)
        xs = _sample_rows(kind, d, n, mix64(base, 0))
        ys = _sample_rows(kind, d, n, mix64(base, 1))
        zs = _sample_rows(kind, d, n, mix64(base, 2))
        s = _statement(kind, xs, ys)
        xhat = vsa_unbind(kind, s, ys)
        xhat_n = xhat / (np.linalg.norm(xhat, axis=1, keepdims=True) + core.COSINE_EPS)
        true_sim = np.sum(
            xhat_n * xs / (np.linalg.norm(xs, axis=1, keepdims=True) + core.COSINE_EPS),
            axis=1,
        )
        zs_n = zs / (np.linalg.norm(zs, axis=1, keepdims=True) + core.COSINE_EPS)
        best_distractor = (xhat_n @ zs_n.T).max(axis=1)
        errors.append(int(np.count_nonzero(best_distractor > true_sim)))
    per_trial = np.asarray(errors, dtype=np.float64) / n
    std = float(per_trial.std(ddof=1)) if cfg.trials > 1 else 0.0
    return RetrievalErrorEstimate(
        kind=kind,
        d=d,
        n=n,
        trials=cfg.trials,
        p_error=float(sum(errors)) / (n * cfg.trials),
        std=std,
        per_trial_errors=tuple(errors),
    )


def capacity_sweep(
    kind,
    d,
    threshold=DEFAULT_THRESHOLD,
    seed=0,
    trials=DEFAULT_TRIALS,
    n_max=4096,
):
    """Sweep pair counts and locate the capacity at the error threshold.

    Returns (capacity, saturated, estimates). Capacity is the first grid
    point whose pooled error exceeds the threshold; `saturated` marks the
    case where every tested n up to n_max stayed within the threshold, in
    which case the largest tested n is reported as a lower bound.
    """
    kind = VsaKind(kind)
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")
    grid = sqrt2_grid(n_max)
    estimates = []
    for n in grid:
        cfg = CapacityTrialConfig(
            kind=kind, d=d, n=n, trials=trials, seed=mix64(seed, _kind_tag(kind), d, n)
        )
        est = retrieval_error_probability(cfg)
        estimates.append(est)
        if est.p_error > threshold:
            return n, False, estimates
    return grid[-1], True, estimates


def capacity_at_threshold(kind, d, threshold=DEFAULT_THRESHOLD, seed=0, trials=DEFAULT_TRIALS, n_max=4096):
    """Capacity of one (kind, d) cell; returns the (d, capacity) pair."""
    capacity, _, _ = capacity_sweep(
        kind, d, threshold=threshold, seed=seed, trials=trials, n_max=n_max
    )
    return d, capacity


def capacity_curve(kind, dims, threshold=DEFAULT_THRESHOLD, seed=0, trials=DEFAULT_TRIALS, n_max=4096):
    """Capacity across a dimension grid, with a soft monotonicity check."""
    kind = VsaKind(kind)
    points = tuple(
        capacity_at_threshold(kind, d, threshold, seed, trials, n_max)
        for d in sorted(dims)
    )
    if kind is not VsaKind.HRR_NAIVE:
        caps = [c for _, c in points]
        if any(b < a for a, b in zip(caps, caps[1:])):
            warnings.warn(
                f"capacity not nondecreasing in d for {kind.value}: {points}",
                stacklevel=2,
            )
    return CapacityCurve(kind=kind, threshold=threshold, points=points)


def _kind_tag(kind):
    return list(VsaKind).index(kind)


def query_response_distribution(
    d,
    n_values,
    trials=DEFAULT_TRIALS,
    seed=0,
    kind=VsaKind.HRR_PROJECTED,
    max_queries=256,
):
    """Dot-product responses x . (S (x) y^-1) for present and absent pairs.

    Present queries reuse pairs bound into the statement; absent queries use
    fresh pairs. The projected variant unbinds with the index-permutation
    inverse (exact for unitary keys); the naive variant unbinds with the
    exact spectral inverse, whose instability is the point of the
    comparison. Statistics pool individual responses across trials.
    """
    kind = VsaKind(kind)
    if kind not in (VsaKind.HRR_NAIVE, VsaKind.HRR_PROJECTED):
        raise ValueError("response distribution is defined for the HRR variants")
    out = []
    for n in n_values:
        if n < 1:
            raise ValueError(f"pair count must be >= 1, got {n}")
        present, absent = [], []
        q = min(int(n), max_queries)
        for trial in range(trials):
            base = mix64(seed, n, trial)
            xs = _sample_rows(kind, d, n, mix64(base, 0))
            ys = _sample_rows(kind, d, n, mix64(base, 1))
            s = _statement(kind, xs, ys)
            fresh = _sample_rows(kind, d, 2 * q, mix64(base, 2))
            present.append(np.sum(xs[:q] * vsa_unbind(kind, s, ys[:q]), axis=1))
            absent.append(np.sum(fresh[:q] * vsa_unbind(kind, s, fresh[q:]), axis=1))
        present = np.concatenate(present)
        absent = np.concatenate(absent)
        out.append(
            ResponseStats(
                n=int(n),
                mean_present=float(present.mean()),
                std_present=float(present.std()),
                mean_absent=float(absent.mean()),
                std_absent=float(absent.std()),
            )
        )
    return out
