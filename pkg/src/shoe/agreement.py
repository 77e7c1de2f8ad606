"""Inter-annotator and metric-vs-human agreement statistics on the 0-4
rating scale, plus per-category tuning of the arithmetic aggregator weight.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import stats

SCALE_MAX = 4
K_LEVELS = 5


class AgreementError(ValueError):
    pass


@dataclass(frozen=True)
class RatingRecord:
    item_id: str
    annotator: str
    rating: int

    def __post_init__(self) -> None:
        if not isinstance(self.rating, (int, np.integer)) or not 0 <= self.rating <= SCALE_MAX:
            raise AgreementError(f"rating {self.rating!r} for {self.item_id}/{self.annotator} not in 0..4")


@dataclass(frozen=True)
class TuningSample:
    item_id: str
    category: int
    v: float
    o: float
    y: float

    def __post_init__(self) -> None:
        if self.category not in (1, 2, 3):
            raise AgreementError(f"category must be 1, 2 or 3, got {self.category}")
        for name in ("v", "o", "y"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise AgreementError(f"{name} outside [0, 1] for item {self.item_id}")


def rating_table(records: Iterable[RatingRecord]) -> dict[str, dict[str, int]]:
    """annotator -> item -> rating; duplicate (item, annotator) is an error."""
    out: dict[str, dict[str, int]] = defaultdict(dict)
    for r in records:
        if r.item_id in out[r.annotator]:
            raise AgreementError(f"duplicate rating for item {r.item_id} by {r.annotator}")
        out[r.annotator][r.item_id] = int(r.rating)
    return dict(out)


# -- pairwise agreement --------------------------------------------------

def pair_agreement(a: float, b: float) -> float:
    for v in (a, b):
        if not 0 <= v <= SCALE_MAX:
            raise AgreementError(f"rating {v} outside 0..{SCALE_MAX}")
    return 1.0 - abs(a - b) / SCALE_MAX


def mean_pairwise_agreement(records: Iterable[RatingRecord]) -> float:
    """Percent agreement averaged over annotator pairs; pairs that share no
    item are skipped."""
    table = rating_table(records)
    if len(table) < 2:
        raise AgreementError("need at least two annotators")
    per_pair = []
    for a, b in combinations(sorted(table), 2):
        shared = sorted(set(table[a]) & set(table[b]))
        if shared:
            per_pair.append(sum(pair_agreement(table[a][i], table[b][i]) for i in shared) / len(shared))
    if not per_pair:
        raise AgreementError("no annotator pair shares an item")
    return 100.0 * sum(per_pair) / len(per_pair)


def metric_agreement(metric_scores: Mapping[str, float], human_means: Mapping[str, float]) -> float:
    """Percent agreement of a [0,1] metric (rescaled x4) with mean human
    ratings on the 0-4 scale."""
    items = sorted(set(metric_scores) & set(human_means))
    if not items:
        raise AgreementError("metric scores and human ratings share no item")
    return 100.0 * sum(pair_agreement(4.0 * metric_scores[i], human_means[i]) for i in items) / len(items)


def human_means(records: Iterable[RatingRecord]) -> dict[str, float]:
    acc: dict[str, list[int]] = defaultdict(list)
    for r in records:
        acc[r.item_id].append(r.rating)
    return {k: sum(v) / len(v) for k, v in sorted(acc.items())}


# -- correlation ----------------------------------------------------------

def pearson_r(x: Sequence[float], y: Sequence[float]) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.size < 2:
        raise AgreementError("pearson needs two equal-length samples of size >= 2")
    dx, dy = x - x.mean(), y - y.mean()
    den = math.sqrt(float((dx * dx).sum()) * float((dy * dy).sum()))
    if den == 0.0:
        raise AgreementError("zero variance")
    return float(np.clip((dx * dy).sum() / den, -1.0, 1.0))


def spearman_rho(x: Sequence[float], y: Sequence[float]) -> float:
    if len(x) < 3 or len(x) != len(y):
        raise AgreementError("spearman needs two equal-length samples of size >= 3")
    try:
        return pearson_r(stats.rankdata(x), stats.rankdata(y))
    except AgreementError:
        raise AgreementError("zero rank variance") from None


def spearman_fisher_ci(rho: float, n: int, level: float = 0.95) -> tuple[float, float]:
    if not -1.0 < rho < 1.0 or n <= 3 or not 0.0 < level < 1.0:
        raise AgreementError(f"Fisher interval undefined for rho={rho}, n={n}, level={level}")
    z = math.atanh(rho)
    half = stats.norm.ppf(0.5 + level / 2.0) / math.sqrt(n - 3)
    return math.tanh(z - half), math.tanh(z + half)


def permutation_test(x: Sequence[float], y: Sequence[float], trials: int = 10_000, seed: int = 0) -> float:
    """Two-sided p-value for Spearman rho by shuffling ``y``; add-one
    smoothed so it is never zero."""
    if trials < 1:
        raise AgreementError("trials must be >= 1")
    observed = abs(spearman_rho(x, y))
    rx = stats.rankdata(x)
    ry = stats.rankdata(y)
    rx = (rx - rx.mean()) / np.linalg.norm(rx - rx.mean())
    ry = ry - ry.mean()
    ry = ry / np.linalg.norm(ry)
    hits = 0
    # fixed batches, each with its own child seed: results depend only on seed
    batch = 2048
    children = np.random.SeedSequence(seed).spawn(math.ceil(trials / batch))
    done = 0
    for child in children:
        m = min(batch, trials - done)
        rng = np.random.default_rng(child)
        perms = rng.permuted(np.tile(ry, (m, 1)), axis=1)
        rhos = np.abs(perms @ rx)
        hits += int((rhos >= observed - 1e-12).sum())
        done += m
    return (hits + 1) / (trials + 1)


# -- reliability ------------------------------------------------------------

def rating_se(records: Iterable[RatingRecord], k: "int | None" = None) -> tuple[float, float]:
    """Pooled within-item standard deviation and the standard error of a
    k-rater mean (k defaults to the most common raters-per-item count)."""
    per_item: dict[str, list[int]] = defaultdict(list)
    for r in records:
        per_item[r.item_id].append(r.rating)
    multi = [v for v in per_item.values() if len(v) >= 2]
    if not multi:
        raise AgreementError("standard error needs items with at least two ratings")
    ss = sum(float(np.sum((np.asarray(v) - np.mean(v)) ** 2)) for v in multi)
    dof = sum(len(v) - 1 for v in multi)
    sigma = math.sqrt(ss / dof)
    if k is None:
        k = Counter(len(v) for v in multi).most_common(1)[0][0]
    return sigma, sigma / math.sqrt(k)


def qwk_weights(k: int = K_LEVELS) -> np.ndarray:
    i, j = np.indices((k, k))
    return (i - j) ** 2 / (k - 1) ** 2


def qwk(a: Sequence[int], b: Sequence[int], k: int = K_LEVELS) -> float:
    a = np.asarray(a, dtype=int)
    b = np.asarray(b, dtype=int)
    if a.shape != b.shape or a.size == 0:
        raise AgreementError("qwk needs two equal-length non-empty rating lists")
    if a.min() < 0 or b.min() < 0 or a.max() >= k or b.max() >= k:
        raise AgreementError(f"ratings must lie in 0..{k - 1}")
    observed = np.zeros((k, k))
    np.add.at(observed, (a, b), 1)
    expected = np.outer(observed.sum(axis=1), observed.sum(axis=0)) / observed.sum()
    w = qwk_weights(k)
    den = float((w * expected).sum())
    if den == 0.0:
        raise AgreementError("zero expected disagreement")
    return 1.0 - float((w * observed).sum()) / den


def krippendorff_alpha(records: Iterable[RatingRecord], k: int = K_LEVELS) -> float:
    """alpha = 1 - D_o/D_e with difference ((c - c') / (k - 1))^2.

    Uses the coincidence-matrix weighting, so items with more ratings are
    not over-counted and missing values are handled; items with fewer than
    two ratings carry no pairable values and are dropped.
    """
    per_item: dict[str, list[int]] = defaultdict(list)
    for r in records:
        per_item[r.item_id].append(r.rating)
    units = [v for v in per_item.values() if len(v) >= 2]
    if not units:
        raise AgreementError("no item has two or more ratings")
    coinc = np.zeros((k, k))
    for vals in units:
        counts = np.bincount(vals, minlength=k).astype(float)
        coinc += (np.outer(counts, counts) - np.diag(counts)) / (len(vals) - 1)
    n_c = coinc.sum(axis=1)
    n = n_c.sum()
    diff = qwk_weights(k)
    d_o = float((coinc * diff).sum()) / n
    d_e = float((np.outer(n_c, n_c) * diff).sum() - (n_c * np.diag(diff)).sum()) / (n * (n - 1))
    if d_e == 0.0:
        raise AgreementError("zero expected disagreement")
    return 1.0 - d_o / d_e


# -- matrices over annotators ---------------------------------------------

def annotator_matrix(records: Iterable[RatingRecord], statistic: str) -> tuple[list[str], np.ndarray]:
    """Square matrix of spearman / pearson / qwk between annotators over
    their shared items; NaN where undefined."""
    fn = {"spearman": spearman_rho, "pearson": pearson_r, "qwk": qwk}[statistic]
    table = rating_table(records)
    names = sorted(table)
    m = np.full((len(names), len(names)), np.nan)
    for i, a in enumerate(names):
        m[i, i] = 1.0
        for j in range(i + 1, len(names)):
            b = names[j]
            shared = sorted(set(table[a]) & set(table[b]))
            try:
                v = fn([table[a][s] for s in shared], [table[b][s] for s in shared])
            except AgreementError:
                v = np.nan
            m[i, j] = m[j, i] = v
    return names, m


# -- weight tuning --------------------------------------------------------

@dataclass
class WeightFit:
    category: int
    n: int
    grid: np.ndarray
    mae: np.ndarray
    w_grid: float
    mae_grid: float
    w_exact: float
    mae_exact: float
    exact_minimizers: list[float] = field(default_factory=list)


def _mae(w: np.ndarray, v: np.ndarray, o: np.ndarray, y: np.ndarray) -> np.ndarray:
    w = np.atleast_1d(w)[:, None]
    return np.abs(w * v + (1.0 - w) * o - y).mean(axis=1)


def tune_weight(
    samples: Iterable[TuningSample],
    grid_step: float = 0.001,
    categories: Sequence[int] = (1, 2, 3),
) -> dict[int, WeightFit]:
    """Per-category MAE-minimizing w on a grid over [0, 1], alongside the
    exact minimum found by evaluating every breakpoint of the piecewise
    linear MAE curve."""
    if not 0.0 < grid_step <= 1.0:
        raise AgreementError("grid_step must be in (0, 1]")
    by_cat: dict[int, list[TuningSample]] = defaultdict(list)
    for s in samples:
        by_cat[s.category].append(s)
    n_steps = int(round(1.0 / grid_step))
    grid = np.linspace(0.0, 1.0, n_steps + 1)
    out: dict[int, WeightFit] = {}
    for c in categories:
        ss = by_cat.get(c)
        if not ss:
            raise AgreementError(f"category {c} has no samples")
        v = np.array([s.v for s in ss])
        o = np.array([s.o for s in ss])
        y = np.array([s.y for s in ss])
        mae = _mae(grid, v, o, y)
        gi = int(np.argmin(mae))  # first index: smallest w on ties
        slope = v - o
        nz = slope != 0
        bps = np.clip((y[nz] - o[nz]) / slope[nz], 0.0, 1.0)
        cands = np.unique(np.concatenate([bps, [0.0, 1.0]]))
        cmae = _mae(cands, v, o, y)
        best = float(cmae.min())
        mins = [float(w) for w, m in zip(cands, cmae) if m <= best + 1e-12]
        out[c] = WeightFit(c, len(ss), grid, mae, float(grid[gi]), float(mae[gi]), mins[0], best, mins)
    return out
