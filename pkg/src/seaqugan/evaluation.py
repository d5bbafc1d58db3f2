"""Graph validity and edge-weight distribution metrics, plus the KDE baseline."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data_pipeline import EDGE_PAIRS
from .errors import DegenerateInputError

# tolerance relative to the graph's total weight; equals 1e-9 on normalized graphs
# and keeps the verdict invariant under rescaling of all six weights
TRI_EPS = 1e-9

# node triples of K4 and the positions of their three edges in canonical order
TRIPLES = ((0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3))
_EDGE_INDEX = {pair: k for k, pair in enumerate(EDGE_PAIRS)}
TRIPLE_EDGES = np.array(
    [[_EDGE_INDEX[(a, b)], _EDGE_INDEX[(a, c)], _EDGE_INDEX[(b, c)]] for a, b, c in TRIPLES]
)


@dataclass(frozen=True)
class TriangleReport:
    valid: bool
    first_violation: tuple[tuple[int, int, int], float] | None = None


def _triangle_checks(weights) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Edges ``(..., 4, 3)`` of each triple, the sums of the other two edges, and the tolerance."""
    weights = np.asarray(weights, dtype=float)
    tol = TRI_EPS * weights.sum(axis=-1)[..., None, None]
    w = weights[..., TRIPLE_EDGES]
    a, b, c = w[..., 0], w[..., 1], w[..., 2]
    others = np.stack([b + c, a + c, a + b], axis=-1)
    return w, others, tol


def triangle_slack(weights) -> np.ndarray:
    """Smallest ``(sum of other two) - edge`` per triple; shape ``(..., 4)``."""
    w, others, _ = _triangle_checks(weights)
    return (others - w).min(axis=-1)


def valid_mask(samples) -> np.ndarray:
    """True where every edge of every triple is at most the other two plus ``TRI_EPS * sum(w)``."""
    w, others, tol = _triangle_checks(samples)
    return np.all(w <= others + tol, axis=(-2, -1))


def triangle_valid(weights) -> TriangleReport:
    w, others, tol = _triangle_checks(weights)
    ok = np.all(w <= others + tol[..., 0], axis=-1)
    if ok.all():
        return TriangleReport(True)
    k = int(np.argmin(ok))
    return TriangleReport(False, (TRIPLES[k], float((others[k] - w[k]).min())))


def valid_fraction(samples) -> float:
    samples = np.asarray(samples, dtype=float).reshape(-1, 6)
    if len(samples) == 0:
        raise ValueError("valid_fraction of an empty sample set")
    return float(valid_mask(samples).mean())


def pooled_weight_std(samples) -> float:
    """Population std over every edge weight of every graph."""
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise ValueError("pooled_weight_std of an empty sample set")
    return float(samples.std())


@dataclass(frozen=True)
class KdeModel:
    support: np.ndarray
    bandwidth: float

    def density(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        u = (x[..., None] - self.support) / self.bandwidth
        return np.exp(-0.5 * u**2).sum(axis=-1) / (len(self.support) * self.bandwidth * np.sqrt(2 * np.pi))


def scott_bandwidth(values) -> float:
    values = np.asarray(values, dtype=float)
    return float(values.std(ddof=1) * len(values) ** (-1 / 5))


def kde_fit(samples) -> KdeModel:
    """Gaussian KDE over all pooled edge weights, Scott's-rule bandwidth."""
    support = np.asarray(samples, dtype=float).ravel()
    if support.size == 0:
        raise ValueError("kde_fit on an empty dataset")
    if support.size < 2 or np.ptp(support) == 0:
        raise DegenerateInputError("KDE support has zero variance")
    return KdeModel(support, scott_bandwidth(support))


def kde_sample_graph(model: KdeModel, rng: np.random.Generator, renormalize: bool = True) -> np.ndarray:
    """Six independent KDE draws, negatives clamped to zero, rescaled to sum one."""
    while True:
        picks = model.support[rng.integers(len(model.support), size=6)]
        draw = np.maximum(picks + model.bandwidth * rng.standard_normal(6), 0.0)
        total = draw.sum()
        if total > 0:
            return draw / total if renormalize else draw


def kde_sample_graphs(model: KdeModel, rng: np.random.Generator, n: int, renormalize: bool = True) -> np.ndarray:
    return np.array([kde_sample_graph(model, rng, renormalize) for _ in range(n)]).reshape(n, 6)


@dataclass(frozen=True)
class DensityHistogram:
    bin_edges: np.ndarray
    densities: np.ndarray


def histogram(samples, bins: int = 50, value_range: tuple[float, float] | None = None) -> DensityHistogram:
    if bins < 2:
        raise ValueError(f"bins must be >= 2, got {bins}")
    values = np.asarray(samples, dtype=float).ravel()
    if values.size == 0:
        raise ValueError("histogram of an empty sample set")
    if value_range is None:
        lo, hi = float(values.min()), float(values.max())
        if hi <= lo:
            lo, hi = lo - 0.5, lo + 0.5
        value_range = (lo, hi)
    density, edges = np.histogram(values, bins=bins, range=value_range, density=True)
    return DensityHistogram(edges, density)
