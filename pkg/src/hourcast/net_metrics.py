"""Network-structure comparisons between predicted and observed hourly graphs."""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from typing import Iterable, Mapping, NamedTuple

import numpy as np
from scipy import sparse

from .events import TemporalGraph


def influence_vector(graph: TemporalGraph, known_users: Iterable[str] | None = None) -> dict[str, int]:
    """Weight received by each parent (self-loops excluded), limited to ``known_users``."""
    known = None if known_users is None else set(known_users)
    out: Counter = Counter()
    for (child, parent), w in graph.edges.items():
        if child == parent:
            continue
        if known is None or parent in known:
            out[parent] += w
    return dict(out)


def weighted_jaccard(P: Mapping[str, float], A: Mapping[str, float]) -> float:
    """Ruzicka similarity: sum of minima over sum of maxima across the union of keys."""
    if any(v < 0 for v in P.values()) or any(v < 0 for v in A.values()):
        raise ValueError("weights must be non-negative")
    num = den = 0.0
    for key in set(P) | set(A):
        p, a = P.get(key, 0.0), A.get(key, 0.0)
        num += min(p, a)
        den += max(p, a)
    return 1.0 if den == 0 else num / den


class PageRankResult(NamedTuple):
    scores: dict[str, float]
    converged: bool
    iterations: int


def pagerank(graph: TemporalGraph, damping: float = 0.85, tol: float = 1e-9,
             max_iter: int = 200) -> PageRankResult:
    """Weighted PageRank with rank flowing child -> parent.

    Each node passes its score to its parents in proportion to edge weight;
    nodes without out-edges spread theirs uniformly. Iteration stops when the
    L1 change drops below ``tol``.
    """
    nodes = sorted(graph.nodes)
    n = len(nodes)
    if n == 0:
        raise ValueError("pagerank of an empty graph")
    index = {u: i for i, u in enumerate(nodes)}
    rows, cols, vals = [], [], []
    for (c, p), w in graph.edges.items():
        rows.append(index[c])
        cols.append(index[p])
        vals.append(float(w))
    W = sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))
    out = np.asarray(W.sum(axis=1)).ravel()
    dangling = out == 0
    inv = np.divide(1.0, out, out=np.zeros(n), where=~dangling)
    P = sparse.diags(inv) @ W

    x = np.full(n, 1.0 / n)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        new = damping * (P.T @ x + x[dangling].sum() / n) + (1.0 - damping) / n
        new /= new.sum()
        delta = np.abs(new - x).sum()
        x = new
        if delta < tol:
            converged = True
            break
    return PageRankResult({u: float(x[i]) for u, i in index.items()}, converged, it)


def emd_1d(P: Iterable[float], A: Iterable[float]) -> float:
    """1-Wasserstein distance between two empirical distributions on the line."""
    p = np.sort(np.asarray(list(P), dtype=float))
    a = np.sort(np.asarray(list(A), dtype=float))
    if p.size == 0 or a.size == 0:
        raise ValueError("emd_1d needs two non-empty samples")
    grid = np.concatenate([p, a])
    grid.sort(kind="mergesort")
    widths = np.diff(grid)
    cdf_p = np.searchsorted(p, grid[:-1], side="right") / p.size
    cdf_a = np.searchsorted(a, grid[:-1], side="right") / a.size
    return float(np.sum(np.abs(cdf_p - cdf_a) * widths))


def unweighted_indegree(graph: TemporalGraph) -> dict[str, int]:
    parents: dict[str, set] = defaultdict(set)
    for child, parent in graph.edges:
        if child != parent:
            parents[parent].add(child)
    return {u: len(parents.get(u, ())) for u in graph.nodes}


def ccdh(graph: TemporalGraph) -> dict[int, int]:
    """h(d) = number of nodes with unweighted in-degree >= d, for d = 1 .. max."""
    degrees = np.array(list(unweighted_indegree(graph).values()), dtype=np.int64)
    if degrees.size == 0 or degrees.max() == 0:
        return {}
    counts = np.bincount(degrees)
    tail = np.cumsum(counts[::-1])[::-1]
    return {d: int(tail[d]) for d in range(1, len(counts))}


def _as_array(H: Mapping[int, float]) -> np.ndarray:
    """Dense values for degrees 1..max (index 0 unused). Missing degrees take the
    value of the next larger listed degree, i.e. the step function's level."""
    if not H:
        raise ValueError("empty histogram")
    top = max(H)
    out = np.zeros(top + 2)
    level = 0.0
    for d in range(top, 0, -1):
        level = H.get(d, level)
        out[d] = level
    return out


def _close(eps: float, src: np.ndarray, tgt: np.ndarray) -> bool:
    """Every positive level of ``src`` has a target degree within relative
    distance ``eps`` whose level is within relative ``eps`` of it."""
    slack = 1e-12
    kmax = len(tgt) - 1  # tgt[kmax] == 0 covers every degree beyond the support
    for d in range(1, len(src) - 1):
        h = src[d]
        if h <= 0:
            continue
        lo = max(1, math.ceil(d * (1 - eps) - slack))
        hi = min(kmax, math.floor(d * (1 + eps) + slack))
        lo = min(lo, kmax)  # every degree past the support sits at level 0
        if np.min(np.abs(tgt[lo:hi + 1] - h)) > eps * h + slack:
            return False
    return True


def relative_hausdorff(H1: Mapping[int, float], H2: Mapping[int, float], tol: float = 1e-6) -> float:
    """Smallest eps making each histogram eps-close to the other (bisection)."""
    a, b = _as_array(H1), _as_array(H2)

    def feasible(eps):
        return _close(eps, a, b) and _close(eps, b, a)

    if feasible(0.0):
        return 0.0
    lo, hi = 0.0, 1.0
    while not feasible(hi):
        lo, hi = hi, hi * 2
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    return hi
