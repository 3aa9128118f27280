"""Graph artifacts from fitted node models.

Adjacency extraction and thresholding, correlation/distance matrices,
agglomerative clustering with an explicit merge tree, symmetrization, and
SVD-embedding blockmodelling of directed graphs (recursively for nested
blocks).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


# ---------------------------------------------------------------------------
# Adjacency
# ---------------------------------------------------------------------------

@dataclass
class Adjacency:
    """Weighted directed graph; entry (i, j) is the effect of series j on
    node i. Exogenous effects live in a parallel rectangular matrix."""

    weights: np.ndarray
    labels: tuple[str, ...]
    directed: bool = True
    exo_weights: np.ndarray | None = None
    exo_labels: tuple[str, ...] = ()

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if not np.all(np.isfinite(self.weights)):
            raise ValidationError("adjacency weights must be finite")


def aggregate_lags(row: np.ndarray, lag_agg: str) -> float:
    if lag_agg == "sum":
        return float(np.sum(row))
    if lag_agg == "max_abs":
        return float(row[np.argmax(np.abs(row))])
    if lag_agg == "first_lag":
        return float(row[0])
    raise ValidationError(f"unknown lag_agg {lag_agg!r}")


def extract_adjacency(models, lag_agg: str = "sum") -> Adjacency:
    """Per-lag node coefficients aggregated into one weight per edge.

    Requires one fitted model per node; every model's feature names must be
    drawn from the common node vocabulary (the model targets).
    """
    labels = tuple(m.target for m in models)
    exo: list[str] = []
    for m in models:
        unknown = set(m.layout.y_names) - set(labels)
        if unknown:
            raise ValidationError(
                f"model {m.target!r} references nodes outside the vocabulary: "
                f"{sorted(unknown)}")
        for n in m.layout.x_names:
            if n not in exo:
                exo.append(n)
    n = len(labels)
    W = np.zeros((n, n))
    E = np.zeros((n, len(exo)))
    for i, m in enumerate(models):
        blocks = m.blocks
        for row, name in zip(blocks["alpha"], m.layout.y_names):
            W[i, labels.index(name)] = aggregate_lags(row, lag_agg)
        for row, name in zip(blocks["beta"], m.layout.x_names):
            E[i, exo.index(name)] = aggregate_lags(row, lag_agg)
    return Adjacency(W, labels, exo_weights=E, exo_labels=tuple(exo))


def threshold_graph(adj: Adjacency, c: float) -> Adjacency:
    """Zero out entries with |w| <= c; signs of survivors are kept."""
    if c < 0:
        raise ValidationError("threshold must be nonnegative")
    w = np.where(np.abs(adj.weights) > c, adj.weights, 0.0)
    exo = None
    if adj.exo_weights is not None:
        exo = np.where(np.abs(adj.exo_weights) > c, adj.exo_weights, 0.0)
    return Adjacency(w, adj.labels, adj.directed, exo, adj.exo_labels)


def symmetrize(adj) -> np.ndarray:
    """A + A'."""
    w = adj.weights if isinstance(adj, Adjacency) else np.asarray(adj, dtype=float)
    return w + w.T


# ---------------------------------------------------------------------------
# Correlation / distance
# ---------------------------------------------------------------------------

def abnormality_correlation(series: np.ndarray) -> np.ndarray:
    """Pearson correlation of indicator series (rows). Zero-variance series
    get zero off-diagonal correlation (with a warning) instead of NaN."""
    s = np.asarray(series, dtype=float)
    n = s.shape[0]
    sd = s.std(axis=1)
    degenerate = sd < 1e-12
    if np.any(degenerate):
        warnings.warn(f"{int(np.sum(degenerate))} zero-variance series; "
                      "their correlations are set to 0")
    corr = np.zeros((n, n))
    centered = s - s.mean(axis=1, keepdims=True)
    denom = np.outer(sd, sd) * s.shape[1]
    cov = centered @ centered.T
    ok = ~(degenerate[:, None] | degenerate[None, :])
    corr[ok] = (cov[ok] / denom[ok])
    np.fill_diagonal(corr, 1.0)
    return np.clip(corr, -1.0, 1.0)


def correlation_to_distance(corr: np.ndarray, far_constant: float = 1e3) -> np.ndarray:
    """Element-wise reciprocal for positive correlations; non-positive pairs
    are pushed to ``far_constant``. Diagonal is zero."""
    if far_constant <= 0:
        raise ValidationError("far_constant must be positive")
    corr = np.asarray(corr, dtype=float)
    with np.errstate(divide="ignore"):
        dist = np.where(corr > 0.0, 1.0 / np.where(corr > 0.0, corr, 1.0),
                        far_constant)
    np.fill_diagonal(dist, 0.0)
    return dist


# ---------------------------------------------------------------------------
# Agglomerative clustering
# ---------------------------------------------------------------------------

@dataclass
class Dendrogram:
    """Merge tree in the usual linkage-matrix layout: each row is
    (cluster_a, cluster_b, height, new_size) and merge k creates cluster
    id n + k."""

    merges: np.ndarray
    n_leaves: int
    labels: tuple[str, ...] = ()

    def heights(self) -> np.ndarray:
        return self.merges[:, 2].copy()

    def cut(self, k: int) -> np.ndarray:
        """Flat assignment into k clusters (ids 0..k-1 by first member)."""
        if not 1 <= k <= self.n_leaves:
            raise ValidationError("k out of range")
        parent = list(range(self.n_leaves + len(self.merges)))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for step in range(self.n_leaves - k):
            a, b = int(self.merges[step, 0]), int(self.merges[step, 1])
            new = self.n_leaves + step
            parent[find(a)] = new
            parent[find(b)] = new
        roots: dict[int, int] = {}
        out = np.empty(self.n_leaves, dtype=int)
        for i in range(self.n_leaves):
            r = find(i)
            if r not in roots:
                roots[r] = len(roots)
            out[i] = roots[r]
        return out


def hierarchical_cluster(distance: np.ndarray, linkage: str = "average",
                         labels=()) -> Dendrogram:
    """Naive agglomerative merge tree over a symmetric distance matrix.

    Ties break on the lexicographically smallest active pair, so the tree is
    deterministic.
    """
    D = np.asarray(distance, dtype=float).copy()
    n = D.shape[0]
    if D.shape != (n, n) or not np.allclose(D, D.T, atol=1e-12):
        raise ValidationError("distance matrix must be square and symmetric")
    if np.any(np.diag(D) != 0.0) or np.any(D < 0.0):
        raise ValidationError("distances must be nonnegative with zero diagonal")
    if linkage not in ("average", "complete", "single"):
        raise ValidationError(f"unknown linkage {linkage!r}")
    ids = list(range(n))          # current cluster id per active slot
    sizes = [1] * n
    active = list(range(n))       # active slot indices into D
    merges = np.zeros((max(n - 1, 0), 4))
    for step in range(n - 1):
        best = None
        for ai in range(len(active)):
            for bi in range(ai + 1, len(active)):
                i, j = active[ai], active[bi]
                d = D[i, j]
                if best is None or d < best[0] - 1e-15:
                    best = (d, ai, bi)
        d, ai, bi = best
        i, j = active[ai], active[bi]
        id_a, id_b = sorted((ids[i], ids[j]))
        new_size = sizes[i] + sizes[j]
        merges[step] = (id_a, id_b, d, new_size)
        for slot in active:
            if slot in (i, j):
                continue
            if linkage == "single":
                merged = min(D[i, slot], D[j, slot])
            elif linkage == "complete":
                merged = max(D[i, slot], D[j, slot])
            else:
                merged = (sizes[i] * D[i, slot] + sizes[j] * D[j, slot]) / new_size
            D[i, slot] = D[slot, i] = merged
        sizes[i] = new_size
        ids[i] = n + step
        active.pop(bi)
    return Dendrogram(merges, n, tuple(labels))


# ---------------------------------------------------------------------------
# Spectral blockmodelling
# ---------------------------------------------------------------------------

def kmeans(X: np.ndarray, K: int, seed: int = 0, restarts: int = 20,
           max_iter: int = 300):
    """Deterministic k-means: ++ seeding from a fixed generator, Lloyd
    updates, best inertia over restarts. Returns (assignment, inertia)."""
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if not 1 <= K <= n:
        raise ValidationError("K out of range")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(restarts):
        centers = _kmeanspp(X, K, rng)
        assign = None
        for _it in range(max_iter):
            d2 = np.sum((X[:, None, :] - centers[None, :, :]) ** 2, axis=2)
            new_assign = np.argmin(d2, axis=1)
            for k in range(K):
                if not np.any(new_assign == k):
                    far = int(np.argmax(np.min(d2, axis=1)))
                    new_assign[far] = k
            if assign is not None and np.array_equal(new_assign, assign):
                break
            assign = new_assign
            for k in range(K):
                centers[k] = X[assign == k].mean(axis=0)
        inertia = float(np.sum((X - centers[assign]) ** 2))
        if best is None or inertia < best[1]:
            best = (assign.copy(), inertia)
    return best


def _kmeanspp(X, K, rng):
    n = X.shape[0]
    centers = np.empty((K, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for k in range(1, K):
        total = d2.sum()
        if total <= 0:
            centers[k] = X[rng.integers(n)]
            continue
        probs = d2 / total
        centers[k] = X[rng.choice(n, p=probs)]
        d2 = np.minimum(d2, np.sum((X - centers[k]) ** 2, axis=1))
    return centers


@dataclass
class BlockClustering:
    """Partition of the node set into blocks, with the SVD diagnostics used
    to pick the embedding dimension; isolated nodes carry block id -1."""

    assignment: np.ndarray
    labels: tuple[str, ...]
    K: int
    d: int
    explained_variance_ratio: float
    children: dict[int, "BlockClustering"] | None = None

    def block_members(self) -> dict[int, list[str]]:
        out: dict[int, list[str]] = {}
        for lbl, b in zip(self.labels, self.assignment):
            out.setdefault(int(b), []).append(lbl)
        return out

    def leaf_labels(self) -> dict[str, str]:
        """Nested path names: top-level blocks A, B, ...; children A1, A2..."""
        out: dict[str, str] = {}
        letters = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"
        for lbl, b in zip(self.labels, self.assignment):
            b = int(b)
            if b < 0:
                out[lbl] = "NA"
                continue
            prefix = letters[b % len(letters)]
            child = self.children.get(b) if self.children else None
            if child is None:
                out[lbl] = prefix
            else:
                sub = child.leaf_labels()[lbl]
                out[lbl] = prefix if sub == "NA" else prefix + _as_number(sub)
        return out


def _as_number(label: str) -> str:
    """Child letters become 1-based digits: A->1, B2->2... keeps depth-2 names
    in the familiar A1/B3 style."""
    letters = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"
    head = label[0]
    rest = label[1:]
    return str(letters.index(head) + 1) + rest


def spectral_embedding(W: np.ndarray, d: int):
    """Concatenated scaled singular-vector embedding [U S^1/2 | V S^1/2]."""
    U, S, Vt = np.linalg.svd(W)
    root = np.sqrt(S[:d])
    return np.hstack([U[:, :d] * root, Vt[:d].T * root])


def choose_spectral_dim(singular_values: np.ndarray, ratio: float = 0.95) -> int:
    """Smallest d whose cumulative squared-singular-value share >= ratio."""
    sq = singular_values ** 2
    total = sq.sum()
    if total <= 0:
        return 1
    cum = np.cumsum(sq) / total
    return int(np.searchsorted(cum, ratio - 1e-12) + 1)


def spectral_blockmodel(W: np.ndarray, K: int, d=None, seed: int = 0,
                        labels=None, variance_ratio: float = 0.95) -> BlockClustering:
    """SVD embedding + k-means blockmodelling of a binary directed graph.

    d=None picks the smallest dimension explaining >= ``variance_ratio`` of
    the squared singular value mass. Nodes isolated in both directions are
    reported unassigned (-1) rather than forced into blocks.
    """
    W = np.asarray(W, dtype=float)
    n = W.shape[0]
    if W.shape != (n, n):
        raise ValidationError("adjacency must be square")
    if not np.all(np.isin(W, (0.0, 1.0))):
        raise ValidationError("adjacency must be binary (threshold upstream)")
    if labels is None:
        labels = tuple(f"n{i}" for i in range(n))
    if K > n:
        raise ValidationError(f"K={K} exceeds node count {n}")
    if not np.any(W):
        warnings.warn("zero adjacency: all nodes in one block")
        return BlockClustering(np.zeros(n, dtype=int), tuple(labels), 1, 1, 1.0)
    S = np.linalg.svd(W, compute_uv=False)
    if d is None:
        d = choose_spectral_dim(S, variance_ratio)
    if not 1 <= d <= n:
        raise ValidationError("spectral dimension d out of range")
    Z = spectral_embedding(W, d)
    isolated = (np.abs(W).sum(axis=0) + np.abs(W).sum(axis=1)) == 0
    assignment = np.full(n, -1, dtype=int)
    idx = np.flatnonzero(~isolated)
    k_eff = min(K, idx.size)
    if idx.size:
        sub_assign, _ = kmeans(Z[idx], k_eff, seed=seed)
        assignment[idx] = sub_assign
    sq = S ** 2
    evr = float(np.cumsum(sq)[d - 1] / sq.sum())
    return BlockClustering(assignment, tuple(labels), k_eff, int(d), evr)


def hierarchical_blockmodel(W: np.ndarray, K: int = 2, max_depth: int = 2,
                            min_block_size: int = 4, seed: int = 0,
                            labels=None, d=None) -> BlockClustering:
    """Recursive blockmodelling: each block of size >= min_block_size is
    re-blocked on its induced subgraph until max_depth."""
    top = spectral_blockmodel(W, K, d=d, seed=seed, labels=labels)
    if max_depth <= 1:
        return top
    children: dict[int, BlockClustering] = {}
    members = top.block_members()
    label_index = {lbl: i for i, lbl in enumerate(top.labels)}
    for b, names in members.items():
        if b < 0 or len(names) < min_block_size:
            continue
        idx = np.array([label_index[nm] for nm in names])
        sub = W[np.ix_(idx, idx)]
        if not np.any(sub):
            continue
        children[b] = hierarchical_blockmodel(
            sub, K=K, max_depth=max_depth - 1, min_block_size=min_block_size,
            seed=seed + 1 + b, labels=tuple(names), d=d)
    return BlockClustering(top.assignment, top.labels, top.K, top.d,
                           top.explained_variance_ratio, children or None)


def adjusted_rand_index(a, b) -> float:
    """Chance-corrected partition agreement."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValidationError("label vectors must have equal length")
    ua, ia = np.unique(a, return_inverse=True)
    ub, ib = np.unique(b, return_inverse=True)
    table = np.zeros((ua.size, ub.size), dtype=np.int64)
    for x, y in zip(ia, ib):
        table[x, y] += 1

    def comb2(v):
        return v * (v - 1) // 2

    sum_ij = comb2(table).sum()
    sum_a = comb2(table.sum(axis=1)).sum()
    sum_b = comb2(table.sum(axis=0)).sum()
    total = comb2(a.size)
    expected = sum_a * sum_b / total if total else 0.0
    max_index = 0.5 * (sum_a + sum_b)
    if max_index == expected:
        return 1.0
    return float((sum_ij - expected) / (max_index - expected))
