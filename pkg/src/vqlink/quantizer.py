"""Multi-head octonary residual vector quantization.

Each grid cell of a feature tensor holds an n_q-dimensional vector. The
vector is split into P contiguous head chunks and each chunk is matched
against its own 8-entry head codebook, so one cell maps to P octonary
indices and the joint state space has 8**P combinations. Residual levels
repeat the scheme on what the previous level left over; decoding sums the
selected entries over all levels.

All math runs in float64 and every argmin breaks ties toward the lowest
index, so encode/decode are deterministic and safe to compare bitwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "OCTONARY",
    "Codebook",
    "MultiHeadCodebook",
    "MultiLevelCodebook",
    "FitConfig",
    "quantize_head",
    "moc_quantize",
    "rvq_encode",
    "rvq_decode",
    "requantize",
    "fit",
    "residual_energies",
]

OCTONARY = 8


def _frozen_f64(a, name: str) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} must be finite")
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Codebook:
    """Ordered candidate vectors of one quantizer head, shape (n, dim)."""

    entries: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=np.float64)
        if e.ndim != 2 or e.shape[0] < 1 or e.shape[1] < 1:
            raise ValueError(f"codebook entries must form a (n, dim) matrix, got shape {e.shape}")
        object.__setattr__(self, "entries", _frozen_f64(e, "codebook entries"))

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def dim(self) -> int:
        return self.entries.shape[1]


@dataclass(frozen=True)
class MultiHeadCodebook:
    """P head codebooks jointly covering n_q = P * head_dim channels."""

    heads: tuple[Codebook, ...]

    def __post_init__(self):
        heads = tuple(self.heads)
        if not heads:
            raise ValueError("need at least one head")
        n, dim = heads[0].n, heads[0].dim
        for h in heads:
            if h.n != n or h.dim != dim:
                raise ValueError("all heads must share entry count and dimension")
        object.__setattr__(self, "heads", heads)

    @property
    def p(self) -> int:
        return len(self.heads)

    @property
    def n(self) -> int:
        return self.heads[0].n

    @property
    def head_dim(self) -> int:
        return self.heads[0].dim

    @property
    def n_q(self) -> int:
        return self.p * self.head_dim

    def state_count(self) -> int:
        """Size of the joint per-cell state space, n**P."""
        return self.n ** self.p


@dataclass(frozen=True)
class MultiLevelCodebook:
    """D residual quantization levels, each a MultiHeadCodebook."""

    levels: tuple[MultiHeadCodebook, ...]

    def __post_init__(self):
        levels = tuple(self.levels)
        if not levels:
            raise ValueError("need at least one level")
        first = levels[0]
        for lv in levels:
            if (lv.p, lv.n, lv.n_q) != (first.p, first.n, first.n_q):
                raise ValueError("all levels must share (P, N, n_q)")
        object.__setattr__(self, "levels", levels)

    @property
    def depth(self) -> int:
        return len(self.levels)

    @property
    def p(self) -> int:
        return self.levels[0].p

    @property
    def n(self) -> int:
        return self.levels[0].n

    @property
    def n_q(self) -> int:
        return self.levels[0].n_q

    @property
    def head_dim(self) -> int:
        return self.levels[0].head_dim

    @classmethod
    def from_array(cls, arr) -> "MultiLevelCodebook":
        """Build from a (D, P, N, head_dim) array of entries."""
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim != 4:
            raise ValueError(f"expected a (D, P, N, head_dim) array, got shape {arr.shape}")
        return cls(tuple(
            MultiHeadCodebook(tuple(Codebook(arr[d, p]) for p in range(arr.shape[1])))
            for d in range(arr.shape[0])
        ))

    def to_array(self) -> np.ndarray:
        """Entries as a (D, P, N, head_dim) array."""
        return np.stack([
            np.stack([h.entries for h in lv.heads]) for lv in self.levels
        ])


@dataclass(frozen=True)
class FitConfig:
    """Settings for codebook fitting (per-head, per-level k-means)."""

    max_iterations: int = 100
    convergence_tol: float = 1e-8
    seed: int = 0
    empty_cluster_policy: str = "reassign_farthest"

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.convergence_tol < 0:
            raise ValueError("convergence_tol must be >= 0")
        if self.empty_cluster_policy != "reassign_farthest":
            raise ValueError(f"unknown empty_cluster_policy {self.empty_cluster_policy!r}")


def _check_grid(z, n_q: int | None = None) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 3 or z.shape[0] < 1 or z.shape[1] < 1:
        raise ValueError(f"feature grid must have shape (h, w, n_q), got {z.shape}")
    if n_q is not None and z.shape[2] != n_q:
        raise ValueError(f"feature grid has {z.shape[2]} channels, codebook expects {n_q}")
    if not np.all(np.isfinite(z)):
        raise ValueError("feature grid must be finite")
    return z


def _nearest(x: np.ndarray, entries: np.ndarray):
    """Row-wise nearest entry by squared distance; first index wins ties."""
    d2 = ((x[:, None, :] - entries[None, :, :]) ** 2).sum(axis=2)
    idx = d2.argmin(axis=1)
    return idx, entries[idx]


def quantize_head(r, cb: Codebook):
    """Quantize one head vector: returns (index, selected entry)."""
    r = np.asarray(r, dtype=np.float64)
    if r.ndim != 1 or r.shape[0] != cb.dim:
        raise ValueError(f"vector of dimension {r.shape} does not match codebook dim {cb.dim}")
    if not np.all(np.isfinite(r)):
        raise ValueError("input vector must be finite")
    idx, q = _nearest(r[None, :], cb.entries)
    return int(idx[0]), q[0].copy()


def _moc_quantize_flat(x: np.ndarray, moc: MultiHeadCodebook):
    """Per-head nearest-neighbour on a (num_vectors, n_q) matrix."""
    m = moc.head_dim
    idx = np.empty((moc.p, x.shape[0]), dtype=np.int64)
    q = np.empty_like(x)
    for p, head in enumerate(moc.heads):
        sl = slice(p * m, (p + 1) * m)
        idx[p], q[:, sl] = _nearest(x[:, sl], head.entries)
    return idx, q


def moc_quantize(r, moc: MultiHeadCodebook):
    """Quantize a feature grid with one multi-head level.

    Splits each cell vector into P contiguous chunks of n_q/P channels
    (head i owns channels [i*n_q/P, (i+1)*n_q/P)), quantizes each chunk
    against its head codebook and concatenates the picks. Because squared
    distance decomposes across heads this equals a joint nearest-neighbour
    search over the n**P product codebook.

    Returns (indices of shape (P, h, w), quantized grid of shape (h, w, n_q)).
    """
    r = _check_grid(r, moc.n_q)
    h, w, n_q = r.shape
    idx, q = _moc_quantize_flat(r.reshape(-1, n_q), moc)
    return idx.reshape(moc.p, h, w), q.reshape(h, w, n_q)


def rvq_encode(z, mlc: MultiLevelCodebook, levels: int | None = None, *, return_residual: bool = False):
    """Greedy residual encoding: returns octonary indices of shape (L, P, h, w).

    Level d quantizes the residual left by levels 1..d-1 and subtracts its
    pick, so z == rvq_decode(indices) + final residual exactly up to
    float round-off. Pass return_residual=True to also get that residual.
    """
    L = mlc.depth if levels is None else int(levels)
    if not 1 <= L <= mlc.depth:
        raise ValueError(f"levels must be in [1, {mlc.depth}], got {levels}")
    z = _check_grid(z, mlc.n_q)
    h, w, _ = z.shape
    r = z.copy()
    out = np.empty((L, mlc.p, h, w), dtype=np.int64)
    for d in range(L):
        idx, q = moc_quantize(r, mlc.levels[d])
        out[d] = idx
        r -= q
    if return_residual:
        return out, r
    return out


def _check_indices(s, mlc: MultiLevelCodebook) -> np.ndarray:
    s = np.asarray(s)
    if not np.issubdtype(s.dtype, np.integer):
        raise ValueError("index tensor must be integer-valued")
    if s.ndim != 4:
        raise ValueError(f"index tensor must have shape (L, P, h, w), got {s.shape}")
    L, p = s.shape[0], s.shape[1]
    if not 1 <= L <= mlc.depth:
        raise ValueError(f"index tensor has {L} levels, codebook depth is {mlc.depth}")
    if p != mlc.p:
        raise ValueError(f"index tensor has {p} heads, codebook has {mlc.p}")
    if s.size and (s.min() < 0 or s.max() >= mlc.n):
        raise ValueError(f"indices must lie in [0, {mlc.n})")
    return s


def rvq_decode(s, mlc: MultiLevelCodebook) -> np.ndarray:
    """Sum the selected head entries over all present levels."""
    s = _check_indices(s, mlc)
    L, _, h, w = s.shape
    m = mlc.head_dim
    out = np.zeros((h, w, mlc.n_q))
    for d in range(L):
        for p, head in enumerate(mlc.levels[d].heads):
            out[:, :, p * m:(p + 1) * m] += head.entries[s[d, p]]
    return out


def requantize(z_noisy, mlc: MultiLevelCodebook, levels: int | None = None) -> np.ndarray:
    """Project a (noisy) feature grid back onto the representable set."""
    return rvq_decode(rvq_encode(z_noisy, mlc, levels), mlc)


def _stack_features(features, n_q: int) -> np.ndarray:
    """Flatten grids / matrices into a (num_vectors, n_q) training matrix."""
    if isinstance(features, np.ndarray) and features.ndim in (2, 3):
        features = [features]
    mats = []
    for f in features:
        f = np.asarray(f, dtype=np.float64)
        if f.ndim == 3:
            f = f.reshape(-1, f.shape[2])
        if f.ndim != 2:
            raise ValueError("training features must be (h, w, n_q) grids or (n, n_q) matrices")
        mats.append(f)
    if not mats:
        raise ValueError("no training features supplied")
    x = np.concatenate(mats, axis=0)
    if x.shape[1] != n_q:
        raise ValueError(f"training features have {x.shape[1]} channels, expected {n_q}")
    if not np.all(np.isfinite(x)):
        raise ValueError("training features must be finite")
    return x


def _kmeans_pp_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Seeded k-means++: first center uniform, then D^2-weighted picks."""
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]))
    pick = int(rng.integers(n))
    centers[0] = x[pick]
    d2 = ((x - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = float(d2.sum())
        if total > 0.0:
            u = rng.random() * total
            pick = min(int(np.searchsorted(np.cumsum(d2), u, side="right")), n - 1)
        else:
            pick = int(rng.integers(n))
        centers[j] = x[pick]
        np.minimum(d2, ((x - centers[j]) ** 2).sum(axis=1), out=d2)
    return centers


def _relocate_empty(x, centers, labels, d2min):
    """Reseed each empty cluster to the point farthest from its centroid."""
    k = centers.shape[0]
    labels = labels.copy()
    d2min = d2min.copy()
    used = np.zeros(x.shape[0], dtype=bool)
    while True:
        counts = np.bincount(labels, minlength=k)
        empty = np.flatnonzero(counts == 0)
        if empty.size == 0:
            return labels, d2min
        c = int(empty[0])
        far = int(np.where(used, -np.inf, d2min).argmax())
        used[far] = True
        centers[c] = x[far]
        d2 = ((x - centers[c]) ** 2).sum(axis=1)
        better = d2 < d2min
        labels[better] = c
        d2min[better] = d2[better]
        labels[far] = c
        d2min[far] = 0.0


def _kmeans(x: np.ndarray, k: int, cfg: FitConfig, rng: np.random.Generator) -> np.ndarray:
    if x.shape[0] < k:
        raise ValueError(f"need at least {k} vectors per head, got {x.shape[0]}")
    centers = _kmeans_pp_init(x, k, rng)
    prev = np.inf
    for _ in range(cfg.max_iterations):
        d2 = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        labels = d2.argmin(axis=1)
        d2min = d2[np.arange(x.shape[0]), labels]
        labels, d2min = _relocate_empty(x, centers, labels, d2min)
        sse = float(d2min.sum())
        for c in range(k):
            centers[c] = x[labels == c].mean(axis=0)
        # The loop always exits right after a centroid update, so the final
        # centers are exact means of a partition of x; that is what makes
        # per-level residual energy non-increasing without any tolerance.
        if np.isfinite(prev) and prev - sse <= cfg.convergence_tol * prev:
            break
        prev = sse
    return centers


def fit(training_features, shape, cfg: FitConfig | None = None) -> MultiLevelCodebook:
    """Fit a multi-level codebook by greedy per-level, per-head k-means.

    shape is (D, P, N, n_q). Level d's heads are clustered on the residuals
    left by levels 1..d-1; each head uses k-means++ initialization drawn
    from a per-(level, head) stream spawned off cfg.seed, so refitting with
    the same data and seed is bitwise reproducible and a single-level fit
    matches level 1 of a deeper fit exactly.
    """
    cfg = cfg or FitConfig()
    try:
        depth, p, n, n_q = (int(v) for v in shape)
    except (TypeError, ValueError):
        raise ValueError(f"shape must be (D, P, N, n_q), got {shape!r}") from None
    if min(depth, p, n, n_q) < 1:
        raise ValueError(f"shape entries must be positive, got {shape!r}")
    if n_q % p != 0:
        raise ValueError(f"n_q={n_q} not divisible by P={p}")
    x = _stack_features(training_features, n_q)
    if x.shape[0] < n:
        raise ValueError(f"need at least {n} training vectors, got {x.shape[0]}")
    m = n_q // p
    residual = x.copy()
    levels = []
    for d in range(depth):
        heads = []
        for head in range(p):
            rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(d, head)))
            centers = _kmeans(residual[:, head * m:(head + 1) * m], n, cfg, rng)
            heads.append(Codebook(centers))
        moc = MultiHeadCodebook(tuple(heads))
        _, q = _moc_quantize_flat(residual, moc)
        residual -= q
        levels.append(moc)
    return MultiLevelCodebook(tuple(levels))


def residual_energies(features, mlc: MultiLevelCodebook, levels: int | None = None) -> np.ndarray:
    """Mean squared residual norm per level: index d holds E[||r_d||^2].

    Entry 0 is the raw feature energy, entry d the energy left after
    quantizing with levels 1..d.
    """
    L = mlc.depth if levels is None else int(levels)
    if not 1 <= L <= mlc.depth:
        raise ValueError(f"levels must be in [1, {mlc.depth}], got {levels}")
    r = _stack_features(features, mlc.n_q).copy()
    out = np.empty(L + 1)
    out[0] = (r ** 2).sum(axis=1).mean()
    for d in range(L):
        _, q = _moc_quantize_flat(r, mlc.levels[d])
        r -= q
        out[d + 1] = (r ** 2).sum(axis=1).mean()
    return out
