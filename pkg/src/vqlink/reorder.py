"""Codebook reordering and Gray-code utilities.

A single demodulation slip moves an index to its neighbour in the Gray
label sequence, so relabeling a codebook such that Gray-adjacent indices
hold nearby vectors limits the feature damage of the most likely channel
errors. The reordering is the greedy chain heuristic: start from the
codebook mean, repeatedly pull out the nearest remaining entry, then store
chain position i at slot gray_sequence(N)[i].
"""

from __future__ import annotations

import numpy as np

from .quantizer import Codebook, MultiHeadCodebook, MultiLevelCodebook

__all__ = [
    "gray_sequence",
    "gray_adjacent_distance",
    "reorder_codebook",
    "reorder_multilevel",
    "apply_permutations",
]


def gray_sequence(n: int) -> np.ndarray:
    """Reflected binary Gray code of size n as decimals, e.g. n=8 -> [0,1,3,2,6,7,5,4]."""
    n = int(n)
    if n < 2 or n & (n - 1):
        raise ValueError(f"n must be a power of two >= 2, got {n}")
    i = np.arange(n, dtype=np.int64)
    return i ^ (i >> 1)


def gray_adjacent_distance(cb: Codebook) -> float:
    """Mean distance between entries at Gray-adjacent indices, wraparound included."""
    g = gray_sequence(cb.n)
    e = cb.entries
    diffs = e[g] - e[np.roll(g, -1)]
    return float(np.sqrt((diffs ** 2).sum(axis=1)).mean())


def reorder_codebook(cb: Codebook, use_gray: bool = True):
    """Greedy chain reorder of one codebook.

    Chain construction starts from the mean of all entries and repeatedly
    removes the entry nearest to the previous pick (distance ties break
    toward the lowest original index). With use_gray, chain position i is
    stored at slot gray_sequence(N)[i] so that walking the amplitude axis
    of the constellation walks the chain.

    Returns (reordered codebook, permutation mapping old index -> new index).
    """
    entries = cb.entries
    n = cb.n
    if use_gray:
        slots = gray_sequence(n)
    else:
        slots = np.arange(n, dtype=np.int64)
    remaining = list(range(n))
    chain = []
    cur = entries.mean(axis=0)
    for _ in range(n):
        rem = np.asarray(remaining)
        d2 = ((entries[rem] - cur) ** 2).sum(axis=1)
        pick = remaining.pop(int(d2.argmin()))
        chain.append(pick)
        cur = entries[pick]
    new_entries = np.empty_like(entries)
    perm = np.empty(n, dtype=np.int64)
    for i, orig in enumerate(chain):
        new_entries[slots[i]] = entries[orig]
        perm[orig] = slots[i]
    return Codebook(new_entries), perm


def reorder_multilevel(mlc: MultiLevelCodebook, use_gray: bool = True):
    """Reorder every head codebook of every level independently.

    Returns (reordered codebook, permutations of shape (D, P, N)); entry
    perms[d, p] maps old indices of that head to new ones, so existing
    index tensors can be remapped with apply_permutations.
    """
    new_levels = []
    perms = np.empty((mlc.depth, mlc.p, mlc.n), dtype=np.int64)
    for d, level in enumerate(mlc.levels):
        heads = []
        for p, head in enumerate(level.heads):
            new_head, perm = reorder_codebook(head, use_gray)
            heads.append(new_head)
            perms[d, p] = perm
        new_levels.append(MultiHeadCodebook(tuple(heads)))
    return MultiLevelCodebook(tuple(new_levels)), perms


def apply_permutations(s, perms) -> np.ndarray:
    """Remap an index tensor (L, P, h, w) through per-(level, head) permutations."""
    s = np.asarray(s)
    perms = np.asarray(perms)
    if s.ndim != 4:
        raise ValueError(f"index tensor must have shape (L, P, h, w), got {s.shape}")
    if perms.ndim != 3 or s.shape[0] > perms.shape[0] or s.shape[1] != perms.shape[1]:
        raise ValueError("permutation table does not match index tensor shape")
    out = np.empty_like(s)
    for d in range(s.shape[0]):
        for p in range(s.shape[1]):
            out[d, p] = perms[d, p][s[d, p]]
    return out
