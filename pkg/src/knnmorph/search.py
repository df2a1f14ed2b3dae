"""Blocked exact top-k search over L2-normalized unit rows.

The index stores unit-norm float32 rows; cosine distance to a normalized
query reduces to ``1 - q . u``, so a scan is a blocked matrix product.
Dot products are reduced in float64 and candidates are merged under the
ordering ``(distance, row index)``, which makes results deterministic:
ties always resolve to the lower database row.

Queries are processed in fixed-size micro-batches. Worker threads only
distribute whole micro-batches and write to pre-assigned output slots,
so results are bitwise identical for any worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .features import MIN_UNIT_NORM, UnitDatabase

DEFAULT_BLOCK_SIZE = 1024

# Queries per scan job. Fixed so that GEMM shapes, and therefore float
# results, do not depend on the worker count.
_MICRO_BATCH = 256


@dataclass(frozen=True)
class SearchIndex:
    """Precomputed scan state: unit-norm rows plus a row mapping."""

    normalized_units: np.ndarray  # (N, D) float32, unit L2 norm
    row_map: np.ndarray  # (N,) int64, index into the owning database
    block_size: int = DEFAULT_BLOCK_SIZE

    @property
    def num_units(self) -> int:
        return self.normalized_units.shape[0]

    @property
    def dim(self) -> int:
        return self.normalized_units.shape[1]


def build_index(db: UnitDatabase, block_size: int = DEFAULT_BLOCK_SIZE) -> SearchIndex:
    """Normalize database rows (float64 math, float32 storage)."""
    if int(block_size) < 1:
        raise ValidationError(f"block_size must be >= 1, got {block_size}")
    n = db.num_units
    normalized = np.empty_like(db.units)
    # Blockwise to bound the float64 temporaries on large databases.
    for start in range(0, n, 16384):
        stop = min(start + 16384, n)
        block = db.units[start:stop].astype(np.float64)
        block /= db.row_norms[start:stop, None]
        normalized[start:stop] = block.astype(np.float32)
    normalized.setflags(write=False)
    row_map = np.arange(n, dtype=np.int64)
    row_map.setflags(write=False)
    return SearchIndex(
        normalized_units=normalized, row_map=row_map, block_size=int(block_size)
    )


def batch_search(queries, index: SearchIndex, k: int, *, workers: int = 1):
    """Exact k nearest rows for every query.

    Returns ``(indices, distances)`` of shape (M, k): database rows in
    ascending ``(distance, row index)`` order and distances ``1 - q . u``
    clamped to [0, 2]. Matches the definitional per-query search exactly,
    including the tie rule.
    """
    q = np.asarray(queries)
    if q.ndim == 1:
        q = q[None, :]
    if q.ndim != 2 or q.shape[1] != index.dim:
        raise ValidationError(
            f"queries must be (M, {index.dim}), got shape {q.shape}"
        )
    k = int(k)
    if not 1 <= k <= index.num_units:
        raise ValidationError(
            f"k must be in [1, {index.num_units}], got {k}"
        )
    q = q.astype(np.float64)
    if not np.all(np.isfinite(q)):
        raise ValidationError("queries contain non-finite values")
    norms = np.linalg.norm(q, axis=1)
    if q.shape[0] and norms.min() < MIN_UNIT_NORM:
        raise ValidationError(
            f"zero-norm query at row {int(np.argmin(norms))}"
        )
    q /= norms[:, None]

    m = q.shape[0]
    out_idx = np.empty((m, k), dtype=np.int64)
    out_dist = np.empty((m, k), dtype=np.float64)
    jobs = [(s, min(s + _MICRO_BATCH, m)) for s in range(0, m, _MICRO_BATCH)]

    def run(job):
        s, e = job
        idx, dist = _scan(q[s:e], index, k)
        out_idx[s:e] = idx
        out_dist[s:e] = dist

    if workers <= 1 or len(jobs) <= 1:
        for job in jobs:
            run(job)
    else:
        with ThreadPoolExecutor(max_workers=int(workers)) as pool:
            list(pool.map(run, jobs))
    return out_idx, out_dist


def _scan(q: np.ndarray, index: SearchIndex, k: int):
    """Scan all blocks for one query micro-batch, merging best-k."""
    m = q.shape[0]
    n = index.num_units
    block = index.block_size
    # Sentinels sort last: +inf distance, one-past-the-end index.
    best_dist = np.full((m, k), np.inf)
    best_idx = np.full((m, k), n, dtype=np.int64)
    for start in range(0, n, block):
        stop = min(start + block, n)
        units = index.normalized_units[start:stop].astype(np.float64)
        dist = 1.0 - q @ units.T
        np.clip(dist, 0.0, 2.0, out=dist)
        blk_dist, blk_idx = _block_topk(dist, start, k)
        best_dist, best_idx = _merge(best_dist, best_idx, blk_dist, blk_idx)
    return best_idx, best_dist


def _block_topk(dist: np.ndarray, base: int, k: int):
    """Lexicographically smallest (distance, index) pairs of one block.

    Fast path: argpartition by value, then order the selected set by
    (value, index). That is exact unless equal values straddle the
    partition boundary, in which case the affected rows fall back to a
    full per-row lexicographic sort.
    """
    m, width = dist.shape
    kk = min(k, width)
    if kk == width:
        sel = np.broadcast_to(np.arange(width), (m, width)).copy()
    else:
        sel = np.argpartition(dist, kk - 1, axis=1)[:, :kk]
    sel_dist = np.take_along_axis(dist, sel, axis=1)
    tau = sel_dist.max(axis=1)
    boundary_tied = np.flatnonzero((dist <= tau[:, None]).sum(axis=1) > kk)
    for row in boundary_tied:
        order = np.lexsort((np.arange(width), dist[row]))[:kk]
        sel[row] = order
        sel_dist[row] = dist[row, order]
    # Order each selected set by (value, index): index-sort first, then a
    # stable value sort preserves index order among equal values.
    by_idx = np.argsort(sel, axis=1)
    sel = np.take_along_axis(sel, by_idx, axis=1)
    sel_dist = np.take_along_axis(sel_dist, by_idx, axis=1)
    by_val = np.argsort(sel_dist, axis=1, kind="stable")
    sel = np.take_along_axis(sel, by_val, axis=1)
    sel_dist = np.take_along_axis(sel_dist, by_val, axis=1)
    if kk < k:  # block smaller than k: pad with sentinels
        pad_d = np.full((m, k - kk), np.inf)
        pad_i = np.full((m, k - kk), base + width, dtype=np.int64)
        return (
            np.concatenate([sel_dist, pad_d], axis=1),
            np.concatenate([sel.astype(np.int64) + base, pad_i], axis=1),
        )
    return sel_dist, sel.astype(np.int64) + base


def _merge(run_dist, run_idx, blk_dist, blk_idx):
    """Merge two sorted best-k lists under (distance, index).

    Both inputs are lexicographically sorted and every running index is
    smaller than every block index, so a stable value sort of the
    concatenation is already lexicographic.
    """
    k = run_dist.shape[1]
    cand_dist = np.concatenate([run_dist, blk_dist], axis=1)
    cand_idx = np.concatenate([run_idx, blk_idx], axis=1)
    order = np.argsort(cand_dist, axis=1, kind="stable")[:, :k]
    return (
        np.take_along_axis(cand_dist, order, axis=1),
        np.take_along_axis(cand_idx, order, axis=1),
    )
