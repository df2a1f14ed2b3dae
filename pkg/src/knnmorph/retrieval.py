"""Frame-level unit selection and interpolation.

Each source frame is replaced by the uniform average of its k nearest
database rows under cosine distance, then blended with the original
frame:

    converted = lam * selected + (1 - lam) * source

``lam`` in [0, 1] sets the target-speaker influence: 0 returns the
source unchanged, 1 uses the selected units alone, and intermediate
values morph between the two voices. Frame count (and so duration) is
never changed.

Dot products reduce in float64; ties in distance resolve to the lower
database row index, so conversion is fully deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .features import MIN_UNIT_NORM, FeatureSequence, UnitDatabase
from .search import DEFAULT_BLOCK_SIZE, SearchIndex, batch_search, build_index

SUPPORTED_METRICS = ("cosine",)

DEFAULT_K = 4
DEFAULT_LAMBDA = 1.0


@dataclass(frozen=True)
class ConversionSpec:
    """Retrieval and morphing parameters: neighbor count k, blend weight
    lam in [0, 1], and the distance metric identifier."""

    k: int = DEFAULT_K
    lam: float = DEFAULT_LAMBDA
    metric: str = "cosine"

    def __post_init__(self):
        if int(self.k) < 1:
            raise ValidationError(f"k must be >= 1, got {self.k}")
        object.__setattr__(self, "k", int(self.k))
        lam = float(self.lam)
        if not (math.isfinite(lam) and 0.0 <= lam <= 1.0):
            raise ValidationError(f"lam must be in [0, 1], got {self.lam}")
        object.__setattr__(self, "lam", lam)
        if self.metric not in SUPPORTED_METRICS:
            raise ValidationError(
                f"unsupported metric {self.metric!r}; supported: {SUPPORTED_METRICS}"
            )


@dataclass(frozen=True)
class ConversionResult:
    """Converted and selected sequences plus the chosen database rows.

    ``neighbor_indices[t]`` holds the k distinct database rows averaged
    for source frame t, in ascending (distance, row) order, and
    ``neighbor_distances`` the matching cosine distances (kept so
    callers can emit retrieval traces).
    """

    converted: FeatureSequence
    selected: FeatureSequence
    neighbor_indices: np.ndarray  # (T, k) int64
    neighbor_distances: np.ndarray  # (T, k) float64


def cosine_distance(a, b) -> float:
    """1 - cos(a, b), clamped to [0, 2] against rounding."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValidationError(
            f"expected two equal-length vectors, got shapes {a.shape} and {b.shape}"
        )
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na < MIN_UNIT_NORM or nb < MIN_UNIT_NORM:
        raise ValidationError("cosine distance undefined for zero-norm input")
    d = 1.0 - float(np.dot(a, b)) / (na * nb)
    return float(min(max(d, 0.0), 2.0))


def top_k(query, db: UnitDatabase, k: int) -> list:
    """The k nearest database rows to *query* by cosine distance.

    Returns ``[(row, distance), ...]`` with non-decreasing distances;
    equidistant rows order by lower row index.
    """
    q = np.asarray(query, dtype=np.float64)
    if q.ndim != 1 or q.shape[0] != db.dim:
        raise ValidationError(f"query must be a {db.dim}-vector, got shape {q.shape}")
    k = int(k)
    if not 1 <= k <= db.num_units:
        raise ValidationError(f"k must be in [1, {db.num_units}], got {k}")
    qn = np.linalg.norm(q)
    if qn < MIN_UNIT_NORM:
        raise ValidationError("zero-norm query")
    dist = 1.0 - (db.units @ q) / (db.row_norms * qn)
    np.clip(dist, 0.0, 2.0, out=dist)
    order = np.argsort(dist, kind="stable")[:k]
    return [(int(i), float(dist[i])) for i in order]


def select_unit(query, db: UnitDatabase, k: int) -> np.ndarray:
    """Uniform average of the k nearest database rows (float32)."""
    rows = [i for i, _ in top_k(query, db, k)]
    return np.mean(db.units[rows], axis=0, dtype=np.float64).astype(np.float32)


def interpolate(selected, source, lam: float) -> np.ndarray:
    """Elementwise ``lam * selected + (1 - lam) * source``.

    Computed in float64 and rounded once to float32, so every output
    coordinate stays inside [min(selected, source), max(...)] and the
    endpoints lam=0 / lam=1 reproduce their input bitwise.
    """
    sel = np.asarray(selected)
    src = np.asarray(source)
    if sel.shape != src.shape:
        raise ValidationError(
            f"dimension mismatch: selected {sel.shape} vs source {src.shape}"
        )
    lam = float(lam)
    if not (math.isfinite(lam) and 0.0 <= lam <= 1.0):
        raise ValidationError(f"lam must be in [0, 1], got {lam}")
    out = lam * sel.astype(np.float64) + (1.0 - lam) * src.astype(np.float64)
    return out.astype(np.float32)


def convert(
    source: FeatureSequence,
    db: UnitDatabase,
    spec: ConversionSpec,
    *,
    index: SearchIndex | None = None,
    workers: int = 1,
    block_size: int = DEFAULT_BLOCK_SIZE,
) -> ConversionResult:
    """Convert *source* toward the database speaker, frame by frame.

    Every source frame independently selects its k nearest units and is
    interpolated with their average; the output has exactly the source's
    frame count. Pass a prebuilt *index* to amortize normalization over
    repeated conversions against the same database.
    """
    if source.dim != db.dim:
        raise ValidationError(
            f"dimension mismatch: source D={source.dim}, database D={db.dim}"
        )
    if spec.k > db.num_units:
        raise ValidationError(
            f"k={spec.k} exceeds database size N={db.num_units}"
        )
    frame_norms = np.linalg.norm(source.frames.astype(np.float64), axis=1)
    if frame_norms.min() < MIN_UNIT_NORM:
        raise ValidationError(
            f"zero-norm source frame at t={int(np.argmin(frame_norms))}"
        )
    if index is None:
        index = build_index(db, block_size=block_size)
    elif index.num_units != db.num_units or index.dim != db.dim:
        raise ValidationError("search index does not match the database")
    idx, dist = batch_search(source.frames, index, spec.k, workers=workers)
    selected = np.mean(db.units[idx], axis=1, dtype=np.float64).astype(np.float32)
    converted = interpolate(selected, source.frames, spec.lam)
    return ConversionResult(
        converted=FeatureSequence(
            frames=converted,
            frame_rate_hz=source.frame_rate_hz,
            source_id=source.source_id,
        ),
        selected=FeatureSequence(
            frames=selected,
            frame_rate_hz=source.frame_rate_hz,
            source_id=source.source_id,
        ),
        neighbor_indices=idx,
        neighbor_distances=dist,
    )
