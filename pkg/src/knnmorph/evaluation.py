"""Similarity metrics and experiment procedures.

Covers speaker-embedding cosine similarity (SECS), centroid proxy
embeddings for model-free runs, interpolation-weight sweeps, grouped
similarity matrices with half-split comparison, normal-approximation
confidence intervals, and seeded duration-ablation runs.

Real speaker embeddings arrive as EmbeddingSet JSON produced by an
external encoder; nothing here runs a neural model. The centroid proxy
(mean frame vector) stands in for an embedding when experiments run on
synthetic or raw feature data.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .features import (
    MIN_UNIT_NORM,
    FeatureSequence,
    SubsetSpec,
    UnitDatabase,
    database_duration,
    subset_database,
)
from .retrieval import ConversionSpec, convert
from .search import build_index

SPLIT_HALF_AB = "half_ab"
SPLIT_FULL = "full"
_SPLIT_POLICIES = (SPLIT_HALF_AB, SPLIT_FULL)


@dataclass(frozen=True)
class EmbeddingSet:
    """A labeled group of utterance embeddings (one encoder, one dim)."""

    label: str
    utterance_ids: tuple
    embeddings: np.ndarray  # (n, E) float32

    def __post_init__(self):
        emb = np.asarray(self.embeddings)
        if emb.ndim != 2 or emb.shape[0] < 1:
            raise ValidationError(
                f"embeddings must be a non-empty (n, E) matrix, got {emb.shape}"
            )
        emb = np.ascontiguousarray(emb, dtype=np.float32)
        if not np.all(np.isfinite(emb)):
            raise ValidationError(f"group {self.label!r} has non-finite embeddings")
        norms = np.linalg.norm(emb.astype(np.float64), axis=1)
        if norms.min() < MIN_UNIT_NORM:
            raise ValidationError(f"group {self.label!r} has a zero-norm embedding")
        ids = tuple(str(u) for u in self.utterance_ids)
        if len(ids) != emb.shape[0]:
            raise ValidationError("one utterance_id per embedding required")
        emb.setflags(write=False)
        object.__setattr__(self, "embeddings", emb)
        object.__setattr__(self, "utterance_ids", ids)
        object.__setattr__(self, "label", str(self.label))

    @property
    def size(self) -> int:
        return self.embeddings.shape[0]

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]

    def items(self) -> list:
        return list(zip(self.utterance_ids, self.embeddings))


def save_embedding_set(group: EmbeddingSet, path) -> None:
    payload = {
        "label": group.label,
        "dim": group.dim,
        "items": [
            {"utterance_id": uid, "embedding": [float(x) for x in vec]}
            for uid, vec in group.items()
        ],
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def load_embedding_set(path) -> EmbeddingSet:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from exc
    try:
        label = data["label"]
        dim = int(data["dim"])
        items = data["items"]
        ids = [it["utterance_id"] for it in items]
        matrix = np.array([it["embedding"] for it in items], dtype=np.float32)
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"{path}: malformed embedding set ({exc})") from exc
    if matrix.ndim != 2 or matrix.shape[1] != dim:
        raise ValidationError(
            f"{path}: embeddings do not match declared dim {dim}"
        )
    return EmbeddingSet(label=label, utterance_ids=tuple(ids), embeddings=matrix)


@dataclass(frozen=True)
class SimilarityReport:
    """Mean pairwise SECS between labeled groups."""

    labels: tuple
    matrix: np.ndarray  # (G, G) float64
    split_policy: str

    def __post_init__(self):
        labels = tuple(str(x) for x in self.labels)
        matrix = np.asarray(self.matrix, dtype=np.float64)
        g = len(labels)
        if matrix.shape != (g, g):
            raise ValidationError(
                f"matrix shape {matrix.shape} does not match {g} labels"
            )
        if not np.all(np.isfinite(matrix)):
            raise ValidationError("similarity matrix contains non-finite values")
        if self.split_policy not in _SPLIT_POLICIES:
            raise ValidationError(f"unknown split policy {self.split_policy!r}")
        if self.split_policy == SPLIT_FULL and not np.allclose(
            matrix, matrix.T, atol=1e-6
        ):
            raise ValidationError("full-policy matrix must be symmetric")
        matrix = matrix.copy()
        matrix.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "matrix", matrix)

    def to_json(self) -> str:
        payload = {
            "labels": list(self.labels),
            "matrix": [[float(x) for x in row] for row in self.matrix],
            "split_policy": self.split_policy,
        }
        return json.dumps(payload, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "SimilarityReport":
        data = json.loads(text)
        return cls(
            labels=tuple(data["labels"]),
            matrix=np.array(data["matrix"], dtype=np.float64),
            split_policy=data["split_policy"],
        )


@dataclass(frozen=True)
class CiSummary:
    """Mean with a 95% normal-approximation confidence halfwidth."""

    mean: float
    halfwidth: float
    n: int


def secs(a, b) -> float:
    """Speaker-embedding cosine similarity, in [-1, 1]."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValidationError(
            f"expected equal-length vectors, got shapes {a.shape} and {b.shape}"
        )
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na < MIN_UNIT_NORM or nb < MIN_UNIT_NORM:
        raise ValidationError("similarity undefined for zero-norm input")
    return float(min(max(float(np.dot(a, b)) / (na * nb), -1.0), 1.0))


def centroid_embedding(seq_or_db) -> np.ndarray:
    """Mean frame vector: the proxy speaker embedding (float64)."""
    if isinstance(seq_or_db, FeatureSequence):
        rows = seq_or_db.frames
    elif isinstance(seq_or_db, UnitDatabase):
        rows = seq_or_db.units
    else:
        raise ValidationError(
            f"expected FeatureSequence or UnitDatabase, got {type(seq_or_db).__name__}"
        )
    return np.mean(rows, axis=0, dtype=np.float64)


def proxy_secs(seq: FeatureSequence, reference) -> float:
    """SECS between a sequence's centroid and a reference embedding."""
    return secs(centroid_embedding(seq), reference)


def lambda_sweep(
    source: FeatureSequence,
    db: UnitDatabase,
    k: int,
    lambdas,
    *,
    workers: int = 1,
) -> list:
    """Convert *source* once per interpolation weight.

    Returns ``[(lam, ConversionResult), ...]`` in the given order. Unit
    selection does not depend on lam, so ``neighbor_indices`` is
    identical across the sweep; only the interpolation differs.
    """
    lambdas = [float(x) for x in lambdas]
    for lam in lambdas:
        if not (math.isfinite(lam) and 0.0 <= lam <= 1.0):
            raise ValidationError(f"lam must be in [0, 1], got {lam}")
    index = build_index(db)
    return [
        (
            lam,
            convert(source, db, ConversionSpec(k=k, lam=lam), index=index, workers=workers),
        )
        for lam in lambdas
    ]


def _half_split(group: EmbeddingSet):
    half = (group.size + 1) // 2  # odd count: A gets the extra
    return group.embeddings[:half], group.embeddings[half:]


def _normalized64(matrix: np.ndarray) -> np.ndarray:
    m = matrix.astype(np.float64)
    return m / np.linalg.norm(m, axis=1)[:, None]


def similarity_matrix(groups, policy: str = SPLIT_HALF_AB) -> SimilarityReport:
    """Mean pairwise SECS between every pair of groups.

    Under ``half_ab`` each group splits by utterance order into a first
    half A and second half B; cell (i, j) averages secs(a, b) over
    A_i x B_j, diagonal included. Under ``full``, off-diagonal cells
    average over all cross-group pairs and diagonal cells over all
    distinct within-group pairs.
    """
    groups = list(groups)
    policy = str(policy).lower()
    if policy not in _SPLIT_POLICIES:
        raise ValidationError(f"unknown split policy {policy!r}")
    if len(groups) < 2:
        raise ValidationError("at least two groups are required")
    dim = groups[0].dim
    for g in groups:
        if g.dim != dim:
            raise ValidationError(
                f"embedding dim mismatch: {g.label!r} has E={g.dim}, expected {dim}"
            )
        if g.size < 2:
            raise ValidationError(
                f"group {g.label!r} too small for policy {policy!r} (needs >= 2)"
            )
    n = len(groups)
    matrix = np.empty((n, n), dtype=np.float64)
    if policy == SPLIT_HALF_AB:
        halves = [
            (_normalized64(a), _normalized64(b))
            for a, b in (_half_split(g) for g in groups)
        ]
        for i in range(n):
            for j in range(n):
                sims = halves[i][0] @ halves[j][1].T
                matrix[i, j] = float(np.mean(sims))
    else:
        normed = [_normalized64(g.embeddings) for g in groups]
        for i in range(n):
            for j in range(n):
                sims = normed[i] @ normed[j].T
                if i == j:
                    iu = np.triu_indices(sims.shape[0], k=1)
                    matrix[i, j] = float(np.mean(sims[iu]))
                else:
                    matrix[i, j] = float(np.mean(sims))
    np.clip(matrix, -1.0, 1.0, out=matrix)
    return SimilarityReport(
        labels=tuple(g.label for g in groups), matrix=matrix, split_policy=policy
    )


def aggregate_ci(values) -> CiSummary:
    """Mean with 95% halfwidth 1.96 * s / sqrt(n); 0 when n == 1."""
    arr = np.asarray(list(values), dtype=np.float64)
    if arr.size == 0:
        raise ValidationError("cannot aggregate an empty list")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("values contain non-finite entries")
    n = int(arr.size)
    mean = float(np.mean(arr))
    if n == 1:
        return CiSummary(mean=mean, halfwidth=0.0, n=1)
    halfwidth = 1.96 * float(np.std(arr, ddof=1)) / math.sqrt(n)
    return CiSummary(mean=mean, halfwidth=halfwidth, n=n)


# ---------------------------------------------------------------------------
# Duration ablations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AblationRow:
    duration_seconds: float
    seed: int
    utterance_id: str
    metric_name: str
    value: float


PROXY_METRIC = "proxy_secs"


def load_external_scores(path) -> dict:
    """Read precomputed per-utterance scores (WER and the like).

    CSV with header ``utterance_id,metric_name,value``. Returns
    ``{(utterance_id, metric_name): value}``; duplicates are an error.
    """
    path = Path(path)
    scores = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["utterance_id", "metric_name", "value"]:
            raise ValidationError(
                f"{path}: expected header utterance_id,metric_name,value, got {header}"
            )
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 3:
                raise ValidationError(f"{path}:{lineno}: expected 3 columns")
            uid, metric, raw = row
            try:
                value = float(raw)
            except ValueError as exc:
                raise ValidationError(
                    f"{path}:{lineno}: non-numeric value {raw!r}"
                ) from exc
            if not math.isfinite(value):
                raise ValidationError(f"{path}:{lineno}: non-finite value")
            key = (uid, metric)
            if key in scores:
                raise ValidationError(
                    f"{path}:{lineno}: duplicate entry for {key}"
                )
            scores[key] = value
    return scores


def ablation_run(
    sources,
    db: UnitDatabase,
    durations,
    seeds,
    k: int,
    lam: float,
    external_scores: dict | None = None,
    *,
    workers: int = 1,
) -> list:
    """Convert every source against duration-limited database subsets.

    For each (duration, seed) cell the database is subset with
    :func:`subset_database`, every source is converted with (k, lam),
    and one ``proxy_secs`` row per source is emitted, measured against
    the centroid of the *full* database (the fixed target-speaker
    reference). External scores join per utterance after the proxy row.
    Output order is (duration, seed, source) as given; identical inputs
    produce identical rows.
    """
    sources = list(sources)
    durations = [float(d) for d in durations]
    seeds = [int(s) for s in seeds]
    if not sources:
        raise ValidationError("at least one source sequence is required")
    if not durations or not seeds:
        raise ValidationError("durations and seeds must be non-empty")
    total = database_duration(db)
    for d in durations:
        if d > total:
            raise ValidationError(
                f"duration {d} s exceeds database duration {total} s"
            )
    source_ids = [s.source_id for s in sources]
    external_scores = dict(external_scores or {})
    known = set(source_ids)
    for uid, metric in external_scores:
        if uid not in known:
            raise ValidationError(
                f"unknown external-score utterance_id {uid!r} (metric {metric!r})"
            )
    spec_template = ConversionSpec(k=k, lam=lam)
    reference = centroid_embedding(db)
    rows = []
    for duration in durations:
        for seed in seeds:
            sub = subset_database(db, SubsetSpec(duration_seconds=duration, seed=seed))
            index = build_index(sub)
            for source in sources:
                result = convert(
                    source, sub, spec_template, index=index, workers=workers
                )
                rows.append(
                    AblationRow(
                        duration_seconds=duration,
                        seed=seed,
                        utterance_id=source.source_id,
                        metric_name=PROXY_METRIC,
                        value=proxy_secs(result.converted, reference),
                    )
                )
                for (uid, metric) in sorted(external_scores):
                    if uid == source.source_id:
                        rows.append(
                            AblationRow(
                                duration_seconds=duration,
                                seed=seed,
                                utterance_id=uid,
                                metric_name=metric,
                                value=external_scores[(uid, metric)],
                            )
                        )
    return rows


def write_ablation_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["duration_seconds", "seed", "utterance_id", "metric_name", "value"]
        )
        for row in rows:
            writer.writerow(
                [
                    repr(row.duration_seconds),
                    row.seed,
                    row.utterance_id,
                    row.metric_name,
                    repr(row.value),
                ]
            )
