"""Synthetic feature data with known content and speaker structure.

Each frame is ``phone_centroid[p] + speaker_offset[s] + noise``: shared
content clusters ("phones") plus an additive per-speaker shift. Frames
that are close therefore share content while carrying speaker identity,
which is exactly the geometry retrieval-based conversion relies on, so
content preservation, speaker shift and morphing behavior can all be
checked against ground-truth labels with no pretrained model involved.

This is a test-harness geometry, not a claim about how any real encoder
arranges its feature space.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .features import DEFAULT_FRAME_RATE_HZ, FeatureSequence

_MAX_SAMPLING_ATTEMPTS = 100


@dataclass(frozen=True)
class SynthConfig:
    n_phones: int = 8
    dim: int = 64
    n_speakers: int = 2
    frames_per_utterance: int = 200
    utterances_per_speaker: int = 10
    content_scale: float = 1.0
    speaker_scale: float = 1.0
    noise_scale: float = 0.05
    seed: int = 0
    frame_rate_hz: float = DEFAULT_FRAME_RATE_HZ

    def __post_init__(self):
        for name in (
            "n_phones",
            "dim",
            "n_speakers",
            "frames_per_utterance",
            "utterances_per_speaker",
        ):
            if int(getattr(self, name)) < 1:
                raise ValidationError(f"{name} must be >= 1")
        if self.content_scale <= 0 or self.speaker_scale <= 0:
            raise ValidationError("content_scale and speaker_scale must be > 0")
        if self.noise_scale < 0:
            raise ValidationError("noise_scale must be >= 0")
        if not 0 <= int(self.seed) < 2**64:
            raise ValidationError("seed must fit in u64")

    @property
    def separability_guaranteed(self) -> bool:
        """True when noise is small enough that label recovery is exact."""
        return self.noise_scale < self.content_scale / 4


@dataclass(frozen=True)
class SynthTruth:
    """Ground truth for one generated dataset."""

    phone_centroids: np.ndarray  # (P, dim) float32
    speaker_offsets: np.ndarray  # (S, dim) float32
    speaker_ids: tuple
    labels: dict  # source_id -> (T,) int32 phone ids
    content_scale: float
    speaker_scale: float

    def __post_init__(self):
        centroids = np.ascontiguousarray(self.phone_centroids, dtype=np.float32)
        offsets = np.ascontiguousarray(self.speaker_offsets, dtype=np.float32)
        if _min_pairwise_distance(centroids) < self.content_scale:
            raise ValidationError("phone centroids closer than content_scale")
        if _min_pairwise_distance(offsets) < self.speaker_scale:
            raise ValidationError("speaker offsets closer than speaker_scale")
        centroids.setflags(write=False)
        offsets.setflags(write=False)
        object.__setattr__(self, "phone_centroids", centroids)
        object.__setattr__(self, "speaker_offsets", offsets)
        object.__setattr__(self, "speaker_ids", tuple(self.speaker_ids))

    def speaker_index(self, speaker_id: str) -> int:
        try:
            return self.speaker_ids.index(speaker_id)
        except ValueError:
            raise ValidationError(f"unknown speaker {speaker_id!r}") from None


def _min_pairwise_distance(points: np.ndarray) -> float:
    if points.shape[0] < 2:
        return math.inf
    x = points.astype(np.float64)
    diffs = x[:, None, :] - x[None, :, :]
    d = np.sqrt((diffs**2).sum(axis=-1))
    return float(d[np.triu_indices(len(x), k=1)].min())


def _sample_separated(rng, count, dim, scale) -> np.ndarray:
    """Gaussian points (float32), rejection-resampled to pairwise
    distance >= scale."""
    for _ in range(_MAX_SAMPLING_ATTEMPTS):
        points = rng.normal(0.0, scale, size=(count, dim)).astype(np.float32)
        if _min_pairwise_distance(points) >= scale:
            return points
    raise ValidationError(
        f"could not sample {count} points with pairwise separation {scale} "
        f"in dimension {dim}"
    )


def source_name(speaker_id: str, utterance: int) -> str:
    return f"{speaker_id}_{utterance:03d}"


def generate(config: SynthConfig):
    """Generate per-speaker sequences and their ground truth.

    Deterministic for a fixed seed; each utterance draws from its own
    PRNG stream keyed by (seed, speaker, utterance), so generation order
    does not matter.
    """
    truth_rng = np.random.default_rng([config.seed, 0])
    centroids = _sample_separated(
        truth_rng, config.n_phones, config.dim, config.content_scale
    )
    offsets = _sample_separated(
        truth_rng, config.n_speakers, config.dim, config.speaker_scale
    )
    speaker_ids = tuple(f"spk{s}" for s in range(config.n_speakers))
    centroids64 = centroids.astype(np.float64)
    offsets64 = offsets.astype(np.float64)
    sequences = {}
    labels = {}
    for s, speaker_id in enumerate(speaker_ids):
        per_speaker = []
        for u in range(config.utterances_per_speaker):
            rng = np.random.default_rng([config.seed, 1, s, u])
            phones = rng.integers(
                0, config.n_phones, size=config.frames_per_utterance
            ).astype(np.int32)
            frames = centroids64[phones] + offsets64[s]
            if config.noise_scale > 0:
                frames = frames + rng.normal(
                    0.0, config.noise_scale, size=frames.shape
                )
            sid = source_name(speaker_id, u)
            per_speaker.append(
                FeatureSequence(
                    frames=frames.astype(np.float32),
                    frame_rate_hz=config.frame_rate_hz,
                    source_id=sid,
                )
            )
            phones.setflags(write=False)
            labels[sid] = phones
        sequences[speaker_id] = per_speaker
    truth = SynthTruth(
        phone_centroids=centroids,
        speaker_offsets=offsets,
        speaker_ids=speaker_ids,
        labels=labels,
        content_scale=config.content_scale,
        speaker_scale=config.speaker_scale,
    )
    return sequences, truth


def label_frames(frames: FeatureSequence, truth: SynthTruth, speaker_id: str):
    """Recover phone labels: nearest centroid after removing the speaker
    offset. Equidistant centroids resolve to the lower phone id."""
    s = truth.speaker_index(speaker_id)
    x = frames.frames.astype(np.float64) - truth.speaker_offsets[s].astype(np.float64)
    centroids = truth.phone_centroids.astype(np.float64)
    out = np.empty(x.shape[0], dtype=np.int32)
    chunk = max(1, 2_000_000 // max(1, centroids.size))
    for start in range(0, x.shape[0], chunk):
        stop = min(start + chunk, x.shape[0])
        diffs = x[start:stop, None, :] - centroids[None, :, :]
        d2 = (diffs**2).sum(axis=-1)
        out[start:stop] = np.argmin(d2, axis=1)  # argmin takes the first min
    return out


def save_truth(truth: SynthTruth, path) -> None:
    payload = {
        "phone_centroids": [[float(x) for x in row] for row in truth.phone_centroids],
        "speaker_offsets": [[float(x) for x in row] for row in truth.speaker_offsets],
        "speaker_ids": list(truth.speaker_ids),
        "labels": {sid: [int(p) for p in arr] for sid, arr in truth.labels.items()},
        "content_scale": truth.content_scale,
        "speaker_scale": truth.speaker_scale,
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_truth(path) -> SynthTruth:
    data = json.loads(Path(path).read_text())
    return SynthTruth(
        phone_centroids=np.array(data["phone_centroids"], dtype=np.float32),
        speaker_offsets=np.array(data["speaker_offsets"], dtype=np.float32),
        speaker_ids=tuple(data["speaker_ids"]),
        labels={
            sid: np.array(arr, dtype=np.int32) for sid, arr in data["labels"].items()
        },
        content_scale=float(data["content_scale"]),
        speaker_scale=float(data["speaker_scale"]),
    )
