"""Feature sequences, the KNNF file format, and unit databases.

KNNF is a little-endian binary container for one feature sequence:

    bytes  0-3   magic ``KNNF`` (0x4B 0x4E 0x4E 0x46)
    bytes  4-7   u32 version (currently 1)
    bytes  8-11  u32 T (frame count)
    bytes 12-15  u32 D (feature dimension)
    bytes 16-19  f32 frame rate in Hz
    bytes 20-    T*D f32 payload, row-major

The payload is stored bit-exactly; ``load_features(save_features(x))``
returns frames that compare equal bitwise.

A unit database is the row-concatenation of one speaker's sequences with
per-row provenance (which utterance, which frame) and precomputed L2 row
norms. Databases serialize to a directory holding a consolidated KNNF
unit file plus a JSON manifest.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import KnnfFormatError, ValidationError

KNNF_MAGIC = b"KNNF"
KNNF_VERSION = 1
_HEADER = struct.Struct("<4sIIIf")  # magic, version, T, D, frame_rate_hz

#: Frames with an L2 norm below this are rejected at database build time;
#: cosine distance is undefined for them.
MIN_UNIT_NORM = 1e-8

#: Frame rate of WavLM-style encoders at 16 kHz (20 ms stride). Stored in
#: every KNNF header, so other encoders may differ.
DEFAULT_FRAME_RATE_HZ = 50.0

DB_MANIFEST_NAME = "db.json"
DB_UNITS_NAME = "units.knnf"
_DB_FORMAT = "knn-unit-db"


def _as_float32_matrix(frames, what: str) -> np.ndarray:
    arr = np.asarray(frames)
    if arr.ndim != 2:
        raise ValidationError(f"{what} must be a 2-D array, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValidationError(f"{what} must have at least one frame and one dimension")
    arr = np.ascontiguousarray(arr, dtype=np.float32)
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{what} contains non-finite values")
    return arr


def _frozen_copy(arr: np.ndarray) -> np.ndarray:
    out = arr.copy()
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class FeatureSequence:
    """One utterance's features: T frames of D float32 activations."""

    frames: np.ndarray
    frame_rate_hz: float
    source_id: str = ""

    def __post_init__(self):
        frames = _frozen_copy(_as_float32_matrix(self.frames, "frames"))
        rate = float(self.frame_rate_hz)
        if not math.isfinite(rate) or rate <= 0:
            raise ValidationError(f"frame_rate_hz must be positive, got {rate}")
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "frame_rate_hz", rate)

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def dim(self) -> int:
        return self.frames.shape[1]

    @property
    def duration_seconds(self) -> float:
        return self.num_frames / self.frame_rate_hz


@dataclass(frozen=True)
class SubsetSpec:
    """How much of a database to keep, and the shuffle seed."""

    duration_seconds: float
    seed: int

    def __post_init__(self):
        if not math.isfinite(self.duration_seconds) or self.duration_seconds <= 0:
            raise ValidationError(
                f"duration_seconds must be positive, got {self.duration_seconds}"
            )
        if not 0 <= int(self.seed) < 2**64:
            raise ValidationError(f"seed must fit in u64, got {self.seed}")


@dataclass(frozen=True)
class UnitDatabase:
    """Concatenated target-speaker frames with per-row provenance.

    ``source_ids[source_index[i]]`` names the utterance row ``i`` came
    from and ``frame_index[i]`` its frame position there. ``row_norms``
    holds precomputed float64 L2 norms; rows below :data:`MIN_UNIT_NORM`
    are rejected at construction. Instances are immutable and safe to
    share across threads.
    """

    units: np.ndarray
    source_ids: tuple
    source_index: np.ndarray
    frame_index: np.ndarray
    frame_rate_hz: float
    speaker_id: str
    row_norms: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        units = _frozen_copy(_as_float32_matrix(self.units, "units"))
        n = units.shape[0]
        source_ids = tuple(str(s) for s in self.source_ids)
        source_index = np.ascontiguousarray(self.source_index, dtype=np.int32)
        frame_index = np.ascontiguousarray(self.frame_index, dtype=np.int32)
        if source_index.shape != (n,) or frame_index.shape != (n,):
            raise ValidationError("provenance arrays must have one entry per unit row")
        if len(source_ids) == 0:
            raise ValidationError("source_ids must not be empty")
        if source_index.min() < 0 or source_index.max() >= len(source_ids):
            raise ValidationError("source_index out of range")
        if frame_index.min() < 0:
            raise ValidationError("frame_index must be non-negative")
        rate = float(self.frame_rate_hz)
        if not math.isfinite(rate) or rate <= 0:
            raise ValidationError(f"frame_rate_hz must be positive, got {rate}")
        norms = np.linalg.norm(units.astype(np.float64), axis=1)
        if norms.min() < MIN_UNIT_NORM:
            bad = int(np.argmin(norms))
            raise ValidationError(
                f"zero-norm frame: row {bad} "
                f"({source_ids[source_index[bad]]}, frame {frame_index[bad]}) "
                f"has L2 norm {norms[bad]:.3g} < {MIN_UNIT_NORM}"
            )
        object.__setattr__(self, "units", units)
        object.__setattr__(self, "source_ids", source_ids)
        object.__setattr__(self, "source_index", _frozen_copy(source_index))
        object.__setattr__(self, "frame_index", _frozen_copy(frame_index))
        object.__setattr__(self, "frame_rate_hz", rate)
        object.__setattr__(self, "speaker_id", str(self.speaker_id))
        object.__setattr__(self, "row_norms", _frozen_copy(norms))

    @property
    def num_units(self) -> int:
        return self.units.shape[0]

    @property
    def dim(self) -> int:
        return self.units.shape[1]

    def provenance(self, row: int) -> tuple:
        """(source_id, frame_index) of one database row."""
        return (self.source_ids[self.source_index[row]], int(self.frame_index[row]))

    def segments(self) -> list:
        """Contiguous (source_id, start_row, n_rows) runs, in row order."""
        idx = self.source_index
        breaks = np.flatnonzero(np.diff(idx) != 0) + 1
        starts = np.concatenate(([0], breaks))
        ends = np.concatenate((breaks, [self.num_units]))
        return [
            (self.source_ids[idx[s]], int(s), int(e - s))
            for s, e in zip(starts, ends)
        ]


# ---------------------------------------------------------------------------
# KNNF read/write
# ---------------------------------------------------------------------------


def save_features(seq: FeatureSequence, path) -> None:
    """Write *seq* to *path* in KNNF format (bit-exact round trip)."""
    frames = seq.frames
    t, d = frames.shape
    if t > 0xFFFFFFFF or d > 0xFFFFFFFF:
        raise ValidationError("sequence too large for KNNF u32 header fields")
    if not np.all(np.isfinite(frames)):
        raise ValidationError("frames contain non-finite values")
    header = _HEADER.pack(KNNF_MAGIC, KNNF_VERSION, t, d, seq.frame_rate_hz)
    payload = np.ascontiguousarray(frames, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def load_features(path, source_id: str | None = None) -> FeatureSequence:
    """Read one KNNF file. ``source_id`` defaults to the file stem."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _HEADER.size:
        raise KnnfFormatError(f"{path}: truncated header ({len(data)} bytes)")
    magic, version, t, d, rate = _HEADER.unpack_from(data)
    if magic != KNNF_MAGIC:
        raise KnnfFormatError(f"{path}: bad magic {magic!r}")
    if version != KNNF_VERSION:
        raise KnnfFormatError(f"{path}: unsupported version {version}")
    if t == 0 or d == 0:
        raise KnnfFormatError(f"{path}: zero frame count or dimension (T={t}, D={d})")
    expected = _HEADER.size + 4 * t * d
    if len(data) < expected:
        raise KnnfFormatError(
            f"{path}: truncated payload ({len(data)} bytes, expected {expected})"
        )
    if len(data) > expected:
        raise KnnfFormatError(
            f"{path}: trailing data ({len(data)} bytes, expected {expected})"
        )
    frames = np.frombuffer(data, dtype="<f4", count=t * d, offset=_HEADER.size)
    frames = frames.reshape(t, d)
    if not np.all(np.isfinite(frames)):
        raise KnnfFormatError(f"{path}: payload contains non-finite values")
    if not math.isfinite(rate) or rate <= 0:
        raise KnnfFormatError(f"{path}: invalid frame rate {rate}")
    if source_id is None:
        source_id = Path(path).stem
    return FeatureSequence(frames=frames, frame_rate_hz=rate, source_id=source_id)


# ---------------------------------------------------------------------------
# Database construction
# ---------------------------------------------------------------------------


def database_from_sequences(seqs, speaker_id: str) -> UnitDatabase:
    """Concatenate sequences (in order) into a unit database.

    All sequences must share dimension and frame rate; rows with an L2
    norm below :data:`MIN_UNIT_NORM` are an error, never dropped.
    """
    seqs = list(seqs)
    if not seqs:
        raise ValidationError("at least one sequence is required")
    dim = seqs[0].dim
    rate = seqs[0].frame_rate_hz
    for s in seqs[1:]:
        if s.dim != dim:
            raise ValidationError(
                f"dimension mismatch: {s.source_id!r} has D={s.dim}, expected {dim}"
            )
        if s.frame_rate_hz != rate:
            raise ValidationError(
                f"frame rate mismatch: {s.source_id!r} has {s.frame_rate_hz} Hz, "
                f"expected {rate} Hz"
            )
    units = np.concatenate([s.frames for s in seqs], axis=0)
    source_ids = tuple(s.source_id for s in seqs)
    source_index = np.repeat(
        np.arange(len(seqs), dtype=np.int32), [s.num_frames for s in seqs]
    )
    frame_index = np.concatenate(
        [np.arange(s.num_frames, dtype=np.int32) for s in seqs]
    )
    return UnitDatabase(
        units=units,
        source_ids=source_ids,
        source_index=source_index,
        frame_index=frame_index,
        frame_rate_hz=rate,
        speaker_id=speaker_id,
    )


def build_database(paths, speaker_id: str) -> UnitDatabase:
    """Load KNNF files and concatenate them, in the given path order."""
    paths = list(paths)
    if not paths:
        raise ValidationError("at least one feature file is required")
    return database_from_sequences(
        (load_features(p) for p in paths), speaker_id=speaker_id
    )


def database_duration(db: UnitDatabase) -> float:
    """Total database duration in seconds (N / frame rate)."""
    return db.num_units / db.frame_rate_hz


def subset_database(db: UnitDatabase, spec: SubsetSpec) -> UnitDatabase:
    """Deterministic duration-limited subset of *db*.

    Utterances are shuffled by a PRNG seeded with ``spec.seed``, then
    appended whole while the running total stays short of the target; the
    first utterance that would overflow is truncated to a frame prefix so
    the result holds exactly ``ceil(duration_seconds * frame_rate_hz)``
    frames. Row provenance is preserved.
    """
    target_frames = math.ceil(spec.duration_seconds * db.frame_rate_hz)
    if target_frames > db.num_units:
        raise ValidationError(
            f"requested {spec.duration_seconds} s "
            f"({target_frames} frames) exceeds database duration "
            f"{database_duration(db)} s ({db.num_units} frames)"
        )
    segments = db.segments()
    order = np.random.default_rng(spec.seed).permutation(len(segments))
    taken = []
    total = 0
    for seg_idx in order:
        if total >= target_frames:
            break
        _, start, n_rows = segments[seg_idx]
        take = min(n_rows, target_frames - total)
        taken.append(np.arange(start, start + take))
        total += take
    rows = np.concatenate(taken)
    sub_sources = []
    remap = {}
    new_source_index = np.empty(len(rows), dtype=np.int32)
    for out_pos, row in enumerate(rows):
        sid = db.source_index[row]
        if sid not in remap:
            remap[sid] = len(sub_sources)
            sub_sources.append(db.source_ids[sid])
        new_source_index[out_pos] = remap[sid]
    return UnitDatabase(
        units=db.units[rows],
        source_ids=tuple(sub_sources),
        source_index=new_source_index,
        frame_index=db.frame_index[rows],
        frame_rate_hz=db.frame_rate_hz,
        speaker_id=db.speaker_id,
    )


# ---------------------------------------------------------------------------
# Database and build-manifest serialization
# ---------------------------------------------------------------------------


def save_database(db: UnitDatabase, out_dir) -> None:
    """Serialize *db* as ``units.knnf`` + ``db.json`` under *out_dir*."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    units_seq = FeatureSequence(
        frames=db.units, frame_rate_hz=db.frame_rate_hz, source_id=db.speaker_id
    )
    save_features(units_seq, out / DB_UNITS_NAME)
    segments = []
    for source_id, start_row, n_rows in db.segments():
        start = int(db.frame_index[start_row])
        run = db.frame_index[start_row : start_row + n_rows]
        if not np.array_equal(run, np.arange(start, start + n_rows)):
            raise ValidationError(
                f"cannot serialize database: rows of {source_id!r} are not a "
                "consecutive frame run"
            )
        segments.append(
            {"source_id": source_id, "start_frame": start, "n_frames": n_rows}
        )
    manifest = {
        "format": _DB_FORMAT,
        "version": 1,
        "speaker_id": db.speaker_id,
        "frame_rate_hz": db.frame_rate_hz,
        "n_units": db.num_units,
        "dim": db.dim,
        "units_file": DB_UNITS_NAME,
        "segments": segments,
    }
    (out / DB_MANIFEST_NAME).write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    )


def load_database(db_dir) -> UnitDatabase:
    """Load a database directory written by :func:`save_database`."""
    root = Path(db_dir)
    manifest_path = root / DB_MANIFEST_NAME
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{manifest_path}: invalid JSON ({exc})") from exc
    if manifest.get("format") != _DB_FORMAT:
        raise ValidationError(f"{manifest_path}: not a unit-database manifest")
    if manifest.get("version") != 1:
        raise ValidationError(
            f"{manifest_path}: unsupported version {manifest.get('version')}"
        )
    units_seq = load_features(root / manifest["units_file"])
    n = units_seq.num_frames
    source_ids = []
    source_index = np.empty(n, dtype=np.int32)
    frame_index = np.empty(n, dtype=np.int32)
    pos = 0
    for seg in manifest["segments"]:
        sid, start, count = seg["source_id"], seg["start_frame"], seg["n_frames"]
        if sid not in source_ids:
            source_ids.append(sid)
        source_index[pos : pos + count] = source_ids.index(sid)
        frame_index[pos : pos + count] = np.arange(start, start + count)
        pos += count
    if pos != n:
        raise ValidationError(
            f"{manifest_path}: segments cover {pos} rows but unit file has {n}"
        )
    rate = float(manifest["frame_rate_hz"])
    if float(np.float32(rate)) != units_seq.frame_rate_hz:
        raise ValidationError(
            f"{manifest_path}: frame rate disagrees with unit file header"
        )
    return UnitDatabase(
        units=units_seq.frames,
        source_ids=tuple(source_ids),
        source_index=source_index,
        frame_index=frame_index,
        frame_rate_hz=rate,
        speaker_id=manifest["speaker_id"],
    )


def load_build_manifest(path) -> tuple:
    """Parse a build manifest: JSON with ``speaker_id`` and ``files``.

    File entries are resolved relative to the manifest's directory.
    Returns ``(speaker_id, [paths])``.
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict) or "speaker_id" not in data or "files" not in data:
        raise ValidationError(f"{path}: manifest needs 'speaker_id' and 'files'")
    files = data["files"]
    if not isinstance(files, list) or not all(isinstance(f, str) for f in files):
        raise ValidationError(f"{path}: 'files' must be a list of relative paths")
    base = path.parent
    return str(data["speaker_id"]), [base / f for f in files]
