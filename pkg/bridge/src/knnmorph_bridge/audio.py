"""WAV loading and the standard preprocessing chain.

All models here expect 16 kHz mono float32 in [-1, 1]. Preprocessing
follows the usual recipe: resample, trim leading/trailing silence with
an energy VAD, normalize loudness to a target RMS level (-20 dBFS by
default).
"""

from __future__ import annotations

import math

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly

TARGET_SAMPLE_RATE = 16_000


def load_wav(path) -> tuple:
    """Read a WAV file as (float32 mono in [-1, 1], sample_rate)."""
    rate, data = wavfile.read(path)
    if data.ndim == 2:
        data = data.mean(axis=1)
    if data.dtype == np.int16:
        audio = data.astype(np.float32) / 32768.0
    elif data.dtype == np.int32:
        audio = data.astype(np.float32) / 2147483648.0
    elif data.dtype == np.uint8:
        audio = (data.astype(np.float32) - 128.0) / 128.0
    else:
        audio = data.astype(np.float32)
    return audio, int(rate)


def save_wav(path, audio: np.ndarray, rate: int = TARGET_SAMPLE_RATE) -> None:
    audio = np.clip(np.asarray(audio, dtype=np.float32), -1.0, 1.0)
    wavfile.write(path, rate, audio)


def resample_to_16k(audio: np.ndarray, rate: int) -> np.ndarray:
    if rate == TARGET_SAMPLE_RATE:
        return np.asarray(audio, dtype=np.float32)
    if rate <= 0:
        raise ValueError(f"invalid sample rate {rate}")
    g = math.gcd(TARGET_SAMPLE_RATE, rate)
    out = resample_poly(audio, TARGET_SAMPLE_RATE // g, rate // g)
    return out.astype(np.float32)


def trim_silence(
    audio: np.ndarray,
    rate: int = TARGET_SAMPLE_RATE,
    threshold_db: float = -40.0,
    frame_ms: float = 10.0,
) -> np.ndarray:
    """Energy VAD: drop leading/trailing frames quieter than
    ``threshold_db`` relative to the loudest frame."""
    frame = max(1, int(rate * frame_ms / 1000.0))
    n_frames = len(audio) // frame
    if n_frames == 0:
        return audio
    chunks = audio[: n_frames * frame].reshape(n_frames, frame)
    rms = np.sqrt((chunks.astype(np.float64) ** 2).mean(axis=1))
    peak = rms.max()
    if peak <= 0:
        return audio
    active = rms >= peak * 10.0 ** (threshold_db / 20.0)
    idx = np.flatnonzero(active)
    if idx.size == 0:
        return audio
    start = idx[0] * frame
    stop = min(len(audio), (idx[-1] + 1) * frame)
    return audio[start:stop]


def normalize_loudness(audio: np.ndarray, target_dbfs: float = -20.0) -> np.ndarray:
    """Scale to the target RMS level; clip stays within [-1, 1]."""
    rms = float(np.sqrt(np.mean(np.asarray(audio, dtype=np.float64) ** 2)))
    if rms <= 0:
        return np.asarray(audio, dtype=np.float32)
    gain = 10.0 ** (target_dbfs / 20.0) / rms
    return np.clip(audio * gain, -1.0, 1.0).astype(np.float32)


def preprocess(
    audio: np.ndarray,
    rate: int,
    trim: bool = True,
    normalize: bool = True,
    target_dbfs: float = -20.0,
) -> np.ndarray:
    out = resample_to_16k(audio, rate)
    if trim:
        out = trim_silence(out)
    if normalize:
        out = normalize_loudness(out, target_dbfs=target_dbfs)
    return out
