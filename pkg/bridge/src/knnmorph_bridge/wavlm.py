"""WavLM feature extraction to KNNF files."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch

from .audio import load_wav, preprocess
from .config import BridgeConfig
from .knnf import write_knnf


class FeatureExtractor:
    """Runs a WavLM-style encoder and keeps one hidden layer's output."""

    def __init__(self, config: BridgeConfig):
        config.require("wavlm_path")
        from transformers import WavLMModel

        self.config = config
        self.device = torch.device(config.device)
        self.model = WavLMModel.from_pretrained(config.wavlm_path)
        self.model.eval().to(self.device)

    @torch.inference_mode()
    def extract(self, audio_16k: np.ndarray) -> np.ndarray:
        """(T, feature_dim) float32 features for 16 kHz mono audio."""
        wav = torch.as_tensor(audio_16k, dtype=torch.float32, device=self.device)
        out = self.model(wav[None, :], output_hidden_states=True)
        # hidden_states[0] is the conv front-end; index L is after layer L
        features = out.hidden_states[self.config.feature_layer][0]
        features = features.cpu().numpy().astype(np.float32)
        if features.shape[1] != self.config.feature_dim:
            raise ValueError(
                f"encoder produced D={features.shape[1]}, "
                f"config expects {self.config.feature_dim}"
            )
        return features

    def extract_file(self, wav_path, out_path) -> int:
        """Extract one WAV to one KNNF file; returns the frame count."""
        audio, rate = load_wav(wav_path)
        audio = preprocess(
            audio,
            rate,
            trim=self.config.trim_silence,
            normalize=self.config.normalize_loudness,
            target_dbfs=self.config.target_dbfs,
        )
        if len(audio) < 400:  # shorter than one encoder window
            raise ValueError(f"{wav_path}: too short after preprocessing")
        features = self.extract(audio)
        write_knnf(features, self.config.frame_rate_hz, out_path)
        return features.shape[0]


def extract_features(audio_dir, out_dir, config: BridgeConfig) -> list:
    """Extract every ``*.wav`` under *audio_dir* to KNNF in *out_dir*.

    Returns the list of written paths, in sorted input order.
    """
    audio_dir = Path(audio_dir)
    out_dir = Path(out_dir)
    wavs = sorted(audio_dir.glob("*.wav"))
    if not wavs:
        return []
    out_dir.mkdir(parents=True, exist_ok=True)
    extractor = FeatureExtractor(config)
    written = []
    for wav_path in wavs:
        out_path = out_dir / (wav_path.stem + ".knnf")
        frames = extractor.extract_file(wav_path, out_path)
        print(f"{wav_path.name}: {frames} frames -> {out_path.name}")
        written.append(out_path)
    return written
