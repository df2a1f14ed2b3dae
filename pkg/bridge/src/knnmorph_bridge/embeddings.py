"""Speaker embedding extraction to EmbeddingSet JSON.

The speaker encoder is any TorchScript module mapping a (1, samples)
float32 16 kHz waveform to a (1, E) embedding (ECAPA-style encoders
ship in this form). Output JSON follows the engine's EmbeddingSet
schema: {"label", "dim", "items": [{"utterance_id", "embedding"}]}.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import torch

from .audio import load_wav, preprocess
from .config import BridgeConfig


class SpeakerEncoder:
    def __init__(self, config: BridgeConfig):
        config.require("speaker_encoder_checkpoint")
        self.config = config
        self.device = torch.device(config.device)
        self.model = torch.jit.load(
            config.speaker_encoder_checkpoint, map_location=self.device
        )
        self.model.eval()

    @torch.inference_mode()
    def embed(self, audio_16k: np.ndarray) -> np.ndarray:
        wav = torch.as_tensor(audio_16k, dtype=torch.float32, device=self.device)
        out = self.model(wav[None, :])
        return out.reshape(-1).cpu().numpy().astype(np.float32)

    def embed_file(self, wav_path) -> np.ndarray:
        audio, rate = load_wav(wav_path)
        audio = preprocess(
            audio,
            rate,
            trim=self.config.trim_silence,
            normalize=self.config.normalize_loudness,
            target_dbfs=self.config.target_dbfs,
        )
        return self.embed(audio)


def extract_embeddings(audio_dir, out_json, config: BridgeConfig, label=None) -> int:
    """Embed every ``*.wav`` under *audio_dir* into one EmbeddingSet.

    Returns the number of embedded utterances (0 writes nothing).
    """
    audio_dir = Path(audio_dir)
    wavs = sorted(audio_dir.glob("*.wav"))
    if not wavs:
        return 0
    encoder = SpeakerEncoder(config)
    items = []
    dim = None
    for wav_path in wavs:
        vec = encoder.embed_file(wav_path)
        if dim is None:
            dim = int(vec.shape[0])
        elif vec.shape[0] != dim:
            raise ValueError(f"{wav_path}: embedding dim {vec.shape[0]} != {dim}")
        items.append(
            {
                "utterance_id": wav_path.stem,
                "embedding": [float(x) for x in vec],
            }
        )
        print(f"{wav_path.name}: embedded ({dim} dims)")
    payload = {
        "label": label if label is not None else audio_dir.name,
        "dim": dim,
        "items": items,
    }
    Path(out_json).write_text(json.dumps(payload, indent=2) + "\n")
    return len(items)
