"""Bridge configuration: checkpoint locations and preprocessing toggles."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path


@dataclass
class BridgeConfig:
    wavlm_path: str | None = None  # HF-style local model directory
    hifigan_checkpoint: str | None = None  # state-dict .pt
    hifigan_config: str | None = None  # optional generator-config JSON
    speaker_encoder_checkpoint: str | None = None  # TorchScript .pt
    device: str = "cpu"
    feature_dim: int = 1024  # WavLM-Large layer width
    feature_layer: int = 6
    frame_rate_hz: float = 50.0  # WavLM stride at 16 kHz
    trim_silence: bool = True
    normalize_loudness: bool = True
    target_dbfs: float = -20.0

    @classmethod
    def from_json(cls, path) -> "BridgeConfig":
        data = json.loads(Path(path).read_text())
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"{path}: unknown config keys {sorted(unknown)}")
        return cls(**data)

    def require(self, *names: str) -> None:
        """Check that the named checkpoint paths are set and exist."""
        for name in names:
            value = getattr(self, name)
            if not value:
                raise ValueError(f"config field {name!r} is required for this command")
            if not Path(value).exists():
                raise FileNotFoundError(f"{name}: checkpoint not found at {value}")
