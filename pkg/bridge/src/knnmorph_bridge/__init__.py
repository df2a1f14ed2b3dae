"""Bridge between real audio and the knnmorph engine's file formats.

Three inference-only operations around pretrained checkpoints:
feature extraction (WavLM layer 6 -> KNNF), vocoding (KNNF -> 16 kHz
waveform via HiFi-GAN), and speaker-embedding extraction
(-> EmbeddingSet JSON). All data exchange with the engine happens
through files; checkpoints are downloaded separately and referenced
from BridgeConfig.
"""

__version__ = "0.1.0"

from .config import BridgeConfig
from .knnf import read_knnf, write_knnf

__all__ = ["BridgeConfig", "read_knnf", "write_knnf"]
