import json
import os

import numpy as np
import pytest
import torch

from knnmorph_bridge.config import BridgeConfig


def sine_wave(seconds=1.0, rate=16_000, freq=220.0, amplitude=0.3):
    t = np.arange(int(seconds * rate)) / rate
    return (amplitude * np.sin(2 * np.pi * freq * t)).astype(np.float32)


@pytest.fixture(scope="session")
def tiny_wavlm_dir(tmp_path_factory):
    """A small randomly initialized WavLM saved locally: same conv
    front-end stride as the full model (320 samples per frame), narrow
    transformer."""
    from transformers import WavLMConfig, WavLMModel

    cfg = WavLMConfig(
        hidden_size=32,
        num_hidden_layers=6,
        num_attention_heads=2,
        intermediate_size=64,
        conv_dim=(32, 32, 32, 32, 32, 32, 32),
        num_conv_pos_embeddings=16,
        num_conv_pos_embedding_groups=2,
    )
    torch.manual_seed(0)
    model = WavLMModel(cfg)
    path = tmp_path_factory.mktemp("tiny_wavlm")
    model.save_pretrained(path)
    return str(path)


@pytest.fixture(scope="session")
def tiny_hifigan(tmp_path_factory):
    """Random-weights generator checkpoint + matching config JSON."""
    from knnmorph_bridge.hifigan import Generator, GeneratorConfig

    gen_cfg = GeneratorConfig(input_dim=8, upsample_initial_channel=64)
    torch.manual_seed(1)
    generator = Generator(gen_cfg)
    root = tmp_path_factory.mktemp("tiny_hifigan")
    ckpt = root / "generator.pt"
    torch.save({"generator": generator.state_dict()}, ckpt)
    cfg_json = root / "generator.json"
    cfg_json.write_text(
        json.dumps(
            {
                "input_dim": 8,
                "upsample_initial_channel": 64,
            }
        )
    )
    return str(ckpt), str(cfg_json)


class _ToyEncoder(torch.nn.Module):
    """Deterministic waveform -> 16-dim embedding, TorchScript-able."""

    def __init__(self):
        super().__init__()
        torch.manual_seed(2)
        self.proj = torch.nn.Linear(40, 16)

    def forward(self, wav: torch.Tensor) -> torch.Tensor:
        n = wav.shape[1] // 40 * 40
        x = wav[:, :n].reshape(wav.shape[0], -1, 40).mean(dim=1)
        return self.proj(x)


@pytest.fixture(scope="session")
def toy_speaker_encoder(tmp_path_factory):
    path = tmp_path_factory.mktemp("toy_encoder") / "encoder.pt"
    torch.jit.script(_ToyEncoder()).save(str(path))
    return str(path)


@pytest.fixture
def tiny_config(tiny_wavlm_dir, tiny_hifigan, toy_speaker_encoder):
    ckpt, cfg_json = tiny_hifigan
    return BridgeConfig(
        wavlm_path=tiny_wavlm_dir,
        hifigan_checkpoint=ckpt,
        hifigan_config=cfg_json,
        speaker_encoder_checkpoint=toy_speaker_encoder,
        feature_dim=32,
        trim_silence=False,  # synthetic tones have nothing to trim
    )


def real_checkpoint_env(name):
    """Real pretrained checkpoints, opted in via environment variables."""
    value = os.environ.get(name)
    if value and os.path.exists(value):
        return value
    return None
