"""HiFi-GAN V1 generator for decoding features back to waveforms.

Standard public generator architecture (transposed-conv upsampling with
multi-receptive-field residual blocks), configured by default for
1024-dim inputs at 50 frames/s upsampled 320x to 16 kHz samples.
Checkpoints are pretrained state dicts referenced from BridgeConfig;
nothing is trained here.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn
from torch.nn.utils import remove_weight_norm, weight_norm

from .audio import save_wav
from .config import BridgeConfig
from .knnf import read_knnf

LRELU_SLOPE = 0.1


@dataclass
class GeneratorConfig:
    input_dim: int = 1024
    upsample_initial_channel: int = 512
    upsample_rates: tuple = (5, 4, 4, 2, 2)  # product 320: 50 Hz -> 16 kHz
    upsample_kernel_sizes: tuple = (11, 8, 8, 4, 4)
    resblock_kernel_sizes: tuple = (3, 7, 11)
    resblock_dilation_sizes: tuple = ((1, 3, 5), (1, 3, 5), (1, 3, 5))
    sample_rate: int = 16_000

    @classmethod
    def from_json(cls, path) -> "GeneratorConfig":
        data = json.loads(Path(path).read_text())
        kwargs = {}
        for name in cls.__dataclass_fields__:
            if name in data:
                value = data[name]
                kwargs[name] = tuple(
                    tuple(v) if isinstance(v, list) else v for v in value
                ) if isinstance(value, list) else value
        return cls(**kwargs)

    @property
    def hop_length(self) -> int:
        hop = 1
        for rate in self.upsample_rates:
            hop *= rate
        return hop


def _pad(kernel: int, dilation: int = 1) -> int:
    return (kernel * dilation - dilation) // 2


class ResBlock(nn.Module):
    def __init__(self, channels: int, kernel: int, dilations) -> None:
        super().__init__()
        self.convs1 = nn.ModuleList(
            [
                weight_norm(
                    nn.Conv1d(
                        channels,
                        channels,
                        kernel,
                        dilation=d,
                        padding=_pad(kernel, d),
                    )
                )
                for d in dilations
            ]
        )
        self.convs2 = nn.ModuleList(
            [
                weight_norm(
                    nn.Conv1d(channels, channels, kernel, padding=_pad(kernel))
                )
                for _ in dilations
            ]
        )

    def forward(self, x):
        for c1, c2 in zip(self.convs1, self.convs2):
            xt = c1(nn.functional.leaky_relu(x, LRELU_SLOPE))
            xt = c2(nn.functional.leaky_relu(xt, LRELU_SLOPE))
            x = x + xt
        return x

    def remove_weight_norm(self):
        for conv in [*self.convs1, *self.convs2]:
            remove_weight_norm(conv)


class Generator(nn.Module):
    def __init__(self, config: GeneratorConfig | None = None) -> None:
        super().__init__()
        config = config or GeneratorConfig()
        self.config = config
        self.conv_pre = weight_norm(
            nn.Conv1d(config.input_dim, config.upsample_initial_channel, 7, padding=3)
        )
        self.ups = nn.ModuleList()
        for i, (rate, kernel) in enumerate(
            zip(config.upsample_rates, config.upsample_kernel_sizes)
        ):
            self.ups.append(
                weight_norm(
                    nn.ConvTranspose1d(
                        config.upsample_initial_channel // (2**i),
                        config.upsample_initial_channel // (2 ** (i + 1)),
                        kernel,
                        stride=rate,
                        padding=(kernel - rate) // 2,
                    )
                )
            )
        self.resblocks = nn.ModuleList()
        for i in range(len(self.ups)):
            channels = config.upsample_initial_channel // (2 ** (i + 1))
            for kernel, dilations in zip(
                config.resblock_kernel_sizes, config.resblock_dilation_sizes
            ):
                self.resblocks.append(ResBlock(channels, kernel, dilations))
        self.conv_post = weight_norm(nn.Conv1d(channels, 1, 7, padding=3))
        self.num_kernels = len(config.resblock_kernel_sizes)

    def forward(self, x):
        x = self.conv_pre(x)
        for i, up in enumerate(self.ups):
            x = up(nn.functional.leaky_relu(x, LRELU_SLOPE))
            xs = None
            for j in range(self.num_kernels):
                block = self.resblocks[i * self.num_kernels + j]
                xs = block(x) if xs is None else xs + block(x)
            x = xs / self.num_kernels
        x = nn.functional.leaky_relu(x)
        x = self.conv_post(x)
        return torch.tanh(x)

    def remove_weight_norm(self):
        remove_weight_norm(self.conv_pre)
        for up in self.ups:
            remove_weight_norm(up)
        for block in self.resblocks:
            block.remove_weight_norm()
        remove_weight_norm(self.conv_post)


def load_generator(config: BridgeConfig) -> Generator:
    config.require("hifigan_checkpoint")
    gen_config = (
        GeneratorConfig.from_json(config.hifigan_config)
        if config.hifigan_config
        else GeneratorConfig(input_dim=config.feature_dim)
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # weight_norm deprecation
        generator = Generator(gen_config)
    state = torch.load(
        config.hifigan_checkpoint, map_location="cpu", weights_only=True
    )
    if isinstance(state, dict) and "generator" in state:
        state = state["generator"]
    state = {k.removeprefix("module."): v for k, v in state.items()}
    generator.load_state_dict(state)
    generator.remove_weight_norm()
    generator.eval().to(torch.device(config.device))
    return generator


@torch.inference_mode()
def vocode(knnf_path, out_wav, config: BridgeConfig, generator=None) -> float:
    """Decode one KNNF file to a 16 kHz waveform; returns its duration.

    Output duration is T * hop_length samples, i.e. about T / 50 s.
    """
    frames, rate = read_knnf(knnf_path)
    if frames.shape[1] != config.feature_dim:
        raise ValueError(
            f"{knnf_path}: D={frames.shape[1]}, expected {config.feature_dim}"
        )
    if generator is None:
        generator = load_generator(config)
    features = torch.as_tensor(frames.T[None, :, :], dtype=torch.float32).to(
        torch.device(config.device)
    )
    audio = generator(features)[0, 0].cpu().numpy().astype(np.float32)
    save_wav(out_wav, audio, generator.config.sample_rate)
    return len(audio) / generator.config.sample_rate
