"""Round-trip checks against real pretrained checkpoints.

Opt in by pointing these environment variables at downloaded artifacts
(see bridge/README.md):

    BRIDGE_WAVLM_DIR       local WavLM-Large model directory
    BRIDGE_HIFIGAN_CKPT    prematched HiFi-GAN state dict (.pt)
    BRIDGE_SPK_CKPT        TorchScript speaker encoder (.pt)

Without them every test here skips; nothing else depends on them.
"""

import json

import numpy as np
import pytest

from knnmorph_bridge.config import BridgeConfig
from knnmorph_bridge.embeddings import extract_embeddings
from knnmorph_bridge.hifigan import vocode
from knnmorph_bridge.knnf import read_knnf
from knnmorph_bridge.wavlm import extract_features
from knnmorph_bridge.audio import load_wav, save_wav

from conftest import real_checkpoint_env, sine_wave

WAVLM = real_checkpoint_env("BRIDGE_WAVLM_DIR")
HIFIGAN = real_checkpoint_env("BRIDGE_HIFIGAN_CKPT")
SPK = real_checkpoint_env("BRIDGE_SPK_CKPT")


@pytest.mark.skipif(WAVLM is None, reason="BRIDGE_WAVLM_DIR not set")
class TestRealExtraction:
    def test_one_second_contract(self, tmp_path):
        audio_dir = tmp_path / "audio"
        audio_dir.mkdir()
        save_wav(audio_dir / "one.wav", sine_wave(1.0))
        config = BridgeConfig(wavlm_path=WAVLM, trim_silence=False)
        written = extract_features(audio_dir, tmp_path / "out", config)
        frames, rate = read_knnf(written[0])
        assert rate == 50.0
        assert abs(frames.shape[0] - 50) <= 2
        assert frames.shape[1] == 1024

    def test_same_file_twice_identical(self, tmp_path):
        audio_dir = tmp_path / "audio"
        audio_dir.mkdir()
        save_wav(audio_dir / "a.wav", sine_wave(1.0))
        config = BridgeConfig(wavlm_path=WAVLM)
        extract_features(audio_dir, tmp_path / "o1", config)
        extract_features(audio_dir, tmp_path / "o2", config)
        assert (tmp_path / "o1" / "a.knnf").read_bytes() == (
            tmp_path / "o2" / "a.knnf"
        ).read_bytes()


@pytest.mark.skipif(
    WAVLM is None or HIFIGAN is None,
    reason="BRIDGE_WAVLM_DIR / BRIDGE_HIFIGAN_CKPT not set",
)
class TestRealRoundTrip:
    def test_extract_then_vocode_nonsilent(self, tmp_path):
        audio_dir = tmp_path / "audio"
        audio_dir.mkdir()
        save_wav(audio_dir / "u.wav", sine_wave(2.0, freq=180.0))
        config = BridgeConfig(wavlm_path=WAVLM, hifigan_checkpoint=HIFIGAN)
        written = extract_features(audio_dir, tmp_path / "feats", config)
        frames, _ = read_knnf(written[0])
        out_wav = tmp_path / "back.wav"
        duration = vocode(written[0], out_wav, config)
        assert duration == pytest.approx(frames.shape[0] / 50.0, abs=1.0 / 50.0)
        audio, rate = load_wav(out_wav)
        assert rate == 16_000
        rms = float(np.sqrt(np.mean(audio.astype(np.float64) ** 2)))
        assert rms > 1e-4  # audibly non-silent


@pytest.mark.skipif(SPK is None, reason="BRIDGE_SPK_CKPT not set")
class TestRealEmbeddings:
    def test_duplicate_files_secs_one(self, tmp_path):
        audio_dir = tmp_path / "audio"
        audio_dir.mkdir()
        wave = sine_wave(1.5)
        save_wav(audio_dir / "a.wav", wave)
        save_wav(audio_dir / "b.wav", wave)
        config = BridgeConfig(speaker_encoder_checkpoint=SPK)
        out = tmp_path / "emb.json"
        extract_embeddings(audio_dir, out, config)
        data = json.loads(out.read_text())
        a = np.array(data["items"][0]["embedding"])
        b = np.array(data["items"][1]["embedding"])
        cos = float(np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b)))
        assert cos == pytest.approx(1.0, abs=1e-4)
