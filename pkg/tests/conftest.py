import numpy as np
import pytest

from knnmorph import FeatureSequence, database_from_sequences


def random_sequence(rng, t, d, rate=50.0, source_id="seq"):
    frames = rng.standard_normal((t, d)).astype(np.float32)
    return FeatureSequence(frames=frames, frame_rate_hz=rate, source_id=source_id)


def random_database(rng, n, d, rate=50.0, speaker_id="target", n_utts=1):
    """Random db of *n* rows split over *n_utts* utterances."""
    per = n // n_utts
    counts = [per] * (n_utts - 1) + [n - per * (n_utts - 1)]
    seqs = [
        random_sequence(rng, c, d, rate=rate, source_id=f"utt{i}")
        for i, c in enumerate(counts)
    ]
    return database_from_sequences(seqs, speaker_id=speaker_id)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
