"""Acceptance suite: one test per release criterion.

Each test prints one ``ACCEPTANCE <name>: PASS`` line (visible with
``pytest -s`` or in the ``-rA`` summary). Stated runtime budgets are
asserted; the throughput scan is reported but not gated.
"""

import collections
import json
import math
import time

import numpy as np
import pytest

from knnmorph import (
    ConversionSpec,
    FeatureSequence,
    KnnfFormatError,
    SynthConfig,
    aggregate_ci,
    batch_search,
    build_index,
    centroid_embedding,
    convert,
    database_from_sequences,
    generate,
    label_frames,
    lambda_sweep,
    load_features,
    proxy_secs,
    save_features,
    ablation_run,
)
from knnmorph.cli import main

from conftest import random_database, random_sequence
from test_features import MINIMAL_KNNF
from test_search import oracle_batch


def _report(name, t0, limit_s=None):
    elapsed = time.perf_counter() - t0
    budget = f" ({elapsed:.1f}s < {limit_s:.0f}s)" if limit_s else f" ({elapsed:.1f}s)"
    print(f"\nACCEPTANCE {name}: PASS{budget}")
    if limit_s is not None:
        assert elapsed < limit_s, f"{name} exceeded runtime budget"


class TestEq1Endpoints:
    def test_eq1_endpoints(self):
        t0 = time.perf_counter()
        rng = np.random.default_rng(101)
        for trial in range(100):
            t = int(rng.integers(5, 40))
            n = int(rng.integers(20, 120))
            d = int(rng.integers(4, 32))
            source = random_sequence(rng, t, d, source_id=f"s{trial}")
            extra = random_sequence(rng, n, d, source_id=f"e{trial}")
            db_zero = database_from_sequences([extra], "tgt")
            out0 = convert(source, db_zero, ConversionSpec(k=4, lam=0.0))
            assert np.array_equal(
                out0.converted.frames.view(np.uint32),
                source.frames.view(np.uint32),
            )
            db_self = database_from_sequences([source, extra], "tgt")
            out1 = convert(source, db_self, ConversionSpec(k=1, lam=1.0))
            assert np.array_equal(
                out1.converted.frames.view(np.uint32),
                source.frames.view(np.uint32),
            )
        _report("eq1-endpoints", t0, 60)


class TestOracleEquivalence:
    def test_oracle_equivalence(self):
        t0 = time.perf_counter()
        rng = np.random.default_rng(202)
        db = random_database(rng, 10_000, 64, n_utts=10)
        queries = rng.standard_normal((1000, 64)).astype(np.float32)
        index = build_index(db)
        for k in (1, 4, 8):
            idx, dist = batch_search(queries, index, k)
            want_idx, want_dist = oracle_batch(db.units, queries, k)
            assert np.array_equal(idx, want_idx), f"index mismatch at k={k}"
            assert np.max(np.abs(dist - want_dist)) < 1e-5

        # duplicated rows: exact ties must resolve to the lower row index
        doubled = np.concatenate([db.units, db.units], axis=0)
        db_dup = database_from_sequences(
            [FeatureSequence(doubled, 50.0, "dup")], "tgt"
        )
        index_dup = build_index(db_dup)
        sub = queries[:200]
        for k in (1, 4, 8):
            idx, dist = batch_search(sub, index_dup, k)
            want_idx, want_dist = oracle_batch(db_dup.units, sub, k)
            assert np.array_equal(idx, want_idx), f"tie mismatch at k={k}"
            assert np.max(np.abs(dist - want_dist)) < 1e-5
        # spot-check the rule directly: rank 0 and its duplicate adjacent
        idx1, _ = batch_search(sub, index_dup, 2)
        assert np.all(idx1[:, 0] < 10_000)
        assert np.all(idx1[:, 1] == idx1[:, 0] + 10_000)
        _report("oracle-equivalence", t0, 120)


class TestMorphingMonotonicity:
    def test_morphing_monotonicity(self):
        t0 = time.perf_counter()
        lams = [0.0, 0.25, 0.5, 0.75, 1.0]
        for seed in range(10):
            cfg = SynthConfig(
                n_phones=8,
                dim=64,
                n_speakers=2,
                frames_per_utterance=200,
                utterances_per_speaker=10,
                noise_scale=0.05,
                seed=seed,
            )
            seqs, _ = generate(cfg)
            source = seqs["spk0"][0]
            db = database_from_sequences(seqs["spk1"], "spk1")
            reference = centroid_embedding(db)
            swept = lambda_sweep(source, db, 4, lams)
            values = [proxy_secs(r.converted, reference) for _, r in swept]
            for a, b in zip(values, values[1:]):
                assert b >= a, f"seed {seed}: not non-decreasing: {values}"
            selected_differs = not np.array_equal(
                swept[-1][1].selected.frames, source.frames
            )
            if selected_differs:
                for a, b in zip(values, values[1:]):
                    assert b > a, f"seed {seed}: not strictly increasing: {values}"
        _report("morphing-monotonicity", t0, 60)


class TestContentPreservation:
    def test_content_preservation(self):
        t0 = time.perf_counter()
        for seed in range(10):
            cfg = SynthConfig(
                n_phones=8,
                dim=64,
                n_speakers=2,
                frames_per_utterance=200,
                utterances_per_speaker=10,
                noise_scale=0.05,
                seed=seed,
            )
            seqs, truth = generate(cfg)
            db = database_from_sequences(seqs["spk1"], "spk1")
            index = build_index(db)
            total = recovered = 0
            for source in seqs["spk0"][:5]:
                result = convert(
                    source, db, ConversionSpec(k=4, lam=1.0), index=index
                )
                labels = label_frames(result.converted, truth, "spk1")
                total += labels.size
                recovered += int((labels == truth.labels[source.source_id]).sum())
            rate = recovered / total
            assert rate >= 0.99, f"seed {seed}: recovery {rate:.4f} < 0.99"
        _report("content-preservation", t0, 120)


class TestAblationShape:
    def test_ablation_shape(self):
        t0 = time.perf_counter()
        cfg = SynthConfig(
            n_phones=192,
            dim=64,
            n_speakers=2,
            frames_per_utterance=500,  # 10 s per utterance at 50 Hz
            utterances_per_speaker=60,  # 10-minute target database
            noise_scale=0.05,
            seed=123,
        )
        seqs, _ = generate(cfg)
        db = database_from_sequences(seqs["spk1"], "spk1")
        sources = seqs["spk0"][:4]
        seeds = list(range(6))
        rows = ablation_run(sources, db, [10.0, 60.0, 300.0], seeds, 4, 1.0)
        by_cell = collections.defaultdict(list)
        for row in rows:
            by_cell[(row.duration_seconds, row.seed)].append(row.value)
        mean = {cell: float(np.mean(vals)) for cell, vals in by_cell.items()}
        for seed in seeds:
            assert mean[(300.0, seed)] >= mean[(10.0, seed)], (
                f"seed {seed}: 300 s similarity below 10 s"
            )
        rise_early = np.mean([mean[(60.0, s)] - mean[(10.0, s)] for s in seeds])
        rise_late = np.mean([mean[(300.0, s)] - mean[(60.0, s)] for s in seeds])
        assert rise_late < rise_early, (
            f"no plateau: 10->60 rise {rise_early:.6f}, 60->300 rise {rise_late:.6f}"
        )
        _report("ablation-shape", t0, 300)


class TestCiAggregation:
    def test_ci_aggregation(self):
        t0 = time.perf_counter()
        out = aggregate_ci([1.0, 2.0, 3.0])
        assert abs(out.mean - 2.0) < 1e-12
        assert abs(out.halfwidth - 1.1316) < 1e-4
        rng = np.random.default_rng(303)
        big = rng.normal(5.0, 3.0, size=4000)
        ratio = aggregate_ci(big[:1000]).halfwidth / aggregate_ci(big).halfwidth
        assert abs(ratio - 2.0) < 0.2, f"1/sqrt(n) scaling off: ratio {ratio:.3f}"
        _report("ci-aggregation", t0, 10)


class TestFormatStability:
    def test_format_stability(self, tmp_path):
        t0 = time.perf_counter()
        # golden minimal file: the byte layout fixes the size at
        # 20-byte header+rate plus 4*T*D payload = 28 bytes for 1x2
        golden = tmp_path / "golden.knnf"
        golden.write_bytes(MINIMAL_KNNF)
        seq = load_features(golden)
        assert seq.frames.tolist() == [[1.0, 2.0]]
        assert seq.frame_rate_hz == 50.0
        out = tmp_path / "rewrite.knnf"
        save_features(seq, out)
        assert out.read_bytes() == MINIMAL_KNNF

        rng = np.random.default_rng(404)
        bigger = random_sequence(rng, 17, 9, rate=62.5, source_id="g")
        big_path = tmp_path / "big.knnf"
        save_features(bigger, big_path)
        reparsed = load_features(big_path)
        assert np.array_equal(
            reparsed.frames.view(np.uint32), bigger.frames.view(np.uint32)
        )

        corrupt = {
            "magic": b"XXXX" + MINIMAL_KNNF[4:],
            "version": MINIMAL_KNNF[:4] + (9).to_bytes(4, "little") + MINIMAL_KNNF[8:],
            "truncated": MINIMAL_KNNF[:-4],
            "trailing": MINIMAL_KNNF + b"\x00",
            "zero T": MINIMAL_KNNF[:8] + (0).to_bytes(4, "little") + MINIMAL_KNNF[12:],
            "nonfinite": MINIMAL_KNNF[:20]
            + np.array([np.nan, 1.0], dtype="<f4").tobytes(),
        }
        for name, blob in corrupt.items():
            path = tmp_path / f"{name.replace(' ', '_')}.knnf"
            path.write_bytes(blob)
            with pytest.raises(KnnfFormatError):
                load_features(path)
        _report("format-stability", t0, 10)


class TestCliDeterminism:
    def test_cli_determinism(self, tmp_path):
        t0 = time.perf_counter()
        rng = np.random.default_rng(505)
        corpus = tmp_path / "corpus"
        corpus.mkdir()
        names = []
        for i in range(6):
            seq = random_sequence(rng, 150, 16, source_id=f"u{i}")
            save_features(seq, corpus / f"u{i}.knnf")
            names.append(f"u{i}.knnf")
        (corpus / "manifest.json").write_text(
            json.dumps({"speaker_id": "tgt", "files": names})
        )
        db_dir = tmp_path / "db"
        assert main(["build-db", str(corpus / "manifest.json"), str(db_dir)]) == 0

        src = tmp_path / "src.knnf"
        save_features(random_sequence(rng, 700, 16, source_id="src"), src)

        convert_blobs = []
        for i, threads in enumerate([1, 1, 4]):
            out = tmp_path / f"conv{i}.knnf"
            nbrs = tmp_path / f"nbrs{i}.csv"
            rc = main(
                [
                    "convert",
                    str(src),
                    str(db_dir),
                    str(out),
                    "--threads",
                    str(threads),
                    "--emit-neighbors",
                    str(nbrs),
                ]
            )
            assert rc == 0
            convert_blobs.append(out.read_bytes() + nbrs.read_bytes())
        assert convert_blobs[0] == convert_blobs[1] == convert_blobs[2]

        ablate_blobs = []
        for i, threads in enumerate([1, 1, 4]):
            out = tmp_path / f"abl{i}.csv"
            rc = main(
                [
                    "ablate",
                    "--sources",
                    str(src),
                    "--db",
                    str(db_dir),
                    "--durations",
                    "3,9",
                    "--seeds",
                    "0,1,2",
                    "--out",
                    str(out),
                    "--threads",
                    str(threads),
                ]
            )
            assert rc == 0
            ablate_blobs.append(out.read_bytes())
        assert ablate_blobs[0] == ablate_blobs[1] == ablate_blobs[2]
        _report("cli-determinism", t0, 120)


class TestThroughput:
    @pytest.mark.slow
    def test_throughput_report(self):
        rng = np.random.default_rng(606)
        units = rng.standard_normal((100_000, 1024), dtype=np.float32)
        db = database_from_sequences(
            [FeatureSequence(units, 50.0, "bulk")], "tgt"
        )
        del units
        queries = rng.standard_normal((1000, 1024), dtype=np.float32)
        t_build = time.perf_counter()
        index = build_index(db, block_size=4096)
        build_s = time.perf_counter() - t_build
        t_scan = time.perf_counter()
        idx, dist = batch_search(queries, index, 4, workers=1)
        scan_s = time.perf_counter() - t_scan
        assert idx.shape == (1000, 4)
        assert np.all(np.diff(dist, axis=1) >= 0)
        assert np.all(dist >= 0.0) and np.all(dist <= 2.0)
        verdict = "within" if scan_s < 10.0 else "over"
        print(
            f"\nACCEPTANCE throughput: REPORT scan {scan_s:.1f}s "
            f"(index build {build_s:.1f}s), {verdict} the non-binding 10 s target"
        )
