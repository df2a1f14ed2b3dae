"""Command-line interface.

Every command is deterministic given its flags and input files: no
wall-clock seeding, no timestamps in outputs. Each run writes an
adjacent run-manifest JSON (tool version, full arguments, seeds, input
hashes) from which the artifact can be reproduced byte-identically.

Exit codes: 0 success, 1 I/O failure, 2 validation failure. Errors
print a single ``error: ...`` line on stderr.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from pathlib import Path

from . import __version__
from .errors import ValidationError
from .evaluation import (
    lambda_sweep,
    load_embedding_set,
    load_external_scores,
    proxy_secs,
    centroid_embedding,
    similarity_matrix,
    ablation_run,
    write_ablation_csv,
)
from .features import (
    SubsetSpec,
    build_database,
    database_duration,
    load_build_manifest,
    load_database,
    load_features,
    save_database,
    save_features,
    subset_database,
)
from .retrieval import DEFAULT_K, DEFAULT_LAMBDA, ConversionSpec, convert
from .search import DEFAULT_BLOCK_SIZE
from .synthetic import SynthConfig, generate, save_truth, source_name


def _comma_floats(text: str) -> list:
    try:
        return [float(x) for x in text.split(",") if x.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated floats: {text!r}")


def _comma_ints(text: str) -> list:
    try:
        return [int(x) for x in text.split(",") if x.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated ints: {text!r}")


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _hash_inputs(paths) -> dict:
    hashes = {}
    for p in paths:
        p = Path(p)
        if p.is_dir():
            for child in sorted(p.iterdir()):
                if child.is_file():
                    hashes[str(child)] = _sha256(child)
        elif p.is_file():
            hashes[str(p)] = _sha256(p)
    return dict(sorted(hashes.items()))


def _write_run_manifest(primary_output, command: str, args: dict, seeds, inputs):
    out = Path(primary_output)
    manifest_path = out / "run.json" if out.is_dir() else Path(str(out) + ".run.json")
    payload = {
        "tool_version": __version__,
        "command": command,
        "args": {k: (str(v) if isinstance(v, Path) else v) for k, v in args.items()},
        "seeds": list(seeds),
        "input_hashes": _hash_inputs(inputs),
    }
    manifest_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _cmd_build_db(args) -> int:
    speaker_id, paths = load_build_manifest(args.manifest)
    db = build_database(paths, speaker_id=speaker_id)
    save_database(db, args.out)
    _write_run_manifest(
        args.out,
        "build-db",
        {"manifest": args.manifest, "out": args.out},
        [],
        [args.manifest, *paths],
    )
    print(
        f"n_units={db.num_units} dim={db.dim} "
        f"duration_seconds={database_duration(db):g}"
    )
    return 0


def _cmd_convert(args) -> int:
    source = load_features(args.source)
    db = load_database(args.db)
    spec = ConversionSpec(k=args.k, lam=args.lam)
    result = convert(
        source, db, spec, workers=args.threads, block_size=args.block_size
    )
    save_features(result.converted, args.out)
    if args.emit_neighbors:
        with open(args.emit_neighbors, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "rank", "db_row", "distance"])
            idx = result.neighbor_indices
            dist = result.neighbor_distances
            for t in range(idx.shape[0]):
                for rank in range(idx.shape[1]):
                    writer.writerow(
                        [t, rank, int(idx[t, rank]), repr(float(dist[t, rank]))]
                    )
    _write_run_manifest(
        args.out,
        "convert",
        {
            "source": args.source,
            "db": args.db,
            "out": args.out,
            "k": args.k,
            "lambda": args.lam,
            "emit_neighbors": args.emit_neighbors,
            "threads": args.threads,
            "block_size": args.block_size,
        },
        [],
        [args.source, args.db],
    )
    print(f"converted {source.num_frames} frames (k={spec.k}, lambda={spec.lam:g})")
    return 0


def _cmd_sweep(args) -> int:
    source = load_features(args.source)
    db = load_database(args.db)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    results = lambda_sweep(source, db, args.k, args.lambdas, workers=args.threads)
    reference = centroid_embedding(db)
    summary_path = out_dir / "summary.csv"
    with open(summary_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["lambda", "utterance_id", "proxy_secs"])
        for lam, result in results:
            out_name = f"{source.source_id}_lam{lam:g}.knnf"
            save_features(result.converted, out_dir / out_name)
            writer.writerow(
                [repr(lam), source.source_id, repr(proxy_secs(result.converted, reference))]
            )
    _write_run_manifest(
        out_dir,
        "sweep",
        {
            "source": args.source,
            "db": args.db,
            "out": args.out,
            "k": args.k,
            "lambdas": args.lambdas,
            "threads": args.threads,
        },
        [],
        [args.source, args.db],
    )
    print(f"swept {len(results)} lambda values -> {summary_path}")
    return 0


def _cmd_secs_matrix(args) -> int:
    groups = [load_embedding_set(p) for p in args.sets]
    report = similarity_matrix(groups, policy=args.policy)
    Path(args.out).write_text(report.to_json())
    _write_run_manifest(
        args.out,
        "secs-matrix",
        {"sets": list(args.sets), "policy": args.policy, "out": args.out},
        [],
        args.sets,
    )
    print(f"wrote {len(groups)}x{len(groups)} similarity matrix -> {args.out}")
    return 0


def _cmd_ablate(args) -> int:
    sources = [load_features(p) for p in args.sources]
    db = load_database(args.db)
    scores = load_external_scores(args.scores) if args.scores else None
    rows = ablation_run(
        sources,
        db,
        args.durations,
        args.seeds,
        args.k,
        args.lam,
        external_scores=scores,
        workers=args.threads,
    )
    write_ablation_csv(rows, args.out)
    inputs = [*args.sources, args.db] + ([args.scores] if args.scores else [])
    _write_run_manifest(
        args.out,
        "ablate",
        {
            "sources": list(args.sources),
            "db": args.db,
            "durations": args.durations,
            "seeds": args.seeds,
            "k": args.k,
            "lambda": args.lam,
            "scores": args.scores,
            "out": args.out,
            "threads": args.threads,
        },
        args.seeds,
        inputs,
    )
    print(f"wrote {len(rows)} ablation rows -> {args.out}")
    return 0


def _cmd_subset_db(args) -> int:
    db = load_database(args.db)
    sub = subset_database(
        db, SubsetSpec(duration_seconds=args.duration, seed=args.seed)
    )
    save_database(sub, args.out)
    _write_run_manifest(
        args.out,
        "subset-db",
        {
            "db": args.db,
            "out": args.out,
            "duration": args.duration,
            "seed": args.seed,
        },
        [args.seed],
        [args.db],
    )
    print(
        f"n_units={sub.num_units} dim={sub.dim} "
        f"duration_seconds={database_duration(sub):g}"
    )
    return 0


def _cmd_gen_synth(args) -> int:
    config = SynthConfig(
        n_phones=args.n_phones,
        dim=args.dim,
        n_speakers=args.n_speakers,
        frames_per_utterance=args.frames_per_utterance,
        utterances_per_speaker=args.utterances_per_speaker,
        content_scale=args.content_scale,
        speaker_scale=args.speaker_scale,
        noise_scale=args.noise_scale,
        seed=args.seed,
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    sequences, truth = generate(config)
    n_files = 0
    for speaker_id, seqs in sequences.items():
        files = []
        for u, seq in enumerate(seqs):
            name = f"{source_name(speaker_id, u)}.knnf"
            save_features(seq, out_dir / name)
            files.append(name)
            n_files += 1
        manifest = {"speaker_id": speaker_id, "files": files}
        (out_dir / f"manifest_{speaker_id}.json").write_text(
            json.dumps(manifest, indent=2) + "\n"
        )
    save_truth(truth, out_dir / "truth.json")
    _write_run_manifest(
        out_dir,
        "gen-synth",
        {
            "out": args.out,
            "n_phones": args.n_phones,
            "dim": args.dim,
            "n_speakers": args.n_speakers,
            "frames_per_utterance": args.frames_per_utterance,
            "utterances_per_speaker": args.utterances_per_speaker,
            "content_scale": args.content_scale,
            "speaker_scale": args.speaker_scale,
            "noise_scale": args.noise_scale,
            "seed": args.seed,
        },
        [args.seed],
        [],
    )
    print(f"generated {n_files} feature files -> {out_dir}")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="knnmorph",
        description="Frame-level kNN unit selection and voice morphing "
        "over feature files.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-db", help="assemble a unit database from a manifest")
    p.add_argument("manifest", help="JSON manifest with speaker_id and files")
    p.add_argument("out", help="output database directory")
    p.set_defaults(func=_cmd_build_db)

    p = sub.add_parser("convert", help="convert a source sequence against a database")
    p.add_argument("source", help="source KNNF file")
    p.add_argument("db", help="database directory")
    p.add_argument("out", help="output KNNF file")
    p.add_argument("--k", type=int, default=DEFAULT_K)
    p.add_argument(
        "--lambda", dest="lam", type=float, default=DEFAULT_LAMBDA,
        help="target influence in [0, 1] (default %(default)s)",
    )
    p.add_argument("--emit-neighbors", metavar="CSV", default=None)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--block-size", type=int, default=DEFAULT_BLOCK_SIZE)
    p.set_defaults(func=_cmd_convert)

    p = sub.add_parser("sweep", help="convert at several interpolation weights")
    p.add_argument("source", help="source KNNF file")
    p.add_argument("db", help="database directory")
    p.add_argument("out", help="output directory")
    p.add_argument("--k", type=int, default=DEFAULT_K)
    p.add_argument(
        "--lambdas", type=_comma_floats, default=[0.0, 0.25, 0.5, 0.75, 1.0],
        help="comma-separated weights (default %(default)s)",
    )
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("secs-matrix", help="group similarity matrix from embedding sets")
    p.add_argument("sets", nargs="+", help="EmbeddingSet JSON files, in group order")
    p.add_argument("--policy", choices=["half_ab", "full"], default="half_ab")
    p.add_argument("--out", required=True, help="output report JSON")
    p.set_defaults(func=_cmd_secs_matrix)

    p = sub.add_parser("ablate", help="duration-ablation sweep over database subsets")
    p.add_argument("--sources", nargs="+", required=True, help="source KNNF files")
    p.add_argument("--db", required=True, help="database directory")
    p.add_argument("--durations", type=_comma_floats, required=True,
                   help="comma-separated subset durations in seconds")
    p.add_argument("--seeds", type=_comma_ints, required=True,
                   help="comma-separated subset seeds")
    p.add_argument("--k", type=int, default=DEFAULT_K)
    p.add_argument("--lambda", dest="lam", type=float, default=DEFAULT_LAMBDA)
    p.add_argument("--scores", default=None, help="external per-utterance score CSV")
    p.add_argument("--out", required=True, help="output CSV")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=_cmd_ablate)

    p = sub.add_parser("subset-db", help="duration-limited database subset")
    p.add_argument("db", help="database directory")
    p.add_argument("out", help="output database directory")
    p.add_argument("--duration", type=float, required=True, help="seconds to keep")
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=_cmd_subset_db)

    p = sub.add_parser("gen-synth", help="generate synthetic feature data with truth")
    p.add_argument("out", help="output directory")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n-phones", type=int, default=8)
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--n-speakers", type=int, default=2)
    p.add_argument("--frames-per-utterance", type=int, default=200)
    p.add_argument("--utterances-per-speaker", type=int, default=10)
    p.add_argument("--content-scale", type=float, default=1.0)
    p.add_argument("--speaker-scale", type=float, default=1.0)
    p.add_argument("--noise-scale", type=float, default=0.05)
    p.set_defaults(func=_cmd_gen_synth)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
