"""Bridge command line.

Exit codes: 0 success, 1 I/O or checkpoint failure, 2 validation
failure, 3 warning (no input files found).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import BridgeConfig

EXIT_NO_INPUTS = 3


def _load_config(args) -> BridgeConfig:
    if args.config:
        return BridgeConfig.from_json(args.config)
    return BridgeConfig()


def _cmd_extract_features(args) -> int:
    from .wavlm import extract_features

    config = _load_config(args)
    written = extract_features(args.audio_dir, args.out_dir, config)
    if not written:
        print(f"warning: no .wav files under {args.audio_dir}", file=sys.stderr)
        return EXIT_NO_INPUTS
    print(f"wrote {len(written)} feature files -> {args.out_dir}")
    return 0


def _cmd_vocode(args) -> int:
    from .hifigan import vocode

    config = _load_config(args)
    duration = vocode(args.knnf, args.out_wav, config)
    print(f"wrote {duration:.2f} s -> {args.out_wav}")
    return 0


def _cmd_extract_embeddings(args) -> int:
    from .embeddings import extract_embeddings

    config = _load_config(args)
    count = extract_embeddings(args.audio_dir, args.out_json, config, label=args.label)
    if count == 0:
        print(f"warning: no .wav files under {args.audio_dir}", file=sys.stderr)
        return EXIT_NO_INPUTS
    print(f"embedded {count} utterances -> {args.out_json}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="knnmorph-bridge",
        description="Audio <-> feature-file bridge: encoder, vocoder and "
        "speaker-embedding inference around pretrained checkpoints.",
    )
    parser.add_argument(
        "--config", default=None, help="BridgeConfig JSON (checkpoint paths, toggles)"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract-features", help="WAV directory -> KNNF files")
    p.add_argument("audio_dir")
    p.add_argument("out_dir")
    p.set_defaults(func=_cmd_extract_features)

    p = sub.add_parser("vocode", help="KNNF file -> 16 kHz WAV")
    p.add_argument("knnf")
    p.add_argument("out_wav")
    p.set_defaults(func=_cmd_vocode)

    p = sub.add_parser(
        "extract-embeddings", help="WAV directory -> EmbeddingSet JSON"
    )
    p.add_argument("audio_dir")
    p.add_argument("out_json")
    p.add_argument("--label", default=None, help="group label (default: dir name)")
    p.set_defaults(func=_cmd_extract_embeddings)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
