"""Command line entry point: ``llvqa {corpus,attrs,extract,train,predict,eval}``.

Exit codes: 0 success, 2 partial per-item failure, 1 fatal error.
"""

import argparse
import json
import logging
import sys

from . import pipeline
from .corpus import CorpusSpec
from .exceptions import LLVQAError
from .features import ABLATIONS

EXIT_OK, EXIT_FATAL, EXIT_PARTIAL = 0, 1, 2


def _common(p):
    p.add_argument("--config", help="JSON run config; command-line flags take precedence")
    p.add_argument("--seed", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--clip-edge", type=int)
    p.add_argument("--beta", type=float)
    p.add_argument("--ablate", choices=[a for a in ABLATIONS if a != "none"])
    p.add_argument("--fusion", choices=["mlp", "mlr"])
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", type=float, dest="learning_rate")
    p.add_argument("--rank-sign", choices=["pred", "gt"])
    p.add_argument("--semantic", help="'builtin' or 'file:<dir>'")
    p.add_argument("--motion", help="'builtin' or 'file:<dir>'")
    p.add_argument("--semantic-seed", type=int)
    p.add_argument("--motion-seed", type=int)
    p.add_argument("--semantic-dim", type=int)
    p.add_argument("--motion-dim", type=int)
    p.add_argument("--cache-dir")
    p.add_argument("--jobs", type=int)


_CONFIG_KEYS = (
    "seed", "k", "clip_edge", "beta", "ablate", "fusion", "epochs", "batch_size", "learning_rate",
    "rank_sign", "semantic", "motion", "semantic_seed", "motion_seed", "semantic_dim", "motion_dim",
    "cache_dir", "jobs",
)


def _config(args):
    return pipeline.RunConfig.load(args.config, **{k: getattr(args, k, None) for k in _CONFIG_KEYS})


def build_parser():
    parser = argparse.ArgumentParser(prog="llvqa", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("corpus", help="generate a synthetic low-light corpus")
    p.add_argument("out", help="output directory")
    p.add_argument("--n-sources", type=int, default=5)
    p.add_argument("--variants", type=int, default=3, help="enhanced versions per source")
    p.add_argument("--frames", type=int, default=64)
    p.add_argument("--width", type=int, default=80)
    p.add_argument("--height", type=int, default=60)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--force", action="store_true")

    p = sub.add_parser("attrs", help="brightness / contrast / colorfulness per video")
    p.add_argument("manifest")
    p.add_argument("--out", required=True)
    p.add_argument("--normalize", action="store_true", help="min-max normalize each column")

    p = sub.add_parser("extract", help="compute and cache clip features")
    p.add_argument("manifest")
    _common(p)

    p = sub.add_parser("train", help="train the quality head")
    p.add_argument("manifest")
    p.add_argument("--out", required=True, help="checkpoint path (.lvqm)")
    p.add_argument("--log", help="JSON-lines training log")
    p.add_argument("--summary", help="write a JSON run summary here")
    _common(p)

    p = sub.add_parser("predict", help="score videos with a checkpoint")
    p.add_argument("inputs", nargs="+", help="a manifest CSV or video files")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True, help="scores CSV")
    _common(p)

    p = sub.add_parser("eval", help="metrics of a predictions CSV against a manifest")
    p.add_argument("predictions")
    p.add_argument("manifest")
    p.add_argument("--out", required=True, help="metrics JSON")
    p.add_argument("--scatter", help="scatter CSV (pred, mos, fitted_pred)")
    return parser


def _report_failures(failures):
    for path, msg in sorted(failures.items()):
        print(f"failed: {path}: {msg}", file=sys.stderr)
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_corpus(args):
    spec = CorpusSpec(
        n_sources=args.n_sources, n_frames=args.frames, width=args.width, height=args.height, seed=args.seed
    )
    manifest, entries = pipeline.write_corpus(args.out, spec, args.variants, force=args.force)
    print(f"wrote {len(entries)} videos and {manifest}")
    return EXIT_OK


def cmd_attrs(args):
    rows, failures = pipeline.video_attribute_table(args.manifest, normalize=args.normalize)
    pipeline.write_attribute_table(args.out, rows)
    print(f"wrote {len(rows)} rows to {args.out}")
    return _report_failures(failures)


def cmd_extract(args):
    config = _config(args)
    entries = pipeline.read_manifest(args.manifest)
    result = pipeline.extract_features([e.path for e in entries], config)
    print(f"features: {result.computed} computed, {result.hits} cached, {len(result.failures)} failed")
    return _report_failures(result.failures)


def cmd_train(args):
    config = _config(args)
    _, records, summary = pipeline.train_from_manifest(args.manifest, config, args.out, args.log)
    for rec in records:
        head = f"[{rec['head']}] " if "head" in rec else ""
        vs = rec["val_srcc"]
        print(f"{head}epoch {rec['epoch']:4d} loss {rec['train_loss']:.4f} val_srcc {'n/a' if vs is None else f'{vs:.4f}'}")
    if args.summary:
        with open(args.summary, "w") as fh:
            json.dump({"config": config.to_dict(), **summary}, fh, indent=2, sort_keys=True)
            fh.write("\n")
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def cmd_predict(args):
    config = _config(args)
    if len(args.inputs) == 1 and args.inputs[0].endswith(".csv"):
        videos = [(e.video_path, e.path) for e in pipeline.read_manifest(args.inputs[0])]
    else:
        videos = [(p, p) for p in args.inputs]
    failures = pipeline.predict_videos(videos, args.checkpoint, config, args.out)
    print(f"wrote {len(videos) - len(failures)} rows to {args.out}")
    return _report_failures(failures)


def cmd_eval(args):
    report = pipeline.evaluate_predictions(args.predictions, args.manifest, args.out, args.scatter)
    print(json.dumps(report.to_dict(), sort_keys=True))
    return EXIT_OK


COMMANDS = {
    "corpus": cmd_corpus,
    "attrs": cmd_attrs,
    "extract": cmd_extract,
    "train": cmd_train,
    "predict": cmd_predict,
    "eval": cmd_eval,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return COMMANDS[args.command](args)
    except (LLVQAError, ValueError, OSError) as exc:
        print(f"llvqa {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
