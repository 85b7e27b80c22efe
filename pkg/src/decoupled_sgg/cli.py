"""Command-line entry point: ``decoupled-sgg <verb> ...``.

Exit codes: 0 success, 2 configuration or validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import ablation, dataset
from .errors import (AnnotationParseError, ConfigError, InfeasibleSplitError, InvalidInputError,
                     NumericalError)
from .structures import TripletClass
from .training import RunConfig, evaluate_model, load_model, train, write_report

log = logging.getLogger("decoupled_sgg")

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"no such file: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc.msg}, line {exc.lineno})") from None


def _require(path, what) -> Path:
    p = Path(path) if path else None
    if p is None or not p.exists():
        raise ConfigError(f"{what} not found: {path}")
    return p


def resolve_run_config(path, seed=None) -> RunConfig:
    """Load a run config, filling vocabulary sizes from the corpus header when absent."""
    data = _read_json(path)
    corpus_dir = _require(data.get("corpus"), "corpus")
    _require(data.get("split"), "split file")
    head = _read_json(corpus_dir / "header.json")
    model = dict(data.get("model", {}))
    model.setdefault("num_objects", len(head["objects"]))
    model.setdefault("num_relations", len(head["relations"]))
    data["model"] = model
    if seed is not None:
        data["seed"] = seed
    return RunConfig.from_dict(data)


def cmd_gen_data(args) -> None:
    cfg = dataset.GeneratorConfig.from_dict(_read_json(args.config) if args.config else {})
    seed = 0 if args.seed is None else args.seed
    out = Path(args.out or "corpus")
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create {out}: {exc}") from None
    videos, frames = dataset.generate_synthetic(cfg, seed)
    dataset.write_corpus(out, cfg, seed, videos, frames)
    print(f"wrote {len(videos)} videos to {out}")


def _parse_holdout(text: str):
    p = Path(text)
    if p.exists():
        return [TripletClass(*c) for c in _read_json(p)]
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"holdout must be a count, a fraction, or a JSON file of triplets: {text!r}") from None


def cmd_make_split(args) -> None:
    corpus = dataset.load_corpus(_require(args.corpus, "corpus"))
    holdout = _parse_holdout(args.holdout) if args.holdout else []
    split = dataset.make_compositional_split(corpus.videos, holdout, 0 if args.seed is None else args.seed,
                                             args.test_fraction)
    out = Path(args.out) if args.out else corpus.root / "split.json"
    split.save(out)
    print(f"{len(split.unseen)} unseen / {len(split.seen)} seen classes; "
          f"{len(split.train_videos)} train / {len(split.test_videos)} test videos -> {out}")


def cmd_train(args) -> None:
    cfg = resolve_run_config(_require(args.config, "config"), args.seed)
    out = Path(args.out or "run")
    out.mkdir(parents=True, exist_ok=True)
    corpus = dataset.load_corpus(cfg.corpus)
    split = dataset.SplitSpec.load(cfg.split)
    cfg.save(out / "config.json")
    result = train(cfg, corpus, split, out, resume=args.resume, progress=True)
    print(f"trained {result.steps_run} steps -> {out / 'final.pt'}")


def cmd_eval(args) -> None:
    ckpt = _require(args.checkpoint, "checkpoint")
    model, meta = load_model(ckpt)
    cfg = RunConfig.from_dict(meta["run"])
    corpus = dataset.load_corpus(_require(args.corpus or cfg.corpus, "corpus"))
    split = dataset.SplitSpec.load(_require(args.split or cfg.split, "split file"))
    out = Path(args.out or "eval")
    out.mkdir(parents=True, exist_ok=True)
    report = evaluate_model(model, corpus, split.test_videos, split, cfg, out / "predictions.jsonl")
    write_report(report, out)
    print(report.to_json(), end="")


def cmd_ablate(args) -> None:
    base = resolve_run_config(_require(args.config, "config"), args.seed)
    names = [v.strip() for v in args.variants.split(",") if v.strip()]
    for name in names:
        ablation.variant_overrides(name)
    corpus = dataset.load_corpus(base.corpus)
    split = dataset.SplitSpec.load(base.split)
    out = Path(args.out or "ablation")
    out.mkdir(parents=True, exist_ok=True)
    rows = ablation.run_ablation(base, names, corpus, split, out)
    table = ablation.format_table(rows)
    (out / "ablation.csv").write_text(table)
    print(table, end="")


def cmd_plot(args) -> None:
    from . import plotting

    out = Path(args.out or "plots")
    written = []
    for path in args.inputs:
        p = _require(path, "input")
        if p.suffix == ".csv":
            with open(p, newline="") as fp:
                rows = list(csv.DictReader(fp))
            written += plotting.plot_loss_log(rows, out, p.stem)
    reports = [p for p in map(Path, args.inputs) if p.suffix == ".json"]
    if reports:
        written += plotting.plot_reports({str(p.parent.name or p.stem): _read_json(p) for p in reports}, out)
    for w in written:
        print(w)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="decoupled-sgg", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--seed", type=int, help="overrides the config seed")
    common.add_argument("--out", help="output path")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", parents=[common], help="generate a synthetic corpus")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("make-split", parents=[common], help="build a compositional train/test split")
    p.add_argument("--corpus", required=True, help="corpus directory written by gen-data")
    p.add_argument("--holdout", default="", help="class count, fraction, or JSON list of [s, o, r]")
    p.add_argument("--test-fraction", type=float, default=0.0,
                   help="share of the remaining videos also sent to test")
    p.set_defaults(func=cmd_make_split)

    p = sub.add_parser("train", parents=[common], help="train a model")
    p.add_argument("--resume", help="checkpoint to continue from")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint")
    p.add_argument("--checkpoint", required=True, help="final.pt or ckpt_*.pt from train")
    p.add_argument("--corpus", help="defaults to the corpus recorded in the checkpoint")
    p.add_argument("--split", help="defaults to the split recorded in the checkpoint")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", parents=[common], help="train and evaluate several variants")
    p.add_argument("--variants", default="base,dds",
                   help="comma-separated; supported: " + ", ".join(ablation.supported_variants()))
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("plot", parents=[common], help="plot loss logs and evaluation reports")
    p.add_argument("inputs", nargs="+", help="loss_log.csv files and/or report.json files")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, InvalidInputError, AnnotationParseError, InfeasibleSplitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return 0


if __name__ == "__main__":
    sys.exit(main())
