"""Command-line entry point: synth, zeroshot, train, infer, eval.

Exit codes: 0 success, 1 runtime failure, 2 usage error. Every command
is deterministic given its seed. An INI-style config file (one section
per subcommand, key = long flag name) supplies defaults; explicit flags
win.
"""

from __future__ import annotations

import argparse
import configparser
import json
import sys
from pathlib import Path

import numpy as np

from . import dataset_io, metrics, temporal, training, zeroshot
from .errors import AvlocError
from .manifest import split_entries
from .synth import SynthSpec, synth_generate
from .training import TrainConfig

COMMANDS = ("synth", "zeroshot", "train", "infer", "eval")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="avloc",
        description="Audio-visual event localization toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="INI config file; flags override its values")
        p.add_argument("--seed", type=int, default=0, help="seed for all randomness")
        p.add_argument("--jobs", type=int, default=1, help="max worker threads")

    p_synth = sub.add_parser("synth", help="generate a synthetic embedding dataset")
    common(p_synth)
    p_synth.add_argument("--out", required=True, help="output dataset directory")
    p_synth.add_argument("--classes", type=int, default=12)
    p_synth.add_argument("--seen", type=int, default=8)
    p_synth.add_argument("--videos-per-class", type=int, default=20)
    p_synth.add_argument("--segments", type=int, default=10)
    p_synth.add_argument("--dim", type=int, default=64)
    p_synth.add_argument("--sigma", type=float, default=0.0, help="embedding noise level")
    p_synth.add_argument("--background-rate", type=float, default=0.3)
    p_synth.add_argument("--special-anchor", type=float, default=0.8)
    p_synth.add_argument("--force", action="store_true", help="overwrite a non-empty out dir")

    p_zero = sub.add_parser("zeroshot", help="run the training-free baseline")
    common(p_zero)
    p_zero.add_argument("--data", required=True, help="dataset directory")
    p_zero.add_argument("--split", default="test", choices=("train", "val", "test", "all"))
    p_zero.add_argument("--out", required=True, help="predictions JSONL path")
    p_zero.add_argument("--report", help="metric report JSON path")
    p_zero.add_argument("--dump-scores", help="debug dump of raw similarity rows (JSONL)")

    p_train = sub.add_parser("train", help="fine-tune the temporal encoder")
    common(p_train)
    p_train.add_argument("--data", required=True)
    p_train.add_argument("--out-dir", required=True)
    p_train.add_argument("--epochs", type=int, default=5)
    p_train.add_argument("--batch-size", type=int, default=32)
    p_train.add_argument("--lr", type=float, default=5e-5)
    p_train.add_argument("--fusion", default="sqrt", choices=training.FUSION_MODES)
    p_train.add_argument("--ratio", type=float, default=1.0, help="per-class training data ratio")
    p_train.add_argument("--tau", type=float, default=0.07, help="softmax temperature")
    p_train.add_argument("--learn-tau", action="store_true")
    p_train.add_argument("--variant", default="temporal", choices=temporal.VARIANTS)
    p_train.add_argument("--scope", default="intra", choices=temporal.ATTENTION_SCOPES)
    p_train.add_argument("--layers", type=int, default=1)
    p_train.add_argument("--heads", type=int, default=8)
    p_train.add_argument("--ffn", type=int, default=2048)
    p_train.add_argument("--no-share", action="store_true", help="per-modality parameters")

    p_infer = sub.add_parser("infer", help="open-vocabulary inference from a checkpoint")
    common(p_infer)
    p_infer.add_argument("--data", required=True)
    p_infer.add_argument("--checkpoint", required=True)
    p_infer.add_argument("--split", default="test", choices=("train", "val", "test", "all"))
    p_infer.add_argument("--fusion", default="sqrt", choices=training.FUSION_MODES)
    p_infer.add_argument("--tau", type=float, default=0.07)
    p_infer.add_argument("--out", required=True, help="predictions JSONL path")

    p_eval = sub.add_parser("eval", help="score predictions against a manifest")
    common(p_eval)
    p_eval.add_argument("--data", required=True)
    p_eval.add_argument("--predictions", required=True)
    p_eval.add_argument("--split", default="test", choices=("train", "val", "test", "all"))
    p_eval.add_argument("--report", required=True, help="report JSON path")
    p_eval.add_argument("--per-class", help="optional per-class CSV path")
    return parser


def _apply_config_file(parser: argparse.ArgumentParser, argv: list[str]) -> None:
    """Merge an INI config under the flags: file values become defaults."""
    if "--config" not in argv:
        return
    path = argv[argv.index("--config") + 1]
    command = next((a for a in argv if a in COMMANDS), None)
    if command is None:
        return
    ini = configparser.ConfigParser()
    if not ini.read(path):
        raise AvlocError(f"config file {path!r} not found or unreadable")
    if command not in ini:
        return
    sub_actions = next(
        a for a in parser._actions if isinstance(a, argparse._SubParsersAction)
    )
    subparser = sub_actions.choices[command]
    coerce = {}
    for action in subparser._actions:
        for option in action.option_strings:
            coerce[option.lstrip("-")] = action
    defaults = {}
    for key, raw in ini[command].items():
        action = coerce.get(key)
        if action is None:
            raise AvlocError(f"config file {path!r}: unknown option {key!r} for {command}")
        if isinstance(action, argparse._StoreTrueAction):
            defaults[action.dest] = ini[command].getboolean(key)
        elif action.type is not None:
            defaults[action.dest] = action.type(raw)
        else:
            defaults[action.dest] = raw
    subparser.set_defaults(**defaults)


def cmd_synth(args) -> int:
    spec = SynthSpec(
        n_classes=args.classes,
        n_seen=args.seen,
        videos_per_class=args.videos_per_class,
        segments=args.segments,
        dim=args.dim,
        noise_sigma=args.sigma,
        background_rate=args.background_rate,
        special_anchor=args.special_anchor,
        seed=args.seed,
    )
    dataset = synth_generate(spec)
    out = dataset_io.write_dataset(dataset, args.out, force=args.force)
    totals = dataset.plan.totals()
    print(
        f"wrote {len(dataset.samples)} videos to {out} "
        f"(train={totals['train']} val={totals['val']} test={totals['test']})"
    )
    return 0


def _load_dataset(args, need_vocab_check=True):
    vocab = dataset_io.load_vocabulary(args.data)
    entries = dataset_io.load_entries(args.data, vocab=vocab if need_vocab_check else None)
    text = dataset_io.load_text_embeddings(args.data, vocab)
    return vocab, entries, text


def cmd_zeroshot(args) -> int:
    vocab, entries, text = _load_dataset(args)
    samples = dataset_io.load_samples(args.data, entries, split=args.split)
    preds, failures = zeroshot.batch_localize(samples, text, vocab, jobs=args.jobs)
    for failure in failures:
        print(f"error: {failure.video_id}: {failure.error}", file=sys.stderr)
    if failures:
        return 1
    dataset_io.save_predictions(preds, args.out)
    if args.dump_scores:
        with open(args.dump_scores, "w", encoding="utf-8") as fh:
            for sample in samples:
                s_audio, s_visual = zeroshot.similarity_pair(sample.audio, sample.visual, text)
                fh.write(
                    json.dumps(
                        {
                            "video_id": sample.video_id,
                            "audio": np.round(s_audio, 6).tolist(),
                            "visual": np.round(s_visual, 6).tolist(),
                        }
                    )
                    + "\n"
                )
    if args.report:
        labels = [s.label for s in samples]
        result = metrics.evaluate(preds, labels, vocab)
        result.save_json(args.report)
        total = result.reports["total"]
        print(f"zeroshot {args.split}: avg={total.avg:.4f} over {total.video_count} videos")
    else:
        print(f"zeroshot {args.split}: wrote {len(preds)} predictions")
    return 0


def cmd_train(args) -> int:
    vocab, entries, text = _load_dataset(args)
    train_samples = dataset_io.load_samples(args.data, entries, split="train")
    val_samples = dataset_io.load_samples(args.data, entries, split="val")
    if not train_samples:
        raise AvlocError("train split is empty")
    dim = train_samples[0].audio.dim
    model_config = temporal.TemporalEncoderConfig(
        layers=args.layers,
        dim=dim,
        heads=args.heads,
        ffn_dim=args.ffn,
        variant=args.variant,
        attention_scope=args.scope,
        share_modalities=not args.no_share,
    )
    params = temporal.init_params(model_config, seed=args.seed)
    train_config = TrainConfig(
        batch_size=args.batch_size,
        epochs=args.epochs,
        learning_rate=args.lr,
        fusion=args.fusion,
        temperature=args.tau,
        learn_temperature=args.learn_tau,
        data_ratio=args.ratio,
        seed=args.seed,
    )
    seen_text = dataset_io.seen_text_embeddings(text, vocab)

    val_fn = None
    if val_samples:
        val_labels = [s.label for s in val_samples]

        def val_fn(p):
            preds = training.infer_samples(
                p, val_samples, text, vocab, fusion=args.fusion, temperature=args.tau
            )
            report = metrics.evaluate(preds, val_labels, vocab).reports["total"]
            return report.avg if report is not None else 0.0

    result = training.fit(params, train_samples, seen_text, vocab, train_config, val_fn=val_fn)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    checkpoint = out_dir / "checkpoint.ovtm"
    temporal.save_checkpoint(result.params, checkpoint)
    with open(out_dir / "trace.jsonl", "w", encoding="utf-8") as fh:
        for record in result.trace:
            fh.write(json.dumps(record.to_dict()) + "\n")
    last = result.trace[-1]
    best = f" best_epoch={result.best_epoch}" if result.best_epoch is not None else ""
    print(
        f"trained {model_config.variant}/{model_config.attention_scope} "
        f"({temporal.param_count(model_config)} params) for {len(result.trace)} epochs: "
        f"final loss={last.loss:.4f}{best}; checkpoint at {checkpoint}"
    )
    return 0


def cmd_infer(args) -> int:
    vocab, entries, text = _load_dataset(args)
    samples = dataset_io.load_samples(args.data, entries, split=args.split)
    params = temporal.load_checkpoint(args.checkpoint)
    preds = training.infer_samples(
        params, samples, text, vocab, fusion=args.fusion, temperature=args.tau
    )
    dataset_io.save_predictions(preds, args.out)
    print(f"infer {args.split}: wrote {len(preds)} predictions to {args.out}")
    return 0


def cmd_eval(args) -> int:
    vocab, entries, text = _load_dataset(args)
    wanted = split_entries(entries, args.split)
    labels = [e.label() for e in wanted]
    preds = dataset_io.load_predictions(args.predictions)
    result = metrics.evaluate(preds, labels, vocab)
    result.save_json(args.report)
    if args.per_class:
        result.save_per_class_csv(args.per_class)
    for scope in metrics.REPORT_SCOPES:
        report = result.reports[scope]
        if report is None:
            print(f"{scope}: empty scope")
        else:
            print(
                f"{scope}: acc={report.accuracy:.4f} seg={report.segment_f1:.4f} "
                f"eve={report.event_f1:.4f} avg={report.avg:.4f} ({report.video_count} videos)"
            )
    return 0


_HANDLERS = {
    "synth": cmd_synth,
    "zeroshot": cmd_zeroshot,
    "train": cmd_train,
    "infer": cmd_infer,
    "eval": cmd_eval,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config_file(parser, argv)
        args = parser.parse_args(argv)
        return _HANDLERS[args.command](args)
    except AvlocError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())
