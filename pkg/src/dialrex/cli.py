"""Command-line entry points: train, eval, predict, gradcheck, synth.

Runs are driven by one declarative JSON config; individual keys can be
overridden with repeated ``--set section.key=value`` flags.  Every
output file embeds the config hash and format version (format-pure
corpus files get a sidecar manifest instead).  Exit codes: 0 success,
1 validation failure, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import sys
from pathlib import Path

from .checkpoint import FORMAT_VERSION, load_checkpoint, save_checkpoint
from .corpus import (
    IngestReport,
    RelationSet,
    WhitespaceTokenizer,
    expand_for_training,
    load_dialogre,
)
from .encoder import EncoderConfig
from .evaluation import evaluate_model
from .gradcheck import PARAMETER_GROUPS, make_tiny_fixture, render_report, run_gradcheck
from .knowledge import load_lexicon
from .model import (
    ModelOptions,
    RelationModel,
    TrainConfig,
    build_vocabulary,
    prepare_examples,
    train,
)
from .synth import write_corpus

DEFAULT_CONFIG = {
    "data": {
        "train": None,
        "eval": None,
        "predict": None,
        "relations": None,
        "lexicon": None,
    },
    "encoder": {
        "d_h": 64,
        "layers": 2,
        "max_positions": 512,
        "seed": 0,
    },
    "train": {
        "lambda_r": 1.0,
        "lambda_t": 0.3,
        "lambda_k": 0.1,
        "learning_rate": 3e-5,
        "batch_size": 12,
        "epochs": 20,
        "seed": 0,
        "max_span_len": 10,
        "weight_decay": 0.01,
        "gold_spans_in_fusion": True,
        "guidance_without_gold": False,
        "stop_knowledge_grad": False,
        "cache_knowledge": False,
    },
    "ablation": {
        "disable_fusion": False,
        "disable_knowledge": False,
        "literal_attention": False,
    },
}


def _merge(base: dict, override: dict, path: str = "") -> None:
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ValueError(f"unknown config key {where!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ValueError(f"config key {where!r} must be a section")
            _merge(base[key], value, where)
        else:
            base[key] = value


def _apply_set(config: dict, assignment: str) -> None:
    if "=" not in assignment:
        raise ValueError(f"--set needs KEY=VALUE, got {assignment!r}")
    key, _, raw = assignment.partition("=")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node = config
    parts = key.split(".")
    for part in parts[:-1]:
        if part not in node or not isinstance(node[part], dict):
            raise ValueError(f"unknown config section {part!r} in {key!r}")
        node = node[part]
    if parts[-1] not in node:
        raise ValueError(f"unknown config key {key!r}")
    node[parts[-1]] = value


def load_config(args) -> dict:
    config = copy.deepcopy(DEFAULT_CONFIG)
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as f:
            _merge(config, json.load(f))
    for assignment in getattr(args, "set", None) or []:
        _apply_set(config, assignment)
    if getattr(args, "seed", None) is not None:
        config["train"]["seed"] = args.seed
        config["encoder"]["seed"] = args.seed
    for key, value in config["data"].items():
        if value is not None and not Path(value).exists():
            raise ValueError(f"data.{key} path does not exist: {value}")
    return config


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def _stamp(config: dict) -> dict:
    return {"format_version": FORMAT_VERSION, "config_hash": config_hash(config)}


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=1, sort_keys=True)
        f.write("\n")


def _require(config: dict, key: str) -> str:
    value = config["data"][key]
    if value is None:
        raise ValueError(f"config data.{key} is required for this command")
    return value


def _build_trained_parts(config: dict):
    """Shared ingestion for training: corpus, examples, lexicon, model."""
    encoder_config = EncoderConfig(**config["encoder"])
    train_config = TrainConfig(**config["train"])
    ablation = config["ablation"]
    if ablation["disable_knowledge"]:
        train_config.lambda_k = 0.0
    relations = RelationSet.from_file(_require(config, "relations"))
    report = IngestReport()
    instances = load_dialogre(_require(config, "train"), relations, report)
    tokenizer = WhitespaceTokenizer()
    examples = prepare_examples(expand_for_training(instances), tokenizer,
                                relations, encoder_config.max_positions, report)
    lexicon = None
    if train_config.lambda_k > 0:
        lex_path = config["data"]["lexicon"]
        if lex_path is None:
            raise ValueError(
                "lambda_k > 0 requires data.lexicon (or set "
                "ablation.disable_knowledge)"
            )
        lexicon = load_lexicon(lex_path, relations)
    vocab = build_vocabulary(examples, tokenizer, lexicon)
    options = ModelOptions(disable_fusion=ablation["disable_fusion"],
                           literal_attention=ablation["literal_attention"])
    model = RelationModel(encoder_config, vocab, relations, tokenizer, options)
    return model, examples, train_config, lexicon, report


def cmd_train(args) -> int:
    config = load_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    model, examples, train_config, lexicon, report = _build_trained_parts(config)
    log = train(model, examples, train_config, lexicon)
    stamp = _stamp(config)
    save_checkpoint(model, out / "model.ckpt",
                    extra={**stamp, "fusion": model.options.fusion_mode(),
                           "ablation": config["ablation"]})
    _write_json(out / "metrics.json", {
        **stamp,
        "fusion": model.options.fusion_mode(),
        "ablation": config["ablation"],
        "epochs": log,
    })
    _write_json(out / "ingest_report.json", {**stamp, **report.to_dict()})
    final = log[-1]["loss_total"] if log else float("nan")
    print(f"trained {len(examples)} examples for {train_config.epochs} epochs "
          f"(final loss {final:.4f})")
    print(f"checkpoint: {out / 'model.ckpt'}")
    return 0


def cmd_eval(args) -> int:
    config = load_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    model = load_checkpoint(args.checkpoint)
    if config["data"]["relations"] is not None:
        file_relations = RelationSet.from_file(config["data"]["relations"])
        if file_relations.labels != model.relations.labels:
            raise ValueError(
                "relation set file does not match the checkpoint's relation set"
            )
    instances = load_dialogre(_require(config, "eval"), model.relations)
    report = evaluate_model(model, instances,
                            max_span_len=config["train"]["max_span_len"])
    stamp = _stamp(config)
    _write_json(out / "eval_report.json",
                {**stamp, "ablation": config["ablation"], **report.to_dict()})
    header = (f"# config_hash={stamp['config_hash']} "
              f"format_version={stamp['format_version']}\n")
    (out / "eval_report.txt").write_text(header + report.render(), encoding="utf-8")
    print(f"macro F1 = {report.macro_f1:.4f}   F1_c = {report.f1_c:.4f}")
    return 0


def cmd_predict(args) -> int:
    config = load_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    model = load_checkpoint(args.checkpoint)
    data_path = args.input or _require(config, "predict")
    instances = load_dialogre(data_path, model.relations)
    records = []
    for inst in instances:
        pred = model.predict(inst, config["train"]["max_span_len"])
        records.append({
            "arg1": inst.arg1,
            "arg2": inst.arg2,
            "gold_relations": list(inst.relations),
            "relation": pred.relation,
            "distribution": list(pred.distribution),
            "trigger": {"start": pred.trigger.start, "end": pred.trigger.end,
                        "score": pred.trigger.score},
            "trigger_text": pred.trigger_text,
        })
    _write_json(out / "predictions.json",
                {**_stamp(config), "ablation": config["ablation"],
                 "predictions": records})
    print(f"wrote {len(records)} predictions to {out / 'predictions.json'}")
    return 0


def cmd_gradcheck(args) -> int:
    config = load_config(args)
    if args.corrupt and args.corrupt not in PARAMETER_GROUPS:
        raise ValueError(f"unknown parameter group {args.corrupt!r}")
    model, example, train_config, lexicon = make_tiny_fixture()
    report = run_gradcheck(model, example, train_config, lexicon,
                           corrupt_group=args.corrupt)
    text = render_report(report)
    print(text, end="")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _write_json(out / "gradcheck.json", {**_stamp(config), "groups": report})
    return 0 if all(entry["pass"] for entry in report.values()) else 1


def cmd_synth(args) -> int:
    if args.size < 0:
        raise ValueError("--size must be >= 0")
    paths = write_corpus(args.out, args.size, args.seed,
                         n_relations=args.relation_count,
                         late_fraction=args.late_fraction)
    manifest = {
        "format_version": FORMAT_VERSION,
        "config_hash": config_hash({
            "size": args.size, "seed": args.seed,
            "relation_count": args.relation_count,
            "late_fraction": args.late_fraction,
        }),
        "paths": paths,
    }
    _write_json(Path(args.out) / "manifest.json", manifest)
    print(json.dumps(paths, indent=1, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dialrex",
        description="trigger-guided dialogue relation extraction",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, checkpoint=False):
        p.add_argument("--config", help="JSON run config")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override one config key (repeatable)")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, help="override train and encoder seeds")
        if checkpoint:
            p.add_argument("--checkpoint", required=True)

    p_train = sub.add_parser("train", help="train a model and save a checkpoint")
    common(p_train)
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="score a checkpoint (F1 and F1_c)")
    common(p_eval, checkpoint=True)
    p_eval.set_defaults(func=cmd_eval)

    p_pred = sub.add_parser("predict", help="write per-instance predictions")
    common(p_pred, checkpoint=True)
    p_pred.add_argument("--input", help="DialogRE-format file (overrides config)")
    p_pred.set_defaults(func=cmd_predict)

    p_grad = sub.add_parser("gradcheck",
                            help="verify gradients against finite differences")
    p_grad.add_argument("--config", help="JSON run config")
    p_grad.add_argument("--set", action="append", metavar="KEY=VALUE")
    p_grad.add_argument("--out", help="optional output directory")
    p_grad.add_argument("--seed", type=int)
    p_grad.add_argument("--corrupt", help="harness self-test: corrupt one group")
    p_grad.set_defaults(func=cmd_gradcheck)

    p_synth = sub.add_parser("synth", help="generate a synthetic corpus")
    p_synth.add_argument("--out", required=True)
    p_synth.add_argument("--size", type=int, required=True)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--relation-count", type=int, default=4)
    p_synth.add_argument("--late-fraction", type=float, default=0.0)
    p_synth.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, IsADirectoryError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:                          # noqa: BLE001
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
