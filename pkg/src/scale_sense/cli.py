"""Command-line entry points: preprocess, synth, train, eval, predict, serve.

Exit codes: 0 success, 1 user error (bad flags, missing files, malformed
data), 2 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .corpus import (
    ConfigError,
    SchemaError,
    TooFewInstances,
    build_instances,
    demo_config,
    generate_synthetic_corpus,
    ingest_recipes,
    read_instances,
    split_dataset,
    tiny_overfit_config,
    token_scaled_config,
    write_instances,
    write_recipes,
)
from .encoder import EncoderConfig
from .heads import REGRESSOR_VARIANTS
from .pipeline import EvalMode, ModelPredictors, VocabMismatch, evaluate_pipeline
from .query import AblationFlags, Task
from .train import (
    NonFiniteLoss,
    TrainConfig,
    VersionMismatch,
    save_checkpoint,
    train_task,
    write_loss_curve,
)
from .units import MalformedQuantity, UnknownUnit

SYNTH_PRESETS = {
    "demo": demo_config,
    "token_scaled": token_scaled_config,
    "tiny_overfit": tiny_overfit_config,
}

_USER_ERRORS = (
    OSError,
    SchemaError,
    ConfigError,
    TooFewInstances,
    VersionMismatch,
    VocabMismatch,
    UnknownUnit,
    MalformedQuantity,
)

ABLATION_ELEMENTS = ("title", "tags", "other_ingredients", "servings", "descriptive_name")


class CliError(Exception):
    """User error already reported on stderr."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise CliError(message)


def parse_ablation(expr: str) -> AblationFlags:
    """Comma-separated elements to drop, e.g. "tags,servings". The token
    "descriptive_name" switches the target to its plain name."""
    flags = {f"use_{element}": True for element in ABLATION_ELEMENTS}
    for token in filter(None, (t.strip() for t in expr.split(","))):
        if token not in ABLATION_ELEMENTS:
            raise CliError(f"unknown ablation element {token!r}; choose from {ABLATION_ELEMENTS}")
        flags[f"use_{token}"] = False
    return AblationFlags(**flags)


def build_parser() -> _Parser:
    parser = _Parser(prog="scale-sense", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="recipes file -> split instance files")
    p.add_argument("--recipes", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("synth", help="generate a synthetic recipe corpus")
    p.add_argument("--preset", choices=sorted(SYNTH_PRESETS), default="demo")
    p.add_argument("--n", type=int, default=None, help="number of recipes")
    p.add_argument("--out", required=True, help="recipes JSONL path")
    p.add_argument("--truth-out", default=None, help="ground-truth JSON path")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("train", help="train one task model")
    p.add_argument("--task", required=True, choices=[t.value for t in Task])
    p.add_argument("--data-dir", required=True)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--regressor", choices=REGRESSOR_VARIANTS, default="dexp")
    p.add_argument("--encoder", choices=["train_all", "freeze", "random_init"], default="train_all")
    p.add_argument("--ablation", default="", help="comma-separated elements to drop")
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--dim", type=int, default=128)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--heads", type=int, default=4)
    p.add_argument("--max-len", type=int, default=256)
    p.add_argument("--curve-out", default=None, help="loss curve text file")
    p.add_argument("--init-from", default=None, help="warm-start encoder from checkpoint")

    p = sub.add_parser("eval", help="evaluate the three-task pipeline")
    p.add_argument("--data-dir", required=True)
    p.add_argument("--split", default="test", choices=["train", "valid", "test"])
    p.add_argument("--type-ckpt", required=True)
    p.add_argument("--unit-ckpt", required=True)
    p.add_argument("--quantity-ckpt", required=True)
    p.add_argument("--mode", choices=[m.value for m in EvalMode], default="ground_truth_type")

    p = sub.add_parser("predict", help="single prediction from flags or a request file")
    p.add_argument("--type-ckpt", required=True)
    p.add_argument("--unit-ckpt", required=True)
    p.add_argument("--quantity-ckpt", required=True)
    p.add_argument("--request", default=None, help="JSON file with a request body")
    p.add_argument("--target", default=None)
    p.add_argument("--title", default="")
    p.add_argument("--tags", default="")
    p.add_argument("--others", default="")
    p.add_argument("--servings", type=float, default=4)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--model-dir", default=None)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    return parser


def cmd_preprocess(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    result = ingest_recipes(args.recipes)
    for err in result.errors:
        print(f"schema error: {err}", file=sys.stderr)
    instances, report = build_instances(result.records, seed=args.seed)
    train, valid, test = split_dataset(instances, seed=args.seed)
    for name, part in (("train", train), ("valid", valid), ("test", test)):
        write_instances(out_dir / f"{name}.jsonl", part)
    print(
        f"records={len(result.records)} schema_errors={len(result.errors)} "
        f"instances={report.built} discarded={report.discarded} "
        f"split={len(train)}/{len(valid)}/{len(test)}"
    )
    return 0


def cmd_synth(args) -> int:
    factory = SYNTH_PRESETS[args.preset]
    config = factory(args.n) if args.n else factory()
    records, truth = generate_synthetic_corpus(config, seed=args.seed)
    write_recipes(args.out, records)
    if args.truth_out:
        payload = {
            f"{idx}\t{name}": {"mtype": e.mtype.value, "unit": e.unit, "quantity_base": e.quantity_base}
            for (idx, name), e in truth.items()
        }
        Path(args.truth_out).write_text(json.dumps(payload, indent=1), encoding="utf-8")
    print(f"recipes={len(records)} preset={args.preset} seed={args.seed}")
    return 0


def cmd_train(args) -> int:
    data_dir = Path(args.data_dir)
    train_data = read_instances(data_dir / "train.jsonl")
    valid_path = data_dir / "valid.jsonl"
    valid_data = read_instances(valid_path) if valid_path.exists() else train_data
    config = TrainConfig(
        task=Task(args.task),
        regressor=args.regressor,
        lr=args.lr,
        batch_size=args.batch_size,
        max_steps=args.steps,
        seed=args.seed,
        encoder=EncoderConfig(
            dim=args.dim, layers=args.layers, heads=args.heads,
            max_len=args.max_len, mode=args.encoder,
        ),
        ablation=parse_ablation(args.ablation),
        init_from=args.init_from,
    )
    result = train_task(train_data, valid_data, config)
    save_checkpoint(args.out, result.checkpoint)
    if args.curve_out:
        write_loss_curve(args.curve_out, result.loss_curve)
    metric_name = "accuracy" if config.task is not Task.QUANTITY else "lmae"
    print(
        f"task={config.task.value} steps={result.steps_run} "
        f"best_{metric_name}={result.best_metric:.6g} checkpoint={args.out}"
    )
    return 0


def cmd_eval(args) -> int:
    instances = read_instances(Path(args.data_dir) / f"{args.split}.jsonl")
    predictors = ModelPredictors.from_checkpoints(args.type_ckpt, args.unit_ckpt, args.quantity_ckpt)
    report = evaluate_pipeline(predictors, instances, EvalMode(args.mode))
    sys.stdout.write(report.to_kv_text())
    return 0


def cmd_predict(args) -> int:
    from .service import PredictRequest, predict_full

    if args.request:
        body = json.loads(Path(args.request).read_text(encoding="utf-8"))
        request = PredictRequest(**body)
    elif args.target:
        request = PredictRequest(
            target_name=args.target,
            title=args.title,
            tags=[t for t in args.tags.split(",") if t],
            other_ingredients=[o for o in args.others.split(",") if o],
            servings=args.servings,
        )
    else:
        raise CliError("predict needs --target or --request")
    predictors = ModelPredictors.from_checkpoints(args.type_ckpt, args.unit_ckpt, args.quantity_ckpt)
    result = predict_full(predictors, request)
    print(json.dumps(result.model_dump(), indent=1))
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app, resolve_model_dir

    app = create_app(model_dir=resolve_model_dir(args.model_dir))
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


_COMMANDS = {
    "preprocess": cmd_preprocess,
    "synth": cmd_synth,
    "train": cmd_train,
    "eval": cmd_eval,
    "predict": cmd_predict,
    "serve": cmd_serve,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except _USER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # argparse --help
        return int(exc.code or 0)
    except NonFiniteLoss as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - safety net
        print(f"internal error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
