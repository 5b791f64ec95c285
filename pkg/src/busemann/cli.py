"""Command-line interface: ``busemann {place,train,eval,check,export}``.

Exit codes: 0 success, 1 validation failure, 2 usage error, 3 I/O or
format error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np
from scipy.stats import spearmanr

from . import checks
from .data_io import (CHECKPOINT_SCHEMA_VERSION, Dataset, SplitSpec, append_metrics,
                      apply_standardizer, fit_standardizer, parse_data_spec, read_checkpoint,
                      read_prototypes, split, write_checkpoint, write_prototypes)
from .errors import FormatError, InvalidInputError
from .export import render_svg, write_embedding_csv
from .loss import loss_gradient
from .model import Model, TrainConfig, embed, init_model, predict_embeddings, train
from .prototypes import (PrototypeSet, Provenance, separation_metrics, separation_prototypes,
                         uniform_circle_prototypes)

log = logging.getLogger("busemann")

EXIT_OK, EXIT_VALIDATION, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


class ValidationFailure(Exception):
    pass


def _emit(args, report: dict, lines: list[str]) -> None:
    if getattr(args, "json", False):
        print(json.dumps(report, indent=1))
    else:
        print("\n".join(lines))


def _int_list(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()] if text else []


def _load_data(spec: str) -> Dataset:
    try:
        return parse_data_spec(spec)
    except InvalidInputError as exc:
        raise UsageError(f"--data {spec!r}: {exc}") from None


# -- place -------------------------------------------------------------------

def cmd_place(args) -> int:
    method = args.method or ("uniform" if args.dims == 2 else "separation")
    if method == "uniform":
        if args.dims != 2:
            raise UsageError(f"uniform placement requires --dims 2, got {args.dims}")
        protos = uniform_circle_prototypes(args.classes)
    else:
        if args.dims < 3:
            raise UsageError(f"separation placement requires --dims >= 3, got {args.dims}")
        protos = separation_prototypes(args.classes, args.dims, args.iters, args.lr, args.seed)
    write_prototypes(args.out, protos)
    min_angle, max_cos = separation_metrics(protos)
    report = {"out": str(args.out), "method": method, "classes": args.classes,
              "dims": args.dims, "min_angle": min_angle, "max_cosine": max_cos}
    _emit(args, report, [f"wrote {args.classes} prototypes ({method}, d={args.dims}) to {args.out}",
                         f"max_cosine {max_cos:.6f}  min_angle {np.degrees(min_angle):.4f} deg"])
    return EXIT_OK


# -- train -------------------------------------------------------------------

def cmd_train(args) -> int:
    data = _load_data(args.data)
    protos = read_prototypes(args.protos, project=args.project_protos)
    if args.dims is not None and args.dims != protos.dimension:
        raise ValidationFailure(
            f"model output dimension {args.dims} does not match prototype dimension {protos.dimension}"
        )
    if data.class_count > protos.num_classes:
        raise ValidationFailure(
            f"data has {data.class_count} classes but {args.protos} holds {protos.num_classes} prototypes"
        )

    if args.val_fraction > 0:
        train_set, val_set = split(data, SplitSpec(args.val_fraction, args.split_seed, True))
    else:
        train_set, val_set = data, None
    norm = fit_standardizer(train_set) if args.standardize else None
    train_set = apply_standardizer(train_set, norm)
    if val_set is not None:
        val_set = apply_standardizer(val_set, norm)

    cfg = TrainConfig(learning_rate=args.lr, weight_decay=args.weight_decay,
                      batch_size=args.batch_size, epochs=args.epochs,
                      lr_decay_epochs=_int_list(args.lr_decay_epochs),
                      lr_decay_factor=args.lr_decay_factor, penalty_slope=args.slope,
                      seed=args.seed, deterministic=args.deterministic)
    model = init_model(data.input_dim, protos.dimension, tuple(_int_list(args.hidden)), seed=args.seed)

    metrics_path = Path(args.metrics) if args.metrics else Path(str(args.checkpoint) + ".metrics.jsonl")
    metrics_path.write_text("")

    def on_epoch(epoch, mean_loss, acc, lr):
        append_metrics(metrics_path, {"epoch": epoch, "mean_loss": mean_loss,
                                      "val_accuracy": acc, "lr": lr})
        log.info("epoch %d  loss %.5f  acc %.4f", epoch, mean_loss, acc)

    trained, history = train(model, train_set, protos, cfg, val=val_set, on_epoch=on_epoch)
    final = {"epochs": cfg.epochs,
             "mean_loss": history.mean_loss[-1] if history.mean_loss else None,
             "val_accuracy": history.val_accuracy[-1] if history.val_accuracy else None}
    training_config = cfg.to_dict()
    training_config.update({"data_spec": args.data, "validation_fraction": args.val_fraction,
                            "split_seed": args.split_seed, "stratified": True,
                            "hidden": _int_list(args.hidden), "feature_normalization": norm})
    doc = {
        "schema_version": CHECKPOINT_SCHEMA_VERSION,
        "input_dim": trained.input_dim,
        "output_dim": trained.output_dim,
        "layers": trained.to_dict(),
        "penalty_slope": cfg.penalty_slope,
        "prototype_file_reference": str(args.protos),
        "prototypes": protos.points.tolist(),
        "training_config": training_config,
        "final_metrics": final,
    }
    write_checkpoint(args.checkpoint, doc)
    acc = final["val_accuracy"]
    _emit(args, {"checkpoint": str(args.checkpoint), "metrics": str(metrics_path), **final},
          [f"checkpoint written to {args.checkpoint}",
           f"final val_accuracy {acc:.4f}" if acc is not None else "no epochs run"])
    return EXIT_OK


# -- eval / export shared ----------------------------------------------------

def _load_checkpoint(path):
    doc = read_checkpoint(path)
    try:
        model = Model.from_dict(doc["layers"])
        if (model.input_dim, model.output_dim) != (doc["input_dim"], doc["output_dim"]):
            raise FormatError("layer shapes disagree with input_dim/output_dim")
        if "prototypes" in doc:
            protos = PrototypeSet(np.asarray(doc["prototypes"]), Provenance.EXTERNAL_PROJECTED)
        else:
            ref = Path(doc["prototype_file_reference"])
            if not ref.is_absolute() and not ref.exists():
                ref = Path(path).parent / ref
            protos = read_prototypes(ref)
    except (KeyError, TypeError, InvalidInputError) as exc:
        raise FormatError(f"{path}: malformed checkpoint ({exc})") from None
    if protos.dimension != model.output_dim:
        raise FormatError(f"{path}: prototypes have dimension {protos.dimension}, "
                          f"model output is {model.output_dim}")
    return doc, model, protos


def _embed_dataset(doc, model, protos, data: Dataset):
    if data.input_dim != model.input_dim:
        raise ValidationFailure(
            f"data has {data.input_dim} features, checkpoint expects {model.input_dim}"
        )
    norm = (doc.get("training_config") or {}).get("feature_normalization")
    data = apply_standardizer(data, norm)
    Z = embed(model, data.features)
    pred, dist, _ = predict_embeddings(Z, protos)
    return data, Z, pred, dist


def confidence_report(labels, pred, dist) -> dict:
    correct = pred == labels
    rep = {"mean_origin_distance_correct": float(dist[correct].mean()) if correct.any() else None,
           "mean_origin_distance_incorrect": float(dist[~correct].mean()) if (~correct).any() else None}
    if correct.any() and (~correct).any():
        rep["origin_distance_gap"] = rep["mean_origin_distance_correct"] - rep["mean_origin_distance_incorrect"]
        rep["spearman_distance_correctness"] = float(spearmanr(dist, correct.astype(float)).statistic)
    else:
        rep["origin_distance_gap"] = None
        rep["spearman_distance_correctness"] = None
    return rep


def cmd_eval(args) -> int:
    doc, model, protos = _load_checkpoint(args.checkpoint)
    data, Z, pred, dist = _embed_dataset(doc, model, protos, _load_data(args.data))
    correct = pred == data.labels
    per_class = {}
    for c in range(data.class_count):
        mask = data.labels == c
        per_class[str(c)] = float(correct[mask].mean()) if mask.any() else None
    report = {"examples": len(data), "accuracy": float(correct.mean()), "per_class_accuracy": per_class,
              **confidence_report(data.labels, pred, dist)}
    lines = [f"accuracy {report['accuracy']:.4f} on {len(data)} examples"]
    lines += [f"  class {c}: {a:.4f}" for c, a in per_class.items() if a is not None]
    for key in ("mean_origin_distance_correct", "mean_origin_distance_incorrect",
                "origin_distance_gap", "spearman_distance_correctness"):
        val = report[key]
        lines.append(f"{key} {val:.6f}" if val is not None else f"{key} n/a")
    _emit(args, report, lines)
    return EXIT_OK


def cmd_export(args) -> int:
    out = Path(args.out)
    if out.suffix.lower() not in (".csv", ".svg"):
        raise UsageError(f"--out must end in .csv or .svg, got {out.name}")
    doc, model, protos = _load_checkpoint(args.checkpoint)
    if out.suffix.lower() == ".svg" and model.output_dim != 2:
        raise UsageError(f"SVG export needs a 2-dimensional model, checkpoint has d={model.output_dim}")
    data, Z, pred, dist = _embed_dataset(doc, model, protos, _load_data(args.data))
    if out.suffix.lower() == ".csv":
        write_embedding_csv(out, Z, data.labels, pred, dist)
    else:
        out.write_text(render_svg(Z, data.labels, protos))
    _emit(args, {"out": str(out), "rows": len(data)}, [f"wrote {len(data)} examples to {out}"])
    return EXIT_OK


# -- check -------------------------------------------------------------------

def _faulty_gradient(x, p, phi):
    return loss_gradient(x, p, phi).grad * 1.01


def cmd_check(args) -> int:
    report = checks.run_checks(args.suite, args.seed,
                               gradient_fn=_faulty_gradient if args.inject_gradient_fault else None)
    lines = []
    for name, res in report["suites"].items():
        status = "PASS" if res["passed"] else "FAIL"
        lines.append(f"{status}  {name}  ({res['seconds']:.2f}s)")
        for f in res.get("failures", [])[:3]:
            lines.append(f"      failing case: {json.dumps(f)}")
    if args.json:
        print(json.dumps(report, indent=1))
    else:
        print("\n".join(lines))
    return EXIT_OK if report["passed"] else EXIT_VALIDATION


# -- parser ------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="busemann", description="Hyperbolic learning with ideal prototypes")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("place", help="place ideal prototypes and write them as CSV")
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--dims", type=int, required=True)
    p.add_argument("--method", choices=("uniform", "separation"))
    p.add_argument("--iters", type=int, default=1000)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_place)

    p = sub.add_parser("train", help="train a model against fixed prototypes")
    p.add_argument("--data", required=True,
                   help="csv:PATH:LABELCOL | idx:IMAGES:LABELS | blobs:C,I,per_class,scale,sigma,seed")
    p.add_argument("--protos", required=True)
    p.add_argument("--project-protos", action="store_true",
                   help="l2-normalize prototype rows on load (external prototypes)")
    p.add_argument("--dims", type=int, help="expected output dimension; must match the prototypes")
    p.add_argument("--hidden", default="", help="comma-separated hidden widths; empty for linear")
    p.add_argument("--slope", type=float, default=0.1)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--lr", type=float, default=5e-4)
    p.add_argument("--weight-decay", type=float, default=5e-5)
    p.add_argument("--batch-size", type=int, default=128)
    p.add_argument("--lr-decay-epochs", default="")
    p.add_argument("--lr-decay-factor", type=float, default=10.0)
    p.add_argument("--val-fraction", type=float, default=0.2)
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--standardize", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--deterministic", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--metrics", help="JSONL metrics path (default: CHECKPOINT.metrics.jsonl)")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="accuracy and confidence report for a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("check", help="run the numerical verification suites")
    p.add_argument("--suite", default="all", choices=("all",) + checks.SUITES)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true")
    p.add_argument("--inject-gradient-fault", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("export", help="write embeddings as CSV or a 2-D SVG")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_export)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (FormatError, OSError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except InvalidInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
