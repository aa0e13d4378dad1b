"""Command-line pipeline: bound audits, SVM training, DRKN conversion,
fine-tuning, evaluation and curve export.

Every run writes a manifest JSON next to its primary output recording
the resolved arguments, inputs, outputs, seed and tool version; the
replay subcommand re-executes a manifest and reproduces the outputs
bitwise when the inputs are unchanged.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .folds import (audit_bounds, bound_reports_to_csv, build_3layer_radial,
                    build_normd, build_radial_net, radial_count_bounds,
                    three_layer_width_bound)
from .models import (assemble_drkn, assemble_rbf_baseline, drkn_decision_batch,
                     emit_drkn_json, emit_rbf_json, parse_drkn_json,
                     parse_rbf_json, rbf_decision_batch)
from .profiles import wendland_q31
from .svm import (emit_ovr_model_json, load_dataset_csv, load_dataset_libsvm,
                  parse_libsvm_model, parse_ovr_model_json, smo_train,
                  split_dataset, svm_decision_batch)
from .training import TrainConfig, export_history_csv, parse_history_csv, train


def _comma_ints(text):
    return [int(v) for v in text.split(",") if v.strip()]


def _comma_floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _dedupe(values):
    seen, out = set(), []
    for v in values:
        if v not in seen:
            seen.add(v)
            out.append(v)
    return out


def _write(path, text):
    Path(path).write_text(text)


def _write_manifest(args, subcommand, inputs, outputs):
    resolved = {k: v for k, v in vars(args).items() if k not in ("func",)}
    manifest = {
        "tool": "drkn",
        "version": __version__,
        "subcommand": subcommand,
        "args": resolved,
        "argv": args._argv,
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
        "seed": getattr(args, "seed", None),
    }
    path = Path(outputs[0]).with_suffix(Path(outputs[0]).suffix + ".manifest.json")
    _write(path, json.dumps(manifest, indent=2, sort_keys=True))
    return path


def _load_dataset(path, label_column):
    text = Path(path).read_text()
    if str(path).endswith(".csv"):
        try:
            label = int(label_column)
        except (TypeError, ValueError):
            label = label_column
        if label is None:
            raise ValueError("--label-column is required for CSV data")
        return load_dataset_csv(text, label)
    return load_dataset_libsvm(text)


def _load_split_dataset(args):
    data = _load_dataset(args.data, getattr(args, "label_column", None))
    return split_dataset(data, args.split, args.seed)


def _load_model(path):
    """Sniff and load a model file: OvR/DRKN/RBF JSON or libsvm text."""
    text = Path(path).read_text()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        doc = json.loads(text)
        kind = doc.get("kind")
        if kind == "drkn":
            return "drkn", parse_drkn_json(text)
        if kind == "rbf":
            return "rbf", parse_rbf_json(text)
        return "svm", parse_ovr_model_json(text)
    return "svm", parse_libsvm_model(text)


def _decisions(kind, model, X):
    if kind == "svm":
        return svm_decision_batch(model, X)
    if kind == "drkn":
        return drkn_decision_batch(model, X)
    return rbf_decision_batch(model, X)


# -- subcommands ---------------------------------------------------------


def cmd_verify_bounds(args):
    d_list = _dedupe(_comma_ints(args.d))
    delta_list = _dedupe(_comma_floats(args.delta))
    if not d_list:
        raise ValueError("--d needs at least one dimension")
    if not delta_list:
        raise ValueError("--delta needs at least one value")
    profile = wendland_q31(args.R)
    reports = []
    for d in d_list:
        for delta in delta_list:
            reports.append(audit_bounds(build_normd(d, args.R, delta),
                                        n_samples=args.samples, seed=args.seed))
            if args.radial:
                reports.append(audit_bounds(build_radial_net(profile, d, delta),
                                            n_samples=args.samples, seed=args.seed))
                reports.append(audit_bounds(build_3layer_radial(profile, d, delta),
                                            n_samples=args.samples, seed=args.seed))
    csv_text = bound_reports_to_csv(reports)
    _write(args.out, csv_text)
    _write_manifest(args, "verify-bounds", [], [args.out])
    bad = [r for r in reports if not r.ok]
    for rep in reports:
        status = "ok" if rep.ok else "VIOLATED"
        print(f"{rep.builder} d={rep.d} delta={rep.delta}: sup_error="
              f"{rep.measured_sup_error:.3e} target={rep.delta_target:.3e} [{status}]")
    for d in d_list:
        for delta in delta_list:
            deep = radial_count_bounds(profile, d, delta)["weights_bound"]
            shallow = three_layer_width_bound(profile, d, delta)
            print(f"d={d} delta={delta}: deep weight bound {deep:.1f} vs "
                  f"3-layer width bound {shallow:.1f}")
    if bad:
        raise RuntimeError(f"{len(bad)} bound report(s) violated their contract")
    return 0


def cmd_train_svm(args):
    data = _load_split_dataset(args)
    model = smo_train(data, args.C, args.gamma, args.tol)
    _write(args.out, emit_ovr_model_json(model))
    _write_manifest(args, "train-svm", [args.data], [args.out])
    train_acc = float(np.mean(svm_decision_batch(model, data.train_features)
                              == data.train_labels))
    test_y = data.test_labels
    test_acc = (float(np.mean(svm_decision_batch(model, data.test_features) == test_y))
                if test_y.size else math.nan)
    props = data.class_proportions()
    print(f"trained {model.n_classes}-class SVM on {data.train_labels.size} rows "
          f"(train acc {train_acc:.4f}, test acc {test_acc:.4f})")
    fmt = lambda ps: "[" + ", ".join(f"{p:.3f}" for p in ps) + "]"
    print(f"class proportions train={fmt(props['train'])} test={fmt(props['test'])}")
    return 0


def cmd_build_drkn(args):
    kind, svm = _load_model(args.model)
    if kind != "svm":
        raise ValueError(f"build-drkn expects an SVM model file, got {kind}")
    model = assemble_drkn(svm, args.delta)
    _write(args.out, emit_drkn_json(model))
    _write_manifest(args, "build-drkn", [args.model], [args.out])
    info = model.fold_net.build_info
    print(f"assembled DRKN: delta={model.delta}, wendland_R={model.wendland_R:.6f}, "
          f"fold net {info['layers_built']} hidden layers / "
          f"{info['neurons_built']} neurons")
    return 0


def cmd_build_rbf(args):
    kind, svm = _load_model(args.model)
    if kind != "svm":
        raise ValueError(f"build-rbf expects an SVM model file, got {kind}")
    model = assemble_rbf_baseline(svm)
    _write(args.out, emit_rbf_json(model))
    _write_manifest(args, "build-rbf", [args.model], [args.out])
    print(f"assembled RBF baseline with gamma={model.gamma}")
    return 0


def cmd_train_drkn(args):
    kind, model = _load_model(args.model)
    if kind == "svm":
        raise ValueError("train-drkn expects a DRKN or RBF model file; "
                         "run build-drkn first")
    data = _load_split_dataset(args)
    svm_test_error = None
    if args.svm:
        ref_kind, ref = _load_model(args.svm)
        if ref_kind != "svm":
            raise ValueError(f"--svm expects an SVM model file, got {ref_kind}")
        if data.test_labels.size:
            svm_test_error = float(np.mean(
                svm_decision_batch(ref, data.test_features) != data.test_labels))
    cfg = TrainConfig(learning_rate=args.lr, batch_size=args.batch,
                      epochs=args.epochs, seed=args.seed,
                      loss_on=args.loss_on)
    history = train(model, data, cfg, svm_test_error=svm_test_error)
    emit = emit_drkn_json if kind == "drkn" else emit_rbf_json
    _write(args.out_model, emit(model))
    _write(args.out_history, export_history_csv(history))
    _write_manifest(args, "train-drkn",
                    [args.model, args.data] + ([args.svm] if args.svm else []),
                    [args.out_model, args.out_history])
    first, last = history.records[0], history.records[-1]
    print(f"trained {kind} for {cfg.epochs} epochs: test error "
          f"{first.test_error:.4f} -> {last.test_error:.4f}")
    return 0


def cmd_eval(args):
    kind, model = _load_model(args.model)
    data = _load_split_dataset(args)
    if args.subset == "train":
        X, y = data.train_features, data.train_labels
    elif args.subset == "test":
        X, y = data.test_features, data.test_labels
    else:
        X, y = data.features, data.labels
    if X.shape[0] == 0:
        raise ValueError(f"no rows in subset {args.subset!r}")
    pred = _decisions(kind, model, X)
    accuracy = float(np.mean(pred == y))
    per_class = {}
    for c in range(data.n_classes):
        mask = y == c
        per_class[str(data.class_labels[c])] = (
            float(np.mean(pred[mask] != y[mask])) if mask.any() else math.nan)
    agreement = None
    if args.reference:
        ref_kind, ref = _load_model(args.reference)
        ref_pred = _decisions(ref_kind, ref, X)
        agreement = float(np.mean(pred == ref_pred))
    metrics = {
        "model": str(args.model),
        "kind": kind,
        "subset": args.subset,
        "n_rows": int(X.shape[0]),
        "accuracy": accuracy,
        "per_class_errors": per_class,
        "agreement": agreement,
        "reference": str(args.reference) if args.reference else None,
    }
    _write(args.out, json.dumps(metrics, indent=2, sort_keys=True))
    _write_manifest(args, "eval",
                    [args.model, args.data] + ([args.reference] if args.reference else []),
                    [args.out])
    print(f"accuracy={accuracy:.4f}"
          + (f" agreement={agreement:.4f}" if agreement is not None else ""))
    return 0


def cmd_export_curves(args):
    history = parse_history_csv(Path(args.history).read_text())
    lines = ["epoch,train_error,test_error,train_loss,svm_test_error"
             + (",rbf_train_error,rbf_test_error" if args.rbf_history else "")]
    rbf = None
    if args.rbf_history:
        rbf = parse_history_csv(Path(args.rbf_history).read_text())
        by_epoch = {rec.epoch: rec for rec in rbf.records}
    ref = "" if history.svm_test_error is None else repr(history.svm_test_error)
    for rec in history.records:
        row = f"{rec.epoch},{rec.train_error!r},{rec.test_error!r},{rec.train_loss!r},{ref}"
        if rbf is not None:
            rrec = by_epoch.get(rec.epoch)
            row += (f",{rrec.train_error!r},{rrec.test_error!r}" if rrec else ",,")
        lines.append(row)
    _write(args.out, "\n".join(lines) + "\n")
    _write_manifest(args, "export-curves",
                    [args.history] + ([args.rbf_history] if args.rbf_history else []),
                    [args.out])
    print(f"wrote {len(history.records)} epochs to {args.out}")
    return 0


def cmd_replay(args):
    manifest = json.loads(Path(args.manifest).read_text())
    argv = manifest.get("argv")
    if not argv:
        raise ValueError("manifest has no recorded argv to replay")
    print(f"replaying: drkn {' '.join(argv)}")
    return main(argv)


# -- parser ----------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(
        prog="drkn",
        description="Fold-network approximation of radial kernels and "
                    "trainable SVM conversions")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("verify-bounds", help="audit builder error/size bounds")
    p.add_argument("--d", required=True, help="comma-separated dimensions")
    p.add_argument("--R", type=float, default=1.0)
    p.add_argument("--delta", required=True, help="comma-separated targets")
    p.add_argument("--samples", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--radial", action="store_true",
                   help="also audit the profile builders (deep and 3-layer)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_verify_bounds)

    p = sub.add_parser("train-svm", help="train a one-vs-rest RBF SVM")
    p.add_argument("--data", required=True)
    p.add_argument("--label-column", default=None)
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--split", type=float, default=0.7)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_svm)

    p = sub.add_parser("build-drkn", help="convert an SVM into a DRKN")
    p.add_argument("--model", required=True)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_drkn)

    p = sub.add_parser("build-rbf", help="convert an SVM into the RBF baseline")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_rbf)

    p = sub.add_parser("train-drkn", help="fine-tune a DRKN or RBF model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--label-column", default=None)
    p.add_argument("--split", type=float, default=0.7)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--loss-on", choices=("squashed", "raw"), default="squashed")
    p.add_argument("--svm", default=None, help="reference SVM for the error line")
    p.add_argument("--out-model", required=True)
    p.add_argument("--out-history", required=True)
    p.set_defaults(func=cmd_train_drkn)

    p = sub.add_parser("eval", help="evaluate a model on a dataset split")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--label-column", default=None)
    p.add_argument("--split", type=float, default=0.7)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--subset", choices=("train", "test", "all"), default="test")
    p.add_argument("--reference", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("export-curves", help="merge history CSVs for plotting")
    p.add_argument("--history", required=True)
    p.add_argument("--rbf-history", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_curves)

    p = sub.add_parser("replay", help="re-run a recorded manifest")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_replay)

    return parser


def main(argv=None):
    if argv is None:
        argv = sys.argv[1:]
    parser = build_parser()
    args = parser.parse_args(argv)
    args._argv = list(argv)
    try:
        return args.func(args)
    except (ValueError, RuntimeError, AssertionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
