"""Command-line interface.

Commands: synth-data, train, eval, gradcheck, export-attention.

Exit codes: 0 on success, 1 for anything wrong with inputs or usage
(bad flags, bad config, bad data, mismatched checkpoints), 2 for internal
errors. Unknown flags are hard errors. If MTP_OUTPUT_ROOT is set, relative
output directories are created under it.

Training resolves its settings config-file-first: defaults, then the
--config JSON, then explicit flags; the winning values are echoed to
<out>/config.resolved so a run is reproducible from its own artifacts.
Artifacts carry no timestamps: rerunning a command with identical inputs
and seeds rewrites identical bytes.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import traceback
from pathlib import Path

import numpy as np

from .data.embedding import save_embedding
from .data.manifest import load_manifest
from .data.synthetic import generate_synthetic, load_synthetic_spec
from .errors import ConfigError, DataError, MtpError
from .gradcheck import check_model_gradients
from .model.attention import atom_attention_scores
from .model.config import MtpConfig, config_hash
from .model.forward import forward_pass
from .training.checkpoint import load_checkpoint
from .training.loop import TrainConfig, evaluation_report, train

OUTPUT_ROOT_ENV = "MTP_OUTPUT_ROOT"


class _Parser(argparse.ArgumentParser):
    """argparse-compatible parser that exits 1 on usage errors (argparse's
    default of 2 is reserved for internal failures here)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _bool_flag(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected true/false, got {text!r}")


def _resolve_out(path_text: str) -> Path:
    path = Path(path_text)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not path.is_absolute():
        return Path(root) / path
    return path


def build_parser() -> _Parser:
    parser = _Parser(prog="mtp", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("synth-data", parents=[], help="generate a synthetic dataset",
                       description="Generate a deterministic synthetic dataset from a "
                                   "JSON spec and write its manifest.")
    p.add_argument("--spec", required=True, help="path to the synthetic spec JSON")
    p.add_argument("--out", required=True, help="output directory for the dataset")
    p.set_defaults(func=cmd_synth_data)

    p = sub.add_parser("train", help="train a model from a config file",
                       description="Train a model. Settings resolve defaults-first, "
                                   "then the config file, then the flags below.")
    p.add_argument("--config", help="run config JSON (model/train/manifest/output_dir)")
    p.add_argument("--manifest", help="dataset manifest path (overrides config)")
    p.add_argument("--out", help="output directory (overrides config output_dir)")
    p.add_argument("--epochs", type=int, help="training epochs")
    p.add_argument("--lr", type=float, help="Adam learning rate")
    p.add_argument("--batch-size", type=int, help="gradient accumulation group size")
    p.add_argument("--patience", type=int, help="early-stop patience (epochs)")
    p.add_argument("--train-seed", type=int, help="shuffle/dropout seed")
    p.add_argument("--eval-split", choices=("train", "test"), help="split used for "
                   "checkpoint selection")
    p.add_argument("--d-model", type=int, help="model width")
    p.add_argument("--layers", type=int, help="number of refinement layers")
    p.add_argument("--heads", type=int, help="attention heads")
    p.add_argument("--ffn-hidden", type=int, help="FFN hidden width")
    p.add_argument("--dropout", type=float, help="dropout probability")
    p.add_argument("--enable-mts", type=_bool_flag, metavar="BOOL",
                   help="target-conditioned normalization on/off")
    p.add_argument("--enable-mps", type=_bool_flag, metavar="BOOL",
                   help="pocket cross-attention on/off")
    p.add_argument("--enable-ffn", type=_bool_flag, metavar="BOOL",
                   help="FFN sub-blocks on/off")
    p.add_argument("--kv-concat-mol", type=_bool_flag, metavar="BOOL",
                   help="cross-attention keys/values include molecule rows")
    p.add_argument("--adaln-style", choices=("direct", "one-plus-gamma"),
                   help="conditioning style")
    p.add_argument("--task", choices=("regression", "classification"),
                   help="prediction task (defaults to the manifest's)")
    p.add_argument("--model-seed", type=int, help="parameter init seed")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a manifest split",
                       description="Evaluate a checkpoint. Refuses to run when the "
                                   "checkpoint's config hash disagrees with --config.")
    p.add_argument("--checkpoint", required=True, help="checkpoint file")
    p.add_argument("--manifest", required=True, help="dataset manifest path")
    p.add_argument("--split", choices=("train", "test"), default="test",
                   help="split to evaluate (default: test)")
    p.add_argument("--config", help="run config JSON to cross-check the config hash")
    p.add_argument("--report", help="where to write the metrics report JSON "
                   "(default: eval.<split>.json beside the checkpoint)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="verify gradients on a small random model",
                       description="Compare the backward pass against central finite "
                                   "differences in float64 and report each parameter "
                                   "block's worst relative error.")
    p.add_argument("--m", type=int, default=3, help="molecule rows")
    p.add_argument("--n", type=int, default=5, help="target rows")
    p.add_argument("--p", type=int, default=2, help="pocket rows")
    p.add_argument("--d-mol", type=int, default=4, help="molecule embedding width")
    p.add_argument("--d-pro", type=int, default=5, help="target embedding width")
    p.add_argument("--d-model", type=int, default=8, help="model width")
    p.add_argument("--layers", type=int, default=2, help="refinement layers")
    p.add_argument("--heads", type=int, default=1, help="attention heads")
    p.add_argument("--ffn-hidden", type=int, default=8, help="FFN hidden width")
    p.add_argument("--task", choices=("regression", "classification"),
                   default="regression", help="loss head to check")
    p.add_argument("--seed", type=int, default=0, help="data and init seed")
    p.add_argument("--enable-mts", type=_bool_flag, metavar="BOOL", default=True)
    p.add_argument("--enable-mps", type=_bool_flag, metavar="BOOL", default=True)
    p.add_argument("--enable-ffn", type=_bool_flag, metavar="BOOL", default=True)
    p.add_argument("--kv-concat-mol", type=_bool_flag, metavar="BOOL", default=False)
    p.add_argument("--adaln-style", choices=("direct", "one-plus-gamma"),
                   default="direct")
    p.add_argument("--step", type=float, default=1e-4, help="finite-difference step")
    p.add_argument("--rtol", type=float, default=1e-4, help="relative tolerance")
    p.add_argument("--corrupt-block", help="test hook: perturb this block's analytic "
                   "gradient so the checker must fail")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("export-attention", help="write attention maps and atom scores",
                       description="Run listed samples through a checkpoint in eval "
                                   "mode and write per-atom scores (CSV) plus every "
                                   "raw attention matrix (embedding containers).")
    p.add_argument("--checkpoint", required=True, help="checkpoint file")
    p.add_argument("--manifest", required=True, help="dataset manifest path")
    p.add_argument("--samples", required=True,
                   help="comma-separated sample ids, or 'all'")
    p.add_argument("--out", help="output directory (default: checkpoint's directory)")
    p.set_defaults(func=cmd_export_attention)

    return parser


def cmd_synth_data(args) -> int:
    spec = load_synthetic_spec(args.spec)
    out = _resolve_out(args.out)
    manifest_path = generate_synthetic(spec, out)
    print(manifest_path)
    return 0


def _load_run_config(path_text: str | None):
    """Returns (model dict, train dict, manifest path or None,
    output_dir or None, base dir)."""
    if path_text is None:
        return {}, {}, None, None, Path.cwd()
    path = Path(path_text)
    try:
        raw = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot parse run config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("run config root must be an object")
    known = {"model", "train", "manifest", "output_dir"}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown run config field(s): {', '.join(unknown)}")
    model = raw.get("model", {})
    train_section = raw.get("train", {})
    if not isinstance(model, dict) or not isinstance(train_section, dict):
        raise ConfigError("run config 'model' and 'train' must be objects")
    return model, train_section, raw.get("manifest"), raw.get("output_dir"), path.parent


_MODEL_FLAGS = {
    "d_model": "d_model",
    "layers": "n_layers",
    "heads": "n_heads",
    "ffn_hidden": "ffn_hidden",
    "dropout": "dropout_p",
    "enable_mts": "enable_mts",
    "enable_mps": "enable_mps",
    "enable_ffn": "enable_ffn",
    "kv_concat_mol": "kv_concat_mol",
    "adaln_style": "adaln_style",
    "task": "task",
    "model_seed": "seed",
}

_TRAIN_FLAGS = {
    "epochs": "epochs",
    "lr": "lr",
    "batch_size": "batch_size",
    "patience": "patience",
    "train_seed": "seed",
    "eval_split": "eval_split",
}


def cmd_train(args) -> int:
    model_dict, train_dict, manifest_text, out_text, base = _load_run_config(args.config)
    for flag, field in _MODEL_FLAGS.items():
        value = getattr(args, flag)
        if value is not None:
            model_dict[field] = value
    for flag, field in _TRAIN_FLAGS.items():
        value = getattr(args, flag)
        if value is not None:
            train_dict[field] = value

    if args.manifest is not None:
        manifest_path = Path(args.manifest)
    elif manifest_text is not None:
        manifest_path = base / manifest_text
    else:
        raise ConfigError("no manifest given: set 'manifest' in the config or pass --manifest")
    if args.out is not None:
        out_dir = _resolve_out(args.out)
    elif out_text is not None:
        out_dir = _resolve_out(out_text)
    else:
        raise ConfigError("no output directory: set 'output_dir' in the config or pass --out")

    dataset = load_manifest(manifest_path)
    if "task" not in model_dict:
        model_dict["task"] = dataset.task
    model_cfg = MtpConfig.from_dict(model_dict).resolved()
    train_cfg = TrainConfig.from_dict(train_dict)
    if model_cfg.task != dataset.task:
        raise ConfigError(
            f"model task {model_cfg.task!r} does not match manifest task {dataset.task!r}"
        )

    out_dir.mkdir(parents=True, exist_ok=True)
    chash = config_hash(model_cfg, dataset.d_mol, dataset.d_pro)
    resolved = {
        "model": model_cfg.to_dict(),
        "train": train_cfg.to_dict(),
        "manifest": str(manifest_path.resolve()),
        "output_dir": str(out_dir.resolve()),
        "d_mol": dataset.d_mol,
        "d_pro": dataset.d_pro,
        "config_hash": chash,
    }
    (out_dir / "config.resolved").write_text(
        json.dumps(resolved, sort_keys=True, indent=2) + "\n"
    )

    result = train(dataset, model_cfg, train_cfg, out_dir)
    for record in result.history:
        star = " *" if record["improved"] else ""
        print(f"epoch {record['epoch']:4d}  train {record['train_loss']:.6f}  "
              f"eval {record['eval_loss']:.6f}{star}")
    print(f"best epoch {result.best_epoch} eval loss {result.best_eval_loss:.6f}")
    print(f"checkpoint {result.checkpoint_path}")
    print(f"metrics {result.metrics_path}")
    return 0


def cmd_eval(args) -> int:
    params = load_checkpoint(args.checkpoint)
    dataset = load_manifest(args.manifest)
    cfg = params.config
    if cfg.task != dataset.task:
        raise DataError(
            f"task mismatch: checkpoint is {cfg.task!r}, manifest is {dataset.task!r}"
        )
    if (params.d_mol, params.d_pro) != (dataset.d_mol, dataset.d_pro):
        raise DataError(
            f"embedding width mismatch: checkpoint expects d_mol={params.d_mol}, "
            f"d_pro={params.d_pro}; manifest has d_mol={dataset.d_mol}, "
            f"d_pro={dataset.d_pro}"
        )
    stored_hash = config_hash(cfg, params.d_mol, params.d_pro)
    if args.config is not None:
        model_dict, _, _, _, _ = _load_run_config(args.config)
        if "task" not in model_dict:
            model_dict["task"] = dataset.task
        other = MtpConfig.from_dict(model_dict).resolved()
        other_hash = config_hash(other, dataset.d_mol, dataset.d_pro)
        if other_hash != stored_hash:
            raise DataError(
                "config hash mismatch:\n"
                f"  checkpoint: {stored_hash}\n"
                f"  --config:   {other_hash}"
            )
    report = evaluation_report(params, dataset, args.split)
    text = report.to_json()
    print(text)
    if args.report is not None:
        report_path = _resolve_out(args.report)
    else:
        report_path = Path(args.checkpoint).parent / f"eval.{args.split}.json"
    report_path.parent.mkdir(parents=True, exist_ok=True)
    report_path.write_text(text + "\n")
    return 0


def cmd_gradcheck(args) -> int:
    cfg = MtpConfig(
        d_model=args.d_model,
        n_layers=args.layers,
        n_heads=args.heads,
        ffn_hidden=args.ffn_hidden,
        dropout_p=0.0,
        enable_mts=args.enable_mts,
        enable_mps=args.enable_mps,
        enable_ffn=args.enable_ffn,
        kv_concat_mol=args.kv_concat_mol,
        adaln_style=args.adaln_style,
        task=args.task,
        seed=args.seed,
    ).validate()
    report = check_model_gradients(
        cfg, m=args.m, n=args.n, p=args.p, d_mol=args.d_mol, d_pro=args.d_pro,
        seed=args.seed, step=args.step, rtol=args.rtol,
        corrupt_block=args.corrupt_block,
    )
    width = max(len(b.block) for b in report.blocks)
    for block in report.blocks:
        status = "ok" if block.ok else "FAIL"
        print(f"{block.block:<{width}}  max rel err {block.max_rel_error:.3e}  {status}")
    print(f"gradcheck {'PASSED' if report.ok else 'FAILED'} "
          f"(worst {report.worst():.3e}, dims {report.dims})")
    return 0 if report.ok else 1


def cmd_export_attention(args) -> int:
    params = load_checkpoint(args.checkpoint)
    dataset = load_manifest(args.manifest)
    cfg = params.config
    if cfg.task != dataset.task:
        raise DataError(
            f"task mismatch: checkpoint is {cfg.task!r}, manifest is {dataset.task!r}"
        )
    by_id = {s.sample_id: s for s in dataset.samples}
    if args.samples.strip().lower() == "all":
        wanted = list(by_id)
    else:
        wanted = [s.strip() for s in args.samples.split(",") if s.strip()]
        missing = [s for s in wanted if s not in by_id]
        if missing:
            raise DataError(f"unknown sample id(s): {', '.join(missing)}")
        if not wanted:
            raise DataError("no sample ids given")
    out_base = _resolve_out(args.out) if args.out else Path(args.checkpoint).parent
    out_dir = Path(out_base) / "attention"
    out_dir.mkdir(parents=True, exist_ok=True)

    for sid in wanted:
        sample = by_id[sid]
        mol = dataset.molecule(sample)
        target = dataset.target_features(sample.target_id)
        pocket = dataset.targets[sample.target_id].pocket_indices
        _, record = forward_pass(mol, target, pocket, params, cfg, mode="eval",
                                 target_id=sample.target_id, with_record=True)
        scores = atom_attention_scores(record, mol.shape[0])
        lines = ["atom_index,score"]
        lines += [f"{i},{scores[i]:.6f}" for i in range(scores.size)]
        (out_dir / f"{sid}.scores.csv").write_text("\n".join(lines) + "\n")
        for entry in record.entries:
            save_embedding(entry.weights.astype(np.float32),
                           out_dir / f"{sid}.{entry.label()}.mtpe")
        print(f"{sid}: {scores.size} atoms, {len(record.entries)} attention maps")
    print(f"attention artifacts in {out_dir}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        return int(code) if isinstance(code, int) else 1
    if getattr(args, "func", None) is None:
        parser.print_help()
        return 1
    try:
        return args.func(args)
    except MtpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit:
        raise
    except Exception:
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
