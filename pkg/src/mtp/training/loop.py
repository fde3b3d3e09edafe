"""Training loop: per-sample graphs, gradient accumulation, Adam,
eval-loss checkpointing, early stopping.

Samples stream from the manifest one at a time (plus one cached target),
so memory stays flat in dataset size. Gradients are averaged over each
accumulation group of `batch_size` samples, then one Adam step runs.

The best checkpoint is the one with the lowest eval-split loss; strict
improvement resets the patience counter. With patience = 0 training stops
exactly one epoch after the first non-improving epoch. The metrics log is
one JSON record per epoch, no timestamps, so identical runs produce
identical bytes.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ConfigError, DataError
from ..data.manifest import DatasetManifest
from ..model.config import MtpConfig, config_hash
from ..model.forward import forward_pass
from ..model.params import MtpParams, init_params
from ..nn.autodiff import backward
from .adam import Adam
from .checkpoint import save_checkpoint
from .losses import loss_node, sigmoid
from .metrics import MetricsReport, compute_report


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 8
    patience: int | None = None
    seed: int = 0
    eval_split: str = "test"

    def validate(self) -> "TrainConfig":
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.lr <= 0:
            raise ConfigError(f"lr must be > 0, got {self.lr}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.patience is not None and self.patience < 0:
            raise ConfigError(f"patience must be >= 0 or null, got {self.patience}")
        if self.eval_split not in ("train", "test"):
            raise ConfigError(f"eval_split must be train or test, got {self.eval_split!r}")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        if not isinstance(data, dict):
            raise ConfigError(f"train config must be a mapping, got {type(data).__name__}")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown train config field(s): {', '.join(unknown)}")
        return cls(**data).validate()


@dataclass
class TrainResult:
    history: list
    best_epoch: int
    best_eval_loss: float
    checkpoint_path: Path
    metrics_path: Path
    params: MtpParams


def _sample_loss(params_nodes, sample, dataset, cfg, mode, rng):
    mol = dataset.molecule(sample)
    target = dataset.target_features(sample.target_id)
    pocket = dataset.targets[sample.target_id].pocket_indices
    pred, _ = forward_pass(mol, target, pocket, params_nodes, cfg,
                           mode=mode, rng=rng, target_id=sample.target_id)
    return pred, loss_node(pred, sample.label, cfg.task)


def evaluate_split(params: MtpParams, dataset: DatasetManifest, split: str,
                   cfg: MtpConfig | None = None):
    """Mean loss plus (labels, predictions) over one split, eval mode.

    Classification predictions are probabilities.
    """
    cfg = (cfg or params.config).resolved()
    samples = dataset.split_samples(split)
    if not samples:
        raise DataError(f"split {split!r} has no samples")
    losses = []
    labels = []
    preds = []
    for sample in samples:
        pn = params.node_view()
        pred, loss = _sample_loss(pn, sample, dataset, cfg, "eval", None)
        losses.append(float(loss.value[0, 0]))
        labels.append(sample.label)
        z = float(pred.value[0, 0])
        preds.append(float(sigmoid(np.array([z]))[0]) if cfg.task == "classification" else z)
    return float(np.mean(losses)), np.array(labels), np.array(preds)


def evaluation_report(params: MtpParams, dataset: DatasetManifest, split: str,
                      seed: int | None = None) -> MetricsReport:
    cfg = params.config.resolved()
    _, labels, preds = evaluate_split(params, dataset, split, cfg)
    return compute_report(
        labels, preds, cfg.task, split,
        seed=cfg.seed if seed is None else seed,
        config_hash=config_hash(cfg, params.d_mol, params.d_pro),
    )


def train(dataset: DatasetManifest, model_cfg: MtpConfig, train_cfg: TrainConfig,
          out_dir) -> TrainResult:
    model_cfg = model_cfg.resolved()
    train_cfg = train_cfg.validate()
    if model_cfg.task != dataset.task:
        raise ConfigError(
            f"model task {model_cfg.task!r} does not match manifest task {dataset.task!r}"
        )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    checkpoint_path = out / "checkpoint.bin"
    metrics_path = out / "metrics.log"

    train_samples = dataset.split_samples("train")
    if not train_samples:
        raise DataError("manifest has no train samples")
    params = init_params(model_cfg, dataset.d_mol, dataset.d_pro)
    optimizer = Adam(params, train_cfg.lr, train_cfg.beta1, train_cfg.beta2,
                     train_cfg.eps)
    rng = np.random.default_rng(train_cfg.seed)
    chash = config_hash(model_cfg, dataset.d_mol, dataset.d_pro)

    best_eval = float("inf")
    best_epoch = -1
    since_best = 0
    history = []

    with open(metrics_path, "w") as log:
        for epoch in range(train_cfg.epochs):
            order = rng.permutation(len(train_samples))
            accum: dict = {}
            accum_count = 0
            epoch_losses = []

            def flush():
                nonlocal accum, accum_count
                if accum_count == 0:
                    return
                optimizer.step({k: v / accum_count for k, v in accum.items()})
                accum = {}
                accum_count = 0

            for idx in order:
                sample = train_samples[int(idx)]
                pn = params.node_view()
                _, loss = _sample_loss(pn, sample, dataset, model_cfg, "train", rng)
                grads = backward(loss, pn.all_nodes())
                epoch_losses.append(float(loss.value[0, 0]))
                for name, g in grads.items():
                    acc = accum.get(name)
                    accum[name] = g.copy() if acc is None else acc + g
                accum_count += 1
                if accum_count == train_cfg.batch_size:
                    flush()
            flush()

            train_loss = float(np.mean(epoch_losses))
            eval_loss, labels, preds = evaluate_split(
                params, dataset, train_cfg.eval_split, model_cfg
            )
            report = compute_report(labels, preds, model_cfg.task,
                                    train_cfg.eval_split, train_cfg.seed, chash)
            improved = eval_loss < best_eval
            if improved:
                best_eval = eval_loss
                best_epoch = epoch
                since_best = 0
                save_checkpoint(params, checkpoint_path)
            else:
                since_best += 1

            record = {
                "epoch": epoch,
                "train_loss": train_loss,
                "eval_loss": eval_loss,
                "eval_split": train_cfg.eval_split,
                "metrics": report.to_dict(),
                "improved": improved,
            }
            history.append(record)
            log.write(json.dumps(record, sort_keys=True) + "\n")

            if train_cfg.patience is not None and since_best > train_cfg.patience:
                break

    return TrainResult(history, best_epoch, best_eval, checkpoint_path,
                       metrics_path, params)
