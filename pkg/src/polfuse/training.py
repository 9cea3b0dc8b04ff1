"""Deterministic training loop: seeded shuffles/crops, per-epoch CSV log,
best-validation checkpointing.

Given (seed, config, dataset) every emitted byte — log and checkpoint —
is reproducible.  Non-finite losses abort with a diagnostic rather than
silently poisoning the run.
"""

import os
from dataclasses import dataclass

import numpy as np

from . import config as config_mod
from .autodiff import Tensor, no_grad
from .checkpoint import save_checkpoint
from .dataset import build_index, epoch_rng, load_pair, random_crop_pair, split_scenes
from .errors import NumericError
from .losses import total_loss
from .network import MLSN
from .optim import adam_step

LOG_HEADER = "epoch,ssim,l1,con,tex,reg,total,val_total"
CHECKPOINT_NAME = "best.ckpt"
LOG_NAME = "log.csv"


@dataclass
class TrainResult:
    log_path: str
    checkpoint_path: str
    epochs_run: int
    initial_total: float
    final_total: float
    best_val: float


def _pair_tensors(pairs):
    s0 = np.stack([p[0] for p in pairs])[:, None, :, :]
    dolp = np.stack([p[1] for p in pairs])[:, None, :, :]
    return Tensor(s0), Tensor(dolp)


def _validation_total(model, params, val_pairs, weights):
    model.eval()
    totals = []
    with no_grad():
        for pair in val_pairs:
            s0_t, dolp_t = _pair_tensors([pair])
            pred = model(s0_t, dolp_t)
            breakdown, _ = total_loss(pred, s0_t, dolp_t, params, weights)
            totals.append(breakdown.total)
    model.train()
    return float(np.mean(totals))


def train_run(cfg, dataset_root=None, out_dir=None):
    """Full training run; returns artifact paths and loss summary."""
    root = dataset_root if dataset_root is not None else cfg.data_root
    out = out_dir if out_dir is not None else cfg.out_dir
    os.makedirs(out, exist_ok=True)
    log_path = os.path.join(out, LOG_NAME)
    ckpt_path = os.path.join(out, CHECKPOINT_NAME)
    cfg_text = config_mod.to_text(cfg)

    scenes = build_index(root)
    train_scenes, val_scenes = split_scenes(scenes, cfg.seed, cfg.val_count)
    train_pairs = [load_pair(s) for s in train_scenes]
    val_pairs = [load_pair(s) for s in val_scenes]

    model = MLSN(cfg.network, rng=cfg.seed)
    params = model.model_params()
    model.train()

    log_lines = [LOG_HEADER]
    initial_total = float("nan")
    final_total = float("nan")
    best_val = float("nan")
    seen_first = False

    if cfg.epochs == 0:
        save_checkpoint(ckpt_path, params, cfg_text)

    for epoch in range(cfg.epochs):
        rng = epoch_rng(cfg.seed, epoch)
        order = rng.permutation(len(train_pairs))
        sums = np.zeros(6, dtype=np.float64)
        steps = 0
        for start in range(0, len(order), cfg.batch_size):
            batch_idx = order[start : start + cfg.batch_size]
            crops = [
                random_crop_pair(*train_pairs[i], size=cfg.crop_size, rng=rng)
                for i in batch_idx
            ]
            s0_t, dolp_t = _pair_tensors(crops)
            try:
                pred = model(s0_t, dolp_t)
                breakdown, total = total_loss(
                    pred, s0_t, dolp_t, params, cfg.loss
                )
            except NumericError as exc:
                raise NumericError(
                    "aborting at epoch %d step %d: %s" % (epoch, steps, exc)
                ) from exc
            params.zero_grad()
            total.backward()
            adam_step(params, cfg.lr)
            sums += (
                breakdown.ssim, breakdown.l1, breakdown.con,
                breakdown.tex, breakdown.reg, breakdown.total,
            )
            steps += 1
            if not seen_first:
                initial_total = breakdown.total
                seen_first = True
            final_total = breakdown.total
        means = sums / steps
        val_total = _validation_total(model, params, val_pairs, cfg.loss)
        log_lines.append(
            "%d,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f"
            % (epoch, means[0], means[1], means[2], means[3], means[4], means[5], val_total)
        )
        if np.isnan(best_val) or val_total < best_val:
            best_val = val_total
            save_checkpoint(ckpt_path, params, cfg_text)

    with open(log_path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(log_lines) + "\n")
    return TrainResult(
        log_path=log_path,
        checkpoint_path=ckpt_path,
        epochs_run=cfg.epochs,
        initial_total=initial_total,
        final_total=final_total,
        best_val=best_val,
    )
