"""Training loop, checkpoints and the per-trial evaluation table."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..autodiff import checkpoint
from ..autodiff.optim import Adam
from ..autodiff.tensor import Tape, Tensor
from ..errors import TrainingError
from ..geometry.posmap import SENTINEL, PositionMap
from ..metrics import MetricRow, report_table, sequence_errors
from ..signal.preprocess import NormStats
from .config import LossWeights, TrainConfig
from .data import PreparedData, Splits
from .loss import position_map_loss
from .network import PositionMapNet

log = logging.getLogger(__name__)

LOSS_COLUMNS = ["step", "epoch", "l_rec", "l_smooth", "total"]


def make_optimizer(model: PositionMapNet, cfg: TrainConfig) -> Adam:
    return Adam(model.parameters(), lr=cfg.lr, betas=(cfg.beta1, cfg.beta2), eps=cfg.eps)


def train_step(model: PositionMapNet, opt: Adam, windows: np.ndarray, targets: np.ndarray,
               mask: np.ndarray, weights: LossWeights = LossWeights(), rng=None) -> dict:
    """Forward, loss, backward and one Adam update; returns the loss record."""
    model.train()
    opt.zero_grad()
    with Tape() as tape:
        pred = model(Tensor(windows.astype(np.float32)), rng)
        loss = position_map_loss(pred, targets, mask, weights)
    total = float(loss.total.data)
    if not np.isfinite(total):
        norms = {n: float(np.linalg.norm(p.data)) for n, p in model.parameters().items()}
        worst = max(norms, key=lambda n: norms[n] if np.isfinite(norms[n]) else np.inf)
        raise TrainingError(f"non-finite loss (rec={loss.rec}, smooth={loss.smooth}); "
                            f"largest parameter norm {worst}={norms[worst]:.3e}")
    tape.backward(loss.total)
    opt.step()
    return {"l_rec": loss.rec, "l_smooth": loss.smooth, "total": total}


def checkpoint_state(model: PositionMapNet, norm: NormStats | None = None) -> dict[str, np.ndarray]:
    state = {f"model.{k}": v for k, v in model.state_dict().items()}
    if norm is not None:
        state["norm.mean"] = np.asarray(norm.mean, np.float32)
        state["norm.std"] = np.asarray(norm.std, np.float32)
    return state


def restore(model: PositionMapNet, state: dict[str, np.ndarray]) -> NormStats | None:
    model.load_state_dict({k[len("model."):]: v for k, v in state.items() if k.startswith("model.")})
    if "norm.mean" in state:
        return NormStats(state["norm.mean"], state["norm.std"])
    return None


@dataclass
class TrainResult:
    model: PositionMapNet
    optimizer: Adam
    history: list[dict] = field(default_factory=list)
    steps: int = 0


def _fmt(v) -> str:
    return f"{v:.9e}" if isinstance(v, float) else str(v)


def fit(model: PositionMapNet, data: PreparedData, splits: Splits, cfg: TrainConfig,
        weights: LossWeights = LossWeights(), out_dir=None) -> TrainResult:
    """Shuffled mini-batch training; writes ``loss.csv`` and checkpoints into ``out_dir``."""
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1]))
    drop_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 2]))
    opt = make_optimizer(model, cfg)
    result = TrainResult(model, opt)
    out = Path(out_dir) if out_dir is not None else None
    csv = None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        csv = open(out / "loss.csv", "w", newline="\n")
        csv.write(",".join(LOSS_COLUMNS) + "\n")
    mask = data.mask
    train = np.array(splits.train, dtype=np.int64).reshape(-1, 2)
    if len(train) == 0:
        raise TrainingError("no training examples")
    step = 0
    try:
        for epoch in range(cfg.epochs):
            order = rng.permutation(len(train))
            for start in range(0, len(order), cfg.batch):
                chosen = train[order[start:start + cfg.batch]]
                windows = np.stack([data.trials[p].windows[i] for p, i in chosen])
                targets = np.concatenate([data.targets(data.trials[p], i) for p, i in chosen])
                rec = train_step(model, opt, windows, targets, mask, weights, drop_rng)
                step += 1
                rec = {"step": step, "epoch": epoch, **rec}
                result.history.append(rec)
                if csv is not None and step % cfg.log_every == 0:
                    csv.write(",".join(_fmt(rec[c]) for c in LOSS_COLUMNS) + "\n")
                if step % 50 == 0:
                    log.info("step %d epoch %d loss %.6g", step, epoch, rec["total"])
                if out is not None and cfg.checkpoint_every and step % cfg.checkpoint_every == 0:
                    checkpoint.save(out / f"checkpoint_{step:06d}.mmck", checkpoint_state(model, data.norm))
                if cfg.max_steps and step >= cfg.max_steps:
                    break
            if cfg.max_steps and step >= cfg.max_steps:
                break
    finally:
        if csv is not None:
            csv.close()
    if out is not None:
        checkpoint.save(out / "final.mmck", checkpoint_state(model, data.norm))
    result.steps = step
    return result


def predict_maps(model: PositionMapNet, windows: np.ndarray, mask: np.ndarray, batch: int = 16) -> list[PositionMap]:
    """Eval-mode predictions as position maps, sentinel-filled outside ``mask``."""
    pred = model.predict(windows, batch)
    keep = mask.astype(bool)
    maps = []
    for p in pred:
        data = p.transpose(1, 2, 0).astype(np.float32)
        data[~keep] = SENTINEL
        maps.append(PositionMap(np.ascontiguousarray(data), mask.astype(np.uint8)))
    return maps


def evaluate(model: PositionMapNet, data: PreparedData, splits: Splits, subject_id: str = "S1",
             predictor=None):
    """Per-trial nMAE / nRMSE on test segments, then holdout trials.

    ``predictor`` maps a window batch to maps and defaults to the model.
    """
    rows = []
    mask = data.mask
    predictor = predictor or (lambda w: predict_maps(model, w, mask))
    for holdout, group in ((False, splits.test), (True, splits.holdout)):
        for trial_id, idx in group.items():
            trial = data.trial(trial_id)
            pred = predictor(trial.windows[idx])
            truth = data.target_maps(trial, idx)
            err = sequence_errors(pred, truth)
            rows.append(MetricRow(trial_id, err.nmae, err.nrmse, len(idx), holdout, err.value_range))
    return report_table(rows, subject_id)
