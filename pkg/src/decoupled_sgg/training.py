"""Training loop, checkpoints, and checkpoint evaluation on a synthetic corpus."""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import torch

from .criterion import LossCoefficients, SetCriterion
from .dataset import Corpus, SplitSpec
from .errors import ConfigError, NumericalError
from .inference import TripletPrediction, compose_triplets, dump_predictions, top_k
from .matching import MatchWeights
from .metrics import EvalReport, evaluate
from .model import DDSNet, ModelConfig, build_model

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
LOSS_COLUMNS = ("step", "total", "l_giou", "l_l1", "l_obj", "l_rel")


@dataclass
class RunConfig:
    model: ModelConfig
    match_weights: tuple[float, float, float] = (1.0, 1.0, 1.0)
    loss_coeffs: tuple[float, float, float, float] = (1.0, 2.5, 1.0, 1.0)
    no_object_weight: float = 0.1
    region_mode: str = "union"
    theta: float = 0.0
    lr: float = 1e-4
    backbone_lr: float = 1e-5
    weight_decay: float = 1e-4
    lr_drop_every: int = 0
    lr_drop_factor: float = 0.1
    grad_clip: float = 0.1
    steps: int = 1000
    videos_per_step: int = 4
    checkpoint_every: int = 0
    seed: int = 0
    dtype: str = "float32"
    eval_ks: tuple[int, ...] = (20, 50)
    eval_top_k: int = 100
    iou_threshold: float = 0.5
    corpus: str = ""
    split: str = ""
    train_videos: Optional[list[str]] = None  # overrides the split's train list (overfit runs)

    def __post_init__(self):
        if isinstance(self.model, dict):
            self.model = ModelConfig.from_dict(self.model)
        self.match_weights = tuple(self.match_weights)
        self.loss_coeffs = tuple(self.loss_coeffs)
        self.eval_ks = tuple(self.eval_ks)
        for name in ("match_weights", "loss_coeffs"):
            vals = getattr(self, name)
            if not all(math.isfinite(v) and v >= 0 for v in vals):
                raise ConfigError(f"{name} must be finite and non-negative, got {vals}")
        if self.region_mode not in ("union", "mixture"):
            raise ConfigError(f"region_mode must be 'union' or 'mixture', got {self.region_mode!r}")
        if not 0.0 <= self.theta < 1.0:
            raise ConfigError(f"theta must lie in [0, 1), got {self.theta}")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError(f"dtype must be float32 or float64, got {self.dtype!r}")
        if self.steps < 0 or self.videos_per_step < 1:
            raise ConfigError("steps must be >= 0 and videos_per_step >= 1")

    def to_dict(self) -> dict:
        return json.loads(json.dumps(dataclasses.asdict(self)))

    @classmethod
    def from_dict(cls, data: dict) -> RunConfig:
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown run config fields: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path) -> RunConfig:
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except (OSError, json.JSONDecodeError, TypeError) as exc:
            raise ConfigError(f"cannot read run config {path}: {exc}") from None

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n")

    def criterion(self) -> SetCriterion:
        return SetCriterion(MatchWeights(*self.match_weights), LossCoefficients(*self.loss_coeffs),
                            self.model.subject_fixed, self.no_object_weight, self.region_mode, self.theta)

    @property
    def torch_dtype(self):
        return torch.float64 if self.dtype == "float64" else torch.float32


def config_hash(data: dict) -> str:
    return hashlib.sha256(json.dumps(data, sort_keys=True).encode()).hexdigest()[:16]


def config_diff(a: dict, b: dict, prefix: str = "") -> list[str]:
    out = []
    for k in sorted(set(a) | set(b)):
        va, vb = a.get(k, "<absent>"), b.get(k, "<absent>")
        if isinstance(va, dict) and isinstance(vb, dict):
            out += config_diff(va, vb, f"{prefix}{k}.")
        elif va != vb:
            out.append(f"{prefix}{k}: {va!r} != {vb!r}")
    return out


def frames_to_tensor(frames: np.ndarray, dtype=torch.float32) -> torch.Tensor:
    """uint8 ``(T, H, W, 3)`` -> normalized ``(T, 3, H, W)``."""
    x = torch.from_numpy(np.ascontiguousarray(frames)).to(dtype).permute(0, 3, 1, 2)
    return (x / 255.0 - 0.5) / 0.25


class FrameCache:
    def __init__(self, corpus: Corpus, dtype=torch.float32):
        self.corpus, self.dtype, self._cache = corpus, dtype, {}

    def __getitem__(self, video_id: str) -> torch.Tensor:
        if video_id not in self._cache:
            self._cache[video_id] = frames_to_tensor(self.corpus.load_frames(video_id), self.dtype)
        return self._cache[video_id]


def _optimizer(model: DDSNet, cfg: RunConfig):
    backbone = [p for n, p in model.named_parameters() if n.startswith("backbone.")]
    rest = [p for n, p in model.named_parameters() if not n.startswith("backbone.")]
    opt = torch.optim.AdamW([{"params": rest, "lr": cfg.lr}, {"params": backbone, "lr": cfg.backbone_lr}],
                            weight_decay=cfg.weight_decay)
    sched = (torch.optim.lr_scheduler.StepLR(opt, cfg.lr_drop_every, cfg.lr_drop_factor)
             if cfg.lr_drop_every else None)
    return opt, sched


def batch_loss(model: DDSNet, criterion: SetCriterion, videos: torch.Tensor, annotations) -> dict:
    """Mean per-frame loss over a batch of equally long videos. ``annotations[b][t]``."""
    outputs = model(videos)
    parts, n = None, 0
    for t, preds in enumerate(outputs):
        for b, pred in enumerate(preds):
            loss, _ = criterion(pred, annotations[b][t])
            parts = loss if parts is None else parts + loss
            n += 1
    return {k: v / n for k, v in parts._asdict().items()}


def _step_batch(cfg: RunConfig, train_ids: Sequence[str], step: int) -> list[str]:
    rng = np.random.default_rng([cfg.seed, step])
    k = min(cfg.videos_per_step, len(train_ids))
    return [train_ids[i] for i in sorted(rng.choice(len(train_ids), size=k, replace=False).tolist())]


def save_checkpoint(path: Path, model: DDSNet, opt, sched, cfg: RunConfig, step: int) -> None:
    torch.save({"model": model.state_dict(), "optimizer": opt.state_dict(),
                "scheduler": None if sched is None else sched.state_dict(), "step": step}, path)
    meta = {"format_version": CHECKPOINT_VERSION, "model": cfg.model.to_dict(), "run": cfg.to_dict(),
            "step": step, "seed": cfg.seed}
    path.with_suffix(".json").write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n")


def read_checkpoint_meta(path) -> dict:
    meta_path = Path(path).with_suffix(".json")
    try:
        meta = json.loads(meta_path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read checkpoint metadata {meta_path}: {exc}") from None
    if meta.get("format_version") != CHECKPOINT_VERSION:
        raise ConfigError(f"unsupported checkpoint format {meta.get('format_version')}")
    return meta


def load_model(path, expected: Optional[ModelConfig] = None, dtype=None) -> tuple[DDSNet, dict]:
    """Rebuild a model from a checkpoint; refuses when ``expected`` differs from the stored config."""
    meta = read_checkpoint_meta(path)
    stored = ModelConfig.from_dict(meta["model"])
    if expected is not None and expected.to_dict() != stored.to_dict():
        diff = config_diff(json.loads(json.dumps(expected.to_dict())), meta["model"])
        raise ConfigError("checkpoint model config differs:\n  " + "\n  ".join(diff))
    dtype = dtype or (torch.float64 if meta["run"]["dtype"] == "float64" else torch.float32)
    model = build_model(stored, meta["seed"], dtype)
    state = torch.load(path, weights_only=True)
    model.load_state_dict(state["model"])
    return model, meta


@dataclass
class TrainResult:
    model: DDSNet
    steps_run: int
    losses: list[dict] = field(default_factory=list)


def train(cfg: RunConfig, corpus: Corpus, split: Optional[SplitSpec], out_dir, resume=None,
          progress: bool = False) -> TrainResult:
    """Train for ``cfg.steps`` optimizer steps, appending one loss-log row per step.

    Batches are drawn from ``(seed, step)``, so a run resumed from a checkpoint
    continues exactly as the uninterrupted run would have.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    torch.manual_seed(cfg.seed)
    model = build_model(cfg.model, cfg.seed, cfg.torch_dtype)
    opt, sched = _optimizer(model, cfg)
    start = 0
    if resume is not None:
        meta = read_checkpoint_meta(resume)
        diff = config_diff(meta["model"], json.loads(json.dumps(cfg.model.to_dict())))
        if diff:
            raise ConfigError("checkpoint model config differs:\n  " + "\n  ".join(diff))
        state = torch.load(resume, weights_only=False)
        model.load_state_dict(state["model"])
        opt.load_state_dict(state["optimizer"])
        if sched is not None and state["scheduler"] is not None:
            sched.load_state_dict(state["scheduler"])
        start = state["step"]

    train_ids = list(cfg.train_videos if cfg.train_videos is not None else split.train_videos)
    if not train_ids:
        raise ConfigError("no training videos")
    frames = FrameCache(corpus, cfg.torch_dtype)
    criterion = cfg.criterion()
    log_path = out / "loss_log.csv"
    mode = "a" if resume is not None and log_path.exists() else "w"
    losses = []
    t0 = time.time()
    with open(log_path, mode, newline="") as fp:
        writer = csv.writer(fp, lineterminator="\n")
        if mode == "w":
            writer.writerow(LOSS_COLUMNS)
        model.train()
        for step in range(start, cfg.steps):
            ids = _step_batch(cfg, train_ids, step)
            by_len: dict[int, list[str]] = {}
            for vid in ids:
                by_len.setdefault(len(corpus.video(vid).frames), []).append(vid)
            opt.zero_grad()
            totals = None
            for vids in by_len.values():
                videos = torch.stack([frames[v] for v in vids])
                anns = [corpus.video(v).frames for v in vids]
                parts = batch_loss(model, criterion, videos, anns)
                weight = len(vids) / len(ids)
                (parts["total"] * weight).backward()
                parts = {k: float(v.detach()) * weight for k, v in parts.items()}
                totals = parts if totals is None else {k: totals[k] + parts[k] for k in parts}
            if not all(math.isfinite(v) for v in totals.values()):
                raise NumericalError(f"non-finite loss at step {step + 1}: {totals}")
            if cfg.grad_clip > 0:
                torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.grad_clip)
            opt.step()
            if sched is not None:
                sched.step()
            row = {"step": step + 1, **{k: totals[k] for k in LOSS_COLUMNS[1:]}}
            writer.writerow([row["step"]] + [repr(row[k]) for k in LOSS_COLUMNS[1:]])
            losses.append(row)
            if progress and (step + 1) % 50 == 0:
                log.info("step %d total %.4f (%.1fs)", step + 1, row["total"], time.time() - t0)
            if cfg.checkpoint_every and (step + 1) % cfg.checkpoint_every == 0:
                save_checkpoint(out / f"ckpt_{step + 1:06d}.pt", model, opt, sched, cfg, step + 1)
    save_checkpoint(out / "final.pt", model, opt, sched, cfg, cfg.steps)
    (out / "timing.json").write_text(json.dumps({"wall_seconds": time.time() - t0}) + "\n")
    return TrainResult(model, cfg.steps - start, losses)


@torch.no_grad()
def predict_video(model: DDSNet, frames: torch.Tensor, subject_class: Optional[int],
                  k: int = 100) -> list[list[TripletPrediction]]:
    """Top-``k`` triplet candidates for every frame of one video."""
    model.eval()
    preds = model.forward_video(frames)
    fixed = model.cfg.subject_fixed
    return [top_k(compose_triplets(p, fixed, subject_class or 0, t), k) for t, p in enumerate(preds)]


def evaluate_model(model: DDSNet, corpus: Corpus, video_ids: Sequence[str], split: SplitSpec,
                   cfg: RunConfig, dump_path=None) -> EvalReport:
    frames = FrameCache(corpus, next(model.parameters()).dtype)
    all_preds, all_gts = [], []
    fp = open(dump_path, "w") if dump_path else None
    try:
        for vid in video_ids:
            preds = predict_video(model, frames[vid], corpus.subject_class, cfg.eval_top_k)
            all_preds += preds
            all_gts += corpus.video(vid).frames
            if fp:
                for frame_preds in preds:
                    dump_predictions(fp, vid, frame_preds)
    finally:
        if fp:
            fp.close()
    return evaluate(all_preds, all_gts, split.seen, split.unseen, cfg.eval_ks, cfg.iou_threshold)


def write_report(report: EvalReport, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json())
    (out / "classes.csv").write_text(report.class_table())
