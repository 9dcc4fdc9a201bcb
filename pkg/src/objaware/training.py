"""Optimization loop: forward through encoders and decoder, the summed
objective, decoupled-weight-decay Adam updates, backbone freezing,
finite-difference gradient verification and resumable checkpoints."""

import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .checkpoint import Checkpoint
from .config import ModelConfig, TrainConfig
from .data import sample_batch
from .encoders import Vocabulary, frames_to_tensor, tokenize
from .losses import box_loss, egonce, total_loss, word_loss
from .model import ObjectAwareModel

log = logging.getLogger(__name__)

LOSS_NAMES = ("v2t", "t2v", "box", "word")


class NonFiniteError(RuntimeError):
    pass


@dataclass
class TextContext:
    """Vocabulary plus the noun dictionary used as the word-loss negative pool."""

    vocab: Vocabulary
    dictionary: list  # canonical nouns
    index: dict = field(default_factory=dict)

    def __post_init__(self):
        self.index = {n: i for i, n in enumerate(self.dictionary)}
        self.dict_tokens = [tokenize(n, self.vocab) for n in self.dictionary]

    @classmethod
    def from_taxonomy(cls, vocab, taxonomy):
        nouns = taxonomy.nouns
        kept = [g.canonical for g in nouns.groups if not nouns._removed(g.canonical, g)]
        return cls(vocab, kept)


def set_determinism(seed, threads=1):
    torch.manual_seed(seed)
    torch.set_num_threads(threads)
    torch.use_deterministic_algorithms(True)


def build_model(cfg, vocab_size=None):
    mcfg = cfg.model
    if vocab_size is not None and vocab_size != mcfg.vocab_size:
        mcfg = ModelConfig(**{**mcfg.__dict__, "vocab_size": vocab_size})
        cfg.model = mcfg
    torch.manual_seed(cfg.seed)
    model = ObjectAwareModel(mcfg).to(cfg.dtype)
    model.set_backbone_trainable(not cfg.freeze_backbone)
    return model


def build_optimizer(model, cfg):
    decay, no_decay = [], []
    for name, p in model.named_parameters():
        if not p.requires_grad:
            continue
        # biases and normalization parameters are not decayed
        (no_decay if p.ndim == 1 or "norm" in name else decay).append(p)
    groups = [{"params": decay, "weight_decay": cfg.weight_decay},
              {"params": no_decay, "weight_decay": 0.0}]
    return torch.optim.AdamW(groups, lr=cfg.lr, betas=cfg.betas, eps=cfg.eps, foreach=False)


def compute_losses(model, batch, ctx, cfg, stats=None):
    """Per-term losses for one batch as a dict of scalar tensors."""
    dtype = model.dtype
    out = model(frames_to_tensor(batch.frames, dtype))
    text = model.embed_text([tokenize(s.record.narration, ctx.vocab) for s in batch.samples])
    v_hard = t_hard = None
    if cfg.use_hard_negatives and batch.hard is not None:
        v_hard = model(frames_to_tensor(batch.hard_frames, dtype)).video_emb
        t_hard = model.embed_text([tokenize(s.record.narration, ctx.vocab) for s in batch.hard])
    v2t, t2v = egonce(out.video_emb, text, batch.structure, cfg.temperature, v_hard, t_hard)
    parts = {"v2t": v2t, "t2v": t2v}
    if cfg.use_box_loss:
        parts["box"] = box_loss([s.detections for s in batch.samples], out.boxes, stats)
    if cfg.use_word_loss:
        dict_emb = model.embed_text(ctx.dict_tokens)
        nouns = []
        for s in batch.samples:
            idx = [ctx.index[n] for n in s.nouns if n in ctx.index]
            nouns.append(dict_emb[torch.as_tensor(idx, dtype=torch.long)])
        parts["word"] = word_loss(list(out.name_emb), nouns, dict_emb, cfg.temperature, stats)
    return parts


@dataclass
class StepReport:
    losses: dict
    total: float
    grad_norm: float


def train_step(model, optimizer, batch, ctx, cfg, step=0):
    """One update; raises :class:`NonFiniteError` naming the offending term."""
    if cfg.warmup_steps:
        scale = min(1.0, (step + 1) / cfg.warmup_steps)
        for g in optimizer.param_groups:
            g["lr"] = cfg.lr * scale
    optimizer.zero_grad(set_to_none=True)
    parts = compute_losses(model, batch, ctx, cfg)
    for name, value in parts.items():
        if not torch.isfinite(value):
            raise NonFiniteError(f"loss term {name!r} is not finite ({float(value.detach())})")
    total = total_loss(parts, cfg.lambda_word)
    total.backward()
    sq = 0.0
    for name, p in model.named_parameters():
        if p.grad is None:
            continue
        if not torch.isfinite(p.grad).all():
            raise NonFiniteError(f"non-finite gradient in {name} (loss terms: {sorted(parts)})")
        sq += float((p.grad.double() ** 2).sum())
    optimizer.step()
    return StepReport({k: float(v.detach()) for k, v in parts.items()}, float(total.detach()), math.sqrt(sq))


@torch.no_grad()
def orient_hand_queries(model, optimizer, frames):
    """Make the first hand query the left hand.

    The box loss matches hands by Hungarian assignment, so the two hand
    queries are interchangeable and training picks an arbitrary order. When
    the first query's boxes sit right of the second's on average over
    ``frames``, the two query vectors are swapped together with their
    optimizer state, which swaps the hand outputs and leaves every loss
    unchanged. Returns whether a swap happened.
    """
    cx = model(frames).boxes[:, :2, :, 0].double().mean(dim=(0, 2))
    if cx[0] <= cx[1]:
        return False
    hand = model.decoder.bank.hand
    order = torch.tensor([1, 0])
    hand.copy_(hand[order])
    for key, value in optimizer.state.get(hand, {}).items():
        if key != "step":
            value.copy_(value[order])
    return True


def make_checkpoint(model, optimizer, rng, cfg, epoch, step, vocab=None):
    tensors = {f"model/{k}": v for k, v in model.state_dict().items()}
    names = {id(p): n for n, p in model.named_parameters()}
    for group in optimizer.param_groups:
        for p in group["params"]:
            state = optimizer.state.get(p)
            if not state:
                continue
            for key, value in state.items():
                tensors[f"optim/{names[id(p)]}/{key}"] = torch.as_tensor(value).reshape(-1) if key == "step" else value
    meta = {"config": cfg.to_dict(), "epoch": epoch, "step": step,
            "rng": _jsonable_state(rng.bit_generator.state)}
    if vocab is not None:
        meta["vocab"] = list(vocab.tokens)
    return Checkpoint(tensors, meta)


def _jsonable_state(state):
    return json.loads(json.dumps(state))


def restore_checkpoint(ckpt, cfg, model, optimizer=None, rng=None):
    """Load parameters (and optimizer/rng state) after checking the config matches."""
    saved = TrainConfig.from_dict(ckpt.meta["config"])
    if saved.model != cfg.model:
        raise ValueError(f"checkpoint model config {saved.model} does not match {cfg.model}")
    state = {k[len("model/"):]: v for k, v in ckpt.tensors.items() if k.startswith("model/")}
    model.load_state_dict(state, strict=True)
    if optimizer is not None:
        params = dict(model.named_parameters())
        for key, value in ckpt.tensors.items():
            if not key.startswith("optim/"):
                continue
            name, slot = key[len("optim/"):].rsplit("/", 1)
            if name not in params:
                raise ValueError(f"optimizer state for unknown parameter {name}")
            st = optimizer.state[params[name]]
            st[slot] = value.reshape(()).float() if slot == "step" else value.clone()
    if rng is not None:
        rng.bit_generator.state = ckpt.meta["rng"]
    return ckpt.meta["epoch"], ckpt.meta["step"]


@dataclass
class TrainResult:
    model: ObjectAwareModel
    checkpoint: Checkpoint
    metrics: list
    ctx: TextContext


def train(dataset, cfg, vocab, out_dir=None, resume=None, on_step=None, num_threads=1):
    """Epoch loop over shuffled batches. Writes ``checkpoint_epochNNN.ckpt``,
    ``last.ckpt`` and ``metrics.jsonl`` into ``out_dir`` when given.

    ``resume`` is a checkpoint (or path); continuing from it gives the same
    parameters as an uninterrupted run.
    """
    set_determinism(cfg.seed, num_threads)
    ctx = TextContext.from_taxonomy(vocab, dataset.taxonomy)
    model = build_model(cfg, len(vocab))
    optimizer = build_optimizer(model, cfg)
    rng = np.random.default_rng(cfg.seed)
    epoch, step = 0, 0
    if resume is not None:
        ckpt = resume if isinstance(resume, Checkpoint) else Checkpoint.load(resume)
        epoch, step = restore_checkpoint(ckpt, cfg, model, optimizer, rng)
    out = Path(out_dir) if out_dir else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
    probe = frames_to_tensor(np.stack([dataset.frames(i) for i in range(min(64, len(dataset)))]), cfg.dtype)
    metrics = []
    metrics_file = open(out / "metrics.jsonl", "a") if out else None
    try:
        while epoch < cfg.epochs:
            order = rng.permutation(len(dataset))
            for start in range(0, len(order), cfg.batch_size):
                chunk = [int(i) for i in order[start:start + cfg.batch_size]]
                batch = sample_batch(dataset, len(chunk), cfg.use_hard_negatives, rng, indices=chunk)
                tic = time.perf_counter()
                report = train_step(model, optimizer, batch, ctx, cfg, step)
                record = {"step": step, "epoch": epoch, **{k: report.losses.get(k, 0.0) for k in LOSS_NAMES},
                          "total": report.total, "grad_norm": report.grad_norm,
                          "wall_time": time.perf_counter() - tic}
                metrics.append(record)
                if metrics_file:
                    metrics_file.write(json.dumps(record, sort_keys=True) + "\n")
                if on_step:
                    on_step(record)
                step += 1
            epoch += 1
            if cfg.use_box_loss and cfg.lr > 0 and orient_hand_queries(model, optimizer, probe):
                log.info("epoch %d: swapped hand queries so the first one tracks the left hand", epoch)
            log.info("epoch %d/%d total=%.4f", epoch, cfg.epochs, metrics[-1]["total"] if metrics else float("nan"))
            if out and (epoch % cfg.checkpoint_every == 0 or epoch == cfg.epochs):
                make_checkpoint(model, optimizer, rng, cfg, epoch, step, vocab).save(out / f"checkpoint_epoch{epoch:03d}.ckpt")
    finally:
        if metrics_file:
            metrics_file.close()
    ckpt = make_checkpoint(model, optimizer, rng, cfg, epoch, step, vocab)
    if out:
        ckpt.save(out / "last.ckpt")
    return TrainResult(model, ckpt, metrics, ctx)


def load_model(ckpt):
    """Rebuild ``(model, config, vocabulary)`` from a checkpoint for inference.
    The vocabulary is ``None`` for checkpoints saved without one."""
    ckpt = ckpt if isinstance(ckpt, Checkpoint) else Checkpoint.load(ckpt)
    cfg = TrainConfig.from_dict(ckpt.meta["config"])
    model = ObjectAwareModel(cfg.model).to(cfg.dtype)
    restore_checkpoint(ckpt, cfg, model)
    model.eval()
    vocab = Vocabulary(ckpt.meta["vocab"]) if "vocab" in ckpt.meta else None
    return model, cfg, vocab


def gradient_check(model, batch, ctx, cfg, n_per_group=200, step=1e-4, seed=0,
                   scale_floor=None, corrupt=None):
    """Compare analytic gradients of the total loss with central differences.

    Returns ``{group: max relative error}`` over a random sample of up to
    ``n_per_group`` scalars per parameter group (groups without trainable
    parameters are skipped). The relative error of one scalar is
    ``|g - fd| / max(|g|, |fd|, floor)``, with ``floor`` defaulting to 1% of
    the largest gradient magnitude in the group, so that entries that are
    numerically zero do not divide by rounding noise. ``corrupt`` may modify
    the analytic gradients in place (used to test the detector).
    """
    if model.dtype != torch.float64:
        raise ValueError("gradient checks need the model in float64 (precision='high')")
    rng = np.random.default_rng(seed)

    def loss_value():
        return total_loss(compute_losses(model, batch, ctx, cfg), cfg.lambda_word)

    model.zero_grad(set_to_none=True)
    total = loss_value()
    if isinstance(total, torch.Tensor) and total.requires_grad:
        total.backward()
    report = {}
    with torch.no_grad():
        for group, params in model.parameter_groups().items():
            params = [p for p in params if p.requires_grad]
            if not params:
                continue
            grads = [torch.zeros_like(p) if p.grad is None else p.grad.detach().clone() for p in params]
            if corrupt is not None:
                corrupt(group, grads)
            sizes = np.array([p.numel() for p in params])
            flat_total = int(sizes.sum())
            picks = rng.choice(flat_total, size=min(n_per_group, flat_total), replace=False)
            offsets = np.concatenate([[0], np.cumsum(sizes)])
            gmax = max(float(g.abs().max()) for g in grads)
            floor = scale_floor if scale_floor is not None else max(1e-2 * gmax, 1e-12)
            worst = 0.0
            for flat in np.sort(picks):
                k = int(np.searchsorted(offsets, flat, side="right") - 1)
                i = int(flat - offsets[k])
                view = params[k].view(-1)
                orig = view[i].item()
                view[i] = orig + step
                plus = float(loss_value())
                view[i] = orig - step
                minus = float(loss_value())
                view[i] = orig
                fd = (plus - minus) / (2 * step)
                g = float(grads[k].view(-1)[i])
                err = abs(g - fd) / max(abs(g), abs(fd), floor)
                worst = max(worst, err)
            report[group] = worst
    model.zero_grad(set_to_none=True)
    return report
