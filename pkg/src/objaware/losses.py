"""Training objectives: noun/verb-aware video-text contrastive loss with
same-video hard negatives, Hungarian-matched box loss on sparse targets,
noun-to-query alignment with a word-level contrastive loss, and their sum."""

from dataclasses import dataclass, field

import numpy as np
import torch

from .assignment import hungarian_solve, match_nouns
from .decoder import NUM_HANDS
from .geometry import box_pair_loss


@dataclass
class LossConfig:
    temperature: float = 0.05
    lambda_word: float = 0.5
    use_hard_negatives: bool = True

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError("temperature must be > 0")
        if self.lambda_word < 0:
            raise ValueError("lambda_word must be >= 0")


@dataclass
class BatchStructure:
    """Positive sets over the original batch plus the hard-negative pairing.

    ``hard_negatives[i]`` is the dataset index of the clip drawn as the hard
    negative for sample ``i`` (``None`` when disabled).
    """

    nouns: list
    verbs: list
    positives: list
    hard_negatives: list = None
    resampled: int = 0
    clip_indices: list = field(default_factory=list)

    @property
    def size(self):
        return len(self.positives)

    @property
    def doubled_size(self):
        return self.size * (2 if self.hard_negatives is not None else 1)

    def positive_mask(self):
        mask = np.zeros((self.size, self.size), dtype=bool)
        for m, pos in enumerate(self.positives):
            mask[m, pos] = True
        return mask


def build_positive_sets(nouns, verbs, hard_negatives=None):
    """``P_m`` = samples sharing at least one noun and one verb with ``m``;
    ``m`` itself is always included."""
    nouns = [set(n) for n in nouns]
    verbs = [set(v) for v in verbs]
    if len(nouns) != len(verbs):
        raise ValueError("noun and verb lists differ in length")
    positives = []
    for m in range(len(nouns)):
        pos = [n for n in range(len(nouns))
               if n == m or (nouns[n] & nouns[m] and verbs[n] & verbs[m])]
        positives.append(pos)
    return BatchStructure(nouns=nouns, verbs=verbs, positives=positives, hard_negatives=hard_negatives)


def _unit(x, what):
    x = x.double()
    norms = x.norm(dim=-1, keepdim=True)
    if (norms == 0).any():
        raise ValueError(f"zero-norm {what} embedding")
    return x / norms


def _directional(anchor, targets, hard, mask, temperature):
    sim = anchor @ targets.T / temperature
    denom = sim if hard is None else torch.cat([sim, anchor @ hard.T / temperature], dim=1)
    log_prob = sim - torch.logsumexp(denom, dim=1, keepdim=True)
    m = torch.as_tensor(mask, dtype=log_prob.dtype)
    return -((log_prob * m).sum(1) / m.sum(1)).mean()


def egonce(v, t, structure, temperature=0.05, v_hard=None, t_hard=None):
    """Video-to-text and text-to-video losses ``(v2t, t2v)``.

    Similarities are cosines divided by ``temperature``. Each anchor averages
    the negative log-probability of its positives; the softmax denominator
    ranges over the batch plus the hard negatives, which are never anchors.
    """
    v = _unit(v, "video")
    t = _unit(t, "text")
    if len(v) != len(t) or len(v) != structure.size:
        raise ValueError(f"batch sizes disagree: v={len(v)} t={len(t)} structure={structure.size}")
    v_hard = None if v_hard is None else _unit(v_hard, "hard-negative video")
    t_hard = None if t_hard is None else _unit(t_hard, "hard-negative text")
    mask = structure.positive_mask()
    v2t = _directional(v, t, t_hard, mask, temperature)
    t2v = _directional(t, v, v_hard, mask.T, temperature)
    return v2t, t2v


def box_loss(gt_frames, pred, stats=None):
    """Matched box loss averaged over matched pairs.

    Parameters
    ----------
    gt_frames : list (per sample) of lists of frame detections
        Each item exposes ``frame_idx``, ``hand_boxes`` and ``object_boxes``
        (``(n, 4)`` center-format arrays). Frames without items are
        unsupervised.
    pred : tensor (B, 2 + K, T, 4)
        Hand queries first, then object queries.
    stats : dict, optional
        Receives ``matched`` and ``surplus_dropped`` counts.

    Hands and objects are matched in separate problems per frame; unmatched
    predictions are not penalized.
    """
    k = pred.shape[1] - NUM_HANDS
    problems = []  # (sample, query offset, frame, gt boxes)
    dropped = 0
    for b, frames in enumerate(gt_frames):
        for fd in frames:
            for offset, capacity, boxes in ((0, NUM_HANDS, fd.hand_boxes), (NUM_HANDS, k, fd.object_boxes)):
                boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 4)
                if len(boxes) > capacity:
                    dropped += len(boxes) - capacity
                    boxes = boxes[:capacity]
                if len(boxes):
                    problems.append((b, offset, fd.frame_idx, boxes))
    rows, gts = [], []
    if problems:
        pred_np = pred.detach().double().cpu().numpy()
        # one vectorized cost evaluation for every (gt box, candidate query) pair
        flat_gt = np.concatenate([p[3] for p in problems])
        owner = np.repeat(np.arange(len(problems)), [len(p[3]) for p in problems])
        sample = np.array([p[0] for p in problems])
        frame = np.array([p[2] for p in problems])
        width = max(NUM_HANDS, k)
        # candidate queries per problem, padded with a dummy box beyond the group
        q = np.array([p[1] for p in problems])[:, None] + np.arange(width)[None, :]
        q = np.minimum(q, pred.shape[1] - 1)
        cand = pred_np[sample[:, None], q, frame[:, None]]
        costs = box_pair_loss(flat_gt[:, None, :], cand[owner])
        start = 0
        for b, offset, t, boxes in problems:
            width = NUM_HANDS if offset == 0 else k
            cols = hungarian_solve(costs[start:start + len(boxes), :width])
            start += len(boxes)
            rows.extend((b, offset + int(j), t) for j in cols)
            gts.append(boxes)
    if stats is not None:
        stats["matched"] = stats.get("matched", 0) + len(rows)
        stats["surplus_dropped"] = stats.get("surplus_dropped", 0) + dropped
    if not rows:
        return pred.double().sum() * 0.0
    idx = torch.as_tensor(rows)
    matched = pred[idx[:, 0], idx[:, 1], idx[:, 2]].double()
    target = torch.as_tensor(np.concatenate(gts), dtype=torch.float64)
    return box_pair_loss(target, matched).sum() / len(rows)


def word_loss(names, nouns, dictionary, temperature=0.05, stats=None):
    """Align nouns to predicted names, then contrast each matched name against
    every dictionary entry.

    ``names`` is ``(K, E)`` for one sample or ``(B, K, E)``/a list for a
    batch; ``nouns`` matches (``(N, E)`` or a list of those). Every noun
    embedding must also appear in ``dictionary`` ``(D, E)``. The loss is the
    mean over all aligned nouns; with no nouns it is 0.
    """
    if isinstance(names, torch.Tensor) and names.ndim == 2:
        names, nouns = [names], [nouns]
    dict_unit = _unit(dictionary, "dictionary")
    matched_names, matched_nouns = [], []
    for sample_names, sample_nouns in zip(names, nouns):
        if sample_nouns is None or len(sample_nouns) == 0:
            continue
        ni, qi = match_nouns(sample_nouns.detach().double().cpu().numpy(),
                             sample_names.detach().double().cpu().numpy())
        matched_names.append(sample_names[torch.as_tensor(qi)])
        matched_nouns.append(sample_nouns[torch.as_tensor(ni)])
    if stats is not None:
        stats["aligned"] = stats.get("aligned", 0) + sum(len(x) for x in matched_nouns)
    if not matched_names:
        zero = sum(n.double().sum() for n in names) * 0.0
        return zero + dictionary.double().sum() * 0.0
    pred = _unit(torch.cat(matched_names), "name")
    target = _unit(torch.cat(matched_nouns), "noun")
    positive = (pred * target).sum(-1) / temperature
    logits = pred @ dict_unit.T / temperature
    return (torch.logsumexp(logits, dim=1) - positive).mean()


def total_loss(parts, lambda_word=0.5):
    """``v2t + t2v + box + lambda_word * word``; missing parts count as zero."""
    total = 0.0
    for name in ("v2t", "t2v", "box"):
        if name in parts:
            total = total + parts[name]
    if "word" in parts and lambda_word:
        total = total + lambda_word * parts["word"]
    return total
