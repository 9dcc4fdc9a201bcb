"""Evaluation protocols: 5-way multiple-choice retrieval, multi-instance
retrieval mAP/nDCG, zero-shot classification with clip max-pooling, box
grounding with its detector baselines, and clip feature export."""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .assignment import hungarian_solve, match_nouns
from .decoder import NUM_HANDS
from .encoders import frames_to_tensor, tokenize
from .geometry import box_pair_loss, center_inside, iou, pairwise_iou
from .data.taxonomy import extract_nouns, extract_verbs
from .validation import check_boxes, check_embeddings, check_relevance


def _unit_rows(x):
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


# ---------------------------------------------------------------- MCQ

def mcq_accuracy(queries, candidates, answers, splits=None):
    """Fraction of questions whose answer has the highest cosine with the query.

    ``queries`` is ``(Q, E)``, ``candidates`` ``(Q, n, E)``, ``answers`` the
    correct positions and ``splits`` a label per question (``"inter"`` or
    ``"intra"``). Ties go to the lowest candidate index. Returns accuracy and
    count per split; a split with no questions reports ``None``.
    """
    q = check_embeddings(queries, "queries")
    c = np.asarray(candidates, dtype=np.float64)
    if c.ndim != 3 or c.shape[0] != len(q) or c.shape[2] != q.shape[1]:
        raise ValueError(f"candidates shape {c.shape} does not match queries {q.shape}")
    answers = np.asarray(answers)
    scores = np.einsum("qe,qne->qn", _unit_rows(q), _unit_rows(c))
    correct = scores.argmax(axis=1) == answers
    splits = np.asarray(["intra"] * len(q) if splits is None else splits)
    out = {}
    for name in ("inter", "intra"):
        sel = splits == name
        out[name] = float(correct[sel].mean()) if sel.any() else None
        out[f"n_{name}"] = int(sel.sum())
    return out


@dataclass
class Question:
    query: str
    candidates: list  # dataset indices
    answer: int  # position of the correct clip among candidates
    split: str


def _action_key(dataset, i):
    return frozenset(dataset.nouns[i]), frozenset(dataset.verbs[i])


def build_mcq(dataset, split="intra", n_candidates=5, seed=0, stats=None):
    """One question per clip; distractors never share the answer's
    (nouns, verbs) so the answer is unambiguous.

    ``intra`` draws distractors from the answer's own video, ``inter`` from
    other videos. Clips without enough eligible distractors are skipped and
    counted in ``stats["skipped"]``.
    """
    if split not in ("inter", "intra"):
        raise ValueError(f"split must be 'inter' or 'intra', got {split!r}")
    rng = np.random.default_rng(seed)
    questions, skipped = [], 0
    for i, rec in enumerate(dataset.records):
        key = _action_key(dataset, i)
        if split == "intra":
            pool = [j for j in dataset.videos[rec.video_id] if j != i and _action_key(dataset, j) != key]
            if len(pool) < n_candidates - 1:
                skipped += 1
                continue
            distractors = [int(j) for j in rng.choice(pool, size=n_candidates - 1, replace=False)]
        else:
            others = [v for v in sorted(dataset.videos) if v != rec.video_id]
            if len(others) < n_candidates - 1:
                skipped += 1
                continue
            distractors = []
            for v in rng.permutation(others):
                pool = [j for j in dataset.videos[v] if _action_key(dataset, j) != key]
                if pool:
                    distractors.append(int(pool[int(rng.integers(len(pool)))]))
                if len(distractors) == n_candidates - 1:
                    break
            if len(distractors) < n_candidates - 1:
                skipped += 1
                continue
        answer = int(rng.integers(n_candidates))
        cands = distractors[:answer] + [i] + distractors[answer:]
        questions.append(Question(rec.narration, cands, answer, split))
    if stats is not None:
        stats["skipped"] = stats.get("skipped", 0) + skipped
    return questions


@torch.no_grad()
def embed_clips(model, dataset, indices, batch_size=64):
    """Video embeddings ``(n, E)`` for dataset clips, in float64."""
    out = []
    indices = list(indices)
    for start in range(0, len(indices), batch_size):
        frames = np.stack([dataset.frames(i) for i in indices[start:start + batch_size]])
        out.append(model(frames_to_tensor(frames, model.dtype)).video_emb.double().numpy())
    return np.concatenate(out) if out else np.zeros((0, model.config.embed_dim))


@torch.no_grad()
def embed_texts(model, vocab, texts, batch_size=256):
    out = []
    for start in range(0, len(texts), batch_size):
        seqs = [tokenize(t, vocab) for t in texts[start:start + batch_size]]
        out.append(model.embed_text(seqs).double().numpy())
    return np.concatenate(out) if out else np.zeros((0, model.config.embed_dim))


def evaluate_mcq(model, vocab, dataset, questions):
    if not questions:
        raise ValueError("no MCQ questions to evaluate")
    needed = sorted({j for q in questions for j in q.candidates})
    emb = dict(zip(needed, embed_clips(model, dataset, needed)))
    queries = embed_texts(model, vocab, [q.query for q in questions])
    cands = np.stack([[emb[j] for j in q.candidates] for q in questions])
    return mcq_accuracy(queries, cands, [q.answer for q in questions], [q.split for q in questions])


# ---------------------------------------------------------------- retrieval

def _ranking(scores):
    # stable: equal scores keep candidate order
    return np.argsort(-np.asarray(scores, dtype=np.float64), kind="stable")


def average_precision(scores, relevant):
    hits = np.asarray(relevant, dtype=np.float64)[_ranking(scores)]
    n_pos = hits.sum()
    if n_pos == 0:
        raise ValueError("average precision needs at least one positive")
    precision = np.cumsum(hits) / np.arange(1, len(hits) + 1)
    return float((precision * hits).sum() / n_pos)


def ndcg(scores, grades):
    """``sum_i rel_i / log2(i + 1)`` over the score ranking, normalized by the
    same sum in the ideal ordering."""
    grades = np.asarray(grades, dtype=np.float64)
    discount = 1.0 / np.log2(np.arange(2, len(grades) + 2))
    ideal = (np.sort(grades)[::-1] * discount).sum()
    if ideal == 0:
        raise ValueError("nDCG needs at least one positive grade")
    return float((grades[_ranking(scores)] * discount).sum() / ideal)


def retrieval_map(sim, rel, stats=None):
    """Mean AP over rows of ``sim`` (queries x candidates); rows without a
    positive are excluded and counted in ``stats["excluded"]``."""
    sim = np.asarray(sim, dtype=np.float64)
    rel = check_relevance(rel, sim.shape, binary=True)
    aps = [average_precision(s, r) for s, r in zip(sim, rel) if r.any()]
    if stats is not None:
        stats["excluded"] = stats.get("excluded", 0) + len(sim) - len(aps)
    if not aps:
        raise ValueError("no query has a relevant candidate")
    return float(np.mean(aps))


def retrieval_ndcg(sim, rel, stats=None):
    """Mean nDCG over rows; all-zero relevance rows are excluded and counted."""
    sim = np.asarray(sim, dtype=np.float64)
    rel = check_relevance(rel, sim.shape)
    vals = [ndcg(s, r) for s, r in zip(sim, rel) if r.any()]
    if stats is not None:
        stats["excluded"] = stats.get("excluded", 0) + len(sim) - len(vals)
    if not vals:
        raise ValueError("no query has a positive grade")
    return float(np.mean(vals))


def _jaccard(a, b):
    union = a | b
    return 1.0 if not union else len(a & b) / len(union)


def set_relevance(nouns_a, verbs_a, nouns_b, verbs_b):
    """Mean of noun and verb Jaccard overlaps for every pair of items."""
    rel = np.zeros((len(nouns_a), len(nouns_b)))
    for i, (na, va) in enumerate(zip(nouns_a, verbs_a)):
        na, va = set(na), set(va)
        for j, (nb, vb) in enumerate(zip(nouns_b, verbs_b)):
            rel[i, j] = (_jaccard(na, set(nb)) + _jaccard(va, set(vb))) / 2
    return rel


def caption_relevance(captions_a, captions_b, taxonomy):
    """Graded relevance between two caption lists via their noun/verb sets."""
    na = [extract_nouns(c, taxonomy) for c in captions_a]
    va = [extract_verbs(c, taxonomy) for c in captions_a]
    nb = [extract_nouns(c, taxonomy) for c in captions_b]
    vb = [extract_verbs(c, taxonomy) for c in captions_b]
    return set_relevance(na, va, nb, vb)


def retrieval_report(sim_vt, rel_vt):
    """mAP and nDCG in both directions plus their averages.

    ``sim_vt`` is videos x texts; text-to-video uses the transpose. Binary
    relevance for mAP is ``rel == 1``.
    """
    sim_vt = np.asarray(sim_vt, dtype=np.float64)
    rel_vt = check_relevance(rel_vt, sim_vt.shape)
    binary = (rel_vt == 1.0).astype(np.float64)
    out, excluded = {}, {}
    for direction, s, r, b in (("vt", sim_vt, rel_vt, binary), ("tv", sim_vt.T, rel_vt.T, binary.T)):
        st = {}
        out[f"map_{direction}"] = retrieval_map(s, b, st)
        excluded[f"map_{direction}"] = st["excluded"]
        st = {}
        out[f"ndcg_{direction}"] = retrieval_ndcg(s, r, st)
        excluded[f"ndcg_{direction}"] = st["excluded"]
    out["map_avg"] = (out["map_vt"] + out["map_tv"]) / 2
    out["ndcg_avg"] = (out["ndcg_vt"] + out["ndcg_tv"]) / 2
    out["excluded"] = excluded
    return out


def evaluate_retrieval(model, vocab, dataset, indices=None):
    indices = list(range(len(dataset))) if indices is None else list(indices)
    v = _unit_rows(embed_clips(model, dataset, indices))
    t = _unit_rows(embed_texts(model, vocab, [dataset.records[i].narration for i in indices]))
    rel = set_relevance([dataset.nouns[i] for i in indices], [dataset.verbs[i] for i in indices],
                        [dataset.nouns[i] for i in indices], [dataset.verbs[i] for i in indices])
    return retrieval_report(v @ t.T, rel)


# ---------------------------------------------------------------- classification

def classify(clip_logits, labels, num_classes=None, stats=None):
    """Top-1 and mean-class accuracy after max-pooling logits over each
    video's clips.

    ``clip_logits`` holds one ``(n_clips, C)`` array per video. Classes with
    no instances are left out of the mean-class average and counted in
    ``stats["excluded_classes"]``.
    """
    pooled = np.stack([np.asarray(x, dtype=np.float64).reshape(-1, np.shape(x)[-1]).max(axis=0)
                       for x in clip_logits])
    labels = np.asarray(labels)
    if len(labels) != len(pooled):
        raise ValueError(f"{len(labels)} labels for {len(pooled)} videos")
    num_classes = pooled.shape[1] if num_classes is None else num_classes
    pred = pooled.argmax(axis=1)
    recalls = [float((pred[labels == c] == c).mean()) for c in range(num_classes) if (labels == c).any()]
    if stats is not None:
        stats["excluded_classes"] = stats.get("excluded_classes", 0) + num_classes - len(recalls)
    return {"top1": float((pred == labels).mean()), "mean_class": float(np.mean(recalls))}


def zero_shot_logits(model, vocab, clip_frames, class_texts):
    """Cosine logits ``(n_clips, C)`` for one video given as a clip stack."""
    with torch.no_grad():
        v = model(frames_to_tensor(np.asarray(clip_frames), model.dtype)).video_emb.double().numpy()
    t = embed_texts(model, vocab, list(class_texts))
    return _unit_rows(v) @ _unit_rows(t).T


def uniform_clip_starts(n_frames, clip_len, n_clips):
    """Start frames of ``n_clips`` windows spread evenly over a video."""
    if n_frames < clip_len:
        raise ValueError(f"video of {n_frames} frames is shorter than one clip ({clip_len})")
    return np.linspace(0, n_frames - clip_len, n_clips).round().astype(int)


# ---------------------------------------------------------------- grounding

@dataclass
class GroundedClip:
    """Per-frame boxes for the two hands and each noun phrase.

    ``objects[i]`` is ``None`` for nouns left over when there are more nouns
    than object queries.
    """

    left: np.ndarray  # (T, 4)
    right: np.ndarray
    nouns: list
    objects: list  # per noun: (T, 4) array or None
    queries: list  # per noun: object query index or None
    scores: list  # per noun: cosine between noun and query name, or None

    def to_records(self, clip_id):
        records = []
        for t in range(len(self.left)):
            for role, boxes in (("left", self.left), ("right", self.right)):
                records.append({"clip_id": clip_id, "frame_idx": t, "role": role, "noun": None,
                                "box": [float(x) for x in boxes[t]], "score": None})
            for noun, boxes, score in zip(self.nouns, self.objects, self.scores):
                if boxes is None:
                    continue
                records.append({"clip_id": clip_id, "frame_idx": t, "role": "noun", "noun": noun,
                                "box": [float(x) for x in boxes[t]], "score": score})
        return records


def _as_clip(frames, num_frames):
    arr = np.asarray(frames)
    if arr.ndim == 3:
        # a single image stands in for a whole clip
        arr = np.repeat(arr[None], num_frames, axis=0)
    if arr.ndim != 4:
        raise ValueError(f"expected (T, H, W, 3) frames or one (H, W, 3) image, got {arr.shape}")
    return arr


@torch.no_grad()
def ground_clips(model, vocab, clips, noun_lists):
    """Batched :func:`ground_clip`."""
    if len(clips) != len(noun_lists):
        raise ValueError("need one noun list per clip")
    if not len(clips):
        return []
    batch = np.stack([_as_clip(c, model.config.num_frames) for c in clips])
    out = model(frames_to_tensor(batch, model.dtype))
    boxes = out.boxes.double().numpy()
    names = out.name_emb.double().numpy()
    flat = sorted({n for nouns in noun_lists for n in nouns})
    noun_emb = dict(zip(flat, embed_texts(model, vocab, flat))) if flat else {}
    results = []
    for b, nouns in enumerate(noun_lists):
        nouns = list(nouns)
        objects, queries, scores = [None] * len(nouns), [None] * len(nouns), [None] * len(nouns)
        if nouns:
            emb = np.stack([noun_emb[n] for n in nouns])
            ni, qi = match_nouns(emb, names[b])
            cos = _unit_rows(emb) @ _unit_rows(names[b]).T
            for n, q in zip(ni, qi):
                objects[n] = boxes[b, NUM_HANDS + q]
                queries[n] = int(q)
                scores[n] = float(cos[n, q])
        results.append(GroundedClip(boxes[b, 0], boxes[b, 1], nouns, objects, queries, scores))
    return results


def ground_clip(model, vocab, frames, noun_phrases):
    """Boxes for the left hand (first hand query), the right hand (second) and
    each noun phrase, whose object query is chosen by Hungarian matching of
    phrase embeddings against predicted names. A single ``(H, W, 3)`` image
    is repeated to fill the clip."""
    return ground_clips(model, vocab, [frames], [noun_phrases])[0]


@dataclass
class GroundingInstance:
    clip_id: str
    frame_idx: int
    gt_hands: list  # (side, box)
    gt_objects: list  # (noun, box), in-contact objects only
    pred_hands: dict = None  # side -> box, model predictions
    pred_objects: list = None  # per gt object: box or None
    det_hands: np.ndarray = None  # raw detector boxes for the baselines
    det_objects: np.ndarray = None

    @property
    def n_targets(self):
        return len(self.gt_hands) + len(self.gt_objects)


def _baseline_pairs(gt, det, mode, rng):
    """Indices ``(gt_i, det_j)`` of an injective assignment."""
    n, m = len(gt), len(det)
    if n == 0 or m == 0:
        return []
    if mode == "random":
        return list(zip(rng.permutation(n)[: min(n, m)], rng.permutation(m)[: min(n, m)]))
    cost = -pairwise_iou(gt, det)
    if n <= m:
        return list(enumerate(hungarian_solve(cost)))
    cols = hungarian_solve(cost.T)
    return [(int(i), j) for j, i in enumerate(cols)]


def localization_accuracy(instances, mode="predicted", seed=0, stats=None):
    """Fraction of hand and object targets whose assigned box center lies in
    the ground-truth box.

    ``predicted`` uses the model assignments stored on each instance.
    ``random`` pairs detector boxes with targets uniformly at random (one
    draw from ``seed``) and ``gt_matching`` pairs them by maximum total IoU;
    both treat hands and objects as separate pools. Targets left without a
    box count as misses.
    """
    if mode not in ("predicted", "random", "gt_matching"):
        raise ValueError(f"unknown mode {mode!r}")
    rng = np.random.default_rng(seed)
    hits = {"hands": 0, "objects": 0}
    totals = {"hands": 0, "objects": 0}
    for inst in instances:
        totals["hands"] += len(inst.gt_hands)
        totals["objects"] += len(inst.gt_objects)
        if mode == "predicted":
            if inst.pred_hands is None or inst.pred_objects is None:
                raise ValueError(f"{inst.clip_id}:{inst.frame_idx} has no model predictions")
            for side, box in inst.gt_hands:
                pred = inst.pred_hands.get(side)
                hits["hands"] += pred is not None and bool(center_inside(pred, box))
            for (_, box), pred in zip(inst.gt_objects, inst.pred_objects):
                hits["objects"] += pred is not None and bool(center_inside(pred, box))
            continue
        for group, gt, det in (("hands", [b for _, b in inst.gt_hands], inst.det_hands),
                               ("objects", [b for _, b in inst.gt_objects], inst.det_objects)):
            gt = check_boxes(gt)
            det = check_boxes([] if det is None else det)
            for i, j in _baseline_pairs(gt, det, mode, rng):
                hits[group] += bool(center_inside(det[j], gt[i]))
    total = totals["hands"] + totals["objects"]
    if stats is not None:
        stats.update(targets=total, hits=hits["hands"] + hits["objects"],
                     hands=hits["hands"] / totals["hands"] if totals["hands"] else None,
                     objects=hits["objects"] / totals["objects"] if totals["objects"] else None)
    if total == 0:
        raise ValueError("no grounding targets")
    return (hits["hands"] + hits["objects"]) / total


def random_baseline(instances, seeds=100, base_seed=0):
    """Mean and standard deviation of the ``random`` mode over seeded draws."""
    accs = [localization_accuracy(instances, "random", base_seed + s) for s in range(seeds)]
    return float(np.mean(accs)), float(np.std(accs))


def grounding_instances(dataset, model=None, vocab=None, indices=None, single_frame=False, batch_size=64):
    """Per-frame grounding targets from a dataset's clean labels, with the
    noisy detections attached for the baselines and, when a model is given,
    its predictions.

    With ``single_frame`` each frame is grounded on its own, repeated to fill
    a clip; otherwise the whole clip is grounded at once.
    """
    if dataset.clean is None:
        raise ValueError("grounding needs clean labels (clean_detections.jsonl)")
    indices = list(range(len(dataset))) if indices is None else list(indices)
    instances = []
    for i in indices:
        rec = dataset.records[i]
        noisy = {fd.frame_idx: fd for fd in dataset.detections.get(rec.clip_id, [])}
        for fd in dataset.clean.get(rec.clip_id, []):
            objects = [(o.noun, o.box) for o in fd.objects if o.in_contact]
            det = noisy.get(fd.frame_idx)
            instances.append(GroundingInstance(
                rec.clip_id, fd.frame_idx, [(h.side, h.box) for h in fd.hands], objects,
                det_hands=np.zeros((0, 4)) if det is None else det.hand_boxes,
                det_objects=np.zeros((0, 4)) if det is None else det.object_boxes))
    if model is None:
        return instances
    owner = {rec.clip_id: i for i, rec in ((i, dataset.records[i]) for i in indices)}
    jobs = []  # (instance, clip or image, frame to read)
    for inst in instances:
        frames = dataset.frames(owner[inst.clip_id])
        jobs.append((inst, frames[inst.frame_idx] if single_frame else frames))
    if not single_frame:
        # one forward pass per clip, shared by its frames
        by_clip = {}
        for inst, frames in jobs:
            by_clip.setdefault(inst.clip_id, (frames, []))[1].append(inst)
        jobs = [(insts, frames) for frames, insts in by_clip.values()]
    else:
        jobs = [([inst], frames) for inst, frames in jobs]
    for start in range(0, len(jobs), batch_size):
        chunk = jobs[start:start + batch_size]
        nouns = [[n for n, _ in insts[0].gt_objects] for insts, _ in chunk]
        grounded = ground_clips(model, vocab, [f for _, f in chunk], nouns)
        for (insts, _), g in zip(chunk, grounded):
            for inst in insts:
                t = 0 if single_frame else inst.frame_idx
                inst.pred_hands = {"left": g.left[t], "right": g.right[t]}
                inst.pred_objects = [None if b is None else b[t] for b in g.objects]
    return instances


def mean_pairwise_iou(boxes):
    """Average IoU over all pairs of a track's per-frame boxes."""
    boxes = check_boxes(boxes)
    i, j = np.triu_indices(len(boxes), k=1)
    if len(i) == 0:
        raise ValueError("need at least two boxes")
    return float(np.mean(iou(boxes[i], boxes[j])))


@torch.no_grad()
def track_consistency(model, dataset, indices, min_iou=0.5):
    """Temporal stability of boxes on objects that do not move.

    Clean objects are matched to object queries by total box loss; for each
    static object the matched query's per-frame boxes give one track. The
    pseudo-label track takes, per frame, the detection overlapping the static
    object best (IoU >= ``min_iou``). Returns mean pairwise IoU of both.
    """
    model_vals, pseudo_vals = [], []
    indices = list(indices)
    for start in range(0, len(indices), 64):
        chunk = indices[start:start + 64]
        frames = np.stack([dataset.frames(i) for i in chunk])
        boxes = model(frames_to_tensor(frames, model.dtype)).boxes.double().numpy()
        for b, i in enumerate(chunk):
            clip_id = dataset.records[i].clip_id
            clean = dataset.clean.get(clip_id, [])
            if not clean:
                continue
            tracks = [np.array([fd.objects[k].box for fd in clean]) for k in range(len(clean[0].objects))]
            static = [not o.in_contact for o in clean[0].objects]
            queries = boxes[b, NUM_HANDS:]  # (K, T, 4)
            frame_idx = [fd.frame_idx for fd in clean]
            # mean per-frame box loss between every clean object and every query
            cost = box_pair_loss(np.stack(tracks)[:, None], queries[None, :, frame_idx]).mean(axis=-1)
            n = min(len(tracks), len(queries))
            cols = hungarian_solve(cost[:n])
            noisy = {fd.frame_idx: fd.object_boxes for fd in dataset.detections.get(clip_id, [])}
            for k in range(n):
                if not static[k]:
                    continue
                model_vals.append(mean_pairwise_iou(queries[cols[k], frame_idx]))
                track = []
                for t, f in enumerate(frame_idx):
                    det = noisy.get(f)
                    if det is None or not len(det):
                        continue
                    overlaps = pairwise_iou(tracks[k][t][None], det)[0]
                    if overlaps.max() >= min_iou:
                        track.append(det[overlaps.argmax()])
                if len(track) >= 2:
                    pseudo_vals.append(mean_pairwise_iou(track))
    return {"model": float(np.mean(model_vals)) if model_vals else None, "n_model": len(model_vals),
            "pseudo": float(np.mean(pseudo_vals)) if pseudo_vals else None, "n_pseudo": len(pseudo_vals)}


# ---------------------------------------------------------------- features

@dataclass
class FeatureRecord:
    clip_id: str
    video_id: str
    t_start_s: float
    t_end_s: float
    embedding: np.ndarray = field(repr=False)  # float32


def write_features(path, records):
    """JSON lines ``{clip_id, video_id, t_start_s, t_end_s, embedding}``.

    Embeddings are float32; each value is written as the shortest decimal
    that reads back to the same float, so loading is bit-exact.
    """
    with open(path, "w") as f:
        for r in records:
            emb = np.asarray(r.embedding, dtype=np.float32)
            f.write(json.dumps({"clip_id": r.clip_id, "video_id": r.video_id,
                                "t_start_s": float(r.t_start_s), "t_end_s": float(r.t_end_s),
                                "embedding": [float(x) for x in emb]}, sort_keys=True) + "\n")
    return Path(path)


def load_features(path):
    out = []
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
                out.append(FeatureRecord(d["clip_id"], d["video_id"], d["t_start_s"], d["t_end_s"],
                                         np.asarray(d["embedding"], dtype=np.float32)))
            except (KeyError, ValueError) as e:
                raise ValueError(f"{path}:{lineno}: malformed feature record ({e})") from None
    return out


def extract_features(model, dataset, path=None, indices=None):
    """Video embedding plus timestamps for every clip; written to ``path``
    when given."""
    indices = list(range(len(dataset))) if indices is None else list(indices)
    emb = embed_clips(model, dataset, indices).astype(np.float32)
    records = [FeatureRecord(dataset.records[i].clip_id, dataset.records[i].video_id,
                             dataset.records[i].t_start_s, dataset.records[i].t_end_s, e)
               for i, e in zip(indices, emb)]
    if path is not None:
        write_features(path, records)
    return records
