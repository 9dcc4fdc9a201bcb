"""Dataset loading, coverage statistics and batch sampling with same-video
hard negatives."""

import logging
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..losses import build_positive_sets
from .schema import ClipRecord, FrameDetections, read_jsonl
from .synthetic import SyntheticRenderer
from .taxonomy import Taxonomy, extract_nouns, extract_verbs

log = logging.getLogger(__name__)


@dataclass
class ClipSample:
    record: ClipRecord
    nouns: list
    verbs: list
    detections: list  # FrameDetections on sampled frames
    frames: np.ndarray = None  # (T, H, W, 3) uint8

    @property
    def clip_id(self):
        return self.record.clip_id

    @property
    def video_id(self):
        return self.record.video_id


def uniform_frame_indices(n_available, n_frames):
    """``n_frames`` indices spread uniformly over ``n_available`` frames (segment centers)."""
    if n_available < 1:
        raise ValueError("clip has no frames")
    return [min(n_available - 1, int((i + 0.5) * n_available / n_frames)) for i in range(n_frames)]


def load_detections(path, known_ids):
    """Group detection records by clip id; unknown ids are skipped and counted."""
    by_clip = defaultdict(dict)
    skipped = 0
    if path is None:
        return by_clip, skipped
    for lineno, rec in read_jsonl(path):
        where = f"{Path(path).name}:{lineno}"
        try:
            clip_id = str(rec["clip_id"])
            fd = FrameDetections.from_record(rec, where)
        except KeyError as e:
            raise ValueError(f"{where}: missing field {e}") from None
        if clip_id not in known_ids:
            skipped += 1
            continue
        if fd.frame_idx in by_clip[clip_id]:
            raise ValueError(f"{where}: duplicate frame {fd.frame_idx} for clip {clip_id}")
        by_clip[clip_id][fd.frame_idx] = fd
    return by_clip, skipped


class Dataset:
    """Clips with extracted nouns/verbs, sparse detections and a frame source.

    Immutable after construction; frames are rendered on demand and cached.
    """

    def __init__(self, records, detections, taxonomy, renderer=None, num_frames=4,
                 skipped_detections=0, clean=None):
        self.records = list(records)
        self.taxonomy = taxonomy
        self.renderer = renderer
        self.num_frames = num_frames
        self.skipped_detections = skipped_detections
        self.index = {}
        for i, r in enumerate(self.records):
            if r.clip_id in self.index:
                raise ValueError(f"duplicate clip_id {r.clip_id!r}")
            self.index[r.clip_id] = i
        self.detections = {cid: [d[k] for k in sorted(d)] for cid, d in detections.items()}
        self.clean = None if clean is None else {cid: [d[k] for k in sorted(d)] for cid, d in clean.items()}
        self.nouns = [extract_nouns(r.narration, taxonomy) for r in self.records]
        self.verbs = [extract_verbs(r.narration, taxonomy) for r in self.records]
        self.videos = defaultdict(list)
        for i, r in enumerate(self.records):
            self.videos[r.video_id].append(i)
        self._frames = {}

    def __len__(self):
        return len(self.records)

    def frames(self, i):
        if i not in self._frames:
            if self.renderer is None:
                raise RuntimeError("dataset has no frame source")
            frames = np.asarray(self.renderer(self.records[i]))
            if len(frames) != self.num_frames:
                frames = frames[uniform_frame_indices(len(frames), self.num_frames)]
            self._frames[i] = frames
        return self._frames[i]

    def sample(self, i, with_frames=True):
        rec = self.records[i]
        return ClipSample(rec, self.nouns[i], self.verbs[i], self.detections.get(rec.clip_id, []),
                          self.frames(i) if with_frames else None)

    def coverage(self):
        """Frame-level supervision statistics over all sampled frames."""
        total = len(self.records) * self.num_frames
        hands = objects = no_hands = no_objects = 0
        seen = 0
        for dets in self.detections.values():
            for fd in dets:
                seen += 1
                hands += len(fd.hands)
                objects += len(fd.objects)
                no_hands += not fd.hands
                no_objects += not fd.objects
        unannotated = total - seen
        no_hands += unannotated
        no_objects += unannotated
        return {
            "frames": total,
            "frac_no_hands": no_hands / total if total else 0.0,
            "frac_no_objects": no_objects / total if total else 0.0,
            "mean_hands_per_frame": hands / total if total else 0.0,
            "mean_objects_per_frame": objects / total if total else 0.0,
            "skipped_detections": self.skipped_detections,
        }


def load_dataset(clips_path, detections_path, tax_path, renderer=None, num_frames=None, clean_path=None):
    """Load clips, join detections by clip id and extract nouns/verbs.

    When a ``synthetic.json`` sits next to the clips file and no renderer is
    given, frames are regenerated from it.
    """
    records = []
    for lineno, rec in read_jsonl(clips_path):
        try:
            records.append(ClipRecord.from_record(rec))
        except (KeyError, ValueError, TypeError) as e:
            raise ValueError(f"{Path(clips_path).name}:{lineno}: malformed clip record ({e})") from None
    seen = set()
    for r in records:
        if r.clip_id in seen:
            raise ValueError(f"duplicate clip_id {r.clip_id!r}")
        seen.add(r.clip_id)
    meta = Path(clips_path).with_name("synthetic.json")
    if renderer is None and meta.exists():
        renderer = SyntheticRenderer.from_file(meta)
    if num_frames is None:
        num_frames = renderer.config.n_frames if isinstance(renderer, SyntheticRenderer) else 4
    detections, skipped = load_detections(detections_path, seen)
    if skipped:
        log.warning("skipped %d detection records with unknown clip ids", skipped)
    clean = load_detections(clean_path, seen)[0] if clean_path else None
    return Dataset(records, detections, Taxonomy.load(tax_path), renderer, num_frames, skipped, clean)


def load_synthetic(directory):
    d = Path(directory)
    clean = d / "clean_detections.jsonl"
    return load_dataset(d / "clips.jsonl", d / "detections.jsonl", d / "taxonomy.json",
                        clean_path=clean if clean.exists() else None)


@dataclass
class Batch:
    samples: list
    hard: list  # hard-negative ClipSamples or None
    structure: object

    @property
    def frames(self):
        return np.stack([s.frames for s in self.samples])

    @property
    def hard_frames(self):
        return None if self.hard is None else np.stack([s.frames for s in self.hard])


def sample_batch(dataset, size, use_hard_negatives, rng, indices=None, with_frames=True):
    """Draw a batch without replacement and, optionally, one same-video hard
    negative per sample. Clips whose video has no other clip are replaced by
    fresh draws (counted in ``structure.resampled``)."""
    n = len(dataset)
    if indices is None:
        if size > n:
            raise ValueError(f"batch size {size} exceeds dataset size {n}")
        indices = [int(i) for i in rng.choice(n, size=size, replace=False)]
    indices = list(indices)
    resampled = 0
    hard_idx = None
    if use_hard_negatives:
        eligible = [i for i in range(n) if len(dataset.videos[dataset.records[i].video_id]) > 1]
        if not eligible:
            raise ValueError("hard negatives need at least one video with two or more clips")
        used = set(indices)
        for pos, i in enumerate(indices):
            if len(dataset.videos[dataset.records[i].video_id]) > 1:
                continue
            pool = [j for j in eligible if j not in used] or eligible
            j = int(pool[int(rng.integers(len(pool)))])
            indices[pos] = j
            used.add(j)
            resampled += 1
        hard_idx = []
        for i in indices:
            others = [j for j in dataset.videos[dataset.records[i].video_id] if j != i]
            hard_idx.append(int(others[int(rng.integers(len(others)))]))
    samples = [dataset.sample(i, with_frames) for i in indices]
    hard = None if hard_idx is None else [dataset.sample(j, with_frames) for j in hard_idx]
    structure = build_positive_sets([s.nouns for s in samples], [s.verbs for s in samples], hard_idx)
    structure.resampled = resampled
    structure.clip_indices = indices
    if resampled:
        log.debug("resampled %d single-clip videos", resampled)
    return Batch(samples, hard, structure)
