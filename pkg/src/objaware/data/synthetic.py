"""Synthetic ego-centric clips: colored shapes on textured backgrounds with one
or two hand markers, one object moved by a hand, and a noisy, sparse stream
of frame-level pseudo-detections alongside the clean labels.

Frames are never stored: every clip re-renders from ``(synth_seed, clip_id)``.
"""

import json
import zlib
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .schema import ClipRecord, FrameDetections, HandBox, ObjectBox, write_jsonl
from .taxonomy import DEFAULT_REMOVAL, Group, PhraseDictionary, Taxonomy

# noun, RGB color, shape
OBJECTS = (
    ("cup", (0.90, 0.15, 0.15), "square"),
    ("plate", (0.20, 0.35, 0.95), "disk"),
    ("knife", (0.88, 0.88, 0.92), "hbar"),
    ("bell pepper", (0.95, 0.85, 0.10), "triangle"),
    ("bowl", (0.10, 0.75, 0.20), "ring"),
    ("bottle", (0.60, 0.20, 0.80), "vbar"),
    ("sponge", (1.00, 0.55, 0.05), "diamond"),
    ("cutting board", (0.55, 0.33, 0.12), "square"),
    ("spoon", (0.10, 0.85, 0.85), "disk"),
    ("lid", (0.95, 0.45, 0.75), "triangle"),
)
EXTRA_NOUNS = ("pepper", "board", "table", "hand", "man")

# canonical, third-person surface, motion direction (dx, dy)
VERBS = (
    ("pick up", "picks up", (0.0, -1.0)),
    ("put down", "puts down", (0.0, 1.0)),
    ("push", "pushes", (1.0, 0.0)),
    ("pull", "pulls", (-1.0, 0.0)),
)
TEMPLATES = (
    "#C C {verb} the {noun}",
    "#C C {verb} the {noun} on the table",
    "#C C {verb} the {noun} with his hand",
    "#C C {verb} a {noun}",
)
# used when the narration also names a second, untouched object in view
RELATION_TEMPLATE = "#C C {verb} the {noun} next to the {other}"
HAND_COLOR = (0.93, 0.72, 0.58)
HAND_SIZE = (0.17, 0.17)


@dataclass
class SyntheticConfig:
    n_clips: int = 200
    clips_per_video: int = 10
    n_frames: int = 4
    frame_size: int = 32
    n_nouns: int = len(OBJECTS)
    min_objects: int = 1
    max_objects: int = 4
    two_hand_prob: float = 0.6
    step: float = 0.08  # per-frame displacement of the moved object
    hand_drop: float = 0.158
    object_drop: float = 0.179
    jitter: float = 0.03  # std of per-corner noise, in frame fractions
    side_flip: float = 0.1
    distractor_miss: float = 0.7
    mention_other: float = 0.5  # chance the narration also names an untouched object
    split: str = "train"

    def __post_init__(self):
        if not 1 <= self.n_nouns <= len(OBJECTS):
            raise ValueError(f"n_nouns must be in [1, {len(OBJECTS)}]")
        if not 1 <= self.min_objects <= self.max_objects <= 4:
            raise ValueError("need 1 <= min_objects <= max_objects <= 4")
        if self.n_nouns < self.max_objects:
            raise ValueError(f"vocabulary of {self.n_nouns} nouns is smaller than max_objects={self.max_objects}")
        for name in ("two_hand_prob", "hand_drop", "object_drop", "side_flip", "distractor_miss", "mention_other"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be a probability")
        if self.n_clips < 1 or self.clips_per_video < 1 or self.n_frames < 1:
            raise ValueError("n_clips, clips_per_video and n_frames must be positive")

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown synthetic config keys {sorted(unknown)}")
        return cls(**d)


def _rng(seed, key):
    return np.random.default_rng([int(seed), zlib.crc32(key.encode())])


@dataclass
class Thing:
    noun: str
    color: tuple
    shape: str
    size: tuple
    boxes: list = field(default_factory=list)  # per frame, center format
    in_contact: bool = False


@dataclass
class Scene:
    background: np.ndarray
    objects: list
    hands: dict  # side -> per-frame boxes
    noun: str
    verb: str
    narration: str


def taxonomy_for(config):
    nouns = [Group(i, noun, []) for i, (noun, _, _) in enumerate(OBJECTS[: config.n_nouns])]
    nouns += [Group(100 + i, n, []) for i, n in enumerate(EXTRA_NOUNS)]
    verbs = [Group(i, canon, [surface]) for i, (canon, surface, _) in enumerate(VERBS)]
    return Taxonomy(PhraseDictionary(nouns, DEFAULT_REMOVAL), PhraseDictionary(verbs))


def _video_layout(config, seed, video_id):
    rng = _rng(seed, "video/" + video_id)
    tint = rng.uniform(-0.06, 0.06, size=3)
    base = rng.uniform(0.28, 0.45) + tint
    coarse = rng.normal(0.0, 0.05, size=(4, 4, 3))
    s = config.frame_size
    background = np.clip(base + np.kron(coarse, np.ones((s // 4 + 1, s // 4 + 1, 1)))[:s, :s]
                         + rng.normal(0.0, 0.025, size=(s, s, 3)), 0.0, 1.0)
    n_obj = int(rng.integers(config.min_objects, config.max_objects + 1))
    chosen = rng.choice(config.n_nouns, size=n_obj, replace=False)
    # objects sit on a row of slots so that they do not overlap
    slots = rng.permutation(4)[:n_obj]
    things = []
    for k, slot in zip(chosen, slots):
        noun, color, shape = OBJECTS[k]
        w, h = {"hbar": (0.26, 0.12), "vbar": (0.12, 0.26)}.get(shape, (0.2, 0.2))
        cx = 0.14 + 0.24 * slot + rng.uniform(-0.02, 0.02)
        cy = rng.uniform(0.32, 0.48)
        things.append((noun, color, shape, (w, h), (cx, cy)))
    two_hands = bool(rng.random() < config.two_hand_prob)
    sides = ["left", "right"] if two_hands else [str(rng.choice(["left", "right"]))]
    homes = {side: (0.25 if side == "left" else 0.75) + rng.uniform(-0.05, 0.05) for side in sides}
    return background, things, homes


def build_scene(config, seed, record):
    """Deterministic world state (boxes per frame, narration) for one clip."""
    background, things, homes = _video_layout(config, seed, record.video_id)
    rng = _rng(seed, "clip/" + record.clip_id)
    t = config.n_frames
    active = int(rng.integers(len(things)))
    verb_idx = int(rng.integers(len(VERBS)))
    _, surface, (dx, dy) = VERBS[verb_idx]
    template = TEMPLATES[int(rng.integers(len(TEMPLATES)))]
    mention = rng.random() < config.mention_other
    other = int(rng.integers(len(things) - 1)) if len(things) > 1 else None

    objects = []
    hand_boxes = {}
    for k, (noun, color, shape, size, (cx, cy)) in enumerate(things):
        thing = Thing(noun, color, shape, size)
        if k != active:
            thing.boxes = [[cx, cy, *size]] * t
        else:
            thing.in_contact = True
            travel = config.step * (t - 1)
            lo, hi = 0.15, 0.85 - HAND_SIZE[1] - size[1] / 2
            start_x = np.clip(cx, 0.15 + max(0.0, -dx) * travel, 0.85 - max(0.0, dx) * travel)
            start_y = np.clip(cy, lo + max(0.0, -dy) * travel, hi - max(0.0, dy) * travel)
            thing.boxes = [[start_x + dx * config.step * i, start_y + dy * config.step * i, *size]
                           for i in range(t)]
        objects.append(thing)

    moved = objects[active]
    mover = min(homes, key=lambda side: abs(homes[side] - moved.boxes[0][0]))
    for side, hx in homes.items():
        if side == mover:
            hand_boxes[side] = [[b[0], b[1] + b[3] / 2 + HAND_SIZE[1] / 2 - 0.04, *HAND_SIZE] for b in moved.boxes]
        else:
            wobble = rng.normal(0.0, 0.006, size=(t, 2))
            hand_boxes[side] = [[hx + wobble[i, 0], 0.8 + wobble[i, 1], *HAND_SIZE] for i in range(t)]
    if mention and other is not None:
        bystander = [o for k, o in enumerate(objects) if k != active][other]
        narration = RELATION_TEMPLATE.format(verb=surface, noun=moved.noun, other=bystander.noun)
    else:
        narration = template.format(verb=surface, noun=moved.noun)
    return Scene(background, objects, hand_boxes, moved.noun, VERBS[verb_idx][0], narration)


def _paint(img, box, color, shape):
    s = img.shape[0]
    cx, cy, w, h = box
    ys, xs = np.mgrid[0:s, 0:s]
    u = (xs + 0.5) / s - cx
    v = (ys + 0.5) / s - cy
    hw, hh = w / 2, h / 2
    if shape in ("square", "hbar", "vbar"):
        mask = (np.abs(u) <= hw) & (np.abs(v) <= hh)
    elif shape == "disk" or shape == "hand":
        mask = (u / hw) ** 2 + (v / hh) ** 2 <= 1.0
    elif shape == "ring":
        r = (u / hw) ** 2 + (v / hh) ** 2
        mask = (r <= 1.0) & (r >= 0.3)
    elif shape == "diamond":
        mask = np.abs(u) / hw + np.abs(v) / hh <= 1.0
    elif shape == "triangle":
        mask = (v <= hh) & (v >= -hh) & (np.abs(u) <= hw * (v + hh) / (2 * hh))
    else:
        raise ValueError(f"unknown shape {shape!r}")
    img[mask] = color


def render_frames(config, scene):
    """``(T, S, S, 3)`` uint8 frames; moved object and hands drawn last."""
    frames = []
    order = sorted(scene.objects, key=lambda o: o.in_contact)
    for i in range(config.n_frames):
        img = scene.background.copy()
        for thing in order:
            _paint(img, thing.boxes[i], thing.color, thing.shape)
        for side in sorted(scene.hands):
            _paint(img, scene.hands[side][i], HAND_COLOR, "hand")
        frames.append(img)
    return np.round(np.stack(frames) * 255).astype(np.uint8)


def _clip_box(box):
    return [float(x) for x in np.clip(box, 0.0, 1.0)]


def clean_detections(config, scene):
    out = []
    for i in range(config.n_frames):
        hands = [HandBox(_clip_box(scene.hands[side][i]), side, 1.0) for side in ("left", "right") if side in scene.hands]
        objs = sorted(scene.objects, key=lambda o: not o.in_contact)
        objects = [ObjectBox(_clip_box(o.boxes[i]), 1.0, o.noun, o.in_contact) for o in objs]
        out.append(FrameDetections(i, hands, objects))
    return out


def _jitter(box, rng, sigma):
    if sigma == 0:
        return list(box)
    cx, cy, w, h = box
    x1, y1, x2, y2 = np.array([cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2]) + rng.normal(0.0, sigma, 4)
    x1, x2 = sorted((x1, x2))
    y1, y2 = sorted((y1, y2))
    x1, y1, x2, y2 = np.clip([x1, y1, x2, y2], 0.0, 1.0)
    return [float((x1 + x2) / 2), float((y1 + y2) / 2), float(x2 - x1), float(y2 - y1)]


def pseudo_detections(config, seed, record, clean):
    """Corrupt clean labels: whole-frame hand/object drops, corner jitter,
    side flips, missed distractors and score-sorted order (no identity)."""
    rng = _rng(seed, "pseudo/" + record.clip_id)
    out = []
    for fd in clean:
        drop_hands = rng.random() < config.hand_drop
        drop_objects = rng.random() < config.object_drop
        hands, objects = [], []
        if not drop_hands:
            for hb in fd.hands:
                side = hb.side
                if rng.random() < config.side_flip:
                    side = "right" if side == "left" else "left"
                score = 1.0 if config.jitter == 0 else float(rng.uniform(0.5, 1.0))
                hands.append(HandBox(_jitter(hb.box, rng, config.jitter), side, score))
        if not drop_objects:
            for ob in fd.objects:
                if not ob.in_contact and rng.random() < config.distractor_miss:
                    continue
                score = 1.0 if config.jitter == 0 else float(rng.uniform(0.3, 1.0))
                objects.append(ObjectBox(_jitter(ob.box, rng, config.jitter), score))
        hands.sort(key=lambda h: -h.score)
        objects.sort(key=lambda o: -o.score)
        if hands or objects:
            out.append(FrameDetections(fd.frame_idx, hands, objects))
    return out


def clip_records(config, seed):
    records = []
    n_videos = -(-config.n_clips // config.clips_per_video)
    for v in range(n_videos):
        video_id = f"{config.split}_v{v:04d}"
        for c in range(min(config.clips_per_video, config.n_clips - v * config.clips_per_video)):
            clip_id = f"{video_id}_c{c:03d}"
            records.append(ClipRecord(clip_id, video_id, 4.0 * c, 4.0 * c + 3.0, "", int(seed)))
    return records


def generate_synthetic(config, seed, out_dir):
    """Write ``clips.jsonl``, ``detections.jsonl`` (noisy pseudo-labels),
    ``clean_detections.jsonl``, ``taxonomy.json``, ``vocab.txt`` and
    ``synthetic.json`` into ``out_dir``. Returns the output directory."""
    from ..encoders import Vocabulary

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = clip_records(config, seed)
    clips, pseudo, clean = [], [], []
    for rec in records:
        scene = build_scene(config, seed, rec)
        rec.narration = scene.narration
        clips.append(rec.to_record())
        c = clean_detections(config, scene)
        clean.extend(fd.to_record(rec.clip_id) for fd in c)
        pseudo.extend(fd.to_record(rec.clip_id) for fd in pseudo_detections(config, seed, rec, c))
    write_jsonl(out / "clips.jsonl", clips)
    write_jsonl(out / "detections.jsonl", pseudo)
    write_jsonl(out / "clean_detections.jsonl", clean)
    tax = taxonomy_for(config)
    tax.save(out / "taxonomy.json")
    texts = [r.narration for r in records] + [s for g in tax.nouns.groups + tax.verbs.groups for s in g.surfaces()]
    texts += [t.format(verb=v[1], noun=o[0], other=o[0])
              for t in TEMPLATES + (RELATION_TEMPLATE,) for v in VERBS for o in OBJECTS]
    Vocabulary.build(texts).save(out / "vocab.txt")
    (out / "synthetic.json").write_text(json.dumps({"seed": int(seed), "config": asdict(config)}, indent=2,
                                                   sort_keys=True) + "\n")
    return out


class SyntheticRenderer:
    """Regenerates frames for clips of a synthetic dataset."""

    def __init__(self, config, seed):
        self.config = config
        self.seed = seed

    @classmethod
    def from_file(cls, path):
        meta = json.loads(Path(path).read_text())
        return cls(SyntheticConfig.from_dict(meta["config"]), meta["seed"])

    def scene(self, record):
        seed = self.seed if record.synth_seed is None else record.synth_seed
        return build_scene(self.config, seed, record)

    def __call__(self, record):
        return render_frames(self.config, self.scene(record))
