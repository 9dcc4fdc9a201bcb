"""Record types and their line-delimited JSON encoding."""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SIDES = ("left", "right", "unknown")
MAX_HANDS = 2
MAX_OBJECTS = 4


def _box(value, where):
    try:
        box = [float(x) for x in value]
    except (TypeError, ValueError):
        raise ValueError(f"{where}: box must be a list of 4 numbers, got {value!r}") from None
    if len(box) != 4 or not all(0.0 <= x <= 1.0 for x in box):
        raise ValueError(f"{where}: box must be 4 fractions in [0, 1], got {value!r}")
    return box


def _score(value, where):
    s = float(value)
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"{where}: score {s} outside [0, 1]")
    return s


@dataclass
class HandBox:
    box: list
    side: str = "unknown"
    score: float = 1.0

    def to_dict(self):
        return {"box": list(self.box), "side": self.side, "score": self.score}

    @classmethod
    def from_dict(cls, d, where="hand"):
        side = d.get("side", "unknown")
        if side not in SIDES:
            raise ValueError(f"{where}: side must be one of {SIDES}, got {side!r}")
        return cls(_box(d["box"], where), side, _score(d.get("score", 1.0), where))


@dataclass
class ObjectBox:
    box: list
    score: float = 1.0
    noun: str = None  # clean evaluation labels only
    in_contact: bool = None

    def to_dict(self):
        d = {"box": list(self.box), "score": self.score}
        if self.noun is not None:
            d["noun"] = self.noun
        if self.in_contact is not None:
            d["in_contact"] = self.in_contact
        return d

    @classmethod
    def from_dict(cls, d, where="object"):
        return cls(_box(d["box"], where), _score(d.get("score", 1.0), where),
                   d.get("noun"), d.get("in_contact"))


@dataclass
class FrameDetections:
    """Hand and object boxes on one sampled frame (top 2 hands, top 4 objects)."""

    frame_idx: int
    hands: list = field(default_factory=list)
    objects: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.hands) > MAX_HANDS or len(self.objects) > MAX_OBJECTS:
            raise ValueError(f"frame {self.frame_idx}: at most {MAX_HANDS} hands and {MAX_OBJECTS} objects")

    @property
    def hand_boxes(self):
        return np.asarray([h.box for h in self.hands], dtype=np.float64).reshape(-1, 4)

    @property
    def object_boxes(self):
        return np.asarray([o.box for o in self.objects], dtype=np.float64).reshape(-1, 4)

    def to_record(self, clip_id):
        return {"clip_id": clip_id, "frame_idx": self.frame_idx,
                "hands": [h.to_dict() for h in self.hands],
                "objects": [o.to_dict() for o in self.objects]}

    @classmethod
    def from_record(cls, d, where="detection"):
        idx = d["frame_idx"]
        if not isinstance(idx, int) or idx < 0:
            raise ValueError(f"{where}: frame_idx must be a non-negative integer")
        return cls(idx,
                   [HandBox.from_dict(h, where) for h in d.get("hands", [])],
                   [ObjectBox.from_dict(o, where) for o in d.get("objects", [])])


@dataclass
class ClipRecord:
    clip_id: str
    video_id: str
    t_start_s: float
    t_end_s: float
    narration: str
    synth_seed: int = None

    def __post_init__(self):
        if not self.t_start_s < self.t_end_s:
            raise ValueError(f"clip {self.clip_id}: t_start_s must be < t_end_s")

    def to_record(self):
        return {"clip_id": self.clip_id, "video_id": self.video_id, "t_start_s": self.t_start_s,
                "t_end_s": self.t_end_s, "narration": self.narration, "synth_seed": self.synth_seed}

    @classmethod
    def from_record(cls, d):
        return cls(str(d["clip_id"]), str(d["video_id"]), float(d["t_start_s"]), float(d["t_end_s"]),
                   str(d["narration"]), d.get("synth_seed"))


def write_jsonl(path, records):
    with open(path, "w") as f:
        for r in records:
            f.write(json.dumps(r, sort_keys=True) + "\n")


def read_jsonl(path):
    """Yield ``(line_number, record)``; malformed lines raise with their number."""
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise ValueError(f"{Path(path).name}:{lineno}: malformed record ({e.msg})") from None
            if not isinstance(rec, dict):
                raise ValueError(f"{Path(path).name}:{lineno}: record is not an object")
            yield lineno, rec
