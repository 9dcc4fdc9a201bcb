"""Noun/verb dictionaries and phrase extraction from narrations."""

import json
from dataclasses import dataclass, field
from pathlib import Path

from ..encoders import normalize_text

# background nouns, the camera wearer, and hand-related words (hands are
# supervised by boxes, not by narration nouns)
DEFAULT_REMOVAL = (
    "man", "woman", "person", "lady", "they", "ground", "camera", "table", "leg",
    "hand", "hands", "finger", "fingers", "palm", "thumb", "wrist", "arm",
)


@dataclass
class Group:
    id: int
    canonical: str
    synonyms: list = field(default_factory=list)

    def surfaces(self):
        return [" ".join(normalize_text(s)) for s in [self.canonical, *self.synonyms]]


class PhraseDictionary:
    """Matches single words and two-word phrases to canonical group names."""

    def __init__(self, groups, removal=()):
        ids = [g.id for g in groups]
        if len(set(ids)) != len(ids):
            raise ValueError("group ids must be unique")
        self.groups = list(groups)
        self.removal = {" ".join(normalize_text(r)) for r in removal}
        self._lookup = {}
        for g in self.groups:
            for s in g.surfaces():
                if len(s.split()) > 2:
                    raise ValueError(f"phrase {s!r} longer than two words")
                self._lookup.setdefault(s, g)

    @property
    def canonicals(self):
        return [g.canonical for g in self.groups]

    def _removed(self, surface, group):
        return surface in self.removal or " ".join(normalize_text(group.canonical)) in self.removal

    def extract(self, text):
        """Canonical names in text order. Two-word matches take precedence and
        consume both words; removal-list entries are dropped."""
        words = normalize_text(text)
        out = []
        i = 0
        while i < len(words):
            if i + 1 < len(words):
                pair = f"{words[i]} {words[i + 1]}"
                group = self._lookup.get(pair)
                if group is not None or pair in self.removal:
                    if group is not None and not self._removed(pair, group):
                        out.append(group.canonical)
                    i += 2
                    continue
            group = self._lookup.get(words[i])
            if group is not None and not self._removed(words[i], group):
                out.append(group.canonical)
            i += 1
        return out


@dataclass
class Taxonomy:
    nouns: PhraseDictionary
    verbs: PhraseDictionary

    @classmethod
    def from_dict(cls, d):
        def groups(items):
            return [Group(int(g["id"]), str(g["canonical"]), list(g.get("synonyms", []))) for g in items]

        removal = d.get("removal", DEFAULT_REMOVAL)
        return cls(PhraseDictionary(groups(d.get("nouns", [])), removal),
                   PhraseDictionary(groups(d.get("verbs", []))))

    @classmethod
    def load(cls, path):
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except (KeyError, TypeError) as e:
            raise ValueError(f"{path}: malformed taxonomy ({e})") from None

    def to_dict(self):
        def dump(pd):
            return [{"id": g.id, "canonical": g.canonical, "synonyms": list(g.synonyms)} for g in pd.groups]

        return {"nouns": dump(self.nouns), "verbs": dump(self.verbs), "removal": sorted(self.nouns.removal)}

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")


def extract_nouns(narration, taxonomy):
    return taxonomy.nouns.extract(narration)


def extract_verbs(narration, taxonomy):
    return taxonomy.verbs.extract(narration)
