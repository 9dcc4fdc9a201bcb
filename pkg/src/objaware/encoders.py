"""Desk-scale dual encoder: whitespace tokenizer over a closed vocabulary, a
text transformer read out at the end-of-sequence token, and a patch video
transformer producing a ``T x H' x W' x C`` feature map."""

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .layers import EncoderLayer

UNK = "<unk>"
EOS = "<eos>"
_PUNCT = re.compile(r"[^\w\s]")


def normalize_text(text):
    """Lowercase, strip punctuation, collapse whitespace."""
    return _PUNCT.sub(" ", text.lower()).split()


class Vocabulary:
    """Token list where the id is the line number; ids 0/1 are UNK/EOS."""

    def __init__(self, tokens):
        tokens = list(tokens)
        if tokens[:2] != [UNK, EOS]:
            raise ValueError(f"vocabulary must start with {UNK!r}, {EOS!r}")
        if len(set(tokens)) != len(tokens):
            raise ValueError("duplicate vocabulary tokens")
        self.tokens = tokens
        self.index = {t: i for i, t in enumerate(tokens)}

    unk_id = 0
    eos_id = 1

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token):
        return token in self.index

    @classmethod
    def build(cls, texts):
        words = sorted({w for text in texts for w in normalize_text(text)} - {UNK, EOS})
        return cls([UNK, EOS, *words])

    @classmethod
    def load(cls, path):
        return cls(Path(path).read_text().splitlines())

    def save(self, path):
        Path(path).write_text("\n".join(self.tokens) + "\n")


def tokenize(text, vocab):
    """Map text to ids; unknown words become UNK and the sequence ends with EOS."""
    ids = [vocab.index.get(w, vocab.unk_id) for w in normalize_text(text)]
    return ids + [vocab.eos_id]


@dataclass
class TextOutput:
    sentence: torch.Tensor
    nouns: torch.Tensor
    tokens: list


class TextEncoder(nn.Module):
    def __init__(self, vocab_size, dim=64, layers=2, heads=4, max_len=32):
        super().__init__()
        self.max_len = max_len
        self.token_embed = nn.Embedding(vocab_size, dim)
        # small init so the EOS readout is not dominated by the EOS embedding itself
        nn.init.normal_(self.token_embed.weight, std=0.02)
        self.pos_embed = nn.Parameter(torch.randn(max_len, dim) * 0.02)
        self.layers = nn.ModuleList(EncoderLayer(dim, heads) for _ in range(layers))
        self.norm = nn.LayerNorm(dim)

    @property
    def dim(self):
        return self.token_embed.embedding_dim

    def forward(self, sequences):
        """Encode a list of id sequences (each ending in EOS) to ``(B, C)``."""
        if len(sequences) == 0:
            return self.token_embed.weight.new_zeros(0, self.dim)
        seqs = [list(s[: self.max_len - 1]) + [s[-1]] if len(s) > self.max_len else list(s) for s in sequences]
        lengths = torch.tensor([len(s) for s in seqs])
        if (lengths == 0).any():
            raise ValueError("empty token sequence; expected at least EOS")
        width = int(lengths.max())
        ids = torch.zeros(len(seqs), width, dtype=torch.long)
        for i, s in enumerate(seqs):
            ids[i, : len(s)] = torch.tensor(s)
        pad = torch.arange(width)[None, :] >= lengths[:, None]
        x = self.token_embed(ids) + self.pos_embed[:width]
        for layer in self.layers:
            x = layer(x, pad)
        x = self.norm(x)
        return x[torch.arange(len(seqs)), lengths - 1]

    def encode_text(self, tokens, noun_spans=()):
        """Sentence embedding plus one embedding per ``(start, end)`` noun span.

        Each span is re-encoded on its own as ``tokens[start:end] + [EOS]``.
        """
        tokens = list(tokens)
        body = tokens[:-1] if tokens and tokens[-1] == Vocabulary.eos_id else tokens
        phrases = []
        for start, end in noun_spans:
            if not 0 <= start < end <= len(body):
                raise ValueError(f"noun span ({start}, {end}) outside tokens of length {len(body)}")
            phrases.append(body[start:end] + [Vocabulary.eos_id])
        out = self([body + [Vocabulary.eos_id], *phrases])
        return TextOutput(sentence=out[0], nouns=out[1:], tokens=body + [Vocabulary.eos_id])


class VideoEncoder(nn.Module):
    """Per-frame 2-D patches plus a learned frame embedding, then joint
    space-time self-attention."""

    def __init__(self, dim=64, layers=2, heads=4, patch_size=8, image_size=32, max_frames=4):
        super().__init__()
        if image_size % patch_size:
            raise ValueError(f"image_size {image_size} not divisible by patch_size {patch_size}")
        self.patch_size = patch_size
        self.grid = image_size // patch_size
        self.patch_embed = nn.Linear(patch_size * patch_size * 3, dim)
        self.spatial_embed = nn.Parameter(torch.randn(self.grid * self.grid, dim) * 0.02)
        self.frame_embed = nn.Parameter(torch.randn(max_frames, dim) * 0.02)
        self.layers = nn.ModuleList(EncoderLayer(dim, heads) for _ in range(layers))
        self.norm = nn.LayerNorm(dim)

    def patchify(self, frames):
        b, t, h, w, c = frames.shape
        p = self.patch_size
        if h % p or w % p:
            raise ValueError(f"frame size {h}x{w} not divisible by patch size {p}")
        if (h // p, w // p) != (self.grid, self.grid):
            raise ValueError(f"frame size {h}x{w} does not match the configured {self.grid * p}x{self.grid * p}")
        if t > self.frame_embed.shape[0]:
            raise ValueError(f"{t} frames exceeds the configured maximum {self.frame_embed.shape[0]}")
        x = frames.reshape(b, t, h // p, p, w // p, p, c).permute(0, 1, 2, 4, 3, 5, 6)
        return x.reshape(b, t, h // p, w // p, p * p * c)

    def forward(self, frames):
        """``(B, T, H, W, 3)`` in ``[0, 1]`` to the ``(B, T, H', W', C)`` feature map."""
        patches = self.patchify(frames)
        b, t, gh, gw, _ = patches.shape
        x = self.patch_embed(patches).reshape(b, t, gh * gw, -1)
        x = x + self.spatial_embed[None, None] + self.frame_embed[:t, None][None]
        x = x.reshape(b, t * gh * gw, -1)
        for layer in self.layers:
            x = layer(x)
        return self.norm(x).reshape(b, t, gh, gw, -1)

    @staticmethod
    def clip_embedding(fmap):
        """Mean-pooled backbone embedding (reported only, not trained on)."""
        return fmap.mean(dim=(1, 2, 3))


def frames_to_tensor(frames, dtype=torch.float32):
    """uint8 or float frames ``(..., H, W, 3)`` to a float tensor in ``[0, 1]``."""
    arr = np.asarray(frames)
    if arr.dtype == np.uint8:
        return torch.from_numpy(arr.astype(np.float64) / 255.0).to(dtype)
    return torch.as_tensor(arr, dtype=dtype)
