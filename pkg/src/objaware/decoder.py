"""Object-aware decoder: learnable hand, object and video queries attend to the
visual feature map and are read out as per-frame boxes, object-name
embeddings and a clip-level video embedding."""

from dataclasses import dataclass

import torch
from torch import nn

from .layers import FeedForward, MLP, MultiHeadAttention

NUM_HANDS = 2


class QueryBank(nn.Module):
    """Two hand queries, ``K`` object queries, one video query and ``T``
    frame-index vectors, all learned and all of width ``dim``."""

    def __init__(self, dim, num_objects, num_frames):
        super().__init__()
        if num_objects < 1:
            raise ValueError("need at least one object query")
        self.hand = nn.Parameter(torch.randn(NUM_HANDS, dim))
        self.object = nn.Parameter(torch.randn(num_objects, dim))
        self.video = nn.Parameter(torch.randn(1, dim))
        self.frames = nn.Parameter(torch.randn(num_frames, dim))

    @property
    def num_objects(self):
        return self.object.shape[0]

    def queries(self):
        """Stacked ``(2 + K + 1, dim)`` queries in hand, object, video order."""
        return torch.cat([self.hand, self.object, self.video], dim=0)


@dataclass
class SummaryVectors:
    """Decoder outputs in query order: ``(B, 2 + K + 1, C)``."""

    vectors: torch.Tensor

    @property
    def hands(self):
        return self.vectors[:, :NUM_HANDS]

    @property
    def objects(self):
        return self.vectors[:, NUM_HANDS:-1]

    @property
    def boxed(self):
        """Hand and object summaries, the ones that get boxes."""
        return self.vectors[:, :-1]

    @property
    def video(self):
        return self.vectors[:, -1]


class DecoderBlock(nn.Module):
    """Pre-norm self-attention over queries, cross-attention into the
    feature tokens, then a feed-forward sublayer."""

    def __init__(self, dim, heads):
        super().__init__()
        self.norm_self = nn.LayerNorm(dim)
        self.self_attn = MultiHeadAttention(dim, heads)
        self.norm_cross = nn.LayerNorm(dim)
        self.cross_attn = MultiHeadAttention(dim, heads)
        self.norm_ffn = nn.LayerNorm(dim)
        self.ffn = FeedForward(dim, dim * 4)

    def forward(self, x, memory):
        h = self.norm_self(x)
        x = x + self.self_attn(h, h)
        x = x + self.cross_attn(self.norm_cross(x), memory)
        return x + self.ffn(self.norm_ffn(x))


class ObjectAwareDecoder(nn.Module):
    def __init__(self, dim=64, heads=4, layers=2, num_objects=4, num_frames=4, grid=4,
                 text_dim=64, embed_dim=256, box_head_layers=3, semantic_head_layers=2):
        super().__init__()
        self.bank = QueryBank(dim, num_objects, num_frames)
        self.memory_spatial = nn.Parameter(torch.randn(grid * grid, dim) * 0.02)
        self.memory_frame = nn.Parameter(torch.randn(num_frames, dim) * 0.02)
        self.blocks = nn.ModuleList(DecoderBlock(dim, heads) for _ in range(layers))
        self.norm = nn.LayerNorm(dim)
        self.box_head = MLP([2 * dim] + [dim] * (box_head_layers - 1) + [4])
        self.semantic_head = MLP([dim] * semantic_head_layers + [text_dim])
        self.video_proj = nn.Linear(dim, embed_dim)

    @property
    def dim(self):
        return self.norm.normalized_shape[0]

    def decode(self, fmap):
        """``(B, T, H', W', C)`` feature map to summary vectors."""
        if fmap.ndim != 5 or fmap.shape[-1] != self.dim:
            raise ValueError(f"feature map {tuple(fmap.shape)} does not match decoder width {self.dim}")
        b, t, gh, gw, c = fmap.shape
        if gh * gw != self.memory_spatial.shape[0] or t > self.memory_frame.shape[0]:
            raise ValueError(f"feature map grid {t}x{gh}x{gw} does not match the decoder configuration")
        memory = fmap.reshape(b, t, gh * gw, c) + self.memory_spatial[None, None] + self.memory_frame[:t, None][None]
        memory = memory.reshape(b, t * gh * gw, c)
        x = self.bank.queries()[None].expand(b, -1, -1)
        for block in self.blocks:
            x = block(x, memory)
        return SummaryVectors(self.norm(x))

    def predict_boxes(self, summary, num_frames=None):
        """Per-query, per-frame boxes ``(B, 2 + K, T, 4)`` in ``(0, 1)``.

        Each box comes from the summary vector concatenated with that frame's
        index vector; the video query produces none.
        """
        frames = self.bank.frames if num_frames is None else self.bank.frames[:num_frames]
        s = summary.boxed
        b, q, c = s.shape
        t = frames.shape[0]
        joint = torch.cat([s[:, :, None].expand(b, q, t, c), frames[None, None].expand(b, q, t, c)], dim=-1)
        return torch.sigmoid(self.box_head(joint))

    def predict_names(self, summary):
        """Object-name embeddings ``(B, K, text_dim)`` from object summaries only."""
        return self.semantic_head(summary.objects)

    def video_embedding(self, summary):
        """Unnormalized ``(B, embed_dim)`` video embedding from the video query."""
        return self.video_proj(summary.video)
