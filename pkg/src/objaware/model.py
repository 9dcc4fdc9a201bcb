"""The full object-aware video-language network."""

from dataclasses import dataclass

import torch
from torch import nn

from .config import ModelConfig
from .decoder import ObjectAwareDecoder, SummaryVectors
from .encoders import TextEncoder, VideoEncoder


@dataclass
class ModelOutput:
    fmap: torch.Tensor
    summary: SummaryVectors
    boxes: torch.Tensor  # (B, 2 + K, T, 4)
    names: torch.Tensor  # (B, K, text_dim), semantic-head output
    name_emb: torch.Tensor  # (B, K, embed_dim)
    video_emb: torch.Tensor  # (B, embed_dim)


class ObjectAwareModel(nn.Module):
    def __init__(self, config=None):
        super().__init__()
        config = config or ModelConfig()
        self.config = config
        grid = config.image_size // config.patch_size
        self.text_encoder = TextEncoder(config.vocab_size, config.dim, config.text_layers,
                                        config.heads, config.max_text_len)
        self.video_encoder = VideoEncoder(config.dim, config.video_layers, config.heads,
                                          config.patch_size, config.image_size, config.num_frames)
        self.decoder = ObjectAwareDecoder(config.dim, config.heads, config.decoder_layers,
                                          config.num_object_queries, config.num_frames, grid,
                                          text_dim=config.dim, embed_dim=config.embed_dim,
                                          box_head_layers=config.box_head_layers,
                                          semantic_head_layers=config.semantic_head_layers)
        self.text_proj = nn.Linear(config.dim, config.embed_dim)
        self.name_proj = nn.Linear(config.dim, config.embed_dim)

    @property
    def dtype(self):
        return self.text_proj.weight.dtype

    def encoders(self):
        return [self.text_encoder, self.video_encoder]

    def set_backbone_trainable(self, trainable):
        for module in self.encoders():
            for p in module.parameters():
                p.requires_grad_(trainable)

    def parameter_groups(self):
        """Named parameter groups used for gradient verification and reporting."""
        dec = self.decoder
        groups = {
            "queries": [dec.bank.hand, dec.bank.object, dec.bank.video],
            "frame_vectors": [dec.bank.frames],
            "decoder": [dec.memory_spatial, dec.memory_frame, *dec.blocks.parameters(), *dec.norm.parameters()],
            "heads": [*dec.box_head.parameters(), *dec.semantic_head.parameters()],
            "projections": [*dec.video_proj.parameters(), *self.text_proj.parameters(), *self.name_proj.parameters()],
            "encoders": [*self.text_encoder.parameters(), *self.video_encoder.parameters()],
        }
        return groups

    def forward(self, frames):
        """``frames``: ``(B, T, H, W, 3)`` float tensor in ``[0, 1]``."""
        fmap = self.video_encoder(frames.to(self.dtype))
        summary = self.decoder.decode(fmap)
        boxes = self.decoder.predict_boxes(summary, frames.shape[1])
        names = self.decoder.predict_names(summary)
        return ModelOutput(
            fmap=fmap,
            summary=summary,
            boxes=boxes,
            names=names,
            name_emb=self.name_proj(names),
            video_emb=self.decoder.video_embedding(summary),
        )

    def embed_text(self, sequences):
        """Token-id sequences to ``(B, embed_dim)`` similarity-space embeddings."""
        return self.text_proj(self.text_encoder(sequences))
