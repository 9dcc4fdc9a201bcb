"""scikit-learn style wrapper: ``fit`` trains on a clip dataset, ``transform``
maps clip frames to video embeddings and ``predict`` picks the best-matching
text for each clip."""

import numpy as np
import torch
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .config import ModelConfig, TrainConfig
from .encoders import Vocabulary
from .evaluation import embed_texts, ground_clip
from .training import load_model, train
from .validation import check_frames


class ObjectAwareEncoder(TransformerMixin, BaseEstimator):
    """Video-text dual encoder trained with the object-aware decoder.

    Parameters mirror :class:`TrainConfig` and the decoder sizes of
    :class:`ModelConfig`; anything else keeps the config defaults.
    """

    def __init__(self, dim=64, heads=4, decoder_layers=2, num_object_queries=4, num_frames=4,
                 image_size=32, patch_size=8, batch_size=32, lr=1e-3, epochs=20, warmup_steps=0, lambda_word=0.5,
                 temperature=0.05, freeze_backbone=False, use_hard_negatives=True, use_box_loss=True,
                 use_word_loss=True, seed=0):
        self.dim = dim
        self.heads = heads
        self.decoder_layers = decoder_layers
        self.num_object_queries = num_object_queries
        self.num_frames = num_frames
        self.image_size = image_size
        self.patch_size = patch_size
        self.batch_size = batch_size
        self.lr = lr
        self.epochs = epochs
        self.warmup_steps = warmup_steps
        self.lambda_word = lambda_word
        self.temperature = temperature
        self.freeze_backbone = freeze_backbone
        self.use_hard_negatives = use_hard_negatives
        self.use_box_loss = use_box_loss
        self.use_word_loss = use_word_loss
        self.seed = seed

    def train_config(self):
        model = ModelConfig(dim=self.dim, heads=self.heads, decoder_layers=self.decoder_layers,
                            num_object_queries=self.num_object_queries, num_frames=self.num_frames,
                            image_size=self.image_size, patch_size=self.patch_size)
        return TrainConfig(batch_size=self.batch_size, lr=self.lr, epochs=self.epochs, warmup_steps=self.warmup_steps,
                           lambda_word=self.lambda_word, temperature=self.temperature,
                           freeze_backbone=self.freeze_backbone, use_hard_negatives=self.use_hard_negatives,
                           use_box_loss=self.use_box_loss, use_word_loss=self.use_word_loss,
                           seed=self.seed, model=model)

    def fit(self, X, y=None, vocab=None):
        """Train on ``X``, a loaded clip dataset. ``y`` is ignored: the
        narrations and detections inside the dataset are the supervision."""
        if not hasattr(X, "records") or not hasattr(X, "taxonomy"):
            raise TypeError("fit expects a clip dataset (see objaware.data.load_dataset)")
        if vocab is None:
            surfaces = [s for g in X.taxonomy.nouns.groups + X.taxonomy.verbs.groups for s in g.surfaces()]
            vocab = Vocabulary.build([r.narration for r in X.records] + surfaces)
        result = train(X, self.train_config(), vocab)
        self.model_ = result.model.eval()
        self.vocab_ = vocab
        self.checkpoint_ = result.checkpoint
        self.metrics_ = result.metrics
        return self

    @classmethod
    def from_checkpoint(cls, ckpt):
        model, cfg, vocab = load_model(ckpt)
        if vocab is None:
            raise ValueError("checkpoint carries no vocabulary")
        m = cfg.model
        est = cls(dim=m.dim, heads=m.heads, decoder_layers=m.decoder_layers,
                  num_object_queries=m.num_object_queries, num_frames=m.num_frames,
                  image_size=m.image_size, patch_size=m.patch_size, batch_size=cfg.batch_size,
                  lr=cfg.lr, epochs=cfg.epochs, lambda_word=cfg.lambda_word, temperature=cfg.temperature,
                  freeze_backbone=cfg.freeze_backbone, use_hard_negatives=cfg.use_hard_negatives,
                  use_box_loss=cfg.use_box_loss, use_word_loss=cfg.use_word_loss, seed=cfg.seed)
        est.model_, est.vocab_, est.metrics_ = model, vocab, []
        return est

    def transform(self, X):
        """``(N, T, H, W, 3)`` clips (uint8 or floats in [0, 1]) to
        ``(N, embed_dim)`` video embeddings."""
        check_is_fitted(self, "model_")
        frames = check_frames(X)
        with torch.no_grad():
            out = self.model_(torch.as_tensor(frames, dtype=self.model_.dtype))
        return out.video_emb.double().numpy()

    def embed_text(self, texts):
        check_is_fitted(self, "model_")
        return embed_texts(self.model_, self.vocab_, list(texts))

    def decision_function(self, X, texts):
        """Cosine similarity ``(N, len(texts))`` between clips and texts."""
        v = self.transform(X)
        t = self.embed_text(texts)
        v = v / np.linalg.norm(v, axis=1, keepdims=True)
        t = t / np.linalg.norm(t, axis=1, keepdims=True)
        return v @ t.T

    def predict(self, X, texts):
        """Index of the best-matching text for each clip."""
        return self.decision_function(X, texts).argmax(axis=1)

    def score(self, X, y, texts):
        return float(np.mean(self.predict(X, texts) == np.asarray(y)))

    def ground(self, frames, noun_phrases):
        """Per-frame hand and noun boxes for one clip (or one image)."""
        check_is_fitted(self, "model_")
        frames = np.asarray(frames)
        single = frames.ndim == 3
        arr = check_frames(frames[None] if single else frames)[0]
        return ground_clip(self.model_, self.vocab_, arr[0] if single else arr, noun_phrases)
