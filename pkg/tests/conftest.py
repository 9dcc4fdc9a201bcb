import numpy as np
import pytest
import torch


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture(autouse=True)
def _single_thread():
    torch.set_num_threads(1)


def random_boxes(rng, n, lo=0.05, hi=0.5):
    """Center-format boxes that stay inside the unit frame."""
    wh = rng.uniform(lo, hi, size=(n, 2))
    c = rng.uniform(wh / 2, 1 - wh / 2)
    return np.hstack([c, wh])


def tiny_train_config(**kw):
    from objaware.config import ModelConfig, TrainConfig

    model = ModelConfig(**{"dim": 16, "heads": 2, "video_layers": 1, "text_layers": 1, "decoder_layers": 1,
                           "embed_dim": 16, **kw.pop("model", {})})
    return TrainConfig(**{"batch_size": 4, "epochs": 1, "lr": 1e-3, "model": model, **kw})


@pytest.fixture(scope="session")
def tiny_data(tmp_path_factory):
    """A 24-clip synthetic dataset and its vocabulary."""
    from objaware.data import SyntheticConfig, generate_synthetic, load_synthetic
    from objaware.encoders import Vocabulary

    out = generate_synthetic(SyntheticConfig(n_clips=24, clips_per_video=4), 0, tmp_path_factory.mktemp("tiny"))
    return load_synthetic(out), Vocabulary.load(out / "vocab.txt"), out
