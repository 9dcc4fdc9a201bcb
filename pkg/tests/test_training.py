import numpy as np
import pytest
import torch

from objaware.checkpoint import Checkpoint
from objaware.data import sample_batch
from objaware.training import (NonFiniteError, TextContext, build_model, build_optimizer, gradient_check,
                               load_model, train, train_step)
from conftest import tiny_train_config


def states_equal(a, b):
    sa, sb = a.state_dict(), b.state_dict()
    return sa.keys() == sb.keys() and all(torch.equal(sa[k], sb[k]) for k in sa)


def strip_time(metrics):
    return [{k: v for k, v in m.items() if k != "wall_time"} for m in metrics]


def test_training_is_bitwise_reproducible(tiny_data):
    ds, vocab, _ = tiny_data
    a = train(ds, tiny_train_config(epochs=2), vocab)
    b = train(ds, tiny_train_config(epochs=2), vocab)
    assert states_equal(a.model, b.model)
    assert strip_time(a.metrics) == strip_time(b.metrics)
    c = train(ds, tiny_train_config(epochs=2, seed=1), vocab)
    assert not states_equal(a.model, c.model)


def test_resume_matches_uninterrupted_run(tiny_data, tmp_path):
    ds, vocab, _ = tiny_data
    full = train(ds, tiny_train_config(epochs=3, warmup_steps=5), vocab, out_dir=tmp_path / "full")
    train(ds, tiny_train_config(epochs=1, warmup_steps=5), vocab, out_dir=tmp_path / "part")
    resumed = train(ds, tiny_train_config(epochs=3, warmup_steps=5), vocab,
                    resume=tmp_path / "part" / "checkpoint_epoch001.ckpt")
    assert states_equal(full.model, resumed.model)
    assert strip_time(full.metrics[-len(resumed.metrics):]) == strip_time(resumed.metrics)
    assert (tmp_path / "full" / "last.ckpt").read_bytes() == resumed.checkpoint.to_bytes()


def test_resume_rejects_other_model_config(tiny_data, tmp_path):
    ds, vocab, _ = tiny_data
    train(ds, tiny_train_config(epochs=0), vocab, out_dir=tmp_path)
    with pytest.raises(ValueError, match="model config"):
        train(ds, tiny_train_config(model={"dim": 32}), vocab, resume=tmp_path / "last.ckpt")


def test_frozen_backbone_stays_bit_identical(tiny_data):
    ds, vocab, _ = tiny_data
    cfg = tiny_train_config(epochs=17, freeze_backbone=True)  # 6 steps per epoch
    before = build_model(cfg, len(vocab))
    result = train(ds, cfg, vocab)
    assert len(result.metrics) >= 100
    for enc_before, enc_after in zip(before.encoders(), result.model.encoders()):
        assert states_equal(enc_before, enc_after)
    assert not torch.equal(before.decoder.bank.object, result.model.decoder.bank.object)


def test_zero_learning_rate_changes_nothing(tiny_data):
    ds, vocab, _ = tiny_data
    cfg = tiny_train_config(lr=0.0)
    assert states_equal(build_model(cfg, len(vocab)), train(ds, cfg, vocab).model)


def test_zero_epochs_writes_initial_checkpoint(tiny_data, tmp_path):
    ds, vocab, _ = tiny_data
    result = train(ds, tiny_train_config(epochs=0), vocab, out_dir=tmp_path)
    assert result.metrics == [] and (tmp_path / "last.ckpt").exists()
    assert (tmp_path / "metrics.jsonl").read_text() == ""
    model, cfg, loaded_vocab = load_model(tmp_path / "last.ckpt")
    assert states_equal(model, result.model) and loaded_vocab.tokens == vocab.tokens


def test_checkpoint_round_trip_is_byte_identical(tiny_data, tmp_path):
    ds, vocab, _ = tiny_data
    ckpt = train(ds, tiny_train_config(), vocab).checkpoint
    path = ckpt.save(tmp_path / "a.ckpt")
    again = Checkpoint.load(path)
    assert again.to_bytes() == path.read_bytes()
    with pytest.raises(ValueError, match="magic"):
        Checkpoint.from_bytes(b"nope" + path.read_bytes())


def test_no_weight_decay_on_vectors():
    model = build_model(tiny_train_config(), 64)
    groups = build_optimizer(model, tiny_train_config()).param_groups
    assert all(p.ndim > 1 for p in groups[0]["params"])
    assert groups[1]["weight_decay"] == 0.0 and all(p.ndim == 1 for p in groups[1]["params"])


def test_non_finite_loss_is_reported(tiny_data):
    ds, vocab, _ = tiny_data
    cfg = tiny_train_config()
    model = build_model(cfg, len(vocab))
    with torch.no_grad():
        model.decoder.video_proj.weight.fill_(float("nan"))
    batch = sample_batch(ds, 4, True, np.random.default_rng(0))
    with pytest.raises(NonFiniteError, match="v2t"):
        train_step(model, build_optimizer(model, cfg), batch, TextContext.from_taxonomy(vocab, ds.taxonomy), cfg)


@pytest.fixture(scope="module")
def grad_setup(tiny_data):
    ds, vocab, _ = tiny_data
    cfg = tiny_train_config(precision="high", model={"num_object_queries": 3})
    model = build_model(cfg, len(vocab))
    batch = sample_batch(ds, 3, True, np.random.default_rng(1))
    return model, batch, TextContext.from_taxonomy(vocab, ds.taxonomy), cfg


@pytest.mark.parametrize("terms", [dict(use_box_loss=False, use_word_loss=False, lambda_word=0.0),
                                   dict(use_box_loss=True, use_word_loss=False),
                                   dict(use_box_loss=False, use_word_loss=True),
                                   dict()])
def test_gradients_match_finite_differences(grad_setup, terms):
    model, batch, ctx, cfg = grad_setup
    from dataclasses import replace
    report = gradient_check(model, batch, ctx, replace(cfg, **terms), n_per_group=25)
    assert set(report) == {"queries", "frame_vectors", "decoder", "heads", "projections", "encoders"}
    assert max(report.values()) < 1e-5, report


def test_gradient_check_flags_corrupted_gradients(grad_setup):
    model, batch, ctx, cfg = grad_setup

    def corrupt(group, grads):
        if group == "frame_vectors":
            grads[0].mul_(1.01)

    report = gradient_check(model, batch, ctx, cfg, n_per_group=10, corrupt=corrupt)
    assert report["frame_vectors"] > 1e-3
    assert report["queries"] < 1e-5


def test_gradient_check_requires_double(tiny_data):
    ds, vocab, _ = tiny_data
    cfg = tiny_train_config()
    with pytest.raises(ValueError, match="float64"):
        gradient_check(build_model(cfg, len(vocab)), sample_batch(ds, 2, False, np.random.default_rng(0)),
                       TextContext.from_taxonomy(vocab, ds.taxonomy), cfg)
