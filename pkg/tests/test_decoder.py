import pytest
import torch

from objaware.config import ModelConfig
from objaware.decoder import NUM_HANDS, ObjectAwareDecoder, SummaryVectors
from objaware.layers import MultiHeadAttention
from objaware.model import ObjectAwareModel

import oracles


def make_decoder(**kw):
    torch.manual_seed(0)
    args = dict(dim=16, heads=4, layers=2, num_objects=4, num_frames=4, grid=2, text_dim=16, embed_dim=32)
    args.update(kw)
    return ObjectAwareDecoder(**args).double()


def test_decode_shapes():
    for k in (1, 3, 6):
        dec = make_decoder(num_objects=k)
        s = dec.decode(torch.randn(2, 4, 2, 2, 16, dtype=torch.float64))
        assert s.vectors.shape == (2, NUM_HANDS + k + 1, 16)
        assert dec.predict_boxes(s).shape == (2, NUM_HANDS + k, 4, 4)
        assert dec.predict_names(s).shape == (2, k, 16)
        assert dec.video_embedding(s).shape == (2, 32)


def test_decode_rejects_mismatch():
    dec = make_decoder()
    with pytest.raises(ValueError):
        dec.decode(torch.randn(1, 4, 2, 2, 8, dtype=torch.float64))
    with pytest.raises(ValueError):
        dec.decode(torch.randn(1, 4, 3, 3, 16, dtype=torch.float64))


def test_object_query_permutation_equivariance():
    dec = make_decoder()
    fmap = torch.randn(1, 4, 2, 2, 16, dtype=torch.float64)
    s = dec.decode(fmap)
    boxes, names = dec.predict_boxes(s), dec.predict_names(s)
    perm = torch.tensor([2, 0, 3, 1])
    with torch.no_grad():
        dec.bank.object.copy_(dec.bank.object[perm])
    s2 = dec.decode(fmap)
    torch.testing.assert_close(s2.objects, s.objects[:, perm], rtol=0, atol=1e-12)
    torch.testing.assert_close(s2.hands, s.hands, rtol=0, atol=1e-12)
    torch.testing.assert_close(s2.video, s.video, rtol=0, atol=1e-12)
    torch.testing.assert_close(dec.predict_boxes(s2)[:, NUM_HANDS:], boxes[:, NUM_HANDS + perm], rtol=0, atol=1e-12)
    torch.testing.assert_close(dec.predict_names(s2), names[:, perm], rtol=0, atol=1e-12)


def test_attention_oracle_one_query_two_tokens():
    torch.manual_seed(3)
    mha = MultiHeadAttention(3, 1).double()
    q = torch.randn(1, 1, 3, dtype=torch.float64)
    ctx = torch.randn(1, 2, 3, dtype=torch.float64)
    got = mha(q, ctx)[0, 0].tolist()
    ref = oracles.attention(q[0].tolist(), ctx[0].tolist(), mha)[0]
    assert max(abs(a - b) for a, b in zip(got, ref)) < 1e-10


def test_decoder_block_oracle():
    dec = make_decoder(dim=4, heads=1, layers=1, num_objects=1, num_frames=1, grid=1, text_dim=4, embed_dim=4)
    fmap = torch.randn(1, 1, 1, 1, 4, dtype=torch.float64)
    got = dec.decode(fmap).vectors[0].tolist()
    memory = [oracles.add(oracles.add(fmap[0, 0, 0, 0].tolist(), dec.memory_spatial[0].tolist()),
                          dec.memory_frame[0].tolist())]
    queries = dec.bank.queries().tolist()
    out = [oracles.layernorm(x, dec.norm) for x in oracles.decoder_block(queries, memory, dec.blocks[0])]
    for a, b in zip(got, out):
        assert max(abs(x - y) for x, y in zip(a, b)) < 1e-10


def test_constant_box_head():
    dec = make_decoder()
    last = dec.box_head.layers[-1]
    with torch.no_grad():
        last.weight.zero_()
        last.bias.copy_(torch.tensor([0.3, -1.0, 2.0, 0.0], dtype=torch.float64))
    boxes = dec.predict_boxes(dec.decode(torch.randn(2, 4, 2, 2, 16, dtype=torch.float64)))
    expected = torch.sigmoid(torch.tensor([0.3, -1.0, 2.0, 0.0], dtype=torch.float64))
    torch.testing.assert_close(boxes, expected.expand_as(boxes), rtol=0, atol=1e-15)


def test_frame_vectors_change_boxes():
    dec = make_decoder()
    boxes = dec.predict_boxes(dec.decode(torch.randn(1, 4, 2, 2, 16, dtype=torch.float64)))
    assert ((boxes > 0) & (boxes < 1)).all()
    assert not torch.allclose(boxes[:, :, 0], boxes[:, :, 1])


def test_identity_semantic_head():
    dec = make_decoder()
    with torch.no_grad():
        for layer in dec.semantic_head.layers:
            layer.weight.copy_(torch.eye(16))
            layer.bias.zero_()
    dec.semantic_head.layers = dec.semantic_head.layers[:1]  # one square linear layer is the identity
    s = dec.decode(torch.randn(1, 4, 2, 2, 16, dtype=torch.float64))
    torch.testing.assert_close(dec.predict_names(s), s.objects, rtol=0, atol=0)


def test_summary_roles():
    v = torch.arange(2 * 7 * 1, dtype=torch.float64).reshape(2, 7, 1)
    s = SummaryVectors(v)
    assert s.hands.shape[1] == 2 and s.objects.shape[1] == 4 and s.boxed.shape[1] == 6
    torch.testing.assert_close(s.video, v[:, -1])


def test_model_forward_and_groups():
    torch.manual_seed(0)
    model = ObjectAwareModel(ModelConfig(dim=16, heads=2, embed_dim=32, vocab_size=10)).double()
    out = model(torch.rand(2, 4, 32, 32, 3, dtype=torch.float64))
    assert out.boxes.shape == (2, 6, 4, 4)
    assert out.video_emb.shape == (2, 32) and out.name_emb.shape == (2, 4, 32)
    groups = model.parameter_groups()
    assert set(groups) == {"queries", "frame_vectors", "decoder", "heads", "projections", "encoders"}
    owned = {id(p) for ps in groups.values() for p in ps}
    assert owned == {id(p) for p in model.parameters()}
    model.set_backbone_trainable(False)
    assert not any(p.requires_grad for p in groups["encoders"])
