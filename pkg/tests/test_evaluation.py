import math

import numpy as np
import pytest

from objaware import evaluation as ev
from objaware.data import Group, PhraseDictionary, Taxonomy


def brute_ap(scores, relevant):
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    hits, total = 0, 0.0
    for rank, i in enumerate(order, 1):
        if relevant[i]:
            hits += 1
            total += hits / rank
    return total / sum(relevant)


def brute_ndcg(scores, grades):
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    dcg = sum(grades[i] / math.log2(r + 1) for r, i in enumerate(order, 1))
    ideal = sum(g / math.log2(r + 1) for r, g in enumerate(sorted(grades, reverse=True), 1))
    return dcg / ideal


def test_ap_and_ndcg_match_brute_force(rng):
    for _ in range(200):
        n = int(rng.integers(2, 15))
        scores = rng.integers(0, 5, n).astype(float) if rng.random() < 0.3 else rng.normal(size=n)
        rel = (rng.random(n) < 0.4).astype(int)
        rel[rng.integers(n)] = 1
        grades = rng.choice([0.0, 0.25, 0.5, 1.0], size=n)
        grades[rng.integers(n)] = 1.0
        assert abs(ev.average_precision(scores, rel) - brute_ap(list(scores), list(rel))) < 1e-12
        assert abs(ev.ndcg(scores, grades) - brute_ndcg(list(scores), list(grades))) < 1e-12


def test_ap_small_cases():
    assert ev.average_precision([0.9, 0.1], [0, 1]) == 0.5
    assert ev.average_precision([0.9, 0.1], [1, 0]) == 1.0
    with pytest.raises(ValueError):
        ev.average_precision([1.0], [0])


def test_ndcg_worked_example():
    # ranking puts grades [0, 1, 0.5] in that order
    expected = (1 / math.log2(3) + 0.5 / 2) / (1 + 0.5 / math.log2(3))
    assert ev.ndcg([3.0, 2.0, 1.0], [0.0, 1.0, 0.5]) == pytest.approx(expected, abs=1e-15)


def test_retrieval_map_excludes_empty_rows():
    stats = {}
    sim = np.array([[0.9, 0.1], [0.2, 0.3]])
    assert ev.retrieval_map(sim, np.array([[1, 0], [0, 0]]), stats) == 1.0
    assert stats["excluded"] == 1
    with pytest.raises(ValueError):
        ev.retrieval_map(sim, np.zeros((2, 2)))


def test_caption_relevance_example():
    tax = Taxonomy(PhraseDictionary([Group(0, "cup"), Group(1, "plate"), Group(2, "knife")]),
                   PhraseDictionary([Group(0, "wash", ["washes"]), Group(1, "cut", ["cuts"])]))
    rel = ev.caption_relevance(["washes the cup and the plate"], ["washes the cup and the knife"], tax)
    assert rel[0, 0] == pytest.approx((1 / 3 + 1) / 2, abs=1e-15)
    assert ev.caption_relevance(["washes the cup"], ["washes the cup"], tax)[0, 0] == 1.0


def test_retrieval_report_perfect_ranking():
    rel = np.eye(4)
    out = ev.retrieval_report(np.eye(4) + 0.01, rel)
    assert out["map_avg"] == 1.0 and out["ndcg_avg"] == 1.0


def test_mcq_accuracy_and_scale_invariance(rng):
    q = rng.normal(size=(50, 8))
    c = rng.normal(size=(50, 5, 8))
    answers = rng.integers(0, 5, 50)
    c[np.arange(50), answers] = q * 3.0
    assert ev.mcq_accuracy(q, c, answers)["intra"] == 1.0
    base = ev.mcq_accuracy(q, rng.normal(size=(50, 5, 8)), answers, ["inter"] * 25 + ["intra"] * 25)
    assert base["n_inter"] == 25 and base["n_intra"] == 25
    scaled = c * rng.uniform(0.1, 10, size=(50, 5, 1))
    assert ev.mcq_accuracy(q * 7.0, scaled, answers) == ev.mcq_accuracy(q, c, answers)


def test_mcq_ties_pick_lowest_index():
    q = np.ones((1, 2))
    c = np.ones((1, 3, 2))
    assert ev.mcq_accuracy(q, c, [0])["intra"] == 1.0
    assert ev.mcq_accuracy(q, c, [2])["intra"] == 0.0


def test_classify_examples():
    labels = np.array([0] * 9 + [1])
    logits = [np.array([[1.0, 0.0]])] * 10
    assert ev.classify(logits, labels) == {"top1": 0.9, "mean_class": 0.5}
    onehot = [np.eye(3)[[c]] for c in [0, 1, 2, 2]]
    assert ev.classify(onehot, [0, 1, 2, 2]) == {"top1": 1.0, "mean_class": 1.0}
    stats = {}
    ev.classify(onehot, [0, 1, 2, 2], num_classes=4, stats=stats)
    assert stats["excluded_classes"] == 1


def test_classify_max_pools_clips():
    video = np.array([[0.9, 0.1], [0.0, 0.95]])
    assert ev.classify([video], [1])["top1"] == 1.0
    assert ev.classify([video[:1]], [0]) == ev.classify([video[0]], [0])


def test_uniform_clip_starts():
    assert list(ev.uniform_clip_starts(40, 4, 10)) == [0, 4, 8, 12, 16, 20, 24, 28, 32, 36]
    with pytest.raises(ValueError):
        ev.uniform_clip_starts(3, 4, 2)


def box(cx, cy, w=0.2, h=0.2):
    return np.array([cx, cy, w, h])


def instance(hands, objects, det_hands=None, det_objects=None, pred_hands=None, pred_objects=None):
    return ev.GroundingInstance("c", 0, hands, objects, pred_hands, pred_objects,
                                np.zeros((0, 4)) if det_hands is None else np.array(det_hands),
                                np.zeros((0, 4)) if det_objects is None else np.array(det_objects))


def test_localization_predictions_equal_to_gt():
    hands = [("left", box(0.2, 0.7)), ("right", box(0.8, 0.7))]
    objects = [("cup", box(0.5, 0.3))]
    inst = instance(hands, objects, pred_hands=dict(hands), pred_objects=[objects[0][1]])
    stats = {}
    assert ev.localization_accuracy([inst], "predicted", stats=stats) == 1.0
    assert stats == {"targets": 3, "hits": 3, "hands": 1.0, "objects": 1.0}


def test_gt_matching_uses_iou_and_missing_boxes_miss():
    objects = [("cup", box(0.2, 0.2)), ("plate", box(0.8, 0.8))]
    det = [box(0.81, 0.79), box(0.21, 0.2)]
    assert ev.localization_accuracy([instance([], objects, det_objects=det)], "gt_matching") == 1.0
    assert ev.localization_accuracy([instance([], objects, det_objects=det[:1])], "gt_matching") == 0.5
    assert ev.localization_accuracy([instance([], objects)], "gt_matching") == 0.0


def test_random_baseline_is_seeded():
    objects = [("a", box(0.2, 0.2)), ("b", box(0.8, 0.8)), ("c", box(0.2, 0.8))]
    insts = [instance([], objects, det_objects=[box(0.2, 0.2), box(0.8, 0.8), box(0.2, 0.8)])] * 5
    assert ev.localization_accuracy(insts, "random", seed=3) == ev.localization_accuracy(insts, "random", seed=3)
    mean, std = ev.random_baseline(insts, seeds=200)
    assert mean == pytest.approx(1 / 3, abs=0.05) and std > 0


def test_localization_rejects_bad_input():
    with pytest.raises(ValueError):
        ev.localization_accuracy([instance([], [("a", box(0.5, 0.5))])], "predicted")
    with pytest.raises(ValueError):
        ev.localization_accuracy([], "gt_matching")
    with pytest.raises(ValueError):
        ev.localization_accuracy([], "oracle")


def test_mean_pairwise_iou():
    assert ev.mean_pairwise_iou([box(0.5, 0.5)] * 3) == pytest.approx(1.0)
    assert ev.mean_pairwise_iou([box(0.2, 0.2), box(0.8, 0.8)]) == 0.0


def test_grounded_clip_records():
    t = np.tile(box(0.5, 0.5), (2, 1))
    g = ev.GroundedClip(t, t, ["cup", "lid"], [t, None], [0, None], [0.5, None])
    recs = g.to_records("x")
    assert len(recs) == 2 * 3
    assert {r["role"] for r in recs} == {"left", "right", "noun"}


def test_feature_file_round_trip(tmp_path, rng):
    records = [ev.FeatureRecord(f"c{i}", "v", i * 1.0, i + 0.5, rng.normal(size=16).astype(np.float32))
               for i in range(5)]
    path = ev.write_features(tmp_path / "f.jsonl", records)
    back = ev.load_features(path)
    for a, b in zip(records, back):
        assert a.clip_id == b.clip_id and np.array_equal(a.embedding, b.embedding)
    ev.write_features(tmp_path / "g.jsonl", back)
    assert (tmp_path / "g.jsonl").read_bytes() == path.read_bytes()
    (tmp_path / "bad.jsonl").write_text('{"clip_id": "a"}\n')
    with pytest.raises(ValueError, match=":1"):
        ev.load_features(tmp_path / "bad.jsonl")


def test_build_mcq_distractors(tiny_data):
    ds, _, _ = tiny_data
    stats = {}
    questions = ev.build_mcq(ds, "intra", n_candidates=3, seed=0, stats=stats)
    assert len(questions) + stats["skipped"] == len(ds)
    for q in questions:
        ans = q.candidates[q.answer]
        assert ds.records[ans].narration == q.query
        vids = {ds.records[j].video_id for j in q.candidates}
        assert len(vids) == 1
        keys = [(frozenset(ds.nouns[j]), frozenset(ds.verbs[j])) for j in q.candidates]
        assert keys.count(keys[q.answer]) == 1
    inter = ev.build_mcq(ds, "inter", n_candidates=3, seed=0)
    assert all(len({ds.records[j].video_id for j in q.candidates}) == 3 for q in inter)


def test_model_backed_helpers(tiny_data, tmp_path):
    from objaware.training import build_model
    from conftest import tiny_train_config
    ds, vocab, _ = tiny_data
    model = build_model(tiny_train_config(), len(vocab)).eval()
    g = ev.ground_clip(model, vocab, ds.frames(0)[0], ["cup", "cup"])
    assert g.left.shape == (4, 4) and len(set(g.queries)) == 2
    stacked = ev.ground_clip(model, vocab, np.repeat(ds.frames(0)[:1], 4, axis=0), ["cup", "cup"])
    np.testing.assert_array_equal(g.left, stacked.left)  # a single image is repeated over the clip
    hands_only = ev.ground_clip(model, vocab, ds.frames(0), [])
    assert hands_only.objects == []
    insts = ev.grounding_instances(ds, model, vocab, indices=[0, 1])
    assert all(i.pred_hands is not None for i in insts)
    nouns = ["cup", "plate", "lid"]
    forward = ev.ground_clip(model, vocab, ds.frames(0), nouns)
    backward = ev.ground_clip(model, vocab, ds.frames(0), nouns[::-1])
    for k, noun in enumerate(nouns):
        np.testing.assert_array_equal(forward.objects[k], backward.objects[2 - k])
    recs = ev.extract_features(model, ds, tmp_path / "f.jsonl", indices=[0, 0, 1])
    assert len(recs) == 3 and np.array_equal(recs[0].embedding, recs[1].embedding)
