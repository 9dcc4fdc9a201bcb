"""Command-line entry point.

Every subcommand resolves one run config from three layers, later layers
winning: built-in defaults, the JSON file given with ``--config``, then
explicit flags. The resolved config is written as ``resolved_config.json``
next to the outputs together with a ``summary.json`` metric record, and can
be passed back with ``--config`` to repeat the run.

Exit status: 0 on success, 2 for bad flags or configs, 1 for runtime errors.
"""

import argparse
import json
import logging
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import config as config_mod
from .config import TrainConfig, dump_json, to_jsonable
from .data.synthetic import SyntheticConfig

log = logging.getLogger("objaware")

COMMANDS = ("gen-data", "train", "grad-check", "eval-mcq", "eval-retrieval", "eval-classify",
            "eval-grounding", "ground", "extract-features")


class ConfigError(ValueError):
    pass


@dataclass
class PathsConfig:
    data: str = None
    checkpoint: str = None
    resume: str = None
    out: str = "."


@dataclass
class EvalConfig:
    mode: str = "predicted"
    seeds: int = 100
    split: str = "intra"
    candidates: int = 5
    single_frame: bool = False
    per_group: int = 200
    batch_size: int = 4
    clips: list = None

    def __post_init__(self):
        if self.mode not in ("predicted", "random", "gt_matching"):
            raise ValueError(f"eval.mode must be predicted, random or gt_matching, got {self.mode!r}")
        if self.split not in ("inter", "intra", "both"):
            raise ValueError(f"eval.split must be inter, intra or both, got {self.split!r}")
        if self.seeds < 1 or self.candidates < 2 or self.per_group < 1 or self.batch_size < 1:
            raise ValueError("eval.seeds, candidates, per_group and batch_size must be positive")


@dataclass
class RunConfig:
    command: str = None
    seed: int = 0
    log_level: str = "info"
    paths: PathsConfig = field(default_factory=PathsConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    synthetic: SyntheticConfig = field(default_factory=SyntheticConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    def to_dict(self):
        d = to_jsonable(self)
        d["train"] = self.train.to_dict()
        return d


config_mod._NESTED.update({
    (RunConfig, "paths"): PathsConfig,
    (RunConfig, "train"): TrainConfig,
    (RunConfig, "synthetic"): SyntheticConfig,
    (RunConfig, "eval"): EvalConfig,
})


def _set(d, dotted, value):
    *head, last = dotted.split(".")
    for k in head:
        d = d.setdefault(k, {})
    d[last] = value


# flag, config key, argparse options
_COMMON = [
    ("--seed", "seed", {"type": int}),
    ("--out", "paths.out", {}),
    ("--log-level", "log_level", {"choices": ["debug", "info", "warning", "error"]}),
]
_DATA = [("--data", "paths.data", {"help": "dataset directory"})]
_CKPT = [("--checkpoint", "paths.checkpoint", {})]
_MODEL = [
    ("--dim", "train.model.dim", {"type": int}),
    ("--heads", "train.model.heads", {"type": int}),
    ("--decoder-layers", "train.model.decoder_layers", {"type": int}),
    ("--num-object-queries", "train.model.num_object_queries", {"type": int}),
]
_LOSSES = [
    ("--lambda-word", "train.lambda_word", {"type": float}),
    ("--temperature", "train.temperature", {"type": float}),
    ("--no-box-loss", "train.use_box_loss", {"action": "store_false"}),
    ("--no-word-loss", "train.use_word_loss", {"action": "store_false"}),
    ("--no-hard-negatives", "train.use_hard_negatives", {"action": "store_false"}),
]
FLAGS = {
    "gen-data": [
        ("--clips", "synthetic.n_clips", {"type": int}),
        ("--clips-per-video", "synthetic.clips_per_video", {"type": int}),
        ("--split", "synthetic.split", {}),
        ("--frames", "synthetic.n_frames", {"type": int}),
        ("--frame-size", "synthetic.frame_size", {"type": int}),
    ],
    "train": _DATA + _MODEL + _LOSSES + [
        ("--epochs", "train.epochs", {"type": int}),
        ("--batch-size", "train.batch_size", {"type": int}),
        ("--lr", "train.lr", {"type": float}),
        ("--warmup-steps", "train.warmup_steps", {"type": int}),
        ("--freeze-backbone", "train.freeze_backbone", {"action": "store_true"}),
        ("--precision", "train.precision", {"choices": ["standard", "high"]}),
        ("--resume", "paths.resume", {}),
    ],
    "grad-check": _DATA + _CKPT + _MODEL + _LOSSES + [
        ("--batch-size", "eval.batch_size", {"type": int}),
        ("--per-group", "eval.per_group", {"type": int}),
    ],
    "eval-mcq": _DATA + _CKPT + [
        ("--split", "eval.split", {"choices": ["inter", "intra", "both"]}),
        ("--candidates", "eval.candidates", {"type": int}),
    ],
    "eval-retrieval": _DATA + _CKPT,
    "eval-classify": _DATA + _CKPT,
    "eval-grounding": _DATA + _CKPT + [
        ("--mode", "eval.mode", {"choices": ["predicted", "random", "gt_matching"]}),
        ("--seeds", "eval.seeds", {"type": int}),
        ("--single-frame", "eval.single_frame", {"action": "store_true"}),
    ],
    "ground": _DATA + _CKPT + [
        ("--clips", "eval.clips", {"type": lambda s: s.split(","), "help": "comma-separated clip ids"}),
        ("--single-frame", "eval.single_frame", {"action": "store_true"}),
    ],
    "extract-features": _DATA + _CKPT,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="objaware", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name in COMMANDS:
        p = sub.add_parser(name, help=_HANDLERS[name].__doc__.split("\n")[0])
        p.add_argument("--config", help="JSON run config; flags override its values")
        for flag, key, opts in _COMMON + FLAGS[name]:
            p.add_argument(flag, dest=key, default=argparse.SUPPRESS, **opts)
    return parser


def resolve_config(args):
    """Defaults, then the config file, then flags."""
    data = RunConfig().to_dict()
    if getattr(args, "config", None):
        try:
            loaded = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {args.config}: {e}") from None
        if not isinstance(loaded, dict):
            raise ConfigError(f"{args.config}: expected a JSON object")
        data = config_mod.merge(data, loaded)
    for key, value in vars(args).items():
        if "." in key or key in ("seed", "log_level"):
            _set(data, key, value)
    data["command"] = args.command
    try:
        cfg = config_mod._from_dict(RunConfig, data, "config")
    except (ValueError, TypeError) as e:
        raise ConfigError(str(e)) from None
    cfg.train.seed = cfg.seed
    return cfg


def _require(cfg, *names):
    for name in names:
        if getattr(cfg.paths, name) is None:
            raise ConfigError(f"--{name} is required for {cfg.command}")


def _out(cfg):
    out = Path(cfg.paths.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_data(cfg):
    from .data import load_synthetic

    return load_synthetic(cfg.paths.data)


def _vocab_for(cfg, dataset):
    from .encoders import Vocabulary

    path = Path(cfg.paths.data) / "vocab.txt"
    if path.exists():
        return Vocabulary.load(path)
    surfaces = [s for g in dataset.taxonomy.nouns.groups + dataset.taxonomy.verbs.groups for s in g.surfaces()]
    return Vocabulary.build([r.narration for r in dataset.records] + surfaces)


def _load_model(cfg):
    from .training import load_model

    model, train_cfg, vocab = load_model(cfg.paths.checkpoint)
    if vocab is None:
        raise ValueError(f"{cfg.paths.checkpoint} carries no vocabulary")
    return model, vocab


def cmd_gen_data(cfg):
    """Generate a synthetic clip dataset with clean and noisy labels."""
    from .data import generate_synthetic, load_synthetic

    out = generate_synthetic(cfg.synthetic, cfg.seed, _out(cfg))
    ds = load_synthetic(out)
    return {"clips": len(ds), "videos": len(ds.videos), **ds.coverage()}


def cmd_train(cfg):
    """Train a model and write checkpoints and per-step metrics."""
    from .training import train

    _require(cfg, "data")
    ds = _load_data(cfg)
    vocab = _vocab_for(cfg, ds)
    tic = time.perf_counter()
    result = train(ds, cfg.train, vocab, out_dir=_out(cfg), resume=cfg.paths.resume)
    last = result.metrics[-1] if result.metrics else {}
    return {"steps": len(result.metrics), "epochs": result.checkpoint.meta["epoch"],
            "final_total": last.get("total"), "final_losses": {k: last.get(k) for k in ("v2t", "t2v", "box", "word")},
            "wall_time_s": time.perf_counter() - tic, "checkpoint": str(Path(cfg.paths.out) / "last.ckpt")}


def cmd_grad_check(cfg):
    """Compare analytic and finite-difference gradients per parameter group."""
    from .config import ModelConfig
    from .data import sample_batch
    from .training import TextContext, build_model, gradient_check, load_model, set_determinism

    _require(cfg, "data")
    set_determinism(cfg.seed)
    ds = _load_data(cfg)
    vocab = _vocab_for(cfg, ds)
    cfg.train.precision = "high"
    if cfg.paths.checkpoint:
        model, _, ck_vocab = load_model(cfg.paths.checkpoint)
        model = model.double()
        vocab = ck_vocab or vocab
    else:
        model = build_model(cfg.train, len(vocab))
    model.set_backbone_trainable(not cfg.train.freeze_backbone)
    ctx = TextContext.from_taxonomy(vocab, ds.taxonomy)
    batch = sample_batch(ds, cfg.eval.batch_size, cfg.train.use_hard_negatives, np.random.default_rng(cfg.seed))
    report = gradient_check(model, batch, ctx, cfg.train, n_per_group=cfg.eval.per_group, seed=cfg.seed)
    return {"max_rel_error": report, "threshold": 1e-5, "passed": all(v < 1e-5 for v in report.values())}


def _mcq_splits(cfg):
    return ("inter", "intra") if cfg.eval.split == "both" else (cfg.eval.split,)


def cmd_eval_mcq(cfg):
    """Five-way multiple-choice text-to-clip accuracy (inter/intra video)."""
    from .evaluation import build_mcq, evaluate_mcq

    _require(cfg, "data", "checkpoint")
    ds = _load_data(cfg)
    model, vocab = _load_model(cfg)
    stats = {}
    questions = [q for split in _mcq_splits(cfg)
                 for q in build_mcq(ds, split, cfg.eval.candidates, cfg.seed, stats)]
    return {**evaluate_mcq(model, vocab, ds, questions), "skipped_clips": stats.get("skipped", 0)}


def cmd_eval_retrieval(cfg):
    """Multi-instance retrieval mAP and nDCG in both directions."""
    from .evaluation import evaluate_retrieval

    _require(cfg, "data", "checkpoint")
    ds = _load_data(cfg)
    model, vocab = _load_model(cfg)
    return evaluate_retrieval(model, vocab, ds)


def cmd_eval_classify(cfg):
    """Zero-shot action classification with clip max-pooling."""
    from .evaluation import classify, embed_clips, embed_texts

    _require(cfg, "data", "checkpoint")
    ds = _load_data(cfg)
    model, vocab = _load_model(cfg)
    actions = sorted({(v, n) for vs, ns in zip(ds.verbs, ds.nouns) for v in vs[:1] for n in ns[:1]})
    index = {a: i for i, a in enumerate(actions)}
    keep = [i for i in range(len(ds)) if ds.verbs[i] and ds.nouns[i]]
    labels = [index[(ds.verbs[i][0], ds.nouns[i][0])] for i in keep]
    v = embed_clips(model, ds, keep)
    t = embed_texts(model, vocab, [f"{verb} the {noun}" for verb, noun in actions])
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    t /= np.linalg.norm(t, axis=1, keepdims=True)
    # each clip stands for a one-clip video, so pooling is the identity here
    stats = {}
    result = classify([row[None] for row in v @ t.T], labels, len(actions), stats)
    return {**result, "classes": len(actions), "videos": len(keep), **stats}


def cmd_eval_grounding(cfg):
    """Hand and in-contact object localization accuracy."""
    from .evaluation import grounding_instances, localization_accuracy, random_baseline

    _require(cfg, "data")
    ds = _load_data(cfg)
    mode = cfg.eval.mode
    model = vocab = None
    if mode == "predicted":
        _require(cfg, "checkpoint")
        model, vocab = _load_model(cfg)
    instances = grounding_instances(ds, model, vocab, single_frame=cfg.eval.single_frame)
    stats = {}
    if mode == "random":
        mean, std = random_baseline(instances, cfg.eval.seeds, cfg.seed)
        localization_accuracy(instances, mode, cfg.seed, stats)
        return {"mode": mode, "accuracy": mean, "std": std, "seeds": cfg.eval.seeds, "targets": stats["targets"]}
    acc = localization_accuracy(instances, mode, cfg.seed, stats)
    return {"mode": mode, "accuracy": acc, "hands": stats["hands"], "objects": stats["objects"],
            "targets": stats["targets"]}


def cmd_ground(cfg):
    """Write per-frame hand and noun boxes for clips as JSON lines."""
    from .data import write_jsonl
    from .evaluation import ground_clips

    _require(cfg, "data", "checkpoint")
    ds = _load_data(cfg)
    model, vocab = _load_model(cfg)
    wanted = cfg.eval.clips or [r.clip_id for r in ds.records]
    missing = [c for c in wanted if c not in ds.index]
    if missing:
        raise ValueError(f"unknown clip ids: {missing[:5]}")
    records = []
    for start in range(0, len(wanted), 64):
        ids = wanted[start:start + 64]
        idx = [ds.index[c] for c in ids]
        if cfg.eval.single_frame:
            clips = [ds.frames(i)[0] for i in idx]
        else:
            clips = [ds.frames(i) for i in idx]
        for clip_id, g in zip(ids, ground_clips(model, vocab, clips, [ds.nouns[i] for i in idx])):
            records.extend(g.to_records(clip_id))
    path = _out(cfg) / "grounding.jsonl"
    write_jsonl(path, records)
    return {"clips": len(wanted), "records": len(records), "path": str(path)}


def cmd_extract_features(cfg):
    """Export the clip-level video embedding of every clip with timestamps."""
    from .evaluation import extract_features

    _require(cfg, "data", "checkpoint")
    ds = _load_data(cfg)
    model, _ = _load_model(cfg)
    path = _out(cfg) / "features.jsonl"
    records = extract_features(model, ds, path)
    return {"clips": len(records), "dim": int(records[0].embedding.shape[0]) if records else 0, "path": str(path)}


_HANDLERS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "grad-check": cmd_grad_check,
    "eval-mcq": cmd_eval_mcq,
    "eval-retrieval": cmd_eval_retrieval,
    "eval-classify": cmd_eval_classify,
    "eval-grounding": cmd_eval_grounding,
    "ground": cmd_ground,
    "extract-features": cmd_extract_features,
}


def _print_table(summary, prefix=""):
    for key, value in summary.items():
        if isinstance(value, dict):
            _print_table(value, f"{prefix}{key}.")
        elif isinstance(value, float):
            print(f"{prefix + key:<32} {value:.4f}")
        else:
            print(f"{prefix + key:<32} {value}")


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on bad flags
    try:
        cfg = resolve_config(args)
        if cfg.command == "gen-data" and cfg.synthetic.frame_size % 4:
            raise ConfigError("frame size must be a multiple of 4")
        logging.basicConfig(level=cfg.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
        handler = _HANDLERS[cfg.command]
        out = _out(cfg)
        if cfg.command != "gen-data":
            _require(cfg, "data")
    except ConfigError as e:
        parser.print_usage(sys.stderr)
        print(f"objaware: error: {e}", file=sys.stderr)
        return 2
    dump_json(cfg.to_dict(), out / "resolved_config.json")
    try:
        summary = handler(cfg)
    except ConfigError as e:
        parser.print_usage(sys.stderr)
        print(f"objaware: error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # noqa: BLE001 - reported as a runtime failure
        log.debug("failure", exc_info=True)
        print(f"objaware: {cfg.command} failed: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    summary = {"command": cfg.command, **summary}
    dump_json(summary, out / "summary.json")
    _print_table(summary)
    return 0


if __name__ == "__main__":
    sys.exit(main())
