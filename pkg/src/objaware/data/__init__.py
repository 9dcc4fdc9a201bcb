from .dataset import Batch, ClipSample, Dataset, load_dataset, load_synthetic, sample_batch, uniform_frame_indices
from .schema import ClipRecord, FrameDetections, HandBox, ObjectBox, read_jsonl, write_jsonl
from .synthetic import SyntheticConfig, SyntheticRenderer, generate_synthetic
from .taxonomy import DEFAULT_REMOVAL, Group, PhraseDictionary, Taxonomy, extract_nouns, extract_verbs

__all__ = [
    "Batch", "ClipRecord", "ClipSample", "DEFAULT_REMOVAL", "Dataset", "FrameDetections", "Group",
    "HandBox", "ObjectBox", "PhraseDictionary", "SyntheticConfig", "SyntheticRenderer", "Taxonomy",
    "extract_nouns", "extract_verbs", "generate_synthetic", "load_dataset", "load_synthetic",
    "read_jsonl", "sample_batch", "uniform_frame_indices", "write_jsonl",
]
