"""Scene-text mask refinement and text-removal evaluation."""
from .errors import (
    DecodeError,
    DimensionMismatch,
    EmptyCorpus,
    EmptyDataset,
    ImageTooSmall,
    InvalidK,
    MaskTooSmall,
    NoPairsFound,
    NotFound,
    RatioInvalid,
    RootMissing,
    StageError,
    TextMrfError,
)
from .hfsmerge import MergeConfig, MrfOutput, SelectConfig, run_mrf
from .maskmix import MaskCorpus, MixRatios, SamplerState, compose_reference, sample_mask
from .morphref import RefineConfig, StructuringElement, refine_seed
from .strmetrics import MetricConfig, MetricValues, evaluate_dataset, evaluate_pair
from .superpixel import LabelMap, SlicParams, slic

__version__ = "0.1.0"

__all__ = [
    "DecodeError", "DimensionMismatch", "EmptyCorpus", "EmptyDataset", "ImageTooSmall", "InvalidK",
    "MaskTooSmall", "NoPairsFound", "NotFound", "RatioInvalid", "RootMissing", "StageError", "TextMrfError",
    "MergeConfig", "MrfOutput", "SelectConfig", "run_mrf",
    "MaskCorpus", "MixRatios", "SamplerState", "compose_reference", "sample_mask",
    "RefineConfig", "StructuringElement", "refine_seed",
    "MetricConfig", "MetricValues", "evaluate_dataset", "evaluate_pair",
    "LabelMap", "SlicParams", "slic",
]
