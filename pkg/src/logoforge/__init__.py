"""Box-aware augmentation, detection post-processing and mAP evaluation
for few-shot logo detection."""

from .datamodel import (
    Annotation, BBox, Category, Dataset, DatasetError, Detection, ImageInfo,
    Sample, merge_datasets, split_dataset, validate_dataset,
)
from .coco_io import (
    CocoFormatError, ImageDecodeError, load_image, parse_coco, parse_detections,
    save_image, write_coco, write_detections,
)
from .geometry import (
    MixupParams, ScaleJitterParams, clip_and_filter, hflip, pad_to, resize,
    rotate90, scale_jitter, simple_mixup,
)
from .photometric import (
    ColorJitterParams, RandAugmentParams, adjust_bcsh, gaussian_blur,
    gaussian_noise, impulse_noise, invert, rand_augment, strong_color_jitter,
    swap_channels,
)
from .pipeline import (
    Pipeline, PipelineConfig, PipelineConfigError, StageSpec, ablate,
    apply_pipeline, build_pipeline, config_from_json, config_to_json,
    reference_recipe, run_dataset,
)
from .postprocess import (
    SuppressionParams, TtaVariant, iou, major_class_suppress, map_to_original,
    map_to_variant, nms, default_tta_variants, tta_fuse,
)
from .evaluation import EvalReport, average_precision, evaluate, match_detections

__version__ = "0.1.0"

__all__ = [
    "Annotation", "BBox", "Category", "Dataset", "DatasetError", "Detection",
    "ImageInfo", "Sample", "merge_datasets", "split_dataset",
    "validate_dataset", "CocoFormatError", "ImageDecodeError", "load_image",
    "parse_coco", "parse_detections", "save_image", "write_coco",
    "write_detections", "MixupParams", "ScaleJitterParams", "clip_and_filter",
    "hflip", "pad_to", "resize", "rotate90", "scale_jitter", "simple_mixup",
    "ColorJitterParams", "RandAugmentParams", "adjust_bcsh", "gaussian_blur",
    "gaussian_noise", "impulse_noise", "invert", "rand_augment",
    "strong_color_jitter", "swap_channels", "Pipeline", "PipelineConfig",
    "PipelineConfigError", "StageSpec", "ablate", "apply_pipeline",
    "build_pipeline", "config_from_json", "config_to_json", "reference_recipe",
    "run_dataset", "SuppressionParams", "TtaVariant", "iou",
    "major_class_suppress", "map_to_original", "map_to_variant", "nms",
    "default_tta_variants", "tta_fuse", "EvalReport", "average_precision",
    "evaluate", "match_detections",
]
