"""Declarative, seeded augmentation pipelines and parallel dataset runs.

Every random decision in a pass is drawn from a stream seeded by
``derive_seed(global_seed, image_id, pass_index, stage_index)``, so results
depend only on the config, the dataset and the seed, never on scheduling.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from . import geometry, photometric
from .coco_io import load_image, save_image
from .datamodel import Annotation, Dataset, ImageInfo, Sample

log = logging.getLogger(__name__)

_MASK64 = (1 << 64) - 1

STAGE_KINDS = (
    "scale_jitter", "rotate90", "hflip", "simple_mixup",
    "strong_color_jitter", "rand_augment", "resize_to", "pad_to",
)

PartnerProvider = Callable[[np.random.Generator], "Sample | None"]


class PipelineConfigError(ValueError):
    """Invalid pipeline configuration. ``where`` is a JSON-pointer-like path."""

    def __init__(self, where: str, message: str):
        super().__init__(f"{where}: {message}" if where else message)
        self.where = where


def splitmix64(x: int) -> int:
    """One SplitMix64 step: a bijective 64-bit mixing function."""
    z = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(*parts: int) -> int:
    """Fold integers into one 64-bit seed with SplitMix64.

    ``h = 0; for p in parts: h = splitmix64(h ^ (p mod 2**64))``.
    """
    h = 0
    for p in parts:
        h = splitmix64(h ^ (int(p) & _MASK64))
    return h


def stage_rng(global_seed: int, image_id: int, pass_index: int, stage_index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed(global_seed, image_id, pass_index, stage_index)))


@dataclass(frozen=True)
class StageSpec:
    kind: str
    probability: float = 1.0
    params: Mapping[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class PipelineConfig:
    stages: tuple[StageSpec, ...] = ()
    global_seed: int = 0
    resolution: int = 1200
    passes_per_image: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "stages", tuple(self.stages))

    def with_seed(self, seed: int) -> PipelineConfig:
        return dataclasses.replace(self, global_seed=seed)


def reference_recipe(resolution: int = 1472, global_seed: int = 0,
                     rotate_probability: float = 0.5) -> PipelineConfig:
    """Simple-Mixup, rotation, strong colour jitter, RandAugment(1, 10), final resize."""
    return PipelineConfig(
        stages=(
            StageSpec("simple_mixup", 1.0, {"alpha": 0.5, "min_ratio": 0.1, "max_ratio": 2.0}),
            StageSpec("rotate90", rotate_probability, {"choices": [1, 2, 3]}),
            StageSpec("strong_color_jitter", 1.0, {}),
            StageSpec("rand_augment", 1.0, {"n_ops": 1, "magnitude": 10}),
            StageSpec("resize_to", 1.0, {"size": resolution}),
        ),
        global_seed=global_seed,
        resolution=resolution,
    )


ABLATION_TAGS = {"ROT": "rotate90", "MIX": "simple_mixup", "SCJ": "strong_color_jitter",
                 "RA": "rand_augment"}


def ablate(cfg: PipelineConfig, tag: str) -> PipelineConfig:
    """Drop one augmentation (``ROT``, ``MIX``, ``SCJ`` or ``RA``).

    Removing Simple-Mixup swaps in plain scale jittering over the same
    ratio range rather than deleting the stage.
    """
    kind = ABLATION_TAGS[tag]
    stages = []
    for st in cfg.stages:
        if st.kind != kind:
            stages.append(st)
        elif kind == "simple_mixup":
            keep = {k: v for k, v in st.params.items() if k in ("min_ratio", "max_ratio", "interpolation")}
            stages.append(StageSpec("scale_jitter", st.probability, keep))
    return dataclasses.replace(cfg, stages=tuple(stages))


# config file ---------------------------------------------------------------

_CONFIG_KEYS = {"stages", "global_seed", "resolution", "passes_per_image"}
_STAGE_KEYS = {"kind", "probability", "params"}


def config_from_json(text: str) -> PipelineConfig:
    """Parse a pipeline config document, rejecting unknown fields.

    Layout::

        {"global_seed": 0, "resolution": 1472, "passes_per_image": 1,
         "stages": [{"kind": "rotate90", "probability": 0.5,
                     "params": {"choices": [1, 2, 3]}}, ...]}
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PipelineConfigError("", f"malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise PipelineConfigError("/", "config must be a JSON object")
    for key in doc:
        if key not in _CONFIG_KEYS:
            raise PipelineConfigError(f"/{key}", f"unknown field; expected one of {sorted(_CONFIG_KEYS)}")
    stages_doc = doc.get("stages", [])
    if not isinstance(stages_doc, list):
        raise PipelineConfigError("/stages", "must be an array")
    stages = []
    for i, st in enumerate(stages_doc):
        if not isinstance(st, dict):
            raise PipelineConfigError(f"/stages/{i}", "stage must be an object")
        for key in st:
            if key not in _STAGE_KEYS:
                raise PipelineConfigError(f"/stages/{i}/{key}", f"unknown field; expected one of {sorted(_STAGE_KEYS)}")
        if "kind" not in st:
            raise PipelineConfigError(f"/stages/{i}", "missing required field 'kind'")
        params = st.get("params", {})
        if not isinstance(params, dict):
            raise PipelineConfigError(f"/stages/{i}/params", "must be an object")
        stages.append(StageSpec(st["kind"], st.get("probability", 1.0), params))
    for key in ("global_seed", "resolution", "passes_per_image"):
        if key in doc and (isinstance(doc[key], bool) or not isinstance(doc[key], int)):
            raise PipelineConfigError(f"/{key}", "must be an integer")
    cfg = PipelineConfig(
        stages=tuple(stages),
        global_seed=doc.get("global_seed", 0),
        resolution=doc.get("resolution", 1200),
        passes_per_image=doc.get("passes_per_image", 1),
    )
    build_pipeline(cfg)
    return cfg


def config_to_json(cfg: PipelineConfig) -> str:
    return json.dumps({
        "global_seed": cfg.global_seed,
        "resolution": cfg.resolution,
        "passes_per_image": cfg.passes_per_image,
        "stages": [{"kind": s.kind, "probability": s.probability, "params": dict(s.params)}
                   for s in cfg.stages],
    }, indent=2)


# stage construction ------------------------------------------------------

StageFn = Callable[[Sample, np.random.Generator, "PartnerProvider | None"], Sample]


def _take(params: Mapping[str, Any], allowed: Sequence[str], where: str) -> dict[str, Any]:
    unknown = sorted(set(params) - set(allowed))
    if unknown:
        raise PipelineConfigError(f"{where}/params/{unknown[0]}",
                                  f"unknown parameter; expected one of {sorted(allowed)}")
    return dict(params)


def _ranges(params: dict[str, Any]) -> dict[str, Any]:
    return {k: tuple(v) if isinstance(v, list) else v for k, v in params.items()}


def _make_stage(spec: StageSpec, cfg: PipelineConfig, where: str) -> StageFn:
    kind, raw = spec.kind, spec.params

    if kind == "scale_jitter":
        p = _take(raw, ("min_ratio", "max_ratio", "interpolation"), where)
        interp = p.pop("interpolation", "bilinear")
        jitter = geometry.ScaleJitterParams(**p)

        def scale_stage(s, rng, partner):
            return geometry.scale_jitter(s, jitter.sample(rng), interp)
        _check_interp(interp, where)
        return scale_stage

    if kind == "rotate90":
        p = _take(raw, ("choices",), where)
        choices = tuple(p.get("choices", (1, 2, 3)))
        if not choices:
            raise PipelineConfigError(f"{where}/params/choices", "must be non-empty")
        for n in choices:
            geometry._check_rotation(n)

        def rotate_stage(s, rng, partner):
            return geometry.rotate90(s, choices[rng.integers(len(choices))])
        return rotate_stage

    if kind == "hflip":
        _take(raw, (), where)
        return lambda s, rng, partner: geometry.hflip(s)

    if kind == "simple_mixup":
        p = _take(raw, ("alpha", "min_ratio", "max_ratio", "interpolation"), where)
        interp = p.pop("interpolation", "bilinear")
        _check_interp(interp, where)
        alpha = p.pop("alpha", 0.5)
        params = geometry.MixupParams(alpha, geometry.ScaleJitterParams(**p))

        def mixup_stage(s, rng, partner):
            other = partner(rng) if partner is not None else None
            if other is None:
                raise ValueError(f"image {s.image_id}: mixup stage fired but no partner sample is available")
            ratios = (params.jitter.sample(rng), params.jitter.sample(rng))
            return geometry.simple_mixup(s, other, params, ratios, interp)
        return mixup_stage

    if kind == "strong_color_jitter":
        names = [f.name for f in dataclasses.fields(photometric.ColorJitterParams)]
        jp = photometric.ColorJitterParams(**_ranges(_take(raw, names, where)))

        def jitter_stage(s, rng, partner):
            return s.replace(image=photometric.strong_color_jitter(s.image, jp, rng))
        return jitter_stage

    if kind == "rand_augment":
        p = _take(raw, ("n_ops", "magnitude", "op_pool"), where)
        if "op_pool" in p:
            p["op_pool"] = tuple(p["op_pool"])
        rp = photometric.RandAugmentParams(**p)

        def ra_stage(s, rng, partner):
            return s.replace(image=photometric.rand_augment(s.image, rp, rng))
        return ra_stage

    if kind == "resize_to":
        p = _take(raw, ("size", "width", "height", "interpolation"), where)
        size = p.get("size", cfg.resolution)
        w, h = int(p.get("width", size)), int(p.get("height", size))
        if w < 1 or h < 1:
            raise PipelineConfigError(f"{where}/params", f"size must be >= 1, got {w}x{h}")
        interp = p.get("interpolation", "bilinear")
        _check_interp(interp, where)
        return lambda s, rng, partner: geometry.resize(s, w, h, interp)

    if kind == "pad_to":
        p = _take(raw, ("width", "height", "fill"), where)
        if "width" not in p or "height" not in p:
            raise PipelineConfigError(f"{where}/params", "pad_to needs 'width' and 'height'")
        w, h, fill = int(p["width"]), int(p["height"]), int(p.get("fill", 0))
        if not 0 <= fill <= 255:
            raise PipelineConfigError(f"{where}/params/fill", "must lie in [0, 255]")
        return lambda s, rng, partner: geometry.pad_to(s, w, h, fill)

    raise PipelineConfigError(f"{where}/kind", f"unknown stage kind {kind!r}; expected one of {list(STAGE_KINDS)}")


def _check_interp(interp: str, where: str) -> None:
    if interp not in ("bilinear", "nearest"):
        raise PipelineConfigError(f"{where}/params/interpolation", f"unknown interpolation {interp!r}")


@dataclass(frozen=True)
class Pipeline:
    config: PipelineConfig
    stages: tuple[StageFn, ...]

    @property
    def kinds(self) -> tuple[str, ...]:
        return tuple(s.kind for s in self.config.stages)

    def __len__(self) -> int:
        return len(self.stages)


def build_pipeline(cfg: PipelineConfig) -> Pipeline:
    if cfg.resolution < 1:
        raise PipelineConfigError("/resolution", f"must be >= 1, got {cfg.resolution}")
    if cfg.passes_per_image < 1:
        raise PipelineConfigError("/passes_per_image", f"must be >= 1, got {cfg.passes_per_image}")
    fns = []
    for i, spec in enumerate(cfg.stages):
        where = f"/stages/{i}"
        prob = spec.probability
        if isinstance(prob, bool) or not isinstance(prob, (int, float)) or not 0.0 <= prob <= 1.0:
            raise PipelineConfigError(f"{where}/probability", f"stage {i}: probability must lie in [0, 1], got {prob!r}")
        try:
            fns.append(_make_stage(spec, cfg, where))
        except PipelineConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise PipelineConfigError(where, f"stage {i} ({spec.kind}): {exc}") from exc
    return Pipeline(cfg, tuple(fns))


def apply_pipeline_traced(p: Pipeline, s: Sample, partner_provider: PartnerProvider | None = None,
                          pass_index: int = 0) -> tuple[Sample, tuple[bool, ...]]:
    """Like :func:`apply_pipeline` but also reports which stages fired."""
    seed = p.config.global_seed
    fired = []
    for i, (spec, fn) in enumerate(zip(p.config.stages, p.stages)):
        rng = stage_rng(seed, s.image_id, pass_index, i)
        hit = rng.random() < spec.probability
        fired.append(bool(hit))
        if hit:
            s = fn(s, rng, partner_provider)
    return geometry.clip_and_filter(s), tuple(fired)


def apply_pipeline(p: Pipeline, s: Sample, partner_provider: PartnerProvider | None = None,
                   pass_index: int = 0) -> Sample:
    """Run every stage in order; a stage fires when its first draw is below its probability."""
    return apply_pipeline_traced(p, s, partner_provider, pass_index)[0]


# dataset runs ------------------------------------------------------------

@dataclass
class RunResult:
    dataset: Dataset
    failures: list[tuple[int, str]]
    fire_counts: list[int]
    n_passes: int

    @property
    def ok(self) -> bool:
        return not self.failures

    def fire_rates(self) -> list[float]:
        return [c / self.n_passes if self.n_passes else 0.0 for c in self.fire_counts]


def _load_sample(info: ImageInfo, anns: Sequence[Annotation], image_root: Path) -> Sample:
    img = load_image(image_root / info.file_name)
    if (img.shape[1], img.shape[0]) != (info.width, info.height):
        raise ValueError(
            f"{info.file_name}: decoded size {img.shape[1]}x{img.shape[0]} does not match "
            f"annotated size {info.width}x{info.height}"
        )
    return Sample(img, anns, info.id)


def run_dataset(p: Pipeline, ds: Dataset, image_root: str | os.PathLike,
                out_root: str | os.PathLike, workers: int = 1) -> RunResult:
    """Augment every image ``passes_per_image`` times and write ``{image_id}_{pass}.png`` files.

    Per-image failures are collected, not raised. The returned dataset
    references the written files; its ids follow input order, then pass.
    """
    image_root, out_root = Path(image_root), Path(out_root)
    out_root.mkdir(parents=True, exist_ok=True)
    by_image = ds.annotations_by_image()
    infos = list(ds.images)
    passes = p.config.passes_per_image

    @lru_cache(maxsize=32)
    def cached(index: int) -> Sample:
        info = infos[index]
        return _load_sample(info, by_image.get(info.id, []), image_root)

    def task(key: tuple[int, int]):
        index, pass_index = key
        info = infos[index]

        def partner(rng: np.random.Generator) -> Sample | None:
            if len(infos) < 2:
                return None
            j = int(rng.integers(len(infos) - 1))
            return cached(j if j < index else j + 1)

        try:
            sample = cached(index)
            out, fired = apply_pipeline_traced(p, sample, partner, pass_index)
            name = f"{info.id}_{pass_index}.png"
            save_image(out.image, out_root / name)
        except Exception as exc:  # noqa: BLE001 - reported per image
            log.warning("image %s pass %d failed: %s", info.id, pass_index, exc)
            return key, None, str(exc)
        return key, (name, out, fired), None

    keys = [(i, k) for i in range(len(infos)) for k in range(passes)]
    if workers <= 1:
        results = [task(k) for k in keys]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(task, keys))

    images: list[ImageInfo] = []
    annotations: list[Annotation] = []
    failures: list[tuple[int, str]] = []
    fire_counts = [0] * len(p.stages)
    for (index, pass_index), payload, error in results:
        if payload is None:
            failures.append((infos[index].id, error or "unknown error"))
            continue
        name, out, fired = payload
        new_id = len(images) + 1
        images.append(ImageInfo(new_id, name, out.width, out.height))
        for a in out.annotations:
            annotations.append(Annotation(len(annotations) + 1, new_id, a.category_id, a.bbox))
        for i, f in enumerate(fired):
            fire_counts[i] += f
    # one failure entry per image, even when several passes failed
    seen: set[int] = set()
    failures = [f for f in failures if not (f[0] in seen or seen.add(f[0]))]
    return RunResult(Dataset(images, annotations, ds.categories), failures, fire_counts,
                     n_passes=len(results) - sum(1 for r in results if r[1] is None))
