"""Batch jobs: fit, render, transfer, light positioning, prompts, pipeline.

A job is described by one JSON config document (CLI flags override single
fields). Batch jobs emit a ``manifest.json`` listing every sample with its
derived seed, inputs, outputs, and output SHA-256 hashes; rerunning a job
with the same config and seed reproduces the manifest byte-for-byte. Wall
times live in separate telemetry files that are never listed in the
manifest. Failed samples are recorded and skipped; the job then exits
nonzero without aborting the rest.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ValidationError
from .fitter import FitConfig, fit_lights
from .lightpos import synthesize_edit_sequence
from .prompt_gen import load_vocabularies, sample_constraint
from .renderer import compose, composite_mask, shade_all
from .scene_io import (
    ImageF,
    SceneMaps,
    atomic_write_bytes,
    load_float_map,
    load_lights,
    save_float_map,
    save_lights,
    save_preview_png,
)
from .transfer import relight_background

JOBS = ("fit", "render", "transfer", "lightpos", "prompts", "pipeline")
EXIT_PARTIAL_FAILURE = 4
THREADS_ENV_VAR = "RELIGHT_THREADS"


@dataclass
class PipelineConfig:
    """One job description; ``inputs`` is interpreted per job kind."""

    job: str
    inputs: dict[str, Any] = field(default_factory=dict)
    output: str | None = None        # single-shot jobs: output file
    output_dir: str | None = None    # batch jobs: dataset directory
    seed: int = 0
    count: int = 1
    parallelism: int = 1
    fit: FitConfig = field(default_factory=FitConfig)

    def __post_init__(self):
        if self.job not in JOBS:
            raise ValidationError(f"unknown job {self.job!r}, expected one of {JOBS}")
        if self.count < 1:
            raise ValidationError(f"count must be >= 1, got {self.count}")
        if self.parallelism < 1:
            raise ValidationError(f"parallelism must be >= 1, got {self.parallelism}")


def load_config(path: str | Path) -> PipelineConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON: {exc}") from exc
    return config_from_dict(doc)


def config_from_dict(doc: dict[str, Any]) -> PipelineConfig:
    if "job" not in doc:
        raise ValidationError("config missing 'job'")
    try:
        fit = FitConfig(**doc.get("fit", {}))
    except TypeError as exc:
        raise ValidationError(f"bad 'fit' section: {exc}") from exc
    return PipelineConfig(
        job=doc["job"],
        inputs=doc.get("inputs", {}),
        output=doc.get("output"),
        output_dir=doc.get("output_dir"),
        seed=int(doc.get("seed", 0)),
        count=int(doc.get("count", 1)),
        parallelism=int(doc.get("parallelism", 1)),
        fit=fit,
    )


def derive_seed(master_seed: int, index: int) -> int:
    """Stable per-sample seed; independent streams for each sample index."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(index,))
    return int(ss.generate_state(1, np.uint64)[0])


def effective_parallelism(requested: int) -> int:
    """Requested worker count, capped by the RELIGHT_THREADS environment var."""
    cap = os.environ.get(THREADS_ENV_VAR)
    if cap is not None:
        try:
            requested = min(requested, int(cap))
        except ValueError as exc:
            raise ValidationError(f"{THREADS_ENV_VAR} must be an integer, got {cap!r}") from exc
    return max(1, requested)


# --------------------------------------------------------------------------
# Single-shot file operations

def run_fit_files(
    lighting: str | Path,
    albedo: str | Path,
    normal: str | Path,
    depth: str | Path,
    fit_config: FitConfig,
    out: str | Path,
) -> dict[str, Any]:
    """Fit lights to a lighting image; write lights JSON, preview, telemetry.

    All inputs are loaded before anything is written, so a failed load
    leaves no partial outputs.
    """
    lighting_img = load_float_map(lighting)
    scene = SceneMaps(
        albedo=load_float_map(albedo),
        normal=load_float_map(normal),
        depth=load_float_map(depth),
    )
    result = fit_lights(lighting_img, scene, fit_config)

    out = Path(out)
    save_lights(result.lights, out)
    recon = compose(scene.albedo, shade_all(result.lights, scene))
    save_preview_png(recon, _sibling(out, ".preview.png"))
    telemetry = {
        "final_error": result.final_error,
        "iterations_run": result.iterations_run,
        "wall_time": result.wall_time,
    }
    atomic_write_bytes(
        _sibling(out, ".telemetry.json"),
        (json.dumps(telemetry, indent=2, sort_keys=True) + "\n").encode("ascii"),
    )
    return telemetry


def run_render_files(
    lights: str | Path,
    albedo: str | Path,
    normal: str | Path,
    depth: str | Path,
    out: str | Path,
) -> None:
    """Render albedo * shading for a stored light set; write PFM + preview."""
    light_set = load_lights(lights)
    scene = SceneMaps(
        albedo=load_float_map(albedo),
        normal=load_float_map(normal),
        depth=load_float_map(depth),
    )
    rendered = compose(scene.albedo, shade_all(light_set, scene))
    out = Path(out)
    save_float_map(rendered, out)
    save_preview_png(rendered, out.with_suffix(".png"))


def run_transfer_files(
    lights: str | Path,
    fit_depth: str | Path,
    albedo: str | Path,
    normal: str | Path,
    depth: str | Path,
    out: str | Path,
) -> None:
    """Relight a target scene under lights fitted elsewhere; PFM + preview."""
    light_set = load_lights(lights)
    fit_depth_img = load_float_map(fit_depth)
    scene = SceneMaps(
        albedo=load_float_map(albedo),
        normal=load_float_map(normal),
        depth=load_float_map(depth),
    )
    relit = relight_background(light_set, fit_depth_img, scene)
    out = Path(out)
    save_float_map(relit, out)
    save_preview_png(relit, out.with_suffix(".png"))


def _sibling(path: Path, tail: str) -> Path:
    return path.with_name(path.stem + tail)


# --------------------------------------------------------------------------
# Batch jobs

def run_config(config: PipelineConfig) -> int:
    """Dispatch a config to its job; returns the process exit code (0 = ok)."""
    if config.job == "fit":
        _require(config.output, "output")
        inp = _require_inputs(config.inputs, ["lighting", "albedo", "normal", "depth"])
        run_fit_files(*(inp[k] for k in ("lighting", "albedo", "normal", "depth")),
                      fit_config=config.fit, out=config.output)
        return 0
    if config.job == "render":
        _require(config.output, "output")
        inp = _require_inputs(config.inputs, ["lights", "albedo", "normal", "depth"])
        run_render_files(inp["lights"], inp["albedo"], inp["normal"], inp["depth"],
                         out=config.output)
        return 0
    if config.job == "transfer":
        _require(config.output, "output")
        inp = _require_inputs(config.inputs, ["lights", "fit_depth", "albedo", "normal", "depth"])
        run_transfer_files(inp["lights"], inp["fit_depth"], inp["albedo"], inp["normal"],
                           inp["depth"], out=config.output)
        return 0
    _require(config.output_dir, "output_dir")
    if config.job == "prompts":
        return _run_batch(config, _prompts_sample, shared=_prompts_shared(config))
    if config.job == "lightpos":
        return _run_batch(config, _lightpos_sample, shared=_lightpos_shared(config))
    return _run_batch(config, _pipeline_sample, shared=_pipeline_shared(config))


def _require(value, name):
    if not value:
        raise ValidationError(f"config field {name!r} is required for this job")


def _require_inputs(inputs: dict, keys: list[str]) -> dict:
    missing = [k for k in keys if not inputs.get(k)]
    if missing:
        raise ValidationError(f"config inputs missing {missing}")
    return inputs


def _run_batch(config: PipelineConfig, sample_fn, shared) -> int:
    """Run ``sample_fn`` for every sample index, then write the manifest."""
    out_root = Path(config.output_dir)
    (out_root / "samples").mkdir(parents=True, exist_ok=True)

    entries: list[dict] = []
    failures: list[dict] = []

    def run_one(index: int) -> dict:
        sample_id = f"sample-{index:04d}"
        sample_seed = derive_seed(config.seed, index)
        return sample_fn(config, shared, out_root, sample_id, sample_seed, index)

    workers = effective_parallelism(config.parallelism)
    if workers == 1:
        results = []
        for i in range(config.count):
            try:
                results.append((i, run_one(i), None))
            except Exception as exc:  # per-sample isolation
                results.append((i, None, exc))
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(run_one, i) for i in range(config.count)]
            results = []
            for i, fut in enumerate(futures):
                try:
                    results.append((i, fut.result(), None))
                except Exception as exc:
                    results.append((i, None, exc))

    for i, entry, exc in results:
        if exc is None:
            entries.append(entry)
        else:
            failures.append({"id": f"sample-{i:04d}", "error": f"{type(exc).__name__}: {exc}"})

    manifest = {
        "job": config.job,
        "seed": config.seed,
        "count": config.count,
        "samples": (shared.get("extra_entries", []) if shared else []) + entries,
        "failures": failures,
    }
    atomic_write_bytes(
        out_root / "manifest.json",
        (json.dumps(manifest, indent=2, sort_keys=True) + "\n").encode("utf-8"),
    )
    return EXIT_PARTIAL_FAILURE if failures else 0


def _manifest_entry(out_root: Path, sample_id: str, seed: int, inputs: list[str],
                    outputs: list[Path]) -> dict:
    rels = sorted(str(p.relative_to(out_root)) for p in outputs)
    return {
        "id": sample_id,
        "seed": seed,
        "inputs": inputs,
        "outputs": rels,
        "sha256": {rel: _sha256(out_root / rel) for rel in rels},
    }


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_json(path: Path, doc) -> None:
    atomic_write_bytes(path, (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode("utf-8"))


# ---- prompts job ----------------------------------------------------------

def _prompts_shared(config: PipelineConfig) -> dict:
    hierarchy, _ = load_vocabularies(config.inputs.get("vocabulary"))
    return {"hierarchy": hierarchy}


def _prompts_sample(config, shared, out_root, sample_id, seed, index) -> dict:
    constraint = sample_constraint(shared["hierarchy"], seed)
    path = out_root / "samples" / f"{sample_id}.json"
    _write_json(path, {
        "id": sample_id,
        "seed": seed,
        "selected": [[cat, word] for cat, word in constraint.selected],
        "question": constraint.question,
    })
    return _manifest_entry(out_root, sample_id, seed, [], [path])


# ---- lightpos job ----------------------------------------------------------

class _SceneCache:
    """Lazy, thread-safe scene loading so one unreadable file only fails the
    samples that reference it. Record structure is still validated eagerly:
    a malformed config is a job error, not a sample error."""

    def __init__(self, records: list[dict], need_mask: bool):
        keys = ("image", "albedo", "normal", "depth") + (("mask",) if need_mask else ())
        for i, rec in enumerate(records):
            missing = [k for k in keys if not rec.get(k)]
            if missing:
                raise ValidationError(f"scene record {i} missing {missing}")
        self.records = records
        self.need_mask = need_mask
        self._loaded: dict[int, tuple] = {}
        self._lock = threading.Lock()

    def __len__(self):
        return len(self.records)

    def get(self, index: int) -> tuple:
        with self._lock:
            if index not in self._loaded:
                self._loaded[index] = _load_scene_record(self.records[index], self.need_mask)
            return self._loaded[index]

    def paths(self, index: int) -> list[str]:
        return sorted(str(v) for v in self.records[index].values())


def _lightpos_shared(config: PipelineConfig) -> dict:
    _, vocab = load_vocabularies(config.inputs.get("vocabulary"))
    scenes = config.inputs.get("scenes")
    if not scenes:
        raise ValidationError("lightpos job needs inputs.scenes: [{image, albedo, normal, depth}]")
    return {"vocab": vocab, "scenes": _SceneCache(scenes, need_mask=False)}


def _lightpos_sample(config, shared, out_root, sample_id, seed, index) -> dict:
    scene_idx = index % len(shared["scenes"])
    source, scene, _ = shared["scenes"].get(scene_idx)
    sample = synthesize_edit_sequence(source, scene, shared["vocab"], seed)

    sample_dir = out_root / "samples" / sample_id
    sample_dir.mkdir(parents=True, exist_ok=True)
    pfm = sample_dir / "edited.pfm"
    png = sample_dir / "edited.png"
    sidecar = sample_dir / "sample.json"
    save_float_map(sample.edited_image, pfm)
    save_preview_png(sample.edited_image, png)
    _write_json(sidecar, {
        "id": sample_id,
        "seed": seed,
        "scene": scene_idx,
        "text": sample.text,
        "edits": [
            {
                "action": e.action,
                "cell": e.cell,
                "target_cell": e.target_cell,
                "color_name": e.color_name,
                "light": {
                    "color": list(e.light.color),
                    "position": list(e.light.position),
                    "intensity": e.light.intensity,
                    "ellipsoid_ratio": e.light.ellipsoid_ratio,
                    "diffuse_exponent": e.light.diffuse_exponent,
                },
            }
            for e in sample.edits
        ],
    })
    return _manifest_entry(out_root, sample_id, seed, shared["scenes"].paths(scene_idx),
                           [pfm, png, sidecar])


# ---- pipeline job ----------------------------------------------------------

def _pipeline_shared(config: PipelineConfig) -> dict:
    hierarchy, _ = load_vocabularies(config.inputs.get("vocabulary"))
    lighting_recs = config.inputs.get("lighting_scenes")
    target_recs = config.inputs.get("target_scenes")
    if not lighting_recs or not target_recs:
        raise ValidationError(
            "pipeline job needs inputs.lighting_scenes and inputs.target_scenes"
        )
    out_root = Path(config.output_dir)
    lights_dir = out_root / "lights"
    lights_dir.mkdir(parents=True, exist_ok=True)
    telemetry_dir = out_root / "telemetry"
    telemetry_dir.mkdir(parents=True, exist_ok=True)

    fits = []
    extra_entries = []
    for i, rec in enumerate(lighting_recs):
        image, scene, _ = _load_scene_record(rec, need_mask=False)
        started = time.perf_counter()
        result = fit_lights(image, scene, config.fit)
        fit_id = f"fit-{i:04d}"
        lights_path = lights_dir / f"{fit_id}.json"
        save_lights(result.lights, lights_path)
        recon = compose(scene.albedo, shade_all(result.lights, scene))
        preview_path = lights_dir / f"{fit_id}.preview.png"
        save_preview_png(recon, preview_path)
        # wall times are telemetry, never part of the manifest
        _write_json(telemetry_dir / f"{fit_id}.json", {
            "final_error": result.final_error,
            "iterations_run": result.iterations_run,
            "wall_time": result.wall_time,
            "total_time": time.perf_counter() - started,
        })
        fits.append({"lights": result.lights, "fit_depth": scene.depth})
        extra_entries.append(_manifest_entry(
            out_root, fit_id, config.fit.seed,
            sorted(str(v) for v in rec.values()), [lights_path, preview_path],
        ))

    return {
        "hierarchy": hierarchy,
        "fits": fits,
        "targets": _SceneCache(target_recs, need_mask=True),
        "extra_entries": extra_entries,
    }


def _pipeline_sample(config, shared, out_root, sample_id, seed, index) -> dict:
    fits = shared["fits"]
    targets = shared["targets"]
    fit = fits[index % len(fits)]
    scene_idx = index % len(targets)
    source, target_scene, mask = targets.get(scene_idx)

    relit_bg = relight_background(fit["lights"], fit["fit_depth"], target_scene)
    target = composite_mask(source, relit_bg, mask)
    constraint = sample_constraint(shared["hierarchy"], seed)

    sample_dir = out_root / "samples" / sample_id
    sample_dir.mkdir(parents=True, exist_ok=True)
    outputs = []
    for name, img in (("source", source), ("target", target)):
        pfm = sample_dir / f"{name}.pfm"
        png = sample_dir / f"{name}.png"
        save_float_map(img, pfm)
        save_preview_png(img, png)
        outputs += [pfm, png]
    sidecar = sample_dir / "sample.json"
    _write_json(sidecar, {
        "id": sample_id,
        "seed": seed,
        "lighting": index % len(fits),
        "scene": index % len(targets),
        "text": constraint.question,
        "selected": [[cat, word] for cat, word in constraint.selected],
    })
    outputs.append(sidecar)
    return _manifest_entry(out_root, sample_id, seed, targets.paths(scene_idx), outputs)


def _load_scene_record(rec: dict, need_mask: bool):
    """Load one {image, albedo, normal, depth[, mask]} record from disk."""
    for key in ("image", "albedo", "normal", "depth"):
        if not rec.get(key):
            raise ValidationError(f"scene record missing {key!r}")
    image = load_float_map(rec["image"])
    scene = SceneMaps(
        albedo=load_float_map(rec["albedo"]),
        normal=load_float_map(rec["normal"]),
        depth=load_float_map(rec["depth"]),
    )
    mask = None
    if need_mask:
        if not rec.get("mask"):
            raise ValidationError("target scene record missing 'mask'")
        mask = load_float_map(rec["mask"])
    return image, scene, mask
