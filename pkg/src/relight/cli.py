"""Command-line interface.

Subcommands: fit, render, transfer, lightpos, prompts, pipeline. Every
subcommand can read a JSON config (--config); explicit flags override
config fields. Exit codes: 0 success, 1 I/O error, 2 validation/format
error, 3 initialization error, 4 batch job finished with failed samples.
"""

from __future__ import annotations

import argparse
import sys

from .errors import InitializationError, RelightError, ValidationError
from .pipeline import (
    PipelineConfig,
    config_from_dict,
    load_config,
    run_config,
)

EXIT_IO = 1
EXIT_VALIDATION = 2
EXIT_INITIALIZATION = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relight",
        description="Point-light fitting, lighting transfer, and dataset synthesis.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="fit point lights to a lighting image")
    _add_config_arg(fit)
    fit.add_argument("--lighting", help="lighting image PFM")
    fit.add_argument("--albedo", help="albedo map PFM")
    fit.add_argument("--normal", help="normal map PFM")
    fit.add_argument("--depth", help="depth map PFM")
    fit.add_argument("--out", help="output lights JSON path")
    fit.add_argument("--n", type=int, help="number of point lights (default 20)")
    fit.add_argument("--max-iters", type=int, help="optimizer step limit")
    fit.add_argument("--learning-rate", type=float, help="Adam learning rate")
    fit.add_argument("--quantile", type=float, help="brightness quantile for seeding")
    fit.add_argument("--tol", type=float, help="relative-decrease stopping tolerance")
    fit.add_argument("--seed", type=int)

    render = sub.add_parser("render", help="render a stored light set over scene maps")
    _add_config_arg(render)
    render.add_argument("--lights", help="lights JSON")
    render.add_argument("--albedo")
    render.add_argument("--normal")
    render.add_argument("--depth")
    render.add_argument("--out", help="output PFM path (PNG preview written alongside)")

    transfer = sub.add_parser("transfer", help="relight a target scene under fitted lights")
    _add_config_arg(transfer)
    transfer.add_argument("--lights", help="lights JSON")
    transfer.add_argument("--fit-depth", help="depth map of the scene the lights were fitted on")
    transfer.add_argument("--albedo")
    transfer.add_argument("--normal")
    transfer.add_argument("--depth")
    transfer.add_argument("--out")

    lightpos = sub.add_parser("lightpos", help="synthesize light-positioning samples")
    _add_batch_args(lightpos)
    lightpos.add_argument("--image", help="source image PFM (alternative to config scenes)")
    lightpos.add_argument("--albedo")
    lightpos.add_argument("--normal")
    lightpos.add_argument("--depth")

    prompts = sub.add_parser("prompts", help="generate prompt-constraint samples")
    _add_batch_args(prompts)
    prompts.add_argument("--vocab", help="override vocabulary JSON")

    pipeline = sub.add_parser("pipeline", help="fit, transfer, composite, and caption")
    _add_batch_args(pipeline)

    return parser


def _add_config_arg(p):
    p.add_argument("--config", help="JSON config document")


def _add_batch_args(p):
    _add_config_arg(p)
    p.add_argument("--out", help="output dataset directory")
    p.add_argument("--count", type=int, help="number of samples")
    p.add_argument("--seed", type=int)
    p.add_argument("--parallelism", type=int, help="worker threads (capped by RELIGHT_THREADS)")


def _build_config(args) -> PipelineConfig:
    doc = {"job": args.command, "inputs": {}}
    if args.config:
        base = load_config(args.config)
        doc = {
            "job": base.job,
            "inputs": dict(base.inputs),
            "output": base.output,
            "output_dir": base.output_dir,
            "seed": base.seed,
            "count": base.count,
            "parallelism": base.parallelism,
            "fit": {
                "n_lights": base.fit.n_lights,
                "max_iters": base.fit.max_iters,
                "learning_rate": base.fit.learning_rate,
                "intensity_quantile": base.fit.intensity_quantile,
                "convergence_tol": base.fit.convergence_tol,
                "seed": base.fit.seed,
            },
        }
        if base.job != args.command:
            raise ValidationError(
                f"config is for job {base.job!r} but the {args.command!r} command was invoked"
            )

    single_shot = args.command in ("fit", "render", "transfer")
    overrides = {
        "lighting": "lighting", "albedo": "albedo", "normal": "normal",
        "depth": "depth", "lights": "lights", "fit_depth": "fit_depth",
        "image": "image", "vocab": "vocabulary",
    }
    for attr, key in overrides.items():
        value = getattr(args, attr, None)
        if value is not None:
            doc["inputs"][key] = value
    if args.command == "lightpos" and any(
        getattr(args, a, None) for a in ("image", "albedo", "normal", "depth")
    ):
        doc["inputs"]["scenes"] = [{
            "image": doc["inputs"].pop("image", None),
            "albedo": doc["inputs"].pop("albedo", None),
            "normal": doc["inputs"].pop("normal", None),
            "depth": doc["inputs"].pop("depth", None),
        }]

    out = getattr(args, "out", None)
    if out is not None:
        doc["output" if single_shot else "output_dir"] = out
    for attr in ("count", "parallelism"):
        value = getattr(args, attr, None)
        if value is not None:
            doc[attr] = value
    seed = getattr(args, "seed", None)
    if seed is not None:
        doc["seed"] = seed
        doc.setdefault("fit", {})["seed"] = seed

    fit_overrides = {
        "n": "n_lights", "max_iters": "max_iters", "learning_rate": "learning_rate",
        "quantile": "intensity_quantile", "tol": "convergence_tol",
    }
    for attr, key in fit_overrides.items():
        value = getattr(args, attr, None)
        if value is not None:
            doc.setdefault("fit", {})[key] = value

    return config_from_dict(doc)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _build_config(args)
        return run_config(config)
    except InitializationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INITIALIZATION
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except RelightError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
