"""The command line entry point. Every subcommand prints its resolved configuration, does its work
and writes its outputs under --out."""

import argparse
import sys
from pathlib import Path

import msgspec

from multipod.constants import (
    CURVES_FILE_NAME,
    DEFAULT_OUT,
    RUNLOG_FILE_NAME,
    TEST_MANIFEST_FILE_NAME,
    TRAIN_MANIFEST_FILE_NAME,
    Sex,
)
from multipod.data_handling.manifest import (
    class_histogram,
    filter_by_sex,
    load_manifest,
    save_manifest,
    stratified_split,
)
from multipod.data_handling.packets.subject_record import Manifest, Roi
from multipod.data_handling.synthetic import SyntheticConfig, generate_synthetic
from multipod.display import TrainingDisplay
from multipod.errors import ConfigError, MultiPodError
from multipod.evaluation.evaluator import evaluate
from multipod.evaluation.report import export_report, render_curves
from multipod.model.checkpoint import load_checkpoint
from multipod.model.filters import build_bank, export_bank
from multipod.model.multipod_net import MultiPodConfig, build_model, param_count
from multipod.pipeline.image_ops import crop_roi, load_image, resize
from multipod.pipeline.patches import export_patches
from multipod.sweep import run_sweep
from multipod.training.trainer import TrainConfig, train
from multipod.utils import (
    VARIANT_ALIASES,
    arg_parser,
    check_seed,
    default_seed,
    parse_config_file,
)

MODEL_KEYS = (
    "variant",
    "fusion",
    "use_directional_filters",
    "trainable_filters",
    "use_age",
    "filter_sigma",
)
TRAIN_KEYS = (
    "lr0",
    "momentum",
    "weight_decay",
    "batch_size",
    "epochs",
    "milestones",
    "decay_factor",
    "patch_aug",
    "workers",
    "checkpoint_every",
)
POLICY_KEYS = ("max_dx", "max_dy", "magnitude", "num_ops", "width", "max_depth", "alpha")
RUN_KEYS = ("manifest", "test", "out", "seed", "sex", "policy")
CONFIG_KEYS = frozenset(MODEL_KEYS + TRAIN_KEYS + POLICY_KEYS + RUN_KEYS)
"""Keys a --config file may set."""


class RunSettings(msgspec.Struct, frozen=True):
    """
    Everything train and sweep need, after --config and the flags have been merged.
    """

    manifest: Path
    test: Path
    out: Path
    seed: int
    sex: Sex | None
    model: MultiPodConfig
    train: TrainConfig


def resolve_settings(args: argparse.Namespace, flag_keys: tuple[str, ...]) -> RunSettings:
    """
    Merges the --config file of train or sweep with the flags: flags that were given win over
    file values, which win over the defaults.
    :raises ConfigError: On unknown keys or missing manifests.
    :raises msgspec.ValidationError: On values of the wrong type.
    """
    values: dict[str, object] = {}
    if args.config is not None:
        values.update(parse_config_file(args.config))
        unknown = sorted(set(values) - CONFIG_KEYS)
        if unknown:
            raise ConfigError(f"{args.config}: unknown keys {', '.join(unknown)}")
    values.update(
        {key: getattr(args, key) for key in flag_keys if getattr(args, key, None) is not None}
    )

    variant = values.get("variant")
    if isinstance(variant, str) and variant.lower() in VARIANT_ALIASES:
        values["variant"] = VARIANT_ALIASES[variant.lower()]
    milestones = values.get("milestones")
    if isinstance(milestones, str):
        values["milestones"] = [int(m) for m in milestones.split(",") if m.strip()]

    seed = msgspec.convert(values.get("seed", default_seed()), int, strict=False)
    try:
        check_seed(seed)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    model_fields = {key: values[key] for key in MODEL_KEYS if key in values}
    policy_fields = {key: values[key] for key in POLICY_KEYS if key in values}
    if "policy" in values:
        policy_fields["kind"] = values["policy"]
    train_fields = {key: values[key] for key in TRAIN_KEYS if key in values}

    for key in ("manifest", "test"):
        if key not in values:
            raise ConfigError(f"--{key} is required (as a flag or in --config)")
    return msgspec.convert(
        {
            "manifest": values["manifest"],
            "test": values["test"],
            "out": values.get("out", DEFAULT_OUT),
            "seed": seed,
            "sex": values.get("sex"),
            "model": {**model_fields, "seed": seed},
            "train": {**train_fields, "seed": seed, "data_policy": policy_fields},
        },
        RunSettings,
        strict=False,
        dec_hook=_decode_path,
    )


def _decode_path(type_: type, obj: object) -> object:
    if type_ is Path and isinstance(obj, str | Path):
        return Path(obj)
    raise NotImplementedError(f"cannot convert {obj!r} to {type_}")


def _load_split(settings: RunSettings) -> tuple[Manifest, Manifest]:
    train_manifest = load_manifest(settings.manifest)
    test_manifest = load_manifest(settings.test)
    if settings.sex is not None:
        train_manifest = filter_by_sex(train_manifest, settings.sex)
        test_manifest = filter_by_sex(test_manifest, settings.sex)
    return train_manifest, test_manifest


# ------------------------------------ Subcommands ------------------------------------


def run_synth(args: argparse.Namespace, display: TrainingDisplay) -> int:
    """Generates a synthetic dataset."""
    options = {"noise_level": args.noise, "seed": args.seed}
    if args.with_roi:
        cfg = SyntheticConfig.with_stored_roi(args.per_stage, **options)
    else:
        cfg = SyntheticConfig(per_stage_count=args.per_stage, **options)
    display.banner("synth", {**msgspec.structs.asdict(cfg), "out": args.out})
    manifest, manifest_path = generate_synthetic(cfg, args.out)
    display.result("images", len(manifest))
    display.result("manifest", manifest_path)
    return 0


def run_split(args: argparse.Namespace, display: TrainingDisplay) -> int:
    """Splits a manifest into train.csv and test.csv."""
    display.banner(
        "split",
        {
            "manifest": args.manifest,
            "fraction": args.fraction,
            "seed": args.seed,
            "sex": args.sex or "all",
            "out": args.out,
        },
    )
    manifest = load_manifest(args.manifest)
    if args.sex is not None:
        manifest = filter_by_sex(manifest, args.sex)
    train_manifest, test_manifest = stratified_split(manifest, args.fraction, args.seed)
    out = Path(args.out)
    for name, part in (
        (TRAIN_MANIFEST_FILE_NAME, train_manifest),
        (TEST_MANIFEST_FILE_NAME, test_manifest),
    ):
        path = save_manifest(part, out / name)
        counts = " ".join(f"{stage}={n}" for stage, n in class_histogram(part).items())
        display.result(str(path), f"{len(part)} records ({counts})")
    return 0


def run_train(args: argparse.Namespace, display: TrainingDisplay) -> int:
    """Trains a network and writes its checkpoint, RunLog, summary and curves."""
    settings = resolve_settings(
        args,
        (
            "manifest",
            "test",
            "out",
            "seed",
            "sex",
            "epochs",
            "workers",
            "checkpoint_every",
            "policy",
            "patch_aug",
            *MODEL_KEYS,
        ),
    )
    train_manifest, test_manifest = _load_split(settings)
    model = build_model(settings.model)
    display.banner(
        "train",
        {
            "manifest": f"{settings.manifest} ({len(train_manifest)} records)",
            "test": f"{settings.test} ({len(test_manifest)} records)",
            "sex": settings.sex or "all",
            "seed": settings.seed,
            "model": settings.model,
            "parameters": param_count(model),
            "train": settings.train,
            "milestones": settings.train.schedule,
            "out": settings.out,
        },
    )
    _, run_log = train(
        model, train_manifest, test_manifest, settings.train, settings.out, display
    )
    render_curves(
        {settings.model.variant.value: settings.out / RUNLOG_FILE_NAME},
        settings.out / CURVES_FILE_NAME,
    )
    display.result("final test accuracy", f"{run_log.final.test_acc:.2%}")
    display.result(
        "best test accuracy", f"{run_log.best.test_acc:.2%} (epoch {run_log.best.epoch + 1})"
    )
    return 0


def run_eval(args: argparse.Namespace, display: TrainingDisplay) -> int:
    """Evaluates a checkpoint on a manifest and exports the report."""
    display.banner(
        "eval", {"checkpoint": args.checkpoint, "manifest": args.manifest, "out": args.out}
    )
    model = load_checkpoint(args.checkpoint)
    report = evaluate(model, load_manifest(args.manifest), workers=args.workers)
    export_report(report, args.out)
    display.result("accuracy", f"{report.accuracy:.2%} of {report.n}")
    display.result("macro F1", f"{report.macro_f1:.4f}")
    return 0


def run_sweep_command(args: argparse.Namespace, display: TrainingDisplay) -> int:
    """Trains every row of an ablation grid."""
    settings = resolve_settings(args, ("manifest", "test", "out", "seed", "epochs", "workers"))
    train_manifest, test_manifest = _load_split(settings)
    display.banner(
        "sweep",
        {
            "grid": args.grid,
            "seed": settings.seed,
            "model": settings.model,
            "train": settings.train,
            "out": settings.out,
        },
    )
    frame = run_sweep(
        args.grid,
        train_manifest,
        test_manifest,
        settings.model,
        settings.train,
        settings.out,
        display,
    )
    print(frame.to_string(index=False))
    return 0


def run_filters(args: argparse.Namespace, display: TrainingDisplay) -> int:
    """Exports the directional filter bank."""
    display.banner("filters", {"sigma": args.sigma, "out": args.out})
    paths = export_bank(build_bank(args.sigma), args.out)
    display.result("written", f"{len(paths)} files to {args.out}")
    return 0


def run_patches(args: argparse.Namespace, display: TrainingDisplay) -> int:
    """Exports the patches of one image and their filter responses."""
    display.banner("patches", {"image": args.image, "roi": args.roi or "none", "out": args.out})
    img = load_image(args.image)
    if args.roi is not None:
        try:
            x, y, width, height = (int(part) for part in args.roi.split(","))
        except ValueError:
            raise ConfigError(f"--roi must be x,y,width,height, got '{args.roi}'") from None
        img = crop_roi(img, Roi(x=x, y=y, width=width, height=height))
    paths = export_patches(resize(img), args.out, build_bank())
    display.result("written", f"{len(paths)} files to {args.out}")
    return 0


COMMANDS = {
    "synth": run_synth,
    "split": run_split,
    "train": run_train,
    "eval": run_eval,
    "sweep": run_sweep_command,
    "filters": run_filters,
    "patches": run_patches,
}


def run(argv: list[str] | None = None) -> int:
    """
    Runs one subcommand.
    :param argv: The arguments, without the program name.
    :return: 0 on success, 2 for bad flags or configuration, 1 for failures while running.
    """
    try:
        args = arg_parser(argv)
    except SystemExit as e:
        return int(e.code) if isinstance(e.code, int) else 2

    display = TrainingDisplay(quiet=getattr(args, "quiet", False))
    try:
        return COMMANDS[args.command](args, display)
    except (ConfigError, msgspec.ValidationError) as e:
        display.error(str(e))
        return 2
    except (MultiPodError, OSError, ValueError) as e:
        display.error(str(e))
        return 1


def run_cli() -> None:
    """Entry point of the `multipod` command."""
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    run_cli()
