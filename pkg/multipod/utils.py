"""File which contains a few basic utility functions which can be reused in the project."""

import argparse
import os
from pathlib import Path

import numpy as np
import torch

from multipod.constants import (
    DEFAULT_FILTER_SIGMA,
    DEFAULT_NOISE_LEVEL,
    DEFAULT_OUT,
    DEFAULT_SEED,
    DEFAULT_TRAIN_FRACTION,
    SEED_ENV_VAR,
    SEED_MASK,
    FusionKind,
    PodVariant,
    PolicyKind,
    Sex,
    SweepGrid,
)

VARIANT_ALIASES = {
    "singlepod": PodVariant.SINGLE,
    "resnet": PodVariant.SINGLE,
    "dupod": PodVariant.DU,
    "tripod": PodVariant.TRI,
    "quadpod": PodVariant.QUAD,
    "stacknet": PodVariant.STACK,
}
"""Long spellings accepted by --variant next to the enum values."""


def sample_rng(seed: int, epoch: int, index: int) -> np.random.Generator:
    """
    The generator of one training sample in one epoch. It only depends on its three keys, so
    the order or process in which samples are prepared cannot change what they look like.
    """
    return np.random.default_rng(np.random.SeedSequence([seed & SEED_MASK, epoch, index]))


def epoch_rng(seed: int, epoch: int) -> np.random.Generator:
    """The generator that shuffles the training set in one epoch."""
    return np.random.default_rng(np.random.SeedSequence([seed & SEED_MASK, epoch]))


def torch_generator(seed: int, epoch: int) -> torch.Generator:
    """The torch generator of the age noise in one epoch."""
    state = np.random.SeedSequence([seed & SEED_MASK, epoch]).generate_state(1, dtype=np.uint32)
    return torch.Generator().manual_seed(int(state[0]))


def check_seed(seed: int, source: str = "seed") -> int:
    """
    Seeds given by a user are 64-bit unsigned integers.
    :raises ValueError: Outside [0, SEED_MASK].
    """
    if not 0 <= seed <= SEED_MASK:
        raise ValueError(f"{source} must lie in [0, 2**64), got {seed}")
    return seed


def default_seed() -> int:
    """
    The seed used when none is given: MULTIPOD_SEED if it is set, otherwise DEFAULT_SEED.
    """
    value = os.environ.get(SEED_ENV_VAR, "").strip()
    if not value:
        return DEFAULT_SEED
    try:
        seed = int(value)
    except ValueError:
        raise ValueError(f"{SEED_ENV_VAR} must be an integer, got '{value}'") from None
    return check_seed(seed, SEED_ENV_VAR)


def parse_config_file(path: Path) -> dict[str, str]:
    """
    Reads a flat `key=value` file. Blank lines and everything after a `#` are ignored. Keys use
    the field names of the configuration structs, for example `use_age=false`.
    :return: Key -> raw string value, in file order.
    """
    values: dict[str, str] = {}
    for number, raw_line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ValueError(f"{path}:{number}: expected key=value, got '{raw_line}'")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


# ------------------------------------ Argument parsing ------------------------------------


def _non_negative_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text}")
    return value


def _seed(text: str) -> int:
    try:
        return check_seed(int(text))
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _variant(text: str) -> PodVariant:
    lowered = text.lower()
    if lowered in VARIANT_ALIASES:
        return VARIANT_ALIASES[lowered]
    try:
        return PodVariant(lowered)
    except ValueError:
        choices = ", ".join([*PodVariant, *VARIANT_ALIASES])
        raise argparse.ArgumentTypeError(
            f"unknown variant '{text}' (choose from {choices})"
        ) from None


def _add_seed(parser: argparse.ArgumentParser, default: int | None) -> None:
    parser.add_argument(
        "--seed",
        help=f"Seed of every random draw. Defaults to ${SEED_ENV_VAR}, or {DEFAULT_SEED}.",
        type=_seed,
        default=default,
    )


def _add_out(parser: argparse.ArgumentParser, default: Path | None = DEFAULT_OUT) -> None:
    parser.add_argument(
        "-o",
        "--out",
        help=f"Directory every output is written to. Defaults to {DEFAULT_OUT}.",
        type=Path,
        default=default,
    )


def _add_training_flags(parser: argparse.ArgumentParser) -> None:
    """Flags shared by train and sweep. Their defaults are None so --config values can apply."""
    parser.add_argument(
        "--manifest", help="Manifest of the training records.", type=Path, default=None
    )
    parser.add_argument(
        "--test",
        help="Manifest of the test records, evaluated after every epoch.",
        type=Path,
        default=None,
    )
    parser.add_argument("--epochs", help="Training epochs.", type=_positive_int, default=None)
    parser.add_argument(
        "--workers",
        help="Data loading worker processes. Results do not depend on this.",
        type=_non_negative_int,
        default=None,
    )
    parser.add_argument(
        "--config",
        help="Flat key=value file of options. Flags given on the command line override it.",
        type=Path,
        default=None,
    )
    parser.add_argument(
        "-q", "--quiet", help="Do not print a line per epoch.", action="store_true", default=False
    )


def arg_parser(argv: list[str] | None = None) -> argparse.Namespace:
    """Handles the command line arguments of the multipod command.

    :param argv: The arguments, without the program name. Defaults to sys.argv.
    :return: The parsed arguments. `command` names the subcommand.
    """
    parser = argparse.ArgumentParser(
        prog="multipod",
        description="Cervical vertebrae maturation staging with MultiPod networks.",
    )
    try:
        seed = default_seed()
    except ValueError as e:
        parser.error(str(e))
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="command")

    synth = subparsers.add_parser("synth", help="Generate a labeled synthetic dataset.")
    synth.add_argument(
        "--per-stage",
        help="Images generated per stage.",
        type=_positive_int,
        required=True,
    )
    _add_seed(synth, seed)
    synth.add_argument(
        "--noise",
        help=f"Standard deviation of the image noise. Defaults to {DEFAULT_NOISE_LEVEL:g}.",
        type=float,
        default=DEFAULT_NOISE_LEVEL,
    )
    synth.add_argument(
        "--with-roi",
        help="Emit larger radiographs with a stored region of interest instead of cropped ones.",
        action="store_true",
        default=False,
    )
    _add_out(synth)

    split = subparsers.add_parser("split", help="Split a manifest into train and test manifests.")
    split.add_argument("--manifest", help="The manifest to split.", type=Path, required=True)
    split.add_argument(
        "--fraction",
        help=f"Fraction of every stage used for training. Defaults to {DEFAULT_TRAIN_FRACTION}.",
        type=float,
        default=DEFAULT_TRAIN_FRACTION,
    )
    _add_seed(split, seed)
    split.add_argument(
        "--sex", help="Keep only subjects of this sex.", type=Sex, choices=list(Sex), default=None
    )
    _add_out(split)

    train = subparsers.add_parser("train", help="Train a MultiPod network.")
    _add_training_flags(train)
    train.add_argument(
        "--variant",
        help="Network variant: single, du, tri, quad or stack (tripod etc. also work). "
        "Defaults to tri.",
        type=_variant,
        default=None,
    )
    train.add_argument(
        "--fusion",
        help="Concatenate or add the pod features before the fusion layer. Defaults to concat.",
        type=FusionKind,
        choices=list(FusionKind),
        default=None,
    )
    train.add_argument(
        "--no-dirfilts",
        help="Feed the patches to the pods without the directional filter bank.",
        action="store_false",
        dest="use_directional_filters",
        default=None,
    )
    train.add_argument(
        "--freeze-filters",
        help="Keep the directional filters at their initial coefficients.",
        action="store_false",
        dest="trainable_filters",
        default=None,
    )
    train.add_argument(
        "--no-age",
        help="Do not feed the age to the fusion layer.",
        action="store_false",
        dest="use_age",
        default=None,
    )
    train.add_argument(
        "--policy",
        help="Whole-image augmentation policy. Defaults to translate-ac.",
        type=PolicyKind,
        choices=list(PolicyKind),
        default=None,
    )
    train.add_argument(
        "--no-patch-aug",
        help="Do not rotate and jitter the patches of training samples.",
        action="store_false",
        dest="patch_aug",
        default=None,
    )
    train.add_argument(
        "--checkpoint-every",
        help="Also write a checkpoint every k epochs.",
        type=_non_negative_int,
        default=None,
    )
    train.add_argument(
        "--sex",
        help="Train on subjects of this sex only.",
        type=Sex,
        choices=list(Sex),
        default=None,
    )
    _add_seed(train, None)
    _add_out(train, None)

    evaluate = subparsers.add_parser("eval", help="Evaluate a checkpoint on a manifest.")
    evaluate.add_argument("--checkpoint", help="The model to evaluate.", type=Path, required=True)
    evaluate.add_argument("--manifest", help="The records to classify.", type=Path, required=True)
    evaluate.add_argument(
        "--workers", help="Data loading worker processes.", type=_non_negative_int, default=0
    )
    _add_out(evaluate)

    sweep = subparsers.add_parser("sweep", help="Train and compare the rows of an ablation grid.")
    sweep.add_argument(
        "--grid",
        help="pods: every network variant; augment: every augmentation policy; "
        "filters: directional filter and augmentation ablation.",
        type=SweepGrid,
        choices=list(SweepGrid),
        required=True,
    )
    _add_training_flags(sweep)
    _add_seed(sweep, None)
    _add_out(sweep, None)

    filters = subparsers.add_parser("filters", help="Export the directional filter bank.")
    filters.add_argument(
        "--sigma",
        help=f"Gaussian scale of the kernels. Defaults to {DEFAULT_FILTER_SIGMA}.",
        type=float,
        default=DEFAULT_FILTER_SIGMA,
    )
    _add_out(filters)

    patches = subparsers.add_parser(
        "patches", help="Export the patches of an image and their filter responses."
    )
    patches.add_argument(
        "--image",
        help="A 77x35 region of interest, or any image together with --roi.",
        type=Path,
        required=True,
    )
    patches.add_argument(
        "--roi",
        help="Region of interest to crop first, as x,y,width,height.",
        type=str,
        default=None,
    )
    _add_out(patches)

    return parser.parse_args(argv)
