"""Contains the constants used in the multipod package"""

from enum import StrEnum
from pathlib import Path

# -------------------------------------------------------
# Labels
# -------------------------------------------------------


class Stage(StrEnum):
    """
    Enum that represents the six cervical vertebrae maturation stages. The declaration order is the
    ordinal order CS1 < ... < CS6.
    """

    CS1 = "CS1"
    CS2 = "CS2"
    CS3 = "CS3"
    CS4 = "CS4"
    CS5 = "CS5"
    CS6 = "CS6"

    @property
    def index(self) -> int:
        """The ordinal index of the stage, 0 for CS1 through 5 for CS6."""
        return STAGES.index(self)

    @classmethod
    def from_index(cls, index: int) -> "Stage":
        """Returns the stage with the given ordinal index."""
        return STAGES[index]


STAGES: tuple[Stage, ...] = tuple(Stage)
"""All stages in ordinal order."""
NUM_STAGES = len(STAGES)
"""Number of output classes of the network."""


class Sex(StrEnum):
    """
    Enum that represents the sex of a subject, as written in the manifest.
    """

    FEMALE = "F"
    MALE = "M"


# -------------------------------------------------------
# Dataset Configuration
# -------------------------------------------------------

MANIFEST_COLUMNS = (
    "image_path",
    "sex",
    "age_years",
    "stage",
    "roi_x",
    "roi_y",
    "roi_w",
    "roi_h",
)
"""The exact header row of a manifest CSV file."""

MIN_AGE_YEARS = 4.0
"""Youngest subject in the radiograph collection. Ages below this only appear in synthetic data."""
MAX_AGE_YEARS = 29.0
"""Oldest subject in the radiograph collection."""

DEFAULT_TRAIN_FRACTION = 0.8
"""Fraction of every stage that goes to the training split."""

SYNTHETIC_IMAGE_SIZE = (77, 35)
"""(height, width) of synthetic images emitted already cropped to the region of interest."""
SYNTHETIC_ROI_IMAGE_SIZE = (154, 70)
"""(height, width) of synthetic images emitted with a stored region of interest."""
SYNTHETIC_ROI = (4, 8, 62, 138)
"""(x, y, width, height) of the spine region inside a SYNTHETIC_ROI_IMAGE_SIZE image."""
DEFAULT_NOISE_LEVEL = 8.0
"""Standard deviation, in intensity units, of the additive noise on synthetic images."""
DEFAULT_AGE_MODEL = (8.0, 1.5, 1.0)
"""(base_years, per_stage_years, jitter_years) used to draw synthetic ages."""
SYNTHETIC_BACKGROUND = 40.0
"""Intensity of the soft tissue around the synthetic vertebrae."""
SYNTHETIC_BONE = 200.0
"""Intensity of a synthetic vertebral body."""
SYNTHETIC_SUPERSAMPLING = 4
"""Each synthetic pixel is the mean of SUPERSAMPLING x SUPERSAMPLING sub-samples (anti-aliasing)."""

IMAGES_DIR_NAME = "images"
"""Sub-directory that holds the images of a generated dataset."""
MANIFEST_FILE_NAME = "manifest.csv"
"""Name of the manifest written by the synthetic generator."""
TRAIN_MANIFEST_FILE_NAME = "train.csv"
TEST_MANIFEST_FILE_NAME = "test.csv"

# -------------------------------------------------------
# Pipeline Configuration
# -------------------------------------------------------

ROI_HEIGHT = 77
"""Height every region of interest is resized to."""
ROI_WIDTH = 35
"""Width every region of interest is resized to."""
PATCH_SIZE = 35
"""Side of a square vertebra patch."""
NUM_PATCHES = 3
"""Patches per image, top to bottom: C2, C3, C4."""
MAX_INTENSITY = 255.0
"""Top of the canonical intensity range [0, 255]."""

DEFAULT_MAX_TRANSLATE_PX = 3
"""Largest shift, per axis, drawn by random translation."""
PATCH_ROTATION_DEGREES = 5.0
"""Patch rotations are drawn uniformly in [-PATCH_ROTATION_DEGREES, PATCH_ROTATION_DEGREES]."""
MAX_PATCH_ROTATION_DEGREES = 15.0
"""Largest rotation a patch may receive."""
JITTER_LOW = 0.8
"""Smallest multiplicative grayscale jitter factor."""
JITTER_HIGH = 1.2
"""Largest multiplicative grayscale jitter factor."""

RANDAUGMENT_NUM_OPS = 2
"""Operations applied per image by the RandAugment-style policy."""
DEFAULT_MAGNITUDE = 5.0
"""Default magnitude, on a 0-10 scale, of the RandAugment-style and AugMix-style policies."""
MAX_MAGNITUDE = 10.0
"""Top of the magnitude scale."""
MAX_OP_TRANSLATE_PX = 6
"""Shift, in pixels, at full magnitude."""
MAX_OP_ROTATION_DEGREES = 15.0
"""Rotation, in degrees, at full magnitude."""
MAX_OP_JITTER = 0.5
"""Deviation of the jitter factor from 1 at full magnitude."""
AUGMIX_WIDTH = 3
"""Number of augmentation chains mixed by the AugMix-style policy."""
AUGMIX_MAX_DEPTH = 3
"""Longest chain of the AugMix-style policy."""
AUGMIX_ALPHA = 1.0
"""Dirichlet and Beta concentration of the AugMix-style mixing weights."""


class PolicyKind(StrEnum):
    """
    Enum that represents the whole-image augmentation policies. The values are the CLI spellings.
    """

    NONE = "none"
    """No augmentation, the image is passed through."""
    TRANSLATE_AUTOCONTRAST = "translate-ac"
    """Random translation followed by AutoContrast."""
    RANDAUGMENT = "randaug"
    """Two random grayscale-safe operations at a fixed magnitude."""
    AUGMIX = "augmix"
    """Convex mix of short augmentation chains with the original."""


# -------------------------------------------------------
# Directional Filter Configuration
# -------------------------------------------------------

NUM_ORIENTATIONS = 8
"""Orientations in the directional filter bank, spaced by 180 / NUM_ORIENTATIONS degrees."""
FILTER_SIZE = 7
"""Side of a directional kernel."""
DEFAULT_FILTER_SIGMA = 1.5
"""Gaussian scale, in pixels, of the directional kernels."""
FILTERS_FILE_NAME = "filters.csv"
"""Coefficients written by the filters command."""
FILTER_TILE_SCALE = 8
"""Enlargement of the exported kernel tiles, in pixels per coefficient."""

# -------------------------------------------------------
# Model Configuration
# -------------------------------------------------------


class PodVariant(StrEnum):
    """
    Enum that represents the MultiPod network variants. The values are the CLI spellings.
    """

    SINGLE = "single"
    """One pod on the C2 patch."""
    DU = "du"
    """Two pods on the C2 and C3 patches."""
    TRI = "tri"
    """Three pods, one per vertebra patch."""
    QUAD = "quad"
    """Four pods, the fourth sees the C3 patch again."""
    STACK = "stack"
    """Three pods, each sees all three patches stacked as channels."""


POD_ROUTING: dict[PodVariant, tuple[int, ...]] = {
    PodVariant.SINGLE: (0,),
    PodVariant.DU: (0, 1),
    PodVariant.TRI: (0, 1, 2),
    PodVariant.QUAD: (0, 1, 2, 1),
    PodVariant.STACK: (0, 1, 2),
}
"""For each variant, the patch index each pod receives. StackNet pods receive the whole stack, so
only the length of its entry (the pod count) is used."""


class FusionKind(StrEnum):
    """
    Enum that represents how the pooled pod features are combined before the fusion layer.
    """

    CONCAT = "concat"
    """Features of every pod side by side, pod 0 first."""
    ADD = "add"
    """Element-wise sum of the pod features."""


class SweepGrid(StrEnum):
    """
    Enum that represents the ablation grids of the sweep command.
    """

    PODS = "pods"
    """Every network variant, with its parameter count."""
    AUGMENT = "augment"
    """Every whole-image augmentation policy on a TriPod network."""
    FILTERS = "filters"
    """Directional filters, image augmentation and patch augmentation switched on and off."""


class Mode(StrEnum):
    """
    Enum that represents whether a forward pass is for training or evaluation.
    """

    TRAIN = "train"
    EVAL = "eval"


STAGE_WIDTHS = (16, 32, 64)
"""Channels of the three residual stages of a pod."""
BLOCKS_PER_STAGE = 3
"""Residual blocks per stage."""
POD_FEATURES = STAGE_WIDTHS[-1]
"""Length of the pooled feature vector of a pod."""

AGE_SCALE = 0.1
"""Years are multiplied by this before entering the fusion layer."""
AGE_REPEAT = 6
"""The scaled age is repeated this many times in the fusion input."""
AGE_NOISE_VARIANCE = 0.01
"""Variance of the zero mean Gaussian noise added to the age vector while training."""

# -------------------------------------------------------
# Training Configuration
# -------------------------------------------------------

LEARNING_RATE = 0.1
"""Initial learning rate."""
MOMENTUM = 0.9
WEIGHT_DECAY = 0.0001
BATCH_SIZE = 32
EPOCHS = 100
MILESTONES = (25, 50, 75)
"""Epochs at which the learning rate is divided by ten, for a 100 epoch run. Shorter or longer runs
scale these proportionally."""
DECAY_FACTOR = 0.1
REFERENCE_EPOCHS = 100
"""The run length the milestones are written for."""

RUNLOG_COLUMNS = ("epoch", "train_loss", "train_acc", "test_acc", "lr")
"""Header of the per-epoch RunLog CSV."""
RUNLOG_FILE_NAME = "runlog.csv"
SUMMARY_FILE_NAME = "summary.json"
CHECKPOINT_FILE_NAME = "model.ckpt"
CURVES_FILE_NAME = "curves.png"

# -------------------------------------------------------
# Checkpoint Configuration
# -------------------------------------------------------

CHECKPOINT_MAGIC = "MULTIPOD-CHECKPOINT"
"""First line of every checkpoint file."""
CHECKPOINT_FORMAT_VERSION = 1
"""Bumped whenever the layout of a checkpoint changes. Older files are rejected."""

# -------------------------------------------------------
# Evaluation Configuration
# -------------------------------------------------------

REPORT_FILE_NAME = "report.json"
CONFUSION_FILE_NAME = "confusion.csv"
HEATMAP_FILE_NAME = "confusion.png"
SWEEP_FILE_NAME = "sweep.csv"

# -------------------------------------------------------
# CLI Configuration
# -------------------------------------------------------

SEED_ENV_VAR = "MULTIPOD_SEED"
"""Environment variable that sets the default seed of every subcommand."""
DEFAULT_SEED = 0
"""Seed used when neither --seed nor MULTIPOD_SEED is given."""
SEED_MASK = 0xFFFF_FFFF_FFFF_FFFF
"""Seeds are reduced to 64 bits with this mask before they reach a generator. Seeds given on the
command line must already lie in [0, SEED_MASK]."""
DEFAULT_OUT = Path("out")
"""Output directory used when --out is not given."""
