# Reference run on synthetic data: 600 train / 120 test images, seed 7, TriPod with the default
# training config. The final test accuracy calibrates the generalization threshold of the slow
# acceptance test.
import sys
from pathlib import Path

from multipod.main import run

OUT = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("out/reference")
SEED = "7"

steps = [
    ["synth", "--per-stage", "120", "--seed", SEED, "-o", str(OUT / "data")],
    [
        "split",
        "--manifest",
        str(OUT / "data" / "manifest.csv"),
        "--fraction",
        str(100 / 120),
        "--seed",
        SEED,
        "-o",
        str(OUT / "split"),
    ],
    [
        "train",
        "--manifest",
        str(OUT / "split" / "train.csv"),
        "--test",
        str(OUT / "split" / "test.csv"),
        "--seed",
        SEED,
        "-o",
        str(OUT / "run"),
    ],
    [
        "eval",
        "--checkpoint",
        str(OUT / "run" / "model.ckpt"),
        "--manifest",
        str(OUT / "split" / "test.csv"),
        "-o",
        str(OUT / "eval"),
    ],
]

for argv in steps:
    code = run(argv)
    if code:
        sys.exit(code)
