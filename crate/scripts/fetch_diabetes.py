#!/usr/bin/env python3
"""Write the Pima Indians Diabetes data (768 rows) as data/diabetes.csv.

The rows are taken from the KEEL copy bundled in the `keel-ds` wheel on PyPI.
Values are written as they appear there; only the class label is mapped
(positive -> 1, negative -> 0) and a header is added.

    python3 scripts/fetch_diabetes.py [--wheel path/to/keel_ds-0.2.5-py3-none-any.whl] [--out data/diabetes.csv]
"""

import argparse
import glob
import hashlib
import pathlib
import subprocess
import sys
import tempfile
import zipfile

HEADER = "Pregnancies,Glucose,BloodPressure,SkinThickness,Insulin,BMI,DiabetesPedigreeFunction,Age,Outcome"
MEMBER = "keel_ds/data/imbalanced/raw/pima.dat"
SHA256 = "bf81d06e0c0512662862248241ab46d7c29258c6ceaad32f3cab56b52a17fdab"


def download_wheel(dest):
    subprocess.run(
        [sys.executable, "-m", "pip", "download", "keel-ds==0.2.5", "--no-deps", "-d", dest],
        check=True,
    )
    return glob.glob(f"{dest}/keel_ds-0.2.5-*.whl")[0]


def convert(raw):
    lines = [HEADER]
    for line in raw.splitlines():
        line = line.strip()
        if not line or line.startswith("@"):
            continue
        *features, label = line.split(",")
        if len(features) != 8:
            raise ValueError(f"unexpected row: {line}")
        lines.append(",".join(features + [{"positive": "1", "negative": "0"}[label.strip()]]))
    if len(lines) != 769:
        raise ValueError(f"expected 768 rows, got {len(lines) - 1}")
    return "\n".join(lines) + "\n"


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    root = pathlib.Path(__file__).resolve().parent.parent
    parser.add_argument("--wheel")
    parser.add_argument("--out", default=str(root / "data" / "diabetes.csv"))
    args = parser.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        wheel = args.wheel or download_wheel(tmp)
        raw = zipfile.ZipFile(wheel).read(MEMBER).decode()
    text = convert(raw)
    digest = hashlib.sha256(text.encode()).hexdigest()
    if digest != SHA256:
        sys.exit(f"checksum mismatch: got {digest}, expected {SHA256}")
    out = pathlib.Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text)
    print(f"wrote {out} ({digest})")


if __name__ == "__main__":
    main()
