"""Export the wine, breast-cancer and digits datasets to CSV.

The CSVs are copies of the UCI datasets bundled with scikit-learn (no
network access needed).  Each file has a header row; the last column is
the integer class label.

    python3 scripts/fetch_datasets.py --out data/
"""

import argparse
import csv
from pathlib import Path

from sklearn import datasets

LOADERS = {
    "wine": datasets.load_wine,
    "breast_cancer": datasets.load_breast_cancer,
    "digits": datasets.load_digits,
}


def export(name: str, out_dir: Path) -> Path:
    bunch = LOADERS[name]()
    names = [str(n).replace(" ", "_") for n in getattr(bunch, "feature_names", [])]
    if len(names) != bunch.data.shape[1]:
        names = [f"x{i}" for i in range(bunch.data.shape[1])]
    path = out_dir / f"{name}.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*names, "label"])
        for row, label in zip(bunch.data, bunch.target):
            w.writerow([repr(float(v)) for v in row] + [int(label)])
    return path


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="data", help="output directory")
    ap.add_argument("names", nargs="*", help=f"subset of {sorted(LOADERS)} (default: all)")
    args = ap.parse_args(argv)
    unknown = set(args.names) - set(LOADERS)
    if unknown:
        ap.error(f"unknown dataset(s): {sorted(unknown)}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name in args.names or sorted(LOADERS):
        print(export(name, out))


if __name__ == "__main__":
    main()
