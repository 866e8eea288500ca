#!/usr/bin/env python3
"""Fetch benchmark datasets into data/ in the canonical CSV layout.

Two datasets are handled directly:

* wine   -- bundled with scikit-learn, no network needed
* sonar  -- downloaded from the UCI repository (needs network access)

Both are written as data/<name>.csv with a ``f1..fN,label`` header, the
layout every config in configs/ expects.  The remaining datasets of the
full study come from several different archives and are not downloaded
automatically; ``--list`` prints their names and expected shapes so a
manually converted file can be sanity-checked before dropping it into
data/.
"""
from __future__ import annotations

import argparse
import csv
import io
import sys
import urllib.error
import urllib.request
from pathlib import Path

REPO_ROOT = Path(__file__).resolve().parent.parent
DATA_DIR = REPO_ROOT / "data"

SONAR_URLS = (
    "https://archive.ics.uci.edu/ml/machine-learning-databases/"
    "undocumented/connectionist-bench/sonar/sonar.all-data",
    "https://raw.githubusercontent.com/jbrownlee/Datasets/master/sonar.csv",
)

# name -> (samples, features); shapes of the full-study collection, for
# sanity-checking manually converted files.
FULL_STUDY_SHAPES = {
    "arcene": (200, 10000),
    "basehock": (1993, 4862),
    "caltech101": (8671, 784),
    "coil20": (1540, 1024),
    "isolet": (1560, 617),
    "lung": (203, 3312),
    "madelon": (2600, 500),
    "mpeg7": (1400, 1024),
    "mpeg7_bas": (1400, 180),
    "mpeg7_fourier": (1400, 126),
    "mushrooms": (8124, 112),
    "ntl_commercial": (4952, 8),
    "ntl_industrial": (3182, 8),
    "orl": (400, 1024),
    "pcmac": (1943, 3289),
    "phishing": (11055, 68),
    "segment": (2310, 19),
    "semeion": (1593, 256),
    "sonar": (208, 60),
    "spambase": (4601, 48),
    "vehicle": (846, 18),
    "wine": (178, 13),
}


def write_canonical(path: Path, rows: list[tuple[list[float], str]]) -> None:
    n_features = len(rows[0][0])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"f{j + 1}" for j in range(n_features)] + ["label"])
        for features, label in rows:
            w.writerow([repr(v) for v in features] + [label])


def fetch_wine(force: bool) -> bool:
    out = DATA_DIR / "wine.csv"
    if out.exists() and not force:
        print(f"wine: {out} already present")
        return True
    try:
        from sklearn.datasets import load_wine
    except ImportError:
        print("wine: scikit-learn is not installed", file=sys.stderr)
        return False
    raw = load_wine()
    rows = [([float(v) for v in x], str(int(y)))
            for x, y in zip(raw.data, raw.target)]
    write_canonical(out, rows)
    print(f"wine: wrote {out} ({len(rows)} samples)")
    return True


def fetch_sonar(force: bool) -> bool:
    out = DATA_DIR / "sonar.csv"
    if out.exists() and not force:
        print(f"sonar: {out} already present")
        return True
    body = None
    for url in SONAR_URLS:
        try:
            with urllib.request.urlopen(url, timeout=30) as resp:
                body = resp.read().decode("utf-8")
            break
        except (urllib.error.URLError, OSError, TimeoutError) as exc:
            print(f"sonar: {url} failed ({exc})", file=sys.stderr)
    if body is None:
        print("sonar: download failed; with network access rerun this "
              "script, or place a canonical CSV (60 features + label) at "
              f"{out} yourself", file=sys.stderr)
        return False
    rows = []
    for line in io.StringIO(body):
        parts = [p.strip() for p in line.strip().split(",") if p.strip()]
        if not parts:
            continue
        rows.append(([float(v) for v in parts[:-1]], parts[-1]))
    expected = FULL_STUDY_SHAPES["sonar"]
    got = (len(rows), len(rows[0][0]) if rows else 0)
    if got != expected:
        print(f"sonar: unexpected shape {got}, wanted {expected}",
              file=sys.stderr)
        return False
    write_canonical(out, rows)
    print(f"sonar: wrote {out} ({len(rows)} samples)")
    return True


def list_shapes() -> None:
    print(f"{'dataset':<16} {'samples':>8} {'features':>9}  data/ path")
    for name, (samples, features) in sorted(FULL_STUDY_SHAPES.items()):
        print(f"{name:<16} {samples:>8} {features:>9}  data/{name}.csv")
    print("\nFiles must be canonical CSV: header f1..fN,label, one sample "
          "per row, any label text.")


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--force", action="store_true",
                        help="rewrite files that already exist")
    parser.add_argument("--list", action="store_true",
                        help="print expected shapes of all study datasets")
    args = parser.parse_args(argv)
    if args.list:
        list_shapes()
        return 0
    DATA_DIR.mkdir(exist_ok=True)
    ok = fetch_wine(args.force)
    ok = fetch_sonar(args.force) and ok
    return 0 if ok else 1


if __name__ == "__main__":
    raise SystemExit(main())
