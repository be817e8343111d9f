#!/usr/bin/env python3
"""Fetch MovieLens-100k ratings into <dest>/u.data (user, item, rating, timestamp; tab separated).

The ratings are taken from the copy bundled with the recbole wheel, which pip
can download through the configured package index.  An existing u.data with
100000 rows is left untouched.
"""

import argparse
import pathlib
import subprocess
import sys
import tempfile
import zipfile

MEMBER = "recbole/dataset_example/ml-100k/ml-100k.inter"
EXPECTED_ROWS = 100000


def count_rows(path):
    with open(path, encoding="utf-8") as f:
        return sum(1 for line in f if line.strip())


def convert(lines, out):
    rows = 0
    header = True
    for raw in lines:
        line = raw.decode("utf-8").rstrip("\r\n")
        if not line:
            continue
        if header:
            header = False
            if line.startswith("user_id"):
                continue
        user, item, rating, timestamp = line.split("\t")
        out.write(f"{user}\t{item}\t{int(float(rating))}\t{int(float(timestamp))}\n")
        rows += 1
    return rows


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--dest", default="data/ml-100k")
    parser.add_argument("--version", default="1.2.1")
    args = parser.parse_args()

    dest = pathlib.Path(args.dest)
    target = dest / "u.data"
    if target.exists() and count_rows(target) == EXPECTED_ROWS:
        print(f"{target} already present")
        return 0

    dest.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run(
            [sys.executable, "-m", "pip", "download", "--no-deps", "--quiet",
             "--dest", tmp, f"recbole=={args.version}"],
            check=True)
        wheels = list(pathlib.Path(tmp).glob("recbole-*.whl"))
        if not wheels:
            print("error: io: recbole wheel not downloaded", file=sys.stderr)
            return 1
        partial = target.with_suffix(".partial")
        with zipfile.ZipFile(wheels[0]) as wheel, wheel.open(MEMBER) as src, \
                open(partial, "w", encoding="utf-8") as out:
            rows = convert(src, out)
        if rows != EXPECTED_ROWS:
            print(f"error: data: expected {EXPECTED_ROWS} rows, got {rows}", file=sys.stderr)
            partial.unlink()
            return 1
        partial.replace(target)
    print(f"wrote {target}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
