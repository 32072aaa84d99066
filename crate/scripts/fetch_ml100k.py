#!/usr/bin/env python3
"""Materialize MovieLens-100k in its original file layout (u.data, u.user, u.item).

The GroupLens download is not always reachable from build machines, but the
RecBole wheel on PyPI ships the same 100,000 ratings as "atomic" files. This
script pulls that wheel (or uses one given with --wheel) and rewrites it into
the tab/pipe separated files the `ml-100k` loader expects.

    python3 scripts/fetch_ml100k.py            # writes data/ml-100k/
    python3 scripts/fetch_ml100k.py --out /tmp/ml-100k --wheel recbole.whl
"""

import argparse
import glob
import os
import subprocess
import sys
import tempfile
import zipfile

GENRES = [
    "unknown", "Action", "Adventure", "Animation", "Children's", "Comedy",
    "Crime", "Documentary", "Drama", "Fantasy", "Film-Noir", "Horror",
    "Musical", "Mystery", "Romance", "Sci-Fi", "Thriller", "War", "Western",
]
PREFIX = "recbole/dataset_example/ml-100k/ml-100k."


def fetch_wheel(dest):
    subprocess.check_call(
        [sys.executable, "-m", "pip", "download", "recbole==1.2.1",
         "--no-deps", "-q", "-d", dest]
    )
    found = glob.glob(os.path.join(dest, "recbole-*.whl"))
    if not found:
        sys.exit("recbole wheel not found after download")
    return found[0]


def read_atomic(zf, kind):
    lines = zf.read(PREFIX + kind).decode("latin-1").splitlines()
    return [line.split("\t") for line in lines[1:] if line.strip()]


def main():
    ap = argparse.ArgumentParser()
    root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    ap.add_argument("--out", default=os.path.join(root, "data", "ml-100k"))
    ap.add_argument("--wheel")
    args = ap.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        wheel = args.wheel or fetch_wheel(tmp)
        with zipfile.ZipFile(wheel) as zf:
            inter = read_atomic(zf, "inter")
            users = read_atomic(zf, "user")
            items = read_atomic(zf, "item")

    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "u.data"), "w", encoding="latin-1") as f:
        for uid, iid, rating, ts in inter:
            f.write(f"{uid}\t{iid}\t{int(float(rating))}\t{int(float(ts))}\n")
    with open(os.path.join(args.out, "u.user"), "w", encoding="latin-1") as f:
        for uid, age, gender, occ, zipc in sorted(users, key=lambda r: int(r[0])):
            f.write(f"{uid}|{age}|{gender}|{occ}|{zipc}\n")
    with open(os.path.join(args.out, "u.item"), "w", encoding="latin-1") as f:
        for iid, title, year, classes in sorted(items, key=lambda r: int(r[0])):
            tokens = set(classes.split())
            flags = "|".join("1" if g in tokens else "0" for g in GENRES)
            year = year.strip()
            date = f"01-Jan-{year}" if year.isdigit() else ""
            name = f"{title} ({year})" if year.isdigit() else title
            f.write(f"{iid}|{name}|{date}||http://us.imdb.com/|{flags}\n")
    with open(os.path.join(args.out, "u.genre"), "w", encoding="latin-1") as f:
        for i, g in enumerate(GENRES):
            f.write(f"{g}|{i}\n")
    print(f"wrote {len(inter)} ratings, {len(users)} users, {len(items)} items to {args.out}")


if __name__ == "__main__":
    main()
