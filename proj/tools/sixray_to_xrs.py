#!/usr/bin/env python3
"""Convert one split of the public SIXray release into the xrs dataset layout.

Input
  --labels   the release's split CSV (e.g. ImageSet/10/train.csv): a name column
             followed by per-class columns; a cell > 0 marks the class present,
             0 or -1 absent. Columns are matched by name, case-insensitively;
             classes outside gun/knife/wrench/pliers/scissors (e.g. Hammer) are
             ignored.
  --images   directory holding <name>.jpg (or any Pillow-readable extension)
  --boxes    optional directory of VOC-style <name>.xml detection annotations

Output (OUT is the split directory, e.g. data/sixray10/train)
  OUT/index.csv        id,gun,knife,wrench,pliers,scissors
  OUT/images/<id>.png  lossless copy of every image
  OUT/annotations.csv  id,class,x,y,w,h (only with --boxes)
"""

import argparse
import csv
import sys
import xml.etree.ElementTree as ET
from pathlib import Path

from PIL import Image

CLASSES = ["gun", "knife", "wrench", "pliers", "scissors"]
IMAGE_EXTS = [".jpg", ".jpeg", ".png", ".bmp", ".tif", ".tiff"]


def find_image(images, name):
    for ext in IMAGE_EXTS:
        for cand in (images / (name + ext), images / (name + ext.upper())):
            if cand.exists():
                return cand
    return None


def read_labels(path):
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    if not rows:
        sys.exit(f"{path}: empty label file")
    header = [h.strip().lower() for h in rows[0]]
    missing = [c for c in CLASSES if c not in header]
    if missing:
        sys.exit(f"{path}: no column for {', '.join(missing)}")
    cols = [header.index(c) for c in CLASSES]
    out = []
    for line_no, row in enumerate(rows[1:], start=2):
        if not row or not row[0].strip():
            continue
        try:
            flags = [1 if float(row[c]) > 0 else 0 for c in cols]
        except (IndexError, ValueError):
            sys.exit(f"{path}:{line_no}: bad label row {row}")
        out.append((Path(row[0].strip()).stem, flags))
    return out


def read_boxes(xml_path):
    root = ET.parse(xml_path).getroot()
    for obj in root.iter("object"):
        cls = (obj.findtext("name") or "").strip().lower()
        bb = obj.find("bndbox")
        if cls not in CLASSES or bb is None:
            continue
        x0, y0 = float(bb.findtext("xmin")), float(bb.findtext("ymin"))
        x1, y1 = float(bb.findtext("xmax")), float(bb.findtext("ymax"))
        if x1 > x0 and y1 > y0:
            yield cls, max(x0, 0.0), max(y0, 0.0), x1 - x0, y1 - y0


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--labels", required=True, type=Path)
    ap.add_argument("--images", required=True, type=Path)
    ap.add_argument("--boxes", type=Path)
    ap.add_argument("out", type=Path)
    args = ap.parse_args()

    labels = read_labels(args.labels)
    (args.out / "images").mkdir(parents=True, exist_ok=True)
    n_boxes = 0
    ann = None
    if args.boxes:
        ann = open(args.out / "annotations.csv", "w", newline="")
        ann.write("id,class,x,y,w,h\n")
    with open(args.out / "index.csv", "w", newline="") as index:
        index.write("id," + ",".join(CLASSES) + "\n")
        for name, flags in labels:
            src = find_image(args.images, name)
            if src is None:
                sys.exit(f"no image for {name} under {args.images}")
            with Image.open(src) as img:
                img.convert("RGB").save(args.out / "images" / (name + ".png"))
            index.write(name + "," + ",".join(map(str, flags)) + "\n")
            if ann and (args.boxes / (name + ".xml")).exists():
                for cls, x, y, w, h in read_boxes(args.boxes / (name + ".xml")):
                    ann.write(f"{name},{cls},{x:g},{y:g},{w:g},{h:g}\n")
                    n_boxes += 1
    if ann:
        ann.close()
    print(f"wrote {len(labels)} images" + (f", {n_boxes} boxes" if args.boxes else "") + f" to {args.out}")


if __name__ == "__main__":
    main()
