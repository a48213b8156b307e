#!/usr/bin/env python3
"""Runs tools/sixray_to_xrs.py on a three-image mock of the public release and
checks that `xrs stats --histograms` reads the result."""

import json
import subprocess
import sys
import tempfile
from pathlib import Path

from PIL import Image

xrs, adapter = sys.argv[1], sys.argv[2]

with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    (tmp / "JPEGImage").mkdir()
    (tmp / "Annotation").mkdir()
    for name in ["P00001", "P00002", "N00001"]:
        Image.new("RGB", (40, 30), (200, 180, 160)).save(tmp / "JPEGImage" / (name + ".jpg"))
    (tmp / "train.csv").write_text(
        "name,Gun,Knife,Wrench,Pliers,Scissors,Hammer\n"
        "P00001,1,0,0,1,0,1\n"
        "P00002,0,1,0,0,0,0\n"
        "N00001,-1,0,-1,0,0,0\n"
    )
    (tmp / "Annotation" / "P00001.xml").write_text(
        "<annotation><object><name>Gun</name><bndbox><xmin>2</xmin><ymin>3</ymin><xmax>12</xmax><ymax>18</ymax>"
        "</bndbox></object><object><name>Hammer</name><bndbox><xmin>1</xmin><ymin>1</ymin><xmax>5</xmax>"
        "<ymax>5</ymax></bndbox></object><object><name>Pliers</name><bndbox><xmin>20</xmin><ymin>4</ymin>"
        "<xmax>36</xmax><ymax>20</ymax></bndbox></object></annotation>"
    )
    out = tmp / "sixray10" / "train"
    subprocess.check_call([sys.executable, adapter, "--labels", str(tmp / "train.csv"), "--images",
                           str(tmp / "JPEGImage"), "--boxes", str(tmp / "Annotation"), str(out)])

    index = (out / "index.csv").read_text().splitlines()
    assert index == ["id,gun,knife,wrench,pliers,scissors", "P00001,1,0,0,1,0", "P00002,0,1,0,0,0",
                     "N00001,0,0,0,0,0"], index
    ann = (out / "annotations.csv").read_text().splitlines()
    assert ann == ["id,class,x,y,w,h", "P00001,gun,2,3,10,15", "P00001,pliers,20,4,16,16"], ann

    subprocess.check_call([xrs, "--out", str(tmp / "stats"), "stats", str(tmp / "sixray10"), "--histograms"])
    stats = json.loads((tmp / "stats" / "stats.json").read_text())
    assert stats["total_images"] == 3 and stats["negative"]["count"] == 1, stats
    assert stats["scale_histograms"]["classes"]["gun"]["boxes"] == 1, stats
print("adapter round trip ok")
