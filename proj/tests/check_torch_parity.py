#!/usr/bin/env python3
"""Converts a randomly initialised torchvision resnet34 and compares pooled
features against torch. The reference pads the raw image with zeros before
normalising, which is what the folded stem computes."""

import subprocess
import sys
import tempfile
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
import torchvision

parity_exe, converter = sys.argv[1], sys.argv[2]
size, n = 96, 2

torch.manual_seed(0)
model = torchvision.models.resnet34()
for mod in model.modules():
    if isinstance(mod, torch.nn.BatchNorm2d):
        mod.running_mean.uniform_(-0.2, 0.2)
        mod.running_var.uniform_(0.5, 1.5)
        mod.weight.data.uniform_(0.5, 1.5)
        mod.bias.data.uniform_(-0.2, 0.2)
model.eval()

with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    torch.save(model.state_dict(), tmp / "sd.pth")
    subprocess.check_call([sys.executable, converter, str(tmp / "w.ckpt"), "--state-dict", str(tmp / "sd.pth")])
    x = torch.rand(n, 3, size, size)
    x.numpy().astype("<f4").tofile(tmp / "x.bin")
    subprocess.check_call([parity_exe, str(tmp / "w.ckpt"), str(tmp / "x.bin"), str(n), str(size), str(tmp / "f.txt")])
    ours = np.loadtxt(tmp / "f.txt").reshape(n, 512)

mean = torch.tensor([0.485, 0.456, 0.406]).view(1, 3, 1, 1)
std = torch.tensor([0.229, 0.224, 0.225]).view(1, 3, 1, 1)
features = torch.nn.Sequential(*list(model.children())[:-1])
model.conv1.padding = (0, 0)
with torch.no_grad():
    ref = features((F.pad(x, (3, 3, 3, 3)) - mean) / std).flatten(1).numpy()

err = np.abs(ours - ref).max() / np.abs(ref).max()
print(f"max relative feature error {err:.3g}")
sys.exit(0 if err < 1e-5 else 1)
