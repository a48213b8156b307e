#!/usr/bin/env python3
"""Convert torchvision's ImageNet ResNet-34 weights into an xrs weights file.

The result can be named in [model] pretrained_weights. Only backbone.* tensors
are written; the classifier head is always trained from scratch.

ImageNet input normalisation is folded into the stem so the network accepts the
raw [0,1] images the xrs pipeline produces: conv weights are divided by the
per-channel std and the stem BN running mean absorbs the mean shift.

Usage: convert_torchvision_resnet34.py OUT.ckpt [--state-dict resnet34.pth]
Without --state-dict the weights are fetched through torchvision.
"""

import argparse
import json
import struct

import numpy as np

MEAN = np.array([0.485, 0.456, 0.406], dtype=np.float64)
STD = np.array([0.229, 0.224, 0.225], dtype=np.float64)


def load_state_dict(path):
    import torch

    if path:
        return torch.load(path, map_location="cpu")
    import torchvision

    return torchvision.models.resnet34(weights="IMAGENET1K_V1").state_dict()


def rename(name):
    if name.startswith("fc.") or name.endswith("num_batches_tracked"):
        return None
    parts = name.split(".")
    if parts[0] == "conv1":
        parts = ["stem", "conv"] + parts[1:]
    elif parts[0] == "bn1":
        parts = ["stem", "bn"] + parts[1:]
    parts = ["conv" if p == "0" and i > 0 and parts[i - 1] == "downsample" else p for i, p in enumerate(parts)]
    parts = ["bn" if p == "1" and i > 0 and parts[i - 1] == "downsample" else p for i, p in enumerate(parts)]
    leaf = {"weight": "gamma", "bias": "beta"}
    if parts[-2].startswith("bn") and parts[-1] in leaf:
        parts[-1] = leaf[parts[-1]]
    return "backbone." + ".".join(parts)


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("out")
    ap.add_argument("--state-dict", default=None)
    args = ap.parse_args()

    sd = {k: v.detach().cpu().double().numpy() for k, v in load_state_dict(args.state_dict).items()}
    w = sd["conv1.weight"]
    sd["bn1.running_mean"] = sd["bn1.running_mean"] + np.einsum("ochw,c->o", w, MEAN / STD)
    sd["conv1.weight"] = w / STD[None, :, None, None]

    tensors, blobs, offset = [], [], 0
    for name, value in sd.items():
        target = rename(name)
        if target is None:
            continue
        data = np.ascontiguousarray(value, dtype="<f4")
        kind = "buffer" if "running_" in target else "parameter"
        tensors.append({"name": target, "kind": kind, "shape": list(data.shape), "offset": offset})
        blobs.append(data.tobytes())
        offset += data.nbytes

    header = json.dumps({"schema": "xrs.checkpoint.v1", "tag": "torchvision-resnet34", "tensors": tensors}).encode()
    with open(args.out, "wb") as f:
        f.write(b"XRSCKPT\n")
        f.write(struct.pack("<Q", len(header)))
        f.write(header)
        for b in blobs:
            f.write(b)
    print(f"wrote {len(tensors)} tensors to {args.out}")


if __name__ == "__main__":
    main()
