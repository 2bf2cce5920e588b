"""Checkpoint directory format.

A checkpoint is a directory:

    checkpoint.json     format tag, config, feature dims, duration-bin edges,
                        and the parameter table (name, shape, file)
    params/NNNN.frt     one tensor blob per state-dict entry, float32

Save -> load -> save reproduces the directory byte for byte.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import torch

from .config import ModelConfig
from .dataset import FeatureDims
from .encodings import DurationBinner
from .errors import ManifestError
from .network import DualBranchNet, build_network
from .tensorio import read_tensor, write_tensor

FORMAT_TAG = "newscraft-checkpoint"
FORMAT_VERSION = 1


def save_checkpoint(out_dir: str | Path, net: DualBranchNet, config: ModelConfig,
                    dims: FeatureDims, binners: dict[str, DurationBinner] | None) -> Path:
    out = Path(out_dir)
    (out / "params").mkdir(parents=True, exist_ok=True)
    params = []
    for i, (name, tensor) in enumerate(net.state_dict().items()):
        array = tensor.detach().cpu().to(torch.float32).numpy()
        if array.size == 0:
            # the blob format has no empty tensors; shape alone reconstructs it
            params.append({"name": name, "shape": list(tensor.shape), "file": None})
            continue
        rel = f"params/{i:04d}.frt"
        if array.ndim == 0:
            array = array.reshape(1)
        write_tensor(array, out / rel)
        params.append({"name": name, "shape": list(tensor.shape), "file": rel})
    doc = {
        "format": FORMAT_TAG,
        "version": FORMAT_VERSION,
        "seed": config.seed,
        "config": config.to_dict(),
        "feature_dims": dims.to_dict(),
        "binners": _binners_to_dict(binners),
        "parameters": params,
    }
    (out / "checkpoint.json").write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    return out


def load_checkpoint(ckpt_dir: str | Path
                    ) -> tuple[DualBranchNet, ModelConfig, FeatureDims,
                               dict[str, DurationBinner] | None]:
    ckpt = Path(ckpt_dir)
    meta_path = ckpt / "checkpoint.json"
    try:
        doc = json.loads(meta_path.read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ManifestError(f"cannot read checkpoint {meta_path}: {e}") from e
    if doc.get("format") != FORMAT_TAG or doc.get("version") != FORMAT_VERSION:
        raise ManifestError(f"not a recognized checkpoint: {meta_path}")
    config = ModelConfig.from_dict(doc["config"])
    dims = FeatureDims.from_dict(doc["feature_dims"])
    binners = _binners_from_dict(doc.get("binners"))
    net = build_network(config, dims, binners)
    state = {}
    for entry in doc["parameters"]:
        want = tuple(entry["shape"])
        if entry["file"] is None:
            state[entry["name"]] = torch.zeros(want, dtype=torch.float32)
            continue
        array = read_tensor(ckpt / entry["file"])
        if want == ():
            array = array.reshape(())
        elif array.shape != want:
            raise ManifestError(
                f"parameter {entry['name']}: blob shape {array.shape} != declared {want}")
        state[entry["name"]] = torch.from_numpy(array)
    missing, unexpected = net.load_state_dict(state, strict=False)
    if missing or unexpected:
        raise ManifestError(
            f"checkpoint does not match the configured network "
            f"(missing={list(missing)}, unexpected={list(unexpected)})")
    net.eval()
    return net, config, dims, binners


def _binners_to_dict(binners: dict[str, DurationBinner] | None) -> dict | None:
    if binners is None:
        return None
    return {
        key: {
            "abs_edges": [float(v) for v in np.asarray(b.abs_edges, dtype=np.float32)],
            "rel_edges": [float(v) for v in np.asarray(b.rel_edges, dtype=np.float32)],
        }
        for key, b in binners.items()
    }


def _binners_from_dict(doc: dict | None) -> dict[str, DurationBinner] | None:
    if doc is None:
        return None
    return {
        key: DurationBinner(
            abs_edges=np.asarray(entry["abs_edges"], dtype=np.float64),
            rel_edges=np.asarray(entry["rel_edges"], dtype=np.float64),
        )
        for key, entry in doc.items()
    }
