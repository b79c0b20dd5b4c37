"""Bit-exact model checkpoints: parameters, config, optimizer state, step."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .optim import AdamState
from .vae import VaeConfig, VaeModel

__all__ = ["save_checkpoint", "load_checkpoint"]

FORMAT_VERSION = 1


def save_checkpoint(path, model: VaeModel, adam_state: AdamState | None = None) -> None:
    """Write an npz with every parameter tensor plus metadata.

    Parameter dtypes and values round-trip exactly (no text serialization of
    floats). Optimizer moments are stored under m./v. prefixes.
    """
    meta = {
        "format_version": FORMAT_VERSION,
        "config": model.config.to_dict(),
        "step": model.step,
        "adam_t": adam_state.t if adam_state is not None else 0,
        "param_names": sorted(model.params),
    }
    arrays = {f"param.{k}": v for k, v in model.params.items()}
    if adam_state is not None:
        arrays.update({f"adam_m.{k}": v for k, v in adam_state.m.items()})
        arrays.update({f"adam_v.{k}": v for k, v in adam_state.v.items()})
    arrays["meta"] = np.frombuffer(
        json.dumps(meta, sort_keys=True).encode("utf-8"), dtype=np.uint8)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez(path, **arrays)


def load_checkpoint(path):
    """Read a checkpoint back into (VaeModel, AdamState)."""
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode("utf-8"))
        if meta.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported checkpoint version in {path}")
        params = {k: data[f"param.{k}"].copy() for k in meta["param_names"]}
        state = AdamState(t=meta["adam_t"])
        for k in meta["param_names"]:
            if f"adam_m.{k}" in data:
                state.m[k] = data[f"adam_m.{k}"].copy()
                state.v[k] = data[f"adam_v.{k}"].copy()
    config = VaeConfig.from_dict(meta["config"])
    return VaeModel(config, params, step=meta["step"]), state
