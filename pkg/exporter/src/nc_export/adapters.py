"""Checkpoint adapters, one per supported framework.

Each adapter turns a checkpoint file into a callable that maps a fixed-length
waveform to a dict of named layer activations. Unsupported frameworks fail
loudly at load time rather than producing wrong embeddings quietly.

Supported today: ``npz-mlp``, an .npz archive holding a dense tanh stack
(``W0, b0, W1, b1, ...`` plus scalar ``input_len``). Layer ``dense<i>`` is the
post-activation output of layer i; the final layer is the raw logit.
"""

from __future__ import annotations

from pathlib import Path
from typing import Callable

import numpy as np

from nc_export.errors import CheckpointLoadError, LayerNotFound

Forward = Callable[[np.ndarray], dict[str, np.ndarray]]


def load_npz_mlp(path: str | Path) -> tuple[Forward, int]:
    """Returns (forward function, required input length)."""
    try:
        archive = np.load(str(path))
    except (OSError, ValueError) as exc:
        raise CheckpointLoadError(f"cannot load {path}: {exc}") from exc

    if "input_len" not in archive:
        raise CheckpointLoadError(f"{path}: missing input_len; not an npz-mlp checkpoint")
    input_len = int(archive["input_len"])

    weights = []
    i = 0
    while f"W{i}" in archive:
        if f"b{i}" not in archive:
            raise CheckpointLoadError(f"{path}: W{i} present but b{i} missing")
        weights.append((archive[f"W{i}"].astype(np.float64), archive[f"b{i}"].astype(np.float64)))
        i += 1
    if not weights:
        raise CheckpointLoadError(f"{path}: no dense layers found")
    if weights[0][0].shape[0] != input_len:
        raise CheckpointLoadError(
            f"{path}: W0 expects input {weights[0][0].shape[0]}, input_len says {input_len}"
        )

    def forward(x: np.ndarray) -> dict[str, np.ndarray]:
        activations: dict[str, np.ndarray] = {}
        h = x
        last = len(weights) - 1
        for layer, (w, b) in enumerate(weights):
            h = h @ w + b
            if layer != last:
                h = np.tanh(h)
            activations[f"dense{layer}"] = h
        return activations

    return forward, input_len


_ADAPTERS = {"npz-mlp": load_npz_mlp}


def load_checkpoint(path: str | Path, framework: str = "npz-mlp") -> tuple[Forward, int]:
    if framework not in _ADAPTERS:
        raise CheckpointLoadError(
            f"unsupported framework {framework!r}; supported: {sorted(_ADAPTERS)}"
        )
    return _ADAPTERS[framework](path)


def layer_names(forward: Forward, input_len: int) -> list[str]:
    probe = forward(np.zeros(input_len))
    return sorted(probe, key=lambda name: int(name.removeprefix("dense")))


def select_layer(activations: dict[str, np.ndarray], layer: str) -> np.ndarray:
    if layer not in activations:
        raise LayerNotFound(
            f"layer {layer!r} not in checkpoint; available: {sorted(activations)}"
        )
    return activations[layer]
