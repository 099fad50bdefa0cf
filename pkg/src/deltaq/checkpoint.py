"""Binary checkpoint format for network specs, weights, masks, and the
archived initial weights.

Layout: 8-byte magic, uint32 format version, uint32 header length, then a
JSON header (layer kinds/shapes in order, flags, free-form extra metadata),
then raw array payloads in a fixed order: per layer weights and bias as
row-major little-endian float64; if masks are present, per layer mask as
uint8 {0,1}; if the initial snapshot is present, per layer initial weights
and bias. Files round-trip bit-exactly.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np

from .network import LayerSpec, NetworkSpec, WeightSet
from .pruning import PrunableWeights

MAGIC = b"DLTQCKPT"
VERSION = 1


class CheckpointError(ValueError):
    """Raised on malformed or incompatible checkpoint files."""


def _layer_to_dict(layer: LayerSpec) -> dict[str, Any]:
    if layer.kind == "conv2d":
        return {"kind": "conv2d", "in_channels": layer.in_channels,
                "out_filters": layer.out_filters, "kernel_x": layer.kernel_x,
                "kernel_y": layer.kernel_y, "stride": layer.stride,
                "activation": layer.activation}
    return {"kind": "dense", "in_size": layer.in_size,
            "out_size": layer.out_size, "activation": layer.activation}


def _layer_from_dict(d: dict[str, Any]) -> LayerSpec:
    return LayerSpec(**d)


def save_checkpoint(path: str | Path, spec: NetworkSpec, weights: WeightSet,
                    masks: list[np.ndarray] | None = None,
                    initial: WeightSet | None = None,
                    extra: dict[str, Any] | None = None) -> None:
    weights.validate(spec)
    header = {
        "version": VERSION,
        "input_shape": list(spec.input_shape),
        "n_output": spec.n_output,
        "layers": [_layer_to_dict(l) for l in spec.layers],
        "has_masks": masks is not None,
        "has_initial": initial is not None,
        "extra": extra or {},
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(np.uint32(VERSION).tobytes())
        f.write(np.uint32(len(blob)).tobytes())
        f.write(blob)
        for w, b in zip(weights.weights, weights.biases):
            f.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            f.write(np.ascontiguousarray(b, dtype="<f8").tobytes())
        if masks is not None:
            for m in masks:
                f.write(np.ascontiguousarray(m, dtype=np.uint8).tobytes())
        if initial is not None:
            for w, b in zip(initial.weights, initial.biases):
                f.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
                f.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


class Checkpoint:
    """Decoded checkpoint contents."""

    def __init__(self, spec: NetworkSpec, weights: WeightSet,
                 masks: list[np.ndarray] | None, initial: WeightSet | None,
                 extra: dict[str, Any]):
        self.spec = spec
        self.weights = weights
        self.masks = masks
        self.initial = initial
        self.extra = extra

    def to_prunable(self, rate: float | None = None) -> PrunableWeights:
        """Rebuild a PrunableWeights; requires masks and initial snapshot."""
        if self.masks is None or self.initial is None:
            raise CheckpointError("checkpoint lacks masks or initial weights")
        r = rate if rate is not None else float(self.extra.get("rate", 0.2))
        p = PrunableWeights.create(self.spec, self.initial, rate=r)
        p.live = self.weights.copy()
        p.masks = [m.copy() for m in self.masks]
        p.iteration = int(self.extra.get("iteration", 0))
        if "scope" in self.extra:
            p.scope = tuple(self.extra["scope"])
        p.apply()
        return p


def load_checkpoint(path: str | Path) -> Checkpoint:
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise CheckpointError(f"{path}: bad magic")
    version = int(np.frombuffer(data[8:12], dtype="<u4")[0])
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")
    hlen = int(np.frombuffer(data[12:16], dtype="<u4")[0])
    header = json.loads(data[16:16 + hlen].decode("utf-8"))
    spec = NetworkSpec(
        layers=tuple(_layer_from_dict(d) for d in header["layers"]),
        input_shape=tuple(header["input_shape"]),
        n_output=int(header["n_output"]),
    )
    off = 16 + hlen

    def read_f8(shape: tuple[int, ...]) -> np.ndarray:
        nonlocal off
        n = int(np.prod(shape))
        arr = np.frombuffer(data, dtype="<f8", count=n, offset=off)
        off += n * 8
        return arr.astype(np.float64).reshape(shape)

    def read_mask(shape: tuple[int, ...]) -> np.ndarray:
        nonlocal off
        n = int(np.prod(shape))
        arr = np.frombuffer(data, dtype=np.uint8, count=n, offset=off)
        off += n
        return arr.astype(bool).reshape(shape)

    ws, bs = [], []
    for l in spec.layers:
        ws.append(read_f8(l.weight_shape()))
        bs.append(read_f8(l.bias_shape()))
    weights = WeightSet(ws, bs)
    masks = None
    if header["has_masks"]:
        masks = [read_mask(l.weight_shape()) for l in spec.layers]
    initial = None
    if header["has_initial"]:
        pairs = [(read_f8(l.weight_shape()), read_f8(l.bias_shape()))
                 for l in spec.layers]
        initial = WeightSet([p[0] for p in pairs], [p[1] for p in pairs])
    if off != len(data):
        raise CheckpointError(f"{path}: {len(data) - off} trailing bytes")
    return Checkpoint(spec, weights, masks, initial, header.get("extra", {}))


def save_prunable(path: str | Path, p: PrunableWeights,
                  extra: dict[str, Any] | None = None) -> None:
    """Checkpoint a PrunableWeights with masks, initial snapshot, and its
    schedule position recorded in the header."""
    meta = {"iteration": p.iteration, "rate": p.rate, "scope": list(p.scope)}
    meta.update(extra or {})
    p.apply()
    save_checkpoint(path, p.spec, p.live, masks=p.masks, initial=p.initial,
                    extra=meta)
