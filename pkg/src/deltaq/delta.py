"""Event-driven inference over a (possibly pruned) feedforward network, with
exact significant-multiplication accounting.

Instead of recomputing every layer from scratch each timestep, each neuron
keeps a running pre-activation accumulator and the last value it transmitted
downstream. When a new frame arrives, only input entries whose change reaches
the input threshold emit delta events; each event updates downstream
accumulators through the nonzero, unpruned weights it touches, and a neuron
re-transmits only when its activation has drifted at least its layer
threshold away from the last transmitted value (a hysteresis gate: the
comparison point is the last *sent* value, so sub-threshold residue is never
discarded).

Timestep semantics are synchronous: a layer absorbs every event of the
current step before its neurons decide whether to fire, which makes outputs
and counters independent of event ordering. On the very first step each
layer evaluates its firing rule even without incoming events, so bias-driven
activations propagate and the first frame behaves like a full dense pass
(both accumulators start at the bias, transmitted values start at zero).

A multiplication is counted as significant when both the incoming delta and
the weight are nonzero; masked weights are zero and therefore never counted.
Accumulator additions are not counted. Events consumed from the input are
attributed to the first weighted layer; the Input row of the counter tracks
event traffic only.

Action selection downstream reads the output layer's transmitted values
(not the instantaneous accumulator activations); with a zero threshold the
two coincide.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import IO, NamedTuple, Sequence

import numpy as np

from .network import NetworkSpec, WeightSet, conv2d_single
from .tensorops import relu


class DeltaEvent(NamedTuple):
    """One transmitted change: which layer fired, which neuron, how much."""

    timestep: int
    layer: str
    neuron: int
    delta: float


class OpCounter:
    """Per-layer tallies of significant multiplications and event traffic.

    Row 0 is the input; rows 1..n are the weighted layers. All tallies are
    nonnegative and only ever grow within a run; counters from independent
    runs merge by addition.
    """

    def __init__(self, layer_names: Sequence[str]):
        self.layer_names = ("Input",) + tuple(layer_names)
        n = len(self.layer_names)
        self.significant_multiplications = np.zeros(n, dtype=np.int64)
        self.events_received = np.zeros(n, dtype=np.int64)
        self.events_sent = np.zeros(n, dtype=np.int64)
        self.timesteps = 0

    def total_multiplications(self) -> int:
        return int(self.significant_multiplications.sum())

    def merge(self, other: "OpCounter") -> "OpCounter":
        if self.layer_names != other.layer_names:
            raise ValueError("cannot merge counters over different layer sets")
        self.significant_multiplications += other.significant_multiplications
        self.events_received += other.events_received
        self.events_sent += other.events_sent
        self.timesteps += other.timesteps
        return self

    def copy(self) -> "OpCounter":
        out = OpCounter(self.layer_names[1:])
        return out.merge(self)


@dataclass
class DeltaLayerState:
    """Mutable per-layer state: accumulator, last transmitted values, gate."""

    o: np.ndarray        # running pre-activation, starts at the bias
    x_prev: np.ndarray   # last transmitted activation, starts at zero
    threshold: float


def resolve_thresholds(spec: NetworkSpec, thresholds: float | Sequence[float],
                       input_threshold: float | None = None) -> tuple[float, list[float]]:
    """Normalize a scalar or per-layer threshold spec; the input buffer
    defaults to the first layer threshold (the global value, when scalar)."""
    if np.isscalar(thresholds):
        per_layer = [float(thresholds)] * len(spec.layers)
    else:
        per_layer = [float(t) for t in thresholds]
        if len(per_layer) != len(spec.layers):
            raise ValueError(
                f"got {len(per_layer)} thresholds for {len(spec.layers)} layers"
            )
    t_in = float(input_threshold) if input_threshold is not None else per_layer[0]
    if t_in < 0 or any(t < 0 for t in per_layer):
        raise ValueError("thresholds must be nonnegative")
    return t_in, per_layer


class DeltaNetwork:
    """Event-driven evaluator for one episode; single-threaded mutable state.

    Run several episodes with independent instances (or reset_state) and
    merge their counters afterwards.
    """

    def __init__(self, spec: NetworkSpec, weights: WeightSet,
                 thresholds: float | Sequence[float] = 0.001,
                 input_threshold: float | None = None,
                 masks: Sequence[np.ndarray] | None = None,
                 trace: IO[str] | None = None):
        weights.validate(spec)
        self.spec = spec
        self.input_threshold, per_layer_t = resolve_thresholds(
            spec, thresholds, input_threshold)
        self.trace = trace
        self._names = spec.layer_names()
        self._out_shapes = spec.output_shapes()

        self.w_masked: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for i, layer in enumerate(spec.layers):
            w = weights.weights[i]
            if masks is not None:
                w = np.where(masks[i], w, 0.0)
            else:
                w = w.copy()
            self.w_masked.append(w)
            self.biases.append(weights.biases[i].copy())

        # event cost tables: significant multiplications caused by one event
        # arriving at a given input position of each layer
        self._event_costs: list[np.ndarray] = []
        in_shape: tuple[int, ...] = spec.input_shape
        for i, layer in enumerate(spec.layers):
            if layer.kind == "conv2d":
                self._event_costs.append(
                    conv_event_costs(self.w_masked[i], in_shape, layer.stride))
            else:
                self._event_costs.append(
                    np.count_nonzero(self.w_masked[i], axis=0).astype(np.int64))
            in_shape = self._out_shapes[i]

        self._thresholds = per_layer_t
        self.counter = OpCounter(self._names)
        self.reset_state()

    def reset_state(self) -> None:
        """Fresh episode state; the counter is left untouched."""
        self.input_prev = np.zeros(self.spec.input_shape)
        self.layers: list[DeltaLayerState] = []
        for i, layer in enumerate(self.spec.layers):
            shape = self._out_shapes[i]
            if layer.kind == "conv2d":
                o = np.ascontiguousarray(
                    np.broadcast_to(self.biases[i].reshape(-1, 1, 1), shape)
                ).astype(np.float64)
            else:
                o = self.biases[i].astype(np.float64).copy()
            self.layers.append(DeltaLayerState(
                o=o, x_prev=np.zeros(shape), threshold=self._thresholds[i]))
        self._first_step = True

    def step(self, frame: np.ndarray) -> np.ndarray:
        """Process one input frame; returns the output layer's transmitted
        values (length n_output)."""
        frame = np.asarray(frame, dtype=np.float64)
        if frame.shape != self.spec.input_shape:
            raise ValueError(
                f"frame shape {frame.shape} != {self.spec.input_shape}")
        t = self.counter.timesteps

        d_in = frame - self.input_prev
        fire_in = (d_in != 0.0) & (np.abs(d_in) >= self.input_threshold)
        idx = np.flatnonzero(fire_in)
        deltas = d_in.ravel()[idx]
        if idx.size:
            self.input_prev.ravel()[idx] = frame.ravel()[idx]
        self.counter.events_sent[0] += idx.size
        if self.trace is not None:
            self._write_trace(t, "Input", idx, deltas)

        in_shape: tuple[int, ...] = self.spec.input_shape
        for k, layer in enumerate(self.spec.layers):
            st = self.layers[k]
            self.counter.events_received[k + 1] += idx.size
            if idx.size:
                if layer.kind == "conv2d":
                    dimg = np.zeros(in_shape)
                    dimg.ravel()[idx] = deltas
                    st.o += conv2d_single(dimg, self.w_masked[k], None, layer.stride)
                else:
                    st.o += self.w_masked[k][:, idx] @ deltas
                self.counter.significant_multiplications[k + 1] += int(
                    self._event_costs[k].ravel()[idx].sum())

            if idx.size or self._first_step:
                act = relu(st.o) if layer.activation == "relu" else st.o
                d_out = act - st.x_prev
                fire = (d_out != 0.0) & (np.abs(d_out) >= st.threshold)
                out_idx = np.flatnonzero(fire)
                out_deltas = d_out.ravel()[out_idx]
                if out_idx.size:
                    st.x_prev.ravel()[out_idx] = act.ravel()[out_idx]
                self.counter.events_sent[k + 1] += out_idx.size
                if self.trace is not None and out_idx.size:
                    self._write_trace(t, self._names[k], out_idx, out_deltas)
                idx, deltas = out_idx, out_deltas
            else:
                idx = np.empty(0, dtype=np.intp)
                deltas = np.empty(0)
            in_shape = self._out_shapes[k]

        self._first_step = False
        self.counter.timesteps += 1
        return self.layers[-1].x_prev.ravel().copy()

    def output(self) -> np.ndarray:
        """Current transmitted output vector without advancing time."""
        return self.layers[-1].x_prev.ravel().copy()

    def resync(self) -> None:
        """Recompute every accumulator from the transmitted values upstream,
        squashing any floating-point drift. Off the hot path by design; no
        routine calls it automatically."""
        prev = self.input_prev
        for k, layer in enumerate(self.spec.layers):
            st = self.layers[k]
            if layer.kind == "conv2d":
                st.o = conv2d_single(prev, self.w_masked[k], self.biases[k],
                                     layer.stride)
            else:
                st.o = self.w_masked[k] @ prev.ravel() + self.biases[k]
            prev = st.x_prev

    def _write_trace(self, t: int, label: str, idx: np.ndarray,
                     deltas: np.ndarray) -> None:
        lines = [f"{t}\t{label}\t{int(i)}\t{float(d)!r}\n"
                 for i, d in zip(idx, deltas)]
        self.trace.write("".join(lines))


def conv_event_costs(w_masked: np.ndarray, in_shape: tuple[int, int, int],
                     stride: int) -> np.ndarray:
    """Significant multiplications one event at input position (c, y, x)
    triggers in a conv layer: the number of nonzero kernel weights (over all
    filters) at kernel offsets that actually map to a valid output position.
    Border positions touch fewer offsets."""
    f, c, ky, kx = w_masked.shape
    _, h, w = in_shape
    out_h = (h - ky) // stride + 1
    out_w = (w - kx) // stride + 1
    nnz_k = np.count_nonzero(w_masked, axis=0).astype(np.int64)  # (C, Ky, Kx)
    row_sel = _offset_selector(h, ky, stride, out_h)             # (H, Ky)
    col_sel = _offset_selector(w, kx, stride, out_w)             # (W, Kx)
    return np.einsum("yk,ckl,xl->cyx", row_sel, nnz_k, col_sel)


def _offset_selector(size: int, kernel: int, stride: int, out_size: int) -> np.ndarray:
    """sel[pos, k] == 1 iff kernel offset k maps position pos to some valid
    output index (pos - k divisible by stride and within [0, out_size))."""
    sel = np.zeros((size, kernel), dtype=np.int64)
    for pos in range(size):
        lo = max(0, -(-(pos - kernel + 1) // stride))  # ceil division
        hi = min(out_size - 1, pos // stride)
        for o in range(lo, hi + 1):
            sel[pos, pos - o * stride] = 1
    return sel


def measure_delta_sparsity(counter: OpCounter, spec: NetworkSpec) -> dict[str, float]:
    """Fraction of neuron-timesteps that transmitted nothing, per layer
    (the input row counts pixels)."""
    if counter.timesteps < 1:
        raise ValueError("no timesteps recorded")
    sizes = [int(np.prod(spec.input_shape))]
    sizes += [int(np.prod(s)) for s in spec.output_shapes()]
    out = {}
    for name, n, sent in zip(counter.layer_names, sizes, counter.events_sent):
        out[name] = 1.0 - float(sent) / (n * counter.timesteps)
    return out


def init_state(spec: NetworkSpec, weights: WeightSet,
               thresholds: float | Sequence[float],
               input_threshold: float | None = None,
               masks: Sequence[np.ndarray] | None = None) -> DeltaNetwork:
    """Construct a ready-to-step DeltaNetwork (accumulators at the bias,
    transmitted values at zero)."""
    return DeltaNetwork(spec, weights, thresholds, input_threshold, masks)
