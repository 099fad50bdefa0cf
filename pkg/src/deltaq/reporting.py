"""Aggregate run results into machine-readable reports: per-layer operation
tables (fixed-width text), sparsity/reward tradeoff curves (CSV), and a JSON
mirror of every record. Pure functions of their inputs: the same records
always produce byte-identical output.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .delta import OpCounter, measure_delta_sparsity
from .network import NetworkSpec, static_network_multiplications


@dataclass
class RunRecord:
    """One evaluated configuration: a pruning iteration at one threshold."""

    iteration: int
    threshold: float
    sparsity_total: float                      # over the pruning scope
    sparsity_all: float                        # over every weight entry
    per_layer_weight_sparsity: dict[str, float]
    per_layer_delta_sparsity: dict[str, float]  # includes the Input row
    per_layer_static: dict[str, int]
    per_layer_measured: dict[str, float]        # mean per timestep
    delta_sparsity_total: float
    reward_dense: float
    reward_delta: float
    static_total: int
    measured_total: float                       # mean per timestep
    timesteps: int

    @property
    def significant_fraction(self) -> float:
        return self.measured_total / self.static_total

    @property
    def reduction_factor(self) -> float:
        if self.measured_total <= 0:
            raise ValueError("measured multiplications must be > 0")
        return self.static_total / self.measured_total

    @property
    def reduction_factor_rounded(self) -> float:
        return round(self.reduction_factor, 1)

    @property
    def reduction_factor_floor(self) -> int:
        return math.floor(self.reduction_factor)


def record_from_counters(spec: NetworkSpec, iteration: int, threshold: float,
                         per_layer_sparsity: tuple[float, ...],
                         sparsity_scope: float, sparsity_all: float,
                         counter: OpCounter, reward_dense: float,
                         reward_delta: float) -> RunRecord:
    """Assemble a RunRecord from a delta-mode counter and sparsity data."""
    names = spec.layer_names()
    static = static_network_multiplications(spec)
    static_by_layer = {r.name: r.multiplications for r in static.rows
                       if r.name != "Flatten"}
    t = counter.timesteps
    measured = {name: float(counter.significant_multiplications[i + 1]) / t
                for i, name in enumerate(names)}
    delta_sp = measure_delta_sparsity(counter, spec)
    sizes = [int(np.prod(spec.input_shape))] + \
            [int(np.prod(s)) for s in spec.output_shapes()]
    sent = float(counter.events_sent.sum())
    delta_total = 1.0 - sent / (sum(sizes) * t)
    return RunRecord(
        iteration=iteration, threshold=threshold,
        sparsity_total=sparsity_scope, sparsity_all=sparsity_all,
        per_layer_weight_sparsity=dict(zip(names, per_layer_sparsity)),
        per_layer_delta_sparsity=delta_sp,
        per_layer_static=static_by_layer,
        per_layer_measured=measured,
        delta_sparsity_total=delta_total,
        reward_dense=reward_dense, reward_delta=reward_delta,
        static_total=static.total_multiplications,
        measured_total=sum(measured.values()), timesteps=t)


# ---------------------------------------------------------------------------
# fixed-width operation table
# ---------------------------------------------------------------------------

_COLS = ("Layer", "Multiplications", "Nonzero multiplications",
         "Sparsity weights", "Delta sparsity")


def build_table(records: list[RunRecord]) -> str:
    """Human-readable per-layer table(s), one block per record, each with an
    Input row, the weighted layers, and a Total row whose count columns are
    the column sums."""
    if not records:
        raise ValueError("no records to report")
    blocks = []
    for rec in records:
        rows = [("Input", 0, 0.0, 0.0, rec.per_layer_delta_sparsity["Input"])]
        for name in rec.per_layer_static:
            rows.append((name, rec.per_layer_static[name],
                         rec.per_layer_measured[name],
                         rec.per_layer_weight_sparsity[name],
                         rec.per_layer_delta_sparsity[name]))
        total = ("Total", rec.static_total, rec.measured_total,
                 rec.sparsity_total, rec.delta_sparsity_total)
        lines = [f"iteration {rec.iteration}, threshold {rec.threshold:g}"]
        fmt = "{:<10} {:>16} {:>24} {:>17} {:>15}"
        lines.append(fmt.format(*_COLS))
        for name, st, ms, ws, ds in rows + [total]:
            lines.append(fmt.format(name, f"{st:,}", f"{ms:,.1f}",
                                    f"{ws:.3f}", f"{ds:.3f}"))
        lines.append(
            f"reduction factor: {rec.reduction_factor_rounded:.1f} "
            f"({rec.reduction_factor_floor}x), reward dense "
            f"{rec.reward_dense:.3f}, reward delta {rec.reward_delta:.3f}")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"


# ---------------------------------------------------------------------------
# tradeoff curve
# ---------------------------------------------------------------------------

CURVE_HEADER = ("iteration,sparsity_total,reward_dense,reward_delta,"
                "static_mults,measured_mults,significant_fraction,"
                "reduction_factor")


def build_tradeoff_curve(records: list[RunRecord]) -> list[tuple]:
    """One row per record, ordered by sparsity: (sparsity, reward_dense,
    reward_delta, significant_fraction)."""
    ordered = sorted(records, key=lambda r: r.sparsity_total)
    return [(r.sparsity_total, r.reward_dense, r.reward_delta,
             r.significant_fraction) for r in ordered]


def curve_csv(records: list[RunRecord]) -> str:
    ordered = sorted(records, key=lambda r: (r.sparsity_total, r.threshold))
    lines = [CURVE_HEADER]
    for r in ordered:
        lines.append(
            f"{r.iteration},{r.sparsity_total:.6f},{r.reward_dense:.6f},"
            f"{r.reward_delta:.6f},{r.static_total},"
            f"{r.measured_total:.3f},{r.significant_fraction:.8f},"
            f"{r.reduction_factor:.6f}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# JSON persistence
# ---------------------------------------------------------------------------

def records_to_json(records: list[RunRecord], meta: dict | None = None) -> str:
    payload = {"meta": meta or {}, "records": [asdict(r) for r in records]}
    return json.dumps(payload, indent=2, sort_keys=True)


def records_from_json(text: str) -> tuple[list[RunRecord], dict]:
    payload = json.loads(text)
    records = [RunRecord(**d) for d in payload["records"]]
    return records, payload.get("meta", {})


def write_report_files(out_dir: str | Path, records: list[RunRecord],
                       meta: dict | None = None) -> list[Path]:
    """Emit records.json, curve.csv, and tables.txt; returns written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    p = out / "records.json"
    p.write_text(records_to_json(records, meta))
    paths.append(p)
    p = out / "curve.csv"
    p.write_text(curve_csv(records))
    paths.append(p)
    p = out / "tables.txt"
    p.write_text(build_table(records))
    paths.append(p)
    return paths
