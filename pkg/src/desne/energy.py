"""DDR transfer-energy model for near-memory sampling against PCB pipelines.

Energy counts only bits moved out of DRAM. A scenario says how many times
the full dataset crosses the board-level (PCB) link, how many times it
crosses the near-memory link, and how many times the kept subset crosses
the PCB link on its way to the training accelerator:

    E = bits * (pcb_full * e_pcb + nm_full * e_nm + kept_pcb * KR * e_pcb)

The per-method pass counts are fitted constants, not measured traffic; they
reproduce reference DQ/NMS and NeSSA/NMS energy ratios and can be
overridden.
"""

from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, replace

__all__ = [
    "EnergyCoefficients",
    "TransferScenario",
    "PRESET_PASSES",
    "scenario_energy",
    "preset",
    "compare",
    "report_csv",
]

PJ = 1e-12


@dataclass(frozen=True)
class EnergyCoefficients:
    e_pcb: float = 10.0  # pJ/bit, board-level DDR access
    e_nm: float = 0.5  # pJ/bit, near-memory access

    def __post_init__(self):
        if not (self.e_pcb > 0 and self.e_nm > 0):
            raise ValueError("energy coefficients must be positive")
        if not self.e_nm < self.e_pcb:
            raise ValueError("near-memory energy must be below PCB energy")


@dataclass(frozen=True)
class TransferScenario:
    pcb_full_passes: float
    nm_full_passes: float
    kept_pcb_passes: float
    keeping_ratio: float
    dataset_bits: int

    def __post_init__(self):
        for name in ("pcb_full_passes", "nm_full_passes", "kept_pcb_passes"):
            v = getattr(self, name)
            if not (v >= 0 and v != float("inf")):
                raise ValueError(f"{name} must be finite and >= 0")
        if not 0.0 < self.keeping_ratio <= 1.0:
            raise ValueError("keeping_ratio must lie in (0, 1]")
        if self.dataset_bits <= 0:
            raise ValueError("dataset_bits must be positive")


# (pcb_full, nm_full, kept_pcb)
PRESET_PASSES = {
    "nms": (0.0, 1.0, 1.0),
    "dq": (1.0, 0.0, 1.0),
    "nessa": (11.0, 0.0, 1.0),
}


def scenario_energy(s, c=EnergyCoefficients()):
    """Transfer energy in joules."""
    per_bit = (
        s.pcb_full_passes * c.e_pcb
        + s.nm_full_passes * c.e_nm
        + s.kept_pcb_passes * s.keeping_ratio * c.e_pcb
    )
    return s.dataset_bits * per_bit * PJ


def preset(method, keeping_ratio, dataset_bits, overrides=None):
    """Scenario for ``nms``, ``dq`` or ``nessa``.

    ``overrides`` maps a method name to a replacement PCB full-pass count, or
    to a dict of scenario fields.
    """
    if method not in PRESET_PASSES:
        raise ValueError(f"unknown method {method!r}; expected one of {sorted(PRESET_PASSES)}")
    pcb, nm, kept = PRESET_PASSES[method]
    s = TransferScenario(pcb, nm, kept, keeping_ratio, int(dataset_bits))
    ov = (overrides or {}).get(method)
    if ov is None:
        return s
    if isinstance(ov, dict):
        return replace(s, **ov)
    return replace(s, pcb_full_passes=float(ov))


def compare(methods, keeping_ratios, dataset_bits, c=EnergyCoefficients(), overrides=None,
            baseline="nms"):
    """Rows of absolute energies and ratios to ``baseline`` for every pair."""
    if not methods or not keeping_ratios:
        raise ValueError("need at least one method and one keeping ratio")
    rows = []
    for kr in keeping_ratios:
        base = scenario_energy(preset(baseline, kr, dataset_bits, overrides), c)
        for m in methods:
            s = preset(m, kr, dataset_bits, overrides)
            e = scenario_energy(s, c)
            rows.append({
                "method": m,
                "keeping_ratio": kr,
                "energy_j": e,
                "baseline": baseline,
                "baseline_energy_j": base,
                "ratio": e / base,
                **{k: v for k, v in asdict(s).items() if k.endswith("passes")},
            })
    return rows


FIELDS = (
    "method", "keeping_ratio", "energy_j", "baseline", "baseline_energy_j", "ratio",
    "pcb_full_passes", "nm_full_passes", "kept_pcb_passes",
)


def report_csv(rows):
    buf = io.StringIO()
    w = csv.DictWriter(buf, FIELDS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()
