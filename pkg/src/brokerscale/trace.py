"""Demand traces: CSV ingestion, event binning, synthetic spiky traces."""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from brokerscale.errors import TraceFormatError


@dataclass
class DemandTrace:
    """Actual demand per slot (VM-equivalents), slot 1 first."""

    slots: np.ndarray
    slot_length: str = ""

    def __post_init__(self):
        self.slots = np.asarray(self.slots, dtype=np.float64).reshape(-1)
        if np.any(~np.isfinite(self.slots)) or np.any(self.slots < 0):
            raise ValueError("trace entries must be finite and nonnegative")

    def __len__(self):
        return len(self.slots)

    def __iter__(self):
        return iter(self.slots.tolist())

    def peak(self) -> float:
        return float(self.slots.max()) if len(self) else 0.0


def load_trace_csv(path) -> DemandTrace:
    """Read ``t,demand`` rows; missing slots between rows are zero demand.

    Lines starting with ``#`` and an optional ``t,demand`` header are skipped.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"trace file not found: {path}")
    values: dict[int, float] = {}
    last = 0
    slot_length = ""
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, sep, value = line[1:].partition("=")
                if sep and key.strip() == "slot_length":
                    slot_length = value.strip()
                continue
            if line.replace(" ", "") == "t,demand":
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != 2:
                raise TraceFormatError(f"{path}:{lineno}: expected 't,demand'")
            try:
                t = int(parts[0])
            except ValueError:
                raise TraceFormatError(f"{path}:{lineno}: slot index {parts[0]!r} is not an integer") from None
            try:
                demand = float(parts[1])
            except ValueError:
                raise TraceFormatError(f"{path}:{lineno}: demand {parts[1]!r} is not numeric") from None
            if t <= last:
                raise TraceFormatError(f"{path}:{lineno}: slot {t} does not increase (previous {last})")
            if not math.isfinite(demand) or demand < 0:
                raise TraceFormatError(f"{path}:{lineno}: demand must be finite and >= 0")
            values[t] = demand
            last = t
    slots = np.zeros(last, dtype=np.float64)
    for t, demand in values.items():
        slots[t - 1] = demand
    return DemandTrace(slots, slot_length)


def write_trace_csv(trace: DemandTrace, path) -> None:
    lines = []
    if trace.slot_length:
        lines.append(f"# slot_length={trace.slot_length}")
    lines.append("t,demand")
    lines += [f"{t},{float(d)!r}" for t, d in enumerate(trace.slots, 1)]
    Path(path).write_text("\n".join(lines) + "\n")


def bin_events(events, slot_seconds: float) -> DemandTrace:
    """Peak concurrency per slot of ``(start, end)`` VM-usage intervals.

    Intervals are half-open ``[start, end)`` in seconds from 0 and must be
    sorted by start. Slot ``t`` covers ``[(t-1)*slot_seconds, t*slot_seconds)``.
    """
    if slot_seconds <= 0:
        raise ValueError("slot_seconds must be positive")
    events = [(float(a), float(b)) for a, b in events]
    for i, (a, b) in enumerate(events):
        if a < 0 or b <= a:
            raise ValueError(f"event {i} must satisfy 0 <= start < end, got ({a}, {b})")
        if i and a < events[i - 1][0]:
            raise ValueError(f"events are not sorted by start at index {i}")
    if not events:
        return DemandTrace(np.zeros(0), f"{slot_seconds}s")
    n_slots = math.ceil(max(b for _, b in events) / slot_seconds)
    marks = sorted([(a, 1) for a, _ in events] + [(b, -1) for _, b in events])
    peak = np.zeros(n_slots, dtype=np.float64)
    level = 0
    i = 0
    for slot in range(n_slots):
        lo, hi = slot * slot_seconds, (slot + 1) * slot_seconds
        # level at the left edge: everything at or before lo has happened
        while i < len(marks) and marks[i][0] <= lo:
            level += marks[i][1]
            i += 1
        best = level
        while i < len(marks) and marks[i][0] < hi:
            t = marks[i][0]
            while i < len(marks) and marks[i][0] == t:
                level += marks[i][1]
                i += 1
            best = max(best, level)
        peak[slot] = best
    return DemandTrace(peak, f"{slot_seconds}s")


def generate_spiky_trace(seed: int, T: int, base: float, spike_prob: float,
                         spike_height: float, spike_len: float = 1.0,
                         noise: float = 0.0, integral: bool = True) -> DemandTrace:
    """Baseline demand with occasional short bursts.

    Each slot starts a spike with probability ``spike_prob``; its height is
    uniform in ``[spike_height / 2, spike_height]`` and its duration is
    geometric with mean ``spike_len`` slots. ``noise`` adds Gaussian jitter
    of that standard deviation. Values are rounded to whole VMs when
    ``integral`` is set.
    """
    if T < 0 or base < 0 or spike_height < 0 or noise < 0:
        raise ValueError("T, base, spike_height and noise must be nonnegative")
    if not 0 <= spike_prob <= 1:
        raise ValueError("spike_prob must lie in [0, 1]")
    if spike_len < 1:
        raise ValueError("spike_len must be >= 1")
    rng = np.random.default_rng(seed)
    starts = rng.random(T) < spike_prob
    heights = rng.uniform(0.5, 1.0, T) * spike_height
    lengths = rng.geometric(1.0 / spike_len, T)
    demand = np.full(T, float(base))
    for t in np.flatnonzero(starts):
        demand[t:t + lengths[t]] += heights[t]
    if noise > 0:
        demand += rng.normal(0.0, noise, T)
    demand = np.maximum(demand, 0.0)
    if integral:
        demand = np.rint(demand)
    return DemandTrace(demand, "synthetic")
