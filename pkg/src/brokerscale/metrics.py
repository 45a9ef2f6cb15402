"""Run ledgers, profit/loss totals and report files."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from brokerscale.errors import TraceFormatError

LEDGER_COLUMNS = ("t", "d_star", "d", "gamma", "v", "x", "demand_loss", "vm_cost")
SUMMARY_COLUMNS = ("run_id", "w", "p_m", "p_M", "P", "L", "vms_bought")


def served_revenue(gamma, d) -> np.ndarray:
    """Per-slot ``gamma * d``; slots serving nothing earn 0 whatever the price."""
    gamma = np.asarray(gamma, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    with np.errstate(invalid="ignore"):
        return np.where(d > 0, gamma * d, 0.0)


@dataclass
class RunLedger:
    """Per-slot record of one simulated run."""

    d_star: np.ndarray
    d: np.ndarray
    gamma: np.ndarray
    v: np.ndarray
    x: np.ndarray
    demand_loss: np.ndarray
    vm_cost: np.ndarray
    gamma_star: float
    cost: float = 1.0
    run_id: str = "run"
    algorithm: str = ""
    w: int | None = None
    p_m: float = math.nan
    p_M: float = math.nan
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.d_star = np.asarray(self.d_star, dtype=np.float64)
        self.d = np.asarray(self.d, dtype=np.float64)
        self.gamma = np.asarray(self.gamma, dtype=np.float64)
        self.v = np.asarray(self.v, dtype=np.int64)
        self.x = np.asarray(self.x, dtype=np.int64)
        self.demand_loss = np.asarray(self.demand_loss, dtype=np.float64)
        self.vm_cost = np.asarray(self.vm_cost, dtype=np.float64)
        n = len(self.d_star)
        for name in LEDGER_COLUMNS[2:]:
            if len(getattr(self, name)) != n:
                raise ValueError(f"ledger column {name!r} has wrong length")

    @classmethod
    def from_decisions(cls, d_star, d, gamma, v, x, *, gamma_star, cost=1.0, **meta):
        """Build a ledger deriving demand loss and VM cost from the decisions."""
        d_star = np.asarray(d_star, dtype=np.float64)
        v = np.asarray(v, dtype=np.int64)
        loss = gamma_star * d_star - served_revenue(gamma, d)
        return cls(d_star, d, gamma, v, x, loss, cost * v.astype(np.float64),
                   gamma_star=gamma_star, cost=cost, **meta)

    def __len__(self):
        return len(self.d_star)

    @property
    def t(self) -> np.ndarray:
        return np.arange(1, len(self) + 1)

    @property
    def P(self) -> float:
        return profit(self)

    @property
    def L(self) -> float:
        return loss(self)

    @property
    def vms_bought(self) -> int:
        return int(self.v.sum())

    def markup(self) -> np.ndarray:
        """``gamma_t - gamma_star`` over slots that serve demand."""
        served = self.d > 0
        return self.gamma[served] - self.gamma_star


def profit(ledger: RunLedger) -> float:
    """Total profit: revenue from served demand minus VM purchases."""
    return float(served_revenue(ledger.gamma, ledger.d).sum() - ledger.cost * ledger.v.sum())


def loss(ledger: RunLedger) -> float:
    """Total loss: recorded demand loss plus recorded VM cost."""
    return float(ledger.demand_loss.sum() + ledger.vm_cost.sum())


def check_duality(ledger: RunLedger, rtol: float = 1e-9) -> bool:
    """Profit plus loss must equal nominal revenue of the actual demand."""
    nominal = ledger.gamma_star * float(ledger.d_star.sum())
    return abs(profit(ledger) + loss(ledger) - nominal) <= rtol * (1.0 + abs(nominal))


def _num(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    value = float(value)
    if math.isnan(value):
        return ""
    return repr(value)


def ledger_to_csv(ledger: RunLedger) -> str:
    buf = io.StringIO()
    meta = {
        "run_id": ledger.run_id,
        "algorithm": ledger.algorithm,
        "gamma_star": repr(float(ledger.gamma_star)),
        "cost": repr(float(ledger.cost)),
        "w": "" if ledger.w is None else str(ledger.w),
        "p_m": _num(ledger.p_m),
        "p_M": _num(ledger.p_M),
    }
    for key, value in meta.items():
        buf.write(f"# {key}={value}\n")
    buf.write(",".join(LEDGER_COLUMNS) + "\n")
    for i in range(len(ledger)):
        row = (i + 1, ledger.d_star[i], ledger.d[i], ledger.gamma[i], ledger.v[i],
               ledger.x[i], ledger.demand_loss[i], ledger.vm_cost[i])
        buf.write(",".join(_num(c) for c in row) + "\n")
    buf.write(f"# P={ledger.P!r}\n# L={ledger.L!r}\n")
    return buf.getvalue()


def write_ledger(ledger: RunLedger, path) -> None:
    Path(path).write_text(ledger_to_csv(ledger))


def read_ledger(path) -> RunLedger:
    meta: dict[str, str] = {}
    cols: dict[str, list] = {c: [] for c in LEDGER_COLUMNS}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, sep, value = line[1:].partition("=")
                if sep:
                    meta[key.strip()] = value.strip()
                continue
            if line == ",".join(LEDGER_COLUMNS):
                continue
            parts = line.split(",")
            if len(parts) != len(LEDGER_COLUMNS):
                raise TraceFormatError(f"{path}:{lineno}: expected {len(LEDGER_COLUMNS)} fields")
            try:
                for name, text in zip(LEDGER_COLUMNS, parts):
                    cols[name].append(int(text) if name in ("t", "v", "x") else float(text))
            except ValueError:
                raise TraceFormatError(f"{path}:{lineno}: non-numeric field") from None
    if "gamma_star" not in meta:
        raise TraceFormatError(f"{path}: missing '# gamma_star=' header")
    w = meta.get("w", "")
    return RunLedger(
        cols["d_star"], cols["d"], cols["gamma"], cols["v"], cols["x"],
        cols["demand_loss"], cols["vm_cost"],
        gamma_star=float(meta["gamma_star"]),
        cost=float(meta.get("cost", "1.0")),
        run_id=meta.get("run_id", Path(path).stem),
        algorithm=meta.get("algorithm", ""),
        w=int(w) if w else None,
        p_m=float(meta["p_m"]) if meta.get("p_m") else math.nan,
        p_M=float(meta["p_M"]) if meta.get("p_M") else math.nan,
    )


def summary_row(ledger: RunLedger) -> dict:
    return {
        "run_id": ledger.run_id,
        "w": "" if ledger.w is None else ledger.w,
        "p_m": _num(ledger.p_m),
        "p_M": _num(ledger.p_M),
        "P": repr(ledger.P),
        "L": repr(ledger.L),
        "vms_bought": ledger.vms_bought,
    }


def write_summary(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)


def emit_report(ledgers, out_dir, overwrite: bool = False) -> list[Path]:
    """Write one CSV per ledger plus ``summary.csv`` into ``out_dir``.

    Refuses to replace existing files unless ``overwrite`` is set.
    """
    ledgers = list(ledgers)
    out = Path(out_dir)
    ids = [led.run_id for led in ledgers]
    if len(set(ids)) != len(ids):
        raise ValueError("run ids must be unique within a report")
    targets = [out / f"{rid}.csv" for rid in ids] + [out / "summary.csv"]
    if not overwrite:
        existing = [p for p in targets if p.exists()]
        if existing:
            raise FileExistsError(f"{existing[0]} exists; pass overwrite=True to replace")
    out.mkdir(parents=True, exist_ok=True)
    for led, path in zip(ledgers, targets):
        write_ledger(led, path)
    write_summary([summary_row(led) for led in ledgers], targets[-1])
    return targets
