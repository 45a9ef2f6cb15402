"""Break-even scaling with dynamic pricing, and the static-price baseline.

The online scaler trims demand by raising the price and keeps a running
"net renting cost": the demand loss it would have avoided over the window
``[t + w - tau + 1, t + w]`` with one more VM. Once that reaches the price
of a VM it buys one, credits the whole window with the extra unit and
re-evaluates. ``w = 0`` is the fully online case; ``w > 0`` looks ``w``
slots ahead with perfect knowledge.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from brokerscale import _pykernels, kernels
from brokerscale.demand_model import PriceDemandCurve
from brokerscale.errors import ConfigError
from brokerscale.fleet import BillingConfig, FleetState
from brokerscale.metrics import RunLedger
from brokerscale.trace import DemandTrace


@dataclass(frozen=True)
class ScalerConfig:
    w: int
    tau: int

    def __post_init__(self):
        if not 0 <= self.w < self.tau:
            raise ConfigError(f"0 <= w < tau violated: w={self.w}, tau={self.tau}")

    @property
    def alpha(self) -> float:
        return self.w / self.tau


class HorizonCapacity:
    """Planned VM counts ``x_1 .. x_T``; reads outside the horizon give 0."""

    def __init__(self, n_slots: int):
        self.n_slots = n_slots
        self.x = [0] * (n_slots + 1)

    def __getitem__(self, i: int) -> int:
        return self.x[i] if 1 <= i <= self.n_slots else 0

    def window(self, lo: int, hi: int) -> list[int]:
        return [self[i] for i in range(lo, hi + 1)]


def _check_pair(curve: PriceDemandCurve, billing: BillingConfig) -> None:
    if curve.gamma_star != billing.gamma_star:
        raise ConfigError(
            f"curve gamma_star {curve.gamma_star!r} != billing gamma_star {billing.gamma_star!r}"
        )


def net_renting_cost(curve: PriceDemandCurve, demand: Sequence[float],
                     x: Sequence[int]) -> float:
    """Demand loss avoidable with one extra VM over a window.

    ``demand`` and ``x`` are aligned slices; slots already covered
    (``x_i + 1 > d*_i``) contribute nothing. Pad outside the horizon with
    zero demand.
    """
    if len(demand) != len(x):
        raise ValueError("demand and capacity windows differ in length")
    gam, rat, tail_b = curve._lists
    total = 0.0
    for ds, xi in zip(demand, x):
        if xi + 1 <= ds:
            total += _pykernels.unit_rent(gam, rat, tail_b, float(ds), xi)
    return total


@dataclass(frozen=True)
class StepResult:
    t: int
    gamma: float
    v: int
    x: int
    d: float


class PartialOnlineScaler:
    """Slot-by-slot driver of the windowed scaler.

    Each :meth:`step` receives the demand forecast for slots
    ``t .. t + w`` (shorter near the horizon end); the first entry is the
    realised demand of the current slot.
    """

    def __init__(self, curve: PriceDemandCurve, billing: BillingConfig,
                 config: ScalerConfig, n_slots: int):
        _check_pair(curve, billing)
        if config.tau != billing.tau:
            raise ConfigError("scaler and billing disagree on tau")
        self.curve = curve
        self.billing = billing
        self.config = config
        self.n_slots = n_slots
        self.dstar = [0.0] * (n_slots + 1)
        self.capacity = HorizonCapacity(n_slots)
        self.fleet = FleetState(billing.tau, billing.cost)
        self.t = 0

    def step(self, window: Sequence[float]) -> StepResult:
        t = self.t + 1
        if t > self.n_slots:
            raise IndexError("scaler horizon exhausted")
        w = self.config.w
        if not window or len(window) > w + 1:
            raise ValueError(f"window must hold 1..{w + 1} values")
        for k, ds in enumerate(window):
            if t + k <= self.n_slots:
                self.dstar[t + k] = float(ds)
        gam, rat, tail_b = self.curve._lists
        bought, gamma = _pykernels.online_slot(
            gam, rat, tail_b, self.dstar, self.capacity.x, t, self.n_slots,
            self.billing.tau, w, self.billing.cost,
        )
        if t > 1:
            self.fleet.advance()
        self.fleet.buy(bought)
        x_t = self.capacity[t]
        if x_t != self.fleet.active:
            raise RuntimeError(f"planned capacity {x_t} != active VMs {self.fleet.active} at t={t}")
        self.t = t
        return StepResult(t, gamma, bought, x_t, min(self.dstar[t], float(x_t)))


def active_counts(v, tau: int) -> np.ndarray:
    """Active VMs per slot given purchases ``v`` (each lives ``tau`` slots)."""
    v = np.asarray(v, dtype=np.int64)
    csum = np.concatenate(([0], np.cumsum(v)))
    idx = np.arange(1, len(v) + 1)
    return csum[idx] - csum[np.maximum(idx - tau, 0)]


def run_partial_online(curve: PriceDemandCurve, billing: BillingConfig,
                       config: ScalerConfig, trace, backend: str | None = None,
                       run_id: str | None = None) -> RunLedger:
    """Run the windowed scaler over a full trace and return its ledger."""
    _check_pair(curve, billing)
    if config.tau != billing.tau:
        raise ConfigError("scaler and billing disagree on tau")
    demand = np.asarray(trace.slots if isinstance(trace, DemandTrace) else trace,
                        dtype=np.float64)
    gam, rat, tail_b = curve.kernel_args
    impl = kernels.get(backend)
    if impl is _pykernels:
        gam, rat = gam.tolist(), rat.tolist()
    v, x, gamma = impl.run_online(gam, rat, tail_b, demand, billing.tau, config.w, billing.cost)
    if not np.array_equal(x, active_counts(v, billing.tau)):
        raise RuntimeError("planned capacity diverged from the active fleet")
    d = np.minimum(demand, x)
    return RunLedger.from_decisions(
        demand, d, gamma, v, x, gamma_star=billing.gamma_star, cost=billing.cost,
        run_id=run_id or f"online_w{config.w}", algorithm="online", w=config.w,
        p_m=curve.p_m, p_M=curve.p_M,
    )


def run_static(curve: PriceDemandCurve, billing: BillingConfig, trace,
               run_id: str = "static") -> RunLedger:
    """Serve all demand at the nominal price, buying VMs as needed."""
    _check_pair(curve, billing)
    demand = np.asarray(trace.slots if isinstance(trace, DemandTrace) else trace,
                        dtype=np.float64)
    fleet = FleetState(billing.tau, billing.cost)
    v = np.zeros(len(demand), dtype=np.int64)
    x = np.zeros(len(demand), dtype=np.int64)
    for i, ds in enumerate(demand):
        if i:
            fleet.advance()
        v[i] = max(0, math.ceil(ds) - fleet.active)
        fleet.buy(int(v[i]))
        x[i] = fleet.active
    gamma = np.full(len(demand), billing.gamma_star)
    return RunLedger.from_decisions(
        demand, demand.copy(), gamma, v, x, gamma_star=billing.gamma_star,
        cost=billing.cost, run_id=run_id, algorithm="static",
        p_m=curve.p_m, p_M=curve.p_M,
    )
