"""Offline optimum on small instances and competitive-ratio checks.

With the purchase vector fixed, serving ``min(d*_t, capacity_t)`` is
loss-minimal (each extra served unit earns at least ``p_m > 0``), so the
offline problem reduces to choosing integer purchases. The exact solver is
a dynamic program over the last ``tau - 1`` purchases; a brute-force
enumerator cross-checks it.

Ties between optimal schedules are broken by fewest VMs, then by the
lexicographically smallest purchase vector; the reported loss is always
re-evaluated on the chosen schedule by :func:`schedule_loss`.
"""
from __future__ import annotations

import csv
import math
from dataclasses import astuple, dataclass

import numpy as np

from brokerscale import kernels
from brokerscale.demand_model import (
    CurveSpec,
    PriceDemandCurve,
    demand_loss,
    price_for_demand,
    synthesize_curve,
)
from brokerscale.errors import DomainError, InstanceTooLarge
from brokerscale.fleet import BillingConfig
from brokerscale.metrics import RunLedger
from brokerscale.scaler import ScalerConfig, active_counts, run_partial_online
from brokerscale.trace import DemandTrace

DEFAULT_BUDGET = 10**7
TIE_EPS = 1e-12


@dataclass
class OptSchedule:
    v: np.ndarray
    L_opt: float
    d: np.ndarray
    x: np.ndarray

    @property
    def N(self) -> int:
        return int(self.v.sum())


def _demand(trace) -> np.ndarray:
    return np.asarray(trace.slots if isinstance(trace, DemandTrace) else trace, dtype=np.float64)


def _resolve_dmax(demand: np.ndarray, d_max: int | None) -> int:
    need = math.ceil(demand.max()) if len(demand) else 0
    if d_max is None:
        return need
    if d_max < need:
        raise DomainError(f"d_max={d_max} is below peak demand {need}")
    return int(d_max)


def loss_table(curve: PriceDemandCurve, demand, d_max: int) -> np.ndarray:
    """``table[t, k]``: demand loss of slot ``t`` when ``k`` VMs are active.

    Column ``d_max`` stands for any capacity covering the slot.
    """
    demand = np.asarray(demand, dtype=np.float64)
    table = np.zeros((len(demand), d_max + 1))
    for t, ds in enumerate(demand):
        for k in range(d_max + 1):
            table[t, k] = demand_loss(curve, ds, min(ds, float(k)))
    return table


def schedule_loss(table: np.ndarray, v, tau: int, cost: float) -> float:
    v = np.asarray(v, dtype=np.int64)
    cap = np.minimum(active_counts(v, tau), table.shape[1] - 1)
    total = 0.0
    for t in range(len(v)):
        total += table[t, cap[t]] + cost * v[t]
    return float(total)


def _schedule(table, demand, v, tau, cost) -> OptSchedule:
    v = np.asarray(v, dtype=np.int64)
    x = active_counts(v, tau)
    return OptSchedule(v, schedule_loss(table, v, tau, cost), np.minimum(demand, x), x)


def opt_dp(curve: PriceDemandCurve, billing: BillingConfig, trace, d_max: int | None = None,
           budget: int = DEFAULT_BUDGET, backend: str | None = None) -> OptSchedule:
    """Exact offline optimum by dynamic programming."""
    demand = _demand(trace)
    d_max = _resolve_dmax(demand, d_max)
    tau = billing.tau
    n_states = (d_max + 1) ** (tau - 1)
    if len(demand) * n_states > budget:
        raise InstanceTooLarge(
            f"instance too large for exact oracle: T*(d_max+1)^(tau-1)="
            f"{len(demand) * n_states} > budget {budget}"
        )
    table = loss_table(curve, demand, d_max)
    if len(demand) == 0:
        return _schedule(table, demand, [], tau, billing.cost)
    choice = kernels.get(backend).dp_solve(table, tau, d_max, billing.cost, TIE_EPS)
    base = d_max + 1
    shift = base ** (tau - 2)
    state = 0
    v = np.zeros(len(demand), dtype=np.int64)
    for t in range(len(demand)):
        v[t] = choice[t, state]
        state = (state % shift) * base + int(v[t])
    return _schedule(table, demand, v, tau, billing.cost)


def opt_bruteforce(curve: PriceDemandCurve, billing: BillingConfig, trace,
                   d_max: int | None = None, budget: int = DEFAULT_BUDGET,
                   chunk: int = 1 << 16) -> OptSchedule:
    """Exact offline optimum by enumerating every purchase vector."""
    demand = _demand(trace)
    d_max = _resolve_dmax(demand, d_max)
    n = len(demand)
    base = d_max + 1
    total = base**n
    if total > budget:
        raise InstanceTooLarge(f"brute force needs {total} vectors > budget {budget}")
    table = loss_table(curve, demand, d_max)
    if n == 0:
        return _schedule(table, demand, [], billing.tau, billing.cost)
    weights = base ** np.arange(n - 1, -1, -1, dtype=np.int64)
    cols = np.arange(n)
    losses = np.empty(total)
    counts = np.empty(total, dtype=np.int64)
    for start in range(0, total, chunk):
        idx = np.arange(start, min(total, start + chunk), dtype=np.int64)
        v = (idx[:, None] // weights[None, :]) % base
        csum = np.concatenate((np.zeros((len(idx), 1), dtype=np.int64), np.cumsum(v, axis=1)), axis=1)
        cap = csum[:, 1:] - csum[:, np.maximum(cols + 1 - billing.tau, 0)]
        cap = np.minimum(cap, d_max)
        counts[start:start + len(idx)] = v.sum(axis=1)
        losses[start:start + len(idx)] = (table[cols[None, :], cap].sum(axis=1)
                                          + billing.cost * counts[start:start + len(idx)])
    best = losses.min()
    tie = losses <= best + TIE_EPS * (1.0 + abs(best))
    cand = np.flatnonzero(tie)
    pick = cand[np.argmin(counts[cand])]
    v = (pick // weights) % base
    return _schedule(table, demand, v, billing.tau, billing.cost)


def theoretical_ratio(p_M: float, tau: int, w: int, cost: float = 1.0) -> float:
    """Competitive ratio ``1 + min(1, p_M * tau * (1 - w / tau))`` (cost-normalised)."""
    if not 0 <= w < tau:
        raise DomainError(f"need 0 <= w < tau: w={w}, tau={tau}")
    if not p_M * tau > cost:
        raise DomainError(f"need p_M * tau > cost: {p_M} * {tau} <= {cost}")
    return 1.0 + min(1.0, (p_M / cost) * tau * (1.0 - w / tau))


def schedule_to_ledger(curve: PriceDemandCurve, billing: BillingConfig, trace,
                       schedule: OptSchedule, run_id: str = "opt") -> RunLedger:
    """Expand a purchase schedule into a full ledger (prices from the curve)."""
    demand = _demand(trace)
    gamma = np.empty(len(demand))
    for t, (ds, d) in enumerate(zip(demand, schedule.d)):
        if d == ds:
            gamma[t] = billing.gamma_star
        elif d == 0 and not curve.finite_zone:
            gamma[t] = math.inf
        else:
            gamma[t] = price_for_demand(curve, ds, d)
    return RunLedger.from_decisions(
        demand, schedule.d, gamma, schedule.v, schedule.x,
        gamma_star=billing.gamma_star, cost=billing.cost, run_id=run_id,
        algorithm="opt", p_m=curve.p_m, p_M=curve.p_M,
    )


@dataclass
class RatioReport:
    instance_id: int
    w: int
    L_A: float
    L_OPT: float
    ratio: float
    c_alpha: float
    passed: bool
    N_w: int
    N_OPT: int

    @property
    def vms_within_opt(self) -> bool:
        return self.N_w <= self.N_OPT


RATIO_COLUMNS = ("instance_id", "w", "L_A", "L_OPT", "ratio", "c_alpha", "pass", "N_w", "N_OPT")


def check_competitiveness(curve: PriceDemandCurve, billing: BillingConfig, trace, w: int,
                          d_max: int | None = None, instance_id: int = 0,
                          opt: OptSchedule | None = None, budget: int = DEFAULT_BUDGET,
                          tol: float = 1e-9) -> RatioReport:
    """Compare the online loss with ``c(alpha)`` times the offline optimum."""
    if opt is None:
        opt = opt_dp(curve, billing, trace, d_max=d_max, budget=budget)
    ledger = run_partial_online(curve, billing, ScalerConfig(w, billing.tau), trace)
    L_A = ledger.L
    c = theoretical_ratio(curve.p_M, billing.tau, w, billing.cost)
    if opt.L_opt > 0:
        ratio = float(L_A / opt.L_opt)
    else:
        ratio = 1.0 if L_A <= tol else math.inf
    return RatioReport(instance_id, w, L_A, float(opt.L_opt), ratio, c,
                       bool(L_A <= c * opt.L_opt + tol), ledger.vms_bought, opt.N)


def write_ratio_reports(reports, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RATIO_COLUMNS)
        for rep in reports:
            row = astuple(rep)
            writer.writerow([str(c).lower() if isinstance(c, (bool, np.bool_)) else
                             (repr(float(c)) if isinstance(c, (float, np.floating)) else c)
                             for c in row])


def random_curve(rng: np.random.Generator, tau: int, cost: float = 1.0,
                 grid_steps: int = 50) -> PriceDemandCurve:
    """Synthesize a curve with randomly drawn admissible bounds."""
    floor = cost / tau
    p_m = floor + (cost - floor) * rng.uniform(0.02, 0.6)
    p_M = p_m + (cost - p_m) * rng.uniform(0.2, 0.98)
    gamma_star = p_m + (p_M - p_m) * rng.uniform(0.05, 0.8)
    spec = CurveSpec(p_m=p_m, p_M=p_M, gamma_star=gamma_star, tau=tau, cost=cost,
                     grid_steps=grid_steps, seed=int(rng.integers(2**32)))
    return synthesize_curve(spec)


@dataclass
class Instance:
    instance_id: int
    curve: PriceDemandCurve
    billing: BillingConfig
    trace: DemandTrace


def random_instance(rng: np.random.Generator, instance_id: int = 0, T_max: int = 10,
                    taus=(3, 4), demand_max: int = 3, cost: float = 1.0) -> Instance:
    tau = int(rng.choice(taus))
    n = int(rng.integers(1, T_max + 1))
    demand = rng.integers(0, demand_max + 1, n).astype(np.float64)
    curve = random_curve(rng, tau, cost)
    billing = BillingConfig(tau=tau, gamma_star=curve.gamma_star, cost=cost)
    return Instance(instance_id, curve, billing, DemandTrace(demand))
