"""Batch drivers shared by the command line and the acceptance tests.

One integer seed feeds every random choice through independent streams
derived from ``(seed, stream, index)``, so adding instances or sweep points
never shifts the randomness of the others.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from brokerscale.demand_model import CurveSpec, synthesize_curve
from brokerscale.fleet import BillingConfig
from brokerscale.oracle import (
    DEFAULT_BUDGET,
    RatioReport,
    check_competitiveness,
    opt_bruteforce,
    opt_dp,
    random_instance,
)
from brokerscale.scaler import ScalerConfig, run_partial_online
from brokerscale.trace import generate_spiky_trace

STREAMS = {"curve": 1, "trace": 2, "instances": 3}

# Aggregated demand: a steady base with short, occasional bursts.
SPIKY_PROFILE = {"base": 30.0, "spike_prob": 0.05, "spike_height": 30.0,
                 "spike_len": 2.0, "noise": 1.0}
DAY_SLOTS = 288  # one day of 5-minute slots


def derive_seed(seed: int, stream: str, index: int = 0) -> int:
    ss = np.random.SeedSequence([int(seed), STREAMS[stream], int(index)])
    return int(ss.generate_state(1)[0])


def _pool_map(fn, items, jobs: int):
    items = list(items)
    if jobs <= 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))  # map keeps input order


# --- ratio verification -----------------------------------------------------

@dataclass
class InstanceResult:
    instance_id: int
    reports: list
    dp_loss: float
    bf_loss: float | None


def _verify_one(job) -> InstanceResult:
    seed, i, ws, t_max, demand_max, cross_check, budget = job
    rng = np.random.default_rng(derive_seed(seed, "instances", i))
    inst = random_instance(rng, i, T_max=t_max, demand_max=demand_max)
    opt = opt_dp(inst.curve, inst.billing, inst.trace, budget=budget)
    bf = None
    if cross_check:
        bf = opt_bruteforce(inst.curve, inst.billing, inst.trace, budget=budget).L_opt
    tau = inst.billing.tau
    wlist = range(tau) if ws is None else [w for w in ws if w < tau]
    reports = [check_competitiveness(inst.curve, inst.billing, inst.trace, w,
                                     instance_id=i, opt=opt) for w in wlist]
    return InstanceResult(i, reports, opt.L_opt, bf)


def verify_batch(seed: int = 0, n_instances: int = 500, ws=None, t_max: int = 10,
                 demand_max: int = 3, cross_check: bool = True,
                 budget: int = DEFAULT_BUDGET, jobs: int = 1) -> list[InstanceResult]:
    """Random small instances checked against the exact oracle.

    ``ws=None`` runs every window ``0..tau-1`` of each instance.
    """
    jobs_in = [(seed, i, None if ws is None else tuple(ws), t_max, demand_max,
                cross_check, budget) for i in range(n_instances)]
    return _pool_map(_verify_one, jobs_in, jobs)


def flat_reports(results) -> list[RatioReport]:
    return [rep for res in results for rep in res.reports]


# --- parameter sweeps -------------------------------------------------------

@dataclass
class SweepRun:
    run_id: str
    seed_index: int
    w: int
    p_m: float
    p_M: float
    P: float
    L: float
    vms_bought: int
    mean_markup: float


SWEEP_RUN_COLUMNS = ("run_id", "seed_index", "w", "p_m", "p_M", "P", "L",
                     "vms_bought", "mean_markup")


def _sweep_one(job) -> list[SweepRun]:
    (seed, k, ws, p_ms, p_M, gamma_star, tau, cost, T, profile, grid_steps) = job
    trace = generate_spiky_trace(derive_seed(seed, "trace", k), T, **profile)
    billing = BillingConfig(tau=tau, gamma_star=gamma_star, cost=cost)
    out = []
    curve_seed = derive_seed(seed, "curve", k)
    for p_m in p_ms:
        curve = synthesize_curve(CurveSpec(p_m=p_m, p_M=p_M, gamma_star=gamma_star, tau=tau,
                                           cost=cost, grid_steps=grid_steps, seed=curve_seed))
        for w in ws:
            led = run_partial_online(curve, billing, ScalerConfig(w, tau), trace)
            mk = led.markup()
            out.append(SweepRun(f"s{k}_w{w}_pm{p_m:.6g}", k, w, p_m, p_M, led.P, led.L,
                                led.vms_bought, float(mk.mean()) if len(mk) else 0.0))
    return out


def sweep(ws, p_ms, *, seed: int = 0, n_seeds: int = 20, p_M: float = 0.8,
          gamma_star: float = 0.3, tau: int = 12, cost: float = 1.0, T: int = DAY_SLOTS,
          profile: dict | None = None, grid_steps: int = 200, jobs: int = 1) -> list[SweepRun]:
    """Run every (w, p_m) pair on ``n_seeds`` synthetic traces.

    The trace and curve seeds depend only on the seed index, so all
    configurations are compared on the same inputs.
    """
    ws, p_ms = list(ws), list(p_ms)
    if not ws or not p_ms:
        raise ValueError("sweep needs at least one w and one p_m value")
    prof = dict(SPIKY_PROFILE if profile is None else profile)
    jobs_in = [(seed, k, ws, p_ms, p_M, gamma_star, tau, cost, T, prof, grid_steps)
               for k in range(n_seeds)]
    return [run for chunk in _pool_map(_sweep_one, jobs_in, jobs) for run in chunk]


def aggregate(runs) -> list[dict]:
    """Mean P, L, VM count and markup per (w, p_m), in first-seen order."""
    groups: dict[tuple, list] = {}
    for r in runs:
        groups.setdefault((r.w, r.p_m), []).append(r)
    rows = []
    for (w, p_m), rs in groups.items():
        rows.append({
            "run_id": f"w{w}_pm{p_m:.6g}",
            "w": w,
            "p_m": p_m,
            "p_M": rs[0].p_M,
            "P": float(np.mean([r.P for r in rs])),
            "L": float(np.mean([r.L for r in rs])),
            "vms_bought": float(np.mean([r.vms_bought for r in rs])),
            "mean_markup": float(np.mean([r.mean_markup for r in rs])),
            "n": len(rs),
        })
    return rows
