"""Active-VM bookkeeping under quantized billing.

A VM bought in slot ``t`` is paid for ``tau`` slots and serves slots
``t .. t + tau - 1``; it is never returned early.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from brokerscale.errors import ConfigError


@dataclass(frozen=True)
class BillingConfig:
    tau: int
    gamma_star: float
    cost: float = 1.0

    def __post_init__(self):
        if int(self.tau) != self.tau or self.tau < 2:
            raise ConfigError(f"tau >= 2 violated: tau={self.tau}")
        if not self.cost > 0:
            raise ConfigError(f"cost > 0 violated: cost={self.cost}")
        if not self.gamma_star * self.tau > self.cost:
            raise ConfigError(
                f"gamma_star * tau > cost violated: {self.gamma_star} * {self.tau} <= {self.cost}"
            )


class FleetState:
    """Ring of the last ``tau`` per-slot purchase counts.

    Slots are 1-based and the state starts at slot 1 with no VMs.
    """

    def __init__(self, tau: int, cost: float = 1.0):
        if tau < 1:
            raise ConfigError(f"tau >= 1 violated: tau={tau}")
        self.tau = tau
        self.cost = cost
        self.slot = 1
        self.purchases: deque[int] = deque([0] * tau, maxlen=tau)
        self.total_bought = 0
        self._active = 0

    @property
    def active(self) -> int:
        return self._active

    @property
    def spent(self) -> float:
        return self.cost * self.total_bought

    def buy(self, n: int) -> "FleetState":
        if n < 0 or int(n) != n:
            raise ValueError(f"purchase count must be a nonnegative integer, got {n}")
        self.purchases[-1] += n
        self._active += n
        self.total_bought += n
        return self

    def advance(self) -> "FleetState":
        self._active -= self.purchases[0]
        self.purchases.append(0)
        self.slot += 1
        return self

    def __repr__(self):
        return f"FleetState(slot={self.slot}, active={self.active}, purchases={list(self.purchases)})"
