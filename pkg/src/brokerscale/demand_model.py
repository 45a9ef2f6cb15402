"""Price-demand curves and the per-slot cost quantities derived from them.

A curve maps a posted price ``gamma`` to the fraction of actual demand
that stays, ``ratio(gamma) = d / d_star``. It is tabulated on knots and
linearly interpolated in ``(gamma, ratio)``; ``ratio`` is 1 at the
nominal price and falls to 0 at ``gamma_op`` for a finite operating zone.
Curves whose last knot has a positive ratio continue with a hyperbolic
tail whose marginal revenue is the declared ``p_m`` (semi-infinite zone).

Because the served revenue is ``d * g(d_star, d) = d_star * rho(d / d_star)``,
marginal unit revenue depends on the served fraction only. Inside a
segment it is affine in ``gamma`` and ranges between its values at the two
knots, so checking knots bounds it everywhere.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import TYPE_CHECKING, NamedTuple

import numpy as np

from brokerscale import _pykernels as _k
from brokerscale.errors import (
    ConfigError,
    DomainError,
    TraceFormatError,
    UnreachableDemandError,
)

if TYPE_CHECKING:
    from brokerscale.fleet import BillingConfig

VALIDATION_TOL = 1e-6
# relative slack on cost/tau <= p_m: admits decimal renderings such as 0.0833 for 1/12
FLOOR_RTOL = 1e-3


@dataclass(frozen=True)
class CurveSpec:
    """Parameters for :func:`synthesize_curve`.

    ``gamma_max`` defaults to ``p_M``: revenue vanishing at zero demand
    with marginal revenue at most ``p_M`` caps every price at ``p_M``.
    """

    p_m: float
    p_M: float
    gamma_star: float
    tau: int
    cost: float = 1.0
    gamma_max: float | None = None
    grid_steps: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.gamma_max is None:
            object.__setattr__(self, "gamma_max", self.p_M)
        check_bounds(self.p_m, self.p_M, self.tau, self.cost)
        if not self.gamma_star > self.p_m:
            raise ConfigError(
                f"gamma_star > p_m violated: gamma_star={self.gamma_star}, p_m={self.p_m}"
            )
        if not self.gamma_star * self.tau > self.cost:
            raise ConfigError(
                f"gamma_star * tau > cost violated: {self.gamma_star} * {self.tau} <= {self.cost}"
            )
        if self.grid_steps < 1:
            raise ConfigError(f"grid_steps >= 1 violated: grid_steps={self.grid_steps}")
        if not self.gamma_max > self.gamma_star:
            raise ConfigError(
                f"gamma_max > gamma_star violated: gamma_max={self.gamma_max}, "
                f"gamma_star={self.gamma_star}"
            )
        if self.gamma_max > self.p_M:
            raise ConfigError(
                f"gamma_max <= p_M violated: gamma_max={self.gamma_max}, p_M={self.p_M}"
            )
        if not self.p_M - self.p_m > 2.0 * self.step:
            raise ConfigError(
                f"p_M - p_m > 2 * grid step violated: p_M - p_m={self.p_M - self.p_m}, "
                f"step={self.step}; increase grid_steps"
            )

    @property
    def step(self) -> float:
        return (self.gamma_max - self.gamma_star) / self.grid_steps


def check_bounds(p_m: float, p_M: float, tau: int, cost: float = 1.0) -> None:
    """Raise :class:`ConfigError` unless ``cost/tau <= p_m <= p_M < cost``.

    The lower end is inclusive (``p_m = 1/tau`` is the usual choice) and
    tolerates ``FLOOR_RTOL`` relative rounding.
    """
    if tau < 2:
        raise ConfigError(f"tau >= 2 violated: tau={tau}")
    if not cost > 0:
        raise ConfigError(f"cost > 0 violated: cost={cost}")
    if not cost / tau <= p_m * (1.0 + FLOOR_RTOL):
        raise ConfigError(f"cost/tau <= p_m violated: cost/tau={cost / tau}, p_m={p_m}")
    if not p_m <= p_M:
        raise ConfigError(f"p_m <= p_M violated: p_m={p_m}, p_M={p_M}")
    if not p_M < cost:
        raise ConfigError(f"p_M < cost violated: p_M={p_M}, cost={cost}")


@dataclass(frozen=True)
class PriceDemandCurve:
    """Tabulated monotone price to demand-ratio relation.

    ``p_m`` and ``p_M`` are the declared marginal-revenue bounds of the
    generating spec; :func:`validate` measures the table against them.
    """

    gammas: tuple[float, ...]
    ratios: tuple[float, ...]
    p_m: float
    p_M: float
    meta: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        gammas = tuple(float(g) for g in self.gammas)
        ratios = tuple(float(r) for r in self.ratios)
        if not gammas or len(gammas) != len(ratios):
            raise ConfigError("curve needs at least one knot and matching gamma/ratio columns")
        if any(b <= a for a, b in zip(gammas, gammas[1:])):
            raise ConfigError("knot prices must be strictly increasing")
        if not all(math.isfinite(v) for v in gammas + ratios):
            raise ConfigError("knot values must be finite")
        object.__setattr__(self, "gammas", gammas)
        object.__setattr__(self, "ratios", ratios)

    @property
    def gamma_star(self) -> float:
        return self.gammas[0]

    @cached_property
    def _n_active(self) -> int:
        # knots up to and including the first zero ratio
        for i, r in enumerate(self.ratios):
            if r <= 0.0:
                return i + 1
        return len(self.ratios)

    @property
    def finite_zone(self) -> bool:
        return self.ratios[self._n_active - 1] <= 0.0

    @property
    def gamma_op(self) -> float:
        """First price where demand vanishes; ``inf`` for a semi-infinite zone."""
        return self.gammas[self._n_active - 1] if self.finite_zone else math.inf

    @cached_property
    def kernel_args(self) -> tuple[np.ndarray, np.ndarray, float]:
        n = self._n_active
        gam = np.array(self.gammas[:n], dtype=np.float64)
        rat = np.array(self.ratios[:n], dtype=np.float64)
        if self.finite_zone:
            rat[-1] = 0.0
        return gam, rat, float(self.p_m)

    @cached_property
    def _lists(self) -> tuple[list[float], list[float], float]:
        gam, rat, tail_b = self.kernel_args
        return gam.tolist(), rat.tolist(), tail_b

    def ratio(self, gamma: float) -> float:
        """Fraction of actual demand retained at price ``gamma``."""
        gam, rat, tail_b = self._lists
        if gamma <= gam[0]:
            return 1.0
        j = bisect.bisect_right(gam, gamma) - 1
        if j < len(gam) - 1:
            return rat[j] - (gamma - gam[j]) * (rat[j] - rat[j + 1]) / (gam[j + 1] - gam[j])
        if self.finite_zone:
            return 0.0
        return rat[-1] * (gam[-1] - tail_b) / (gamma - tail_b)

    def revenue(self, d_star: float, d: float) -> float:
        """``d * g(d_star, d)``, zero when nothing is served."""
        gam, rat, tail_b = self._lists
        return _k.revenue(gam, rat, tail_b, d_star, d)


def _check_demands(d_star: float, d: float) -> None:
    if d_star < 0 or d < 0:
        raise DomainError(f"demands must be nonnegative: d_star={d_star}, d={d}")
    if d > d_star:
        raise DomainError(f"served demand exceeds actual demand: d={d} > d_star={d_star}")


def synthesize_curve(spec: CurveSpec) -> PriceDemandCurve:
    """Random curve whose marginal revenue stays within ``[p_m, p_M]``.

    Walks the uniform price grid from ``gamma_star``. At each grid price the
    slope of price in served fraction is drawn uniformly from the admissible
    band; in terms of ``u = -ratio * dgamma/dratio`` (the price distance to
    the slope line's zero) the band is ``(max(0, gamma - p_M), gamma - p_m]``,
    narrowed by two grid steps at the upper end so that the marginal revenue
    at the far knot of the segment also stays below ``p_M``. If the line
    reaches zero inside the step the curve ends there; the last grid step
    always ends the curve.
    """
    rng = np.random.default_rng(spec.seed)
    step = spec.step
    g0 = spec.gamma_star
    gammas = [g0]
    ratios = [1.0]
    for k in range(spec.grid_steps):
        g = g0 + k * step
        s = ratios[-1]
        if k == spec.grid_steps - 1:
            lo, hi = 0.0, min(g - spec.p_m, step)
        else:
            lo, hi = max(0.0, g + 2.0 * step - spec.p_M), g - spec.p_m
        u = hi - rng.random() * (hi - lo)
        if u <= step:
            gammas.append(g + u)
            ratios.append(0.0)
            break
        gammas.append(g0 + (k + 1) * step)
        ratios.append(s * (1.0 - step / u))
    return PriceDemandCurve(
        tuple(gammas),
        tuple(ratios),
        spec.p_m,
        spec.p_M,
        meta={"seed": spec.seed, "tau": spec.tau, "cost": spec.cost},
    )


def price_for_demand(curve: PriceDemandCurve, d_star: float, d: float) -> float:
    """Price ``g(d_star, d)`` that trims actual demand ``d_star`` to ``d``."""
    _check_demands(d_star, d)
    if d == d_star:
        return curve.gamma_star
    if d == 0 and not curve.finite_zone:
        raise UnreachableDemandError(
            "zero demand is unreachable on a semi-infinite operating zone"
        )
    gam, rat, tail_b = curve._lists
    return _k.price(gam, rat, tail_b, d / d_star)


def demand_loss(curve: PriceDemandCurve, d_star: float, d: float) -> float:
    """Revenue given up by serving ``d`` instead of ``d_star``."""
    _check_demands(d_star, d)
    if d == d_star:
        return 0.0
    return curve.gamma_star * d_star - curve.revenue(d_star, d)


def renting_cost(curve: PriceDemandCurve, d_star: float, d: float, n: float) -> float:
    """Demand loss of trimming served demand from ``d`` to ``d - n``."""
    _check_demands(d_star, d)
    if n < 0 or n > d:
        raise DomainError(f"reduction must satisfy 0 <= n <= d: n={n}, d={d}")
    return curve.revenue(d_star, d) - curve.revenue(d_star, d - n)


def marginal_unit_revenue(curve: PriceDemandCurve, d_star: float, d: float) -> float:
    """Finite-difference derivative of ``d * g(d_star, d)`` in ``d``.

    Central difference with half-width ``min(0.5, d / 10)``; the upper
    point is clipped to ``d_star`` (one-sided at ``d == d_star``).
    """
    if not 0 < d <= d_star:
        raise DomainError(f"need 0 < d <= d_star: d={d}, d_star={d_star}")
    h = min(0.5, d / 10.0)
    lo = d - h
    hi = min(d_star, d + h)
    return (curve.revenue(d_star, hi) - curve.revenue(d_star, lo)) / (hi - lo)


class Segment(NamedTuple):
    gamma_lo: float
    gamma_hi: float
    p_lo: float
    p_hi: float


def segments(curve: PriceDemandCurve) -> list[Segment]:
    """Marginal revenue at both ends of every strictly decreasing segment."""
    out = []
    gam, rat = curve.gammas, curve.ratios
    for j in range(curve._n_active - 1):
        drop = rat[j] - rat[j + 1]
        if drop <= 0 or rat[j] <= 0:
            continue
        dg = gam[j + 1] - gam[j]
        out.append(Segment(gam[j], gam[j + 1], gam[j] - rat[j] * dg / drop,
                           gam[j + 1] - rat[j + 1] * dg / drop))
    return out


def measured_bounds(curve: PriceDemandCurve) -> tuple[float, float]:
    """Smallest and largest marginal unit revenue over the table (and tail)."""
    lows = [s.p_lo for s in segments(curve)]
    highs = [s.p_hi for s in segments(curve)]
    if not curve.finite_zone:
        lows.append(curve.p_m)
        highs.append(curve.p_m)
    return min(lows, default=math.nan), max(highs, default=math.nan)


class Check(NamedTuple):
    name: str
    passed: bool
    detail: str = ""


@dataclass
class ValidationReport:
    checks: list[Check]
    measured_p_m: float
    measured_p_M: float

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def __str__(self) -> str:
        lines = [
            f"{'PASS' if c.passed else 'FAIL'} {c.name}" + (f": {c.detail}" if c.detail else "")
            for c in self.checks
        ]
        lines.append(f"measured p_m={self.measured_p_m!r} p_M={self.measured_p_M!r}")
        return "\n".join(lines)


def validate(curve: PriceDemandCurve, config: BillingConfig | None = None,
             tol: float = VALIDATION_TOL) -> ValidationReport:
    """Check a curve against the demand-function properties and cost bounds."""
    gam, rat = curve.gammas, curve.ratios
    checks = []

    bad = [i for i, r in enumerate(rat) if not 0.0 <= r <= 1.0]
    detail = ""
    if rat[0] != 1.0:
        detail = f"ratio at gamma_star is {rat[0]!r}, expected 1"
    elif bad:
        detail = f"ratio outside [0, 1] at knot {bad[0]}"
    checks.append(Check("ratio_bounds", not detail, detail))

    detail = ""
    for j in range(len(rat) - 1):
        if rat[j + 1] > rat[j]:
            detail = f"ratio increases between gamma={gam[j]!r} and {gam[j + 1]!r}"
            break
        if rat[j] > 0 and rat[j + 1] == rat[j]:
            detail = f"ratio flat at {rat[j]!r} between gamma={gam[j]!r} and {gam[j + 1]!r}"
            break
    checks.append(Check("monotonicity", not detail, detail))

    detail = ""
    for j in range(curve._n_active - 1):
        if rat[j] <= 0:
            break
        slope = (rat[j] - rat[j + 1]) / (gam[j + 1] - gam[j])
        if rat[j] - gam[j] * slope > tol:
            detail = f"revenue rises on segment starting at gamma={gam[j]!r}"
            break
    if not detail and not curve.finite_zone and curve.p_m > gam[curve._n_active - 1]:
        detail = "tail revenue rises: p_m exceeds last knot price"
    checks.append(Check("revenue_monotonicity", not detail, detail))

    detail = ""
    for seg in segments(curve):
        for p in (seg.p_lo, seg.p_hi):
            if not curve.p_m - tol <= p <= curve.p_M + tol:
                detail = (f"marginal revenue {p!r} outside [{curve.p_m!r}, {curve.p_M!r}] "
                          f"on segment [{seg.gamma_lo!r}, {seg.gamma_hi!r}]")
                break
        if detail:
            break
    if not detail and not curve.finite_zone:
        detail = "semi-infinite zone: revenue does not vanish as served demand goes to 0"
    checks.append(Check("marginal_revenue_bounds", not detail, detail))

    if config is not None:
        try:
            check_bounds(curve.p_m, curve.p_M, config.tau, config.cost)
            detail = ""
        except ConfigError as exc:
            detail = str(exc)
        checks.append(Check("declared_bounds", not detail, detail))
        detail = ""
        if config.gamma_star != curve.gamma_star:
            detail = (f"billing gamma_star {config.gamma_star!r} differs from curve "
                      f"{curve.gamma_star!r}")
        elif not curve.gamma_star * config.tau > config.cost:
            detail = f"gamma_star * tau > cost violated: {curve.gamma_star * config.tau!r}"
        checks.append(Check("profitability", not detail, detail))

    lo, hi = measured_bounds(curve)
    return ValidationReport(checks, lo, hi)


def write_curve(curve: PriceDemandCurve, path) -> None:
    op = curve.gamma_op
    lines = [
        f"# gamma_star={curve.gamma_star!r}",
        f"# p_m={float(curve.p_m)!r}",
        f"# p_M={float(curve.p_M)!r}",
        f"# gamma_op={op!r}" if math.isfinite(op) else "# gamma_op=inf",
        "gamma,ratio",
    ]
    lines += [f"{g!r},{r!r}" for g, r in zip(curve.gammas, curve.ratios)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_curve(path) -> PriceDemandCurve:
    header: dict[str, str] = {}
    gammas, ratios = [], []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, sep, value = line[1:].partition("=")
                if sep:
                    header[key.strip()] = value.strip()
                continue
            if line.replace(" ", "") == "gamma,ratio":
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise TraceFormatError(f"{path}:{lineno}: expected 'gamma,ratio'")
            try:
                gammas.append(float(parts[0]))
                ratios.append(float(parts[1]))
            except ValueError:
                raise TraceFormatError(f"{path}:{lineno}: non-numeric value") from None
    for key in ("p_m", "p_M"):
        if key not in header:
            raise TraceFormatError(f"{path}: missing '# {key}=' header")
    try:
        curve = PriceDemandCurve(tuple(gammas), tuple(ratios),
                                 float(header["p_m"]), float(header["p_M"]))
    except ConfigError as exc:
        raise TraceFormatError(f"{path}: {exc}") from None
    if "gamma_star" in header and float(header["gamma_star"]) != curve.gamma_star:
        raise TraceFormatError(f"{path}: gamma_star header disagrees with first row")
    if "gamma_op" in header and float(header["gamma_op"]) != curve.gamma_op:
        raise TraceFormatError(f"{path}: gamma_op header disagrees with table")
    return curve
