import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from brokerscale.demand_model import (
    CurveSpec,
    PriceDemandCurve,
    demand_loss,
    marginal_unit_revenue,
    measured_bounds,
    price_for_demand,
    read_curve,
    renting_cost,
    segments,
    synthesize_curve,
    validate,
    write_curve,
)
from brokerscale.errors import ConfigError, DomainError, TraceFormatError, UnreachableDemandError
from brokerscale.fleet import BillingConfig


def spec(**kw):
    base = dict(p_m=1 / 12, p_M=0.8, gamma_star=0.3, tau=12, seed=1)
    base.update(kw)
    return CurveSpec(**base)


def table_slope(curve, s):
    """Exact d(rho)/ds at served fraction s, from the knot increments."""
    gam, rat = curve.gammas, curve.ratios
    for j in range(len(gam) - 1):
        if rat[j + 1] < s <= rat[j]:
            dg = gam[j + 1] - gam[j]
            drop = rat[j] - rat[j + 1]
            g = gam[j] + (rat[j] - s) * dg / drop
            return g - s * dg / drop
    raise AssertionError("s outside the table")


# --- spec and synthesis ---------------------------------------------------------

class TestCurveSpec:
    @pytest.mark.parametrize("kw, needle", [
        (dict(p_m=0.05), "cost/tau <= p_m"),
        (dict(p_m=0.9, p_M=0.8, gamma_star=0.95, gamma_max=0.8), "p_m <= p_M"),
        (dict(p_M=1.2), "p_M < cost"),
        (dict(gamma_star=0.08), "gamma_star > p_m"),
        (dict(p_m=0.08329, gamma_star=0.0833), "gamma_star * tau > cost"),
        (dict(gamma_max=0.9), "gamma_max <= p_M"),
        (dict(tau=1), "tau >= 2"),
    ])
    def test_violations_name_the_inequality(self, kw, needle):
        with pytest.raises(ConfigError, match=needle.replace("*", r"\*")):
            spec(**kw)

    def test_decimal_twelfth_accepted(self):
        # 0.0833 is a 4-digit rendering of 1/12
        assert spec(p_m=0.0833).p_m == 0.0833

    def test_gamma_max_defaults_to_p_M(self):
        assert spec().gamma_max == 0.8


class TestSynthesize:
    def test_example_curve_validates(self, low_pm_curve, billing12):
        rep = validate(low_pm_curve, billing12)
        assert rep.ok, str(rep)
        assert low_pm_curve.p_m == 1 / 12 and low_pm_curve.p_M == 0.8

    @pytest.mark.parametrize("seed", range(25))
    def test_random_specs_validate(self, seed):
        rng = np.random.default_rng(seed)
        tau = int(rng.integers(2, 20))
        p_m = 1 / tau + (1 - 1 / tau) * rng.uniform(0.01, 0.5)
        p_M = p_m + (1 - p_m) * rng.uniform(0.1, 0.99)
        gs = max(p_m + (p_M - p_m) * rng.uniform(0.01, 0.9), 1.01 / tau)
        if gs >= p_M:
            pytest.skip("no room above gamma_star")
        curve = synthesize_curve(CurveSpec(p_m, p_M, gs, tau, grid_steps=300, seed=seed))
        assert validate(curve, BillingConfig(tau, gs)).ok

    def test_nominal_ratio_is_one(self, low_pm_curve):
        assert low_pm_curve.ratio(0.3) == 1.0
        assert low_pm_curve.ratio(0.1) == 1.0

    def test_finite_zone_and_gamma_op(self, low_pm_curve):
        assert low_pm_curve.finite_zone
        assert low_pm_curve.ratio(low_pm_curve.gamma_op) == 0.0
        assert 0.3 < low_pm_curve.gamma_op <= 0.8

    def test_deterministic_per_seed(self):
        a, b = synthesize_curve(spec(seed=9)), synthesize_curve(spec(seed=9))
        assert a.gammas == b.gammas and a.ratios == b.ratios
        assert synthesize_curve(spec(seed=10)).ratios != a.ratios

    def test_uniform_grid(self):
        c = synthesize_curve(spec(grid_steps=50))
        step = (0.8 - 0.3) / 50
        inner = np.diff(c.gammas)[:-1]
        assert np.allclose(inner, step, rtol=0, atol=1e-12)

    def test_higher_p_m_sheds_demand_faster(self):
        # larger p_m narrows the slope band towards flat price, so demand falls faster
        gs = np.linspace(0.31, 0.79, 25)
        lo = np.mean([[synthesize_curve(spec(seed=s)).ratio(g) for g in gs]
                      for s in range(100)], axis=0)
        hi = np.mean([[synthesize_curve(spec(p_m=3 / 12, seed=s)).ratio(g) for g in gs]
                      for s in range(100)], axis=0)
        assert np.all(hi <= lo)
        assert hi.sum() < lo.sum()


# --- evaluation -----------------------------------------------------------------

class TestPriceForDemand:
    def test_nominal(self, low_pm_curve):
        assert price_for_demand(low_pm_curve, 7.0, 7.0) == 0.3

    def test_example_calibration(self, example_curve):
        assert price_for_demand(example_curve, 10, 6) == pytest.approx(0.045, abs=1e-12)
        assert price_for_demand(example_curve, 8, 6) == pytest.approx(0.038, abs=1e-12)

    def test_zero_demand_finite_zone(self, low_pm_curve):
        assert price_for_demand(low_pm_curve, 5, 0) == low_pm_curve.gamma_op

    def test_zero_demand_semi_infinite(self):
        c = PriceDemandCurve((0.3, 0.4), (1.0, 0.5), 0.1, 0.8)
        with pytest.raises(UnreachableDemandError):
            price_for_demand(c, 5, 0)

    def test_d_above_d_star(self, low_pm_curve):
        with pytest.raises(DomainError):
            price_for_demand(low_pm_curve, 3, 4)

    @pytest.mark.parametrize("d_star", [1.0, 3.0, 10.0, 57.5])
    def test_round_trip_grid(self, low_pm_curve, d_star):
        for d in np.linspace(0.0, d_star, 10):
            g = price_for_demand(low_pm_curve, d_star, d)
            assert low_pm_curve.ratio(g) * d_star == pytest.approx(d, abs=1e-9)

    def test_round_trip_tail(self):
        c = PriceDemandCurve((0.3, 0.4), (1.0, 0.5), 0.1, 0.8)
        for d in (0.1, 1.0, 2.4):
            assert c.ratio(price_for_demand(c, 5, d)) * 5 == pytest.approx(d, abs=1e-9)

    @settings(max_examples=200, deadline=None)
    @given(st.floats(0.1, 100), st.floats(0, 1))
    def test_round_trip_property(self, d_star, frac):
        c = synthesize_curve(spec(seed=3))
        d = d_star * frac
        assert c.ratio(price_for_demand(c, d_star, d)) * d_star == pytest.approx(d, abs=1e-9)


class TestDemandLoss:
    def test_example_interval_two(self, example_curve):
        # 10 VMs at 0.03 would earn 0.30; 6 at 0.045 earn 0.27
        assert demand_loss(example_curve, 10, 6) == pytest.approx(0.03, abs=1e-12)

    def test_no_change(self, low_pm_curve):
        assert demand_loss(low_pm_curve, 4, 4) == 0.0

    def test_d_above_d_star(self, low_pm_curve):
        with pytest.raises(DomainError):
            demand_loss(low_pm_curve, 2, 3)

    @pytest.mark.parametrize("d_star, d", [(5, 2), (10, 0), (3.5, 1.25)])
    def test_equals_renting_cost_from_full(self, low_pm_curve, d_star, d):
        assert renting_cost(low_pm_curve, d_star, d_star, d_star - d) == pytest.approx(
            demand_loss(low_pm_curve, d_star, d), abs=1e-12)

    def test_nonnegative(self, low_pm_curve, rng):
        for _ in range(500):
            ds = rng.uniform(0, 50)
            assert demand_loss(low_pm_curve, ds, rng.uniform(0, ds)) >= -1e-12


class TestRentingCost:
    def test_zero_reduction(self, low_pm_curve):
        assert renting_cost(low_pm_curve, 8, 5, 0) == 0.0

    def test_n_above_d(self, low_pm_curve):
        with pytest.raises(DomainError):
            renting_cost(low_pm_curve, 8, 2, 3)

    def test_bounds(self, low_pm_curve, rng):
        for _ in range(100):
            ds = rng.uniform(0.5, 40)
            d = rng.uniform(0, ds)
            n = rng.uniform(0, d)
            r = renting_cost(low_pm_curve, ds, d, n)
            assert n / 12 - 1e-9 <= r <= n + 1e-9
            assert (1 / 12) * n - 1e-9 <= r <= 0.8 * n + 1e-9

    @pytest.mark.parametrize("d_star, d, n", [(10, 10, 10), (7.5, 6, 4), (3, 2, 2)])
    def test_telescoping(self, low_pm_curve, d_star, d, n):
        parts = sum(renting_cost(low_pm_curve, d_star, d - k, 1) for k in range(n))
        assert renting_cost(low_pm_curve, d_star, d, n) == pytest.approx(parts, abs=1e-9)


class TestMarginalUnitRevenue:
    def test_within_declared_bounds(self, low_pm_curve, rng):
        for _ in range(100):
            ds = rng.uniform(1, 60)
            d = rng.uniform(0.01, ds)
            p = marginal_unit_revenue(low_pm_curve, ds, d)
            assert 1 / 12 - 1e-6 <= p <= 0.8 + 1e-6

    def test_linear_revenue_is_exact(self):
        # past the last knot revenue is linear in d with slope p_m
        c = PriceDemandCurve((0.3, 0.4), (1.0, 0.5), 0.1, 0.8)
        assert marginal_unit_revenue(c, 10, 2.0) == pytest.approx(0.1, abs=1e-12)
        assert marginal_unit_revenue(c, 10, 4.0) == pytest.approx(0.1, abs=1e-12)

    def test_agrees_with_table_increments(self, low_pm_curve, rng):
        checked = 0
        for _ in range(300):
            ds = rng.uniform(5, 60)
            d = rng.uniform(0.2, ds * 0.95)
            h = min(0.5, d / 10)
            s_lo, s_hi = (d - h) / ds, (d + h) / ds
            # central difference of a quadratic is exact inside one segment
            if not any(s_lo < r < s_hi for r in low_pm_curve.ratios):
                fd = marginal_unit_revenue(low_pm_curve, ds, d)
                assert fd == pytest.approx(table_slope(low_pm_curve, d / ds), abs=1e-6)
                checked += 1
        assert checked > 100

    def test_domain(self, low_pm_curve):
        with pytest.raises(DomainError):
            marginal_unit_revenue(low_pm_curve, 5, 0)
        with pytest.raises(DomainError):
            marginal_unit_revenue(low_pm_curve, 5, 6)


# --- validation -----------------------------------------------------------------

class TestValidate:
    def test_ratio_increase_flagged(self, low_pm_curve):
        rat = list(low_pm_curve.ratios)
        rat[5] = rat[3]
        bad = PriceDemandCurve(low_pm_curve.gammas, tuple(rat), 1 / 12, 0.8)
        names = [c.name for c in validate(bad).failures()]
        assert "monotonicity" in names

    def test_slope_violation_flagged(self):
        # nearly flat segment: price climbs while demand barely moves, so the
        # implied d(gamma)/dd is below (p_m - gamma)/d
        good = synthesize_curve(spec(seed=4))
        rat = list(good.ratios)
        rat[11] = rat[10] * (1 - 1e-4)
        bad = PriceDemandCurve(good.gammas, tuple(rat), 1 / 12, 0.8)
        rep = validate(bad)
        assert [c.name for c in rep.failures()] == ["revenue_monotonicity",
                                                    "marginal_revenue_bounds"]
        assert validate(good).ok

    def test_declared_bounds_and_profitability(self, low_pm_curve):
        rep = validate(low_pm_curve, BillingConfig(tau=4, gamma_star=0.3))
        failed = {c.name for c in rep.failures()}
        assert "declared_bounds" in failed  # 1/4 > 1/12
        assert validate(low_pm_curve, BillingConfig(tau=12, gamma_star=0.3)).ok

    def test_semi_infinite_fails(self):
        c = PriceDemandCurve((0.3, 0.4), (1.0, 0.5), 0.1, 0.8)
        assert not validate(c).ok

    def test_measured_within_declared(self, low_pm_curve):
        lo, hi = measured_bounds(low_pm_curve)
        assert 1 / 12 - 1e-9 <= lo <= hi <= 0.8 + 1e-9
        assert all(s.p_lo >= lo and s.p_hi <= hi for s in segments(low_pm_curve))

    def test_report_text(self, low_pm_curve):
        text = str(validate(low_pm_curve))
        assert "PASS monotonicity" in text and "FAIL" not in text


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.3, 0.8), st.floats(0.3, 0.8))
def test_monotone_price_and_revenue(seed, a, b):
    c = synthesize_curve(spec(seed=seed, grid_steps=60))
    g1, g2 = sorted((a, b))
    assert c.ratio(g2) <= c.ratio(g1) + 1e-15
    assert g2 * c.ratio(g2) <= g1 * c.ratio(g1) + 1e-12


# --- files ----------------------------------------------------------------------

class TestCurveFile:
    def test_round_trip_bit_exact(self, low_pm_curve, tmp_path):
        p = tmp_path / "c.csv"
        write_curve(low_pm_curve, p)
        back = read_curve(p)
        assert back.gammas == low_pm_curve.gammas and back.ratios == low_pm_curve.ratios
        assert (back.p_m, back.p_M) == (low_pm_curve.p_m, low_pm_curve.p_M)
        q = tmp_path / "d.csv"
        write_curve(back, q)
        assert p.read_bytes() == q.read_bytes()

    def test_headers(self, low_pm_curve, tmp_path):
        p = tmp_path / "c.csv"
        write_curve(low_pm_curve, p)
        head = p.read_text().splitlines()[:4]
        assert head[0] == f"# gamma_star={0.3!r}"
        assert head[3].startswith("# gamma_op=")

    def test_semi_infinite_marker(self, tmp_path):
        c = PriceDemandCurve((0.3, 0.4), (1.0, 0.5), 0.1, 0.8)
        write_curve(c, tmp_path / "c.csv")
        assert "# gamma_op=inf" in (tmp_path / "c.csv").read_text()
        assert math.isinf(read_curve(tmp_path / "c.csv").gamma_op)

    def test_malformed(self, tmp_path):
        p = tmp_path / "c.csv"
        p.write_text("# p_m=0.1\n# p_M=0.8\ngamma,ratio\n0.3,1\n0.4,abc\n")
        with pytest.raises(TraceFormatError, match=":5:"):
            read_curve(p)
        p.write_text("# p_m=0.1\n0.3,1\n")
        with pytest.raises(TraceFormatError, match="p_M"):
            read_curve(p)
