import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from brokerscale.errors import TraceFormatError
from brokerscale.trace import (
    DemandTrace,
    bin_events,
    generate_spiky_trace,
    load_trace_csv,
    write_trace_csv,
)


def overlap_peak(events, slot_seconds):
    """O(n^2) reference: peak concurrency per slot, checked at every event start."""
    if not events:
        return []
    n_slots = math.ceil(max(b for _, b in events) / slot_seconds)
    out = []
    for k in range(n_slots):
        lo, hi = k * slot_seconds, (k + 1) * slot_seconds
        # the level inside a slot peaks at its left edge or at some start inside it
        probes = [lo] + [a for a, _ in events if lo <= a < hi]
        out.append(max(sum(1 for a, b in events if a <= p < b) for p in probes))
    return out


class TestLoad:
    def test_empty_file(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("")
        assert len(load_trace_csv(p)) == 0

    def test_gap_fill(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("1,2\n3,7.5\n")
        assert load_trace_csv(p).slots.tolist() == [2.0, 0.0, 7.5]

    def test_comments_and_header(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("# slot_length=300s\n# anything\nt,demand\n1,4\n2,5\n")
        tr = load_trace_csv(p)
        assert tr.slots.tolist() == [4.0, 5.0] and tr.slot_length == "300s"

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_trace_csv(tmp_path / "nope.csv")

    @pytest.mark.parametrize("body, needle", [
        ("1,2\n2,x\n", ":2:"),
        ("1,2\n3,1\n2,1\n", ":3:"),
        ("1,2\n1,3\n", ":2:"),
        ("a,2\n", ":1:"),
        ("1,-2\n", ":1:"),
        ("1,2,3\n", ":1:"),
    ])
    def test_malformed_rows_carry_line_numbers(self, tmp_path, body, needle):
        p = tmp_path / "t.csv"
        p.write_text(body)
        with pytest.raises(TraceFormatError, match=needle):
            load_trace_csv(p)

    @given(st.lists(st.floats(0, 1e6, allow_nan=False, allow_infinity=False), max_size=50))
    @settings(max_examples=60, deadline=None)
    def test_round_trip(self, tmp_path_factory, values):
        p = tmp_path_factory.mktemp("rt") / "t.csv"
        write_trace_csv(DemandTrace(values, "5min"), p)
        back = load_trace_csv(p)
        assert back.slots.tolist() == [float(v) for v in values]
        assert back.slot_length == "5min"


class TestBinEvents:
    def test_one_per_slot(self):
        tr = bin_events([(k * 10 + 1, k * 10 + 9) for k in range(5)], 10)
        assert tr.slots.tolist() == [1.0] * 5

    def test_all_in_one_slot(self):
        tr = bin_events([(0, 5), (1, 6), (2, 7), (3, 8)], 60)
        assert tr.slots.tolist() == [4.0]

    def test_half_open(self):
        # back-to-back usage never overlaps
        assert bin_events([(0, 10), (10, 20)], 30).slots.tolist() == [1.0]

    def test_unsorted_rejected(self):
        with pytest.raises(ValueError, match="sorted"):
            bin_events([(5, 6), (1, 2)], 10)

    def test_empty(self):
        assert len(bin_events([], 10)) == 0

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 200), st.integers(1, 80)), max_size=30),
           st.sampled_from([1, 7, 10, 60]))
    def test_matches_overlap_counter(self, raw, slot):
        events = sorted((float(a), float(a + d)) for a, d in raw)
        assert bin_events(events, slot).slots.tolist() == overlap_peak(events, slot)


class TestSpiky:
    def test_no_spikes_is_constant(self):
        tr = generate_spiky_trace(3, 100, base=12, spike_prob=0.0, spike_height=50)
        assert np.all(tr.slots == 12)

    def test_seed_reproducible(self):
        a = generate_spiky_trace(5, 500, 10, 0.1, 30, spike_len=3, noise=2)
        b = generate_spiky_trace(5, 500, 10, 0.1, 30, spike_len=3, noise=2)
        assert np.array_equal(a.slots, b.slots)
        assert not np.array_equal(a.slots, generate_spiky_trace(6, 500, 10, 0.1, 30).slots)

    @pytest.mark.parametrize("p", [0.02, 0.1, 0.3])
    def test_spike_frequency_binomial(self, p):
        # unit-length spikes: a slot above base is exactly a spike start
        T = 10_000
        tr = generate_spiky_trace(11, T, base=5, spike_prob=p, spike_height=20, integral=False)
        freq = np.mean(tr.slots > 5)
        sigma = math.sqrt(p * (1 - p) / T)
        assert abs(freq - p) <= 3 * sigma

    def test_nonnegative_integral(self):
        tr = generate_spiky_trace(1, 2000, base=1, spike_prob=0.05, spike_height=10, noise=3)
        assert np.all(tr.slots >= 0) and np.all(tr.slots == np.rint(tr.slots))

    def test_bad_parameters(self):
        with pytest.raises(ValueError):
            generate_spiky_trace(1, 10, 5, 1.5, 3)
        with pytest.raises(ValueError):
            generate_spiky_trace(1, 10, 5, 0.5, 3, spike_len=0.5)


def test_trace_rejects_negative():
    with pytest.raises(ValueError):
        DemandTrace([1, -1])
