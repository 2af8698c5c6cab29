"""Percentage arithmetic: reproduces the reference coarse/share tables."""

from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from planeprof.analysis.percentages import (
    LengthMismatch,
    ZeroElapsed,
    ZeroRuntime,
    coarse_percentages,
    round_half_up,
    share_of_runtime,
)
from planeprof.instrument.proctimes import CoarseBreakdown


class TestCoarsePercentages:
    def test_averaged_run_split(self):
        # user 0.64, sys 1.05 of a 44.15 s run: 1.45 / 2.38 / 96.17
        pct = coarse_percentages(CoarseBreakdown(44.15, 0.64, 1.05))
        assert pct.user_pct == pytest.approx(1.45, abs=0.01)
        assert pct.sys_pct == pytest.approx(2.38, abs=0.01)
        assert pct.other_pct == pytest.approx(96.17, abs=0.01)

    def test_physical_machine_controller_row(self):
        pct = coarse_percentages(CoarseBreakdown(200.835, 83.637, 15.797))
        assert pct.user_pct == pytest.approx(41.64, abs=0.01)

    def test_all_idle(self):
        pct = coarse_percentages(CoarseBreakdown(10.0, 0.0, 0.0))
        assert (pct.user_pct, pct.sys_pct, pct.other_pct) == (0.0, 0.0, 100.0)

    def test_zero_elapsed_rejected(self):
        with pytest.raises(ZeroElapsed):
            coarse_percentages(CoarseBreakdown(0.0, 0.0, 0.0))

    def test_two_decimal_presentation(self):
        assert round_half_up(1.449604, 2) == 1.45
        assert round_half_up(2.378255, 2) == 2.38
        assert round_half_up(0.005, 2) == 0.01  # half rounds up, not to even


class TestShareOfRuntime:
    POLL = (81.948, 59.687, 85.439)
    VM = (15.441 + 2.162, 15.255 + 2.155, 15.482 + 2.22)
    RUNS = (100.969, 77.621, 105.849)

    def test_poll_share_per_run_and_pooled(self):
        report = share_of_runtime(self.POLL, self.RUNS)
        assert report.per_run_pct[0] == pytest.approx(81.16, abs=0.01)
        assert report.per_run_pct[1] == pytest.approx(76.90, abs=0.01)
        assert report.per_run_pct[2] == pytest.approx(80.72, abs=0.01)
        assert report.pooled_pct == pytest.approx(79.83, abs=0.01)

    def test_pooled_is_not_the_mean(self):
        report = share_of_runtime(self.POLL, self.RUNS)
        assert abs(report.pooled_pct - report.mean_pct) > 0.01

    def test_vm_lifecycle_share(self):
        report = share_of_runtime(self.VM, self.RUNS)
        assert report.per_run_pct[0] == pytest.approx(17.43, abs=0.01)
        assert report.per_run_pct[1] == pytest.approx(22.43, abs=0.01)
        assert report.per_run_pct[2] == pytest.approx(16.72, abs=0.01)

    def test_component_equals_run(self):
        report = share_of_runtime((2.0, 3.0), (2.0, 3.0))
        assert report.per_run_pct == (100.0, 100.0)
        assert report.pooled_pct == 100.0

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            share_of_runtime((1.0,), (1.0, 2.0))
        with pytest.raises(LengthMismatch):
            share_of_runtime((), ())

    def test_zero_runtime(self):
        with pytest.raises(ZeroRuntime):
            share_of_runtime((1.0,), (0.0,))

    @given(
        st.lists(
            st.tuples(
                st.floats(min_value=0.0, max_value=1e3),
                st.floats(min_value=0.01, max_value=1e3),
            ),
            min_size=2,
            max_size=8,
        )
    )
    def test_pooled_vs_mean_property(self, pairs):
        components = [min(c, r) for c, r in pairs]
        runs = [r for _, r in pairs]
        report = share_of_runtime(components, runs)
        pooled_direct = 100.0 * sum(components) / sum(runs)
        assert report.pooled_pct == pooled_direct
        # the two aggregations agree exactly when all runs are equal
        if len(set(runs)) == 1:
            assert report.mean_pct == pytest.approx(report.pooled_pct)
