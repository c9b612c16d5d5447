"""Reward buffers and memory schedules."""
import numpy as np
import pytest

from lastblock.history import HistoryBuffer, MemorySchedule, ScheduleForm


class TestHistoryBuffer:
    def test_unbounded_matches_total(self):
        buf = HistoryBuffer()
        for x in (1.0, 0.0, 2.5):
            buf.append(x)
        assert buf.total_pulls == 3
        assert buf.stored_len == 3
        assert buf.stored() == [1.0, 0.0, 2.5]
        assert buf.stored_mean() == pytest.approx(3.5 / 3)

    def test_eviction_is_oldest_first(self):
        buf = HistoryBuffer()
        for x in (1.0, 2.0, 3.0):
            buf.append(x)
        buf.evict_oldest()
        assert buf.stored() == [2.0, 3.0]
        assert buf.total_pulls == 3
        assert buf.stored_sum() == 5.0

    def test_suffix_mean_against_slicing(self):
        rng = np.random.default_rng(3)
        buf = HistoryBuffer()
        values = list(rng.normal(size=200))
        for v in values:
            buf.append(v)
        for _ in range(40):
            buf.evict_oldest()
        stored = values[40:]
        for block in (1, 7, 50, len(stored)):
            assert buf.suffix_mean(block) == pytest.approx(
                float(np.mean(stored[-block:])), rel=1e-12
            )

    def test_suffix_mean_bounds(self):
        buf = HistoryBuffer()
        buf.append(1.0)
        with pytest.raises(ValueError):
            buf.suffix_mean(0)
        with pytest.raises(ValueError):
            buf.suffix_mean(2)

    def test_empty_buffer_errors(self):
        buf = HistoryBuffer()
        with pytest.raises(ValueError):
            buf.stored_mean()
        with pytest.raises(ValueError):
            buf.evict_oldest()


class TestMemorySchedule:
    def test_max_form_value(self):
        sched = MemorySchedule(ScheduleForm.MAX, floor=50, coefficient=1.0)
        # (ln 1e4)^2 = 84.83 -> ceil 85 beats the floor
        assert sched.capacity(10_000) == 85
        assert sched.capacity(1) == 50

    def test_additive_form_value(self):
        sched = MemorySchedule(ScheduleForm.ADDITIVE, floor=50)
        assert sched.capacity(10_000) == 135
        assert sched.capacity(1) == 50

    def test_nondecreasing_and_floored(self):
        for sched in (
            MemorySchedule(ScheduleForm.MAX, floor=20, coefficient=0.5),
            MemorySchedule(ScheduleForm.ADDITIVE, floor=20, coefficient=2.0),
        ):
            caps = [sched.capacity(r) for r in range(1, 2000)]
            assert all(b >= a for a, b in zip(caps, caps[1:]))
            assert min(caps) >= 20

    def test_validation(self):
        with pytest.raises(ValueError):
            MemorySchedule(ScheduleForm.MAX, floor=0)
        with pytest.raises(ValueError):
            MemorySchedule(ScheduleForm.ADDITIVE, floor=10, coefficient=0.0)
        with pytest.raises(ValueError):
            MemorySchedule(ScheduleForm.MAX, floor=10).capacity(0)

    def test_additive_50_stays_between_50_and_150(self):
        sched = MemorySchedule(ScheduleForm.ADDITIVE, floor=50)
        caps = [sched.capacity(r) for r in range(1, 10_001)]
        assert caps[0] == 50
        assert caps[-1] == 135
        assert max(caps) <= 150
