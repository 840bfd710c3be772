import io

import numpy as np
import pytest

import anneal_lab as al
from anneal_lab.schedule import (
    AnnealSchedule,
    TemperatureSchedule,
    beta_eff_at,
    evaluate,
    read_schedule_csv,
    temperature_at,
    write_schedule_csv,
)


def two_knot_schedule():
    return AnnealSchedule(s=np.array([0.0, 1.0]), A=np.array([10.0, 0.0]),
                          B=np.array([0.0, 10.0]), t_f=100.0)


class TestEvaluate:
    def test_exact_at_first_knot(self, schedule):
        a, b = evaluate(schedule, 0.0)
        assert (a, b) == (schedule.A[0], schedule.B[0])

    def test_endpoint(self, schedule):
        a, b = evaluate(schedule, 1.0)
        assert a == pytest.approx(0.0, abs=1e-6 * schedule.A[0])
        assert b == schedule.B[-1]

    def test_linear_interpolation(self):
        sched = two_knot_schedule()
        assert evaluate(sched, 0.25) == (7.5, 2.5)

    def test_exact_at_every_knot(self, schedule):
        for s, a, b in zip(schedule.s, schedule.A, schedule.B):
            assert evaluate(schedule, float(s)) == (a, b)

    def test_monotone_between_knots(self, schedule):
        probes = np.linspace(0, 1, 777)
        a = schedule.a_of(probes)
        b = schedule.b_of(probes)
        assert np.all(np.diff(a) <= 1e-12)
        assert np.all(np.diff(b) >= -1e-12)

    @pytest.mark.parametrize("s", [-0.1, 1.1])
    def test_out_of_range(self, schedule, s):
        with pytest.raises(ValueError):
            evaluate(schedule, s)


class TestValidation:
    def test_rejects_nonmonotone_s(self):
        with pytest.raises(ValueError):
            AnnealSchedule(s=np.array([0.0, 0.5, 0.4, 1.0]), A=np.zeros(4), B=np.zeros(4))

    def test_rejects_nonvanishing_final_a(self):
        with pytest.raises(ValueError):
            AnnealSchedule(s=np.array([0.0, 1.0]), A=np.array([10.0, 1.0]),
                           B=np.array([0.0, 1.0]))

    def test_rejects_increasing_a(self):
        with pytest.raises(ValueError):
            AnnealSchedule(s=np.array([0.0, 0.5, 1.0]), A=np.array([5.0, 6.0, 0.0]),
                           B=np.array([0.0, 1.0, 2.0]))

    def test_strict_flag_override(self):
        sched = AnnealSchedule(s=np.array([0.0, 0.5, 1.0]), A=np.array([5.0, 6.0, 0.0]),
                               B=np.array([0.0, 1.0, 2.0]), strict=False)
        assert sched.a_of(0.5) == 6.0


class TestDefaults:
    def test_default_endpoints(self, schedule):
        assert schedule.A[0] == 10.0 and schedule.A[-1] == 0.0
        assert schedule.B[0] == 0.0 and schedule.B[-1] == 10.0
        assert len(schedule.s) == 50

    def test_dw2_like_scale(self, dw2_schedule):
        assert dw2_schedule.A[0] == 33.0
        assert dw2_schedule.B[-1] == 31.0


class TestCsv:
    def test_round_trip_probes(self, schedule, tmp_path):
        path = tmp_path / "sched.csv"
        write_schedule_csv(schedule, path)
        back = read_schedule_csv(path, t_f=schedule.t_f)
        probes = np.linspace(0.0, 1.0, 1000)
        assert np.array_equal(back.a_of(probes), schedule.a_of(probes))
        assert np.array_equal(back.b_of(probes), schedule.b_of(probes))

    def test_bad_header(self):
        with pytest.raises(ValueError, match=":1:"):
            read_schedule_csv(io.StringIO("x,y,z\n0,1,2\n"))

    def test_bad_row_reports_line(self):
        with pytest.raises(ValueError, match=":3:"):
            read_schedule_csv(io.StringIO("s,A,B\n0.0,10.0,0.0\n0.5,oops,5.0\n"))

    def test_too_few_rows(self):
        with pytest.raises(ValueError, match="2 data rows"):
            read_schedule_csv(io.StringIO("s,A,B\n0.0,1.0,0.0\n"))


class TestTemperature:
    def test_exponential_endpoint(self, schedule):
        ts = TemperatureSchedule(kind="exponential", T0=8.0, TK=0.5, steps=1000)
        assert temperature_at(ts, 1000, schedule) == pytest.approx(0.5)
        assert temperature_at(ts, 0, schedule) == pytest.approx(8.0)

    def test_linear_start(self, schedule):
        ts = TemperatureSchedule(kind="linear", T0=8.0, TK=0.5, steps=1000)
        assert temperature_at(ts, 0, schedule) == 8.0
        assert temperature_at(ts, 500, schedule) == pytest.approx(4.25)

    def test_constant(self, schedule):
        ts = TemperatureSchedule(kind="constant", T0=8.0, TK=0.5, steps=10)
        for k in (0, 3, 10):
            assert temperature_at(ts, k, schedule) == 0.5

    def test_schedule_linked_beta_rises(self, schedule):
        ts = TemperatureSchedule(steps=100)
        betas = [beta_eff_at(ts, k, schedule) for k in range(101)]
        assert betas[0] == 0.0  # B(0) = 0: free moves at the start
        assert all(b2 >= b1 for b1, b2 in zip(betas, betas[1:]))
        assert betas[-1] == pytest.approx(10.0 / 2.226)

    def test_out_of_range_step(self, schedule):
        ts = TemperatureSchedule(steps=10)
        with pytest.raises(ValueError):
            temperature_at(ts, 11, schedule)

    def test_rejects_bad_kind(self):
        with pytest.raises(ValueError):
            TemperatureSchedule(kind="geometric")
