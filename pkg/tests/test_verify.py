import json
import math

import numpy as np
import pytest

from mcx import ensembles, stein, verify
from mcx.verify import SimulationConfig

from conftest import DIAG


def _chaos2():
    arr = np.zeros((2, 2, 1, 1))
    arr[0, 1] = arr[1, 0] = 1.0
    return ensembles.RademacherChaos(arr)


class TestConfig:
    def test_defaults(self):
        c = SimulationConfig()
        assert c.t_grid == tuple(float(t) for t in range(11))
        assert c.samples == 100_000

    @pytest.mark.parametrize("kw", [
        {"samples": 0}, {"seed": -1}, {"workers": 0}, {"t_grid": (2, 1)}, {"t_grid": (-1, 0)},
        {"method": "quasi"}, {"psi": "best"}, {"psi": -1.0},
    ])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            SimulationConfig(**kw)


class TestFormatting:
    def test_fmt(self):
        assert verify.fmt(0.1 + 0.2) == "0.3"
        assert verify.fmt(-0.0) == "0"
        assert verify.fmt(1e-20) == "1e-20"
        assert verify.fmt(2.4609375) == "2.4609375"

    def test_dumps_roundtrip(self):
        obj = {"a": [1, 2.5, None], "b": {"c": math.inf}, "d": [], "e": [[1, 2], [3, 4]]}
        back = json.loads(verify.dumps(obj))
        assert back == {"a": [1, 2.5, None], "b": {"c": None}, "d": [], "e": [[1, 2], [3, 4]]}

    def test_wilson(self):
        assert verify.wilson_half_width(0.5, 100) == pytest.approx(
            verify.Z_997 / (1 + verify.Z_997 ** 2 / 100) * math.sqrt(0.25 / 100 + verify.Z_997 ** 2 / 40000))
        assert verify.wilson_half_width(0.0, 1000) > 0
        assert verify.Z_997 == pytest.approx(2.96774, abs=1e-5)


class TestSimulateTail:
    def test_exact_series(self, series10):
        curve = verify.simulate_tail(series10, SimulationConfig())
        assert curve.method == "exact"
        assert dict((t, p) for t, p, _ in curve.points)[5.0] == pytest.approx(0.109375, abs=1e-15)

    def test_zero_ensemble(self):
        ens = ensembles.RademacherSeries([np.zeros((2, 2))] * 3)
        for method in ("exact", "monte_carlo"):
            curve = verify.simulate_tail(ens, SimulationConfig(samples=5000, method=method))
            assert all(p == 0 for t, p, _ in curve.points if t > 0)

    def test_workers_identical(self, series10):
        cfg = dict(samples=30_000, seed=11, method="monte_carlo")
        one = verify.simulate_tail(series10, SimulationConfig(workers=1, **cfg)).to_csv()
        eight = verify.simulate_tail(series10, SimulationConfig(workers=8, **cfg)).to_csv()
        assert one == eight

    def test_seed_changes_output(self, series10):
        cfg = dict(samples=5000, method="monte_carlo")
        a = verify.simulate_tail(series10, SimulationConfig(seed=1, **cfg)).to_csv()
        b = verify.simulate_tail(series10, SimulationConfig(seed=2, **cfg)).to_csv()
        assert a != b

    def test_csv_format(self, series10):
        csv = verify.simulate_tail(series10, SimulationConfig(t_grid=(0, 5))).to_csv()
        assert csv == "t,p_hat,half_width,method\n0,1,0,exact\n5,0.109375,0,exact\n"

    def test_trace_mgf_cosh(self):
        ens = ensembles.RademacherSeries([DIAG])
        m = verify.empirical_trace_mgf(ens, SimulationConfig(theta_grid=(0.0, 1.0)))
        assert m[0.0] == 1.0
        assert math.log(m[1.0]) == pytest.approx(math.log(math.cosh(1)), rel=1e-14)
        assert math.log(m[1.0]) <= 0.5


class TestVerifyBounds:
    def test_series10_exact(self, series10):
        report = verify.verify_bounds(series10, SimulationConfig(theta_grid=(-1, 0.5, 1)))
        assert report.passed
        names = [b["name"] for b in report.bounds]
        assert names == ["hoeffding", "bernstein", "refined"]
        h = report.bounds[0]["verdicts"]
        row5 = next(r for r in h["tail"] if r["t"] == 5)
        assert row5["bound"] == pytest.approx(0.5730095937, rel=1e-9)
        assert row5["p_hat"] == 0.109375
        assert h["mean_upper"]["statistic"] == pytest.approx(2.4609375, abs=1e-12)
        assert report.ensemble["r_psi"] == pytest.approx(10.0)

    def test_combinatorial(self, comb2):
        report = verify.verify_bounds(comb2, SimulationConfig(t_grid=(2,)))
        assert report.passed
        cb = report.bounds[0]
        assert cb["name"] == "combinatorial_bernstein"
        assert cb["verdicts"]["tail"][0]["bound"] == pytest.approx(0.8929091314, rel=1e-9)
        assert cb["verdicts"]["tail"][0]["p_hat"] == 0.5
        assert report.ensemble["r_psi"] == pytest.approx(4.0)

    def test_chaos(self):
        report = verify.verify_bounds(_chaos2(), SimulationConfig())
        assert report.passed
        assert report.bounds[0]["name"] == "bounded_differences"

    @pytest.mark.parametrize("family", ensembles.FAMILIES)
    @pytest.mark.parametrize("method", ["exact", "monte_carlo"])
    def test_every_family_passes(self, family, method):
        from mcx.properties import random_ensemble
        rng = np.random.default_rng(hash(family) % 2 ** 32)
        ens = random_ensemble(rng, 2, family=family)
        cfg = SimulationConfig(samples=20_000, method=method, seed=4,
                               t_grid=tuple(np.linspace(0, 4, 9)), theta_grid=(-0.5, 0.2))
        report = verify.verify_bounds(ens, cfg)
        assert report.passed, verify.dumps(report.to_dict())

    def test_moments_p1_equality(self, series10):
        rows = verify.moment_checks(series10, stein.build_stein_pair(series10), (1.0,))
        by = {r["name"]: r for r in rows}
        assert by["bdg"]["margin"] == pytest.approx(0, abs=1e-10)
        assert by["khintchine"]["margin"] == pytest.approx(0, abs=1e-10)
        assert all(r["pass"] for r in rows)

    def test_bounds_only(self, series10):
        report = verify.verify_bounds(series10, SimulationConfig(), compare=False)
        assert report.statistics == {}
        assert report.ensemble["sigma2"] == 10.0

    def test_psi_fallback_for_zero(self):
        ens = ensembles.RademacherSeries([np.zeros((1, 1))])
        report = verify.verify_bounds(ens, SimulationConfig())
        assert report.ensemble["psi"] == 1.0
        assert report.passed

    def test_failing_bound_detected(self, series10):
        from mcx import bounds
        st = verify._exact_stats(series10, SimulationConfig())
        bogus = bounds.bernstein(0.1, 0.01, 2)
        _, ok = verify._tail_verdicts(bogus, st)
        assert not ok
