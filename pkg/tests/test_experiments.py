import json
import math

import numpy as np
import pytest

from chifourier import experiments as ex
from chifourier.experiments import ConfigError, Scenario, ScenarioConfig

DISK = {"type": "disk", "center": [0.5, 0.5], "radius": 0.25}


def cfg(**kw):
    base = {"name": "t", "shape": DISK, "n": 256}
    base.update(kw)
    return ScenarioConfig.from_dict(base)


@pytest.fixture(scope="module")
def disk512():
    return Scenario(cfg(n=512))


def test_nested_blocks_are_flattened():
    c = ScenarioConfig.from_dict({"name": "t", "shape": DISK, "grid": {"n": 128, "L": 1.0},
                                  "phi": {"N": 1}, "raster": {"mode": "coverage", "subsamples": 3},
                                  "exponents": {"q": 3.0}})
    assert (c.n, c.N, c.raster_mode, c.subsamples, c.q) == (128, 1, "coverage", 3, 3.0)
    assert c.split() == (3.0, 1.0)


@pytest.mark.parametrize("bad", [
    {"n": 100}, {"n": 8}, {"L": 0}, {"N": 7}, {"gamma": 2.5}, {"gamma": "guess"}, {"q": 1.0},
    {"checks": ["weak_norm", "nope"]}, {"fchar_p": [2.5]}, {"doubling": [100, 256]},
    {"colour": "red"}, {"shape": {"type": "disk", "center": [0.5, 0.5], "radius": 0.49}},
    {"shape": {"type": "disk"}}, {"q": 2.0, "p1": 1.0},
])
def test_invalid_configs_rejected(bad):
    with pytest.raises(ConfigError):
        cfg(**bad)


def test_missing_name_or_file():
    with pytest.raises(ConfigError):
        ScenarioConfig.from_dict({"shape": DISK})
    with pytest.raises(ConfigError):
        ScenarioConfig.from_json("/nonexistent/config.json")
    with pytest.raises(ConfigError):
        ScenarioConfig.from_dict([1, 2])


def test_split_is_inside_the_admissible_range():
    for q in (1.2, 2.0, 5.0):
        c = cfg(q=q, checks=["sobolev_weak"])
        p0, p1 = c.split()
        assert 1 < 2 * p1 < q < 2 * p0


def test_config_helpers():
    c = cfg(fit_window=[3, 7])
    assert c.fit_window == (3, 7)
    assert c.doubling_sizes() == [128, 256]
    d = c.with_n(64)
    assert d.n == 64 and c.n == 256
    assert c.to_dict()["fit_window"] == [3, 7]
    assert ScenarioConfig.from_dict(c.to_dict()).to_dict() == c.to_dict()


def test_shipped_configs_load():
    from pathlib import Path
    paths = sorted((Path(__file__).parents[1] / "configs").glob("*.json"))
    assert len(paths) >= 4
    for p in paths:
        ScenarioConfig.from_json(p)


def test_clean_is_json_safe():
    obj = {"a": (1, np.float64(2.5)), "b": np.array([math.inf, -math.inf, math.nan]),
           "_hidden": 1, "c": np.bool_(True), "d": np.int64(3)}
    out = ex._clean(obj)
    assert out == {"a": [1, 2.5], "b": ["inf", "-inf", "nan"], "c": True, "d": 3}
    json.dumps(out, allow_nan=False)


def test_atomic_write_leaves_no_temp_files(tmp_path):
    target = tmp_path / "sub" / "r.json"
    ex.write_json({"x": 1.0}, target)
    ex.write_json({"x": 2.0}, target)
    assert json.loads(target.read_text()) == {"x": 2.0}
    assert [p.name for p in target.parent.iterdir()] == ["r.json"]


def test_scenario_caches_per_grid(disk512):
    assert disk512.indicator is disk512.indicator
    half = disk512.at(256)
    assert half.spec.n == 256 and disk512.at(256) is half
    assert disk512.gamma_hat == pytest.approx(1.0, abs=0.05)
    assert disk512.gamma == disk512.gamma_hat
    assert Scenario(cfg(gamma=1.5)).gamma == 1.5


def test_boundary_check(disk512):
    r = ex.run_boundary(disk512)
    assert r["status"] == "pass"
    assert "disk_volume" in r["criteria"]


def test_blocks_window_error(disk512):
    with pytest.raises(ConfigError):
        ex.run_l1_l2_blocks(disk512, (6, 7))


def test_blocks_slopes(disk512):
    r = ex.run_l1_l2_blocks(disk512, (3, 6))
    assert r["status"] == "pass"


def test_bessel_needs_a_disk():
    scn = Scenario(cfg(shape={"type": "rect", "corner": [0.3, 0.3], "widths": [0.4, 0.4]}))
    with pytest.raises(ConfigError):
        ex.run_bessel_oracle(scn)


def test_fchar_at_two_is_plancherel(disk512):
    r = ex.run_fchar(disk512, 2.0)
    assert r["criteria"]["p2_plancherel"]["pass"]
    assert r["criteria"]["p2_below_rhs"]["pass"]


def test_certificate_flatness():
    lams = 2.0 ** np.arange(0, 10)
    flat = ex._certificate(lams, 3.0 * lams ** -2.0, 2.0)
    assert flat["pass"] and flat["C"] == pytest.approx(3.0)
    tilted = ex._certificate(lams, 3.0 * lams ** -1.5, 2.0)
    assert not tilted["pass"]
    short = ex._certificate(lams[:4], 3.0 * lams[:4] ** -2.0, 2.0)
    assert not short["pass"]


def test_geometric_tail():
    ks = np.arange(0, 12)
    terms = 0.5 ** ks
    tail, rho = ex._geometric_tail(ks, terms, (3, 11))
    assert rho == pytest.approx(0.5)
    assert tail == pytest.approx(0.5 ** 12 / (1 - 0.5))
    tail, rho = ex._geometric_tail(ks, 2.0 ** ks, (3, 11))
    assert math.isinf(tail)


def test_failing_runner_is_collected(disk512, monkeypatch):
    def boom(scn):
        raise RuntimeError("broken")
    monkeypatch.setitem(ex._RUNNERS, "packet", boom)
    r = ex.run_check("packet", disk512)
    assert r["status"] == "fail" and "broken" in r["error"]


def test_verify_all_small(tmp_path):
    c = cfg(checks=["phi", "boundary", "blocks"], mikhlin_patterns=5, block_window=[2, 5])
    code, rep = ex.verify_all(c, tmp_path)
    assert code == 0 and rep["summary"]["status"] == "pass"
    assert (tmp_path / "report.json").exists()
    assert (tmp_path / "boundary_profile.csv").exists()
    assert (tmp_path / "plotdata" / "boundary_profile.tsv").exists()
    assert "out" not in rep["config"]
