import math

import pytest

from lossq.config import (
    PRESETS,
    ConfigError,
    config_to_dict,
    expand_points,
    parse_config,
    preset,
    sweep_grid,
    validate_config,
)
from lossq.dist import Discrete, Exponential, mean_rate, mean_service

MINIMAL = """
mode: analyze
queue:
  n: 2
  arrivals: {kind: exponential, rate: 1.25}
  service: {kind: deterministic, tau: 1}
"""


def errors_of(text):
    with pytest.raises(ConfigError) as info:
        validate_config(text)
    return info.value.errors


def test_minimal_config_defaults():
    cfg = validate_config(MINIMAL)
    assert cfg.mode == "analyze"
    assert cfg.options.eps_tail == 1e-12
    assert cfg.options.demod_model == "clipped"
    assert cfg.sweep is None
    assert cfg.output.format == "csv"
    assert isinstance(cfg.queue.arrivals, Exponential)


def test_outage_out_of_range():
    errs = errors_of(MINIMAL + "  p_o: 1.5\n")
    assert any("queue.p_o" in e and "[0.0, 1.0]" in e for e in errs)


def test_probabilities_not_normalized():
    text = MINIMAL.replace("{kind: exponential, rate: 1.25}",
                           "{kind: discrete, atoms: [[0.3, 0.3], [0.6, 0.6]]}")
    errs = errors_of(text)
    assert any("queue.arrivals.atoms" in e and "normalization" in e for e in errs)


def test_errors_are_aggregated():
    text = """
mode: explain
queue:
  n: 0
  p_o: -1
  arrivals: {kind: weibull}
  service: {kind: deterministic, tau: -2}
options: {demod_model: partial}
"""
    errs = errors_of(text)
    paths = {e.split(":")[0] for e in errs}
    assert {"mode", "queue.n", "queue.p_o", "queue.arrivals.kind", "queue.service.tau",
            "options.demod_model"} <= paths


def test_fraction_strings():
    text = MINIMAL.replace("{kind: exponential, rate: 1.25}",
                           "{kind: discrete, atoms: [[0.3, 1/3], [0.6, 1/3], [1.5, 1/3]]}")
    cfg = validate_config(text)
    assert isinstance(cfg.queue.arrivals, Discrete)
    assert mean_rate(cfg.queue.arrivals) == pytest.approx(1.25)


def test_not_yaml():
    assert errors_of("mode: [analyze")


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_round_trip(name):
    cfg = parse_config(preset(name))
    again = parse_config(config_to_dict(cfg))
    assert config_to_dict(again) == config_to_dict(cfg)
    assert [(p.label, p.queue) for p in expand_points(again)] == \
           [(p.label, p.queue) for p in expand_points(cfg)]


def test_unknown_preset():
    with pytest.raises(ConfigError):
        preset("fig9")


def test_sweep_grid_inclusive():
    grid = sweep_grid(0.05, 3.0, 0.01)
    assert len(grid) == 296 and grid[0] == 0.05 and grid[-1] == 3.0
    assert len(sweep_grid(1.0, 0.5, 0.1)) == 0


def test_rho_sweep_sets_rate():
    cfg = parse_config({**preset("fig2"), "mode": "analyze"})
    points = expand_points(cfg)
    grid = sweep_grid(0.1, 3.0, 0.1)
    assert len(points) == 8 * len(grid)
    for p, rho in zip(points, grid):
        assert mean_rate(p.queue.arrivals) * mean_service(p.queue.service) == pytest.approx(rho)
        assert p.queue.n == 1 and p.queue.p_o == 0.0
    assert points[-1].queue.n == 8 and points[-1].queue.p_o == 0.5


def test_tau_sweep_rescales_service():
    cfg = parse_config(preset("fig5"))
    points = expand_points(cfg)
    assert len(points) == 4 * 296
    assert [p.queue.n for p in points[::296]] == [1, 2, 1, 2]
    assert mean_service(points[1].queue.service) == pytest.approx(0.06)


def test_series_override_arrivals():
    cfg = parse_config(preset("fig7"))
    kinds = {type(p.queue.arrivals) for p in expand_points(cfg)}
    assert kinds == {Exponential, Discrete}


def test_empty_sweep_has_no_points():
    doc = preset("md22")
    doc["sweep"] = {"parameter": "lambda", "values": []}
    assert expand_points(parse_config(doc)) == []


def test_md22_description_records_rate_reading():
    assert "0.8" in PRESETS["md22"]["description"]
    assert math.isclose(PRESETS["md22"]["queue"]["arrivals"]["rate"], 1.25)
