import json
import math

import numpy as np
import pytest

from gridalloc import MetricsRow, ScenarioSpec, generate_scenario, run_experiment, summarize
from gridalloc.scenarios import (
    INDUSTRIAL_RANGE,
    PHASE_LIMIT,
    RESIDENTIAL_RANGE,
    customers_from_dict,
    customers_to_dict,
    gnuplot_table,
    read_metrics_csv,
    scenario_to_json,
    write_metrics_csv,
    write_summary_csv,
)


def test_spec_validation():
    with pytest.raises(ValueError):
        ScenarioSpec(case_tag="XX", n=5)
    with pytest.raises(ValueError):
        ScenarioSpec(case_tag="CR", n=-1)
    with pytest.raises(ValueError):
        ScenarioSpec(case_tag="CR", n=5, elastic_fraction=0.3)


def test_determinism(net38):
    spec = ScenarioSpec(case_tag="UM", n=30, elastic_fraction=0.25, seed=99)
    a = generate_scenario(spec, net38)
    b = generate_scenario(spec, net38)
    assert a == b
    c = generate_scenario(ScenarioSpec(case_tag="UM", n=30, elastic_fraction=0.25, seed=100), net38)
    assert a != c


def test_correlated_utility_is_squared_magnitude(net38):
    customers = generate_scenario(ScenarioSpec(case_tag="CR", n=40, seed=1), net38)
    for c in customers:
        assert c.u == pytest.approx(abs(c.s) ** 2)


def test_industrial_range(net38):
    customers = generate_scenario(ScenarioSpec(case_tag="UI", n=40, seed=2), net38)
    lo, hi = INDUSTRIAL_RANGE
    for c in customers:
        assert lo <= abs(c.s) <= hi
        assert c.u <= hi


def test_residential_range_and_phase(net38):
    customers = generate_scenario(ScenarioSpec(case_tag="UR", n=60, seed=3), net38)
    lo, hi = RESIDENTIAL_RANGE
    for c in customers:
        assert lo <= abs(c.s) <= hi
        assert abs(math.atan2(c.s.imag, c.s.real)) <= PHASE_LIMIT + 1e-12
        assert 0.0 <= c.u <= hi


def test_mixed_industrial_share(net38):
    for seed in range(5):
        customers = generate_scenario(ScenarioSpec(case_tag="CM", n=100, seed=seed), net38)
        n_ind = sum(1 for c in customers if abs(c.s) >= INDUSTRIAL_RANGE[0])
        assert n_ind <= 20


def test_elastic_fraction(net38):
    customers = generate_scenario(
        ScenarioSpec(case_tag="CR", n=40, elastic_fraction=0.25, seed=4), net38
    )
    assert sum(c.elastic for c in customers) == 10


def test_buses_are_non_root(net38):
    customers = generate_scenario(ScenarioSpec(case_tag="CI", n=50, seed=5), net38)
    assert all(c.bus in net38.non_root_buses for c in customers)


def test_empty_scenario(net38):
    assert generate_scenario(ScenarioSpec(case_tag="CR", n=0, seed=0), net38) == []


def test_scenario_json_round_trip(net38):
    spec = ScenarioSpec(case_tag="CM", n=10, elastic_fraction=0.5, seed=6)
    customers = generate_scenario(spec, net38)
    doc = customers_to_dict(customers, spec)
    assert doc["spec"]["case_tag"] == "CM"
    assert customers_from_dict(doc) == customers
    # Deterministic serialization.
    assert scenario_to_json(customers, spec) == scenario_to_json(customers, spec)
    json.loads(scenario_to_json(customers, spec))


def test_run_experiment_rows(net38):
    spec = ScenarioSpec(case_tag="CR", n=8, seed=7)
    rows = run_experiment(spec, ["greedy", "inelas"], repetitions=4, net=net38)
    assert len(rows) == 8
    for r in rows:
        assert r.tag == "CR"
        assert r.n == 8
        assert 0.0 <= r.ratio <= 1.0 + 1e-9
        assert r.beta_cap <= 1.0 + 1e-9
        assert r.beta_volt <= 1.0 + 1e-9
        assert r.utility >= 0.0
        assert r.ratio >= r.alpha_bar - 1e-12


def test_run_experiment_validation(net38):
    spec = ScenarioSpec(case_tag="CR", n=4, seed=0)
    with pytest.raises(ValueError):
        run_experiment(spec, ["magic"], repetitions=1, net=net38)
    with pytest.raises(ValueError):
        run_experiment(spec, ["mix"], repetitions=0, net=net38)


def test_run_experiment_deterministic(net38):
    spec = ScenarioSpec(case_tag="UR", n=6, seed=12)
    a = run_experiment(spec, ["inelas"], repetitions=3, net=net38)
    b = run_experiment(spec, ["inelas"], repetitions=3, net=net38)
    assert [(r.utility, r.oracle, r.ratio) for r in a] == [
        (r.utility, r.oracle, r.ratio) for r in b
    ]


def test_metrics_csv_round_trip(tmp_path, net38):
    rows = run_experiment(
        ScenarioSpec(case_tag="CR", n=6, seed=8), ["mix"], repetitions=2, net=net38
    )
    p = tmp_path / "rows.csv"
    write_metrics_csv(rows, p)
    header = p.read_text().splitlines()[0]
    assert header == "alg,n,tag,seed,utility,oracle,ratio,alpha_bar,delta,beta_cap,beta_volt,ms"
    back = read_metrics_csv(p)
    assert len(back) == len(rows)
    assert back[0].alg == "mix"
    assert back[0].utility == pytest.approx(rows[0].utility)


def test_summarize_and_outputs(tmp_path):
    rows = [
        MetricsRow("mix", 6, "CR", 0, 1.0, 1.0, 0.8, 0.1, 0.0, 0.5, 0.9, 2.0),
        MetricsRow("mix", 6, "CR", 1, 1.0, 1.0, 1.0, 0.1, 0.005, 0.5, 0.9, 2.0),
    ]
    summ = summarize(rows)
    assert len(summ) == 1
    s = summ[0]
    assert s.mean_ratio == pytest.approx(0.9)
    sd = np.std([0.8, 1.0], ddof=1)
    assert s.ci95_ratio == pytest.approx(1.96 * sd / math.sqrt(2))
    assert s.max_delta == 0.005
    write_summary_csv(summ, tmp_path / "summary.csv")
    assert "mean_ratio" in (tmp_path / "summary.csv").read_text()
    table = gnuplot_table(summ)
    assert table.startswith("# mix CR")
    assert "6 0.9" in table
