import math
import pickle

import numpy as np
import pytest

from vpmap.errors import ValidationError
from vpmap.inference import McmcConfig
from vpmap.model import LatentField
from vpmap.simulation import (
    PriorChoice,
    ReplicateError,
    ScenarioSpec,
    SimulationDesign,
    all_scenarios,
    run_replicate,
    run_scenario,
    summarize,
)

QUICK = McmcConfig(n_iterations=300, burn_in=100, thin=2)


def test_enumeration():
    cells = all_scenarios()
    assert len(cells) == 4 * 3 * 4
    assert {c.gamma for c in cells} == {0.0, 0.1, 1 / 3, 2 / 3}
    assert {c.prior_choice.value for c in cells} == {"PC(0.05,0.99)", "PC(0.5,0.99)", "PC(0.95,0.99)", "Uniform"}


@pytest.mark.parametrize("kwargs", [dict(scenario="SC5"), dict(scenario="SC1", size_level="huge"), dict(scenario="SC1", replicates=0), dict(scenario="SC1", prior_choice="PC(0.2,0.9)")])
def test_invalid_scenarios(kwargs):
    with pytest.raises(ValidationError):
        ScenarioSpec(**kwargs)


def test_prior_choice_parsing():
    assert PriorChoice.parse("pc(0.95, 0.99)") is PriorChoice.PC095
    assert PriorChoice.parse("uniform") is PriorChoice.UNIFORM
    assert math.isclose(PriorChoice.PC05.gamma_prior().cdf(0.5), 0.99, rel_tol=1e-9)


def test_base_effects_standardized():
    design = SimulationDesign()
    x = design.base_effects()
    spec = design.spec
    for b in ("beta1", "beta2", "delta"):
        s = spec.block_spectrum(b)
        v = x.block(b)
        assert math.isclose(v @ s.matrix @ v / s.rank, 1.0, rel_tol=1e-12)
    assert x.alpha.tolist() == [-3.0]


def test_population_levels():
    d = SimulationDesign()
    actual = d.population_at("actual")
    assert np.allclose(d.population_at("larger"), actual * 10)
    assert np.all(np.abs(d.population_at("smaller") - actual / 10) <= 0.5)


def test_data_paired_across_priors():
    d = SimulationDesign()
    a = d.simulate(ScenarioSpec("SC2", "smaller", "Uniform"), 3, seed=1)
    b = d.simulate(ScenarioSpec("SC2", "smaller", "PC(0.5,0.99)"), 3, seed=1)
    c = d.simulate(ScenarioSpec("SC2", "smaller", "Uniform"), 4, seed=1)
    assert a.y.tobytes() == b.y.tobytes()
    assert a.y.tobytes() != c.y.tobytes()


def test_replicate_record_and_determinism():
    sc = ScenarioSpec("SC3", replicates=2)
    r1 = run_replicate(sc, 0, QUICK, seed=5)
    r2 = run_replicate(sc, 0, QUICK, seed=5)
    assert r1 == r2
    assert set(r1) == {"scenario", "size_level", "prior", "replicate", "true_gamma", "gamma_mean", "phi_mean", "tau_mean"}
    assert 0 < r1["gamma_mean"] < 1


def test_run_scenario_and_summary():
    records = run_scenario(ScenarioSpec("SC1", replicates=2), QUICK, seed=0)
    assert [r["replicate"] for r in records] == [0, 1]
    summary = summarize(records)
    assert len(summary) == 1 and summary[0]["replicates"] == 2
    assert math.isclose(summary[0]["gamma_mean_avg"], np.mean([r["gamma_mean"] for r in records]))


def test_loaded_effects_checked():
    design = SimulationDesign()
    x = design.base_effects()
    bad = LatentField(alpha=x.alpha, beta1=x.beta1 + 1.0, beta2=x.beta2, delta=x.delta)
    with pytest.raises(ValidationError):
        SimulationDesign(effects=bad).base_effects()


def test_replicate_error_carries_index_and_pickles():
    err = ReplicateError("SC1/actual/Uniform replicate 3: boom", 3, 4)
    back = pickle.loads(pickle.dumps(err))
    assert back.replicate == 3 and back.exit_code == 4 and "replicate 3" in str(back)
    with pytest.raises(ReplicateError, match="replicate 0"):
        run_replicate(ScenarioSpec("SC1"), 0, QUICK, design=SimulationDesign(effects=LatentField(
            alpha=np.zeros(1), beta1=np.zeros(3), beta2=np.zeros(15), delta=np.zeros(45))))
