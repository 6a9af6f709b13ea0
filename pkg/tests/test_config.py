import pytest

from causalmeta.causal import WeightScheme
from causalmeta.config import RunConfig, SimulationConfig, load_simulation_config, parse_simulation_config
from causalmeta.effects import CorrectionPolicy
from causalmeta.errors import ConfigError, InvalidWeights
from causalmeta.model import Measure
from causalmeta.simulation import CALIBRATION_SPEC, MismatchDGP


def test_run_config_parses_strings():
    cfg = RunConfig.build(measure="OR", weights="custom:0.5,0.5", correction="reject", ci_level="0.9", seed="3")
    assert cfg.measure is Measure.OR
    assert cfg.weights == WeightScheme.custom([0.5, 0.5])
    assert cfg.correction is CorrectionPolicy.REJECT
    assert (cfg.ci_level, cfg.seed) == (0.9, 3)


@pytest.mark.parametrize(
    "raw, error",
    [
        ({"colour": "red"}, ConfigError),
        ({"measure": "hazard"}, ConfigError),
        ({"model": "bayes"}, ConfigError),
        ({"ci_level": 1.0}, ConfigError),
        ({"output": "pdf"}, ConfigError),
        ({"tau2": "reml"}, ConfigError),
        ({"weights": "custom:0.2,0.2"}, InvalidWeights),
    ],
)
def test_run_config_rejects(raw, error):
    with pytest.raises(error):
        RunConfig.build(**raw)


def test_simulation_defaults():
    cfg = SimulationConfig()
    assert cfg.dgp == MismatchDGP() and cfg.rates == CALIBRATION_SPEC
    assert cfg.effective_replications == 100
    assert SimulationConfig(experiment="calibrate").effective_replications == 10_000


def test_full_config_file(tmp_path):
    p = tmp_path / "sim.ini"
    p.write_text(
        "[run]\nexperiment = mismatch   # comment\nreplications = 50\nseed = 7\n\n"
        "[dgp]\nm1 = 1, 0\nbeta1 = 0.4 -1.2\neta = 0.2\nn = 600\n\n"
        "[rates]\nrates = 0.3 0.2; 0.6 0.45\n"
    )
    cfg = load_simulation_config(p)
    assert (cfg.experiment, cfg.replications, cfg.seed) == ("mismatch", 50, 7)
    assert cfg.dgp.beta1 == (0.4, -1.2) and cfg.dgp.eta == 0.2 and cfg.dgp.n == 600
    assert cfg.rates.rates == ((0.3, 0.2), (0.6, 0.45))


@pytest.mark.parametrize(
    "text",
    [
        "[run]\ncolour = red\n",
        "[extra]\nx = 1\n",
        "[run]\nreplications = many\n",
        "[run]\nreplications = 0\n",
        "[dgp]\neta = 0\n",
        "[rates]\nrates = 0.1 0.2 0.3\n",
        "[rates]\nstudy_probs = 0.5 0.6\n",
        "no section header\n",
    ],
)
def test_invalid_config_files(text):
    with pytest.raises(ConfigError):
        parse_simulation_config(text)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_simulation_config(tmp_path / "absent.ini")
