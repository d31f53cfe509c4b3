from pathlib import Path

import pytest

from energy import CloudModel, FiniteRangeModel, PairwiseModel, SumModel
from errors import ConfigError
from experiment import collect, parse_config, validate_config

BASE = """
dimension = 1
seed = 7
output_dir = out

[window]
n = 2

[model]
kind = pairwise
potential = power
beta = 1.0
p = 2.5

[sampler]
method = rejection
samples = 50

[diagnostics]
reports = intensity, dlr
delta.centers = 0; 0.75
delta.half_width = 0.25
"""


def messages(text: str) -> list[str]:
    _, violations = collect(text)
    return [str(violation) for violation in violations]


def test_valid_config(tmp_path):
    path = tmp_path / "experiment.cfg"
    path.write_text(BASE)

    assert validate_config(path) == []


def test_parsed_fields(tmp_path):
    config = parse_config(BASE, tmp_path)

    assert config.dimension == 1
    assert config.seed == 7
    assert config.output_dir == tmp_path / "out"
    assert config.window.upper == (2.0,)
    assert isinstance(config.model, PairwiseModel)
    assert config.diagnostics.reports == ("intensity", "dlr")
    assert [delta.lower for delta in config.diagnostics.deltas()] == [(-0.25,), (0.5,)]
    assert len(config.diagnostics.battery()) == 8
    assert config.sampler_spec().samples == 50


def test_comments_and_defaults():
    config = parse_config("dimension = 2  # plane\nmodel.kind = activity\nmodel.theta = 0.3\n")

    assert config.window.lower == (-1.0, -1.0)
    assert config.sampler == {"method": "rejection", "samples": 100, "chains": 1, "max_attempts": 100_000}
    assert config.diagnostics.centers == ((0.0, 0.0),)


def test_tail_condition_violated():
    text = BASE.replace("p = 2.5", "p = 1.0")
    violations = messages(text)

    assert len(violations) == 1
    assert "model.potential" in violations[0]
    assert "tail condition violated" in violations[0].lower()


def test_negative_cloud_radius():
    text = BASE.replace("kind = pairwise", "kind = cloud\nR = -1").replace("p = 2.5", "p = 2.5\nquad_tol = 1e-3")
    _, violations = collect(text)

    assert [violation.field for violation in violations] == ["model.R"]
    assert "range" in violations[0].message


def test_cloud_model():
    text = BASE.replace("kind = pairwise", "kind = cloud\nR = 0.25").replace("potential = power", "potential = exponential\nkappa = 2").replace("p = 2.5\n", "")
    config = parse_config(text)

    assert isinstance(config.model, CloudModel)
    assert config.model.shell_offset0 == 0.5


def test_proposal_mix_must_sum_to_one():
    text = BASE.replace("method = rejection", "method = mcmc\nbirth = 0.4\ndeath = 0.4\nmove = 0.1")

    with pytest.raises(ConfigError) as e:
        parse_config(text)

    assert e.value.field == "sampler"


def test_mcmc_keys_rejected_for_rejection_method():
    text = BASE.replace("samples = 50", "samples = 50\nbirth = 0.3\ndeath = 0.3\nmove = 0.3")
    fields = {violation.field for violation in collect(text)[1]}

    assert {"sampler.birth", "sampler.death", "sampler.move"} <= fields


def test_max_attempts_rejected_for_mcmc_method():
    violations = messages(BASE.replace("method = rejection", "method = mcmc\nmax_attempts = 10"))

    assert len(violations) == 1
    assert "sampler.max_attempts" in violations[0]
    assert "rejection" in violations[0]


def test_unknown_key_has_line():
    _, violations = collect(BASE + "colour = blue\n")

    assert violations[0].field == "diagnostics.colour"
    assert violations[0].line == BASE.count("\n") + 1


def test_duplicate_key():
    _, violations = collect(BASE + "[model]\nbeta = 2\n")

    assert violations[0].field == "model.beta"
    assert "duplicate" in violations[0].message


def test_every_violation_is_reported():
    text = BASE.replace("samples = 50", "samples = -5").replace("n = 2", "n = zero") + "bogus = 1\n"
    fields = {violation.field for violation in collect(text)[1]}

    assert {"sampler.samples", "window.n", "diagnostics.bogus"} <= fields


def test_delta_outside_window():
    violations = messages(BASE.replace("delta.centers = 0; 0.75", "delta.centers = 1.9"))
    assert any("diagnostics.delta.centers" in violation for violation in violations)


def test_stationarize_needs_centered_window():
    text = BASE.replace("n = 2", "lower = 0\nupper = 2").replace("reports = intensity, dlr", "reports = stationarize").replace("delta.centers = 0; 0.75", "delta.centers = 1")
    _, violations = collect(text)

    assert [violation.field for violation in violations] == ["diagnostics.reports"]


def test_sum_model():
    text = """
dimension = 1
model.kind = sum
model.terms = 2
model.term.0.kind = finite_range
model.term.0.potential = step
model.term.0.range = 0.5
model.term.0.beta = 0.7
model.term.1.kind = activity
model.term.1.theta = 0.2
"""
    config = parse_config(text)

    assert isinstance(config.model, SumModel)
    assert isinstance(config.model.terms[0], FiniteRangeModel)
    assert config.model.shell_offset0 == 0.5


def test_nested_sum_is_rejected():
    text = "dimension = 1\nmodel.kind = sum\nmodel.terms = 1\nmodel.term.0.kind = sum\n"
    assert any("model.term.0.kind" in violation for violation in messages(text))


def test_unreadable_file(tmp_path):
    with pytest.raises(ConfigError):
        validate_config(tmp_path / "missing.cfg")


def test_with_seed_and_output_dir():
    config = parse_config(BASE).with_seed(99).with_output_dir(Path("elsewhere"))

    assert config.sampler_spec().seed == 99
    assert config.entries["seed"] == "99"
    assert config.output_dir == Path("elsewhere")
