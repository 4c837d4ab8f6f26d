import pytest

from rbsurvey.config import StudyKind, load_config, parse_config, size_prior_weights
from rbsurvey.errors import SchemaError

MIX = dict(
    study="mixture",
    dataset="influenza",
    response="cases",
    strategy_designs=["srswr", "ppswr"],
    strategy_estimators=["expansion_total", "hansen_hurwitz_total"],
    strategy_priors=[0.1, 0.9],
)


def test_size_prior_rules():
    assert size_prior_weights("uniform", [5, 6]) == [0.5, 0.5]
    w = size_prior_weights("inverse_size", [5, 10])
    assert w == pytest.approx([2 / 3, 1 / 3])
    w = size_prior_weights("inverse_index", [5, 10])
    assert w == pytest.approx([2 / 3, 1 / 3])
    w = size_prior_weights("inverse_index", [5, 6, 7])
    assert w == pytest.approx([6 / 11, 3 / 11, 2 / 11])
    assert size_prior_weights([0.25, 0.75], [1, 2]) == [0.25, 0.75]
    with pytest.raises(SchemaError):
        size_prior_weights("bogus", [1])
    with pytest.raises(SchemaError):
        size_prior_weights([0.5, 0.6], [1, 2])


def test_parse_mixture_defaults():
    cfg = parse_config(MIX)
    assert cfg.study is StudyKind.MIXTURE
    assert cfg.responses == ("cases",)
    assert cfg.replicates == 1_000_000
    assert cfg.reference == "ppswr_hansen_hurwitz_total"
    assert cfg.normalized_priors == pytest.approx([0.1, 0.9])


@pytest.mark.parametrize(
    "change,match",
    [
        ({"bogus": 1}, "unknown"),
        ({"replicates": "10"}, "type"),
        ({"replicates": 0}, "replicates"),
        ({"strategy_priors": [0.2, 0.9]}, "sum"),
        ({"strategy_priors": [1.0]}, "entries"),
        ({"confidence_level": 1.5}, "confidence"),
        ({"level": "sideways"}, "sideways"),
        ({"reference_strategy": "x"}, "reference"),
        ({"strategy_names": ["a", "a"]}, "distinct"),
        ({"workers": True}, "type"),
    ],
)
def test_parse_rejects(change, match):
    with pytest.raises(SchemaError, match=match):
        parse_config({**MIX, **change})


def test_missing_keys():
    with pytest.raises(SchemaError, match="missing"):
        parse_config({"study": "mixture"})
    data = dict(MIX)
    del data["response"]
    with pytest.raises(SchemaError, match="response"):
        parse_config(data)


def test_duplicate_default_names_get_suffixes():
    cfg = parse_config({**MIX, "strategy_designs": ["srswr", "srswr"], "strategy_estimators": ["expansion_total"] * 2})
    assert cfg.names == ("srswr_expansion_total_1", "srswr_expansion_total_2")


def test_retrospective_sizes():
    cfg = parse_config(dict(study="retrospective", dataset="trees", responses=["girth"], posited_sizes=[5, 6, 7]))
    assert cfg.sampling_sizes == (5, 6, 7)
    assert cfg.sampling_prior == cfg.posited_prior
    probe = cfg.with_overrides(true_sizes=(5,), size_prior="uniform")
    assert probe.sampling_prior == [1.0]
    assert probe.posited_prior == pytest.approx([1 / 3] * 3)
    with pytest.raises(SchemaError):
        parse_config(dict(study="retrospective", dataset="trees", response="girth"))


def test_canonical_echo_omits_workers():
    cfg = parse_config(MIX)
    assert "workers" not in cfg.canonical()
    assert cfg.canonical() == cfg.with_overrides(workers=4).canonical()
    assert cfg.canonical() != cfg.with_overrides(block_size=7).canonical()


def test_load_toml(tmp_path):
    p = tmp_path / "s.toml"
    p.write_text('study = "retrospective"\ndataset = "trees"\nresponse = "girth"\nposited_sizes = [5, 6]\n')
    assert load_config(p).posited_sizes == (5, 6)
    p.write_text("study = [")
    with pytest.raises(SchemaError):
        load_config(p)


def test_shipped_configs_parse():
    from pathlib import Path

    root = Path(__file__).resolve().parents[1] / "configs"
    s1 = load_config(root / "study1.toml")
    s2 = load_config(root / "study2.toml")
    assert s1.reference == "ppswr_hansen_hurwitz"
    assert s2.posited_sizes == tuple(range(5, 15))
