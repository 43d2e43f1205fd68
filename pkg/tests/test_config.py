import pytest

from resbn.config import RunConfig
from resbn.errors import ConfigError


def write(tmp_path, text):
    p = tmp_path / "run.toml"
    p.write_text(text)
    return p


def fields_of(excinfo):
    return {f["field"] for f in excinfo.value.fields}


def test_defaults_valid():
    cfg = RunConfig()
    cfg.validate()
    assert cfg.score == "k2" and cfg.disc == "kmeans5"


def test_load_toml_with_overrides(tmp_path):
    p = write(tmp_path, 'score = "bic"\ndisc = "10q"\nlog_vars = ["Gross"]\nseed = 7\n'
                       '[name_map]\n"Oil recovery factor" = "RF"\n')
    cfg = RunConfig.load(p, {"seed": 9, "metric": None})
    assert (cfg.score, cfg.disc, cfg.seed, cfg.metric) == ("bic", "10q", 9, "gower")
    assert cfg.name_map == {"Oil recovery factor": "RF"}


def test_unknown_keys_rejected(tmp_path):
    with pytest.raises(ConfigError) as e:
        RunConfig.load(write(tmp_path, 'scor = "bic"\nfoo = 1\n'))
    assert fields_of(e) == {"foo", "scor"}


def test_bad_toml(tmp_path):
    with pytest.raises(ConfigError, match="TOML"):
        RunConfig.load(write(tmp_path, "score = \n"))
    with pytest.raises(ConfigError):
        RunConfig.load(tmp_path / "missing.toml")


@pytest.mark.parametrize("key,value", [
    ("score", "aic"), ("disc", "kmeans0"), ("metric", "manhattan"), ("linkage", "ward"),
    ("selection", "best"), ("period_mode", "epoch"), ("analogue_n", 0), ("seed", -1),
    ("n_samples", "many"), ("jobs", True), ("max_parents", 0), ("alpha", -1.0),
    ("pipeline", "forest"), ("grid_scores", ["k2", "aic"]), ("required_edges", [["A"]]),
])
def test_field_level_errors(key, value):
    with pytest.raises(ConfigError) as e:
        RunConfig.from_mapping({key: value})
    assert key in fields_of(e)


def test_errors_are_collected():
    with pytest.raises(ConfigError) as e:
        RunConfig.from_mapping({"score": "aic", "metric": "x", "linkage": "y"})
    assert fields_of(e) == {"score", "metric", "linkage"}


def test_conflicting_edges():
    with pytest.raises(ConfigError):
        RunConfig.from_mapping({"required_edges": [["A", "B"]], "forbidden_edges": [["A", "B"]]})


def test_fingerprint_ignores_out_and_jobs():
    a = RunConfig(out="x", jobs=1)
    b = RunConfig(out="y", jobs=4)
    assert a.fingerprint() == b.fingerprint()
    assert a.fingerprint() != RunConfig(seed=1).fingerprint()


def test_load_data_checks_names():
    with pytest.raises(ConfigError) as e:
        RunConfig(log_vars=["Nope"]).load_data()
    assert fields_of(e) == {"log_vars"}
    with pytest.raises(ConfigError):
        RunConfig(target="Nope").load_data()
    with pytest.raises(ConfigError):
        RunConfig(filter_var="Nope").load_data()


def test_load_data_transforms():
    data = RunConfig(log_vars=["Gross"], period_mode="log_age").load_data()
    assert data.spec("Gross").transform == "log"
    assert data.spec("Period").transform == "log_period_age"
