import pytest
import yaml

from rankforge.config import (
    EFFECTIVE_CONFIG_NAME,
    dump_effective_config,
    load_config_files,
    parse_override,
    resolve_config,
    set_config_path,
    validate_config,
    write_effective_config,
)
from rankforge.errors import ConfigValidationError


def _write_yaml(path, data):
    path.write_text(yaml.safe_dump(data), encoding="utf-8")
    return path


def test_later_files_win_key_by_key(tmp_path):
    a = _write_yaml(tmp_path / "a.yaml", {
        "seed": 1,
        "trainer": {"epochs": 5, "learning_rate": 0.5},
    })
    b = _write_yaml(tmp_path / "b.yaml", {
        "seed": 2,
        "trainer": {"epochs": 9},
    })
    merged = load_config_files([a, b])
    assert merged["seed"] == 2
    assert merged["trainer"] == {"epochs": 9, "learning_rate": 0.5}
    # order matters
    merged = load_config_files([b, a])
    assert merged["seed"] == 1
    assert merged["trainer"] == {"epochs": 5, "learning_rate": 0.5}


def test_lists_replace_instead_of_merging(tmp_path):
    a = _write_yaml(tmp_path / "a.yaml", {
        "trainer": {"callbacks": [
            {"class_path": "IndexAction", "init_args": {"index_dir": "x"}},
            {"class_path": "IndexAction", "init_args": {"index_dir": "y"}},
        ]},
    })
    b = _write_yaml(tmp_path / "b.yaml", {
        "trainer": {"callbacks": [
            {"class_path": "IndexAction", "init_args": {"index_dir": "z"}},
        ]},
    })
    merged = load_config_files([a, b])
    assert len(merged["trainer"]["callbacks"]) == 1
    assert merged["trainer"]["callbacks"][0]["init_args"]["index_dir"] == "z"


def test_load_config_files_errors(tmp_path):
    with pytest.raises(ConfigValidationError):
        load_config_files([tmp_path / "missing.yaml"])
    bad = tmp_path / "bad.yaml"
    bad.write_text("a: [unclosed\n", encoding="utf-8")
    with pytest.raises(ConfigValidationError):
        load_config_files([bad])
    scalar = _write_yaml(tmp_path / "scalar.yaml", ["not", "a", "mapping"])
    with pytest.raises(ConfigValidationError):
        load_config_files([scalar])
    empty = tmp_path / "empty.yaml"
    empty.write_text("", encoding="utf-8")
    assert load_config_files([empty]) == {}


def test_parse_override_values():
    assert parse_override("seed=3") == ("seed", 3)
    assert parse_override("trainer.learning_rate=0.5") == ("trainer.learning_rate", 0.5)
    assert parse_override("--seed=4") == ("seed", 4)
    assert parse_override("a.b=true") == ("a.b", True)
    assert parse_override("a.b=[1, 2]") == ("a.b", [1, 2])
    assert parse_override("a.b=text") == ("a.b", "text")
    assert parse_override("a.b=") == ("a.b", "")
    with pytest.raises(ConfigValidationError):
        parse_override("no-equals-sign")
    with pytest.raises(ConfigValidationError):
        parse_override("=5")


def _model_raw():
    return {
        "model": {
            "class_path": "BiEncoder",
            "init_args": {
                "config": {
                    "class_path": "BiEncoderConfig",
                    "init_args": {"embedding_dim": 8},
                },
            },
        },
    }


def test_set_config_path_descends_through_init_args():
    raw = _model_raw()
    set_config_path(raw, "model.config.embedding_dim", 32)
    assert raw["model"]["init_args"]["config"]["init_args"]["embedding_dim"] == 32


def test_set_config_path_explicit_init_args_spelling():
    raw = _model_raw()
    set_config_path(raw, "model.init_args.config.init_args.embedding_dim", 16)
    assert raw["model"]["init_args"]["config"]["init_args"]["embedding_dim"] == 16
    # both spellings address the same slot
    other = _model_raw()
    set_config_path(other, "model.config.embedding_dim", 16)
    assert other == raw


def test_set_config_path_list_index():
    raw = {
        "trainer": {"callbacks": [
            {"class_path": "SearchAction", "init_args": {"index_dir": "i", "run_path": "r", "k": 10}},
        ]},
    }
    set_config_path(raw, "trainer.callbacks.0.k", 25)
    assert raw["trainer"]["callbacks"][0]["init_args"]["k"] == 25
    with pytest.raises(ConfigValidationError):
        set_config_path(raw, "trainer.callbacks.one.k", 1)
    with pytest.raises(ConfigValidationError):
        set_config_path(raw, "trainer.callbacks.7.k", 1)


def test_set_config_path_creates_missing_levels():
    raw = {}
    set_config_path(raw, "data.qrels_path", "q.txt")
    assert raw == {"data": {"qrels_path": "q.txt"}}


def test_set_config_path_rejects_scalar_descent():
    raw = {"seed": 3}
    with pytest.raises(ConfigValidationError):
        set_config_path(raw, "seed.nested", 1)


def test_validate_config_reports_key_path():
    with pytest.raises(ConfigValidationError) as exc:
        validate_config({"trainer": {"epochs": "many"}})
    assert exc.value.key_path == "trainer.epochs"
    with pytest.raises(ConfigValidationError) as exc:
        validate_config({"no_such_block": 1})
    assert exc.value.key_path == "no_such_block"
    with pytest.raises(ConfigValidationError) as exc:
        validate_config({"model": {"class_path": "Transformer"}})
    assert "model.class_path" in exc.value.key_path


def test_resolve_config_precedence(tmp_path):
    base = _write_yaml(tmp_path / "base.yaml", {"seed": 1, "threads": 2})
    config = resolve_config([base])
    assert config.seed == 1 and config.threads == 2
    config = resolve_config([base], overrides=["seed=5"])
    assert config.seed == 5
    # explicit flags beat overrides, overrides beat files
    config = resolve_config([base], overrides=["seed=5", "threads=9"], seed=7, threads=4)
    assert config.seed == 7 and config.threads == 4


def test_resolve_config_defaults():
    config = validate_config({})
    assert config.seed == 0
    assert config.threads == 1
    assert config.model is None
    assert config.trainer.epochs == 1
    assert config.trainer.callbacks == []


def test_dump_effective_config_is_stable(tmp_path):
    raw = {
        "threads": 2,
        "seed": 11,
        "model": {"class_path": "BiEncoder", "init_args": {"name": "m"}},
        "trainer": {"epochs": 3, "output_dir": "runs/m"},
    }
    config = validate_config(raw)
    text = dump_effective_config(config)
    assert text == dump_effective_config(config)
    # canonical ordering is alphabetical regardless of input order
    data = yaml.safe_load(text)
    assert list(data) == sorted(data)
    # round-trips through validation to the same bytes
    assert dump_effective_config(validate_config(data)) == text
    out = write_effective_config(config, tmp_path / "out")
    assert out.name == EFFECTIVE_CONFIG_NAME
    assert out.read_text(encoding="utf-8") == text


def test_effective_config_excludes_unset_optionals():
    text = dump_effective_config(validate_config({}))
    data = yaml.safe_load(text)
    assert "model" not in data
    assert data["seed"] == 0
