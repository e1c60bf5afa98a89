import pytest

from desne.config import DEFAULTS, RunConfig, UsageError, load_config_file, resolve


def test_layers(tmp_path):
    f = tmp_path / "run.toml"
    f.write_text('keep = 0.2\nde-pop = 40\nseed = 3\n')
    file_values = load_config_file(f)
    cfg = resolve("sample", {"seed": 9, "keep": None}, file_values)
    assert cfg["keep"] == 0.2 and cfg["de_pop"] == 40 and cfg["seed"] == 9
    assert cfg["grid"] == DEFAULTS["grid"]


def test_hash_ignores_directories_but_not_values():
    a = resolve("sample", {"input": "/a/data.csv"})
    b = resolve("sample", {"input": "/b/data.csv"})
    c = resolve("sample", {"input": "/a/data.csv", "seed": 1})
    assert a.config_hash == b.config_hash != c.config_hash
    assert len(a.config_hash) == 64


def test_hash_is_command_scoped():
    assert "keep" not in resolve("embed", {})
    assert resolve("embed", {}).config_hash != resolve("bench-optimizers", {}).config_hash


@pytest.mark.parametrize("text", ["nope = 1\n", "[table]\nkeep = 0.1\n", "keep = \n"])
def test_bad_files(tmp_path, text):
    f = tmp_path / "bad.toml"
    f.write_text(text)
    with pytest.raises(UsageError):
        load_config_file(f)


def test_missing_file(tmp_path):
    with pytest.raises(UsageError):
        load_config_file(tmp_path / "none.toml")


def test_runconfig_is_plain_mapping():
    cfg = RunConfig("energy", {"methods": "dq"})
    assert dict(cfg) == {"methods": "dq"}
    assert cfg.canonical() == {"command": "energy", "methods": "dq"}
