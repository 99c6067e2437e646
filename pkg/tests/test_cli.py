import json

import pytest

from nhedge import cli
from nhedge.capacitance import _capacitance_cached
from nhedge.config import ExperimentConfig, config_from_dict, load_config
from nhedge.errors import ConfigError

SMALL = ["--grid", "16", "--nmult", "4"]


def _files(directory):
    return {p.name: p.read_bytes() for p in directory.iterdir() if p.name != "manifest.json"}


def test_defaults():
    cfg = load_config(None)
    assert cfg == ExperimentConfig()
    assert cfg.numerics.n_mult == 10 and cfg.numerics.grid == 128
    assert cfg.kappas() == (1.0, 1.0)


def test_unknown_key_reports_line(tmp_path, capsys):
    path = tmp_path / "c.toml"
    path.write_text("[numerics]\ngrid = 16\nflatnes = 1e-3\n")
    with pytest.raises(ConfigError, match="line 3: unknown key 'flatnes'"):
        load_config(path)
    assert cli.main(["zak", "--config", str(path)]) == cli.EXIT_CONFIG
    assert "flatnes" in capsys.readouterr().err


def test_unknown_table_reports_line(tmp_path):
    path = tmp_path / "c.toml"
    path.write_text("[run]\nseed = 1\n\n[numeric]\ngrid = 16\n")
    with pytest.raises(ConfigError, match="line 4: unknown table"):
        load_config(path)


@pytest.mark.parametrize("body, msg", [
    ("[numerics]\ngrid = \"many\"\n", "must be an integer"),
    ("[numerics]\ngrid = 15\n", "must be even"),
    ("[material]\nkappa1 = [1.0]\n", "pair"),
    ("[run]\nemit_mu = 1\n", "true or false"),
    ("[geometry]\nseparation = \"edge\"\n", "separation"),
])
def test_bad_values_exit_config(tmp_path, body, msg):
    path = tmp_path / "c.toml"
    path.write_text(body)
    with pytest.raises(ConfigError, match=msg):
        load_config(path)
    assert cli.main(["capmatrix", "--config", str(path)]) == cli.EXIT_CONFIG


def test_overlapping_disks_exit_config(tmp_path):
    path = tmp_path / "c.toml"
    path.write_text("[geometry]\ngap_in = -0.5\n")
    assert cli.main(["capmatrix", "--config", str(path), *SMALL, "--out", str(tmp_path / "o")]) == cli.EXIT_CONFIG


def test_config_dict_round_trip():
    cfg = ExperimentConfig().with_kappas(1 + 1.38j, 1 - 1.42j)
    assert config_from_dict(cfg.to_dict()) == cfg
    assert config_from_dict(cfg.to_dict()).digest() == cfg.digest()


def test_empty_config_is_hermitian_trivial(tmp_path):
    path = tmp_path / "empty.toml"
    path.write_text("")
    out = tmp_path / "z"
    assert cli.main(["zak", "--config", str(path), *SMALL, "--out", str(out)]) == cli.EXIT_OK
    zak = json.loads((out / "zak.json").read_text())
    assert abs(zak["phase1"]) < 1e-3 and abs(zak["phase2"]) < 1e-3


def test_manifest_replays_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["--kappa1", "1+1.38j", "--kappa2", "1-1.42j", *SMALL]
    assert cli.main(["bands", *args, "--out", str(a)]) == 0
    manifest = json.loads((a / "manifest.json").read_text())
    assert manifest["command"] == "bands" and manifest["exit_status"] == 0
    for name, digest in manifest["files"].items():
        assert len(digest) == 64 and (a / name).exists()
    _capacitance_cached.cache_clear()
    assert cli.main(["bands", "--config", str(a / "manifest.json"), "--out", str(b)]) == 0
    assert _files(a) == _files(b)
    replayed = json.loads((b / "manifest.json").read_text())["config"]
    replayed["run"].pop("out")
    manifest["config"]["run"].pop("out")
    assert replayed == manifest["config"]


def test_unbroken_defect_exits_not_found(tmp_path):
    out = tmp_path / "d"
    code = cli.main(["defect", "--kappa1", "1+0.7j", "--kappa2", "1-0.7j", *SMALL, "--out", str(out)])
    assert code == cli.EXIT_NOT_FOUND
    assert json.loads((out / "manifest.json").read_text())["exit_status"] == cli.EXIT_NOT_FOUND


def test_capmatrix_columns(tmp_path):
    out = tmp_path / "c"
    assert cli.main(["capmatrix", *SMALL, "--out", str(out)]) == 0
    lines = (out / "capmatrix.csv").read_text().splitlines()
    assert lines[0].split(",")[:4] == ["alpha [1/length]", "re_C11 [1]", "re_C12 [1]", "im_C12 [1]"]
    assert len(lines) == 17


def test_reproduce_prefixes(tmp_path):
    out = tmp_path / "r"
    assert cli.main(["reproduce", "--figure", "5", *SMALL, "--out", str(out)]) == 0
    names = {p.name for p in out.iterdir()}
    assert {"fig5a_phasefactor.csv", "fig5b_phasefactor.csv", "fig5c_phasefactor.csv"} <= names


def test_bad_complex_flag_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        cli.main(["bands", "--kappa1", "one"])
    assert exc.value.code == 2
