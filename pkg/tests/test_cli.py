import csv
import json

import numpy as np
import pytest

from brouwerkit import __version__
from brouwerkit.cli import RunConfig, UsageError, main, parse_config, run
from brouwerkit.domain import make_domain
from brouwerkit.fields import sample_grid, write_grid
from brouwerkit.mapzoo import preset


def _records(prefix):
    with open(str(prefix) + ".json") as fh:
        return [json.loads(line) for line in fh]


def test_parse_degree_all():
    cfg = parse_config("degree --map zpow:2 --domain disk:1 --y 0.25,0 --method all".split())
    assert cfg.command == "degree" and cfg.params["method"] == "all" and cfg.params["y"] == [0.25, 0.0]
    assert (cfg.res, cfg.bres, cfg.seed, cfg.jobs) == (128, 256, 0, 1)


@pytest.mark.parametrize("argv", [
    "degree --res 4 --map identity --domain disk:1 --y 0,0",
    "degree --bres 8 --map identity --domain disk:1 --y 0,0",
    "degree --map identity --domain disk:1",
    "degree --map identity --y 0,0",
    "degree --map identity --domain disk:1 --y 0,0 --jobs 0",
    "degree --map identity --domain disk:1 --y a,b",
    "frobnicate",
    "",
])
def test_usage_errors(argv, capsys):
    with pytest.raises(UsageError):
        parse_config(argv.split())
    assert main(argv.split()) == 2


def test_config_roundtrip(tmp_path):
    cfg = parse_config("fscan --map angle --domain disk:1 --a 0,0 --radii 0.3,0.2,0.1,0.05 --seed 4".split())
    path = tmp_path / "c.json"
    path.write_text(cfg.to_json())
    again = parse_config(["fscan", "--config", str(path)])
    assert again == cfg
    assert RunConfig.from_dict(json.loads(cfg.to_json())) == cfg
    # flags override the file
    assert parse_config(["fscan", "--config", str(path), "--seed", "9"]).seed == 9
    with pytest.raises(UsageError):
        parse_config(["bmo", "--config", str(path)])


def test_degree_run(tmp_path, capsys):
    out = tmp_path / "d"
    code = main(["degree", "--map", "zpow:2", "--domain", "disk:1", "--y", "0.25,0", "--out", str(out)])
    assert code == 0
    head, *recs = _records(out)
    assert head["version"] == __version__ and head["config"]["command"] == "degree"
    assert [r["value"] for r in recs] == [2, 2, 2]
    assert len(capsys.readouterr().out.strip().splitlines()) == 3
    lines = (tmp_path / "d.csv").read_text().splitlines()
    assert lines[0] == "# brouwerkit %s" % __version__ and lines[1].startswith("# config: ")
    rows = list(csv.reader(lines[2:]))
    assert rows[0] == ["method", "value", "raw", "residual", "inconclusive"]
    raw = rows[2][2]  # integral method
    assert float(raw) == float("%.17g" % float(raw)) and len(raw.replace(".", "").lstrip("0")) >= 15


def test_escan_pgm(tmp_path):
    out = tmp_path / "e"
    assert main(["escan", "--map", "identity", "--domain", "disk:1", "--yres", "40", "--out", str(out)]) == 0
    raw = (tmp_path / "e.pgm").read_bytes()
    assert raw.startswith(b"P5\n# brouwerkit " + __version__.encode())
    assert b"# config: " in raw
    img = np.frombuffer(raw[-40 * 40:], dtype=np.uint8).reshape(40, 40)
    assert img[20, 20] == 129 and img[0, 0] == 128


def test_cov_support_error_record(tmp_path):
    out = tmp_path / "c"
    assert main(["cov", "--map", "identity", "--domain", "disk:1", "--p", "0.95,0", "--out", str(out)]) == 1
    recs = _records(out)
    assert recs[-1]["kind"] == "error" and recs[-1]["error"] == "SupportError"


def test_io_error_exit_code(tmp_path):
    bad = tmp_path / "missing" / "x"
    assert main(["degree", "--map", "identity", "--domain", "disk:1", "--y", "0,0", "--out", str(bad)]) == 3
    assert main(["degree", "--map", "grid:%s" % (tmp_path / "nope.csv"), "--domain", "disk:1", "--y", "0,0"]) == 3


def test_degree_error_is_inconclusive(capsys):
    # y on the boundary image: every method refuses, recorded as exit 1
    assert main(["degree", "--map", "identity", "--domain", "disk:1", "--y", "1,0"]) == 1


def test_zoo_list(capsys):
    assert main(["zoo", "list"]) == 0
    names = [json.loads(line)["name"] for line in capsys.readouterr().out.splitlines()]
    assert names == sorted(names) and "cavitation" in names


def test_grid_map(tmp_path):
    D = make_domain("ball", ((0.0, 0.0), 1.0), 32)
    path = tmp_path / "g.csv"
    write_grid(sample_grid(preset("diffeo1").field, D), path)
    out = tmp_path / "o"
    assert main(["degree", "--map", "grid:%s" % path, "--domain", "disk:1", "--y", "0.1,0.1",
                 "--method", "winding", "--out", str(out)]) == 0
    assert _records(out)[1]["value"] == 1


def test_energy_and_tilde(tmp_path, capsys):
    assert main(["energy", "--map", "linear:2,0,0,2", "--domain", "box:0,0,1,1", "--res", "16"]) == 0
    assert "value=2" in capsys.readouterr().out
    assert main(["energy", "--map", "surface:stretched:2", "--domain", "box:0,0,1,1", "--res", "16"]) == 0
    assert "stretch=2" in capsys.readouterr().out
    out = tmp_path / "v"
    assert main(["vmodegree", "--map", "tilde-flat:0.5", "--domain", "box:-1,-1,-0.5,1,1,0.5", "--res", "16",
                 "--bres", "64", "--p", "0.1,0.05,0", "--out", str(out)]) == 0
    assert _records(out)[1]["stabilized"] == 1


def test_bad_domain_and_map():
    for argv in (["degree", "--map", "identity", "--domain", "blob:1", "--y", "0,0"],
                 ["degree", "--map", "identity", "--domain", "box:0,0,1", "--y", "0,0"],
                 ["degree", "--map", "nonesuch", "--domain", "disk:1", "--y", "0,0"]):
        assert main(argv) == 2


def test_run_is_repeatable(tmp_path):
    cfg = parse_config(["bmo", "--map", "diffeo1", "--domain", "disk:1", "--seed", "3", "--out",
                        str(tmp_path / "b")])
    assert run(cfg) == 0
    first = [(tmp_path / ("b" + e)).read_bytes() for e in (".json", ".csv")]
    assert run(cfg) == 0
    assert first == [(tmp_path / ("b" + e)).read_bytes() for e in (".json", ".csv")]


def test_scan_jobs_do_not_change_rows(tmp_path):
    rows = []
    for j in (1, 3):
        out = tmp_path / ("s%d" % j)
        assert main(["scan", "--map", "diffeo1", "--domain", "disk:1", "--points", "3", "--jobs", str(j),
                     "--out", str(out)]) == 0
        rows.append((tmp_path / ("s%d.csv" % j)).read_text().splitlines()[2:])
    assert rows[0] == rows[1]
