import csv
import io
import json
import math

import pytest

from canonsys import cli
from canonsys.errors import ConfigError

BASE = """\
[function]
id = pw
params = 1.0

[grid]
spacing = 2^-5

[scan]
t_values = -1, 0, 0.5

[probes]
z = i, 0.5+1i
"""


def _run(tmp_path, capsys, text, *args):
    p = tmp_path / "run.ini"
    p.write_text(text)
    code = cli.main([args[0], "--config", str(p), *args[1:]])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_parse_defaults_and_notation():
    cfg = cli.parse_config(BASE)
    assert cfg.function_id == "pw" and cfg.params == (1.0,)
    assert cfg.spacing == 2 ** -5
    assert cfg.t_values == [-1.0, 0.0, 0.5]
    assert cfg.z == [1j, 0.5 + 1j]
    assert cfg.jobs is None and cfg.output_format == "csv"


def test_parse_range_and_product():
    cfg = cli.parse_config(
        "[function]\nid = product\nparams = pw 0.25 | gamma_ratio\n"
        "[grid]\nspacing = 1/64\n[scan]\nt_min = -1\nt_max = 0\nt_step = 0.25\n")
    assert cfg.t_values == [-1.0, -0.75, -0.5, -0.25, 0.0]
    assert cfg.function_id == "product"


@pytest.mark.parametrize("text,needle", [
    (BASE.replace("spacing = 2^-5", "spacing = 2^-5\nbogus = 1"), "bogus"),
    ("[function]\nid = pw\nparams = 1\n[extra]\nx = 1\n", "unknown section"),
    (BASE.replace("id = pw", "id = nope"), "unknown function"),
    (BASE.replace("t_values = -1, 0, 0.5", "t_values = 0.01"), "lattice"),
    (BASE.replace("z = i, 0.5+1i", "z = 1"), "Im z > 0"),
    (BASE.replace("z = i, 0.5+1i", "z = 10i"), "oscillation cap"),
    (BASE.replace("params = 1.0", "params = 0"), "InvalidParams"),
    (BASE + "[evolve]\npath = sideways\n", "path must be"),
    (BASE + "[output]\nformat = xml\n", "format"),
    (BASE + "[run]\njobs = 0\n", "jobs"),
])
def test_parse_errors(text, needle):
    with pytest.raises(ConfigError, match=needle):
        cli.parse_config(text, "run.ini")


def test_error_carries_line_number():
    with pytest.raises(ConfigError) as exc:
        cli.parse_config(BASE.replace("spacing = 2^-5", "spacing = 2^-5\nbogus = 1"), "run.ini")
    assert str(exc.value).startswith("run.ini:7 [grid] bogus: unknown key")


def test_config_exit_code(tmp_path, capsys):
    code, out, err = _run(tmp_path, capsys, BASE + "[run]\nseed = x\n", "hamiltonian")
    assert code == cli.EXIT_CONFIG and "config error" in err and out == ""


def test_hamiltonian_csv(tmp_path, capsys):
    code, out, _ = _run(tmp_path, capsys, BASE, "hamiltonian")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert list(rows[0]) == cli.HEADERS["hamiltonian"]
    assert [float(r["t"]) for r in rows] == [-1.0, 0.0, 0.5]
    for r in rows:
        assert abs(float(r["alpha"]) - 1) < 1e-6 and abs(float(r["gamma"]) - 1) < 1e-6


def test_jobs_determinism(tmp_path, capsys):
    text = BASE.replace("t_values = -1, 0, 0.5", "t_values = -1, -0.5, 0, 0.25, 0.5")
    one = _run(tmp_path, capsys, text, "evolve", "--jobs", "1")
    three = _run(tmp_path, capsys, text, "evolve", "--jobs", "3")
    assert one[0] == three[0] == 0 and one[1] == three[1]


def test_evolve_both_paths(tmp_path, capsys):
    text = BASE + "[evolve]\npath = both\n"
    code, out, _ = _run(tmp_path, capsys, text, "evolve", "--format", "json")
    assert code == 0
    doc = json.loads(out)
    rows = doc["rows"] if isinstance(doc, dict) else doc
    direct = {(r["t"], r["re_z"], r["im_z"]): r for r in rows if r["path"] == "direct"}
    for r in rows:
        if r["path"] == "ode":
            d = direct[(r["t"], r["re_z"], r["im_z"])]
            ref = math.hypot(d["re_A"], d["im_A"])
            assert math.hypot(r["re_A"] - d["re_A"], r["im_A"] - d["im_A"]) <= 1e-3 * ref


def test_empty_scan(tmp_path, capsys):
    text = BASE.replace("t_values = -1, 0, 0.5", "t_min = 1\nt_max = 0")
    for cmd in cli.COMMANDS:
        code, out, _ = _run(tmp_path, capsys, text, cmd)
        assert code == 0
        assert out.strip() == ",".join(cli.HEADERS[cmd])


def test_norm_scan_margin_failure(tmp_path, capsys):
    text = BASE.replace("t_values = -1, 0, 0.5", "t_values = 0.5, 1.5")
    code, out, _ = _run(tmp_path, capsys, text, "norm-scan")
    assert code == cli.EXIT_COMPUTE
    rows = list(csv.DictReader(io.StringIO(out)))
    assert float(rows[0]["norm"]) < 1 and abs(float(rows[1]["norm"]) - 1) < 1e-9


def test_output_file(tmp_path, capsys):
    dest = tmp_path / "out.csv"
    code, out, _ = _run(tmp_path, capsys, BASE, "norm-scan", "--output", str(dest))
    assert code == 0 and out == ""
    assert dest.read_text().splitlines()[0] == "t,norm"


def test_t0_scan_summary(tmp_path, capsys):
    text = BASE.replace("t_values = -1, 0, 0.5", "t_values = 0.5, 0.75, 1")
    code, out, err = _run(tmp_path, capsys, text, "t0-scan")
    assert code == 0 and "t0_estimate=1" in err
    assert out.splitlines()[0] == "t,norm,j_diag,y_norm,err"


def test_list_functions(capsys):
    assert cli.main(["list-functions"]) == 0
    out = capsys.readouterr().out
    for id_ in ("pw", "mobius", "blaschke", "gamma_ratio", "product"):
        assert id_ in out


def test_verify_subset(tmp_path, capsys):
    dest = tmp_path / "report.json"
    code = cli.main(["verify", "--criteria", "2,8", "--output", str(dest)])
    err = capsys.readouterr().err
    assert code == 0 and err.count("[PASS]") == 2
    doc = json.loads(dest.read_text())
    assert doc["passed"] and [c["number"] for c in doc["criteria"]] == [2, 8]


def test_verify_unknown_criterion(capsys):
    assert cli.main(["verify", "--criteria", "13"]) == cli.EXIT_CONFIG
