import csv
import json
from pathlib import Path

import numpy as np
import pytest

from gldual.cli import EXIT_CONCLUSION, EXIT_CONFIG, EXIT_OK, OUT_DIR_ENV, main
from gldual.config import load_config, parse_config
from gldual.errors import ConfigError
from gldual.fieldio import dumps_field, loads_field, read_field
from gldual.grid import GridSpec, ScalarField

GOLDEN = Path(__file__).parent / "golden"

T1_CONFIG = """
theorem = 1
nodes = 9
gamma = 0.05
init = cosine:2:0.3
samples_min = 100
samples_max = 50
"""


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_golden_config_parses():
    cfg = load_config(GOLDEN / "full.cfg")
    assert (cfg.theorem, cfg.nodes, cfg.extent, cfg.seed, cfg.max_iter) == (2, 3, 2.0, 7, 30)
    assert cfg.eps_list == [1e-2, 1e-3, 1e-4]
    p = cfg.params()
    assert p.grid.boundary == "dirichlet" and p.source.values[1] == pytest.approx(2.0)


@pytest.mark.parametrize(
    "text",
    ["theorem = 3", "nodes = many", "colour = blue", "f = quadratic\ntheorem = 2", "no equals sign here"],
)
def test_malformed_configs(text):
    with pytest.raises(ConfigError):
        cfg = parse_config(text)
        cfg.theorem = cfg.theorem or 2
        cfg.params()


def test_theorem1_rejects_source():
    with pytest.raises(ConfigError):
        parse_config("theorem = 1\nf = constant:1").params()


def test_field_file_golden_and_round_trip(rng):
    text = (GOLDEN / "u0_three_nodes.txt").read_text()
    fld = loads_field(text)
    assert dumps_field(fld) == text
    g = GridSpec.square(4, 1.7)
    u = ScalarField(g, rng.normal(size=16) * 10.0 ** rng.integers(-300, 300, 16))
    back = loads_field(dumps_field(u))
    assert back.grid == g and np.array_equal(back.values, u.values)


def test_solve_writes_field(tmp_path):
    out = tmp_path / "u0.txt"
    assert main(["solve", "--config", str(GOLDEN / "full.cfg"), "--out", str(out)]) == EXIT_OK
    assert out.read_text() == (GOLDEN / "u0_three_nodes.txt").read_text()


def test_verify_t1_report_format(tmp_path):
    cfg = write(tmp_path, "t1.cfg", T1_CONFIG)
    out = tmp_path / "r.jsonl"
    assert main(["verify-t1", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    records = [json.loads(ln) for ln in out.read_text().splitlines()]
    assert records[0]["kind"] == "instance" and records[0]["theorem"] == 1
    names = {r["name"]: r for r in records[1:]}
    for rec in records[1:]:
        assert set(rec) == {"kind", "name", "clause", "value", "threshold", "status", "detail"}
        assert rec["clause"]
    assert names["duality_gap"]["status"] == "pass"
    assert names["op1"]["status"] == "fail"
    assert names["local_max"]["status"] == "not-asserted"


def test_verify_t1_zero_instance(tmp_path):
    cfg = write(tmp_path, "t1.cfg", "theorem = 1\nnodes = 9\nsamples_min = 50\nsamples_max = 20\n")
    out = tmp_path / "r.jsonl"
    assert main(["verify-t1", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    names = {json.loads(ln)["name"]: json.loads(ln) for ln in out.read_text().splitlines()[1:]}
    assert names["in_B"]["status"] == "pass" and names["op2"]["status"] == "fail"
    assert names["duality_gap"]["status"] == "pass"


def test_verify_t2_manufactured_passes(tmp_path):
    cfg = write(tmp_path, "t2.cfg", "theorem = 2\nnodes = 65\nf = manufactured\nsamples_min = 100\n")
    out = tmp_path / "r.jsonl"
    assert main(["verify-t2", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    checks = [json.loads(ln) for ln in out.read_text().splitlines() if json.loads(ln)["kind"] == "check"]
    assert all(c["status"] == "pass" for c in checks)


def test_conjugates_command(tmp_path):
    cfg = write(tmp_path, "c.cfg", "theorem = 2\nnodes = 6\nf = manufactured\n")
    out = tmp_path / "c.jsonl"
    assert main(["conjugates", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    names = [json.loads(ln).get("name") for ln in out.read_text().splitlines()]
    assert {"oracle_F", "oracle_G0", "oracle_G1K", "elimination"} <= set(names)


def test_config_error_exit_and_no_output(tmp_path):
    cfg = write(tmp_path, "bad.cfg", "theorem = 1\nnodes = 2\n")
    out = tmp_path / "r.jsonl"
    assert main(["verify-t1", "--config", str(cfg), "--out", str(out)]) == EXIT_CONFIG
    assert not out.exists()
    assert main(["verify-t1", "--config", str(tmp_path / "missing.cfg")]) == EXIT_CONFIG
    cfg2 = write(tmp_path, "t2.cfg", "theorem = 2\nf = manufactured\n")
    assert main(["verify-t1", "--config", str(cfg2), "--out", str(out)]) == EXIT_CONFIG
    assert not out.exists()


def test_no_convergence_exit(tmp_path):
    cfg = write(tmp_path, "nc.cfg", "theorem = 2\nnodes = 9\nf = manufactured\ntol = 1e-30\nmax_iter = 2\n")
    out = tmp_path / "r.jsonl"
    assert main(["verify-t2", "--config", str(cfg), "--out", str(out)]) == EXIT_CONCLUSION
    first_check = json.loads(out.read_text().splitlines()[1])
    assert first_check["name"] == "critical_point" and first_check["status"] == "fail"
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "u.txt")]) == EXIT_CONCLUSION


def test_out_dir_env(tmp_path, monkeypatch):
    monkeypatch.setenv(OUT_DIR_ENV, str(tmp_path / "reports"))
    assert main(["solve", "--config", str(GOLDEN / "full.cfg")]) == EXIT_OK
    assert read_field(tmp_path / "reports" / "u0.txt").values[1] == 1.0


def test_sweep_format_and_preconditions(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["sweep", "--config", str(GOLDEN / "full.cfg"), "--out", str(out)]) == EXIT_OK
    rows = list(csv.DictReader(out.open()))
    assert [float(r["epsilon"]) for r in rows] == [1e-2, 1e-3, 1e-4]
    assert all(r["status"] == "ok" for r in rows)
    assert out.read_text().splitlines()[0] == (
        "epsilon,status,op_margin,op_gamma_margin,sign_margin,gap,stationarity,det,det_scaled,lambda_max"
    )
    for r in rows:
        eps = float(r["epsilon"])
        assert float(r["det"]) == pytest.approx(12 / eps - 6, rel=1e-9)
    assert main(["sweep", "--config", str(GOLDEN / "full.cfg"), "--eps", "", "--out", str(out)]) == EXIT_OK
    assert len(out.read_text().splitlines()) == 1
    bad = tmp_path / "bad.csv"
    assert main(["sweep", "--config", str(GOLDEN / "full.cfg"), "--eps", "1e-3,1e-2", "--out", str(bad)]) == EXIT_CONFIG
    assert not bad.exists()


def test_relative_file_specs(tmp_path):
    (tmp_path / "init.txt").write_text((GOLDEN / "u0_three_nodes.txt").read_text())
    cfg = write(tmp_path, "f.cfg", "theorem = 2\nnodes = 3\nextent = 2.0\nf = manufactured\ninit = file:init.txt\n")
    c = load_config(cfg)
    assert c.initial_guess(c.grid()).values[1] == 1.0
