import json

import pytest

from fbhfs.cli import EXIT_COMPUTE, EXIT_CONFIG, EXIT_OK, main, write_artifacts
from fbhfs.config import parse_config, with_cli
from fbhfs.errors import ConfigError


def run(tmp_path, command, config_text, *extra):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(config_text)
    out = tmp_path / "out"
    code = main([command, "--config", str(cfg), "--out", str(out), *extra])
    return code, out


def test_parse_full_config():
    cfg = parse_config("""
        # comment
        system.name = he3
        basis.n = 40
        basis.ns = 10 20
        basis.preset = default
        precision.digits = 48
        hfs.alpha_fs = 7.2973525698e-3
        hfs.delta.21 = 0.3
        output.dir = somewhere
    """)
    assert cfg.system == "he3" and cfg.n == 40 and cfg.study_ns() == [10, 20, 40]
    assert cfg.digits == 48 and str(dict(cfg.deltas)["21"]) == "0.3"
    assert cfg.constants_table().alpha_fs == 7.2973525698e-3
    assert cfg.out == "somewhere"


@pytest.mark.parametrize("text", [
    "system.nme = he4",
    "basis.n = many",
    "basis.n = 10\nbasis.n = 20",
    "precision.digits = 12",
    "system.name = li7",
    "basis.box.1 = 1 2 3",
    "hfs.delta.12 = 0.3",
    "no equals sign",
    "basis.n = 10\nbasis.ns = 5 20",
])
def test_bad_configs(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_hash_ignores_output_dir_but_not_physics():
    a = parse_config("basis.n = 10\noutput.dir = x")
    b = parse_config("basis.n = 10\noutput.dir = y")
    c = parse_config("basis.n = 11")
    assert a.digest() == b.digest() != c.digest()
    assert with_cli(a, n=11).digest() == c.digest()


def test_malformed_config_writes_nothing(tmp_path, capsys):
    code, out = run(tmp_path, "solve", "basis.nn = 10\n")
    assert code == EXIT_CONFIG
    assert not out.exists()
    diag = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert diag["status"] == "config error"


def test_failing_computation_writes_nothing(tmp_path, capsys):
    # a custom system has no hyperfine model: fails after config validation
    code, out = run(tmp_path, "hfs", "system.name = custom\nsystem.masses = 1 200 7000\n"
                                       "system.charges = -1 -1 2\nbasis.n = 6\n")
    assert code == EXIT_CONFIG and not out.exists()
    code, out = run(tmp_path, "solve", "basis.n = 4\nbasis.box.1 = 1 1 1 1 1 1 1\n")
    assert code == EXIT_COMPUTE and not out.exists()


def test_hfs_on_tabulated_deltas(tmp_path):
    code, out = run(tmp_path, "hfs", "system.name = he4\nhfs.delta.21 = 3.13760535832e-1\n")
    assert code == EXIT_OK
    doc = json.loads((out / "hfs.json").read_text())
    assert abs(float(doc["splitting_MHz"]) - 4464.55454) < 1e-4
    assert doc["delta_source"] == "config"
    assert "4464.55454" in (out / "hfs.txt").read_text()
    assert doc["provenance"]["constants"]["coefficient_4He"] == "14229.178083766834"
    assert not (out / "basis.fbvs").exists()


def test_convergence_two_rows(tmp_path):
    code, out = run(tmp_path, "convergence", "basis.n = 20\nbasis.ns = 10 20\nprecision.digits = 40\n")
    assert code == EXIT_OK
    rows = json.loads((out / "convergence.json").read_text())["rows"]
    assert [r["N"] for r in rows] == [10, 20]
    assert float(rows[1]["energy"]) <= float(rows[0]["energy"])
    assert float(rows[1]["difference"]) <= 0


def test_solve_writes_loadable_basis(tmp_path):
    from fbhfs.basis import read_basis, to_decimal
    code, out = run(tmp_path, "solve", "basis.n = 12\nprecision.digits = 40\n")
    assert code == EXIT_OK
    doc = read_basis(out / "basis.fbvs")
    solve = json.loads((out / "solve.json").read_text())
    assert doc.basis.N == 12 and doc.coefficients is not None
    assert solve["energy"] == to_decimal(doc.energy)
    assert solve["provenance"]["basis"]["checksum"] == int((out / "basis.fbvs").read_text().split()[-1])


def test_cli_flags_override_config(tmp_path):
    code, out = run(tmp_path, "solve", "basis.n = 30\n", "--n", "8", "--digits", "36", "--system", "he3")
    assert code == EXIT_OK
    prov = json.loads((out / "solve.json").read_text())["provenance"]
    assert prov["config"]["n"] == 8 and prov["precision_digits"] == 36
    assert prov["system"].startswith("he3")


def test_all_is_deterministic_across_thread_counts(tmp_path, monkeypatch):
    from fbhfs import solver
    monkeypatch.setattr(solver, "_PARALLEL_MIN_N", 8)
    text = "basis.n = 16\nprecision.digits = 40\n"
    outputs = []
    for threads in ("1", "2"):
        monkeypatch.setenv("FBHFS_THREADS", threads)
        d = tmp_path / threads
        d.mkdir()
        code, out = run(d, "all", text)
        assert code == EXIT_OK
        outputs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    assert outputs[0] == outputs[1]
    assert {"solve.json", "convergence.json", "expect.json", "hfs.json", "oracle.json", "basis.fbvs"} <= set(outputs[0])


def test_oracle_subcommand(tmp_path):
    code, out = run(tmp_path, "oracle", "")
    assert code == EXIT_OK
    assert float(json.loads((out / "oracle.json").read_text())["worst_relative_difference"]) < 1e-10


def test_atomic_write_leaves_no_temporaries(tmp_path):
    paths = write_artifacts(str(tmp_path / "o"), {"a.json": "{}\n", "b.txt": "x\n"})
    assert sorted(p.rsplit("/", 1)[1] for p in paths) == ["a.json", "b.txt"]
    assert sorted(p.name for p in (tmp_path / "o").iterdir()) == ["a.json", "b.txt"]
