import json

import pytest
from click.testing import CliRunner

from bqaoa import data_path
from bqaoa.cli import main

FRAGMENT = str(data_path("ehningen_fragment.json"))
EHNINGEN = str(data_path("ehningen.json"))
SYNTH5 = str(data_path("synthetic5.json"))
K5 = str(data_path("k5_maxcut.json"))
PORTOPT5 = str(data_path("portopt5.json"))


@pytest.fixture()
def runner():
    return CliRunner()


@pytest.fixture()
def two_asset_problem(tmp_path):
    doc = {
        "type": "portopt",
        "mu": [0.1, 0.2],
        "sigma": [[0.01, 0.002], [0.002, 0.012]],
        "q": 0.5,
        "B": 1,
        "A": 0.2,
        "lambda": 2.0,
    }
    path = tmp_path / "two_asset.json"
    path.write_text(json.dumps(doc))
    return str(path)


def test_device_summarize_json(runner):
    result = runner.invoke(
        main, ["device", "summarize", str(data_path("ehningen_table1.json"))]
    )
    assert result.exit_code == 0
    doc = json.loads(result.output)
    assert doc["by_flavor"]["ecr"]["mean_cx_duration_ns"] == pytest.approx(382.22)
    assert doc["cx_duration_reduction_pct"] == pytest.approx(32.79, abs=0.01)


def test_chains_select_json(runner):
    result = runner.invoke(
        main,
        ["chains", "select", "--device", EHNINGEN, "--problem", K5,
         "--strategy", "ecr"],
    )
    assert result.exit_code == 0
    doc = json.loads(result.output)
    assert doc["strategy"] == "ecr"
    assert set(doc["flavors"]) == {"ecr"}
    assert len(doc["chain"]) == 5


def test_circuit_build_text_dump(runner):
    result = runner.invoke(
        main, ["circuit", "build", "--problem", K5, "--p", "1",
               "--gammas", "0.4", "--betas", "0.3"]
    )
    assert result.exit_code == 0
    lines = result.output.strip().splitlines()
    assert lines[1] == "H 0"
    assert any(line.startswith("ZZ_SWAP") for line in lines)
    assert sum(1 for line in lines if line.startswith("MEASURE")) == 5


def test_estimate_reference_durations(runner, two_asset_problem):
    result = runner.invoke(
        main,
        ["estimate", "--device", FRAGMENT, "--problem", two_asset_problem,
         "--chain", "1,4", "--p", "1"],
    )
    assert result.exit_code == 0
    doc = json.loads(result.output)
    zz_rows = [g for g in doc["gates"] if g["kind"] == "zz"]
    assert zz_rows and all(g["duration_ns"] == 490.0 for g in zz_rows)
    assert all(g["flavor"] == "direct" for g in zz_rows)


def test_estimate_infeasible_exits_3(runner):
    # the fragment has no 5-qubit chain at all
    result = runner.invoke(
        main,
        ["estimate", "--device", FRAGMENT, "--problem", K5,
         "--strategy", "global"],
    )
    assert result.exit_code == 3


def test_config_error_exits_2(runner):
    result = runner.invoke(
        main,
        ["benchmark", "--device", SYNTH5, "--problem", K5, "--p", "0..0"],
    )
    assert result.exit_code == 2


def test_simulate_metrics(runner):
    result = runner.invoke(
        main,
        ["simulate", "--device", SYNTH5, "--problem", K5,
         "--chain", "0,1,2,3,4", "--p", "1", "--gammas", "0.419",
         "--betas", "0.262", "--shots", "4000", "--seed", "5"],
    )
    assert result.exit_code == 0
    doc = json.loads(result.output)
    assert sum(doc["counts"].values()) == 4000
    assert 0.5 < doc["metrics"]["ar"] <= 1.0


def test_simulate_seed_determinism(runner):
    args = ["simulate", "--device", SYNTH5, "--problem", K5,
            "--chain", "0,1,2,3,4", "--shots", "2000", "--seed", "9"]
    a = runner.invoke(main, args)
    b = runner.invoke(main, args)
    assert a.output == b.output


def test_optimize_command(runner):
    result = runner.invoke(
        main, ["optimize", "--problem", K5, "--p", "1", "--grid", "8"]
    )
    assert result.exit_code == 0
    doc = json.loads(result.output)
    assert doc["ar"] >= 0.91
    assert len(doc["gammas"]) == 1
    assert doc["optimizer"] == "grid+nelder-mead"


def test_benchmark_csv_deterministic(runner, tmp_path):
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["benchmark", "--device", SYNTH5, "--problem", K5,
            "--strategies", "global,ecr", "--opt-levels", "default,zzswapopt",
            "--p", "1..2", "--shots", "8000", "--grid", "5", "--seed", "11",
            "--format", "csv"]
    assert runner.invoke(main, args + ["-o", str(out1)]).exit_code == 0
    assert runner.invoke(main, args + ["-o", str(out2)]).exit_code == 0
    assert out1.read_bytes() == out2.read_bytes()
    lines = out1.read_text().splitlines()
    assert len(lines) == 1 + 2 * 2 * 2


def test_benchmark_env_seed(runner, tmp_path, monkeypatch):
    monkeypatch.setenv("BQAOA_SEED", "31")
    out = tmp_path / "env.csv"
    args = ["benchmark", "--device", SYNTH5, "--problem", K5,
            "--strategies", "global", "--opt-levels", "default",
            "--p", "1", "--shots", "2000", "--grid", "4",
            "--format", "csv", "-o", str(out)]
    assert runner.invoke(main, args).exit_code == 0
    assert ",31," not in out.read_text()  # seed column holds the derived cell seed
    monkeypatch.setenv("BQAOA_SEED", "32")
    out2 = tmp_path / "env2.csv"
    assert runner.invoke(
        main, args[:-1] + [str(out2)]
    ).exit_code == 0
    assert out.read_text() != out2.read_text()


def test_qpt_noiseless(runner):
    result = runner.invoke(
        main,
        ["qpt", "--device", FRAGMENT, "--edge", "1,0", "--gate", "zz",
         "--opt", "zzopt", "--reps", "1,5", "--angles", "3",
         "--noise-scale", "0", "--format", "csv"],
    )
    assert result.exit_code == 0
    lines = result.output.strip().splitlines()[1:]
    assert lines
    for line in lines:
        assert float(line.rsplit(",", 1)[1]) < 1e-9


def test_qpt_orderings(runner):
    result = runner.invoke(
        main,
        ["qpt", "--device", FRAGMENT, "--edge", "1,0", "--gate", "zz",
         "--opt", "zzopt", "--reps", "1,10", "--angles", "4"],
    )
    assert result.exit_code == 0
    rows = json.loads(result.output)
    by_key = {(r["variant"], r["angle"], r["repetitions"]): r["infidelity"] for r in rows}
    for (variant, angle, reps), value in by_key.items():
        if reps == 10:
            assert value >= by_key[(variant, angle, 1)] - 1e-12
        if variant == "opt-ct":
            assert value <= by_key[("default-ct", angle, reps)] + 1e-12


def test_qpt_unknown_edge_exits_2(runner):
    result = runner.invoke(
        main, ["qpt", "--device", FRAGMENT, "--edge", "0,4", "--gate", "zz"]
    )
    assert result.exit_code == 2


def test_lower_report_consistent_with_schedule_oracle(runner):
    result = runner.invoke(
        main,
        ["circuit", "lower", "--device", EHNINGEN, "--problem", K5,
         "--chain", "9,8,11,14,16", "--p", "2", "--opt", "zzopt"],
    )
    assert result.exit_code == 0
    doc = json.loads(result.output)
    rows = doc["gates"]
    # recompute the critical path independently from the report rows
    free = {}
    for row in rows:
        start = max((free.get(w, 0.0) for w in row["wires"]), default=0.0)
        assert start == pytest.approx(row["start_ns"], abs=1e-9)
        for w in row["wires"]:
            free[w] = start + row["duration_ns"]
    assert doc["total_duration_ns"] == pytest.approx(max(free.values()), abs=1e-9)
    assert doc["cx_count"] == sum(r["cx_cost"] for r in rows)


def test_benchmark_json_format(runner):
    result = runner.invoke(
        main,
        ["benchmark", "--device", SYNTH5, "--problem", K5,
         "--strategies", "global", "--opt-levels", "default", "--p", "1",
         "--shots", "2000", "--grid", "4", "--seed", "1"],
    )
    assert result.exit_code == 0
    rows = json.loads(result.output)
    assert len(rows) == 1
    assert rows[0]["strategy"] == "global"
    assert rows[0]["ar"] is not None


def test_device_summarize_csv(runner):
    result = runner.invoke(
        main,
        ["device", "summarize", str(data_path("ehningen_table1.json")),
         "--format", "csv"],
    )
    assert result.exit_code == 0
    lines = result.output.strip().splitlines()
    assert lines[0].startswith("group,count,mean_cx_error")
    assert any(line.startswith("ecr,") for line in lines)
