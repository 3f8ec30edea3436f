import pytest

from ecrmac.cli import main
from ecrmac.metrics import parse_csv
from ecrmac.scenario import save_scenario

from conftest import small_config


@pytest.fixture
def scenario(tmp_path):
    path = tmp_path / "small.yaml"
    save_scenario(small_config(sim_duration=1.0), path)
    return path


def test_run_writes_report_and_traces(tmp_path, scenario, capsys):
    out = tmp_path / "out"
    assert main(["run", "--scenario", str(scenario), "--seed", "3", "--out", str(out)]) == 0
    assert {p.name for p in out.iterdir()} == {"report.csv", "trace.jsonl", "trace-dcf.jsonl"}
    rows = parse_csv(out / "report.csv")
    assert [r["protocol"] for r in rows] == ["ecr", "dcf"]
    assert rows[1]["normalized_throughput"] == 1.0
    assert "ecr: delivered" in capsys.readouterr().out


def test_run_is_byte_identical(tmp_path, scenario):
    for d in ("a", "b"):
        assert main(["run", "--scenario", str(scenario), "--protocol", "ecr", "--seed", "2",
                     "--out", str(tmp_path / d)]) == 0
    for name in ("report.csv", "trace.jsonl"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_verify_exit_codes(tmp_path, scenario, capsys):
    out = tmp_path / "o"
    main(["run", "--scenario", str(scenario), "--seed", "1", "--out", str(out)])
    assert main(["verify", str(out / "trace.jsonl"), str(out / "trace-dcf.jsonl")]) == 0
    assert "clean" in capsys.readouterr().out

    lines = (out / "trace.jsonl").read_text().splitlines()
    tampered = [l.replace('"consumed_pj":', '"consumed_pj":1', 1) if '"kind":"energy"' in l else l
                for l in lines]
    (tmp_path / "bad.jsonl").write_text("\n".join(tampered) + "\n")
    assert main(["verify", str(tmp_path / "bad.jsonl")]) == 4

    (tmp_path / "junk.jsonl").write_text("{not json\n")
    assert main(["verify", str(tmp_path / "junk.jsonl")]) == 2
    (tmp_path / "nostart.jsonl").write_text('{"kind":"gen","data":{}}\n')
    assert main(["verify", str(tmp_path / "nostart.jsonl")]) == 2
    assert main(["verify", str(tmp_path / "missing.jsonl")]) == 3


def test_malformed_scenario(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("format_version: 1\nnum_nodes: -3\nsim_duration: 0\n")
    assert main(["run", "--scenario", str(bad), "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "num_nodes" in err and "sim_duration" in err
    assert not (tmp_path / "report.csv").exists()


def test_usage_errors():
    with pytest.raises(SystemExit) as exc:
        main(["run", "--bogus"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["sweep", "--flows", "2,x"])
    assert exc.value.code == 1
    assert main([]) == 1


def test_sweep_rows(tmp_path, scenario):
    out = tmp_path / "s"
    rc = main(["sweep", "--scenario", str(scenario), "--flows", "1,3", "--seeds", "2",
               "--out", str(out)])
    assert rc == 0
    rows = parse_csv(out / "sweep.csv")
    # 2 protocols x 2 flow counts x (2 seeds + mean)
    assert len(rows) == 12
    assert sum(1 for r in rows if r["seed"] == "mean") == 4
    assert {r["flows"] for r in rows} == {1, 3}
