import json
import subprocess
import sys

import pytest

from conftest import FIXTURES
from trafficmine.cli import main
from trafficmine.discovery import WorkflowNet, validate_wfnet
from trafficmine.eventlog import parse_csv
from trafficmine.simulator import GroundTruthModel, accepts


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_discover_sequence_fixture(tmp_path, capsys):
    code, _, err = run(capsys, "discover", FIXTURES / "sequence.csv", "--theta", "0.001",
                       "--out", "dot,pnml", "--output", tmp_path / "net")
    assert code == 0
    dot = (tmp_path / "net.dot").read_text()
    assert dot.count("shape=box") == 3
    assert dot.count("shape=circle") == 4
    report = json.loads((tmp_path / "net.json").read_text())
    net = WorkflowNet.from_dict(report["net"])
    assert validate_wfnet(net) == [] and report["violations"] == []
    assert (tmp_path / "net.pnml").read_text().count("<transition ") == 3
    assert "3 transitions, 4 places" in err


def test_discover_golden_dot(tmp_path, capsys):
    assert run(capsys, "discover", FIXTURES / "ten_cases.csv", "--output", tmp_path / "net")[0] == 0
    assert (tmp_path / "net.dot").read_bytes() == (FIXTURES / "golden" / "ten_cases.dot").read_bytes()


def test_discover_to_stdout(capsys):
    code, out, _ = run(capsys, "discover", FIXTURES / "sequence.csv", "--out", "dot")
    assert code == 0 and out.startswith("digraph")


def test_discover_xes(tmp_path, capsys):
    code, _, _ = run(capsys, "discover", FIXTURES / "twin.xes", "--format", "xes", "--output", tmp_path / "x")
    assert code == 0
    csv_code, _, _ = run(capsys, "discover", FIXTURES / "twin.csv", "--output", tmp_path / "c")
    assert csv_code == 0
    assert (tmp_path / "x.dot").read_bytes() == (tmp_path / "c.dot").read_bytes()


def test_partition_missing_label_exits_2(tmp_path, capsys):
    part = tmp_path / "part.json"
    part.write_text(json.dumps([["brief_intake"], ["ad_tag_setup", "ghost"]]))
    code, _, err = run(capsys, "discover", FIXTURES / "sequence.csv", "--partition", part)
    assert code == 2
    assert "launch" in err and "ghost" in err


def test_partition_file_is_used(tmp_path, capsys):
    part = tmp_path / "part.json"
    part.write_text(json.dumps([["brief_intake", "ad_tag_setup"], ["ad_tag_setup", "launch"]]))
    code, _, _ = run(capsys, "discover", FIXTURES / "sequence.csv", "--partition", part,
                     "--theta", "0.001", "--output", tmp_path / "n")
    assert code == 0
    report = json.loads((tmp_path / "n.json").read_text())
    assert len(report["partition"]) == 2
    assert "partition" in report["manifest"]["inputs"]


@pytest.mark.parametrize("argv, code", [
    (["discover", "missing.csv"], 1),
    (["discover", FIXTURES / "sequence.csv", "--out", "svg"], 2),
    (["simulate", "--activities", "5", "--arcs", "3"], 2),
])
def test_exit_codes(argv, code, capsys):
    assert run(capsys, *argv)[0] == code


def test_bad_flag_value_exits_2(capsys):
    with pytest.raises(SystemExit) as info:
        main(["discover", str(FIXTURES / "sequence.csv"), "--theta", "-1"])
    assert info.value.code == 2


def test_malformed_log_exits_1(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("case_id,activity,start,end\nc1,x,not-a-time,2024-01-01T00:00:00Z\n")
    code, _, err = run(capsys, "discover", bad)
    assert code == 1 and "row 1" in err


def test_diagnose_rework_and_delays(tmp_path, capsys):
    out = tmp_path / "rework.json"
    assert run(capsys, "diagnose", FIXTURES / "rework.csv", "--output", out)[0] == 0
    report = json.loads(out.read_text())
    flagged = {r["activity"] for r in report["loops"] if r["flagged"]}
    assert flagged == {"creative_qa", "ad_tag_setup"}
    assert report["calibration"] is not None

    code, stdout, _ = run(capsys, "diagnose", FIXTURES / "delay.csv", "--top-k", "1", "--tau", "0.5")
    assert code == 0
    report = json.loads(stdout)
    assert report["delays"][0]["edge"] == ["ad_tag_setup", "launch"]
    assert report["tau"] == 0.5 and report["calibration"] is None


def test_simulate_is_reproducible(tmp_path, capsys):
    outs = []
    for k in range(2):
        log, model = tmp_path / f"log{k}.csv", tmp_path / f"model{k}.json"
        assert run(capsys, "simulate", "--seed", "42", "--activities", "12", "--arcs", "50",
                   "--traces", "40", "--noise", "0.1", "--log-out", log, "--model-out", model)[0] == 0
        outs.append((log.read_bytes(), model.read_bytes()))
    assert outs[0] == outs[1]


def test_simulate_default_scale_and_replay(tmp_path, capsys):
    log, model = tmp_path / "log.csv", tmp_path / "model.json"
    assert run(capsys, "simulate", "--arcs", "2000", "--traces", "50",
               "--log-out", log, "--model-out", model)[0] == 0
    gt = GroundTruthModel.from_dict(json.loads(model.read_text()))
    assert abs(gt.arc_count - 2000) <= 100
    assert all(accepts(gt.net, t.activities) for t in parse_csv(log).traces)


def test_bench_schema(tmp_path, capsys):
    out = tmp_path / "bench.json"
    assert run(capsys, "bench", "--activities", "20", "--arcs", "80", "--traces", "100",
               "--output", out)[0] == 0
    report = json.loads(out.read_text())
    assert {"ape", "false_positive_edges", "false_negative_edges", "gt_edges", "runtime_ms",
            "model_arcs", "num_events", "reference_ape", "manifest"} <= set(report)
    assert report["ape"] == pytest.approx(
        100 * (report["false_positive_edges"] + report["false_negative_edges"]) / report["gt_edges"])


def test_rerun_reproduces_discover(tmp_path, capsys):
    run(capsys, "discover", FIXTURES / "ten_cases.csv", "--out", "dot,pnml", "--output", tmp_path / "a" / "net")
    assert run(capsys, "rerun", tmp_path / "a" / "net.json", "--output-dir", tmp_path / "b")[0] == 0
    for suffix in (".dot", ".pnml", ".json"):
        assert (tmp_path / "a" / f"net{suffix}").read_bytes() == (tmp_path / "b" / f"net{suffix}").read_bytes()


def test_no_color_in_subprocess(tmp_path):
    env = {"NO_COLOR": "1", "PATH": ""}
    proc = subprocess.run([sys.executable, "-m", "trafficmine.cli", "discover", str(FIXTURES / "sequence.csv"),
                           "--output", str(tmp_path / "n")], capture_output=True, text=True, env=env)
    assert proc.returncode == 0
    assert "\033[" not in proc.stderr and "discovered net" in proc.stderr
