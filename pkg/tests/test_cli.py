from __future__ import annotations

import pytest

from conftest import CORPUS_RESULTS, PROGRAMS
from superflow.assembler import emit_assembly
from superflow.cli import main
from superflow.ir import BinOp, Const, GraphBuilder, Ret


@pytest.fixture
def built(tmp_path):
    assert main(["build", str(PROGRAMS / "pipeline.tc"), "-o", str(tmp_path), "--dot",
                 "--skeleton"]) == 0
    return tmp_path


def test_build_writes_outputs(built):
    assert sorted(p.name for p in built.iterdir()) == ["pipeline.dot", "pipeline.fl",
                                                       "pipeline.skel"]


def test_build_is_idempotent(built, tmp_path_factory):
    other = tmp_path_factory.mktemp("again")
    main(["build", str(PROGRAMS / "pipeline.tc"), "-o", str(other), "--dot", "--skeleton"])
    for p in built.iterdir():
        assert (other / p.name).read_bytes() == p.read_bytes()


def test_build_error_reports_location_and_writes_nothing(tmp_path, capsys):
    src = tmp_path / "bad.tc"
    src.write_text("treb_parout int y;\nint x;\nx = y::lattid;\nreturn x;\n")
    out = tmp_path / "out"
    assert main(["build", str(src), "-o", str(out), "--dot"]) == 1
    err = capsys.readouterr().err
    assert f"{src}:3:8:" in err and "did you mean 'lasttid'" in err
    assert not out.exists()


def test_build_missing_file(tmp_path, capsys):
    assert main(["build", str(tmp_path / "nope.tc")]) == 1
    assert "cannot read" in capsys.readouterr().err


def test_run_prints_result_and_stats(built, capsys):
    assert main(["run", str(built / "pipeline.fl"), "-p", "3", "-t", "4"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == CORPUS_RESULTS["pipeline"]
    assert [l.split()[1] for l in lines[1:]] == ["pe=0", "pe=1", "pe=2"]


def test_run_same_result_across_pe_counts(built, capsys):
    results = []
    for p in ("1", "8"):
        main(["run", str(built / "pipeline.fl"), "-p", p, "-t", "4", "--args", "10"])
        results.append(capsys.readouterr().out.splitlines()[0])
    assert results[0] == results[1]


def test_run_no_steal_and_trace(built, capsys):
    assert main(["run", str(built / "pipeline.fl"), "-p", "2", "--no-steal", "--trace"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert all(l.endswith("steals=0 sent=" + l.rsplit("=", 1)[1]) for l in out if
               l.startswith("STATS"))
    assert any(l.startswith("FIRE ") for l in out)


def test_run_with_placement_file(built, tmp_path, capsys):
    pl = tmp_path / "place.txt"
    pl.write_text("# everything of proc1 on PE 1\n1 1\n")
    assert main(["run", str(built / "pipeline.fl"), "-p", "2", "-t", "4",
                 "--placement", str(pl)]) == 0
    assert capsys.readouterr().out.splitlines()[0] == CORPUS_RESULTS["pipeline"]
    pl.write_text("1 9\n")
    assert main(["run", str(built / "pipeline.fl"), "-p", "2", "--placement", str(pl)]) == 1


def _deadlock_fl(tmp_path):
    gb = GraphBuilder()
    c = gb.add(Const(1))
    s = gb.add(BinOp("add"))
    r = gb.add(Ret())
    gb.connect(c, 0, s, 0)
    gb.connect(s, 0, r, 0)
    path = tmp_path / "stuck.fl"
    path.write_text(emit_assembly(gb.freeze()))
    return path


def test_run_exit_codes(tmp_path, built, capsys):
    stuck = _deadlock_fl(tmp_path)
    assert main(["run", str(stuck), "-p", "2"]) == 1  # validation rejects the unfed port
    assert main(["run", str(stuck), "-p", "2", "--no-validate"]) == 2
    assert "deadlock" in capsys.readouterr().err
    bad = tmp_path / "div.tc"
    bad.write_text("int x; int y;\nx = 0;\ny = 1 / x;\nreturn y;\n")
    assert main(["build", str(bad), "-o", str(tmp_path)]) == 0
    assert main(["run", str(tmp_path / "div.fl"), "-p", "1"]) == 1
    assert "division by zero" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.fl")]) == 1
    (tmp_path / "junk.fl").write_text("flv 9\n")
    assert main(["run", str(tmp_path / "junk.fl")]) == 1


def test_run_with_natives(tmp_path, capsys):
    from superflow import bench

    src = tmp_path / "bs.tc"
    src.write_text(bench.BLACKSCHOLES_TC)
    data = tmp_path / "opts.txt"
    bench.write_options(data, 40)
    assert main(["build", str(src), "-o", str(tmp_path)]) == 0
    args = ["--args", str(data), "40", "2", str(tmp_path / "o1.txt")]
    assert main(["run", str(tmp_path / "bs.fl"), "-p", "2", "-t", "3", *args]) == 0
    interpreted = capsys.readouterr().out.splitlines()[0]
    args[-1] = str(tmp_path / "o2.txt")
    assert main(["run", str(tmp_path / "bs.fl"), "-p", "2", "-t", "3",
                 "--natives", "superflow.natives", *args]) == 0
    native = capsys.readouterr().out.splitlines()[0]
    a, b = float(interpreted.split("f:")[1]), float(native.split("f:")[1])
    assert abs(a - b) <= 1e-9 * abs(a)
    assert len((tmp_path / "o1.txt").read_text().splitlines()) == 40
    assert len((tmp_path / "o2.txt").read_text().splitlines()) == 40


def test_bench_unknown_workload_lists_available(capsys):
    assert main(["bench", "ferret"]) == 1
    err = capsys.readouterr().err
    for name in ("blackscholes_lite", "pipeline_lite", "imbalance"):
        assert name in err


def test_bench_csv(capsys):
    assert main(["bench", "pipeline_lite", "--pes", "1,2", "--runs", "1", "--items", "6",
                 "--block", "3", "--cost-ms", "0.5", "--csv"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "workload,n_pes,median_ms,speedup,steals"
    assert lines[1].startswith("pipeline_lite,1,") and lines[1].endswith(",1.0000,0")
    assert len(lines) == 3


def test_bench_table(capsys):
    assert main(["bench", "imbalance", "--pes", "1,2", "--runs", "1", "--mean-ms", "1"]) == 0
    out = capsys.readouterr().out
    assert "n_pes" in out and "RESULT i:1496" in out


def test_bench_bad_parameter(capsys):
    assert main(["bench", "imbalance", "--options", "5"]) == 1
    assert "no parameter" in capsys.readouterr().err
