import csv
import json
import shutil

import pytest

from ptrecon.cli import TABLE_COLUMNS, load_spec, main, run_spec
from ptrecon.errors import ConfigError
from ptrecon.logio import EventLog, load_log, write_log
from ptrecon.ptree import load_tree, save_tree
from ptrecon.replay import verify_annotation


@pytest.fixture
def workdir(tmp_path, data_dir):
    for name in ("patients.tree", "patients.csv", "loop.tree", "loop.variants"):
        shutil.copy(data_dir / name, tmp_path / name)
    return tmp_path


def _read_table(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_annotate_command(workdir):
    out = workdir / "annotated.tree"
    code = main(["annotate", "--tree", str(workdir / "patients.tree"),
                 "--log", str(workdir / "patients.csv"), "--out", str(out)])
    assert code == 0
    tree = load_tree(out)
    assert verify_annotation(tree, 3) == []
    assert tree.weight == 3


def test_annotate_non_fitting(workdir, capsys):
    write_log(EventLog({("R", "X"): 1}), workdir / "bad.variants")
    code = main(["annotate", "--tree", str(workdir / "patients.tree"),
                 "--log", str(workdir / "bad.variants"), "--out", str(workdir / "o.tree")])
    assert code == 2
    assert "<R,X>" in capsys.readouterr().err


def test_annotate_empty_log(workdir, caplog):
    (workdir / "empty.csv").write_text("case,activity\n")
    out = workdir / "o.tree"
    code = main(["annotate", "--tree", str(workdir / "patients.tree"),
                 "--log", str(workdir / "empty.csv"), "--out", str(out)])
    assert code == 0
    assert set(load_tree(out).weights()) == {0}
    assert "empty log" in caplog.text


def test_playout_command(workdir, data_dir):
    save_tree(load_tree(data_dir / "loop.tree").with_weights([1000, 10000, 9000]),
              workdir / "w.tree")
    code = main(["playout", "--tree", str(workdir / "w.tree"), "--strategy", "D",
                 "--variance", "0.5", "--seed", "3", "--playouts", "3",
                 "--out", str(workdir / "logs")])
    assert code == 0
    files = sorted((workdir / "logs").iterdir())
    assert [f.name for f in files] == ["playout_0.variants", "playout_1.variants",
                                       "playout_2.variants"]
    assert all(len(load_log(f)) == 1000 for f in files)


def test_playout_bad_config(workdir):
    code = main(["playout", "--tree", str(workdir / "loop.tree"), "--strategy", "C",
                 "--seed", "0", "--out", str(workdir / "logs")])
    assert code == 1


def test_evaluate_command(workdir):
    logs = workdir / "logs"
    logs.mkdir()
    shutil.copy(workdir / "loop.variants", logs / "copy.variants")
    code = main(["evaluate", "--original", str(workdir / "loop.variants"),
                 "--playouts", str(logs), "--out", str(workdir / "eval")])
    assert code == 0
    row = _read_table(workdir / "eval" / "table.csv")[0]
    assert row["nhi"] == "1.000000" and row["emd"] == "0.000000"
    report = json.loads((workdir / "eval" / "report.json").read_text())
    assert report["emd_computed"] is True


def test_evaluate_capped(workdir):
    code = main(["evaluate", "--original", str(workdir / "patients.csv"),
                 "--playouts", str(workdir / "patients.csv"), "--emd-cap", "1",
                 "--out", str(workdir / "eval")])
    assert code == 3
    assert _read_table(workdir / "eval" / "table.csv")[0]["emd"] == "NA"


def _write_spec(workdir, body):
    path = workdir / "exp.ini"
    path.write_text(body)
    return path


LOOP_SPEC = """\
[experiment]
tree = loop.tree
log = loop.variants
playouts = 2
seed = 5
out = results

[strategy B]
kind = B

[strategy D half]
kind = D
variance = 0.5

[strategy SOTA]
kind = SOTA
"""


def test_experiment_is_byte_identical(workdir):
    spec = _write_spec(workdir, LOOP_SPEC)
    assert main(["experiment", str(spec), "--out", str(workdir / "r1")]) == 0
    assert main(["experiment", str(spec), "--out", str(workdir / "r2")]) == 0
    files1 = sorted(p.relative_to(workdir / "r1") for p in (workdir / "r1").rglob("*"))
    files2 = sorted(p.relative_to(workdir / "r2") for p in (workdir / "r2").rglob("*"))
    assert files1 == files2
    assert "histograms/D_half.csv" in {str(p) for p in files1}
    for rel in files1:
        a, b = workdir / "r1" / rel, workdir / "r2" / rel
        if a.is_file():
            assert a.read_bytes() == b.read_bytes()
    rows = _read_table(workdir / "r1" / "table.csv")
    assert tuple(rows[0]) == TABLE_COLUMNS
    assert [r["strategy"] for r in rows] == ["B", "D half", "SOTA"]
    assert (workdir / "r1" / "annotated.tree").read_text().strip() == \
        "*( 'a':10000, tau:9000 ):1000"


def test_experiment_jobs_match_serial(workdir):
    spec = _write_spec(workdir, LOOP_SPEC)
    assert main(["experiment", str(spec), "--out", str(workdir / "s")]) == 0
    assert main(["experiment", str(spec), "--out", str(workdir / "p"), "--jobs", "2"]) == 0
    assert (workdir / "s" / "table.csv").read_bytes() == (workdir / "p" / "table.csv").read_bytes()


def test_experiment_default_strategies(workdir):
    spec = load_spec(_write_spec(workdir, "[experiment]\ntree = patients.tree\n"
                                          "log = patients.csv\nplayouts = 1\n"))
    assert spec.names == ["A", "B", "C", "D(v=0.5)", "D(v=1)", "D(v=3)", "D(v=5)", "SOTA"]
    assert spec.strategies[0].trace_count == 3
    assert spec.strategies[2].trace_count is None


def test_experiment_injected_copies_are_perfect(workdir):
    spec = load_spec(_write_spec(workdir, "[experiment]\ntree = patients.tree\n"
                                          "log = patients.csv\nplayouts = 1\nout = r\n"))
    original = load_log(workdir / "patients.csv")
    report = run_spec(spec, playout_fn=lambda tree, config: [original])
    for row in report.values():
        assert row["means"] == {"nhi": 1.0, "emd": 0.0, "nmi": 1.0,
                                "af_f1": 1.0, "sf_f1": 1.0, "nf_f1": 1.0}


def test_experiment_plain_tree_config_error(workdir):
    body = ("[experiment]\ntree = patients.tree\nlog = patients.csv\nannotate = no\n\n"
            "[strategy C]\nkind = C\n")
    spec = _write_spec(workdir, body)
    with pytest.raises(ConfigError):
        run_spec(load_spec(spec))
    assert main(["experiment", str(spec)]) == 1


@pytest.mark.parametrize("body", [
    "[other]\n",
    "[experiment]\ntree = loop.tree\n",
    "[experiment]\ntree = loop.tree\nlog = loop.variants\nplayouts = many\n",
    "[experiment]\ntree = loop.tree\nlog = loop.variants\n[strategy x]\nkind = D\n",
])
def test_bad_specs(workdir, body):
    with pytest.raises(ConfigError):
        load_spec(_write_spec(workdir, body))


def test_lang_command(workdir, data_dir, capsys):
    assert main(["lang", "--tree", str(data_dir / "choice_loop.tree"), "--unrolls", "0"]) == 0
    assert capsys.readouterr().out.split() == ["a,b,d", "a,c,d", "b,a,d", "c,a,d"]
    assert main(["lang", "--tree", str(data_dir / "choice_loop.tree"), "--cap", "3"]) == 3


def test_check_command(workdir, capsys):
    (workdir / "bad.tree").write_text("*( 'a':5, tau:5 ):1\n")
    assert main(["check", "--tree", str(workdir / "bad.tree")]) == 2
    (workdir / "good.tree").write_text("*( 'a':10000, tau:9000 ):1000\n")
    assert main(["check", "--tree", str(workdir / "good.tree"), "--log-size", "1000"]) == 0
    assert capsys.readouterr().out.strip().endswith("ok")


def test_usage_errors():
    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code == 1
    with pytest.raises(SystemExit) as info:
        main(["playout", "--tree", "x"])
    assert info.value.code == 1


def test_missing_file(workdir):
    assert main(["check", "--tree", str(workdir / "nope.tree")]) == 2
