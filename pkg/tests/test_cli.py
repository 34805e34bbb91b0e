from __future__ import annotations

import subprocess
import sys

import pytest

from atab.ata import evaluate, parse_ata
from atab.builders import build_full
from atab.cli import UsageError, load_config, main
from atab.forest import build_forest
from atab.tree import CheckConfig, parse_tree

from conftest import PRINTER


def test_load_config():
    c = load_config(2, "A,B", "A:B,B:B")
    assert (c.lock_count, c.labels, c.pairs) == (2, ("A", "B"), (("A", "B"), ("B", "B")))
    assert load_config(0, "A", "A:A").lock_count == 0
    for bad in [(2, "A,B", "A:C"), (-1, "", ""), (1, "A", "A"), (1, "A", "A:A:A")]:
        with pytest.raises(UsageError):
            load_config(*bad)


def test_build_writes_automaton(tmp_path):
    out = tmp_path / "full.ata"
    code = main(["build", "--locks", "2", "--labels", "A,B", "--pairs", "A:B", "--widget", "full", "-o", str(out)])
    assert code == 0
    config = CheckConfig(2, ("A", "B"), (("A", "B"),))
    assert parse_ata(out.read_text()) == build_full(config)


def test_build_widget_to_stdout(capsys):
    assert main(["build", "--locks", "1", "--widget", "dfa:1"]) == 0
    assert capsys.readouterr().out.startswith("alphabet:")
    assert main(["build", "--locks", "1", "--widget", "dfa:2"]) == 2


def test_check_printer(tmp_path, capsys):
    path = tmp_path / "printer.tree"
    path.write_text(PRINTER)
    assert main(["check", "--locks", "1", "--labels", "P", "--pairs", "P:P", str(path)]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "SAFE"
    assert sum(line.startswith("label crop") and "[" in line for line in out) == 36


def test_check_unsafe_prints_witness(tmp_path, capsys):
    path = tmp_path / "t.tree"
    path.write_text("(sp (lab A) (lab B))")
    assert main(["check", "--labels", "A,B", "--pairs", "A:B", str(path)]) == 1
    out = capsys.readouterr().out
    assert out.startswith("UNSAFE")
    assert "witness (label crop 1, A:B): ε 1 2" in out


def test_check_verdict_equals_automaton(tmp_path, capsys):
    text = "(acq1 (sp (jo (rel1 (lab A ($)))) (acq1 (lab B (rel1 ($))))))"
    path = tmp_path / "t.tree"
    path.write_text(text)
    config = CheckConfig(1, ("A", "B"), (("A", "B"),))
    expected = evaluate(build_full(config), build_forest(parse_tree(text), config).spine).accepted
    code = main(["check", "--locks", "1", "--labels", "A,B", "--pairs", "A:B", str(path)])
    assert code == (0 if expected else 1)


def test_check_errors(tmp_path, capsys):
    assert main(["check", "--locks", "1", str(tmp_path / "missing.tree")]) == 2
    bad = tmp_path / "bad.tree"
    bad.write_text("(sp ($)")
    assert main(["check", "--locks", "1", str(bad)]) == 2
    assert "1:" in capsys.readouterr().err
    good = tmp_path / "good.tree"
    good.write_text("($)")
    assert main(["check", "--labels", "A", "--pairs", "A:A", str(good)]) == 2


def test_forest_command(tmp_path):
    src = tmp_path / "printer.tree"
    src.write_text(PRINTER)
    out = tmp_path / "printer.forest"
    assert main(["forest", "--locks", "1", "--labels", "P", "--pairs", "P:P", str(src), "-o", str(out)]) == 0
    forest = parse_tree(out.read_text())
    assert forest.kind == "br"


def test_oracle_diff_command(capsys):
    assert main(["oracle-diff", "--locks", "2", "--labels", "A", "--pairs", "A:A", "--max-nodes", "6"]) == 0
    assert capsys.readouterr().out.startswith("0 disagreements")
    assert main(["oracle-diff", "--max-nodes", "13"]) == 2


def test_usage_errors(capsys):
    assert main([]) == 2
    assert main(["frob"]) == 2
    assert main(["version"]) == 0
    assert capsys.readouterr().out.startswith("atab ")


def test_console_script_runs():
    result = subprocess.run([sys.executable, "-m", "atab.cli", "version"], capture_output=True, text=True)
    assert result.returncode == 0 and result.stdout.startswith("atab")
