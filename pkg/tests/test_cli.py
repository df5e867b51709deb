import json
import subprocess
import sys
from fractions import Fraction

import pytest

from smallball import __version__, cli
from smallball.cli import main
from smallball.dyadic import (ExplicitSigns, GridPoint, HaarField,
                              SeededSigns, field_eval, hyperbolic_shapes,
                              save_signs)

ENVELOPE_KEYS = {"version", "command", "config", "seed", "elapsed_ms", "result"}


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def run_json(argv, capsys):
    code, out, err = run(argv, capsys)
    assert code == 0, err
    return json.loads(out)


def canonical(envelope):
    """Envelope with timing and worker-count fields stripped."""
    env = json.loads(json.dumps(envelope))
    env.pop("elapsed_ms", None)
    env["config"].pop("workers", None)
    if isinstance(env["result"], dict):
        env["result"].pop("elapsed_ms", None)
        for row in env["result"].get("blocks", []):
            row.pop("elapsed_ms", None)
    return json.dumps(env, sort_keys=True)


# ---------------------------------------------------------------------------
# envelopes and happy paths
# ---------------------------------------------------------------------------

def test_eval_envelope_matches_library(capsys):
    env = run_json(["eval", "--n", "4", "--point", "3,5,7"], capsys)
    assert set(env) == ENVELOPE_KEYS
    assert env["version"] == __version__
    assert env["command"] == "eval"
    assert env["config"]["n"] == 4
    assert env["config"]["signs"] == "seed:1"
    family = hyperbolic_shapes(4, 3)
    field = HaarField(family, SeededSigns(1))
    point = GridPoint.uniform(5, (3, 5, 7))
    assert env["result"]["value"] == field_eval(field, point)
    assert env["result"]["family_size"] == len(family.members)
    assert env["result"]["resolution"] == 5


def test_supnorm_2d_reaches_n_plus_one(capsys):
    env = run_json(["supnorm", "--n", "3", "--d", "2"], capsys)
    res = env["result"]
    assert res["value"] == 4
    assert res["method"] == "exhaustive"  # auto picks it at this size
    assert res["l2_sq"] == 4
    assert res["sup_ge_l2"]


def test_supnorm_methods_agree(capsys):
    a = run_json(["supnorm", "--n", "4", "--d", "2", "--seed", "3"], capsys)
    b = run_json(["supnorm", "--n", "4", "--d", "2", "--seed", "3",
                  "--method", "branch-bound"], capsys)
    assert a["result"]["value"] == b["result"]["value"]
    assert a["result"]["argmax_indices"] == b["result"]["argmax_indices"]
    assert b["result"]["method"] == "branch-bound"


def test_witness2d_reports_exact_measure(capsys):
    env = run_json(["witness2d", "--n", "8"], capsys)
    res = env["result"]
    assert res["achieved"] == 9 and res["verified"]
    assert res["witness_measure"] == "1/512"
    assert res["witness_measure_float"] == float(Fraction(1, 512))
    big = run_json(["witness2d", "--n", "64"], capsys)["result"]
    assert big["achieved"] == 65
    assert "witness_measure" not in big  # exact sweep guarded away


def test_witness3d_envelope(capsys):
    env = run_json(["witness3d", "--n", "8", "--q", "2", "--tau", "0.1"],
                   capsys)
    res = env["result"]
    assert res["success"] and res["verified_total"] == res["total"]
    assert res["rows"]
    assert set(res["rows"][0]) == {"restart", "stage", "value", "passed"}


def test_identity_check_certifies_all_blocks(capsys):
    env = run_json(["identity-check", "--n", "8", "--q", "4"], capsys)
    res = env["result"]
    assert res["holds"]
    assert {s["block"] for s in res["blocks"]} == {1, 2}
    row = res["rows"][0]
    assert row["pointwise_ok"] and row["ok"]
    assert row["l2_sum"] == row["l2_expected"]


def test_lemmas_replay_is_clean(capsys):
    env = run_json(["lemmas", "--budget", "40"], capsys)
    res = env["result"]
    assert res["violations_total"] == 0 and res["failures"] == []
    assert [r["suite"] for r in res["rows"]] == [
        "paley-zygmund", "second-moment-supremum",
        "fourth-moment-equivalence", "conditional-chain"]
    assert all(r["fixtures"] == 40 for r in res["rows"])


def test_orlicz_scan_single_size(capsys):
    env = run_json(["orlicz-scan", "--n", "8", "--budget", "2000"], capsys)
    res = env["result"]
    assert res["alpha"] == pytest.approx(2 / 3)
    assert len(res["rows"]) == 1
    assert res["rows"][0]["n"] == 8 and res["rows"][0]["ratio"] > 0


def test_discrepancy_vdc(capsys):
    env = run_json(["discrepancy", "--points", "vdc:5", "--budget", "500"],
                   capsys)
    res = env["result"]
    assert res["n_points"] == 32 and res["consistent"]
    assert Fraction(res["sup_abs"]) == Fraction(res["sup_abs_float"]).limit_denominator(1 << 20)


def test_signs_file_source(tmp_path, capsys):
    family = hyperbolic_shapes(3, 2)
    path = tmp_path / "signs.txt"
    save_signs(ExplicitSigns.materialize(family, SeededSigns(9)), str(path))
    env = run_json(["supnorm", "--n", "3", "--d", "2",
                    "--signs", f"file:{path}"], capsys)
    ref = run_json(["supnorm", "--n", "3", "--d", "2", "--seed", "9"], capsys)
    assert env["result"]["value"] == ref["result"]["value"]


# ---------------------------------------------------------------------------
# exit codes
# ---------------------------------------------------------------------------

def test_usage_errors_exit_2(capsys):
    cases = [
        ["eval", "--point", "1,2,3"],                      # missing --n
        ["eval", "--n", "4", "--point", "a,b,c"],          # unparsable point
        ["eval", "--n", "4", "--point", "1,2"],            # wrong arity
        ["eval", "--n", "4", "--point", "1,2,99"],         # out of range
        ["eval", "--n", "4", "--point", "1,2,3", "--resolution", "2"],
        ["witness3d", "--n", "8", "--q", "3"],             # odd block count
        ["witness3d", "--n", "8", "--q", "2", "--tau", "1.5"],
        ["orlicz-scan", "--n", "8", "--d", "2"],           # needs d >= 3
        ["lemmas", "--budget", "0"],
        ["discrepancy", "--points", "vdc:0"],
        ["discrepancy", "--points", "vdc:99"],
        ["discrepancy", "--points", "garbage"],
        ["discrepancy", "--points", "file:/nonexistent/p.txt"],
        ["supnorm", "--n", "3", "--signs", "file:/nonexistent/s.txt"],
        ["supnorm", "--n", "3", "--signs", "mystery:7"],
        ["supnorm", "--n", "8", "--d", "5"],               # search needs d <= 3
    ]
    for argv in cases:
        code, out, err = run(argv, capsys)
        assert code == 2, f"{argv} -> {code}: {err}"
        assert err.startswith("smallball:")
        assert out == ""


def test_guard_refusal_exits_2(capsys):
    code, out, err = run(
        ["supnorm", "--n", "30", "--method", "exhaustive"], capsys)
    assert code == 2
    assert "guard refusal" in err


def test_internal_error_exits_1(monkeypatch, capsys):
    def boom(params, signs):
        raise RuntimeError("verification mismatch")
    monkeypatch.setattr(cli.witness3d, "conditional_witness_search", boom)
    code, out, err = run(["witness3d", "--n", "8", "--q", "2"], capsys)
    assert code == 1
    assert "internal error" in err


def test_missing_subcommand_is_an_argparse_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    out, _ = capsys.readouterr()
    assert out.strip() == __version__


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "smallball.cli", "--version"],
        capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.strip() == __version__


# ---------------------------------------------------------------------------
# output formats and files
# ---------------------------------------------------------------------------

def test_csv_key_value_dump(capsys):
    code, out, err = run(["eval", "--n", "4", "--point", "0,0,0",
                          "--format", "csv"], capsys)
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "key,value"
    keys = {line.split(",", 1)[0] for line in lines[1:]}
    assert "config.n" in keys and "result.value" in keys


def test_csv_rectangular_table(capsys):
    code, out, err = run(["lemmas", "--budget", "10", "--format", "csv"],
                         capsys)
    assert code == 0
    lines = out.strip().splitlines()
    header = lines[0].split(",")
    assert "suite" in header and "violations" in header
    assert "config.budget" in header
    assert len(lines) == 5  # four suites under one header


def test_out_writes_json_and_figure(tmp_path, capsys):
    out_path = tmp_path / "run.json"
    code, out, err = run(
        ["witness3d", "--n", "8", "--q", "2", "--out", str(out_path)], capsys)
    assert code == 0
    assert out == ""  # everything goes to the file
    env = json.loads(out_path.read_text())
    assert env["command"] == "witness3d"
    png = tmp_path / "run.png"
    assert png.exists() and png.stat().st_size > 0


def test_no_figures_suppresses_png(tmp_path, capsys):
    out_path = tmp_path / "run.json"
    code, _, _ = run(["lemmas", "--budget", "10", "--out", str(out_path),
                      "--no-figures"], capsys)
    assert code == 0
    assert out_path.exists()
    assert not (tmp_path / "run.png").exists()


def test_figure_for_scan_command(tmp_path, capsys):
    out_path = tmp_path / "scan.csv"
    code, _, _ = run(
        ["orlicz-scan", "--n", "8", "--budget", "500", "--format", "csv",
         "--out", str(out_path)], capsys)
    assert code == 0
    assert (tmp_path / "scan.png").exists()


# ---------------------------------------------------------------------------
# determinism across worker counts
# ---------------------------------------------------------------------------

def test_output_is_worker_count_invariant(capsys):
    base = None
    for workers in ("1", "4"):
        env = run_json(["supnorm", "--n", "7", "--d", "2", "--seed", "5",
                        "--workers", workers], capsys)
        text = canonical(env)
        if base is None:
            base = text
        assert text == base
