"""End-to-end checks of the command-line front end.

Each test drives ``cli.run`` through real argv lists and inspects the JSON
(or CSV) it writes, so flag parsing, exit codes, and output determinism
are all exercised exactly as a shell user would see them.
"""
import json

import pytest

from recurmartin.cli import run, verify_suite


def invoke(capsys, *argv):
    code = run(list(argv))
    captured = capsys.readouterr()
    return code, captured.out


def invoke_json(capsys, *argv):
    code, out = invoke(capsys, *argv)
    return code, json.loads(out)


class TestGreen:
    def test_exact_line_value(self, capsys):
        code, doc = invoke_json(
            capsys, "green", "--chain", "z", "--x0", "0", "--x", "2",
            "--y", "3", "--method", "exact", "--window-radius", "50",
        )
        assert code == 0
        assert doc["result"]["value"] == 4.0
        assert doc["result"]["exact"] == "4"
        assert doc["result"]["window"]["radius"] == 50

    def test_exact_tree_defaults_to_small_window(self, capsys):
        code, doc = invoke_json(
            capsys, "green", "--chain", "tree:k=2", "--x0", "@",
            "--x", "0", "--y", "0.0",
        )
        assert code == 0
        assert doc["result"]["value"] == pytest.approx(1.0, abs=1e-9)
        assert doc["result"]["window"]["radius"] <= 8

    def test_mc_requires_seed(self, capsys):
        with pytest.raises(SystemExit) as exc:
            run(["green", "--chain", "z", "--x0", "0", "--x", "1",
                 "--y", "2", "--method", "mc"])
        assert exc.value.code == 2
        assert "--seed" in capsys.readouterr().err

    def test_mc_runs_with_seed(self, capsys):
        code, doc = invoke_json(
            capsys, "green", "--chain", "z", "--x0", "0", "--x", "2",
            "--y", "3", "--method", "mc", "--seed", "11",
            "--trajectories", "4000",
        )
        assert code == 0
        res = doc["result"]
        assert abs(res["value"] - 4.0) <= 4 * res["stderr"]

    def test_unknown_chain_is_usage_error(self, capsys):
        with pytest.raises(SystemExit) as exc:
            run(["green", "--chain", "nosuch", "--x0", "0", "--x", "1", "--y", "1"])
        assert exc.value.code == 2
        assert "--chain" in capsys.readouterr().err

    def test_bad_state_names_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            run(["green", "--chain", "z", "--x0", "0", "--x", "north", "--y", "1"])
        assert exc.value.code == 2
        assert "--x" in capsys.readouterr().err


class TestMartin:
    def test_line_profile_evaluations(self, capsys):
        code, doc = invoke_json(
            capsys, "martin", "--chain", "z", "--x0", "0",
            "--alpha", "+inf", "--eval=-3,0,2,5",
        )
        assert code == 0
        assert doc["result"]["evaluations"] == {"-3": "0", "0": "0", "2": "4", "5": "10"}
        assert doc["result"]["residuals"]["all_ok"] is True
        assert doc["result"]["residuals"]["balance_at_base"] == "1"

    def test_mixture_balance_is_total_mass(self, capsys):
        code, doc = invoke_json(
            capsys, "martin", "--chain", "z", "--x0", "0",
            "--mixture", "3*+inf+1/2*-inf", "--eval", "1",
        )
        assert code == 0
        assert doc["result"]["residuals"]["balance_at_base"] == "7/2"

    def test_alpha_and_mixture_are_exclusive(self, capsys):
        with pytest.raises(SystemExit) as exc:
            run(["martin", "--chain", "z", "--x0", "0", "--alpha", "+inf",
                 "--mixture", "1*+inf", "--eval", "1"])
        assert exc.value.code == 2


class TestMeasure:
    def test_path_event_exact(self, capsys):
        code, doc = invoke_json(
            capsys, "measure", "--chain", "z", "--x0", "0",
            "--phi", "boundary:+inf", "--x", "0", "--event", "path:0.1.2",
        )
        assert code == 0
        assert doc["result"]["value"] == "1"
        assert doc["result"]["mode"] == "exact"

    def test_at_event_diverges(self, capsys):
        code, doc = invoke_json(
            capsys, "measure", "--chain", "z", "--x0", "0",
            "--phi", "boundary:+inf", "--x", "0", "--event", "at:2=2",
            "--horizons", "2,5,7,9,11",
        )
        assert code == 0
        res = doc["result"]
        assert res["verdict"] == "diverges"
        assert [v for _, v in res["sequence"]] == ["1", "17/16", "9/8", "303/256", "317/256"]

    def test_avoid_event_brackets_shifted_profile(self, capsys):
        code, doc = invoke_json(
            capsys, "measure", "--chain", "z", "--x0", "0",
            "--phi", "boundary:+inf", "--x", "3", "--event", "avoid:1",
        )
        assert code == 0
        lo, hi = doc["result"]["bracket"]
        assert lo <= 4.0 <= hi
        assert hi - lo < 0.05 * doc["result"]["value"]

    def test_tree_paths_use_slashes(self, capsys):
        code, doc = invoke_json(
            capsys, "measure", "--chain", "tree:k=2", "--x0", "@",
            "--phi", "boundary:(0)*", "--x", "0", "--event", "path:0/0.0",
        )
        assert code == 0
        assert doc["result"]["value"] == "3/4"

    def test_at_event_requires_horizons(self, capsys):
        with pytest.raises(SystemExit) as exc:
            run(["measure", "--chain", "z", "--x0", "0", "--phi",
                 "boundary:+inf", "--x", "0", "--event", "at:2=2"])
        assert exc.value.code == 2
        assert "--horizons" in capsys.readouterr().err


class TestSimulate:
    def test_halfline_ballistic(self, capsys):
        code, doc = invoke_json(
            capsys, "simulate", "--chain", "bangbang:q=1/3", "--x0", "0",
            "--alpha", "inf", "--r", "1/2", "--trajectories", "500",
            "--steps", "600", "--seed", "42", "--witness-threshold", "100",
        )
        assert code == 0
        assert doc["result"]["fraction_above"] == 1.0

    def test_plane_needs_no_alpha(self, capsys):
        code, doc = invoke_json(
            capsys, "simulate", "--chain", "z2", "--x0", "0,0",
            "--trajectories", "200", "--steps", "200", "--seed", "9",
            "--transience",
        )
        assert code == 0
        assert doc["result"]["final_median"] > 3.0
        assert doc["result"]["transience"]["fraction_settled_by_half"] > 0.8

    def test_seed_is_mandatory(self, capsys):
        with pytest.raises(SystemExit) as exc:
            run(["simulate", "--chain", "z", "--x0", "0", "--alpha", "+inf"])
        assert exc.value.code == 2
        assert "--seed" in capsys.readouterr().err


class TestPotential:
    def test_json_table_has_classical_value(self, capsys):
        code, doc = invoke_json(capsys, "potential", "--radius", "2")
        assert code == 0
        by_point = {(e["i"], e["j"]): e for e in doc["result"]["entries"]}
        entry = by_point[(2, 1)]
        assert (entry["p"], entry["q"]) == ("-1", "8")
        assert entry["numeric"] == pytest.approx(8 / 3.14159265358979 - 1, abs=1e-10)

    def test_csv_columns(self, capsys):
        code, out = invoke(capsys, "potential", "--radius", "2", "--emit", "csv")
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0] == "i,j,p,q,numeric"
        assert lines[1] == "0,0,0,0,0"
        assert any(line.startswith("2,1,-1,8,") for line in lines)

    def test_harmonicity_check_passes(self, capsys):
        code, doc = invoke_json(
            capsys, "potential", "--radius", "12", "--check", "harmonicity",
        )
        assert code == 0
        assert doc["result"]["violations"] == 0
        assert doc["result"]["origin_defect"] == "1"

    def test_asymptotics_check_bounded(self, capsys):
        code, doc = invoke_json(
            capsys, "potential", "--radius", "20", "--check", "asymptotics",
        )
        assert code == 0
        assert doc["result"]["bounded"] is True
        assert doc["result"]["bound"] < 0.1

    def test_mc_check_needs_seed(self, capsys):
        with pytest.raises(SystemExit) as exc:
            run(["potential", "--radius", "10", "--check", "mc"])
        assert exc.value.code == 2
        assert "--seed" in capsys.readouterr().err


class TestVerify:
    def test_exact_suite_passes_without_seed(self, capsys):
        code, doc = invoke_json(capsys, "verify", "--suite", "exact")
        assert code == 0
        counts = doc["result"]["counts"]
        assert counts["fail"] == 0
        assert counts["pass"] >= 10

    def test_full_suite_exit_zero(self, capsys):
        code, doc = invoke_json(capsys, "verify", "--suite", "all", "--seed", "7")
        assert code == 0
        assert doc["result"]["counts"]["fail"] == 0

    def test_corrupted_profile_control_entry(self, capsys):
        code, doc = invoke_json(capsys, "verify", "--suite", "exact")
        ids = {c["id"]: c for c in doc["result"]["checks"]}
        control = ids["negative-control-profile"]
        assert control["status"] == "pass"
        assert "residual 1" in control["details"]

    def test_mc_suite_needs_seed(self, capsys):
        with pytest.raises(SystemExit) as exc:
            run(["verify", "--suite", "mc"])
        assert exc.value.code == 2
        assert "--seed" in capsys.readouterr().err

    def test_report_is_seed_stable(self):
        first = verify_suite("mc", 123)
        second = verify_suite("mc", 123)
        assert first == second

    def test_every_check_has_reference(self, capsys):
        code, doc = invoke_json(capsys, "verify", "--suite", "all", "--seed", "5")
        for check in doc["result"]["checks"]:
            assert check["reference"]
            assert check["status"] in ("pass", "fail", "soft")


class TestDeterminism:
    CASES = [
        ("green", "--chain", "z", "--x0", "0", "--x", "2", "--y", "3",
         "--method", "mc", "--seed", "17", "--trajectories", "2000"),
        ("martin", "--chain", "bangbang:q=1/3", "--x0", "0", "--alpha", "inf",
         "--eval", "0,1,2,3"),
        ("measure", "--chain", "z", "--x0", "0", "--phi", "boundary:+inf",
         "--x", "2", "--event", "avoid:1"),
        ("simulate", "--chain", "z", "--x0", "0", "--alpha", "+inf",
         "--trajectories", "300", "--steps", "200", "--seed", "31"),
        ("potential", "--radius", "6", "--emit", "csv"),
        ("verify", "--suite", "all", "--seed", "7"),
    ]

    @pytest.mark.parametrize("argv", CASES, ids=lambda a: a[0])
    def test_identical_invocations_emit_identical_bytes(self, capsys, argv):
        code1, out1 = invoke(capsys, *argv)
        code2, out2 = invoke(capsys, *argv)
        assert code1 == code2 == 0
        assert out1 == out2

    def test_config_echoes_invocation(self, capsys):
        _, doc = invoke_json(
            capsys, "green", "--chain", "z", "--x0", "0", "--x", "1", "--y", "1",
        )
        cfg = doc["config"]
        assert cfg["subcommand"] == "green"
        assert cfg["options"]["chain"] == "z"
