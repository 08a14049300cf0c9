"""End-to-end runs of the command line interface."""

import json
from importlib import resources

import pytest

from mdpdistill.cli import main


@pytest.fixture(scope="module")
def models(tmp_path_factory):
    root = tmp_path_factory.mktemp("models")
    for name in ("fig1.mdp", "mutex.mdp", "sync2.mdp", "fig1.flat"):
        text = resources.files("mdpdistill.models").joinpath(name).read_text()
        (root / name).write_text(text)
    return root


def _value_of(line_map, key):
    return float(line_map[key])


def _kv(out):
    pairs = {}
    for line in out.splitlines():
        if "  " in line:
            k, v = line.split("  ", 1)
            pairs[k.rstrip()] = v.strip()
    return pairs


# -------------------------------------------------------------------- solve

def test_solve_fig1(models, capsys):
    rc = main(["solve", "--model", str(models / "fig1.mdp")])
    out = _kv(capsys.readouterr().out)
    assert rc == 0
    assert out["states"] == "9"
    assert float(out["lower"]) == pytest.approx(0.995, abs=1e-6)
    assert out["converged"] == "yes"
    assert float(out["strategy value"]) == pytest.approx(0.995, abs=1e-9)


def test_solve_flat_input(models, capsys):
    rc = main(["solve", "--model", str(models / "fig1.flat")])
    out = _kv(capsys.readouterr().out)
    assert rc == 0
    assert float(out["lower"]) == pytest.approx(0.995, abs=1e-6)


def test_solve_brtdp_engine(models, capsys):
    rc = main(["solve", "--model", str(models / "mutex.mdp"),
               "--engine", "brtdp", "--seed", "3"])
    out = _kv(capsys.readouterr().out)
    assert rc == 0
    assert out["engine"] == "brtdp"
    assert float(out["lower"]) == pytest.approx(0.91, abs=1e-5)


def test_solve_strategy_out(models, tmp_path, capsys):
    dest = tmp_path / "strat.tsv"
    rc = main(["solve", "--model", str(models / "fig1.mdp"),
               "--strategy-out", str(dest)])
    capsys.readouterr()
    assert rc == 0
    lines = dest.read_text().splitlines()
    assert lines[0].split("\t")[0] == "state"
    assert any(line.split("\t")[2] == "b" and line.split("\t")[4] == "good"
               for line in lines[1:])


def test_solve_target_expr_guarded(models, capsys):
    # guarded models are rebuilt against the new target; it has to keep
    # covering the commandless waiting state at loc=3
    rc = main(["solve", "--model", str(models / "fig1.mdp"),
               "--target-expr", "loc>=3"])
    out = _kv(capsys.readouterr().out)
    assert rc == 0
    # the rebuild explores only up to the new absorbing frontier
    assert out["states"] == "7"
    assert out["target states"] == "5"
    assert float(out["lower"]) == pytest.approx(1.0, abs=1e-9)


def test_retarget_exposing_a_deadlock_is_reported(models, capsys):
    # dropping loc=3 from the target set uncovers a state with no
    # commands; the builder refuses instead of inventing behaviour
    rc = main(["solve", "--model", str(models / "fig1.mdp"),
               "--target-expr", "loc=1 & pos=2"])
    assert rc == 2
    assert "deadlock" in capsys.readouterr().err


def test_solve_target_expr_flat(models, capsys):
    rc = main(["solve", "--model", str(models / "fig1.flat"),
               "--target-expr", "loc=1 & pos=2"])
    out = _kv(capsys.readouterr().out)
    assert rc == 0
    assert float(out["lower"]) == pytest.approx(0.01, abs=1e-9)
    assert out["target states"] == "1"


# ------------------------------------------------------------------ distill

def test_distill_writes_everything(models, tmp_path, capsys):
    tree = tmp_path / "tree.json"
    dot = tmp_path / "tree.dot"
    tsv = tmp_path / "strat.tsv"
    rc = main(["distill", "--model", str(models / "fig1.mdp"),
               "--runs", "4000", "--seed", "7", "--min-leaf", "1",
               "--out", str(tree), "--dot", str(dot),
               "--strategy-out", str(tsv)])
    out = _kv(capsys.readouterr().out)
    assert rc == 0
    assert out["budget met"] == "yes"
    assert int(out["tree size"]) == 5
    assert float(out["tree value"]) == pytest.approx(0.995, abs=1e-9)
    obj = json.loads(tree.read_text())
    assert obj["root"]["p"] == {"cat": "action", "v": "a"}
    assert "digraph" in dot.read_text()
    assert tsv.read_text().startswith("state\t")


def test_distill_deterministic(models, tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for dest in (a, b):
        rc = main(["distill", "--model", str(models / "fig1.mdp"),
                   "--runs", "2000", "--seed", "5", "--out", str(dest)])
        assert rc == 0
    capsys.readouterr()
    assert a.read_bytes() == b.read_bytes()


def test_distill_threads_equivalent(models, tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for dest, threads in ((a, "1"), (b, "4")):
        rc = main(["distill", "--model", str(models / "fig1.mdp"),
                   "--runs", "2000", "--seed", "5", "--threads", threads,
                   "--out", str(dest)])
        assert rc == 0
    capsys.readouterr()
    assert a.read_bytes() == b.read_bytes()


def test_distill_variants_run(models, capsys):
    for variant in ("IDP", "IDE", "IAP", "IAE", "OD", "OA"):
        rc = main(["distill", "--model", str(models / "fig1.mdp"),
                   "--runs", "500", "--seed", "1", "--variant", variant])
        out = _kv(capsys.readouterr().out)
        assert rc == 0, variant
        assert float(out["tree value"]) > 0.9


def test_distill_single_leaf_when_everything_is_good(models, capsys):
    rc = main(["distill", "--model", str(models / "sync2.mdp"),
               "--runs", "500", "--seed", "2"])
    out = _kv(capsys.readouterr().out)
    assert rc == 0
    assert int(out["tree size"]) == 1


def test_distill_impossible_budget(models, capsys):
    # demanding a million times better than lossless cannot be met with
    # min_leaf search alone when sampling noise leaves any defect; use a
    # negative-loss bound to force rejection of every tree
    rc = main(["distill", "--model", str(models / "fig1.mdp"),
               "--runs", "500", "--seed", "1", "--budget", "-0.5"])
    out = _kv(capsys.readouterr().out)
    assert rc == 1
    assert out["budget met"] == "no"


def test_distill_exit_union_and_modes(models, capsys):
    rc = main(["distill", "--model", str(models / "mutex.mdp"),
               "--runs", "800", "--seed", "3", "--exit-union",
               "--truncate-mode", "keep-argmax", "--variant", "OA",
               "--no-prune", "--confidence", "0.4", "--delta", "0.01"])
    assert rc == 0
    capsys.readouterr()


# ------------------------------------------------------------------ compare

def test_compare_table_and_csv(models, tmp_path, capsys):
    dest = tmp_path / "cmp.csv"
    rc = main(["compare", "--model", str(models / "fig1.mdp"),
               "--runs", "2000", "--seed", "7", "--min-leaf", "1",
               "--csv", str(dest)])
    out = capsys.readouterr().out
    assert rc == 0
    rows = {line.split(",")[0]: line.split(",")
            for line in dest.read_text().splitlines()[1:]}
    assert set(rows) == {"explicit", "bdd", "dtree"}
    assert int(rows["explicit"][1]) == 2
    assert int(rows["bdd"][1]) == 11
    assert int(rows["dtree"][1]) == 5
    assert float(rows["dtree"][2]) == pytest.approx(0.995, abs=1e-9)
    for name in ("explicit", "bdd", "dtree"):
        assert name in out


# ------------------------------------------------------------------- export

def test_export_round_trip(models, tmp_path, capsys):
    dest = tmp_path / "fig1.flat"
    rc = main(["export", "--model", str(models / "fig1.mdp"),
               "--out", str(dest)])
    capsys.readouterr()
    assert rc == 0
    assert dest.read_text() == (models / "fig1.flat").read_text()


def test_export_to_stdout(models, capsys):
    rc = main(["export", "--model", str(models / "fig1.mdp")])
    out = capsys.readouterr().out
    assert rc == 0
    assert out == (models / "fig1.flat").read_text()


def test_export_retargeted(models, tmp_path, capsys):
    # flat inputs keep their state space; retargeting just moves the
    # absorbing set, so no deadlock can appear
    dest = tmp_path / "re.flat"
    rc = main(["export", "--model", str(models / "fig1.flat"),
               "--target-expr", "loc>=5", "--out", str(dest)])
    capsys.readouterr()
    assert rc == 0
    lines = dest.read_text().splitlines()
    assert lines[-1] == "target 5 6 7 8"
    assert "act 5 tau 0 1.0 5" in lines


# -------------------------------------------------------------- exit codes

def test_missing_file_is_usage_error(capsys):
    rc = main(["solve", "--model", "/nonexistent/x.mdp"])
    err = capsys.readouterr().err
    assert rc == 2
    assert "error:" in err


def test_bad_model_is_usage_error(tmp_path, capsys):
    bad = tmp_path / "bad.mdp"
    bad.write_text("module m x:[0..1] init 0; endmodule target x=1")
    rc = main(["solve", "--model", str(bad)])
    assert rc == 2
    assert "error:" in capsys.readouterr().err


def test_bad_target_expr_is_usage_error(models, capsys):
    rc = main(["solve", "--model", str(models / "fig1.mdp"),
               "--target-expr", "nope=1"])
    assert rc == 2
    assert "error:" in capsys.readouterr().err


def test_unknown_flag_exits_two(models, capsys):
    with pytest.raises(SystemExit) as ei:
        main(["solve", "--model", str(models / "fig1.mdp"), "--bogus"])
    assert ei.value.code == 2
    capsys.readouterr()
