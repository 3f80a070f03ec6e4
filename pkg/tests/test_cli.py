import numpy as np

from objsearch.cli import STEP_COLUMNS, main


def test_run_writes_csv(tmp_path, capsys):
    out = tmp_path / "asp.csv"
    code = main(["run", "--suite", "h1_asp_only", "--trials", "3",
                 "--seed", "5", "--out", str(out)])
    assert code == 0
    assert out.exists()
    text = capsys.readouterr().out
    assert "33 rows" in text
    assert "sweep 100 asp" in text


def test_run_rerun_byte_identical(tmp_path):
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    args = ["run", "--suite", "h1_asp_only", "--trials", "3", "--seed", "7"]
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_run_parallel_matches_serial(tmp_path):
    a = tmp_path / "serial.csv"
    b = tmp_path / "pool.csv"
    args = ["run", "--suite", "h1_asp_only", "--trials", "2", "--seed", "3"]
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b), "--jobs", "2"]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_run_unknown_suite_exits_1(tmp_path, capsys):
    code = main(["run", "--suite", "h9", "--trials", "3",
                 "--out", str(tmp_path / "x.csv")])
    assert code == 1
    capsys.readouterr()  # swallow argparse usage text


def test_run_zero_trials_exits_1(tmp_path, capsys):
    code = main(["run", "--suite", "h1_asp_only", "--trials", "0",
                 "--out", str(tmp_path / "x.csv")])
    assert code == 1
    assert "trials" in capsys.readouterr().err


def test_run_bad_scenario_exits_1(tmp_path, capsys):
    bad = tmp_path / "scenario.yaml"
    bad.write_text("observation: {p_max: 7}\n")
    code = main(["run", "--suite", "h1_asp_only", "--trials", "1",
                 "--scenario", str(bad), "--out", str(tmp_path / "x.csv")])
    assert code == 1
    assert "error:" in capsys.readouterr().err


def test_run_unwritable_out_exits_1(capsys):
    code = main(["run", "--suite", "h1_asp_only", "--trials", "1",
                 "--out", "/no/such/dir/x.csv"])
    assert code == 1


def test_compare_self_null(tmp_path, capsys):
    out = tmp_path / "r.csv"
    main(["run", "--suite", "h1_asp_only", "--trials", "4",
          "--seed", "2", "--out", str(out)])
    capsys.readouterr()
    code = main(["compare", str(out), str(out), "--metric", "accuracy",
                 "--resamples", "1000"])
    assert code == 0
    text = capsys.readouterr().out
    assert "diff=+0.0000" in text
    assert "*" not in text


def test_compare_mismatch_exits_1(tmp_path, capsys):
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    main(["run", "--suite", "h1_asp_only", "--trials", "2", "--out", str(a)])
    main(["run", "--suite", "h3_existence", "--trials", "2", "--out", str(b)])
    capsys.readouterr()
    code = main(["compare", str(a), str(b)])
    assert code == 1
    assert "different sweeps" in capsys.readouterr().err


def test_compare_missing_file_exits_1(tmp_path, capsys):
    code = main(["compare", str(tmp_path / "a.csv"), str(tmp_path / "b.csv")])
    assert code == 1


def test_trial_summary_line(capsys):
    code = main(["trial", "--seed", "11"])
    assert code == 0
    text = capsys.readouterr().out
    assert "outcome=" in text and "elapsed=" in text


def test_trial_verbose_step_log(capsys):
    code = main(["trial", "--seed", "11", "--verbose", "--no-human"])
    assert code == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == ",".join(STEP_COLUMNS)
    steps = [line.split(",") for line in lines[1:-1]]
    assert all(len(cells) == len(STEP_COLUMNS) for cells in steps)
    # step index counts up from 1, time never decreases
    assert [int(c[1]) for c in steps] == list(range(1, len(steps) + 1))
    times = [int(c[2]) for c in steps]
    assert all(b >= a for a, b in zip(times, times[1:]))


def test_trial_absent_with_tracking(capsys):
    code = main(["trial", "--seed", "4", "--absent", "--tracking",
                 "--no-human", "--verbose"])
    assert code == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert "outcome=declared_absent" in lines[-1]
    steps = [line.split(",") for line in lines[1:-1]]
    p_not = [float(c[7]) for c in steps]
    obs = [c[4] == "1" for c in steps]
    assert p_not[-1] >= 0.9
    # spurious detections push belief in existence back up; every other
    # step must not lower the absence estimate
    for prev, cur, saw in zip(p_not, p_not[1:], obs[1:]):
        if saw:
            assert cur <= prev
        else:
            assert cur >= prev - 1e-12


def test_trial_deterministic(capsys):
    main(["trial", "--seed", "9", "--verbose"])
    first = capsys.readouterr().out
    main(["trial", "--seed", "9", "--verbose"])
    second = capsys.readouterr().out
    assert first == second
