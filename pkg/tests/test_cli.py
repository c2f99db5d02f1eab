import subprocess
import sys

import pytest

from streamforge.cli import EXIT_CONFIG, EXIT_OK, main

TASK = "PrequentialEvaluation -l (VerticalHoeffdingTree -p 2) -s (RandomTreeGenerator -c 5 -n 5) -i 3000 -f 1000"


def test_run_writes_csv_and_png(tmp_path, capsys):
    assert main(["run", "-o", str(tmp_path), "-seed", "7", TASK]) == EXIT_OK
    out, err = capsys.readouterr()
    csv = tmp_path / "VerticalHoeffdingTree_RandomTreeGenerator_det_seed7.csv"
    assert csv.exists() and csv.with_suffix(".png").exists()
    lines = csv.read_text().splitlines()
    assert lines[0] == "instances,accuracy,kappa,throughput,seconds"
    assert [l.split(",")[0] for l in lines[1:]] == ["1000", "2000", "3000"]
    assert out.splitlines() == [lines[0], lines[-1]]
    assert "wrote" in err


def test_deterministic_runs_are_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["run", "-o", str(d), "-seed", "7", TASK]) == EXIT_OK
    name = "VerticalHoeffdingTree_RandomTreeGenerator_det_seed7.csv"
    assert (a / name).read_bytes() == (b / name).read_bytes()
    assert main(["run", "-o", str(a), "-seed", "8", TASK]) == EXIT_OK
    assert (a / name).read_bytes() != (a / name.replace("seed7", "seed8")).read_bytes()


def test_parallel_mode_runs(tmp_path):
    task = "PrequentialEvaluation -l (HAMR -p 2 -r 2) -s (WaveformGenerator -t numeric) -i 2000"
    assert main(["run", "-mode", "par", "-workers", "2", "-o", str(tmp_path), task]) == EXIT_OK
    row = (tmp_path / "HAMR_WaveformGenerator_par_seed0.csv").read_text().splitlines()[-1].split(",")
    assert row[0] == "2000" and row[3] != "nan"


@pytest.mark.parametrize(
    "task, fragment",
    [
        ("PrequentialEvaluation -l (VHT -p 2 -s (", "unbalanced"),
        ("PrequentialEvaluation -l (classifiers.meta.OzaBag) -s (WaveformGenerator)", "unknown learner 'classifiers.meta.OzaBag'"),
        ("PrequentialEvaluation -l VHT -s (NoSuchStream)", "unknown stream"),
        ("PrequentialEvaluation -l (VHT -q 1) -s WaveformGenerator", "does not take -q"),
        ("PrequentialEvaluation -l (VHT -p two) -s WaveformGenerator", "bad value for -p"),
        ("PrequentialEvaluation -l VAMR -s WaveformGenerator", "cannot learn a nominal target"),
        ("PrequentialEvaluation -l VHT", "needs both"),
        ("PrequentialEvaluation -l VHT -s (ArffFileStream -f /nonexistent.arff)", "cannot open"),
        ("PrequentialEvaluation -l VHT -s WaveformGenerator -x 1", "does not take -x"),
    ],
)
def test_configuration_errors_exit_2(tmp_path, capsys, task, fragment):
    assert main(["run", "-o", str(tmp_path), task]) == EXIT_CONFIG
    assert fragment in capsys.readouterr().err
    assert not any(tmp_path.iterdir())


def test_unknown_learner_lists_valid_names(tmp_path, capsys):
    main(["run", "-o", str(tmp_path), "PrequentialEvaluation -l Bagging -s WaveformGenerator"])
    err = capsys.readouterr().err
    assert "VerticalHoeffdingTree" in err and "HAMR" in err


def test_arff_stream(tmp_path):
    arff = tmp_path / "d.arff"
    rows = "\n".join(f"{i % 7 / 7:.3f},{'ab'[i % 2]},{'pq'[(i // 2) % 2]}" for i in range(600))
    arff.write_text("@relation d\n@attribute x numeric\n@attribute c {a,b}\n@attribute y {p,q}\n@data\n" + rows + "\n")
    task = f'PrequentialEvaluation -l HoeffdingTreeLocal -s (ArffFileStream -f "{arff}") -f 200'
    assert main(["run", "-o", str(tmp_path / "out"), task]) == EXIT_OK
    lines = (tmp_path / "out" / "HoeffdingTreeLocal_ArffFileStream_det_seed0.csv").read_text().splitlines()
    assert len(lines) == 4 and lines[-1].startswith("600,")


def test_list_and_console_script():
    proc = subprocess.run([sys.executable, "-m", "streamforge.cli", "list"], capture_output=True, text=True, check=True)
    for name in ("PrequentialEvaluation", "VerticalHoeffdingTree", "Sharding", "VAMR", "RandomTweetGenerator", "ArffFileStream"):
        assert name in proc.stdout
    bad = subprocess.run([sys.executable, "-m", "streamforge.cli", "run", "PrequentialEvaluation -l ("], capture_output=True, text=True)
    assert bad.returncode == EXIT_CONFIG and "error:" in bad.stderr


def test_engine_failure_exits_1(tmp_path, capsys, monkeypatch):
    from streamforge import cli
    from streamforge.engine import EngineError

    def broken(task, engine):
        raise EngineError("worker 1 died")

    monkeypatch.setattr(cli, "run_prequential", broken)
    assert main(["run", "-o", str(tmp_path), TASK]) == cli.EXIT_RUNTIME
    assert "engine failed: worker 1 died" in capsys.readouterr().err
