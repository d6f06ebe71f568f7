import numpy as np
import pytest

from tamperloc.cli import main
from tamperloc.netpbm import read_pgm, write_pgm, write_ppm

SMALL = ["--set", "ppm_bins=1", "--set", "warmup_iters=2"]


@pytest.fixture(scope="module")
def run(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    data, out = root / "data", root / "run"
    assert main(["synth", "--out", str(data), "--n", "4", "--size", "32", "--seed", "7"]) == 0
    assert main(["train", "--data", str(data), "--out", str(out), "--iters", "4"] + SMALL) == 0
    return root, data, out


def test_synth_layout(run):
    _, data, _ = run
    assert len(list((data / "images").glob("*.ppm"))) == 4
    assert len(list((data / "masks").glob("*.pgm"))) == 4
    lines = (data / "manifest.txt").read_text().splitlines()
    assert len(lines) == 4 and lines[0].startswith("000000 host=")
    assert (data / "config.txt").is_file()


def test_train_writes_artifacts(run):
    _, _, out = run
    assert {"config.txt", "loss_curve.csv", "checkpoint.bin"} <= {p.name for p in out.iterdir()}
    assert (out / "loss_curve.csv").read_text().startswith("iter,lr,loss,f1\n")
    assert "max_iters = 4" in (out / "config.txt").read_text()


def test_written_config_reproduces_the_run(run, tmp_path):
    _, data, out = run
    again = tmp_path / "again"
    assert main(["train", "--data", str(data), "--out", str(again), "--config", str(out / "config.txt")]) == 0
    for name in ("checkpoint.bin", "loss_curve.csv", "config.txt"):
        assert (again / name).read_bytes() == (out / name).read_bytes()


def test_eval_checkpoint_and_csv_rows(run, capsys):
    _, data, out = run
    assert main(["eval", "--data", str(data), "--checkpoint", str(out / "checkpoint.bin")]) == 0
    assert len((out / "metrics.csv").read_text().splitlines()) == 5
    assert "mean" in capsys.readouterr().out.lower()


def _copy_masks(data, dest, invert=False):
    dest.mkdir()
    for p in (data / "masks").glob("*.pgm"):
        m = read_pgm(p)
        write_pgm(dest / p.name, (255 - m) if invert else m)


def test_eval_ground_truth_and_inverted_predictions(run, tmp_path):
    _, data, _ = run
    _copy_masks(data, tmp_path / "gt")
    _copy_masks(data, tmp_path / "inv", invert=True)
    assert main(["eval", "--data", str(data), "--predictions", str(tmp_path / "gt")]) == 0
    rows = [r.split(",") for r in (tmp_path / "gt" / "metrics.csv").read_text().splitlines()[1:]]
    assert all(float(f1) == 1.0 and float(iou) == 1.0 for _, _, f1, iou in rows)
    assert main(["eval", "--data", str(data), "--predictions", str(tmp_path / "inv")]) == 0
    rows = [r.split(",") for r in (tmp_path / "inv" / "metrics.csv").read_text().splitlines()[1:]]
    assert all(float(f1) == 0.0 for _, _, f1, _ in rows)


def test_infer_shapes_threshold_and_pad(run, tmp_path):
    _, data, out = run
    img = data / "images" / "000000.ppm"
    ck = str(out / "checkpoint.bin")
    assert main(["infer", "--checkpoint", ck, str(img), "--out", str(tmp_path), "--threshold", "0"]) == 0
    prob, mask = read_pgm(tmp_path / "000000.prob.pgm"), read_pgm(tmp_path / "000000.mask.pgm")
    assert prob.shape == mask.shape == (32, 32)
    assert np.all(mask == 255)
    odd = tmp_path / "odd.ppm"
    write_ppm(odd, np.random.default_rng(0).integers(0, 256, (40, 45, 3), dtype=np.uint8))
    assert main(["infer", "--checkpoint", ck, str(odd), "--out", str(tmp_path)]) == 1
    assert main(["infer", "--checkpoint", ck, str(odd), "--out", str(tmp_path), "--pad"]) == 0
    assert read_pgm(tmp_path / "odd.prob.pgm").shape == (40, 45)


def test_exit_codes(run, tmp_path, capsys):
    _, data, out = run
    assert main(["synth", "--out", str(tmp_path / "d"), "--n", "0"]) == 1
    assert main(["synth", "--out", str(tmp_path / "d"), "--set", "bogus=1"]) == 1
    assert main(["train", "--data", str(tmp_path / "missing"), "--out", str(tmp_path / "o")]) == 2
    assert main(["eval", "--data", str(data)]) == 1
    assert main(["infer", "--checkpoint", str(out / "checkpoint.bin"), str(tmp_path / "nope.ppm")]) == 2
    assert main(["frobnicate"]) == 1
    capsys.readouterr()


def test_bad_mask_names_the_file(run, tmp_path, capsys):
    _, data, _ = run
    bad = tmp_path / "bad"
    (bad / "images").mkdir(parents=True)
    (bad / "masks").mkdir()
    for p in (data / "images").glob("*.ppm"):
        (bad / "images" / p.name).write_bytes(p.read_bytes())
        write_pgm(bad / "masks" / (p.stem + ".pgm"), np.full((32, 32), 7, np.uint8))
    assert main(["train", "--data", str(bad), "--out", str(tmp_path / "o")] + SMALL) == 2
    assert "000000.pgm" in capsys.readouterr().err


def test_incompatible_checkpoint_exits_2(run, tmp_path, capsys):
    _, data, out = run
    cfg = tmp_path / "wide.txt"
    cfg.write_text((out / "config.txt").read_text().replace("width = 8", "width = 10"))
    code = main(["eval", "--data", str(data), "--checkpoint", str(out / "checkpoint.bin"), "--config", str(cfg)])
    assert code == 2
    assert "expected" in capsys.readouterr().err


def test_threads_env_validation(run, tmp_path, monkeypatch):
    _, data, _ = run
    monkeypatch.setenv("TAMPERLOC_THREADS", "zero")
    assert main(["synth", "--out", str(tmp_path / "d"), "--n", "1", "--size", "32"]) == 1
