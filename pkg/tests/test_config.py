import pytest

from tamperloc import config as rc


def test_defaults_are_desk_preset():
    cfg = rc.resolve()
    assert (cfg.width, cfg.blocks, cfg.size, cfg.batch_size) == (8, (1, 1, 2, 1), 64, 4)
    assert cfg.encoder_config().stage_channels == (8, 16, 32, 64)
    assert cfg.augment_config().crop == (64, 64)


def test_full_preset():
    cfg = rc.resolve(overrides=[("preset", "full")])
    assert (cfg.width, cfg.blocks, cfg.base_lr, cfg.warmup_iters, cfg.max_iters) == \
        (128, (3, 3, 27, 3), 1e-4, 1500, 160_000)
    assert cfg.train_config().weight_decay == 0.05


def test_file_then_overrides(tmp_path):
    path = tmp_path / "run.txt"
    path.write_text("# comment\nseed = 4   # trailing\nfuse = X4,X3\nalpha=0.3\n\n")
    cfg = rc.resolve(path, [("seed", "9")])
    assert cfg.seed == 9 and cfg.fuse == ("X4", "X3") and cfg.alpha == 0.3


@pytest.mark.parametrize("pairs", [
    [("sede", "1")], [("seed", "x")], [("preset", "huge")], [("n", "0")], [("size", "50")],
    [("fuse", "X3")], [("warmup_iters", "5000")], [("alpha", "2")], [("augment", "maybe")],
])
def test_invalid_values_are_hard_errors(pairs):
    with pytest.raises(rc.ConfigError):
        rc.resolve(overrides=pairs)


def test_malformed_line(tmp_path):
    (tmp_path / "c.txt").write_text("seed 3\n")
    with pytest.raises(rc.ConfigError, match="c.txt:1"):
        rc.resolve(tmp_path / "c.txt")


def test_dump_round_trip_is_byte_identical(tmp_path):
    cfg = rc.resolve(overrides=[("base_lr", "0.1"), ("fuse", "X4,X3,X2"), ("noise_sigma", "2,7.5")])
    rc.write(cfg, tmp_path / "a.txt")
    again = rc.resolve(tmp_path / "a.txt")
    assert again == cfg
    assert rc.dump(again) == (tmp_path / "a.txt").read_text()
