import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tamperloc.core import ConfigurationError, DimensionError, Tensor, _result, adaptive_avg_pool, bilinear_resize, no_grad
from tamperloc.decoder import PPM, DecoderConfig, Lateral, parse_fuse
from tamperloc.encoder import ConvNeXtBlock, Downsample, Encoder, EncoderConfig, Stem, stage_shapes
from tamperloc.gradcheck import directional_check
from tamperloc.loss import logits_loss
from tamperloc.model import (
    CheckpointError, TamperLocNet, load_checkpoint, preprocess, read_checkpoint, save_checkpoint,
)
from tamperloc.rng import stream


def image(seed, n=1, h=64, w=64):
    return Tensor(np.random.default_rng(seed).standard_normal((n, 3, h, w)))


# encoder

def test_full_scale_stage_shapes_closed_form():
    assert stage_shapes(1, 512, 512, 128) == [
        (1, 128, 128, 128), (1, 256, 64, 64), (1, 512, 32, 32), (1, 1024, 16, 16)]


def test_desk_encoder_shapes():
    out = Encoder(EncoderConfig.desk(), stream(0, "t"))(image(0, n=2))
    assert out.X0.shape == (2, 8, 16, 16)
    assert [t.shape for t in out.features().values()] == stage_shapes(2, 64, 64, 8)
    assert out.X4.shape == (2, 64, 2, 2)


@settings(max_examples=8, deadline=None)
@given(st.integers(1, 3), st.integers(1, 3), st.sampled_from([2, 4, 6]))
def test_encoder_shapes_follow_closed_form(hm, wm, width):
    enc = Encoder(EncoderConfig(width=width, blocks=(1, 1, 1, 1)), stream(width, "t"))
    with no_grad():
        out = enc(image(1, h=32 * hm, w=32 * wm))
    assert [t.shape for t in out.features().values()] == stage_shapes(1, 32 * hm, 32 * wm, width)


@pytest.mark.parametrize("h,w", [(100, 64), (64, 48), (16, 16)])
def test_stem_rejects_sizes_not_multiple_of_32(h, w):
    with pytest.raises(DimensionError, match="multiples of 32"):
        Stem(stream(0, "t"), 8)(image(0, h=h, w=w))


def test_encoder_config_validation():
    for bad in (dict(blocks=(1, 1, 0, 1)), dict(blocks=(1, 1, 1)), dict(width=7), dict(kind="vit")):
        with pytest.raises(ConfigurationError):
            EncoderConfig(**bad)


def test_block_with_zero_pw2_is_identity():
    blk = ConvNeXtBlock(stream(0, "b"), 6, layer_scale_init=1.0)
    blk.pw2.weight.data[...] = 0
    blk.pw2.bias.data[...] = 0
    x = Tensor(np.random.default_rng(2).standard_normal((2, 6, 5, 5)))
    np.testing.assert_array_equal(blk(x).data, x.data)


def test_zeroed_blocks_reduce_stages_to_downsampling():
    enc = Encoder(EncoderConfig.desk(layer_scale_init=0.5), stream(1, "t"))
    for stage in enc.stages:
        for blk in stage.blocks:
            blk.pw2.weight.data[...] = 0
            blk.pw2.bias.data[...] = 0
    out = enc(image(3))
    np.testing.assert_array_equal(out.X1.data, out.X0.data)
    for prev, cur, stage in [(out.X1, out.X2, enc.stages[1]), (out.X2, out.X3, enc.stages[2]),
                             (out.X3, out.X4, enc.stages[3])]:
        np.testing.assert_array_equal(cur.data, stage.down(prev).data)


def test_downsample_shape_and_odd_error():
    ds = Downsample(stream(0, "d"), 8)
    assert ds(Tensor(np.zeros((1, 8, 16, 16)))).shape == (1, 16, 8, 8)
    with pytest.raises(DimensionError):
        ds(Tensor(np.zeros((1, 8, 5, 6))))


def test_encoder_jvp_matches_finite_differences():
    enc = Encoder(EncoderConfig.desk(layer_scale_init=0.5), stream(2, "t"))
    x = image(4)
    w = np.random.default_rng(5).standard_normal((1, 64, 2, 2))

    assert directional_check(lambda: weighted_sum(enc(x).X4, w), enc.parameters(), h=1e-5) <= 1e-3


def weighted_sum(t, w):
    return _result(np.array((t.data * w).sum()), (t,), lambda g: (g * w,))


def test_encoder_is_deterministic():
    a = Encoder(EncoderConfig.desk(), stream(9, "t"))(image(6)).X4.data
    b = Encoder(EncoderConfig.desk(), stream(9, "t"))(image(6)).X4.data
    assert a.tobytes() == b.tobytes()


# decoder

def test_parse_fuse():
    assert parse_fuse("x4, X3") == ("X4", "X3")
    assert parse_fuse(["X3", "X4"]) == ("X4", "X3")
    for bad in ("X3", "X4,X2", "X4,X5", ""):
        with pytest.raises(ConfigurationError):
            parse_fuse(bad)


def test_decoder_config_rejects_bad_bins():
    for bins in ((2, 1), (1, 1), (0, 2), ()):
        with pytest.raises(ConfigurationError):
            DecoderConfig(ppm_bins=bins)


def test_ppm_shapes_constant_input_and_bin_error():
    ppm = PPM(stream(0, "p"), 16, 8, (1, 2))
    x = Tensor(np.full((1, 16, 4, 4), 0.7))
    y = ppm(x)
    assert y.shape == (1, 8, 4, 4)
    # 1x1 pooling of a constant map, broadcast back, is constant per channel
    branch = bilinear_resize(ppm.branches[0](adaptive_avg_pool(x, 1)), 4, 4).data
    assert branch.shape == (1, 4, 4, 4)
    np.testing.assert_array_equal(np.ptp(branch, axis=(2, 3)), 0.0)
    with pytest.raises(ConfigurationError):
        PPM(stream(0, "p"), 16, 8, (1, 3))(Tensor(np.zeros((1, 16, 2, 2))))


def test_lateral_shapes_zero_mix_and_mismatch():
    lat = Lateral(stream(0, "l"), 32, 8)
    y4 = Tensor(np.random.default_rng(0).standard_normal((1, 8, 16, 16)))
    x3 = Tensor(np.random.default_rng(1).standard_normal((1, 32, 32, 32)))
    assert lat(y4, x3).shape == (1, 8, 32, 32)
    lat.mix.weight.data[...] = 0
    lat.mix.bias.data[...] = 0
    np.testing.assert_array_equal(lat(y4, x3).data, 0.0)
    with pytest.raises(DimensionError, match=r"\(1, 8, 16, 16\).*\(1, 32, 30, 30\)"):
        lat(y4, Tensor(np.zeros((1, 32, 30, 30))))


@pytest.mark.parametrize("fuse", ["X4", "X4,X3", "X4,X3,X2,X1"])
def test_network_output_contract(fuse):
    net = TamperLocNet(dec_cfg=DecoderConfig.desk(fuse=fuse), seed=1)
    out = net(image(7, n=2, h=64, w=96))
    assert out.probs.shape == (2, 1, 64, 96)
    assert out.logits.shape == (2, 2, 64, 96)
    assert np.all((out.probs.data >= 0) & (out.probs.data <= 1))
    z = out.logits.data
    np.testing.assert_allclose(out.probs.data[:, 0], 1 / (1 + np.exp(z[:, 0] - z[:, 1])), atol=1e-12)


def test_x4_only_decoder_has_no_laterals():
    net = TamperLocNet(dec_cfg=DecoderConfig.desk(fuse="X4"))
    assert not any(".lateral" in n for n, _ in net.named_parameters())


@settings(max_examples=5, deadline=None)
@given(st.integers(1, 3), st.integers(1, 3))
def test_end_to_end_shape_property(hm, wm):
    net = TamperLocNet(dec_cfg=DecoderConfig.desk(ppm_bins=(1,)))
    assert net.predict(np.zeros((32 * hm, 32 * wm, 3), np.uint8)).shape == (1, 32 * hm, 32 * wm)


def test_batch_permutation_permutes_outputs():
    net = TamperLocNet(seed=3)
    x = image(8, n=3)
    perm = [2, 0, 1]
    a = net(x).probs.data
    b = net(Tensor(x.data[perm])).probs.data
    np.testing.assert_allclose(a[perm], b, atol=1e-13)


def test_end_to_end_gradient():
    net = TamperLocNet(EncoderConfig.desk(layer_scale_init=0.5), DecoderConfig.desk(ppm_bins=(1,)), seed=4)
    x = Tensor(preprocess(np.random.default_rng(0).integers(0, 256, (1, 32, 32, 3), dtype=np.uint8)).data)
    masks = np.zeros((1, 32, 32))
    masks[0, 8:20, 4:16] = 1
    err = directional_check(lambda: logits_loss(net(x).logits, masks), net.parameters(), h=1e-5)
    assert err <= 1e-3


# checkpoints

def test_checkpoint_round_trip_is_byte_identical(tmp_path):
    net = TamperLocNet(seed=5)
    save_checkpoint(net, tmp_path / "a.bin")
    other = TamperLocNet(seed=6)
    load_checkpoint(other, tmp_path / "a.bin")
    save_checkpoint(other, tmp_path / "b.bin")
    assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()
    header = (tmp_path / "a.bin").read_bytes().split(b"\nend\n")[0].decode()
    assert header.startswith("TAMPERLOC-CHECKPOINT 1\nparams ")
    assert "encoder.stem.conv.weight 8x3x4x4" in header
    names = list(read_checkpoint(tmp_path / "a.bin"))
    assert names == [n for n, _ in net.named_parameters()]


def test_checkpoint_shape_mismatch_names_both_shapes(tmp_path):
    save_checkpoint(TamperLocNet(), tmp_path / "a.bin")
    wide = TamperLocNet(enc_cfg=EncoderConfig.desk(width=10))
    with pytest.raises(CheckpointError, match="expected"):
        load_checkpoint(wide, tmp_path / "a.bin")


def test_checkpoint_rejects_garbage(tmp_path):
    (tmp_path / "x.bin").write_bytes(b"not a checkpoint\n")
    with pytest.raises(CheckpointError):
        load_checkpoint(TamperLocNet(), tmp_path / "x.bin")
