"""Model assembly: registry, parameter budgets, forward shapes, stochastic
depth, and the analytic MAC accounting."""

import numpy as np
import pytest

from dfformer.autograd import Tape
from dfformer.errors import BuildError, ShapeError
from dfformer.model import (
    MetaFormerBlock,
    ModelConfig,
    StageConfig,
    block_forward,
    build_model,
    count_flops,
    count_params,
    drop_path,
    get_config,
    mixer_macs,
    registry_names,
    spectral_term_macs,
)

# Regression pins computed from the layer shape arithmetic; the nearby
# round numbers they should approximate are asserted in test_acceptance.
PARAM_COUNTS = {
    "dfformer-s18": 30_344_916,
    "cdfformer-s18": 30_212_904,
    "gfformer-s18": 29_650_416,
    "dfformer-s36": 45_647_328,
    "dfformer-m36": 65_361_760,
    "dfformer-b36": 115_050_272,
}


def _rng(seed):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def _count_from_config(name):
    cfg = get_config(name)
    model = build_model(cfg, _rng(0))
    return count_params(model)


def test_registry_contents():
    names = registry_names()
    assert len(names) == len(set(names)) == 17
    for fam in ("dfformer", "cdfformer", "gfformer"):
        for size in ("s18", "s36", "m36", "b36"):
            assert "%s-%s" % (fam, size) in names
    for nano in ("nano-df", "nano-gf", "nano-cf", "nano-conv", "nano-attn"):
        assert nano in names


def test_unknown_model_name():
    with pytest.raises(BuildError) as err:
        get_config("dfformer-s19")
    assert "unknown model" in str(err.value)


def test_config_defaults():
    cfg = get_config("dfformer-s18")
    assert cfg.input_size == 224
    assert cfg.num_classes == 1000
    assert cfg.n_filters == 4
    assert [s.depth for s in cfg.stages] == [3, 3, 9, 3]
    assert [s.width for s in cfg.stages] == [64, 128, 320, 512]
    assert [s.mixer for s in cfg.stages] == ["df"] * 4
    assert [s.res_scale for s in cfg.stages] == [False, False, True, True]
    cdf = get_config("cdfformer-s18")
    assert [s.mixer for s in cdf.stages] == ["sepconv", "sepconv", "df", "df"]


def test_config_overrides():
    cfg = get_config("nano-df", input_size=64, num_classes=7, n_filters=2)
    assert cfg.input_size == 64
    assert cfg.num_classes == 7
    assert cfg.n_filters == 2


def test_stage_extents():
    cfg = get_config("dfformer-s18")
    assert [cfg.stage_extent(i) for i in range(4)] == [56, 28, 14, 7]
    nano = get_config("nano-df")
    assert [nano.stage_extent(i) for i in range(4)] == [8, 4, 2, 1]


def test_input_size_must_be_stride_multiple():
    with pytest.raises(BuildError) as err:
        get_config("nano-df", input_size=48)
    assert "multiple of the total stride 32" in str(err.value)


def test_config_validation():
    st = StageConfig(1, 8, "df", 7, 4, 2, False)
    with pytest.raises(BuildError):
        ModelConfig([st] * 3, 32, 4)
    with pytest.raises(BuildError):
        ModelConfig([st] * 4, 32, 0)
    with pytest.raises(BuildError):
        StageConfig(0, 8, "df", 7, 4, 2, False)
    with pytest.raises(BuildError):
        StageConfig(1, 8, "fancy", 7, 4, 2, False)


@pytest.mark.parametrize("name", sorted(PARAM_COUNTS))
def test_parameter_counts(name):
    assert _count_from_config(name) == PARAM_COUNTS[name]


def test_nano_parameter_count():
    cfg = get_config("nano-df")
    model = build_model(cfg, _rng(0))
    assert count_params(model) == 540_298
    assert len(list(model.parameters())) == 125


def test_forward_shapes_and_capture_tags():
    cfg = get_config("nano-df", num_classes=5)
    model = build_model(cfg, _rng(1))
    x = _rng(2).standard_normal((2, 32, 32, 3))
    caps = []
    tape = Tape(record=False)
    out = model.forward(x, tape, captures=caps)
    assert out.data.shape == (2, 5)
    tags = [t for t, _ in caps]
    assert tags[0] == "down.0"
    assert "stage0.block0.mixer" in tags
    assert "stage0.block0.mlp" in tags
    assert "stage2.block1.mlp" in tags
    assert "down.3" in tags
    # one capture per downsampler plus two per block
    assert len(tags) == 4 + 2 * sum(s.depth for s in cfg.stages)
    down0 = dict(caps)["down.0"]
    assert down0.shape == (2, 8, 8, 16)


def test_forward_rejects_wrong_extent():
    model = build_model(get_config("nano-df"), _rng(3))
    with pytest.raises(ShapeError):
        model.forward(np.zeros((1, 64, 64, 3)), Tape(record=False))


def test_res_scale_placement():
    model = build_model(get_config("nano-df"), _rng(4))
    names = [n for n, _ in model.named_parameters()]
    res = [n for n in names if ".res1." in n or ".res2." in n]
    assert res
    assert all(n.startswith("stages.2") or n.startswith("stages.3")
               for n in res)
    assert not any(n.startswith("stages.0") or n.startswith("stages.1")
                   for n in res)


def test_drop_path_scaling():
    tape = Tape(record=False)
    x = tape.const(np.ones((8, 2, 2, 3)))
    assert drop_path(x, 0.0, _rng(5)) is x
    assert drop_path(x, 0.5, None) is x
    out = drop_path(x, 0.5, _rng(6)).data
    per_sample = out.reshape(8, -1)
    # each sample is either dropped or rescaled by 1/(1-rate)
    assert all(row.min() == row.max() for row in per_sample)
    assert set(np.round(per_sample[:, 0], 12)) <= {0.0, 2.0}


def test_drop_path_zero_rate_in_model_is_deterministic():
    model = build_model(get_config("nano-df"), _rng(7))
    x = _rng(8).standard_normal((2, 32, 32, 3))
    a = model.logits(x)
    b = model.logits(x)
    assert np.array_equal(a, b)


def test_block_forward_channel_check():
    rng = _rng(9)
    from dfformer.mixers import SepConv

    blk = MetaFormerBlock(8, SepConv(8, rng), 4, False, 0.0, rng)
    tape = Tape(record=False)
    out = block_forward(tape.const(rng.standard_normal((1, 4, 4, 8))), blk)
    assert out.data.shape == (1, 4, 4, 8)
    with pytest.raises(ShapeError):
        block_forward(tape.const(np.zeros((1, 4, 4, 6))), blk)


# frozen MAC totals for the two headline models at their native extent
FLOP_PINS = {
    "dfformer-s18": (3_959_976_591.95, 3_793_760_256.0, 166_216_335.95),
    "cdfformer-s18": (3_938_115_481.35, 3_882_132_480.0, 55_983_001.35),
}


@pytest.mark.parametrize("name", sorted(FLOP_PINS))
def test_flop_pins(name):
    total, parts = count_flops(get_config(name))
    want_total, want_conv, want_fft = FLOP_PINS[name]
    assert total == pytest.approx(want_total, abs=0.5)
    assert parts["conv"] == pytest.approx(want_conv, abs=0.5)
    assert parts["fft"] == pytest.approx(want_fft, abs=0.5)


def test_flops_resolution_scaling():
    cfg = get_config("dfformer-s18")
    t224, _ = count_flops(cfg)
    t448, _ = count_flops(cfg, resolution=448)
    # quadrupling pixel count should a bit more than quadruple the MACs
    # because of the log factor in the spectral term
    assert 4.0 < t448 / t224 < 4.5
    with pytest.raises(BuildError):
        count_flops(cfg, resolution=100)


def test_spectral_term_nlogn_fit():
    """The spectral MAC term follows c*HW*log2(HW) within 10 percent."""
    extents = [8, 16, 32, 64]
    ys = np.array([spectral_term_macs(64, e) for e in extents])
    xs = np.array([e * e * np.log2(e * e) for e in extents], dtype=float)
    # the harmonic mean of the extreme ratios minimizes the worst-case
    # relative residual, so it certifies that some constant fits
    r = ys / xs
    c = 2.0 * r.min() * r.max() / (r.min() + r.max())
    resid = np.abs(ys - c * xs) / ys
    assert resid.max() < 0.10


def test_mixer_macs_structure():
    cfg = get_config("nano-df")
    for kind in ("df", "gf", "sepconv", "attention"):
        m = mixer_macs(kind, 64, 14, cfg)
        assert set(m) == {"conv", "fft"}
        assert m["conv"] > 0
    assert mixer_macs("sepconv", 64, 14, cfg)["fft"] == 0.0
    assert mixer_macs("attention", 64, 14, cfg)["fft"] == 0.0
    # df pays for the routeing MLP and basis mix on top of gf
    df = mixer_macs("df", 64, 14, cfg)
    gf = mixer_macs("gf", 64, 14, cfg)
    assert df["fft"] > gf["fft"]
    assert df["conv"] > gf["conv"]


def test_attention_macs_superlinear_in_tokens():
    cfg = get_config("nano-attn")
    a = mixer_macs("attention", 64, 8, cfg)["conv"]
    b = mixer_macs("attention", 64, 32, cfg)["conv"]
    # 16x the tokens costs far more than 16x the MACs; the projection part
    # scales linearly but the attention matrix part scales quadratically
    assert b / a > 16.0
