"""Four-stage MetaFormer assembly, model registry, and cost accounting.

Layout is channel-last [B, H, W, C] end to end. A model is: stem conv
(7x7 stride 4, post-norm), then per stage a stack of blocks and, between
stages, a strided 3x3 downsampler with pre-norm; classifier is GAP ->
LayerNorm -> MLP head with SquaredReLU.
"""

import math

import numpy as np

from . import autograd as ag
from .autograd import Tape
from .errors import BuildError, ShapeError
from .layers import Conv2d, LayerNorm, Mlp, MlpHead, Module, Scale
from .layers import global_avg_pool
from .mixers import AttentionMixer, DynamicFilter, GlobalFilter, SepConv

MIXER_KINDS = ("df", "gf", "sepconv", "attention")


class StageConfig:
    """One pyramid stage: block count, width, mixer kind, downsampler."""

    def __init__(self, depth, width, mixer, down_kernel, down_stride,
                 down_pad, res_scale):
        if depth < 1 or width < 1:
            raise BuildError("stage depth and width must be positive")
        if mixer not in MIXER_KINDS:
            raise BuildError("unknown mixer kind %r" % (mixer,))
        if down_kernel < 1 or down_stride < 1 or down_pad < 0:
            raise BuildError("bad downsampling geometry")
        self.depth = depth
        self.width = width
        self.mixer = mixer
        self.down_kernel = down_kernel
        self.down_stride = down_stride
        self.down_pad = down_pad
        self.res_scale = res_scale


class ModelConfig:
    def __init__(self, stages, input_size, num_classes, mlp_ratio=4,
                 n_filters=4, routeing_ratio=0.25, drop_path_rate=0.0,
                 name="custom"):
        if len(stages) != 4:
            raise BuildError("exactly 4 stages required, got %d" % len(stages))
        if input_size % 32 != 0:
            raise BuildError(
                "input extent %d is not a multiple of the total stride 32"
                % input_size
            )
        if num_classes < 1:
            raise BuildError("num_classes must be positive")
        self.stages = list(stages)
        self.input_size = input_size
        self.num_classes = num_classes
        self.mlp_ratio = mlp_ratio
        self.n_filters = n_filters
        self.routeing_ratio = routeing_ratio
        self.drop_path_rate = drop_path_rate
        self.name = name

    def stage_extent(self, i):
        """Feature-map side length of stage i (stem stride 4, then 2 each)."""
        return self.input_size >> (2 + i)


class Downsampling(Module):
    """Strided conv with a LayerNorm before (inner) or after (stem)."""

    def __init__(self, cin, cout, kernel, stride, pad, rng, pre_norm,
                 dtype=np.float64):
        self.norm = LayerNorm(cin if pre_norm else cout, dtype=dtype)
        self.conv = Conv2d(cin, cout, kernel, stride, pad, rng, True, dtype)
        self.pre_norm = pre_norm

    def forward(self, x):
        if self.pre_norm:
            return self.conv(self.norm(x))
        return self.norm(self.conv(x))


def drop_path(x, rate, rng):
    """Per-sample stochastic depth on a residual branch (training only)."""
    if rate <= 0.0 or rng is None:
        return x
    b = x.data.shape[0]
    keep = (rng.random(b) >= rate).astype(x.data.dtype) / (1.0 - rate)
    return ag.mul(x, x.tape.const(keep.reshape((b,) + (1,) * (x.data.ndim - 1))))


class MetaFormerBlock(Module):
    """Token-mixer residual sub-block followed by a channel-MLP one."""

    def __init__(self, dim, mixer, mlp_ratio, res_scale, drop_rate, rng,
                 dtype=np.float64):
        self.norm1 = LayerNorm(dim, dtype=dtype)
        self.mixer = mixer
        self.res1 = Scale(dim, 1.0, dtype) if res_scale else None
        self.norm2 = LayerNorm(dim, dtype=dtype)
        self.mlp = Mlp(dim, mlp_ratio * dim, dim, rng, dtype)
        self.res2 = Scale(dim, 1.0, dtype) if res_scale else None
        self.drop_rate = drop_rate

    def forward(self, x, drop_rng=None, captures=None, tag=""):
        y = drop_path(self.mixer(self.norm1(x)), self.drop_rate, drop_rng)
        x = ag.add(self.res1(x) if self.res1 else x, y)
        if captures is not None:
            captures.append((tag + ".mixer", x.data))
        z = drop_path(self.mlp(self.norm2(x)), self.drop_rate, drop_rng)
        x = ag.add(self.res2(x) if self.res2 else x, z)
        if captures is not None:
            captures.append((tag + ".mlp", x.data))
        return x


def block_forward(x, block, drop_rng=None):
    """Run one MetaFormerBlock; channel width must match."""
    if x.data.shape[-1] != block.norm1.scale.value.shape[0]:
        raise ShapeError(
            "block built for %d channels, got %d"
            % (block.norm1.scale.value.shape[0], x.data.shape[-1])
        )
    return block.forward(x, drop_rng)


def _make_mixer(kind, dim, extent, cfg, rng, dtype):
    if kind == "df":
        return DynamicFilter(dim, extent, extent, rng, cfg.n_filters,
                             cfg.routeing_ratio, dtype=dtype)
    if kind == "gf":
        return GlobalFilter(dim, extent, extent, rng, dtype=dtype)
    if kind == "sepconv":
        return SepConv(dim, rng, dtype=dtype)
    if kind == "attention":
        return AttentionMixer(dim, max(1, dim // 32), rng, dtype)
    raise BuildError("unknown mixer kind %r" % (kind,))


class MetaFormer(Module):
    def __init__(self, cfg, rng, dtype=np.float64):
        total_blocks = sum(s.depth for s in cfg.stages)
        rates = np.linspace(0.0, cfg.drop_path_rate, total_blocks)
        self.cfg = cfg
        self.downsamplers = []
        self.stages = []
        cin = 3
        k = 0
        for i, st in enumerate(cfg.stages):
            extent_in = cfg.input_size if i == 0 else cfg.stage_extent(i - 1)
            out = (extent_in + 2 * st.down_pad - st.down_kernel) \
                // st.down_stride + 1
            if out != cfg.stage_extent(i):
                raise BuildError(
                    "stage %d downsampling (%d,%d,%d) maps extent %d to %d, "
                    "expected %d" % (i, st.down_kernel, st.down_stride,
                                     st.down_pad, extent_in, out,
                                     cfg.stage_extent(i))
                )
            self.downsamplers.append(
                Downsampling(cin, st.width, st.down_kernel, st.down_stride,
                             st.down_pad, rng, pre_norm=(i > 0), dtype=dtype)
            )
            blocks = []
            for _ in range(st.depth):
                mixer = _make_mixer(st.mixer, st.width, cfg.stage_extent(i),
                                    cfg, rng, dtype)
                blocks.append(
                    MetaFormerBlock(st.width, mixer, cfg.mlp_ratio,
                                    st.res_scale, float(rates[k]), rng, dtype)
                )
                k += 1
            self.stages.append(blocks)
            cin = st.width
        self.norm = LayerNorm(cin, dtype=dtype)
        self.head = MlpHead(cin, cfg.num_classes, rng, cfg.mlp_ratio, dtype)
        self.assign_names()

    def forward(self, images, tape, drop_rng=None, captures=None):
        s = self.cfg.input_size
        if images.ndim != 4 or images.shape[1:] != (s, s, 3):
            raise ShapeError(
                "expected input [B,%d,%d,3], got %r" % (s, s, images.shape)
            )
        x = tape.const(np.ascontiguousarray(images))
        for i, (down, blocks) in enumerate(zip(self.downsamplers, self.stages)):
            x = down(x)
            if captures is not None:
                captures.append(("down.%d" % i, x.data))
            for j, blk in enumerate(blocks):
                x = blk.forward(x, drop_rng, captures,
                                "stage%d.block%d" % (i, j))
        return self.head(self.norm(global_avg_pool(x)))

    def logits(self, images):
        """Forward without gradient recording."""
        return self.forward(images, Tape(record=False)).data


def build_model(cfg, rng, dtype=np.float64):
    return MetaFormer(cfg, rng, dtype)


def count_params(model):
    return sum(p.numel() for p in model.parameters())


# ---------------------------------------------------------------------------
# registry

_SIZES = {
    "s18": ((3, 3, 9, 3), (64, 128, 320, 512), 0.2),
    "s36": ((3, 12, 18, 3), (64, 128, 320, 512), 0.3),
    "m36": ((3, 12, 18, 3), (96, 192, 384, 576), 0.4),
    "b36": ((3, 12, 18, 3), (128, 256, 512, 768), 0.6),
}

_FAMILIES = {
    "dfformer": ("df", "df", "df", "df"),
    "cdfformer": ("sepconv", "sepconv", "df", "df"),
    "gfformer": ("gf", "gf", "gf", "gf"),
}

# Desk-scale configs for tests and benchmarks; not drawn from any table.
_NANO = ((1, 1, 2, 1), (16, 32, 64, 128))

_NANO_FAMILIES = {
    "nano-df": ("df", "df", "df", "df"),
    "nano-gf": ("gf", "gf", "gf", "gf"),
    "nano-cf": ("sepconv", "sepconv", "df", "df"),
    "nano-conv": ("sepconv", "sepconv", "sepconv", "sepconv"),
    "nano-attn": ("attention", "attention", "attention", "attention"),
}

_DOWN_GEOM = ((7, 4, 2), (3, 2, 1), (3, 2, 1), (3, 2, 1))


def _assemble(mixers, depths, widths, input_size, num_classes, drop_path,
              n_filters, name):
    placement_known = tuple(mixers) in _FAMILIES.values()
    if placement_known:
        # DF families put the dynamic filter in the last two stages at least;
        # the conv-hybrid never puts it in the first two.
        assert mixers[2:] == ("df", "df") or mixers == ("gf",) * 4
    stages = [
        StageConfig(depths[i], widths[i], mixers[i], *_DOWN_GEOM[i],
                    res_scale=(i >= 2))
        for i in range(4)
    ]
    return ModelConfig(stages, input_size, num_classes,
                       n_filters=n_filters, drop_path_rate=drop_path,
                       name=name)


def registry_names():
    full = ["%s-%s" % (f, s) for f in _FAMILIES for s in _SIZES]
    return full + list(_NANO_FAMILIES)


def get_config(name, input_size=None, num_classes=None, n_filters=4,
               drop_path=None):
    """Look up a named model; input extent and class count may override."""
    if name in _NANO_FAMILIES:
        depths, widths = _NANO
        mixers = _NANO_FAMILIES[name]
        dp = 0.0 if drop_path is None else drop_path
        return _assemble(mixers, depths, widths, input_size or 32,
                         num_classes or 4, dp, n_filters, name)
    parts = name.rsplit("-", 1)
    if len(parts) == 2 and parts[0] in _FAMILIES and parts[1] in _SIZES:
        depths, widths, dp = _SIZES[parts[1]]
        if drop_path is not None:
            dp = drop_path
        return _assemble(_FAMILIES[parts[0]], depths, widths,
                         input_size or 224, num_classes or 1000, dp,
                         n_filters, name)
    raise BuildError(
        "unknown model %r; known: %s" % (name, ", ".join(registry_names()))
    )


# ---------------------------------------------------------------------------
# analytic cost accounting (multiply-accumulates per sample)

FFT_MACS_PER_CHANNEL = 2.5  # coefficient of HW log2(HW), per direction


def _fft_macs(extent, channels):
    hw = extent * extent
    return FFT_MACS_PER_CHANNEL * hw * math.log2(hw) * channels


def mixer_macs(kind, dim, extent, cfg):
    hw = extent * extent
    med = 2 * dim
    pw = hw * dim * med * 2  # pw1 and pw2
    if kind == "sepconv":
        return {"conv": pw + hw * med * 49, "fft": 0.0}
    if kind == "attention":
        qkv_proj = hw * dim * (3 * dim) + hw * dim * dim
        att = 2 * hw * hw * dim
        return {"conv": qkv_proj + att, "fft": 0.0}
    bins = extent * (extent // 2 + 1) * med
    fft = 2 * _fft_macs(extent, med)  # forward and inverse transforms
    gate = 4 * bins  # complex product, 4 real MACs per bin
    extra = 0.0
    if kind == "df":
        hidden = int(cfg.routeing_ratio * dim)
        extra = dim * hidden + hidden * cfg.n_filters * med  # routeing MLP
        gate += 2 * cfg.n_filters * bins  # basis combination
    return {"conv": pw + extra, "fft": fft + gate}


def count_flops(cfg, resolution=None):
    """Analytic MAC estimate per sample; returns (total, breakdown).

    Conventions: matmul/conv count K*K*Cin*Cout per output pixel; each FFT
    direction costs 2.5*HW*log2(HW) real MACs per channel; complex
    elementwise products cost 4 real MACs per spectral bin; normalizations
    and activations are free.
    """
    res = resolution or cfg.input_size
    if res % 32 != 0:
        raise BuildError("resolution %d is not a multiple of 32" % res)
    conv = 0.0
    fft = 0.0
    cin = 3
    for i, st in enumerate(cfg.stages):
        extent = res >> (2 + i)
        k = st.down_kernel
        conv += k * k * cin * st.width * extent * extent
        m = mixer_macs(st.mixer, st.width, extent, cfg)
        mlp = extent * extent * st.width * (cfg.mlp_ratio * st.width) * 2
        conv += st.depth * (m["conv"] + mlp)
        fft += st.depth * m["fft"]
        cin = st.width
    hidden = cfg.mlp_ratio * cin
    conv += cin * hidden + hidden * cfg.num_classes
    total = conv + fft
    return total, {"conv": conv, "fft": fft}


def spectral_term_macs(dim, extent, n_filters=4, routeing_ratio=0.25):
    """Analytic spectral cost of one dynamic-filter mixer at a given extent.

    This is the Theta(HW log HW) piece: both transforms plus the per-bin
    gating work; the pointwise convs around it scale as plain HW.
    """
    cfg = get_config("nano-df", n_filters=n_filters)
    cfg.routeing_ratio = routeing_ratio
    return mixer_macs("df", dim, extent, cfg)["fft"]
