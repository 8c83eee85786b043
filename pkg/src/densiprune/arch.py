"""Declarative network architectures and the density-driven resize transform.

An ArchSpec is an ordered list of layer entries plus an input shape; it is
the object the pruning engine rewrites between training rounds. Convolution
widths flagged prunable are rescaled by per-layer activation densities;
pooling and fully-connected layers are derived, never rescaled.
"""

from dataclasses import dataclass, replace

LAYER_KINDS = ("conv", "relu", "maxpool", "fc", "residual_block")


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    out_channels: int = 0      # conv / fc / residual_block (second conv)
    kernel: int = 3            # conv kernel or pool window
    stride: int = 1
    padding: int = 0
    prunable: bool = False
    measure_ae: bool = False   # relu only
    conv1_channels: int = 0    # residual_block only

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.prunable and self.kind not in ("conv", "residual_block"):
            raise ValueError(f"prunable flag on non-conv layer {self.kind!r}")
        if self.measure_ae and self.kind != "relu":
            raise ValueError("measure_ae flag only applies to relu layers")
        if self.kind in ("conv", "fc", "residual_block") and self.out_channels < 1:
            raise ValueError(f"{self.kind} needs out_channels >= 1")
        if self.kind == "residual_block" and self.conv1_channels < 1:
            raise ValueError("residual_block needs conv1_channels >= 1")


@dataclass(frozen=True)
class ResidualBlockSpec:
    """Resolved view of one residual block after shape propagation."""
    conv1_channels: int
    conv2_channels: int
    stride: int
    projection: bool


@dataclass(frozen=True)
class ArchSpec:
    layers: tuple
    input_shape: tuple      # (channels, height, width)
    num_classes: int
    name: str = "arch"

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if len(self.input_shape) != 3 or min(self.input_shape) < 1:
            raise ValueError(f"bad input_shape {self.input_shape}")
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")
        _check_measure_pairing(self.layers)

    def prunable_sizes(self):
        """Widths of prunable convolutions, in slot order.

        A residual block contributes two slots: its first conv then its
        second; a plain prunable conv contributes one.
        """
        sizes = []
        for spec in self.layers:
            if spec.kind == "conv" and spec.prunable:
                sizes.append(spec.out_channels)
            elif spec.kind == "residual_block" and spec.prunable:
                sizes.append(spec.conv1_channels)
                sizes.append(spec.out_channels)
        return sizes


def _check_measure_pairing(layers):
    """Every prunable plain conv is immediately followed by a measured relu,
    and measured relus appear nowhere else."""
    for i, spec in enumerate(layers):
        if spec.kind == "conv" and spec.prunable:
            nxt = layers[i + 1] if i + 1 < len(layers) else None
            if nxt is None or nxt.kind != "relu" or not nxt.measure_ae:
                raise ValueError(
                    f"prunable conv at position {i} must be followed by a measured relu")
        if spec.kind == "relu" and spec.measure_ae:
            prev = layers[i - 1] if i > 0 else None
            if prev is None or prev.kind != "conv" or not prev.prunable:
                raise ValueError(
                    f"measured relu at position {i} does not follow a prunable conv")


def conv_out(size, kernel, stride, pad):
    span = size + 2 * pad - kernel
    if span < 0:
        return 0
    return span // stride + 1


def propagate_shapes(arch):
    """Per-layer ((in_c, in_h, in_w), (out_c, out_h, out_w)) pairs.

    Raises ValueError on spatial collapse or a channel mismatch. Pooling and
    relu inherit the channel count; fc flattens whatever reaches it.
    """
    shapes = []
    c, h, w = arch.input_shape
    for i, spec in enumerate(arch.layers):
        in_shape = (c, h, w)
        if spec.kind == "conv":
            oh = conv_out(h, spec.kernel, spec.stride, spec.padding)
            ow = conv_out(w, spec.kernel, spec.stride, spec.padding)
            if oh < 1 or ow < 1:
                raise ValueError(
                    f"layer {i} ({arch.name}): conv collapses {h}x{w} to {oh}x{ow}")
            c, h, w = spec.out_channels, oh, ow
        elif spec.kind == "relu":
            pass
        elif spec.kind == "maxpool":
            oh = conv_out(h, spec.kernel, spec.stride, 0)
            ow = conv_out(w, spec.kernel, spec.stride, 0)
            if oh < 1 or ow < 1:
                raise ValueError(
                    f"layer {i} ({arch.name}): pool window {spec.kernel} exceeds {h}x{w}")
            h, w = oh, ow
        elif spec.kind == "fc":
            c, h, w = spec.out_channels, 1, 1
        elif spec.kind == "residual_block":
            oh = conv_out(h, 3, spec.stride, 1)
            ow = conv_out(w, 3, spec.stride, 1)
            if oh < 1 or ow < 1:
                raise ValueError(
                    f"layer {i} ({arch.name}): residual block collapses {h}x{w}")
            c, h, w = spec.out_channels, oh, ow
        shapes.append((in_shape, (c, h, w)))
    return shapes


def residual_block_spec(in_channels, spec):
    """Resolve a residual_block entry against its input channel count."""
    projection = in_channels != spec.out_channels or spec.stride != 1
    return ResidualBlockSpec(spec.conv1_channels, spec.out_channels,
                             spec.stride, projection)


def _scaled_width(old, fraction):
    # Nearest integer, half away from zero, clamped so no layer disappears.
    return max(1, int(fraction * old + 0.5))


def resize_arch(arch, densities, name=None):
    """Rescale every prunable width by its activation density.

    new_width = max(1, round(density * old_width)). Projection flags and all
    derived shapes are recomputed by the next propagation; nothing else in
    the architecture changes.
    """
    densities = list(densities)
    n_slots = len(arch.prunable_sizes())
    if len(densities) != n_slots:
        raise ValueError(
            f"expected {n_slots} density values, got {len(densities)}")
    for d in densities:
        if not 0.0 <= d <= 1.0:
            raise ValueError(f"density {d} outside [0, 1]")
    it = iter(densities)
    new_layers = []
    for spec in arch.layers:
        if spec.kind == "conv" and spec.prunable:
            new_layers.append(replace(spec, out_channels=_scaled_width(spec.out_channels, next(it))))
        elif spec.kind == "residual_block" and spec.prunable:
            c1 = _scaled_width(spec.conv1_channels, next(it))
            c2 = _scaled_width(spec.out_channels, next(it))
            new_layers.append(replace(spec, conv1_channels=c1, out_channels=c2))
        else:
            new_layers.append(spec)
    return ArchSpec(tuple(new_layers), arch.input_shape, arch.num_classes,
                    name if name is not None else arch.name)


def _conv_relu(channels):
    return [LayerSpec("conv", channels, kernel=3, stride=1, padding=1, prunable=True),
            LayerSpec("relu", measure_ae=True)]


def vgg_arch(name, conv_channels, pool_after, input_shape, num_classes):
    """Sequential conv/relu stack with 2x2 pools after the listed conv counts."""
    layers = []
    pool_after = set(pool_after)
    for i, ch in enumerate(conv_channels, start=1):
        layers += _conv_relu(ch)
        if i in pool_after:
            layers.append(LayerSpec("maxpool", kernel=2, stride=2))
    layers.append(LayerSpec("fc", num_classes))
    return ArchSpec(tuple(layers), tuple(input_shape), num_classes, name)


def resnet_arch(name, stem_channels, block_channels, block_strides,
                input_shape, num_classes):
    """Conv stem plus residual blocks, final spatial pool, classifier.

    block_channels is a list of (conv1, conv2) pairs; the pool window is
    sized to whatever spatial extent remains so the classifier always sees
    one value per channel.
    """
    layers = _conv_relu(stem_channels)
    for (c1, c2), s in zip(block_channels, block_strides):
        layers.append(LayerSpec("residual_block", out_channels=c2, stride=s,
                                prunable=True, conv1_channels=c1))
    partial = ArchSpec(tuple(layers), tuple(input_shape), num_classes, name)
    final = propagate_shapes(partial)[-1][1]
    if final[1] > 1:
        layers.append(LayerSpec("maxpool", kernel=final[1], stride=final[1]))
    layers.append(LayerSpec("fc", num_classes))
    return ArchSpec(tuple(layers), tuple(input_shape), num_classes, name)


VGG19_CHANNELS = (64, 64, 128, 128, 256, 256, 256, 256,
                  512, 512, 512, 512, 512, 512, 512, 512)
VGG19_POOL_AFTER = (2, 4, 8, 12, 16)
VGG_LITE_CHANNELS = (32, 32, 64, 64, 128, 128)
VGG_LITE_POOL_AFTER = (2, 4, 6)

RESNET18_STEM = 64
RESNET18_BLOCKS = ((64, 64), (64, 64), (128, 128), (128, 128),
                   (256, 256), (256, 256), (512, 512), (512, 512))
RESNET18_STRIDES = (1, 1, 2, 1, 2, 1, 2, 1)
RESNET_LITE_STEM = 16
RESNET_LITE_BLOCKS = ((16, 16), (32, 32), (64, 64))
RESNET_LITE_STRIDES = (1, 2, 2)


def channels_to_arch(family, channels, input_shape, num_classes, name=None):
    """Build an ArchSpec of a known family from a flat prunable-width list.

    For vgg families the list maps one-to-one onto the convs; for resnet
    families the first entry is the stem and the rest pair up into blocks.
    """
    channels = list(channels)
    if family in ("vgg19", "vgg-lite"):
        pool_after = VGG19_POOL_AFTER if family == "vgg19" else VGG_LITE_POOL_AFTER
        expected = 16 if family == "vgg19" else 6
        if len(channels) != expected:
            raise ValueError(f"{family} takes {expected} widths, got {len(channels)}")
        return vgg_arch(name or family, channels, pool_after, input_shape, num_classes)
    if family in ("resnet18", "resnet-lite"):
        strides = RESNET18_STRIDES if family == "resnet18" else RESNET_LITE_STRIDES
        expected = 1 + 2 * len(strides)
        if len(channels) != expected:
            raise ValueError(f"{family} takes {expected} widths, got {len(channels)}")
        blocks = [(channels[1 + 2 * i], channels[2 + 2 * i]) for i in range(len(strides))]
        return resnet_arch(name or family, channels[0], blocks, strides,
                           input_shape, num_classes)
    raise ValueError(f"unknown architecture family {family!r}")


def builtin_arch(name, input_shape=(3, 32, 32), num_classes=10):
    """Canonical architectures by name: vgg19, resnet18, vgg-lite, resnet-lite."""
    if name == "vgg19":
        return channels_to_arch("vgg19", VGG19_CHANNELS, input_shape, num_classes)
    if name == "vgg-lite":
        return channels_to_arch("vgg-lite", VGG_LITE_CHANNELS, input_shape, num_classes)
    if name == "resnet18":
        widths = [RESNET18_STEM] + [c for pair in RESNET18_BLOCKS for c in pair]
        return channels_to_arch("resnet18", widths, input_shape, num_classes)
    if name == "resnet-lite":
        widths = [RESNET_LITE_STEM] + [c for pair in RESNET_LITE_BLOCKS for c in pair]
        return channels_to_arch("resnet-lite", widths, input_shape, num_classes)
    raise ValueError(f"unknown architecture {name!r}; "
                     "expected one of vgg19, resnet18, vgg-lite, resnet-lite")


# ---------------------------------------------------------------------------
# Architecture file format: line-oriented text, one layer per line.
#
#   name <string>
#   input <channels>x<height>x<width>
#   classes <int>
#   conv <out> k<kernel> s<stride> p<pad> [prunable]
#   relu [measured]
#   maxpool <window> [s<stride>]
#   resblock <conv1> <conv2> [s<stride>] [prunable]
#   fc <out>
# ---------------------------------------------------------------------------

def format_arch(arch):
    lines = [f"name {arch.name}",
             "input {}x{}x{}".format(*arch.input_shape),
             f"classes {arch.num_classes}"]
    for spec in arch.layers:
        if spec.kind == "conv":
            line = f"conv {spec.out_channels} k{spec.kernel} s{spec.stride} p{spec.padding}"
            if spec.prunable:
                line += " prunable"
        elif spec.kind == "relu":
            line = "relu measured" if spec.measure_ae else "relu"
        elif spec.kind == "maxpool":
            line = f"maxpool {spec.kernel} s{spec.stride}"
        elif spec.kind == "fc":
            line = f"fc {spec.out_channels}"
        else:
            line = f"resblock {spec.conv1_channels} {spec.out_channels} s{spec.stride}"
            if spec.prunable:
                line += " prunable"
        lines.append(line)
    return "\n".join(lines) + "\n"


def parse_arch(text, default_name="arch"):
    name = default_name
    input_shape = None
    num_classes = None
    layers = []

    def fail(lineno, msg):
        raise ValueError(f"architecture line {lineno}: {msg}")

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        head, rest = tokens[0], tokens[1:]
        flags = {t for t in rest if t in ("prunable", "measured")}
        args = [t for t in rest if t not in flags]
        try:
            if head == "name":
                name = args[0]
            elif head == "input":
                parts = [int(v) for v in args[0].split("x")]
                if len(parts) != 3:
                    fail(lineno, f"input needs CxHxW, got {args[0]!r}")
                input_shape = tuple(parts)
            elif head == "classes":
                num_classes = int(args[0])
            elif head == "conv":
                opts = _parse_opts(args[1:], {"k": 3, "s": 1, "p": 1})
                layers.append(LayerSpec("conv", int(args[0]), kernel=opts["k"],
                                        stride=opts["s"], padding=opts["p"],
                                        prunable="prunable" in flags))
            elif head == "relu":
                layers.append(LayerSpec("relu", measure_ae="measured" in flags))
            elif head == "maxpool":
                opts = _parse_opts(args[1:], {"s": int(args[0])})
                layers.append(LayerSpec("maxpool", kernel=int(args[0]), stride=opts["s"]))
            elif head == "fc":
                layers.append(LayerSpec("fc", int(args[0])))
            elif head == "resblock":
                opts = _parse_opts(args[2:], {"s": 1})
                layers.append(LayerSpec("residual_block", int(args[1]),
                                        stride=opts["s"], prunable="prunable" in flags,
                                        conv1_channels=int(args[0])))
            else:
                fail(lineno, f"unknown directive {head!r}")
        except (IndexError, ValueError) as exc:
            if "architecture line" in str(exc):
                raise
            fail(lineno, f"cannot parse {line!r} ({exc})")
    if input_shape is None or num_classes is None:
        raise ValueError("architecture file must declare 'input' and 'classes'")
    arch = ArchSpec(tuple(layers), input_shape, num_classes, name)
    propagate_shapes(arch)
    return arch


def _parse_opts(tokens, defaults):
    opts = dict(defaults)
    for tok in tokens:
        key, value = tok[0], tok[1:]
        if key not in opts or not value.lstrip("-").isdigit():
            raise ValueError(f"bad option {tok!r}")
        opts[key] = int(value)
    return opts


def load_arch(path):
    from pathlib import Path
    p = Path(path)
    return parse_arch(p.read_text(), default_name=p.stem)


def save_arch(arch, path):
    from pathlib import Path
    Path(path).write_text(format_arch(arch))
