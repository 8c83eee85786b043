"""ArchSpec validation, shape propagation, resize transform, builtins, files."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from densiprune.arch import (ArchSpec, LayerSpec, builtin_arch, channels_to_arch,
                             format_arch, parse_arch, propagate_shapes,
                             residual_block_spec, resize_arch)
from densiprune.costs import network_cost
from densiprune.network import instantiate

RESNET18_NET0 = (64, 64, 64, 64, 64, 128, 128, 128, 128,
                 256, 256, 256, 256, 512, 512, 512, 512)


def simple_arch(channels=(4, 8), input_shape=(3, 8, 8), num_classes=10):
    layers = []
    for ch in channels:
        layers.append(LayerSpec("conv", ch, kernel=3, stride=1, padding=1,
                                prunable=True))
        layers.append(LayerSpec("relu", measure_ae=True))
    layers.append(LayerSpec("maxpool", kernel=2, stride=2))
    layers.append(LayerSpec("fc", num_classes))
    return ArchSpec(tuple(layers), input_shape, num_classes, "simple")


class TestLayerSpecValidation:
    def test_prunable_requires_conv(self):
        with pytest.raises(ValueError, match="prunable"):
            LayerSpec("fc", 10, prunable=True)

    def test_measure_requires_relu(self):
        with pytest.raises(ValueError, match="measure_ae"):
            LayerSpec("conv", 8, measure_ae=True)

    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="kind"):
            LayerSpec("dropout")

    def test_measured_relu_must_follow_prunable_conv(self):
        with pytest.raises(ValueError, match="measured relu"):
            ArchSpec((LayerSpec("relu", measure_ae=True), LayerSpec("fc", 10)),
                     (1, 8, 8), 10)

    def test_prunable_conv_needs_measured_relu(self):
        with pytest.raises(ValueError, match="followed by a measured relu"):
            ArchSpec((LayerSpec("conv", 4, prunable=True), LayerSpec("fc", 10)),
                     (1, 8, 8), 10)


class TestPropagation:
    def test_pool_inherits_channels(self):
        layers = (
            LayerSpec("conv", 64, kernel=3, stride=1, padding=1),
            LayerSpec("maxpool", kernel=2, stride=2),
            LayerSpec("conv", 128, kernel=3, stride=1, padding=1),
        )
        arch = ArchSpec(layers, (3, 32, 32), 10)
        shapes = propagate_shapes(arch)
        assert shapes[1][1] == (64, 16, 16)      # pool out keeps 64 channels
        assert shapes[2][0][0] == 64             # second conv sees 64 in

    def test_vgg19_reaches_512x1x1_after_five_pools(self):
        arch = builtin_arch("vgg19", (3, 32, 32), 10)
        shapes = propagate_shapes(arch)
        fc_in = [s for spec, s in zip(arch.layers, shapes) if spec.kind == "fc"]
        assert fc_in[0][0] == (512, 1, 1)

    def test_spatial_collapse_is_an_error(self):
        layers = (LayerSpec("conv", 4, kernel=3, stride=2, padding=0),)
        arch = ArchSpec(layers, (1, 1, 1), 2)
        with pytest.raises(ValueError, match="collapses"):
            propagate_shapes(arch)

    def test_residual_projection_flag(self):
        spec = LayerSpec("residual_block", 16, stride=2, conv1_channels=8)
        assert residual_block_spec(8, spec).projection is True      # stride
        spec2 = LayerSpec("residual_block", 16, stride=1, conv1_channels=8)
        assert residual_block_spec(8, spec2).projection is True     # widths
        spec3 = LayerSpec("residual_block", 8, stride=1, conv1_channels=8)
        assert residual_block_spec(8, spec3).projection is False


class TestResize:
    def test_half_density_halves_64_channels(self):
        arch = simple_arch(channels=(64, 32))
        resized = resize_arch(arch, [0.5, 1.0])
        assert resized.prunable_sizes() == [32, 32]

    def test_all_ones_is_identity(self):
        arch = simple_arch(channels=(64, 32))
        assert resize_arch(arch, [1.0, 1.0]).prunable_sizes() == [64, 32]

    def test_tiny_density_clamps_to_one_channel(self):
        arch = simple_arch(channels=(10, 10))
        assert resize_arch(arch, [0.04, 0.0]).prunable_sizes() == [1, 1]

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError, match="density values"):
            resize_arch(simple_arch(), [0.5])

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError, match="outside"):
            resize_arch(simple_arch(), [0.5, 1.2])

    def test_residual_slots_resize_independently(self):
        arch = builtin_arch("resnet-lite", (3, 16, 16), 10)
        densities = [1.0] + [0.5, 1.0] * 3
        resized = resize_arch(arch, densities)
        assert resized.prunable_sizes() == [16, 8, 16, 16, 32, 32, 64]

    @given(st.lists(st.floats(0.0, 1.0), min_size=2, max_size=2),
           st.lists(st.floats(0.0, 1.0), min_size=2, max_size=2))
    @settings(max_examples=50, deadline=None)
    def test_monotone_in_density(self, lo, hi):
        arch = simple_arch(channels=(64, 48))
        a = [min(x, y) for x, y in zip(lo, hi)]
        b = [max(x, y) for x, y in zip(lo, hi)]
        sizes_a = resize_arch(arch, a).prunable_sizes()
        sizes_b = resize_arch(arch, b).prunable_sizes()
        assert all(x <= y for x, y in zip(sizes_a, sizes_b))

    @given(st.lists(st.floats(0.001, 1.0), min_size=2, max_size=2))
    @settings(max_examples=50, deadline=None)
    def test_resized_arch_always_propagates(self, densities):
        arch = simple_arch(channels=(64, 48))
        assert propagate_shapes(resize_arch(arch, densities))


class TestBuiltins:
    def test_vgg19_prunable_sizes(self):
        arch = builtin_arch("vgg19", (3, 32, 32), 10)
        assert arch.prunable_sizes() == [64, 64, 128, 128, 256, 256, 256, 256,
                                         512, 512, 512, 512, 512, 512, 512, 512]

    def test_resnet18_prunable_sizes(self):
        arch = builtin_arch("resnet18", (3, 32, 32), 10)
        sizes = arch.prunable_sizes()
        assert len(sizes) == 17
        assert sizes == list(RESNET18_NET0)
        assert sizes[:6] == [64, 64, 64, 64, 64, 128]

    def test_resnet18_has_17_prunable_convs_when_instantiated(self):
        model = instantiate(builtin_arch("resnet18", (3, 32, 32), 10), seed=0)
        assert model.num_measured() == 17

    def test_vgg_lite_layout(self):
        arch = builtin_arch("vgg-lite", (1, 28, 28), 10)
        assert arch.prunable_sizes() == [32, 32, 64, 64, 128, 128]
        pools = [s for s in arch.layers if s.kind == "maxpool"]
        assert len(pools) == 3

    def test_unknown_name(self):
        with pytest.raises(ValueError, match="unknown architecture"):
            builtin_arch("alexnet")

    def test_channels_to_arch_validates_length(self):
        with pytest.raises(ValueError, match="16 widths"):
            channels_to_arch("vgg19", [64] * 5, (3, 32, 32), 10)


class TestInstantiation:
    def test_same_seed_same_weights(self):
        arch = simple_arch()
        a = instantiate(arch, 42)
        b = instantiate(arch, 42)
        assert np.array_equal(a.flat_params(), b.flat_params())

    def test_different_seeds_differ(self):
        arch = simple_arch()
        a = instantiate(arch, 1)
        b = instantiate(arch, 2)
        assert not np.array_equal(a.flat_params(), b.flat_params())

    def test_param_count_matches_cost_model(self):
        for name, shape in [("vgg-lite", (1, 28, 28)), ("resnet-lite", (3, 16, 16)),
                            ("resnet18", (3, 32, 32))]:
            arch = builtin_arch(name, shape, 10)
            model = instantiate(arch, 0)
            report = network_cost(arch, include_bias=False)
            assert model.num_params(include_bias=False) == report.total_params
            report_b = network_cost(arch, include_bias=True)
            assert model.num_params(include_bias=True) == report_b.total_params

    def test_forward_shapes_follow_propagation(self):
        arch = builtin_arch("resnet-lite", (3, 16, 16), 7)
        model = instantiate(arch, 3)
        out = model.forward(np.zeros((2, 3, 16, 16), dtype=np.float32))
        assert out.shape == (2, 7)


class TestArchFiles:
    def test_roundtrip(self):
        arch = builtin_arch("resnet18", (3, 32, 32), 10)
        parsed = parse_arch(format_arch(arch))
        assert parsed.layers == arch.layers
        assert parsed.input_shape == arch.input_shape
        assert parsed.num_classes == arch.num_classes

    def test_parse_reports_line_numbers(self):
        with pytest.raises(ValueError, match="line 3"):
            parse_arch("input 1x8x8\nclasses 4\nwat 3\n")

    def test_parse_requires_input_and_classes(self):
        with pytest.raises(ValueError, match="input"):
            parse_arch("conv 8 k3 s1 p1\n")

    def test_comments_and_blanks_ignored(self):
        arch = parse_arch(
            "# header\nname t\ninput 1x8x8\nclasses 4\n\n"
            "conv 8 k3 s1 p1 prunable  # body\nrelu measured\nfc 4\n")
        assert arch.prunable_sizes() == [8]
