#!/usr/bin/env python3
"""
Tests for the assembled network: encoder, shape stream, decoder and heads.
"""

from dataclasses import replace

import numpy as np
import pytest

from msrfnet import network, ops
from msrfnet.blocks import clr, se_block
from msrfnet.config import ABLATION_PRESETS, apply_overrides
from msrfnet.errors import ConfigError, ShapeError
from msrfnet.gradcheck import gradcheck
from msrfnet.params import ParamStore
from msrfnet.tensor import Tensor


def build(net, seed=0):
    return ParamStore.from_shapes(network.network_param_shapes(net), seed)


def image(rng, net, n=1):
    return Tensor(rng.uniform(size=(n, net.in_channels, net.height, net.width)))


def test_encoder_shapes():
    net = network.MsrfNetConfig()
    params = ParamStore.from_shapes(network.encoder_param_shapes(net), 0)
    outputs = network.encoder_forward(Tensor(np.zeros((2, 1, 64, 64))), params, net)
    assert [o.shape for o in outputs] == [
        (2, 8, 64, 64),
        (2, 16, 32, 32),
        (2, 32, 16, 16),
        (2, 64, 8, 8),
    ]
    for o in outputs:
        np.testing.assert_array_equal(o.data, 0.0)


def test_encoder_matches_composition(rng, gradcheck_cfg):
    net = gradcheck_cfg.net
    params = ParamStore.from_shapes(network.encoder_param_shapes(net), 3)
    x = image(rng, net)
    outputs = network.encoder_forward(x, params, net)
    first = se_block(clr(clr(x, params, "enc1.clr1"), params, "enc1.clr2"), params, "enc1.se")
    np.testing.assert_array_equal(outputs[0].data, first.data)
    pooled = ops.maxpool2(first)
    second = se_block(clr(clr(pooled, params, "enc2.clr1"), params, "enc2.clr2"), params, "enc2.se")
    np.testing.assert_array_equal(outputs[1].data, second.data)


def test_sobel_of_constant_image_is_zero():
    out = network.sobel_magnitude(np.full((2, 1, 8, 8), 0.7))
    np.testing.assert_array_equal(out.data, 0.0)


def test_sobel_is_normalized(rng):
    out = network.sobel_magnitude(rng.uniform(size=(3, 1, 8, 8))).data
    assert out.shape == (3, 1, 8, 8)
    np.testing.assert_allclose(out.max(axis=(1, 2, 3)), 1.0)
    assert out.min() >= 0.0


def test_forward_contract(rng, gradcheck_cfg):
    net = gradcheck_cfg.net
    outputs = network.msrfnet_forward(image(rng, net, n=2), build(net), net)
    for out in outputs:
        assert out.shape == (2, 1, 16, 16)
        assert np.all((out.data > 0) & (out.data < 1))


@pytest.mark.parametrize("ablation", sorted(ABLATION_PRESETS))
def test_every_ablation_runs(rng, gradcheck_cfg, ablation):
    net = apply_overrides(gradcheck_cfg, {"ablation": ablation}).validate().net
    outputs = network.msrfnet_forward(image(rng, net), build(net), net, training=True, rng=rng)
    assert outputs.pred.shape == (1, 1, 16, 16)
    assert np.all((outputs.pred.data > 0) & (outputs.pred.data < 1))
    if ablation == "no_shape_stream":
        assert outputs.edge is None
    else:
        assert outputs.edge.shape == (1, 1, 16, 16)


def test_shape_stream_from_encoder(rng, gradcheck_cfg):
    net = replace(gradcheck_cfg.net, shape_stream_source="encoder")
    outputs = network.msrfnet_forward(image(rng, net), build(net), net)
    assert np.all((outputs.edge.data > 0) & (outputs.edge.data < 1))


def test_decoder_without_attention(rng, gradcheck_cfg):
    net = replace(gradcheck_cfg.net, decoder_attention=False)
    params = ParamStore.from_shapes(network.decoder_param_shapes("dec", 8, 16, net), 5)
    x = Tensor(rng.normal(size=(1, 8, 8, 8)))
    d = Tensor(rng.normal(size=(1, 16, 4, 4)))
    up = ops.conv_transpose2d(d, params["dec.up.w"], params["dec.up.b"])
    expected = clr(clr(ops.concat([x, up]), params, "dec.clr1"), params, "dec.clr2")
    out = network.decoder_block_forward(x, d, params, "dec", net)
    np.testing.assert_array_equal(out.data, expected.data)


def test_decoder_with_attention(rng, gradcheck_cfg):
    net = gradcheck_cfg.net
    params = ParamStore.from_shapes(network.decoder_param_shapes("dec", 8, 16, net), 6)
    x = Tensor(rng.normal(size=(1, 8, 8, 8)))
    d = Tensor(rng.normal(size=(1, 16, 4, 4)))
    out = network.decoder_block_forward(x, d, params, "dec", net)
    assert out.shape == (1, 8, 8, 8)
    assert params["dec.clr1.w"].shape == (8, 24, 3, 3)
    with pytest.raises(ShapeError):
        network.decoder_block_forward(x, Tensor(np.zeros((1, 16, 8, 8))), params, "dec", net)


def test_wrong_image_size(gradcheck_cfg):
    net = gradcheck_cfg.net
    with pytest.raises(ShapeError):
        network.msrfnet_forward(Tensor(np.zeros((1, 1, 32, 32))), build(net), net)


@pytest.mark.parametrize(
    "changes, message",
    [
        ({"height": 20}, "multiple of 8"),
        ({"widths": (8, 12, 32, 64)}, "divisible"),
        ({"widths": (8, 16, 32)}, "four"),
        ({"dropout": 1.0}, "dropout"),
        ({"subnet_variant": "tiny"}, "subnet_variant"),
        ({"loss_mode": "focal"}, "loss_mode"),
        ({"gamma": -1.0}, "gamma"),
        ({"w": 2.0}, "w must be"),
    ],
)
def test_config_validation(changes, message):
    with pytest.raises(ConfigError, match=message):
        replace(network.MsrfNetConfig(), **changes).validate()


def test_param_count_table(gradcheck_cfg):
    net = gradcheck_cfg.net
    table = network.param_count_table(net)
    assert table.equals(network.param_count_table(net))
    shapes = network.network_param_shapes(net)
    total = table.set_index("module").loc["total"]
    assert total["tensors"] == len(shapes)
    assert total["parameters"] == sum(int(np.prod(s)) for _, s in shapes)
    assert len({name for name, _ in shapes}) == len(shapes)
    assert {"enc1", "msrf", "shape", "dec2", "head"} <= set(table["module"])


def test_ablations_shrink_the_network(gradcheck_cfg):
    full = network.param_count_table(gradcheck_cfg.net).set_index("module")
    for ablation in ("no_subnet", "no_shape_stream", "no_decoder_attention", "subset"):
        net = apply_overrides(gradcheck_cfg, {"ablation": ablation}).net
        smaller = network.param_count_table(net).set_index("module")
        assert smaller.loc["total", "parameters"] < full.loc["total", "parameters"]


def test_end_to_end_gradients(gradcheck_cfg):
    report = gradcheck(gradcheck_cfg, n_params=25, tolerance=1e-4)
    assert len(report.entries) == 25
    assert report.passed, report.worst
