#!/usr/bin/env python3
"""
Tests for the multi-scale sub-network wiring.
"""

from dataclasses import replace

import numpy as np
import pytest

from msrfnet.errors import ConfigError, ShapeError
from msrfnet.params import ParamStore
from msrfnet.subnet import (
    MIDDLE_PAIRS,
    OUTER_PAIRS,
    MsrfWiring,
    default_layers,
    msrf_ablation_variants,
    msrf_forward,
    msrf_param_shapes,
)
from msrfnet.tensor import Tensor

CHANNELS = (4, 8, 8, 16)
SMALL = MsrfWiring(growth=(4, 4, 4))


def pyramid(rng, size=16, channels=CHANNELS):
    return [
        Tensor(rng.normal(size=(1, c, size >> s, size >> s))) for s, c in enumerate(channels)
    ]


def params_for(wiring, seed=0):
    return ParamStore.from_shapes(msrf_param_shapes(wiring, CHANNELS), seed)


def test_default_wiring():
    layers = dict(default_layers(6))
    for index in (1, 2, 4, 6):
        assert layers[index] == OUTER_PAIRS
    for index in (3, 5):
        assert layers[index] == MIDDLE_PAIRS
    with pytest.raises(ConfigError):
        default_layers(5)


def test_growth_per_pair():
    wiring = MsrfWiring()
    assert [wiring.growth_for(p) for p in ((1, 2), (2, 3), (3, 4))] == [16, 32, 64]


def test_identity_at_zero_w(rng):
    wiring = replace(SMALL, w=0.0)
    xs = pyramid(rng)
    for x, out in zip(xs, msrf_forward(xs, params_for(wiring), wiring)):
        assert np.array_equal(out.data, x.data)


def test_shapes_are_preserved(rng):
    xs = [
        Tensor(rng.normal(size=shape))
        for shape in ((1, 8, 64, 64), (1, 16, 32, 32), (1, 32, 16, 16), (1, 64, 8, 8))
    ]
    wiring = MsrfWiring(growth=(4, 4, 4))
    params = ParamStore.from_shapes(msrf_param_shapes(wiring, (8, 16, 32, 64)), 1)
    outputs = msrf_forward(xs, params, wiring)
    assert [o.shape for o in outputs] == [x.shape for x in xs]


def _perturbed_diffs(rng, wiring, scale):
    params = params_for(wiring, seed=2)
    xs = pyramid(rng)
    base = msrf_forward(xs, params, wiring)
    bumped = [x.data.copy() for x in xs]
    bumped[scale - 1][0, 0, 0, 0] += 1.0
    out = msrf_forward([Tensor(b) for b in bumped], params, wiring)
    return [not np.array_equal(a.data, b.data) for a, b in zip(base, out)]


@pytest.mark.parametrize("scale", [1, 2, 3, 4])
def test_every_scale_reaches_all_outputs_after_four_layers(rng, scale):
    wiring = replace(SMALL, layers=SMALL.layers[:4])
    assert _perturbed_diffs(rng, wiring, scale) == [True, True, True, True]


def test_scale_one_cannot_reach_scales_three_and_four_after_two_layers(rng):
    wiring = replace(SMALL, layers=SMALL.layers[:2])
    assert _perturbed_diffs(rng, wiring, 1) == [True, True, False, False]


def test_variants(rng):
    xs = pyramid(rng)
    bypass = msrf_ablation_variants(SMALL, "no_subnet")
    assert msrf_param_shapes(bypass, CHANNELS) == []
    for x, out in zip(xs, msrf_forward(xs, ParamStore(), bypass)):
        assert out is x
    assert msrf_ablation_variants(SMALL, "no_cross_23").n_layers == 4
    assert all(
        pairs == OUTER_PAIRS for _, pairs in msrf_ablation_variants(SMALL, "no_cross_23").layers
    )
    assert msrf_ablation_variants(SMALL, "subset").n_layers == 3
    assert msrf_ablation_variants(replace(SMALL, w=0.4), "no_scaling").effective_w == 1.0
    assert msrf_ablation_variants(SMALL, "full") == SMALL
    with pytest.raises(ConfigError, match="unknown"):
        msrf_ablation_variants(SMALL, "half")


def test_every_block_has_its_own_parameters():
    names = [name for name, _ in msrf_param_shapes(SMALL, CHANNELS)]
    assert len(names) == len(set(names))
    blocks = {name.split(".")[1] + "." + name.split(".")[2] for name in names}
    assert len(blocks) == 10


def test_pyramid_errors(rng):
    xs = pyramid(rng)
    with pytest.raises(ShapeError):
        msrf_forward(xs[:3], params_for(SMALL), SMALL)
    xs[2] = Tensor(np.zeros((1, 8, 3, 3)))
    with pytest.raises(ShapeError):
        msrf_forward(xs, params_for(SMALL), SMALL)
