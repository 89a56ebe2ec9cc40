"""
The multi-scale sub-network: layers of DSDF blocks over four resolution
scales (scale 1 is the finest, each next scale halves H and W).

Wiring for N = 6 layers: layers 1, 2, 4, 6 run the outer pairs (1,2) and
(3,4); layers 3 and 5 run the middle pair (2,3). Between layers there is one
running state tensor per scale. After the last layer the states are scaled by
w and added to the sub-network inputs.
"""

from dataclasses import dataclass, replace

from . import ops
from .dsdf import DsdfConfig, dsdf_forward, dsdf_param_shapes
from .errors import ConfigError, ShapeError

OUTER_PAIRS = ((1, 2), (3, 4))
MIDDLE_PAIRS = ((2, 3),)
PAIR_ORDER = ((1, 2), (2, 3), (3, 4))
VARIANTS = ("full", "no_subnet", "subset", "no_cross_23", "no_scaling")


def default_layers(n_layers=6):
    """outer, (outer, middle) repeated, outer."""
    if n_layers < 2 or n_layers % 2:
        raise ConfigError(f"the sub-network needs an even number of layers >= 2, got {n_layers}")
    kinds = [OUTER_PAIRS] + [OUTER_PAIRS, MIDDLE_PAIRS] * ((n_layers - 2) // 2) + [OUTER_PAIRS]
    return tuple((i + 1, pairs) for i, pairs in enumerate(kinds))


@dataclass(frozen=True)
class MsrfWiring:
    layers: tuple = default_layers()
    growth: tuple = (16, 32, 64)
    w: float = 0.4
    scaled: bool = True
    bypass: bool = False

    @property
    def n_layers(self):
        return len(self.layers)

    def growth_for(self, pair):
        return self.growth[PAIR_ORDER.index(pair)]

    @property
    def effective_w(self):
        return self.w if self.scaled else 1.0

    def validate(self):
        if len(self.growth) != len(PAIR_ORDER):
            raise ConfigError(f"growth needs one factor per scale pair, got {self.growth}")
        if not 0.0 <= self.w <= 1.0:
            raise ConfigError(f"residual scale w must be in [0, 1], got {self.w}")
        for index, pairs in self.layers:
            for p, q in pairs:
                if not {p, q} <= {1, 2, 3, 4} or q - p != 1:
                    raise ConfigError(f"layer {index}: invalid scale pair ({p}, {q})")
        return self


def msrf_ablation_variants(wiring, variant):
    if variant == "full":
        return wiring
    if variant == "no_subnet":
        return replace(wiring, bypass=True)
    if variant == "subset":
        return replace(wiring, layers=wiring.layers[:3])
    if variant == "no_cross_23":
        return replace(
            wiring, layers=tuple(layer for layer in wiring.layers if layer[1] != MIDDLE_PAIRS)
        )
    if variant == "no_scaling":
        return replace(wiring, scaled=False)
    raise ConfigError(f"unknown sub-network variant '{variant}', expected one of {VARIANTS}")


def _block_config(wiring, channels, pair, slope):
    p, q = pair
    return DsdfConfig(
        ch_high=channels[p - 1],
        ch_low=channels[q - 1],
        k=wiring.growth_for(pair),
        w=wiring.effective_w,
        slope=slope,
    )


def msrf_param_shapes(wiring, channels, prefix="msrf"):
    wiring.validate()
    if wiring.bypass:
        return []
    shapes = []
    for index, pairs in wiring.layers:
        for pair in pairs:
            cfg = _block_config(wiring, channels, pair, 0.01)
            shapes += dsdf_param_shapes(cfg, prefix=f"{prefix}.l{index}.s{pair[0]}{pair[1]}")
    return shapes


def check_pyramid(op, xs):
    if len(xs) != 4:
        raise ShapeError(op, "scales", 4, len(xs))
    for s in range(1, 4):
        for axis, dim in ((2, "H"), (3, "W")):
            if xs[s - 1].shape[axis] != 2 * xs[s].shape[axis]:
                raise ShapeError(
                    op, f"{dim} at scale {s + 1}", xs[s - 1].shape[axis] // 2, xs[s].shape[axis]
                )


def msrf_forward(xs, params, wiring, slope=0.01, prefix="msrf"):
    wiring.validate()
    check_pyramid("msrf_forward", xs)
    if wiring.bypass:
        return list(xs)
    channels = [x.shape[1] for x in xs]
    state = list(xs)
    for index, pairs in wiring.layers:
        updated = list(state)
        for p, q in pairs:
            cfg = _block_config(wiring, channels, (p, q), slope)
            updated[p - 1], updated[q - 1] = dsdf_forward(
                state[p - 1], state[q - 1], params, cfg, prefix=f"{prefix}.l{index}.s{p}{q}"
            )
        state = updated
    return [ops.add_scaled(x0, x, wiring.effective_w) for x0, x in zip(xs, state)]
