"""
Named collection of trainable tensors addressed by hierarchical keys such as
"enc1.conv1.w".
"""

import numpy as np

from .errors import CheckpointError
from .tensor import Tensor, get_default_dtype


def glorot_limit(shape):
    receptive = int(np.prod(shape[2:])) if len(shape) > 2 else 1
    return np.sqrt(6.0 / ((shape[0] + shape[1]) * receptive))


class ParamStore:
    def __init__(self):
        self._tensors = {}

    @classmethod
    def from_shapes(cls, shapes, seed, dtype=None):
        """
        Glorot-uniform weights and zero biases, drawn in the order of `shapes`
        from one seeded generator.
        """
        dtype = dtype or get_default_dtype()
        rng = np.random.default_rng(seed)
        store = cls()
        for name, shape in shapes:
            if len(shape) == 1:
                data = np.zeros(shape, dtype=dtype)
            else:
                limit = glorot_limit(shape)
                data = rng.uniform(-limit, limit, size=shape).astype(dtype)
            store.add(name, data)
        return store

    @classmethod
    def from_arrays(cls, arrays, dtype=None):
        store = cls()
        for name, data in arrays.items():
            store.add(name, np.asarray(data, dtype=dtype or get_default_dtype()))
        return store

    def add(self, name, data):
        if name in self._tensors:
            raise ValueError(f"Parameter {name} already exists in this store.")
        self._tensors[name] = Tensor(data, requires_grad=True, name=name)

    def __getitem__(self, name):
        try:
            return self._tensors[name]
        except KeyError:
            raise KeyError(f"Requested parameter: {name} does not exist") from None

    def __contains__(self, name):
        return name in self._tensors

    def __iter__(self):
        return iter(self._tensors)

    def __len__(self):
        return len(self._tensors)

    def names(self):
        return list(self._tensors)

    def items(self):
        return self._tensors.items()

    def shapes(self):
        return [(name, t.shape) for name, t in self._tensors.items()]

    def num_elements(self):
        return sum(t.size for t in self._tensors.values())

    def arrays(self):
        return {name: t.data.copy() for name, t in self._tensors.items()}

    def check_shapes(self, shapes):
        """Raise CheckpointError unless the store holds exactly `shapes`."""
        expected = dict(shapes)
        missing = [name for name in expected if name not in self._tensors]
        if missing:
            raise CheckpointError(f"missing parameter(s): {', '.join(missing[:5])}")
        extra = [name for name in self._tensors if name not in expected]
        if extra:
            raise CheckpointError(f"unexpected parameter(s): {', '.join(extra[:5])}")
        for name, shape in expected.items():
            got = self._tensors[name].shape
            if tuple(got) != tuple(shape):
                raise CheckpointError(
                    f"parameter {name} has shape {list(got)}, config expects {list(shape)}"
                )
