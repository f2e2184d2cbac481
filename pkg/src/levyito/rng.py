"""Counter-based random streams.

A draw is addressed by ``(seed, stream index, substream, counter)`` and is
the ``counter``-th raw output of ``numpy.random.Philox`` keyed by
``(seed, stream index)`` with its counter origin at ``(0, substream, 0, 0)``.
Because draws are addressed rather than consumed from shared state, any
number of replicates can be generated in one vectorized call and each
replicate's numbers do not depend on how the batch was sliced.

Stream indices pack ``(replicate, component)`` as ``replicate << 4 | component``.
"""
from dataclasses import dataclass

import numpy as np

from . import _kernels

GAUSSIAN = 0
LARGE_JUMPS = 1
SMALL_JUMPS = 2
AUXILIARY = 3
_COMPONENT_BITS = 4
_U64 = 1 << 64
_TWO_PI = 2.0 * np.pi


def stream_index(replicate, component):
    """Stream index for ``component`` of replicate number ``replicate``."""
    if not 0 <= component < (1 << _COMPONENT_BITS):
        raise ValueError(f"component must be in [0, 16), got {component}")
    if replicate < 0 or replicate >= 1 << (64 - _COMPONENT_BITS):
        raise ValueError(f"replicate out of range: {replicate}")
    return (int(replicate) << _COMPONENT_BITS) | int(component)


def _check_u64(name, value):
    value = int(value)
    if not 0 <= value < _U64:
        raise ValueError(f"{name} must be an unsigned 64-bit integer, got {value}")
    return value


def bits_to_uniform(bits):
    """Map raw 64-bit words to doubles in [0, 1) using the top 53 bits."""
    return (np.asarray(bits, dtype=np.uint64) >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


def exponential(u, rate):
    """Inverse-CDF exponential variates ``-ln(1 - u) / rate`` for u in [0, 1)."""
    return -np.log1p(-u) / rate


def box_muller(u1, u2):
    """Standard normal variates from two uniform arrays (cosine branch)."""
    return np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(_TWO_PI * u2)


@dataclass(frozen=True)
class RngStream:
    """One reproducible uniform stream ``(seed, index, substream)``."""

    seed: int
    index: int
    substream: int = 0

    def __post_init__(self):
        object.__setattr__(self, "seed", _check_u64("seed", self.seed))
        object.__setattr__(self, "index", _check_u64("index", self.index))
        object.__setattr__(self, "substream", _check_u64("substream", self.substream))

    @classmethod
    def for_component(cls, seed, replicate, component, substream=0):
        return cls(seed, stream_index(replicate, component), substream)

    def sub(self, substream):
        return RngStream(self.seed, self.index, substream)

    def bits_at(self, counters):
        return _kernels.philox_bits(self.seed, np.uint64(self.index), np.uint64(self.substream), counters)

    def uniforms_at(self, counters):
        return bits_to_uniform(self.bits_at(np.asarray(counters, dtype=np.uint64)))

    def uniforms(self, count, start=0):
        return self.uniforms_at(np.arange(start, start + count, dtype=np.uint64))

    def numpy_generator(self):
        """An equivalent ``numpy.random.Generator`` (used as a test oracle)."""
        bg = np.random.Philox(
            key=np.array([self.seed, self.index], dtype=np.uint64),
            counter=np.array([0, self.substream, 0, 0], dtype=np.uint64),
        )
        return np.random.Generator(bg)


class StreamSet:
    """Streams for many replicates of one component, addressed row-wise."""

    def __init__(self, seed, replicates, component):
        self.seed = _check_u64("seed", seed)
        self.replicates = np.asarray(replicates, dtype=np.int64)
        self.component = component
        self.indices = (self.replicates.astype(np.uint64) << np.uint64(_COMPONENT_BITS)) | np.uint64(component)

    def __len__(self):
        return len(self.replicates)

    def uniforms(self, rows, sub, counters):
        """Uniforms for ``rows`` (indices into this set) at ``counters``."""
        return bits_to_uniform(
            _kernels.philox_bits(
                self.seed,
                self.indices[rows],
                np.asarray(sub, dtype=np.uint64),
                np.asarray(counters, dtype=np.uint64),
            )
        )
