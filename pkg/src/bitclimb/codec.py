"""Bit-level weight representation.

Each network parameter is an integer multiple ``h * epsilon`` of a
discretization step, with ``h`` a signed n-bit multiplier stored as the
binary-reflected Gray code of its offset-binary image ``h + 2**(n-1)``.
Gray coding over the offset image makes every pair of grid-adjacent
weights (including -1 <-> 0) differ in exactly one stored bit, so the
single-flip neighborhood always contains both nearest grid values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

Coord = tuple
# Parameter coordinates:
#   ("w", layer, i, j)  weight from neuron i of layer-1 to neuron j of layer
#   ("r", i, j)         recurrent weight from hidden neuron i to hidden j
#   ("b", layer, j)     bias of neuron j of layer


@dataclass(frozen=True)
class WeightFormat:
    """Fixed-point weight format: n_bits per weight, grid step epsilon."""

    n_bits: int
    w_max: float

    def __post_init__(self):
        if not 2 <= self.n_bits <= 24:
            raise ValueError(f"n_bits must be in [2, 24], got {self.n_bits}")
        if self.w_max <= 0:
            raise ValueError(f"w_max must be positive, got {self.w_max}")

    @property
    def epsilon(self) -> float:
        return self.w_max / (2 ** (self.n_bits - 1) - 1)

    @property
    def h_min(self) -> int:
        return -(2 ** (self.n_bits - 1))

    @property
    def h_max(self) -> int:
        return 2 ** (self.n_bits - 1) - 1


def gray_encode(h: int, n: int) -> int:
    """Gray pattern (as an n-bit integer) of signed multiplier ``h``."""
    lo, hi = -(2 ** (n - 1)), 2 ** (n - 1) - 1
    if not lo <= h <= hi:
        raise ValueError(f"multiplier {h} outside [{lo}, {hi}] for n={n}")
    u = h + 2 ** (n - 1)
    return u ^ (u >> 1)


def gray_decode(pattern: int, n: int) -> int:
    """Inverse of :func:`gray_encode` on n-bit patterns."""
    if not 0 <= pattern < 2**n:
        raise ValueError(f"pattern {pattern} does not fit in {n} bits")
    u = pattern
    shift = 1
    while shift < n:
        u ^= u >> shift
        shift <<= 1
    return u - 2 ** (n - 1)


class Layout:
    """Bijection between parameter coordinates and bit-group indices.

    Order is layer-major, then destination neuron; within a destination
    neuron: incoming weights by source index, then (hidden layer only,
    when recurrent) recurrent weights by source index, then the bias.
    """

    def __init__(self, layer_sizes, recurrent: bool = False):
        layer_sizes = tuple(int(s) for s in layer_sizes)
        if len(layer_sizes) < 2 or any(s < 1 for s in layer_sizes):
            raise ValueError(f"bad layer sizes {layer_sizes}")
        if recurrent and len(layer_sizes) != 3:
            raise ValueError("recurrence requires exactly one hidden layer")
        self.layer_sizes = layer_sizes
        self.recurrent = recurrent
        coords = []
        for layer in range(1, len(layer_sizes)):
            for j in range(layer_sizes[layer]):
                for i in range(layer_sizes[layer - 1]):
                    coords.append(("w", layer, i, j))
                if recurrent and layer == 1:
                    for k in range(layer_sizes[1]):
                        coords.append(("r", k, j))
                coords.append(("b", layer, j))
        self.coords: list[Coord] = coords
        self.index: dict[Coord, int] = {c: n for n, c in enumerate(coords)}

    @property
    def n_weights(self) -> int:
        return len(self.coords)

    def coord_of(self, weight_index: int) -> Coord:
        return self.coords[weight_index]

    def index_of(self, coord: Coord) -> int:
        try:
            return self.index[coord]
        except KeyError:
            raise KeyError(f"unknown parameter coordinate {coord!r}") from None


@dataclass
class BitGenome:
    """All network parameters as Gray-coded bit groups.

    Within each group, bit position 0 is the most significant Gray bit,
    so a prefix of positions corresponds to the coarse-scale bits that
    the multi-scale schedule unlocks first.
    """

    format: WeightFormat
    layout: Layout
    codes: np.ndarray = field(repr=False)  # per-weight Gray pattern, uint32
    mult: np.ndarray = field(repr=False)  # per-weight signed multiplier
    values: np.ndarray = field(repr=False)  # per-weight real value

    @classmethod
    def from_multipliers(cls, fmt: WeightFormat, layout: Layout, h) -> "BitGenome":
        h = np.asarray(h, dtype=np.int64)
        if h.shape != (layout.n_weights,):
            raise ValueError(
                f"expected {layout.n_weights} multipliers, got shape {h.shape}"
            )
        if h.min() < fmt.h_min or h.max() > fmt.h_max:
            raise ValueError("multiplier out of representable range")
        codes = np.array(
            [gray_encode(int(v), fmt.n_bits) for v in h], dtype=np.uint32
        )
        values = h.astype(np.float64) * fmt.epsilon
        return cls(fmt, layout, codes, h.astype(np.int64), values)

    @classmethod
    def zeros(cls, fmt: WeightFormat, layout: Layout) -> "BitGenome":
        return cls.from_multipliers(fmt, layout, np.zeros(layout.n_weights, int))

    @property
    def n_bits_total(self) -> int:
        return self.layout.n_weights * self.format.n_bits

    def get_bit(self, bit_index: int) -> int:
        w, pos = divmod(bit_index, self.format.n_bits)
        mask = 1 << (self.format.n_bits - 1 - pos)
        return 1 if self.codes[w] & mask else 0

    def peek_flip(self, bit_index: int) -> tuple[Coord, float]:
        """Coordinate and new value a flip would produce, without mutating."""
        n = self.format.n_bits
        if not 0 <= bit_index < self.n_bits_total:
            raise IndexError(f"bit index {bit_index} out of range")
        w, pos = divmod(bit_index, n)
        code = int(self.codes[w]) ^ (1 << (n - 1 - pos))
        h = gray_decode(code, n)
        return self.layout.coord_of(w), h * self.format.epsilon

    def copy(self) -> "BitGenome":
        return BitGenome(
            self.format,
            self.layout,
            self.codes.copy(),
            self.mult.copy(),
            self.values.copy(),
        )


def weight_of(genome: BitGenome, coord: Coord) -> float:
    """Decoded real value of the parameter at ``coord``."""
    return float(genome.values[genome.layout.index_of(coord)])


def flip_bit(genome: BitGenome, bit_index: int) -> tuple[Coord, float]:
    """Toggle one stored bit in place; returns (coordinate, new value)."""
    n = genome.format.n_bits
    if not 0 <= bit_index < genome.n_bits_total:
        raise IndexError(f"bit index {bit_index} out of range")
    w, pos = divmod(bit_index, n)
    code = int(genome.codes[w]) ^ (1 << (n - 1 - pos))
    h = gray_decode(code, n)
    genome.codes[w] = code
    genome.mult[w] = h
    genome.values[w] = h * genome.format.epsilon
    return genome.layout.coord_of(w), float(genome.values[w])
