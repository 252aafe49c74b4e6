import numpy as np
import pytest
from hypothesis import given, strategies as st

from bitclimb.codec import (
    BitGenome,
    Layout,
    WeightFormat,
    flip_bit,
    gray_decode,
    gray_encode,
    weight_of,
)


def enumerate_codes(n):
    return [gray_encode(h, n) for h in range(-(2 ** (n - 1)), 2 ** (n - 1))]


def test_gray_encode_known_patterns():
    assert gray_encode(0, 3) == 0b110
    assert gray_encode(-1, 3) == 0b010
    assert bin(gray_encode(-1, 3) ^ gray_encode(0, 3)).count("1") == 1
    assert gray_encode(-8, 4) == 0b0000


def test_gray_encode_bijective_and_adjacent():
    for n in range(2, 9):
        codes = enumerate_codes(n)
        assert len(set(codes)) == 2**n
        for a, b in zip(codes, codes[1:]):
            assert bin(a ^ b).count("1") == 1


def test_gray_encode_rejects_out_of_range():
    with pytest.raises(ValueError):
        gray_encode(4, 3)
    with pytest.raises(ValueError):
        gray_encode(-5, 3)


def test_gray_decode_known_values():
    assert gray_decode(0b110, 3) == 0
    assert gray_decode(0b0000, 4) == -8


def test_gray_roundtrip_exhaustive_n12():
    n = 12
    for pattern in range(2**n):
        assert gray_encode(gray_decode(pattern, n), n) == pattern


@given(st.integers(min_value=2, max_value=16), st.data())
def test_gray_roundtrip_property(n, data):
    h = data.draw(st.integers(min_value=-(2 ** (n - 1)), max_value=2 ** (n - 1) - 1))
    assert gray_decode(gray_encode(h, n), n) == h


def test_weight_format_range():
    fmt = WeightFormat(4, 7.0)
    assert fmt.epsilon == 1.0
    assert fmt.h_max * fmt.epsilon == 7.0
    assert fmt.h_min * fmt.epsilon == -7.0 - fmt.epsilon
    fmt12 = WeightFormat(12, 6.0)
    assert fmt12.h_max * fmt12.epsilon == pytest.approx(6.0, abs=0)


def test_weight_format_validation():
    with pytest.raises(ValueError):
        WeightFormat(1, 1.0)
    with pytest.raises(ValueError):
        WeightFormat(8, -1.0)


def test_layout_is_bijection():
    layout = Layout((2, 3, 1))
    assert layout.n_weights == 2 * 3 + 3 + 3 * 1 + 1
    seen = {layout.index_of(c) for c in layout.coords}
    assert seen == set(range(layout.n_weights))
    with pytest.raises(KeyError):
        layout.index_of(("w", 9, 0, 0))


def test_layout_recurrent_adds_hidden_square():
    layout = Layout((2, 4, 1), recurrent=True)
    assert layout.n_weights == 2 * 4 + 4 * 4 + 4 + 4 + 1
    with pytest.raises(ValueError):
        Layout((2, 4, 4, 1), recurrent=True)


def test_weight_of_examples():
    layout = Layout((1, 1))
    fmt = WeightFormat(12, 6.0)
    g = BitGenome.from_multipliers(fmt, layout, [2047, 0])
    assert weight_of(g, ("w", 1, 0, 0)) == 6.0
    assert weight_of(g, ("b", 1, 0)) == 0.0
    fmt4 = WeightFormat(4, 7.0)
    g4 = BitGenome.from_multipliers(fmt4, layout, [-8, 0])
    assert weight_of(g4, ("w", 1, 0, 0)) == -8.0
    with pytest.raises(KeyError):
        weight_of(g4, ("w", 2, 0, 0))


def test_flip_bit_changes_exactly_one_weight():
    layout = Layout((2, 2, 1))
    fmt = WeightFormat(6, 3.0)
    rng = np.random.default_rng(3)
    g = BitGenome.from_multipliers(
        fmt, layout, rng.integers(fmt.h_min, fmt.h_max + 1, layout.n_weights)
    )
    before = g.values.copy()
    coord, new_value = flip_bit(g, 7)
    widx = layout.index_of(coord)
    assert g.values[widx] == new_value
    mask = np.ones(layout.n_weights, bool)
    mask[widx] = False
    assert np.array_equal(g.values[mask], before[mask])


def test_flip_bit_is_involution():
    layout = Layout((1, 2))
    fmt = WeightFormat(5, 2.0)
    g = BitGenome.from_multipliers(fmt, layout, [3, -7, 0, 11])
    snap = (g.codes.copy(), g.mult.copy(), g.values.copy())
    for bit in range(g.n_bits_total):
        flip_bit(g, bit)
        flip_bit(g, bit)
    assert np.array_equal(g.codes, snap[0])
    assert np.array_equal(g.mult, snap[1])
    assert np.array_equal(g.values, snap[2])
    with pytest.raises(IndexError):
        flip_bit(g, g.n_bits_total)


def test_single_flip_neighborhood_reaches_grid_neighbors():
    # Both grid-adjacent multipliers must appear among the n flip successors.
    layout = Layout((1, 1))
    for n in range(2, 9):
        fmt = WeightFormat(n, 1.0)
        for h in range(fmt.h_min, fmt.h_max + 1):
            g = BitGenome.from_multipliers(fmt, layout, [h, 0])
            successors = set()
            for bit in range(n):
                flip_bit(g, bit)
                successors.add(int(g.mult[0]))
                flip_bit(g, bit)
            if h - 1 >= fmt.h_min:
                assert h - 1 in successors
            if h + 1 <= fmt.h_max:
                assert h + 1 in successors


def test_flip_delta_at_zero_is_one_step():
    layout = Layout((1, 1))
    fmt = WeightFormat(3, 3.0)
    g = BitGenome.from_multipliers(fmt, layout, [0, 0])
    deltas = set()
    for bit in range(3):
        _, v = g.peek_flip(bit)
        deltas.add(round(v, 12))
    assert fmt.epsilon in {abs(d) for d in deltas}
