"""Spreading-code and modulation tests."""

import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from stcdma import waveform as wf


def periodic_xcorr_values(a, b):
    """All periodic cross-correlation values over every cyclic shift,
    in unnormalized (+-1 chip) units."""
    n = len(a)
    sa = np.sign(a)
    sb = np.sign(b)
    return {int(np.dot(sa, np.roll(sb, s))) for s in range(n)}


class TestGoldSet:
    def test_lengths_and_unit_norm(self):
        codes = wf.generate_gold_set(3, 2)
        for c in codes:
            assert c.length == 7
            assert abs(np.dot(c.chips, c.chips) - 1.0) < 1e-12

    def test_three_valued_cross_correlation_n3(self):
        # brute force over every pair and every cyclic shift
        codes = wf.generate_gold_set(3, 9)
        values = set()
        for a, b in itertools.combinations(codes, 2):
            values |= periodic_xcorr_values(a.chips, b.chips)
        assert values <= {-5, -1, 3}

    def test_offpeak_autocorrelation_bounded_n3(self):
        codes = wf.generate_gold_set(3, 9)
        for c in codes:
            s = np.sign(c.chips)
            for shift in range(1, 7):
                assert abs(np.dot(s, np.roll(s, shift))) <= 5

    def test_family_size_limit(self):
        assert wf.gold_family_size(3) == 9
        with pytest.raises(ValueError):
            wf.generate_gold_set(3, 10)

    def test_unsupported_register_length(self):
        with pytest.raises(ValueError):
            wf.generate_gold_set(4, 2)

    def test_n5_family(self):
        codes = wf.generate_gold_set(5, 33)
        assert len(codes) == 33
        assert codes[0].length == 31
        values = periodic_xcorr_values(codes[0].chips, codes[1].chips)
        assert values <= {-9, -1, 7}

    def test_seed_determinism(self):
        a = wf.generate_gold_set(3, 5, seed=42)
        b = wf.generate_gold_set(3, 5, seed=42)
        for x, y in zip(a, b):
            assert np.array_equal(x.chips, y.chips)

    def test_codes_distinct(self):
        codes = wf.generate_gold_set(5, 33)
        seen = {tuple(np.sign(c.chips).astype(int)) for c in codes}
        assert len(seen) == 33


class TestRandomCode:
    def test_norm_and_chip_magnitudes(self):
        c = wf.generate_random_code(8, seed=1)
        assert abs(np.dot(c.chips, c.chips) - 1.0) < 1e-12
        assert np.allclose(np.abs(c.chips), 1 / np.sqrt(8))

    def test_determinism(self):
        a = wf.generate_random_code(8, seed=7)
        b = wf.generate_random_code(8, seed=7)
        assert np.array_equal(a.chips, b.chips)

    def test_different_seeds_differ(self):
        # 2^-8 collision chance per pair; a couple of tries make this robust
        for s in range(3):
            a = wf.generate_random_code(8, seed=s)
            b = wf.generate_random_code(8, seed=s + 100)
            if not np.array_equal(a.chips, b.chips):
                return
        pytest.fail("three independent seed pairs all collided")

    def test_zero_length_rejected(self):
        with pytest.raises(ValueError):
            wf.generate_random_code(0, seed=1)


class TestQpskMapping:
    def test_fixed_map_points(self):
        s = wf.map_bits_to_qpsk([(0, 0), (0, 1), (1, 1), (1, 0)])
        r2 = np.sqrt(2)
        assert np.allclose(s, [(1 + 1j) / r2, (-1 + 1j) / r2, (-1 - 1j) / r2, (1 - 1j) / r2])

    def test_unit_modulus(self):
        s = wf.map_bits_to_qpsk([(0, 1), (1, 0)])
        assert np.allclose(np.abs(s), 1.0)

    def test_round_trip_all_pairs(self):
        pairs = [(0, 0), (0, 1), (1, 0), (1, 1)]
        back = wf.demap_qpsk_to_bits(wf.map_bits_to_qpsk(pairs))
        assert np.array_equal(back, np.array(pairs))

    def test_empty(self):
        assert wf.map_bits_to_qpsk([]).size == 0

    @given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=64))
    def test_round_trip_property(self, pairs):
        back = wf.demap_qpsk_to_bits(wf.map_bits_to_qpsk(pairs))
        assert np.array_equal(back, np.array(pairs))


class TestSpread:
    def test_elementwise_product(self):
        code = wf.SpreadingCode(np.array([1.0, 1.0, -1.0]) / np.sqrt(3))
        sym = (1 + 1j) / np.sqrt(2)
        frames = wf.spread([sym], code, amplitude=1.0)
        want = np.array([(1 + 1j), (1 + 1j), -(1 + 1j)]) / np.sqrt(6)
        assert np.allclose(frames[0], want)

    def test_empty_stream(self):
        code = wf.generate_random_code(4, seed=0)
        assert wf.spread([], code).shape == (0, 4)

    def test_amplitude_linearity(self):
        code = wf.generate_random_code(8, seed=3)
        syms = wf.map_bits_to_qpsk([(0, 1), (1, 1)])
        assert np.allclose(wf.spread(syms, code, 2.0), 2 * wf.spread(syms, code, 1.0))

    def test_frame_energy_equals_amplitude_squared(self):
        code = wf.generate_gold_set(3, 1)[0]
        syms = wf.map_bits_to_qpsk([(1, 0)])
        frames = wf.spread(syms, code, amplitude=1.7)
        assert abs(np.sum(np.abs(frames[0]) ** 2) - 1.7**2) < 1e-12

    def test_nonpositive_amplitude_rejected(self):
        code = wf.generate_random_code(4, seed=0)
        with pytest.raises(ValueError):
            wf.spread([1 + 0j], code, amplitude=0.0)


class TestTextFormat:
    def test_round_trip(self):
        codes = wf.generate_gold_set(3, 4, seed=9)
        text = wf.codes_to_text(codes)
        back = wf.codes_from_text(text)
        for a, b in zip(codes, back):
            assert np.allclose(a.chips, b.chips)

    def test_normalization_on_load(self):
        back = wf.codes_from_text("N 4\n+1 -1 +1 +1\n")
        assert abs(np.dot(back[0].chips, back[0].chips) - 1.0) < 1e-12

    def test_bad_header(self):
        with pytest.raises(ValueError):
            wf.codes_from_text("4\n+1 -1\n")
