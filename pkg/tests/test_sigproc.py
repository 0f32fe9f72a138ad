"""Tests for bit sources, modems, power arithmetic and AWGN."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from imdrx.receivers import demod_conventional
from imdrx.sigproc import (
    Modulation,
    PowerSpec,
    RngStream,
    add_awgn,
    complex_noise,
    db_to_linear,
    generate_bits,
    linear_to_db,
    modulate_bpsk,
    modulate_qpsk,
    soi_power_from_ebn0,
)

bit_lists = st.lists(st.integers(0, 1), max_size=64)


class TestPowerSpec:
    def test_unit_helpers(self):
        p = PowerSpec(-114.0)
        assert p.value_dbm == -84.0
        assert math.isclose(p.watts, 10 ** -11.4, rel_tol=1e-12)

    @given(st.floats(-200, 100, allow_nan=False))
    def test_round_trips(self, dbw):
        p = PowerSpec(dbw)
        assert math.isclose(PowerSpec.from_dbm(p.value_dbm).value_dbw, dbw, rel_tol=1e-12, abs_tol=1e-12)
        assert math.isclose(PowerSpec.from_watts(p.watts).watts, p.watts, rel_tol=1e-12)
        assert math.isclose(float(db_to_linear(linear_to_db(p.watts))), p.watts, rel_tol=1e-12)

    def test_zero_power(self):
        assert PowerSpec.zero().watts == 0.0
        assert PowerSpec.from_watts(0).watts == 0.0
        with pytest.raises(ValueError):
            PowerSpec.from_watts(-1.0)


class TestRngStream:
    def test_same_descriptor_same_stream(self):
        a = RngStream(42, 3).generator().standard_normal(16)
        b = RngStream(42, 3).generator().standard_normal(16)
        np.testing.assert_array_equal(a, b)

    def test_distinct_streams_differ(self):
        a = RngStream(42, 3).generator().standard_normal(1000)
        b = RngStream(42, 4).generator().standard_normal(1000)
        assert not np.array_equal(a, b)
        # independent unit normals: sample correlation ~ N(0, 1/1000)
        assert abs(np.corrcoef(a, b)[0, 1]) < 4 / math.sqrt(1000)

    def test_derive_is_deterministic_and_distinct(self):
        root = RngStream(7)
        assert root.derive(1) == root.derive(1)
        assert root.derive(1) != root.derive(2)
        assert root.derive(1).stream_id != root.stream_id

    @pytest.mark.parametrize("seed", [-1, 1 << 64, 1.5])
    def test_rejects_bad_seed(self, seed):
        with pytest.raises(ValueError):
            RngStream(seed)


class TestGenerateBits:
    def test_empty(self):
        assert generate_bits(0, RngStream(1)).size == 0

    def test_deterministic(self):
        a = generate_bits(1_000_000, RngStream(11))
        b = generate_bits(1_000_000, RngStream(11))
        np.testing.assert_array_equal(a, b)

    def test_balanced(self):
        # binomial oracle: 4 sigma of the mean of 1e6 fair bits is 0.002
        bits = generate_bits(1_000_000, RngStream(11))
        assert set(np.unique(bits)) <= {0, 1}
        assert abs(bits.mean() - 0.5) < 0.002

    def test_negative_count(self):
        with pytest.raises(ValueError):
            generate_bits(-1, RngStream(0))


class TestModulators:
    def test_bpsk_unit_power(self):
        np.testing.assert_array_equal(modulate_bpsk([1, 0], PowerSpec(0.0)), [1 + 0j, -1 + 0j])

    def test_bpsk_amplitude(self):
        np.testing.assert_allclose(modulate_bpsk([1], PowerSpec.from_watts(4.0)), [2 + 0j], rtol=1e-15)

    def test_qpsk_corners(self):
        r2 = math.sqrt(2)
        np.testing.assert_allclose(modulate_qpsk([1, 1], PowerSpec(0.0)), [(1 + 1j) / r2], rtol=1e-15)
        np.testing.assert_allclose(modulate_qpsk([0, 1], PowerSpec(0.0)), [(-1 + 1j) / r2], rtol=1e-15)

    def test_qpsk_two_watts(self):
        out = modulate_qpsk([1, 0, 0, 0], PowerSpec.from_watts(2.0))
        np.testing.assert_allclose(out, [1 - 1j, -1 - 1j], rtol=1e-14)

    def test_qpsk_odd_bits(self):
        with pytest.raises(ValueError, match="bit count not multiple of 2"):
            modulate_qpsk([1, 0, 1], PowerSpec(0.0))

    def test_rejects_non_binary(self):
        with pytest.raises(ValueError):
            modulate_bpsk([0, 2], PowerSpec(0.0))

    @given(bit_lists.filter(len), st.floats(-40, 40))
    def test_constant_envelope(self, bits, dbw):
        p = PowerSpec(dbw)
        x = modulate_bpsk(bits, p)
        np.testing.assert_allclose(np.abs(x) ** 2, p.watts, rtol=1e-12)
        if len(bits) % 2 == 0:
            y = modulate_qpsk(bits, p)
            np.testing.assert_allclose(np.abs(y) ** 2, p.watts, rtol=1e-12)

    @given(bit_lists, st.sampled_from(list(Modulation)))
    def test_demod_inverts_mod(self, bits, mod):
        if mod is Modulation.QPSK and len(bits) % 2:
            bits = bits[:-1]
        x = modulate_bpsk(bits, PowerSpec(0.0)) if mod is Modulation.BPSK else modulate_qpsk(bits, PowerSpec(0.0))
        np.testing.assert_array_equal(demod_conventional(x, mod), np.array(bits, dtype=np.uint8))

    def test_qpsk_gray_neighbours(self):
        pairs = [(0, 0), (0, 1), (1, 0), (1, 1)]
        syms = {p: modulate_qpsk(list(p), PowerSpec(0.0))[0] for p in pairs}
        order = sorted(pairs, key=lambda p: np.angle(syms[p]))
        for a, b in zip(order, order[1:] + order[:1]):
            assert sum(x != y for x, y in zip(a, b)) == 1


class TestAwgn:
    def test_zero_noise_is_identity(self):
        x = np.array([1 + 2j, -3j])
        np.testing.assert_array_equal(add_awgn(x, PowerSpec.zero(), RngStream(0)), x)

    def test_power_and_rails(self):
        n = 1_000_000
        y = add_awgn(np.zeros(n, complex), PowerSpec(0.0), RngStream(5))
        # |n|^2 ~ Exp(1): standard error of the mean is 1e-3
        assert abs(np.mean(np.abs(y) ** 2) - 1.0) < 0.005
        for rail in (y.real, y.imag):
            assert abs(rail.mean()) < 4 * math.sqrt(0.5 / n)
            # variance of a sample variance of N(0, 1/2): 2 * 0.25 / n
            assert abs(rail.var() - 0.5) < 4 * math.sqrt(2 * 0.25 / n)

    def test_deterministic(self):
        x = np.ones(100, complex)
        a = add_awgn(x, PowerSpec(-3.0), RngStream(9, 1))
        b = add_awgn(x, PowerSpec(-3.0), RngStream(9, 1))
        np.testing.assert_array_equal(a, b)
        np.testing.assert_allclose(a - x, complex_noise(100, PowerSpec(-3.0), RngStream(9, 1)), atol=1e-15)


class TestSoiPower:
    def test_zero_db(self):
        assert math.isclose(soi_power_from_ebn0(0.0, PowerSpec(0.0), 1).watts, 1.0, rel_tol=1e-12)

    def test_three_db(self):
        assert math.isclose(soi_power_from_ebn0(3.0103, PowerSpec(0.0), 1).watts, 2.0, rel_tol=1e-5)

    def test_qpsk_at_default_noise_floor(self):
        expected = 2 * 10 ** 0.8 * 10 ** -11.4
        got = soi_power_from_ebn0(8.0, PowerSpec(-114.0), 2).watts
        assert math.isclose(got, expected, rel_tol=1e-12)
        assert math.isclose(got, 5.024e-11, rel_tol=1e-3)

    def test_bits_per_symbol(self):
        with pytest.raises(ValueError):
            soi_power_from_ebn0(0.0, PowerSpec(0.0), 3)


@settings(max_examples=25)
@given(st.integers(0, 2**64 - 1), st.integers(0, 2**64 - 1))
def test_any_64bit_descriptor_is_valid(seed, stream):
    assert generate_bits(4, RngStream(seed, stream)).size == 4
