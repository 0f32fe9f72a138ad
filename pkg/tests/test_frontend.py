"""Tests for intercept-point arithmetic and IMD injection."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from imdrx.frontend import (
    BlockerPair,
    FrontEndModel,
    LinearDeviceError,
    alpha3_from_iip3,
    apply_nonlinearity,
    iip3_from_alphas,
    imd_power_estimate,
    make_blockers,
)
from imdrx.sigproc import Modulation, PowerSpec, RngStream, complex_noise, generate_bits, modulate_bpsk


class TestIip3Math:
    def test_ten_dbm_is_one_volt(self):
        fe = alpha3_from_iip3(10.0, 1.0)
        assert math.isclose(fe.iip3_voltage, 1.0, rel_tol=1e-12)
        assert math.isclose(fe.alpha3, -4 / 3, rel_tol=1e-12)

    @pytest.mark.parametrize(
        "iip3, volts, alpha3",
        [(-10.0, 0.1, 4 / 3 / 0.01), (-20.0, 0.031622776601683794, 4 / 3 / 0.001)],
    )
    def test_hand_values(self, iip3, volts, alpha3):
        fe = alpha3_from_iip3(iip3, 1.0)
        assert math.isclose(fe.iip3_voltage, volts, rel_tol=1e-12)
        assert math.isclose(abs(fe.alpha3), alpha3, rel_tol=1e-12)
        assert fe.alpha3 < 0
        assert fe.iip3_dbm == iip3

    def test_inverse_examples(self):
        assert math.isclose(iip3_from_alphas(1.0, -4 / 3), 10.0, abs_tol=1e-12)
        # 133.33 is rounded from 400/3; the rounding moves the result by about 1.1e-4 dB
        assert math.isclose(iip3_from_alphas(1.0, -133.33), -10.0, abs_tol=2e-4)
        assert math.isclose(iip3_from_alphas(2.0, -8 / 3), 10.0, abs_tol=1e-12)

    def test_linear_has_no_iip3(self):
        with pytest.raises(LinearDeviceError, match="linear device has no finite IIP3"):
            iip3_from_alphas(1.0, 0.0)

    @given(st.floats(-40, 30), st.sampled_from([0.5, 1.0, 2.0]))
    def test_round_trip(self, p, a):
        assert abs(iip3_from_alphas(a, alpha3_from_iip3(p, a).alpha3) - p) < 1e-9

    @given(st.floats(-40, 30), st.floats(1e-3, 1e3))
    def test_scale_invariance(self, p, k):
        fe = alpha3_from_iip3(p)
        assert abs(iip3_from_alphas(k * fe.alpha1, k * fe.alpha3) - p) < 1e-9

    def test_model_validation(self):
        with pytest.raises(ValueError):
            FrontEndModel(alpha1=0.0)
        with pytest.raises(ValueError):
            FrontEndModel(alpha1=1.0, alpha3=1.0)
        with pytest.raises(ValueError):
            FrontEndModel(alpha1=1.0, alpha3=-1.0, iip3_dbm=0.0)
        assert FrontEndModel(alpha1=1.0, alpha3=-4 / 3).iip3_dbm == pytest.approx(10.0)


def _block(values):
    return np.array(values, dtype=np.complex128)


class TestApplyNonlinearity:
    def test_linear_device(self):
        s = _block([1 + 1j, -2, 0.5j])
        blockers = BlockerPair(_block([3, 3, 3]), _block([1j, 1, -1]))
        r, imd = apply_nonlinearity(s, blockers, FrontEndModel.linear(2.0), PowerSpec.zero(), RngStream(0))
        np.testing.assert_array_equal(r, 2.0 * s)
        np.testing.assert_array_equal(imd, 0)

    def test_direct_substitution(self):
        fe = FrontEndModel(alpha1=1.0, alpha3=-1.0)
        r, _ = apply_nonlinearity(_block([0]), BlockerPair(_block([1]), _block([1])), fe, PowerSpec.zero(), RngStream(0))
        np.testing.assert_array_equal(r, [-1.5 + 0j])

    def test_conjugation(self):
        # 1.5 * (-1) * (2)^2 * conj(1j) = 6j
        fe = FrontEndModel(alpha1=1.0, alpha3=-1.0)
        r, imd = apply_nonlinearity(_block([0]), BlockerPair(_block([2]), _block([1j])), fe, PowerSpec.zero(), RngStream(0))
        np.testing.assert_allclose(r, [6j], atol=1e-15)
        np.testing.assert_array_equal(r, imd)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            apply_nonlinearity(_block([0, 0]), BlockerPair(_block([1]), _block([1])), FrontEndModel(),
                               PowerSpec.zero(), RngStream(0))

    def test_reconstruction_is_bit_exact(self):
        n = 1000
        rng = RngStream(3)
        s = modulate_bpsk(generate_bits(n, rng.derive(1)), PowerSpec(-100.0))
        blockers = make_blockers(n, Modulation.QPSK, PowerSpec(-44.0), PowerSpec(-44.0), rng.derive(2))
        fe = alpha3_from_iip3(-20.0)
        noise = PowerSpec(-114.0)
        r, imd = apply_nonlinearity(s, blockers, fe, noise, rng.derive(3))
        rebuilt = fe.alpha1 * s + imd + complex_noise(n, noise, rng.derive(3))
        np.testing.assert_array_equal(r, rebuilt)

    def test_linearity_limit(self):
        n = 500
        rng = RngStream(4)
        s = modulate_bpsk(generate_bits(n, rng.derive(1)), PowerSpec(-100.0))
        blockers = make_blockers(n, Modulation.BPSK, PowerSpec(-44.0), PowerSpec(-44.0), rng.derive(2))
        peaks = []
        for iip3 in (0.0, 40.0, 80.0, 120.0):
            _, imd = apply_nonlinearity(s, blockers, alpha3_from_iip3(iip3), PowerSpec.zero(), rng)
            peaks.append(np.max(np.abs(imd)))
        assert all(b < a for a, b in zip(peaks, peaks[1:]))
        # 40 dB more IIP3 is 1e-4 less cubic gain
        assert peaks[-1] == pytest.approx(peaks[0] * 1e-12, rel=1e-9)


class TestImdPower:
    def test_closed_form(self):
        one = PowerSpec(0.0)
        assert imd_power_estimate(one, one, FrontEndModel(alpha3=-1.0)).watts == pytest.approx(2.25, rel=1e-12)
        assert imd_power_estimate(one, one, FrontEndModel.linear()).watts == 0.0

    @pytest.mark.parametrize("mod", list(Modulation))
    def test_matches_monte_carlo(self, mod):
        noise = PowerSpec(-114.0)
        blocker = noise.offset(70.0)
        fe = alpha3_from_iip3(-20.0)
        n = 100_000
        blockers = make_blockers(n, mod, blocker, blocker, RngStream(8))
        _, imd = apply_nonlinearity(np.zeros(n, complex), blockers, fe, PowerSpec.zero(), RngStream(9))
        predicted = imd_power_estimate(blocker, blocker, fe).watts
        assert np.mean(np.abs(imd) ** 2) == pytest.approx(predicted, rel=0.01)
        # hand value: 2.25 * (4/3 / 10**-3)**2 * (10**-4.4)**3
        assert predicted == pytest.approx(2.25 * (4 / 3 * 1e3) ** 2 * 10 ** -13.2, rel=1e-12)


def test_blockers_are_independent_sources():
    pair = make_blockers(4096, Modulation.BPSK, PowerSpec(0.0), PowerSpec(0.0), RngStream(1))
    assert not np.array_equal(pair.b, pair.c)
    assert abs(np.mean(pair.b.real * pair.c.real)) < 4 / math.sqrt(4096)
    silent = make_blockers(8, Modulation.QPSK, PowerSpec.zero(), PowerSpec(0.0), RngStream(1))
    np.testing.assert_array_equal(silent.b, 0)
