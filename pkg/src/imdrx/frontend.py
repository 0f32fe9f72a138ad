"""Memoryless third-order RF front end and in-band intermodulation injection.

The front end follows the cubic polynomial device model. Only the in-band
product ``2 f1 - f2`` of two adjacent-channel blockers lands on the signal of
interest; in complex baseband the received sample is

    r = alpha1 * s + 1.5 * alpha3 * b**2 * conj(c) + n

Intercept-point arithmetic:

    A_iip3 = sqrt(4/3 * |alpha1 / alpha3|)        [V, 1-ohm reference]
    P_iip3 = 20 log10(A_iip3) + 10                [dBm]
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .sigproc import Modulation, PowerSpec, RngStream, add_awgn, check_block, generate_bits, modulate


class LinearDeviceError(ValueError):
    """Raised when an intercept point is requested for ``alpha3 == 0``."""


def iip3_voltage(alpha1: float, alpha3: float) -> float:
    if alpha3 == 0:
        raise LinearDeviceError("linear device has no finite IIP3")
    return math.sqrt(4.0 / 3.0 * abs(alpha1 / alpha3))


def iip3_from_alphas(alpha1: float, alpha3: float) -> float:
    """Input intercept point in dBm for the gains ``(alpha1, alpha3)``."""
    return 20.0 * math.log10(iip3_voltage(alpha1, alpha3)) + 10.0


@dataclass(frozen=True)
class FrontEndModel:
    """Linear and cubic gains of the receiver front end.

    ``iip3_dbm`` is ``None`` for a linear device. When given it must agree
    with ``(alpha1, alpha3)``; when omitted it is derived from them.
    """

    alpha1: float = 1.0
    alpha3: float = 0.0
    iip3_dbm: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.alpha1) and self.alpha1 > 0):
            raise ValueError(f"alpha1 must be positive, got {self.alpha1}")
        if not (math.isfinite(self.alpha3) and self.alpha3 <= 0):
            raise ValueError(f"alpha3 must be <= 0 (compressive), got {self.alpha3}")
        if self.alpha3 == 0:
            if self.iip3_dbm is not None:
                raise ValueError("a linear device (alpha3 = 0) carries no IIP3 tag")
            return
        derived = iip3_from_alphas(self.alpha1, self.alpha3)
        if self.iip3_dbm is None:
            object.__setattr__(self, "iip3_dbm", derived)
        elif abs(derived - self.iip3_dbm) > 1e-9 * max(1.0, abs(self.iip3_dbm)):
            raise ValueError(
                f"iip3_dbm={self.iip3_dbm} inconsistent with alphas (implies {derived} dBm)"
            )

    @classmethod
    def linear(cls, alpha1: float = 1.0) -> "FrontEndModel":
        return cls(alpha1=alpha1, alpha3=0.0)

    @property
    def is_linear(self) -> bool:
        return self.alpha3 == 0

    @property
    def iip3_voltage(self) -> float:
        return iip3_voltage(self.alpha1, self.alpha3)


def alpha3_from_iip3(iip3_dbm: float, alpha1: float = 1.0) -> FrontEndModel:
    """Build the compressive front end whose input intercept point is ``iip3_dbm``."""
    if not alpha1 > 0:
        raise ValueError(f"alpha1 must be positive, got {alpha1}")
    amp = 10.0 ** ((float(iip3_dbm) - 10.0) / 20.0)
    alpha3 = -(4.0 / 3.0) * alpha1 / amp**2
    return FrontEndModel(alpha1=float(alpha1), alpha3=alpha3, iip3_dbm=float(iip3_dbm))


def front_end(iip3_dbm: float | None, alpha1: float = 1.0) -> FrontEndModel:
    """Front end for an IIP3 in dBm, or a linear one when ``iip3_dbm`` is None."""
    if iip3_dbm is None:
        return FrontEndModel.linear(alpha1)
    return alpha3_from_iip3(iip3_dbm, alpha1)


class BlockerPair(NamedTuple):
    """Adjacent-channel blockers at ``f1`` (``b``) and ``f2`` (``c``)."""

    b: np.ndarray
    c: np.ndarray

    @classmethod
    def silent(cls, n: int) -> "BlockerPair":
        zeros = np.zeros(n, dtype=np.complex128)
        return cls(zeros, zeros.copy())


def make_blockers(
    n_symbols: int,
    modulation: Modulation,
    power_b: PowerSpec,
    power_c: PowerSpec,
    rng: RngStream,
) -> BlockerPair:
    """Two data-carrying blockers with independent bit sources.

    A blocker whose power is zero watts is returned as all zeros.
    """
    modulation = Modulation.parse(modulation)
    k = modulation.bits_per_symbol
    blocks = []
    for label, power in ((0, power_b), (1, power_c)):
        if power.watts == 0:
            blocks.append(np.zeros(n_symbols, dtype=np.complex128))
        else:
            bits = generate_bits(k * n_symbols, rng.derive(label))
            blocks.append(modulate(bits, modulation, power))
    return BlockerPair(*blocks)


def imd_product(blockers: BlockerPair, model: FrontEndModel) -> np.ndarray:
    """In-band third-order product ``1.5 * alpha3 * b**2 * conj(c)``."""
    b = check_block(blockers.b)
    c = check_block(blockers.c)
    if b.shape != c.shape:
        raise ValueError(f"blocker lengths differ: {b.size} vs {c.size}")
    return 1.5 * model.alpha3 * b**2 * np.conj(c)


def apply_nonlinearity(
    soi,
    blockers: BlockerPair,
    model: FrontEndModel,
    noise_power: PowerSpec,
    rng: RngStream,
) -> tuple[np.ndarray, np.ndarray]:
    """Pass the signal of interest and blockers through the front end and add noise.

    Returns
    -------
    received : ndarray
        ``alpha1*soi + imd + noise``, evaluated in exactly that order.
    imd_only : ndarray
        The injected intermodulation term alone, available only in simulation.
    """
    soi = check_block(soi)
    if not (len(blockers.b) == len(blockers.c) == soi.size):
        raise ValueError(
            f"length mismatch: soi={soi.size}, b={len(blockers.b)}, c={len(blockers.c)}"
        )
    imd = imd_product(blockers, model)
    received = add_awgn(model.alpha1 * soi + imd, noise_power, rng)
    return received, imd


def imd_power_estimate(
    blocker_power_b: PowerSpec, blocker_power_c: PowerSpec, model: FrontEndModel
) -> PowerSpec:
    """Closed-form IMD power ``(9/4) alpha3² P_b² P_c`` for constant-modulus blockers."""
    watts = 2.25 * model.alpha3**2 * blocker_power_b.watts**2 * blocker_power_c.watts
    return PowerSpec.from_watts(watts)
