"""Bit sources, BPSK/QPSK modems, power arithmetic and AWGN in complex baseband.

All sample blocks are ``complex128`` numpy arrays holding one sample per
symbol. Voltages refer to a 1-ohm load, so a block's power in watts is
``mean(|x|**2)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

_UINT64_LIMIT = 1 << 64


class Modulation(str, Enum):
    BPSK = "bpsk"
    QPSK = "qpsk"

    @property
    def bits_per_symbol(self) -> int:
        return 1 if self is Modulation.BPSK else 2

    @classmethod
    def parse(cls, value: "str | Modulation") -> "Modulation":
        if isinstance(value, Modulation):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValueError(f"unknown modulation {value!r}; expected bpsk or qpsk") from None


def db_to_linear(db):
    """Power ratio for a value in dB."""
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def linear_to_db(ratio):
    """dB value of a positive power ratio."""
    return 10.0 * np.log10(np.asarray(ratio, dtype=float))


@dataclass(frozen=True)
class PowerSpec:
    """A power level stored in dBW.

    Use :meth:`from_dbm` / :meth:`from_watts` to build one from other units.
    ``PowerSpec.zero()`` represents an exactly zero power (``-inf`` dBW), which
    is only meaningful for disabling noise or a signal.
    """

    value_dbw: float

    @classmethod
    def from_dbm(cls, dbm: float) -> "PowerSpec":
        return cls(float(dbm) - 30.0)

    @classmethod
    def from_watts(cls, watts: float) -> "PowerSpec":
        if watts < 0:
            raise ValueError(f"power must be non-negative, got {watts} W")
        if watts == 0:
            return cls.zero()
        return cls(float(10.0 * np.log10(watts)))

    @classmethod
    def zero(cls) -> "PowerSpec":
        return cls(float("-inf"))

    @property
    def value_dbm(self) -> float:
        return self.value_dbw + 30.0

    @property
    def watts(self) -> float:
        return float(10.0 ** (self.value_dbw / 10.0))

    def offset(self, db: float) -> "PowerSpec":
        """Power ``db`` decibels above this one."""
        return PowerSpec(self.value_dbw + float(db))


@dataclass(frozen=True)
class RngStream:
    """Immutable descriptor of a reproducible random stream.

    The stream is a Philox counter-based generator keyed by
    ``SeedSequence(seed, spawn_key=(stream_id,))``; distinct stream ids give
    statistically independent streams. Every call to :meth:`generator`
    restarts the stream from its beginning.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or not 0 <= int(value) < _UINT64_LIMIT:
                raise ValueError(f"{name} must be an integer in [0, 2**64), got {value!r}")

    def _seed_sequence(self, *labels: int) -> np.random.SeedSequence:
        return np.random.SeedSequence(
            entropy=int(self.seed), spawn_key=(int(self.stream_id), *map(int, labels))
        )

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(self._seed_sequence()))

    def derive(self, *labels: int) -> "RngStream":
        """Child stream identified by ``labels``, independent of this one."""
        state = self._seed_sequence(*labels).generate_state(1, dtype=np.uint64)
        return RngStream(int(self.seed), int(state[0]))


def generate_bits(n: int, rng: RngStream) -> np.ndarray:
    """``n`` i.i.d. uniform bits as a ``uint8`` array."""
    if n < 0:
        raise ValueError(f"bit count must be non-negative, got {n}")
    return rng.generator().integers(0, 2, size=int(n), dtype=np.uint8)


def _check_bits(bits) -> np.ndarray:
    bits = np.asarray(bits)
    if bits.ndim != 1:
        raise ValueError("bit stream must be one-dimensional")
    if bits.size and not np.isin(bits, (0, 1)).all():
        raise ValueError("bit stream may only contain 0 and 1")
    return bits.astype(np.uint8, copy=False)


def _amplitude(power: PowerSpec) -> float:
    watts = power.watts
    if not watts > 0:
        raise ValueError(f"signal power must be positive, got {watts} W")
    return float(np.sqrt(watts))


def modulate_bpsk(bits, power: PowerSpec) -> np.ndarray:
    """Bit 1 -> ``+A``, bit 0 -> ``-A`` with ``A = sqrt(power.watts)``."""
    bits = _check_bits(bits)
    amp = _amplitude(power)
    return np.where(bits == 1, amp, -amp).astype(np.complex128)


def modulate_qpsk(bits, power: PowerSpec) -> np.ndarray:
    """Gray-mapped QPSK: pair ``(b_I, b_Q)`` -> ``(±A/√2) + 1j(±A/√2)``, + for bit 1."""
    bits = _check_bits(bits)
    if bits.size % 2:
        raise ValueError("bit count not multiple of 2")
    rail = _amplitude(power) / np.sqrt(2.0)
    i_rail = np.where(bits[0::2] == 1, rail, -rail)
    q_rail = np.where(bits[1::2] == 1, rail, -rail)
    return i_rail + 1j * q_rail


def modulate(bits, modulation: Modulation, power: PowerSpec) -> np.ndarray:
    if Modulation.parse(modulation) is Modulation.BPSK:
        return modulate_bpsk(bits, power)
    return modulate_qpsk(bits, power)


def complex_noise(n: int, noise_power: PowerSpec, rng: RngStream) -> np.ndarray:
    """Circular complex Gaussian samples with total variance ``noise_power.watts``."""
    watts = noise_power.watts
    if watts < 0:
        raise ValueError("noise power must be non-negative")
    if watts == 0:
        return np.zeros(n, dtype=np.complex128)
    draws = rng.generator().standard_normal((2, n))
    sigma = np.sqrt(watts / 2.0)
    return sigma * draws[0] + 1j * (sigma * draws[1])


def add_awgn(x, noise_power: PowerSpec, rng: RngStream) -> np.ndarray:
    """Return ``x`` plus independent complex AWGN of total power ``noise_power``."""
    x = np.asarray(x, dtype=np.complex128)
    if noise_power.watts == 0:
        return x.copy()
    return x + complex_noise(x.size, noise_power, rng).reshape(x.shape)


def soi_power_from_ebn0(ebn0_db: float, noise: PowerSpec, bits_per_symbol: int) -> PowerSpec:
    """Signal power giving ``ebn0_db`` when the symbol rate equals the noise bandwidth.

    With one sample per symbol ``Es/N0`` is the in-band SNR, so
    ``P = N * bits_per_symbol * 10**(ebn0_db/10)``.
    """
    if bits_per_symbol not in (1, 2):
        raise ValueError(f"bits_per_symbol must be 1 or 2, got {bits_per_symbol}")
    watts = noise.watts * bits_per_symbol * float(db_to_linear(ebn0_db))
    return PowerSpec.from_watts(watts)


def check_block(x) -> np.ndarray:
    """Validate a sample block (finite complex values) and return it as complex128."""
    x = np.asarray(x, dtype=np.complex128)
    if x.ndim != 1:
        raise ValueError("sample block must be one-dimensional")
    if not np.isfinite(x).all():
        raise ValueError("sample block contains NaN or Inf")
    return x
