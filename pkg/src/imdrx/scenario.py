"""Operating points and the baseband link that realises them."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace
from typing import NamedTuple

import numpy as np

from .frontend import BlockerPair, FrontEndModel, apply_nonlinearity, front_end, make_blockers
from .sigproc import Modulation, PowerSpec, RngStream, generate_bits, modulate, soi_power_from_ebn0

DEFAULT_NOISE_DBW = -114.0
DEFAULT_BANDWIDTH_HZ = 1e6
DEFAULT_BLOCKER_OFFSET_DB = 70.0


@dataclass(frozen=True)
class Scenario:
    """One link operating point.

    ``iip3_dbm=None`` selects a linear front end; ``blocker_offset_db=None``
    switches both blockers off. Blocker powers are always relative to the
    noise floor and equal for the two blockers.
    """

    modulation: Modulation = Modulation.BPSK
    ebn0_db: float = 8.0
    iip3_dbm: float | None = None
    blocker_offset_db: float | None = DEFAULT_BLOCKER_OFFSET_DB
    noise_dbw: float = DEFAULT_NOISE_DBW
    bandwidth_hz: float = DEFAULT_BANDWIDTH_HZ
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "modulation", Modulation.parse(self.modulation))
        if not self.bandwidth_hz > 0:
            raise ValueError("bandwidth_hz must be positive")
        if self.blocker_offset_db is not None and self.blocker_offset_db < 0:
            raise ValueError("blocker_offset_db must be >= 0 (use None to disable blockers)")
        if not 0 <= int(self.seed) < 1 << 64:
            raise ValueError("seed must fit in 64 bits")
        for name in ("ebn0_db", "noise_dbw"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @property
    def noise_power(self) -> PowerSpec:
        return PowerSpec(self.noise_dbw)

    @property
    def soi_power(self) -> PowerSpec:
        return soi_power_from_ebn0(self.ebn0_db, self.noise_power, self.modulation.bits_per_symbol)

    @property
    def blocker_power(self) -> PowerSpec:
        if self.blocker_offset_db is None:
            return PowerSpec.zero()
        return self.noise_power.offset(self.blocker_offset_db)

    @property
    def symbol_rate(self) -> float:
        return self.bandwidth_hz

    def frontend(self, alpha1: float = 1.0) -> FrontEndModel:
        return front_end(self.iip3_dbm, alpha1)

    def replace(self, **changes) -> "Scenario":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        record = asdict(self)
        record["modulation"] = self.modulation.value
        return record

    @classmethod
    def from_dict(cls, record: dict) -> "Scenario":
        return cls(**record)


class LinkBlock(NamedTuple):
    bits: np.ndarray
    soi: np.ndarray
    received: np.ndarray
    imd: np.ndarray


def simulate_link(
    scenario: Scenario,
    frontend: FrontEndModel,
    n_symbols: int,
    rng: RngStream,
    soi_on: bool = True,
    bits: np.ndarray | None = None,
) -> LinkBlock:
    """Draw data bits, blockers and noise and pass them through ``frontend``.

    Sub-streams of ``rng`` are fixed per role (bits, blockers, noise), so two
    calls with the same ``rng`` and different front ends share every random
    draw. With ``soi_on=False`` the transmitter is silent but ``bits`` are
    still drawn. Passing ``bits`` sends that known sequence instead.
    """
    mod = scenario.modulation
    if bits is None:
        bits = generate_bits(mod.bits_per_symbol * n_symbols, rng.derive(0))
    elif len(bits) != mod.bits_per_symbol * n_symbols:
        raise ValueError(f"expected {mod.bits_per_symbol * n_symbols} bits, got {len(bits)}")
    if soi_on:
        soi = modulate(bits, mod, scenario.soi_power)
    else:
        soi = np.zeros(n_symbols, dtype=np.complex128)
    power = scenario.blocker_power
    if power.watts == 0:
        blockers = BlockerPair.silent(n_symbols)
    else:
        blockers = make_blockers(n_symbols, mod, power, power, rng.derive(1))
    received, imd = apply_nonlinearity(soi, blockers, frontend, scenario.noise_power, rng.derive(2))
    return LinkBlock(bits, soi, received, imd)
