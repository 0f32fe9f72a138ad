"""Conventional, ANN-canceler and ANN-demodulator receivers.

Architectures per modulation:

=================  ===================  ==========================
kind               BPSK                 QPSK
=================  ===================  ==========================
conventional       no network           no network
ann_canceler       one 1-4-1 (I rail)   one 2-4-2 (I and Q rails)
ann_demodulator    one 1-4-1 (I rail)   two 1-4-1 (I rail, Q rail)
=================  ===================  ==========================

Every network sees the received samples divided by ``scale_ref``, the RMS of
the received block it was trained on. The canceler is trained with the
transmitter silent, on the simulator's exact IMD term as the target; its
estimate is rescaled and subtracted before the conventional slicer. The
demodulator is trained on known pilots with the per-rail symbol sign (±1) as
the target and slices its own output at zero.

Decision ties (a value of exactly zero) resolve to bit 1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .frontend import FrontEndModel
from .neuralnet import MlpConfig, MlpNetwork, TrainingSet, TrainOptions, init_weights, train_br
from .scenario import Scenario, simulate_link
from .sigproc import Modulation, RngStream, check_block

DEFAULT_N_TRAIN = 2000
DEFAULT_N_PILOTS = 2000
HIDDEN_NEURONS = 4

TRAIN_OPTIONS = TrainOptions()

_DATA_STREAM = 0
_INIT_STREAM = 1


class ReceiverKind(str, Enum):
    CONVENTIONAL = "conventional"
    ANN_CANCELER = "ann_canceler"
    ANN_DEMODULATOR = "ann_demodulator"

    @classmethod
    def parse(cls, value: "str | ReceiverKind") -> "ReceiverKind":
        if isinstance(value, ReceiverKind):
            return value
        key = str(value).strip().lower().replace("-", "_")
        aliases = {"conv": "conventional", "canceler": "ann_canceler", "demodulator": "ann_demodulator",
                   "anncanceler": "ann_canceler", "anndemodulator": "ann_demodulator"}
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise ValueError(f"unknown receiver kind {value!r}") from None


def architecture(kind: ReceiverKind, modulation: Modulation) -> tuple[MlpConfig, ...]:
    """Network configurations required for a receiver kind and modulation."""
    kind, modulation = ReceiverKind.parse(kind), Modulation.parse(modulation)
    basic = MlpConfig(1, HIDDEN_NEURONS, 1)
    if kind is ReceiverKind.CONVENTIONAL:
        return ()
    if kind is ReceiverKind.ANN_CANCELER:
        return (basic,) if modulation is Modulation.BPSK else (MlpConfig(2, HIDDEN_NEURONS, 2),)
    return (basic,) if modulation is Modulation.BPSK else (basic, basic)


@dataclass(frozen=True, eq=False)
class TrainedReceiver:
    """An immutable, ready-to-use receiver.

    ``symbol_scale`` converts demodulator outputs (trained on ±1) back to
    volts per rail; it is 1.0 for the other kinds. ``scenario`` optionally
    records the operating point the networks were trained for.
    """

    kind: ReceiverKind
    modulation: Modulation
    nets: tuple[MlpNetwork, ...] = ()
    scale_ref: float = 1.0
    symbol_scale: float = 1.0
    scenario: Scenario | None = None
    train_info: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "kind", ReceiverKind.parse(self.kind))
        object.__setattr__(self, "modulation", Modulation.parse(self.modulation))
        object.__setattr__(self, "nets", tuple(self.nets))
        expected = architecture(self.kind, self.modulation)
        got = tuple(net.config for net in self.nets)
        if got != expected:
            raise ValueError(
                f"{self.kind.value}/{self.modulation.value} needs networks "
                f"{[str(c) for c in expected]}, got {[str(c) for c in got]}"
            )
        if not (np.isfinite(self.scale_ref) and self.scale_ref > 0):
            raise ValueError("scale_ref must be positive and finite")
        if not (np.isfinite(self.symbol_scale) and self.symbol_scale > 0):
            raise ValueError("symbol_scale must be positive and finite")

    @classmethod
    def conventional(cls, modulation: Modulation) -> "TrainedReceiver":
        return cls(ReceiverKind.CONVENTIONAL, modulation)

    def to_dict(self) -> dict:
        return {
            "format": "imdrx.receiver/1",
            "kind": self.kind.value,
            "modulation": self.modulation.value,
            "scale_ref": float(self.scale_ref),
            "symbol_scale": float(self.symbol_scale),
            "scenario": None if self.scenario is None else self.scenario.to_dict(),
            "train_info": self.train_info,
            "nets": [net.to_dict() for net in self.nets],
        }

    @classmethod
    def from_dict(cls, record: dict) -> "TrainedReceiver":
        scenario = record.get("scenario")
        return cls(
            kind=record["kind"],
            modulation=record["modulation"],
            nets=tuple(MlpNetwork.from_dict(r) for r in record.get("nets", [])),
            scale_ref=float(record.get("scale_ref", 1.0)),
            symbol_scale=float(record.get("symbol_scale", 1.0)),
            scenario=None if scenario is None else Scenario.from_dict(scenario),
            train_info=dict(record.get("train_info", {})),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def loads(cls, text: str) -> "TrainedReceiver":
        return cls.from_dict(json.loads(text))


def _rails(x: np.ndarray, modulation: Modulation) -> np.ndarray:
    if modulation is Modulation.BPSK:
        return x.real[:, None]
    return np.column_stack([x.real, x.imag])


def slice_bits(i_rail, q_rail=None) -> np.ndarray:
    """Hard decisions at zero (ties -> 1); QPSK bits are interleaved ``I, Q``."""
    i_bits = (np.asarray(i_rail) >= 0).astype(np.uint8)
    if q_rail is None:
        return i_bits
    q_bits = (np.asarray(q_rail) >= 0).astype(np.uint8)
    out = np.empty(2 * i_bits.size, dtype=np.uint8)
    out[0::2] = i_bits
    out[1::2] = q_bits
    return out


def demod_conventional(received, modulation: Modulation, alpha1: float = 1.0) -> np.ndarray:
    """Coherent sign detector; inverts :func:`~imdrx.sigproc.modulate` for any ``alpha1 > 0``."""
    if not alpha1 > 0:
        raise ValueError("alpha1 must be positive")
    received = check_block(received)
    if Modulation.parse(modulation) is Modulation.BPSK:
        return slice_bits(received.real)
    return slice_bits(received.real, received.imag)


def cancel_and_demodulate(received, imd_estimate, modulation: Modulation, alpha1: float = 1.0):
    """Subtract an IMD estimate and slice with the conventional detector."""
    return demod_conventional(check_block(received) - np.asarray(imd_estimate), modulation, alpha1)


def _require(rx: TrainedReceiver, kind: ReceiverKind):
    if rx.kind is not kind:
        raise ValueError(f"expected a {kind.value} receiver, got {rx.kind.value}")


def estimate_imd(rx: TrainedReceiver, received) -> np.ndarray:
    """The canceler's IMD estimate in volts (real-valued for BPSK)."""
    _require(rx, ReceiverKind.ANN_CANCELER)
    received = check_block(received)
    out = rx.nets[0].predict(_rails(received, rx.modulation) / rx.scale_ref) * rx.scale_ref
    if rx.modulation is Modulation.BPSK:
        return out[:, 0].astype(np.complex128)
    return out[:, 0] + 1j * out[:, 1]


def apply_canceler(rx: TrainedReceiver, received, alpha1: float = 1.0) -> np.ndarray:
    _require(rx, ReceiverKind.ANN_CANCELER)
    return cancel_and_demodulate(received, estimate_imd(rx, received), rx.modulation, alpha1)


def _demod_soft(rx: TrainedReceiver, received) -> list[np.ndarray]:
    _require(rx, ReceiverKind.ANN_DEMODULATOR)
    rails = _rails(check_block(received), rx.modulation) / rx.scale_ref
    return [net.predict(rails[:, [k]])[:, 0] for k, net in enumerate(rx.nets)]


def demodulator_output(rx: TrainedReceiver, received) -> np.ndarray:
    """Soft symbol estimate of the ANN demodulator, in volts."""
    soft = _demod_soft(rx, received)
    if rx.modulation is Modulation.BPSK:
        return soft[0] * rx.symbol_scale + 0j
    return (soft[0] + 1j * soft[1]) * rx.symbol_scale


def apply_demodulator(rx: TrainedReceiver, received) -> np.ndarray:
    return slice_bits(*_demod_soft(rx, received))


def detect(rx: TrainedReceiver, received, alpha1: float = 1.0) -> np.ndarray:
    """Bits decided by any receiver kind."""
    if rx.kind is ReceiverKind.CONVENTIONAL:
        return demod_conventional(received, rx.modulation, alpha1)
    if rx.kind is ReceiverKind.ANN_CANCELER:
        return apply_canceler(rx, received, alpha1)
    return apply_demodulator(rx, received)


def _rms(x: np.ndarray) -> float:
    value = float(np.sqrt(np.mean(np.abs(x) ** 2)))
    return value if value > 0 else 1.0


def train_canceler(
    scenario: Scenario,
    frontend: FrontEndModel,
    n_train: int = DEFAULT_N_TRAIN,
    rng: RngStream | None = None,
    opts: TrainOptions | None = None,
) -> TrainedReceiver:
    """Train an IMD canceler with the transmitter switched off.

    The network input is the received block (IMD plus noise) and its target is
    the exact IMD term, both divided by the input RMS.
    """
    if n_train < 1:
        raise ValueError("n_train must be >= 1")
    rng = rng or RngStream(scenario.seed)
    mod = scenario.modulation
    link = simulate_link(scenario, frontend, n_train, rng.derive(_DATA_STREAM), soi_on=False)
    scale = _rms(link.received)
    data = TrainingSet(_rails(link.received, mod) / scale, _rails(link.imd, mod) / scale)
    (config,) = architecture(ReceiverKind.ANN_CANCELER, mod)
    net0 = init_weights(config, rng.derive(_INIT_STREAM, 0))
    net, state, _ = train_br(net0, data, opts or TRAIN_OPTIONS)
    return TrainedReceiver(
        ReceiverKind.ANN_CANCELER,
        mod,
        (net,),
        scale_ref=scale,
        scenario=scenario,
        train_info={"n_train": n_train, "epochs": [state.epoch], "stop": [state.stop_reason],
                    "stream_id": rng.stream_id},
    )


def train_demodulator(
    scenario: Scenario,
    frontend: FrontEndModel,
    n_pilots: int = DEFAULT_N_PILOTS,
    rng: RngStream | None = None,
    opts: TrainOptions | None = None,
) -> TrainedReceiver:
    """Train an ANN demodulator on known pilots sent through the impaired link.

    One network per rail; each maps the normalised received rail to the sign
    of the transmitted rail. The link is odd (negating SOI, blockers and noise
    negates the received sample), so every pilot is also used mirrored. That
    pins the learned decision threshold at zero instead of wherever the finite
    noise sample puts it.
    """
    if n_pilots < 1:
        raise ValueError("n_pilots must be >= 1")
    rng = rng or RngStream(scenario.seed)
    mod = scenario.modulation
    link = simulate_link(scenario, frontend, n_pilots, rng.derive(_DATA_STREAM))
    scale = _rms(link.received)
    rail_amp = float(np.sqrt(scenario.soi_power.watts / mod.bits_per_symbol))
    inputs = _rails(link.received, mod) / scale
    targets = np.sign(_rails(link.soi, mod))
    inputs, targets = np.vstack([inputs, -inputs]), np.vstack([targets, -targets])
    nets, epochs, stops = [], [], []
    for k, config in enumerate(architecture(ReceiverKind.ANN_DEMODULATOR, mod)):
        net0 = init_weights(config, rng.derive(_INIT_STREAM, k))
        net, state, _ = train_br(net0, TrainingSet(inputs[:, [k]], targets[:, [k]]), opts or TRAIN_OPTIONS)
        nets.append(net)
        epochs.append(state.epoch)
        stops.append(state.stop_reason)
    return TrainedReceiver(
        ReceiverKind.ANN_DEMODULATOR,
        mod,
        tuple(nets),
        scale_ref=scale,
        symbol_scale=rail_amp,
        scenario=scenario,
        train_info={"n_pilots": n_pilots, "epochs": epochs, "stop": stops,
                    "stream_id": rng.stream_id},
    )


def train_receiver(
    kind: ReceiverKind,
    scenario: Scenario,
    frontend: FrontEndModel | None = None,
    n_train: int | None = None,
    rng: RngStream | None = None,
    opts: TrainOptions | None = None,
) -> TrainedReceiver:
    """Build a receiver of any kind for ``scenario`` (no training for conventional)."""
    kind = ReceiverKind.parse(kind)
    frontend = frontend or scenario.frontend()
    if kind is ReceiverKind.CONVENTIONAL:
        return TrainedReceiver(kind, scenario.modulation, scenario=scenario)
    if kind is ReceiverKind.ANN_CANCELER:
        return train_canceler(scenario, frontend, n_train or DEFAULT_N_TRAIN, rng, opts)
    return train_demodulator(scenario, frontend, n_train or DEFAULT_N_PILOTS, rng, opts)
