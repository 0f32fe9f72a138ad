"""Monte-Carlo BER estimation, parameter sweeps and CSV records."""

from __future__ import annotations

import csv
import io
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from statistics import median

import numpy as np
from scipy.special import erfc

from .neuralnet import TrainingDiverged, TrainOptions
from .receivers import ReceiverKind, detect, train_receiver
from .scenario import Scenario, simulate_link
from .sigproc import Modulation, RngStream

log = logging.getLogger(__name__)

CSV_COLUMNS = (
    "modulation",
    "receiver",
    "ebn0_db",
    "iip3_dbm",
    "blocker_offset_db",
    "noise_dbw",
    "bits_tested",
    "bit_errors",
    "ber",
    "seed",
    "train_seed",
    "wall_ms",
    "status",
)

# first evaluation batch, in symbols; later batches double up to the maximum
FIRST_BATCH = 1 << 14
MAX_BATCH = 1 << 20

_TRAIN_STREAM = 1
_EVAL_STREAM = 2

AXES = {"ebn0": "ebn0_db", "iip3": "iip3_dbm"}


def theoretical_ber(modulation: Modulation, ebn0_db):
    """Coherent BPSK / Gray-QPSK bit error rate in AWGN, ``Q(sqrt(2 Eb/N0))``."""
    Modulation.parse(modulation)
    ebn0 = 10.0 ** (np.asarray(ebn0_db, dtype=float) / 10.0)
    ber = 0.5 * erfc(np.sqrt(ebn0))
    return float(ber) if np.ndim(ber) == 0 else ber


def binomial_sigma(p: float, n: int) -> float:
    """Standard deviation of a BER estimate from ``n`` bits when the truth is ``p``."""
    return math.sqrt(p * (1.0 - p) / n) if n > 0 else math.inf


@dataclass(frozen=True)
class StopRule:
    min_errors: int = 100
    max_bits: int = 10_000_000

    def __post_init__(self):
        if self.min_errors < 1:
            raise ValueError("min_errors must be >= 1")
        if self.max_bits < 1:
            raise ValueError("max_bits must be >= 1")


@dataclass
class BerRecord:
    modulation: Modulation
    receiver: ReceiverKind
    ebn0_db: float
    iip3_dbm: float | None
    blocker_offset_db: float | None
    noise_dbw: float
    bits_tested: int
    bit_errors: int
    ber: float
    seed: int
    train_seed: int
    wall_ms: int = 0
    status: str = "ok"

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def sigma(self, p: float | None = None) -> float:
        """Binomial standard deviation at ``p`` (default: the measured BER)."""
        return binomial_sigma(self.ber if p is None else p, self.bits_tested)


@dataclass(frozen=True)
class SweepSpec:
    axis: str
    values: tuple[float, ...]
    receivers: tuple[ReceiverKind, ...] = tuple(ReceiverKind)
    stop_rule: StopRule = field(default_factory=StopRule)
    repeats: int = 1

    def __post_init__(self):
        if self.axis not in AXES:
            raise ValueError(f"axis must be one of {sorted(AXES)}, got {self.axis!r}")
        values = tuple(float(v) for v in self.values)
        if not values:
            raise ValueError("sweep values must be non-empty")
        steps = np.diff(values)
        if len(values) > 1 and not ((steps > 0).all() or (steps < 0).all()):
            raise ValueError("sweep values must be strictly monotone")
        receivers = tuple(ReceiverKind.parse(r) for r in self.receivers)
        if not receivers:
            raise ValueError("at least one receiver is required")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "receivers", receivers)

    def points(self, base: Scenario) -> list[tuple[Scenario, ReceiverKind]]:
        """Scenarios in output order, each seeded from ``(base.seed, point index)``."""
        root = RngStream(base.seed)
        out = []
        for value in self.values:
            for receiver in self.receivers:
                for _ in range(self.repeats):
                    seed = root.derive(len(out)).stream_id
                    out.append((base.replace(**{AXES[self.axis]: value, "seed": seed}), receiver))
        return out


def _record(scenario: Scenario, receiver: ReceiverKind, bits: int, errors: int, train_seed: int,
            wall_ms: int, status: str = "ok") -> BerRecord:
    return BerRecord(
        modulation=scenario.modulation,
        receiver=receiver,
        ebn0_db=scenario.ebn0_db,
        iip3_dbm=scenario.iip3_dbm,
        blocker_offset_db=scenario.blocker_offset_db,
        noise_dbw=scenario.noise_dbw,
        bits_tested=bits,
        bit_errors=errors,
        ber=errors / bits if bits else math.nan,
        seed=scenario.seed,
        train_seed=train_seed,
        wall_ms=wall_ms,
        status=status,
    )


def run_point(
    scenario: Scenario,
    receiver: ReceiverKind,
    stop_rule: StopRule = StopRule(),
    *,
    n_train: int | None = None,
    train_opts: TrainOptions | None = None,
    timing: bool = False,
) -> BerRecord:
    """Train ``receiver`` for ``scenario`` (if it has networks) and measure its BER.

    Fresh data batches are streamed until ``stop_rule.min_errors`` errors or
    ``stop_rule.max_bits`` bits. Training and evaluation use distinct streams
    derived from ``scenario.seed``. A training failure yields a record with
    zero bits and an ``error:`` status. ``wall_ms`` is 0 unless ``timing``.
    """
    receiver = ReceiverKind.parse(receiver)
    start = time.perf_counter()
    root = RngStream(scenario.seed)
    train_rng, eval_rng = root.derive(_TRAIN_STREAM), root.derive(_EVAL_STREAM)
    frontend = scenario.frontend()

    def elapsed() -> int:
        return int(round((time.perf_counter() - start) * 1000)) if timing else 0

    try:
        rx = train_receiver(receiver, scenario, frontend, n_train, train_rng, train_opts)
    except (TrainingDiverged, ValueError, np.linalg.LinAlgError) as exc:
        log.warning("training failed for %s at %s: %s", receiver.value, scenario, exc)
        return _record(scenario, receiver, 0, 0, train_rng.stream_id, elapsed(),
                       f"error: {exc}")

    k = scenario.modulation.bits_per_symbol
    bits = errors = 0
    batch, index = FIRST_BATCH, 0
    while errors < stop_rule.min_errors and bits + k <= stop_rule.max_bits:
        n_sym = min(batch, (stop_rule.max_bits - bits) // k)
        link = simulate_link(scenario, frontend, n_sym, eval_rng.derive(index))
        decided = detect(rx, link.received, frontend.alpha1)
        errors += int(np.count_nonzero(decided != link.bits))
        bits += link.bits.size
        batch, index = min(2 * batch, MAX_BATCH), index + 1
    return _record(scenario, receiver, bits, errors, train_rng.stream_id, elapsed())


def _run_point_args(args):
    return run_point(*args[:3], **args[3])


def sweep(
    spec: SweepSpec,
    base: Scenario,
    *,
    n_train: int | None = None,
    train_opts: TrainOptions | None = None,
    timing: bool = False,
    workers: int = 1,
) -> list[BerRecord]:
    """Run every (value, receiver, repeat) point of ``spec`` around ``base``.

    Records come back in point order whatever ``workers`` is.
    """
    kwargs = {"n_train": n_train, "train_opts": train_opts, "timing": timing}
    jobs = [(sc, rx, spec.stop_rule, kwargs) for sc, rx in spec.points(base)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run_point_args, jobs))
    records = []
    for i, job in enumerate(jobs):
        records.append(_run_point_args(job))
        log.info("point %d/%d %s %s=%s ber=%.3g", i + 1, len(jobs), job[1].value, spec.axis,
                 getattr(job[0], AXES[spec.axis]), records[-1].ber)
    return records


def median_records(records: list[BerRecord]) -> list[BerRecord]:
    """One record per operating point and receiver: the median-BER repeat.

    Failed repeats rank as worst. With an even count the lower middle is
    taken. Groups keep first-appearance order.
    """
    groups: dict[tuple, list[BerRecord]] = {}
    for rec in records:
        key = (rec.modulation, rec.receiver, rec.ebn0_db, rec.iip3_dbm, rec.blocker_offset_db,
               rec.noise_dbw)
        groups.setdefault(key, []).append(rec)
    out = []
    for group in groups.values():
        ranked = sorted(group, key=lambda r: r.ber if r.ok else math.inf)
        out.append(ranked[(len(ranked) - 1) // 2])
    return out


def median_ber(records: list[BerRecord]) -> float:
    return median(r.ber if r.ok else math.inf for r in records)


# CSV -----------------------------------------------------------------------


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (Modulation, ReceiverKind)):
        return value.value
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_csv(records: list[BerRecord]) -> str:
    """CSV text with the fixed column order; ``ber`` carries 17 significant digits.

    A linear front end is written as ``iip3_dbm=linear`` and disabled blockers
    as ``blocker_offset_db=off``.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for rec in records:
        row = {name: _fmt(getattr(rec, name)) for name in CSV_COLUMNS}
        row["ber"] = format(rec.ber, ".17g")
        if rec.iip3_dbm is None:
            row["iip3_dbm"] = "linear"
        if rec.blocker_offset_db is None:
            row["blocker_offset_db"] = "off"
        writer.writerow([row[name] for name in CSV_COLUMNS])
    return buf.getvalue()


def write_csv(records: list[BerRecord], path) -> None:
    """Write :func:`format_csv` output as UTF-8 with LF line endings."""
    path = Path(path)
    try:
        path.write_bytes(format_csv(records).encode("utf-8"))
    except OSError as exc:
        raise OSError(f"cannot write BER records to {path}: {exc}") from exc


def _optional_float(text: str, none_token: str) -> float | None:
    return None if text in ("", none_token) else float(text)


def read_csv(path) -> list[BerRecord]:
    path = Path(path)
    try:
        with path.open(encoding="utf-8", newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise OSError(f"cannot read BER records from {path}: {exc}") from exc
    return [
        BerRecord(
            modulation=Modulation.parse(row["modulation"]),
            receiver=ReceiverKind.parse(row["receiver"]),
            ebn0_db=float(row["ebn0_db"]),
            iip3_dbm=_optional_float(row["iip3_dbm"], "linear"),
            blocker_offset_db=_optional_float(row["blocker_offset_db"], "off"),
            noise_dbw=float(row["noise_dbw"]),
            bits_tested=int(row["bits_tested"]),
            bit_errors=int(row["bit_errors"]),
            ber=float(row["ber"]),
            seed=int(row["seed"]),
            train_seed=int(row["train_seed"]),
            wall_ms=int(row["wall_ms"]),
            status=row["status"],
        )
        for row in rows
    ]

