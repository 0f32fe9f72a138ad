"""The acceptance checks, runnable from the CLI (``validate``) and from pytest.

Each check returns a :class:`CheckResult`; none of them raise on a failed
criterion. Tolerances are fixed here and never depend on the outcome.
"""

from __future__ import annotations

import math
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .frontend import alpha3_from_iip3, iip3_from_alphas
from .harness import (
    SweepSpec,
    binomial_sigma,
    median_records,
    run_point,
    sweep,
    theoretical_ber,
)
from .neuralnet import (
    MlpConfig,
    TrainingSet,
    TrainOptions,
    init_weights,
    jacobian,
    residuals,
    train_br,
)
from .receivers import ReceiverKind, TrainedReceiver, cancel_and_demodulate, demod_conventional, detect
from .scenario import Scenario, simulate_link
from .sigproc import Modulation, RngStream

SUITE_SEED = 20240601
AWGN_FACTOR = 5.0
N_SIGMA = 3.0
HIGH_IMD_IIP3 = (-20.0, -10.0)
FIG4_IIP3 = tuple(float(v) for v in range(-30, 21, 5))
MEDIAN_REPEATS = 5


@dataclass(frozen=True)
class CheckResult:
    number: int
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.number}. {self.name}: {self.detail}"


def _within_sigma(ber: float, truth: float, bits: int) -> bool:
    return abs(ber - truth) <= N_SIGMA * binomial_sigma(truth, bits)


def check_linear_calibration(seed: int = SUITE_SEED, workers: int = 1) -> CheckResult:
    worst = []
    passed = True
    for mod in Modulation:
        base = Scenario(modulation=mod, iip3_dbm=None, seed=seed)
        spec = SweepSpec("ebn0", (0, 2, 4, 6, 8), receivers=(ReceiverKind.CONVENTIONAL,))
        for rec in sweep(spec, base, workers=workers):
            truth = theoretical_ber(mod, rec.ebn0_db)
            ok = rec.ok and rec.bit_errors >= 100 and _within_sigma(rec.ber, truth, rec.bits_tested)
            passed &= ok
            z = (rec.ber - truth) / binomial_sigma(truth, rec.bits_tested)
            worst.append((abs(z), f"{mod.value}@{rec.ebn0_db:g}dB z={z:+.2f}"))
    return CheckResult(1, "linear-channel calibration", passed,
                       f"10 points within {N_SIGMA:g} sigma, worst {max(worst)[1]}")


def check_iip3_math() -> CheckResult:
    grid = np.linspace(-40.0, 30.0, 701)
    err = max(abs(iip3_from_alphas(1.0, alpha3_from_iip3(p).alpha3) - p) for p in grid)
    a10 = alpha3_from_iip3(-10.0).iip3_voltage
    a20 = alpha3_from_iip3(-20.0).iip3_voltage
    ok = err < 1e-9 and math.isclose(a10, 0.1, rel_tol=1e-12) and math.isclose(a20, 10 ** -1.5, rel_tol=1e-12)
    ok &= round(a20, 6) == 0.031623
    return CheckResult(2, "IIP3 arithmetic", ok,
                       f"round-trip max err {err:.1e} dB; A(-10)={a10:.6g} V, A(-20)={a20:.6f} V")


def check_conventional_failure(seed: int = SUITE_SEED) -> CheckResult:
    bers = {}
    for iip3 in HIGH_IMD_IIP3:
        rec = run_point(Scenario(iip3_dbm=iip3, seed=seed), ReceiverKind.CONVENTIONAL)
        bers[iip3] = rec.ber
    ok = all(b >= 0.1 for b in bers.values())
    return CheckResult(3, "conventional receiver fails under strong IMD", ok,
                       ", ".join(f"IIP3 {k:g} dBm BER={v:.3f}" for k, v in bers.items()) + " (need >= 0.1)")


def check_ann_rescue(seed: int = SUITE_SEED, workers: int = 1) -> CheckResult:
    limit = AWGN_FACTOR * theoretical_ber(Modulation.BPSK, 8.0)
    parts, ok = [], True
    for mod in Modulation:
        spec = SweepSpec("iip3", HIGH_IMD_IIP3, receivers=(ReceiverKind.ANN_CANCELER, ReceiverKind.ANN_DEMODULATOR),
                         repeats=MEDIAN_REPEATS)
        for rec in median_records(sweep(spec, Scenario(modulation=mod, seed=seed), workers=workers)):
            ok &= rec.ok and rec.ber <= limit
            parts.append(f"{mod.value}/{rec.receiver.value}@{rec.iip3_dbm:g}={rec.ber:.2e}")
    return CheckResult(4, "ANN receivers near AWGN under strong IMD", ok,
                       f"medians of {MEDIAN_REPEATS} seeds vs limit {limit:.3e}: " + ", ".join(parts))


def check_iip3_sweep(seed: int = SUITE_SEED, workers: int = 1) -> CheckResult:
    awgn = theoretical_ber(Modulation.BPSK, 8.0)
    spec = SweepSpec("iip3", FIG4_IIP3, repeats=MEDIAN_REPEATS)
    medians = median_records(sweep(spec, Scenario(seed=seed), workers=workers))
    table = {(r.receiver, r.iip3_dbm): r for r in medians}
    conv, canc = ReceiverKind.CONVENTIONAL, ReceiverKind.ANN_CANCELER

    a = all(table[conv, p].ber >= 0.1 for p in FIG4_IIP3 if p <= -10)
    b = all(_within_sigma(table[conv, p].ber, awgn, table[conv, p].bits_tested) for p in FIG4_IIP3 if p >= 15)
    c = all(table[canc, p].ok and table[canc, p].ber <= AWGN_FACTOR * awgn for p in FIG4_IIP3 if p <= -10)
    d_recs = [table[k, 20.0] for k in ReceiverKind]
    d = all(r.ok and _within_sigma(r.ber, awgn, r.bits_tested) for r in d_recs)
    at20 = ", ".join(f"{r.receiver.value}={r.ber:.3e}" for r in d_recs)
    detail = f"(a) {'ok' if a else 'FAIL'} (b) {'ok' if b else 'FAIL'} (c) {'ok' if c else 'FAIL'} " \
             f"(d) {'ok' if d else 'FAIL'}; at +20 dBm {at20} vs AWGN {awgn:.3e}"
    return CheckResult(5, "IIP3 sweep shape", a and b and c and d, detail)


def fd_jacobian(net, training: TrainingSet, h: float = 1e-6) -> np.ndarray:
    """Central finite-difference Jacobian of the residual vector."""
    w = net.to_vector()
    cols = []
    for k in range(w.size):
        step = np.zeros_like(w)
        step[k] = h
        plus = residuals(type(net).from_vector(net.config, w + step), training)
        minus = residuals(type(net).from_vector(net.config, w - step), training)
        cols.append((plus - minus) / (2 * h))
    return np.column_stack(cols)


def jacobian_rel_error(net, training: TrainingSet) -> float:
    """Largest element-wise relative error of :func:`jacobian` against finite differences.

    Entries smaller than 1e-3 are divided by 1e-3 instead, so a 1e-6 bound on
    them is an absolute 1e-9, about the round-off floor of the differences.
    """
    exact = jacobian(net, training)
    approx = fd_jacobian(net, training)
    return float(np.max(np.abs(exact - approx) / np.maximum(np.abs(approx), 1e-3)))


def check_jacobian(seed: int = SUITE_SEED) -> CheckResult:
    root = RngStream(seed, 6)
    worst = 0.0
    for cfg in (MlpConfig(1, 4, 1), MlpConfig(2, 4, 2)):
        for i in range(20):
            gen = root.derive(cfg.n_in, i).generator()
            net = init_weights(cfg, root.derive(cfg.n_in, i, 0), std=1.0)
            data = TrainingSet(gen.uniform(-2, 2, (8, cfg.n_in)), gen.uniform(-1, 1, (8, cfg.n_out)))
            worst = max(worst, jacobian_rel_error(net, data))
    return CheckResult(6, "analytic Jacobian", worst < 1e-6,
                       f"40 nets, worst element-wise relative error {worst:.2e} (need < 1e-6)")


def check_trainer(seed: int = SUITE_SEED) -> CheckResult:
    root = RngStream(seed, 7)
    x = np.linspace(-1, 1, 50)
    problems: list[tuple[str, MlpConfig, TrainingSet]] = [("y=2x", MlpConfig(1, 4, 1), TrainingSet(x, 2 * x))]
    gen = root.derive(1).generator()
    xs = gen.uniform(-2, 2, (200, 2))
    problems.append(("noisy 2-4-2", MlpConfig(2, 4, 2),
                     TrainingSet(xs, np.column_stack([np.sin(xs[:, 0]), xs[:, 0] * xs[:, 1]])
                                 + 0.05 * gen.standard_normal((200, 2)))))
    problems.append(("noisy sine", MlpConfig(1, 4, 1),
                     TrainingSet(xs[:, 0], np.sin(2 * xs[:, 0]) + 0.1 * gen.standard_normal(200))))
    gamma_ok = mono_ok = True
    fit = math.nan
    for k, (name, cfg, data) in enumerate(problems):
        net, state, history = train_br(init_weights(cfg, root.derive(2, k)), data, TrainOptions())
        for rec in history:
            gamma_ok &= -1e-9 <= rec.gamma <= cfg.n_weights + 1e-9
            mono_ok &= rec.objective_after <= rec.objective_before
        if name == "y=2x":
            fit = 0.5 * float(np.sum(residuals(net, data) ** 2)) / data.targets.size
            fit_epochs = state.epoch
    fit_ok = fit < 1e-8 and fit_epochs <= 200
    return CheckResult(7, "Bayesian-regularised LM trainer", gamma_ok and mono_ok and fit_ok,
                       f"gamma in [0, N_w]: {gamma_ok}; objective non-increasing: {mono_ok}; "
                       f"y=2x E_D/M={fit:.1e} after {fit_epochs} epochs")


def check_oracle_cancellation(seed: int = SUITE_SEED, n_symbols: int = 500_000) -> CheckResult:
    root = RngStream(seed, 8)
    parts, ok = [], True
    for mod in Modulation:
        scenario = Scenario(modulation=mod, iip3_dbm=-20.0, seed=seed)
        rng = root.derive(list(Modulation).index(mod))
        nonlinear = simulate_link(scenario, scenario.frontend(), n_symbols, rng)
        linear = simulate_link(scenario, scenario.replace(iip3_dbm=None).frontend(), n_symbols, rng)
        oracle = cancel_and_demodulate(nonlinear.received, nonlinear.imd, mod)
        reference = demod_conventional(linear.received, mod)
        same = np.array_equal(oracle, reference)
        ok &= same
        errors = int(np.count_nonzero(oracle != nonlinear.bits))
        parts.append(f"{mod.value} identical={same} BER={errors / oracle.size:.3e}")
    return CheckResult(8, "oracle cancellation equals linear receiver", ok, "; ".join(parts))


def check_cli_determinism(seed: int = SUITE_SEED) -> CheckResult:
    from .cli import main

    runs = {
        "sweep-ebn0": ["--mod", "qpsk", "--ebn0", "0:8:4", "--iip3", "linear", "--receivers", "conventional"],
        "sweep-iip3": ["--mod", "bpsk", "--iip3=-20,20", "--receivers", "all", "--max-bits", "200000"],
    }
    same = {}
    with tempfile.TemporaryDirectory() as tmp:
        for command, args in runs.items():
            blobs = []
            for k in range(2):
                out = Path(tmp) / f"{command}-{k}.csv"
                code = main([command, *args, "--seed", str(seed), "--repeats", "2", "--out", str(out)])
                blobs.append(out.read_bytes() if code == 0 and out.exists() else None)
            same[command] = blobs[0] is not None and blobs[0] == blobs[1]
    return CheckResult(9, "deterministic sweep CSV", all(same.values()),
                       ", ".join(f"{k} byte-identical={v}" for k, v in same.items()))


def check_model(path, n_bits: int = 1_000_000) -> CheckResult:
    """Evaluate a saved receiver at the operating point it was trained for.

    It passes when its BER is within 5x AWGN or no worse (at 3 sigma) than the
    conventional receiver on the same data.
    """
    rx = TrainedReceiver.loads(Path(path).read_text(encoding="utf-8"))
    scenario = rx.scenario or Scenario(modulation=rx.modulation)
    n_sym = n_bits // rx.modulation.bits_per_symbol
    fe = scenario.frontend()
    link = simulate_link(scenario, fe, n_sym, RngStream(scenario.seed).derive(9))
    ber = float(np.mean(detect(rx, link.received, fe.alpha1) != link.bits))
    conv = float(np.mean(demod_conventional(link.received, rx.modulation, fe.alpha1) != link.bits))
    awgn = theoretical_ber(rx.modulation, scenario.ebn0_db)
    ok = ber <= AWGN_FACTOR * awgn or ber <= conv + N_SIGMA * binomial_sigma(max(conv, 1 / n_bits), link.bits.size)
    return CheckResult(0, f"model {Path(path).name}", ok,
                       f"{rx.kind.value}/{rx.modulation.value} BER={ber:.3e} conventional={conv:.3e} AWGN={awgn:.3e}")


CHECKS: dict[int, Callable[..., CheckResult]] = {
    1: check_linear_calibration,
    2: check_iip3_math,
    3: check_conventional_failure,
    4: check_ann_rescue,
    5: check_iip3_sweep,
    6: check_jacobian,
    7: check_trainer,
    8: check_oracle_cancellation,
    9: check_cli_determinism,
}
_PARALLEL = {1, 4, 5}


def run_check(number: int, seed: int = SUITE_SEED, workers: int = 1) -> CheckResult:
    fn = CHECKS[number]
    if number == 2:
        return fn()
    if number in _PARALLEL:
        return fn(seed=seed, workers=workers)
    return fn(seed=seed)


def run_all(seed: int = SUITE_SEED, workers: int = 1, only=None) -> list[CheckResult]:
    return [run_check(n, seed, workers) for n in sorted(only or CHECKS)]
