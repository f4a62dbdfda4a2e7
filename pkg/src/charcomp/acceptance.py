"""Acceptance checks shared by the test suite and ``charcomp selftest``.

Each check takes its sample sizes as arguments, so the self test can run the
same code at reduced scale. A check returns a :class:`CheckResult` holding the
measured statistics; the thresholds live next to the measurements.
"""
from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .characterize import (
    NoiseSpec,
    TomographyConfig,
    characterize,
    controlled_c1,
    controlled_unitary,
    kak_c1,
    random_controlled_model,
)
from .circuit import (
    BenchNoiseModel,
    compile_circuit,
    equivalent,
    exact_trotter_magnetization,
    magnetization,
    qft_circuit,
    random_circuit,
    replicate_gateset,
    simulate_counts,
    statevector,
    trotter_tfim_circuit,
    with_measurement_basis,
)
from .coverage import GateSet, build_coverage_set, example_gateset, make_pulse_gate, random_chamber_points
from .linalg import ECR, SWAP, haar_su, phase_aligned_diff, process_infidelity, random_local, zyz
from .synth_closedform import delta_interval, synthesize_single_axis_key, three_pulse_plan, two_pulse_feasible
from .synth_numeric import OptimizerConfig, match_invariants, sequence_unitary, synthesize_block, synthesize_numeric
from .weyl import canonical_gate, canonical_invariants, makhlin_invariants


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    metrics: dict = field(default_factory=dict)

    def line(self) -> str:
        shown = ", ".join(f"{k}={_fmt(v)}" for k, v in self.metrics.items())
        return f"[{'PASS' if self.passed else 'FAIL'}] criterion {self.number}: {self.name} ({shown})"

    def to_json(self) -> dict:
        return {"number": self.number, "name": self.name, "passed": self.passed,
                "metrics": {k: _plain(v) for k, v in self.metrics.items()}}


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.4g}"
    return str(v)


def _plain(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, (np.bool_,)):
        return bool(v)
    return v


def _random_inner(n_pulses: int, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(-np.pi, np.pi, size=(2 * (n_pulses - 1), 3))


def _random_unitary_near(c, rng: np.random.Generator) -> np.ndarray:
    return random_local(rng) @ canonical_gate(c) @ random_local(rng)


def invariant_matching(n: int = 1000, seed: int = 0) -> CheckResult:
    """Three Haar-random pulses with random interleaved locals; 5 starts, 100 steps, 1e-10."""
    rng = np.random.default_rng(seed)
    config = OptimizerConfig(max_steps=100, n_starts=5, threshold=1e-10, seed=seed)
    ok = 0
    t0 = time.perf_counter()
    for _ in range(n):
        pulses = [haar_su(4, rng) for _ in range(3)]
        target = sequence_unitary(pulses, _random_inner(3, rng))
        ok += match_invariants(pulses, target, config).success
    elapsed = time.perf_counter() - t0
    rate = ok / n
    return CheckResult(1, "invariant-matching success rate", rate >= 0.98 and elapsed < 300,
                       {"targets": n, "success_rate": rate, "seconds": elapsed})


def optimizer_effort(n: int = 1000, seed: int = 1) -> CheckResult:
    """Median total BFGS steps to reach loss 1e-7."""
    rng = np.random.default_rng(seed)
    config = OptimizerConfig(max_steps=100, n_starts=5, threshold=1e-7, seed=seed)
    steps = []
    for _ in range(n):
        pulses = [haar_su(4, rng) for _ in range(3)]
        target = sequence_unitary(pulses, _random_inner(3, rng))
        steps.append(match_invariants(pulses, target, config).steps)
    med = float(np.median(steps))
    return CheckResult(2, "optimizer effort band", 10 <= med <= 100, {"targets": n, "median_steps": med})


def _single_axis_gateset(a: float, b: float, rng: np.random.Generator) -> GateSet:
    gates = (make_pulse_gate("A", _random_unitary_near((a, 0, 0), rng), 100.0),
             make_pulse_gate("B", _random_unitary_near((b, 0, 0), rng), 90.0),
             make_pulse_gate("ECR", ECR, 320.0))
    return GateSet((0, 1), gates, 60.0)


def closed_form_vs_numeric(n: int = 100, seed: int = 2) -> CheckResult:
    """Both paths on random feasible base-plane targets; closed form at least 10x faster."""
    rng = np.random.default_rng(seed)
    config = OptimizerConfig(seed=seed)
    worst_cf = worst_num = 0.0
    t_cf = t_num = 0.0
    done = 0
    while done < n:
        a, b = rng.uniform(0.05, np.pi / 2, size=2)
        c = random_chamber_points(1, rng)[0]
        c = (c[0], c[1], 0.0)
        if not two_pulse_feasible(c, a, b):
            continue
        gs = _single_axis_gateset(a, b, rng)
        key = (0, 1)
        target = _random_unitary_near(c, rng)
        t0 = time.perf_counter()
        cf = synthesize_single_axis_key(target, key, gs)
        t1 = time.perf_counter()
        num = synthesize_numeric(target, key, gs, config)
        t2 = time.perf_counter()
        t_cf += t1 - t0
        t_num += t2 - t1
        worst_cf = max(worst_cf, cf.error)
        worst_num = max(worst_num, num.error)
        done += 1
    speedup = t_num / t_cf
    return CheckResult(3, "closed-form and numeric agree", worst_cf < 1e-8 and worst_num < 1e-8 and speedup >= 10,
                       {"targets": n, "closed_form_worst": worst_cf, "numeric_worst": worst_num, "speedup": speedup})


def three_pulse_swap(seed: int = 3) -> CheckResult:
    """SWAP from three CX-class pulses, and a delta sweep over [L, U]."""
    rng = np.random.default_rng(seed)
    gates = tuple(make_pulse_gate(f"S{i}", _random_unitary_near((np.pi / 2, 0, 0), rng), 320.0) for i in range(3))
    gs = GateSet((0, 1), gates, 60.0)
    res = synthesize_single_axis_key(SWAP, (0, 1, 2), gs)
    c = (np.pi / 2,) * 3
    ceff = (np.pi / 2,) * 3
    lower, upper = delta_interval(c, ceff)
    sweep = [phase_aligned_diff(three_pulse_plan(c, ceff, d).circuit(), canonical_gate(c))
             for d in np.linspace(lower, upper, 5)]
    return CheckResult(4, "three-pulse SWAP", res.error < 1e-9 and max(sweep) < 1e-9,
                       {"swap_error": res.error, "sweep_worst": max(sweep), "L": lower, "U": upper})


def characterization_fidelity(n: int = 50, seed: int = 4) -> CheckResult:
    """Noisy median infidelity and noiseless exact recovery over random models."""
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    noisy, exact = [], []
    for i in range(n):
        m = random_controlled_model(rng)
        truth = controlled_unitary(m)
        fit = characterize(m, TomographyConfig((1, 2, 4, 8), 128, seed=seed * 1000 + i), NoiseSpec(1e-2)).model
        noisy.append(process_infidelity(controlled_unitary(fit), truth))
        fit = characterize(m, TomographyConfig((1, 2, 4, 8), 128, seed=i, exact=True), NoiseSpec(0.0)).model
        exact.append(process_infidelity(controlled_unitary(fit), truth))
    elapsed = time.perf_counter() - t0
    med = float(np.median(noisy))
    return CheckResult(5, "characterization fidelity", med <= 5e-3 and max(exact) <= 1e-8 and elapsed < 600,
                       {"models": n, "noisy_median": med, "exact_worst": max(exact), "seconds": elapsed})


def controlled_c1_formula(n: int = 1000, seed: int = 5) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = max(abs(controlled_c1(m) - kak_c1(m)) for m in (random_controlled_model(rng) for _ in range(n)))
    return CheckResult(6, "controlled-pulse c1 formula", worst <= 1e-9, {"models": n, "worst": worst})


def canonical_invariant_formula(n: int = 1000, seed: int = 6) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for c in random_chamber_points(n, rng):
        a = canonical_invariants(c)
        b = makhlin_invariants(canonical_gate(c))
        worst = max(worst, abs(a.g1 - b.g1), abs(a.g2 - b.g2))
    golden = [((0, 0, 0), 1, 3), ((np.pi / 2, 0, 0), 0, 1), ((np.pi / 2,) * 3, -1j, -3)]
    gold = 0.0
    for c, g1, g2 in golden:
        inv = canonical_invariants(c)
        gold = max(gold, abs(inv.g1 - g1), abs(inv.g2 - g2))
    return CheckResult(7, "canonical invariants closed form", worst <= 1e-12 and gold <= 1e-12,
                       {"points": n, "worst": worst, "golden_worst": gold})


def _all_pairs(n: int, gateset: GateSet | None = None) -> dict:
    return replicate_gateset(gateset or example_gateset(), itertools.combinations(range(n), 2))


def compilation_soundness(n: int = 100, seed: int = 7) -> CheckResult:
    rng = np.random.default_rng(seed)
    table = _all_pairs(4)
    worst = 0.0
    dominated = True
    for _ in range(n):
        nq = int(rng.integers(2, 5))
        c = random_circuit(nq, int(rng.integers(1, 31)), rng)
        ext = compile_circuit(c, table, "extended")
        base = compile_circuit(c, table, "spe_only")
        worst = max(worst, equivalent(c, ext.circuit), equivalent(c, base.circuit))
        dominated &= ext.total_two_qubit_duration <= base.total_two_qubit_duration + 1e-9
    return CheckResult(8, "end-to-end compilation soundness", worst < 1e-7 and dominated,
                       {"circuits": n, "worst_infidelity": worst, "extended_never_longer": dominated})


def qft_benchmark(widths=range(3, 9), seeds: int = 20, shots: int = 4096, seed: int = 8,
                  noise: BenchNoiseModel | None = None) -> CheckResult:
    noise = noise or BenchNoiseModel()
    table = _all_pairs(max(widths))
    rng = np.random.default_rng(seed)
    fractions = {}
    for n in widths:
        wins = 0
        for s in range(seeds):
            target = "".join(rng.choice(["0", "1"], size=n))
            c = qft_circuit(n, target)
            p = []
            for mode in ("extended", "spe_only"):
                compiled = compile_circuit(c, table, mode).circuit
                counts = simulate_counts(compiled, shots, noise, seed=seed * 100000 + 1000 * n + s)
                p.append(counts.get(target, 0) / shots)
            wins += p[0] >= p[1]
        fractions[n] = wins / seeds
    worst = min(fractions.values())
    return CheckResult(9, "QFT benchmark directionality", worst >= 0.9,
                       {"seeds": seeds, "worst_width_fraction": worst,
                        "fractions": {str(k): v for k, v in fractions.items()}})


def trotter_runs(n_qubits: int, steps: int, table: dict, noise: BenchNoiseModel | None, shots: int,
                 seed: int) -> dict:
    """Per-mode ``<Y>``/``<Z>`` trajectories for steps ``0..steps``."""
    out = {m: {"Y": [], "Z": []} for m in ("extended", "spe_only")}
    for s in range(steps + 1):
        c = trotter_tfim_circuit(n_qubits, s)
        for mode in out:
            compiled = compile_circuit(c, table, mode).circuit if c.gates else c
            for axis in ("Y", "Z"):
                meas = with_measurement_basis(compiled, axis)
                if noise is None:
                    out[mode][axis].append(magnetization(statevector(compiled), axis))
                else:
                    counts = simulate_counts(meas, shots, noise, seed=seed * 1000 + 10 * s + (axis == "Y"))
                    out[mode][axis].append(magnetization(counts, axis))
    return out


def trotter_benchmark(n_qubits: int = 4, steps: int = 6, seeds: int = 20, shots: int = 4096, seed: int = 9,
                      noise: BenchNoiseModel | None = None) -> CheckResult:
    noise = noise or BenchNoiseModel()
    table = replicate_gateset(example_gateset(), [(i, i + 1) for i in range(n_qubits - 1)])
    exact = exact_trotter_magnetization(n_qubits, steps)
    clean = trotter_runs(n_qubits, steps, table, None, shots, seed)
    noiseless_err = max(abs(a - b) for m in clean.values() for axis in ("Y", "Z")
                        for a, b in zip(m[axis], exact[axis]))
    wins = 0
    for s in range(seeds):
        runs = trotter_runs(n_qubits, steps, table, noise, shots, seed * 100 + s)
        mse = {mode: np.mean([(a - b) ** 2 for axis in ("Y", "Z") for a, b in zip(runs[mode][axis], exact[axis])])
               for mode in runs}
        wins += mse["extended"] <= mse["spe_only"]
    frac = wins / seeds
    return CheckResult(10, "Trotter benchmark", noiseless_err <= 1e-9 and frac >= 0.9,
                       {"noiseless_worst": noiseless_err, "seeds": seeds, "extended_better_fraction": frac})


def coverage_completeness(n: int = 10000, seed: int = 10) -> CheckResult:
    rng = np.random.default_rng(seed)
    gs = example_gateset()
    cov = build_coverage_set(gs)
    unmatched = failed = 0
    for c in random_chamber_points(n, rng):
        if not any(e.polytope.contains(c) for e in cov.entries):
            unmatched += 1
            continue
        try:
            res = synthesize_block(_random_unitary_near(c, rng), cov, gs)
            failed += res.error > 1e-8
        except Exception:  # noqa: BLE001 - any failure counts against the criterion
            failed += 1
    return CheckResult(11, "coverage completeness", unmatched == 0 and failed == 0,
                       {"points": n, "unmatched": unmatched, "synthesis_failures": failed})


FULL: dict[int, Callable[[], CheckResult]] = {
    1: invariant_matching,
    2: optimizer_effort,
    3: closed_form_vs_numeric,
    4: three_pulse_swap,
    5: characterization_fidelity,
    6: controlled_c1_formula,
    7: canonical_invariant_formula,
    8: compilation_soundness,
    9: qft_benchmark,
    10: trotter_benchmark,
    11: coverage_completeness,
}

QUICK: dict[int, Callable[[], CheckResult]] = {
    1: lambda: invariant_matching(100),
    2: lambda: optimizer_effort(100),
    3: lambda: closed_form_vs_numeric(20),
    4: three_pulse_swap,
    5: lambda: characterization_fidelity(10),
    6: lambda: controlled_c1_formula(200),
    7: lambda: canonical_invariant_formula(200),
    8: lambda: compilation_soundness(20),
    9: lambda: qft_benchmark(range(3, 6), seeds=10, shots=2048),
    10: lambda: trotter_benchmark(steps=3, seeds=10, shots=2048),
    11: lambda: coverage_completeness(1000),
}


def run_all(quick: bool = False, only=None) -> list[CheckResult]:
    table = QUICK if quick else FULL
    return [table[k]() for k in sorted(table) if only is None or k in only]
