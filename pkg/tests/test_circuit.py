from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from charcomp import circuit as cc
from charcomp.circuit import Circuit, Gate
from charcomp.coverage import example_gateset
from charcomp.errors import BadBitstring, MissingGateSet, TooLarge, ValidationError
from charcomp.linalg import CX, I2, haar_unitary, kron, process_infidelity
from charcomp.weyl import cartan_decompose

seeds = st.integers(0, 2**32 - 1)


@pytest.fixture(scope="module")
def table4():
    pairs = [(a, b) for a in range(4) for b in range(a + 1, 4)]
    return cc.replicate_gateset(example_gateset(), pairs)


def _spans(items):
    return [(it.pair, len(it.span)) for it in items if isinstance(it, cc.TwoQubitBlock)]


def test_gate_validation():
    with pytest.raises(ValidationError):
        Gate("cx", (0, 0))
    with pytest.raises(ValidationError):
        Gate("rz", (0,))
    with pytest.raises(ValidationError):
        Gate("bogus", (0,))
    with pytest.raises(ValidationError):
        Circuit(2).append("h", (2,))
    with pytest.raises(ValidationError):
        Gate("unitary4", (0, 1))


def test_circuit_json_round_trip(rng):
    c = cc.random_circuit(3, 20, rng)
    back = Circuit.from_json(json.loads(json.dumps(c.to_json())))
    assert cc.equivalent(c, back) < 1e-14


def test_unitary_of_small_circuits():
    np.testing.assert_allclose(cc.circuit_unitary(Circuit(2)), np.eye(4))
    np.testing.assert_allclose(cc.circuit_unitary(Circuit(2).append("cx", (0, 1))), CX)
    with pytest.raises(TooLarge):
        cc.circuit_unitary(Circuit(7))


def test_unitary_matches_statevector_columns(rng):
    c = cc.random_circuit(3, 25, rng)
    u = cc.circuit_unitary(c)
    for k in range(8):
        init = np.zeros(8, dtype=complex)
        init[k] = 1
        np.testing.assert_allclose(cc.statevector(c, init), u[:, k], atol=1e-12)


def test_big_endian_order():
    psi = cc.statevector(Circuit(3).append("x", (0,)))
    assert cc.bitstring(int(np.argmax(np.abs(psi))), 3) == "100"


@pytest.mark.parametrize("build, expected", [
    (lambda c: c.append("cx", (0, 1)).append("rz", (1,), 0.3).append("cx", (0, 1)).append("cx", (1, 2)),
     [((0, 1), 3), ((1, 2), 1)]),
    (lambda c: c.append("cx", (0, 1)).append("cx", (1, 2)).append("cx", (0, 1)),
     [((0, 1), 1), ((1, 2), 1), ((0, 1), 1)]),
])
def test_collect_blocks_examples(build, expected):
    c = build(Circuit(3))
    assert sorted(_spans(cc.collect_blocks(c))) == sorted(expected)


def test_single_qubit_circuit_has_no_blocks():
    c = Circuit(2).append("h", (0,)).append("rz", (1,), 0.2)
    items = cc.collect_blocks(c)
    assert all(isinstance(it, Gate) for it in items) and len(items) == 2


@given(seeds)
def test_block_product_identity(seed):
    c = cc.random_circuit(4, 30, np.random.default_rng(seed))
    items = cc.collect_blocks(c)
    assert np.max(np.abs(cc.blocks_unitary(c, items) - cc.circuit_unitary(c))) < 1e-12


def test_compile_empty_circuit(table4):
    out = cc.compile_circuit(Circuit(2), table4)
    assert out.circuit.gates == [] and out.total_two_qubit_duration == 0.0


def test_compile_two_qubit_random(table4, rng):
    c = Circuit(2).append("unitary4", (0, 1), matrix=haar_unitary(4, rng)).append("h", (1,))
    out = cc.compile_circuit(c, table4)
    assert cc.equivalent(c, out.circuit) < 1e-7
    assert {g.name for g in out.circuit.gates} <= {"rz", "ry", "pulse_ref"}


def test_compile_reversed_pair(table4, rng):
    c = Circuit(2).append("unitary4", (1, 0), matrix=haar_unitary(4, rng))
    assert cc.equivalent(c, cc.compile_circuit(c, table4).circuit) < 1e-7


def test_missing_gateset():
    c = Circuit(3).append("cx", (0, 2))
    with pytest.raises(MissingGateSet):
        cc.compile_circuit(c, {(0, 1): example_gateset((0, 1))})


@given(seeds)
def test_compilation_preserves_semantics_and_dominates(table4, seed):
    r = np.random.default_rng(seed)
    c = cc.random_circuit(int(r.integers(2, 5)), int(r.integers(1, 31)), r)
    ext = cc.compile_circuit(c, table4, "extended")
    base = cc.compile_circuit(c, table4, "spe_only")
    assert process_infidelity(cc.circuit_unitary(c), cc.circuit_unitary(ext.circuit)) < 1e-7
    assert process_infidelity(cc.circuit_unitary(c), cc.circuit_unitary(base.circuit)) < 1e-7
    assert ext.total_two_qubit_duration <= base.total_two_qubit_duration + 1e-9


def test_qft_strictly_cheaper(table4):
    for n in (3, 4):
        c = cc.qft_circuit(n, "1" * n)
        ext = cc.compile_circuit(c, table4, "extended")
        base = cc.compile_circuit(c, table4, "spe_only")
        assert ext.total_two_qubit_duration < base.total_two_qubit_duration


def test_simulate_counts_contract():
    bell = Circuit(2).append("h", (0,)).append("cx", (0, 1))
    counts = cc.simulate_counts(bell, 1000, seed=3)
    assert sum(counts.values()) == 1000
    assert set(counts) <= {"00", "11"}
    assert counts == cc.simulate_counts(bell, 1000, seed=3)


def test_noise_lowers_success_with_rate():
    c = cc.qft_circuit(4, "1010")
    probs = []
    for rate in (0.0, 0.02, 0.05, 0.1):
        dist = cc.output_distribution(c, cc.BenchNoiseModel(rate), np.random.default_rng(0), trajectories=256)
        probs.append(dist[int("1010", 2)])
    assert probs[0] == pytest.approx(1.0)
    assert all(b < a for a, b in zip(probs, probs[1:]))


def test_noise_probability_scales_with_duration():
    noise = cc.BenchNoiseModel(1e-2, 320.0)
    pulse = Gate("pulse_ref", (0, 1), (100.0,), CX, "P")
    assert noise.probability(pulse) == pytest.approx(1e-2 * 100 / 320)
    assert noise.probability(Gate("cx", (0, 1))) == pytest.approx(1e-2)
    with pytest.raises(ValidationError):
        cc.BenchNoiseModel(2.0)


def test_noisy_distribution_is_normalized():
    dist = cc.output_distribution(cc.qft_circuit(3, "011"), cc.BenchNoiseModel(0.1), np.random.default_rng(1))
    assert dist.sum() == pytest.approx(1.0)
    assert dist.min() >= 0


@pytest.mark.parametrize("n, target", [(3, "101"), (5, "01101"), (8, "11100101")])
def test_qft_hits_target(n, target):
    c = cc.qft_circuit(n, target)
    probs = np.abs(cc.statevector(c)) ** 2
    assert probs[int(target, 2)] > 1 - 1e-9
    assert sum(g.name == "cp" for g in c.gates) == n * (n - 1) // 2


def test_qft_blocks_are_single_axis():
    for g in cc.qft_circuit(5, "10011").gates:
        if g.name == "cp":
            coords = cartan_decompose(g.unitary).coords
            assert coords.c2 < 1e-9 and coords.c3 < 1e-9
            assert coords.c1 == pytest.approx(abs(g.params[0]) / 2)


def test_qft_bad_bitstring():
    with pytest.raises(BadBitstring):
        cc.qft_circuit(3, "10")
    with pytest.raises(BadBitstring):
        cc.qft_circuit(3, "1a1")


@pytest.mark.parametrize("n, steps", [(25, 1), (25, 3), (4, 6)])
def test_trotter_rzz_count(n, steps):
    c = cc.trotter_tfim_circuit(n, steps)
    assert sum(g.name == "rzz" for g in c.gates) == (n - 1) * steps


def test_trotter_zero_steps_is_empty():
    assert cc.trotter_tfim_circuit(4, 0).gates == []


def test_trotter_matches_exact_evolution():
    exact = cc.exact_trotter_magnetization(4, 6)
    for s in range(7):
        c = cc.trotter_tfim_circuit(4, s)
        psi = cc.statevector(c)
        assert cc.magnetization(psi, "Z") == pytest.approx(exact["Z"][s], abs=1e-9)
        assert cc.magnetization(psi, "Y") == pytest.approx(exact["Y"][s], abs=1e-9)
        rotated = cc.statevector(cc.with_measurement_basis(c, "Y"))
        assert cc.magnetization(rotated, "Z") == pytest.approx(exact["Y"][s], abs=1e-9)


def test_trotter_sampled_magnetization():
    exact = cc.exact_trotter_magnetization(4, 3)
    c = cc.trotter_tfim_circuit(4, 3)
    counts = cc.simulate_counts(cc.with_measurement_basis(c, "Z"), 8192, seed=5)
    assert cc.magnetization(counts, "Z") == pytest.approx(exact["Z"][3], abs=1e-2 * 3)


def test_magnetization_examples():
    assert cc.magnetization({"0000": 10}) == 1.0
    uniform = {cc.bitstring(i, 3): 100 for i in range(8)}
    assert cc.magnetization(uniform) == pytest.approx(0.0)
    with pytest.raises(ValidationError):
        cc.magnetization({"00": 1}, "X")


def test_compiled_json(table4):
    out = cc.compile_circuit(cc.qft_circuit(3, "101"), table4)
    data = json.loads(json.dumps(out.to_json()))
    assert data["mode"] == "extended"
    assert data["num_pulses"] == sum(len(r["sequence"]) for r in data["block_reports"])
    back = Circuit.from_json(data["circuit"])
    assert cc.equivalent(back, cc.qft_circuit(3, "101")) < 1e-7
