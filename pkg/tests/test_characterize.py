from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from charcomp import characterize as ch
from charcomp.errors import InsufficientData, ValidationError
from charcomp.linalg import I2, X, Z, dagger, herm_exp, kron, process_infidelity, vector_to_su2
from charcomp.weyl import makhlin_invariants

seeds = st.integers(0, 2**32 - 1)
ZERO = ch.ControlledPulseModel((0, 0, 0), (0, 0, 0), 0.0)


def _infidelity(a, b):
    return process_infidelity(ch.controlled_unitary(a), ch.controlled_unitary(b))


def test_identity_model():
    np.testing.assert_allclose(ch.controlled_unitary(ZERO), np.eye(4), atol=1e-15)


def test_phase_only_model():
    m = ch.ControlledPulseModel((0, 0, 0), (0, 0, 0), 0.3)
    np.testing.assert_allclose(ch.controlled_unitary(m), herm_exp(0.3 * kron(Z, I2)), atol=1e-14)


def test_zx_model():
    m = ch.ControlledPulseModel((np.pi / 4, 0, 0), (-np.pi / 4, 0, 0), 0.0)
    np.testing.assert_allclose(ch.controlled_unitary(m), herm_exp((np.pi / 4) * kron(Z, X)), atol=1e-14)
    assert ch.controlled_c1(m) == pytest.approx(np.pi / 2)


@given(seeds)
def test_block_structure(seed):
    u = ch.controlled_unitary(ch.random_controlled_model(np.random.default_rng(seed)))
    assert np.all(u[:2, 2:] == 0) and np.all(u[2:, :2] == 0)
    for blk in (u[:2, :2], u[2:, 2:]):
        np.testing.assert_allclose(blk @ dagger(blk), I2, atol=1e-12)


@given(seeds)
def test_controlled_c1_matches_kak(seed):
    m = ch.random_controlled_model(np.random.default_rng(seed))
    assert abs(ch.controlled_c1(m) - ch.kak_c1(m)) < 1e-9


@given(seeds)
def test_controlled_gate_invariant_condition(seed):
    inv = makhlin_invariants(ch.controlled_unitary(ch.random_controlled_model(np.random.default_rng(seed))))
    # g1 here is tr(m) / 4, so the relation involves its square
    assert abs(inv.g1.imag) < 1e-10
    assert inv.g2 - 2 * inv.g1.real ** 2 == pytest.approx(1.0, abs=1e-10)


def test_equal_blocks_are_local():
    m = ch.ControlledPulseModel((0.3, -0.2, 0.5), (0.3, -0.2, 0.5), 0.0)
    assert ch.controlled_c1(m) == pytest.approx(0.0, abs=1e-7)
    assert ch.controlled_c1(ch.ControlledPulseModel((0, 0, 0), (0.4, 0, 0), 0.1)) == pytest.approx(0.4)


@given(st.tuples(*[st.floats(-2, 2, allow_nan=False)] * 7))
def test_cr_mapping_matches_hamiltonian(coeffs):
    nu = ch.CrCoefficients(*coeffs)
    m = ch.cr_to_model(nu)
    np.testing.assert_allclose(ch.controlled_unitary(m), herm_exp(ch.cr_hamiltonian(nu)), atol=1e-10)
    back = ch.model_to_cr(m)
    assert np.allclose(list(back.to_json().values()), coeffs)


def test_cr_examples():
    assert ch.cr_to_model(ch.CrCoefficients()) == ZERO
    m = ch.cr_to_model(ch.CrCoefficients(zi=0.8))
    np.testing.assert_allclose(ch.controlled_unitary(m), herm_exp(0.4 * kron(Z, I2)), atol=1e-14)
    assert ch.controlled_c1(ch.cr_to_model(ch.CrCoefficients(zx=np.pi / 2))) == pytest.approx(np.pi / 2)


def test_config_validation():
    with pytest.raises(ValidationError):
        ch.TomographyConfig(iteration_set=(2, 1))
    with pytest.raises(ValidationError):
        ch.TomographyConfig(iteration_set=())
    with pytest.raises(ValidationError):
        ch.TomographyConfig(shots=0)
    with pytest.raises(ValidationError):
        ch.NoiseSpec(1.5)
    cfg = ch.TomographyConfig(iteration_set=(1, 3), shots=64, seed=2)
    assert ch.TomographyConfig.from_json(cfg.to_json()) == cfg


def test_counts_sum_to_shots(rng):
    cfg = ch.TomographyConfig(shots=77)
    recs = ch.simulate_tomography(ch.random_controlled_model(rng), cfg)
    assert len(recs) == 2 * 9 * 4 + 2 * 4
    assert all(sum(r.counts.values()) == 77 for r in recs)


def test_noiseless_block_trajectories(rng):
    m = ch.random_controlled_model(rng)
    u0 = vector_to_su2(m.u)
    recs = ch.simulate_block_records(m, ch.TomographyConfig(), ch.NoiseSpec(0.0))
    zero = np.array([1, 0], dtype=complex)
    for r in recs:
        if r.prep_basis[0] != "I":
            continue
        state = np.linalg.matrix_power(u0, r.iterations) @ ch.BASIS[r.prep_basis[1]] @ zero
        rot = ch.BASIS[r.meas_basis[1]]
        expected = np.real(state.conj() @ rot @ Z @ dagger(rot) @ state)
        assert r.expectation(exact=True) == pytest.approx(expected, abs=1e-12)


def test_depolarizing_contraction(rng):
    m = ch.random_controlled_model(rng)
    cfg = ch.TomographyConfig()
    clean = ch.simulate_block_records(m, cfg, ch.NoiseSpec(0.0))
    noisy = ch.simulate_block_records(m, cfg, ch.NoiseSpec(1e-2))
    for a, b in zip(clean, noisy):
        assert b.expectation(True) == pytest.approx(a.expectation(True) * 0.99 ** a.iterations, abs=1e-12)


def test_phase_records_accumulate_relative_phase(rng):
    m = ch.random_controlled_model(rng)
    recs = ch.simulate_phase_records(m, ch.TomographyConfig(), ch.NoiseSpec(0.0), m.u, m.v)
    _, lam = ch.phase_eigenstate(vector_to_su2(m.u), vector_to_su2(m.v))
    for r in recs:
        angle = r.iterations * (2 * m.phi - lam)
        expected = np.cos(angle) if r.meas_basis[0] == "H" else np.sin(angle)
        assert r.expectation(True) == pytest.approx(expected, abs=1e-12)


def test_phase_eigenstate_choice(rng):
    a, b = vector_to_su2((0.3, 0.2, -0.5)), vector_to_su2((-0.1, 0.6, 0.2))
    psi, lam = ch.phase_eigenstate(a, b)
    np.testing.assert_allclose(dagger(b) @ a @ psi, np.exp(1j * lam) * psi, atol=1e-12)
    assert np.sin(lam) > 0
    assert abs(psi[0].imag) < 1e-15 and psi[0].real > 0


@given(seeds)
def test_noiseless_fit_recovers_truth(seed):
    truth = ch.random_controlled_model(np.random.default_rng(seed))
    cfg = ch.TomographyConfig(exact=True)
    model, diag = ch.fit_model(ch.simulate_tomography(truth, cfg, ch.NoiseSpec(0.0)), cfg)
    assert _infidelity(model, truth) <= 1e-8
    assert diag.block0_rms < 1e-6


def test_noisy_fit_is_close(rng):
    vals = [_infidelity(ch.characterize(t).model, t) for t in (ch.random_controlled_model(rng) for _ in range(10))]
    assert np.median(vals) <= 5e-3


def test_single_iteration_count_is_insufficient(rng):
    cfg = ch.TomographyConfig(iteration_set=(4,))
    recs = ch.simulate_block_records(ch.random_controlled_model(rng), cfg, ch.NoiseSpec())
    with pytest.raises(InsufficientData):
        ch.fit_model(recs, cfg)


def test_missing_configuration_is_insufficient(rng):
    cfg = ch.TomographyConfig()
    recs = [r for r in ch.simulate_tomography(ch.random_controlled_model(rng), cfg) if r.prep_basis[1] != "SH"]
    with pytest.raises(InsufficientData):
        ch.fit_model(recs, cfg)


def test_determinism(rng):
    truth = ch.random_controlled_model(rng)
    a, b = ch.characterize(truth), ch.characterize(truth)
    assert [r.counts for r in a.records] == [r.counts for r in b.records]
    assert a.model == b.model
    c = ch.characterize(truth, ch.TomographyConfig(seed=1))
    assert [r.counts for r in a.records] != [r.counts for r in c.records]


def test_infidelity_falls_with_shots():
    r = np.random.default_rng(99)
    truths = [ch.random_controlled_model(r) for _ in range(50)]
    medians = []
    for shots in (32, 128, 512, 2048):
        cfg = ch.TomographyConfig(shots=shots)
        medians.append(np.median([_infidelity(ch.characterize(t, cfg).model, t) for t in truths]))
    assert all(b <= a for a, b in zip(medians, medians[1:]))


@pytest.mark.parametrize("nu, lo, hi", [
    (ch.CrCoefficients(zx=np.pi / 2 + 0.1, ix=0.02, zz=0.01), np.pi / 2 - 0.15, np.pi / 2 + 0.15),
    (ch.CrCoefficients(zx=np.pi / 4 + 0.05, ix=0.03, iy=-0.02, zi=0.4), np.pi / 4, np.pi / 4 + 0.15),
])
def test_characterize_pulse_coords(nu, lo, hi):
    truth = ch.cr_to_model(nu)
    g = ch.characterize_pulse(truth, duration=100.0, label="cr")
    assert lo <= g.coords.c1 <= hi
    assert abs(g.coords.c1 - ch.controlled_c1(truth)) < 0.05
    assert g.duration == 100.0 and g.label == "cr"


def test_zero_truth_is_local():
    g = ch.characterize_pulse(ZERO, ch.TomographyConfig(exact=True), ch.NoiseSpec(0.0))
    assert g.coords.distance((0, 0, 0)) < 1e-6


def test_model_json_round_trip(rng):
    m = ch.random_controlled_model(rng)
    assert ch.ControlledPulseModel.from_json(m.to_json()) == m


def _check_batches(pairs, batches):
    flat = [tuple(p) for b in batches for p in b]
    assert sorted(map(frozenset, flat), key=sorted) == sorted({frozenset(p) for p in pairs}, key=sorted)
    for b in batches:
        qubits = [q for p in b for q in p]
        assert len(qubits) == len(set(qubits))


@pytest.mark.parametrize("pairs, most", [
    ([(0, 1), (1, 2), (2, 3)], 2),
    ([(0, 1)], 1),
    # heavy-hex fragment: two degree-3 junctions joined through bridge qubits
    ([(0, 1), (1, 2), (1, 3), (3, 5), (5, 4), (5, 6), (6, 7), (4, 8), (8, 9), (2, 10), (10, 11)], 3),
    ([], 0),
])
def test_batch_schedule_examples(pairs, most):
    batches = ch.batch_schedule(pairs)
    assert len(batches) <= most
    _check_batches(pairs, batches)


@given(st.lists(st.tuples(st.integers(0, 9), st.integers(0, 9)).filter(lambda p: p[0] != p[1]), max_size=30))
def test_batch_schedule_bound(pairs):
    batches = ch.batch_schedule(pairs)
    _check_batches(pairs, batches)
    if pairs:
        degree: dict = {}
        for p in {frozenset(p) for p in pairs}:
            for q in p:
                degree[q] = degree.get(q, 0) + 1
        assert len(batches) <= max(degree.values()) + 1


def test_misra_gries_on_petersen_graph():
    import networkx as nx

    edges = list(nx.petersen_graph().edges())
    color = ch._misra_gries(edges)
    assert ch._valid_coloring(edges, color)
    assert len(set(color.values())) <= 4
