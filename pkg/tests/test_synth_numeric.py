from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from charcomp import synth_numeric as sn
from charcomp.coverage import example_gateset
from charcomp.errors import ConvergenceFailure, NotLocallyEquivalent, ShapeMismatch, ValidationError
from charcomp.linalg import CX, SWAP, haar_su, is_unitary, random_local
from charcomp.weyl import Q, Q_DAG, canonical_gate, locally_equivalent, makhlin_invariants

seeds = st.integers(0, 2**32 - 1)


def _raw_invariants(u):
    # the polynomial form, without determinant normalization
    b = Q_DAG @ u @ Q
    m = b.T @ b
    t = np.trace(m)
    return t / 4, (t * t - np.trace(m @ m)) / 4


def _fig2_target(rng):
    # three Haar gates with random interleaved local layers
    u = haar_su(4, rng)
    for _ in range(2):
        u = u @ random_local(rng) @ haar_su(4, rng)
    return u


def test_invariant_loss_identity_vs_cx():
    assert sn.invariant_loss(np.eye(4), CX) == pytest.approx(5.0)


def test_invariant_loss_vanishes_under_locals(rng):
    u = haar_su(4, rng)
    assert sn.invariant_loss(u, random_local(rng) @ u @ random_local(rng)) < 1e-20


def test_invariant_entry_gradients_match_finite_differences(rng):
    u = haar_su(4, rng)
    b = Q_DAG @ u @ Q
    m = b.T @ b
    t = np.trace(m)
    # holomorphic derivatives d g / d u_pq
    dg1 = (Q @ b.T @ Q_DAG).T / 2
    dg2 = (Q @ (t * b.T - m @ b.T) @ Q_DAG).T
    h = 1e-7
    for p in range(4):
        for q in range(4):
            for step, scale in ((h, 1.0), (1j * h, 1j)):
                e = np.zeros((4, 4), dtype=complex)
                e[p, q] = step
                plus, minus = _raw_invariants(u + e), _raw_invariants(u - e)
                fd1 = (plus[0] - minus[0]) / (2 * h)
                fd2 = (plus[1] - minus[1]) / (2 * h)
                assert abs(fd1 - scale * dg1[p, q]) < 1e-6
                assert abs(fd2 - scale * dg2[p, q]) < 1e-6


@pytest.mark.parametrize("n_pulses", [2, 3])
def test_loss_gradient_matches_finite_differences(n_pulses, rng):
    pulses = [haar_su(4, rng) for _ in range(n_pulses)]
    fn = sn.InvariantLoss(pulses, haar_su(4, rng))
    x = rng.uniform(-np.pi, np.pi, fn.n_params)
    _, grad = fn(x)
    h = 1e-7
    for i in range(fn.n_params):
        e = np.zeros_like(x)
        e[i] = h
        fd = (fn(x + e)[0] - fn(x - e)[0]) / (2 * h)
        assert abs(fd - grad[i]) < 1e-6


def test_loss_value_matches_invariant_loss(rng):
    pulses = [haar_su(4, rng) for _ in range(3)]
    target = haar_su(4, rng)
    fn = sn.InvariantLoss(pulses, target)
    x = rng.uniform(-np.pi, np.pi, fn.n_params)
    v = sn.sequence_unitary(pulses, x.reshape(-1, 3))
    assert fn(x)[0] == pytest.approx(sn.invariant_loss(v, target), abs=1e-12)


def test_ansatz_unitary_is_unitary(gateset, rng):
    for key in [(1,), (0, 1), (1, 0, 0)]:
        inner = rng.uniform(-np.pi, np.pi, (sn.inner_count(len(key)), 3))
        assert is_unitary(sn.build_ansatz_unitary(key, gateset, inner), atol=1e-12)


def test_ansatz_shape_errors(gateset):
    with pytest.raises(ShapeMismatch):
        sn.build_ansatz_unitary((0, 1), gateset, np.zeros((1, 3)))
    with pytest.raises(ShapeMismatch):
        sn.build_ansatz_unitary((), gateset, np.zeros((0, 3)))


def test_make_key_descending_by_duration(gateset):
    assert sn.make_key((0, 1, 0), gateset) == (1, 0, 0)


def test_single_pulse_needs_no_optimization(gateset):
    angles, residual = sn.optimize_inner_locals((1,), gateset, CX)
    assert angles.shape == (0, 3)
    assert residual < 1e-20


def test_quarter_pulses_cannot_reach_swap():
    gs = example_gateset(pulse_angle=np.pi / 4)
    with pytest.raises(ConvergenceFailure):
        sn.optimize_inner_locals((0, 0), gs, SWAP)


def test_outer_locals_reconstruct(rng):
    u = haar_su(4, rng)
    v = random_local(rng) @ u @ random_local(rng)
    outer = sn.compute_outer_locals(u, v)
    assert np.max(np.abs(sn.apply_outer(outer, v) - u)) < 1e-9
    with pytest.raises(NotLocallyEquivalent):
        sn.compute_outer_locals(u, CX)


def test_config_validation_and_json():
    cfg = sn.OptimizerConfig(max_steps=50, n_starts=3, threshold=1e-9, seed=4)
    assert sn.OptimizerConfig.from_json(cfg.to_json()) == cfg
    with pytest.raises(ValidationError):
        sn.OptimizerConfig(n_starts=0)
    with pytest.raises(ValidationError):
        sn.OptimizerConfig.from_json({"bogus": 1})


def test_match_is_deterministic(rng):
    pulses = [haar_su(4, rng) for _ in range(3)]
    target = _fig2_target(rng)
    a = sn.match_invariants(pulses, target)
    b = sn.match_invariants(pulses, target)
    np.testing.assert_array_equal(a.angles, b.angles)
    assert a.steps == b.steps


def test_three_haar_pulses_reach_fig2_targets(rng):
    hits = 0
    for _ in range(30):
        pulses = [haar_su(4, rng) for _ in range(3)]
        hits += sn.match_invariants(pulses, _fig2_target(rng)).success
    assert hits >= 29


def test_loss_permutation_invariance(rng):
    # reordering the pulses of a key reaches the same minimum
    gates = [canonical_gate((0.9, 0.3, 0.1)), canonical_gate((1.2, 0.5, 0.2)), haar_su(4, rng)]
    for _ in range(10):
        target = _fig2_target(rng)
        a = sn.match_invariants(gates, target).residual
        b = sn.match_invariants(gates[::-1], target).residual
        assert abs(a - b) < 1e-8


@given(seeds)
def test_construct_then_recover(gateset, coverage, seed):
    r = np.random.default_rng(seed)
    key = [(1,), (0, 0), (1, 0), (1, 1), (0, 0, 0), (1, 0, 0)][r.integers(6)]
    inner = r.uniform(-np.pi, np.pi, (sn.inner_count(len(key)), 3))
    target = random_local(r) @ sn.build_ansatz_unitary(key, gateset, inner) @ random_local(r)
    res = sn.synthesize_block(target, coverage, gateset)
    assert res.error < 1e-8
    assert res.cost <= gateset.sequence_cost(key) + 1e-9
    v = sn.sequence_unitary([gateset.gates[k].unitary for k in res.sequence], res.inner) if res.sequence \
        else np.eye(4)
    assert locally_equivalent(v, target, 1e-7)


def test_synthesize_block_identity_is_local(gateset, coverage, rng):
    res = sn.synthesize_block(random_local(rng), coverage, gateset)
    assert res.key == () and res.method == "local"
    assert res.cost == pytest.approx(60.0)


def test_operations_replay_reconstruction(gateset, coverage, rng):
    from charcomp.linalg import kron

    target = haar_su(4, rng)
    res = sn.synthesize_block(target, coverage, gateset)
    u = np.eye(4, dtype=complex)
    for op in res.operations():
        step = kron(op[1], op[2]) if op[0] == "local" else gateset.gates[op[1]].unitary
        u = step @ u
    assert np.max(np.abs(np.exp(1j * res.outer.phase) * u - target)) < 1e-8
    assert makhlin_invariants(u).g2 == pytest.approx(makhlin_invariants(target).g2, abs=1e-8)
