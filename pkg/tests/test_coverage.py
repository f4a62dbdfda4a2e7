from __future__ import annotations

import json

import numpy as np
import pytest

from charcomp import coverage as cv
from charcomp.errors import CoverageIncomplete, GateSetInvalid
from charcomp.linalg import CX, ECR, SWAP, X, Z, herm_exp, kron, random_local
from charcomp.synth_numeric import synthesize_block
from charcomp.weyl import canonical_gate, cartan_decompose, reconstruction_error

SHORT = np.pi / 4 + 0.05


def _entry(cov, key):
    return next(e for e in cov.entries if e.key == key)


@pytest.mark.parametrize("key, cost", [((1,), 380.0), ((0, 0), 320.0), ((), 60.0), ((1, 0, 0), 700.0)])
def test_sequence_cost(gateset, key, cost):
    assert gateset.sequence_cost(key) == pytest.approx(cost)


def test_gateset_requires_cx_class():
    p = cv.make_pulse_gate("P", canonical_gate((SHORT, 0, 0)), 100)
    with pytest.raises(GateSetInvalid):
        cv.GateSet((0, 1), (p,), 60)
    with pytest.raises(GateSetInvalid):
        cv.GateSet((1, 1), (cv.make_pulse_gate("ECR", ECR, 320),), 60)


def test_cached_frames_reconstruct(gateset):
    for g in gateset.gates:
        assert reconstruction_error(g.frame, g.unitary) < 1e-9


def test_gateset_json_round_trip(gateset):
    back = cv.GateSet.from_json(json.loads(json.dumps(gateset.to_json())))
    assert back.pair == gateset.pair
    assert [g.label for g in back.gates] == ["P", "ECR"]
    assert back.sequence_cost((0, 0)) == gateset.sequence_cost((0, 0))


def test_two_short_pulses_polytope(coverage):
    poly = _entry(coverage, (0, 0)).polytope
    assert poly.contains((np.pi / 2, 0, 0))
    assert poly.contains((np.pi / 2 + 0.1, 0, 0))
    assert poly.contains((1.0, 0.6, 0.0))
    assert not poly.contains((1.0, 0.7, 0.0))
    assert not poly.contains((np.pi / 2,) * 3)


def test_two_ecr_polytope_is_base_plane(rng):
    gs = cv.GateSet((0, 1), (cv.make_pulse_gate("ECR", ECR, 320),), 60)
    poly = cv.closed_form_polytope([np.pi / 2, np.pi / 2])
    for c in cv.random_chamber_points(200, rng):
        assert poly.contains((c[0], c[1], 0.0))
        assert poly.contains(c) == (c[2] < 1e-9)
    assert cv.build_coverage_set(gs).entries[-1].polytope.kind == "full"


def test_three_ecr_entry_is_full(coverage):
    assert _entry(coverage, (1, 1, 1)).polytope.kind == "full"


@pytest.mark.parametrize("point, key", [
    ((0, 0, 0), ()),
    ((np.pi / 2, 0, 0), (0, 0)),
    ((SHORT, 0, 0), (0,)),
])
def test_selection_examples(coverage, point, key):
    assert cv.select_ansatz(coverage, point) == key


def test_swap_needs_three_pulses(coverage):
    assert len(cv.select_ansatz(coverage, cartan_decompose(SWAP).coords)) == 3


def test_entries_sorted_and_pairwise_irredundant(coverage):
    costs = [e.cost for e in coverage.entries]
    assert costs == sorted(costs)
    for i, e in enumerate(coverage.entries):
        for k in coverage.entries[:i]:
            assert not cv.polytope_subset(e.polytope, k.polytope)


def test_completeness(coverage, rng):
    for c in cv.random_chamber_points(2000, rng):
        cv.select_ansatz(coverage, c)


def test_incomplete_coverage_raises(coverage):
    partial = cv.CoverageSet(coverage.pair, coverage.entries[:2], coverage.labels)
    with pytest.raises(CoverageIncomplete):
        cv.select_ansatz(partial, (np.pi / 2,) * 3)


def test_selection_consistency(gateset, coverage, rng):
    for c in cv.random_chamber_points(100, rng):
        target = random_local(rng) @ canonical_gate(c) @ random_local(rng)
        entry = cv.select_entry(coverage, cartan_decompose(target).coords)
        res = synthesize_block(target, coverage, gateset)
        assert res.error < 1e-8
        assert res.cost <= entry.cost + 1e-9


def test_adding_gates_never_increases_cost(gateset, coverage, rng):
    base = cv.build_coverage_set(gateset)
    extensions = [cv.make_pulse_gate(f"E{i}", herm_exp(0.5 * s * kron(Z, X)), d)
                  for i, (s, d) in enumerate([(0.5, 70), (1.0, 150), (np.pi / 2, 200), (0.3, 40), (1.3, 250)])]
    covers = [cv.build_coverage_set(gateset.with_gate(g)) for g in extensions]
    for c in cv.random_chamber_points(60, rng):
        before = cv.select_entry(base, c).cost
        for cov in covers:
            assert cv.select_entry(cov, c).cost <= before + 1e-9


def test_multi_axis_pulse_is_probed():
    b_gate = cv.make_pulse_gate("B", canonical_gate((np.pi / 2, np.pi / 4, 0)), 150)
    gs = cv.GateSet((0, 1), (cv.make_pulse_gate("ECR", ECR, 320), b_gate), 60)
    cov = cv.build_coverage_set(gs, cv.ProbeConfig(lattice_step=np.pi / 8))
    kinds = {e.key: e.polytope.kind for e in cov.entries}
    assert kinds.get((1, 1)) == "probed"
    # two B gates reach any chamber point; near the hull boundary synthesis still tries them
    assert synthesize_block(canonical_gate((1.0, 0.5, 0.2)), cov, gs).key == (1, 1)
    res = synthesize_block(SWAP, cov, gs)
    assert res.error < 1e-8
    assert res.cost <= gs.sequence_cost((0, 0, 0))


def test_polytope_status_and_json(coverage):
    poly = _entry(coverage, (0, 0)).polytope
    assert poly.status((1.0, 0.3, 0.0)) == "inside"
    assert poly.status((1.0, 0.3, 0.5)) == "outside"
    data = json.loads(json.dumps(coverage.to_json()))
    assert len(data["entries"]) == len(coverage.entries)


def test_random_chamber_points_in_chamber(rng):
    pts = cv.random_chamber_points(500, rng)
    assert pts.shape == (500, 3)
    assert all(cv.CanonicalCoords(*p).in_chamber() for p in pts)


def test_cx_is_spe():
    g = cv.make_pulse_gate("CX", CX, 300)
    assert g.is_spe and g.single_axis
