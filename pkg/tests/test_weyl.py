from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from charcomp import weyl
from charcomp.coverage import random_chamber_points
from charcomp.linalg import CX, CZ, ECR, I2, SWAP, X, Y, Z, haar_unitary, herm_exp, kron, random_local
from charcomp.weyl import CanonicalCoords, canonical_gate

ISWAP = np.array([[1, 0, 0, 0], [0, 0, 1j, 0], [0, 1j, 0, 0], [0, 0, 0, 1]])
SQRT_SWAP = herm_exp((np.pi / 8) * (kron(X, X) + kron(Y, Y) + kron(Z, Z)))

chamber_points = st.integers(0, 2**32 - 1).map(lambda s: random_chamber_points(1, np.random.default_rng(s))[0])


def _explicit_canonical(c):
    h = 0.5 * (c[0] * kron(X, X) + c[1] * kron(Y, Y) + c[2] * kron(Z, Z))
    return herm_exp(h)


def test_canonical_gate_matches_exponential(rng):
    for c in random_chamber_points(20, rng):
        np.testing.assert_allclose(canonical_gate(c), _explicit_canonical(c), atol=1e-13)


def test_canonical_gate_pi_is_xx():
    np.testing.assert_allclose(canonical_gate((np.pi, 0, 0)), -1j * kron(X, X), atol=1e-14)


@pytest.mark.parametrize("gate, coords", [
    (np.eye(4), (0, 0, 0)),
    (CX, (np.pi / 2, 0, 0)),
    (CZ, (np.pi / 2, 0, 0)),
    (ECR, (np.pi / 2, 0, 0)),
    (ISWAP, (np.pi / 2, np.pi / 2, 0)),
    (SWAP, (np.pi / 2, np.pi / 2, np.pi / 2)),
    (SQRT_SWAP, (np.pi / 4, np.pi / 4, np.pi / 4)),
])
def test_known_coordinates(gate, coords):
    f = weyl.cartan_decompose(gate)
    assert f.coords.distance(coords) < 1e-9
    assert weyl.reconstruction_error(f, gate) < 1e-9


def test_canonical_invariants_of_b_gate_class():
    inv = weyl.canonical_invariants((np.pi / 2, np.pi / 4, 0))
    assert abs(inv.g1) < 1e-15
    assert inv.g2 == pytest.approx(0.0, abs=1e-15)


def test_cx_invariants():
    inv = weyl.makhlin_invariants(CX)
    assert abs(inv.g1) < 1e-14
    assert inv.g2 == pytest.approx(1.0)


@pytest.mark.parametrize("raw, expected", [
    ((0.2, 0.7, 0.1), (0.7, 0.2, 0.1)),
    ((3.0, 0.5, 0.0), (0.5, np.pi - 3.0, 0.0)),
    ((-0.3, 0.0, 0.0), (0.3, 0.0, 0.0)),
    ((2 * np.pi + 0.4, 0.1, 0.0), (0.4, 0.1, 0.0)),
])
def test_canonicalize_examples(raw, expected):
    got = weyl.canonicalize_coords(raw)
    assert got.distance(expected) < 1e-12


@given(st.tuples(*[st.floats(-7, 7, allow_nan=False)] * 3))
def test_canonicalize_lands_in_chamber_and_preserves_class(raw):
    c = weyl.canonicalize_coords(raw)
    assert c.in_chamber()
    assert weyl.locally_equivalent(canonical_gate(raw), canonical_gate(c), tol=1e-8)


def test_locally_equivalent_examples(rng):
    assert not weyl.locally_equivalent(np.eye(4), SWAP)
    assert weyl.locally_equivalent(CX, CZ)
    k1 = random_local(rng)
    k2 = random_local(rng)
    assert weyl.locally_equivalent(SWAP, np.exp(0.3j) * k1 @ SWAP @ k2)


@given(chamber_points, st.integers(0, 2**32 - 1))
def test_decompose_recovers_constructed_coordinates(c, seed):
    # oracle: dress a known canonical gate with random locals and a phase
    r = np.random.default_rng(seed)
    u = np.exp(1j * r.uniform(0, 2 * np.pi)) * random_local(r) @ canonical_gate(c) \
        @ random_local(r)
    f = weyl.cartan_decompose(u)
    assert weyl.reconstruction_error(f, u) < 1e-9
    assert min(f.coords.distance(p) for p in weyl.canonical_point_candidates(c)) < 1e-7


def test_decompose_haar_properties(rng):
    for _ in range(200):
        u = haar_unitary(4, rng)
        f = weyl.cartan_decompose(u)
        assert f.coords.in_chamber()
        assert weyl.reconstruction_error(f, u) < 1e-9
        for w in (f.w1, f.w2, f.w3, f.w4):
            assert np.linalg.det(w) == pytest.approx(1.0)
        if f.coords.c3 < 1e-12:
            assert f.coords.c1 <= np.pi / 2 + 1e-9


def test_invariants_agree_with_closed_form(rng):
    for c in random_chamber_points(200, rng):
        u = random_local(rng) @ canonical_gate(c)
        d = weyl.invariant_distance(weyl.makhlin_invariants(u), weyl.canonical_invariants(c))
        assert d < 1e-12


def test_invariants_are_local_invariants(rng):
    u = haar_unitary(4, rng)
    v = random_local(rng) @ u @ random_local(rng)
    assert weyl.invariant_distance(weyl.makhlin_invariants(u), weyl.makhlin_invariants(v)) < 1e-12


def test_mirror_factors_keeps_unitary(rng):
    u = random_local(rng) @ canonical_gate((0.9, 0.3, 0.0))
    f = weyl.cartan_decompose(u)
    m = weyl.mirror_factors(f)
    assert m.coords.distance(weyl.mirror_coords(f.coords)) < 1e-12
    assert weyl.reconstruction_error(m, u) < 1e-9


def test_candidates_only_mirror_on_base_plane():
    assert len(weyl.canonical_point_candidates((0.9, 0.3, 0.0))) == 2
    assert len(weyl.canonical_point_candidates((0.9, 0.3, 0.1))) == 1
    assert len(weyl.canonical_point_candidates((np.pi / 2, 0.3, 0.0))) == 1


def test_identity_factors():
    assert weyl.reconstruction_error(weyl.identity_factors(), np.eye(4)) < 1e-15


def test_coords_distance_and_chamber():
    c = CanonicalCoords(1.0, 0.5, 0.2)
    assert c.in_chamber()
    assert not CanonicalCoords(0.2, 0.5, 0.0).in_chamber()
    assert c.distance((1.0, 0.5, 0.3)) == pytest.approx(0.1)
