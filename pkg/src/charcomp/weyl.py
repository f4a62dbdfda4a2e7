"""Local-equivalence machinery for two-qubit gates.

Canonical gates ``can(c) = exp(-i/2 (c1 XX + c2 YY + c3 ZZ))``, Makhlin
invariants, reduction of coordinates into the Weyl chamber and the Cartan
(KAK) decomposition ``U = exp(i phi) (w1 x w2) can(c) (w3 x w4)``.

The chamber is ``c1 >= c2 >= c3 >= 0`` with ``c1 + c2 <= pi``. On the base
plane ``c3 = 0`` the points ``(c1, c2, 0)`` and ``(pi - c1, c2, 0)`` are the
same class; the representative with ``c1 <= pi/2`` is returned and
:func:`mirror_coords` gives the other one.

Note on ``g1``: multiplying an SU(4) matrix by ``i`` (a fourth root of unity
that keeps the determinant at one) flips the sign of ``g1`` while leaving
``g2`` unchanged. Comparisons of invariants therefore treat ``g1`` up to sign;
see :func:`invariant_distance`.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DecompositionFailure
from .linalg import I2, PAULIS, dagger, kron, kron_factor, su_normalize

# magic (Bell) basis, unitary normalization
Q = np.array([[1, 0, 0, 1j], [0, 1j, 1, 0], [0, 1j, -1, 0], [1, 0, 0, -1j]], dtype=complex) / np.sqrt(2)
Q_DAG = dagger(Q)

# diagonals of Q^dag (P x P) Q for P = X, Y, Z
_MAGIC_DIAG = np.array([[1, 1, -1, -1], [-1, 1, -1, 1], [1, -1, -1, 1]], dtype=float)

_SNAP = 1e-11


class CanonicalCoords(NamedTuple):
    """Coordinates ``(c1, c2, c3)`` of a canonical gate, in radians."""

    c1: float
    c2: float
    c3: float

    def in_chamber(self, tol: float = 1e-9) -> bool:
        c1, c2, c3 = self
        return c1 >= c2 - tol and c2 >= c3 - tol and c3 >= -tol and c1 + c2 <= np.pi + tol

    def distance(self, other: Sequence[float]) -> float:
        return float(np.max(np.abs(np.asarray(self) - np.asarray(other, dtype=float))))


@dataclass(frozen=True)
class MakhlinInvariants:
    g1: complex
    g2: float

    def as_tuple(self) -> tuple[complex, float]:
        return self.g1, self.g2


@dataclass(frozen=True)
class CartanFactors:
    """``u = exp(i global_phase) (w1 x w2) can(coords) (w3 x w4)``, each ``w`` in SU(2)."""

    w1: np.ndarray
    w2: np.ndarray
    w3: np.ndarray
    w4: np.ndarray
    coords: CanonicalCoords
    global_phase: float

    def unitary(self) -> np.ndarray:
        core = canonical_gate(self.coords)
        return np.exp(1j * self.global_phase) * kron(self.w1, self.w2) @ core @ kron(self.w3, self.w4)


def canonical_gate(c: Sequence[float]) -> np.ndarray:
    """``exp(-i/2 (c1 XX + c2 YY + c3 ZZ))``, built diagonally in the magic basis."""
    c = np.asarray(c, dtype=float)
    phases = -0.5 * (c @ _MAGIC_DIAG)
    return (Q * np.exp(1j * phases)) @ Q_DAG


def _m_matrix(u: np.ndarray) -> np.ndarray:
    ub = Q_DAG @ su_normalize(u) @ Q
    return ub.T @ ub


def makhlin_invariants(u: np.ndarray) -> MakhlinInvariants:
    """Local invariants ``g1 = tr(m)/4`` and ``g2 = (tr(m)^2 - tr(m^2))/4``.

    ``m = U_B^T U_B`` where ``U_B`` is the su-normalized input in the magic
    basis.
    """
    m = _m_matrix(np.asarray(u, dtype=complex))
    t = np.trace(m)
    g1 = complex(t / 4)
    g2 = float(np.real((t * t - np.trace(m @ m)) / 4))
    return MakhlinInvariants(g1, g2)


def canonical_invariants(c: Sequence[float]) -> MakhlinInvariants:
    """Closed-form invariants of ``can(c)``."""
    c1, c2, c3 = (float(x) for x in c)
    g1 = np.cos(c1) * np.cos(c2) * np.cos(c3) - 1j * np.sin(c1) * np.sin(c2) * np.sin(c3)
    g2 = np.cos(2 * c1) + np.cos(2 * c2) + np.cos(2 * c3)
    return MakhlinInvariants(complex(g1), float(g2))


def invariant_distance(a: MakhlinInvariants, b: MakhlinInvariants) -> float:
    """``sqrt(|dg1|^2 + dg2^2)``, minimized over the sign of ``g1``."""
    d2 = (a.g2 - b.g2) ** 2
    return float(np.sqrt(min(abs(a.g1 - b.g1) ** 2, abs(a.g1 + b.g1) ** 2) + d2))


def locally_equivalent(u: np.ndarray, v: np.ndarray, tol: float = 1e-9) -> bool:
    """True iff the Makhlin invariants of ``u`` and ``v`` agree within ``tol``."""
    return invariant_distance(makhlin_invariants(u), makhlin_invariants(v)) <= tol


# -- coordinate canonicalization with optional tracking of local factors ------
#
# The state is (c, locals) with u = phase * (a x b) can(c) (cc x d). Each move
# rewrites can(c) exactly and pushes the compensating Paulis into the locals.


class _Frame:
    def __init__(self, c, locs=None):
        self.c = np.array(c, dtype=float)
        self.locs = None if locs is None else [np.array(w, dtype=complex) for w in locs]

    def shift(self, i: int, k: int) -> None:
        """c_i -> c_i - k pi, using can(k pi e_i) = (-i P_i x P_i)^k."""
        if k == 0:
            return
        self.c[i] -= k * np.pi
        if self.locs is not None and k % 2:
            p = PAULIS[i]
            self.locs[2] = p @ self.locs[2]
            self.locs[3] = p @ self.locs[3]

    def flip(self, i: int, j: int) -> None:
        """Negate c_i and c_j by conjugating with P_k on the first qubit."""
        self.c[i] = -self.c[i]
        self.c[j] = -self.c[j]
        if self.locs is not None:
            p = PAULIS[3 - i - j]
            self.locs[0] = self.locs[0] @ p
            self.locs[2] = p @ self.locs[2]

    def swap(self, i: int, j: int) -> None:
        """Exchange c_i and c_j by conjugating with S x S, S = (P_i + P_j)/sqrt(2)."""
        self.c[[i, j]] = self.c[[j, i]]
        if self.locs is not None:
            s = (PAULIS[i] + PAULIS[j]) / np.sqrt(2)
            self.locs[0] = self.locs[0] @ s
            self.locs[1] = self.locs[1] @ s
            self.locs[2] = s @ self.locs[2]
            self.locs[3] = s @ self.locs[3]

    def mirror(self) -> None:
        """(c1, c2, c3) -> (pi - c1, c2, -c3)."""
        self.shift(0, 1)
        self.flip(0, 2)

    def canonicalize(self) -> None:
        for i in range(3):
            self.shift(i, int(np.round(self.c[i] / np.pi)))
        # sort by magnitude, descending
        for a, b in ((0, 1), (1, 2), (0, 1)):
            if abs(self.c[a]) < abs(self.c[b]):
                self.swap(a, b)
        c = self.c
        if c[0] < 0 and c[1] < 0:
            self.flip(0, 1)
        elif c[0] < 0:
            self.flip(0, 2)
        elif c[1] < 0:
            self.flip(1, 2)
        if c[2] < -_SNAP:
            self.mirror()
        # clamp rounding noise
        for i in range(3):
            if abs(c[i]) < _SNAP:
                c[i] = 0.0


def canonicalize_coords(raw: Sequence[float]) -> CanonicalCoords:
    """Chamber representative of an arbitrary coordinate triple.

    Applies pi-shifts, pairwise sign flips, sorting and the base-plane mirror.
    The returned point has the same canonical invariants as ``raw`` (with
    ``g1`` up to sign).
    """
    f = _Frame(raw)
    f.canonicalize()
    return CanonicalCoords(*(float(x) for x in f.c))


def mirror_coords(c: Sequence[float]) -> CanonicalCoords:
    """The other representative ``(pi - c1, c2, c3)`` of a base-plane point.

    Valid as an equivalence only when ``c3 = 0``; for other points this is the
    mirror image that lies outside the class.
    """
    c1, c2, c3 = (float(x) for x in c)
    return CanonicalCoords(np.pi - c1, c2, c3)


def canonical_point_candidates(c: Sequence[float], tol: float = 1e-9) -> list[CanonicalCoords]:
    """All chamber representatives of ``c``: itself, plus the mirror on the base plane."""
    c = CanonicalCoords(*(float(x) for x in c))
    out = [c]
    if c.c3 < tol:
        m = mirror_coords(c)
        if m.distance(c) > tol:
            out.append(m)
    return out


def _raw_kak(u: np.ndarray, rng: np.random.Generator):
    ub = Q_DAG @ u @ Q
    m = ub.T @ ub
    for _ in range(10):
        t = rng.uniform(0.1, 0.9)
        _, p = np.linalg.eigh(t * m.real + (1 - t) * m.imag)
        d = p.T @ m @ p
        if np.max(np.abs(d - np.diag(np.diag(d)))) > 1e-9:
            continue
        if np.linalg.det(p) < 0:
            p[:, 0] = -p[:, 0]
        lam = np.angle(np.diag(d)) / 2
        o1 = ub @ p @ np.diag(np.exp(-1j * lam))
        if np.real(np.linalg.det(o1)) < 0:
            lam[0] += np.pi
            o1[:, 0] = -o1[:, 0]
        if np.max(np.abs(o1.imag)) > 1e-7:
            continue
        k1 = Q @ o1.real @ Q_DAG
        k2 = Q @ p.T @ Q_DAG
        a, b, _ = kron_factor(k1)
        cc, dd, _ = kron_factor(k2)
        coords = -0.5 * (_MAGIC_DIAG @ lam)
        yield coords, [a, b, cc, dd]


def _finish(u: np.ndarray, coords, locs) -> tuple[CartanFactors, float]:
    locs = [w / np.sqrt(np.linalg.det(w)) for w in locs]
    core = kron(locs[0], locs[1]) @ canonical_gate(coords) @ kron(locs[2], locs[3])
    overlap = np.trace(dagger(core) @ u) / 4
    phase = float(np.angle(overlap))
    factors = CartanFactors(*locs, coords=CanonicalCoords(*(float(x) for x in coords)), global_phase=phase)
    err = float(np.max(np.abs(np.exp(1j * phase) * core - u)))
    return factors, err


def cartan_decompose(u: np.ndarray, seed: int = 0) -> CartanFactors:
    """KAK decomposition with chamber-canonical coordinates.

    The symmetric unitary ``U_B^T U_B`` is diagonalized by a real orthogonal
    matrix obtained from a random real combination of its real and imaginary
    parts; up to ten draws from a generator seeded with ``seed`` are tried.

    Raises:
        DecompositionFailure: no draw reconstructed ``u`` within 1e-6.
    """
    u = np.asarray(u, dtype=complex)
    us = su_normalize(u)
    rng = np.random.default_rng(seed)
    best = None
    for coords, locs in _raw_kak(us, rng):
        frame = _Frame(coords, locs)
        frame.canonicalize()
        factors, err = _finish(u, frame.c, frame.locs)
        if best is None or err < best[1]:
            best = (factors, err)
        if err < 1e-10:
            break
    if best is None or best[1] > 1e-6:
        residual = "n/a" if best is None else f"{best[1]:.3g}"
        raise DecompositionFailure(f"Cartan decomposition failed (residual {residual})")
    return best[0]


def mirror_factors(f: CartanFactors) -> CartanFactors:
    """Re-express a decomposition at the coordinates ``(pi - c1, c2, -c3)``.

    For base-plane points this is the other chamber representative. The
    reconstructed unitary is unchanged.
    """
    u = f.unitary()
    frame = _Frame(f.coords, [f.w1, f.w2, f.w3, f.w4])
    frame.mirror()
    for i in range(3):
        if abs(frame.c[i]) < _SNAP:
            frame.c[i] = 0.0
    factors, _ = _finish(u, frame.c, frame.locs)
    return factors


def reconstruction_error(f: CartanFactors, u: np.ndarray) -> float:
    return float(np.max(np.abs(f.unitary() - np.asarray(u))))


def identity_factors() -> CartanFactors:
    return CartanFactors(I2.copy(), I2.copy(), I2.copy(), I2.copy(), CanonicalCoords(0.0, 0.0, 0.0), 0.0)
