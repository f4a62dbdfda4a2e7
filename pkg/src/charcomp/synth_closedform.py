"""Closed-form synthesis from single-axis pulses.

A single-axis pulse is locally equivalent to ``can(a, 0, 0)``. Two of them
with Z rotations in between form the motif

    can(c1, c2, 0) ~ (Z(t1) x Z(t2)) can(a) (Z(p1) x Z(p2)) can(b) (Z(t3) x Z(t4))

whose angles follow from matching invariants. Three pulses reach
``can(c1, c2, c3)`` by chaining two motifs through an intermediate coordinate
``delta``: ``can(c1, c2, 0)`` from ``(a, delta)`` and ``can(delta, c3, 0)``
from ``(b, c)``, joined by a basis change that turns YY into ZZ.

Physical pulses enter through their cached Cartan frames. The outer layers of
the final block always come from :func:`compute_outer_locals`.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .errors import CoverageIncomplete, Infeasible, NotSingleAxis
from .linalg import X, Y, Z, dagger, kron, kron_factor, phase_aligned_diff, rz, zyz_angles
from .synth_numeric import OuterLocals, SynthesisResult, finish_synthesis, invariant_loss, sequence_unitary
from .weyl import CartanFactors, canonical_gate, canonical_point_candidates, cartan_decompose, mirror_factors

if TYPE_CHECKING:
    from .coverage import CoverageSet, GateSet

RHS_TOL = 1e-12
FEAS_TOL = 1e-9
DEGENERATE = 1e-10

# pi rotations exchanging two Pauli axes; paired on both qubits they permute
# the canonical coordinates
_YZ_SWAP = (Y + Z) / np.sqrt(2)
_XY_SWAP = (X + Y) / np.sqrt(2)
_ZI = kron(Z, np.eye(2))


@dataclass(frozen=True)
class TwoPulseAngles:
    """Angles of the two-pulse motif targeting ``can(c1, c2, 0)``.

    The circuit is ``(Z(theta1) x Z(theta2)) can(ceff1) (Z(phi1) x Z(phi2))
    can(ceff2) (Z(theta3) x Z(theta4))``.
    """

    c1: float
    c2: float
    ceff1: float
    ceff2: float
    phi1: float
    phi2: float
    theta1: float
    theta2: float
    theta3: float
    theta4: float
    phi_sigma: float
    phi_delta: float
    gamma_delta1: float
    gamma_delta2: float
    gamma_sigma1: float
    gamma_sigma2: float

    def inner_layer(self) -> np.ndarray:
        return kron(rz(self.phi1), rz(self.phi2))

    def left_layer(self) -> np.ndarray:
        return kron(rz(self.theta1), rz(self.theta2))

    def right_layer(self) -> np.ndarray:
        return kron(rz(self.theta3), rz(self.theta4))

    def circuit(self) -> np.ndarray:
        return (self.left_layer() @ canonical_gate((self.ceff1, 0, 0)) @ self.inner_layer()
                @ canonical_gate((self.ceff2, 0, 0)) @ self.right_layer())


def _motif_ratios(x, y, a, b):
    """``cos 2 phi`` for the sum and difference of ``(x, y)``; broadcasts over arrays."""
    s, d = a + b, a - b
    den = np.cos(d) - np.cos(s)
    r_sigma = (np.cos(s) + np.cos(d) - 2 * np.cos(x + y)) / den
    r_delta = (np.cos(s) + np.cos(d) - 2 * np.cos(x - y)) / den
    return r_sigma, r_delta


def _motif_ok(x, y, a, b, tol: float = RHS_TOL):
    """Whether the motif from ``(a, b)`` reaches ``can(x, y, 0)``; vectorized."""
    den = np.cos(np.subtract(a, b)) - np.cos(np.add(a, b))
    with np.errstate(divide="ignore", invalid="ignore"):
        r_s, r_d = _motif_ratios(x, y, a, b)
        ok = (np.abs(r_s) <= 1 + tol) & (np.abs(r_d) <= 1 + tol)
    return ok & (np.abs(den) >= DEGENERATE)


def two_pulse_feasible(c_block: Sequence[float], ceff1: float, ceff2: float) -> bool:
    """Whether two pulses of strengths ``ceff1, ceff2`` reach a base-plane point.

    The conditions are ``ceff1 + ceff2 >= c1 + c2`` and
    ``|ceff1 - ceff2| <= c1 - c2``, checked for the point and its mirror.
    """
    a, b = max(ceff1, ceff2), min(ceff1, ceff2)
    c1, c2, c3 = (float(v) for v in c_block)
    if abs(c3) > FEAS_TOL:
        return False
    for rep in canonical_point_candidates((c1, c2, 0.0)):
        if a + b >= rep.c1 + rep.c2 - FEAS_TOL and a - b <= rep.c1 - rep.c2 + FEAS_TOL:
            return True
    return False


def _gamma1(p: float, s: float, d: float) -> float:
    return 0.5 * np.arctan2(-np.cos(d / 2) * np.sin(p), np.cos(s / 2) * np.cos(p))


def _gamma2(p: float, s: float, d: float) -> float:
    return 0.5 * np.arctan2(np.sin(d / 2) * np.sin(p), np.sin(s / 2) * np.cos(p))


def two_pulse_angles(c1: float, c2: float, ceff1: float, ceff2: float) -> TwoPulseAngles:
    """Z-rotation angles for the two-pulse motif reaching ``can(c1, c2, 0)``.

    The assembled circuit equals ``can(c1, c2, 0)`` up to global phase when
    ``c1 >= c2 >= 0`` and ``c1 + c2 <= pi``; other inputs give a locally
    equivalent point.

    Raises:
        Infeasible: a ``cos 2 phi`` value leaves ``[-1, 1]`` by more than 1e-12,
            or one pulse is trivial and the other does not match the target.
    """
    a, b = float(ceff1), float(ceff2)
    s, d = a + b, a - b
    if abs(np.cos(d) - np.cos(s)) < DEGENERATE:
        # one pulse is (numerically) the identity: only the other pulse's point is reachable
        total = a + b
        if abs(c2) <= FEAS_TOL and any(
                np.isclose(rep.c1, total, atol=FEAS_TOL) or np.isclose(rep.c1, np.pi - total, atol=FEAS_TOL)
                for rep in canonical_point_candidates((abs(c1), 0.0, 0.0))):
            return TwoPulseAngles(c1, c2, a, b, *([0.0] * 12))
        raise Infeasible(f"degenerate motif ({a:.3g}, {b:.3g}) cannot reach ({c1:.3g}, {c2:.3g}, 0)")
    r_sigma, r_delta = _motif_ratios(c1, c2, a, b)
    if abs(r_sigma) > 1 + RHS_TOL or abs(r_delta) > 1 + RHS_TOL:
        raise Infeasible(f"pulses ({a:.4g}, {b:.4g}) cannot reach ({c1:.4g}, {c2:.4g}, 0)")
    phi_sigma = 0.5 * np.arccos(np.clip(r_sigma, -1.0, 1.0))
    phi_delta = 0.5 * np.arccos(np.clip(r_delta, -1.0, 1.0))
    gd1, gd2 = _gamma1(phi_delta, s, d), _gamma2(phi_delta, s, d)
    gs1, gs2 = _gamma1(phi_sigma, s, d), _gamma2(phi_sigma, s, d)
    return TwoPulseAngles(
        c1=float(c1), c2=float(c2), ceff1=a, ceff2=b,
        phi1=float(phi_delta + phi_sigma), phi2=float(phi_delta - phi_sigma),
        theta1=float(gd1 + gd2 + gs1 + gs2), theta2=float(gd1 + gd2 - gs1 - gs2),
        theta3=float(gd1 - gd2 + gs1 - gs2), theta4=float(gd1 - gd2 - gs1 + gs2),
        phi_sigma=float(phi_sigma), phi_delta=float(phi_delta),
        gamma_delta1=float(gd1), gamma_delta2=float(gd2), gamma_sigma1=float(gs1), gamma_sigma2=float(gs2),
    )


@dataclass(frozen=True)
class ThreePulsePlan:
    """Three-pulse construction of ``can(c1, c2, c3)`` through ``can(delta, 0, 0)``.

    Attributes:
        delta: Intermediate coordinate actually used.
        lower, upper: The interval ``[L, U]`` from the triangle conditions.
        first_motif: ``can(c1, c2, 0)`` from ``(ceff1, delta)``.
        second_motif: ``can(delta, c3, 0)`` from ``(ceff2, ceff3)``.
        coords: Target coordinates the plan was built for.
        ceff: Pulse strengths in slot order.
        swapped: The second motif targets ``can(c3, delta, 0)`` because
            ``delta < c3``.
        chiral: The motifs build the mirror-image class ``can(coords)*``;
            the layers are conjugated so the product equals ``can(-coords)``.
    """

    delta: float
    lower: float
    upper: float
    first_motif: TwoPulseAngles
    second_motif: TwoPulseAngles
    coords: tuple
    ceff: tuple
    swapped: bool = False
    chiral: bool = False

    def _junction(self) -> np.ndarray:
        # can(delta, 0, c3) = J can(delta, c3, 0) J with J the YZ exchange;
        # an extra XY exchange handles the swapped second motif
        j = kron(_YZ_SWAP, _YZ_SWAP)
        if self.swapped:
            j = j @ kron(_XY_SWAP, _XY_SWAP)
        return j

    def inner_layers(self) -> tuple[np.ndarray, np.ndarray]:
        """The two inner layers between the canonical pulses."""
        l1 = self.first_motif.inner_layer() @ self._junction() @ self.second_motif.left_layer()
        l2 = self.second_motif.inner_layer()
        if self.chiral:
            # can(a)* = can(-a) = ZI can(a) ZI
            return _ZI @ l1.conj() @ _ZI, _ZI @ l2.conj() @ _ZI
        return l1, l2

    def outer_layers(self) -> tuple[np.ndarray, np.ndarray]:
        junction = dagger(self._junction())
        left = self.first_motif.left_layer()
        right = self.second_motif.right_layer() @ junction @ self.first_motif.right_layer()
        if self.chiral:
            return left.conj() @ _ZI, _ZI @ right.conj()
        return left, right

    def realized_coords(self) -> tuple:
        """Coordinates ``c`` with ``circuit() = can(c)`` up to global phase."""
        return tuple(-x for x in self.coords) if self.chiral else self.coords

    def circuit(self) -> np.ndarray:
        """Assembled product; equals ``can(coords)`` up to global phase."""
        l1, l2 = self.inner_layers()
        left, right = self.outer_layers()
        a, b, c = self.ceff
        return (left @ canonical_gate((a, 0, 0)) @ l1 @ canonical_gate((b, 0, 0)) @ l2
                @ canonical_gate((c, 0, 0)) @ right)


def delta_interval(c: Sequence[float], ceff: Sequence[float]) -> tuple[float, float]:
    """``(L, U)`` for slot strengths ``ceff`` and target ``c``."""
    c1, c2, c3 = (float(v) for v in c)
    k1, k2, k3 = (float(v) for v in ceff)
    lower = max(c1 + c2 - k1, k1 - c1 + c2, abs(k2 - k3) + c3)
    upper = k2 + k3 - c3
    return lower, upper


def _delta_candidates(c, ceff, lower: float, upper: float) -> np.ndarray:
    """Intermediate coordinates worth testing for a given slot assignment.

    Each motif is feasible on a union of intervals in delta whose ends are
    where one of the linear conditions is tight. Those ends, the midpoints
    between consecutive ends and a uniform grid are returned, ``U`` first.
    """
    c1, c2, c3 = c
    k1, k2, k3 = ceff
    s_blk, d_blk = c1 + c2, c1 - c2
    ends = [s_blk - k1, k1 - d_blk, k1 + d_blk, 2 * np.pi - k1 - s_blk,
            k2 + k3 - c3, abs(k2 - k3) + c3, c3 - abs(k2 - k3), c3 - k2 - k3,
            2 * np.pi - k2 - k3 - c3, np.pi - c3]
    ends = np.unique(np.clip(ends, 0.0, np.pi))
    mids = 0.5 * (ends[1:] + ends[:-1])
    head = [upper, lower, 0.5 * (lower + upper)] if lower <= upper + RHS_TOL else []
    return np.concatenate([head, ends, mids, np.linspace(0.0, np.pi, 721)])


def _valid_deltas(c, ceff, deltas: np.ndarray) -> np.ndarray:
    c1, c2, c3 = c
    k1, k2, k3 = ceff
    deltas = deltas[(deltas >= 0) & (deltas + c3 <= np.pi + RHS_TOL)]
    ok = _motif_ok(c1, c2, k1, deltas) & _motif_ok(deltas, c3, k2, k3)
    return deltas[ok]


def _build_plan(c, ceff, delta, lower, upper, chiral: bool = False) -> ThreePulsePlan:
    first = two_pulse_angles(c[0], c[1], ceff[0], delta)
    swapped = delta < c[2]
    second = two_pulse_angles(max(delta, c[2]), min(delta, c[2]), ceff[1], ceff[2])
    return ThreePulsePlan(float(delta), float(lower), float(upper), first, second, tuple(map(float, c)),
                          tuple(map(float, ceff)), bool(swapped), bool(chiral))


def _motif_valid(plan: ThreePulsePlan, target: np.ndarray | None = None, tol: float = 1e-9) -> bool:
    if target is None:
        target = canonical_gate(plan.realized_coords())
    v = plan.circuit()
    return abs(abs(np.trace(dagger(v) @ target)) / 4 - 1) < tol


def three_pulse_plan(c: Sequence[float], ceff: Sequence[float], delta: float | None = None) -> ThreePulsePlan:
    """Three-pulse construction for the fixed slot assignment ``ceff``.

    ``delta = U`` is tried first. One of the two motifs can be out of reach
    there, so ``L``, the midpoint, the ends of each motif's feasibility
    intervals and a grid over ``[L, U]`` follow. The first value whose
    assembled circuit reproduces ``can(c)`` is kept.

    Args:
        c: Target coordinates.
        ceff: Strengths of the pulses in slot order.
        delta: Force this intermediate coordinate instead of searching.

    Raises:
        Infeasible: ``L > U`` beyond 1e-12, or no candidate works.
    """
    c = tuple(float(v) for v in c)
    ceff = tuple(float(v) for v in ceff)
    lower, upper = delta_interval(c, ceff)
    if lower > upper + RHS_TOL:
        raise Infeasible(f"empty delta interval [{lower:.4g}, {upper:.4g}] for {c} with pulses {ceff}")
    target = canonical_gate(c)
    if delta is not None:
        plan = _build_plan(c, ceff, delta, lower, upper)
        if not _motif_valid(plan, target):
            raise Infeasible(f"delta = {delta:.4g} does not reconstruct the target")
        return plan
    grid = _delta_candidates(c, ceff, lower, upper)
    grid = np.concatenate([grid, np.linspace(lower, upper, 41)])
    grid = grid[(grid >= lower - RHS_TOL) & (grid <= upper + RHS_TOL)]
    for d in _valid_deltas(c, ceff, grid):
        plan = _build_plan(c, ceff, d, lower, upper)
        if _motif_valid(plan, target):
            return plan
    raise Infeasible(f"no delta in [{lower:.4g}, {upper:.4g}] makes both motifs real for {c}")


def three_pulse_search(c: Sequence[float], ceff: Sequence[float]) -> tuple[ThreePulsePlan, tuple]:
    """Three-pulse plan over slot orders and equivalent coordinate orderings.

    Returns:
        ``(plan, slot_order)`` where ``slot_order[i]`` indexes ``ceff`` for slot ``i``.

    Raises:
        Infeasible: no ordering and intermediate coordinate works.
    """
    c = tuple(float(v) for v in c)
    # off the base plane the mirror point is the other chirality, reached by conjugating the circuit
    reps = [(c, False), ((np.pi - c[0], c[1], c[2]), c[2] > FEAS_TOL)]
    coord_orders = []
    for rep, chiral in reps:
        for perm in itertools.permutations(range(3)):
            cand = tuple(rep[i] for i in perm)
            # the motif is exact only for ordered points below the c1 + c2 = pi face
            if cand[0] < cand[1] or cand[0] + cand[1] > np.pi + RHS_TOL:
                continue
            if (cand, chiral) not in coord_orders:
                coord_orders.append((cand, chiral))
    slot_orders = list(dict.fromkeys(itertools.permutations(range(3))))
    # the descending assignment on the given coordinates first, as the bounds assume
    for order in slot_orders:
        k = tuple(ceff[i] for i in order)
        try:
            return three_pulse_plan(c, k), order
        except Infeasible:
            continue
    for cand, chiral in coord_orders:
        for order in slot_orders:
            k = tuple(ceff[i] for i in order)
            lower, upper = delta_interval(cand, k)
            for d in _valid_deltas(cand, k, _delta_candidates(cand, k, lower, upper)):
                plan = _build_plan(cand, k, d, lower, upper, chiral)
                if _motif_valid(plan):
                    return plan, order
    raise Infeasible(f"no three-pulse construction found for {c} with strengths {tuple(ceff)}")


# -- mapping onto physical pulses ----------------------------------------------


def _check_single_axis(key, gateset: "GateSet") -> None:
    for k in key:
        g = gateset.gates[k]
        if not g.single_axis:
            raise NotSingleAxis(f"gate {g.label!r} has coordinates {tuple(g.coords)}")


def _physical_inner(key_seq: Sequence[int], layers: Sequence[tuple[np.ndarray, np.ndarray]],
                    gateset: "GateSet") -> np.ndarray:
    """Angles of the inner layers once canonical pulses are replaced by physical ones.

    ``can(ceff) = exp(-i a) (w1 x w2)^dag U (w3 x w4)^dag``, so the frames of
    neighbouring pulses fold into each inner layer.
    """
    angles = []
    for j, (la, lb) in enumerate(layers):
        left = gateset.gates[key_seq[j]].frame
        right = gateset.gates[key_seq[j + 1]].frame
        qa = dagger(left.w3) @ la @ dagger(right.w1)
        qb = dagger(left.w4) @ lb @ dagger(right.w2)
        angles.append(zyz_angles(qa)[:3])
        angles.append(zyz_angles(qb)[:3])
    return np.array(angles, dtype=float).reshape(-1, 3)


def _frame_at(factors: CartanFactors, coords) -> CartanFactors | None:
    """``factors`` re-expressed at the chamber representative ``coords``, if it is one."""
    if factors.coords.distance(coords) <= FEAS_TOL:
        return factors
    mirrored = mirror_factors(factors)
    if mirrored.coords.distance(coords) <= FEAS_TOL:
        return mirrored
    return None


def _known_frame_result(target, key, seq, gateset, inner, k1, k2, coords, factors) -> SynthesisResult | None:
    """Finish a closed-form sequence ``V = k1 can(coords) k2`` without decomposing ``V``.

    Returns ``None`` when the frames cannot be matched directly; the caller then
    falls back to the generic finish.
    """
    tf = _frame_at(factors, coords)
    if tf is None:
        g = cartan_decompose(canonical_gate(coords))
        if g.coords.distance(factors.coords) > FEAS_TOL:
            return None
        k1 = k1 @ kron(g.w1, g.w2)
        k2 = kron(g.w3, g.w4) @ k2
        tf = factors
    pulses = [gateset.gates[k].unitary for k in seq]
    v = sequence_unitary(pulses, inner) if pulses else np.eye(4, dtype=complex)
    v1, v2, _ = kron_factor(kron(tf.w1, tf.w2) @ dagger(k1))
    v3, v4, _ = kron_factor(dagger(k2) @ kron(tf.w3, tf.w4))
    core = kron(v1, v2) @ v @ kron(v3, v4)
    phase = float(np.angle(np.trace(dagger(core) @ target)))
    recon = np.exp(1j * phase) * core
    error = phase_aligned_diff(recon, target)
    if error > 1e-8:
        return None
    return SynthesisResult(
        key=tuple(key), sequence=tuple(seq), inner=np.asarray(inner, dtype=float).reshape(-1, 3),
        outer=OuterLocals(v1, v2, v3, v4, phase), residual=invariant_loss(v, target), reconstruction=recon,
        cost=gateset.sequence_cost(key), method="closed_form", error=error)


def _result(target, key, seq, gateset, layers, factors=None, outer_layers=None, coords=None) -> SynthesisResult:
    """Physical sequence for canonical ``layers``.

    With ``outer_layers = (left, right)`` the canonical product satisfies
    ``left can(k1) ... can(kn) right = can(coords)``, which fixes the outer
    locals without another decomposition.
    """
    pulses = [gateset.gates[k].unitary for k in seq]
    inner = _physical_inner(seq, layers, gateset) if len(seq) > 1 else np.zeros((0, 3))
    if factors is not None and outer_layers is not None:
        first, last = gateset.gates[seq[0]].frame, gateset.gates[seq[-1]].frame
        k1 = kron(first.w1, first.w2) @ dagger(outer_layers[0])
        k2 = dagger(outer_layers[1]) @ kron(last.w3, last.w4)
        res = _known_frame_result(target, key, seq, gateset, inner, k1, k2, coords, factors)
        if res is not None:
            return res
    return finish_synthesis(target, key, seq, pulses, inner, gateset.sequence_cost(key), "closed_form",
                            factors)


def synthesize_single_axis_key(target: np.ndarray, key: Sequence[int], gateset: "GateSet",
                               target_factors: CartanFactors | None = None) -> SynthesisResult:
    """Closed-form synthesis of ``target`` with the pulses in ``key``.

    ``target_factors`` reuses an existing decomposition of ``target``.

    Raises:
        NotSingleAxis: a pulse in ``key`` is not single-axis.
        Infeasible: the pulses cannot reach the target's coordinates.
    """
    key = tuple(key)
    _check_single_axis(key, gateset)
    target = np.asarray(target, dtype=complex)
    factors = target_factors or cartan_decompose(target)
    c = factors.coords
    strengths = [gateset.gates[k].coords.c1 for k in key]
    if len(key) == 1:
        reps = canonical_point_candidates(c)
        point = (strengths[0], 0.0, 0.0)
        if not any(r.distance(point) <= FEAS_TOL for r in reps):
            raise Infeasible(f"single pulse at {strengths[0]:.4g} does not match {tuple(c)}")
        return _result(target, key, key, gateset, [], factors, (np.eye(4), np.eye(4)), point)
    if len(key) == 2:
        if c.c3 > FEAS_TOL:
            raise Infeasible("two single-axis pulses only reach the base plane")
        for order in ((0, 1), (1, 0)):
            seq = tuple(key[i] for i in order)
            a, b = strengths[order[0]], strengths[order[1]]
            for rep in canonical_point_candidates(c):
                try:
                    angles = two_pulse_angles(rep.c1, rep.c2, a, b)
                except Infeasible:
                    continue
                res = _result(target, key, seq, gateset, [_split_local(angles.inner_layer())], factors,
                              (angles.left_layer(), angles.right_layer()), (rep.c1, rep.c2, 0.0))
                if res.error <= 1e-8:
                    return res
        raise Infeasible(f"two-pulse motif cannot reach {tuple(c)}")
    plan, order = three_pulse_search(c, strengths)
    seq = tuple(key[i] for i in order)
    l1, l2 = plan.inner_layers()
    return _result(target, key, seq, gateset, [_split_local(l1), _split_local(l2)], factors,
                   plan.outer_layers(), plan.realized_coords())


def _split_local(layer: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a, b, phase = kron_factor(layer)
    return a * np.exp(1j * phase), b


def synthesize_single_axis(target: np.ndarray, gateset: "GateSet", coverage: "CoverageSet") -> SynthesisResult:
    """Closed-form synthesis with the cheapest coverage entry containing the target.

    Raises:
        NotSingleAxis: the cheapest containing entry uses a multi-axis pulse.
        Infeasible: the construction fails for that entry.
        CoverageIncomplete: no entry contains the target.
    """
    c = cartan_decompose(target).coords
    for entry in coverage.entries:
        if not entry.polytope.contains(c):
            continue
        if not entry.key:
            return finish_synthesis(target, (), (), [], np.zeros((0, 3)), entry.cost, "local")
        return synthesize_single_axis_key(target, entry.key, gateset)
    raise CoverageIncomplete(f"no coverage entry contains {tuple(c)}")
