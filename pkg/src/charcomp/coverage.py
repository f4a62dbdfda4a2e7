"""Gate sets, the duration cost model and coverage sets over the Weyl chamber.

A coverage set lists pulse-sequence ansatze together with the region of the
chamber each one can synthesize, sorted by duration. For sequences of
single-axis pulses the regions are known in closed form:

* one pulse of strength ``a``: the point ``(a, 0, 0)``;
* two pulses ``a >= b``: the base-plane region ``c1 + c2 <= a + b``,
  ``c1 - c2 >= a - b``;
* three pulses ``a >= b >= c``: ``c1 + c2 + c3 <= a + b + c``,
  ``-c1 + c2 + c3 <= -a + b + c`` and ``c3 <= c``.

Keys containing any other pulse get a region from numerical probing: a
lattice over the chamber is tested with the invariant matcher and the convex
hull of the successes is stored.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, QhullError

from .errors import CoverageIncomplete, GateSetInvalid, ValidationError
from .linalg import ECR, X, Z, check_unitary, herm_exp, kron, matrix_from_json, matrix_to_json
from .synth_numeric import AnsatzKey, OptimizerConfig, make_key, match_invariants
from .weyl import CanonicalCoords, CartanFactors, canonical_gate, canonical_point_candidates, cartan_decompose

log = logging.getLogger(__name__)

SINGLE_AXIS_TOL = 1e-9
SPE_TOL = 1e-6
SPE_POINT = CanonicalCoords(np.pi / 2, 0.0, 0.0)
MEMBER_TOL = 1e-9

# chamber: c2 - c1 <= 0, c3 - c2 <= 0, -c3 <= 0, c1 + c2 <= pi
_CHAMBER = (((-1.0, 1.0, 0.0), 0.0), ((0.0, -1.0, 1.0), 0.0), ((0.0, 0.0, -1.0), 0.0), ((1.0, 1.0, 0.0), np.pi))
_CHAMBER_VERTICES = np.array([[0, 0, 0], [np.pi, 0, 0], [np.pi / 2, np.pi / 2, 0], [np.pi / 2, np.pi / 2, np.pi / 2]])


@dataclass(frozen=True)
class PulseGate:
    """A characterized pulse with its duration and cached Cartan frame."""

    label: str
    unitary: np.ndarray
    duration: float
    coords: CanonicalCoords
    frame: CartanFactors
    single_axis: bool

    @property
    def is_spe(self) -> bool:
        return self.coords.distance(SPE_POINT) <= SPE_TOL

    def to_json(self) -> dict:
        return {"label": self.label, "duration": self.duration, "unitary": matrix_to_json(self.unitary)}


def make_pulse_gate(label: str, unitary, duration: float) -> PulseGate:
    """Wrap a pulse unitary, caching its chamber coordinates and frame.

    Raises:
        ValidationError: not a 4x4 unitary, or a negative duration.
        DecompositionFailure: the Cartan decomposition failed.
    """
    u = check_unitary(unitary, 4, name=f"pulse {label!r}")
    if not duration >= 0:
        raise ValidationError(f"pulse {label!r} has invalid duration {duration!r}")
    frame = cartan_decompose(u)
    c = frame.coords
    single = c.c2 < SINGLE_AXIS_TOL and c.c3 < SINGLE_AXIS_TOL
    return PulseGate(str(label), u, float(duration), c, frame, bool(single))


@dataclass(frozen=True)
class GateSet:
    """The pulses available on one qubit pair.

    Attributes:
        pair: The two physical qubits, control side first.
        gates: Characterized pulses.
        one_qubit_layer_duration: Cost of one layer of single-qubit gates.
    """

    pair: tuple
    gates: tuple
    one_qubit_layer_duration: float

    def __post_init__(self):
        object.__setattr__(self, "pair", tuple(int(q) for q in self.pair))
        object.__setattr__(self, "gates", tuple(self.gates))
        if len(self.pair) != 2 or self.pair[0] == self.pair[1]:
            raise GateSetInvalid(f"pair must be two distinct qubits, got {self.pair}")
        if not self.one_qubit_layer_duration >= 0:
            raise GateSetInvalid("one_qubit_layer_duration must be non-negative")
        if not any(g.is_spe for g in self.gates):
            raise GateSetInvalid(f"gate set on {self.pair} has no gate locally equivalent to CX")

    @property
    def spe_index(self) -> int:
        """Index of the cheapest CX-class gate (lowest index on ties)."""
        return min((i for i, g in enumerate(self.gates) if g.is_spe), key=lambda i: (self.gates[i].duration, i))

    def sequence_cost(self, key: Sequence[int]) -> float:
        """Pulse durations plus one single-qubit layer per pulse (at least one)."""
        pulses = sum(self.gates[k].duration for k in key)
        return float(pulses + max(len(key), 1) * self.one_qubit_layer_duration)

    def spe_only(self) -> "GateSet":
        return GateSet(self.pair, (self.gates[self.spe_index],), self.one_qubit_layer_duration)

    def with_gate(self, gate: PulseGate) -> "GateSet":
        return GateSet(self.pair, self.gates + (gate,), self.one_qubit_layer_duration)

    def to_json(self) -> dict:
        return {"pair": list(self.pair), "one_qubit_layer_duration": self.one_qubit_layer_duration,
                "gates": [g.to_json() for g in self.gates]}

    @classmethod
    def from_json(cls, data: dict) -> "GateSet":
        try:
            gates = tuple(make_pulse_gate(g["label"], matrix_from_json(g["unitary"]), float(g["duration"]))
                          for g in data["gates"])
            return cls(tuple(data["pair"]), gates, float(data["one_qubit_layer_duration"]))
        except (KeyError, TypeError) as exc:
            raise GateSetInvalid(f"malformed gate-set JSON: {exc!r}") from exc


@dataclass(frozen=True)
class Polytope:
    """Region of the chamber reachable by one ansatz.

    Attributes:
        kind: ``"points"``, ``"halfspaces"``, ``"full"`` or ``"probed"``.
        inequalities: Constraints ``a . c <= b`` as ``((a1, a2, a3), b)``.
        special_points: Exact reachable points for single-pulse keys.
        margin: For probed regions, the shrink used for membership and the
            half-width of the boundary band.
        support: For probed regions, the lattice points that were reached.
        alt_inequalities: A second half-space region joined to the first by
            union (the mirror-chirality part of a three-pulse region).
    """

    kind: str
    inequalities: tuple = ()
    special_points: tuple | None = None
    margin: float = 0.0
    support: tuple = ()
    alt_inequalities: tuple = ()

    def _satisfies(self, x: Sequence[float], slack: float) -> bool:
        if all(np.dot(a, x) <= b + slack for a, b in self.inequalities):
            return True
        return bool(self.alt_inequalities) and all(np.dot(a, x) <= b + slack for a, b in self.alt_inequalities)

    def regions(self) -> list:
        """The half-space systems whose union is the region."""
        return [r for r in (self.inequalities, self.alt_inequalities) if r]

    def contains(self, c: Sequence[float], tol: float = MEMBER_TOL) -> bool:
        """Membership with tolerance ``tol``; the mirror point is checked on the base plane."""
        if self.kind == "full":
            return True
        reps = canonical_point_candidates(c, tol)
        if self.kind == "points":
            return any(r.distance(p) <= tol for r in reps for p in self.special_points)
        if self.kind == "halfspaces":
            return any(self._satisfies(r, tol) for r in reps)
        if self.inequalities:
            return any(self._satisfies(r, -self.margin) for r in reps)
        return any(r.distance(p) <= tol for r in reps for p in self.support)

    def status(self, c: Sequence[float]) -> str:
        """``"inside"``, ``"boundary"`` (probed regions only) or ``"outside"``."""
        if self.contains(c):
            return "inside"
        if self.kind != "probed":
            return "outside"
        reps = canonical_point_candidates(c, MEMBER_TOL)
        if self.inequalities:
            near = any(self._satisfies(r, self.margin) for r in reps)
        else:
            near = any(np.linalg.norm(np.subtract(r, p)) <= self.margin for r in reps for p in self.support)
        return "boundary" if near else "outside"

    def to_json(self) -> dict:
        out = {"kind": self.kind, "inequalities": [[list(a), b] for a, b in self.inequalities]}
        if self.alt_inequalities:
            out["alt_inequalities"] = [[list(a), b] for a, b in self.alt_inequalities]
        if self.special_points is not None:
            out["special_points"] = [list(p) for p in self.special_points]
        if self.kind == "probed":
            out["margin"] = self.margin
            out["support"] = [list(p) for p in self.support]
        return out


def polytope_contains(q: Polytope, c: Sequence[float]) -> bool:
    return q.contains(c)


FULL_CHAMBER = Polytope("full")


def closed_form_polytope(strengths: Sequence[float]) -> Polytope:
    """Region reachable by single-axis pulses of the given strengths."""
    s = sorted((float(x) for x in strengths if x > SINGLE_AXIS_TOL), reverse=True)
    if not s:
        return Polytope("points", special_points=(CanonicalCoords(0.0, 0.0, 0.0),))
    if len(s) == 1:
        return Polytope("points", special_points=(CanonicalCoords(s[0], 0.0, 0.0),))
    if len(s) == 2:
        a, b = s
        ineq = (((0.0, 0.0, 1.0), 0.0), ((1.0, 1.0, 0.0), a + b), ((-1.0, 1.0, 0.0), -(a - b)))
        return Polytope("halfspaces", ineq)
    a, b, c = s
    ineq = (((1.0, 1.0, 1.0), a + b + c), ((-1.0, 1.0, 1.0), -a + b + c), ((0.0, 0.0, 1.0), c))
    # the same conditions on the mirror point (pi - c1, c2, c3), reachable by the conjugate circuit
    alt = tuple(((-r[0], r[1], r[2]), bound - np.pi * r[0]) for r, bound in ineq)
    poly = Polytope("halfspaces", ineq, alt_inequalities=alt)
    if all(poly._satisfies(v, MEMBER_TOL) for v in _CHAMBER_VERTICES):
        return Polytope("full", ineq)
    return poly


@dataclass(frozen=True)
class ProbeConfig:
    """Lattice probing of regions for keys with multi-axis pulses."""

    lattice_step: float = np.pi / 20
    threshold: float = 1e-8
    n_starts: int = 5
    max_steps: int = 100
    seed: int = 0


def chamber_lattice(step: float) -> np.ndarray:
    n = int(round(np.pi / step))
    pts = []
    for i in range(n + 1):
        for j in range(min(i, n - i) + 1):
            for k in range(j + 1):
                pts.append((i * step, j * step, k * step))
    return np.array(pts)


def probe_polytope(pulses: Sequence[np.ndarray], probe: ProbeConfig) -> Polytope:
    """Convex hull of lattice points reached by the pulse sequence."""
    cfg = OptimizerConfig(max_steps=probe.max_steps, n_starts=probe.n_starts, threshold=probe.threshold,
                          seed=probe.seed)
    reached = []
    for c in chamber_lattice(probe.lattice_step):
        if match_invariants(pulses, canonical_gate(c), cfg).success:
            reached.append(tuple(float(x) for x in c))
    margin = probe.lattice_step
    ineq: tuple = ()
    if len(reached) >= 4:
        try:
            hull = ConvexHull(np.array(reached))
            ineq = tuple((tuple(float(v) for v in eq[:3]), float(-eq[3])) for eq in hull.equations)
        except QhullError:
            ineq = ()
    return Polytope("probed", ineq, margin=margin, support=tuple(reached))


@dataclass(frozen=True)
class CoverageEntry:
    key: AnsatzKey
    polytope: Polytope
    cost: float


@dataclass(frozen=True)
class CoverageSet:
    """Ansatz keys with their regions, ascending by cost (ties by key)."""

    pair: tuple
    entries: tuple
    labels: tuple = field(default=())

    def to_json(self) -> dict:
        return {
            "pair": list(self.pair),
            "entries": [{"key": list(e.key), "labels": [self.labels[k] for k in e.key] if self.labels else None,
                         "cost": e.cost, "polytope": e.polytope.to_json()} for e in self.entries],
        }


def _system_subset(p_rows, q_rows) -> bool:
    rows = list(p_rows) + list(_CHAMBER)
    a_ub = np.array([a for a, _ in rows])
    b_ub = np.array([b for _, b in rows]) + MEMBER_TOL
    for a, b in q_rows:
        res = linprog(-np.asarray(a), A_ub=a_ub, b_ub=b_ub, bounds=[(None, None)] * 3, method="highs")
        if res.status == 2:
            return True
        if res.status != 0 or -res.fun > b + 1e-7:
            return False
    return True


def _halfspace_subset(p: Polytope, q: Polytope) -> bool:
    """Whether the chamber part of ``p`` lies inside ``q``, by linear programming.

    Each region of ``p`` must fit inside a single region of ``q``, which is
    conservative for unions.
    """
    return all(any(_system_subset(pr, qr) for qr in q.regions()) for pr in p.regions())


def polytope_subset(p: Polytope, q: Polytope, sample_step: float = np.pi / 40) -> bool:
    """Conservative test of ``p`` being contained in ``q``."""
    if q.kind == "full":
        return True
    if p.kind == "full":
        return False
    if p.kind == "points":
        return all(q.contains(x) for x in p.special_points)
    if q.kind == "points":
        return False
    if p.kind == "halfspaces" and q.kind == "halfspaces":
        return _halfspace_subset(p, q)
    # probed regions: compare on a lattice sample
    pts = [x for x in chamber_lattice(sample_step) if p.contains(x)] + list(p.support)
    return bool(pts) and all(q.contains(x) for x in pts)


def _enumerate_keys(gateset: GateSet) -> list[AnsatzKey]:
    keys = []
    for r in range(4):
        for combo in itertools.combinations_with_replacement(range(len(gateset.gates)), r):
            keys.append(make_key(combo, gateset))
    return list(dict.fromkeys(keys))


def build_coverage_set(gateset: GateSet, probe: ProbeConfig | None = None) -> CoverageSet:
    """Enumerate keys of up to three pulses, attach regions, sort and prune.

    Keys that cost more than three applications of the cheapest CX-class gate
    are skipped; that entry covers the whole chamber, so they can never be
    selected.
    """
    probe = probe or ProbeConfig()
    spe = gateset.spe_index
    full_key = (spe, spe, spe)
    full_cost = gateset.sequence_cost(full_key)
    entries = []
    for key in _enumerate_keys(gateset):
        cost = gateset.sequence_cost(key)
        if cost > full_cost + 1e-12:
            continue
        gates = [gateset.gates[k] for k in key]
        if key == full_key:
            poly = FULL_CHAMBER
        elif all(g.single_axis for g in gates):
            poly = closed_form_polytope([g.coords.c1 for g in gates])
        elif len(key) == 1:
            poly = Polytope("points", special_points=(gates[0].coords,))
        else:
            log.info("probing key %s", key)
            poly = probe_polytope([g.unitary for g in gates], probe)
        entries.append(CoverageEntry(tuple(key), poly, cost))
    entries.sort(key=lambda e: (e.cost, e.key))
    kept: list[CoverageEntry] = []
    for e in entries:
        if any(polytope_subset(e.polytope, k.polytope) for k in kept):
            continue
        kept.append(e)
    return CoverageSet(gateset.pair, tuple(kept), tuple(g.label for g in gateset.gates))


def select_ansatz(coverage: CoverageSet, c: Sequence[float]) -> AnsatzKey:
    """Cheapest entry whose region contains ``c``.

    Raises:
        CoverageIncomplete: no entry contains ``c``.
    """
    for e in coverage.entries:
        if e.polytope.contains(c):
            return e.key
    raise CoverageIncomplete(f"no coverage entry contains {tuple(c)}")


def select_entry(coverage: CoverageSet, c: Sequence[float]) -> CoverageEntry:
    for e in coverage.entries:
        if e.polytope.contains(c):
            return e
    raise CoverageIncomplete(f"no coverage entry contains {tuple(c)}")


def random_chamber_points(n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform samples from the Weyl chamber by rejection."""
    out: list = []
    while len(out) < n:
        x = rng.uniform([0, 0, 0], [np.pi, np.pi / 2, np.pi / 2], size=(2 * n, 3))
        ok = (x[:, 0] >= x[:, 1]) & (x[:, 1] >= x[:, 2]) & (x[:, 0] + x[:, 1] <= np.pi)
        out.extend(x[ok])
    return np.array(out[:n])


def example_gateset(pair=(0, 1), pulse_angle: float = np.pi / 4 + 0.05, pulse_duration: float = 100.0,
                    ecr_duration: float = 320.0, layer_duration: float = 60.0) -> GateSet:
    """A short ZX-type pulse plus an ECR gate, with the default benchmark costs."""
    short = herm_exp(0.5 * pulse_angle * kron(Z, X))
    return GateSet(pair, (make_pulse_gate("P", short, pulse_duration), make_pulse_gate("ECR", ECR, ecr_duration)),
                   layer_duration)
