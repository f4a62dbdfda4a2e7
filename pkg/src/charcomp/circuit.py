"""Circuit IR, block collection, compilation and small-scale simulation.

Qubit 0 is the most significant bit of basis-state indices and bitstrings. A
two-qubit gate on ``(a, b)`` uses ``a`` as the first tensor factor.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.linalg import expm

from .coverage import CoverageSet, GateSet, PulseGate, build_coverage_set
from .errors import BadBitstring, MissingGateSet, TooLarge, ValidationError
from .linalg import (
    CX,
    CZ,
    ECR,
    I2,
    PAULIS,
    SWAP,
    X,
    Y,
    Z,
    check_unitary,
    dagger,
    kron,
    matrix_from_json,
    matrix_to_json,
    rx,
    ry,
    rz,
    zyz_angles,
)
from .synth_numeric import OptimizerConfig, synthesize_block

log = logging.getLogger(__name__)

MAX_UNITARY_QUBITS = 6
MAX_STATEVECTOR_QUBITS = 20

_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_S = np.diag([1, 1j])
_SX = np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]]) / 2


def _cp(theta: float) -> np.ndarray:
    return np.diag([1, 1, 1, np.exp(1j * theta)])


def _rzz(theta: float) -> np.ndarray:
    return np.diag(np.exp(-0.5j * theta * np.array([1, -1, -1, 1])))


# name -> (arity, parameter count, builder)
_FIXED = {
    "x": (1, 0, lambda: X),
    "sx": (1, 0, lambda: _SX),
    "h": (1, 0, lambda: _H),
    "s": (1, 0, lambda: _S),
    "rz": (1, 1, rz),
    "ry": (1, 1, ry),
    "rx": (1, 1, rx),
    "cx": (2, 0, lambda: CX),
    "cz": (2, 0, lambda: CZ),
    "ecr": (2, 0, lambda: ECR),
    "cp": (2, 1, _cp),
    "rzz": (2, 1, _rzz),
}
_MATRIX = {"unitary4", "pulse_ref"}
GATE_NAMES = tuple(_FIXED) + tuple(sorted(_MATRIX))


@dataclass(frozen=True)
class Gate:
    """One operation.

    Attributes:
        name: One of :data:`GATE_NAMES`.
        qubits: Target qubits.
        params: Real parameters. A ``pulse_ref`` carries its duration here.
        matrix: Explicit unitary for ``unitary4`` and ``pulse_ref``.
        label: Pulse label for ``pulse_ref``.
    """

    name: str
    qubits: tuple
    params: tuple = ()
    matrix: np.ndarray | None = field(default=None, compare=False)
    label: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if self.name in _FIXED:
            arity, npar, _ = _FIXED[self.name]
            if len(self.params) != npar:
                raise ValidationError(f"{self.name} takes {npar} parameter(s), got {len(self.params)}")
        elif self.name in _MATRIX:
            arity = 2
            if self.matrix is None:
                raise ValidationError(f"{self.name} needs a matrix")
            object.__setattr__(self, "matrix", check_unitary(self.matrix, 4, name=self.name))
        else:
            raise ValidationError(f"unknown gate {self.name!r}")
        if len(self.qubits) != arity:
            raise ValidationError(f"{self.name} acts on {arity} qubit(s), got {self.qubits}")
        if len(set(self.qubits)) != len(self.qubits):
            raise ValidationError(f"{self.name} on repeated qubits {self.qubits}")

    @property
    def unitary(self) -> np.ndarray:
        if self.matrix is not None:
            return self.matrix
        return np.asarray(_FIXED[self.name][2](*self.params), dtype=complex)

    @property
    def duration(self) -> float:
        return self.params[0] if self.name == "pulse_ref" and self.params else 0.0

    def to_json(self) -> dict:
        d: dict = {"name": self.name, "qubits": list(self.qubits)}
        if self.params:
            d["params"] = list(self.params)
        if self.matrix is not None:
            d["matrix"] = matrix_to_json(self.matrix)
        if self.label is not None:
            d["label"] = self.label
        return d

    @classmethod
    def from_json(cls, data: dict) -> "Gate":
        try:
            matrix = matrix_from_json(data["matrix"]) if "matrix" in data else None
            return cls(data["name"], tuple(data["qubits"]), tuple(data.get("params", ())), matrix, data.get("label"))
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed gate JSON {data!r}: {exc!r}") from exc


@dataclass
class Circuit:
    num_qubits: int
    gates: list = field(default_factory=list)

    def __post_init__(self):
        self.num_qubits = int(self.num_qubits)
        if self.num_qubits < 1:
            raise ValidationError("a circuit needs at least one qubit")
        for g in self.gates:
            self._check(g)

    def _check(self, g: Gate):
        if any(q < 0 or q >= self.num_qubits for q in g.qubits):
            raise ValidationError(f"{g.name} on {g.qubits} outside {self.num_qubits} qubits")

    def append(self, name: str, qubits, *params, matrix=None, label=None) -> "Circuit":
        g = Gate(name, tuple(qubits), tuple(params), matrix, label)
        self._check(g)
        self.gates.append(g)
        return self

    def add(self, g: Gate) -> "Circuit":
        self._check(g)
        self.gates.append(g)
        return self

    def two_qubit_gates(self) -> list[Gate]:
        return [g for g in self.gates if len(g.qubits) == 2]

    def to_json(self) -> dict:
        return {"num_qubits": self.num_qubits, "gates": [g.to_json() for g in self.gates]}

    @classmethod
    def from_json(cls, data: dict) -> "Circuit":
        try:
            return cls(int(data["num_qubits"]), [Gate.from_json(g) for g in data["gates"]])
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed circuit JSON: {exc!r}") from exc


# -- simulation --------------------------------------------------------------------


def _apply(psi: np.ndarray, mat: np.ndarray, qubits: Sequence[int]) -> np.ndarray:
    """Apply ``mat`` to axes ``qubits`` of a tensor of shape ``(2,)*n + rest``."""
    k = len(qubits)
    m = mat.reshape((2,) * (2 * k))
    out = np.tensordot(m, psi, axes=(list(range(k, 2 * k)), list(qubits)))
    return np.moveaxis(out, list(range(k)), list(qubits))


def circuit_unitary(c: Circuit) -> np.ndarray:
    """Full ``2^n x 2^n`` unitary of the circuit.

    Raises:
        TooLarge: more than six qubits.
    """
    n = c.num_qubits
    if n > MAX_UNITARY_QUBITS:
        raise TooLarge(f"circuit_unitary supports at most {MAX_UNITARY_QUBITS} qubits, got {n}")
    dim = 2**n
    psi = np.eye(dim, dtype=complex).reshape((2,) * n + (dim,))
    for g in c.gates:
        psi = _apply(psi, g.unitary, g.qubits)
    return psi.reshape(dim, dim)


def statevector(c: Circuit, initial: np.ndarray | None = None) -> np.ndarray:
    n = c.num_qubits
    if n > MAX_STATEVECTOR_QUBITS:
        raise TooLarge(f"statevector simulation supports at most {MAX_STATEVECTOR_QUBITS} qubits, got {n}")
    if initial is None:
        psi = np.zeros(2**n, dtype=complex)
        psi[0] = 1.0
    else:
        psi = np.asarray(initial, dtype=complex).copy()
    psi = psi.reshape((2,) * n)
    for g in c.gates:
        psi = _apply(psi, g.unitary, g.qubits)
    return psi.reshape(-1)


def bitstring(index: int, n: int) -> str:
    return format(index, f"0{n}b")


@dataclass(frozen=True)
class BenchNoiseModel:
    """Two-qubit depolarizing after each two-qubit gate, scaled by duration.

    A gate of duration ``d`` depolarizes with probability
    ``rate * d / reference_duration``. Gates without a duration (anything
    other than ``pulse_ref``) count as one reference duration.
    """

    two_qubit_depolarizing_per_reference_duration: float = 1e-2
    reference_duration: float = 320.0

    def __post_init__(self):
        if not 0.0 <= self.two_qubit_depolarizing_per_reference_duration <= 1.0:
            raise ValidationError("depolarizing probability must lie in [0, 1]")
        if not self.reference_duration > 0:
            raise ValidationError("reference_duration must be positive")

    def probability(self, g: Gate) -> float:
        d = g.duration if g.name == "pulse_ref" else self.reference_duration
        return min(1.0, self.two_qubit_depolarizing_per_reference_duration * d / self.reference_duration)

    def to_json(self) -> dict:
        return {"two_qubit_depolarizing_per_reference_duration": self.two_qubit_depolarizing_per_reference_duration,
                "reference_duration": self.reference_duration}


_PAULI4 = [kron(a, b) for a in (I2,) + PAULIS for b in (I2,) + PAULIS]


def output_distribution(c: Circuit, noise: BenchNoiseModel | None = None, rng: np.random.Generator | None = None,
                        trajectories: int = 64) -> np.ndarray:
    """Outcome probabilities, exact without noise and trajectory-sampled with it.

    With noise the error-free branch is weighted exactly by its probability
    ``prod(1 - p_i)``. The remaining weight is estimated from trajectories
    conditioned on at least one depolarizing event: the first event is drawn
    from its exact conditional law and later events independently.
    """
    clean = np.abs(statevector(c)) ** 2
    if noise is None:
        return clean
    rng = rng or np.random.default_rng(0)
    sites = [i for i, g in enumerate(c.gates) if len(g.qubits) == 2]
    probs = np.array([noise.probability(c.gates[i]) for i in sites])
    if not sites or not probs.any():
        return clean
    survive = np.concatenate([[1.0], np.cumprod(1 - probs)])
    p_clean = survive[-1]
    if p_clean >= 1.0:
        return clean
    first = probs * survive[:-1] / (1 - p_clean)
    n = c.num_qubits
    acc = np.zeros(2**n)
    for _ in range(trajectories):
        k = int(rng.choice(len(sites), p=first / first.sum()))
        hits = {sites[k]}
        later = rng.random(len(sites) - k - 1) < probs[k + 1:]
        hits.update(sites[k + 1 + j] for j in np.flatnonzero(later))
        psi = np.zeros(2**n, dtype=complex)
        psi[0] = 1.0
        psi = psi.reshape((2,) * n)
        for i, g in enumerate(c.gates):
            psi = _apply(psi, g.unitary, g.qubits)
            if i in hits:
                psi = _apply(psi, _PAULI4[int(rng.integers(16))], g.qubits)
        acc += np.abs(psi.reshape(-1)) ** 2
    return p_clean * clean + (1 - p_clean) * acc / trajectories


def simulate_counts(c: Circuit, shots: int, noise: BenchNoiseModel | None = None, seed: int = 0,
                    trajectories: int = 64) -> dict:
    """Seeded samples from the (noisy) output distribution."""
    if shots < 1:
        raise ValidationError("shots must be positive")
    rng = np.random.default_rng(seed)
    probs = output_distribution(c, noise, rng, trajectories)
    probs = np.clip(probs, 0, None)
    counts = rng.multinomial(int(shots), probs / probs.sum())
    n = c.num_qubits
    return {bitstring(i, n): int(k) for i, k in enumerate(counts) if k}


# -- block collection --------------------------------------------------------------


@dataclass
class TwoQubitBlock:
    """Maximal run of gates on one pair; ``unitary`` acts on ``pair`` in order."""

    pair: tuple
    unitary: np.ndarray
    span: tuple

    def to_json(self) -> dict:
        return {"pair": list(self.pair), "span": list(self.span)}


def _embed_on_pair(g: Gate, pair: tuple) -> np.ndarray:
    if len(g.qubits) == 1:
        return kron(g.unitary, I2) if g.qubits[0] == pair[0] else kron(I2, g.unitary)
    if g.qubits == pair:
        return g.unitary
    return SWAP @ g.unitary @ SWAP


def collect_blocks(c: Circuit) -> list:
    """Split the circuit into two-qubit blocks and leftover single-qubit gates.

    A block on ``(a, b)`` stays open until a two-qubit gate touches ``a`` or
    ``b`` on another pair. Single-qubit gates join the open block on their
    wire, or the next block opened on it. Gates on wires that never meet a
    two-qubit gate are returned as residual :class:`Gate` items.

    Returns:
        Items in an order whose product reproduces the circuit.
    """
    items: list = []
    open_blocks: dict = {}  # pair -> list of gate indices
    wire: dict = {}  # qubit -> its open pair
    pending: dict = {}  # qubit -> single-qubit gate indices not yet in a block

    def close(pair):
        idx = open_blocks.pop(pair)
        for q in pair:
            wire.pop(q, None)
        u = np.eye(4, dtype=complex)
        for i in idx:
            u = _embed_on_pair(c.gates[i], pair) @ u
        items.append(TwoQubitBlock(pair, u, tuple(idx)))

    for i, g in enumerate(c.gates):
        if len(g.qubits) == 1:
            q = g.qubits[0]
            if q in wire:
                open_blocks[wire[q]].append(i)
            else:
                pending.setdefault(q, []).append(i)
            continue
        a, b = g.qubits
        pa, pb = wire.get(a), wire.get(b)
        if pa is not None and pa == pb:
            open_blocks[pa].append(i)
            continue
        for p in {pa, pb} - {None}:
            close(p)
        pair = (a, b)
        open_blocks[pair] = sorted(pending.pop(a, []) + pending.pop(b, [])) + [i]
        wire[a] = wire[b] = pair
    for pair in list(open_blocks):
        close(pair)
    for q in sorted(pending):
        items.extend(c.gates[i] for i in pending[q])
    return items


def blocks_unitary(c: Circuit, items: Sequence) -> np.ndarray:
    """Product of collected items; equals :func:`circuit_unitary` of ``c``."""
    out = Circuit(c.num_qubits)
    for it in items:
        if isinstance(it, Gate):
            out.add(it)
        else:
            out.append("unitary4", it.pair, matrix=it.unitary)
    return circuit_unitary(out)


# -- compilation ---------------------------------------------------------------------


@dataclass
class CompiledCircuit:
    circuit: Circuit
    total_two_qubit_duration: float
    block_reports: list
    mode: str

    def to_json(self) -> dict:
        return {"mode": self.mode, "total_two_qubit_duration": self.total_two_qubit_duration,
                "num_pulses": sum(1 for g in self.circuit.gates if g.name == "pulse_ref"),
                "num_one_qubit_gates": sum(1 for g in self.circuit.gates if len(g.qubits) == 1),
                "block_reports": self.block_reports, "circuit": self.circuit.to_json()}


class GateSetTable:
    """Resolves a qubit pair to a gate set and its coverage set for one mode.

    Args:
        gatesets: Map from pair to a :class:`GateSet` or a
            ``(GateSet, CoverageSet)`` tuple. Either orientation of a pair
            matches.
        mode: ``"extended"`` uses every pulse; ``"spe_only"`` keeps only the
            cheapest CX-class gate.
    """

    MODES = ("extended", "spe_only")

    def __init__(self, gatesets: Mapping, mode: str = "extended"):
        if mode not in self.MODES:
            raise ValidationError(f"mode must be one of {self.MODES}, got {mode!r}")
        self.mode = mode
        self._raw = {tuple(int(q) for q in k): v for k, v in gatesets.items()}
        self._cache: dict = {}

    def resolve(self, pair: tuple) -> tuple[GateSet, CoverageSet, bool]:
        """``(gateset, coverage, flipped)``; ``flipped`` means the block runs on ``pair`` reversed."""
        for key, flipped in ((pair, False), (pair[::-1], True)):
            if key in self._raw:
                break
        else:
            raise MissingGateSet(f"no gate set for qubit pair {pair}")
        if key not in self._cache:
            entry = self._raw[key]
            if isinstance(entry, _SharedEntry) and self.mode == "spe_only":
                gs, cov = entry.spe
            else:
                gs, cov = (entry, None) if isinstance(entry, GateSet) else entry
                if self.mode == "spe_only":
                    gs, cov = gs.spe_only(), None
            self._cache[key] = (gs, cov if cov is not None else build_coverage_set(gs))
        gs, cov = self._cache[key]
        if tuple(gs.pair) != key:
            raise ValidationError(f"gate set registered for {key} declares pair {gs.pair}")
        return gs, cov, flipped


def replicate_gateset(gateset: GateSet, pairs: Iterable, coverage: CoverageSet | None = None) -> dict:
    """Same pulses on every pair, sharing one coverage set per mode."""
    cov = coverage or build_coverage_set(gateset)
    spe_gs = gateset.spe_only()
    spe_cov = build_coverage_set(spe_gs)
    out = {}
    for p in pairs:
        p = tuple(int(q) for q in p)
        gs = GateSet(p, gateset.gates, gateset.one_qubit_layer_duration)
        out[p] = _SharedEntry(gs, CoverageSet(p, cov.entries, cov.labels),
                              GateSet(p, spe_gs.gates, spe_gs.one_qubit_layer_duration),
                              CoverageSet(p, spe_cov.entries, spe_cov.labels))
    return out


class _SharedEntry(tuple):
    """``(gateset, coverage)`` that also carries a prebuilt baseline pair."""

    def __new__(cls, gs, cov, spe_gs, spe_cov):
        obj = super().__new__(cls, (gs, cov))
        obj.spe = (spe_gs, spe_cov)
        return obj


class _Emitter:
    """Collects output gates, merging consecutive single-qubit unitaries per wire."""

    def __init__(self, n: int):
        self.circuit = Circuit(n)
        self.pending: dict = {}

    def local(self, q: int, u: np.ndarray):
        self.pending[q] = u @ self.pending.get(q, I2)

    def flush(self, q: int):
        u = self.pending.pop(q, None)
        if u is None:
            return
        alpha, beta, gamma, _ = zyz_angles(u)
        for name, angle in (("rz", gamma), ("ry", beta), ("rz", alpha)):
            a = float(np.angle(np.exp(1j * angle)))  # rz/ry are 4 pi periodic; the sign is a global phase
            if abs(a) > 1e-12:
                self.circuit.append(name, (q,), a)

    def pulse(self, gate: PulseGate, pair: tuple):
        for q in pair:
            self.flush(q)
        self.circuit.append("pulse_ref", pair, gate.duration, matrix=gate.unitary, label=gate.label)

    def finish(self) -> Circuit:
        for q in sorted(self.pending):
            self.flush(q)
        return self.circuit


def compile_circuit(c: Circuit, gatesets: Mapping | GateSetTable, mode: str = "extended",
                    config: OptimizerConfig | None = None) -> CompiledCircuit:
    """Rewrite every two-qubit block as characterized pulses plus rotations.

    Output gates are ``rz``, ``ry`` and ``pulse_ref``. Adjacent single-qubit
    unitaries on a wire are merged into one ZYZ triple, across block
    boundaries as well.

    Raises:
        MissingGateSet: a block's pair has no gate set.
        SynthesisError: propagated from block synthesis.
    """
    if isinstance(gatesets, GateSetTable):
        table = gatesets
    else:
        table = GateSetTable(gatesets, mode)
    emit = _Emitter(c.num_qubits)
    reports = []
    total = 0.0
    for item in collect_blocks(c):
        if isinstance(item, Gate):
            emit.local(item.qubits[0], item.unitary)
            continue
        gs, cov, flipped = table.resolve(item.pair)
        target = SWAP @ item.unitary @ SWAP if flipped else item.unitary
        result = synthesize_block(target, cov, gs, config)
        p = gs.pair
        for op in result.operations():
            if op[0] == "local":
                emit.local(p[0], op[1])
                emit.local(p[1], op[2])
            else:
                g = gs.gates[op[1]]
                emit.pulse(g, p)
                total += g.duration
        report = result.summary(gs)
        report["pair"] = list(p)
        report["span"] = list(item.span)
        reports.append(report)
    return CompiledCircuit(emit.finish(), float(total), reports, table.mode)


def equivalent(a: Circuit, b: Circuit) -> float:
    """Process infidelity between two circuits on at most six qubits."""
    from .linalg import process_infidelity

    return process_infidelity(circuit_unitary(a), circuit_unitary(b))


# -- generators -----------------------------------------------------------------------


def random_circuit(n: int, depth: int, rng: np.random.Generator, two_qubit_fraction: float = 0.5) -> Circuit:
    """Random circuit over the named gate library, for testing."""
    one = ["x", "sx", "h", "s", "rz", "ry", "rx"]
    two = ["cx", "cz", "cp", "rzz", "ecr", "unitary4"]
    c = Circuit(n)
    for _ in range(depth):
        if n >= 2 and rng.random() < two_qubit_fraction:
            name = two[int(rng.integers(len(two)))]
            a, b = (int(q) for q in rng.choice(n, size=2, replace=False))
            if name == "unitary4":
                from .linalg import haar_unitary

                c.append(name, (a, b), matrix=haar_unitary(4, rng))
            elif name in ("cp", "rzz"):
                c.append(name, (a, b), float(rng.uniform(-np.pi, np.pi)))
            else:
                c.append(name, (a, b))
        else:
            name = one[int(rng.integers(len(one)))]
            q = int(rng.integers(n))
            if name in ("rz", "ry", "rx"):
                c.append(name, (q,), float(rng.uniform(-np.pi, np.pi)))
            else:
                c.append(name, (q,))
    return c


def _check_bits(target: str, n: int):
    if len(target) != n or any(ch not in "01" for ch in target):
        raise BadBitstring(f"expected a {n}-character bitstring of 0/1, got {target!r}")


def qft_circuit(n: int, target_bitstring: str) -> Circuit:
    """Product-state preparation followed by the inverse QFT.

    Qubit ``j`` is prepared as ``(|0> + exp(2 pi i 0.x_j x_{j+1}...x_{n-1}) |1>) / sqrt 2``,
    the state the QFT (without final swaps) maps the target to. The inverse
    transform then returns the target exactly; the swap network is absorbed
    into this qubit ordering.

    Raises:
        BadBitstring: wrong length or characters.
        ValidationError: ``n`` outside ``[2, 20]``.
    """
    if not 2 <= n <= MAX_STATEVECTOR_QUBITS:
        raise ValidationError(f"qft width must lie in [2, {MAX_STATEVECTOR_QUBITS}], got {n}")
    _check_bits(target_bitstring, n)
    bits = [int(ch) for ch in target_bitstring]
    c = Circuit(n)
    for j in range(n):
        frac = sum(bits[m] / 2 ** (m - j + 1) for m in range(j, n))
        c.append("h", (j,))
        c.append("rz", (j,), 2 * np.pi * frac)
    for j in range(n - 1, -1, -1):
        for k in range(n - 1, j, -1):
            c.append("cp", (k, j), -np.pi / 2 ** (k - j))
        c.append("h", (j,))
    return c


def trotter_tfim_circuit(n_qubits: int, steps: int, J: float = 1.0, h: float = 1.0,
                         dt: float = np.pi / 15) -> Circuit:
    """Second-order Trotter circuit for ``H = -J sum Z_i Z_{i+1} + h sum X_i`` on a line.

    Each step is a half-step X-field layer, ZZ rotations on even then odd
    bonds, and another half-step X layer. The initial state is ``|0...0>``, so
    zero steps gives an empty circuit.
    """
    if steps < 0:
        raise ValidationError("steps must be non-negative")
    if n_qubits < 2:
        raise ValidationError("a chain needs at least two qubits")
    c = Circuit(n_qubits)
    bonds = [(i, i + 1) for i in range(0, n_qubits - 1, 2)] + [(i, i + 1) for i in range(1, n_qubits - 1, 2)]
    for _ in range(steps):
        for q in range(n_qubits):
            c.append("rx", (q,), h * dt)
        for a, b in bonds:
            c.append("rzz", (a, b), -2 * J * dt)
        for q in range(n_qubits):
            c.append("rx", (q,), h * dt)
    return c


def _single_site(op: np.ndarray, q: int, n: int) -> np.ndarray:
    out = np.array([[1.0 + 0j]])
    for k in range(n):
        out = np.kron(out, op if k == q else I2)
    return out


def exact_trotter_magnetization(n_qubits: int, steps: int, J: float = 1.0, h: float = 1.0,
                                dt: float = np.pi / 15) -> dict:
    """Average ``<Y>`` and ``<Z>`` after each step, from dense matrix exponentials."""
    hz = sum(_single_site(Z, i, n_qubits) @ _single_site(Z, i + 1, n_qubits) for i in range(n_qubits - 1))
    hx = sum(_single_site(X, i, n_qubits) for i in range(n_qubits))
    step = expm(-0.5j * dt * h * hx) @ expm(1j * dt * J * hz) @ expm(-0.5j * dt * h * hx)
    psi = np.zeros(2**n_qubits, dtype=complex)
    psi[0] = 1
    ys = [_single_site(Y, i, n_qubits) for i in range(n_qubits)]
    zs = [_single_site(Z, i, n_qubits) for i in range(n_qubits)]
    out = {"Y": [], "Z": []}
    for s in range(steps + 1):
        out["Y"].append(float(np.mean([np.real(psi.conj() @ o @ psi) for o in ys])))
        out["Z"].append(float(np.mean([np.real(psi.conj() @ o @ psi) for o in zs])))
        psi = step @ psi
    return out


def with_measurement_basis(c: Circuit, axis: str) -> Circuit:
    """Copy of ``c`` with the basis change that maps ``axis`` onto Z readout."""
    if axis not in ("Y", "Z"):
        raise ValidationError(f"axis must be 'Y' or 'Z', got {axis!r}")
    out = Circuit(c.num_qubits, list(c.gates))
    if axis == "Y":
        for q in range(c.num_qubits):
            out.append("rz", (q,), -np.pi / 2)
            out.append("h", (q,))
    return out


def magnetization(data, axis: str = "Z", num_qubits: int | None = None) -> float:
    """Mean single-qubit expectation over all qubits.

    Args:
        data: Counts (bitstring to count, already measured in the right basis)
            or a statevector.
        axis: ``"Z"`` or ``"Y"``. For counts the axis only documents which
            basis-change layer was applied; for a statevector it is applied here.
    """
    if axis not in ("Y", "Z"):
        raise ValidationError(f"axis must be 'Y' or 'Z', got {axis!r}")
    if isinstance(data, Mapping):
        total = sum(data.values())
        if total <= 0:
            raise ValidationError("empty counts")
        n = len(next(iter(data)))
        acc = 0.0
        for bits, k in data.items():
            acc += k * sum(1 - 2 * int(b) for b in bits) / n
        return float(acc / total)
    psi = np.asarray(data, dtype=complex).reshape(-1)
    n = num_qubits or int(round(np.log2(psi.size)))
    psi = psi.reshape((2,) * n)
    op = Y if axis == "Y" else Z
    vals = []
    for q in range(n):
        phi = _apply(psi, op, (q,))
        vals.append(np.real(np.vdot(psi, phi)))
    return float(np.mean(vals))
