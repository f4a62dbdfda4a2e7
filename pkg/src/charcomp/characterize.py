"""Controlled-pulse model, cross-resonance mapping and simulated characterization.

A controlled pulse is block diagonal in the control qubit,

    U = diag(exp(-i phi) exp(-i u . sigma), exp(i phi) exp(-i v . sigma)),

so it is fixed by two Bloch vectors and one phase. Characterization runs three
small fits:

1. ``u`` from single-qubit tomography of the target with the control in ``|0>``,
   repeated for several pulse iteration counts;
2. ``v`` likewise with the control in ``|1>``;
3. ``phi`` from a phase-kickback experiment: control in ``|+>``, target in an
   eigenstate of ``U1^dag U0`` built from the fitted blocks, ``U0`` undone on
   the target after every pulse, control read out in X and Y.

The simulation is exact on density matrices with two-qubit depolarizing
noise after every pulse, followed by seeded multinomial sampling.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import networkx as nx
import numpy as np
from scipy.optimize import least_squares
from scipy.spatial.transform import Rotation

from .coverage import PulseGate, make_pulse_gate
from .errors import AmbiguousFit, InsufficientData, ValidationError
from .linalg import (
    I2,
    X,
    Y,
    Z,
    bloch_rotation,
    dagger,
    herm_exp,
    kron,
    su2_to_vector,
    vector_to_su2,
)
from .weyl import cartan_decompose

log = logging.getLogger(__name__)

_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_S = np.diag([1, 1j])
# label -> preparation unitary; the prepared state is R|0> and measuring in
# basis R means reading the observable R Z R^dag
BASIS = {"I": I2, "H": _H, "SH": _S @ _H, "X": X}
_AXIS = {"I": 2, "H": 0, "SH": 1}
TOMO_LABELS = ("I", "H", "SH")


@dataclass(frozen=True)
class ControlledPulseModel:
    """``diag(exp(-i phi) exp(-i u.sigma), exp(i phi) exp(-i v.sigma))``."""

    u: tuple
    v: tuple
    phi: float

    def __post_init__(self):
        object.__setattr__(self, "u", tuple(float(x) for x in self.u))
        object.__setattr__(self, "v", tuple(float(x) for x in self.v))
        object.__setattr__(self, "phi", float(self.phi))
        if len(self.u) != 3 or len(self.v) != 3:
            raise ValidationError("u and v must be 3-vectors")

    def to_json(self) -> dict:
        return {"u": list(self.u), "v": list(self.v), "phi": self.phi}

    @classmethod
    def from_json(cls, data: dict) -> "ControlledPulseModel":
        return cls(tuple(data["u"]), tuple(data["v"]), float(data["phi"]))


def controlled_unitary(m: ControlledPulseModel) -> np.ndarray:
    """Block-diagonal unitary of the model."""
    out = np.zeros((4, 4), dtype=complex)
    out[:2, :2] = np.exp(-1j * m.phi) * vector_to_su2(m.u)
    out[2:, 2:] = np.exp(1j * m.phi) * vector_to_su2(m.v)
    return out


def controlled_c1(m: ControlledPulseModel) -> float:
    """Chamber coordinate ``c1`` of a controlled pulse (its ``c2 = c3 = 0``).

    The two blocks are rotations by ``2|u|`` and ``2|v|``; ``c1`` is the angle
    of the relative rotation ``U0^dag U1``, from the spherical law of cosines:
    ``cos c1 = cos|u| cos|v| + (u_hat . v_hat) sin|u| sin|v|``.
    """
    u = np.asarray(m.u, dtype=float)
    v = np.asarray(m.v, dtype=float)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu < 1e-300 or nv < 1e-300:
        dot = 0.0
    else:
        dot = float(u @ v) / (nu * nv)
    c = np.cos(nu) * np.cos(nv) + dot * np.sin(nu) * np.sin(nv)
    c1 = float(np.arccos(np.clip(c, -1.0, 1.0)))
    return min(c1, np.pi - c1)


@dataclass(frozen=True)
class CrCoefficients:
    """Cross-resonance Hamiltonian coefficients for unit evolution time."""

    zx: float = 0.0
    zy: float = 0.0
    zz: float = 0.0
    ix: float = 0.0
    iy: float = 0.0
    iz: float = 0.0
    zi: float = 0.0

    def to_json(self) -> dict:
        return asdict(self)


def cr_hamiltonian(nu: CrCoefficients) -> np.ndarray:
    """``H = 1/2 (nu_zx ZX + nu_zy ZY + nu_zz ZZ + nu_ix IX + nu_iy IY + nu_iz IZ + nu_zi ZI)``."""
    terms = ((nu.zx, Z, X), (nu.zy, Z, Y), (nu.zz, Z, Z), (nu.ix, I2, X), (nu.iy, I2, Y), (nu.iz, I2, Z),
             (nu.zi, Z, I2))
    return 0.5 * sum(c * kron(a, b) for c, a, b in terms)


def cr_to_model(nu: CrCoefficients) -> ControlledPulseModel:
    """Model with ``controlled_unitary(model) = exp(-i H_cr)``.

    With control in ``|0>`` the target feels ``(nu_i + nu_z) . sigma / 2``;
    with control in ``|1>`` it feels ``(nu_i - nu_z) . sigma / 2``. The ZI term
    gives ``phi = nu_zi / 2``.
    """
    z = np.array([nu.zx, nu.zy, nu.zz])
    i = np.array([nu.ix, nu.iy, nu.iz])
    return ControlledPulseModel(tuple(0.5 * (z + i)), tuple(0.5 * (i - z)), 0.5 * nu.zi)


def model_to_cr(m: ControlledPulseModel) -> CrCoefficients:
    """Cross-resonance coefficients reproducing ``m``; inverse of :func:`cr_to_model`."""
    u, v = np.asarray(m.u), np.asarray(m.v)
    z, i = u - v, u + v
    return CrCoefficients(*(float(x) for x in (*z, *i, 2 * m.phi)))


def random_controlled_model(rng: np.random.Generator) -> ControlledPulseModel:
    """Model with Haar-random SU(2) blocks and a uniform phase."""
    from .linalg import haar_su

    u = su2_to_vector(haar_su(2, rng))
    v = su2_to_vector(haar_su(2, rng))
    return ControlledPulseModel(tuple(u), tuple(v), float(rng.uniform(-np.pi / 2, np.pi / 2)))


# -- simulated experiments -------------------------------------------------------


@dataclass(frozen=True)
class TomographyConfig:
    """Experiment settings.

    Attributes:
        iteration_set: Pulse repetition counts, strictly increasing.
        shots: Samples per circuit.
        seed: Seed for sampling; record ``i`` uses ``default_rng([seed, i])``.
        exact: Fit exact probabilities instead of sampled counts.
        residual_ceiling: Largest acceptable RMS residual of the block fits.
    """

    iteration_set: tuple = (1, 2, 4, 8)
    shots: int = 128
    seed: int = 0
    exact: bool = False
    residual_ceiling: float = 0.35

    def __post_init__(self):
        its = tuple(int(n) for n in self.iteration_set)
        object.__setattr__(self, "iteration_set", its)
        if not its or any(n < 1 for n in its) or any(b <= a for a, b in zip(its, its[1:])):
            raise ValidationError(f"iteration_set must be non-empty, positive and increasing, got {its}")
        if int(self.shots) < 1:
            raise ValidationError("shots must be positive")

    def to_json(self) -> dict:
        d = asdict(self)
        d["iteration_set"] = list(self.iteration_set)
        return d

    @classmethod
    def from_json(cls, data: dict) -> "TomographyConfig":
        return cls(**data)


@dataclass(frozen=True)
class NoiseSpec:
    depolarizing_per_pulse: float = 1e-2

    def __post_init__(self):
        if not 0.0 <= self.depolarizing_per_pulse <= 1.0:
            raise ValidationError("depolarizing probability must lie in [0, 1]")

    def to_json(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class MeasurementRecord:
    """One circuit of the characterization experiment.

    Attributes:
        kind: ``"block"`` or ``"phase"``.
        prep_basis: ``(control, target)`` preparation labels. ``"X"`` prepares
            ``|1>`` and ``"psi"`` the phase-experiment eigenstate.
        meas_basis: ``(control, target)`` measurement labels.
        iterations: Number of pulse applications.
        counts: Bitstring (control bit first) to count.
        probabilities: Exact outcome probabilities.
        reference: For phase records, the block vectors used to build the
            eigenstate and the undo gate.
    """

    kind: str
    prep_basis: tuple
    meas_basis: tuple
    iterations: int
    counts: dict
    probabilities: dict
    reference: dict | None = None

    def expectation(self, exact: bool = False) -> float:
        """``<Z>`` of the measured qubit after the basis change."""
        bit = 1 if self.kind == "block" else 0
        if exact:
            p = self.probabilities
            return float(sum(v * (1 - 2 * int(k[bit])) for k, v in p.items()))
        total = sum(self.counts.values())
        return float(sum(v * (1 - 2 * int(k[bit])) for k, v in self.counts.items()) / total)

    def to_json(self) -> dict:
        return {"kind": self.kind, "prep_basis": list(self.prep_basis), "meas_basis": list(self.meas_basis),
                "iterations": self.iterations, "counts": self.counts, "probabilities": self.probabilities,
                "reference": self.reference}


_OUTCOMES = ("00", "01", "10", "11")


def _evolve(rho: np.ndarray, pulse: np.ndarray, n: int, p: float, after: np.ndarray | None = None) -> np.ndarray:
    ident = np.eye(4) / 4
    for _ in range(n):
        rho = pulse @ rho @ dagger(pulse)
        rho = (1 - p) * rho + p * ident
        if after is not None:
            rho = after @ rho @ dagger(after)
    return rho


def _measure(rho: np.ndarray, meas: tuple, shots: int, rng: np.random.Generator) -> tuple[dict, dict]:
    g = dagger(kron(BASIS[meas[0]], BASIS[meas[1]]))
    probs = np.clip(np.real(np.diag(g @ rho @ dagger(g))), 0.0, None)
    probs = probs / probs.sum()
    counts = rng.multinomial(shots, probs)
    return ({k: int(c) for k, c in zip(_OUTCOMES, counts)},
            {k: float(q) for k, q in zip(_OUTCOMES, probs)})


def _product_state(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    psi = np.kron(a, b)
    return np.outer(psi, psi.conj())


def phase_eigenstate(u0: np.ndarray, u1: np.ndarray) -> tuple[np.ndarray, float]:
    """Eigenstate of ``u1^dag u0`` whose eigenvalue has positive imaginary part.

    Returns:
        ``(psi, lam)`` with ``u1^dag u0 psi = exp(i lam) psi``. Ties (real
        eigenvalues) resolve to the first eigenvector; the first nonzero
        component is made real-positive.
    """
    w, vecs = np.linalg.eig(dagger(u1) @ u0)
    if abs(w[0].imag) < 1e-12 and abs(w[1].imag) < 1e-12 and abs(w[0] - w[1]) < 1e-9:
        psi = np.array([1.0, 0.0], dtype=complex)
        return psi, float(np.angle(w[0]))
    idx = int(np.argmax(w.imag))
    psi = vecs[:, idx] / np.linalg.norm(vecs[:, idx])
    lead = psi[0] if abs(psi[0]) > 1e-12 else psi[1]
    psi = psi * np.conj(lead) / abs(lead)
    return psi, float(np.angle(w[idx]))


def simulate_block_records(truth: ControlledPulseModel, config: TomographyConfig,
                           noise: NoiseSpec) -> list[MeasurementRecord]:
    pulse = controlled_unitary(truth)
    zero = np.array([1, 0], dtype=complex)
    records = []
    idx = 0
    for ctrl in ("I", "X"):
        for prep, meas, n in itertools.product(TOMO_LABELS, TOMO_LABELS, config.iteration_set):
            rho = _product_state(BASIS[ctrl] @ zero, BASIS[prep] @ zero)
            rho = _evolve(rho, pulse, n, noise.depolarizing_per_pulse)
            counts, probs = _measure(rho, ("I", meas), config.shots, np.random.default_rng([config.seed, idx]))
            records.append(MeasurementRecord("block", (ctrl, prep), ("I", meas), n, counts, probs))
            idx += 1
    return records


def simulate_phase_records(truth: ControlledPulseModel, config: TomographyConfig, noise: NoiseSpec,
                           u_ref: Sequence[float], v_ref: Sequence[float], offset: int = 0) -> list[MeasurementRecord]:
    pulse = controlled_unitary(truth)
    u0, u1 = vector_to_su2(u_ref), vector_to_su2(v_ref)
    psi, _ = phase_eigenstate(u0, u1)
    undo = kron(I2, dagger(u0))
    plus = np.array([1, 1], dtype=complex) / np.sqrt(2)
    ref = {"u": [float(x) for x in u_ref], "v": [float(x) for x in v_ref]}
    records = []
    for j, (meas, n) in enumerate(itertools.product(("H", "SH"), config.iteration_set)):
        rho = _product_state(plus, psi)
        rho = _evolve(rho, pulse, n, noise.depolarizing_per_pulse, after=undo)
        counts, probs = _measure(rho, (meas, "I"), config.shots, np.random.default_rng([config.seed, offset + j]))
        records.append(MeasurementRecord("phase", ("H", "psi"), (meas, "I"), n, counts, probs, ref))
    return records


def simulate_tomography(truth: ControlledPulseModel, config: TomographyConfig | None = None,
                        noise: NoiseSpec | None = None) -> list[MeasurementRecord]:
    """Simulate the full experiment.

    Block records come first. They are fitted on the spot to obtain the
    reference blocks the phase experiment needs, exactly as an experimenter
    would; the references are stored on the phase records.
    """
    config = config or TomographyConfig()
    noise = noise or NoiseSpec()
    blocks = simulate_block_records(truth, config, noise)
    u_ref, _ = _fit_block(blocks, "I", config)
    v_ref, _ = _fit_block(blocks, "X", config)
    return blocks + simulate_phase_records(truth, config, noise, u_ref, v_ref, offset=len(blocks))


# -- fitting ------------------------------------------------------------------------


def _block_data(records: Iterable[MeasurementRecord], ctrl: str, exact: bool) -> dict:
    data: dict = {}
    for r in records:
        if r.kind != "block" or r.prep_basis[0] != ctrl:
            continue
        data.setdefault(r.iterations, {})[(r.prep_basis[1], r.meas_basis[1])] = r.expectation(exact)
    return data


def _complete_counts(data: dict) -> list[int]:
    need = set(itertools.product(TOMO_LABELS, TOMO_LABELS))
    return sorted(n for n, cfg in data.items() if need <= set(cfg))


def _predict(u: np.ndarray, ns: Sequence[int]) -> dict:
    r = bloch_rotation(vector_to_su2(u))
    return {n: np.linalg.matrix_power(r, n) for n in ns}


def _residuals(u: np.ndarray, data: dict, ns: Sequence[int]) -> np.ndarray:
    pred = _predict(u, ns)
    out = []
    for n in ns:
        rn = pred[n]
        for (prep, meas), val in data[n].items():
            out.append(val - rn[_AXIS[meas], _AXIS[prep]])
    return np.array(out)


def _initial_guesses(data: dict, n0: int) -> list[np.ndarray]:
    est = np.zeros((3, 3))
    for (prep, meas), val in data[n0].items():
        est[_AXIS[meas], _AXIS[prep]] = val
    uu, _, vt = np.linalg.svd(est)
    fix = np.diag([1.0, 1.0, np.sign(np.linalg.det(uu @ vt))])
    rot = uu @ fix @ vt
    rotvec = Rotation.from_matrix(rot).as_rotvec()
    angle = float(np.linalg.norm(rotvec))
    axis = rotvec / angle if angle > 1e-12 else np.array([0.0, 0.0, 1.0])
    # n0 applications only fix the angle modulo 2 pi / n0
    return [axis * (angle + 2 * np.pi * j) / (2 * n0) for j in range(n0)]


def _fit_block(records: Iterable[MeasurementRecord], ctrl: str, config: TomographyConfig) -> tuple[np.ndarray, float]:
    data = _block_data(records, ctrl, config.exact)
    ns = _complete_counts(data)
    if len(ns) < 2:
        raise InsufficientData(f"block tomography for control {ctrl!r} covers {len(ns)} iteration count(s); need 2")
    best = None
    for guess in _initial_guesses(data, ns[0]):
        u = guess
        for k in range(1, len(ns) + 1):
            u = least_squares(_residuals, u, args=(data, ns[:k]), method="lm", xtol=1e-15, ftol=1e-15,
                              gtol=1e-15).x
        cost = float(np.sqrt(np.mean(_residuals(u, data, ns) ** 2)))
        if best is None or cost < best[1]:
            best = (u, cost)
    u, rms = best
    if rms > config.residual_ceiling:
        raise AmbiguousFit(f"block fit for control {ctrl!r} left RMS residual {rms:.3g}")
    return su2_to_vector(vector_to_su2(u)), rms


def _fit_phase(records: Iterable[MeasurementRecord], exact: bool) -> tuple[float, float, dict]:
    xs: dict = {}
    ys: dict = {}
    ref = None
    for r in records:
        if r.kind != "phase":
            continue
        ref = r.reference
        (xs if r.meas_basis[0] == "H" else ys)[r.iterations] = r.expectation(exact)
    ns = sorted(set(xs) & set(ys))
    if len(ns) < 2 or ref is None:
        raise InsufficientData("phase experiment needs X and Y readouts at two or more iteration counts")
    x = np.array([xs[n] for n in ns])
    y = np.array([ys[n] for n in ns])
    nn = np.array(ns, dtype=float)

    def resid(t):
        return np.concatenate([x - np.cos(nn * t[0]), y - np.sin(nn * t[0])])

    best = None
    base = np.arctan2(y[0], x[0])
    for j in range(ns[0]):
        theta = (base + 2 * np.pi * j) / ns[0]
        for k in range(1, len(ns)):
            # unwrap: pick the branch of n_k theta nearest the running estimate
            meas = np.arctan2(y[k], x[k])
            turns = np.round((nn[k] * theta - meas) / (2 * np.pi))
            target = (meas + 2 * np.pi * turns) / nn[k]
            theta = least_squares(lambda t: resid(t)[np.r_[0:k + 1, len(ns):len(ns) + k + 1]], [target]).x[0]
        cost = float(np.sqrt(np.mean(resid([theta]) ** 2)))
        if best is None or cost < best[1]:
            best = (theta, cost)
    return best[0], best[1], ref


@dataclass
class FitDiagnostics:
    block0_rms: float
    block1_rms: float
    phase_rms: float
    theta: float
    lam: float
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return asdict(self)


def fit_model(records: Sequence[MeasurementRecord],
              config: TomographyConfig | None = None) -> tuple[ControlledPulseModel, FitDiagnostics]:
    """Fit ``(u, v, phi)`` from simulated or recorded experiments.

    Raises:
        InsufficientData: fewer than two iteration counts, or a missing
            preparation/measurement configuration.
        AmbiguousFit: a block fit stays above ``config.residual_ceiling``.
    """
    config = config or TomographyConfig()
    u, rms0 = _fit_block(records, "I", config)
    v, rms1 = _fit_block(records, "X", config)
    theta, rms_phase, ref = _fit_phase(records, config.exact)
    u0, u1 = vector_to_su2(ref["u"]), vector_to_su2(ref["v"])
    _, lam = phase_eigenstate(u0, u1)
    # relative phase per iteration is 2 phi - lam for the reference blocks
    phi = 0.5 * (theta + lam)
    phi = (phi + np.pi / 2) % np.pi - np.pi / 2
    ref_u, ref_v = np.asarray(ref["u"]), np.asarray(ref["v"])
    # express the result in the reference blocks' sign convention when they agree
    if np.allclose(vector_to_su2(u), u0, atol=1e-6) or np.allclose(vector_to_su2(u), -u0, atol=1e-6):
        u = ref_u
    if np.allclose(vector_to_su2(v), u1, atol=1e-6) or np.allclose(vector_to_su2(v), -u1, atol=1e-6):
        v = ref_v
    model = ControlledPulseModel(tuple(u), tuple(v), float(phi))
    return model, FitDiagnostics(rms0, rms1, rms_phase, float(theta), float(lam))


@dataclass
class CharacterizationResult:
    model: ControlledPulseModel
    diagnostics: FitDiagnostics
    records: list
    gate: PulseGate


def characterize(truth: ControlledPulseModel, config: TomographyConfig | None = None,
                 noise: NoiseSpec | None = None, duration: float = 0.0, label: str = "pulse") -> CharacterizationResult:
    """Simulate, fit and wrap the fitted unitary as a :class:`PulseGate`."""
    config = config or TomographyConfig()
    records = simulate_tomography(truth, config, noise)
    model, diag = fit_model(records, config)
    gate = make_pulse_gate(label, controlled_unitary(model), duration)
    return CharacterizationResult(model, diag, records, gate)


def characterize_pulse(truth: ControlledPulseModel, config: TomographyConfig | None = None,
                       noise: NoiseSpec | None = None, duration: float = 0.0, label: str = "pulse") -> PulseGate:
    """The fitted pulse itself, coherent errors included, as a gate-set entry."""
    return characterize(truth, config, noise, duration, label).gate


def kak_c1(m: ControlledPulseModel) -> float:
    return cartan_decompose(controlled_unitary(m)).coords.c1


# -- parallel scheduling ------------------------------------------------------------


def _misra_gries(edges: list[tuple]) -> dict:
    """Proper edge colouring with at most max-degree + 1 colours."""
    adj: dict = {}
    for a, b in edges:
        adj.setdefault(a, set()).add(b)
        adj.setdefault(b, set()).add(a)
    if not edges:
        return {}
    ncol = max(len(s) for s in adj.values()) + 1
    color: dict = {}

    def col(a, b):
        return color.get(frozenset((a, b)))

    def free(x):
        used = {col(x, y) for y in adj[x]}
        return [c for c in range(ncol) if c not in used]

    for u, v in edges:
        fan = [v]
        while True:
            last = fan[-1]
            nxt = None
            for w in adj[u]:
                c = col(u, w)
                if w not in fan and c is not None and c in free(last):
                    nxt = w
                    break
            if nxt is None:
                break
            fan.append(nxt)
        c = free(u)[0]
        d = free(fan[-1])[0]
        # invert the c/d path starting at u
        if d not in free(u):
            path = []
            x, want = u, d
            prev = None
            while True:
                step = next((y for y in adj[x] if y != prev and col(x, y) == want), None)
                if step is None:
                    break
                path.append((x, step))
                prev, x = x, step
                want = c if want == d else d
            for a, b in path:
                color[frozenset((a, b))] = c if color[frozenset((a, b))] == d else d
        # longest prefix of the fan that is still a fan and ends where d is free
        for i, w in enumerate(fan):
            if i > 0 and col(u, fan[i]) not in free(fan[i - 1]):
                break
            if d in free(w):
                for j in range(i):
                    color[frozenset((u, fan[j]))] = col(u, fan[j + 1])
                color[frozenset((u, w))] = d
                break
    return color


def _valid_coloring(edges, color) -> bool:
    seen: dict = {}
    for a, b in edges:
        c = color.get(frozenset((a, b)))
        if c is None:
            return False
        for x in (a, b):
            if (x, c) in seen:
                return False
            seen[(x, c)] = True
    return True


def batch_schedule(pairs: Sequence[Sequence[int]]) -> list[list[tuple]]:
    """Group qubit pairs into batches with no shared qubit inside a batch.

    Uses the Misra-Gries edge colouring, which needs at most max-degree + 1
    batches, and keeps a greedy line-graph colouring when that is smaller.
    """
    edges = []
    for p in pairs:
        a, b = int(p[0]), int(p[1])
        if a == b:
            raise ValidationError(f"pair {p} repeats a qubit")
        if frozenset((a, b)) not in {frozenset(e) for e in edges}:
            edges.append((a, b))
    if not edges:
        return []
    options = []
    mg = _misra_gries(edges)
    if _valid_coloring(edges, mg):
        options.append(mg)
    line = nx.line_graph(nx.Graph(edges))
    for strategy in ("largest_first", "smallest_last", "DSATUR"):
        greedy = nx.greedy_color(line, strategy=strategy)
        options.append({frozenset(e): c for e, c in greedy.items()})
    best = min(options, key=lambda m: len(set(m.values())))
    by_color: dict = {}
    for e in edges:
        by_color.setdefault(best[frozenset(e)], []).append(e)
    return [by_color[c] for c in sorted(by_color)]
