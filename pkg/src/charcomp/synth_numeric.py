"""Numerical synthesis of two-qubit blocks from characterized pulses.

A pulse sequence ``P_k1 (u1 x u2) P_k2 (u3 x u4) P_k3`` is tuned until its
Makhlin invariants match the target's. The matching outer layers then come
from Cartan-decomposing both the target and the tuned sequence. Every inner
single-qubit gate is parametrized as ``Z(alpha) Y(beta) Z(gamma)``.

The loss is a low-degree polynomial in the matrix entries. Its gradient is
chained analytically through the Euler angles and handed to scipy's BFGS.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import TYPE_CHECKING, NamedTuple, Sequence

import numpy as np
from scipy.optimize import minimize

from .errors import (
    ConvergenceFailure,
    FrameMismatch,
    Infeasible,
    NotLocallyEquivalent,
    ShapeMismatch,
    SynthesisExhausted,
    ValidationError,
)
from .linalg import Y, Z, check_unitary, dagger, kron, phase_aligned_diff, su_normalize, zyz, ry
from .weyl import (
    Q,
    Q_DAG,
    CartanFactors,
    cartan_decompose,
    invariant_distance,
    makhlin_invariants,
    mirror_factors,
)

if TYPE_CHECKING:
    from .coverage import CoverageSet, GateSet

log = logging.getLogger(__name__)

AnsatzKey = tuple


@dataclass(frozen=True)
class OptimizerConfig:
    """Settings for the multi-start invariant matcher.

    Attributes:
        max_steps: BFGS iteration cap per start.
        n_starts: Number of starts tried before giving up.
        threshold: Success threshold on the squared invariant distance.
        seed: Root seed; start ``s`` draws from ``default_rng([seed, s])``.
    """

    max_steps: int = 100
    n_starts: int = 5
    threshold: float = 1e-10
    seed: int = 0

    def __post_init__(self):
        if self.max_steps < 1 or self.n_starts < 1:
            raise ValidationError("max_steps and n_starts must be positive")
        if not self.threshold > 0:
            raise ValidationError("threshold must be positive")

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, data: dict) -> "OptimizerConfig":
        unknown = set(data) - {"max_steps", "n_starts", "threshold", "seed"}
        if unknown:
            raise ValidationError(f"unknown optimizer config keys: {sorted(unknown)}")
        return cls(**data)


def make_key(indices: Sequence[int], gateset: "GateSet") -> AnsatzKey:
    """Canonical key order: descending duration, ties by ascending index."""
    return tuple(sorted(indices, key=lambda i: (-gateset.gates[i].duration, i)))


def inner_count(n_pulses: int) -> int:
    return 2 * max(n_pulses - 1, 0)


def _check_inner(n_pulses: int, inner) -> np.ndarray:
    arr = np.asarray(inner, dtype=float).reshape(-1, 3) if np.size(inner) else np.zeros((0, 3))
    if arr.shape != (inner_count(n_pulses), 3):
        raise ShapeMismatch(f"{n_pulses} pulses need {inner_count(n_pulses)} inner unitaries, got {arr.shape[0]}")
    return arr


def inner_layers(inner: np.ndarray) -> list[np.ndarray]:
    inner = np.asarray(inner, dtype=float).reshape(-1, 3)
    return [kron(zyz(*inner[2 * j]), zyz(*inner[2 * j + 1])) for j in range(len(inner) // 2)]


def sequence_unitary(pulses: Sequence[np.ndarray], inner) -> np.ndarray:
    """``P0 L1 P1 L2 P2`` for the given pulses and inner angles."""
    inner = _check_inner(len(pulses), inner)
    out = np.asarray(pulses[0], dtype=complex)
    for layer, p in zip(inner_layers(inner), pulses[1:]):
        out = out @ layer @ p
    return out


def build_ansatz_unitary(key: AnsatzKey, gateset: "GateSet", inner) -> np.ndarray:
    """Pulse sequence for ``key`` with the given inner local angles.

    Raises:
        ShapeMismatch: inner angle count does not match the key length.
    """
    if not 1 <= len(key) <= 3:
        raise ShapeMismatch(f"ansatz keys have 1 to 3 entries, got {len(key)}")
    return sequence_unitary([gateset.gates[k].unitary for k in key], inner)


def invariant_loss(v: np.ndarray, target: np.ndarray) -> float:
    """Squared invariant distance ``|dg1|^2 + dg2^2`` (``g1`` up to sign)."""
    return invariant_distance(makhlin_invariants(v), makhlin_invariants(target)) ** 2


# -- loss with analytic gradient ----------------------------------------------


def _zyz_with_derivs(a: float, b: float, c: float):
    u = zyz(a, b, c)
    da = -0.5j * Z @ u
    dc = u @ (-0.5j * Z)
    za = np.diag([np.exp(-0.5j * a), np.exp(0.5j * a)])
    zc = np.diag([np.exp(-0.5j * c), np.exp(0.5j * c)])
    db = za @ (-0.5j * Y @ ry(b)) @ zc
    return u, (da, db, dc)


class InvariantLoss:
    """Loss ``min_s |g1(V) - s g1(T)|^2 + (g2(V) - g2(T))^2`` and its gradient.

    ``V`` is the sequence unitary for a flat vector of ``6 (n - 1)`` angles.
    """

    def __init__(self, pulses: Sequence[np.ndarray], target: np.ndarray):
        self.pulses = [su_normalize(p) for p in pulses]
        t = makhlin_invariants(target)
        self.t1, self.t2 = t.g1, t.g2
        self.n_params = 3 * inner_count(len(pulses))

    def __call__(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        pulses = self.pulses
        k = len(pulses)
        x = np.asarray(x, dtype=float).reshape(k - 1, 2, 3)
        layers, dlayers = [], []
        for j in range(k - 1):
            u0, d0 = _zyz_with_derivs(*x[j, 0])
            u1, d1 = _zyz_with_derivs(*x[j, 1])
            layers.append(kron(u0, u1))
            dlayers.append([kron(d, u1) for d in d0] + [kron(u0, d) for d in d1])
        prefix = [pulses[0]]
        for j in range(k - 1):
            prefix.append(prefix[-1] @ layers[j] @ pulses[j + 1])
        v = prefix[-1]
        ub = Q_DAG @ v @ Q
        m = ub.T @ ub
        tr = np.trace(m)
        g1 = tr / 4
        g2 = np.real((tr * tr - np.trace(m @ m)) / 4)
        d_plus = abs(g1 - self.t1) ** 2
        d_minus = abs(g1 + self.t1) ** 2
        s = 1.0 if d_plus <= d_minus else -1.0
        loss = float(min(d_plus, d_minus) + (g2 - self.t2) ** 2)
        # dL = 2 Re tr(W dV) with W collecting both invariant gradients
        a1 = Q @ ub.T @ Q_DAG / 2
        a2 = Q @ (tr * ub.T - m @ ub.T) @ Q_DAG
        w = np.conj(g1 - s * self.t1) * a1 + (g2 - self.t2) * a2
        suffix = []
        acc = np.eye(4, dtype=complex)
        for j in range(k - 1, 0, -1):
            acc = pulses[j] @ acc
            suffix.append(acc)
            acc = layers[j - 1] @ acc
        suffix.reverse()
        grad = np.empty(self.n_params)
        idx = 0
        for j in range(k - 1):
            e = suffix[j] @ w @ prefix[j]
            for d in dlayers[j]:
                grad[idx] = 2 * np.real(np.sum(e.T * d))
                idx += 1
        return loss, grad


@dataclass
class InvariantMatch:
    """Outcome of :func:`match_invariants`.

    Attributes:
        angles: Best inner angles, shape ``(2 (n - 1), 3)``.
        residual: Loss at ``angles``.
        steps: Total BFGS iterations across the starts used.
        starts_used: Number of starts run.
        success: ``residual <= threshold``.
        history: Per-iteration loss values concatenated across starts, when
            requested.
    """

    angles: np.ndarray
    residual: float
    steps: int
    starts_used: int
    success: bool
    history: list = field(default_factory=list)


def _start_point(config: OptimizerConfig, start: int, n: int) -> np.ndarray:
    if start == 0:
        return np.zeros(n)
    rng = np.random.default_rng([config.seed, start])
    return rng.uniform(-np.pi, np.pi, n)


def match_invariants(
    pulses: Sequence[np.ndarray],
    target: np.ndarray,
    config: OptimizerConfig | None = None,
    record_history: bool = False,
    polish: bool = False,
) -> InvariantMatch:
    """Multi-start BFGS on :class:`InvariantLoss`, retrying until success.

    Args:
        pulses: Pulse unitaries in sequence order.
        target: Target two-qubit unitary.
        config: Optimizer settings.
        record_history: Keep the loss after every iteration.
        polish: After success, keep iterating toward machine precision so the
            outer-local reconstruction is exact.
    """
    config = config or OptimizerConfig()
    fn = InvariantLoss(pulses, target)
    n = fn.n_params
    if n == 0:
        res = fn(np.zeros(0))[0]
        return InvariantMatch(np.zeros((0, 3)), res, 0, 0, res <= config.threshold)
    best_x, best_f = None, np.inf
    steps = 0
    history: list = []
    used = 0
    for start in range(config.n_starts):
        used += 1
        x0 = _start_point(config, start, n)
        callback = None
        if record_history:
            callback = lambda xk: history.append(fn(xk)[0])  # noqa: E731
        res = minimize(fn, x0, jac=True, method="BFGS", callback=callback,
                       options={"maxiter": config.max_steps, "gtol": 1e-16})
        steps += int(res.nit)
        if res.fun < best_f:
            best_x, best_f = res.x, float(res.fun)
        if best_f <= config.threshold:
            break
    if polish and best_f <= config.threshold and best_f > 1e-26:
        res = minimize(fn, best_x, jac=True, method="BFGS", options={"maxiter": 200, "gtol": 1e-18})
        if res.fun < best_f:
            best_x, best_f = res.x, float(res.fun)
    angles = np.asarray(best_x).reshape(-1, 3)
    return InvariantMatch(angles, best_f, steps, used, best_f <= config.threshold, history)


def optimize_inner_locals(key: AnsatzKey, gateset: "GateSet", target: np.ndarray,
                          config: OptimizerConfig | None = None) -> tuple[np.ndarray, float]:
    """Fit inner angles so the ansatz for ``key`` is locally equivalent to ``target``.

    Returns:
        ``(angles, residual)``. For a single pulse there is nothing to fit and
        the residual is the invariant loss itself.

    Raises:
        ConvergenceFailure: the best residual stays above ``config.threshold``.
    """
    config = config or OptimizerConfig()
    target = check_unitary(target, 4, name="target")
    pulses = [gateset.gates[k].unitary for k in key]
    match = match_invariants(pulses, target, config)
    if not match.success:
        raise ConvergenceFailure(
            f"invariant matching for key {tuple(key)} reached {match.residual:.3g} > {config.threshold:g}",
            match.residual, match.angles)
    return match.angles, match.residual


class OuterLocals(NamedTuple):
    """``target = exp(i phase) (v1 x v2) V (v3 x v4)``."""

    v1: np.ndarray
    v2: np.ndarray
    v3: np.ndarray
    v4: np.ndarray
    phase: float


def compute_outer_locals(target: np.ndarray, v: np.ndarray, tol: float = 1e-7,
                         target_factors: CartanFactors | None = None) -> OuterLocals:
    """Outer single-qubit gates turning ``v`` into ``target``.

    Both unitaries are Cartan-decomposed; when they land on different
    base-plane representatives the decomposition of ``v`` is mirrored.

    Raises:
        NotLocallyEquivalent: invariants differ by more than ``tol``.
        FrameMismatch: no representative of ``v`` matches the target's.
    """
    target = np.asarray(target, dtype=complex)
    v = np.asarray(v, dtype=complex)
    dist = invariant_distance(makhlin_invariants(target), makhlin_invariants(v))
    if dist > tol:
        raise NotLocallyEquivalent(f"invariant distance {dist:.3g} exceeds {tol:g}")
    ft = target_factors or cartan_decompose(target)
    fv = cartan_decompose(v)
    candidates = [fv, mirror_factors(fv)]
    chosen = min(candidates, key=lambda f: f.coords.distance(ft.coords))
    if chosen.coords.distance(ft.coords) > 1e-5:
        raise FrameMismatch(f"chamber representatives {tuple(ft.coords)} and {tuple(chosen.coords)} differ")
    return OuterLocals(
        ft.w1 @ dagger(chosen.w1),
        ft.w2 @ dagger(chosen.w2),
        dagger(chosen.w3) @ ft.w3,
        dagger(chosen.w4) @ ft.w4,
        float(ft.global_phase - chosen.global_phase),
    )


def apply_outer(outer: OuterLocals, v: np.ndarray) -> np.ndarray:
    return np.exp(1j * outer.phase) * kron(outer.v1, outer.v2) @ v @ kron(outer.v3, outer.v4)


@dataclass(frozen=True)
class SynthesisResult:
    """A synthesized block ``exp(i phase) (v1 x v2) V (v3 x v4)``.

    Attributes:
        key: Pulse multiset, descending by cost.
        sequence: Pulse indices in the matrix-product order of ``V``.
        inner: Inner angles, shape ``(2 (len(sequence) - 1), 3)``.
        outer: Outer single-qubit gates and global phase.
        residual: Invariant loss of ``V`` against the target.
        reconstruction: The full synthesized unitary.
        cost: Duration charged by the cost model.
        method: ``"local"``, ``"closed_form"`` or ``"numeric"``.
        error: Phase-aligned max elementwise difference to the target.
    """

    key: AnsatzKey
    sequence: tuple
    inner: np.ndarray
    outer: OuterLocals
    residual: float
    reconstruction: np.ndarray
    cost: float
    method: str
    error: float

    def operations(self):
        """Yield the block in time order as ``("local", a, b)`` / ``("pulse", index)``."""
        yield ("local", self.outer.v3, self.outer.v4)
        layers = [(zyz(*self.inner[2 * j]), zyz(*self.inner[2 * j + 1])) for j in range(len(self.inner) // 2)]
        seq = list(self.sequence)
        for pos in range(len(seq) - 1, -1, -1):
            yield ("pulse", seq[pos])
            if pos > 0:
                a, b = layers[pos - 1]
                yield ("local", a, b)
        yield ("local", self.outer.v1, self.outer.v2)

    def summary(self, gateset: "GateSet | None" = None) -> dict:
        labels = None
        if gateset is not None:
            labels = [gateset.gates[k].label for k in self.sequence]
        return {
            "key": list(self.key),
            "sequence": list(self.sequence),
            "labels": labels,
            "method": self.method,
            "cost": self.cost,
            "residual": self.residual,
            "error": self.error,
        }


def finish_synthesis(target: np.ndarray, key: AnsatzKey, sequence: Sequence[int], pulses: Sequence[np.ndarray],
                     inner: np.ndarray, cost: float, method: str,
                     target_factors: CartanFactors | None = None) -> SynthesisResult:
    """Attach outer locals to a tuned sequence and verify the reconstruction.

    ``target_factors`` reuses an existing decomposition of ``target``.
    """
    if pulses:
        v = sequence_unitary(pulses, inner)
    else:
        v = np.eye(4, dtype=complex)
    outer = compute_outer_locals(target, v, target_factors=target_factors)
    recon = apply_outer(outer, v)
    return SynthesisResult(
        key=tuple(key), sequence=tuple(sequence), inner=np.asarray(inner, dtype=float).reshape(-1, 3),
        outer=outer, residual=invariant_loss(v, target), reconstruction=recon, cost=float(cost),
        method=method, error=phase_aligned_diff(recon, target))


def synthesize_numeric(target: np.ndarray, key: AnsatzKey, gateset: "GateSet",
                       config: OptimizerConfig | None = None,
                       target_factors: CartanFactors | None = None) -> SynthesisResult:
    """Numeric path for a fixed key: optimize, polish, attach outer locals."""
    config = config or OptimizerConfig()
    pulses = [gateset.gates[k].unitary for k in key]
    match = match_invariants(pulses, target, config, polish=True)
    if not match.success:
        raise ConvergenceFailure(f"key {tuple(key)} did not reach threshold", match.residual, match.angles)
    return finish_synthesis(target, key, key, pulses, match.angles, gateset.sequence_cost(key), "numeric",
                            target_factors)


ACCEPT_ERROR = 1e-8


def synthesize_block(target: np.ndarray, coverage: "CoverageSet", gateset: "GateSet",
                     config: OptimizerConfig | None = None) -> SynthesisResult:
    """Cheapest synthesis of ``target`` from the coverage set.

    Entries are visited in ascending cost. An entry whose polytope may contain
    the target's canonical point is tried with the closed-form construction
    when every pulse is single-axis, and numerically otherwise (also as a
    fallback when the closed form is not applicable).

    Raises:
        SynthesisExhausted: no entry produced a reconstruction within 1e-8.
    """
    from .synth_closedform import synthesize_single_axis_key

    config = config or OptimizerConfig()
    target = check_unitary(target, 4, name="target")
    factors = cartan_decompose(target)
    coords = factors.coords
    for entry in coverage.entries:
        if entry.polytope.status(coords) == "outside":
            continue
        attempts = []
        if not entry.key:
            attempts.append(lambda: finish_synthesis(target, (), (), [], np.zeros((0, 3)), entry.cost, "local",
                                                        factors))
        else:
            if all(gateset.gates[k].single_axis for k in entry.key):
                attempts.append(lambda: synthesize_single_axis_key(target, entry.key, gateset, factors))
            attempts.append(lambda: synthesize_numeric(target, entry.key, gateset, config, factors))
        for attempt in attempts:
            try:
                result = attempt()
            except (Infeasible, ConvergenceFailure, NotLocallyEquivalent, FrameMismatch) as exc:
                log.debug("entry %s rejected: %s", entry.key, exc)
                continue
            if result.error <= ACCEPT_ERROR:
                return result
            log.debug("entry %s reconstruction error %.3g", entry.key, result.error)
    raise SynthesisExhausted(f"no coverage entry synthesizes the target at {tuple(coords)}")
