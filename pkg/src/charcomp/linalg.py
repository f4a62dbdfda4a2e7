"""Dense 2x2 and 4x4 matrix helpers.

Everything downstream works with plain ``numpy`` complex arrays. Matrices are
compared with the maximum elementwise absolute difference unless a named
metric is used. Tensor products put the first argument on the most significant
qubit.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy.stats import unitary_group

from .errors import ShapeMismatch, ValidationError

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (X, Y, Z)
I4 = np.eye(4, dtype=complex)

CX = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
CZ = np.diag([1, 1, 1, -1]).astype(complex)
SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)
# echoed cross-resonance gate, control on the first qubit
ECR = np.array([[0, 1, 0, 1j], [1, 0, -1j, 0], [0, 1j, 0, 1], [-1j, 0, 1, 0]], dtype=complex) / np.sqrt(2)


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Tensor product with ``a`` on the first (control-side) qubit."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.ndim == 2 and b.ndim == 2:
        (ra, ca), (rb, cb) = a.shape, b.shape
        return (a[:, None, :, None] * b[None, :, None, :]).reshape(ra * rb, ca * cb)
    return np.kron(a, b)


def dagger(u: np.ndarray) -> np.ndarray:
    return np.conj(np.asarray(u)).T


def max_abs_diff(a: np.ndarray, b: np.ndarray) -> float:
    """Maximum elementwise absolute difference."""
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


def phase_aligned_diff(a: np.ndarray, b: np.ndarray) -> float:
    """Max elementwise difference after removing the best global phase.

    The phase is taken from ``tr(a^dagger b)``, which is the optimal alignment
    when the two matrices are close.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    overlap = np.trace(dagger(a) @ b)
    phase = overlap / abs(overlap) if abs(overlap) > 1e-300 else 1.0
    return max_abs_diff(a * phase, b)


def is_unitary(u: np.ndarray, atol: float = 1e-10) -> bool:
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        return False
    return bool(np.max(np.abs(dagger(u) @ u - np.eye(u.shape[0]))) <= atol)


def check_unitary(u, dim: int | None = None, atol: float = 1e-9, name: str = "matrix") -> np.ndarray:
    """Coerce ``u`` to a complex array and verify it is a unitary of size ``dim``.

    Raises:
        ShapeMismatch: wrong shape.
        ValidationError: not unitary within ``atol``.
    """
    arr = np.asarray(u, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or (dim is not None and arr.shape[0] != dim):
        expected = f"{dim}x{dim}" if dim is not None else "square"
        raise ShapeMismatch(f"{name} must be {expected}, got shape {arr.shape}")
    if not is_unitary(arr, atol):
        err = np.max(np.abs(dagger(arr) @ arr - np.eye(arr.shape[0])))
        raise ValidationError(f"{name} is not unitary (max |U^dag U - I| = {err:.3g})")
    return arr


def su_normalize(u: np.ndarray) -> np.ndarray:
    """Rescale ``u`` by a phase so that its determinant is one.

    The principal fourth root is used: ``c = exp(-i arg(det u) / 4)`` with the
    argument taken in ``(-pi, pi]``. Arguments within 1e-12 of ``-pi`` are
    snapped to ``+pi`` so that matrices with ``det = -1`` map consistently.
    """
    u = np.asarray(u, dtype=complex)
    n = u.shape[0]
    arg = float(np.angle(np.linalg.det(u)))
    if arg < -np.pi + 1e-12:
        arg = np.pi
    return u * np.exp(-1j * arg / n)


def herm_exp(h: np.ndarray) -> np.ndarray:
    """Return ``exp(-i h)`` for Hermitian ``h`` via its eigendecomposition."""
    h = np.asarray(h, dtype=complex)
    h = 0.5 * (h + dagger(h))
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * w)) @ dagger(v)


def process_infidelity(u: np.ndarray, v: np.ndarray) -> float:
    """``1 - |tr(u^dagger v)|^2 / d^2``; zero iff equal up to global phase."""
    u = np.asarray(u)
    d = u.shape[0]
    val = 1.0 - abs(np.trace(dagger(u) @ np.asarray(v))) ** 2 / d**2
    return float(min(max(val, 0.0), 1.0))


def rz(theta: float) -> np.ndarray:
    """``exp(-i theta Z / 2)``."""
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def ry(theta: float) -> np.ndarray:
    """``exp(-i theta Y / 2)``."""
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rx(theta: float) -> np.ndarray:
    """``exp(-i theta X / 2)``."""
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def zyz(alpha: float, beta: float, gamma: float) -> np.ndarray:
    """``Z(alpha) Y(beta) Z(gamma)`` with ``Z(t) = rz(t)`` and ``Y(t) = ry(t)``."""
    za = np.array([np.exp(-0.5j * alpha), np.exp(0.5j * alpha)])
    zc = np.array([np.exp(-0.5j * gamma), np.exp(0.5j * gamma)])
    return za[:, None] * ry(beta) * zc[None, :]


def zyz_angles(u: np.ndarray) -> tuple[float, float, float, float]:
    """Decompose a 2x2 unitary as ``exp(i phase) Z(alpha) Y(beta) Z(gamma)``.

    Returns:
        ``(alpha, beta, gamma, phase)`` with ``beta`` in ``[0, pi]``.
    """
    u = np.asarray(u, dtype=complex)
    det = np.linalg.det(u)
    phase = np.angle(det) / 2
    s = u * np.exp(-1j * phase)
    beta = 2 * np.arctan2(abs(s[1, 0]), abs(s[0, 0]))
    if abs(s[0, 0]) < 1e-12:
        plus = 0.0
        minus = 2 * np.angle(s[1, 0])
    elif abs(s[1, 0]) < 1e-12:
        minus = 0.0
        plus = 2 * np.angle(s[1, 1])
    else:
        plus = 2 * np.angle(s[1, 1])
        minus = 2 * np.angle(s[1, 0])
    alpha = 0.5 * (plus + minus)
    gamma = 0.5 * (plus - minus)
    recon = zyz(alpha, beta, gamma)
    # the half-angle parametrization leaves a sign ambiguity; fold it into the phase
    if np.max(np.abs(recon - s)) > np.max(np.abs(recon + s)):
        phase += np.pi
    return float(alpha), float(beta), float(gamma), float(np.angle(np.exp(1j * phase)))


def vector_to_su2(r: Sequence[float]) -> np.ndarray:
    """``exp(-i r . sigma)`` for a real 3-vector ``r``."""
    r = np.asarray(r, dtype=float)
    norm = float(np.linalg.norm(r))
    if norm < 1e-300:
        return I2.copy()
    n = r / norm
    gen = n[0] * X + n[1] * Y + n[2] * Z
    return np.cos(norm) * I2 - 1j * np.sin(norm) * gen


def su2_to_vector(u: np.ndarray) -> np.ndarray:
    """Inverse of :func:`vector_to_su2` for ``u`` in SU(2); norm in ``[0, pi]``."""
    u = np.asarray(u, dtype=complex)
    u = u / np.sqrt(np.linalg.det(u))
    c = float(np.clip(np.real(np.trace(u)) / 2, -1.0, 1.0))
    # tr(u sigma_k) = -2i sin|r| n_k
    sn = np.array([-np.imag(np.trace(u @ p)) / 2 for p in PAULIS])
    s = float(np.linalg.norm(sn))
    angle = float(np.arctan2(s, c))
    if s < 1e-15:
        if c > 0:
            return np.zeros(3)
        return np.array([0.0, 0.0, np.pi])
    return angle * sn / s


def bloch_rotation(u: np.ndarray) -> np.ndarray:
    """SO(3) matrix ``R_ij = tr(sigma_i u sigma_j u^dagger) / 2`` of a 2x2 unitary."""
    u = np.asarray(u, dtype=complex)
    ud = dagger(u)
    return np.array([[0.5 * np.real(np.trace(PAULIS[i] @ u @ PAULIS[j] @ ud)) for j in range(3)] for i in range(3)])


def kron_factor(k: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """Split a 4x4 product operator into ``exp(i phase) (a kron b)``.

    Both returned factors have unit determinant. The best rank-one
    approximation is used, so the result degrades gracefully when ``k`` is only
    approximately a product.
    """
    k = np.asarray(k, dtype=complex)
    r = k.reshape(2, 2, 2, 2).transpose(0, 2, 1, 3).reshape(4, 4)
    uu, ss, vh = np.linalg.svd(r)
    a = (uu[:, 0] * np.sqrt(ss[0])).reshape(2, 2)
    b = (vh[0, :] * np.sqrt(ss[0])).reshape(2, 2)
    da = np.linalg.det(a)
    db = np.linalg.det(b)
    a = a / np.sqrt(da)
    b = b / np.sqrt(db)
    prod = kron(a, b)
    overlap = np.trace(dagger(prod) @ k) / 4
    return a, b, float(np.angle(overlap))


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random ``dim x dim`` unitary drawn from ``rng``."""
    return unitary_group.rvs(dim, random_state=rng)


def haar_su(dim: int, rng: np.random.Generator) -> np.ndarray:
    return su_normalize(haar_unitary(dim, rng))


def random_local(rng: np.random.Generator) -> np.ndarray:
    """Product of two independent Haar single-qubit unitaries."""
    return kron(haar_unitary(2, rng), haar_unitary(2, rng))


def matrix_to_json(u: np.ndarray) -> list:
    """Row-major nested list of ``[re, im]`` pairs."""
    u = np.asarray(u, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in u]


def matrix_from_json(data) -> np.ndarray:
    """Inverse of :func:`matrix_to_json`.

    Raises:
        ShapeMismatch: entries are not ``[re, im]`` pairs in a rectangular grid.
    """
    try:
        arr = np.asarray(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ShapeMismatch(f"matrix JSON is not a numeric grid: {exc}") from exc
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise ShapeMismatch(f"matrix JSON must be rows of [re, im] pairs, got shape {arr.shape}")
    return arr[..., 0] + 1j * arr[..., 1]
