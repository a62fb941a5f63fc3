"""Dense real-matrix kernels used throughout the package.

Everything here works on small ``numpy`` arrays (state dimension of a few
units to a few tens) and favours robustness over speed.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Definiteness",
    "EigenStructure",
    "LinalgError",
    "as_matrix",
    "definiteness",
    "discretize",
    "eigen_structure",
    "expm",
]

EIG_TOL = 1e-8

# Degree-13 Pade coefficients (Higham 2005) and the matching 1-norm bound.
_PADE13 = (
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0, 129060195264000.0, 10559470521600.0,
    670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
    960960.0, 16380.0, 182.0, 1.0,
)
_THETA13 = 5.371920351148152


class LinalgError(ValueError):
    pass


class Definiteness(enum.Enum):
    POS_DEF = "PosDef"
    POS_SEMI_DEF = "PosSemiDef"
    NEG_SEMI_DEF = "NegSemiDef"
    NEG_DEF = "NegDef"
    INDEFINITE = "Indefinite"


@dataclass(frozen=True)
class EigenStructure:
    """Eigenvalues plus the primitive real invariant subspaces of a matrix.

    ``subspaces[i]`` is an ``n x 1`` array (real eigenvalue) or ``n x 2``
    array (real and imaginary parts of one eigenvector of a conjugate
    pair). ``subspace_eigenvalues[i]`` is the eigenvalue attached to it
    (the one with positive imaginary part for pairs).
    """

    eigenvalues: np.ndarray
    subspaces: list[np.ndarray] = field(default_factory=list)
    subspace_eigenvalues: list[complex] = field(default_factory=list)
    repeated: bool = False


def as_matrix(a, name: str = "matrix", square: bool = False) -> np.ndarray:
    """Coerce ``a`` to a finite 2-D float array."""
    m = np.array(a, dtype=float)
    if m.ndim == 1:
        m = m.reshape(1, -1) if m.size else m.reshape(0, 0)
    if m.ndim != 2:
        raise LinalgError(f"{name} must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise LinalgError(f"{name} has non-finite entries")
    if square and m.shape[0] != m.shape[1]:
        raise LinalgError(f"{name} must be square, got shape {m.shape}")
    return m


def expm(a, t: float = 1.0) -> np.ndarray:
    """Matrix exponential ``e^{a t}`` by scaling and squaring with a [13/13] Pade core."""
    a = as_matrix(a, "A", square=True)
    if not math.isfinite(t) or t < 0:
        raise LinalgError(f"t must be finite and non-negative, got {t}")
    n = a.shape[0]
    x = a * t
    ident = np.eye(n)
    norm = np.linalg.norm(x, 1)
    if norm == 0.0:
        return ident
    s = max(0, int(math.ceil(math.log2(norm / _THETA13)))) if norm > _THETA13 else 0
    x = x / (2.0 ** s)

    b = _PADE13
    x2 = x @ x
    x4 = x2 @ x2
    x6 = x4 @ x2
    u = x @ (x6 @ (b[13] * x6 + b[11] * x4 + b[9] * x2)
             + b[7] * x6 + b[5] * x4 + b[3] * x2 + b[1] * ident)
    v = (x6 @ (b[12] * x6 + b[10] * x4 + b[8] * x2)
         + b[6] * x6 + b[4] * x4 + b[2] * x2 + b[0] * ident)
    r = np.linalg.solve(v - u, v + u)
    for _ in range(s):
        r = r @ r
    return r


def discretize(a, b, k_gain, h: float, k: int) -> np.ndarray:
    """Sampled closed-loop map ``M(k) = e^{Ahk} + (int_0^{hk} e^{As} ds) B K``.

    The integral is read off the top-right block of ``exp([[A, I], [0, 0]] hk)``
    so singular ``A`` needs no special treatment.
    """
    a = as_matrix(a, "A", square=True)
    b = as_matrix(b, "B")
    k_gain = as_matrix(k_gain, "K")
    n = a.shape[0]
    if b.shape[0] != n or k_gain.shape != (b.shape[1], n):
        raise LinalgError(
            f"dimension mismatch: A {a.shape}, B {b.shape}, K {k_gain.shape}")
    if k < 1:
        raise LinalgError(f"k must be >= 1, got {k}")
    if h <= 0:
        raise LinalgError(f"h must be positive, got {h}")
    aug = np.zeros((2 * n, 2 * n))
    aug[:n, :n] = a
    aug[:n, n:] = np.eye(n)
    e = expm(aug, h * k)
    return e[:n, :n] + e[:n, n:] @ b @ k_gain


def eigen_structure(m, eig_tol: float = EIG_TOL) -> EigenStructure:
    """Split ``m`` into primitive real invariant subspaces.

    Complex conjugate pairs become one 2-D plane. ``repeated`` is set when
    two eigenvalues are within ``eig_tol`` times the spectral radius.
    """
    m = as_matrix(m, "M", square=True)
    n = m.shape[0]
    try:
        w, vecs = np.linalg.eig(m)
    except np.linalg.LinAlgError as exc:
        raise LinalgError(f"eigendecomposition failed: {exc}") from exc

    scale = max(float(np.max(np.abs(w))) if n else 0.0, np.finfo(float).tiny)
    repeated = False
    for i in range(n):
        for j in range(i + 1, n):
            if abs(w[i] - w[j]) <= eig_tol * scale:
                repeated = True

    subspaces: list[np.ndarray] = []
    values: list[complex] = []
    imag_tol = eig_tol * scale
    for i in range(n):
        lam = w[i]
        if abs(lam.imag) <= imag_tol:
            v = np.real(vecs[:, i])
            v = v / np.linalg.norm(v)
            subspaces.append(v.reshape(n, 1))
            values.append(complex(lam.real, 0.0))
        elif lam.imag > 0:
            v = vecs[:, i]
            basis = np.column_stack([v.real, v.imag])
            q, _ = np.linalg.qr(basis)
            subspaces.append(q)
            values.append(complex(lam))
    return EigenStructure(eigenvalues=w, subspaces=subspaces,
                          subspace_eigenvalues=values, repeated=repeated)


def definiteness(s, tol: float = 1e-9) -> Definiteness:
    """Sign class of the symmetric part of ``s`` with eigenvalue threshold ``tol``."""
    s = as_matrix(s, "S", square=True)
    if s.size == 0:
        raise LinalgError("empty matrix")
    lam = np.linalg.eigvalsh(0.5 * (s + s.T))
    lo, hi = lam[0], lam[-1]
    if lo > tol:
        return Definiteness.POS_DEF
    if lo > -tol and hi >= tol:
        return Definiteness.POS_SEMI_DEF
    if hi < -tol:
        return Definiteness.NEG_DEF
    if hi < tol and lo <= -tol:
        return Definiteness.NEG_SEMI_DEF
    if -tol < lo and hi < tol:
        # numerically zero: both semidefinite; report the positive side
        return Definiteness.POS_SEMI_DEF
    return Definiteness.INDEFINITE


def min_eig(s) -> float:
    s = np.asarray(s, dtype=float)
    return float(np.linalg.eigvalsh(0.5 * (s + s.T))[0])


def max_eig(s) -> float:
    s = np.asarray(s, dtype=float)
    return float(np.linalg.eigvalsh(0.5 * (s + s.T))[-1])
