"""Periodic event-triggered control (PETC) data: M(k), N(k), regions and kappa."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .linalg import LinalgError, as_matrix, discretize

__all__ = [
    "PetcSystem",
    "PlantSpec",
    "RawQ",
    "RegionDescriptor",
    "TabuadaSigma",
    "build_system",
    "kappa",
    "region",
    "tabuada_q",
]


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class RawQ:
    q: np.ndarray

    def __post_init__(self):
        q = as_matrix(self.q, "Q", square=True)
        if not np.allclose(q, q.T, atol=1e-10, rtol=0):
            raise ModelError("triggering matrix Q is not symmetric")
        object.__setattr__(self, "q", 0.5 * (q + q.T))


@dataclass(frozen=True)
class TabuadaSigma:
    """Relative-error trigger ``|x - xhat| > sigma |x|``."""

    sigma: float

    def __post_init__(self):
        if not 0.0 < self.sigma < 1.0:
            raise ModelError(f"sigma must lie in (0, 1), got {self.sigma}")


TriggerSpec = Union[RawQ, TabuadaSigma]


def tabuada_q(sigma: float, n: int) -> np.ndarray:
    """Q with ``[x; xhat]^T Q [x; xhat] = |x - xhat|^2 - sigma^2 |x|^2``."""
    i = np.eye(n)
    return np.block([[(1.0 - sigma ** 2) * i, -i], [-i, i]])


@dataclass(frozen=True)
class PlantSpec:
    A: np.ndarray
    B: np.ndarray
    K: np.ndarray
    trigger: TriggerSpec
    h: float
    kbar: int

    def __post_init__(self):
        a = as_matrix(self.A, "A", square=True)
        b = as_matrix(self.B, "B")
        k = as_matrix(self.K, "K")
        n = a.shape[0]
        if b.shape[0] != n:
            raise ModelError(f"B has {b.shape[0]} rows, expected {n}")
        if k.shape != (b.shape[1], n):
            raise ModelError(f"K has shape {k.shape}, expected {(b.shape[1], n)}")
        if isinstance(self.trigger, RawQ) and self.trigger.q.shape != (2 * n, 2 * n):
            raise ModelError(f"Q has shape {self.trigger.q.shape}, expected {(2 * n, 2 * n)}")
        if not self.h > 0:
            raise ModelError(f"h must be positive, got {self.h}")
        if int(self.kbar) != self.kbar or self.kbar < 1:
            raise ModelError(f"kbar must be an integer >= 1, got {self.kbar}")
        object.__setattr__(self, "A", a)
        object.__setattr__(self, "B", b)
        object.__setattr__(self, "K", k)
        object.__setattr__(self, "kbar", int(self.kbar))

    @property
    def n_x(self) -> int:
        return self.A.shape[0]

    def q_matrix(self) -> np.ndarray:
        if isinstance(self.trigger, TabuadaSigma):
            return tabuada_q(self.trigger.sigma, self.n_x)
        return self.trigger.q


@dataclass(frozen=True)
class PetcSystem:
    """Discrete PETC data. ``M[k-1]`` and ``N[k-1]`` hold M(k), N(k).

    N(kbar) never enters kappa; systems given directly by their matrices may
    leave it as zeros.
    """

    M: tuple
    N: tuple
    h: float
    kbar: int
    name: str = ""

    def __post_init__(self):
        ms = tuple(as_matrix(m, f"M({i + 1})", square=True) for i, m in enumerate(self.M))
        if len(ms) != self.kbar:
            raise ModelError(f"expected {self.kbar} M matrices, got {len(ms)}")
        ns = [as_matrix(m, f"N({i + 1})", square=True) for i, m in enumerate(self.N)]
        if len(ns) == self.kbar - 1:
            ns.append(np.zeros_like(ms[0]))
        if len(ns) != self.kbar:
            raise ModelError(f"expected {self.kbar} N matrices, got {len(ns)}")
        n = ms[0].shape[0]
        for i, (m, nk) in enumerate(zip(ms, ns)):
            if m.shape != (n, n) or nk.shape != (n, n):
                raise ModelError(f"M({i + 1}) / N({i + 1}) are not {n}x{n}")
            if not np.allclose(nk, nk.T, atol=1e-10 * max(1.0, np.abs(nk).max()), rtol=0):
                raise ModelError(f"N({i + 1}) is not symmetric")
        ns = tuple(0.5 * (nk + nk.T) for nk in ns)
        if not self.h > 0:
            raise ModelError(f"h must be positive, got {self.h}")
        object.__setattr__(self, "M", ms)
        object.__setattr__(self, "N", ns)

    @property
    def n_x(self) -> int:
        return self.M[0].shape[0]

    def m(self, k: int) -> np.ndarray:
        return self.M[k - 1]

    def n(self, k: int) -> np.ndarray:
        return self.N[k - 1]

    def check_symbol(self, k) -> int:
        if int(k) != k or not 1 <= k <= self.kbar:
            raise ModelError(f"inter-sample symbol {k} outside 1..{self.kbar}")
        return int(k)


def build_system(spec: PlantSpec, name: str = "") -> PetcSystem:
    """Derive M(k) and N(k) = [M(k); I]^T Q [M(k); I] for k = 1..kbar."""
    q = spec.q_matrix()
    n = spec.n_x
    ms, ns = [], []
    for k in range(1, spec.kbar + 1):
        try:
            mk = discretize(spec.A, spec.B, spec.K, spec.h, k)
        except LinalgError as exc:
            raise ModelError(str(exc)) from exc
        stack = np.vstack([mk, np.eye(n)])
        nk = stack.T @ q @ stack
        ms.append(mk)
        ns.append(0.5 * (nk + nk.T))
    return PetcSystem(M=tuple(ms), N=tuple(ns), h=spec.h, kbar=spec.kbar, name=name)


def kappa(sys: PetcSystem, x) -> int:
    """Discrete inter-sample time of state ``x``: first k with x'N(k)x > 0, else kbar."""
    x = np.asarray(x, dtype=float).ravel()
    for k in range(1, sys.kbar):
        if x @ sys.N[k - 1] @ x > 0:
            return k
    return sys.kbar


@dataclass(frozen=True)
class RegionDescriptor:
    """States triggering exactly at ``k``: x'Nx > 0 for ``strict_pos`` and x'N(j)x <= 0 for j < k."""

    k: int
    strict_pos: Optional[np.ndarray]
    nonpos_list: list = field(default_factory=list)

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float).ravel()
        if self.strict_pos is not None and not x @ self.strict_pos @ x > 0:
            return False
        return all(x @ r @ x <= 0 for r in self.nonpos_list)


def region(sys: PetcSystem, k: int) -> RegionDescriptor:
    if int(k) != k or not 1 <= k <= sys.kbar:
        raise ModelError(f"k={k} outside 1..{sys.kbar}")
    strict = None if k == sys.kbar else sys.N[k - 1]
    return RegionDescriptor(k=int(k), strict_pos=strict, nonpos_list=list(sys.N[: k - 1]))


def system_from_matrices(M: Sequence, N: Sequence, h: float, kbar: int, name: str = "") -> PetcSystem:
    return PetcSystem(M=tuple(M), N=tuple(N), h=h, kbar=kbar, name=name)
