"""Certification of cycles as periodic subspace solutions.

A subspace ``span(V)`` invariant under ``M(k_J)...M(k_1)`` whose images
``W_j V`` (``W_j = M(k_{j-1})...M(k_1)``) stay inside ``Q_{k_j}`` at every
stage is visited periodically with the pattern ``k_1..k_J``. Containment
in a quadratic set reduces to definiteness of ``V_j' N V_j``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .linalg import EIG_TOL, EigenStructure, eigen_structure, max_eig, min_eig
from .petc_model import PetcSystem

PSD_TOL = 1e-9
RANK_TOL = 1e-10
INVARIANCE_TOL = 1e-8


class AssumptionViolation(ValueError):
    """The cycle matrix has repeated eigenvalues; its invariant subspaces are not enumerated."""


@dataclass(frozen=True)
class SubspaceCandidate:
    basis: np.ndarray
    source: tuple  # indices into EigenStructure.subspaces
    eigenvalues: tuple = ()

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=float)
        s = np.linalg.svd(b, compute_uv=False)
        if s.size == 0 or s[-1] <= RANK_TOL * max(1.0, s[0]):
            raise ValueError("subspace basis is rank deficient")
        object.__setattr__(self, "basis", b)

    @property
    def dim(self) -> int:
        return self.basis.shape[1]


@dataclass(frozen=True)
class Certificate:
    cycle: tuple
    subspace: SubspaceCandidate
    stage_margins: tuple


@dataclass(frozen=True)
class Refusal:
    cycle: tuple
    reason: str
    stage: Optional[int] = None
    constraint: Optional[str] = None
    boundary: bool = False

    def __bool__(self):
        return False


def _orth(v: np.ndarray) -> np.ndarray:
    q, _ = np.linalg.qr(v)
    return q


def cycle_matrix(sys: PetcSystem, cycle: Sequence[int]) -> np.ndarray:
    """``M(k_J) ... M(k_1)``: ``M(k_1)`` acts first."""
    if len(cycle) == 0:
        raise ValueError("empty cycle")
    p = np.eye(sys.n_x)
    for k in cycle:
        p = sys.m(sys.check_symbol(k)) @ p
    return p


def candidate_subspaces(es: EigenStructure) -> list:
    """Every nonempty sum of primitive invariant subspaces.

    Ordered by dimension, then by eigenvalue magnitude (largest first).
    """
    if es.repeated:
        raise AssumptionViolation("cycle matrix has repeated eigenvalues")
    p = len(es.subspaces)
    mags = [abs(v) for v in es.subspace_eigenvalues]
    cands = []
    for r in range(1, p + 1):
        for combo in itertools.combinations(range(p), r):
            basis = np.hstack([es.subspaces[i] for i in combo])
            key = (basis.shape[1], tuple(sorted((-mags[i] for i in combo))))
            cands.append((key, combo, basis))
    cands.sort(key=lambda c: (c[0], c[1]))
    return [SubspaceCandidate(basis=b, source=combo,
                              eigenvalues=tuple(es.subspace_eigenvalues[i] for i in combo))
            for _, combo, b in cands]


def _scaled(n: np.ndarray) -> np.ndarray:
    s = np.abs(n).max()
    return n / s if s > 0 else n


def verify(sys: PetcSystem, cycle: Sequence[int], cand: SubspaceCandidate,
           psd_tol: float = PSD_TOL):
    """Certificate if ``cand`` is a periodic subspace solution for ``cycle``, else a Refusal."""
    cycle = tuple(sys.check_symbol(k) for k in cycle)
    v = cand.basis
    p = cycle_matrix(sys, cycle)
    pv = p @ v
    proj = v @ np.linalg.lstsq(v, pv, rcond=None)[0]
    scale = max(np.linalg.norm(p, 2) * np.linalg.norm(v, 2), np.finfo(float).tiny)
    if np.linalg.norm(pv - proj, 2) > INVARIANCE_TOL * scale:
        return Refusal(cycle, "subspace is not invariant under the cycle matrix")

    margins = []
    w = v
    for j, k in enumerate(cycle, start=1):
        s = np.linalg.svd(w, compute_uv=False)
        if s[-1] <= RANK_TOL * s[0]:
            return Refusal(cycle, "subspace collapses under the stage map", stage=j)
        vj = _orth(w)
        stage_margin = np.inf
        if k < sys.kbar:
            lam = min_eig(vj.T @ _scaled(sys.n(k)) @ vj)
            if lam <= psd_tol:
                return Refusal(cycle, f"stage {j}: V'N({k})V is not positive definite",
                               stage=j, constraint=f"N({k}) > 0", boundary=lam > -psd_tol)
            stage_margin = lam
        for i in range(1, k):
            lam = max_eig(vj.T @ _scaled(sys.n(i)) @ vj)
            if lam >= psd_tol:
                return Refusal(cycle, f"stage {j}: V'N({i})V is not negative semidefinite",
                               stage=j, constraint=f"N({i}) <= 0")
            stage_margin = min(stage_margin, -lam)
        margins.append(float(stage_margin))
        w = sys.m(k) @ vj
    return Certificate(cycle=cycle, subspace=cand, stage_margins=tuple(margins))


@dataclass
class CertifyOutcome:
    certificate: Optional[Certificate] = None
    refusals: list = field(default_factory=list)
    assumption_violated: bool = False


def certify_cycle(sys: PetcSystem, cycle: Sequence[int], psd_tol: float = PSD_TOL,
                  eig_tol: float = EIG_TOL) -> CertifyOutcome:
    """Try every rotation of ``cycle`` and every candidate subspace; stop at the first certificate."""
    cycle = tuple(cycle)
    out = CertifyOutcome()
    seen = set()
    for r in range(len(cycle)):
        rot = cycle[r:] + cycle[:r]
        if rot in seen:
            continue
        seen.add(rot)
        es = eigen_structure(cycle_matrix(sys, rot), eig_tol)
        try:
            cands = candidate_subspaces(es)
        except AssumptionViolation as exc:
            out.assumption_violated = True
            out.refusals.append(Refusal(rot, str(exc)))
            continue
        for cand in cands:
            res = verify(sys, rot, cand, psd_tol)
            if isinstance(res, Certificate):
                out.certificate = res
                return out
            out.refusals.append(res)
    return out
