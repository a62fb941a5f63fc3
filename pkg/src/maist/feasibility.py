"""Nonemptiness of conjunctions of homogeneous quadratic constraints.

A :class:`ConeConjunction` asks for ``x != 0`` with ``x'Px > 0`` for every
``P`` in ``strict_pos`` and ``x'Rx <= 0`` for every ``R`` in ``nonpos``.
All constraints are homogeneous, so only the unit sphere is searched.

Three backends are available:

``angle_sweep``
    Planar systems only. Every constraint restricted to the half circle is
    ``a + b cos(2t) + c sin(2t)``, whose sign changes are found in closed form,
    so the sign pattern is known exactly on every arc between them.
``sphere_sampling``
    Any dimension. Quasi-random unit directions followed by a few ascent steps
    on the smallest margin. Never proves emptiness (returns ``UNKNOWN``).
``smtlib``
    Any dimension. Writes a QF_NRA script and runs an external solver.
"""

from __future__ import annotations

import enum
import logging
import os
import re
import shlex
import shutil
import subprocess
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .petc_model import ModelError, PetcSystem

log = logging.getLogger(__name__)

SOLVER_ENV = "MAIST_SMT_SOLVER"


class Status(enum.Enum):
    SAT = "sat"
    UNSAT = "unsat"
    UNKNOWN = "unknown"


class Backend(str, enum.Enum):
    AUTO = "auto"
    ANGLE_SWEEP = "angle_sweep"
    SPHERE_SAMPLING = "sphere_sampling"
    SMTLIB = "smtlib"


class SolverError(RuntimeError):
    """The external solver could not be started at all."""


@dataclass(frozen=True)
class CheckOptions:
    backend: Backend = Backend.AUTO
    margin_tol: float = 1e-9
    angle_tol: float = 1e-6
    samples: int = 10_000
    refine_steps: int = 50
    seed: int = 0
    solver_cmd: Optional[str] = None
    solver_timeout: float = 60.0

    def resolved_backend(self, dim: int) -> Backend:
        b = Backend(self.backend)
        if b is Backend.AUTO:
            return Backend.ANGLE_SWEEP if dim == 2 else Backend.SPHERE_SAMPLING
        if b is Backend.ANGLE_SWEEP and dim != 2:
            raise ValueError("angle_sweep backend needs a planar system (n_x = 2)")
        return b

    def solver_command(self) -> list[str]:
        cmd = os.environ.get(SOLVER_ENV) or self.solver_cmd or "z3 -in"
        return shlex.split(cmd)


@dataclass(frozen=True)
class ConeConjunction:
    strict_pos: tuple = ()
    nonpos: tuple = ()
    dim: int = 0

    def __post_init__(self):
        for m in (*self.strict_pos, *self.nonpos):
            if m.shape != (self.dim, self.dim):
                raise ValueError(f"constraint of shape {m.shape} in a {self.dim}-D conjunction")

    @property
    def size(self) -> int:
        return len(self.strict_pos) + len(self.nonpos)

    def values(self, x) -> tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=float)
        s = np.array([x @ p @ x for p in self.strict_pos])
        r = np.array([x @ p @ x for p in self.nonpos])
        return s, r

    def satisfied_by(self, x, margin_tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        if not np.any(x):
            return False
        s, r = self.values(x / np.linalg.norm(x))
        return bool(np.all(s > margin_tol) and np.all(r <= 0.0))


@dataclass(frozen=True)
class FeasibilityVerdict:
    status: Status
    backend: str
    witness: Optional[np.ndarray] = None
    margin: Optional[float] = None
    diagnostic: str = ""

    @property
    def feasible(self) -> bool:
        """Sat, or Unknown read as feasible (over-approximation)."""
        return self.status is not Status.UNSAT

    @property
    def exact(self) -> bool:
        return self.status is not Status.UNKNOWN


def _unit(m: np.ndarray) -> np.ndarray:
    s = np.abs(m).max()
    return m / s if s > 0 else m


def extend(conj: ConeConjunction, w: np.ndarray, sys: PetcSystem, k: int) -> tuple[ConeConjunction, np.ndarray]:
    """Append the constraints ``w x in Q_k`` and return the next cumulative map ``M(k) w``.

    ``w`` is only known up to a positive factor; it is rescaled every step.
    """
    strict = list(conj.strict_pos)
    nonpos = list(conj.nonpos)
    if k < sys.kbar:
        strict.append(_unit(w.T @ sys.n(k) @ w))
    for j in range(1, k):
        nonpos.append(_unit(w.T @ sys.n(j) @ w))
    w_next = sys.m(k) @ w
    scale = np.abs(w_next).max()
    if scale > 0:
        w_next = w_next / scale
    return ConeConjunction(tuple(strict), tuple(nonpos), conj.dim), w_next


def pullback(sys: PetcSystem, sequence: Sequence[int]) -> ConeConjunction:
    """Constraints on ``x`` for the inter-sample sequence ``k_1 .. k_l``."""
    if len(sequence) == 0:
        raise ModelError("empty inter-sample sequence")
    conj = ConeConjunction(dim=sys.n_x)
    w = np.eye(sys.n_x)
    for k in sequence:
        conj, w = extend(conj, w, sys, sys.check_symbol(k))
    return conj


def check(conj: ConeConjunction, options: CheckOptions = CheckOptions()) -> FeasibilityVerdict:
    backend = options.resolved_backend(conj.dim)
    strict = [_unit(p) for p in conj.strict_pos]
    if any(not np.any(p) for p in strict):
        return FeasibilityVerdict(Status.UNSAT, backend.value, diagnostic="zero strict constraint")
    nonpos = [_unit(r) for r in conj.nonpos if np.any(r)]
    c = ConeConjunction(tuple(strict), tuple(nonpos), conj.dim)
    if backend is Backend.ANGLE_SWEEP:
        return _angle_sweep(c, options)
    if backend is Backend.SPHERE_SAMPLING:
        return _sphere_sampling(c, options)
    return _smtlib(c, options)


# -- angle sweep ---------------------------------------------------------------

def _trig_coeffs(mats) -> np.ndarray:
    if not mats:
        return np.zeros((0, 3))
    p = np.array(mats)
    a = 0.5 * (p[:, 0, 0] + p[:, 1, 1])
    b = 0.5 * (p[:, 0, 0] - p[:, 1, 1])
    c = 0.5 * (p[:, 0, 1] + p[:, 1, 0])
    return np.column_stack([a, b, c])


def _roots(coef: np.ndarray, touch: float = -1.0) -> np.ndarray:
    """Angles in [0, pi) where a + b cos 2t + c sin 2t vanishes with a sign change.

    With ``touch >= 0`` tangential zeros (within ``touch``) are included too.
    """
    a, b, c = coef[:, 0], coef[:, 1], coef[:, 2]
    r = np.hypot(b, c)
    ok = (r > np.abs(a)) if touch < 0 else (r > 0) & (r >= np.abs(a) - touch)
    if not np.any(ok):
        return np.zeros(0)
    phi = np.arctan2(c[ok], b[ok])
    delta = np.arccos(np.clip(-a[ok] / r[ok], -1.0, 1.0))
    t = np.concatenate([(phi + delta) / 2, (phi - delta) / 2])
    return np.mod(t, np.pi)


def _eval(coef: np.ndarray, t: np.ndarray) -> np.ndarray:
    # rows: constraints, cols: angles
    return coef[:, :1] + coef[:, 1:2] * np.cos(2 * t) + coef[:, 2:3] * np.sin(2 * t)


def _angle_sweep(c: ConeConjunction, opt: CheckOptions) -> FeasibilityVerdict:
    sc = _trig_coeffs(c.strict_pos)
    rc = _trig_coeffs(c.nonpos)
    cuts = np.sort(np.concatenate([[0.0], _roots(sc), _roots(rc)]))
    lo = cuts
    hi = np.append(cuts[1:], np.pi)
    mids = 0.5 * (lo + hi)
    good = np.ones(mids.shape, dtype=bool)
    if len(sc):
        good &= np.all(_eval(sc, mids) > 0, axis=0)
    if len(rc):
        good &= np.all(_eval(rc, mids) <= 0, axis=0)
    if not np.any(good):
        return _boundary_rays(c, sc, rc, opt)

    # best point on each admissible arc
    best_t, best_m = None, -np.inf
    for i in np.flatnonzero(good):
        ts = np.linspace(lo[i], hi[i], 11)[1:-1]
        vals = _eval(sc, ts) if len(sc) else np.full((1, len(ts)), np.inf)
        if len(rc):
            vals = np.vstack([vals, -_eval(rc, ts)])
            ok = np.all(_eval(rc, ts) <= 0, axis=0)
        else:
            ok = np.ones(len(ts), dtype=bool)
        score = np.where(ok, vals.min(axis=0), -np.inf)
        j = int(np.argmax(score))
        if score[j] > best_m:
            best_m, best_t = float(score[j]), float(ts[j])
    if best_t is None:
        best_t = float(mids[np.flatnonzero(good)[0]])
    x = _snap(c, np.array([np.cos(best_t), np.sin(best_t)]), opt.margin_tol)
    s, _ = c.values(x)
    margin = float(s.min()) if len(s) else float("inf")
    if c.satisfied_by(x, opt.margin_tol):
        return FeasibilityVerdict(Status.SAT, Backend.ANGLE_SWEEP.value, witness=x, margin=margin)
    width = float((hi - lo)[good].max())
    return FeasibilityVerdict(
        Status.UNKNOWN, Backend.ANGLE_SWEEP.value, margin=margin,
        diagnostic=f"admissible arc of width {width:.3g} rad but margin {margin:.3g} below tolerance")


BOUNDARY_TOL = 1e-12


def _snap(c: ConeConjunction, x: np.ndarray, margin_tol: float) -> np.ndarray:
    """``x`` with rounding-level components zeroed, if that is what makes it valid."""
    if c.satisfied_by(x, margin_tol):
        return x
    y = np.where(np.abs(x) < 1e-15, 0.0, x)
    return y / np.linalg.norm(y) if np.any(y) and c.satisfied_by(y, margin_tol) else x


def _boundary_rays(c: ConeConjunction, sc, rc, opt: CheckOptions) -> FeasibilityVerdict:
    """No open arc is admissible; the set may still be a few rays where some x'Rx = 0."""
    name = Backend.ANGLE_SWEEP.value
    ts = _roots(rc, touch=BOUNDARY_TOL) if len(rc) else np.zeros(0)
    if len(ts) == 0:
        return FeasibilityVerdict(Status.UNSAT, name)
    ok = np.ones(len(ts), dtype=bool)
    if len(sc):
        ok &= np.all(_eval(sc, ts) > opt.margin_tol, axis=0)
    ok &= np.all(_eval(rc, ts) <= BOUNDARY_TOL, axis=0)
    if not np.any(ok):
        return FeasibilityVerdict(Status.UNSAT, name)
    for t in ts[ok]:
        x = _snap(c, np.array([np.cos(t), np.sin(t)]), opt.margin_tol)
        if c.satisfied_by(x, opt.margin_tol):
            s, _ = c.values(x)
            return FeasibilityVerdict(Status.SAT, name, witness=x,
                                      margin=float(s.min()) if len(s) else float("inf"))
    return FeasibilityVerdict(Status.UNKNOWN, name,
                              diagnostic="feasible set is a union of isolated rays on constraint boundaries")


# -- sphere sampling -------------------------------------------------------------

def sphere_points(n: int, count: int, seed: int = 0) -> np.ndarray:
    """Deterministic quasi-uniform unit vectors (scrambled Sobol through the normal quantile)."""
    from scipy.stats import norm, qmc

    if n == 1:
        return np.array([[1.0], [-1.0]])
    m = int(np.ceil(np.log2(max(count, 2))))
    u = qmc.Sobol(d=n, scramble=True, seed=seed).random_base2(m)[:count]
    z = norm.ppf(np.clip(u, 1e-12, 1 - 1e-12))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def _margins(stack: np.ndarray, signs: np.ndarray, x: np.ndarray) -> np.ndarray:
    # x: (N, n) -> (N, constraints); strict constraints keep sign, nonpos flipped
    return np.einsum("ni,cij,nj->nc", x, stack, x) * signs


def _ascend(stack, signs, x, steps: int, step: float = 0.1):
    """Projected ascent on the smallest margin over the unit sphere."""
    x = x / np.linalg.norm(x)
    cur = _margins(stack, signs, x[None, :])[0]
    for _ in range(steps):
        i = int(np.argmin(cur))
        g = 2.0 * signs[i] * (stack[i] @ x)
        g -= (g @ x) * x
        gn = np.linalg.norm(g)
        if gn == 0:
            break
        cand = x + step * g / gn
        cand /= np.linalg.norm(cand)
        m = _margins(stack, signs, cand[None, :])[0]
        if m.min() > cur[i]:
            x, cur = cand, m
        else:
            step *= 0.5
    return x, float(cur.min())


def _polish(c: ConeConjunction, x: np.ndarray, steps: int, step: float) -> np.ndarray:
    mats = list(c.strict_pos) + list(c.nonpos)
    if not mats:
        return x
    signs = np.array([1.0] * len(c.strict_pos) + [-1.0] * len(c.nonpos))
    return _ascend(np.array(mats), signs, x, steps, step)[0]


def _sphere_sampling(c: ConeConjunction, opt: CheckOptions) -> FeasibilityVerdict:
    n = c.dim
    mats = list(c.strict_pos) + list(c.nonpos)
    if not mats:
        x = np.zeros(n)
        x[0] = 1.0
        return FeasibilityVerdict(Status.SAT, Backend.SPHERE_SAMPLING.value, witness=x, margin=float("inf"))
    stack = np.array(mats)
    signs = np.array([1.0] * len(c.strict_pos) + [-1.0] * len(c.nonpos))
    pts = sphere_points(n, opt.samples, opt.seed)
    score = _margins(stack, signs, pts).min(axis=1)
    order = np.argsort(-score)[: min(8, len(pts))]
    best_x, best_s = pts[order[0]], score[order[0]]
    for start in order:
        x, sc = _ascend(stack, signs, pts[start], opt.refine_steps)
        if sc > best_s:
            best_x, best_s = x, sc
    if c.satisfied_by(best_x, opt.margin_tol):
        sv, _ = c.values(best_x)
        margin = float(sv.min()) if len(sv) else float("inf")
        return FeasibilityVerdict(Status.SAT, Backend.SPHERE_SAMPLING.value, witness=best_x, margin=margin)
    return FeasibilityVerdict(Status.UNKNOWN, Backend.SPHERE_SAMPLING.value, margin=float(best_s),
                              diagnostic="no sampled direction satisfied every constraint")


# -- SMT-LIB export ------------------------------------------------------------------

def _num(v: float) -> str:
    f = Fraction(float(v))
    body = str(f.numerator if f.numerator >= 0 else -f.numerator)
    if f.denominator != 1:
        body = f"(/ {body}.0 {f.denominator}.0)"
    else:
        body = f"{body}.0"
    return f"(- {body})" if f < 0 else body


def _poly(p: np.ndarray) -> str:
    n = p.shape[0]
    terms = []
    for i in range(n):
        if p[i, i] != 0:
            terms.append(f"(* {_num(p[i, i])} x_{i + 1} x_{i + 1})")
        for j in range(i + 1, n):
            v = p[i, j] + p[j, i]
            if v != 0:
                terms.append(f"(* {_num(v)} x_{i + 1} x_{j + 1})")
    if not terms:
        return "0.0"
    return terms[0] if len(terms) == 1 else "(+ " + " ".join(terms) + ")"


def smtlib_script(c: ConeConjunction, decimal_models: bool = False) -> str:
    """QF_NRA script asserting the conjunction on the unit sphere."""
    n = c.dim
    lines = ["(set-option :produce-models true)"]
    if decimal_models:
        lines.append("(set-option :pp.decimal true)")
    lines.append("(set-logic QF_NRA)")
    lines += [f"(declare-const x_{i + 1} Real)" for i in range(n)]
    lines += [f"(assert (> {_poly(p)} 0.0))" for p in c.strict_pos]
    lines += [f"(assert (<= {_poly(r)} 0.0))" for r in c.nonpos]
    norm = " ".join(f"(* x_{i + 1} x_{i + 1})" for i in range(n))
    lines.append(f"(assert (= {'(+ ' + norm + ')' if n > 1 else norm} 1.0))")
    lines.append("(check-sat)")
    lines.append("(get-value (" + " ".join(f"x_{i + 1}" for i in range(n)) + "))")
    return "\n".join(lines) + "\n"


_TOKEN = re.compile(r"\(|\)|[^\s()]+")


def _sexpr(text: str):
    stack: list[list] = [[]]
    for tok in _TOKEN.findall(text):
        if tok == "(":
            stack.append([])
        elif tok == ")":
            if len(stack) > 1:
                done = stack.pop()
                stack[-1].append(done)
        else:
            stack[-1].append(tok)
    return stack[0]


def _to_float(e) -> float:
    if isinstance(e, str):
        return float(e.rstrip("?"))
    op, *args = e
    if op == "-":
        return -_to_float(args[0]) if len(args) == 1 else _to_float(args[0]) - _to_float(args[1])
    if op == "/":
        return _to_float(args[0]) / _to_float(args[1])
    raise ValueError(f"cannot read solver value {e!r}")


def parse_solver_output(text: str, dim: int) -> tuple[Status, Optional[np.ndarray]]:
    status = None
    for line in text.splitlines():
        word = line.strip()
        if word in ("sat", "unsat", "unknown"):
            status = Status(word)
            break
    if status is None:
        raise ValueError("solver output holds no sat/unsat/unknown answer")
    if status is not Status.SAT:
        return status, None
    values = {}
    for item in _sexpr(text):
        if isinstance(item, list):
            for pair in item:
                if isinstance(pair, list) and len(pair) == 2 and isinstance(pair[0], str):
                    try:
                        values[pair[0]] = _to_float(pair[1])
                    except (ValueError, IndexError):
                        pass
    try:
        x = np.array([values[f"x_{i + 1}"] for i in range(dim)])
    except KeyError:
        return status, None
    return status, x


def _smtlib(c: ConeConjunction, opt: CheckOptions) -> FeasibilityVerdict:
    cmd = opt.solver_command()
    if shutil.which(cmd[0]) is None and not os.path.exists(cmd[0]):
        raise SolverError(f"SMT solver command not found: {cmd[0]!r} (set {SOLVER_ENV} or solver_cmd)")
    decimal = os.path.basename(cmd[0]).startswith("z3")
    script = smtlib_script(c, decimal_models=decimal)
    name = Backend.SMTLIB.value
    try:
        proc = subprocess.run(cmd, input=script, capture_output=True, text=True,
                              timeout=opt.solver_timeout)
    except subprocess.TimeoutExpired:
        return FeasibilityVerdict(Status.UNKNOWN, name, diagnostic=f"solver timeout after {opt.solver_timeout}s")
    except OSError as exc:
        raise SolverError(f"cannot run SMT solver {cmd!r}: {exc}") from exc
    try:
        status, x = parse_solver_output(proc.stdout, c.dim)
    except ValueError as exc:
        return FeasibilityVerdict(Status.UNKNOWN, name,
                                  diagnostic=f"{exc}; stderr: {proc.stderr.strip()[:200]}")
    if status is not Status.SAT:
        return FeasibilityVerdict(status, name)
    if x is not None and np.any(x):
        x = x / np.linalg.norm(x)
        if not c.satisfied_by(x, opt.margin_tol):
            # solver models tend to sit on constraint boundaries
            x = _polish(c, x, max(opt.refine_steps, 50), step=1e-3)
        if c.satisfied_by(x, opt.margin_tol):
            s, _ = c.values(x)
            return FeasibilityVerdict(Status.SAT, name, witness=x,
                                      margin=float(s.min()) if len(s) else float("inf"))
    return FeasibilityVerdict(Status.UNKNOWN, name,
                              diagnostic="solver answered sat but its model did not re-validate numerically")
