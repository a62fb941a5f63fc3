"""l-complete traffic models of a PETC system.

States are the inter-sample sequences of length ``l`` that some state of the
concrete system produces; a state ``k s`` leads to every state ``s k'``
(domino rule) and outputs its first symbol.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .feasibility import CheckOptions, FeasibilityVerdict, Status, check, pullback
from .petc_model import PetcSystem

log = logging.getLogger(__name__)

Seq = tuple  # tuple[int, ...]


class AbstractionError(RuntimeError):
    pass


class BudgetExceeded(AbstractionError):
    pass


@dataclass(frozen=True)
class BuildBudget:
    max_states: int = 100_000
    max_checks: int = 2_000_000
    workers: int = 1


@dataclass
class TrafficModel:
    l: int
    h: float
    states: list
    succ: dict
    unknown: set = field(default_factory=set)
    removed: list = field(default_factory=list)
    checks: int = 0

    @property
    def edges(self) -> list:
        return [(s, t) for s in self.states for t in self.succ[s]]

    @property
    def exact(self) -> bool:
        return not self.unknown

    def output(self, state: Seq) -> int:
        return state[0]

    def weight(self, edge) -> float:
        return self.h * edge[0][0]

    def to_dict(self) -> dict:
        return {
            "l": self.l,
            "h": self.h,
            "exact": self.exact,
            "states": [list(s) for s in self.states],
            "outputs": [s[0] for s in self.states],
            "edges": [[list(s), list(t)] for s, t in self.edges],
            "unknown_states": sorted(list(s) for s in self.unknown),
        }

    def dumps(self) -> str:
        """Deterministic JSON, one top-level key per line."""
        d = self.to_dict()
        body = ",\n".join(f" {json.dumps(k)}: {json.dumps(v)}" for k, v in d.items())
        return "{\n" + body + "\n}\n"

    @classmethod
    def from_dict(cls, d: dict) -> "TrafficModel":
        states = sorted(tuple(s) for s in d["states"])
        succ = {s: [] for s in states}
        for a, b in d["edges"]:
            succ[tuple(a)].append(tuple(b))
        for s in states:
            succ[s].sort()
        return cls(l=int(d["l"]), h=float(d["h"]), states=states, succ=succ,
                   unknown={tuple(s) for s in d.get("unknown_states", [])})


def from_states(states: Iterable[Seq], h: float = 1.0) -> TrafficModel:
    """Domino-rule model over a given set of equal-length sequences."""
    states = sorted(set(tuple(s) for s in states))
    if not states:
        raise AbstractionError("no feasible inter-sample sequences")
    l = len(states[0])
    if any(len(s) != l for s in states):
        raise AbstractionError("states of unequal length")
    by_prefix: dict = {}
    for s in states:
        by_prefix.setdefault(s[:-1], []).append(s)
    succ = {s: list(by_prefix.get(s[1:], [])) for s in states}
    return TrafficModel(l=l, h=h, states=states, succ=succ)


def _prune_blocking(model: TrafficModel) -> TrafficModel:
    alive = set(model.states)
    removed = []
    changed = True
    while changed:
        changed = False
        for s in list(alive):
            if not any(t in alive for t in model.succ[s]):
                alive.discard(s)
                removed.append(s)
                changed = True
    if removed:
        log.info("l=%d: removed %d blocking states", model.l, len(removed))
    states = sorted(alive)
    if not states:
        raise AbstractionError("every state was blocking; model is empty")
    succ = {s: [t for t in model.succ[s] if t in alive] for s in states}
    return TrafficModel(l=model.l, h=model.h, states=states, succ=succ,
                        unknown=model.unknown & alive, removed=model.removed + removed,
                        checks=model.checks)


def _run_checks(sys: PetcSystem, cands: list, options: CheckOptions, budget: BuildBudget) -> list:
    def one(seq):
        return check(pullback(sys, seq), options)

    if budget.workers > 1 and len(cands) > 1:
        with ThreadPoolExecutor(max_workers=budget.workers) as pool:
            return list(pool.map(one, cands))
    return [one(c) for c in cands]


def _assemble(sys, cands, verdicts, l, prev_checks, unknown_prev, budget) -> TrafficModel:
    keep, unknown = [], set()
    for seq, v in zip(cands, verdicts):
        if v.feasible:
            keep.append(seq)
            if v.status is Status.UNKNOWN or seq[:-1] in unknown_prev or seq[1:] in unknown_prev:
                unknown.add(seq)
    if len(keep) > budget.max_states:
        raise BudgetExceeded(f"l={l}: {len(keep)} states exceed max_states={budget.max_states}")
    model = from_states(keep, sys.h)
    model.unknown = unknown
    model.checks = prev_checks + len(cands)
    return _prune_blocking(model)


def build(sys: PetcSystem, l: int, options: CheckOptions = CheckOptions(),
          budget: BuildBudget = BuildBudget()) -> TrafficModel:
    """Build S_l by refining S_1 one level at a time."""
    if l < 1:
        raise AbstractionError(f"depth must be >= 1, got {l}")
    cands = [(k,) for k in range(1, sys.kbar + 1)]
    verdicts = _run_checks(sys, cands, options, budget)
    model = _assemble(sys, cands, verdicts, 1, 0, set(), budget)
    while model.l < l:
        model = refine(model, sys, options, budget)
    return model


def refine(model: TrafficModel, sys: PetcSystem, options: CheckOptions = CheckOptions(),
           budget: BuildBudget = BuildBudget()) -> TrafficModel:
    """S_{l+1} from S_l: extend each state by one symbol.

    Only extensions ``s k'`` whose suffix ``s[1:] k'`` is a state of S_l are
    checked, since the suffix of a realizable sequence is realizable.
    """
    present = set(model.states)
    cands = []
    for s in model.states:
        for k in range(1, sys.kbar + 1):
            if s[1:] + (k,) in present:
                cands.append(s + (k,))
    if model.checks + len(cands) > budget.max_checks:
        raise BudgetExceeded(f"l={model.l + 1}: feasibility check budget {budget.max_checks} exhausted")
    verdicts = _run_checks(sys, cands, options, budget)
    return _assemble(sys, cands, verdicts, model.l + 1, model.checks, model.unknown, budget)
