"""The resampling engine: k-step and unbounded runs with limited randomness.

Every vertex in the same partition class reads the same base-b digit
stream; a vertex's personal resample counter indexes into that stream.
The independence function is greedy over a fixed vertex order, so a whole
run is a deterministic function of (instance, partition, order, f, tape).
"""

from __future__ import annotations

import hashlib
import itertools
import json
import random
from dataclasses import dataclass, field
from typing import Sequence

from .graphs import (
    LocalRule,
    Partition,
    RelGraph,
    VariableGraph,
    Word,
    build_rel,
    greedy_mis,
    params,
    restriction_word,
    violating_set,
)


class TapeExhausted(Exception):
    """A finite tape was asked for a digit beyond its width."""


class RandomTape:
    """Source of base-b digits, one stream per partition class.

    Finite mode is an immutable p-by-k digit matrix.  Stream mode maps
    (seed, part, position) to a digit through a keyed hash with rejection
    sampling, so any digit is addressable without generating predecessors
    and the digits are uniform over 0..b-1.
    """

    def __init__(self, b: int, *, digits: tuple[tuple[int, ...], ...] | None = None,
                 seed: int | None = None):
        if b < 1:
            raise ValueError("alphabet size must be at least 1")
        if (digits is None) == (seed is None):
            raise ValueError("exactly one of digits/seed must be given")
        self.b = b
        self.digits = digits
        self.seed = seed
        self._key = None if seed is None else seed.to_bytes(16, "big", signed=True)
        if digits is not None:
            widths = {len(row) for row in digits}
            if len(widths) > 1:
                raise ValueError("finite tape streams must share one width")
            for row in digits:
                if any(not 0 <= d < b for d in row):
                    raise ValueError("finite tape digit outside alphabet")

    @classmethod
    def finite(cls, b: int, digits: Sequence[Sequence[int]]) -> "RandomTape":
        return cls(b, digits=tuple(tuple(row) for row in digits))

    @classmethod
    def stream(cls, b: int, seed: int) -> "RandomTape":
        return cls(b, seed=seed)

    @classmethod
    def finite_random(cls, b: int, parts: int, width: int, seed: int) -> "RandomTape":
        src = cls.stream(b, seed)
        return cls.finite(b, [[src.digit(i, j) for j in range(width)] for i in range(parts)])

    @property
    def is_finite(self) -> bool:
        return self.digits is not None

    @property
    def width(self) -> int | None:
        if self.digits is None:
            return None
        return len(self.digits[0]) if self.digits else 0

    @property
    def part_count(self) -> int | None:
        return len(self.digits) if self.digits is not None else None

    def digit(self, part: int, pos: int) -> int:
        if self.digits is not None:
            if part >= len(self.digits) or pos >= len(self.digits[part]):
                raise TapeExhausted(f"tape has no digit at part {part}, position {pos}")
            return self.digits[part][pos]
        if self.b == 1:
            return 0
        # Reject the top sliver of the 64-bit range so digits are exactly uniform.
        limit = (1 << 64) - ((1 << 64) % self.b)
        for attempt in itertools.count():
            msg = b"%d:%d:%d" % (part, pos, attempt)
            h = hashlib.blake2b(msg, key=self._key, digest_size=8).digest()
            w = int.from_bytes(h, "big")
            if w < limit:
                return w % self.b

    def prefix(self, parts: int, width: int) -> "RandomTape":
        """Materialize a finite p-by-k tape from this source."""
        return RandomTape.finite(
            self.b, [[self.digit(i, j) for j in range(width)] for i in range(parts)]
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RandomTape):
            return NotImplemented
        if self.is_finite and other.is_finite:
            return self.b == other.b and self.digits == other.digits
        return self.b == other.b and self.seed == other.seed

    def __repr__(self) -> str:
        if self.is_finite:
            return f"RandomTape(finite {self.part_count}x{self.width}, b={self.b})"
        return f"RandomTape(stream seed={self.seed}, b={self.b})"


class MtaSystem:
    """Everything a run depends on besides the initial assignment and tape."""

    def __init__(self, graph: VariableGraph, rule: LocalRule, rel: RelGraph,
                 partition: Partition, order: Sequence[int]):
        if rule.vertex_count != graph.vertex_count:
            raise ValueError("rule does not cover the graph")
        if partition.vertex_count != graph.vertex_count:
            raise ValueError("partition does not cover the graph")
        if sorted(order) != list(range(graph.vertex_count)):
            raise ValueError("order must be a permutation of the vertices")
        self.graph = graph
        self.rule = rule
        self.rel = rel
        self.partition = partition
        self.order = tuple(order)

    @classmethod
    def build(cls, graph: VariableGraph, rule: LocalRule, partition: Partition,
              order: Sequence[int] | None = None) -> "MtaSystem":
        if order is None:
            order = range(graph.vertex_count)
        return cls(graph, rule, build_rel(graph), partition, order)

    @property
    def b(self) -> int:
        return self.rule.b

    @property
    def p(self) -> int:
        return self.partition.part_count

    def independent_violated(self, violated: set[int]) -> set[int]:
        return greedy_mis(self.rel.adj_noself, violated, self.order)


@dataclass(frozen=True)
class RunState:
    step: int
    assignment: tuple[int, ...]
    counters: tuple[int, ...]


@dataclass
class RunTrace:
    """History of a run: assignments, counters and resample sets per step."""

    system: MtaSystem
    tape: RandomTape | None
    assignments: list[tuple[int, ...]] = field(default_factory=list)
    counters: list[tuple[int, ...]] = field(default_factory=list)
    resampled: list[frozenset[int]] = field(default_factory=list)
    status: str = "ok"  # ok | satisfied | cap_exceeded | tape_exhausted

    @property
    def k(self) -> int:
        return len(self.resampled)

    @property
    def initial(self) -> tuple[int, ...]:
        return self.assignments[0]

    @property
    def final(self) -> tuple[int, ...]:
        return self.assignments[-1]

    @property
    def h_final(self) -> tuple[int, ...]:
        return self.counters[-1]

    @property
    def max_resamples(self) -> int:
        return max(self.h_final, default=0)

    def used_unused(self, x: int) -> tuple[Word, Word]:
        return used_unused(self, x)

    def to_jsonl(self) -> str:
        lines = []
        for j, res in enumerate(self.resampled):
            digest = hashlib.sha256(repr(self.counters[j + 1]).encode()).hexdigest()[:16]
            lines.append(json.dumps(
                {"step": j, "resampled": sorted(res), "counters_digest": digest},
                separators=(",", ":"),
            ))
        return "\n".join(lines) + ("\n" if lines else "")


def step(system: MtaSystem, state: RunState, tape: RandomTape) -> tuple[RunState, frozenset[int]]:
    """One resampling round.

    Computes the violated set, picks its greedy maximal independent subset,
    and redraws every variable read by that subset from its part's stream at
    the variable's counter position.  Raises TapeExhausted before mutating
    anything if the tape is too short.
    """
    violated = violating_set(system.graph, system.rule, state.assignment)
    chosen = system.independent_violated(violated)
    if not chosen:
        return RunState(state.step + 1, state.assignment, state.counters), frozenset()
    targets = sorted({v for x in chosen for v in system.graph.var(x)})
    part_of = system.partition.part_of
    fresh = {v: tape.digit(part_of[v], state.counters[v]) for v in targets}
    assignment = list(state.assignment)
    counters = list(state.counters)
    for v in targets:
        assignment[v] = fresh[v]
        counters[v] += 1
    return RunState(state.step + 1, tuple(assignment), tuple(counters)), frozenset(chosen)


def _run(system: MtaSystem, f: Sequence[int], tape: RandomTape | None, *,
         max_steps: int, stop_when_satisfied: bool,
         rng: random.Random | None = None) -> RunTrace:
    graph, rule = system.graph, system.rule
    n = graph.vertex_count
    assignment = list(f)
    if len(assignment) != n:
        raise ValueError("initial assignment has wrong length")
    if any(not 0 <= d < system.b for d in assignment):
        raise ValueError("initial assignment has digits outside the alphabet")
    if tape is None and rng is None:
        raise ValueError("a tape is required unless running the classic baseline")
    counters = [0] * n
    trace = RunTrace(system, tape)
    trace.assignments.append(tuple(assignment))
    trace.counters.append(tuple(counters))
    part_of = system.partition.part_of

    violated = violating_set(graph, rule, assignment)
    support = set(rule.support)
    for _ in range(max_steps):
        if stop_when_satisfied and not violated:
            trace.status = "satisfied"
            return trace
        chosen = system.independent_violated(violated)
        if not chosen:
            trace.resampled.append(frozenset())
            trace.assignments.append(tuple(assignment))
            trace.counters.append(tuple(counters))
            continue
        targets = sorted({v for x in chosen for v in graph.var(x)})
        if rng is not None:
            fresh = {v: rng.randrange(system.b) for v in targets}
        else:
            try:
                fresh = {v: tape.digit(part_of[v], counters[v]) for v in targets}
            except TapeExhausted:
                trace.status = "tape_exhausted"
                return trace
        for v in targets:
            assignment[v] = fresh[v]
            counters[v] += 1
        trace.resampled.append(frozenset(chosen))
        trace.assignments.append(tuple(assignment))
        trace.counters.append(tuple(counters))
        # Only constraints reading a redrawn variable can change status.
        dirty = {y for x in chosen for y in system.rel.nbrs[x] if y in support}
        violated -= dirty
        for y in dirty:
            if restriction_word(graph, assignment, y) not in rule.allowed[y]:
                violated.add(y)
    if stop_when_satisfied:
        trace.status = "satisfied" if not violated else "cap_exceeded"
    return trace


def run_k(system: MtaSystem, f: Sequence[int], k: int, tape: RandomTape) -> RunTrace:
    """Exactly k rounds (no-op rounds included once the rule is satisfied).

    Extending the tape extends the trace: the first k states of a longer run
    with an extending tape coincide with this one.
    """
    return _run(system, f, tape, max_steps=k, stop_when_satisfied=False)


def run_until_satisfied(system: MtaSystem, f: Sequence[int], tape: RandomTape,
                        step_cap: int) -> RunTrace:
    """Run until nothing is violated, the cap is hit, or the tape runs out."""
    return _run(system, f, tape, max_steps=step_cap, stop_when_satisfied=True)


def classic_parallel_mta(system: MtaSystem, f: Sequence[int], seed: int,
                         step_cap: int) -> RunTrace:
    """Baseline: identical loop, but every redraw uses a fresh independent
    digit instead of the shared per-part streams."""
    rng = random.Random(seed)
    return _run(system, f, None, max_steps=step_cap, stop_when_satisfied=True, rng=rng)


def used_unused(trace: RunTrace, x: int) -> tuple[Word, Word]:
    """Split stream pi(x) of a finite-length run into the consumed prefix
    (the digits the run read at x) and the untouched suffix up to k-1."""
    if trace.tape is None:
        raise ValueError("trace has no tape (classic baseline run)")
    part = trace.system.partition.part_of[x]
    h = trace.h_final[x]
    k = trace.k
    used = tuple(trace.tape.digit(part, j) for j in range(h))
    unused = tuple(trace.tape.digit(part, j) for j in range(h, k))
    return used, unused


def pad_uniform(system: MtaSystem) -> tuple[MtaSystem, int]:
    """Attach dummy variables so every support vertex reads exactly D variables.

    Dummy (x, i) occupies slot i of x's padded var list; allowed words are
    extended with every digit combination on the dummy slots, so membership
    depends only on the original coordinates.  The partition gains fresh
    parts indexed by (original part of x, slot), and the vertex order keeps
    the originals first.  Returns the padded system and the original vertex
    count; a run on the padded system consumes streams 0..p-1 exactly like
    the original run, so per-original-vertex resample counts agree for any
    shared tape prefix.
    """
    graph, rule = system.graph, system.rule
    n = graph.vertex_count
    d_max = params(graph, rule, system.rel).d
    support = set(rule.support)
    out_adj = [list(row) for row in graph.out_adj]
    allowed: list[frozenset[Word]] = list(rule.allowed)
    p = system.partition.part_count
    part_of = list(system.partition.part_of)
    next_id = n
    for x in sorted(support):
        deficit = d_max - len(graph.var(x))
        if deficit <= 0:
            continue
        suffixes = list(itertools.product(range(rule.b), repeat=deficit))
        allowed[x] = frozenset(w + s for w in rule.allowed[x] for s in suffixes)
        for slot in range(len(graph.var(x)), d_max):
            out_adj[x].append(next_id)
            out_adj.append([])
            allowed.append(frozenset([()]))
            part_of.append(p + slot * p + system.partition.part_of[x])
            next_id += 1
    padded_graph = VariableGraph(out_adj)
    padded_rule = LocalRule.for_graph(padded_graph, rule.b, allowed)
    padded_partition = Partition(p * (d_max + 1) if next_id > n else p, part_of)
    order = list(system.order) + list(range(n, next_id))
    return MtaSystem.build(padded_graph, padded_rule, padded_partition, order), n
