"""Trace membership and replay-based frequency annotation.

The tree is executed as a stepwise machine. Every move fires exactly one leaf;
operator activations and branch decisions are folded into the move that fires
the first leaf below them. Node execution states are nested tuples, so the
reachable state space is finite even for loops with silent bodies, and a search
over ``(state, trace position)`` pairs always terminates.
"""
from __future__ import annotations

import heapq
from typing import NamedTuple, Sequence

from .errors import NonFittingTraceError
from .logio import EventLog
from .ptree import Operator, ProcessTree

_DONE = True
_ROOT_IDLE = None


class Move(NamedTuple):
    state: object
    leaf: int
    visits: tuple[int, ...]
    redos: int


class Machine:
    """Flattened tree with memoized move generation."""

    def __init__(self, tree: ProcessTree):
        self.tree = tree
        self.nodes: list[ProcessTree] = list(tree.nodes())
        self.children: list[tuple[int, ...]] = [()] * len(self.nodes)
        self._assign(tree, 0)
        self.operator = [n.operator for n in self.nodes]
        self.label = [n.label for n in self.nodes]
        self._start_cache: dict[int, tuple[Move, ...]] = {}
        self._step_cache: dict[tuple[int, object], tuple[Move, ...]] = {}
        self._final_cache: dict[tuple[int, object], bool] = {}

    def _assign(self, node: ProcessTree, i: int) -> int:
        nxt = i + 1
        kids = []
        for child in node.children:
            kids.append(nxt)
            nxt = self._assign(child, nxt)
        self.children[i] = tuple(kids)
        return nxt

    def start(self, n: int) -> tuple[Move, ...]:
        """Moves that activate node ``n`` from scratch."""
        cached = self._start_cache.get(n)
        if cached is not None:
            return cached
        op = self.operator[n]
        kids = self.children[n]
        moves: list[Move] = []
        if op is None:
            moves.append(Move(_DONE, n, (n,), 0))
        elif op is Operator.SEQUENCE or op is Operator.LOOP:
            for m in self.start(kids[0]):
                moves.append(Move((0, m.state), m.leaf, (n,) + m.visits, m.redos))
        elif op is Operator.XOR:
            for j, k in enumerate(kids):
                for m in self.start(k):
                    moves.append(Move((j, m.state), m.leaf, (n,) + m.visits, m.redos))
        else:
            idle = (None,) * len(kids)
            for j, k in enumerate(kids):
                for m in self.start(k):
                    state = idle[:j] + (m.state,) + idle[j + 1:]
                    moves.append(Move(state, m.leaf, (n,) + m.visits, m.redos))
        result = tuple(moves)
        self._start_cache[n] = result
        return result

    def step(self, n: int, state) -> tuple[Move, ...]:
        """Moves that continue node ``n`` from an active ``state``."""
        key = (n, state)
        cached = self._step_cache.get(key)
        if cached is not None:
            return cached
        op = self.operator[n]
        kids = self.children[n]
        moves: list[Move] = []
        if op is None:
            pass
        elif op is Operator.SEQUENCE:
            i, sub = state
            for m in self.step(kids[i], sub):
                moves.append(Move((i, m.state), m.leaf, m.visits, m.redos))
            if i + 1 < len(kids) and self.final(kids[i], sub):
                for m in self.start(kids[i + 1]):
                    moves.append(Move((i + 1, m.state), m.leaf, m.visits, m.redos))
        elif op is Operator.XOR:
            j, sub = state
            for m in self.step(kids[j], sub):
                moves.append(Move((j, m.state), m.leaf, m.visits, m.redos))
        elif op is Operator.PARALLEL:
            for j, k in enumerate(kids):
                sub = state[j]
                follow = self.start(k) if sub is None else self.step(k, sub)
                for m in follow:
                    moves.append(Move(state[:j] + (m.state,) + state[j + 1:],
                                      m.leaf, m.visits, m.redos))
        else:
            j, sub = state
            for m in self.step(kids[j], sub):
                moves.append(Move((j, m.state), m.leaf, m.visits, m.redos))
            if self.final(kids[j], sub):
                if j == 0:
                    for r in range(1, len(kids)):
                        for m in self.start(kids[r]):
                            moves.append(Move((r, m.state), m.leaf, m.visits, m.redos + 1))
                else:
                    for m in self.start(kids[0]):
                        moves.append(Move((0, m.state), m.leaf, m.visits, m.redos))
        result = tuple(moves)
        self._step_cache[key] = result
        return result

    def final(self, n: int, state) -> bool:
        """Whether node ``n`` may complete in ``state``."""
        key = (n, state)
        cached = self._final_cache.get(key)
        if cached is not None:
            return cached
        op = self.operator[n]
        kids = self.children[n]
        if op is None:
            result = state is _DONE
        elif op is Operator.SEQUENCE:
            i, sub = state
            result = i == len(kids) - 1 and self.final(kids[i], sub)
        elif op is Operator.XOR:
            j, sub = state
            result = self.final(kids[j], sub)
        elif op is Operator.PARALLEL:
            result = all(s is not None and self.final(k, s) for k, s in zip(kids, state))
        else:
            j, sub = state
            result = j == 0 and self.final(kids[0], sub)
        self._final_cache[key] = result
        return result

    def successors(self, state, pos: int, trace: Sequence[str]):
        """Moves from a root-level configuration that are consistent with ``trace``."""
        moves = self.start(0) if state is _ROOT_IDLE else self.step(0, state)
        for m in moves:
            label = self.label[m.leaf]
            if label is None:
                yield m, pos
            elif pos < len(trace) and trace[pos] == label:
                yield m, pos + 1

    def accepts(self, state, pos: int, trace: Sequence[str]) -> bool:
        return pos == len(trace) and state is not _ROOT_IDLE and self.final(0, state)


def _machine(tree) -> Machine:
    return tree if isinstance(tree, Machine) else Machine(tree)


def fits(tree: ProcessTree | Machine, trace: Sequence[str]) -> bool:
    """True iff ``trace`` belongs to the language of ``tree``."""
    machine = _machine(tree)
    trace = tuple(trace)
    seen = {(_ROOT_IDLE, 0)}
    stack = [(_ROOT_IDLE, 0)]
    while stack:
        state, pos = stack.pop()
        if machine.accepts(state, pos, trace):
            return True
        for m, nxt in machine.successors(state, pos, trace):
            key = (m.state, nxt)
            if key not in seen:
                seen.add(key)
                stack.append(key)
    return False


def replay_trace(tree: ProcessTree | Machine, trace: Sequence[str]) -> list[int]:
    """Visit counts (preorder-indexed) of the selected accepting run for one trace.

    Runs with fewer loop-redo executions are preferred; among equally cheap runs
    the one found first when exploring children left to right wins.
    Raises NonFittingTraceError if no run exists.
    """
    machine = _machine(tree)
    trace = tuple(trace)
    start = (_ROOT_IDLE, 0)
    parent: dict[tuple, tuple | None] = {start: None}
    via: dict[tuple, tuple[int, ...]] = {start: ()}
    counter = 0
    heap = [(0, counter, start)]
    best = {start: 0}
    done = set()
    furthest = 0
    while heap:
        cost, _, key = heapq.heappop(heap)
        if key in done:
            continue
        done.add(key)
        state, pos = key
        furthest = max(furthest, pos)
        if machine.accepts(state, pos, trace):
            counts = [0] * len(machine.nodes)
            while key is not None:
                for v in via[key]:
                    counts[v] += 1
                key = parent[key]
            return counts
        for m, nxt in machine.successors(state, pos, trace):
            succ = (m.state, nxt)
            c = cost + m.redos
            if succ in done or c >= best.get(succ, c + 1):
                continue
            best[succ] = c
            parent[succ] = key
            via[succ] = m.visits
            counter += 1
            heapq.heappush(heap, (c, counter, succ))
    raise NonFittingTraceError(trace, furthest)


def annotate(tree: ProcessTree, log: EventLog) -> ProcessTree:
    """Weight every node by the number of visits when replaying ``log``.

    Each distinct trace is replayed once and its counts are scaled by its
    multiplicity. Existing weights on ``tree`` are replaced.
    """
    plain = tree.strip_weights() if tree.is_annotated else tree
    machine = Machine(plain)
    totals = [0] * len(machine.nodes)
    for trace, count in log.items():
        for i, v in enumerate(replay_trace(machine, trace)):
            totals[i] += v * count
    return plain.with_weights(totals)


def verify_annotation(tree: ProcessTree, log_size: int | None = None) -> list[str]:
    """List consistency violations of a replay annotation; empty when consistent.

    Checks: choice children sum to the parent, sequence and parallel children
    equal the parent, and a loop's do-part equals loop weight plus redo weights.
    If ``log_size`` is given the root weight must equal it.
    """
    if not tree.is_annotated:
        return ["tree is not annotated"]
    problems = []
    if log_size is not None and tree.weight != log_size:
        problems.append(f"root weight {tree.weight} != log size {log_size}")
    for i, node in enumerate(tree.nodes()):
        if node.weight < 0:
            problems.append(f"node {i}: negative weight {node.weight}")
        if node.is_leaf:
            continue
        kids = [c.weight for c in node.children]
        name = f"node {i} ({node.operator.value})"
        if node.operator is Operator.XOR:
            if sum(kids) != node.weight:
                problems.append(f"{name}: children sum {sum(kids)} != {node.weight}")
        elif node.operator is Operator.LOOP:
            if kids[0] != node.weight + sum(kids[1:]):
                problems.append(
                    f"{name}: do weight {kids[0]} != {node.weight} + {sum(kids[1:])}"
                )
        else:
            for j, w in enumerate(kids):
                if w != node.weight:
                    problems.append(f"{name}: child {j} weight {w} != {node.weight}")
    return problems
