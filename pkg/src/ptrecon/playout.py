"""Play-out strategies that reconstruct an event log from a process tree.

Strategies:

``A``     uniform choices, fair-coin loops; ignores weights.
``B``     fixed branching probabilities derived once from the weights.
``C``     choices proportional to leftover weights, which every visit decrements.
``D``     like C, but draws the number of loop repetitions from a normal
          distribution with mean ``w_redo / w_loop`` and the configured variance.
``SOTA``  like C, but takes the first choice branch with leftover weight and
          plays parallel blocks sequentially.

Randomness comes from :class:`random.Random` (Mersenne Twister) seeded with
``seed + i`` for the i-th play-out; normal variates use
:meth:`random.Random.normalvariate`.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .errors import ConfigError
from .logio import EventLog
from .ptree import Operator, ProcessTree, normalize_loop


class Strategy(str, Enum):
    A = "A"
    B = "B"
    C = "C"
    D = "D"
    SOTA = "SOTA"


@dataclass(frozen=True)
class StrategyConfig:
    kind: Strategy
    variance: float | None = None
    trace_count: int | None = None
    seed: int = 0
    playouts: int = 1

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", Strategy(self.kind))
        except ValueError:
            raise ConfigError(f"unknown strategy {self.kind!r}") from None
        if self.kind is Strategy.D:
            if self.variance is None or not self.variance > 0:
                raise ConfigError("strategy D requires a positive variance")
        elif self.variance is not None:
            raise ConfigError(f"variance only applies to strategy D, not {self.kind.value}")
        if self.kind in (Strategy.A, Strategy.B):
            if self.trace_count is None or self.trace_count < 1:
                raise ConfigError(f"strategy {self.kind.value} requires a positive trace count")
        elif self.trace_count is not None:
            raise ConfigError(
                f"strategy {self.kind.value} derives the trace count from the root weight"
            )
        if self.playouts < 1:
            raise ConfigError("playouts must be positive")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")

    @property
    def name(self) -> str:
        if self.kind is Strategy.D:
            return f"D(v={self.variance:g})"
        return self.kind.value

    @property
    def needs_annotation(self) -> bool:
        return self.kind is not Strategy.A

    @property
    def uses_ledger(self) -> bool:
        return self.kind in (Strategy.C, Strategy.D, Strategy.SOTA)


class WeightLedger:
    """Leftover weights of one play-out. Decrements saturate at zero."""

    def __init__(self, weights: Sequence[int]):
        self.original = tuple(weights)
        self.values = list(weights)
        self.saturated = 0

    def decrement(self, i: int):
        if self.values[i] > 0:
            self.values[i] -= 1
        else:
            self.saturated += 1

    def __getitem__(self, i: int) -> int:
        return self.values[i]


def step_xor(kind: Strategy, weights: Sequence[int], rng: random.Random) -> tuple[int, bool]:
    """Pick a choice branch. ``weights`` are original (B) or leftover (C, D, SOTA) weights.

    Returns ``(index, fallback)``; ``fallback`` is True when every weight was zero
    and the uniform rule had to be used instead.
    """
    n = len(weights)
    if kind is Strategy.A:
        return rng.randrange(n), False
    if kind is Strategy.SOTA:
        for i, w in enumerate(weights):
            if w > 0:
                return i, False
        return rng.randrange(n), True
    total = sum(weights)
    if total <= 0:
        return rng.randrange(n), True
    r = rng.randrange(total)
    for i, w in enumerate(weights):
        if r < w:
            return i, False
        r -= w
    raise AssertionError("unreachable")


def loop_continue_probability(w: int, w_do: int) -> float:
    """``1 - w/w_do``, the chance of another redo; 0 when the do-part has no weight."""
    if w_do <= 0:
        return 0.0
    return min(1.0, max(0.0, 1.0 - w / w_do))


def sample_redo_count(w: int, w_redo: int, variance: float, rng: random.Random) -> int:
    """``min(floor(|x|), w_redo)`` with ``x ~ N(w_redo / w, variance)``."""
    mean = w_redo / w if w > 0 else float(w_redo)
    x = rng.normalvariate(mean, math.sqrt(variance))
    return min(int(abs(x)), w_redo)


@dataclass
class PlayoutStats:
    saturated_decrements: int = 0
    xor_fallbacks: int = 0
    min_ledger: int | None = None


class Player:
    """Runs one strategy over a (normalized) tree."""

    def __init__(self, tree: ProcessTree, config: StrategyConfig):
        if config.needs_annotation and not tree.is_annotated:
            raise ConfigError(f"strategy {config.kind.value} needs an annotated tree")
        tree = normalize_loop(tree)
        self.tree = tree
        self.config = config
        self.kind = config.kind
        nodes = list(tree.nodes())
        self.operator = [n.operator for n in nodes]
        self.label = [n.label for n in nodes]
        self.children: list[tuple[int, ...]] = [()] * len(nodes)
        self._index(tree, 0)
        self.weights = [n.weight or 0 for n in nodes]
        if config.uses_ledger and self.weights[0] == 0:
            raise ConfigError(f"strategy {self.kind.value} needs a positive root weight")

        # strategy B reads only these, fixed up front
        self.fixed_xor = {i: [self.weights[k] for k in self.children[i]]
                          for i, op in enumerate(self.operator) if op is Operator.XOR}
        self.fixed_loop = {
            i: loop_continue_probability(self.weights[i], self.weights[self.children[i][0]])
            for i, op in enumerate(self.operator) if op is Operator.LOOP
        }
        self.ledger: WeightLedger | None = None
        self.rng: random.Random | None = None
        self.stats = PlayoutStats()

    def _index(self, node: ProcessTree, i: int) -> int:
        nxt = i + 1
        kids = []
        for child in node.children:
            kids.append(nxt)
            nxt = self._index(child, nxt)
        self.children[i] = tuple(kids)
        return nxt

    @property
    def trace_count(self) -> int:
        if self.config.uses_ledger:
            return self.weights[0]
        return self.config.trace_count

    def play(self, seed: int | None = None) -> EventLog:
        """Generate one log. ``seed`` defaults to the configured seed."""
        self.rng = random.Random(self.config.seed if seed is None else seed)
        self.ledger = WeightLedger(self.weights) if self.config.uses_ledger else None
        traces = []
        for _ in range(self.trace_count):
            out: list[str] = []
            self._run(0, out)
            traces.append(tuple(out))
        if self.ledger is not None:
            self.stats.saturated_decrements += self.ledger.saturated
            low = min(self.ledger.values)
            if self.stats.min_ledger is None or low < self.stats.min_ledger:
                self.stats.min_ledger = low
        return EventLog.from_traces(traces)

    def _run(self, n: int, out: list[str]):
        if self.ledger is not None:
            self.ledger.decrement(n)
        op = self.operator[n]
        if op is None:
            if self.label[n] is not None:
                out.append(self.label[n])
            return
        kids = self.children[n]
        if op is Operator.SEQUENCE:
            for k in kids:
                self._run(k, out)
        elif op is Operator.XOR:
            self._run(kids[self.step_xor(n)], out)
        elif op is Operator.PARALLEL:
            if self.kind is Strategy.SOTA or len(kids) == 1:
                for k in kids:
                    self._run(k, out)
            else:
                subs = []
                for k in kids:
                    sub: list[str] = []
                    self._run(k, sub)
                    subs.append(sub)
                out.extend(interleave(subs, self.rng))
        else:
            self._loop(n, kids[0], kids[1], out)

    def step_xor(self, n: int) -> int:
        kids = self.children[n]
        if self.kind is Strategy.B:
            weights = self.fixed_xor[n]
        elif self.ledger is not None:
            weights = [self.ledger[k] for k in kids]
        else:
            weights = [0] * len(kids)
        i, fallback = step_xor(self.kind, weights, self.rng)
        if fallback and self.kind is not Strategy.A:
            self.stats.xor_fallbacks += 1
        return i

    def _loop(self, n: int, do: int, redo: int, out: list[str]):
        rng = self.rng
        self._run(do, out)
        if self.kind is Strategy.A:
            while rng.random() < 0.5:
                self._run(redo, out)
                self._run(do, out)
            return
        if self.kind is Strategy.B:
            p = self.fixed_loop[n]
            while rng.random() < p:
                self._run(redo, out)
                self._run(do, out)
            return
        ledger = self.ledger
        if self.kind is Strategy.D:
            w, w1, w2 = ledger[n], ledger[do], ledger[redo]
            if w1 != w2 and w1 > 0:
                for _ in range(sample_redo_count(w, w2, self.config.variance, rng)):
                    if ledger[do] == 0:
                        break
                    self._run(redo, out)
                    self._run(do, out)
                return
        while self._leftover_continue(n, do, redo):
            self._run(redo, out)
            self._run(do, out)

    def _leftover_continue(self, n: int, do: int, redo: int) -> bool:
        ledger = self.ledger
        w, w1, w2 = ledger[n], ledger[do], ledger[redo]
        if w1 == w2:
            return w1 > 0
        if w1 == 0:
            return False
        p = loop_continue_probability(w, w1)
        return p > 0 and self.rng.random() < p


def interleave(subs: Sequence[Sequence[str]], rng: random.Random) -> list[str]:
    """Merge sub-traces, repeatedly emitting the next event of a uniformly chosen
    sub-trace that still has events left."""
    cursors = [0] * len(subs)
    active = [i for i, s in enumerate(subs) if s]
    out = []
    while active:
        j = rng.randrange(len(active)) if len(active) > 1 else 0
        i = active[j]
        out.append(subs[i][cursors[i]])
        cursors[i] += 1
        if cursors[i] == len(subs[i]):
            active.pop(j)
    return out


def playout(tree: ProcessTree, config: StrategyConfig) -> EventLog:
    """One play-out of ``tree`` with ``config.seed``."""
    return Player(tree, config).play()


def run_experiment(tree: ProcessTree, config: StrategyConfig) -> list[EventLog]:
    """``config.playouts`` independent logs; the i-th uses seed ``config.seed + i``."""
    player = Player(tree, config)
    return [player.play(config.seed + i) for i in range(config.playouts)]
