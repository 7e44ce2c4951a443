"""Process trees: data model, text format, loop normalization and bounded language.

Text grammar::

    node    := ( op "(" node ("," node)* ")" | quoted | "tau" ) [ ":" int ]
    op      := "->" | "X" | "+" | "*"
    quoted  := "'" ( [^'\\] | "\\'" | "\\\\" )+ "'"

``->`` is sequence, ``X`` exclusive choice, ``+`` parallel and ``*`` loop.
Whitespace between tokens is ignored.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator, Sequence

from .errors import InvalidTreeError, LanguageTooLarge, TreeSyntaxError

SILENT = "tau"

Trace = tuple[str, ...]


class Operator(str, Enum):
    SEQUENCE = "->"
    XOR = "X"
    PARALLEL = "+"
    LOOP = "*"


@dataclass(frozen=True)
class ProcessTree:
    """A process tree node.

    Leaves have ``operator=None``; an activity leaf carries a ``label``, a silent
    leaf has ``label=None``. ``weight`` is the optional frequency annotation.
    """

    operator: Operator | None = None
    label: str | None = None
    children: tuple[ProcessTree, ...] = ()
    weight: int | None = None

    def __post_init__(self):
        if self.operator is None:
            if self.children:
                raise InvalidTreeError("leaf nodes cannot have children")
            if self.label is not None:
                if not isinstance(self.label, str) or not self.label:
                    raise InvalidTreeError("activity labels must be non-empty strings")
                if self.label == SILENT:
                    raise InvalidTreeError(f"{SILENT!r} is reserved for the silent activity")
        else:
            if self.label is not None:
                raise InvalidTreeError("operator nodes cannot carry a label")
            if not isinstance(self.children, tuple):
                object.__setattr__(self, "children", tuple(self.children))
            minimum = 2 if self.operator is Operator.LOOP else 1
            if len(self.children) < minimum:
                raise InvalidTreeError(
                    f"{self.operator.name.lower()} needs at least {minimum} "
                    f"child{'ren' if minimum > 1 else ''}"
                )
        if self.weight is not None:
            if isinstance(self.weight, bool) or not isinstance(self.weight, int):
                raise InvalidTreeError(f"weight must be an integer, got {self.weight!r}")
            if self.weight < 0:
                raise InvalidTreeError(f"negative weight {self.weight}")
        annotated = self.weight is not None
        for child in self.children:
            if child.is_annotated != annotated:
                raise InvalidTreeError("either all nodes carry a weight or none do")

    @property
    def is_leaf(self) -> bool:
        return self.operator is None

    @property
    def is_silent(self) -> bool:
        return self.operator is None and self.label is None

    @property
    def is_annotated(self) -> bool:
        return self.weight is not None

    def nodes(self) -> Iterator[ProcessTree]:
        """Yield all nodes in preorder. Node indices elsewhere refer to this order."""
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def labels(self) -> set[str]:
        return {n.label for n in self.nodes() if n.label is not None}

    def weights(self) -> list[int | None]:
        return [n.weight for n in self.nodes()]

    def with_weights(self, weights: Sequence[int | None]) -> ProcessTree:
        """Return a copy with preorder-indexed ``weights`` (use ``None``s to strip)."""
        weights = list(weights)
        it = iter(weights)
        tree = _rebuild(self, it)
        if next(it, _END) is not _END:
            raise InvalidTreeError("more weights than tree nodes")
        return tree

    def strip_weights(self) -> ProcessTree:
        return self.with_weights([None] * sum(1 for _ in self.nodes()))

    def __str__(self) -> str:
        return serialize_tree(self)


_END = object()


def _rebuild(node: ProcessTree, weights: Iterator[int | None]) -> ProcessTree:
    try:
        weight = next(weights)
    except StopIteration:
        raise InvalidTreeError("fewer weights than tree nodes") from None
    children = tuple(_rebuild(c, weights) for c in node.children)
    return ProcessTree(node.operator, node.label, children, weight)


def activity(label: str, weight: int | None = None) -> ProcessTree:
    return ProcessTree(label=label, weight=weight)


def tau(weight: int | None = None) -> ProcessTree:
    return ProcessTree(weight=weight)


def sequence(*children: ProcessTree, weight: int | None = None) -> ProcessTree:
    return ProcessTree(Operator.SEQUENCE, children=children, weight=weight)


def xor(*children: ProcessTree, weight: int | None = None) -> ProcessTree:
    return ProcessTree(Operator.XOR, children=children, weight=weight)


def parallel(*children: ProcessTree, weight: int | None = None) -> ProcessTree:
    return ProcessTree(Operator.PARALLEL, children=children, weight=weight)


def loop(*children: ProcessTree, weight: int | None = None) -> ProcessTree:
    return ProcessTree(Operator.LOOP, children=children, weight=weight)


# --------------------------------------------------------------------------
# text format

_OPERATOR_TOKENS = [("->", Operator.SEQUENCE), ("X", Operator.XOR),
                    ("+", Operator.PARALLEL), ("*", Operator.LOOP)]


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self, token: str) -> bool:
        self.skip_ws()
        return self.text.startswith(token, self.pos)

    def expect(self, token: str):
        if not self.peek(token):
            found = self.text[self.pos:self.pos + 1] or "end of input"
            raise TreeSyntaxError(f"expected {token!r}, found {found!r}", self.pos)
        self.pos += len(token)

    def parse(self) -> ProcessTree:
        tree = self.node()
        self.skip_ws()
        if self.pos != len(self.text):
            raise TreeSyntaxError("unexpected trailing input", self.pos)
        return tree

    def node(self) -> ProcessTree:
        self.skip_ws()
        start = self.pos
        operator = None
        label = None
        children: list[ProcessTree] = []
        if self.peek("'"):
            label = self.quoted()
        elif self._keyword(SILENT):
            pass
        else:
            for token, op in _OPERATOR_TOKENS:
                if self.peek(token):
                    self.pos += len(token)
                    operator = op
                    break
            else:
                found = self.text[self.pos:self.pos + 1] or "end of input"
                raise TreeSyntaxError(f"expected a tree node, found {found!r}", self.pos)
            self.expect("(")
            if self.peek(")"):
                raise TreeSyntaxError("operator without children", self.pos)
            children.append(self.node())
            while self.peek(","):
                self.pos += 1
                children.append(self.node())
            self.expect(")")
        weight = self.weight()
        try:
            return ProcessTree(operator, label, tuple(children), weight)
        except InvalidTreeError as exc:
            raise TreeSyntaxError(str(exc), start) from None

    def _keyword(self, word: str) -> bool:
        self.skip_ws()
        end = self.pos + len(word)
        if self.text.startswith(word, self.pos) and not (
            end < len(self.text) and (self.text[end].isalnum() or self.text[end] == "_")
        ):
            self.pos = end
            return True
        return False

    def quoted(self) -> str:
        start = self.pos
        self.pos += 1
        chars = []
        while True:
            if self.pos >= len(self.text):
                raise TreeSyntaxError("unterminated label", start)
            ch = self.text[self.pos]
            if ch == "\\":
                if self.pos + 1 >= len(self.text):
                    raise TreeSyntaxError("dangling escape", self.pos)
                chars.append(self.text[self.pos + 1])
                self.pos += 2
            elif ch == "'":
                self.pos += 1
                break
            else:
                chars.append(ch)
                self.pos += 1
        if not chars:
            raise TreeSyntaxError("empty activity label", start)
        return "".join(chars)

    def weight(self) -> int | None:
        if not self.peek(":"):
            return None
        self.pos += 1
        self.skip_ws()
        start = self.pos
        if self.pos < len(self.text) and self.text[self.pos] in "+-":
            self.pos += 1
        while self.pos < len(self.text) and self.text[self.pos].isdigit():
            self.pos += 1
        digits = self.text[start:self.pos]
        if digits in ("", "+", "-"):
            raise TreeSyntaxError("expected an integer weight", start)
        value = int(digits)
        if value < 0:
            raise TreeSyntaxError(f"negative weight {value}", start)
        return value


def parse_tree(text: str) -> ProcessTree:
    """Parse the textual tree format, e.g. ``->( 'a', X( 'b', tau ) )``."""
    return _Parser(text).parse()


def _quote(label: str) -> str:
    return "'" + label.replace("\\", "\\\\").replace("'", "\\'") + "'"


def serialize_tree(tree: ProcessTree) -> str:
    if tree.is_silent:
        text = SILENT
    elif tree.is_leaf:
        text = _quote(tree.label)
    else:
        text = f"{tree.operator.value}( {', '.join(serialize_tree(c) for c in tree.children)} )"
    if tree.weight is not None:
        text += f":{tree.weight}"
    return text


def load_tree(path) -> ProcessTree:
    with open(path, encoding="utf-8") as fh:
        return parse_tree(fh.read())


def save_tree(tree: ProcessTree, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_tree(tree) + "\n")


def normalize_loop(tree: ProcessTree) -> ProcessTree:
    """Rewrite every loop with several redo children to ``*(do, X(redo...))``.

    The inserted choice node is weighted with the sum of the redo weights.
    """
    children = tuple(normalize_loop(c) for c in tree.children)
    if tree.operator is Operator.LOOP and len(children) > 2:
        redos = children[1:]
        weight = None
        if tree.is_annotated:
            weight = sum(r.weight for r in redos)
        children = (children[0], ProcessTree(Operator.XOR, children=redos, weight=weight))
    if children == tree.children:
        return tree
    return ProcessTree(tree.operator, tree.label, children, tree.weight)


def is_normalized(tree: ProcessTree) -> bool:
    return all(n.operator is not Operator.LOOP or len(n.children) == 2 for n in tree.nodes())


# --------------------------------------------------------------------------
# language semantics


def concat_sets(*sets: Iterable[Trace]) -> set[Trace]:
    """Concatenate sets of traces in order: every combination ``s1 + s2 + ... + sn``."""
    result: set[Trace] = {()}
    for s in sets:
        s = set(s)
        result = {a + b for a in result for b in s}
    return result


def shuffle(a: Trace, b: Trace) -> set[Trace]:
    """All interleavings of two sequences that preserve the order within each."""
    if not a:
        return {tuple(b)}
    if not b:
        return {tuple(a)}
    left = {(a[0],) + rest for rest in shuffle(a[1:], b)}
    right = {(b[0],) + rest for rest in shuffle(a, b[1:])}
    return left | right


def shuffle_sets(*sets: Iterable[Trace]) -> set[Trace]:
    result: set[Trace] = {()}
    for s in sets:
        s = set(s)
        result = {t for a in result for b in s for t in shuffle(a, b)}
    return result


def _guard(traces: set[Trace], cap: int | None) -> set[Trace]:
    if cap is not None and len(traces) > cap:
        raise LanguageTooLarge(f"language exceeds {cap} traces; lower the unroll bound or raise the cap")
    return traces


def enumerate_language(tree: ProcessTree, max_loop_unrolls: int,
                       cap: int | None = 100_000) -> set[Trace]:
    """Traces of the tree's language where each loop takes its redo part at most
    ``max_loop_unrolls`` times per activation. Weights are ignored.

    Raises LanguageTooLarge when an intermediate result exceeds ``cap`` traces.
    """
    if max_loop_unrolls < 0:
        raise ValueError("max_loop_unrolls must be non-negative")

    def lang(node: ProcessTree) -> set[Trace]:
        if node.is_silent:
            return {()}
        if node.is_leaf:
            return {(node.label,)}
        parts = [lang(c) for c in node.children]
        if node.operator is Operator.SEQUENCE:
            return _guard(concat_sets(*parts), cap)
        if node.operator is Operator.XOR:
            return _guard(set().union(*parts), cap)
        if node.operator is Operator.PARALLEL:
            return _guard(shuffle_sets(*parts), cap)
        do, redo = parts[0], set().union(*parts[1:])
        result = set(do)
        current = set(do)
        for _ in range(max_loop_unrolls):
            current = _guard(concat_sets(current, redo, do), cap)
            result |= current
            _guard(result, cap)
        return result

    return lang(tree)

