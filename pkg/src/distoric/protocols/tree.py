"""Binary-tree representation of GHZ generation protocols.

Leaves are Bell pairs between two network nodes. Internal nodes either fuse
two GHZ states at a shared network node or distill a main state by measuring
one of its stabilizers with an ancillary GHZ state.

Tree positions are addressed by paths: ``()`` is the root, ``(0,)`` its left
child and so on. Paths are hashable and stable, so they double as identifiers
for the states a recipe creates.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, Union

Path = tuple

_STAB_LETTERS = frozenset("IXYZ")


@dataclass(frozen=True)
class BellLink:
    nodes: tuple[str, str]

    def __post_init__(self):
        if len(self.nodes) != 2 or self.nodes[0] == self.nodes[1]:
            raise ValueError(f"a Bell link needs two distinct nodes, got {self.nodes}")

    @property
    def parties(self) -> tuple[str, ...]:
        return tuple(self.nodes)

    @property
    def k(self) -> int:
        return 1

    @property
    def children(self) -> tuple:
        return ()


@dataclass(frozen=True)
class Fusion:
    """Fuse ``left`` and ``right`` at network ``node``, present in both."""

    left: "Tree"
    right: "Tree"
    node: str

    def __post_init__(self):
        if self.node not in self.left.parties or self.node not in self.right.parties:
            raise ValueError(f"fusion node {self.node} must hold a qubit of both states")
        shared = set(self.left.parties) & set(self.right.parties)
        if shared != {self.node}:
            raise ValueError(f"fused states overlap on {sorted(shared)}, expected only {self.node}")

    @cached_property
    def parties(self) -> tuple[str, ...]:
        return self.left.parties + tuple(p for p in self.right.parties if p != self.node)

    @property
    def fuse_qubits(self) -> tuple[int, int]:
        return self.left.parties.index(self.node), self.right.parties.index(self.node)

    @cached_property
    def k(self) -> int:
        return self.left.k + self.right.k

    @property
    def children(self) -> tuple:
        return (self.left, self.right)


@dataclass(frozen=True)
class Distill:
    """Measure ``stabilizer`` (one letter per main party) on ``main`` using ``ancilla``."""

    main: "Tree"
    ancilla: "Tree"
    stabilizer: str

    def __post_init__(self):
        check_stabilizer(self.stabilizer, len(self.main.parties))
        support = {p for p, s in zip(self.main.parties, self.stabilizer) if s != "I"}
        if set(self.ancilla.parties) != support or len(self.ancilla.parties) != len(support):
            raise ValueError(f"ancilla parties {self.ancilla.parties} do not match the support {sorted(support)}")

    @property
    def parties(self) -> tuple[str, ...]:
        return self.main.parties

    @cached_property
    def k(self) -> int:
        return self.main.k + self.ancilla.k

    @property
    def children(self) -> tuple:
        return (self.main, self.ancilla)

    def letter(self, node: str) -> str:
        return self.stabilizer[self.main.parties.index(node)]

    @property
    def support(self) -> tuple[str, ...]:
        return tuple(p for p, s in zip(self.main.parties, self.stabilizer) if s != "I")


Tree = Union[BellLink, Fusion, Distill]


def check_stabilizer(word: str, n: int) -> None:
    """Raise unless ``word`` is (up to sign) a stabilizer of the n-party GHZ state."""
    if len(word) != n or set(word) - _STAB_LETTERS:
        raise ValueError(f"stabilizer {word!r} is not a Pauli word of length {n}")
    if set(word) <= {"I", "Z"}:
        if word.count("Z") < 2 or word.count("Z") % 2:
            raise ValueError(f"{word!r} is not in the GHZ stabilizer group")
        return
    if "I" in word or "Z" in word or word.count("Y") % 2:
        raise ValueError(f"{word!r} is not in the GHZ stabilizer group")


def ghz_stabilizers(n: int) -> list[str]:
    """All non-trivial GHZ_n stabilizers (signs dropped), in a fixed order."""
    out = []
    for bits in itertools.product((0, 1), repeat=n):
        if sum(bits) and sum(bits) % 2 == 0:
            out.append("".join("Z" if b else "I" for b in bits))
    for bits in itertools.product((0, 1), repeat=n):
        if sum(bits) % 2 == 0:
            out.append("".join("Y" if b else "X" for b in bits))
    return out


def walk(tree: Tree, path: Path = ()) -> Iterator[tuple[Path, Tree]]:
    """Post-order traversal yielding ``(path, subtree)``."""
    for i, child in enumerate(tree.children):
        yield from walk(child, path + (i,))
    yield path, tree


def subtree(tree: Tree, path: Path) -> Tree:
    for i in path:
        tree = tree.children[i]
    return tree


def leaves(tree: Tree) -> list[tuple[Path, BellLink]]:
    return [(p, t) for p, t in walk(tree) if isinstance(t, BellLink)]


def depth(tree: Tree) -> int:
    return 1 + max((depth(c) for c in tree.children), default=0)


def relabel(tree: Tree, mapping: dict) -> Tree:
    """Rename network nodes; missing keys keep their name."""
    if isinstance(tree, BellLink):
        return BellLink(tuple(mapping.get(p, p) for p in tree.nodes))
    if isinstance(tree, Fusion):
        return Fusion(relabel(tree.left, mapping), relabel(tree.right, mapping), mapping.get(tree.node, tree.node))
    main = relabel(tree.main, mapping)
    return Distill(main, relabel(tree.ancilla, mapping), tree.stabilizer)


def path_str(path: Path) -> str:
    return "r" + "".join(f".{i}" for i in path)


def parse_path(text: str) -> Path:
    if not text.startswith("r"):
        raise ValueError(f"bad tree path {text!r}")
    return tuple(int(x) for x in text[1:].split(".") if x)


# ---------------------------------------------------------------------------
# encodings


def encode(tree: Tree) -> str:
    """Order-preserving text form, e.g. ``F(L(A,B),L(B,C)@B)``."""
    if isinstance(tree, BellLink):
        return f"L({tree.nodes[0]},{tree.nodes[1]})"
    if isinstance(tree, Fusion):
        return f"F({encode(tree.left)},{encode(tree.right)}@{tree.node})"
    return f"D({encode(tree.main)},{encode(tree.ancilla)},{tree.stabilizer})"


def _shape_code(tree: Tree, ordered: bool) -> str:
    if isinstance(tree, BellLink):
        return "L(" + ",".join(sorted(tree.nodes)) + ")"
    if isinstance(tree, Fusion):
        a, b = _shape_code(tree.left, ordered), _shape_code(tree.right, ordered)
        if not ordered and b < a:
            a, b = b, a
        return f"F({a},{b}@{tree.node})"
    stab = ",".join(f"{p}{s}" for p, s in sorted(zip(tree.main.parties, tree.stabilizer)) if s != "I")
    return f"D({_shape_code(tree.main, ordered)},{_shape_code(tree.ancilla, ordered)},{stab})"


def canonical_form(tree: Tree, ordered: bool = True) -> str:
    """Encoding invariant under renaming of network nodes.

    With ``ordered=False`` the two children of a fusion are also treated as
    unordered, which is the notion of tree isomorphism used to compare
    protocols.
    """
    names = sorted(set(tree.parties))
    letters = [chr(ord("A") + i) for i in range(len(names))]
    best = None
    for perm in itertools.permutations(letters):
        code = _shape_code(relabel(tree, dict(zip(names, perm))), ordered)
        if best is None or code < best:
            best = code
    return best


def isomorphic(a: Tree, b: Tree) -> bool:
    return canonical_form(a, ordered=False) == canonical_form(b, ordered=False)


def parse_tree(text: str) -> Tree:
    """Inverse of ``encode``."""
    pos = 0

    def expect(ch):
        nonlocal pos
        if text[pos] != ch:
            raise ValueError(f"expected {ch!r} at {pos} in {text!r}")
        pos += 1

    def token():
        nonlocal pos
        start = pos
        while pos < len(text) and text[pos] not in ",()@":
            pos += 1
        return text[start:pos]

    def node():
        nonlocal pos
        kind = text[pos]
        pos += 1
        expect("(")
        if kind == "L":
            a = token()
            expect(",")
            b = token()
            expect(")")
            return BellLink((a, b))
        left = node()
        expect(",")
        right = node()
        if kind == "F":
            expect("@")
            at = token()
            expect(")")
            return Fusion(left, right, at)
        if kind == "D":
            expect(",")
            stab = token()
            expect(")")
            return Distill(left, right, stab)
        raise ValueError(f"unknown tree node kind {kind!r}")

    tree = node()
    if pos != len(text):
        raise ValueError(f"trailing text in tree encoding {text!r}")
    return tree
