"""Named GHZ_4 protocols over the network nodes A, B, C, D.

Plain fuses three Bell pairs along the chain A-B-C-D. The larger protocols
distill Bell pairs before fusing and may finish with Z-type checks on the
GHZ state.
"""
from __future__ import annotations

from .tree import BellLink, Distill, Fusion, Tree


def link(a: str, b: str) -> BellLink:
    return BellLink((a, b))


def pumped(a: str, b: str, *stabilizers: str) -> Tree:
    """Bell pair distilled successively by fresh Bell pairs, one per stabilizer."""
    out: Tree = link(a, b)
    for s in stabilizers:
        out = Distill(out, link(a, b), s)
    return out


def chain(ab: Tree, bc: Tree, cd: Tree) -> Tree:
    """Fuse three two-node states along A-B-C-D, starting with the C-D end."""
    return Fusion(Fusion(cd, bc, "C"), ab, "B")


def plain() -> Tree:
    return Fusion(Fusion(link("A", "B"), link("B", "C"), "B"), link("C", "D"), "C")


def modicum() -> Tree:
    return Fusion(Fusion(pumped("A", "B", "XX"), link("B", "C"), "B"), link("C", "D"), "C")


def sextimum() -> Tree:
    return chain(pumped("A", "B", "XX"), pumped("B", "C", "XX"), pumped("C", "D", "XX"))


def septimum() -> Tree:
    core = sextimum()
    return Distill(core, link("A", "D"), _zz(core, "A", "D"))


def decimum() -> Tree:
    core = chain(pumped("A", "B", "XX", "ZZ"), pumped("B", "C", "XX", "ZZ"), pumped("C", "D", "XX", "ZZ"))
    return Distill(core, link("A", "D"), _zz(core, "A", "D"))


def undecum() -> Tree:
    core = decimum()
    return Distill(core, link("B", "D"), _zz(core, "B", "D"))


def duodecum() -> Tree:
    ab = Distill(pumped("A", "B", "XX"), pumped("A", "B", "XX"), "ZZ")
    core = chain(ab, pumped("B", "C", "XX", "ZZ"), pumped("C", "D", "XX", "ZZ"))
    core = Distill(core, link("A", "D"), _zz(core, "A", "D"))
    return Distill(core, link("B", "D"), _zz(core, "B", "D"))


def _zz(tree: Tree, a: str, b: str) -> str:
    return "".join("Z" if p in (a, b) else "I" for p in tree.parties)


BUILTIN = {
    "plain": plain,
    "modicum": modicum,
    "sextimum": sextimum,
    "septimum": septimum,
    "decimum": decimum,
    "undecum": undecum,
    "duodecum": duodecum,
}


def builtin_tree(name: str) -> Tree:
    try:
        return BUILTIN[name.lower()]()
    except KeyError:
        raise ValueError(f"unknown built-in protocol {name!r}; choose from {sorted(BUILTIN)}") from None
