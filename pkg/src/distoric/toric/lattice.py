"""Periodic L x L toric-code lattice.

Vertices ``(i, j)`` sit on a torus. The horizontal edge ``h(i, j)`` joins
``(i, j)`` to ``(i, j+1)`` and the vertical edge ``v(i, j)`` joins ``(i, j)`` to
``(i+1, j)``; data qubit ``2 (i L + j)`` is ``h(i, j)`` and ``2 (i L + j) + 1``
is ``v(i, j)``. Plaquettes (Z-type) are the faces to the lower right of each
vertex, stars (X-type) the four edges around each vertex.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

PLAQUETTE = "Z"
STAR = "X"


@dataclass(frozen=True)
class ToricLattice:
    L: int

    def __post_init__(self):
        if self.L < 2:
            raise ValueError("lattice size must be at least 2")

    @property
    def n_edges(self) -> int:
        return 2 * self.L * self.L

    @property
    def n_sites(self) -> int:
        return self.L * self.L

    def h(self, i: int, j: int) -> int:
        L = self.L
        return 2 * ((i % L) * L + j % L)

    def v(self, i: int, j: int) -> int:
        L = self.L
        return 2 * ((i % L) * L + j % L) + 1

    def site(self, i: int, j: int) -> int:
        L = self.L
        return (i % L) * L + j % L

    @cached_property
    def plaquettes(self) -> np.ndarray:
        """``(L^2, 4)`` edge indices of every plaquette, site order ``i L + j``."""
        L = self.L
        out = np.empty((L * L, 4), dtype=np.int64)
        for i in range(L):
            for j in range(L):
                out[self.site(i, j)] = [self.h(i, j), self.v(i, j + 1), self.h(i + 1, j), self.v(i, j)]
        return out

    @cached_property
    def stars(self) -> np.ndarray:
        L = self.L
        out = np.empty((L * L, 4), dtype=np.int64)
        for i in range(L):
            for j in range(L):
                out[self.site(i, j)] = [self.h(i, j), self.v(i, j), self.h(i, j - 1), self.v(i - 1, j)]
        return out

    def stabilizers(self, stype: str) -> np.ndarray:
        if stype == PLAQUETTE:
            return self.plaquettes
        if stype == STAR:
            return self.stars
        raise ValueError(f"unknown stabilizer type {stype!r}")

    def edge_sites(self, stype: str) -> np.ndarray:
        """``(n_edges, 2)``: the two stabilizers of type ``stype`` containing each edge."""
        out = np.full((self.n_edges, 2), -1, dtype=np.int64)
        fill = np.zeros(self.n_edges, dtype=np.int64)
        for s, edges in enumerate(self.stabilizers(stype)):
            for e in edges:
                out[e, fill[e]] = s
                fill[e] += 1
        if not np.all(fill == 2):
            raise RuntimeError("every edge must lie on exactly two stabilizers")
        return out

    def syndrome(self, stype: str, errors: np.ndarray) -> np.ndarray:
        """Parity of ``errors`` (one bit per edge) on every stabilizer of ``stype``.

        Plaquettes detect X errors and stars detect Z errors.
        """
        return np.bitwise_xor.reduce(errors[self.stabilizers(stype)], axis=1).astype(np.uint8)

    @cached_property
    def logicals(self) -> dict:
        """Edge sets of the four non-contractible logical operators."""
        L = self.L
        return {
            "Z1": np.array([self.h(0, j) for j in range(L)]),
            "Z2": np.array([self.v(i, 0) for i in range(L)]),
            "X1": np.array([self.v(0, j) for j in range(L)]),
            "X2": np.array([self.h(i, 0) for i in range(L)]),
        }


def four_round_schedule(lattice: ToricLattice, order: str = "ZZXX") -> list[tuple[str, np.ndarray]]:
    """Checkerboard split of the stabilizers into four batches.

    Each batch touches every edge exactly once. ``order`` gives the
    stabilizer type of the four batches; the two batches of one type hold
    the sites with ``(i + j)`` even and odd respectively.
    """
    L = lattice.L
    if L % 2:
        raise ValueError("the checkerboard schedule needs an even lattice size")
    if sorted(order) != ["X", "X", "Z", "Z"]:
        raise ValueError("order must contain two Z and two X batches")
    colour = np.array([(i + j) % 2 for i in range(L) for j in range(L)])
    seen = {"X": 0, "Z": 0}
    out = []
    for t in order:
        out.append((t, np.flatnonzero(colour == seen[t])))
        seen[t] += 1
    return out


def logical_check(lattice: ToricLattice, x_errors: np.ndarray, z_errors: np.ndarray) -> dict:
    """Anticommutation bit of a residual error with each logical operator.

    Raises if the residual is not in the normaliser (non-empty syndrome).
    """
    if lattice.syndrome(PLAQUETTE, x_errors).any() or lattice.syndrome(STAR, z_errors).any():
        raise RuntimeError("residual error has a non-empty syndrome")
    lg = lattice.logicals
    return {
        "Z1": bool(np.bitwise_xor.reduce(x_errors[lg["Z1"]])),
        "Z2": bool(np.bitwise_xor.reduce(x_errors[lg["Z2"]])),
        "X1": bool(np.bitwise_xor.reduce(z_errors[lg["X1"]])),
        "X2": bool(np.bitwise_xor.reduce(z_errors[lg["X2"]])),
    }
