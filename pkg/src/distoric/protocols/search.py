"""Dynamic-program search over GHZ protocol trees.

Buffers hold the best protocols per (weight n, Bell-pair count k). Every
cell is filled by distilling a smaller-k protocol of the same weight with an
ancillary protocol that measures one of its stabilizers, or by fusing two
lighter protocols at one network node. Candidates are compiled to recipes,
run on the configured hardware and ranked by their mean score.

Scores use common random numbers: shot ``i`` of every candidate draws from
stream ``(seed, i)``, which makes the ranking independent of evaluation
order and less noisy than independent streams.
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..noise import Hardware
from .execute import execute_recipe
from .recipe import ProtocolRecipe, recipe_for
from .tree import BellLink, Distill, Fusion, Tree, canonical_form, encode, ghz_stabilizers, parse_tree, relabel

log = logging.getLogger(__name__)

NODE_NAMES = "ABCDEFGH"


@dataclass(frozen=True)
class SearchConfig:
    """Inputs of the search.

    ``n_max`` is the final GHZ weight, ``k_max`` the Bell-pair budget of the
    final protocols, ``n_buffer`` the protocols kept per cell and ``shots``
    the Monte Carlo runs per candidate. Weight-4 candidates are scored by the
    stabilizer fidelity of their ``stabilizer_type`` superoperator, lighter
    ones by the mean GHZ fidelity of completed runs.
    """

    n_max: int
    k_max: int
    hardware: Hardware
    n_buffer: int = 5
    shots: int = 100
    seed: int = 0
    t_ghz: float | None = None
    max_slots: int | None = None
    stabilizer_type: str = "X"
    workers: int = 1

    def __post_init__(self):
        if self.n_max not in (2, 3, 4):
            raise ValueError("final GHZ weight must be 2, 3 or 4")
        if self.k_max < self.n_max - 1:
            raise ValueError(f"k_max must be at least {self.n_max - 1} for weight {self.n_max}")
        if self.n_buffer < 1 or self.shots < 1:
            raise ValueError("n_buffer and shots must be positive")


@dataclass
class Candidate:
    tree: Tree
    recipe: ProtocolRecipe
    score: float = float("nan")

    @property
    def n(self) -> int:
        return len(self.tree.parties)

    @property
    def k(self) -> int:
        return self.recipe.k

    @property
    def q(self) -> int:
        return self.recipe.q

    def rank_key(self):
        return (-self.score, self.k, self.q, encode(self.tree))


@dataclass
class SearchResult:
    config: SearchConfig
    buffer: dict = field(default_factory=dict)  # (n, k) -> ranked list of Candidate
    evaluated: int = 0

    def best(self, n: int, k: int) -> list[Candidate]:
        return self.buffer.get((n, k), [])

    def final(self) -> list[Candidate]:
        """Ranked protocols of the final weight over all Bell-pair counts."""
        out = [c for (n, _), cell in self.buffer.items() if n == self.config.n_max for c in cell]
        return sorted(out, key=Candidate.rank_key)


def cells(n_max: int, k_max: int) -> list[tuple[int, int]]:
    """Cells ``(n, k)`` with ``n - 1 <= k <= n - n_max + k_max`` in dependency order."""
    out = [(n, k) for n in range(2, n_max + 1) for k in range(n - 1, n - n_max + k_max + 1)]
    return sorted(out, key=lambda nk: (nk[1], nk[0]))


def normalise(tree: Tree) -> Tree:
    """Rename the network nodes to A, B, ... in party order."""
    return relabel(tree, {p: NODE_NAMES[i] for i, p in enumerate(tree.parties)})


def distilled(main: Tree, ancilla: Tree, stabilizer: str) -> Tree:
    """``main`` distilled by measuring ``stabilizer`` with ``ancilla`` placed on its support."""
    support = [p for p, s in zip(main.parties, stabilizer) if s != "I"]
    return Distill(main, relabel(ancilla, dict(zip(ancilla.parties, support))), stabilizer)


def fused(left: Tree, right: Tree, i: int, j: int) -> Tree:
    """Fuse qubit ``i`` of ``left`` with qubit ``j`` of ``right``."""
    at = left.parties[i]
    fresh = iter(x for x in NODE_NAMES if x not in left.parties)
    mapping = {p: (at if idx == j else next(fresh)) for idx, p in enumerate(right.parties)}
    return Fusion(left, relabel(right, mapping), at)


def candidate_trees(buffer: dict, n: int, k: int) -> list[Tree]:
    """All trees of one cell built from buffered protocols, without duplicates."""
    out, seen = [], set()

    def add(tree):
        tree = normalise(tree)
        key = canonical_form(tree)
        if key not in seen:
            seen.add(key)
            out.append(tree)

    if (n, k) == (2, 1):
        add(BellLink(("A", "B")))
    for g in ghz_stabilizers(n):
        n_anc = sum(c != "I" for c in g)
        for k_anc in range(n_anc - 1, k - n + 2):
            for p1 in buffer.get((n, k - k_anc), []):
                for p2 in buffer.get((n_anc, k_anc), []):
                    add(distilled(p1.tree, p2.tree, g))
    for n2 in range(2, n):
        n1 = n - n2 + 1
        for k2 in range(n2 - 1, k - n + n2 + 1):  # leaves k1 >= n1 - 1
            for p1 in buffer.get((n1, k - k2), []):
                for p2 in buffer.get((n2, k2), []):
                    for i in range(n1):
                        for j in range(n2):
                            add(fused(p1.tree, p2.tree, i, j))
    return out


def score_recipe(recipe: ProtocolRecipe, n: int, config: SearchConfig) -> float:
    """Mean stabilizer fidelity (weight 4) or mean GHZ fidelity over ``config.shots`` runs."""
    if n == 4:
        from ..superop import accumulate, default_cadence, extract_probs  # superop imports this package

        acc = accumulate(recipe, config.hardware, config.t_ghz, config.stabilizer_type, config.seed,
                         0, config.shots, default_cadence(config.shots))
        if not acc.n_success:
            return 0.0
        return extract_probs(acc.mean_success(), config.stabilizer_type).stabilizer_fidelity
    total = 0.0
    for i in range(config.shots):
        res = execute_recipe(recipe, config.hardware, config.t_ghz, np.random.default_rng([config.seed, i]))
        if res.completed:
            total += res.ghz_fidelity()
    return total / config.shots


def snapshot(result: SearchResult) -> dict:
    """JSON-ready form of the buffer: tree codes and scores per cell."""
    return {f"{n},{k}": [[encode(c.tree), c.score] for c in cell] for (n, k), cell in sorted(result.buffer.items())}


def restore(data: dict, max_slots: int | None = None) -> dict:
    """Buffer from ``snapshot`` output; recipes are recompiled deterministically."""
    out = {}
    for key, cell in data.items():
        n, k = (int(x) for x in key.split(","))
        out[n, k] = []
        for code, score in cell:
            tree = parse_tree(code)
            out[n, k].append(Candidate(tree, recipe_for(tree, code, max_slots), float(score)))
    return out


def _score_job(args) -> float:
    recipe, n, config = args
    return score_recipe(recipe, n, config)


def dynamic_search(config: SearchConfig, progress=None, resume: dict | None = None,
                   on_cell=None) -> SearchResult:
    """Fill the buffer cell by cell and return it.

    ``progress``, when given, is called with ``(n, k, number of candidates)``
    before each cell is evaluated. ``resume`` holds already filled cells
    (as returned in ``SearchResult.buffer``), which are kept as they are.
    ``on_cell`` is called with the result after every newly filled cell.
    """
    result = SearchResult(config, dict(resume or {}))
    pool = ProcessPoolExecutor(config.workers) if config.workers > 1 else None
    try:
        for n, k in cells(config.n_max, config.k_max):
            if (n, k) in result.buffer:
                continue
            trees = candidate_trees(result.buffer, n, k)
            recipes = []
            for tree in trees:
                try:
                    recipes.append((tree, recipe_for(tree, encode(tree), config.max_slots)))
                except ValueError as exc:  # needs more memory slots than available
                    log.debug("skipping %s: %s", encode(tree), exc)
            if progress is not None:
                progress(n, k, len(recipes))
            jobs = [(r, n, config) for _, r in recipes]
            scores = list(pool.map(_score_job, jobs)) if pool else [_score_job(j) for j in jobs]
            ranked = sorted((Candidate(t, r, s) for (t, r), s in zip(recipes, scores)), key=Candidate.rank_key)
            result.buffer[n, k] = ranked[:config.n_buffer]
            result.evaluated += len(ranked)
            if on_cell is not None:
                on_cell(result)
    finally:
        if pool is not None:
            pool.shutdown()
    return result
