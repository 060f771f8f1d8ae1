"""Time-step scheduling and compilation of protocol trees into recipes.

A recipe is a flat instruction list for hardware in which every node has a
single communication qubit ``e`` and memory qubits ``m1``, ``m2``, ...
Links land on communication qubits, measurements act on communication
qubits only and two-qubit gates use the communication qubit as control.

Recipe text grammar (one instruction per line, ``#`` starts a comment)::

    recipe v1
    name <name>
    nodes <n1> <n2> ...
    k <int>
    q <int>
    tree <encoding>
    final <node>:<slot> ...
    begin main
    step <int>
    link <node> <node> <path>
    swap <node> <slot> <slot>
    gate <H|X|Y|Z> <node> <slot>
    gate <CX|CZ|CiY> <node> <control-slot> <target-slot>
    measure <node> <slot> <Z|X> <outcome-id>
    correct X <outcome-id> <node>:<slot> ...
    eval <path> <outcome-id>,... discard=<node>:<slot>,... restart=<label>
    end
    begin block <label>
    ...
    end

A failed ``eval`` discards the listed qubits and runs the named block. Each
block rebuilds the failed subtree and finishes with its own ``eval`` that
restarts the same block, so the loop ends only on success.
"""
from __future__ import annotations

import copy
import hashlib
from dataclasses import dataclass, field

from .tree import BellLink, Distill, Fusion, Path, Tree, encode, leaves, parse_tree, path_str, subtree, walk

COMM = "e"


# ---------------------------------------------------------------------------
# scheduling


@dataclass
class TimedTree:
    tree: Tree
    step_of: dict  # path -> step index (1-based)
    leaf_order: list  # leaf paths in generation order
    steps: list  # per step: list of unit root paths, in emission order
    unit_of: dict  # path -> unit root path, for nodes inside two-node units

    @property
    def n_steps(self) -> int:
        return len(self.steps)


def _leaf_order(tree: Tree, path: Path = ()) -> list:
    if isinstance(tree, BellLink):
        return [path]
    kids = sorted(enumerate(tree.children), key=lambda ic: -ic[1].k)
    out = []
    for i, child in kids:
        out.extend(_leaf_order(child, path + (i,)))
    return out


def _unit_root(tree: Tree, leaf: Path) -> Path:
    """Highest ancestor of ``leaf`` acting only on the leaf's two nodes."""
    pair = set(subtree(tree, leaf).nodes)
    best = leaf
    for cut in range(len(leaf) - 1, -1, -1):
        if set(subtree(tree, leaf[:cut]).parties) == pair:
            best = leaf[:cut]
        else:
            break
    return best


def _common_prefix(a: Path, b: Path) -> int:
    n = 0
    for x, y in zip(a, b):
        if x != y:
            break
        n += 1
    return n


def _main_done(tree: Tree, unit: Path, step_of: dict) -> bool:
    """True when every distillation using ``unit`` as ancilla has its main state scheduled.

    Keeps an ancillary Bell pair from being generated alongside (or before)
    the state it is meant to check.
    """
    for cut in range(len(unit)):
        if isinstance(subtree(tree, unit[:cut]), Distill) and unit[cut] == 1:
            for p, _ in walk(subtree(tree, unit[:cut] + (0,)), unit[:cut] + (0,)):
                if isinstance(subtree(tree, p), BellLink) and p not in step_of:
                    return False
    return True


def schedule_tree(tree: Tree) -> TimedTree:
    """Assign time steps to every tree node.

    Leaves are ordered largest branch first, left before right on ties. Each
    step starts with the first unscheduled leaf's two-node unit (the largest
    subtree that only involves that leaf's node pair); further units on
    disjoint nodes join the step, closest in the tree first (deepest common
    ancestor), then by leaf order. A unit that serves as a distillation
    ancilla only joins once the main state's links are scheduled in earlier
    steps. Multi-node operations run in the step in which their last input
    becomes available.
    """
    order = _leaf_order(tree)
    unit = {leaf: _unit_root(tree, leaf) for leaf in order}
    unit_order = []
    for leaf in order:
        if unit[leaf] not in unit_order:
            unit_order.append(unit[leaf])
    step_of: dict = {}
    steps: list = []
    pending = list(unit_order)
    while pending:
        first = pending.pop(0)
        chosen = [first]
        busy = set(subtree(tree, first).parties)
        while True:
            cands = [u for u in pending if not busy & set(subtree(tree, u).parties)
                     and _main_done(tree, u, step_of)]
            if not cands:
                break
            pick = min(cands, key=lambda u: (-_common_prefix(first, u), pending.index(u)))
            pending.remove(pick)
            chosen.append(pick)
            busy |= set(subtree(tree, pick).parties)
        steps.append(chosen)
        for u in chosen:
            for p, _ in walk(subtree(tree, u), u):
                step_of[p] = len(steps)
    unit_of = {}
    for u in unit_order:
        for p, _ in walk(subtree(tree, u), u):
            unit_of[p] = u
    for p, node in walk(tree):
        if p not in step_of:
            step_of[p] = max(step_of[p + (i,)] for i in range(len(node.children)))
    return TimedTree(tree, step_of, order, steps, unit_of)


# ---------------------------------------------------------------------------
# instructions


@dataclass(frozen=True)
class Instruction:
    op: str  # step | link | swap | gate | measure | correct | eval
    args: tuple = ()

    def text(self) -> str:
        return " ".join([self.op, *map(str, self.args)])


@dataclass
class ProtocolRecipe:
    name: str
    nodes: tuple
    k: int
    q: int
    tree_code: str
    final_slots: dict  # node -> slot of the output GHZ qubit
    main: list
    blocks: dict = field(default_factory=dict)  # label -> instruction list

    @property
    def tree(self) -> Tree:
        return parse_tree(self.tree_code)

    @property
    def parties(self) -> tuple:
        return self.tree.parties

    def to_text(self) -> str:
        lines = [
            "recipe v1",
            f"name {self.name}",
            "nodes " + " ".join(self.nodes),
            f"k {self.k}",
            f"q {self.q}",
            f"tree {self.tree_code}",
            "final " + " ".join(f"{n}:{self.final_slots[n]}" for n in self.parties),
            "begin main",
        ]
        lines += [ins.text() for ins in self.main]
        lines.append("end")
        for label in sorted(self.blocks, key=_label_key):
            lines.append(f"begin block {label}")
            lines += [ins.text() for ins in self.blocks[label]]
            lines.append("end")
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()

    def instructions(self):
        yield from self.main
        for label in sorted(self.blocks, key=_label_key):
            yield from self.blocks[label]


def _label_key(label: str):
    return int(label[1:]) if label[1:].isdigit() else label


def recipe_from_text(text: str) -> ProtocolRecipe:
    header: dict = {}
    main: list = []
    blocks: dict = {}
    current = None
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if current is None:
            if parts[0] == "begin":
                if parts[1:] == ["main"]:
                    current = main
                elif len(parts) == 3 and parts[1] == "block":
                    current = blocks.setdefault(parts[2], [])
                else:
                    raise ValueError(f"bad section header {line!r}")
                continue
            header[parts[0]] = parts[1:]
            continue
        if parts[0] == "end":
            current = None
            continue
        current.append(_parse_instruction(parts))
    if current is not None:
        raise ValueError("unterminated section in recipe text")
    for key in ("recipe", "name", "nodes", "k", "q", "tree", "final"):
        if key not in header:
            raise ValueError(f"recipe header misses {key!r}")
    if header["recipe"] != ["v1"]:
        raise ValueError(f"unsupported recipe version {header['recipe']}")
    final = dict(item.split(":") for item in header["final"])
    recipe = ProtocolRecipe(
        name=" ".join(header["name"]), nodes=tuple(header["nodes"]), k=int(header["k"][0]),
        q=int(header["q"][0]), tree_code=header["tree"][0], final_slots=final, main=main, blocks=blocks,
    )
    validate_recipe(recipe)
    return recipe


def _parse_instruction(parts: list) -> Instruction:
    op, args = parts[0], parts[1:]
    arity = {"step": 1, "link": 3, "swap": 3, "measure": 4, "eval": 4}
    if op in arity and len(args) != arity[op]:
        raise ValueError(f"{op} expects {arity[op]} arguments, got {args}")
    if op == "step":
        return Instruction(op, (int(args[0]),))
    if op == "gate" and len(args) not in (3, 4):
        raise ValueError(f"gate expects 3 or 4 arguments, got {args}")
    if op == "correct" and (len(args) < 3 or args[0] != "X"):
        raise ValueError(f"bad correct instruction {args}")
    if op not in ("link", "swap", "gate", "measure", "correct", "eval"):
        raise ValueError(f"unknown instruction {op!r}")
    return Instruction(op, tuple(args))


def parse_eval(ins: Instruction):
    """Return ``(path text, outcome ids, discard labels, restart label)``."""
    path, outs, discard, restart = ins.args
    if not discard.startswith("discard=") or not restart.startswith("restart="):
        raise ValueError(f"bad eval instruction {ins.text()}")
    slots = [tuple(s.split(":")) for s in discard[len("discard="):].split(",") if s]
    return path, outs.split(","), slots, restart[len("restart="):]


def validate_recipe(recipe: ProtocolRecipe, max_slots: int | None = None) -> None:
    """Check the hardware constraints and internal references of a recipe."""
    measured = set()
    for ins in recipe.instructions():
        if ins.op == "measure":
            if ins.args[1] != COMM:
                raise ValueError(f"measurement on non-communication slot: {ins.text()}")
            measured.add(ins.args[3])
        elif ins.op == "gate" and len(ins.args) == 4 and ins.args[2] != COMM:
            raise ValueError(f"two-qubit gate not controlled by the communication qubit: {ins.text()}")
        elif ins.op == "eval":
            _, outs, _, label = parse_eval(ins)
            if label not in recipe.blocks:
                raise ValueError(f"eval restarts unknown block {label}")
        elif ins.op == "link" and ins.args[0] == ins.args[1]:
            raise ValueError(f"link needs two nodes: {ins.text()}")
    for ins in recipe.instructions():
        if ins.op == "correct" and ins.args[1] not in measured:
            raise ValueError(f"correction uses unknown outcome {ins.args[1]}")
    if max_slots is not None and recipe.q > max_slots:
        raise ValueError(f"recipe needs q={recipe.q} qubits per node, only {max_slots} configured")


# ---------------------------------------------------------------------------
# compilation


class _Slots:
    """Slot occupancy: node -> {slot: owner}, owner = (state path, node)."""

    def __init__(self, nodes):
        self.occ = {n: {} for n in nodes}
        self.where: dict = {}  # state path -> {node: slot}
        self.peak = 0

    def clone(self) -> "_Slots":
        return copy.deepcopy(self)

    def first_free_memory(self, node: str) -> str:
        i = 1
        while f"m{i}" in self.occ[node]:
            i += 1
        return f"m{i}"

    def place(self, state: Path, node: str, slot: str) -> None:
        assert slot not in self.occ[node], (node, slot)
        self.occ[node][slot] = state
        self.where.setdefault(state, {})[node] = slot
        self.peak = max(self.peak, len(self.occ[node]))

    def free(self, node: str, slot: str) -> None:
        state = self.occ[node].pop(slot)
        del self.where[state][node]
        if not self.where[state]:
            del self.where[state]

    def move(self, node: str, a: str, b: str) -> None:
        """Exchange the contents of slots ``a`` and ``b`` (either may be empty)."""
        sa, sb = self.occ[node].pop(a, None), self.occ[node].pop(b, None)
        if sa is not None:
            self.occ[node][b] = sa
            self.where[sa][node] = b
        if sb is not None:
            self.occ[node][a] = sb
            self.where[sb][node] = a
        self.peak = max(self.peak, len(self.occ[node]))

    def rename(self, old: Path, new: Path) -> None:
        for node, slot in self.where.pop(old).items():
            self.occ[node][slot] = new
            self.where.setdefault(new, {})[node] = slot

    def snapshot(self) -> dict:
        return {n: dict(s) for n, s in self.occ.items()}


class _Compiler:
    def __init__(self, timed: TimedTree):
        self.timed = timed
        self.tree = timed.tree
        self.nodes = tuple(sorted(set(self.tree.parties)))
        self.n_outcomes = 0
        self.n_blocks = 0
        self.blocks: dict = {}
        self.peak = 0

    def outcome(self) -> str:
        self.n_outcomes += 1
        return f"o{self.n_outcomes}"

    # -- helpers --------------------------------------------------------
    def free_comm(self, out, slots: _Slots, node: str) -> None:
        if COMM in slots.occ[node]:
            dst = slots.first_free_memory(node)
            out.append(Instruction("swap", (node, COMM, dst)))
            slots.move(node, COMM, dst)

    # -- node compilation ----------------------------------------------
    def emit(self, out, slots: _Slots, path: Path) -> None:
        node = subtree(self.tree, path)
        if isinstance(node, BellLink):
            a, b = node.nodes
            for n in (a, b):
                self.free_comm(out, slots, n)
            out.append(Instruction("link", (a, b, path_str(path))))
            slots.place(path, a, COMM)
            slots.place(path, b, COMM)
        elif isinstance(node, Fusion):
            self.emit_fusion(out, slots, path, node)
        else:
            self.emit_distill(out, slots, path, node)
        self.peak = max(self.peak, slots.peak)

    def emit_fusion(self, out, slots: _Slots, path: Path, node: Fusion) -> None:
        left, right = path + (0,), path + (1,)
        v = node.node
        sl, sr = slots.where[left][v], slots.where[right][v]
        if sl == COMM:
            meas, keep = left, right
        elif sr == COMM:
            meas, keep = right, left
        else:
            self.free_comm(out, slots, v)
            sr = slots.where[right][v]
            out.append(Instruction("swap", (v, COMM, sr)))
            slots.move(v, COMM, sr)
            meas, keep = right, left
        ks = slots.where[keep][v]
        o = self.outcome()
        out.append(Instruction("gate", ("H", v, COMM)))
        out.append(Instruction("gate", ("CZ", v, COMM, ks)))
        out.append(Instruction("measure", (v, COMM, "X", o)))
        slots.free(v, COMM)
        targets = [f"{n}:{s}" for n, s in sorted(slots.where[meas].items(), key=lambda x: x[0])]
        out.append(Instruction("correct", ("X", o, *targets)))
        slots.rename(meas, path)
        slots.rename(keep, path)

    def distill_ops(self, out, slots: _Slots, path: Path, node: Distill) -> list:
        """Controlled-Pauli gates from the ancilla plus its X measurements."""
        main, anc = path + (0,), path + (1,)
        outs = []
        for v in node.support:
            sa = slots.where[anc][v]
            if sa != COMM:
                if slots.where[main][v] != COMM:
                    self.free_comm(out, slots, v)
                    sa = slots.where[anc][v]
                out.append(Instruction("swap", (v, COMM, sa)))
                slots.move(v, COMM, sa)
            gate = {"X": "CX", "Y": "CiY", "Z": "CZ"}[node.letter(v)]
            out.append(Instruction("gate", (gate, v, COMM, slots.where[main][v])))
            o = self.outcome()
            out.append(Instruction("measure", (v, COMM, "X", o)))
            slots.free(v, COMM)
            outs.append(o)
        return outs

    def emit_distill(self, out, slots: _Slots, path: Path, node: Distill) -> None:
        outs = self.distill_ops(out, slots, path, node)
        discard = ",".join(f"{n}:{s}" for n, s in sorted(slots.where[path + (0,)].items()))
        label = self.restart_block(slots, path, node)
        out.append(Instruction("eval", (path_str(path), ",".join(outs), f"discard={discard}", f"restart={label}")))
        slots.rename(path + (0,), path)

    def restart_block(self, slots: _Slots, path: Path, node: Distill) -> str:
        """Compile the block that rebuilds ``path`` after a failed distillation."""
        label = f"R{self.n_blocks}"
        self.n_blocks += 1
        self.blocks[label] = None  # reserve the label
        target = slots.clone()
        target.rename(path + (0,), path)
        ctx = slots.clone()
        for n, s in list(ctx.where[path + (0,)].items()):
            ctx.free(n, s)
        body: list = []
        for p in self.post_order(path):
            if p == path:
                continue
            self.emit(body, ctx, p)
        # distillation of the rebuilt inputs, then restore the expected layout
        outs = self.distill_ops(body, ctx, path, node)
        ctx.rename(path + (0,), path)
        self.relocate(body, ctx, target)
        discard = ",".join(f"{n}:{s}" for n, s in sorted(target.where[path].items()))
        body.append(Instruction("eval", (path_str(path), ",".join(outs), f"discard={discard}", f"restart={label}")))
        self.peak = max(self.peak, ctx.peak)
        self.blocks[label] = body
        return label

    def relocate(self, out, ctx: _Slots, target: _Slots) -> None:
        """Emit SWAPs until ``ctx`` matches the slot layout of ``target``."""
        for node in sorted(target.occ):
            want = target.occ[node]
            for _ in range(4 * (len(want) + len(ctx.occ[node])) + 4):
                have = ctx.occ[node]
                wrong = [s for s in sorted(set(want) | set(have)) if want.get(s) != have.get(s)]
                if not wrong:
                    break
                fixable = [t for t in wrong if t in want]
                s = fixable[0] if fixable else wrong[0]
                if s in want:
                    src = [t for t, owner in sorted(have.items()) if owner == want[s] and want.get(t) != owner]
                    if not src:
                        raise RuntimeError("cannot restore slot layout after restart")
                    out.append(Instruction("swap", (node, s, src[0])))
                    ctx.move(node, s, src[0])
                else:
                    raise RuntimeError("restart block left an unexpected qubit behind")
            else:
                raise RuntimeError("slot relocation did not converge")

    def post_order(self, root: Path) -> list:
        """Post-order over ``root`` with children in generation order."""
        node = subtree(self.tree, root)
        if isinstance(node, BellLink):
            return [root]
        kids = sorted(range(len(node.children)), key=lambda i: -node.children[i].k)
        out = []
        for i in kids:
            out.extend(self.post_order(root + (i,)))
        out.append(root)
        return out

    def compile(self) -> tuple[list, _Slots]:
        slots = _Slots(self.nodes)
        main: list = []
        order = self.post_order(())
        done = set()
        for s, units in enumerate(self.timed.steps, start=1):
            main.append(Instruction("step", (s,)))
            for u in units:
                for p in self.post_order(u):
                    self.emit(main, slots, p)
                    done.add(p)
            for p in order:
                if p not in done and self.timed.step_of[p] == s:
                    self.emit(main, slots, p)
                    done.add(p)
        return main, slots


def compile_recipe(timed: TimedTree, name: str = "protocol", max_slots: int | None = None) -> ProtocolRecipe:
    comp = _Compiler(timed)
    main, slots = comp.compile()
    final = dict(slots.where[()])
    recipe = ProtocolRecipe(
        name=name, nodes=comp.nodes, k=timed.tree.k, q=comp.peak, tree_code=encode(timed.tree),
        final_slots=final, main=main, blocks=comp.blocks,
    )
    validate_recipe(recipe, max_slots)
    return recipe


def recipe_for(tree: Tree, name: str = "protocol", max_slots: int | None = None) -> ProtocolRecipe:
    return compile_recipe(schedule_tree(tree), name, max_slots)
