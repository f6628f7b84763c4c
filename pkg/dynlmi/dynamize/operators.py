import logging
import pandas as pd
import time

from collections import namedtuple
from typing import Optional

from dynlmi.index.tree import Cost, Index, format_pos


log = logging.getLogger(__name__)

OPERATORS = ("deepen", "broaden", "shorten")

Action = namedtuple(
    "Action",
    field_names=[
        "trigger",
        "operator",
        "pos",
        "n_child",
        "objects_moved",
        "seconds",
        "distance_computations",
    ],
)


class ActionLog:
    """Ordered record of structural operations and what they cost.

    `stalled` is set when a policy sweep could not make progress.
    """

    def __init__(self, actions: Optional[list[Action]] = None):
        self.actions = list(actions) if actions is not None else []
        self.stalled = None

    def __len__(self) -> int:
        return len(self.actions)

    def __iter__(self):
        return iter(self.actions)

    def append(self, action: Action):
        assert action.operator in OPERATORS
        self.actions.append(action)

    def extend(self, other: "ActionLog"):
        for action in other:
            self.append(action)
        if other.stalled is not None:
            self.stalled = other.stalled

    def cost(self) -> Cost:
        return Cost(
            sum(a.seconds for a in self.actions),
            sum(a.distance_computations for a in self.actions),
        )

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame(self.actions, columns=Action._fields)
        df["pos"] = df["pos"].map(format_pos)
        return df

    def to_csv(self, path):
        self.to_frame().to_csv(path, index=False)


def _verify(index: Index, operator: str):
    violation = index.check_consistency()
    if violation is not None:
        raise RuntimeError(f"{operator} left the index inconsistent: {violation.message}")


def _commit(index: Index, pos: tuple, old, new, operator: str):
    """Swap `new` in at `pos`; the old node is put back if the result is inconsistent."""
    index.replace(pos, new)
    violation = index.check_consistency()
    if violation is not None:
        index.replace(pos, old)
        raise RuntimeError(f"{operator} left the index inconsistent: {violation.message}")


def deepen(index: Index, leaf_pos: tuple, n_child: int, trigger: str = "manual") -> Action:
    """Replace a leaf by an inner node whose new model disperses its objects."""
    leaf = index.node(leaf_pos)
    if not leaf.is_leaf:
        raise TypeError(f"deepen needs a leaf, {format_pos(leaf_pos)} is an inner node")
    if not 2 <= n_child <= len(leaf.objects):
        raise ValueError(
            f"n_child={n_child} must lie in [2, {len(leaf.objects)}] for {format_pos(leaf_pos)}"
        )
    max_depth = index.settings.max_depth
    if max_depth is not None and len(leaf_pos) >= max_depth:
        raise ValueError(
            f"deepen at {format_pos(leaf_pos)} would exceed {max_depth} inner levels"
        )

    start = time.perf_counter()
    node, ops = index.train_node(leaf_pos, leaf.objects, n_child)
    _commit(index, leaf_pos, leaf, node, "deepen")
    seconds = time.perf_counter() - start

    log.info(
        "deepen %s: %d objects into %d children",
        format_pos(leaf_pos),
        len(leaf.objects),
        n_child,
    )

    return Action(trigger, "deepen", leaf_pos, n_child, len(leaf.objects), seconds, ops)


def broaden(index: Index, inner_pos: tuple, n_child: int, trigger: str = "manual") -> Action:
    """Rebuild an inner node's whole subtree as one level of `n_child` fresh leaves."""
    node = index.node(inner_pos)
    if node.is_leaf:
        raise TypeError(f"broaden needs an inner node, {format_pos(inner_pos)} is a leaf")
    if n_child < 2:
        raise ValueError(f"n_child must be at least 2, got {n_child}")

    start = time.perf_counter()
    leaves, _ = index.subtree(inner_pos)
    objects = [id for leaf in leaves for id in leaf.objects]

    new_node, ops = index.train_node(inner_pos, objects, n_child)
    _commit(index, inner_pos, node, new_node, "broaden")
    seconds = time.perf_counter() - start

    log.info(
        "broaden %s: %d objects from %d leaves into %d children",
        format_pos(inner_pos),
        len(objects),
        len(leaves),
        n_child,
    )

    return Action(trigger, "broaden", inner_pos, n_child, len(objects), seconds, ops)


def _routing_ops(index: Index, pos: tuple) -> int:
    """Model outputs evaluated to route one object down to `pos`."""
    ops = 0
    node = index.root
    for i in pos:
        ops += len(node.children)
        node = node.children[i]
    return ops


def shorten(index: Index, leaf_positions: list, trigger: str = "manual") -> list[Action]:
    """Drop leaves together with their parents' output neurons, then reinsert their objects."""
    positions = [tuple(p) for p in leaf_positions]
    if len(set(positions)) != len(positions):
        raise ValueError("a leaf is listed more than once")

    targets = []
    removals = {}
    for pos in positions:
        leaf = index.node(pos)
        if not leaf.is_leaf:
            raise TypeError(f"shorten needs a leaf, {format_pos(pos)} is an inner node")
        parent = index.parent(pos)
        if parent is None:
            raise ValueError("the root leaf cannot be shortened")

        targets.append((pos, leaf, parent))
        removals[id(parent)] = removals.get(id(parent), 0) + 1

    for _, _, parent in targets:
        if parent.model.n_classes - removals[id(parent)] < 1:
            raise ValueError(
                f"shortening would leave {format_pos(parent.pos)} without children"
            )

    # highest child index first so earlier indices stay valid
    for pos, leaf, parent in sorted(targets, key=lambda t: t[0], reverse=True):
        i = pos[-1]
        parent.model, _ = parent.model.remove_output(i)
        del parent.children[i]

    index.renumber()

    actions = []
    for pos, leaf, _ in targets:
        start = time.perf_counter()
        ops = 0
        for obj in leaf.objects:
            ops += _routing_ops(index, index.place(obj).pos)
        seconds = time.perf_counter() - start

        log.info("shorten %s: reinserted %d objects", format_pos(pos), len(leaf.objects))
        actions.append(Action(trigger, "shorten", pos, 0, len(leaf.objects), seconds, ops))

    _verify(index, "shorten")

    return actions
