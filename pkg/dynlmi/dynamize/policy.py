import logging
import math

from collections import namedtuple
from typing import Optional

from dynlmi.core.vectors import Dataset, Vector
from dynlmi.index.tree import Index, IndexSettings, format_pos

from .operators import ActionLog, broaden, deepen, shorten


log = logging.getLogger(__name__)

PolicyConfig = namedtuple(
    "PolicyConfig",
    field_names=[
        "underflow_min",
        "max_avg_leaf_occupancy",
        "max_depth",
        "target_leaf_fill",
        "check_every",
    ],
    defaults=[5, 1000, 2, 500, 1],
)


def validate_policy(policy: PolicyConfig) -> PolicyConfig:
    if not policy.underflow_min < policy.target_leaf_fill <= policy.max_avg_leaf_occupancy:
        raise ValueError(
            "expected underflow_min < target_leaf_fill <= max_avg_leaf_occupancy, got "
            f"{policy.underflow_min}, {policy.target_leaf_fill}, {policy.max_avg_leaf_occupancy}"
        )
    if policy.max_depth < 1:
        raise ValueError(f"max_depth must be at least 1, got {policy.max_depth}")
    if policy.check_every < 1:
        raise ValueError(f"check_every must be at least 1, got {policy.check_every}")
    return policy


def n_child_for(count: int, policy: PolicyConfig) -> int:
    return max(2, math.ceil(count / policy.target_leaf_fill))


def _underflowing(index: Index, policy: PolicyConfig) -> list[tuple]:
    """Leaves under the minimum, leaving every parent at least one child."""
    found = []
    for node in index.nodes():
        if node.is_leaf:
            continue

        small = [
            c for c in node.children if c.is_leaf and len(c.objects) < policy.underflow_min
        ]
        if len(small) == len(node.children):
            # keep the fullest, lowest-positioned child
            keep = min(small, key=lambda c: (-len(c.objects), c.pos))
            small = [c for c in small if c is not keep]

        found.extend(c.pos for c in small)

    return found


def _overflow_step(index: Index, policy: PolicyConfig) -> Optional[list]:
    """Apply one overflow action to the fullest leaf that admits one.

    A root with less than half the fan-out the current size calls for is
    broadened first.

    Returns None when no candidate would strictly increase the leaf count.
    """
    root = index.root
    if not root.is_leaf:
        n_child = n_child_for(len(index), policy)
        if 2 * len(root.children) < n_child and n_child > len(index.leaves()):
            return [broaden(index, (), n_child, trigger="overflow")]

    tried = set()
    for leaf in sorted(index.leaves(), key=lambda l: (-len(l.objects), l.pos)):
        count = len(leaf.objects)

        if len(leaf.pos) < policy.max_depth:
            if count < 2:
                continue
            return [deepen(index, leaf.pos, n_child_for(count, policy), trigger="overflow")]

        target = leaf.pos[: policy.max_depth - 1]
        if target in tried:
            continue
        tried.add(target)

        leaves, _ = index.subtree(target)
        moved = sum(len(l.objects) for l in leaves)
        n_child = n_child_for(moved, policy)
        if n_child > len(leaves):
            return [broaden(index, target, n_child, trigger="overflow")]

    return None


def enforce_policies(index: Index, policy: PolicyConfig = PolicyConfig()) -> ActionLog:
    """Detect and resolve leaf underflow and average-occupancy overflow.

    Underflow is resolved first, then one overflow action at a time, until
    both bounds hold or no action can make progress.
    """
    validate_policy(policy)
    max_depth = index.settings.max_depth
    if max_depth is not None and policy.max_depth > max_depth:
        raise ValueError(
            f"policy depth {policy.max_depth} exceeds the index's {max_depth} inner levels"
        )

    actions = ActionLog()
    leaves_at_last_overflow = None
    rounds = math.ceil(max(len(index), 1) / policy.underflow_min) + len(index.leaves()) + 1

    for _ in range(rounds):
        underflow = _underflowing(index, policy)
        if underflow:
            for action in shorten(index, underflow, trigger="underflow"):
                actions.append(action)
            continue

        leaves = index.leaves()
        average = len(index) / len(leaves)
        if average < policy.max_avg_leaf_occupancy:
            return actions

        if leaves_at_last_overflow is not None and len(leaves) <= leaves_at_last_overflow:
            actions.stalled = (
                f"overflow actions did not increase the leaf count beyond {len(leaves)}"
            )
            break

        leaves_at_last_overflow = len(leaves)
        step = _overflow_step(index, policy)
        if step is None:
            actions.stalled = (
                f"no overflow action can add leaves (average occupancy {average:.1f})"
            )
            break
        for action in step:
            actions.append(action)
    else:
        actions.stalled = f"gave up after {rounds} rounds"

    log.warning("policy sweep stalled: %s", actions.stalled)
    return actions


class DynamicIndex:
    """An index that grows from empty, sweeping its policies every `check_every` inserts."""

    def __init__(
        self,
        dimension: int,
        policy: PolicyConfig = PolicyConfig(),
        settings: Optional[IndexSettings] = None,
    ):
        self.policy = validate_policy(policy)
        settings = settings or IndexSettings()
        self.index = Index(dimension, settings._replace(max_depth=policy.max_depth))
        self.log = ActionLog()
        self._since_sweep = 0

    @classmethod
    def wrap(cls, index: Index, policy: PolicyConfig = PolicyConfig()) -> "DynamicIndex":
        dynamic = cls(index.dimension, policy, index.settings)
        index.settings = dynamic.index.settings
        dynamic.index = index
        return dynamic

    def __len__(self) -> int:
        return len(self.index)

    def sweep(self) -> ActionLog:
        self._since_sweep = 0
        delta = enforce_policies(self.index, self.policy)
        self.log.extend(delta)
        if len(delta) > 0:
            log.debug(
                "sweep at %d objects: %d actions, %d leaves",
                len(self.index),
                len(delta),
                len(self.index.leaves()),
            )
        return delta

    def insert(self, obj: Vector) -> tuple:
        pos = self.index.insert(obj)
        self._since_sweep += 1
        if self._since_sweep >= self.policy.check_every:
            self.sweep()
        return pos

    def extend(self, dataset: Dataset):
        for obj in dataset:
            self.insert(obj)
