"""Policies: total maps from histories to actions."""

from __future__ import annotations

from typing import Optional

from .core import History


class Policy:
    """A deterministic policy.  ``act`` must return a valid action for any history."""

    def act(self, h: History) -> int:
        raise NotImplementedError


class ConstantPolicy(Policy):
    def __init__(self, action: int):
        self.action = action

    def act(self, h: History) -> int:
        return self.action

    def __repr__(self) -> str:
        return f"ConstantPolicy({self.action})"


class ActionTree(Policy):
    """Explicit action tree rooted at a history of length ``root_length``.

    ``children`` maps a percept index to the subtree used after that percept.
    Histories that leave the tree fall back to ``default``.
    """

    __slots__ = ("action", "children", "root_length", "num_rewards", "default")

    def __init__(self, action: int, children: Optional[dict] = None, root_length: int = 0,
                 num_rewards: int = 1, default: int = 0):
        self.action = action
        self.children = children or {}
        self.root_length = root_length
        self.num_rewards = num_rewards
        self.default = default

    def act(self, h: History) -> int:
        node = self
        for _, p in h.suffix(self.root_length):
            node = node.children.get(p.observation * self.num_rewards + p.reward_index)
            if node is None:
                return self.default
        return node.action

    def depth(self) -> int:
        if not self.children:
            return 1
        return 1 + max(c.depth() for c in self.children.values())


class TabularPolicy(Policy):
    """Receding-horizon optimal policy of a planner table.

    Tracks ``env``'s internal state along the history suffix after the root and
    looks up the best action for the remaining depth.  Beyond the planned depth
    it keeps acting one-step greedily, so the map is total.
    """

    def __init__(self, env, root_state, root_length: int, horizon: int, actions_by_depth):
        self.env = env
        self.root_state = root_state
        self.root_length = root_length
        self.horizon = horizon
        self._actions = actions_by_depth

    def act(self, h: History) -> int:
        if self.horizon == 0:
            return 0
        s = self.root_state
        steps = h.suffix(self.root_length)
        na = self.env.alphabets.num_rewards
        for a, p in steps:
            s = self.env.next_state(s, a, p.observation * na + p.reward_index)
        remaining = max(self.horizon - len(steps), 1)
        return self._actions(s, remaining)

    @property
    def root_action(self) -> int:
        if self.horizon == 0:
            return 0
        return self._actions(self.root_state, self.horizon)
