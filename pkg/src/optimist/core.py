"""Alphabets, histories and discounted-return arithmetic."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, NamedTuple, Optional, Sequence


@dataclass(frozen=True)
class Alphabets:
    """Finite action, observation and reward sets.

    Percepts are the pairs (observation, reward_index), flattened to a single
    index ``obs * len(reward_values) + reward_index``.
    """

    num_actions: int
    num_observations: int
    reward_values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "reward_values", tuple(float(r) for r in self.reward_values))
        if self.num_actions < 1:
            raise ValueError(f"num_actions must be >= 1, got {self.num_actions}")
        if self.num_observations < 1:
            raise ValueError(f"num_observations must be >= 1, got {self.num_observations}")
        rv = self.reward_values
        if not rv:
            raise ValueError("reward_values must be non-empty")
        if any(r < 0.0 or r > 1.0 for r in rv):
            raise ValueError(f"reward values must lie in [0, 1], got {rv}")
        if any(b <= a for a, b in zip(rv, rv[1:])):
            raise ValueError(f"reward values must be strictly increasing, got {rv}")

    @property
    def num_rewards(self) -> int:
        return len(self.reward_values)

    @property
    def num_percepts(self) -> int:
        return self.num_observations * len(self.reward_values)

    def percept_index(self, percept: "Percept") -> int:
        return percept.observation * len(self.reward_values) + percept.reward_index

    def percept_at(self, index: int) -> "Percept":
        obs, r = divmod(index, len(self.reward_values))
        return Percept(obs, r)

    def reward_of(self, index: int) -> float:
        """Reward value of the flattened percept ``index``."""
        return self.reward_values[index % len(self.reward_values)]

    def reward_index(self, value: float) -> int:
        for i, r in enumerate(self.reward_values):
            if r == value:
                return i
        raise ValueError(f"reward {value} not in {self.reward_values}")

    def check_action(self, action: int) -> None:
        if not 0 <= action < self.num_actions:
            raise ValueError(f"action {action} out of range [0, {self.num_actions})")

    def check_percept(self, percept: "Percept") -> None:
        if not 0 <= percept.observation < self.num_observations:
            raise ValueError(f"observation {percept.observation} out of range")
        if not 0 <= percept.reward_index < len(self.reward_values):
            raise ValueError(f"reward index {percept.reward_index} out of range")


class Percept(NamedTuple):
    observation: int
    reward_index: int


class History:
    """Immutable interaction record a1 o1 r1 ... at ot rt.

    Stored as a linked list so that extending a history by one step shares
    the whole prefix.
    """

    __slots__ = ("parent", "action", "percept", "length", "_steps")

    def __init__(self, parent: Optional["History"] = None, action: int = -1,
                 percept: Optional[Percept] = None):
        self.parent = parent
        self.action = action
        self.percept = percept
        self.length = 0 if parent is None else parent.length + 1
        self._steps = None

    @classmethod
    def empty(cls) -> "History":
        return _EMPTY

    @classmethod
    def from_steps(cls, steps: Sequence[tuple[int, Percept]]) -> "History":
        h = _EMPTY
        for a, p in steps:
            h = h.append(a, Percept(*p))
        return h

    def append(self, action: int, percept: Percept) -> "History":
        return History(self, action, percept)

    def __len__(self) -> int:
        return self.length

    @property
    def steps(self) -> tuple[tuple[int, Percept], ...]:
        if self._steps is None:
            out = []
            node = self
            while node.parent is not None:
                out.append((node.action, node.percept))
                node = node.parent
            self._steps = tuple(reversed(out))
        return self._steps

    def suffix(self, start: int) -> list[tuple[int, Percept]]:
        """Steps with 0-based position >= ``start``, oldest first."""
        out = []
        node = self
        while node.length > start:
            out.append((node.action, node.percept))
            node = node.parent
        out.reverse()
        return out

    def prefix(self, length: int) -> "History":
        node = self
        while node.length > length:
            node = node.parent
        return node

    def __iter__(self) -> Iterator[tuple[int, Percept]]:
        return iter(self.steps)

    def __eq__(self, other) -> bool:
        if not isinstance(other, History):
            return NotImplemented
        return self.length == other.length and self.steps == other.steps

    def __hash__(self) -> int:
        return hash(self.steps)

    def __repr__(self) -> str:
        body = " ".join(f"a{a}o{p.observation}r{p.reward_index}" for a, p in self.steps)
        return f"History({body})"

    def rewards(self, alphabets: Alphabets) -> list[float]:
        return [alphabets.reward_values[p.reward_index] for _, p in self.steps]


_EMPTY = History()


def check_gamma(gamma: float) -> float:
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"discount gamma must satisfy 0 < gamma < 1, got {gamma}")
    return float(gamma)


def discounted_return(rewards: Sequence[float], gamma: float) -> float:
    """Sum of gamma**(i-1) * r_i; the first reward carries weight 1."""
    check_gamma(gamma)
    total = 0.0
    weight = 1.0
    for r in rewards:
        if not 0.0 <= r <= 1.0:
            raise ValueError(f"reward {r} outside [0, 1]")
        total += weight * r
        weight *= gamma
    return total


def horizon_for_epsilon(epsilon: float, gamma: float) -> int:
    """Smallest l >= 0 with gamma**l / (1 - gamma) <= epsilon."""
    check_gamma(gamma)
    vmax = 1.0 / (1.0 - gamma)
    if not 0.0 < epsilon < vmax:
        raise ValueError(f"epsilon must lie in (0, {vmax}), got {epsilon}")
    ell = max(0, math.ceil(math.log(epsilon * (1.0 - gamma)) / math.log(gamma)))
    # guard against rounding of the log ratio on exact powers
    while ell > 0 and truncation_error_bound(ell - 1, gamma) <= epsilon:
        ell -= 1
    while truncation_error_bound(ell, gamma) > epsilon:
        ell += 1
    return ell


def truncation_error_bound(ell: int, gamma: float) -> float:
    """Worst-case value mass beyond the first ``ell`` rewards."""
    if ell < 0:
        raise ValueError(f"horizon must be >= 0, got {ell}")
    return gamma ** ell / (1.0 - gamma)


def value_bound(gamma: float) -> float:
    return 1.0 / (1.0 - gamma)
