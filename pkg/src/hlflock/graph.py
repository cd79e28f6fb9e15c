"""Hierarchical-leadership graphs: validation, leader closures, depth.

Agents are numbered 1..n and influence flows strictly downward: agent i may
only listen to agents with smaller indices, and every agent except agent 1
must listen to someone. Agent 1 is the ultimate leader.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping

from .errors import GraphValidationError

__all__ = [
    "HLGraph",
    "LeaderClosure",
    "ValidationResult",
    "EdgeNotBelow",
    "EmptyLeaderSet",
    "validate",
    "ensure_valid",
    "leader_closure",
    "depth",
]


@dataclass(frozen=True)
class EdgeNotBelow:
    """A leader edge pointing at an equal or higher index."""

    agent: int
    leader: int

    def __str__(self) -> str:
        return f"agent {self.agent} lists leader {self.leader}, but leaders must have a smaller index"


@dataclass(frozen=True)
class EmptyLeaderSet:
    """An agent above the root with nobody to follow."""

    agent: int

    def __str__(self) -> str:
        return f"agent {self.agent} has an empty leader set"


Violation = EdgeNotBelow | EmptyLeaderSet


@dataclass(frozen=True)
class ValidationResult:
    ok: bool
    violations: tuple[Violation, ...] = ()

    def __bool__(self) -> bool:
        return self.ok


@dataclass(frozen=True, eq=True)
class HLGraph:
    """Leadership structure over agents 1..n_agents.

    ``leaders[i-1]`` lists the agents that directly influence agent i, in the
    order given. Optional ``weights`` assign a positive multiplier to an edge
    (follower, leader); missing edges default to 1.

    Instances are immutable and safe to share across concurrent runs.
    """

    n_agents: int
    leaders: tuple[tuple[int, ...], ...]
    weights: Mapping[tuple[int, int], float] | None = None

    def __post_init__(self):
        if self.n_agents < 1:
            raise ValueError("n_agents must be at least 1")
        if len(self.leaders) != self.n_agents:
            raise ValueError(
                f"expected {self.n_agents} leader sets, got {len(self.leaders)}"
            )
        object.__setattr__(
            self, "leaders", tuple(tuple(int(j) for j in ls) for ls in self.leaders)
        )
        for i, ls in enumerate(self.leaders, start=1):
            if len(set(ls)) != len(ls):
                raise ValueError(f"duplicate leader entries for agent {i}: {ls}")
            for j in ls:
                if j < 1 or j > self.n_agents:
                    raise ValueError(f"agent {i} lists unknown agent {j}")
        if self.weights is not None:
            w = {
                (int(i), int(j)): float(v) for (i, j), v in dict(self.weights).items()
            }
            edges = {(i, j) for i, ls in enumerate(self.leaders, start=1) for j in ls}
            for (i, j), v in w.items():
                if (i, j) not in edges:
                    raise ValueError(f"weight given for non-edge ({i}, {j})")
                if v <= 0:
                    raise ValueError(f"weight for edge ({i}, {j}) must be positive")
            object.__setattr__(self, "weights", w)

    @classmethod
    def from_leader_lists(
        cls,
        leaders: Iterable[Iterable[int]],
        weights: Mapping[tuple[int, int], float] | None = None,
    ) -> "HLGraph":
        ls = tuple(tuple(x) for x in leaders)
        return cls(n_agents=len(ls), leaders=ls, weights=weights)

    @classmethod
    def chain(cls, n: int) -> "HLGraph":
        """Single-file hierarchy: agent i follows agent i-1."""
        return cls.from_leader_lists([()] + [(i,) for i in range(1, n)])

    def leader_set(self, i: int) -> tuple[int, ...]:
        if not 1 <= i <= self.n_agents:
            raise ValueError(f"agent index {i} out of range 1..{self.n_agents}")
        return self.leaders[i - 1]

    def weight(self, i: int, j: int) -> float:
        if self.weights is None:
            return 1.0
        return self.weights.get((i, j), 1.0)

    def edges(self) -> Iterator[tuple[int, int, float]]:
        """Yield (follower, leader, weight) for every edge."""
        for i, ls in enumerate(self.leaders, start=1):
            for j in ls:
                yield i, j, self.weight(i, j)


@dataclass(frozen=True)
class LeaderClosure:
    """Levelwise expansion of everyone an agent listens to, directly or not.

    ``levels[0]`` is the agent itself; each further level holds the leaders of
    the previous one. ``union`` collects all of them, root included.
    """

    agent: int
    levels: tuple[frozenset[int], ...]
    union: frozenset[int]

    @property
    def depth_contribution(self) -> int:
        return len(self.union)


def validate(graph: HLGraph) -> ValidationResult:
    """Check the two hierarchy conditions, reporting every violation found.

    Accepts iff all leader indices sit strictly below their follower and every
    agent except agent 1 has at least one leader.
    """
    violations: list[Violation] = []
    for i in range(1, graph.n_agents + 1):
        ls = graph.leader_set(i)
        for j in ls:
            if j >= i:
                violations.append(EdgeNotBelow(agent=i, leader=j))
        if i > 1 and not ls:
            violations.append(EmptyLeaderSet(agent=i))
    return ValidationResult(ok=not violations, violations=tuple(violations))


def ensure_valid(graph: HLGraph) -> None:
    """Raise :class:`GraphValidationError` unless the graph is a valid hierarchy."""
    result = validate(graph)
    if not result.ok:
        raise GraphValidationError(result.violations)


def leader_closure(graph: HLGraph, i: int) -> LeaderClosure:
    """Expand the leader sets of agent i level by level until nothing new appears.

    No level can repeat a previously unseen agent once a level stops adding
    new ones, because indices strictly decrease along edges.
    """
    ensure_valid(graph)
    if not 1 <= i <= graph.n_agents:
        raise ValueError(f"agent index {i} out of range 1..{graph.n_agents}")
    levels = [frozenset({i})]
    union = {i}
    while True:
        nxt = frozenset(j for a in levels[-1] for j in graph.leader_set(a))
        new = nxt - union
        if not new:
            break
        levels.append(nxt)
        union |= new
    return LeaderClosure(agent=i, levels=tuple(levels), union=frozenset(union))


def depth(graph: HLGraph) -> int:
    """Largest closure cardinality over all agents.

    For a chain of n agents this equals n; adding edges to a valid graph can
    only enlarge closures, never shrink them.
    """
    ensure_valid(graph)
    return max(leader_closure(graph, i).depth_contribution for i in range(1, graph.n_agents + 1))
