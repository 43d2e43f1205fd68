"""DAG values, single-edge edit moves, expert edge constraints and the
structural Hamming distance between learned networks."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from resbn.errors import ConfigError, IllegalMoveError, IncomparableError

Edge = tuple[str, str]
MOVE_KINDS = ("add", "delete", "reverse")


def _reaches(children: Mapping[str, set], src: str, dst: str) -> bool:
    stack, seen = [src], {src}
    while stack:
        node = stack.pop()
        if node == dst:
            return True
        for c in children.get(node, ()):
            if c not in seen:
                seen.add(c)
                stack.append(c)
    return False


def has_cycle(nodes: Iterable[str], edges: Iterable[Edge]) -> bool:
    """Kahn's algorithm; True when the edge set contains a directed cycle."""
    nodes = list(nodes)
    indeg = {n: 0 for n in nodes}
    children = {n: [] for n in nodes}
    for p, c in edges:
        children[p].append(c)
        indeg[c] += 1
    queue = [n for n in nodes if indeg[n] == 0]
    seen = 0
    while queue:
        n = queue.pop()
        seen += 1
        for c in children[n]:
            indeg[c] -= 1
            if indeg[c] == 0:
                queue.append(c)
    return seen != len(nodes)


@dataclass(frozen=True)
class Dag:
    nodes: tuple[str, ...]
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", frozenset((str(p), str(c)) for p, c in self.edges))
        names = set(self.nodes)
        if len(names) != len(self.nodes):
            raise ValueError("duplicate node names")
        for p, c in self.edges:
            if p == c:
                raise IllegalMoveError(f"self-loop on {p!r}")
            if p not in names or c not in names:
                raise ValueError(f"edge {p!r}->{c!r} references an unknown node")
        if has_cycle(self.nodes, self.edges):
            raise IllegalMoveError("edge set contains a directed cycle")

    def parents(self, node: str) -> list[str]:
        return sorted(p for p, c in self.edges if c == node)

    def children(self, node: str) -> list[str]:
        return sorted(c for p, c in self.edges if p == node)

    def parent_map(self) -> dict[str, list[str]]:
        out = {n: [] for n in self.nodes}
        for p, c in sorted(self.edges):
            out[c].append(p)
        return out

    def topological_order(self) -> list[str]:
        """Deterministic order: among ready nodes, the earliest in ``nodes`` goes first."""
        pos = {n: i for i, n in enumerate(self.nodes)}
        indeg = {n: 0 for n in self.nodes}
        kids = {n: [] for n in self.nodes}
        for p, c in self.edges:
            indeg[c] += 1
            kids[p].append(c)
        ready = sorted((n for n in self.nodes if indeg[n] == 0), key=pos.get)
        order = []
        while ready:
            n = ready.pop(0)
            order.append(n)
            for c in kids[n]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    ready.append(c)
            ready.sort(key=pos.get)
        return order

    def adjacency(self) -> np.ndarray:
        """Adjacency matrix with nodes in name order."""
        names = sorted(self.nodes)
        idx = {n: i for i, n in enumerate(names)}
        a = np.zeros((len(names), len(names)), dtype=np.int8)
        for p, c in self.edges:
            a[idx[p], idx[c]] = 1
        return a

    def to_json(self) -> dict:
        return {"nodes": sorted(self.nodes), "edges": [list(e) for e in sorted(self.edges)]}

    @classmethod
    def from_json(cls, obj: Mapping) -> "Dag":
        return cls(tuple(obj["nodes"]), frozenset(tuple(e) for e in obj["edges"]))

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


@dataclass(frozen=True)
class EdgeConstraints:
    required: frozenset = field(default_factory=frozenset)
    forbidden: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "required", frozenset(tuple(e) for e in self.required))
        object.__setattr__(self, "forbidden", frozenset(tuple(e) for e in self.forbidden))
        clash = self.required & self.forbidden
        if clash:
            raise ConfigError(f"edges both required and forbidden: {sorted(clash)}")
        nodes = {n for e in self.required for n in e}
        if has_cycle(nodes, self.required):
            raise ConfigError("required edges contain a cycle")

    def to_json(self) -> dict:
        return {"required": [list(e) for e in sorted(self.required)],
                "forbidden": [list(e) for e in sorted(self.forbidden)]}

    @classmethod
    def from_json(cls, obj: Mapping | None) -> "EdgeConstraints":
        obj = obj or {}
        return cls(frozenset(tuple(e) for e in obj.get("required", ())),
                   frozenset(tuple(e) for e in obj.get("forbidden", ())))


def is_acyclic_after(g: Dag, kind: str, edge: Edge) -> bool:
    p, c = edge
    children: dict[str, set] = {n: set() for n in g.nodes}
    for a, b in g.edges:
        children[a].add(b)
    if kind == "add":
        return not _reaches(children, c, p)
    if kind == "reverse":
        children[p].discard(c)
        return not _reaches(children, p, c)
    return True


def apply_move(g: Dag, kind: str, edge: Edge) -> Dag:
    """Return a new DAG with one edge added, deleted or reversed.

    Raises :class:`IllegalMoveError` for a move that would create a cycle or
    does not apply to the current edge set; ``g`` is never modified.
    """
    p, c = edge
    if kind not in MOVE_KINDS:
        raise ValueError(f"unknown move {kind!r}")
    if p == c:
        raise IllegalMoveError("self-loops are not allowed")
    if kind == "add":
        if edge in g.edges or (c, p) in g.edges:
            raise IllegalMoveError(f"{p}->{c} already connected")
        if not is_acyclic_after(g, kind, edge):
            raise IllegalMoveError(f"adding {p}->{c} creates a cycle")
        return Dag(g.nodes, g.edges | {edge})
    if edge not in g.edges:
        raise IllegalMoveError(f"{p}->{c} is not an edge")
    if kind == "delete":
        return Dag(g.nodes, g.edges - {edge})
    if not is_acyclic_after(g, kind, edge):
        raise IllegalMoveError(f"reversing {p}->{c} creates a cycle")
    return Dag(g.nodes, (g.edges - {edge}) | {(c, p)})


def satisfies(g: Dag, c: EdgeConstraints) -> bool:
    return c.required <= g.edges and not (c.forbidden & g.edges)


def graph_hamming(a: Dag, b: Dag) -> int:
    """Number of directed edges present in exactly one graph (a reversal counts 2)."""
    if set(a.nodes) != set(b.nodes):
        raise IncomparableError("graphs are over different node sets")
    return len(a.edges ^ b.edges)


def hamming_matrix(dags: list[Dag]) -> np.ndarray:
    n = len(dags)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            out[i, j] = out[j, i] = graph_hamming(dags[i], dags[j])
    return out
