"""Dyadic indices, proper subtrees of the master tree and their partitions.

A node ``(j, k)`` addresses the dyadic interval ``[k 2^-j, (k+1) 2^-j)``.
The special index ``(-1, 0)`` denotes the scaling function and never
appears inside a tree.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, NamedTuple


class DyadicError(ValueError):
    pass


class DyadicIndex(NamedTuple):
    j: int
    k: int

    def validate(self) -> "DyadicIndex":
        if self.j < -1:
            raise DyadicError(f"level must be >= -1, got {self.j}")
        if self.j == -1:
            if self.k != 0:
                raise DyadicError("scaling index must be (-1, 0)")
        elif not 0 <= self.k < 2**self.j:
            raise DyadicError(f"position {self.k} out of range at level {self.j}")
        return self


SCALING = DyadicIndex(-1, 0)
ROOT = DyadicIndex(0, 0)


def _ix(ix) -> DyadicIndex:
    return ix if isinstance(ix, DyadicIndex) else DyadicIndex(int(ix[0]), int(ix[1]))


def parent(ix) -> DyadicIndex:
    j, k = _ix(ix)
    if j <= 0:
        raise DyadicError(f"level-underflow: {(j, k)} has no parent")
    return DyadicIndex(j - 1, k // 2)


def children(ix) -> tuple[DyadicIndex, DyadicIndex]:
    j, k = _ix(ix)
    if j < 0:
        raise DyadicError("the scaling index has no children")
    return DyadicIndex(j + 1, 2 * k), DyadicIndex(j + 1, 2 * k + 1)


def interval(ix) -> tuple[Fraction, Fraction]:
    """Exact endpoints of the dyadic cell addressed by ``ix``."""
    j, k = _ix(ix)
    if j < 0:
        return Fraction(0), Fraction(1)
    return Fraction(k, 2**j), Fraction(k + 1, 2**j)


def contains(outer, inner) -> bool:
    """True when the cell of ``inner`` lies inside the cell of ``outer``."""
    oj, ok = _ix(outer)
    ij, ik = _ix(inner)
    return ij >= oj and (ik >> (ij - oj)) == ok


def ancestors(ix) -> list[DyadicIndex]:
    ix = _ix(ix)
    out = []
    while ix.j > 0:
        ix = parent(ix)
        out.append(ix)
    return out


@dataclass(frozen=True)
class DyadicTree:
    nodes: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "nodes", frozenset(_ix(n) for n in self.nodes))

    def __len__(self):
        return len(self.nodes)

    def __contains__(self, ix):
        return _ix(ix) in self.nodes

    def __iter__(self):
        return iter(sorted(self.nodes))

    @property
    def depth(self) -> int:
        """Number of levels occupied (0 for the empty tree)."""
        return max((n.j for n in self.nodes), default=-1) + 1

    def is_proper(self) -> bool:
        if not self.nodes:
            return True
        if ROOT not in self.nodes:
            return False
        return all(n.j >= 0 and (n.j == 0 or parent(n) in self.nodes) for n in self.nodes)

    def to_json(self) -> str:
        return json.dumps([[n.j, n.k] for n in sorted(self.nodes)])

    @classmethod
    def from_json(cls, text: str) -> "DyadicTree":
        return cls(frozenset(DyadicIndex(int(j), int(k)).validate() for j, k in json.loads(text)))


@dataclass(frozen=True)
class Partition:
    leaves: frozenset

    def __len__(self):
        return len(self.leaves)

    def __iter__(self):
        return iter(sorted(self.leaves))

    def total_length(self) -> Fraction:
        return sum((b - a for a, b in map(interval, self.leaves)), Fraction(0))

    def tiles_unit_interval(self) -> bool:
        cells = sorted(interval(ix) for ix in self.leaves)
        if not cells or cells[0][0] != 0 or cells[-1][1] != 1:
            return False
        return all(a[1] == b[0] for a, b in zip(cells, cells[1:]))


def complete_to_tree(selected: Iterable) -> DyadicTree:
    """Smallest proper tree containing every index in ``selected``."""
    nodes: set[DyadicIndex] = set()
    for ix in selected:
        ix = _ix(ix)
        if ix.j < 0:
            raise DyadicError("trees only hold indices with j >= 0")
        # walk up until we meet an already-inserted ancestor
        while ix not in nodes:
            nodes.add(ix)
            if ix.j == 0:
                break
            ix = parent(ix)
    return DyadicTree(frozenset(nodes))


def outer_leaves(tree: DyadicTree) -> Partition:
    if not tree.is_proper():
        raise DyadicError("improper-tree: outer leaves need a proper tree")
    if not tree.nodes:
        return Partition(frozenset({ROOT}))
    leaves = {c for n in tree.nodes for c in children(n) if c not in tree.nodes}
    return Partition(frozenset(leaves))


def uniform_tree(level: int) -> DyadicTree:
    """All nodes with level < ``level``; its partition is the uniform grid D_level."""
    if level < 0:
        raise DyadicError("level must be >= 0")
    return DyadicTree(frozenset(DyadicIndex(j, k) for j in range(level) for k in range(2**j)))

