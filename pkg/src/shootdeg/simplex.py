"""Lattices and triangulations of the level simplex {alpha >= 0, sum(alpha) = a}."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np

from .errors import InvalidInput

SUM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class SimplexPoint:
    alpha: np.ndarray
    a: float

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=float).reshape(-1)
        object.__setattr__(self, "alpha", alpha)
        if self.a <= 0:
            raise InvalidInput("simplex level must be positive")
        if np.any(alpha < 0):
            raise InvalidInput(f"{alpha.tolist()} has negative coordinates")
        if abs(alpha.sum() - self.a) > SUM_TOL * self.a + 4 * np.finfo(float).eps * alpha.sum():
            raise InvalidInput(f"coordinates of {alpha.tolist()} do not sum to {self.a}")

    @classmethod
    def from_alpha(cls, alpha):
        alpha = np.asarray(alpha, dtype=float)
        return cls(alpha, float(alpha.sum()))

    @property
    def L(self):
        return self.alpha.shape[0]

    def on_boundary(self, tol=0.0):
        return bool(self.alpha.min() <= tol)

    def __repr__(self):
        return f"SimplexPoint({self.alpha.tolist()}, a={self.a})"


def compositions(k: int, L: int):
    """All nonnegative integer vectors of length L summing to k, lexicographic."""
    if L == 1:
        yield (k,)
        return
    for first in range(k, -1, -1):
        for rest in compositions(k - first, L - 1):
            yield (first,) + rest


@dataclass(frozen=True, eq=False)
class SimplexGrid:
    a: float
    L: int
    k: int

    def __post_init__(self):
        if self.k < 1 or self.L < 1 or self.a <= 0:
            raise InvalidInput("need a > 0, L >= 1 and k >= 1")
        m = np.array(list(compositions(self.k, self.L)), dtype=int)
        object.__setattr__(self, "multi", m)
        object.__setattr__(self, "points", self.a * m / self.k)
        object.__setattr__(self, "boundary", (m == 0).any(axis=1))
        object.__setattr__(self, "_index", {tuple(row): i for i, row in enumerate(m)})

    def __len__(self):
        return len(self.multi)

    @property
    def expected_count(self):
        return comb(self.k + self.L - 1, self.L - 1)

    def index(self, multi) -> int:
        return self._index[tuple(int(x) for x in multi)]

    def cells(self) -> np.ndarray:
        """Kuhn triangulation: array of shape (k^(L-1), L) of point indices."""
        ref = kuhn_cells(self.L - 1, self.k)
        return np.array([[self._index[v] for v in cell] for cell in ref], dtype=int)


@lru_cache(maxsize=64)
def kuhn_cells(d: int, k: int):
    """Cells of the k-fold lattice subdivision of a d-simplex, as tuples of multi-indices.

    Uses y_j = m_{j+1} + ... + m_{d}: the simplex k >= y_1 >= ... >= y_d >= 0 is a
    union of Kuhn simplices of the unit cube grid.
    """
    if d == 0:
        return (((k,),),)

    def to_multi(y):
        m = [k - y[0]] + [y[j - 1] - y[j] for j in range(1, d)] + [y[d - 1]]
        return tuple(m)

    cells = []
    for c in itertools.combinations_with_replacement(range(k), d):
        c = tuple(sorted(c, reverse=True))
        for perm in itertools.permutations(range(d)):
            pos = {j: i for i, j in enumerate(perm)}
            if any(c[j] == c[j + 1] and pos[j] > pos[j + 1] for j in range(d - 1)):
                continue
            y = list(c)
            verts = [to_multi(y)]
            for j in perm:
                y[j] += 1
                verts.append(to_multi(y))
            cells.append(tuple(verts))
    return tuple(cells)


def chart(points) -> np.ndarray:
    """Planar coordinates on the level simplex: drop the last barycentric coordinate."""
    return np.asarray(points, dtype=float)[..., :-1]


def random_simplex_points(a: float, L: int, count: int, rng, interior=True):
    """Uniform samples of the level simplex (Dirichlet(1, ..., 1) scaled by a)."""
    pts = rng.dirichlet(np.ones(L), size=count) * a
    if interior:
        pts = np.maximum(pts, 1e-9 * a)
        pts *= a / pts.sum(axis=1, keepdims=True)
    return pts
