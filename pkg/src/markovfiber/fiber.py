"""Brute-force fiber oracle.

Enumerates every nonnegative integer table with a given sufficient
statistic by depth-first cell assignment, then answers the questions the
sampler can only approximate: connectivity of the fiber graph under a move
set, indispensability of a move, and exact conditional p-values under the
hypergeometric-like weight 1/prod(x_ij!).

Everything here is deliberately simple; it is the ground truth the fast
paths are tested against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .tables import Configuration, Table, flat_index

__all__ = [
    "Fiber",
    "FiberOverflow",
    "UnionFind",
    "enumerate_fiber",
    "is_connected",
    "indispensable",
    "exact_pvalue",
]

DEFAULT_CAP = 5_000_000


class FiberOverflow(RuntimeError):
    """Enumeration passed the member cap; fall back to sampling."""


class UnionFind:
    def __init__(self, n: int) -> None:
        self.parent = list(range(n))
        self.size = [1] * n
        self.n_components = n

    def find(self, a: int) -> int:
        p = self.parent
        while p[a] != a:
            p[a] = p[p[a]]
            a = p[a]
        return a

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        self.n_components -= 1
        return True


@dataclass(frozen=True)
class Fiber:
    """All tables sharing one sufficient statistic, as flat count tuples."""

    t: tuple[int, ...]
    R: int
    C: int
    members: tuple[tuple[int, ...], ...]
    log_weights: tuple[float, ...] = field(repr=False)
    overflowed: bool = False
    cap: int = DEFAULT_CAP

    def __len__(self) -> int:
        return len(self.members)

    def index(self) -> dict[tuple[int, ...], int]:
        return {m: k for k, m in enumerate(self.members)}

    def tables(self):
        for m in self.members:
            yield Table(np.asarray(m, dtype=np.int64).reshape(self.R, self.C))


def _log_weight(member) -> float:
    return -sum(math.lgamma(x + 1) for x in member)


def enumerate_fiber(t, cfg: Configuration, cap: int = DEFAULT_CAP,
                    max_nodes: int | None = None) -> Fiber:
    """Depth-first enumeration of F_t = {x >= 0 : A x = t}.

    Cells are filled row-major with remaining-capacity pruning on rows,
    columns, and subtable terms; the last cell of a row, of a column (final
    row), or of a term forces its value outright.  Passing ``cap`` members
    stops the search and marks the fiber overflowed instead of raising;
    ``max_nodes`` (default 50 * cap + 10000 search-tree nodes) bounds the
    time spent in branches that die before reaching a member, so huge-total
    tables overflow promptly instead of wandering.
    """
    t = tuple(int(v) for v in t)
    if len(t) != cfg.T:
        raise ValueError(f"statistic has {len(t)} components, configuration expects {cfg.T}")
    R, C, Q = cfg.R, cfg.C, cfg.Q
    row_rem = [0] + list(t[:R])
    col_rem = [0] + list(t[R:R + C])
    term_rem = list(t[R + C:])
    if sum(row_rem) != sum(col_rem):
        raise ValueError("inconsistent statistic: row-sum total differs from column-sum total")

    # terms per cell, and the row-major-last cell of each term
    cell_terms: list[list[int]] = [[] for _ in range(R * C)]
    term_last = [-1] * Q
    for q in range(Q):
        for i, j in cfg.term_cells(q + 1):
            p = flat_index(i, j, C)
            cell_terms[p].append(q)
            if p > term_last[q]:
                term_last[q] = p

    members: list[tuple[int, ...]] = []
    counts = [0] * (R * C)
    overflowed = False
    budget = max_nodes if max_nodes is not None else 50 * cap + 10_000

    def rec(p: int) -> None:
        nonlocal overflowed, budget
        if overflowed:
            return
        budget -= 1
        if budget < 0:
            overflowed = True
            return
        if p == R * C:
            members.append(tuple(counts))
            if len(members) > cap:
                overflowed = True
                members.pop()
            return
        i, j = p // C + 1, p % C + 1
        hi = min(row_rem[i], col_rem[j])
        forced = []
        for q in cell_terms[p]:
            hi = min(hi, term_rem[q])
            if term_last[q] == p:
                forced.append(term_rem[q])
        if j == C:
            forced.append(row_rem[i])
        if i == R:
            forced.append(col_rem[j])
        if forced:
            v = forced[0]
            if any(w != v for w in forced) or v > hi:
                return
            lo = v
        else:
            lo, v = 0, 0
        for v in range(lo, hi + 1) if not forced else (lo,):
            counts[p] = v
            row_rem[i] -= v
            col_rem[j] -= v
            for q in cell_terms[p]:
                term_rem[q] -= v
            rec(p + 1)
            counts[p] = 0
            row_rem[i] += v
            col_rem[j] += v
            for q in cell_terms[p]:
                term_rem[q] += v

    rec(0)
    members.sort()
    return Fiber(
        t=t,
        R=R,
        C=C,
        members=tuple(members),
        log_weights=tuple(_log_weight(m) for m in members),
        overflowed=overflowed,
        cap=cap,
    )


def _move_deltas(basis, C: int):
    """Moves as (flat cell ids, coefficients) pairs."""
    out = []
    for move in basis:
        flats, coefs = move.flats_coefs(C)
        out.append((flats, coefs))
    return out


def is_connected(fiber: Fiber, basis) -> bool:
    """Is the fiber graph (edges x <-> x + z, both ends nonnegative) one
    component?  Singleton and empty fibers count as connected."""
    n = len(fiber)
    if n <= 1:
        return True
    idx = fiber.index()
    uf = UnionFind(n)
    deltas = _move_deltas(basis, fiber.C)
    for k, member in enumerate(fiber.members):
        for flats, coefs in deltas:
            target = list(member)
            ok = True
            for f, c in zip(flats, coefs):
                nv = target[f] + c
                if nv < 0:
                    ok = False
                    break
                target[f] = nv
            if not ok:
                continue
            other = idx.get(tuple(target))
            if other is not None:
                uf.union(k, other)
        if uf.n_components == 1:
            return True
    return uf.n_components == 1


def components(fiber: Fiber, basis) -> list[list[int]]:
    """Connected components as lists of member indices (for witnesses)."""
    n = len(fiber)
    idx = fiber.index()
    uf = UnionFind(n)
    deltas = _move_deltas(basis, fiber.C)
    for k, member in enumerate(fiber.members):
        for flats, coefs in deltas:
            target = list(member)
            ok = True
            for f, c in zip(flats, coefs):
                nv = target[f] + c
                if nv < 0:
                    ok = False
                    break
                target[f] = nv
            if not ok:
                continue
            other = idx.get(tuple(target))
            if other is not None:
                uf.union(k, other)
    groups: dict[int, list[int]] = {}
    for k in range(n):
        groups.setdefault(uf.find(k), []).append(k)
    return sorted(groups.values(), key=len, reverse=True)


def indispensable(z, cfg: Configuration, cap: int = DEFAULT_CAP) -> bool:
    """A move is indispensable when the fiber of its positive part is
    exactly {z+, z-}: no Markov basis can avoid it."""
    pos = [0] * (cfg.R * cfg.C)
    neg = [0] * (cfg.R * cfg.C)
    for i, j, c in z.entries:
        p = flat_index(i, j, cfg.C)
        if c > 0:
            pos[p] = c
        elif c < 0:
            neg[p] = -c
    t = cfg.matrix.astype(np.int64) @ np.asarray(pos, dtype=np.int64)
    fiber = enumerate_fiber(t, cfg, cap=cap)
    if fiber.overflowed:
        raise FiberOverflow(f"indispensability fiber exceeded cap {cap}")
    return set(fiber.members) == {tuple(pos), tuple(neg)}


def exact_pvalue(table: Table, cfg: Configuration, statistic,
                 cap: int = DEFAULT_CAP, tol: float = 1e-12) -> float:
    """Exact conditional p-value: total weight of fiber members whose
    statistic is >= the observed value (within ``tol``), weights
    proportional to 1/prod(x_ij!).

    ``statistic`` maps an (R, C) integer array to a float.
    """
    from .tables import sufficient_statistic

    t = sufficient_statistic(table, cfg)
    fiber = enumerate_fiber(t, cfg, cap=cap)
    if fiber.overflowed:
        raise FiberOverflow(f"fiber exceeded cap {cap}; use the sampler instead")
    observed = float(statistic(table.counts))
    shift = max(fiber.log_weights)
    total = 0.0
    tail = 0.0
    for member, lw in zip(fiber.members, fiber.log_weights):
        w = math.exp(lw - shift)
        total += w
        arr = np.asarray(member, dtype=np.int64).reshape(fiber.R, fiber.C)
        if float(statistic(arr)) >= observed - tol:
            tail += w
    return tail / total
