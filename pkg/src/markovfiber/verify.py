"""Exhaustive desk-scale verification of move-basis claims.

Everything here is deliberately brute force: enumerate every table of a
bounded grand total, group the tables into fibers by their sufficient
statistic, and walk the move graph with union-find.  The point is to gate
the structural claims behind the move generators (every fiber connected,
every basic move indispensable) on instances small enough to check
completely, cross-validated against the depth-first fiber oracle.

Whole-family sweeps cut the model count down by symmetry: relabeling rows
and columns is a bijection of tables that commutes with the statistic and
with move generation, so only one representative per relabeling class needs
the full check.  A few raw (unrelabeled) models are spot-checked directly
each run to keep that reduction honest.
"""

from __future__ import annotations

import functools
import random
from dataclasses import dataclass
from itertools import combinations_with_replacement

import numpy as np

from . import models as _models
from .fiber import enumerate_fiber, indispensable, is_connected
from .models import ModelSpec
from .moves import basis_for_model, format_move
from .tables import Rectangle, build_configuration

__all__ = [
    "FiberWitness",
    "ConnectivityReport",
    "IndispensabilityReport",
    "SuiteReport",
    "connectivity_sweep",
    "connectivity_range",
    "indispensability_sweep",
    "change_point_models",
    "change_point_suite",
    "own_blocks_suite",
    "common_blocks_suite",
]


def _row_view(tables: np.ndarray) -> np.ndarray:
    """One opaque element per row; memcmp order, so searchsorted works."""
    a = np.ascontiguousarray(tables)
    return a.view(np.dtype((np.void, a.shape[1] * a.itemsize))).ravel()


@functools.lru_cache(maxsize=64)
def _universe(R: int, C: int, total: int):
    """All R x C tables with the given grand total, bytewise-sorted.

    Returns (tables, view): a (n, R*C) uint8 array and its void row view.
    Generated as multisets of cells, so every table appears exactly once.
    """
    n_cells = R * C
    if total == 0:
        tables = np.zeros((1, n_cells), dtype=np.uint8)
        return tables, _row_view(tables)
    combos = combinations_with_replacement(range(n_cells), total)
    idx = np.fromiter(
        (c for comb in combos for c in comb), dtype=np.int64
    ).reshape(-1, total)
    flat = idx + n_cells * np.arange(idx.shape[0], dtype=np.int64)[:, None]
    tables = np.bincount(flat.ravel(), minlength=idx.shape[0] * n_cells)
    tables = tables.reshape(idx.shape[0], n_cells).astype(np.uint8)
    order = np.argsort(_row_view(tables), kind="stable")
    tables = np.ascontiguousarray(tables[order])
    return tables, _row_view(tables)


def _unsigned_moves(basis, C: int):
    """One orientation per move pair, as (flat cells, coefficients) arrays."""
    seen: set[tuple] = set()
    out = []
    for mv in basis:
        flats, coefs = mv.flats_coefs(C)
        if (flats, tuple(-c for c in coefs)) in seen:
            continue
        seen.add((flats, coefs))
        out.append((np.array(flats, dtype=np.int64),
                    np.array(coefs, dtype=np.int16), mv))
    return out


class _DisjointSets:
    __slots__ = ("parent",)

    def __init__(self, n: int) -> None:
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        p = self.parent
        while p[a] != a:
            p[a] = p[p[a]]
            a = p[a]
        return a

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


@dataclass(frozen=True)
class FiberWitness:
    """A disconnected fiber: its statistic, size, component count, and one
    member from each of two different components (flat row-major)."""

    t: tuple[int, ...]
    size: int
    n_components: int
    members: tuple[tuple[int, ...], tuple[int, ...]]

    def to_dict(self) -> dict:
        return {
            "t": list(self.t),
            "size": self.size,
            "n_components": self.n_components,
            "members": [list(m) for m in self.members],
        }


@dataclass(frozen=True)
class ConnectivityReport:
    R: int
    C: int
    total: int
    n_tables: int
    n_fibers: int
    n_multi: int
    n_disconnected: int
    witnesses: tuple[FiberWitness, ...]
    cross_checks: int

    @property
    def ok(self) -> bool:
        return self.n_disconnected == 0

    def to_dict(self) -> dict:
        return {
            "grid": [self.R, self.C],
            "total": self.total,
            "n_tables": self.n_tables,
            "n_fibers": self.n_fibers,
            "n_multi_member_fibers": self.n_multi,
            "n_disconnected": self.n_disconnected,
            "connected": self.ok,
            "witnesses": [w.to_dict() for w in self.witnesses],
            "cross_checks": self.cross_checks,
        }


def connectivity_sweep(model: ModelSpec, R: int, C: int, total: int,
                       types: tuple[str, ...] | None = None, basis=None,
                       max_witnesses: int = 3, cross_check: int = 2,
                       seed: int = 0) -> ConnectivityReport:
    """Check that the model's move basis connects every fiber of the given
    grand total, by exhausting all tables of that total.

    ``types`` restricts block-model bases (witness hunting); ``cross_check``
    fibers are re-enumerated with the depth-first oracle and must agree,
    membership and connectivity both.
    """
    _models.require_valid(model, R, C)
    cfg = build_configuration(model, R, C)
    if basis is None:
        basis = basis_for_model(model, R, C, types=types)
    tables, view = _universe(R, C, total)
    n = tables.shape[0]

    t_float = tables.astype(np.float64) @ np.asarray(cfg.matrix, dtype=np.float64).T
    t_all = np.rint(t_float).astype(np.int32)
    _, fiber_id = np.unique(t_all, axis=0, return_inverse=True)
    fiber_id = fiber_id.ravel()
    n_fibers = int(fiber_id.max()) + 1 if n else 0
    sizes = np.bincount(fiber_id, minlength=n_fibers)
    multi_mask = sizes[fiber_id] >= 2
    keep = np.flatnonzero(multi_mask)
    n_multi = int(np.count_nonzero(sizes >= 2))

    dsu = _DisjointSets(keep.size)
    if keep.size:
        inv_keep = np.full(n, -1, dtype=np.int64)
        inv_keep[keep] = np.arange(keep.size)
        sub = tables[keep]
        for flats, coefs, _mv in _unsigned_moves(basis, C):
            valid = np.ones(keep.size, dtype=bool)
            for c, v in zip(flats[coefs < 0], -coefs[coefs < 0]):
                valid &= sub[:, c] >= v
            src = np.flatnonzero(valid)
            if not src.size:
                continue
            new = sub[src].astype(np.int16)
            new[:, flats] += coefs
            pos = np.searchsorted(view, _row_view(new.astype(np.uint8)))
            dst = inv_keep[pos]
            assert (dst >= 0).all()  # a move never leaves its fiber
            for a, b in zip(src.tolist(), dst.tolist()):
                dsu.union(a, b)

    roots = np.fromiter((dsu.find(i) for i in range(keep.size)),
                        dtype=np.int64, count=keep.size)
    fib_sub = fiber_id[keep]
    disconnected: list[int] = []
    if keep.size:
        enc = fib_sub.astype(np.int64) * (keep.size + 1) + roots
        u_fib = np.unique(enc) // (keep.size + 1)
        fib_ids, comp_counts = np.unique(u_fib, return_counts=True)
        disconnected = [int(f) for f, c in zip(fib_ids, comp_counts) if c >= 2]

    witnesses = []
    for f in disconnected[:max_witnesses]:
        members = np.flatnonzero(fib_sub == f)
        r0 = roots[members[0]]
        other = members[roots[members] != r0][0]
        witnesses.append(FiberWitness(
            t=tuple(int(v) for v in t_all[keep[members[0]]]),
            size=int(sizes[f]),
            n_components=int(np.unique(roots[members]).size),
            members=(tuple(int(v) for v in sub[members[0]]),
                     tuple(int(v) for v in sub[other])),
        ))

    checks = 0
    if cross_check and n_multi:
        rng = random.Random(seed)
        multi_fibers = np.flatnonzero(sizes >= 2)
        for f in rng.sample(list(multi_fibers), min(cross_check, len(multi_fibers))):
            t = tuple(int(v) for v in t_all[np.flatnonzero(fiber_id == f)[0]])
            fib = enumerate_fiber(t, cfg)
            mine = sorted(tuple(int(v) for v in row)
                          for row in tables[fiber_id == f])
            if sorted(fib.members) != mine:
                raise AssertionError(f"fiber membership mismatch at t={t}")
            if is_connected(fib, basis) != (int(f) not in disconnected):
                raise AssertionError(f"connectivity verdict mismatch at t={t}")
            checks += 1

    return ConnectivityReport(
        R=R, C=C, total=total, n_tables=n, n_fibers=n_fibers, n_multi=n_multi,
        n_disconnected=len(disconnected), witnesses=tuple(witnesses),
        cross_checks=checks,
    )


def connectivity_range(model: ModelSpec, R: int, C: int, max_total: int,
                       types: tuple[str, ...] | None = None,
                       cross_check: int = 2, seed: int = 0):
    """Connectivity sweeps for totals 2..max_total (smaller fibers are
    singletons, connected vacuously).  The basis is built once."""
    basis = basis_for_model(model, R, C, types=types)
    return [
        connectivity_sweep(model, R, C, total, basis=basis,
                           cross_check=cross_check, seed=seed + total)
        for total in range(2, max_total + 1)
    ]


@dataclass(frozen=True)
class IndispensabilityReport:
    R: int
    C: int
    n_moves: int
    failures: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {
            "grid": [self.R, self.C],
            "n_moves_unsigned": self.n_moves,
            "all_indispensable": self.ok,
            "failures": list(self.failures),
        }


def indispensability_sweep(model: ModelSpec, R: int, C: int,
                           cap: int = 100_000) -> IndispensabilityReport:
    """Every unsigned basis move must have the two-element fiber {z+, z-}."""
    cfg = build_configuration(model, R, C)
    basis = basis_for_model(model, R, C)
    failures = []
    n = 0
    for _flats, _coefs, mv in _unsigned_moves(basis, C):
        n += 1
        if not indispensable(mv, cfg, cap=cap):
            failures.append(format_move(mv))
    return IndispensabilityReport(R=R, C=C, n_moves=n, failures=tuple(failures))


def _rectangles(R: int, C: int):
    for a1 in range(1, R + 1):
        for a2 in range(a1, R + 1):
            for b1 in range(1, C + 1):
                for b2 in range(b1, C + 1):
                    if (a2 - a1 + 1) * (b2 - b1 + 1) >= 2:
                        yield Rectangle(a1, a2, b1, b2)


def change_point_models(R: int, C: int, max_rects: int = 2):
    """Every valid change-point model on the grid with 1..max_rects nested
    rectangles (the outermost rectangle must leave part of the grid out)."""
    rects = [r for r in _rectangles(R, C) if r.n_cells < R * C]
    for r in rects:
        yield ModelSpec(family=_models.CHANGE_POINT, rectangles=(r,))
    if max_rects >= 2:
        for outer in rects:
            for inner in rects:
                if inner != outer and outer.contains_rect(inner):
                    yield ModelSpec(family=_models.CHANGE_POINT,
                                    rectangles=(inner, outer))


def _shape_key(model: ModelSpec, R: int, C: int):
    """Relabeling-class key: grid plus rectangle shapes, transpose-reduced."""
    shapes = tuple((r.a2 - r.a1 + 1, r.b2 - r.b1 + 1) for r in model.rectangles)
    flipped = tuple((w, h) for h, w in shapes)
    return min((R, C, shapes), (C, R, flipped))


def _anchored(key) -> tuple[ModelSpec, int, int]:
    R, C, shapes = key
    rects = tuple(Rectangle(1, h, 1, w) for h, w in shapes)
    return ModelSpec(family=_models.CHANGE_POINT, rectangles=rects), R, C


@dataclass(frozen=True)
class SuiteReport:
    name: str
    models_raw: int
    models_checked: int
    raw_spot_checks: int
    connectivity_failures: tuple[str, ...]
    indispensability_failures: tuple[str, ...]
    witnesses: tuple[str, ...]
    n_fibers_checked: int

    @property
    def ok(self) -> bool:
        return not self.connectivity_failures and not self.indispensability_failures

    def to_dict(self) -> dict:
        return {
            "suite": self.name,
            "models_raw": self.models_raw,
            "models_checked": self.models_checked,
            "raw_spot_checks": self.raw_spot_checks,
            "n_multi_member_fibers_checked": self.n_fibers_checked,
            "connectivity_failures": list(self.connectivity_failures),
            "indispensability_failures": list(self.indispensability_failures),
            "witnesses": list(self.witnesses),
            "ok": self.ok,
        }


def _describe(model: ModelSpec, R: int, C: int) -> str:
    if model.family == _models.CHANGE_POINT:
        inner = " ".join(
            f"[{r.a1}..{r.a2}]x[{r.b1}..{r.b2}]" for r in model.rectangles)
        return f"{R}x{C} change-point {inner}"
    return (f"{R}x{C} {model.family} rows={list(model.row_bounds)} "
            f"cols={list(model.col_bounds)}")


def change_point_suite(max_dim: int = 4, max_total: int = 5,
                       max_rects: int = 2, sample_raw: int = 2,
                       seed: int = 0) -> SuiteReport:
    """Connectivity and indispensability for every change-point model with
    up to max_rects nested rectangles on every grid up to max_dim^2, over
    all fibers of total <= max_total.

    Models are grouped into relabeling classes (anchor the rectangles at the
    upper-left corner, reduce by transpose); one representative per class is
    fully checked, plus sample_raw random unreduced models per grid.
    """
    rng = random.Random(seed)
    conn_fail: list[str] = []
    ind_fail: list[str] = []
    raw_total = 0
    spot = 0
    fibers_checked = 0
    keys = {}
    raw_by_grid: dict[tuple[int, int], list[ModelSpec]] = {}
    for R in range(2, max_dim + 1):
        for C in range(2, max_dim + 1):
            grid_models = list(change_point_models(R, C, max_rects=max_rects))
            raw_total += len(grid_models)
            raw_by_grid[(R, C)] = grid_models
            for m in grid_models:
                keys.setdefault(_shape_key(m, R, C), None)

    def run(model: ModelSpec, R: int, C: int) -> int:
        nonlocal fibers_checked
        label = _describe(model, R, C)
        for rep in connectivity_range(model, R, C, max_total,
                                      cross_check=1, seed=rng.randrange(10**6)):
            fibers_checked += rep.n_multi
            if not rep.ok:
                conn_fail.append(f"{label} total={rep.total}: "
                                 f"{rep.n_disconnected} disconnected")
        ind = indispensability_sweep(model, R, C)
        if not ind.ok:
            ind_fail.append(f"{label}: {len(ind.failures)} dispensable")
        return 1

    checked = 0
    for key in keys:
        model, R, C = _anchored(key)
        checked += run(model, R, C)
    for (R, C), grid_models in raw_by_grid.items():
        for m in rng.sample(grid_models, min(sample_raw, len(grid_models))):
            run(m, R, C)
            spot += 1

    return SuiteReport(
        name="change-point", models_raw=raw_total, models_checked=checked,
        raw_spot_checks=spot, connectivity_failures=tuple(conn_fail),
        indispensability_failures=tuple(ind_fail), witnesses=(),
        n_fibers_checked=fibers_checked,
    )


def _block_model(family: str, row_bounds, col_bounds) -> ModelSpec:
    return ModelSpec(family=family, row_bounds=tuple(row_bounds),
                     col_bounds=tuple(col_bounds))


OWN_SUITE_GEOMETRIES = (
    (2, 2, (1, 2, 3), (1, 2, 3)),
    (3, 4, (1, 2, 4), (1, 3, 5)),
    (4, 4, (1, 3, 5), (1, 3, 5)),
    (6, 6, (1, 4, 7), (1, 3, 7)),
    (3, 3, (1, 2, 3, 4), (1, 2, 3, 4)),
    (4, 4, (1, 2, 3, 5), (1, 2, 3, 5)),
    (4, 5, (1, 2, 3, 5), (1, 2, 4, 6)),
    (6, 6, (1, 3, 5, 7), (1, 3, 5, 7)),
)

COMMON_SUITE_GEOMETRIES = (
    (3, 3, (1, 2, 3, 4), (1, 2, 3, 4)),
    (4, 4, (1, 2, 3, 5), (1, 2, 3, 5)),
    (4, 6, (1, 2, 3, 5), (1, 3, 5, 7)),
    (5, 5, (1, 2, 4, 6), (1, 2, 4, 6)),
    (6, 6, (1, 3, 5, 7), (1, 3, 5, 7)),
)


def own_blocks_suite(max_total: int = 5, seed: int = 0) -> SuiteReport:
    """Own-parameter block models, two and three blocks, grids up to 6x6:
    the Type I(+II) basis connects every fiber of total <= max_total; with
    three blocks, Type I alone must leave a disconnected witness fiber."""
    conn_fail: list[str] = []
    witnesses: list[str] = []
    fibers_checked = 0
    checked = 0
    for R, C, rb, cb in OWN_SUITE_GEOMETRIES:
        model = _block_model(_models.OWN_BLOCKS, rb, cb)
        label = _describe(model, R, C)
        for rep in connectivity_range(model, R, C, max_total,
                                      cross_check=1, seed=seed):
            fibers_checked += rep.n_multi
            if not rep.ok:
                conn_fail.append(f"{label} total={rep.total}")
        checked += 1
    # negative control: three blocks, minors only, must disconnect somewhere
    for R, C, rb, cb in ((3, 3, (1, 2, 3, 4), (1, 2, 3, 4)),
                         (4, 4, (1, 2, 3, 5), (1, 2, 3, 5))):
        model = _block_model(_models.OWN_BLOCKS, rb, cb)
        for total in range(2, max_total + 1):
            rep = connectivity_sweep(model, R, C, total, types=("I",),
                                     cross_check=0)
            if not rep.ok:
                w = rep.witnesses[0]
                witnesses.append(
                    f"{_describe(model, R, C)} types=I total={total} "
                    f"t={list(w.t)} size={w.size}")
                break
    return SuiteReport(
        name="own-blocks", models_raw=len(OWN_SUITE_GEOMETRIES),
        models_checked=checked, raw_spot_checks=0,
        connectivity_failures=tuple(conn_fail),
        indispensability_failures=(), witnesses=tuple(witnesses),
        n_fibers_checked=fibers_checked,
    )


def common_blocks_suite(max_total: int = 5, seed: int = 0) -> SuiteReport:
    """Common-effect block models with three blocks, grids up to 6x6: the
    Type I-IV basis connects every fiber of total <= max_total; Types I-III
    alone must leave a disconnected witness fiber."""
    conn_fail: list[str] = []
    witnesses: list[str] = []
    fibers_checked = 0
    checked = 0
    for R, C, rb, cb in COMMON_SUITE_GEOMETRIES:
        model = _block_model(_models.COMMON_BLOCKS, rb, cb)
        label = _describe(model, R, C)
        for rep in connectivity_range(model, R, C, max_total,
                                      cross_check=1, seed=seed):
            fibers_checked += rep.n_multi
            if not rep.ok:
                conn_fail.append(f"{label} total={rep.total}")
        checked += 1
    for R, C, rb, cb in COMMON_SUITE_GEOMETRIES[:2]:
        model = _block_model(_models.COMMON_BLOCKS, rb, cb)
        for total in range(2, max_total + 1):
            rep = connectivity_sweep(model, R, C, total,
                                     types=("I", "II", "III"), cross_check=0)
            if not rep.ok:
                w = rep.witnesses[0]
                witnesses.append(
                    f"{_describe(model, R, C)} types=I,II,III total={total} "
                    f"t={list(w.t)} size={w.size}")
                break
    return SuiteReport(
        name="common-blocks", models_raw=len(COMMON_SUITE_GEOMETRIES),
        models_checked=checked, raw_spot_checks=0,
        connectivity_failures=tuple(conn_fail),
        indispensability_failures=(), witnesses=tuple(witnesses),
        n_fibers_checked=fibers_checked,
    )
