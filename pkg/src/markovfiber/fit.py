"""Maximum-likelihood fitting by iterative proportional scaling, and the
test statistics evaluated on fiber samples.

The fitted cell means under any model here depend on a table only through
its sufficient statistic, so the null fit is a single constant table on the
whole fiber.  For the nested likelihood-ratio statistic the alternative fit
varies, but only through the diagonal block sums; those get cached per
block-sum vector, which is what makes million-step sampling runs affordable.

Conventions: 0 * log(0/anything) := 0 by continuity; a group with observed
sum 0 pins its cells to 0 and scaling continues.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import models as _models
from .tables import Table, build_configuration, flat_index

__all__ = [
    "FitResult",
    "FitError",
    "ipf_fit",
    "chi_square",
    "g_square",
    "llr_nested",
    "ChiSquareTracker",
    "GSquareTracker",
    "LLRTracker",
    "make_tracker",
]


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class FitResult:
    expected: np.ndarray
    iterations: int
    max_discrepancy: float
    converged: bool


def _scaling_groups(model, R: int, C: int) -> list[list[int]]:
    """Flat cell indices per constraint group: rows, columns, subtable terms."""
    groups = [[flat_index(i, j, C) for j in range(1, C + 1)] for i in range(1, R + 1)]
    groups += [[flat_index(i, j, C) for i in range(1, R + 1)] for j in range(1, C + 1)]
    for _, cells in _models.terms(model, R, C):
        groups.append(sorted(flat_index(i, j, C) for i, j in cells))
    return groups


def _ipf_core(n_cells: int, groups: list[np.ndarray], targets: list[float],
              tol: float, max_iter: int, total: float, x_flat=None) -> FitResult:
    """Cyclic proportional scaling toward the group targets.

    Starts at the uniform table (interior point).  When ``x_flat`` is given,
    the log-likelihood is asserted nondecreasing across cycles, in the
    Poisson form sum(x log m) - sum(m): each scaling step maximizes it along
    its own multiplicative direction, so the cycle composition must ascend
    (the multinomial form agrees once sum(m) is back at the grand total).
    The in-sampler refits skip that bookkeeping.
    """
    m = np.full(n_cells, total / n_cells if total > 0 else 0.0, dtype=np.float64)

    pos_x = None
    last_ll = -math.inf
    if x_flat is not None:
        pos_x = [(p, float(v)) for p, v in enumerate(x_flat) if v > 0]

    disc = math.inf
    it = 0
    for it in range(1, max_iter + 1):
        for g, tau in zip(groups, targets):
            s = float(m[g].sum())
            if tau == 0.0:
                if s != 0.0:
                    m[g] = 0.0
                continue
            if s == 0.0:
                raise FitError("scaling group pinned to zero but its target is positive")
            m[g] *= tau / s
        disc = 0.0
        for g, tau in zip(groups, targets):
            d = abs(float(m[g].sum()) - tau)
            if d > disc:
                disc = d
        if pos_x is not None:
            ll = sum(v * math.log(m[p]) for p, v in pos_x) - float(m.sum())
            assert ll >= last_ll - 1e-9, f"log-likelihood decreased: {last_ll} -> {ll}"
            last_ll = ll
        if disc <= tol:
            return FitResult(m, it, disc, True)
    return FitResult(m, it, disc, False)


def ipf_fit(table: Table, model, tol: float = 1e-10, max_iter: int = 10_000) -> FitResult:
    """Fit the model's expected cell means to the table by cycling over
    rows, columns, and subtable terms; convergence is measured on the
    sufficient-statistic coordinates."""
    R, C = table.R, table.C
    _models.require_valid(model, R, C)
    x = table.vec().astype(np.float64)
    groups = [np.asarray(g, dtype=np.intp) for g in _scaling_groups(model, R, C)]
    targets = [float(x[g].sum()) for g in groups]
    res = _ipf_core(R * C, groups, targets, tol, max_iter, float(x.sum()), x_flat=x)
    return FitResult(res.expected.reshape(R, C), res.iterations,
                     res.max_discrepancy, res.converged)


def chi_square(table: Table, expected: np.ndarray) -> float:
    """Pearson chi-square; a cell with zero expectation and zero count
    contributes 0, a zero expectation under a positive count gives inf."""
    x = table.counts.astype(np.float64)
    m = np.asarray(expected, dtype=np.float64)
    if x.shape != m.shape:
        raise ValueError("table and expected shapes differ")
    out = 0.0
    for xv, mv in zip(x.ravel(), m.ravel()):
        if mv == 0.0:
            if xv != 0.0:
                return math.inf
            continue
        d = xv - mv
        out += d * d / mv
    return out


def g_square(table: Table, expected: np.ndarray) -> float:
    """Likelihood-ratio statistic 2 sum x log(x/m); zero counts contribute 0."""
    x = table.counts.astype(np.float64)
    m = np.asarray(expected, dtype=np.float64)
    if x.shape != m.shape:
        raise ValueError("table and expected shapes differ")
    out = 0.0
    for xv, mv in zip(x.ravel(), m.ravel()):
        if xv > 0.0:
            if mv == 0.0:
                return math.inf
            out += xv * math.log(xv / mv)
    return 2.0 * out


def llr_nested(table: Table, inner, outer, tol: float = 1e-10,
               max_iter: int = 10_000) -> float:
    """2 sum x log(m2/m1) for nested models (inner within outer)."""
    R, C = table.R, table.C
    if not _models.is_nested(inner, outer, R, C):
        raise FitError("models are not nested: every inner constraint must lie in the outer row space")
    fit1 = ipf_fit(table, inner, tol=tol, max_iter=max_iter)
    fit2 = ipf_fit(table, outer, tol=tol, max_iter=max_iter)
    out = 0.0
    for xv, m1, m2 in zip(table.counts.ravel(), fit1.expected.ravel(), fit2.expected.ravel()):
        if xv > 0:
            if m2 <= 0.0 or m1 <= 0.0:
                raise FitError("positive count over a zero fitted mean; fit is on the boundary")
            out += float(xv) * math.log(m2 / m1)
    val = 2.0 * out
    if val < -1e-9:
        raise FitError(f"nested LLR came out negative ({val}); fits did not converge")
    return val


# ---------------------------------------------------------------------------
# statistic trackers for the sampler
#
# Contract with mcmc.walk: start(x) returns the statistic at the initial
# state; value_after(x, flats, coefs) is called only for a proposal that is
# about to be accepted (x is the state before the move); accept(x_new,
# value) is called right after the state is updated.  Trackers are also
# plain callables on (R, C) integer arrays, so the fiber oracle can reuse
# them.  fork() yields an independent tracker for another chain.


class _FixedExpectedTracker:
    """Base for statistics against a fixed null fit (constant on the fiber)."""

    RESET_EVERY = 4096  # full recompute cadence, kills float drift

    def __init__(self, table: Table, model, tol: float = 1e-10) -> None:
        self.R, self.C = table.R, table.C
        self.model = model
        fit = ipf_fit(table, model, tol=tol)
        if not fit.converged:
            raise FitError("null fit did not converge; cannot track a statistic against it")
        self.expected = fit.expected
        self._m = [float(v) for v in fit.expected.ravel()]
        self._value = 0.0
        self._n_accept = 0

    def _full(self, x_flat) -> float:
        raise NotImplementedError

    def _cell_term(self, xv: float, mv: float) -> float:
        raise NotImplementedError

    def __call__(self, arr) -> float:
        return self._full([int(v) for v in np.asarray(arr).ravel()])

    def start(self, x_flat) -> float:
        self._value = self._full(x_flat)
        self._n_accept = 0
        return self._value

    def value_after(self, x_flat, flats, coefs) -> float:
        v = self._value
        m = self._m
        for f, c in zip(flats, coefs):
            xv = x_flat[f]
            v += self._cell_term(xv + c, m[f]) - self._cell_term(xv, m[f])
        return v

    def accept(self, x_flat, value: float) -> None:
        self._n_accept += 1
        if self._n_accept % self.RESET_EVERY == 0:
            self._value = self._full(x_flat)
        else:
            self._value = value

    def fork(self):
        import copy

        return copy.copy(self)


class ChiSquareTracker(_FixedExpectedTracker):
    """Pearson chi-square against the fixed null fit.

    Cells with zero fitted mean keep zero counts on the whole fiber (their
    constraint group sums to 0), so they contribute 0 and never blow up.
    """

    def _cell_term(self, xv, mv) -> float:
        if mv == 0.0:
            return 0.0
        d = xv - mv
        return d * d / mv

    def _full(self, x_flat) -> float:
        m = self._m
        out = 0.0
        for xv, mv in zip(x_flat, m):
            if mv != 0.0:
                d = xv - mv
                out += d * d / mv
        return out


class GSquareTracker(_FixedExpectedTracker):
    """2 sum x log(x/m) against the fixed null fit."""

    def _cell_term(self, xv, mv) -> float:
        if xv <= 0 or mv == 0.0:
            return 0.0
        return 2.0 * xv * math.log(xv / mv)

    def _full(self, x_flat) -> float:
        m = self._m
        out = 0.0
        for xv, mv in zip(x_flat, m):
            if xv > 0 and mv != 0.0:
                out += xv * math.log(xv / mv)
        return 2.0 * out


class LLRTracker:
    """Nested log-likelihood ratio 2 sum x log(m2/m1).

    m1 (inner fit) is constant on the fiber.  m2 (outer fit) depends on the
    table only through the diagonal block sums, because rows, columns, and
    the inner terms are fixed; refits are cached per block-sum vector.  The
    per-cell log-ratio is sanitized to 0 wherever a fitted mean vanishes,
    which is exact: a zero fitted group sum forces zero counts there on
    every table sharing that statistic.
    """

    RESET_EVERY = 2048

    def __init__(self, table: Table, inner, outer, tol: float = 1e-10,
                 chain_tol: float = 1e-8) -> None:
        R, C = table.R, table.C
        if not _models.is_nested(inner, outer, R, C):
            raise FitError("models are not nested")
        self.R, self.C = R, C
        self.inner, self.outer = inner, outer
        self.chain_tol = chain_tol

        fit1 = ipf_fit(table, inner, tol=tol)
        if not fit1.converged:
            raise FitError("inner fit did not converge")
        self._log_m1 = [
            math.log(v) if v > 0 else 0.0 for v in fit1.expected.ravel()
        ]
        self._m1_zero = [v <= 0 for v in fit1.expected.ravel()]

        # outer-model scaling geometry, reused for every cached refit
        self._groups = [np.asarray(g, dtype=np.intp)
                        for g in _scaling_groups(outer, R, C)]
        x = table.vec().astype(np.float64)
        self._fixed_targets = [float(x[g].sum()) for g in self._groups[:R + C]]
        term_groups = self._groups[R + C:]
        self._term_groups = term_groups
        self._cell_term_idx = [[] for _ in range(R * C)]
        for q, g in enumerate(term_groups):
            for p in g:
                self._cell_term_idx[p].append(q)
        self._cache: dict[tuple[float, ...], list[float]] = {}

        b0 = tuple(float(x[g].sum()) for g in term_groups)
        self._b = b0
        self._L = self._log_ratio(b0)
        self._value = self._eval(list(int(v) for v in x), self._L)
        self._n_accept = 0

    def _log_ratio(self, b: tuple[float, ...]) -> list[float]:
        cached = self._cache.get(b)
        if cached is not None:
            return cached
        targets = self._fixed_targets + list(b)
        total = sum(self._fixed_targets[:self.R])
        res = _ipf_core(self.R * self.C, self._groups, targets,
                        self.chain_tol, 10_000, total)
        if not res.converged:
            raise FitError("outer refit did not converge on a fiber state")
        L = []
        for p, m2 in enumerate(res.expected):
            if m2 <= 0.0 or self._m1_zero[p]:
                L.append(0.0)
            else:
                L.append(math.log(float(m2)) - self._log_m1[p])
        self._cache[b] = L
        return L

    def _eval(self, x_flat, L) -> float:
        return 2.0 * sum(xv * lv for xv, lv in zip(x_flat, L) if xv)

    def __call__(self, arr) -> float:
        x = [int(v) for v in np.asarray(arr).ravel()]
        b = tuple(float(sum(x[p] for p in g)) for g in self._term_groups)
        return self._eval(x, self._log_ratio(b))

    def start(self, x_flat) -> float:
        b = tuple(float(sum(x_flat[p] for p in g)) for g in self._term_groups)
        self._b = b
        self._L = self._log_ratio(b)
        self._pending = (b, self._L)
        self._value = self._eval(x_flat, self._L)
        self._n_accept = 0
        return self._value

    def value_after(self, x_flat, flats, coefs) -> float:
        db = {}
        for f, c in zip(flats, coefs):
            for q in self._cell_term_idx[f]:
                db[q] = db.get(q, 0) + c
        if not any(db.values()):
            L = self._L
            self._pending = (self._b, L)
            return self._value + 2.0 * sum(c * L[f] for f, c in zip(flats, coefs))
        b_new = tuple(
            bv + db.get(q, 0) for q, bv in enumerate(self._b)
        )
        L_new = self._log_ratio(b_new)
        self._pending = (b_new, L_new)
        delta = dict(zip(flats, coefs))
        val = 2.0 * sum(
            (xv + delta.get(p, 0)) * lv
            for p, (xv, lv) in enumerate(zip(x_flat, L_new))
            if xv or p in delta
        )
        return val

    def accept(self, x_flat, value: float) -> None:
        self._b, self._L = self._pending
        self._n_accept += 1
        if self._n_accept % self.RESET_EVERY == 0:
            self._value = self._eval(x_flat, self._L)
        else:
            self._value = value

    def fork(self):
        import copy

        twin = copy.copy(self)
        twin._cache = dict(self._cache)
        return twin


def make_tracker(stat: str, table: Table, model, alt=None, tol: float = 1e-10):
    """Statistic factory for the CLI: chi2 | g2 | llr."""
    if stat == "chi2":
        return ChiSquareTracker(table, model, tol=tol)
    if stat == "g2":
        return GSquareTracker(table, model, tol=tol)
    if stat == "llr":
        if alt is None:
            raise FitError("llr needs an alternative (outer) model")
        return LLRTracker(table, model, alt, tol=tol)
    raise ValueError(f"unknown statistic {stat!r}")
