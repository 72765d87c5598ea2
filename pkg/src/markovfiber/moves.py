"""Markov-basis move generation for subtable-effect models.

A move is an integer table z with A z = 0; adding z (or -z) steps between
tables in the same fiber.  The bases constructed here are:

* change-point models: all degree-2 basic moves
  (i,j)(i',j') - (i',j)(i,j') whose corner strata balance — the unique
  minimal Markov basis for the nested-rectangle configuration;
* own-parameter block models: Type I, plus degree-3 loops whose six cells
  sit in pairwise-distinct off-diagonal blocks (Type II) — again the unique
  minimal basis (Type II is vacuous when N = 2);
* common-effect and general block models: Types I-IV, where Type III loops
  carry one +1 and one -1 cell in distinct diagonal blocks and Type IV is a
  degree-4 double interchange between two diagonal blocks, including its
  transpose and the degenerate index coincidences that produce entries of
  +-2 (those non-square-free moves are required: dropping them disconnects
  small fibers, which the brute-force oracle demonstrates).

Bases are sign-invariant: every generator emits both orientations.  Grids
up to ``enumerate_threshold`` cells (default 400) are enumerated into a
compact flat-array store; larger grids get a lazy rejection sampler with the
same per-move support.
"""

from __future__ import annotations

from array import array
from dataclasses import dataclass
from itertools import combinations, permutations

import numpy as np

from . import models as _models
from .tables import Configuration, flat_index

__all__ = [
    "Move",
    "MoveBasis",
    "LazyMoveBasis",
    "basis_change_point",
    "basis_block",
    "basis_for_model",
    "random_move",
    "is_kernel_move",
    "format_move",
    "dump_moves",
]

TYPE_NAMES = ("I", "II", "III", "IV", "IVt")
_TYPE_CODE = {name: k for k, name in enumerate(TYPE_NAMES)}


@dataclass(frozen=True)
class Move:
    """Sparse move: ((i, j, coef), ...) sorted by cell, plus a type tag."""

    entries: tuple[tuple[int, int, int], ...]
    mtype: str

    @property
    def degree(self) -> int:
        return sum(c for _, _, c in self.entries if c > 0)

    def flats_coefs(self, C: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
        flats = tuple(flat_index(i, j, C) for i, j, _ in self.entries)
        coefs = tuple(c for _, _, c in self.entries)
        return flats, coefs

    def negated(self) -> "Move":
        return Move(tuple((i, j, -c) for i, j, c in self.entries), self.mtype)

    def as_array(self, R: int, C: int) -> np.ndarray:
        out = np.zeros((R, C), dtype=np.int64)
        for i, j, c in self.entries:
            out[i - 1, j - 1] = c
        return out


def format_move(move: Move) -> str:
    cells = " ".join(f"{i},{j}:{c:+d}" for i, j, c in move.entries)
    return f"{move.degree} {move.mtype}  {cells}"


class MoveBasis:
    """Sign-invariant enumerated move set in compact flat-array storage.

    ``_flat``/``_coef`` hold the concatenated sparse entries of all moves,
    ``_off`` the per-move offsets; this keeps half-million-move bases (a
    12x12 common-block grid) at a few tens of MB.
    """

    kind = "enumerated"

    def __init__(self, R: int, C: int, model) -> None:
        self.R = R
        self.C = C
        self.model = model
        self._flat = array("i")
        self._coef = array("b")
        self._off = array("i", [0])
        self._tcode = bytearray()
        self._seen: set | None = set()

    def _add(self, flats, coefs, tcode: int) -> bool:
        key = tuple(sorted(zip(flats, coefs)))
        assert self._seen is not None, "basis already sealed"
        if key in self._seen:
            return False
        self._seen.add(key)
        for f, c in key:
            self._flat.append(f)
            self._coef.append(c)
        self._off.append(len(self._flat))
        self._tcode.append(tcode)
        return True

    def _seal(self) -> "MoveBasis":
        self._seen = None  # drop the dedup index once building is done
        return self

    def __len__(self) -> int:
        return len(self._tcode)

    def move(self, k: int) -> Move:
        lo, hi = self._off[k], self._off[k + 1]
        C = self.C
        entries = tuple(
            (self._flat[p] // C + 1, self._flat[p] % C + 1, self._coef[p])
            for p in range(lo, hi)
        )
        return Move(entries, TYPE_NAMES[self._tcode[k]])

    def __iter__(self):
        return (self.move(k) for k in range(len(self)))

    def counts_by_type(self) -> dict[str, int]:
        out = {name: 0 for name in TYPE_NAMES}
        for code in self._tcode:
            out[TYPE_NAMES[code]] += 1
        return {name: n for name, n in out.items() if n}

    def move_arrays(self) -> tuple[array, array, array]:
        """(offsets, flat cell ids, coefficients) for the sampler's hot loop."""
        return self._off, self._flat, self._coef


def _strata_grid(model, R: int, C: int) -> list[list[int]]:
    if model.family == _models.INDEPENDENCE:
        return [[1] * (C + 1) for _ in range(R + 1)]
    return [
        [0] * (C + 1)
    ] + [
        [0] + [_models.cell_stratum(model, R, C, i, j) for j in range(1, C + 1)]
        for i in range(1, R + 1)
    ]


def _term_grids(model, R: int, C: int) -> list[list[list[bool]]]:
    """1-based membership grids for each subtable term."""
    grids = []
    for _, cells in _models.terms(model, R, C):
        g = [[False] * (C + 1) for _ in range(R + 1)]
        for i, j in cells:
            g[i][j] = True
        grids.append(g)
    return grids


def _terms_balanced(term_grids, entries) -> bool:
    for g in term_grids:
        if sum(c for i, j, c in entries if g[i][j]) != 0:
            return False
    return True


def basis_change_point(model, R: int, C: int) -> MoveBasis:
    """All basic moves whose 2x2 corner strata balance, both orientations.

    Accepts change-point and independence specs (the latter has a single
    stratum, so every minor qualifies).
    """
    if model.family not in (_models.CHANGE_POINT, _models.INDEPENDENCE):
        raise _models.ModelError(f"change-point basis needs a change-point model, got {model.family}")
    _models.require_valid(model, R, C)
    strata = _strata_grid(model, R, C)
    basis = MoveBasis(R, C, model)
    for i1, i2 in combinations(range(1, R + 1), 2):
        si1, si2 = strata[i1], strata[i2]
        for j1, j2 in combinations(range(1, C + 1), 2):
            if sorted((si1[j1], si2[j2])) != sorted((si1[j2], si2[j1])):
                continue
            f11, f12 = flat_index(i1, j1, C), flat_index(i1, j2, C)
            f21, f22 = flat_index(i2, j1, C), flat_index(i2, j2, C)
            basis._add((f11, f22, f12, f21), (1, 1, -1, -1), _TYPE_CODE["I"])
            basis._add((f11, f22, f12, f21), (-1, -1, 1, 1), _TYPE_CODE["I"])
    return basis._seal()


def _band_tables(model, R: int, C: int) -> tuple[list[int], list[int], int]:
    """1-based band id per row and per column; leftover rows/cols (general
    model) get band N+1 so the complement is still carved into blocks."""
    N = _models.n_blocks(model)
    rows = [0] + [_models.row_band(model, i) for i in range(1, R + 1)]
    cols = [0] + [_models.col_band(model, j) for j in range(1, C + 1)]
    return rows, cols, N


def _block_loops(basis, model, R, C, term_grids, want_ii, want_iii) -> None:
    """Degree-3 loops classified into Types II and III by block geometry."""
    rband, cband, N = _band_tables(model, R, C)
    rows_range = range(1, R + 1)
    cols_range = range(1, C + 1)
    for rows in combinations(rows_range, 3):
        for cols in combinations(cols_range, 3):
            for pos in permutations((0, 1, 2)):
                for shift in (1, 2):
                    neg = tuple(pos[(k + shift) % 3] for k in range(3))
                    entries = tuple(
                        (rows[k], cols[pos[k]], 1) for k in range(3)
                    ) + tuple((rows[k], cols[neg[k]], -1) for k in range(3))
                    blocks = [(rband[i], cband[j]) for i, j, _ in entries]
                    in_s = [k == l and k <= N for k, l in blocks]
                    n_s = sum(in_s)
                    if n_s == 0:
                        if not want_ii:
                            continue
                        if len(set(blocks)) != 6:
                            continue
                        tcode = _TYPE_CODE["II"]
                    elif n_s == 2 and want_iii:
                        s_entries = [e for e, s in zip(entries, in_s) if s]
                        (i1, j1, c1), (i2, j2, c2) = s_entries
                        if c1 + c2 != 0:
                            continue
                        if (rband[i1], cband[j1]) == (rband[i2], cband[j2]):
                            continue
                        rest = [b for b, s in zip(blocks, in_s) if not s]
                        if len(set(rest)) != 4:
                            continue
                        tcode = _TYPE_CODE["III"]
                    else:
                        continue
                    if not _terms_balanced(term_grids, entries):
                        continue
                    flats = [flat_index(i, j, C) for i, j, _ in entries]
                    basis._add(flats, [c for _, _, c in entries], tcode)


def _type_iv_entries(i1, i2, i3, i4, j1, j2, j3, j4):
    """Accumulate the degree-4 double-interchange pattern; coincident indices
    stack into +-2 entries (the non-square-free moves)."""
    acc: dict[tuple[int, int], int] = {}
    for (i, j), c in (
        ((i1, j1), 1), ((i2, j2), 1), ((i3, j3), 1), ((i4, j4), 1),
        ((i1, j3), -1), ((i2, j4), -1), ((i3, j2), -1), ((i4, j1), -1),
    ):
        acc[(i, j)] = acc.get((i, j), 0) + c
    return tuple((i, j, c) for (i, j), c in acc.items() if c)


def _block_type_iv(basis, model, R, C, term_grids, transposed: bool) -> None:
    rband, cband, N = _band_tables(model, R, C)
    if transposed:
        # run the row-pattern generator on the transposed geometry
        rband, cband = cband, rband
        R, C = C, R
    rows_of = [[] for _ in range(max(rband[1:]) + 1)]
    for i in range(1, R + 1):
        rows_of[rband[i]].append(i)
    cols_of = [[] for _ in range(max(cband[1:]) + 1)]
    for j in range(1, C + 1):
        cols_of[cband[j]].append(j)
    tcode = _TYPE_CODE["IVt" if transposed else "IV"]
    true_c = basis.C
    for k in range(1, N + 1):
        for l in range(1, N + 1):
            if k == l or not rows_of[k] or not rows_of[l]:
                continue
            other_cols = [
                j for j in range(1, C + 1) if cband[j] != k and cband[j] != l
            ]
            if not cols_of[k] or not cols_of[l] or not other_cols:
                continue
            for i1 in rows_of[k]:
                for i2 in rows_of[k]:
                    for i3 in rows_of[l]:
                        for i4 in rows_of[l]:
                            for j1 in cols_of[k]:
                                for j2 in cols_of[l]:
                                    for j3 in other_cols:
                                        for j4 in other_cols:
                                            entries = _type_iv_entries(
                                                i1, i2, i3, i4, j1, j2, j3, j4
                                            )
                                            if transposed:
                                                entries = tuple(
                                                    (j, i, c) for i, j, c in entries
                                                )
                                            if not _terms_balanced(term_grids, entries):
                                                continue
                                            flats = [
                                                flat_index(i, j, true_c)
                                                for i, j, _ in entries
                                            ]
                                            basis._add(
                                                flats,
                                                [c for _, _, c in entries],
                                                tcode,
                                            )


def basis_block(model, R: int, C: int, types: tuple[str, ...] | None = None) -> MoveBasis:
    """Markov basis for a block-family model.

    Default type selection: own-parameter models get Types I+II (the unique
    minimal basis; Type II is vacuous for N = 2), common/general models get
    Types I-IV with Type IV transposes.  ``types`` restricts the selection,
    which the verification sweeps use to exhibit disconnection witnesses.
    """
    if model.family not in (_models.OWN_BLOCKS, _models.COMMON_BLOCKS, _models.GENERAL_BLOCKS):
        raise _models.ModelError(f"block basis needs a block-family model, got {model.family}")
    _models.require_valid(model, R, C)
    if types is None:
        types = ("I", "II") if model.family == _models.OWN_BLOCKS else ("I", "II", "III", "IV", "IVt")
    unknown = set(types) - set(TYPE_NAMES)
    if unknown:
        raise ValueError(f"unknown move types {sorted(unknown)}")
    term_grids = _term_grids(model, R, C)
    basis = MoveBasis(R, C, model)
    if "I" in types:
        for i1, i2 in combinations(range(1, R + 1), 2):
            for j1, j2 in combinations(range(1, C + 1), 2):
                entries = ((i1, j1, 1), (i2, j2, 1), (i1, j2, -1), (i2, j1, -1))
                if not _terms_balanced(term_grids, entries):
                    continue
                flats = [flat_index(i, j, C) for i, j, _ in entries]
                coefs = [c for _, _, c in entries]
                basis._add(flats, coefs, _TYPE_CODE["I"])
                basis._add(flats, [-c for c in coefs], _TYPE_CODE["I"])
    if "II" in types or "III" in types:
        _block_loops(basis, model, R, C, term_grids, "II" in types, "III" in types)
    if "IV" in types:
        _block_type_iv(basis, model, R, C, term_grids, transposed=False)
    if "IVt" in types:
        _block_type_iv(basis, model, R, C, term_grids, transposed=True)
    return basis._seal()


class LazyMoveBasis:
    """Rejection sampler over the same move families, for grids too large to
    enumerate.  Draw a type with weight proportional to its raw pattern-space
    size, then uniform indices; invalid candidates are rejected and redrawn,
    so the selection is state-independent and sign-symmetric."""

    kind = "lazy"

    def __init__(self, model, R: int, C: int, types: tuple[str, ...]) -> None:
        self.model = model
        self.R = R
        self.C = C
        self.types = types
        self._term_grids = _term_grids(model, R, C)
        self._strata = (
            _strata_grid(model, R, C)
            if model.family in (_models.CHANGE_POINT, _models.INDEPENDENCE)
            else None
        )
        if self._strata is None:
            self._rband, self._cband, self._N = _band_tables(model, R, C)
        weights = []
        for t in types:
            weights.append(self._pattern_space(t))
        total = float(sum(weights))
        if total <= 0:
            raise ValueError("lazy basis has empty pattern space")
        self._cum = []
        acc = 0.0
        for w in weights:
            acc += w / total
            self._cum.append(acc)

    def _pattern_space(self, t: str) -> float:
        R, C = self.R, self.C
        if t == "I":
            return R * (R - 1) / 2 * C * (C - 1) / 2
        if t in ("II", "III"):
            return R * (R - 1) * (R - 2) * C * (C - 1) * (C - 2) / 3
        return R * R * C * C  # rough; only relative draw rates are affected
    def _draw_candidate(self, t: str, rng):
        R, C = self.R, self.C
        if t == "I":
            i1, i2 = rng.sample(range(1, R + 1), 2)
            j1, j2 = rng.sample(range(1, C + 1), 2)
            return ((i1, j1, 1), (i2, j2, 1), (i1, j2, -1), (i2, j1, -1))
        if t in ("II", "III"):
            rows = rng.sample(range(1, R + 1), 3)
            cols = rng.sample(range(1, C + 1), 3)
            pos = list(range(3))
            rng.shuffle(pos)
            shift = rng.choice((1, 2))
            entries = tuple((rows[k], cols[pos[k]], 1) for k in range(3)) + tuple(
                (rows[k], cols[pos[(k + shift) % 3]], -1) for k in range(3)
            )
            return entries
        # Type IV and its transpose, by uniform band/index draw
        transposed = t == "IVt"
        rband, cband = self._rband, self._cband
        if transposed:
            rband, cband = cband, rband
            R, C = C, R
        N = self._N
        k, l = rng.sample(range(1, N + 1), 2)
        rows_k = [i for i in range(1, R + 1) if rband[i] == k]
        rows_l = [i for i in range(1, R + 1) if rband[i] == l]
        cols_k = [j for j in range(1, C + 1) if cband[j] == k]
        cols_l = [j for j in range(1, C + 1) if cband[j] == l]
        other = [j for j in range(1, C + 1) if cband[j] not in (k, l)]
        if not (rows_k and rows_l and cols_k and cols_l and other):
            return None
        entries = _type_iv_entries(
            rng.choice(rows_k), rng.choice(rows_k),
            rng.choice(rows_l), rng.choice(rows_l),
            rng.choice(cols_k), rng.choice(cols_l),
            rng.choice(other), rng.choice(other),
        )
        if transposed:
            entries = tuple((j, i, c) for i, j, c in entries)
        return entries

    def _classify_ok(self, t: str, entries) -> bool:
        if self._strata is not None:
            strata = self._strata
            (i1, j1, _), (i2, j2, _), (i1b, j2b, _), (i2b, j1b, _) = entries
            return sorted((strata[i1][j1], strata[i2][j2])) == sorted(
                (strata[i1][j2], strata[i2][j1])
            )
        rband, cband, N = self._rband, self._cband, self._N
        if t in ("II", "III"):
            blocks = [(rband[i], cband[j]) for i, j, _ in entries]
            in_s = [k == l and k <= N for k, l in blocks]
            n_s = sum(in_s)
            if t == "II":
                if n_s != 0 or len(set(blocks)) != 6:
                    return False
            else:
                if n_s != 2:
                    return False
                s_entries = [e for e, s in zip(entries, in_s) if s]
                if s_entries[0][2] + s_entries[1][2] != 0:
                    return False
                b = [blk for blk, s in zip(blocks, in_s) if s]
                if b[0] == b[1]:
                    return False
                rest = [blk for blk, s in zip(blocks, in_s) if not s]
                if len(set(rest)) != 4:
                    return False
        return _terms_balanced(self._term_grids, entries)

    def random_move(self, rng) -> Move:
        while True:
            u = rng.random()
            t = self.types[-1]
            for name, edge in zip(self.types, self._cum):
                if u <= edge:
                    t = name
                    break
            entries = self._draw_candidate(t, rng)
            if entries is None:
                continue
            if not self._classify_ok(t, entries):
                continue
            return Move(tuple(sorted(entries)), t)


def basis_for_model(model, R: int, C: int, types: tuple[str, ...] | None = None,
                    enumerate_threshold: int = 400):
    """Dispatch on family; enumerate up to ``enumerate_threshold`` cells,
    return a lazy sampler beyond it."""
    if model.family in (_models.CHANGE_POINT, _models.INDEPENDENCE):
        if R * C <= enumerate_threshold:
            return basis_change_point(model, R, C)
        return LazyMoveBasis(model, R, C, ("I",))
    if R * C <= enumerate_threshold:
        return basis_block(model, R, C, types)
    if types is None:
        types = ("I", "II") if model.family == _models.OWN_BLOCKS else ("I", "II", "III", "IV", "IVt")
    return LazyMoveBasis(model, R, C, types)


def random_move(basis, rng) -> Move:
    """Uniform draw from an enumerated basis; delegated draw for lazy ones.

    Every basis element has positive draw probability and the distribution
    is state-independent, which is what the Metropolis kernel requires.
    """
    if isinstance(basis, LazyMoveBasis):
        return basis.random_move(rng)
    n = len(basis)
    if n == 0:
        raise ValueError("basis is empty")
    return basis.move(rng.randrange(n))


def is_kernel_move(cfg: Configuration, move: Move) -> bool:
    """Exact integer check that A z = 0."""
    acc = np.zeros(cfg.T, dtype=np.int64)
    for i, j, c in move.entries:
        if not (1 <= i <= cfg.R and 1 <= j <= cfg.C):
            raise ValueError(f"move cell ({i},{j}) outside {cfg.R}x{cfg.C} grid")
        acc += c * cfg.matrix[:, flat_index(i, j, cfg.C)].astype(np.int64)
    return not acc.any()


def dump_moves(basis: MoveBasis, fp) -> None:
    for move in basis:
        fp.write(format_move(move) + "\n")
