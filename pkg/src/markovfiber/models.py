"""Model families for subtable effects and their nesting relations.

Five families over an R x C grid:

* ``independence`` — row and column main effects only;
* ``change-point`` — one extra effect per rectangle in a nested chain
  S_1 c S_2 c ... c S_N c I (strict inclusions);
* ``own-blocks`` — diagonal blocks I_11 .. I_NN cut by shared row/column
  boundaries, one effect per block;
* ``common-blocks`` — same blocks, a single effect on S = I_11 u ... u I_NN;
* ``general-blocks`` — boundaries may stop short of the grid edge and the
  effects sit on disjoint unions of diagonal blocks.

A model spec carries geometry only; the log-linear parameters it implies are
never materialized (fitting goes through iterative proportional scaling).
Nesting between two models is decided by exact rational row-space containment
of their configurations, so any pair of families can be compared.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .tables import Rectangle, build_configuration, row_space_contains

__all__ = [
    "INDEPENDENCE",
    "CHANGE_POINT",
    "OWN_BLOCKS",
    "COMMON_BLOCKS",
    "GENERAL_BLOCKS",
    "ModelSpec",
    "ModelError",
    "validate",
    "require_valid",
    "terms",
    "n_blocks",
    "cell_stratum",
    "cell_block",
    "row_band",
    "col_band",
    "block_cells",
    "diagonal_cells",
    "is_nested",
    "model_to_dict",
    "model_from_dict",
    "load_model",
    "save_model",
]

INDEPENDENCE = "independence"
CHANGE_POINT = "change-point"
OWN_BLOCKS = "own-blocks"
COMMON_BLOCKS = "common-blocks"
GENERAL_BLOCKS = "general-blocks"

_FAMILIES = (INDEPENDENCE, CHANGE_POINT, OWN_BLOCKS, COMMON_BLOCKS, GENERAL_BLOCKS)
_BLOCK_FAMILIES = (OWN_BLOCKS, COMMON_BLOCKS, GENERAL_BLOCKS)


class ModelError(ValueError):
    """Raised when a model spec fails validation."""


@dataclass(frozen=True)
class ModelSpec:
    """Geometry of one model.  Fields are used per family:

    change-point: ``rectangles``;
    block families: ``row_bounds``/``col_bounds`` (1 = r_1 < ... < r_{N+1});
    general-blocks: additionally ``groups``, disjoint tuples of 1-based block
    indices; each group's union is one effect term.
    """

    family: str
    rectangles: tuple[Rectangle, ...] = ()
    row_bounds: tuple[int, ...] = ()
    col_bounds: tuple[int, ...] = ()
    groups: tuple[tuple[int, ...], ...] = ()


def n_blocks(model: ModelSpec) -> int:
    return len(model.row_bounds) - 1


def validate(model: ModelSpec, R: int, C: int) -> list[str]:
    """Empty list iff the model is valid on the R x C grid; else violations."""
    bad: list[str] = []
    if R < 2 or C < 2:
        bad.append(f"grid must be at least 2x2, got {R}x{C}")
    if model.family not in _FAMILIES:
        return bad + [f"unknown family {model.family!r}"]

    if model.family == INDEPENDENCE:
        if model.rectangles or model.row_bounds or model.col_bounds or model.groups:
            bad.append("independence model carries no geometry")
        return bad

    if model.family == CHANGE_POINT:
        if model.row_bounds or model.col_bounds or model.groups:
            bad.append("change-point model uses rectangles only")
        rects = model.rectangles
        if not rects:
            bad.append("change-point model needs at least one rectangle")
            return bad
        for n, rect in enumerate(rects, start=1):
            if not (rect.a2 <= R and rect.b2 <= C):
                bad.append(f"rectangle {n} {rect} exceeds {R}x{C} grid")
        for n in range(1, len(rects)):
            outer, inner = rects[n], rects[n - 1]
            if not outer.contains_rect(inner) or outer == inner:
                bad.append(f"strict inclusion violated: rectangle {n} does not strictly contain rectangle {n - 1}")
        last = rects[-1]
        if last.n_cells >= R * C:
            bad.append("outermost rectangle must be strictly inside the grid")
        return bad

    # block families
    if model.rectangles:
        bad.append("block models use boundary vectors, not rectangles")
    rb, cb = model.row_bounds, model.col_bounds
    if len(rb) < 2 or len(cb) < 2:
        bad.append("need at least one block (two boundaries per axis)")
        return bad
    if len(rb) != len(cb):
        bad.append("row and column boundary vectors must have equal length")
        return bad
    for name, bounds, limit in (("row", rb, R), ("col", cb, C)):
        if bounds[0] != 1:
            bad.append(f"{name} boundaries must start at 1")
        if any(b2 <= b1 for b1, b2 in zip(bounds, bounds[1:])):
            bad.append(f"{name} boundaries must be strictly increasing")
        if model.family == GENERAL_BLOCKS:
            if bounds[-1] > limit + 1:
                bad.append(f"{name} boundaries exceed grid")
        elif bounds[-1] != limit + 1:
            bad.append(f"{name} boundaries must end at {limit + 1} to cover the grid")

    N = len(rb) - 1
    if model.family == GENERAL_BLOCKS:
        if not model.groups:
            bad.append("general block model needs at least one group")
        seen: set[int] = set()
        for g, grp in enumerate(model.groups, start=1):
            if not grp:
                bad.append(f"group {g} is empty")
            for n in grp:
                if not (1 <= n <= N):
                    bad.append(f"group {g} references block {n} outside 1..{N}")
                if n in seen:
                    bad.append(f"groups are not disjoint: block {n} repeated")
                seen.add(n)
    elif model.groups:
        bad.append("only the general block model carries groups")
    return bad


def require_valid(model: ModelSpec, R: int, C: int) -> None:
    bad = validate(model, R, C)
    if bad:
        raise ModelError("; ".join(bad))


def row_band(model: ModelSpec, i: int) -> int:
    """Band index of row i: 1..N inside the boundaries, N+1 beyond them."""
    rb = model.row_bounds
    for k in range(len(rb) - 1):
        if rb[k] <= i < rb[k + 1]:
            return k + 1
    return len(rb)  # leftover band, general model only


def col_band(model: ModelSpec, j: int) -> int:
    cb = model.col_bounds
    for l in range(len(cb) - 1):
        if cb[l] <= j < cb[l + 1]:
            return l + 1
    return len(cb)


def cell_block(model: ModelSpec, R: int, C: int, i: int, j: int):
    """Block index (k, l) of a cell in a block-family model, or None if the
    cell lies beyond the covered region (general model only)."""
    if model.family not in _BLOCK_FAMILIES:
        raise ModelError(f"cell_block is defined for block families, not {model.family}")
    if not (1 <= i <= R and 1 <= j <= C):
        raise ModelError(f"cell ({i},{j}) outside {R}x{C} grid")
    N = n_blocks(model)
    k, l = row_band(model, i), col_band(model, j)
    if k > N or l > N:
        return None
    return (k, l)


def cell_stratum(model: ModelSpec, R: int, C: int, i: int, j: int) -> int:
    """Change-point stratum of a cell: n such that (i,j) in S_n \\ S_{n-1},
    with S_0 empty and S_{N+1} the full grid."""
    if model.family != CHANGE_POINT:
        raise ModelError(f"cell_stratum is defined for change-point models, not {model.family}")
    if not (1 <= i <= R and 1 <= j <= C):
        raise ModelError(f"cell ({i},{j}) outside {R}x{C} grid")
    for n, rect in enumerate(model.rectangles, start=1):
        if rect.contains(i, j):
            return n
    return len(model.rectangles) + 1


def block_cells(model: ModelSpec, k: int, l: int) -> frozenset[tuple[int, int]]:
    """Cells of block I_kl."""
    rb, cb = model.row_bounds, model.col_bounds
    return frozenset(
        (i, j)
        for i in range(rb[k - 1], rb[k])
        for j in range(cb[l - 1], cb[l])
    )


def diagonal_cells(model: ModelSpec) -> frozenset[tuple[int, int]]:
    """S = union of the diagonal blocks."""
    out: set[tuple[int, int]] = set()
    for n in range(1, n_blocks(model) + 1):
        out |= block_cells(model, n, n)
    return frozenset(out)


def terms(model: ModelSpec, R: int, C: int) -> list[tuple[str, frozenset[tuple[int, int]]]]:
    """Subtable terms in declaration order as (label, cells) pairs."""
    if model.family == INDEPENDENCE:
        return []
    if model.family == CHANGE_POINT:
        return [
            (f"sub:{n}", frozenset(rect.cells()))
            for n, rect in enumerate(model.rectangles, start=1)
        ]
    if model.family == OWN_BLOCKS:
        return [
            (f"sub:{n}", block_cells(model, n, n))
            for n in range(1, n_blocks(model) + 1)
        ]
    if model.family == COMMON_BLOCKS:
        return [("sub:1", diagonal_cells(model))]
    # general blocks: one term per group
    out = []
    for q, grp in enumerate(model.groups, start=1):
        cells: set[tuple[int, int]] = set()
        for n in grp:
            cells |= block_cells(model, n, n)
        out.append((f"sub:{q}", frozenset(cells)))
    return out


def is_nested(inner: ModelSpec, outer: ModelSpec, R: int, C: int) -> bool:
    """True iff inner's sufficient statistic is a linear function of outer's.

    Decided by exact row-space containment of the two configurations, so the
    answer does not depend on the families lining up structurally.
    """
    a_inner = build_configuration(inner, R, C)
    a_outer = build_configuration(outer, R, C)
    return row_space_contains(a_outer.matrix.tolist(), a_inner.matrix.tolist())


def model_to_dict(model: ModelSpec) -> dict:
    out: dict = {"family": model.family}
    if model.rectangles:
        out["rectangles"] = [[r.a1, r.a2, r.b1, r.b2] for r in model.rectangles]
    if model.row_bounds:
        out["row_bounds"] = list(model.row_bounds)
    if model.col_bounds:
        out["col_bounds"] = list(model.col_bounds)
    if model.groups:
        out["groups"] = [list(g) for g in model.groups]
    return out


def model_from_dict(data: dict) -> ModelSpec:
    try:
        family = data["family"]
    except KeyError:
        raise ModelError("model spec needs a 'family' field") from None
    if family not in _FAMILIES:
        raise ModelError(f"unknown family {family!r}; expected one of {sorted(_FAMILIES)}")
    rects = tuple(
        Rectangle(int(a1), int(a2), int(b1), int(b2))
        for a1, a2, b1, b2 in data.get("rectangles", [])
    )
    return ModelSpec(
        family=family,
        rectangles=rects,
        row_bounds=tuple(int(v) for v in data.get("row_bounds", [])),
        col_bounds=tuple(int(v) for v in data.get("col_bounds", [])),
        groups=tuple(tuple(int(n) for n in g) for g in data.get("groups", [])),
    )


def load_model(path) -> ModelSpec:
    with open(path) as fp:
        return model_from_dict(json.load(fp))


def save_model(model: ModelSpec, path) -> None:
    with open(path, "w") as fp:
        json.dump(model_to_dict(model), fp, indent=2)
        fp.write("\n")
