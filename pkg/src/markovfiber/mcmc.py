"""Metropolis walk over a fiber.

Proposal: uniform move z from the basis, uniform sign s; x' = x + s z.
A negative cell means the chain stays put (the stay still yields a sample);
otherwise accept with probability min(1, prod x! / prod x'!), evaluated in
log-factorial space.  The stationary law is the conditional distribution
proportional to 1/prod x_ij! on the fiber of the starting table: the
model's parameter terms are functions of the sufficient statistic alone, so
they cancel from every ratio once t is fixed.

Statistics are streamed through a tracker protocol (see fit.py): plain
callables work too and are wrapped, trackers avoid recomputing from scratch
at every step.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .moves import LazyMoveBasis, MoveBasis
from .tables import Configuration, Table

__all__ = [
    "ChainConfig",
    "ChainResult",
    "walk",
    "run_chains",
    "estimate_pvalue",
    "pooled_pvalue",
    "max_threads",
]

PV_TOL = 1e-12


@dataclass(frozen=True)
class ChainConfig:
    steps: int
    burn_in: int = 0
    thin: int = 1
    seed: int = 0
    proposal: object = None
    check_every: int = 1000  # fiber-invariant audit cadence

    def __post_init__(self) -> None:
        if self.steps <= 0:
            raise ValueError("steps must be positive")
        if not (0 <= self.burn_in < self.steps):
            raise ValueError("need 0 <= burn_in < steps")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if self.proposal is None:
            raise ValueError("a proposal basis is required")


@dataclass(frozen=True)
class ChainResult:
    samples: np.ndarray = field(repr=False)
    accept_count: int
    stay_count: int
    reject_count: int
    observed: float
    pvalue: float
    seed: int
    steps: int

    @property
    def acceptance_rate(self) -> float:
        return self.accept_count / self.steps


class _CallableTracker:
    """Adapter giving a plain statistic callable the tracker interface."""

    def __init__(self, fn, R: int, C: int) -> None:
        self._fn = fn
        self._shape = (R, C)

    def _compute(self, x_flat) -> float:
        arr = np.asarray(x_flat, dtype=np.int64).reshape(self._shape)
        return float(self._fn(arr))

    def start(self, x_flat) -> float:
        return self._compute(x_flat)

    def value_after(self, x_flat, flats, coefs) -> float:
        x = list(x_flat)
        for f, c in zip(flats, coefs):
            x[f] += c
        return self._compute(x)

    def accept(self, x_flat, value: float) -> None:
        pass

    def fork(self):
        return _CallableTracker(self._fn, *self._shape)


def _as_tracker(statistic, R: int, C: int):
    if hasattr(statistic, "start") and hasattr(statistic, "value_after"):
        return statistic
    if callable(statistic):
        return _CallableTracker(statistic, R, C)
    raise TypeError("statistic must be callable or implement the tracker protocol")


def walk(start: Table, cfg_matrix: Configuration, chain: ChainConfig, statistic) -> ChainResult:
    """Run one chain and return its thinned post-burn-in statistic stream.

    Every visited state satisfies A x = t (audited every ``check_every``
    steps).  Stays and rejections both contribute the current state as a
    sample, so the chain is counted per step.
    """
    import random as _random

    basis = chain.proposal
    R, C = start.R, start.C
    if (basis.R, basis.C) != (R, C):
        raise ValueError("proposal basis grid does not match the table")
    rng = _random.Random(chain.seed)
    tracker = _as_tracker(statistic, R, C)

    x = [int(v) for v in start.vec()]
    t0 = cfg_matrix.apply(start.vec())
    total = sum(x)
    lf = [math.lgamma(n + 1) for n in range(total + 1)]

    cur = tracker.start(x)
    if not math.isfinite(cur):
        raise ValueError(f"statistic is not finite at the starting table: {cur}")
    observed = cur

    lazy = isinstance(basis, LazyMoveBasis)
    if not lazy:
        off, flat, coef = basis.move_arrays()
        n_moves = len(basis)
        if n_moves == 0:
            raise ValueError("proposal basis is empty")

    n_keep = (chain.steps - chain.burn_in + chain.thin - 1) // chain.thin
    samples = np.empty(n_keep, dtype=np.float64)
    n_samp = 0
    accepts = stays = rejects = 0
    burn, thin, check_every = chain.burn_in, chain.thin, chain.check_every
    rnd = rng.random
    exp = math.exp

    for step in range(chain.steps):
        if lazy:
            mv_flats, mv_coefs = basis.random_move(rng).flats_coefs(C)
            lo, hi = 0, len(mv_flats)
        else:
            k = rng.randrange(n_moves)
            lo, hi = off[k], off[k + 1]
        s = 1 if rnd() < 0.5 else -1

        lr = 0.0
        ok = True
        p = lo
        while p < hi:
            if lazy:
                f, c = mv_flats[p], s * mv_coefs[p]
            else:
                f, c = flat[p], s * coef[p]
            xv = x[f]
            nv = xv + c
            if nv < 0:
                ok = False
                break
            lr += lf[xv] - lf[nv]
            p += 1

        if not ok:
            stays += 1
        elif lr >= 0.0 or rnd() < exp(lr):
            if lazy:
                fl = mv_flats
                co = tuple(s * c for c in mv_coefs)
            else:
                fl = flat[lo:hi]
                co = [s * c for c in coef[lo:hi]]
            new_val = tracker.value_after(x, fl, co)
            if not math.isfinite(new_val):
                raise ValueError(f"statistic became non-finite at step {step}: {new_val}")
            for f, c in zip(fl, co):
                x[f] += c
            tracker.accept(x, new_val)
            cur = new_val
            accepts += 1
        else:
            rejects += 1

        if step >= burn and (step - burn) % thin == 0:
            samples[n_samp] = cur
            n_samp += 1
        if check_every and (step + 1) % check_every == 0:
            now = cfg_matrix.matrix.astype(np.int64) @ np.asarray(x, dtype=np.int64)
            if not np.array_equal(now, t0):
                raise AssertionError(f"fiber invariant broken at step {step}")

    assert n_samp == n_keep
    return ChainResult(
        samples=samples,
        accept_count=accepts,
        stay_count=stays,
        reject_count=rejects,
        observed=observed,
        pvalue=estimate_pvalue(samples, observed),
        seed=chain.seed,
        steps=chain.steps,
    )


def estimate_pvalue(samples, observed: float, tol: float = PV_TOL) -> float:
    """Add-one Monte Carlo estimator: (#{sample >= observed - tol} + 1) / (n + 1)."""
    arr = np.asarray(samples, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("need at least one sample")
    n_ge = int((arr >= observed - tol).sum())
    return (n_ge + 1) / (arr.size + 1)


def max_threads() -> int:
    """Parallelism cap: MARKOV_FIBER_THREADS, else the CPU count."""
    env = os.environ.get("MARKOV_FIBER_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ValueError(f"MARKOV_FIBER_THREADS must be an integer, got {env!r}")
        if n < 1:
            raise ValueError("MARKOV_FIBER_THREADS must be >= 1")
        return n
    return os.cpu_count() or 1


def run_chains(start: Table, cfg_matrix: Configuration, chain: ChainConfig,
               statistic, n_chains: int = 1) -> list[ChainResult]:
    """k independent chains seeded seed+0 .. seed+k-1; no cross-chain state.

    Each chain gets its own statistic tracker (via fork() when available),
    so stateful trackers stay thread-confined.
    """
    if n_chains < 1:
        raise ValueError("n_chains must be >= 1")
    configs = [
        ChainConfig(steps=chain.steps, burn_in=chain.burn_in, thin=chain.thin,
                    seed=chain.seed + k, proposal=chain.proposal,
                    check_every=chain.check_every)
        for k in range(n_chains)
    ]
    trackers = []
    for _ in range(n_chains):
        trackers.append(statistic.fork() if hasattr(statistic, "fork") else statistic)
    if n_chains == 1:
        return [walk(start, cfg_matrix, configs[0], trackers[0])]
    workers = min(n_chains, max_threads())
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(walk, start, cfg_matrix, cfg, trk)
            for cfg, trk in zip(configs, trackers)
        ]
        return [f.result() for f in futures]


def pooled_pvalue(results: list[ChainResult]) -> tuple[float, float]:
    """Pooled p-value (mean over chains) and a Monte Carlo standard error:
    between-chain spread for k >= 2, twenty-batch means within the single
    chain otherwise."""
    k = len(results)
    if k == 0:
        raise ValueError("no chains")
    ps = [r.pvalue for r in results]
    p = float(np.mean(ps))
    if k >= 2:
        se = float(np.std(ps, ddof=1) / math.sqrt(k))
        return p, se
    r = results[0]
    ind = (r.samples >= r.observed - PV_TOL).astype(np.float64)
    n_batches = min(20, ind.size)
    if n_batches < 2:
        return p, float("nan")
    batches = np.array_split(ind, n_batches)
    means = np.array([b.mean() for b in batches])
    se = float(np.std(means, ddof=1) / math.sqrt(n_batches))
    return p, se
