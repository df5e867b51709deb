"""Exact extremes and norms of Haar fields.

Two independent maximizers are provided: plain grid enumeration and a
branch-and-bound walk of the dyadic prefix tree.  Both return the exact
supremum of |H| over the resolution-(n+1) midpoint grid (which is the
essential supremum, the field being constant on those cells) and the
lexicographically smallest cell attaining it.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import streams
from .dyadic import (GridPoint, GuardRefusal, HaarField, field_grid, rect_rank)


@dataclass(frozen=True)
class SupResult:
    value: int
    argmax: GridPoint
    cells_visited: int
    method: str
    elapsed_ms: float

    @property
    def resolution(self) -> int:
        return self.argmax.resolution[0]

    def to_json(self) -> dict:
        return {
            "value": self.value,
            "argmax_indices": list(self.argmax.indices),
            "resolution": self.resolution,
            "cells_visited": self.cells_visited,
            "method": self.method,
            "elapsed_ms": self.elapsed_ms,
        }


def _slab_ranges(m: int, d: int, slab_bits: int):
    rest = m * (d - 1)
    width = 1 << max(0, min(m, slab_bits - rest))
    return [(lo, min(lo + width, 1 << m)) for lo in range(0, 1 << m, width)]


def sup_norm_exhaustive(field: HaarField, guard_bits: int = 30,
                        workers: int = 1, slab_bits: int = 22) -> SupResult:
    """Exact sup of |H| by enumerating every cell at resolution n+1.

    The grid is processed in slabs along the first coordinate; the merge
    keeps the first slab attaining the maximum, so the reported argmax is
    the lexicographically smallest cell regardless of worker count.
    """
    t0 = time.perf_counter()
    d = field.dimension
    m = field.order + 1
    if m * d > guard_bits:
        raise GuardRefusal(
            f"exhaustive grid has 2^{m * d} cells, guard is 2^{guard_bits}")
    slabs = _slab_ranges(m, d, slab_bits)

    def scan(slab):
        lo, hi = slab
        ranges = ((lo, hi),) + tuple((0, 1 << m) for _ in range(d - 1))
        grid = np.abs(field_grid(field.family, field.signs, (m,) * d, ranges))
        flat = int(np.argmax(grid))
        idx = np.unravel_index(flat, grid.shape)
        return int(grid.ravel()[flat]), (int(idx[0]) + lo,) + tuple(int(i) for i in idx[1:])

    if workers > 1 and len(slabs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(scan, slabs))
    else:
        results = [scan(s) for s in slabs]

    best_val, best_idx = -1, None
    for val, idx in results:  # slab order = first-coordinate order
        if val > best_val:
            best_val, best_idx = val, idx
    elapsed = (time.perf_counter() - t0) * 1e3
    return SupResult(best_val, GridPoint.uniform(m, best_idx),
                     1 << (m * d), "exhaustive", elapsed)


def sup_norm_branch_bound(field: HaarField) -> SupResult:
    """Exact sup of |H| by pruned search over the dyadic prefix tree.

    Cells are refined coordinate-major (all bits of x_1, then x_2, ...), so
    leaves appear in lexicographic order and the first maximum found is the
    canonical argmax.  A subtree is cut when |fixed sum| plus the number of
    still-undetermined r-functions (each bounded by 1) cannot beat the
    incumbent.
    """
    t0 = time.perf_counter()
    fam = field.family
    d, m = fam.dimension, fam.order + 1
    shapes = fam.members
    nshapes = len(shapes)

    # sign(shape, rect) lookups, precomputed when the table is small
    if fam.order <= 18 and nshapes:
        tables = []
        for s in shapes:
            nrect = 1 << fam.order
            idx_arrays = []
            done = 0
            for level in reversed(s):
                idx_arrays.append((np.arange(nrect, dtype=np.uint64)
                                   >> np.uint64(done)) & np.uint64((1 << level) - 1))
                done += level
            idx_arrays.reverse()
            tables.append(field.signs.sign_grid(s, idx_arrays).astype(np.int64))
        def sign_of(sid, rank):
            return int(tables[sid][rank])
    else:
        cache: dict[tuple[int, tuple[int, ...]], int] = {}
        def sign_of(sid, rect):
            key = (sid, rect)
            v = cache.get(key)
            if v is None:
                v = field.signs.sign(shapes[sid], rect)
                cache[key] = v
            return v

    small = fam.order <= 18

    # shapes triggered when coordinate j reaches fixed-bit count b+1
    trigger: list[list[list[int]]] = [[[] for _ in range(m)] for _ in range(d)]
    for sid, s in enumerate(shapes):
        for j, r in enumerate(s):
            trigger[j][r].append(sid)

    prefix = [0] * d
    fixed = [0] * d
    unmet = [d] * nshapes
    state = {"F": 0, "U": nshapes, "best": -1, "arg": (0,) * d, "nodes": 0}

    def determine(sid: int) -> int:
        s = shapes[sid]
        val = 1
        rect = []
        rank = 0
        for j, r in enumerate(s):
            p, f = prefix[j], fixed[j]
            val *= 2 * ((p >> (f - r - 1)) & 1) - 1
            if small:
                rank = (rank << r) | (p >> (f - r))
            else:
                rect.append(p >> (f - r))
        val *= sign_of(sid, rank if small else tuple(rect))
        return val

    def walk(pos: int) -> None:
        state["nodes"] += 1
        bound = abs(state["F"]) + state["U"]
        if bound <= state["best"]:
            return
        if pos == m * d:
            state["best"] = abs(state["F"])
            state["arg"] = tuple(prefix)
            return
        j = pos // m
        for bit in (0, 1):
            fixed[j] += 1
            prefix[j] = (prefix[j] << 1) | bit
            hit = trigger[j][fixed[j] - 1]
            determined = []
            for sid in hit:
                unmet[sid] -= 1
                if unmet[sid] == 0:
                    v = determine(sid)
                    determined.append(v)
                    state["F"] += v
                    state["U"] -= 1
            walk(pos + 1)
            for v in determined:
                state["F"] -= v
                state["U"] += 1
            for sid in hit:
                unmet[sid] += 1
            prefix[j] >>= 1
            fixed[j] -= 1

    walk(0)
    elapsed = (time.perf_counter() - t0) * 1e3
    return SupResult(state["best"], GridPoint.uniform(m, state["arg"]),
                     state["nodes"], "branch-bound", elapsed)


def l2_norm_sq(field: HaarField) -> int:
    """Exact integral of H^2 over the cube: the family size, by orthogonality."""
    return len(field.family)


def l2_norm_sq_grid(field: HaarField, max_bits: int = 26) -> Fraction:
    """The same integral by literal grid summation (small fields only)."""
    m = field.order + 1
    d = field.dimension
    if m * d > max_bits:
        raise GuardRefusal(f"grid integration needs 2^{m * d} cells")
    grid = field_grid(field.family, field.signs, (m,) * d).astype(np.int64)
    return Fraction(int(np.sum(grid * grid)), 1 << (m * d))


def empirical_lp(field: HaarField, p: int, budget: int, seed: int,
                 chunk: int = 1 << 15) -> dict:
    """Monte Carlo mean of |H|^p at uniform grid midpoints, with stderr.

    Deterministic given the seed; the sample stream is indexed globally so
    the chunk size does not affect values.
    """
    if p < 2 or p % 2:
        raise ValueError("p must be even and >= 2")
    if budget < 1:
        raise ValueError("budget must be positive")
    d = field.dimension
    m = field.order + 1
    if m > 63:
        raise GuardRefusal("empirical_lp supports resolution <= 63 bits")
    total = 0.0
    total_sq = 0.0
    for lo in range(0, budget, chunk):
        count = min(chunk, budget - lo)
        coords = [streams.rand_index_array(
            (streams.TAG_POINT, seed, j), count, m, start=lo) for j in range(d)]
        vals = np.zeros(count, dtype=np.int64)
        for shape in field.family.members:
            haar = np.ones(count, dtype=np.int64)
            rect = []
            for j, r in enumerate(shape):
                idx = coords[j]
                rect.append(idx >> np.uint64(m - r))
                haar *= ((idx >> np.uint64(m - r - 1)).astype(np.int64) & 1) * 2 - 1
            vals += field.signs.sign_grid(shape, rect).astype(np.int64) * haar
        a = np.abs(vals).astype(np.float64) ** p
        total += float(a.sum())
        total_sq += float((a * a).sum())
    mean = total / budget
    var = max(total_sq / budget - mean * mean, 0.0)
    stderr = (var / budget) ** 0.5
    return {"p": p, "budget": budget, "estimate": mean, "stderr": stderr}
