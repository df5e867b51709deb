"""Discrepancy of finite point sets in the unit cube.

The counting function of a box [0,x) is piecewise constant between the
coordinate values of the points, so sup D and inf D are reached in one-sided
limits at "critical corners": per axis, the point coordinates together with
0 and 1.  Approaching a corner from above closes the count without changing
the volume term, which gives the supremum; evaluating at the corner itself
keeps the count strict and gives the infimum.  Both variants are computed
in exact scaled-integer arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import streams
from .dyadic import GuardRefusal

MAX_SCALED = 1 << 62      # largest |N * prod(axis scales)| allowed in int64 sweeps
MAX_GRID_CELLS = 1 << 22  # corner-grid size guard for d >= 3
MAX_VDC_BITS = 26


@dataclass(frozen=True)
class PointSet:
    dimension: int
    points: tuple[tuple[Fraction, ...], ...]

    def __post_init__(self):
        if self.dimension < 1 or not self.points:
            raise ValueError("need dimension >= 1 and at least one point")
        for p in self.points:
            if len(p) != self.dimension:
                raise ValueError(f"point {p} has wrong dimension")
            if any(not 0 <= c < 1 for c in p):
                raise ValueError(f"point {p} outside [0,1)^d")

    def __len__(self) -> int:
        return len(self.points)

    @classmethod
    def build(cls, rows) -> "PointSet":
        pts = tuple(tuple(Fraction(c) for c in row) for row in rows)
        return cls(len(pts[0]) if pts else 0, pts)


def load_points(path: str) -> PointSet:
    """Read `d N` then N lines of coordinates (fractions `p/q` or decimals)."""
    with open(path) as fh:
        tokens = fh.read().split()
    if len(tokens) < 2:
        raise ValueError("point file needs a `d N` header")
    d, n = int(tokens[0]), int(tokens[1])
    coords = tokens[2:]
    if len(coords) != d * n:
        raise ValueError(f"expected {d * n} coordinates, found {len(coords)}")
    rows = [[Fraction(coords[i * d + j]) for j in range(d)] for i in range(n)]
    return PointSet.build(rows)


def save_points(ps: PointSet, path: str) -> None:
    with open(path, "w") as fh:
        fh.write(f"{ps.dimension} {len(ps)}\n")
        for p in ps.points:
            fh.write(" ".join(str(c) for c in p) + "\n")


def van_der_corput(k: int) -> PointSet:
    """2^k points (i/N, bitreverse_k(i)/N); every coordinate exact."""
    if not 0 <= k <= MAX_VDC_BITS:
        raise GuardRefusal(f"van der Corput generator guarded at k <= {MAX_VDC_BITS}")
    n = 1 << k
    rows = []
    for i in range(n):
        rev = 0
        v = i
        for _ in range(k):
            rev = (rev << 1) | (v & 1)
            v >>= 1
        rows.append((Fraction(i, n), Fraction(rev, n)))
    return PointSet(2, tuple(rows))


def discrepancy_eval(ps: PointSet, x) -> Fraction:
    """#(P in [0,x)) - N * vol[0,x); exact for rational x."""
    if len(x) != ps.dimension:
        raise ValueError("query point has wrong dimension")
    if any(not 0 <= c <= 1 for c in x):
        raise ValueError("query point outside [0,1]^d")
    count = sum(1 for p in ps.points if all(pc < xc for pc, xc in zip(p, x)))
    return count - len(ps) * math.prod(x)


# ---------------------------------------------------------------------------
# exact supremum over critical corners
# ---------------------------------------------------------------------------

def _scaled_axis(ps: PointSet, j: int) -> tuple[list[int], int]:
    """Corner candidates on axis j as integers over a common denominator."""
    scale = math.lcm(*(p[j].denominator for p in ps.points))
    vals = sorted({0, scale} | {int(p[j] * scale) for p in ps.points})
    return vals, scale


def _sweep_2d(ps: PointSet) -> tuple[tuple[Fraction, int, tuple[int, int]],
                                     tuple[Fraction, int, tuple[int, int]]]:
    """(sup D, inf D) with attaining corners, by a scaled-integer column sweep.

    Column i adds the points at that x-coordinate to y-rank bins; the
    inclusive running sum gives closed counts (sup side), the exclusive sum
    before insertion gives strict counts (inf side).
    """
    xs, sx = _scaled_axis(ps, 0)
    ys, sy = _scaled_axis(ps, 1)
    n = len(ps)
    if n * sx * sy >= MAX_SCALED:
        raise GuardRefusal("corner sweep would overflow 64-bit scaled integers")
    xs_a = np.array(xs, dtype=np.int64)
    ys_a = np.array(ys, dtype=np.int64)
    px = np.array([int(p[0] * sx) for p in ps.points], dtype=np.int64)
    py = np.array([int(p[1] * sy) for p in ps.points], dtype=np.int64)
    order = np.argsort(px, kind="stable")
    px, py = px[order], py[order]
    y_rank = np.searchsorted(ys_a, py)

    bins = np.zeros(len(ys), dtype=np.int64)
    best_hi, best_hi_at = None, None
    best_lo, best_lo_at = None, None
    pos = 0
    unit = sx * sy
    for i, a in enumerate(xs):
        strict_c = np.concatenate(([0], np.cumsum(bins)[:-1]))
        row_lo = strict_c * unit - n * a * ys_a
        j_lo = int(row_lo.argmin())
        if best_lo is None or row_lo[j_lo] < best_lo:
            best_lo, best_lo_at = int(row_lo[j_lo]), (i, j_lo)
        while pos < len(px) and px[pos] == a:
            bins[y_rank[pos]] += 1
            pos += 1
        closed_c = np.cumsum(bins)
        row_hi = closed_c * unit - n * a * ys_a
        j_hi = int(row_hi.argmax())
        if best_hi is None or row_hi[j_hi] > best_hi:
            best_hi, best_hi_at = int(row_hi[j_hi]), (i, j_hi)

    def corner(at):
        return (Fraction(xs[at[0]], sx), Fraction(ys[at[1]], sy))

    return ((Fraction(best_hi, unit), best_hi, corner(best_hi_at)),
            (Fraction(best_lo, unit), best_lo, corner(best_lo_at)))


def _grid_nd(ps: PointSet) -> tuple[tuple[Fraction, tuple[Fraction, ...]],
                                    tuple[Fraction, tuple[Fraction, ...]]]:
    """Corner extrema for any d via a rank histogram and axis-wise prefix sums."""
    d, n = ps.dimension, len(ps)
    axes, scales = zip(*(_scaled_axis(ps, j) for j in range(d)))
    cells = math.prod(len(a) for a in axes)
    if cells > MAX_GRID_CELLS:
        raise GuardRefusal(f"corner grid has {cells} cells, guard is {MAX_GRID_CELLS}")
    unit = math.prod(scales)
    if n * unit >= MAX_SCALED:
        raise GuardRefusal("corner grid would overflow 64-bit scaled integers")
    shape = tuple(len(a) for a in axes)
    hist = np.zeros(shape, dtype=np.int64)
    arrays = [np.array(a, dtype=np.int64) for a in axes]
    for p in ps.points:
        idx = tuple(int(np.searchsorted(arrays[j], int(p[j] * scales[j])))
                    for j in range(d))
        hist[idx] += 1
    closed = hist
    for ax in range(d):
        closed = np.cumsum(closed, axis=ax)
    strict = closed
    for ax in range(d):
        pad = np.zeros((*strict.shape[:ax], 1, *strict.shape[ax + 1:]), dtype=np.int64)
        strict = np.concatenate(
            (pad, np.take(strict, range(strict.shape[ax] - 1), axis=ax)), axis=ax)
    vol = arrays[0].reshape((-1,) + (1,) * (d - 1)).copy()
    for j in range(1, d):
        vol = vol * arrays[j].reshape((1,) * j + (-1,) + (1,) * (d - 1 - j))

    d_closed = closed * unit - n * vol
    d_strict = strict * unit - n * vol
    hi_flat = int(d_closed.argmax())
    lo_flat = int(d_strict.argmin())
    hi_idx = np.unravel_index(hi_flat, shape)
    lo_idx = np.unravel_index(lo_flat, shape)
    hi_corner = tuple(Fraction(axes[j][hi_idx[j]], scales[j]) for j in range(d))
    lo_corner = tuple(Fraction(axes[j][lo_idx[j]], scales[j]) for j in range(d))
    return ((Fraction(int(d_closed.max()), unit), hi_corner),
            (Fraction(int(d_strict.min()), unit), lo_corner))


def sup_discrepancy(ps: PointSet) -> dict:
    """Exact sup |D| over [0,1]^d with the attaining corner and side."""
    if ps.dimension == 2:
        (hi, _, hi_at), (lo, _, lo_at) = _sweep_2d(ps)
    else:
        (hi, hi_at), (lo, lo_at) = _grid_nd(ps)
    if hi >= -lo:
        sup, corner, side = hi, hi_at, "closed"
    else:
        sup, corner, side = -lo, lo_at, "strict"
    return {
        "sup_abs": sup, "sup_plus": hi, "inf": lo,
        "corner": corner, "side": side,
    }


# ---------------------------------------------------------------------------
# Monte Carlo L2
# ---------------------------------------------------------------------------

def l2_discrepancy(ps: PointSet, budget: int, seed: int,
                   chunk: int = 4096) -> dict:
    """Mean of D^2 at uniform points, with standard errors; seed-stable."""
    if budget < 2:
        raise ValueError("budget must be at least 2")
    d, n = ps.dimension, len(ps)
    pts = np.array([[float(c) for c in p] for p in ps.points])
    total = 0.0
    total_sq = 0.0
    for lo in range(0, budget, chunk):
        cnt = min(chunk, budget - lo)
        x = np.empty((cnt, d))
        for j in range(d):
            bits = streams.rand_index_array(
                (streams.TAG_POINT, seed, 0x44, j), cnt, 53, start=lo)
            x[:, j] = bits.astype(np.float64) / float(1 << 53)
        inside = np.all(pts[None, :, :] < x[:, None, :], axis=2)
        dval = inside.sum(axis=1) - n * np.prod(x, axis=1)
        sq = dval * dval
        total += float(sq.sum())
        total_sq += float((sq * sq).sum())
    mean_sq = total / budget
    var_sq = max(total_sq / budget - mean_sq ** 2, 0.0) * budget / (budget - 1)
    stderr_sq = math.sqrt(var_sq / budget)
    norm = math.sqrt(mean_sq)
    norm_stderr = stderr_sq / (2 * norm) if norm > 0 else 0.0
    return {
        "mean_sq": mean_sq, "stderr_sq": stderr_sq,
        "norm": norm, "norm_stderr": norm_stderr,
        "budget": budget, "seed": seed,
    }


@dataclass(frozen=True)
class DiscrepancyReport:
    n_points: int
    dimension: int
    sup_abs: Fraction
    corner: tuple[Fraction, ...]
    side: str
    l2_norm: float
    l2_norm_stderr: float
    l2_budget: int
    seed: int

    @property
    def consistent(self) -> bool:
        """sup dominates the L2 estimate up to three standard errors."""
        return float(self.sup_abs) >= self.l2_norm - 3 * self.l2_norm_stderr

    def growth_ratios(self) -> dict:
        logn = math.log(self.n_points)
        if logn == 0:
            return {"sup_over_log": None, "l2_over_sqrt_log": None}
        return {
            "sup_over_log": float(self.sup_abs) / logn,
            "l2_over_sqrt_log": self.l2_norm / math.sqrt(logn),
        }

    def to_json(self) -> dict:
        return {
            "n_points": self.n_points, "dimension": self.dimension,
            "sup_abs": str(self.sup_abs), "sup_abs_float": float(self.sup_abs),
            "corner": [str(c) for c in self.corner], "side": self.side,
            "l2_norm": self.l2_norm, "l2_norm_stderr": self.l2_norm_stderr,
            "l2_budget": self.l2_budget, "seed": self.seed,
            "consistent": self.consistent, **self.growth_ratios(),
        }


def discrepancy_report(ps: PointSet, budget: int, seed: int) -> DiscrepancyReport:
    sup = sup_discrepancy(ps)
    l2 = l2_discrepancy(ps, budget, seed)
    return DiscrepancyReport(
        n_points=len(ps), dimension=ps.dimension,
        sup_abs=sup["sup_abs"], corner=sup["corner"], side=sup["side"],
        l2_norm=l2["norm"], l2_norm_stderr=l2["norm_stderr"],
        l2_budget=budget, seed=seed)
