"""Block decomposition and conditional greedy witness search in d >= 3.

The order-n family with first scale below n/2 splits into q/2 blocks by
first-scale bands of width n/q.  Writing L_j for the sum of the members with
first scale j, the square function of block t over the first-coordinate
filtration is S(B_t)^2 = sum_j L_j^2, and expanding each square gives

    S(B_t)^2 = #I_t + sqcap_t,

where sqcap_t collects the products of distinct members sharing a first
scale.  Everything here is exact integer arithmetic; thresholds are compared
through squared cross-multiplied integers, never through floats.
"""

from __future__ import annotations

import math
import time
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import streams
from .dyadic import (GridPoint, GuardRefusal, ScaleBound, Shape, ShapeFamily,
                     group_by_coord, hyperbolic_shapes, rfunction_eval)

MAX_STAGE_BITS = 26   # stage kernels enumerate 2^(n/q) candidate extensions
MAX_SWEEP_BITS = 22   # cells held in memory at once during identity sweeps


def _as_fraction(tau) -> Fraction:
    # Decimal strings parse exactly; bare floats go through their repr so
    # tau=0.1 means one tenth, not the nearest binary double.
    if isinstance(tau, Fraction):
        return tau
    if isinstance(tau, float):
        return Fraction(str(tau))
    return Fraction(tau)


@dataclass(frozen=True)
class SearchParams:
    """Search configuration; q must be even and divide n."""

    n: int
    q: int
    d: int = 3
    tau: Fraction = Fraction(1, 10)
    seed: int = 1
    restarts: int = 200

    def __post_init__(self):
        object.__setattr__(self, "tau", _as_fraction(self.tau))
        if self.d < 3:
            raise ValueError("search requires dimension >= 3")
        if self.q < 2 or self.q % 2:
            raise ValueError("q must be an even integer >= 2")
        if self.n <= 0 or self.n % self.q:
            raise ValueError("q must divide n")
        if not 0 < self.tau < 1:
            raise ValueError("tau must lie in (0, 1)")
        if self.restarts < 1:
            raise ValueError("restart budget must be positive")

    @property
    def width(self) -> int:
        return self.n // self.q

    @property
    def stages(self) -> int:
        return self.q // 2

    def to_json(self) -> dict:
        return {
            "n": self.n, "q": self.q, "d": self.d, "tau": str(self.tau),
            "seed": self.seed, "restarts": self.restarts,
        }


def exceeds_threshold(value: int, tau: Fraction, n: int, q: int) -> bool:
    """value > tau*n/sqrt(q), decided exactly by squaring."""
    if value <= 0:
        return False
    return value * value * tau.denominator ** 2 * q > tau.numerator ** 2 * n * n


@dataclass(frozen=True)
class BlockDecomposition:
    """Width-(n/q) first-scale bands covering first scales below n/2.

    The band families are the blocks; the single line at first scale n/2
    is kept separate (``leftover``) so that blocks plus leftover partition
    the half-constrained family exactly.
    """

    n: int
    d: int
    q: int
    width: int
    stages: int
    blocks: tuple[ShapeFamily, ...]
    leftover: ShapeFamily
    constrained: ShapeFamily

    @classmethod
    def build(cls, n: int, d: int, q: int) -> "BlockDecomposition":
        if q < 2 or q % 2 or n % q:
            raise ValueError("q must be even and divide n")
        if d < 2:
            raise ValueError("blocks require dimension >= 2")
        w = n // q
        stages = q // 2
        blocks = tuple(
            hyperbolic_shapes(n, d, ScaleBound(0, (t - 1) * w, t * w - 1))
            for t in range(1, stages + 1))
        leftover = hyperbolic_shapes(n, d, ScaleBound(0, n // 2, n // 2))
        constrained = hyperbolic_shapes(n, d, ScaleBound(0, 0, n // 2))
        total = sum(len(b) for b in blocks) + len(leftover)
        if total != len(constrained):
            raise RuntimeError("blocks plus leftover fail to partition the family")
        return cls(n, d, q, w, stages, blocks, leftover, constrained)

    def block(self, t: int) -> ShapeFamily:
        if not 1 <= t <= self.stages:
            raise ValueError(f"block index {t} out of range 1..{self.stages}")
        return self.blocks[t - 1]

    def sigma_sq(self, t: int) -> int:
        return len(self.block(t))

    def lines(self, t: int) -> dict[int, tuple[Shape, ...]]:
        return group_by_coord(self.block(t), 0)


# ---------------------------------------------------------------------------
# scalar evaluators (independent of the vectorized kernels)
# ---------------------------------------------------------------------------

def block_eval(decomp: BlockDecomposition, signs, t: int, point: GridPoint) -> int:
    return sum(rfunction_eval(s, signs, point) for s in decomp.block(t).members)


def square_function_eval(decomp: BlockDecomposition, signs, t: int,
                         point: GridPoint) -> int:
    """sum_j (sum of line-j members at the point)^2."""
    total = 0
    for line in decomp.lines(t).values():
        total += sum(rfunction_eval(s, signs, point) for s in line) ** 2
    return total


def sqcap_eval(decomp: BlockDecomposition, signs, t: int, point: GridPoint) -> int:
    """Coincidence sum: ordered products over distinct same-line pairs."""
    total = 0
    for line in decomp.lines(t).values():
        vals = [rfunction_eval(s, signs, point) for s in line]
        for a in range(len(vals)):
            for b in range(len(vals)):
                if a != b:
                    total += vals[a] * vals[b]
    return total


# ---------------------------------------------------------------------------
# exact identity sweep
# ---------------------------------------------------------------------------

def identity_check(decomp: BlockDecomposition, signs, t: int) -> dict:
    """Certify S(B_t)^2 - sqcap_t - #I_t = 0 on every cell, exactly.

    Writing Q_j = sum of squared line-j members, the difference equals
    sum_j (Q_j - #line_j), and each term is constant on the cells of its
    line grid (first coordinate at j+1 bits, the rest at n-j+1).  Sweeping
    each line grid exhaustively therefore certifies the identity at every
    cell of any common refinement, in particular at resolution n+1.

    Per line the sweep evaluates every member at every cell and checks
    both Q_j == #line_j pointwise and the orthogonality integral
    sum_cells L_j^2 == #line_j * #cells; the latter fails under any
    misindexed rectangle lookup, which pointwise squares cannot see.
    """
    start = time.perf_counter()
    n, d = decomp.n, decomp.d
    tables: dict[Shape, np.ndarray] = {}
    lines_out = []
    cells_total = 0
    holds = True
    for j, line in decomp.lines(t).items():
        res_rest = n - j + 1
        # axis index views shared by every member of the line
        i0 = np.arange(1 << (j + 1), dtype=np.uint32)
        u0 = i0 >> 1
        b0 = ((i0 & 1).astype(np.int8) << 1) - 1
        i_rest = np.arange(1 << res_rest, dtype=np.uint32)
        chunk = max(1, (1 << MAX_SWEEP_BITS) >> (j + 1 + res_rest * (d - 2)))
        qsum_ok = True
        l2_sum = 0
        cells = (1 << (j + 1)) * (1 << res_rest) ** (d - 1)
        for lo in range(0, 1 << res_rest, chunk):
            i_last = i_rest[lo:lo + chunk]
            grid_shape = (i0.size,) + (i_rest.size,) * (d - 2) + (i_last.size,)
            L = np.zeros(grid_shape, dtype=np.int16)
            qsum = np.zeros(grid_shape, dtype=np.int16)
            for s in line:
                tab = tables.get(s)
                if tab is None:
                    opens = []
                    for k, r in enumerate(s):
                        ax = np.arange(1 << r, dtype=np.uint64)
                        opens.append(ax.reshape((1,) * k + (-1,) + (1,) * (d - 1 - k)))
                    tab = tables[s] = signs.sign_grid(s, opens)
                gather = [u0.reshape((-1,) + (1,) * (d - 1))]
                f_axes = [b0.reshape((-1,) + (1,) * (d - 1))]
                for k in range(1, d):
                    r = s[k]
                    src = i_last if k == d - 1 else i_rest
                    v = (src >> np.uint32(res_rest - r)).astype(np.uint64)
                    hb = (((src >> np.uint32(res_rest - r - 1)) & 1).astype(np.int8) << 1) - 1
                    newshape = (1,) * k + (-1,) + (1,) * (d - 1 - k)
                    gather.append(v.reshape(newshape))
                    f_axes.append(hb.reshape(newshape))
                f = tab[tuple(gather)]
                for hb in f_axes:
                    f = f * hb
                L += f
                qsum += f * f
            if not np.all(qsum == len(line)):
                qsum_ok = False
            flat = L.astype(np.int64, copy=False).ravel()
            l2_sum += int(flat @ flat)
        l2_expected = len(line) * cells
        line_ok = qsum_ok and l2_sum == l2_expected
        holds = holds and line_ok
        cells_total += cells
        lines_out.append({
            "first_scale": j, "members": len(line), "cells": cells,
            "pointwise_ok": qsum_ok, "l2_sum": l2_sum,
            "l2_expected": l2_expected, "ok": line_ok,
        })
    return {
        "t": t, "sigma_sq": decomp.sigma_sq(t), "holds": holds,
        "cells_checked": cells_total, "lines": lines_out,
        "elapsed_ms": round(1000 * (time.perf_counter() - start), 3),
    }


# ---------------------------------------------------------------------------
# stage kernel
# ---------------------------------------------------------------------------

def stage_values(decomp: BlockDecomposition, signs, t: int, prefix: int,
                 others: tuple[int, ...]) -> np.ndarray:
    """Block-t values over all 2^(n/q) extensions of a stage-(t-1) prefix.

    ``prefix`` fixes the first (t-1)n/q bits of x_1; ``others`` are the
    remaining coordinate indices at resolution n+1.  Entry c is B_t at the
    atom whose next n/q first-coordinate bits spell c.
    """
    n, d, w = decomp.n, decomp.d, decomp.width
    if w > MAX_STAGE_BITS:
        raise GuardRefusal(f"stage kernel is guarded at n/q <= {MAX_STAGE_BITS}")
    if len(others) != d - 1:
        raise ValueError(f"expected {d - 1} companion coordinates")
    if not 0 <= prefix < (1 << ((t - 1) * w)):
        raise ValueError("prefix has the wrong number of bits")
    m = n + 1
    big_w = t * w
    cand = np.arange(1 << w, dtype=np.uint64)
    out = np.zeros(1 << w, dtype=np.int64)
    per_line: dict[int, tuple[list, np.ndarray]] = {}
    for s in decomp.block(t).members:
        j = s[0]
        if j not in per_line:
            lo_bits = j - (t - 1) * w
            u_lo = cand >> np.uint64(big_w - j)
            if j == 0:
                u_list = []
            elif j <= 64:
                u_list = [u_lo | np.uint64(prefix << lo_bits)]
            else:
                limbs = streams.limbs_of(prefix << lo_bits, j)
                u_list = [u_lo | np.uint64(limbs[0])]
                u_list += [np.uint64(x) for x in limbs[1:]]
            b1 = (((cand >> np.uint64(big_w - j - 1)) & np.uint64(1))
                  .astype(np.int8) << 1) - 1
            per_line[j] = (u_list, b1)
        u_list, b1 = per_line[j]
        coords = [u_list]
        tail = 1
        for k in range(1, d):
            r, x = s[k], others[k - 1]
            coords.append(streams.limbs_of(x >> (m - r), r))
            tail *= 2 * ((x >> (m - r - 1)) & 1) - 1
        prod = signs.sign_grid(s, coords) * b1
        if tail == 1:
            out += prod
        else:
            out -= prod
    return out


# ---------------------------------------------------------------------------
# conditional greedy search
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WitnessReport:
    success: bool
    params: SearchParams
    point: GridPoint | None
    block_values: tuple[int, ...]
    total: int
    verified_total: int | None
    leftover_value: int | None
    ratio: float
    restarts_used: int
    stage_failures: dict[int, int]
    trace: tuple[tuple[int, int, int, bool], ...] = field(repr=False)
    elapsed_ms: float = 0.0

    def to_json(self) -> dict:
        return {
            "success": self.success,
            "params": self.params.to_json(),
            "point_indices": None if self.point is None else list(self.point.indices),
            "resolution": self.params.n + 1,
            "block_values": list(self.block_values),
            "total": self.total,
            "verified_total": self.verified_total,
            "leftover_value": self.leftover_value,
            "ratio": self.ratio,
            "threshold": float(self.params.tau) * self.params.n / math.sqrt(self.params.q),
            "restarts_used": self.restarts_used,
            "stage_failures": {str(k): v for k, v in sorted(self.stage_failures.items())},
            "elapsed_ms": self.elapsed_ms,
        }


def conditional_witness_search(params: SearchParams, signs) -> WitnessReport:
    """Stagewise greedy maximization of the blocks along the x_1 filtration.

    Each restart draws fresh companion coordinates, then walks the stages:
    stage t enumerates the 2^(n/q) extensions of the accepted prefix,
    keeps the maximizing one, and restarts the outer loop whenever the
    stage maximum fails the tau*n/sqrt(q) bar.  A returned witness is
    re-verified coordinate by coordinate through the scalar evaluator.
    """
    start = time.perf_counter()
    decomp = BlockDecomposition.build(params.n, params.d, params.q)
    m = params.n + 1
    w, stages = decomp.width, decomp.stages
    failures: Counter = Counter()
    trace: list[tuple[int, int, int, bool]] = []

    for restart in range(params.restarts):
        others = tuple(
            streams.rand_bits((streams.TAG_COORD, params.seed, restart, k), m)
            for k in range(1, params.d))
        prefix = 0
        values: list[int] = []
        for t in range(1, stages + 1):
            stage = stage_values(decomp, signs, t, prefix, others)
            best = int(stage.max())
            passed = exceeds_threshold(best, params.tau, params.n, params.q)
            trace.append((restart, t, best, passed))
            if not passed:
                failures[t] += 1
                break
            prefix = (prefix << w) | int(stage.argmax())
            values.append(best)
        else:
            pad = m - stages * w
            x1 = (prefix << pad) | ((1 << pad) - 1)
            point = GridPoint.uniform(m, (x1,) + others)
            rechecked = tuple(block_eval(decomp, signs, t, point)
                              for t in range(1, stages + 1))
            if rechecked != tuple(values):
                raise RuntimeError("stage kernel disagrees with scalar block values")
            leftover = sum(rfunction_eval(s, signs, point)
                           for s in decomp.leftover.members)
            full = sum(rfunction_eval(s, signs, point)
                       for s in decomp.constrained.members)
            total = sum(values)
            if full != total + leftover:
                raise RuntimeError("blocks plus leftover disagree with the full family")
            return WitnessReport(
                success=True, params=params, point=point,
                block_values=tuple(values), total=total,
                verified_total=sum(rechecked), leftover_value=leftover,
                ratio=total / (params.n * math.sqrt(params.q)),
                restarts_used=restart + 1, stage_failures=dict(failures),
                trace=tuple(trace),
                elapsed_ms=round(1000 * (time.perf_counter() - start), 3))

    return WitnessReport(
        success=False, params=params, point=None, block_values=(),
        total=0, verified_total=None, leftover_value=None, ratio=0.0,
        restarts_used=params.restarts, stage_failures=dict(failures),
        trace=tuple(trace),
        elapsed_ms=round(1000 * (time.perf_counter() - start), 3))


# ---------------------------------------------------------------------------
# coincidence-sum sampling
# ---------------------------------------------------------------------------

def _extract_top(limbs: list, total_bits: int, r: int) -> list:
    """Top r bits of total_bits-bit values held as little-endian limbs."""
    if r == 0:
        return []
    shift = total_bits - r
    word, off = shift >> 6, shift & 63
    nlimbs = (r + 63) >> 6
    out = []
    for k in range(nlimbs):
        piece = limbs[word + k] >> np.uint64(off)
        if off and word + k + 1 < len(limbs):
            piece = piece | (limbs[word + k + 1] << np.uint64(64 - off))
        out.append(piece)
    top = r - 64 * (nlimbs - 1)
    if top < 64:
        out[-1] = out[-1] & np.uint64((1 << top) - 1)
    return out


def _haar_factor(limbs: list, total_bits: int, r: int) -> np.ndarray:
    """The +-1 factor read off bit r (depth r+1) of each value."""
    pos = total_bits - r - 1
    bit = (limbs[pos >> 6] >> np.uint64(pos & 63)) & np.uint64(1)
    return (np.asarray(bit).astype(np.int8) << 1) - 1


def _cap_values(decomp: BlockDecomposition, signs, t: int, count: int,
                coord_limbs: list, coord_bits: list) -> np.ndarray:
    """sqcap_t per sample, from per-coordinate limb arrays.

    coord_limbs[0] carries only the first t*n/q bits of x_1; that prefix
    determines every line of block t.
    """
    rect_cache: dict[tuple[int, int], list] = {}
    bit_cache: dict[tuple[int, int], np.ndarray] = {}

    def rect(k: int, r: int) -> list:
        key = (k, r)
        if key not in rect_cache:
            rect_cache[key] = _extract_top(coord_limbs[k], coord_bits[k], r)
        return rect_cache[key]

    def factor(k: int, r: int) -> np.ndarray:
        key = (k, r)
        if key not in bit_cache:
            bit_cache[key] = _haar_factor(coord_limbs[k], coord_bits[k], r)
        return bit_cache[key]

    cap = np.zeros(count, dtype=np.int64)
    for j, line in decomp.lines(t).items():
        line_sum = np.zeros(count, dtype=np.int32)
        b1 = factor(0, j)
        for s in line:
            coords = [rect(k, s[k]) for k in range(decomp.d)]
            f = signs.sign_grid(s, coords) * b1
            for k in range(1, decomp.d):
                f = f * factor(k, s[k])
            line_sum += f
        cap += line_sum.astype(np.int64) ** 2 - len(line)
    return cap


def sqcap_samples(decomp: BlockDecomposition, signs, t: int, budget: int,
                  seed: int, chunk: int = 8192) -> np.ndarray:
    """sqcap_t at ``budget`` uniform random points, chunk-size invariant."""
    if not 1 <= t <= decomp.stages:
        raise ValueError(f"block index {t} out of range 1..{decomp.stages}")
    m = decomp.n + 1
    x1_bits = t * decomp.width
    out = np.empty(budget, dtype=np.int64)
    for lo in range(0, budget, chunk):
        cnt = min(chunk, budget - lo)
        limbs = [streams.rand_limb_matrix(
            (streams.TAG_POINT, seed, 0), cnt, x1_bits, start=lo)]
        bits = [x1_bits]
        for k in range(1, decomp.d):
            limbs.append(streams.rand_limb_matrix(
                (streams.TAG_POINT, seed, k), cnt, m, start=lo))
            bits.append(m)
        out[lo:lo + cnt] = _cap_values(decomp, signs, t, cnt, limbs, bits)
    return out


def gamma_diagnostic(params: SearchParams, signs, t: int = 1,
                     atoms: int = 32, samples: int = 2048) -> dict:
    """Frequency of stage-t atoms whose conditional sqcap second moment
    clears tau*n^2/q, estimated by Monte Carlo over the companion coordinates.

    The coincidence sum on a stage-t atom depends on x_1 only through the
    atom, so conditioning is exact; only the companion average is sampled.
    """
    decomp = BlockDecomposition.build(params.n, params.d, params.q)
    m = params.n + 1
    x1_bits = t * decomp.width
    threshold = float(params.tau) * params.n ** 2 / params.q
    moments = []
    for i in range(atoms):
        atom = streams.rand_bits((streams.TAG_FIXTURE, params.seed, t, i), x1_bits)
        limbs = [[np.uint64(l) for l in streams.limbs_of(atom, x1_bits)]]
        bits = [x1_bits]
        for k in range(1, params.d):
            limbs.append(streams.rand_limb_matrix(
                (streams.TAG_POINT, params.seed, i, k), samples, m))
            bits.append(m)
        caps = _cap_values(decomp, signs, t, samples, limbs, bits)
        moments.append(float(np.mean(caps.astype(np.float64) ** 2)) ** 0.5)
    exceed = sum(1 for v in moments if v >= threshold)
    return {
        "t": t, "atoms": atoms, "samples_per_atom": samples,
        "threshold": threshold, "moment_roots": moments,
        "exceed_frequency": exceed / atoms,
        "max_root": max(moments), "mean_root": sum(moments) / len(moments),
    }
