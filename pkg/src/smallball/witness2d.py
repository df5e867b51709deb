"""Two-dimensional witness construction.

For order n in the plane the functions f_{(0,n)}, ..., f_{(n,0)} are
independent and take +-1 with equal probability, so all of them equal +1 on
a set of measure exactly 2^{-n-1}.  The greedy constructor below turns that
proof into an O(n) algorithm: f_{(k, n-k)} depends on x_1 only through its
first k+1 bits, so bit k+1 can always be chosen to make it +1, whatever the
signs and whatever x_2 is.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .dyadic import (GridPoint, GuardRefusal, HaarField, field_eval,
                     hyperbolic_shapes, rfunction_eval, rfunction_grid)

MAX_EXACT_N = 10  # exact joint enumerations walk 2^{2n+2} cells


@dataclass(frozen=True)
class Witness2D:
    n: int
    point: GridPoint
    achieved: int
    bit_trace: tuple[int, ...]
    oracle_queries: int
    verified: bool

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "point_indices": list(self.point.indices),
            "resolution": self.point.resolution[0],
            "achieved": self.achieved,
            "bit_trace": list(self.bit_trace),
            "oracle_queries": self.oracle_queries,
            "verified": self.verified,
        }


def _joint_codes(n: int, signs) -> np.ndarray:
    """Bit k of the code at a cell records whether f_{(k, n-k)} = +1 there."""
    m = n + 1
    code = np.zeros((1 << m, 1 << m), dtype=np.uint32)
    for k in range(n + 1):
        grid = rfunction_grid((k, n - k), signs, (m, m))
        code |= (grid > 0).astype(np.uint32) << np.uint32(k)
    return code


def independence_check(n: int, signs) -> tuple[bool, dict]:
    """Exact joint histogram of (f_{(k, n-k)})_k against the uniform law.

    Counts every cell of the resolution-(n+1) grid and verifies that each of
    the 2^{n+1} sign patterns appears equally often.
    """
    if n > MAX_EXACT_N:
        raise GuardRefusal(f"exact joint histogram is guarded at n <= {MAX_EXACT_N}")
    code = _joint_codes(n, signs)
    counts = np.bincount(code.ravel(), minlength=1 << (n + 1))
    expected = (1 << (2 * (n + 1))) >> (n + 1)
    uniform = bool(np.all(counts == expected))
    return uniform, {
        "n": n,
        "patterns": 1 << (n + 1),
        "expected_per_pattern": expected,
        "count_min": int(counts.min()),
        "count_max": int(counts.max()),
        "uniform": uniform,
    }


def witness_measure(n: int, signs) -> Fraction:
    """Exact measure of the event that every f_{(k, n-k)} equals +1."""
    if n > MAX_EXACT_N:
        raise GuardRefusal(f"exact witness measure is guarded at n <= {MAX_EXACT_N}")
    code = _joint_codes(n, signs)
    hits = int(np.count_nonzero(code == (1 << (n + 1)) - 1))
    return Fraction(hits, 1 << (2 * (n + 1)))


def greedy_witness_2d(n: int, signs, x2_index: int | None = None) -> Witness2D:
    """Build a point where the full order-n field attains n+1.

    Walks k = 0..n choosing bit k+1 of x_1 so that f_{(k, n-k)} = +1; one
    sign query per step.  The result is re-verified by an independent
    field_eval over the whole family.
    """
    m = n + 1
    if x2_index is None:
        x2_index = (1 << m) - 1  # all right halves
    if not 0 <= x2_index < (1 << m):
        raise ValueError(f"x2 index {x2_index} out of range at resolution {m}")

    prefix = 0
    trace = []
    queries = 0
    for k in range(n + 1):
        r2 = n - k
        eps = signs.sign((k, r2), (prefix, x2_index >> (m - r2)))
        queries += 1
        t2 = 2 * ((x2_index >> k) & 1) - 1
        target = eps * t2  # h(x_1) must equal this for the product to be +1
        bit = (target + 1) // 2
        trace.append(bit)
        prefix = (prefix << 1) | bit

    point = GridPoint.uniform(m, (prefix, x2_index))
    field = HaarField(hyperbolic_shapes(n, 2), signs)
    achieved = field_eval(field, point)
    verified = achieved == n + 1 and all(
        rfunction_eval(s, signs, point) == 1 for s in field.family.members)
    return Witness2D(n, point, achieved, tuple(trace), queries, verified)
