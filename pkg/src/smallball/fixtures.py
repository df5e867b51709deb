"""Seeded random fixtures from the hypothesis classes of the lemma verifiers.

Each generator is a pure function of (seed, index) through the counter-based
digest, so fixture suites are reproducible and order-independent.  The
lemmas are theorems on their hypothesis classes: a verifier reporting a
violation on any fixture from here is an implementation bug, never a
counterexample.
"""

from __future__ import annotations

from fractions import Fraction

from . import streams
from .probability import DyadicMartingale, FiniteDistribution

KIND_PZ = 1
KIND_PZ2 = 2
KIND_MARTINGALE = 3
KIND_CHAIN = 4
KIND_CHAIN_HALF = 5


def _draw(seed: int, kind: int, index: int, slot: int, span: int) -> int:
    """Uniform integer in [0, span)."""
    return streams.digest(streams.TAG_FIXTURE, seed, kind, index, slot) % span


def pz_fixture(seed: int, index: int) -> FiniteDistribution:
    """Nonnegative support, positive mean, 2..10 atoms, integer weights."""
    k = 2 + _draw(seed, KIND_PZ, index, 0, 9)
    pairs = []
    for a in range(k):
        v = _draw(seed, KIND_PZ, index, 2 * a + 1, 50)
        w = 1 + _draw(seed, KIND_PZ, index, 2 * a + 2, 16)
        pairs.append((v, w))
    if all(v == 0 for v, _ in pairs):
        pairs[0] = (1 + pairs[0][0], pairs[0][1])
    return FiniteDistribution.from_weights(pairs)


def pz2_fixture(seed: int, index: int) -> tuple[FiniteDistribution, Fraction]:
    """Symmetric centered distribution plus an exact admissible rho_1."""
    k = 1 + _draw(seed, KIND_PZ2, index, 0, 6)
    pairs = []
    for a in range(k):
        v = 1 + _draw(seed, KIND_PZ2, index, 2 * a + 1, 40)
        w = 1 + _draw(seed, KIND_PZ2, index, 2 * a + 2, 16)
        pairs.append((v, w))
        pairs.append((-v, w))
    if _draw(seed, KIND_PZ2, index, 99, 2):
        pairs.append((0, 1 + _draw(seed, KIND_PZ2, index, 100, 8)))
    dist = FiniteDistribution.from_weights(pairs)
    ratio = dist.moment(4) / dist.moment(2) ** 2
    rho1 = 1
    while rho1 ** 4 < ratio:
        rho1 += 1
    return dist, Fraction(rho1)


def martingale_fixture(seed: int, index: int) -> DyadicMartingale:
    """Independent symmetric stage increments over 1..3 levels, gaps 1..2.

    Each stage draws a single mirror-negated pattern and tiles it across
    every parent atom, so the increment depends only on the offset inside
    the parent and the stages are mutually independent.  Independence
    matters: conditional symmetry alone admits three-stage sequences whose
    fourth moment drops below the square function's, once a later stage
    correlates its magnitude against the sign of an earlier one.
    """
    stages = 1 + _draw(seed, KIND_MARTINGALE, index, 0, 3)
    levels = []
    lev = 0
    for t in range(stages):
        lev += 1 + _draw(seed, KIND_MARTINGALE, index, t + 1, 2)
        levels.append(lev)
    diffs = []
    prev = 0
    slot = 10
    for lev in levels:
        span = 1 << (lev - prev)
        half = [_draw(seed, KIND_MARTINGALE, index, (slot := slot + 1), 11) - 5
                for _ in range(span // 2)]
        pattern = half + [-v for v in reversed(half)]
        diffs.append(tuple(Fraction(v) for v in pattern) * (1 << prev))
        prev = lev
    return DyadicMartingale(tuple(levels), tuple(diffs))


def chain_fixture(seed: int, index: int) -> tuple[tuple[int, ...],
                                                  tuple[tuple[bool, ...], ...],
                                                  Fraction]:
    """Adapted events with gamma set to the measured minimum conditional mass.

    Every parent keeps at least one child, so the measured gamma is positive
    and the full gamma^q hypothesis holds by construction.
    """
    stages = 1 + _draw(seed, KIND_CHAIN, index, 0, 3)
    levels = []
    lev = 0
    for t in range(stages):
        lev += 1 + _draw(seed, KIND_CHAIN, index, t + 1, 2)
        levels.append(lev)
    indicators = []
    prev = 0
    slot = 10
    gamma = Fraction(1)
    for lev in levels:
        span = 1 << (lev - prev)
        ind = []
        for _ in range(1 << prev):
            block = [_draw(seed, KIND_CHAIN, index, (slot := slot + 1), 4) > 0
                     for _ in range(span)]
            if not any(block):
                block[_draw(seed, KIND_CHAIN, index, (slot := slot + 1), span)] = True
            ind.extend(block)
            gamma = min(gamma, Fraction(sum(block), span))
        indicators.append(tuple(ind))
        prev = lev
    return tuple(levels), tuple(indicators), gamma


def chain_half_fixture(seed: int, index: int) -> tuple[tuple[int, ...],
                                                       tuple[tuple[bool, ...], ...],
                                                       Fraction]:
    """A chain with exactly one bad parent, tuned for the halved bound.

    Levels (3, 6), gamma = 7/8: the first event keeps 7 of 8 atoms, one
    randomly chosen second-stage parent keeps only 3 of its 8 children
    (conditional mass 3/8 < gamma) while the rest keep all.  The bad-parent
    mass is 1/8 <= gamma^2/2 = 49/128, so the gamma^q/2 bound applies.
    """
    drop = _draw(seed, KIND_CHAIN_HALF, index, 0, 8)
    a1 = tuple(i != drop for i in range(8))
    bad_parent = _draw(seed, KIND_CHAIN_HALF, index, 1, 8)
    a2 = []
    for p in range(8):
        if p == bad_parent:
            kept = {_draw(seed, KIND_CHAIN_HALF, index, 2 + j, 8) for j in range(3)}
            fill = 0
            while len(kept) < 3:
                kept.add(fill)
                fill += 1
            a2.extend(c in kept for c in range(8))
        else:
            a2.extend([True] * 8)
    return (3, 6), (a1, tuple(a2)), Fraction(7, 8)
