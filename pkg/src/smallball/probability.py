"""Exact finite-distribution verifiers for the probability lemmas.

Everything that can be rational is rational: moments, survival functions,
conditional means, and the lemma bounds are all computed in Fractions, so a
"holds" flag is an exact statement about the fixture, not a float
comparison.  Only the Orlicz norm, which involves exp, goes through floats.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction

import numpy as np


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(str(x))
    return Fraction(x)


@dataclass(frozen=True)
class FiniteDistribution:
    """Atoms with exact probability weights summing to one."""

    values: tuple[Fraction, ...]
    weights: tuple[Fraction, ...]

    def __post_init__(self):
        if len(self.values) != len(self.weights) or not self.values:
            raise ValueError("need matching, nonempty values and weights")
        if list(self.values) != sorted(set(self.values)):
            raise ValueError("values must be distinct and ascending")
        if any(w < 0 for w in self.weights):
            raise ValueError("weights must be nonnegative")
        if sum(self.weights) != 1:
            raise ValueError("weights must sum to one exactly")

    @classmethod
    def from_weights(cls, pairs) -> "FiniteDistribution":
        """Collapse (value, weight) pairs; weights any nonnegative rationals."""
        acc: Counter = Counter()
        for v, w in pairs:
            acc[_frac(v)] += _frac(w)
        total = sum(acc.values())
        if total == 0:
            raise ValueError("total weight must be positive")
        vals = tuple(sorted(v for v in acc if acc[v] > 0))
        return cls(vals, tuple(acc[v] / total for v in vals))

    @classmethod
    def from_samples(cls, samples) -> "FiniteDistribution":
        return cls.from_weights((v, 1) for v in samples)

    def moment(self, k: int) -> Fraction:
        return sum(w * v ** k for v, w in zip(self.values, self.weights))

    def abs_moment(self, k: int) -> Fraction:
        return sum(w * abs(v) ** k for v, w in zip(self.values, self.weights))

    def survival(self, t) -> Fraction:
        """P(Z > t)."""
        t = _frac(t)
        return sum(w for v, w in zip(self.values, self.weights) if v > t)

    def prob_ge(self, t) -> Fraction:
        t = _frac(t)
        return sum(w for v, w in zip(self.values, self.weights) if v >= t)

    def scaled(self, factor) -> "FiniteDistribution":
        factor = _frac(factor)
        return FiniteDistribution.from_weights(
            (v * factor, w) for v, w in zip(self.values, self.weights))

    @property
    def is_symmetric(self) -> bool:
        table = dict(zip(self.values, self.weights))
        return all(table.get(-v) == w for v, w in table.items())


# ---------------------------------------------------------------------------
# Paley-Zygmund, both variants
# ---------------------------------------------------------------------------

def paley_zygmund_bound(dist: FiniteDistribution) -> dict:
    """P(Z >= EZ/2) >= (EZ)^2 / (4 EZ^2) for nonnegative Z, checked exactly."""
    if any(v < 0 for v in dist.values):
        raise ValueError("requires a nonnegative distribution")
    m1 = dist.moment(1)
    if m1 == 0:
        raise ValueError("requires a positive mean")
    m2 = dist.moment(2)
    bound = m1 ** 2 / (4 * m2)
    prob = dist.prob_ge(m1 / 2)
    return {
        "mean": m1, "second_moment": m2, "threshold": m1 / 2,
        "bound": bound, "prob": prob, "holds": prob >= bound,
    }


def pz2_check(dist: FiniteDistribution, rho1) -> dict:
    """Anti-concentration for centered Z with ||Z||_4 <= rho1 ||Z||_2.

    Reports the largest rho with P(Z > rho ||Z||_2) > rho.  The survival
    function is a right-continuous step function, so on each interval
    between consecutive atom positions the condition reads rho < P; the
    supremum is the best of min(P, next atom / ||Z||_2) over intervals,
    compared exactly through squares since ||Z||_2 is irrational.
    """
    rho1 = _frac(rho1)
    mean = dist.moment(1)
    mu2 = dist.moment(2)
    mu4 = dist.moment(4)
    fourth_ok = mu2 > 0 and mu4 <= rho1 ** 4 * mu2 ** 2
    if mean != 0 or not fourth_ok:
        return {
            "hypothesis_ok": False, "mean": mean, "mu2": mu2, "mu4": mu4,
            "rho1": rho1,
            "reason": "mean" if mean != 0 else "fourth moment",
        }

    boundaries = sorted({Fraction(0)} | {v for v in dist.values if v >= 0})
    best_sq = Fraction(0)
    best_kind = None
    witness_ok = False
    for i, b in enumerate(boundaries):
        surv = dist.survival(b)
        if surv * surv * mu2 <= b * b:
            continue
        # the interval [b, next) meets {rho < P}; its supremum is capped
        # either by P itself or by the next atom position
        nxt = boundaries[i + 1] if i + 1 < len(boundaries) else None
        if nxt is not None and nxt * nxt <= surv * surv * mu2:
            cand_sq, kind = nxt * nxt / mu2, "atom"
        else:
            cand_sq, kind = surv * surv, "survival"
        if cand_sq > best_sq:
            best_sq, best_kind = cand_sq, kind
            witness_ok = True  # rho=b/||Z||_2 itself satisfies P > rho

    # proof replay: centering splits exactly, and the positive part obeys
    # the Hoelder bound (E Z 1_{Z>s})^4 <= EZ^4 P(Z>s)^3 at every atom
    z_plus = sum(w * v for v, w in zip(dist.values, dist.weights) if v > 0)
    z_minus = sum(-w * v for v, w in zip(dist.values, dist.weights) if v < 0)
    holder_ok = all(
        sum(w * v for v, w in zip(dist.values, dist.weights) if v > s) ** 4
        <= mu4 * dist.survival(s) ** 3
        for s in boundaries)

    return {
        "hypothesis_ok": True, "mean": mean, "mu2": mu2, "mu4": mu4,
        "rho1": rho1, "rho_sq": best_sq, "rho": math.sqrt(best_sq),
        "kind": best_kind, "positive": best_sq > 0, "witness_ok": witness_ok,
        "split_ok": z_plus == z_minus, "holder_ok": holder_ok,
    }


# ---------------------------------------------------------------------------
# dyadic martingales and the fourth-moment square-function bound
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DyadicMartingale:
    """Difference sequence on a dyadic filtration of [0,1).

    ``levels`` are 0 < l_1 < ... < l_T; ``diffs[t]`` holds the t-th
    difference on the 2^{l_t} level-l_t atoms.  Each difference must have
    exact zero mean on every atom of the previous level (level 0 for t=0).
    """

    levels: tuple[int, ...]
    diffs: tuple[tuple[Fraction, ...], ...]

    def __post_init__(self):
        if not self.levels or len(self.levels) != len(self.diffs):
            raise ValueError("need one difference per level")
        if list(self.levels) != sorted(set(self.levels)) or self.levels[0] < 1:
            raise ValueError("levels must be strictly increasing and positive")
        prev = 0
        for lev, d in zip(self.levels, self.diffs):
            if len(d) != 1 << lev:
                raise ValueError(f"difference at level {lev} needs {1 << lev} values")
            span = 1 << (lev - prev)
            for p in range(1 << prev):
                if sum(d[p * span:(p + 1) * span]) != 0:
                    raise ValueError(
                        f"difference at level {lev} has nonzero mean on atom {p}")
            prev = lev

    @property
    def stages(self) -> int:
        return len(self.levels)

    @property
    def finest(self) -> int:
        return self.levels[-1]

    def _lift(self, t: int) -> list:
        shift = self.finest - self.levels[t]
        return [self.diffs[t][i >> shift] for i in range(1 << self.finest)]

    def f_values(self) -> list:
        out = [Fraction(0)] * (1 << self.finest)
        for t in range(self.stages):
            for i, v in enumerate(self._lift(t)):
                out[i] += v
        return out

    def square_function_sq(self) -> list:
        out = [Fraction(0)] * (1 << self.finest)
        for t in range(self.stages):
            for i, v in enumerate(self._lift(t)):
                out[i] += v * v
        return out

    @property
    def conditionally_symmetric(self) -> bool:
        prev = 0
        for lev, d in zip(self.levels, self.diffs):
            span = 1 << (lev - prev)
            for p in range(1 << prev):
                block = sorted(d[p * span:(p + 1) * span])
                if block != sorted(-v for v in block):
                    return False
            prev = lev
        return True


def lp_fourth_moment_check(mart: DyadicMartingale) -> dict:
    """||S(f)||_4^4 <= ||f||_4^4 <= 12 ||S(f)||_4^4, exactly by atom sums."""
    if not mart.conditionally_symmetric:
        raise ValueError("requires a conditionally symmetric difference sequence")
    atoms = 1 << mart.finest
    f4 = sum(v ** 4 for v in mart.f_values()) / atoms
    s4 = sum(s ** 2 for s in mart.square_function_sq()) / atoms
    return {
        "f_fourth": f4, "s_fourth": s4,
        "lower_constant": 1, "upper_constant": 12,
        "holds": s4 <= f4 <= 12 * s4,
        "ratio": None if s4 == 0 else float(f4 / s4),
    }


# ---------------------------------------------------------------------------
# conditional-independence lower bound
# ---------------------------------------------------------------------------

def cond_indep_lower_bound(levels: tuple[int, ...],
                           indicators: tuple[tuple[bool, ...], ...],
                           gamma) -> dict:
    """Exact P of an adapted event intersection against the gamma^q chain bound.

    If every previous-level atom gives the next event conditional mass at
    least gamma, P(intersection) >= gamma^q.  Otherwise the union of the
    offending atoms is measured; when it holds at most gamma^q/2 of mass,
    the halved bound still applies (the chain loses at most the bad mass).
    """
    gamma = _frac(gamma)
    if not 0 < gamma <= 1:
        raise ValueError("gamma must lie in (0, 1]")
    if not levels or len(levels) != len(indicators):
        raise ValueError("need one indicator per level")
    if list(levels) != sorted(set(levels)) or levels[0] < 1:
        raise ValueError("levels must be strictly increasing and positive")
    q = len(levels)
    finest = levels[-1]
    for lev, ind in zip(levels, indicators):
        if len(ind) != 1 << lev:
            raise ValueError(f"indicator at level {lev} needs {1 << lev} entries")

    inter = 0
    bad_union = 0
    min_cond = Fraction(1)
    prev = 0
    bad_mask = [False] * (1 << finest)
    for lev, ind in zip(levels, indicators):
        span = 1 << (lev - prev)
        for p in range(1 << prev):
            hits = sum(1 for c in ind[p * span:(p + 1) * span] if c)
            cond = Fraction(hits, span)
            min_cond = min(min_cond, cond)
            if cond < gamma:
                shift = finest - prev
                for i in range(p << shift, (p + 1) << shift):
                    bad_mask[i] = True
        prev = lev
    for i in range(1 << finest):
        if all(ind[i >> (finest - lev)] for lev, ind in zip(levels, indicators)):
            inter += 1
        if bad_mask[i]:
            bad_union += 1

    prob = Fraction(inter, 1 << finest)
    bad_mass = Fraction(bad_union, 1 << finest)
    full = gamma ** q
    if min_cond >= gamma:
        variant, bound = "full", full
    elif bad_mass <= full / 2:
        variant, bound = "half", full / 2
    else:
        variant, bound = "none", None
    return {
        "probability": prob, "gamma": gamma, "q": q,
        "min_conditional": min_cond, "bad_mass": bad_mass,
        "variant": variant, "bound": bound,
        "holds": None if bound is None else prob >= bound,
    }


# ---------------------------------------------------------------------------
# Orlicz norms
# ---------------------------------------------------------------------------

def _orlicz_data(data) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(data, FiniteDistribution):
        vals = np.abs(np.array([float(v) for v in data.values]))
        wts = np.array([float(w) for w in data.weights])
        return vals, wts
    vals = np.abs(np.asarray(data, dtype=np.float64).ravel())
    if vals.size == 0:
        raise ValueError("need at least one sample")
    return vals, np.full(vals.size, 1.0 / vals.size)


def orlicz_norm(data, alpha: float, rel_tol: float = 1e-6) -> float:
    """Smallest K with E exp((|Z|/K)^alpha) <= 2, by bisection.

    The returned K satisfies the inequality; shrinking it by more than
    rel_tol violates the inequality.  K = 0 for Z identically zero.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    vals, wts = _orlicz_data(data)
    top = float(vals.max())
    if top == 0.0:
        return 0.0

    def mgf(k: float) -> float:
        with np.errstate(over="ignore"):
            return float(np.exp((vals / k) ** alpha) @ wts)

    hi = top / math.log(2) ** (1 / alpha)
    while mgf(hi) > 2.0:  # guard against rounding at the closed-form bracket
        hi *= 1.0 + 1e-9
    lo = hi / 2
    while mgf(lo) <= 2.0:
        hi = lo
        lo /= 2
    while hi - lo > rel_tol * hi:
        mid = (hi + lo) / 2
        if mgf(mid) <= 2.0:
            hi = mid
        else:
            lo = mid
    return hi


def orlicz_report(data, alpha: float, rel_tol: float = 1e-6) -> dict:
    """orlicz_norm plus a tail-domination flag for Monte Carlo inputs."""
    vals, wts = _orlicz_data(data)
    k = orlicz_norm(data, alpha, rel_tol)
    if k == 0.0:
        return {"k": 0.0, "alpha": alpha, "samples": int(vals.size),
                "max_abs": 0.0, "tail_share": 0.0, "tail_dominated": False}
    with np.errstate(over="ignore"):
        terms = np.exp((vals / k) ** alpha) * wts
    share = float(terms.max() / terms.sum())
    return {
        "k": k, "alpha": alpha, "samples": int(vals.size),
        "max_abs": float(vals.max()), "tail_share": share,
        "tail_dominated": share > 0.5,
    }
