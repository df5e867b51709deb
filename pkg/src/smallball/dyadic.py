"""Exact dyadic Haar machinery on the unit cube.

Conventions, used everywhere without further comment:

* A dyadic interval of level k and index j is [j/2^k, (j+1)/2^k), half open.
* The Haar function of an interval is -1 on its left half, +1 on its right
  half, 0 outside (L-infinity normalization, values in {-1, 0, +1}).
  A rectangle's Haar function is the product over coordinates.
* A shape is a d-tuple of nonnegative scales (r_1, ..., r_d); its rectangles
  are all products of per-coordinate intervals at those levels.  An
  r-function is the sum over all rectangles of one shape of sign * Haar;
  it takes values +-1 off the dyadic boundary grid.
* Evaluation points are cell midpoints of a stated per-coordinate
  resolution, so no evaluation ever lands on a boundary and every value is
  an exact integer.
* Within a shape, rectangles are ordered row-major on their per-coordinate
  indices (last coordinate fastest); shapes are ordered lexicographically.
  Sign bitmask files use bit position = row-major rank, bit 1 meaning +1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import streams

Shape = tuple[int, ...]
ShapeVector = Shape  # canonical name for report/JSON contexts


class GuardRefusal(RuntimeError):
    """A computation would exceed its configured size guard."""


# ---------------------------------------------------------------------------
# intervals, rectangles, grid points
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DyadicInterval:
    """[index/2^level, (index+1)/2^level), half open."""

    level: int
    index: int

    def __post_init__(self):
        if self.level < 0:
            raise ValueError(f"negative level {self.level}")
        if not 0 <= self.index < (1 << self.level):
            raise ValueError(f"index {self.index} out of range at level {self.level}")

    @property
    def lower(self) -> Fraction:
        return Fraction(self.index, 1 << self.level)

    @property
    def upper(self) -> Fraction:
        return Fraction(self.index + 1, 1 << self.level)

    @property
    def center(self) -> Fraction:
        return Fraction(2 * self.index + 1, 1 << (self.level + 1))

    def left_half(self) -> "DyadicInterval":
        return DyadicInterval(self.level + 1, 2 * self.index)

    def right_half(self) -> "DyadicInterval":
        return DyadicInterval(self.level + 1, 2 * self.index + 1)


@dataclass(frozen=True)
class DyadicRect:
    intervals: tuple[DyadicInterval, ...]

    def __post_init__(self):
        if len(self.intervals) < 1:
            raise ValueError("a rectangle needs at least one coordinate")

    @property
    def dimension(self) -> int:
        return len(self.intervals)

    @property
    def volume(self) -> Fraction:
        return Fraction(1, 1 << sum(i.level for i in self.intervals))


@dataclass(frozen=True)
class GridPoint:
    """Midpoint of the cell prod [idx_j/2^{m_j}, (idx_j+1)/2^{m_j})."""

    resolution: tuple[int, ...]
    indices: tuple[int, ...]

    def __post_init__(self):
        if len(self.resolution) != len(self.indices):
            raise ValueError("resolution/indices length mismatch")
        for m, i in zip(self.resolution, self.indices):
            if m < 0 or not 0 <= i < (1 << m):
                raise ValueError(f"grid index {i} out of range at resolution {m}")

    @classmethod
    def uniform(cls, m: int, indices: tuple[int, ...]) -> "GridPoint":
        return cls((m,) * len(indices), tuple(indices))

    @property
    def dimension(self) -> int:
        return len(self.indices)

    def coordinate(self, j: int) -> Fraction:
        m, i = self.resolution[j], self.indices[j]
        return Fraction(2 * i + 1, 1 << (m + 1))

    def coordinates(self) -> tuple[Fraction, ...]:
        return tuple(self.coordinate(j) for j in range(self.dimension))


def midpoint_value(resolution: int, index: int) -> Fraction:
    """Midpoint of cell ``index`` at the given 1-d resolution."""
    if not 0 <= index < (1 << resolution):
        raise ValueError(f"index {index} out of range at resolution {resolution}")
    return Fraction(2 * index + 1, 1 << (resolution + 1))


# ---------------------------------------------------------------------------
# scalar Haar evaluation
# ---------------------------------------------------------------------------

def haar_eval(interval: DyadicInterval, x) -> int:
    """Haar value of ``interval`` at ``x``; -1 left half, +1 right, 0 outside.

    ``x`` may be an exact number (Fraction, int, float with exact binary
    value) or a (resolution, index) pair naming a grid midpoint.  A point
    exactly on the interval's center is rejected as ambiguous; the outer
    endpoints are unambiguous under half-open semantics.
    """
    if isinstance(x, tuple):
        x = midpoint_value(*x)
    else:
        x = Fraction(x)
    if not interval.lower <= x < interval.upper:
        return 0
    if x == interval.center:
        raise ValueError(f"{x} lies on the half boundary of {interval}")
    return -1 if x < interval.center else 1


def rect_haar_eval(rect: DyadicRect, point: GridPoint) -> int:
    """Product of per-coordinate Haar values at a grid midpoint."""
    if rect.dimension != point.dimension:
        raise ValueError("dimension mismatch between rectangle and point")
    out = 1
    for j, interval in enumerate(rect.intervals):
        v = haar_eval(interval, point.coordinate(j))
        if v == 0:
            return 0
        out *= v
    return out


# ---------------------------------------------------------------------------
# shape families
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScaleBound:
    """Inclusive bounds on one scale coordinate; hi=None means unbounded."""

    coord: int
    lo: int = 0
    hi: int | None = None

    def admits(self, shape: Shape) -> bool:
        r = shape[self.coord]
        return r >= self.lo and (self.hi is None or r <= self.hi)

    def token(self) -> str:
        if self.coord != 0:
            raise ValueError("only first-coordinate constraints have a file token")
        if self.lo == 0 and self.hi is not None:
            return f"r1max={self.hi}"
        if self.hi is None:
            raise ValueError("unbounded-above constraint with nonzero lo has no token")
        return f"r1in={self.lo}..{self.hi}"


def parse_constraint(token: str) -> ScaleBound | None:
    token = token.strip()
    if token == "none":
        return None
    if token.startswith("r1max="):
        return ScaleBound(0, 0, int(token[6:]))
    if token.startswith("r1in="):
        lo, _, hi = token[5:].partition("..")
        return ScaleBound(0, int(lo), int(hi))
    raise ValueError(f"unrecognized constraint token {token!r}")


def constraint_token(constraint: ScaleBound | None) -> str:
    return "none" if constraint is None else constraint.token()


@dataclass(frozen=True)
class ShapeFamily:
    """An explicit set of shapes of one order, lexicographically sorted."""

    dimension: int
    order: int
    constraint: ScaleBound | None
    members: tuple[Shape, ...]

    def __post_init__(self):
        seen = set()
        for s in self.members:
            if len(s) != self.dimension or any(r < 0 for r in s):
                raise ValueError(f"bad shape {s}")
            if sum(s) != self.order:
                raise ValueError(f"shape {s} does not have order {self.order}")
            if self.constraint is not None and not self.constraint.admits(s):
                raise ValueError(f"shape {s} violates {self.constraint}")
            if s in seen:
                raise ValueError(f"duplicate shape {s}")
            seen.add(s)
        if list(self.members) != sorted(self.members):
            raise ValueError("members must be in lexicographic order")

    def __len__(self) -> int:
        return len(self.members)

    @property
    def is_empty(self) -> bool:
        return not self.members

    def max_scales(self) -> tuple[int, ...]:
        """Per-coordinate maximum scale (zeros for the empty family)."""
        if not self.members:
            return (0,) * self.dimension
        return tuple(max(s[j] for s in self.members) for j in range(self.dimension))

    def min_resolution(self) -> tuple[int, ...]:
        return tuple(r + 1 for r in self.max_scales())


def hyperbolic_shapes(n: int, d: int, constraint: ScaleBound | None = None) -> ShapeFamily:
    """All d-tuples of nonnegative scales summing to n, meeting the constraint.

    The unconstrained count is C(n+d-1, d-1).  An unsatisfiable constraint
    yields an empty family (flagged via ``is_empty``), not an error.
    """
    if n < 0 or d < 1:
        raise ValueError(f"order {n} and dimension {d} must be nonnegative/positive")

    def gen(total: int, coords: int):
        if coords == 1:
            yield (total,)
            return
        for r in range(total + 1):
            for rest in gen(total - r, coords - 1):
                yield (r,) + rest

    members = tuple(s for s in gen(n, d) if constraint is None or constraint.admits(s))
    return ShapeFamily(d, n, constraint, members)


def group_by_coord(family: ShapeFamily, coord: int) -> dict[int, tuple[Shape, ...]]:
    """Members grouped by the scale in one coordinate, keys ascending."""
    out: dict[int, list[Shape]] = {}
    for s in family.members:
        out.setdefault(s[coord], []).append(s)
    return {k: tuple(v) for k, v in sorted(out.items())}


# ---------------------------------------------------------------------------
# sign oracles
# ---------------------------------------------------------------------------
#
# An oracle maps (shape, rectangle index tuple) to +-1, deterministically and
# independently of query order.  Two entry points:
#   sign(shape, indices)          scalar, arbitrary-precision indices
#   sign_grid(shape, coords)      vectorized; per coordinate either a uint64
#                                 index array (level <= 64) or a list of
#                                 little-endian uint64 limb arrays
# Both must agree bit for bit.

def _limb_lists(shape: Shape, coords) -> list[list[np.ndarray]]:
    out = []
    for level, c in zip(shape, coords):
        if isinstance(c, list):
            expected = (level + 63) >> 6 if level else 0
            if len(c) != expected:
                raise ValueError(f"level {level} needs {expected} limbs, got {len(c)}")
            out.append([np.asarray(l, dtype=np.uint64) for l in c])
        elif level == 0:
            out.append([])
        elif level <= 64:
            out.append([np.asarray(c, dtype=np.uint64)])
        else:
            raise ValueError(f"level {level} > 64 requires explicit limb arrays")
    return out


def _broadcast_shape(limb_lists) -> tuple[int, ...]:
    arrays = [l for limbs in limb_lists for l in limbs]
    if not arrays:
        return ()
    return np.broadcast_shapes(*(a.shape for a in arrays))


class AllPlusSigns:
    """Every sign +1."""

    def describe(self) -> str:
        return "all-plus"

    def sign(self, shape: Shape, indices: tuple[int, ...]) -> int:
        return 1

    def sign_grid(self, shape: Shape, coords) -> np.ndarray:
        return np.ones(_broadcast_shape(_limb_lists(shape, coords)), dtype=np.int8)


class SeededSigns:
    """Signs as a pure function of (seed, shape, rectangle indices).

    Each query hashes the words [tag, seed, d, r_1..r_d] followed by the
    little-endian 64-bit limbs of each coordinate index (ceil(level/64)
    limbs; none at level 0) and takes the top bit: 1 -> +1, 0 -> -1.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)

    def describe(self) -> str:
        return f"seed:{self.seed}"

    def _prefix(self, shape: Shape) -> int:
        return streams.absorb_prefix(
            streams.TAG_SIGN, self.seed, len(shape), *shape)

    def sign(self, shape: Shape, indices: tuple[int, ...]) -> int:
        state = self._prefix(shape)
        for level, idx in zip(shape, indices):
            if not 0 <= idx < (1 << level):
                raise ValueError(f"index {idx} out of range at level {level}")
            for limb in streams.limbs_of(idx, level):
                state = streams.absorb(state, limb)
        return 1 if streams.finish(state) >> 63 else -1

    def sign_grid(self, shape: Shape, coords) -> np.ndarray:
        state = np.uint64(self._prefix(shape))
        for limbs in _limb_lists(shape, coords):
            for limb in limbs:
                state = streams.np_absorb(state, limb)
        digest = streams.np_finish(state)
        if digest.ndim == 0:
            digest = digest[None]
            squeeze = True
        else:
            squeeze = False
        out = ((digest >> np.uint64(63)).astype(np.int8) << 1) - 1
        return out[0] if squeeze else out


def rect_rank(shape: Shape, indices: tuple[int, ...]) -> int:
    """Row-major rank of a rectangle within its shape (last coord fastest)."""
    rank = 0
    for level, idx in zip(shape, indices):
        if not 0 <= idx < (1 << level):
            raise ValueError(f"index {idx} out of range at level {level}")
        rank = (rank << level) | idx
    return rank


class ExplicitSigns:
    """A stored +-1 table over every rectangle of a complete family.

    ``masks`` maps each shape to an integer whose bit at the rectangle's
    row-major rank is 1 for +1 and 0 for -1.
    """

    MAX_ORDER = 20  # 2^order sign bits per shape

    def __init__(self, dimension: int, order: int, constraint: ScaleBound | None,
                 masks: dict[Shape, int], label: str = "explicit"):
        if order > self.MAX_ORDER:
            raise ValueError(f"explicit tables support order <= {self.MAX_ORDER}")
        family = hyperbolic_shapes(order, dimension, constraint)
        if set(masks) != set(family.members):
            raise ValueError("sign table does not cover exactly the family")
        nrect = 1 << order
        for shape, mask in masks.items():
            if not 0 <= mask < (1 << nrect):
                raise ValueError(f"mask for shape {shape} has stray bits")
        self.dimension = dimension
        self.order = order
        self.constraint = constraint
        self.masks = dict(masks)
        self.label = label
        self._tables: dict[Shape, np.ndarray] = {}

    def describe(self) -> str:
        return self.label

    def sign(self, shape: Shape, indices: tuple[int, ...]) -> int:
        mask = self.masks.get(shape)
        if mask is None:
            raise KeyError(f"shape {shape} not in the stored family")
        return 1 if (mask >> rect_rank(shape, indices)) & 1 else -1

    def _table(self, shape: Shape) -> np.ndarray:
        t = self._tables.get(shape)
        if t is None:
            nrect = 1 << self.order
            raw = self.masks[shape].to_bytes((nrect + 7) // 8, "little")
            bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8),
                                 bitorder="little")[:nrect]
            t = (bits.astype(np.int8) << 1) - 1
            self._tables[shape] = t
        return t

    def sign_grid(self, shape: Shape, coords) -> np.ndarray:
        limb_lists = _limb_lists(shape, coords)
        rank = np.zeros(_broadcast_shape(limb_lists), dtype=np.int64)
        for level, limbs in zip(shape, limb_lists):
            if len(limbs) > 1:
                raise ValueError("explicit tables require single-limb indices")
            idx = limbs[0].astype(np.int64) if limbs else 0
            rank = (rank << level) | idx
        return self._table(shape)[rank]

    @classmethod
    def materialize(cls, family: ShapeFamily, signs, label: str | None = None) -> "ExplicitSigns":
        """Snapshot any oracle on a family into an explicit table."""
        masks: dict[Shape, int] = {}
        for shape in family.members:
            nrect = 1 << family.order
            idx_arrays = []
            strides_done = 0
            for level in reversed(shape):
                arr = (np.arange(nrect, dtype=np.uint64) >> np.uint64(strides_done)) \
                    & np.uint64((1 << level) - 1)
                idx_arrays.append(arr)
                strides_done += level
            idx_arrays.reverse()
            grid = signs.sign_grid(shape, idx_arrays)
            bits = (grid > 0).astype(np.uint8)
            mask = int.from_bytes(np.packbits(bits, bitorder="little").tobytes(), "little")
            masks[shape] = mask
        return cls(family.dimension, family.order, family.constraint, masks,
                   label or f"explicit({signs.describe()})")


def save_signs(oracle: ExplicitSigns, path: str) -> None:
    """Write ``d n constraint`` then one line per shape: scales and hex mask."""
    nrect = 1 << oracle.order
    width = max(1, (nrect + 3) // 4)
    with open(path, "w") as fh:
        fh.write(f"{oracle.dimension} {oracle.order} "
                 f"{constraint_token(oracle.constraint)}\n")
        for shape in sorted(oracle.masks):
            scales = " ".join(str(r) for r in shape)
            fh.write(f"{scales} {oracle.masks[shape]:0{width}x}\n")


def load_signs(path: str) -> ExplicitSigns:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 3:
            raise ValueError(f"{path}: header must be 'd n constraint'")
        d, n = int(header[0]), int(header[1])
        constraint = parse_constraint(header[2])
        masks: dict[Shape, int] = {}
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if len(parts) != d + 1:
                raise ValueError(f"{path}: expected {d} scales and a mask: {line!r}")
            shape = tuple(int(p) for p in parts[:d])
            masks[shape] = int(parts[d], 16)
    return ExplicitSigns(d, n, constraint, masks, label=f"file:{path}")


class _AtomSigns:
    """Signs of a field restricted to one dyadic atom in one coordinate.

    Queries are forwarded to the base oracle with the coordinate's scale
    raised by the atom level and the index re-embedded below the atom.
    """

    def __init__(self, base, coord: int, atom: DyadicInterval):
        self.base = base
        self.coord = coord
        self.atom = atom

    def describe(self) -> str:
        return (f"{self.base.describe()}|x{self.coord + 1} in "
                f"[{self.atom.index}/2^{self.atom.level}]")

    def _lift(self, shape: Shape, indices: tuple[int, ...]):
        level = self.atom.level
        shape_up = tuple(r + level if j == self.coord else r
                         for j, r in enumerate(shape))
        idx_up = tuple((self.atom.index << shape[j]) | i if j == self.coord else i
                       for j, i in enumerate(indices))
        return shape_up, idx_up

    def sign(self, shape: Shape, indices: tuple[int, ...]) -> int:
        return self.base.sign(*self._lift(shape, indices))

    def sign_grid(self, shape: Shape, coords) -> np.ndarray:
        level = self.atom.level
        limb_lists = _limb_lists(shape, coords)
        r = shape[self.coord]
        if r + level > 63:
            raise ValueError("vectorized atom signs support combined level <= 63")
        shape_up = tuple(s + level if j == self.coord else s
                         for j, s in enumerate(shape))
        base_bits = np.uint64(self.atom.index << r)
        lifted = []
        for j, limbs in enumerate(limb_lists):
            if j != self.coord:
                lifted.append(limbs if limbs else [])
            elif r + level == 0:
                lifted.append([])
            else:
                idx = limbs[0] if limbs else np.uint64(0)
                lifted.append([idx | base_bits])
        return self.base.sign_grid(shape_up, lifted)


def parse_signs_token(token: str, default_seed: int):
    """CLI/sign-file entry: 'all-plus', 'seed:K', or 'file:PATH'."""
    if token is None:
        return SeededSigns(default_seed)
    if token == "all-plus":
        return AllPlusSigns()
    if token.startswith("seed:"):
        return SeededSigns(int(token[5:]))
    if token.startswith("file:"):
        return load_signs(token[5:])
    raise ValueError(f"unrecognized signs {token!r}")


# ---------------------------------------------------------------------------
# fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HaarField:
    """A signed sum of r-functions, one per member shape."""

    family: ShapeFamily
    signs: object

    @property
    def dimension(self) -> int:
        return self.family.dimension

    @property
    def order(self) -> int:
        return self.family.order


def _check_resolution(shape: Shape, point: GridPoint) -> None:
    for j, r in enumerate(shape):
        if point.resolution[j] < r + 1:
            raise ValueError(
                f"resolution {point.resolution[j]} too coarse for scale {r} "
                f"in coordinate {j + 1}")


def rfunction_eval(shape: Shape, signs, point: GridPoint) -> int:
    """Value of the shape's r-function at a grid midpoint; always +-1."""
    if len(shape) != point.dimension:
        raise ValueError("dimension mismatch")
    _check_resolution(shape, point)
    rect_idx = []
    haar = 1
    for j, r in enumerate(shape):
        m, idx = point.resolution[j], point.indices[j]
        rect_idx.append(idx >> (m - r))
        haar *= 2 * ((idx >> (m - r - 1)) & 1) - 1
    return signs.sign(shape, tuple(rect_idx)) * haar


def field_eval(field: HaarField, point: GridPoint) -> int:
    """Sum of r-function values over the family; exact integer."""
    return sum(rfunction_eval(s, field.signs, point) for s in field.family.members)


# ---------------------------------------------------------------------------
# vectorized grids
# ---------------------------------------------------------------------------

def _axis_view(arr: np.ndarray, axis: int, d: int) -> np.ndarray:
    idx = [None] * d
    idx[axis] = slice(None)
    return arr[tuple(idx)]


def rfunction_grid(shape: Shape, signs, resolution: tuple[int, ...],
                   ranges: tuple[tuple[int, int], ...] | None = None) -> np.ndarray:
    """r-function values over a midpoint grid, as an int8 array.

    ``resolution`` gives per-coordinate grid depth (must exceed each scale);
    ``ranges`` optionally restricts each axis to [start, stop) index windows,
    which is how large sweeps slab their memory.
    """
    d = len(shape)
    if ranges is None:
        ranges = tuple((0, 1 << m) for m in resolution)
    rect_axes = []
    haar = None
    for j, (r, m, (lo, hi)) in enumerate(zip(shape, resolution, ranges)):
        if m < r + 1:
            raise ValueError(f"resolution {m} too coarse for scale {r}")
        idx = np.arange(lo, hi, dtype=np.uint64)
        rect_axes.append(_axis_view(idx >> np.uint64(m - r), j, d))
        bit = (idx >> np.uint64(m - r - 1)).astype(np.int8) & 1
        factor = _axis_view((bit << 1) - 1, j, d)
        haar = factor if haar is None else haar * factor
    return signs.sign_grid(shape, rect_axes) * haar


def field_grid(family: ShapeFamily, signs, resolution: tuple[int, ...],
               ranges: tuple[tuple[int, int], ...] | None = None,
               dtype=np.int16) -> np.ndarray:
    """Field values over a midpoint grid (sum of per-shape grids)."""
    if ranges is None:
        ranges = tuple((0, 1 << m) for m in resolution)
    out = np.zeros(tuple(hi - lo for lo, hi in ranges), dtype=dtype)
    for shape in family.members:
        out += rfunction_grid(shape, signs, resolution, ranges)
    return out


def value_histogram(field: HaarField, resolution: tuple[int, ...] | None = None,
                    max_bits: int = 26) -> dict[int, Fraction]:
    """Exact distribution of field values over the full midpoint grid."""
    res = resolution or field.family.min_resolution()
    bits = sum(res)
    if bits > max_bits:
        raise GuardRefusal(f"histogram grid needs 2^{bits} cells, guard is 2^{max_bits}")
    grid = field_grid(field.family, field.signs, res)
    values, counts = np.unique(grid, return_counts=True)
    total = 1 << bits
    return {int(v): Fraction(int(c), total) for v, c in zip(values, counts)}


def restrict_to_atom(field: HaarField, coord: int, atom: DyadicInterval) -> HaarField:
    """The field seen on one dyadic atom of a coordinate, renormalized.

    Every member must have scale >= atom.level in that coordinate; the
    restricted family lowers those scales by the atom level and the signs
    are read off the base oracle on the corresponding sub-rectangles.  The
    exact value distribution of the result equals the conditional
    distribution of the original field on the slab.
    """
    fam = field.family
    if not 0 <= coord < fam.dimension:
        raise ValueError(f"coordinate {coord} out of range")
    level = atom.level
    for s in fam.members:
        if s[coord] < level:
            raise ValueError(f"shape {s} is coarser than the atom in coordinate {coord + 1}")
    members = tuple(tuple(r - level if j == coord else r for j, r in enumerate(s))
                    for s in fam.members)
    constraint = fam.constraint
    if constraint is not None and constraint.coord == coord:
        hi = None if constraint.hi is None else constraint.hi - level
        constraint = ScaleBound(coord, max(constraint.lo - level, 0), hi)
    family = ShapeFamily(fam.dimension, fam.order - level, constraint, members)
    return HaarField(family, _AtomSigns(field.signs, coord, atom))


def family_count(n: int, d: int) -> int:
    """Unconstrained family size, C(n+d-1, d-1)."""
    return math.comb(n + d - 1, d - 1)
