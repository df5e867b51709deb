"""Counter-based deterministic random words.

Every random-looking quantity in this package (sign choices, coordinate
draws, Monte Carlo points, test fixtures) is a pure function of a tuple of
integer words pushed through the same 64-bit mixing chain.  Queries are
therefore order-independent and reproducible, and the scalar bigint path
and the vectorized numpy path produce identical bits.

The chain absorbs words one at a time into a 64-bit state
(``s = ((s ^ w) * M) & mask; s ^= s >> 29``) and applies the splitmix64
finalizer at the end.  Values wider than 64 bits are absorbed as
little-endian 64-bit limbs.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1

_IV = 0x243F6A8885A308D3  # binary digits of pi
_MULT = 0xD1342543DE82EF95
_GOLDEN = 0x9E3779B97F4A7C15

# Domain-separation tags; the first word of every stream.
TAG_SIGN = 0x5349474E
TAG_COORD = 0x434F5244
TAG_POINT = 0x504F494E
TAG_FIXTURE = 0x46495854

_U = np.uint64


def absorb(state: int, word: int) -> int:
    state = ((state ^ (word & MASK64)) * _MULT) & MASK64
    return state ^ (state >> 29)


def finish(state: int) -> int:
    z = (state + _GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def digest(*words: int) -> int:
    """64-bit digest of a word tuple (scalar path)."""
    s = _IV
    for w in words:
        s = absorb(s, w)
    return finish(s)


def absorb_prefix(*words: int) -> int:
    """State after absorbing ``words``, to be extended with more absorbs."""
    s = _IV
    for w in words:
        s = absorb(s, w)
    return s


def np_absorb(state, word):
    """Vector absorb; ``state`` and ``word`` are uint64 scalars or arrays."""
    with np.errstate(over="ignore"):
        s = (state ^ word) * _U(_MULT)
        return s ^ (s >> _U(29))


def np_finish(state):
    with np.errstate(over="ignore"):
        z = state + _U(_GOLDEN)
        z = (z ^ (z >> _U(30))) * _U(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> _U(27))) * _U(0x94D049BB133111EB)
        return z ^ (z >> _U(31))


def limbs_of(value: int, nbits: int) -> list[int]:
    """Little-endian 64-bit limbs of a nonnegative ``nbits``-bit integer.

    The limb count is ceil(nbits / 64); nbits = 0 yields no limbs.
    """
    out = []
    for _ in range((nbits + 63) >> 6):
        out.append(value & MASK64)
        value >>= 64
    return out


def rand_bits(words: tuple[int, ...], nbits: int) -> int:
    """Uniform ``nbits``-bit integer keyed by ``words`` (scalar path).

    Limb ell of the result is digest(*words, ell, 0); the trailing 0 is the
    element index, so rand_index_array with the same key agrees elementwise.
    """
    if nbits == 0:
        return 0
    value = 0
    for ell in range((nbits + 63) >> 6):
        value |= digest(*words, ell, 0) << (64 * ell)
    return value & ((1 << nbits) - 1)


def rand_index_array(words: tuple[int, ...], count: int, nbits: int,
                     start: int = 0) -> np.ndarray:
    """Uniform uint64 array for elements start..start+count-1 (nbits <= 63).

    Element i depends only on (words, i), so chunked generation with varying
    ``start`` windows reproduces one global sequence.
    """
    if not 0 <= nbits <= 63:
        raise ValueError("rand_index_array handles at most 63 bits; use rand_limb_matrix")
    prefix = absorb_prefix(*words, 0)  # limb 0
    arr = np.arange(start, start + count, dtype=np.uint64)
    out = np_finish(np_absorb(_U(prefix), arr))
    if nbits < 64:
        out &= _U((1 << nbits) - 1)
    return out


def rand_limb_matrix(words: tuple[int, ...], count: int, nbits: int,
                     start: int = 0) -> list[np.ndarray]:
    """Little-endian limb arrays of ``count`` uniform ``nbits``-bit integers.

    Element i of the matrix is keyed by its global index ``start + i``, so
    chunked consumers see the same stream regardless of chunk size.
    """
    arr = np.arange(start, start + count, dtype=np.uint64)
    out = []
    nlimbs = (nbits + 63) >> 6
    for ell in range(nlimbs):
        prefix = absorb_prefix(*words, ell)
        limb = np_finish(np_absorb(_U(prefix), arr))
        top = nbits - 64 * ell
        if top < 64:
            limb &= _U((1 << top) - 1)
        out.append(limb)
    return out
