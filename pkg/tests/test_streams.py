import numpy as np
import pytest

from smallball import streams


def test_absorb_matches_reference_bit_ops():
    state = streams._IV
    for w in [0, 1, 2**64 - 1, 0xDEADBEEF]:
        mixed = ((state ^ w) * 0xD1342543DE82EF95) % 2**64
        mixed ^= mixed >> 29
        assert streams.absorb(state, w) == mixed
        state = mixed


def test_scalar_and_vector_paths_agree_bit_for_bit():
    words = (streams.TAG_SIGN, 7, 3, 1, 2, 5)
    scalar = [streams.digest(*words, 0, i) for i in range(100)]
    prefix = np.uint64(streams.absorb_prefix(*words, 0))
    vec = streams.np_finish(streams.np_absorb(prefix, np.arange(100, dtype=np.uint64)))
    assert scalar == [int(v) for v in vec]


def test_rand_bits_deterministic_and_in_range():
    for nbits in [0, 1, 13, 64, 65, 200]:
        a = streams.rand_bits((streams.TAG_COORD, 3, 9), nbits)
        b = streams.rand_bits((streams.TAG_COORD, 3, 9), nbits)
        assert a == b
        assert 0 <= a < (1 << max(nbits, 1))


def test_rand_bits_differs_across_keys():
    vals = {streams.rand_bits((streams.TAG_COORD, 1, i), 64) for i in range(64)}
    assert len(vals) == 64


def test_rand_index_array_chunk_invariance():
    key = (streams.TAG_POINT, 11, 2)
    whole = streams.rand_index_array(key, 50, 20)
    parts = np.concatenate([
        streams.rand_index_array(key, 17, 20, start=0),
        streams.rand_index_array(key, 13, 20, start=17),
        streams.rand_index_array(key, 20, 20, start=30)])
    assert np.array_equal(whole, parts)


def test_rand_index_array_matches_scalar_at_zero():
    key = (streams.TAG_POINT, 5, 0)
    arr = streams.rand_index_array(key, 1, 40)
    assert int(arr[0]) == streams.rand_bits(key, 40)


def test_rand_index_array_rejects_wide_words():
    with pytest.raises(ValueError):
        streams.rand_index_array((1,), 4, 64)


def test_rand_limb_matrix_reassembles_to_scalar_digests():
    key = (streams.TAG_POINT, 2, 1)
    nbits = 150
    limbs = streams.rand_limb_matrix(key, 8, nbits, start=5)
    for i in range(8):
        value = 0
        for ell, limb in enumerate(limbs):
            value |= int(limb[i]) << (64 * ell)
        expected = 0
        for ell in range(3):
            expected |= streams.digest(*key, ell, 5 + i) << (64 * ell)
        assert value == expected & ((1 << nbits) - 1)


def test_rand_limb_matrix_chunk_invariance():
    key = (streams.TAG_POINT, 9, 3)
    whole = streams.rand_limb_matrix(key, 30, 130)
    front = streams.rand_limb_matrix(key, 12, 130, start=0)
    back = streams.rand_limb_matrix(key, 18, 130, start=12)
    for ell in range(len(whole)):
        assert np.array_equal(whole[ell], np.concatenate([front[ell], back[ell]]))


def test_limbs_of_round_trip():
    for nbits in [0, 1, 64, 65, 130]:
        value = (1 << nbits) - 1 if nbits else 0
        limbs = streams.limbs_of(value, nbits)
        assert len(limbs) == (nbits + 63) // 64
        back = 0
        for ell, limb in enumerate(limbs):
            back |= limb << (64 * ell)
        assert back == value


def test_digest_output_is_roughly_balanced():
    bits = sum((streams.digest(streams.TAG_SIGN, 0, i) >> 63) & 1
               for i in range(4096))
    assert 1800 < bits < 2300
