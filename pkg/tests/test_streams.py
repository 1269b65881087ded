"""Counter-based stream tests: bit-exactness, independence, determinism.

The block function is re-implemented here in plain Python integers as an
independent reference route; the library version is vectorized numpy.
"""

import numpy as np

from countsynth.streams import (
    CellStream,
    CellStreams,
    derive_key,
    philox4x32,
    stream_seed,
)

_MASK32 = 0xFFFFFFFF
_MASK64 = 0xFFFFFFFFFFFFFFFF


def _philox_reference(counter, key, rounds=10):
    """Scalar 4x32 block function with the same bumped-key schedule."""
    c0, c1, c2, c3 = counter
    k0, k1 = key
    for _ in range(rounds):
        p0 = c0 * 0xD2511F53
        p1 = c2 * 0xCD9E8D57
        c0, c1, c2, c3 = (
            ((p1 >> 32) ^ c1 ^ k0) & _MASK32,
            p1 & _MASK32,
            ((p0 >> 32) ^ c3 ^ k1) & _MASK32,
            p0 & _MASK32,
        )
        k0 = (k0 + 0x9E3779B9) & _MASK32
        k1 = (k1 + 0xBB67AE85) & _MASK32
    return c0, c1, c2, c3


def _splitmix_reference(z):
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def test_block_function_matches_scalar_reference():
    rng = np.random.default_rng(1)
    for _ in range(50):
        counter = tuple(int(v) for v in rng.integers(0, 2**32, size=4))
        key = tuple(int(v) for v in rng.integers(0, 2**32, size=2))
        want = _philox_reference(counter, key)
        got = philox4x32(
            np.uint64([counter[0]]), np.uint64([counter[1]]),
            np.uint64([counter[2]]), np.uint64([counter[3]]),
            np.uint64(key[0]), np.uint64(key[1]),
        )
        assert tuple(int(w[0]) for w in got) == want


def test_block_function_is_vectorized_consistently():
    rng = np.random.default_rng(2)
    c = [rng.integers(0, 2**32, size=257).astype(np.uint64) for _ in range(4)]
    k0, k1 = np.uint64(123), np.uint64(456)
    batch = philox4x32(c[0], c[1], c[2], c[3], k0, k1)
    for j in (0, 17, 256):
        single = philox4x32(c[0][j:j + 1], c[1][j:j + 1],
                            c[2][j:j + 1], c[3][j:j + 1], k0, k1)
        for w_batch, w_single in zip(batch, single):
            assert int(w_batch[j]) == int(w_single[0])


def test_key_derivation_matches_reference():
    for seed in (0, 1, 42, 2**63, 2**64 - 1):
        mixed = _splitmix_reference(seed)
        assert derive_key(seed) == (mixed & _MASK32, mixed >> 32)


def test_stream_words_follow_counter_layout():
    """Lane output = block of counter (cell_lo, cell_hi, position, replicate)."""
    seed, rep = 987654321, 5
    cell = (7 << 32) | 12  # exercises both 32-bit halves of the cell id
    k0, k1 = derive_key(seed)
    s = CellStream(seed, rep, cell)
    for pos in range(3):
        w = _philox_reference((12, 7, pos, rep), (k0, k1))
        want_hi = (w[0] << 32) | w[1]
        assert s.bits64() == want_hi


def test_uniforms_open_interval_and_scale():
    s = stream_seed(3, 0, 0)
    w = s.bits64()
    t = stream_seed(3, 0, 0)
    u = t.uniform()
    assert u == ((w >> 11) + 0.5) * 2.0 ** -53
    streams = CellStreams(11, 0, np.arange(10_000, dtype=np.uint64))
    u = streams.next_uniform()
    assert np.all(u > 0.0) and np.all(u < 1.0)
    assert 0.45 < u.mean() < 0.55


def test_streams_are_deterministic_and_stateful():
    a = CellStreams(5, 2, np.arange(100, dtype=np.uint64))
    b = CellStreams(5, 2, np.arange(100, dtype=np.uint64))
    first_a = a.next_uniform()
    second_a = a.next_uniform()
    assert np.array_equal(first_a, b.next_uniform())
    assert np.array_equal(second_a, b.next_uniform())
    assert not np.array_equal(first_a, second_a)


def test_lane_outputs_do_not_depend_on_batch_composition():
    """Cell 17's draws are identical whether batched with 3 or 1000 cells."""
    big = CellStreams(9, 1, np.arange(1000, dtype=np.uint64))
    small = CellStreams(9, 1, np.asarray([3, 17, 900], dtype=np.uint64))
    u_big = [big.next_uniform() for _ in range(4)]
    u_small = [small.next_uniform() for _ in range(4)]
    for draw_big, draw_small in zip(u_big, u_small):
        assert draw_big[17] == draw_small[1]
        assert draw_big[3] == draw_small[0]
        assert draw_big[900] == draw_small[2]


def test_partial_lane_advancement():
    """Advancing a subset leaves other lanes' positions untouched."""
    s = CellStreams(9, 1, np.arange(6, dtype=np.uint64))
    ref = CellStreams(9, 1, np.arange(6, dtype=np.uint64))
    first = ref.next_uniform()
    second = ref.next_uniform()
    sub = s.next_uniform(np.asarray([1, 4]))
    assert sub[0] == first[1] and sub[1] == first[4]
    rest = s.next_uniform()
    # lanes 1 and 4 are now at position 1; the others still at position 0
    assert rest[1] == second[1] and rest[4] == second[4]
    for j in (0, 2, 3, 5):
        assert rest[j] == first[j]


def test_replicates_seeds_and_cells_give_distinct_output():
    base = stream_seed(1, 0, 0).bits64()
    assert stream_seed(1, 1, 0).bits64() != base
    assert stream_seed(1, 0, 1).bits64() != base
    assert stream_seed(2, 0, 0).bits64() != base


def test_no_collisions_across_a_million_cells():
    streams = CellStreams(123, 0, np.arange(1_000_000, dtype=np.uint64))
    hi, lo = streams.next_block()
    combined = hi ^ np.left_shift(lo, np.uint64(1))
    assert np.unique(hi).size == hi.size
    assert np.unique(combined).size == combined.size


def test_uniform_pair_consumes_one_block():
    one = stream_seed(77, 0, 3)
    pair = one.uniform_pair()
    two = stream_seed(77, 0, 3)
    hi, lo = two.next_block()
    assert pair[0] == ((int(hi[0]) >> 11) + 0.5) * 2.0 ** -53
    assert pair[1] == ((int(lo[0]) >> 11) + 0.5) * 2.0 ** -53
