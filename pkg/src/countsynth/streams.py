"""Counter-based per-cell random number streams.

Synthesis needs one independent stream per (master seed, replicate, cell) so
that results are reproducible bit-for-bit regardless of how cells are chunked
or scheduled across threads.  We use the Philox 4x32-10 block function: the
128-bit counter packs (cell index, per-stream draw position, replicate) and
the 64-bit key is derived from the master seed.  Philox is a bijection per
key, so distinct (replicate, cell, position) triples can never collide.

All hot paths are vectorized over lanes (one lane per cell) using uint64
arrays that hold 32-bit words, so 32x32 products are exact.
"""

import numpy as np

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK32 = np.uint64(0xFFFFFFFF)
_MASK64 = 0xFFFFFFFFFFFFFFFF
_ROUNDS = 10

# (2**53 - epsilon) scaling for converting 53-bit integers to (0, 1) doubles
_INV53 = 2.0 ** -53

__all__ = ["CellStreams", "stream_seed", "derive_key"]


def _splitmix64(z: int) -> int:
    """One SplitMix64 step; used to spread the master seed over the key space."""
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_key(master_seed: int) -> tuple[int, int]:
    """Map a 64-bit master seed to the two 32-bit Philox key words."""
    mixed = _splitmix64(master_seed & _MASK64)
    return mixed & 0xFFFFFFFF, mixed >> 32


def philox4x32(c0, c1, c2, c3, k0, k1):
    """Philox 4x32-10 block function on uint64 arrays holding 32-bit words."""
    for _ in range(_ROUNDS):
        p0 = c0 * _M0
        p1 = c2 * _M1
        n0 = (p1 >> np.uint64(32)) ^ c1 ^ k0
        n1 = p1 & _MASK32
        n2 = (p0 >> np.uint64(32)) ^ c3 ^ k1
        n3 = p0 & _MASK32
        c0, c1, c2, c3 = n0, n1, n2, n3
        k0 = (k0 + _W0) & _MASK32
        k1 = (k1 + _W1) & _MASK32
    return c0, c1, c2, c3


class CellStreams:
    """A batch of independent per-cell streams, one lane per cell.

    Lane j's outputs are a pure function of (master_seed, replicate,
    cell_ids[j], lane position); they do not depend on the other lanes, on
    batch boundaries, or on the order in which batches run.
    """

    def __init__(self, master_seed: int, replicate: int, cell_ids):
        if not 0 <= replicate < 2**32:
            raise ValueError("replicate index must fit in 32 bits")
        k0, k1 = derive_key(master_seed)
        self._k0 = np.uint64(k0)
        self._k1 = np.uint64(k1)
        ids = np.asarray(cell_ids, dtype=np.uint64)
        if ids.ndim != 1:
            raise ValueError("cell_ids must be one-dimensional")
        self._c0 = ids & _MASK32
        self._c1 = ids >> np.uint64(32)
        self._rep = np.uint64(replicate)
        self._pos = np.zeros(ids.shape, dtype=np.uint64)
        self.n = ids.shape[0]

    def next_block(self, lanes=None):
        """Advance the selected lanes one position; return (hi64, lo64) words.

        ``lanes`` is an integer index array (default: all lanes).  Each call
        consumes exactly one 128-bit Philox block per selected lane.
        """
        if lanes is None:
            c0, c1, pos = self._c0, self._c1, self._pos
            self._pos = pos + np.uint64(1)
        else:
            c0, c1, pos = self._c0[lanes], self._c1[lanes], self._pos[lanes]
            self._pos[lanes] = pos + np.uint64(1)
        w0, w1, w2, w3 = philox4x32(c0, c1, pos, self._rep, self._k0, self._k1)
        return (w0 << np.uint64(32)) | w1, (w2 << np.uint64(32)) | w3

    def next_uniform_pair(self, lanes=None):
        """Two independent uniforms in (0, 1) per selected lane, one block each."""
        a, b = self.next_block(lanes)
        u = ((a >> np.uint64(11)).astype(np.float64) + 0.5) * _INV53
        v = ((b >> np.uint64(11)).astype(np.float64) + 0.5) * _INV53
        return u, v

    def next_uniform(self, lanes=None):
        """One uniform in (0, 1) per selected lane (consumes one block)."""
        a, _ = self.next_block(lanes)
        return ((a >> np.uint64(11)).astype(np.float64) + 0.5) * _INV53


class CellStream(CellStreams):
    """Single-cell stream with scalar convenience accessors."""

    def __init__(self, master_seed: int, replicate: int, cell_index: int):
        super().__init__(master_seed, replicate, np.asarray([cell_index], dtype=np.uint64))

    def uniform(self) -> float:
        return float(self.next_uniform()[0])

    def uniform_pair(self) -> tuple[float, float]:
        u, v = self.next_uniform_pair()
        return float(u[0]), float(v[0])

    def bits64(self) -> int:
        """First word of the next block, as a raw 64-bit integer."""
        a, _ = self.next_block()
        return int(a[0])


def stream_seed(master_seed: int, replicate_index: int, cell_index: int) -> CellStream:
    """Derive the deterministic stream for one (seed, replicate, cell) triple."""
    if cell_index < 0:
        raise ValueError("cell_index must be non-negative")
    return CellStream(master_seed, replicate_index, cell_index)
