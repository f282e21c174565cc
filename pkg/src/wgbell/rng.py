"""Counter-based random streams.

Draw ``k`` of a stream keyed by ``seed`` is ``mix64(seed + (k + 1) * GOLDEN)``,
the SplitMix64 output function evaluated at an explicit counter. Nothing but
``(seed, counter)`` determines a value, so a trajectory's noise does not
depend on which worker runs it or on what else shares its batch.

Per-trajectory seeds come from ``stream_seed(master_seed, index)``. Keep the
constants below fixed: changing any of them changes every stored result.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB
STREAM_SALT = 0x6A09E667F3BCC909

_U53 = 1.0 / (1 << 53)


def mix64_int(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * MIX1) & MASK64
    z = ((z ^ (z >> 27)) * MIX2) & MASK64
    return z ^ (z >> 31)


def _mix64(z: np.ndarray) -> np.ndarray:
    # uint64 array arithmetic wraps modulo 2**64
    z = (z ^ (z >> np.uint64(30))) * np.uint64(MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(MIX2)
    return z ^ (z >> np.uint64(31))


def stream_seed(master_seed: int, index: int) -> int:
    """64-bit seed of trajectory ``index`` in an ensemble."""
    if master_seed < 0 or master_seed > MASK64:
        raise ValueError(f"master seed must be an unsigned 64-bit integer, got {master_seed}")
    key = mix64_int(master_seed ^ STREAM_SALT)
    return mix64_int(key + (index + 1) * GOLDEN)


class RngStream:
    """One or more independent counter-based streams advanced in lockstep.

    ``seed`` may be a single integer or a sequence of seeds; draws then carry
    a matching leading axis. All streams in the object share one counter.
    """

    def __init__(self, seed, counter: int = 0):
        scalar = np.ndim(seed) == 0
        seeds = [int(s) for s in np.atleast_1d(np.asarray(seed, dtype=object))]
        for s in seeds:
            if s < 0 or s > MASK64:
                raise ValueError(f"seed must be an unsigned 64-bit integer, got {s}")
        self.seeds = np.array(seeds, dtype=np.uint64)
        self.counter = int(counter)
        self._scalar = scalar

    def __len__(self) -> int:
        return len(self.seeds)

    @property
    def seed(self):
        return int(self.seeds[0]) if self._scalar else [int(s) for s in self.seeds]

    def raw(self, n: int) -> np.ndarray:
        ks = np.arange(self.counter + 1, self.counter + 1 + n, dtype=np.uint64)
        self.counter += n
        with np.errstate(over="ignore"):
            z = self.seeds[:, None] + ks[None, :] * np.uint64(GOLDEN)
            out = _mix64(z)
        return out[0] if self._scalar else out

    def uniform(self, n: int) -> np.ndarray:
        """``n`` doubles in [0, 1) per stream, 53-bit resolution."""
        return (self.raw(n) >> np.uint64(11)).astype(np.float64) * _U53

    def normal(self, n: int) -> np.ndarray:
        """``n`` standard normals per stream by Box-Muller.

        Consumes ``2 * ceil(n / 2)`` counter values regardless of ``n`` parity.
        """
        pairs = (n + 1) // 2
        u = self.uniform(2 * pairs)
        u1 = 1.0 - u[..., 0::2]  # (0, 1]
        u2 = u[..., 1::2]
        r = np.sqrt(-2.0 * np.log(u1))
        z = np.empty(u.shape, dtype=np.float64)
        z[..., 0::2] = r * np.cos(2 * np.pi * u2)
        z[..., 1::2] = r * np.sin(2 * np.pi * u2)
        return z[..., :n]

    def select(self, index) -> "RngStream":
        """Sub-stream(s) sharing the current counter."""
        sub = RngStream(0, self.counter)
        sub.seeds = np.atleast_1d(self.seeds[index]).copy()
        sub._scalar = np.ndim(index) == 0
        return sub
