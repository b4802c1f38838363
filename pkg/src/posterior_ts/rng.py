"""Counter-based random streams keyed by ``(seed, stream_id)``.

Every consumer of randomness (environment, exploration coin, posterior
draws, ...) gets its own stream so that Monte-Carlo runs do not share
generator state and can execute in any order.
"""
from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def derive_stream_id(run_index: int, tag: str) -> int:
    """Stable 64-bit stream id from a run index and a purpose tag."""
    digest = hashlib.blake2b(f"{int(run_index)}/{tag}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


class RngStream:
    """Philox generator keyed by a (seed, stream_id) pair.

    Two streams built from the same pair produce identical draws.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed) & _MASK64
        self.stream_id = int(stream_id) & _MASK64
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        self.generator = np.random.Generator(np.random.Philox(key=key))

    @classmethod
    def for_run(cls, seed: int, run_index: int, tag: str) -> "RngStream":
        return cls(seed, derive_stream_id(run_index, tag))

    def child(self, tag: str) -> "RngStream":
        """Independent stream derived from this one's identity, not its state."""
        digest = hashlib.blake2b(
            f"{self.stream_id}/{tag}".encode(), digest_size=8
        ).digest()
        return RngStream(self.seed, int.from_bytes(digest, "little"))

    def random(self, size=None):
        return self.generator.random(size)

    def integers(self, high: int, size=None):
        return self.generator.integers(0, high, size=size)

    def normal(self, size=None):
        return self.generator.standard_normal(size)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id:#x})"
