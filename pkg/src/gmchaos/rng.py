"""Counter-based random streams keyed by (seed, replica, purpose)."""
from __future__ import annotations

import zlib
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np


def _purpose_key(purpose: str) -> int:
    # crc32 is stable across interpreter runs, unlike hash()
    return zlib.crc32(purpose.encode("utf-8"))


@dataclass(frozen=True)
class RngStream:
    """One independent Philox stream.

    Distinct ``(master_seed, replica, purpose)`` triples give independent
    streams; an identical triple always reproduces the same draws, whatever
    order replicas are generated in.
    """

    master_seed: int
    replica: int = 0
    purpose: str = "field"

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(
            entropy=int(self.master_seed) & 0xFFFFFFFFFFFFFFFF,
            spawn_key=(int(self.replica), _purpose_key(self.purpose)),
        )
        return np.random.Generator(np.random.Philox(seq))

    def child(self, purpose: str) -> "RngStream":
        """Same seed and replica, different purpose tag."""
        return RngStream(self.master_seed, self.replica, purpose)


def replica_streams(master_seed: int, replicas: int, purpose: str = "field", start: int = 0) -> list[RngStream]:
    return [RngStream(master_seed, r, purpose) for r in range(start, start + replicas)]


Streams = Union[RngStream, Sequence[RngStream]]


def standard_normals(streams: Streams, size: int | tuple) -> np.ndarray:
    """Standard normal draws, one block per stream.

    A single stream gives an array of shape ``size``; a sequence of ``R``
    streams gives ``(R, *size)`` whose row ``r`` equals the single-stream
    draw of ``streams[r]``.
    """
    if isinstance(streams, RngStream):
        return streams.generator().standard_normal(size)
    shape = (size,) if np.isscalar(size) else tuple(size)
    out = np.empty((len(streams),) + shape)
    for r, s in enumerate(streams):
        out[r] = s.generator().standard_normal(shape)
    return out
