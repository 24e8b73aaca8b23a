"""Bit-level framing for the two radio protocols.

IAM traffic (polls and replies) carries a trailing modular-sum checksum byte.
Current Cost transmitters send Manchester-coded bits with no checksum: bit 1 is
sent as the symbol pair ``10`` and bit 0 as ``01``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from daleforge.errors import IntegrityError, InvalidArgument, ManchesterError

IAM_REPLY = "iam-reply"
POLL = "poll"
CCTX = "cctx-broadcast"
KINDS = (IAM_REPLY, POLL, CCTX)


@dataclass(frozen=True)
class Packet:
    """One over-the-air frame. ``frame`` holds ``nbits`` on-air bits, MSB first."""

    kind: str
    frame: bytes
    nbits: int
    encoding: str
    air_time: float = 0.005
    timestamp: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidArgument(f"unknown packet kind {self.kind!r}")
        if not 0 <= self.nbits <= 8 * len(self.frame):
            raise InvalidArgument("nbits does not fit in frame")

    def bits(self) -> np.ndarray:
        return np.unpackbits(np.frombuffer(self.frame, dtype=np.uint8))[: self.nbits]

    def with_flips(self, positions: Iterable[int]) -> "Packet":
        """Copy of this packet with the given bit positions inverted."""
        bits = self.bits().copy()
        for p in positions:
            if not 0 <= p < self.nbits:
                raise InvalidArgument(f"bit position {p} outside packet of {self.nbits} bits")
            bits[p] ^= 1
        return Packet(self.kind, np.packbits(bits).tobytes(), self.nbits, self.encoding, self.air_time, self.timestamp)


def checksum(payload: bytes) -> int:
    return sum(payload) % 256


def encode_iam(payload: bytes, kind: str = IAM_REPLY, timestamp: float = 0.0, air_time: float = 0.005) -> Packet:
    payload = bytes(payload)
    if not payload:
        raise InvalidArgument("payload must contain at least one byte")
    frame = payload + bytes([checksum(payload)])
    return Packet(kind, frame, 8 * len(frame), "checksum", air_time, timestamp)


def decode_iam(packet: Packet) -> bytes:
    frame = packet.frame[: packet.nbits // 8]
    if len(frame) < 2:
        raise IntegrityError("frame too short to carry a checksum")
    payload, received = frame[:-1], frame[-1]
    if checksum(payload) != received:
        raise IntegrityError(f"checksum mismatch: computed {checksum(payload):#04x}, received {received:#04x}")
    return payload


def bytes_to_bits(data: bytes) -> list[int]:
    return np.unpackbits(np.frombuffer(bytes(data), dtype=np.uint8)).tolist()


def bits_to_bytes(bits: Sequence[int]) -> bytes:
    if len(bits) % 8:
        raise InvalidArgument("bit count is not a multiple of 8")
    return np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes()


def encode_cctx(bits: Sequence[int], timestamp: float = 0.0, air_time: float = 0.005) -> Packet:
    arr = np.asarray(list(bits), dtype=np.uint8)
    if arr.size and not np.all((arr == 0) | (arr == 1)):
        raise InvalidArgument("bits must be 0 or 1")
    symbols = np.empty(2 * arr.size, dtype=np.uint8)
    symbols[0::2] = arr
    symbols[1::2] = 1 - arr
    return Packet(CCTX, np.packbits(symbols).tobytes(), int(symbols.size), "manchester", air_time, timestamp)


def decode_cctx(packet: Packet) -> list[int]:
    symbols = packet.bits()
    if symbols.size % 2:
        raise ManchesterError("odd number of symbols")
    first, second = symbols[0::2], symbols[1::2]
    bad = np.flatnonzero(first == second)
    if bad.size:
        raise ManchesterError(f"invalid symbol pair at bit {int(bad[0])}")
    return first.astype(int).tolist()
