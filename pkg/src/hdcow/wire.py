"""Classical-channel wire format.

Frame layout, all integers big-endian::

    magic 0x51 0x4B | version 0x01 | tag u8 | payload length u32 | payload

Payloads by tag:

    0x01 SESSION_START      d u16, n u32, tau_picoseconds u64
    0x02 BLOCK_ANNOUNCE     block_id u64
    0x03 PERMUTATION_REVEAL block_id u64, indices (d*n) x u32
    0x04 DETECTION_REPORT   block_id u64, count u32, count x (i u32, j u16)
    0x05 ESTIMATE_REPORT    block_id u64, q_hat f64, v_hat f64
    0x06 SESSION_END        empty

Estimate fields not yet known are encoded as NaN.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import Callable, Union

from .errors import (
    BadMagicError,
    InvalidArgumentError,
    LengthMismatchError,
    TruncatedError,
    UnknownTagError,
    UnsupportedVersionError,
)

__all__ = [
    "MAGIC",
    "VERSION",
    "SessionStart",
    "BlockAnnounce",
    "PermutationReveal",
    "DetectionReportMsg",
    "EstimateReport",
    "SessionEnd",
    "Message",
    "encode_message",
    "decode_message",
    "read_message",
]

MAGIC = b"\x51\x4b"
VERSION = 0x01
_HEADER = struct.Struct("!2sBBI")

TAG_SESSION_START = 0x01
TAG_BLOCK_ANNOUNCE = 0x02
TAG_PERMUTATION_REVEAL = 0x03
TAG_DETECTION_REPORT = 0x04
TAG_ESTIMATE_REPORT = 0x05
TAG_SESSION_END = 0x06


@dataclass(frozen=True)
class SessionStart:
    d: int
    n: int
    tau_picoseconds: int


@dataclass(frozen=True)
class BlockAnnounce:
    block_id: int


@dataclass(frozen=True)
class PermutationReveal:
    block_id: int
    indices: tuple


@dataclass(frozen=True)
class DetectionReportMsg:
    block_id: int
    entries: tuple  # ((qudit index, symbol), ...)


@dataclass(frozen=True, eq=False)
class EstimateReport:
    block_id: int
    q_hat: float
    v_hat: float

    def __eq__(self, other):
        if not isinstance(other, EstimateReport):
            return NotImplemented
        same = self.block_id == other.block_id
        for a, b in ((self.q_hat, other.q_hat), (self.v_hat, other.v_hat)):
            same &= (math.isnan(a) and math.isnan(b)) or a == b
        return same

    def __hash__(self):
        return hash((self.block_id, self.q_hat, self.v_hat))


@dataclass(frozen=True)
class SessionEnd:
    pass


Message = Union[
    SessionStart,
    BlockAnnounce,
    PermutationReveal,
    DetectionReportMsg,
    EstimateReport,
    SessionEnd,
]


def _check_u(value: int, bits: int, what: str) -> int:
    if not 0 <= value < (1 << bits):
        raise InvalidArgumentError(f"{what}={value} does not fit u{bits}")
    return value


def encode_message(message: Message) -> bytes:
    if isinstance(message, SessionStart):
        tag = TAG_SESSION_START
        payload = struct.pack(
            "!HIQ",
            _check_u(message.d, 16, "d"),
            _check_u(message.n, 32, "n"),
            _check_u(message.tau_picoseconds, 64, "tau_picoseconds"),
        )
    elif isinstance(message, BlockAnnounce):
        tag = TAG_BLOCK_ANNOUNCE
        payload = struct.pack("!Q", _check_u(message.block_id, 64, "block_id"))
    elif isinstance(message, PermutationReveal):
        tag = TAG_PERMUTATION_REVEAL
        payload = struct.pack("!Q", _check_u(message.block_id, 64, "block_id"))
        payload += struct.pack(
            f"!{len(message.indices)}I",
            *(_check_u(i, 32, "index") for i in message.indices),
        )
    elif isinstance(message, DetectionReportMsg):
        tag = TAG_DETECTION_REPORT
        payload = struct.pack(
            "!QI",
            _check_u(message.block_id, 64, "block_id"),
            _check_u(len(message.entries), 32, "count"),
        )
        for i, j in message.entries:
            payload += struct.pack(
                "!IH", _check_u(i, 32, "qudit index"), _check_u(j, 16, "symbol")
            )
    elif isinstance(message, EstimateReport):
        tag = TAG_ESTIMATE_REPORT
        payload = struct.pack(
            "!Qdd",
            _check_u(message.block_id, 64, "block_id"),
            message.q_hat,
            message.v_hat,
        )
    elif isinstance(message, SessionEnd):
        tag = TAG_SESSION_END
        payload = b""
    else:
        raise InvalidArgumentError(f"not a wire message: {message!r}")
    return _HEADER.pack(MAGIC, VERSION, tag, len(payload)) + payload


def _decode_payload(tag: int, payload: bytes) -> Message:
    if tag == TAG_SESSION_START:
        if len(payload) != 14:
            raise LengthMismatchError("SESSION_START payload must be 14 bytes")
        d, n, tau_ps = struct.unpack("!HIQ", payload)
        return SessionStart(d=d, n=n, tau_picoseconds=tau_ps)
    if tag == TAG_BLOCK_ANNOUNCE:
        if len(payload) != 8:
            raise LengthMismatchError("BLOCK_ANNOUNCE payload must be 8 bytes")
        return BlockAnnounce(block_id=struct.unpack("!Q", payload)[0])
    if tag == TAG_PERMUTATION_REVEAL:
        if len(payload) < 8 or (len(payload) - 8) % 4:
            raise LengthMismatchError(
                "PERMUTATION_REVEAL payload must be 8 + 4k bytes"
            )
        block_id = struct.unpack_from("!Q", payload)[0]
        count = (len(payload) - 8) // 4
        indices = struct.unpack_from(f"!{count}I", payload, 8)
        return PermutationReveal(block_id=block_id, indices=indices)
    if tag == TAG_DETECTION_REPORT:
        if len(payload) < 12:
            raise LengthMismatchError("DETECTION_REPORT payload must be >= 12 bytes")
        block_id, count = struct.unpack_from("!QI", payload)
        if len(payload) != 12 + 6 * count:
            raise LengthMismatchError(
                f"DETECTION_REPORT count={count} disagrees with payload size"
            )
        entries = tuple(
            struct.unpack_from("!IH", payload, 12 + 6 * k) for k in range(count)
        )
        return DetectionReportMsg(block_id=block_id, entries=entries)
    if tag == TAG_ESTIMATE_REPORT:
        if len(payload) != 24:
            raise LengthMismatchError("ESTIMATE_REPORT payload must be 24 bytes")
        block_id, q_hat, v_hat = struct.unpack("!Qdd", payload)
        return EstimateReport(block_id=block_id, q_hat=q_hat, v_hat=v_hat)
    if tag == TAG_SESSION_END:
        if payload:
            raise LengthMismatchError("SESSION_END payload must be empty")
        return SessionEnd()
    raise UnknownTagError(f"unknown message tag 0x{tag:02x}")


def decode_message(data: bytes) -> Message:
    """Decode one complete frame; trailing bytes are an error."""
    if len(data) < _HEADER.size:
        raise TruncatedError(f"{len(data)} bytes is shorter than a frame header")
    magic, version, tag, length = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}")
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported version {version}")
    payload = data[_HEADER.size :]
    if len(payload) < length:
        raise TruncatedError(
            f"payload truncated: declared {length}, got {len(payload)}"
        )
    if len(payload) > length:
        raise LengthMismatchError(
            f"declared {length} payload bytes but frame carries {len(payload)}"
        )
    return _decode_payload(tag, payload)


def read_message(recv_exact: Callable[[int], bytes]) -> Message:
    """Read one frame off an ordered byte stream.

    ``recv_exact(k)`` must return exactly k bytes or raise; short reads
    surface as :class:`TruncatedError`.
    """
    header = recv_exact(_HEADER.size)
    if len(header) < _HEADER.size:
        raise TruncatedError("stream closed inside a frame header")
    magic, version, tag, length = _HEADER.unpack(header)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}")
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported version {version}")
    payload = recv_exact(length) if length else b""
    if len(payload) < length:
        raise TruncatedError("stream closed inside a frame payload")
    return _decode_payload(tag, payload)
