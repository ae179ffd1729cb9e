"""Bit-level CAN 2.0A data frames: layout, CRC-15, bit stuffing, rising edges.

Bits are ``0`` for dominant and ``1`` for recessive. Only base-format
(11-bit identifier) data frames are supported.
"""
from dataclasses import dataclass, field

import numpy as np

from . import kernels

WINDOW_BITS = 34
INTERMISSION_BITS = 3
# CRC delimiter, ACK slot, ACK delimiter, 7 EOF bits: never stuffed
TRAILER_BITS = 10
CRC15_POLY = kernels._pykernels.CRC15_POLY


class FrameError(ValueError):
    """Invalid frame field or malformed bit stream."""


@dataclass(frozen=True)
class FrameSpec:
    arbitration_id: int
    data: bytes = b""
    rtr: bool = False

    def __post_init__(self):
        object.__setattr__(self, "data", bytes(self.data))
        if not 0 <= self.arbitration_id < 1 << 11:
            raise FrameError(f"arbitration id {self.arbitration_id:#x} does not fit in 11 bits")
        if len(self.data) > 8:
            raise FrameError(f"data length {len(self.data)} exceeds 8 bytes")
        if self.rtr:
            raise FrameError("remote frames are not supported")

    @property
    def dlc(self):
        return len(self.data)


@dataclass(frozen=True)
class BitStream:
    bits: np.ndarray = field(repr=False)
    stuffed: bool = False

    def __post_init__(self):
        arr = np.array(self.bits, dtype=np.uint8)
        arr.setflags(write=False)
        object.__setattr__(self, "bits", arr)

    def __len__(self):
        return len(self.bits)

    def __eq__(self, other):
        if not isinstance(other, BitStream):
            return NotImplemented
        return self.stuffed == other.stuffed and np.array_equal(self.bits, other.bits)

    def __str__(self):
        return "".join("01"[b] for b in self.bits.tolist())


def _field(value, width):
    return [(value >> (width - 1 - i)) & 1 for i in range(width)]


def crc_prefix(frame):
    """Unstuffed SOF..last data bit: the span the CRC covers."""
    bits = [0]
    bits += _field(frame.arbitration_id, 11)
    bits += [0, 0, 0]  # RTR (data frame), IDE (base format), r0
    bits += _field(frame.dlc, 4)
    for byte in frame.data:
        bits += _field(byte, 8)
    return BitStream(bits)


def crc15(prefix):
    """CAN CRC-15 (polynomial 0x4599, zero initial remainder) over ``prefix``."""
    bits = prefix.bits if isinstance(prefix, BitStream) else prefix
    return kernels.crc15(bits)


def serialize(frame):
    """Unstuffed frame from SOF to the end of EOF: 44 + 8*dlc bits."""
    prefix = crc_prefix(frame)
    crc = crc15(prefix)
    bits = np.concatenate(
        [prefix.bits, np.array(_field(crc, 15) + [1] * TRAILER_BITS, dtype=np.uint8)]
    )
    return BitStream(bits)


def message_length(frame, intermission=True):
    """Unstuffed on-wire length in bits, optionally counting the 3-bit intermission."""
    return 44 + 8 * frame.dlc + (INTERMISSION_BITS if intermission else 0)


def stuff(unstuffed):
    """Insert stuff bits over SOF..CRC sequence of a serialized frame."""
    if unstuffed.stuffed:
        raise FrameError("stream is already stuffed")
    bits = unstuffed.bits
    if len(bits) < TRAILER_BITS + 1:
        raise FrameError("stream too short to be a frame")
    head = kernels.stuff_bits(bits[:-TRAILER_BITS])
    return BitStream(np.concatenate([head, bits[-TRAILER_BITS:]]), stuffed=True)


def destuff(stuffed):
    if not stuffed.stuffed:
        raise FrameError("stream is not stuffed")
    bits = stuffed.bits
    try:
        head = kernels.destuff_bits(bits[:-TRAILER_BITS])
    except ValueError as exc:
        raise FrameError(str(exc)) from None
    return BitStream(np.concatenate([head, bits[-TRAILER_BITS:]]), stuffed=False)


def stuff_bits(bits):
    """Stuff an arbitrary bit sequence end to end (no unstuffed trailer)."""
    return kernels.stuff_bits(bits)


def encode(frame):
    """Serialize and stuff in one step."""
    return stuff(serialize(frame))


def rising_edges(stream, window_bits=WINDOW_BITS):
    """Bit indices ``k`` in ``[1, window_bits]`` with a 0 -> 1 transition into bit ``k``."""
    bits = stream.bits if isinstance(stream, BitStream) else np.asarray(stream, dtype=np.uint8)
    if window_bits > len(bits):
        raise FrameError(f"window of {window_bits} bits exceeds stream of {len(bits)} bits")
    return kernels.rising_edges(bits, window_bits)


def max_run(bits):
    """Length of the longest run of identical bits."""
    best = run = 0
    last = None
    for b in np.asarray(bits).tolist():
        run = run + 1 if b == last else 1
        last = b
        best = max(best, run)
    return best
