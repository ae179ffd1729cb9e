"""Timer-capture front end: SOF latch, per-rising-edge counter capture, the
32-bit record word, and delay-time reconstruction from counter values.

Binary capture log layout (all integers big-endian)::

    file header
      magic          4 bytes  b"EPCL"
      version        u8       1
      reserved       u8       0
      tick_ns        u16
      bitrate_bps    u32
      window_bits    u16
      label_count    u16      <= 255
      labels         label_count x (u8 length, UTF-8 bytes)
      message_count  u32
    per message
      message_index  u32
      edge_count     u8
      label_index    u8       index into labels, 0xFF = unknown
      sof record     u32      (arbitration id << 21) | SOF counter
      edge records   edge_count x u32, (arbitration id << 21) | edge counter

The SOF counter travels as its own record in front of the edge records.
"""
from dataclasses import dataclass, field
import math
import struct

import numpy as np

from .util import atomic_write_bytes

ID_BITS = 11
COUNTER_BITS = 21
COUNTER_MOD = 1 << COUNTER_BITS
COUNTER_MASK = COUNTER_MOD - 1
UNKNOWN_LABEL = 0xFF

LOG_MAGIC = b"EPCL"
LOG_VERSION = 1
_FILE_HEAD = struct.Struct(">4sBBHIHH")
_MSG_HEAD = struct.Struct(">IBB")


class CaptureFault(RuntimeError):
    """A trace produced no usable capture."""


class RecordError(ValueError):
    """Record field out of range."""


class CaptureLogError(ValueError):
    """Malformed or truncated capture log."""


@dataclass(frozen=True, eq=False)
class MessageCapture:
    arbitration_id: int
    sof_counter: int
    edge_counters: np.ndarray = field(repr=False)
    true_sender: object = None

    def __eq__(self, other):
        if not isinstance(other, MessageCapture):
            return NotImplemented
        return (
            self.arbitration_id == other.arbitration_id
            and self.sof_counter == other.sof_counter
            and self.true_sender == other.true_sender
            and np.array_equal(self.edge_counters, other.edge_counters)
        )

    def __len__(self):
        return len(self.edge_counters)


@dataclass(frozen=True)
class DelaySample:
    elapsed_bits: int
    delay_ns: float


def encode_record(arbitration_id, counter):
    if not 0 <= arbitration_id < 1 << ID_BITS:
        raise RecordError(f"arbitration id {arbitration_id} does not fit in {ID_BITS} bits")
    if not 0 <= counter < COUNTER_MOD:
        raise RecordError(f"counter {counter} does not fit in {COUNTER_BITS} bits")
    return (arbitration_id << COUNTER_BITS) | counter


def decode_record(word):
    if not 0 <= word < 1 << 32:
        raise RecordError(f"record {word} is not a 32-bit word")
    return word >> COUNTER_BITS, word & COUNTER_MASK


def window_ticks(config):
    return int(round(config.window_ns / config.counter_tick_ns))


def acquire(trace, config):
    """Latch the counter at SOF and capture it at every rising edge in the window.

    The counter free-runs on the monitor's absolute clock; an edge at absolute
    time ``t`` reads ``floor(t / tick) mod 2**21``. Edges whose counter is
    ``window_ticks`` or more past the SOF latch are dropped.
    """
    if len(trace.times) == 0 or trace.rising[0]:
        raise CaptureFault("trace must begin with the falling SOF edge")
    tick = config.counter_tick_ns
    sof_abs = math.floor((trace.start_ns + trace.times[0]) / tick)
    rising_abs = np.floor((trace.start_ns + trace.times[trace.rising]) / tick).astype(np.int64)
    rel = rising_abs - sof_abs
    kept = rising_abs[rel < window_ticks(config)]
    if len(kept) == 0:
        raise CaptureFault("no rising edge inside the measurement window")
    counters = kept & COUNTER_MASK
    counters.setflags(write=False)
    can_id = trace.frame.arbitration_id if trace.frame is not None else 0
    return MessageCapture(can_id, int(sof_abs & COUNTER_MASK), counters, trace.sender)


def elapsed_ticks(capture):
    return (np.asarray(capture.edge_counters, dtype=np.int64) - capture.sof_counter) & COUNTER_MASK


def elapsed_ns(capture, edge_index, tick_ns=20):
    """Time from SOF to the ``edge_index``-th captured edge, wrap-corrected."""
    edge = int(capture.edge_counters[edge_index])
    return ((edge - capture.sof_counter) & COUNTER_MASK) * tick_ns


def _rounding(t_bit_ns, offset_ns):
    if offset_ns is None:
        offset_ns = t_bit_ns / 4
    return t_bit_ns, offset_ns


def delay_of(elapsed, t_bit_ns=2000, offset_ns=None):
    """Split an elapsed time into whole bits plus the residual delay.

    ``elapsed_bits = floor((elapsed + t_bit/4) / t_bit)``; at 500 kbit/s that
    is ``floor((elapsed + 500) / 2000)``.
    """
    t_bit_ns, offset_ns = _rounding(t_bit_ns, offset_ns)
    if elapsed < 0:
        raise ValueError("elapsed time must be >= 0")
    if float(t_bit_ns).is_integer() and float(offset_ns).is_integer() and float(elapsed).is_integer():
        bits = (int(elapsed) + int(offset_ns)) // int(t_bit_ns)
    else:
        bits = math.floor((elapsed + offset_ns) / t_bit_ns)
    return DelaySample(bits, elapsed - bits * t_bit_ns)


def delays_from_elapsed(elapsed, t_bit_ns=2000, offset_ns=None):
    """Vectorised ``delay_of``; returns ``(elapsed_bits, delays)`` arrays."""
    t_bit_ns, offset_ns = _rounding(t_bit_ns, offset_ns)
    elapsed = np.asarray(elapsed)
    if float(t_bit_ns).is_integer() and float(offset_ns).is_integer() and elapsed.dtype.kind in "iu":
        bits = (elapsed + int(offset_ns)) // int(t_bit_ns)
        return bits, (elapsed - bits * int(t_bit_ns)).astype(np.float64)
    bits = np.floor((elapsed + offset_ns) / t_bit_ns).astype(np.int64)
    return bits, elapsed - bits * t_bit_ns


def message_delays(capture, tick_ns=20, t_bit_ns=2000, offset_ns=None):
    """Delay-time of every captured edge of one message, in ns."""
    if len(capture.edge_counters) == 0:
        raise CaptureFault("capture holds no edges")
    return delays_from_elapsed(elapsed_ticks(capture) * int(tick_ns), t_bit_ns, offset_ns)[1]


def delays_for(capture, config):
    return message_delays(capture, config.counter_tick_ns, config.t_bit_ns)


# -- capture log ------------------------------------------------------------

@dataclass
class CaptureLog:
    messages: list
    labels: list = field(default_factory=list)
    tick_ns: int = 20
    bitrate_bps: int = 500_000
    window_bits: int = 34

    @property
    def t_bit_ns(self):
        return 1e9 / self.bitrate_bps


def dump_capture_log(log):
    if len(log.labels) > UNKNOWN_LABEL:
        raise CaptureLogError(f"at most {UNKNOWN_LABEL} labels fit in a capture log")
    index = {label: i for i, label in enumerate(log.labels)}
    out = [
        _FILE_HEAD.pack(LOG_MAGIC, LOG_VERSION, 0, log.tick_ns, log.bitrate_bps,
                        log.window_bits, len(log.labels))
    ]
    for label in log.labels:
        raw = label.encode("utf-8")
        if len(raw) > 255:
            raise CaptureLogError(f"label {label!r} longer than 255 bytes")
        out.append(struct.pack(">B", len(raw)) + raw)
    out.append(struct.pack(">I", len(log.messages)))
    for i, m in enumerate(log.messages):
        n = len(m.edge_counters)
        if n > 255:
            raise CaptureLogError(f"message {i} has {n} edges; at most 255 fit")
        if m.true_sender is None:
            label_index = UNKNOWN_LABEL
        elif m.true_sender in index:
            label_index = index[m.true_sender]
        else:
            raise CaptureLogError(f"message {i} sender {m.true_sender!r} missing from label table")
        words = [encode_record(m.arbitration_id, int(m.sof_counter))]
        words += [encode_record(m.arbitration_id, int(c)) for c in m.edge_counters]
        out.append(_MSG_HEAD.pack(i, n, label_index))
        out.append(np.array(words, dtype=">u4").tobytes())
    return b"".join(out)


def load_capture_log(data):
    view = memoryview(data)
    pos = 0

    def take(n):
        nonlocal pos
        if pos + n > len(view):
            raise CaptureLogError(f"truncated capture log at byte {pos}")
        chunk = view[pos:pos + n]
        pos += n
        return chunk

    magic, version, _, tick, bitrate, window, n_labels = _FILE_HEAD.unpack(take(_FILE_HEAD.size))
    if magic != LOG_MAGIC:
        raise CaptureLogError("not a capture log (bad magic)")
    if version != LOG_VERSION:
        raise CaptureLogError(f"unsupported capture log version {version}")
    labels = []
    for _ in range(n_labels):
        (length,) = struct.unpack(">B", take(1))
        labels.append(bytes(take(length)).decode("utf-8"))
    (count,) = struct.unpack(">I", take(4))
    messages = []
    for expected in range(count):
        index, n, label_index = _MSG_HEAD.unpack(take(_MSG_HEAD.size))
        if index != expected:
            raise CaptureLogError(f"message index {index} out of sequence (expected {expected})")
        words = np.frombuffer(take(4 * (n + 1)), dtype=">u4").astype(np.int64)
        ids = words >> COUNTER_BITS
        if np.any(ids != ids[0]):
            raise CaptureLogError(f"message {index} mixes arbitration ids")
        if label_index == UNKNOWN_LABEL:
            sender = None
        elif label_index < len(labels):
            sender = labels[label_index]
        else:
            raise CaptureLogError(f"message {index} label index {label_index} out of range")
        counters = words[1:] & COUNTER_MASK
        counters.setflags(write=False)
        messages.append(MessageCapture(int(ids[0]), int(words[0] & COUNTER_MASK), counters, sender))
    if pos != len(view):
        raise CaptureLogError(f"{len(view) - pos} trailing bytes after last message")
    return CaptureLog(messages, labels, tick, bitrate, window)


def write_capture_log(path, log):
    atomic_write_bytes(path, dump_capture_log(log))


def read_capture_log(path):
    with open(path, "rb") as fh:
        return load_capture_log(fh.read())
