"""Monitor-point edge timing for frames sent by individual ECUs.

Each ECU is reduced to the quantities that move its edges at the monitor:
a fall path delay, a rise path delay, per-edge Gaussian jitter and the ppm
error of its bit clock. The monitor's own receive delay is folded into both
path delays, so only their difference is observable after SOF latching.
"""
from dataclasses import dataclass, field
import math

import numpy as np

from . import frame as fr

MAX_PPM = 100.0


class ConfigError(ValueError):
    """Inconsistent bus or experiment configuration."""


@dataclass(frozen=True)
class EcuProfile:
    label: str
    fall_delay_ns: float
    rise_delay_ns: float
    jitter_sigma_ns: float = 2.0
    clock_ppm: float = 0.0

    def __post_init__(self):
        for name in ("fall_delay_ns", "rise_delay_ns", "jitter_sigma_ns"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ConfigError(f"{self.label}: {name} must be finite and >= 0, got {v}")
        if not -MAX_PPM <= self.clock_ppm <= MAX_PPM:
            raise ConfigError(f"{self.label}: clock_ppm {self.clock_ppm} outside +/-{MAX_PPM}")

    @property
    def offset_ns(self):
        """Rise minus fall delay: the fingerprint the capture chain recovers."""
        return self.rise_delay_ns - self.fall_delay_ns


@dataclass
class BusConfig:
    ecus: list
    id_assignment: dict
    bitrate_bps: int = 500_000
    counter_tick_ns: int = 20
    window_bits: int = fr.WINDOW_BITS
    dlc_by_id: dict = field(default_factory=dict)
    default_dlc: int = 8

    def __post_init__(self):
        labels = [e.label for e in self.ecus]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"duplicate ECU labels in {labels}")
        if self.bitrate_bps <= 0 or self.counter_tick_ns <= 0:
            raise ConfigError("bitrate and counter tick must be positive")
        for can_id, label in self.id_assignment.items():
            if not 0 <= can_id < 1 << 11:
                raise ConfigError(f"arbitration id {can_id:#x} does not fit in 11 bits")
            if label not in labels:
                raise ConfigError(f"id {can_id:#05x} assigned to unknown ECU {label!r}")
        for can_id, dlc in self.dlc_by_id.items():
            if can_id not in self.id_assignment:
                raise ConfigError(f"dlc given for unassigned id {can_id:#05x}")
            if not 0 <= dlc <= 8:
                raise ConfigError(f"dlc {dlc} out of range for id {can_id:#05x}")

    @property
    def t_bit_ns(self):
        return 1e9 / self.bitrate_bps

    @property
    def window_ns(self):
        return self.window_bits * self.t_bit_ns

    def profile(self, label):
        for e in self.ecus:
            if e.label == label:
                return e
        raise ConfigError(f"unknown ECU {label!r}")

    def dlc(self, can_id):
        return self.dlc_by_id.get(can_id, self.default_dlc)


@dataclass(frozen=True, eq=False)
class EdgeTrace:
    """Edges of one frame at the monitor.

    ``times`` are ns relative to the sender's nominal SOF instant; ``start_ns``
    places that instant on the monitor's absolute timeline.
    """

    frame: object  # FrameSpec, or None for a raw bit stream
    sender: str
    times: np.ndarray = field(repr=False)
    rising: np.ndarray = field(repr=False)
    start_ns: float = 0.0

    @property
    def edges(self):
        return [
            (t, "rising" if r else "falling")
            for t, r in zip(self.times.tolist(), self.rising.tolist())
        ]

    def rising_times(self):
        return self.times[self.rising]


def clock_error(f_bit_hz, f_tol_ppm):
    """Return ``(delta_f_hz, t_e_ns)`` for a bit clock off by ``f_tol_ppm``.

    ``t_e`` is the change of the bit period, 1/(f+df) - 1/f, written in a
    cancellation-free form.
    """
    if f_bit_hz <= 0:
        raise ValueError("bit frequency must be positive")
    delta_f = f_bit_hz * f_tol_ppm * 1e-6
    t_e = -delta_f / (f_bit_hz * (f_bit_hz + delta_f))
    return delta_f, t_e * 1e9


def bit_period_ns(profile, bitrate_bps):
    return 1e9 / bitrate_bps + clock_error(bitrate_bps, profile.clock_ppm)[1]


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def emit_waveform(profile, stuffed, rng_seed=None, bitrate_bps=500_000, start_ns=0.0, frame=None):
    """Edge trace of ``stuffed`` as transmitted by ``profile``.

    The sender's bit ``k`` starts at ``k * t1`` with ``t1`` the ppm-adjusted
    bit period. Falling edges arrive ``fall_delay_ns`` later, rising edges
    ``rise_delay_ns`` later, each with independent jitter.
    """
    bits = stuffed.bits if isinstance(stuffed, fr.BitStream) else np.asarray(stuffed, np.uint8)
    if len(bits) == 0 or bits[0] != 0:
        raise fr.FrameError("stream must start with a dominant SOF bit")
    rng = _rng(rng_seed)
    prev = np.concatenate([[1], bits[:-1]])
    idx = np.flatnonzero(bits != prev)
    rising = bits[idx] == 1
    t1 = bit_period_ns(profile, bitrate_bps)
    delay = np.where(rising, profile.rise_delay_ns, profile.fall_delay_ns)
    noise = rng.normal(0.0, profile.jitter_sigma_ns, size=len(idx))
    times = idx * t1 + delay + noise
    times.setflags(write=False)
    rising.setflags(write=False)
    return EdgeTrace(frame, profile.label, times, rising, float(start_ns))


def random_frame(can_id, dlc, rng):
    return fr.FrameSpec(can_id, rng.integers(0, 256, size=dlc, dtype=np.uint8).tobytes())


class Timeline:
    """Places frames back to back on the monitor's clock with random idle gaps.

    The gap is continuous, so each SOF lands at an arbitrary phase of the
    capture counter.
    """

    def __init__(self, bitrate_bps, max_gap_bits=20.0, start_ns=0.0):
        self.t_bit = 1e9 / bitrate_bps
        self.max_gap_bits = max_gap_bits
        self.now = start_ns

    def place(self, n_bits, rng):
        start = self.now
        gap = rng.uniform(0.0, self.max_gap_bits) * self.t_bit
        self.now = start + (n_bits + fr.INTERMISSION_BITS) * self.t_bit + gap
        return start


def transmit(profile, frame, rng, timeline, bitrate_bps):
    stuffed = fr.encode(frame)
    start = timeline.place(len(stuffed), rng)
    return emit_waveform(profile, stuffed, rng, bitrate_bps, start_ns=start, frame=frame)


def schedule_traffic(config, per_id_count, rng_seed=0):
    """``per_id_count`` frames for every assigned ID, round-robin over sorted IDs."""
    if per_id_count < 1:
        raise ConfigError("per_id_count must be >= 1")
    if not config.id_assignment:
        raise ConfigError("no arbitration ids assigned")
    rng = _rng(rng_seed)
    timeline = Timeline(config.bitrate_bps)
    ids = sorted(config.id_assignment)
    traces = []
    for _ in range(per_id_count):
        for can_id in ids:
            profile = config.profile(config.id_assignment[can_id])
            f = random_frame(can_id, config.dlc(can_id), rng)
            traces.append(transmit(profile, f, rng, timeline, config.bitrate_bps))
    return traces
