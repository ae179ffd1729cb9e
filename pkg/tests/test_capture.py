import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from edgeprint import capture as cap
from edgeprint import frame as fr
from edgeprint import physim
from edgeprint.capture import CaptureLog, MessageCapture
from edgeprint.physim import BusConfig, EcuProfile


def bus(*profiles):
    return BusConfig(list(profiles), {0x100 + i: p.label for i, p in enumerate(profiles)})


class TestRecords:
    @given(st.integers(0, 0x7FF), st.integers(0, (1 << 21) - 1))
    def test_round_trip(self, can_id, counter):
        word = cap.encode_record(can_id, counter)
        assert 0 <= word < 1 << 32
        assert cap.decode_record(word) == (can_id, counter)

    def test_layout(self):
        assert cap.encode_record(0x7FF, 0) == 0xFFE00000
        assert cap.encode_record(0, 0x1FFFFF) == 0x001FFFFF
        assert cap.encode_record(1, 1) == (1 << 21) | 1

    @pytest.mark.parametrize("args", [(0x800, 0), (-1, 0), (0, 1 << 21), (0, -1)])
    def test_range_checks(self, args):
        with pytest.raises(cap.RecordError):
            cap.encode_record(*args)

    def test_decode_range(self):
        with pytest.raises(cap.RecordError):
            cap.decode_record(1 << 32)


class TestDelay:
    def test_rounding_boundaries(self):
        assert cap.delay_of(1499) == cap.DelaySample(0, 1499)
        assert cap.delay_of(1500) == cap.DelaySample(1, -500)
        assert cap.delay_of(2000) == cap.DelaySample(1, 0)
        assert cap.delay_of(3499) == cap.DelaySample(1, 1499)

    def test_vector_matches_scalar(self, rng):
        e = rng.integers(0, 70_000, 500) // 20 * 20
        bits, delays = cap.delays_from_elapsed(e)
        for x, b, d in zip(e, bits, delays):
            s = cap.delay_of(int(x))
            assert (s.elapsed_bits, s.delay_ns) == (b, d)

    def test_float_path(self):
        s = cap.delay_of(2100.5, t_bit_ns=1000.0)
        assert s.elapsed_bits == 2 and s.delay_ns == pytest.approx(100.5)

    def test_negative_elapsed(self):
        with pytest.raises(ValueError):
            cap.delay_of(-1)

    def test_wraparound(self):
        m = MessageCapture(1, (1 << 21) - 10, np.array([15, 110]))
        assert cap.elapsed_ticks(m).tolist() == [25, 120]
        assert cap.elapsed_ns(m, 1) == 2400
        assert cap.message_delays(m).tolist() == [500.0, 400.0]


class TestAcquire:
    def test_quantization_oracle(self, rng):
        """17 ns offset, zero jitter: each delay is 20 * (floor((phi+17)/20) - floor(phi/20))."""
        p = EcuProfile("A", 0, 17, jitter_sigma_ns=0)
        cfg = bus(p)
        stream = fr.encode(fr.FrameSpec(0))
        for _ in range(200):
            phi = float(rng.uniform(0, 1e6))
            trace = physim.emit_waveform(p, stream, 0, start_ns=phi)
            d = cap.delays_for(cap.acquire(trace, cfg), cfg)
            # all rising edges sit exactly on bit boundaries here
            expected = [20 * (math.floor((phi + k * 2000 + 17) / 20) - math.floor(phi / 20)) - k * 2000
                        for k in fr.rising_edges(stream)]
            assert d.tolist() == expected

    def test_window_drops_late_edges(self):
        p = EcuProfile("A", 0, 0, jitter_sigma_ns=0)
        cfg = bus(p)
        bits = [0, 1] * 20
        trace = physim.emit_waveform(p, bits, 0)
        m = cap.acquire(trace, cfg)
        # rising edges at bits 1, 3, ..., 33; bit 35 is at 3500 ticks
        assert cap.elapsed_ticks(m).tolist() == [100 * k for k in range(1, 34, 2)]

    def test_counter_wraps_mid_frame(self):
        p = EcuProfile("A", 0, 10, jitter_sigma_ns=0)
        cfg = bus(p)
        start = (1 << 21) * 20 - 3000.0
        trace = physim.emit_waveform(p, fr.encode(fr.FrameSpec(0x555)), 0, start_ns=start, frame=fr.FrameSpec(0x555))
        m = cap.acquire(trace, cfg)
        assert m.edge_counters.min() < m.sof_counter
        assert set(cap.delays_for(m, cfg).tolist()) <= {0.0, 20.0}
        assert m.arbitration_id == 0x555

    def test_needs_sof(self):
        p = EcuProfile("A", 0, 0)
        trace = physim.EdgeTrace(None, "A", np.array([10.0]), np.array([True]))
        with pytest.raises(cap.CaptureFault):
            cap.acquire(trace, bus(p))


def sample_log(n=20):
    a, b = EcuProfile("A", 80, 100), EcuProfile("B", 80, 160)
    cfg = bus(a, b)
    caps = [cap.acquire(t, cfg) for t in physim.schedule_traffic(cfg, n, 4)]
    caps.append(MessageCapture(0x7FF, 5, np.array([105]), None))
    return CaptureLog(caps, ["A", "B"])


class TestLog:
    def test_round_trip(self, tmp_path):
        log = sample_log()
        path = tmp_path / "c.bin"
        cap.write_capture_log(path, log)
        back = cap.read_capture_log(path)
        assert back.messages == log.messages
        assert back.labels == ["A", "B"]
        assert (back.tick_ns, back.bitrate_bps, back.window_bits) == (20, 500_000, 34)
        assert back.messages[-1].true_sender is None

    def test_header(self):
        data = cap.dump_capture_log(CaptureLog([], ["ECU"]))
        assert data[:4] == b"EPCL"
        assert data[16:20] == b"\x03ECU"
        assert len(data) == 16 + 4 + 4

    def test_truncation_detected(self):
        data = cap.dump_capture_log(sample_log(3))
        for cut in (3, 17, len(data) - 1):
            with pytest.raises(cap.CaptureLogError):
                cap.load_capture_log(data[:cut])

    def test_trailing_bytes(self):
        data = cap.dump_capture_log(sample_log(2))
        with pytest.raises(cap.CaptureLogError, match="trailing"):
            cap.load_capture_log(data + b"\0")

    def test_bad_magic(self):
        data = bytearray(cap.dump_capture_log(sample_log(1)))
        data[0] = ord("X")
        with pytest.raises(cap.CaptureLogError, match="magic"):
            cap.load_capture_log(bytes(data))

    def test_unknown_sender_label(self):
        log = CaptureLog([MessageCapture(1, 0, np.array([100]), "Z")], ["A"])
        with pytest.raises(cap.CaptureLogError):
            cap.dump_capture_log(log)

    @settings(max_examples=100)
    @given(st.lists(st.tuples(st.integers(0, 0x7FF), st.integers(0, (1 << 21) - 1),
                              st.lists(st.integers(0, (1 << 21) - 1), min_size=1, max_size=20),
                              st.sampled_from([None, "A", "B"])), max_size=10))
    def test_round_trip_property(self, specs):
        msgs = [MessageCapture(i, s, np.array(e), lab) for i, s, e, lab in specs]
        log = CaptureLog(msgs, ["A", "B"])
        assert cap.load_capture_log(cap.dump_capture_log(log)).messages == msgs
