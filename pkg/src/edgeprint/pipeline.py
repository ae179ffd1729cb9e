"""In-memory composition of the stages: traces -> captures -> features -> dataset."""
import numpy as np

from . import capture, physim
from .features import FEATURE_NAMES, FeatureRow, extract


def capture_all(traces, config):
    return [capture.acquire(t, config) for t in traces]


def capture_log(captures, config):
    return capture.CaptureLog(
        messages=list(captures),
        labels=[e.label for e in config.ecus],
        tick_ns=config.counter_tick_ns,
        bitrate_bps=config.bitrate_bps,
        window_bits=config.window_bits,
    )


def feature_rows(captures, tick_ns=20, t_bit_ns=2000):
    return [
        FeatureRow(i, m.arbitration_id, m.true_sender,
                   extract(capture.message_delays(m, tick_ns, t_bit_ns)))
        for i, m in enumerate(captures)
    ]


def rows_from_log(log):
    return feature_rows(log.messages, log.tick_ns, log.t_bit_ns)


def dataset(rows, names=FEATURE_NAMES):
    """Matrix of the named features plus the label list, skipping unlabeled rows."""
    kept = [r for r in rows if r.label is not None]
    x = np.array([r.vector.values(names) for r in kept]).reshape(len(kept), len(names))
    return x, [r.label for r in kept]


def simulate(config, per_id_count, rng_seed):
    return capture_all(physim.schedule_traffic(config, per_id_count, rng_seed), config)


def synthetic_fleet(offsets_ns, fall_delay_ns=80.0, jitter_sigma_ns=2.0, ppms=None,
                    first_id=0x100, id_step=0x20, **bus_kwargs):
    """Bus with one ECU per rise-minus-fall offset, each owning one ID."""
    ppms = [0.0] * len(offsets_ns) if ppms is None else list(ppms)
    ecus = [
        physim.EcuProfile(f"ECU{i}", fall_delay_ns, fall_delay_ns + d, jitter_sigma_ns, p)
        for i, (d, p) in enumerate(zip(offsets_ns, ppms))
    ]
    ids = {first_id + i * id_step: e.label for i, e in enumerate(ecus)}
    return physim.BusConfig(ecus, ids, **bus_kwargs)
