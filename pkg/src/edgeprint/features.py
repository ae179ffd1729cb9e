"""Per-message delay statistics and Relief-F feature ranking.

Feature table format (CSV, header row, one row per message)::

    message_id,arbitration_id,label,mean,std,variance,skewness,kurtosis,rms,max,energy

``arbitration_id`` is written as ``0x`` hex; ``label`` is empty when the
sender is unknown; feature values use Python's shortest round-trip repr.
"""
import csv
from dataclasses import astuple, dataclass
import io
import math

import numpy as np

from . import kernels
from .util import atomic_write_text

FEATURE_NAMES = ("mean", "std", "variance", "skewness", "kurtosis", "rms", "max", "energy")
DISPLAY_NAMES = {
    "mean": "Mean",
    "std": "Standard Deviation",
    "variance": "Variance",
    "skewness": "Skewness",
    "kurtosis": "Kurtosis",
    "rms": "Root Mean Square",
    "max": "Max",
    "energy": "Energy",
}
SELECTED = ("mean", "rms", "max")
TABLE_COLUMNS = ("message_id", "arbitration_id", "label") + FEATURE_NAMES


class InsufficientDataError(ValueError):
    pass


@dataclass(frozen=True)
class FeatureVector:
    mean: float
    std: float
    variance: float
    skewness: float
    kurtosis: float
    rms: float
    max: float
    energy: float

    def values(self, names=FEATURE_NAMES):
        return np.array([getattr(self, n) for n in names], dtype=np.float64)


def check_names(names):
    names = tuple(names)
    unknown = [n for n in names if n not in FEATURE_NAMES]
    if unknown:
        raise ValueError(f"unknown feature(s) {unknown}; choose from {FEATURE_NAMES}")
    if len(set(names)) != len(names) or not names:
        raise ValueError(f"feature subset must be non-empty and unique, got {names}")
    return names


def extract(delays):
    """Population statistics of one message's delay-times.

    Skewness and kurtosis (raw, not excess) are 0 when the sample has no spread.
    """
    x = np.asarray(delays, dtype=np.float64)
    if x.ndim != 1 or len(x) == 0:
        raise ValueError("need at least one delay-time")
    if not np.all(np.isfinite(x)):
        raise ValueError("delay-times must be finite")
    n = len(x)
    mean = x.sum() / n
    dev = x - mean
    variance = (dev * dev).sum() / n
    std = math.sqrt(variance)
    if std <= 1e-12 * max(1.0, abs(mean)):
        skew = kurt = 0.0
    else:
        z = dev / std
        z2 = z * z
        skew = (z2 * z).sum() / n
        kurt = (z2 * z2).sum() / n
    energy = (x * x).sum() / n
    return FeatureVector(
        mean=float(mean),
        std=std,
        variance=float(variance),
        skewness=float(skew),
        kurtosis=float(kurt),
        rms=math.sqrt(energy),
        max=float(x.max()),
        energy=float(energy),
    )


def as_matrix(vectors, names=FEATURE_NAMES):
    if isinstance(vectors, np.ndarray):
        return np.asarray(vectors, dtype=np.float64)
    return np.array([v.values(names) for v in vectors], dtype=np.float64).reshape(-1, len(names))


@dataclass(frozen=True)
class FeatureWeights:
    weights: dict

    def ranked(self):
        order = {n: i for i, n in enumerate(FEATURE_NAMES)}
        return sorted(self.weights, key=lambda n: (-self.weights[n], order.get(n, len(order))))

    def __getitem__(self, name):
        return self.weights[name]


def relief_f(vectors, labels, k_neighbors=10, iterations=None, rng_seed=0, names=FEATURE_NAMES):
    """Relief-F weights (Kononenko's multi-class variant).

    Features are range-normalised to [0, 1]; neighbours are the ``k_neighbors``
    nearest by Manhattan distance within the instance's class (hits) and
    within every other class (misses). Miss contributions are weighted by
    class prior ``P(C) / (1 - P(class(R)))``.
    """
    names = check_names(names)
    x = as_matrix(vectors, names)
    labels = list(labels)
    if len(labels) != len(x):
        raise ValueError(f"{len(x)} vectors but {len(labels)} labels")
    classes = sorted(set(labels))
    if len(classes) < 2:
        raise InsufficientDataError("Relief-F needs at least two classes")
    y = np.array([classes.index(c) for c in labels], dtype=np.int64)
    counts = np.bincount(y, minlength=len(classes))
    small = [classes[i] for i in np.flatnonzero(counts < k_neighbors + 1)]
    if small:
        raise InsufficientDataError(
            f"classes {small} have fewer than k_neighbors + 1 = {k_neighbors + 1} instances"
        )
    lo = x.min(axis=0)
    span = x.max(axis=0) - lo
    xn = np.where(span > 0, (x - lo) / np.where(span > 0, span, 1.0), 0.0)
    n = len(x)
    m = n if iterations is None else int(iterations)
    if not 1 <= m <= n:
        raise ValueError(f"iterations must be in [1, {n}], got {m}")
    order = np.random.default_rng(rng_seed).permutation(n)[:m]
    priors = counts / n
    w = kernels.relief_f_weights(xn, y, order, k_neighbors, priors)
    return FeatureWeights({name: float(v) for name, v in zip(names, w)})


def select_top(weights, n=3):
    if not 1 <= n <= len(FEATURE_NAMES):
        raise ValueError(f"n must be in [1, {len(FEATURE_NAMES)}]")
    return tuple(weights.ranked()[:n])


# -- feature table ------------------------------------------------------------

@dataclass(frozen=True)
class FeatureRow:
    message_id: int
    arbitration_id: int
    label: object
    vector: FeatureVector


def dump_feature_table(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TABLE_COLUMNS)
    for r in rows:
        w.writerow(
            [r.message_id, f"0x{r.arbitration_id:03X}", r.label or ""]
            + [repr(float(v)) for v in astuple(r.vector)]
        )
    return buf.getvalue()


def load_feature_table(text):
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if tuple(header or ()) != TABLE_COLUMNS:
        raise ValueError(f"feature table header must be {','.join(TABLE_COLUMNS)}")
    rows = []
    for lineno, rec in enumerate(reader, start=2):
        if len(rec) != len(TABLE_COLUMNS):
            raise ValueError(f"line {lineno}: expected {len(TABLE_COLUMNS)} columns, got {len(rec)}")
        vec = FeatureVector(*(float(v) for v in rec[3:]))
        rows.append(FeatureRow(int(rec[0]), int(rec[1], 0), rec[2] or None, vec))
    return rows


def write_feature_table(path, rows):
    atomic_write_text(path, dump_feature_table(rows))


def read_feature_table(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return load_feature_table(fh.read())

