"""k-nearest-neighbour sender classification and stratified K-fold evaluation.

Model file format (UTF-8 text, tab separated, versioned)::

    edgeprint-knn<TAB>1
    k<TAB>5
    features<TAB>mean<TAB>rms<TAB>max
    classes<TAB>ECU0<TAB>ECU1 ...
    center<TAB>c1<TAB>c2 ...
    scale<TAB>s1<TAB>s2 ...
    points<TAB>n
    <class index><TAB>z1<TAB>z2 ...        (n lines, z-scored training vectors)

Floats use Python's shortest round-trip repr, so a reloaded model predicts
exactly like the original.
"""
from dataclasses import dataclass
import io

import numpy as np

from .features import SELECTED, check_names
from .util import atomic_write_text

MODEL_MAGIC = "edgeprint-knn"
MODEL_VERSION = 1
_CHUNK = 256


class ModelError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class KnnModel:
    k: int
    feature_names: tuple
    classes: tuple
    center: np.ndarray
    scale: np.ndarray
    points: np.ndarray
    point_labels: np.ndarray

    def __len__(self):
        return len(self.points)

    def normalize(self, x):
        return (np.asarray(x, dtype=np.float64) - self.center) / self.scale


def _check_k(k):
    if k < 1 or k % 2 == 0:
        raise ModelError(f"k must be odd and >= 1, got {k}")


def train(x, labels, k=5, feature_names=SELECTED):
    """Fit z-score normalisation on ``x`` and store the scaled training points."""
    _check_k(k)
    feature_names = check_names(feature_names)
    x = np.asarray(x, dtype=np.float64)
    labels = list(labels)
    if x.ndim != 2 or len(x) == 0:
        raise ModelError("training set is empty")
    if x.shape[1] != len(feature_names):
        raise ModelError(f"{x.shape[1]} columns but {len(feature_names)} feature names")
    if len(labels) != len(x):
        raise ModelError(f"{len(x)} vectors but {len(labels)} labels")
    classes = tuple(sorted(set(labels)))
    lookup = {c: i for i, c in enumerate(classes)}
    center = x.mean(axis=0)
    scale = x.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    points = (x - center) / scale
    y = np.array([lookup[c] for c in labels], dtype=np.int64)
    return KnnModel(k, feature_names, classes, center, scale, points, y)


def _neighbours(model, z):
    d2 = np.zeros((len(z), len(model.points)))
    for a in range(z.shape[1]):
        diff = z[:, a, None] - model.points[None, :, a]
        d2 += diff * diff
    k = min(model.k, len(model.points))
    # stable sort: equal distances resolve to the earlier training point
    idx = np.argsort(d2, axis=1, kind="stable")[:, :k]
    return idx, np.sqrt(np.take_along_axis(d2, idx, axis=1))


def _vote(model, idx, dist):
    n_classes = len(model.classes)
    lab = model.point_labels[idx]
    votes = np.zeros((len(idx), n_classes), dtype=np.int64)
    np.add.at(votes, (np.arange(len(idx))[:, None], lab), 1)
    winners = votes.argmax(axis=1)
    top = votes.max(axis=1)
    tied = np.flatnonzero((votes == top[:, None]).sum(axis=1) > 1)
    for i in tied:
        cands = np.flatnonzero(votes[i] == top[i])
        mean_d = [dist[i][lab[i] == c].mean() for c in cands]
        # min() keeps the first candidate on equal distance, i.e. label order
        winners[i] = cands[int(np.argmin(mean_d))]
    return winners, votes


def predict_many(model, x):
    """Predicted class indices and per-class vote counts for every row of ``x``."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != len(model.feature_names):
        raise ModelError(
            f"expected vectors of arity {len(model.feature_names)}, got shape {x.shape}"
        )
    z = model.normalize(x)
    winners = np.empty(len(z), dtype=np.int64)
    votes = np.empty((len(z), len(model.classes)), dtype=np.int64)
    for s in range(0, len(z), _CHUNK):
        idx, dist = _neighbours(model, z[s:s + _CHUNK])
        winners[s:s + _CHUNK], votes[s:s + _CHUNK] = _vote(model, idx, dist)
    return winners, votes


def predict(model, vector):
    """Return ``(label, tally)`` where tally maps label to neighbour votes."""
    v = np.asarray(vector, dtype=np.float64)
    if v.ndim != 1 or len(v) != len(model.feature_names):
        raise ModelError(f"expected a vector of arity {len(model.feature_names)}, got {v.shape}")
    w, votes = predict_many(model, v[None, :])
    tally = {c: int(n) for c, n in zip(model.classes, votes[0]) if n}
    return model.classes[w[0]], tally


def predict_labels(model, x):
    w, _ = predict_many(model, x)
    return [model.classes[i] for i in w]


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """Counts indexed by (actual, predicted) over ``classes``."""

    classes: tuple
    counts: np.ndarray

    @classmethod
    def from_labels(cls, actual, predicted, classes=None):
        if classes is None:
            classes = tuple(sorted(set(actual) | set(predicted)))
        lookup = {c: i for i, c in enumerate(classes)}
        counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
        for a, p in zip(actual, predicted):
            counts[lookup[a], lookup[p]] += 1
        return cls(tuple(classes), counts)

    def __add__(self, other):
        if self.classes != other.classes:
            raise ValueError("confusion matrices over different classes")
        return ConfusionMatrix(self.classes, self.counts + other.counts)

    @property
    def total(self):
        return int(self.counts.sum())

    @property
    def accuracy(self):
        return float(np.trace(self.counts) / self.total) if self.total else float("nan")

    def rates(self):
        """Row-normalised matrix; row ``i`` sums to 1 unless class ``i`` is absent."""
        rows = self.counts.sum(axis=1, keepdims=True)
        return np.divide(self.counts, rows, out=np.zeros(self.counts.shape), where=rows > 0)

    def per_class_rates(self):
        return dict(zip(self.classes, np.diag(self.rates()).tolist()))

    def format(self, normalized=True):
        width = max(8, *(len(c) for c in self.classes)) + 2
        lines = [" " * width + "".join(f"{c:>{width}}" for c in self.classes)]
        data = self.rates() if normalized else self.counts
        for c, row in zip(self.classes, data):
            cells = "".join(f"{v:>{width}.4f}" if normalized else f"{v:>{width}d}" for v in row)
            lines.append(f"{c:<{width}}" + cells)
        return "\n".join(lines)


@dataclass(frozen=True)
class CrossValidation:
    fold_accuracies: tuple
    matrices: tuple

    @property
    def mean_accuracy(self):
        return float(np.mean(self.fold_accuracies))

    @property
    def pooled(self):
        total = self.matrices[0]
        for m in self.matrices[1:]:
            total = total + m
        return total


def stratified_folds(labels, n_folds, rng_seed=0):
    """Test-index arrays for each fold; each class is shuffled then split evenly."""
    labels = np.asarray(labels)
    rng = np.random.default_rng(rng_seed)
    parts = [[] for _ in range(n_folds)]
    for c in sorted(set(labels.tolist())):
        members = np.flatnonzero(labels == c)
        if len(members) < n_folds:
            raise ModelError(f"class {c!r} has {len(members)} instances, fewer than K={n_folds}")
        for i, chunk in enumerate(np.array_split(rng.permutation(members), n_folds)):
            parts[i].append(chunk)
    return [np.sort(np.concatenate(p)) for p in parts]


def kfold_cv(x, labels, n_folds=5, k=5, rng_seed=0, feature_names=SELECTED):
    if n_folds < 2:
        raise ModelError("K must be >= 2")
    x = np.asarray(x, dtype=np.float64)
    labels = np.asarray(list(labels), dtype=object)
    if len(x) != len(labels) or len(x) == 0:
        raise ModelError("need equally many vectors and labels")
    if len(set(labels.tolist())) < 2:
        raise ModelError("cross validation needs at least two classes")
    classes = tuple(sorted(set(labels.tolist())))
    accs, mats = [], []
    for test in stratified_folds(labels, n_folds, rng_seed):
        mask = np.ones(len(x), dtype=bool)
        mask[test] = False
        model = train(x[mask], labels[mask], k, feature_names)
        pred = predict_labels(model, x[test])
        cm = ConfusionMatrix.from_labels(labels[test].tolist(), pred, classes)
        mats.append(cm)
        accs.append(float(np.mean(np.array(pred, dtype=object) == labels[test])))
    return CrossValidation(tuple(accs), tuple(mats))


# -- persistence ---------------------------------------------------------------

def _row(key, values):
    return "\t".join([key] + [v if isinstance(v, str) else repr(float(v)) for v in values])


def dump_model(model):
    for c in model.classes:
        if any(ch in str(c) for ch in "\t\n\r"):
            raise ModelError(f"class label {c!r} contains a tab or newline")
    lines = [
        f"{MODEL_MAGIC}\t{MODEL_VERSION}",
        f"k\t{model.k}",
        "\t".join(("features",) + model.feature_names),
        "\t".join(("classes",) + tuple(map(str, model.classes))),
        _row("center", model.center),
        _row("scale", model.scale),
        f"points\t{len(model.points)}",
    ]
    for lab, p in zip(model.point_labels.tolist(), model.points):
        lines.append(_row(str(lab), p))
    return "\n".join(lines) + "\n"


def load_model(text):
    lines = io.StringIO(text).read().splitlines()

    def field(i, key):
        if i >= len(lines):
            raise ModelError("model file truncated")
        parts = lines[i].split("\t")
        if parts[0] != key:
            raise ModelError(f"line {i + 1}: expected {key!r}, got {parts[0]!r}")
        return parts[1:]

    version = field(0, MODEL_MAGIC)
    if version != [str(MODEL_VERSION)]:
        raise ModelError(f"unsupported model version {version}")
    k = int(field(1, "k")[0])
    names = tuple(field(2, "features"))
    classes = tuple(field(3, "classes"))
    center = np.array([float(v) for v in field(4, "center")])
    scale = np.array([float(v) for v in field(5, "scale")])
    n = int(field(6, "points")[0])
    body = lines[7:7 + n]
    if len(body) != n:
        raise ModelError(f"model declares {n} points but holds {len(body)}")
    rows = [ln.split("\t") for ln in body]
    labels = np.array([int(r[0]) for r in rows], dtype=np.int64)
    points = np.array([[float(v) for v in r[1:]] for r in rows]).reshape(n, len(names))
    _check_k(k)
    check_names(names)
    return KnnModel(k, names, classes, center, scale, points, labels)


def save_model(path, model):
    atomic_write_text(path, dump_model(model))


def read_model(path):
    with open(path, encoding="utf-8") as fh:
        return load_model(fh.read())
