"""Intrusion verdicts from sender classification, attack scenarios, and
detection reports.

A message is an attack exactly when the classifier's predicted sender differs
from the ECU registered for its arbitration ID. Each verdict uses that single
message only.
"""
from dataclasses import dataclass
import math
import warnings

import numpy as np

from . import capture, classify, physim
from .features import extract


class ScenarioError(ValueError):
    pass


class UnmonitoredIdWarning(UserWarning):
    pass


class SenderRegistry(dict):
    """Arbitration ID -> legitimate ECU label."""

    @classmethod
    def from_config(cls, config):
        return cls(config.id_assignment)


@dataclass(frozen=True)
class Verdict:
    attack: bool
    predicted: object
    registered: object
    tally: dict

    @property
    def label(self):
        return "Attack" if self.attack else "Normal"


@dataclass(frozen=True)
class LabeledMessage:
    capture: capture.MessageCapture
    attack: bool


def message_vector(message, model, config):
    delays = capture.delays_for(message, config)
    return extract(delays).values(model.feature_names)


def _unregistered(message, on_unregistered):
    if on_unregistered == "attack":
        return True
    if on_unregistered != "warn":
        raise ValueError(f"on_unregistered must be 'warn' or 'attack', got {on_unregistered!r}")
    warnings.warn(
        f"arbitration id {message.arbitration_id:#05x} has no registered sender",
        UnmonitoredIdWarning,
        stacklevel=3,
    )
    return False


def judge(model, registry, message, config, on_unregistered="warn"):
    """Classify one captured message and compare with its registered sender.

    Messages whose ID is not registered raise an ``UnmonitoredIdWarning`` and
    are passed as Normal, or flagged as Attack with ``on_unregistered="attack"``.
    """
    predicted, tally = classify.predict(model, message_vector(message, model, config))
    registered = registry.get(message.arbitration_id)
    if registered is None:
        return Verdict(_unregistered(message, on_unregistered), predicted, None, tally)
    return Verdict(predicted != registered, predicted, registered, tally)


def judge_many(model, registry, messages, config, on_unregistered="warn"):
    """Batch form of ``judge``; same verdicts, one neighbour search per chunk."""
    if not messages:
        return []
    x = np.array([message_vector(m, model, config) for m in messages])
    winners, votes = classify.predict_many(model, x)
    out = []
    for m, w, v in zip(messages, winners, votes):
        predicted = model.classes[w]
        tally = {c: int(n) for c, n in zip(model.classes, v) if n}
        registered = registry.get(m.arbitration_id)
        if registered is None:
            out.append(Verdict(_unregistered(m, on_unregistered), predicted, None, tally))
        else:
            out.append(Verdict(predicted != registered, predicted, registered, tally))
    return out


def _spoof_stream(config, attacker, legit, spoofed_id, attack_count, normal_count, rng_seed):
    rng = np.random.default_rng(rng_seed)
    senders = np.array([True] * attack_count + [False] * normal_count)
    rng.shuffle(senders)
    timeline = physim.Timeline(config.bitrate_bps)
    dlc = config.dlc(spoofed_id)
    out = []
    for is_attack in senders.tolist():
        profile = attacker if is_attack else legit
        frame = physim.random_frame(spoofed_id, dlc, rng)
        trace = physim.transmit(profile, frame, rng, timeline, config.bitrate_bps)
        out.append(LabeledMessage(capture.acquire(trace, config), is_attack))
    return out


def _legit(config, spoofed_id):
    if spoofed_id not in config.id_assignment:
        raise ScenarioError(f"spoofed id {spoofed_id:#05x} has no legitimate sender")
    return config.profile(config.id_assignment[spoofed_id])


def scenario_compromised(config, attacker, spoofed_id, attack_count=1000, normal_count=None,
                         rng_seed=0):
    """A trained ECU ``attacker`` sends ``spoofed_id``, interleaved with the real owner."""
    legit = _legit(config, spoofed_id)
    if attacker == legit.label:
        raise ScenarioError(f"{attacker} is the legitimate sender of {spoofed_id:#05x}")
    attacker_profile = config.profile(attacker)
    normal_count = attack_count if normal_count is None else normal_count
    return _spoof_stream(config, attacker_profile, legit, spoofed_id, attack_count,
                         normal_count, rng_seed)


def scenario_unmonitored(config, foreign_profile, spoofed_id, attack_count=1000,
                         normal_count=None, rng_seed=0, trained_labels=()):
    """An ECU absent from training sends ``spoofed_id``, interleaved with the real owner."""
    known = {e.label for e in config.ecus} | set(trained_labels)
    if foreign_profile.label in known:
        raise ScenarioError(f"foreign ECU label {foreign_profile.label!r} collides with a trained ECU")
    legit = _legit(config, spoofed_id)
    normal_count = attack_count if normal_count is None else normal_count
    return _spoof_stream(config, foreign_profile, legit, spoofed_id, attack_count,
                         normal_count, rng_seed)


@dataclass(frozen=True)
class DetectionReport:
    tp: int
    fn: int
    fp: int
    tn: int

    @staticmethod
    def _rate(num, den):
        return num / den if den else float("nan")

    @property
    def true_positive_rate(self):
        return self._rate(self.tp, self.tp + self.fn)

    @property
    def false_negative_rate(self):
        return self._rate(self.fn, self.tp + self.fn)

    @property
    def true_negative_rate(self):
        return self._rate(self.tn, self.tn + self.fp)

    @property
    def false_positive_rate(self):
        return self._rate(self.fp, self.tn + self.fp)

    def to_text(self):
        """Key-value summary, one ``key=value`` per line."""
        items = [
            ("true_positive_rate", self.true_positive_rate),
            ("false_negative_rate", self.false_negative_rate),
            ("false_positive_rate", self.false_positive_rate),
            ("true_negative_rate", self.true_negative_rate),
        ]
        lines = [f"{k}={v!r}" for k, v in items]
        lines += [f"{k}={getattr(self, k)}" for k in ("tp", "fn", "fp", "tn")]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        kv = dict(line.split("=", 1) for line in text.splitlines() if "=" in line)
        try:
            return cls(*(int(kv[k]) for k in ("tp", "fn", "fp", "tn")))
        except KeyError as exc:
            raise ValueError(f"report lacks {exc.args[0]!r}") from None

    def to_table(self):
        """2x2 rate matrix laid out as actual rows by predicted columns."""

        def cell(v):
            return "   n/a" if math.isnan(v) else f"{v:6.3f}"

        return "\n".join([
            "               | Predicted: Attack | Predicted: Normal",
            "---------------+-------------------+------------------",
            f"Actual: Attack |       {cell(self.true_positive_rate)}      |"
            f"       {cell(self.false_negative_rate)}",
            f"Actual: Normal |       {cell(self.false_positive_rate)}      |"
            f"       {cell(self.true_negative_rate)}",
        ]) + "\n"


def report(verdicts, ground_truth):
    """Tally Attack/Normal verdicts against ground truth (True = attack)."""
    verdicts = list(verdicts)
    ground_truth = list(ground_truth)
    if len(verdicts) != len(ground_truth):
        raise ValueError(f"{len(verdicts)} verdicts but {len(ground_truth)} ground-truth labels")
    flagged = [v.attack if isinstance(v, Verdict) else bool(v) for v in verdicts]
    tp = sum(f and g for f, g in zip(flagged, ground_truth))
    fn = sum((not f) and g for f, g in zip(flagged, ground_truth))
    fp = sum(f and (not g) for f, g in zip(flagged, ground_truth))
    tn = sum((not f) and (not g) for f, g in zip(flagged, ground_truth))
    return DetectionReport(tp, fn, fp, tn)


def evaluate(model, registry, stream, config, on_unregistered="warn"):
    verdicts = judge_many(model, registry, [m.capture for m in stream], config, on_unregistered)
    return report(verdicts, [m.attack for m in stream])
