"""Experiment configuration (YAML) and run manifests.

Units are explicit in key names (``_ns``, ``_bps``). Arbitration IDs may be
written as YAML hex integers (``0x1A0``) or strings (``"0x1A0"``).
"""
from dataclasses import asdict, dataclass, field
import hashlib
import json

import yaml

from . import __version__
from .features import SELECTED, check_names
from .physim import BusConfig, ConfigError, EcuProfile

_PROFILE_KEYS = {"label", "fall_delay_ns", "rise_delay_ns", "jitter_sigma_ns", "clock_ppm"}


@dataclass
class ScenarioConfig:
    kind: str = "compromised"
    spoofed_id: int = None
    attacker: str = None
    foreign: EcuProfile = None
    attack_count: int = 1000
    normal_count: int = 1000
    seed: int = 0
    on_unregistered: str = "warn"


@dataclass
class ExperimentConfig:
    bus: BusConfig
    seed: int = 0
    per_id_count: int = 1000
    features: tuple = SELECTED
    k: int = 5
    folds: int = 5
    relief_k: int = 10
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    outputs: dict = field(default_factory=dict)
    digest: str = ""


def _int_id(v):
    if isinstance(v, bool):
        raise ConfigError(f"bad arbitration id {v!r}")
    if isinstance(v, int):
        return v
    try:
        return int(str(v), 0)
    except ValueError:
        raise ConfigError(f"bad arbitration id {v!r}") from None


def _profile(raw):
    if not isinstance(raw, dict):
        raise ConfigError(f"ECU entry must be a mapping, got {raw!r}")
    extra = set(raw) - _PROFILE_KEYS
    if extra:
        raise ConfigError(f"unknown ECU keys {sorted(extra)}")
    try:
        return EcuProfile(
            label=str(raw["label"]),
            fall_delay_ns=float(raw["fall_delay_ns"]),
            rise_delay_ns=float(raw["rise_delay_ns"]),
            jitter_sigma_ns=float(raw.get("jitter_sigma_ns", 2.0)),
            clock_ppm=float(raw.get("clock_ppm", 0.0)),
        )
    except KeyError as exc:
        raise ConfigError(f"ECU entry missing {exc.args[0]!r}") from None


def _section(raw, key):
    v = raw.get(key) or {}
    if not isinstance(v, dict):
        raise ConfigError(f"section {key!r} must be a mapping")
    return v


def parse_config(raw):
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a mapping")
    unknown = set(raw) - {"bus", "pipeline", "scenario", "outputs"}
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
    b = _section(raw, "bus")
    try:
        bus = BusConfig(
            ecus=[_profile(e) for e in b.get("ecus") or []],
            id_assignment={_int_id(k): str(v) for k, v in (b.get("ids") or {}).items()},
            bitrate_bps=int(b.get("bitrate_bps", 500_000)),
            counter_tick_ns=int(b.get("counter_tick_ns", 20)),
            window_bits=int(b.get("window_bits", 34)),
            dlc_by_id={_int_id(k): int(v) for k, v in (b.get("dlc") or {}).items()},
            default_dlc=int(b.get("default_dlc", 8)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    if not bus.ecus:
        raise ConfigError("bus.ecus is empty")

    p = _section(raw, "pipeline")
    s = _section(raw, "scenario")
    try:
        scenario = ScenarioConfig(
            kind=str(s.get("kind", "compromised")),
            spoofed_id=_int_id(s["spoofed_id"]) if "spoofed_id" in s else None,
            attacker=s.get("attacker"),
            foreign=_profile(s["foreign"]) if s.get("foreign") else None,
            attack_count=int(s.get("attack_count", 1000)),
            normal_count=int(s.get("normal_count", s.get("attack_count", 1000))),
            seed=int(s.get("seed", 0)),
            on_unregistered=str(s.get("on_unregistered", "warn")),
        )
        cfg = ExperimentConfig(
            bus=bus,
            seed=int(p.get("seed", 0)),
            per_id_count=int(p.get("per_id_count", 1000)),
            features=check_names(p.get("features", SELECTED)),
            k=int(p.get("k", 5)),
            folds=int(p.get("folds", 5)),
            relief_k=int(p.get("relief_k", 10)),
            scenario=scenario,
            outputs={str(k): str(v) for k, v in _section(raw, "outputs").items()},
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    validate_scenario(cfg)
    cfg.digest = config_digest(raw)
    return cfg


def validate_scenario(cfg):
    s = cfg.scenario
    if s.kind not in ("compromised", "unmonitored"):
        raise ConfigError(f"scenario.kind must be compromised or unmonitored, got {s.kind!r}")
    if s.on_unregistered not in ("warn", "attack"):
        raise ConfigError("scenario.on_unregistered must be warn or attack")
    if s.spoofed_id is not None and s.spoofed_id not in cfg.bus.id_assignment:
        raise ConfigError(f"scenario.spoofed_id {s.spoofed_id:#05x} is not assigned")
    if s.attacker is not None:
        cfg.bus.profile(s.attacker)
    if s.foreign is not None and s.foreign.label in {e.label for e in cfg.bus.ecus}:
        raise ConfigError(f"scenario.foreign label {s.foreign.label!r} collides with a bus ECU")


def _canonical(v):
    # YAML may mix int and str keys (0x100 vs "0x100"); JSON needs them sortable
    if isinstance(v, dict):
        return {repr(k) if not isinstance(k, str) else k: _canonical(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_canonical(x) for x in v]
    return v


def config_digest(raw):
    canon = json.dumps(_canonical(raw), sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from None
    return parse_config(raw)


def dump_bus(bus):
    """Plain-data form of a bus config, suitable for ``parse_config``."""
    return {
        "bitrate_bps": bus.bitrate_bps,
        "counter_tick_ns": bus.counter_tick_ns,
        "window_bits": bus.window_bits,
        "default_dlc": bus.default_dlc,
        "ecus": [asdict(e) for e in bus.ecus],
        "ids": {f"0x{k:03X}": v for k, v in sorted(bus.id_assignment.items())},
        "dlc": {f"0x{k:03X}": v for k, v in sorted(bus.dlc_by_id.items())},
    }


@dataclass
class RunManifest:
    command: str
    config_sha256: str
    seeds: dict
    inputs: dict
    outputs: dict
    tool_version: str = __version__

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text):
        return cls(**json.loads(text))
