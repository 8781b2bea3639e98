"""Experiment configuration: parsing, validation, serialization.

Config files are JSON documents whose keys mirror the ExperimentConfig
field names.  Validation errors name the offending field path.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .aggregation import AggregationRule, RuleKind
from .attacks import AttackKind, Perturbation, Visibility
from .defense import DefenseMode
from .learning import Architecture
from .validation import ConfigError

DEFAULT_CANDIDATE_KINDS = ("krum", "median", "trimmed_mean", "bulyan")


@dataclass
class DatasetConfig:
    num_classes: int = 10
    samples_per_client: int = 30
    test_samples: int = 2000
    feature_dim: int = 16
    class_separation: float = 4.0
    concentration: float = 0.5
    root_size: int = 200
    source_file: str | None = None  # columnar text file instead of synthesis


@dataclass
class ModelConfig:
    arch: str = "linear"
    hidden_width: int = 32


@dataclass
class RuleConfig:
    """Candidate rule entry; h=None means 'derive from the malicious rate'."""

    kind: str
    h: int | None = None
    k: int = 10
    beta_trim: float = 0.2


@dataclass
class DefenseConfig:
    mode: str = "static"
    static_index: int = 0
    rules: list[RuleConfig] = field(
        default_factory=lambda: [RuleConfig(kind=k) for k in DEFAULT_CANDIDATE_KINDS]
    )


@dataclass
class AttackConfig:
    kind: str | None = None  # None: no attack (baseline-style run)
    sigma: float = 0.5
    target: str | None = None  # pin a target rule kind for fang/she
    perturbation: str = "neg_sign"
    z_override: float | None = None
    impact_matrix: list[list[float]] | None = None  # precomputed alpha[i, j]


@dataclass
class ExperimentConfig:
    seed: int = 0
    name: str = "experiment"
    n_clients: int = 200
    sample_ratio: float = 0.2
    malicious_fraction: float = 0.0
    rounds: int = 200
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    defense: DefenseConfig = field(default_factory=DefenseConfig)
    attack: AttackConfig = field(default_factory=AttackConfig)
    knowledge: str | None = None  # defaults from the defense mode
    eta: float = 0.5
    beta: float = 1.0
    local_steps: int = 1
    batch_size: int = 32

    @property
    def h_total(self) -> int:
        return int(math.floor(self.malicious_fraction * self.n_clients))

    @property
    def clients_per_round(self) -> int:
        return max(1, round(self.sample_ratio * self.n_clients))

    def knowledge_level(self) -> Visibility:
        if self.knowledge is not None:
            return Visibility(self.knowledge)
        mode = DefenseMode(self.defense.mode)
        if mode is DefenseMode.STATIC:
            return Visibility.WHITE_BOX_STATIC
        if mode is DefenseMode.WHITE_BOX_DYNAMIC:
            return Visibility.WHITE_BOX_DYNAMIC
        return Visibility.BLACK_BOX

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _expect(mapping: dict, path: str) -> None:
    if not isinstance(mapping, dict):
        raise ConfigError(path, f"expected an object, got {type(mapping).__name__}")


def _take(mapping: dict, key: str, path: str, kind, default, allow_none: bool = False):
    if key not in mapping:
        return default
    value = mapping[key]
    if value is None:
        if allow_none:
            return None
        raise ConfigError(f"{path}{key}", "must not be null")
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if (not isinstance(value, kind)) or (isinstance(value, bool) and kind is int):
        raise ConfigError(f"{path}{key}", f"expected {kind.__name__}")
    return value


def _check_enum(value: str, enum_cls, path: str) -> str:
    try:
        enum_cls(value)
    except ValueError:
        options = ", ".join(e.value for e in enum_cls)
        raise ConfigError(path, f"unknown value {value!r}; expected one of: {options}") from None
    return value


def _parse_rules(entries, path: str) -> list[RuleConfig]:
    if not isinstance(entries, list) or not entries:
        raise ConfigError(path, "expected a non-empty list of rule objects")
    rules = []
    for i, entry in enumerate(entries):
        p = f"{path}[{i}]."
        _expect(entry, f"{path}[{i}]")
        kind = _take(entry, "kind", p, str, None)
        if kind is None:
            raise ConfigError(f"{p}kind", "is required")
        _check_enum(kind, RuleKind, f"{p}kind")
        h = _take(entry, "h", p, int, None, allow_none=True)
        if h is not None and h < 0:
            raise ConfigError(f"{p}h", "must be >= 0")
        k = _take(entry, "k", p, int, 10)
        if k < 1:
            raise ConfigError(f"{p}k", "must be >= 1")
        beta_trim = _take(entry, "beta_trim", p, float, 0.2)
        if not 0.0 <= beta_trim < 0.5:
            raise ConfigError(f"{p}beta_trim", "must be in [0, 0.5)")
        rules.append(RuleConfig(kind=kind, h=h, k=k, beta_trim=beta_trim))
    return rules


def config_from_dict(doc: dict) -> ExperimentConfig:
    """Build and validate an ExperimentConfig from a plain mapping."""
    _expect(doc, "<root>")
    known = {
        "seed", "name", "n_clients", "sample_ratio", "malicious_fraction", "rounds",
        "dataset", "model", "defense", "attack", "knowledge", "eta", "beta",
        "local_steps", "batch_size",
    }
    for key in doc:
        if key not in known:
            raise ConfigError(key, "unknown field")
    cfg = ExperimentConfig()
    cfg.seed = _take(doc, "seed", "", int, cfg.seed)
    if cfg.seed < 0:
        raise ConfigError("seed", "must be >= 0")
    cfg.name = _take(doc, "name", "", str, cfg.name)
    cfg.n_clients = _take(doc, "n_clients", "", int, cfg.n_clients)
    if cfg.n_clients < 1:
        raise ConfigError("n_clients", "must be >= 1")
    cfg.sample_ratio = _take(doc, "sample_ratio", "", float, cfg.sample_ratio)
    if not 0.0 < cfg.sample_ratio <= 1.0:
        raise ConfigError("sample_ratio", "must be in (0, 1]")
    cfg.malicious_fraction = _take(doc, "malicious_fraction", "", float, cfg.malicious_fraction)
    if not 0.0 <= cfg.malicious_fraction < 0.5:
        raise ConfigError("malicious_fraction", "must be in [0, 0.5)")
    cfg.rounds = _take(doc, "rounds", "", int, cfg.rounds)
    if cfg.rounds < 0:
        raise ConfigError("rounds", "must be >= 0")

    ds = doc.get("dataset", {})
    _expect(ds, "dataset")
    d = cfg.dataset
    d.num_classes = _take(ds, "num_classes", "dataset.", int, d.num_classes)
    d.samples_per_client = _take(ds, "samples_per_client", "dataset.", int, d.samples_per_client)
    d.test_samples = _take(ds, "test_samples", "dataset.", int, d.test_samples)
    d.feature_dim = _take(ds, "feature_dim", "dataset.", int, d.feature_dim)
    d.class_separation = _take(ds, "class_separation", "dataset.", float, d.class_separation)
    d.concentration = _take(ds, "concentration", "dataset.", float, d.concentration)
    d.root_size = _take(ds, "root_size", "dataset.", int, d.root_size)
    d.source_file = _take(ds, "source_file", "dataset.", str, d.source_file, allow_none=True)
    for key, value in (("num_classes", d.num_classes), ("samples_per_client", d.samples_per_client),
                       ("test_samples", d.test_samples), ("feature_dim", d.feature_dim),
                       ("root_size", d.root_size)):
        if value < 1:
            raise ConfigError(f"dataset.{key}", "must be >= 1")
    if d.class_separation < 0:
        raise ConfigError("dataset.class_separation", "must be >= 0")
    if d.concentration <= 0:
        raise ConfigError("dataset.concentration", "must be > 0")

    mdl = doc.get("model", {})
    _expect(mdl, "model")
    cfg.model.arch = _check_enum(
        _take(mdl, "arch", "model.", str, cfg.model.arch), Architecture, "model.arch"
    )
    cfg.model.hidden_width = _take(mdl, "hidden_width", "model.", int, cfg.model.hidden_width)
    if cfg.model.hidden_width < 1:
        raise ConfigError("model.hidden_width", "must be >= 1")

    dfn = doc.get("defense", {})
    _expect(dfn, "defense")
    cfg.defense.mode = _check_enum(
        _take(dfn, "mode", "defense.", str, cfg.defense.mode), DefenseMode, "defense.mode"
    )
    cfg.defense.static_index = _take(dfn, "static_index", "defense.", int, cfg.defense.static_index)
    if "rules" in dfn:
        cfg.defense.rules = _parse_rules(dfn["rules"], "defense.rules")
    if not 0 <= cfg.defense.static_index < len(cfg.defense.rules):
        raise ConfigError("defense.static_index", "out of range for the rule list")

    atk = doc.get("attack", {})
    _expect(atk, "attack")
    a = cfg.attack
    a.kind = _take(atk, "kind", "attack.", str, a.kind, allow_none=True)
    if a.kind is not None:
        _check_enum(a.kind, AttackKind, "attack.kind")
    a.sigma = _take(atk, "sigma", "attack.", float, a.sigma)
    if a.sigma < 0:
        raise ConfigError("attack.sigma", "must be >= 0")
    a.target = _take(atk, "target", "attack.", str, a.target, allow_none=True)
    if a.target is not None:
        _check_enum(a.target, RuleKind, "attack.target")
    a.perturbation = _check_enum(
        _take(atk, "perturbation", "attack.", str, a.perturbation),
        Perturbation, "attack.perturbation",
    )
    a.z_override = _take(atk, "z_override", "attack.", float, a.z_override, allow_none=True)
    if "impact_matrix" in atk and atk["impact_matrix"] is not None:
        matrix = atk["impact_matrix"]
        if not isinstance(matrix, list) or not all(isinstance(r, list) for r in matrix):
            raise ConfigError("attack.impact_matrix", "expected a list of rows")
        a.impact_matrix = [[float(v) for v in row] for row in matrix]

    cfg.knowledge = _take(doc, "knowledge", "", str, cfg.knowledge, allow_none=True)
    if cfg.knowledge is not None:
        _check_enum(cfg.knowledge, Visibility, "knowledge")
        mode = DefenseMode(cfg.defense.mode)
        level = Visibility(cfg.knowledge)
        if mode is DefenseMode.WHITE_BOX_DYNAMIC and level is not Visibility.WHITE_BOX_DYNAMIC:
            raise ConfigError("knowledge", "white_box_dynamic defense implies that knowledge level")
        if mode in (DefenseMode.BLACK_BOX_UNIFORM, DefenseMode.BLACK_BOX_WEIGHTED) \
                and level is not Visibility.BLACK_BOX:
            raise ConfigError("knowledge", "black-box defenses imply black_box knowledge")
        if mode is DefenseMode.STATIC and level is Visibility.WHITE_BOX_DYNAMIC:
            raise ConfigError("knowledge", "static defense admits white_box_static or black_box")

    cfg.eta = _take(doc, "eta", "", float, cfg.eta)
    if cfg.eta <= 0:
        raise ConfigError("eta", "must be > 0")
    cfg.beta = _take(doc, "beta", "", float, cfg.beta)
    if not 0.0 < cfg.beta <= 1.0:
        raise ConfigError("beta", "must be in (0, 1]")
    cfg.local_steps = _take(doc, "local_steps", "", int, cfg.local_steps)
    if cfg.local_steps < 1:
        raise ConfigError("local_steps", "must be >= 1")
    cfg.batch_size = _take(doc, "batch_size", "", int, cfg.batch_size)
    if cfg.batch_size < 1:
        raise ConfigError("batch_size", "must be >= 1")

    if cfg.h_total >= cfg.n_clients / 2:
        raise ConfigError("malicious_fraction", "floor(fraction * n_clients) must be < n_clients/2")
    if cfg.attack.kind in ("fang", "she") and cfg.malicious_fraction == 0.0:
        raise ConfigError("malicious_fraction", "targeted attacks need malicious clients")
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(str(path), "config file not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(str(path), f"invalid JSON: {exc}") from None
    return config_from_dict(doc)


def derived_rule_h(cfg: ExperimentConfig) -> int:
    """Default tolerated-Byzantine count for candidate rules: the expected
    malicious count among sampled clients, at least 1 when any exist."""
    k = cfg.clients_per_round
    h = max(1, math.ceil(cfg.malicious_fraction * k))
    # Keep Bulyan feasible: m - 4h >= 1 with m = K.
    return max(0, min(h, (k - 1) // 4))


def build_candidate_rules(cfg: ExperimentConfig) -> list[AggregationRule]:
    default_h = derived_rule_h(cfg)
    rules = []
    for rc in cfg.defense.rules:
        rules.append(
            AggregationRule(
                kind=RuleKind(rc.kind),
                h=default_h if rc.h is None else rc.h,
                k=rc.k,
                beta_trim=rc.beta_trim,
            )
        )
    return rules
