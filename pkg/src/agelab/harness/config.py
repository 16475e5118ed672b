"""Experiment configuration files.

INI-style sections with ``key = value`` lines::

    [experiment]
    name = attack-train:p=0.2
    seeds = 1, 2, 3

    [trainer]
    batch_size = 32

    [attack]
    mode = state_neutral

Unknown sections or keys, and values that do not parse, are collected and
reported together in one :class:`ConfigError`.
"""

from __future__ import annotations

import configparser
import dataclasses
import re
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path

from ..attacks import AttackSpec
from ..resilience import AdversaryConfig
from ..tabular import TabularConfig
from ..trainer import ConfigError, TrainerConfig

EXPERIMENTS = ("nominal-epsgreedy", "nominal-age", "nominal-paramnoise", "attack-train",
               "resilience", "tabular-sweep")
VICTIMS = ("epsgreedy", "age", "paramnoise")
NOMINAL_STRATEGY = {"epsgreedy": "eps_greedy", "age": "age", "paramnoise": "param_noise"}

_ATTACK_RE = re.compile(r"^attack-train:p=([0-9.eE+-]+)$")
_RESILIENCE_RE = re.compile(r"^resilience:(\w+)$")


@dataclass
class SweepConfig:
    mdps: tuple[str, ...] = ("chain", "gridworld")
    p_values: tuple[float, ...] = tuple(round(0.1 * i, 1) for i in range(11))
    mode: str = "state_neutral"


@dataclass
class ResilienceConfig:
    # optional checkpoint for the victim; otherwise it is trained from the seed
    victim_checkpoint: str = ""
    victim_activation: str = "tanh"


@dataclass
class ExperimentConfig:
    name: str
    seeds: tuple[int, ...] = (0,)
    output: str = ""
    trainer: TrainerConfig = field(default_factory=TrainerConfig)
    attack: AttackSpec = field(default_factory=AttackSpec)
    adversary: AdversaryConfig = field(default_factory=AdversaryConfig)
    tabular: TabularConfig = field(default_factory=TabularConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    resilience: ResilienceConfig = field(default_factory=ResilienceConfig)
    source_text: str = ""

    @property
    def kind(self) -> str:
        return parse_experiment_name(self.name)[0]

    @property
    def argument(self):
        return parse_experiment_name(self.name)[1]

    def run_id(self) -> str:
        return self.output or re.sub(r"[^A-Za-z0-9.=-]+", "_", self.name)


def parse_experiment_name(name: str):
    """Split an experiment name into ``(kind, argument)``."""
    if name in ("nominal-epsgreedy", "nominal-age", "nominal-paramnoise", "tabular-sweep"):
        return name, None
    m = _ATTACK_RE.match(name)
    if m:
        p = float(m.group(1))
        if not 0.0 <= p <= 1.0:
            raise ConfigError(f"attack probability in {name!r} must lie in [0, 1]")
        return "attack-train", p
    m = _RESILIENCE_RE.match(name)
    if m:
        if m.group(1) not in VICTIMS:
            raise ConfigError(f"unknown victim {m.group(1)!r}; choose from {VICTIMS}")
        return "resilience", m.group(1)
    raise ConfigError(f"unknown experiment {name!r}; built-ins are nominal-epsgreedy, "
                      "nominal-age, nominal-paramnoise, attack-train:p=<x>, "
                      "resilience:<victim>, tabular-sweep")


def _split(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _coerce(raw: str, hint):
    raw = raw.strip()
    origin = typing.get_origin(hint)
    if origin in (typing.Union, types.UnionType):
        args = [a for a in typing.get_args(hint) if a is not type(None)]
        if raw.lower() in ("none", "null", ""):
            return None
        return _coerce(raw, args[0])
    if origin is tuple:
        (elem, *_rest) = typing.get_args(hint)
        return tuple(_coerce(t, elem) for t in _split(raw))
    if hint is bool:
        low = raw.lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if hint is int:
        return int(float(raw)) if re.fullmatch(r"[0-9.]+[eE][+]?[0-9]+", raw) else int(raw)
    if hint is float:
        return float(raw)
    return raw


def _build(cls, section: configparser.SectionProxy | None, errors: list[str], label: str,
           skip=()):
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)} - set(skip)
    kwargs = {}
    if section is not None:
        for key, raw in section.items():
            if key not in names:
                errors.append(f"[{label}] unknown key {key!r}")
                continue
            try:
                kwargs[key] = _coerce(raw, hints[key])
            except ValueError as exc:
                errors.append(f"[{label}] {key}: {exc}")
    try:
        return cls(**kwargs)
    except (ValueError, TypeError) as exc:
        errors.append(f"[{label}] {exc}")
        return None


SECTIONS = ("experiment", "trainer", "attack", "adversary", "tabular", "sweep", "resilience")


def parse_config(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None, default_section="__unused__")
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc

    errors: list[str] = []
    for name in parser.sections():
        if name not in SECTIONS:
            errors.append(f"unknown section [{name}]")
    if "experiment" not in parser:
        errors.append("missing [experiment] section")
        raise ConfigError("; ".join(errors))

    exp = parser["experiment"]
    name = exp.get("name", "").strip()
    seeds: tuple[int, ...] = (0,)
    for key in exp:
        if key not in ("name", "seeds", "output"):
            errors.append(f"[experiment] unknown key {key!r}")
    if not name:
        errors.append("[experiment] name is required")
    else:
        try:
            parse_experiment_name(name)
        except ConfigError as exc:
            errors.append(str(exc))
    if "seeds" in exp:
        try:
            seeds = tuple(int(s) for s in _split(exp["seeds"]))
            if not seeds:
                errors.append("[experiment] seeds is empty")
        except ValueError:
            errors.append(f"[experiment] seeds must be integers, got {exp['seeds']!r}")

    def section(key):
        return parser[key] if key in parser else None

    trainer = _build(TrainerConfig, section("trainer"), errors, "trainer", skip=("attack",))
    attack = _build(AttackSpec, section("attack"), errors, "attack")
    adversary = _build(AdversaryConfig, section("adversary"), errors, "adversary")
    tabular = _build(TabularConfig, section("tabular"), errors, "tabular")
    sweep = _build(SweepConfig, section("sweep"), errors, "sweep")
    resilience = _build(ResilienceConfig, section("resilience"), errors, "resilience")
    if sweep is not None:
        for m in sweep.mdps:
            if m not in ("chain", "gridworld"):
                errors.append(f"[sweep] unknown mdp {m!r}")
    if errors:
        raise ConfigError("; ".join(errors))
    return ExperimentConfig(name, seeds, exp.get("output", "").strip(), trainer, attack,
                            adversary, tabular, sweep, resilience, text)


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())
