"""Scenario files (TOML) and named presets.

See ``docs/scenario.md`` for the grammar.  Unknown sections or keys are
rejected with a :class:`ConfigurationError` naming the offending key.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .cac import CacPolicy
from .discovery import NodePosition, PropagationConfig, ProtocolConfig
from .errors import ConfigurationError, CacsinrError
from .outage import PowerAllocation, SystemConfig, TrafficClass, allocate_powers

PRESETS = ("paper-sec6",)

_SYSTEM_KEYS = {"processing_gain", "bandwidth_hz", "base_rate_bps", "f1", "f2",
                "noise_density", "total_power", "power_reference"}
_CLASS_KEYS = {"index", "rate_bps", "target_ber", "alpha", "codes", "outage_target"}
_POLICY_KEYS = {"variant", "handoff_guard"}
_SIM_KEYS = {"new_rates", "handoff_rates", "holding_times", "duration", "warmup",
             "outage_sampling", "seed"}
_PROP_KEYS = {"path_loss_exponent", "reference_loss_db", "noise_floor_dbm", "beamwidth_deg",
              "mainlobe_gain_db", "sidelobe_gain_db", "detection_threshold_db"}
_AST_KEYS = {"spacing", "guard", "collect_margin", "sweep_node", "nodes"}
_SECTIONS = {"system": _SYSTEM_KEYS, "classes": _CLASS_KEYS, "policy": _POLICY_KEYS,
             "sim": _SIM_KEYS, "propagation": _PROP_KEYS, "ast": _AST_KEYS}


@dataclass
class Scenario:
    system: SystemConfig
    classes: list
    power_reference: int = 0
    policy: CacPolicy = field(default_factory=CacPolicy)
    sim: dict = field(default_factory=dict)  # SimConfig kwargs minus the seed
    sim_seed: Optional[int] = None
    propagation: PropagationConfig = field(default_factory=PropagationConfig)
    protocol: ProtocolConfig = field(default_factory=ProtocolConfig)
    nodes: list = field(default_factory=list)
    sweep_node: Optional[str] = None
    name: str = ""

    def allocation(self) -> PowerAllocation:
        return allocate_powers(self.classes, self.system, self.power_reference)


def _check_keys(section: str, table: dict, allowed: set):
    if not isinstance(table, dict):
        raise ConfigurationError(f"[{section}] must be a table")
    for key in table:
        if key not in allowed:
            raise ConfigurationError(f"unknown key '{section}.{key}'")


def _build(section, fn, table):
    try:
        return fn(**table)
    except CacsinrError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"[{section}]: {exc}") from None


def parse_scenario(data: dict, name: str = "") -> Scenario:
    for sec in data:
        if sec not in _SECTIONS:
            raise ConfigurationError(f"unknown section '{sec}'")
    if "system" not in data or "classes" not in data:
        raise ConfigurationError("scenario needs [system] and [[classes]]")

    system = dict(data["system"])
    _check_keys("system", system, _SYSTEM_KEYS)
    ref = system.pop("power_reference", 0)
    cfg = _build("system", SystemConfig, system)

    raw_classes = data["classes"]
    if not isinstance(raw_classes, list) or not raw_classes:
        raise ConfigurationError("[[classes]] must list at least one class")
    classes = []
    for pos, c in enumerate(raw_classes):
        _check_keys(f"classes[{pos}]", c, _CLASS_KEYS)
        missing = {"rate_bps", "target_ber"} - set(c)
        if missing:
            raise ConfigurationError(f"classes[{pos}] missing key '{sorted(missing)[0]}'")
        c = dict(c)
        c.setdefault("index", pos + 1)
        classes.append(_build(f"classes[{pos}]", TrafficClass.from_ber, c))
    if len({c.index for c in classes}) != len(classes):
        raise ConfigurationError("class indices must be distinct")
    if len({c.outage_target for c in classes}) != 1:
        raise ConfigurationError("all classes must share one outage_target")
    if not (isinstance(ref, int) and 0 <= ref < len(classes)):
        raise ConfigurationError(f"system.power_reference out of range: {ref!r}")

    policy = data.get("policy", {})
    _check_keys("policy", policy, _POLICY_KEYS)
    policy = _build("policy", CacPolicy, policy)

    sim = dict(data.get("sim", {}))
    _check_keys("sim", sim, _SIM_KEYS)
    seed = sim.pop("seed", None)
    for key in ("new_rates", "handoff_rates", "holding_times"):
        if key in sim and len(sim[key]) != len(classes):
            raise ConfigurationError(f"sim.{key} needs {len(classes)} entries")

    prop = data.get("propagation", {})
    _check_keys("propagation", prop, _PROP_KEYS)
    prop = _build("propagation", PropagationConfig, prop)

    ast = dict(data.get("ast", {}))
    _check_keys("ast", ast, _AST_KEYS)
    raw_nodes = ast.pop("nodes", [])
    sweep_node = ast.pop("sweep_node", None)
    proto = _build("ast", ProtocolConfig, ast)
    nodes = []
    for pos, row in enumerate(raw_nodes):
        if not isinstance(row, list) or len(row) != 4:
            raise ConfigurationError(f"ast.nodes[{pos}] must be [id, x, y, tx_power_dbm]")
        nodes.append(_build(f"ast.nodes[{pos}]", NodePosition, dict(zip(("id", "x", "y", "tx_power_dbm"), row))))

    return Scenario(cfg, classes, ref, policy, sim, seed, prop, proto, nodes, sweep_node, name)


def load_scenario(path) -> Scenario:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"{path}: {exc}") from None
    return parse_scenario(data, str(path))


def load_preset(name: str) -> Scenario:
    if name not in PRESETS:
        raise ConfigurationError(f"unknown preset {name!r} (available: {', '.join(PRESETS)})")
    text = resources.files("cacsinr").joinpath("presets", f"{name}.toml").read_text()
    return parse_scenario(tomllib.loads(text), name)
