"""Campaign configuration files (JSON or YAML, versioned)."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigurationError
from .pdn import RlcLadder
from .scenarios import ScenarioSpec, build_scenario_device, run_campaign
from .simulator import DeviceModel, SignaturePolicy
from .trace import ComplexTrace, FrequencyGrid, TraceBatch, from_db_deg

CONFIG_SCHEMA_VERSION = 1


def load_config(path) -> dict:
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".json":
        cfg = json.loads(text)
    else:
        cfg = yaml.safe_load(text)
    if not isinstance(cfg, dict):
        raise ConfigurationError(f"config {path} did not parse to a mapping")
    if cfg.get("schema_version") != CONFIG_SCHEMA_VERSION:
        raise ConfigurationError(f"unsupported config schema_version {cfg.get('schema_version')}")
    return cfg


def _policy_from(cfg: dict) -> SignaturePolicy:
    kwargs = {}
    for k in ("lobes_per_bit", "disjoint"):
        if k in cfg:
            kwargs[k] = cfg[k]
    for k in ("magnitude_db_range", "phase_deg_range", "bandwidth_fraction_range"):
        if k in cfg:
            kwargs[k] = tuple(cfg[k])
    return SignaturePolicy(**kwargs)


def _baseline_from(spec, grid: FrequencyGrid):
    if spec in (None, "default_pdn"):
        return RlcLadder.default_pdn()
    if isinstance(spec, dict) and "flat" in spec:
        flat = spec["flat"]
        value = from_db_deg(flat.get("magnitude_db", 0.0), flat.get("phase_deg", 0.0))
        return ComplexTrace(grid, np.full(grid.points, value, dtype=np.complex128))
    raise ConfigurationError(f"unsupported baseline spec {spec!r}")


def scenario_from_config(cfg: dict) -> ScenarioSpec:
    sc = dict(cfg.get("scenario") or {})
    if "kind" not in sc or "traces" not in sc:
        raise ConfigurationError("scenario needs at least 'kind' and 'traces'")
    return ScenarioSpec(**sc)


def device_from_config(cfg: dict) -> DeviceModel:
    grid = FrequencyGrid.from_dict(cfg["grid"])
    dev = dict(cfg.get("device") or {})
    spec = scenario_from_config(cfg)
    return build_scenario_device(
        grid,
        _baseline_from(dev.get("baseline"), grid),
        spec,
        policy=_policy_from(dev.get("signature_policy") or {}),
        device_seed=int(dev.get("seed", 0)),
        noise_sigma=dev.get("noise", "paper_like"),
    )


def run_config(cfg: dict) -> tuple[DeviceModel, TraceBatch]:
    """Build the device and run the configured campaign."""
    model = device_from_config(cfg)
    spec = scenario_from_config(cfg)
    return model, run_campaign(model, spec)
