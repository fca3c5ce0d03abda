"""Experiment configuration: JSON parsing, defaults and validation."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

from .measures import GAUSSIAN, Family, family_from_dict

PHI_ZERO = "phi_zero"
GAUSSIAN_ORACLE = "gaussian_oracle"
LONG_RUN = "long_run"


class ConfigError(ValueError):
    """Invalid or incomplete experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description with defaults filled in.

    ``initialization`` is either ``"phi_zero"`` or a dict
    ``{"psi0": {"nodes": [...], "values": [...]}}``.
    """

    marginal_mu: dict
    marginal_nu: dict
    T: float
    n_nodes: int = 1024
    max_iters: int = 30
    stop_tol: float = 1e-12
    fp_tol: float = 1e-10
    tail_budget: float = 1e-12
    initialization: str | dict = PHI_ZERO
    reference: str = GAUSSIAN_ORACLE
    output_path: str = "eotlab_out"
    seed: int = 0
    n_cases: int = 100

    @property
    def family_mu(self) -> Family:
        return family_from_dict(self.marginal_mu)

    @property
    def family_nu(self) -> Family:
        return family_from_dict(self.marginal_nu)

    @property
    def both_gaussian(self) -> bool:
        return self.marginal_mu["family"] == GAUSSIAN and self.marginal_nu["family"] == GAUSSIAN

    def to_dict(self) -> dict:
        return asdict(self)


_ALIASES = {"mu": "marginal_mu", "nu": "marginal_nu", "tail_mass_budget": "tail_budget"}
_FIELDS = set(ExperimentConfig.__dataclass_fields__)


def _family_desc(d) -> dict:
    if isinstance(d, str):
        d = {"family": d}
    if not isinstance(d, dict) or "family" not in d:
        raise ConfigError("marginal descriptors need a 'family' key")
    try:
        family_from_dict(d)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad marginal {d!r}: {exc}") from exc
    return dict(d)


def parse_config(source: str | Path | dict) -> ExperimentConfig:
    """Parse a config from a path, a JSON string or a dict.

    Raises
    ------
    ConfigError
        On malformed JSON, unknown or missing keys and invalid values.
    """
    if isinstance(source, dict):
        raw = dict(source)
    else:
        text = str(source)
        path = Path(text)
        if not text.lstrip().startswith("{") and path.exists():
            text = path.read_text()
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    data = {}
    for k, v in raw.items():
        key = _ALIASES.get(k, k)
        if key not in _FIELDS:
            raise ConfigError(f"unknown config key {k!r}")
        data[key] = v
    for req in ("marginal_mu", "marginal_nu", "T"):
        if req not in data:
            raise ConfigError(f"missing required key {req!r}")
    data["marginal_mu"] = _family_desc(data["marginal_mu"])
    data["marginal_nu"] = _family_desc(data["marginal_nu"])
    both_gauss = data["marginal_mu"]["family"] == GAUSSIAN and data["marginal_nu"]["family"] == GAUSSIAN
    data.setdefault("reference", GAUSSIAN_ORACLE if both_gauss else LONG_RUN)
    try:
        cfg = ExperimentConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig) -> None:
    if not (isinstance(cfg.T, (int, float)) and math.isfinite(cfg.T) and cfg.T > 0):
        raise ConfigError("T must be a positive number")
    for name in ("stop_tol", "fp_tol", "tail_budget"):
        v = getattr(cfg, name)
        if not (isinstance(v, (int, float)) and v > 0):
            raise ConfigError(f"{name} must be positive")
    for name, low in (("max_iters", 1), ("n_nodes", 16), ("n_cases", 1)):
        v = getattr(cfg, name)
        if not (isinstance(v, int) and v >= low):
            raise ConfigError(f"{name} must be an integer >= {low}")
    if cfg.reference not in (GAUSSIAN_ORACLE, LONG_RUN):
        raise ConfigError(f"reference must be {GAUSSIAN_ORACLE!r} or {LONG_RUN!r}")
    if cfg.reference == GAUSSIAN_ORACLE and not cfg.both_gaussian:
        raise ConfigError(
            "the Gaussian oracle reference needs both marginals Gaussian; use reference 'long_run' for other families"
        )
    init = cfg.initialization
    if init != PHI_ZERO:
        table = init.get("psi0") if isinstance(init, dict) else None
        if not (isinstance(table, dict) and "nodes" in table and "values" in table):
            raise ConfigError("initialization must be 'phi_zero' or {'psi0': {'nodes': [...], 'values': [...]}}")
        if len(table["nodes"]) != len(table["values"]) or len(table["nodes"]) < 2:
            raise ConfigError("psi0 table needs matching nodes and values, at least two")
