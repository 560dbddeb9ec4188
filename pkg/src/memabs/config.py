"""Experiment configuration: dataclass, INI-style file schema (versioned),
and profiles.

File schema (version 1), parsed with configparser; matrix/vector values are
JSON literals::

    [schema]
    version = 1

    [system]
    kind = linear_gaussian          ; or "rotation"
    A = [[0.995, 0.005], [0.0, 0.98]]
    m_w = [0.0, 0.0]
    sigma_w = [[0.07, 0.0], [0.0, 0.07]]
    m_0 = [-0.4, -0.4]
    sigma_0 = [[0.3, 0.0], [0.0, 0.3]]
    ; rotation systems instead take:  step = 1.5707963, noise_width = 0.3141592

    [partition]
    dimension = 2
    subintervals = 3
    lo = -1.0
    hi = 1.0

    [experiment]
    memories = [1, 2, 3]
    horizon = 100
    trace_length = 100000
    initial_samples = 100000
    tv_samples = 10000
    seed = 0
"""

from __future__ import annotations

import configparser
import json
import math
from dataclasses import dataclass, replace
from typing import Optional

from .partition import Partition, grid_partition
from .systems import StochasticSystem, make_linear_gaussian_system, make_rotation_system

SCHEMA_VERSION = 1

# Fast profile for CI runs.
CI_PROFILE = {"trace_length": 20_000, "initial_samples": 20_000,
              "tv_samples": 2_000, "horizon": 40}


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one experiment run."""

    system_kind: str = "linear_gaussian"
    system_params: Optional[dict] = None
    partition_dimension: int = 2
    partition_subintervals: int = 3
    partition_lo: float = -1.0
    partition_hi: float = 1.0
    memories: tuple[int, ...] = (1, 2, 3)
    horizon: int = 100
    trace_length: int = 100_000
    initial_samples: int = 100_000
    tv_samples: int = 10_000
    seed: int = 0
    output_path: Optional[str] = None

    def __post_init__(self):
        if not self.memories:
            raise ValueError("memories must be nonempty")
        if any(ell < 1 for ell in self.memories):
            raise ValueError("memories must be positive")
        for name in ("horizon", "trace_length", "initial_samples", "tv_samples"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.system_kind not in ("linear_gaussian", "rotation"):
            raise ValueError(f"unknown system kind {self.system_kind!r}")

    def with_profile(self, profile: str) -> "ExperimentConfig":
        if profile == "paper":
            return self
        if profile == "ci":
            return replace(self, **CI_PROFILE)
        raise ValueError(f"unknown profile {profile!r}")

    def build_system(self) -> StochasticSystem:
        params = self.system_params or {}
        if self.system_kind == "rotation":
            return make_rotation_system(
                step=params.get("step", math.pi / 2),
                noise_width=params.get("noise_width", math.pi / 10),
            )
        if params:
            return make_linear_gaussian_system(
                A=params["A"], m_w=params["m_w"], Sigma_w=params["sigma_w"],
                m_0=params["m_0"], Sigma_0=params["sigma_0"],
            )
        from .systems import make_demo_linear_system

        return make_demo_linear_system()

    def build_partition(self, subintervals: Optional[int] = None) -> Partition:
        return grid_partition(
            d=self.partition_dimension,
            p=subintervals if subintervals is not None else self.partition_subintervals,
            lo=self.partition_lo,
            hi=self.partition_hi,
        )


def default_config() -> ExperimentConfig:
    """Bundled 2-d linear benchmark at full sampling budgets."""
    return ExperimentConfig()


def _parse_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw.strip()


def load_config(path) -> ExperimentConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    parser.optionxform = str  # matrix keys like "A" are case-sensitive
    with open(path, "r", encoding="utf-8") as fh:
        parser.read_file(fh)
    version = int(parser.get("schema", "version", fallback="1"))
    if version != SCHEMA_VERSION:
        raise ValueError(f"unsupported config schema version {version}")

    kwargs: dict = {}
    if parser.has_section("system"):
        sys_items = {k: _parse_value(v) for k, v in parser.items("system")}
        kwargs["system_kind"] = sys_items.pop("kind", "linear_gaussian")
        if sys_items:
            kwargs["system_params"] = sys_items
    if parser.has_section("partition"):
        part = {k: _parse_value(v) for k, v in parser.items("partition")}
        if "dimension" in part:
            kwargs["partition_dimension"] = int(part["dimension"])
        if "subintervals" in part:
            kwargs["partition_subintervals"] = int(part["subintervals"])
        if "lo" in part:
            kwargs["partition_lo"] = float(part["lo"])
        if "hi" in part:
            kwargs["partition_hi"] = float(part["hi"])
    if parser.has_section("experiment"):
        exp = {k: _parse_value(v) for k, v in parser.items("experiment")}
        if "memories" in exp:
            kwargs["memories"] = tuple(int(m) for m in exp["memories"])
        for name in ("horizon", "trace_length", "initial_samples", "tv_samples", "seed"):
            if name in exp:
                kwargs[name] = int(exp[name])
        if "output_path" in exp:
            kwargs["output_path"] = str(exp["output_path"])
    return ExperimentConfig(**kwargs)
