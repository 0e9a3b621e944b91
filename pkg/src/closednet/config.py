"""Experiment configuration files (JSON) and the bundled scenario set."""

from __future__ import annotations

import dataclasses
import json
from importlib import resources
from pathlib import Path
from typing import Any, Optional

from .des import DISCIPLINES, SimConfig, uniform_grid
from .model import NetworkSpec

CHECKS = ("fluid", "simulate", "theorem1", "corollary2", "corollary5", "crossings", "occupancy")
REQUIRED = {
    "theorem1": ("t", "levels"),
    "corollary2": ("t",),
    "corollary5": ("t1", "t2"),
    "occupancy": ("times",),
}


class ConfigParseError(ValueError):
    """Malformed JSON or a structurally broken config (exit code 2)."""


class ConfigError(ValueError):
    """Well-formed config with inconsistent content (exit code 1)."""


@dataclasses.dataclass(frozen=True)
class Analysis:
    check: str
    params: dict

    def times(self) -> list[float]:
        keys = {"theorem1": ("t",), "corollary2": ("t",), "corollary5": ("t1", "t2")}
        if self.check == "occupancy":
            return [float(x) for x in self.params["times"]]
        return [float(self.params[k]) for k in keys.get(self.check, ())]


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    name: str
    network: NetworkSpec
    horizon: float
    seed: int
    n_reps: int
    record_levels: int
    discipline: str
    t_max: float
    points: int
    analyses: tuple
    output_dir: str = "out"
    description: str = ""

    @property
    def grid(self) -> tuple:
        return uniform_grid(self.t_max, self.points)

    def sim_config(self, keep_records: bool = True, keep_driver: bool = False) -> SimConfig:
        return SimConfig(self.network, self.horizon, self.grid, self.seed, self.record_levels,
                         self.discipline, keep_records, keep_driver)

    def analysis(self, check: str) -> Optional[Analysis]:
        for a in self.analyses:
            if a.check == check:
                return a
        return None

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "description": self.description,
            "network": self.network.to_dict(),
            "sim": {"horizon": self.horizon, "seed": self.seed, "n_reps": self.n_reps,
                    "record_levels": self.record_levels, "discipline": self.discipline},
            "grid": {"t_max": self.t_max, "points": self.points},
            "analyses": [{"check": a.check, **a.params} for a in self.analyses],
            "output_dir": self.output_dir,
        }


def _analysis(item: Any, where: str) -> Analysis:
    if isinstance(item, str):
        item = {"check": item}
    if not isinstance(item, dict) or "check" not in item:
        raise ConfigParseError(f"{where}: expected a check name or an object with 'check'")
    check = item["check"]
    if check not in CHECKS:
        raise ConfigError(f"{where}: unknown check {check!r} (known: {', '.join(CHECKS)})")
    params = {k: v for k, v in item.items() if k != "check"}
    missing = [k for k in REQUIRED.get(check, ()) if k not in params]
    if missing:
        raise ConfigError(f"{where}: check {check!r} needs {', '.join(missing)}")
    return Analysis(check, params)


def config_from_dict(d: dict) -> ExperimentConfig:
    if not isinstance(d, dict):
        raise ConfigParseError("top level must be a JSON object")
    try:
        network = NetworkSpec.from_dict(d["network"])
    except KeyError as exc:
        raise ConfigParseError(f"network: missing key {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigParseError(f"network: {exc}") from None
    sim = d.get("sim", {})
    grid = d.get("grid", {})
    try:
        horizon = float(sim.get("horizon", grid.get("t_max", 5.0)))
        cfg = ExperimentConfig(
            name=str(d.get("name", "experiment")),
            network=network,
            horizon=horizon,
            seed=int(sim.get("seed", 0)),
            n_reps=int(sim.get("n_reps", 1)),
            record_levels=int(sim.get("record_levels", 10)),
            discipline=str(sim.get("discipline", "fifo")),
            t_max=float(grid.get("t_max", horizon)),
            points=int(grid.get("points", 51)),
            analyses=tuple(_analysis(a, f"analyses[{n}]") for n, a in enumerate(d.get("analyses", []))),
            output_dir=str(d.get("output_dir", "out")),
            description=str(d.get("description", "")),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, (ConfigError, ConfigParseError)):
            raise
        raise ConfigParseError(str(exc)) from None
    _check_consistency(cfg)
    return cfg


def _check_consistency(cfg: ExperimentConfig) -> None:
    if cfg.discipline not in DISCIPLINES:
        raise ConfigError(f"sim.discipline must be one of {sorted(DISCIPLINES)}")
    if cfg.n_reps < 1:
        raise ConfigError("sim.n_reps must be >= 1")
    if cfg.points < 2 or cfg.t_max <= 0:
        raise ConfigError("grid needs t_max > 0 and at least 2 points")
    if cfg.t_max > cfg.horizon:
        raise ConfigError("grid.t_max exceeds sim.horizon")
    grid = cfg.grid
    for a in cfg.analyses:
        for t in a.times():
            if not any(abs(t - g) <= 1e-9 for g in grid):
                raise ConfigError(f"check {a.check!r}: t = {t} is not on the sample grid")
        for s in a.params.get("stations", []):
            if not 1 <= int(s) < cfg.network.k:
                raise ConfigError(f"check {a.check!r}: station {s} is not a non-bottleneck client")
        if a.check == "theorem1" and int(a.params["levels"]) > cfg.record_levels - 1:
            raise ConfigError("theorem1 levels must be below sim.record_levels")


def load_config(path) -> ExperimentConfig:
    """Read a config file; JSON syntax errors carry line and column."""
    text = Path(path).read_text()
    if not text.strip():
        raise ConfigParseError(f"{path}: empty file")
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return config_from_dict(d)


def bundled_names() -> list[str]:
    root = resources.files("closednet") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def bundled_path(name: str) -> Path:
    return Path(str(resources.files("closednet") / "scenarios" / f"{name}.json"))


def bundled(name: str) -> ExperimentConfig:
    return load_config(bundled_path(name))
