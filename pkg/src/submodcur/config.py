"""Declarative experiment configuration (TOML in, resolved TOML echo out).

The environment variable ``SUBMODCUR_SEED`` overrides the seed field
(precedence: environment > file).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .objectives import KINDS, MI_KINDS
from .policy import ExplorationSchedule
from .training import TrainConfig

MODES = ("train", "simulate", "verify-theory", "bench-greedy")


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


@dataclass
class ExperimentConfig:
    mode: str
    seed: int
    out_dir: str
    data: dict = field(default_factory=dict)
    arms: list = field(default_factory=list)
    schedule: dict = field(default_factory=dict)
    trainer: dict = field(default_factory=dict)
    simulate: dict = field(default_factory=dict)
    verify: dict = field(default_factory=dict)
    bench: dict = field(default_factory=dict)

    def exploration_schedule(self) -> ExplorationSchedule:
        s = self.schedule
        try:
            return ExplorationSchedule(
                lambda_kind=s.get("lambda_kind", "constant"),
                pi_kind=s.get("pi_kind", "constant"),
                epsilon=float(s.get("epsilon", 0.5)),
                rate=float(s.get("rate", 1.0)),
                pi_value=float(s.get("pi", 1.5)),
                pi_table={int(k): float(v)
                          for k, v in s.get("pi_table", {}).items()},
            )
        except ValueError as exc:
            raise ConfigError(f"schedule: {exc}") from exc

    def train_config(self) -> TrainConfig:
        tr = self.trainer
        try:
            return TrainConfig(
                lr=float(tr.get("lr", 0.1)),
                lr_schedule=tr.get("lr_schedule", "constant"),
                budget_frac=float(tr.get("budget_frac", 0.3)),
                batch_size=int(tr.get("batch_size", 32)),
                epochs=int(tr.get("epochs", 5)),
                warm_start_epochs=int(tr.get("warm_start_epochs", 0)),
                val_points=int(tr.get("val_points", 2)),
                seed=self.seed,
                feedback=tr.get("feedback", "full"),
                hessian=tr.get("hessian", "identity"),
                fim_momentum=float(tr.get("fim_momentum", 0.1)),
                arch=tr.get("arch", "linear-softmax"),
                hidden=int(tr.get("hidden", 16)),
                selection=tr.get("selection", "online-submod"),
            )
        except ValueError as exc:
            raise ConfigError(f"trainer: {exc}") from exc

    def resolved(self) -> dict:
        return {
            "mode": self.mode,
            "seed": self.seed,
            "out_dir": self.out_dir,
            "data": self.data,
            "arms": self.arms,
            "schedule": self.schedule,
            "trainer": self.trainer,
            "simulate": self.simulate,
            "verify": self.verify,
            "bench": self.bench,
        }


def load_config(path, out_override=None, mode_override=None) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    with open(path, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"config parse error: {exc}") from exc
    mode = mode_override or raw.get("mode")
    if mode not in MODES:
        raise ConfigError(f"mode: must be one of {MODES}, got {mode!r}")
    seed = raw.get("seed", 0)
    env_seed = os.environ.get("SUBMODCUR_SEED")
    if env_seed is not None:
        try:
            seed = int(env_seed)
        except ValueError as exc:
            raise ConfigError("SUBMODCUR_SEED must be an integer") from exc
    out_dir = str(out_override or raw.get("out_dir", "out"))
    cfg = ExperimentConfig(
        mode=mode, seed=int(seed), out_dir=out_dir,
        data=raw.get("data", {}), arms=raw.get("arms", []),
        schedule=raw.get("schedule", {}), trainer=raw.get("trainer", {}),
        simulate=raw.get("simulate", {}), verify=raw.get("verify", {}),
        bench=raw.get("bench", {}),
    )
    _validate(cfg, base_dir=path.parent)
    return cfg


def _validate(cfg: ExperimentConfig, base_dir: Path) -> None:
    cfg.exploration_schedule()
    if cfg.mode == "train":
        cfg.train_config()
        if not cfg.arms and cfg.trainer.get("selection", "online-submod") == "online-submod":
            raise ConfigError("arms: list must be non-empty in train mode")
        for arm in cfg.arms:
            kind = arm.get("kind") if isinstance(arm, dict) else arm
            if kind not in KINDS:
                raise ConfigError(f"arms.kind: unknown arm kind {kind!r}")
            if kind in MI_KINDS and isinstance(arm, dict) \
                    and float(arm.get("eta_mi", 1.0)) < 0.0:
                raise ConfigError("arms.eta_mi: must be >= 0")
        data = cfg.data
        if "synthetic" in data:
            syn = data["synthetic"]
            if int(syn.get("n_train", 0)) < 1 or int(syn.get("n_val", 0)) < 1:
                raise ConfigError("data.synthetic: n_train and n_val must be >= 1")
        else:
            for key in ("train", "val"):
                if key not in data:
                    raise ConfigError(f"data.{key}: required for train mode")
                p = Path(data[key])
                if not p.is_absolute():
                    p = base_dir / p
                if not p.exists():
                    raise ConfigError(f"data.{key}: path does not exist: {p}")
                data[key] = str(p)
    elif cfg.mode == "simulate":
        sim = cfg.simulate
        if int(sim.get("n_arms", 5)) < 1:
            raise ConfigError("simulate.n_arms: must be >= 1")
        if float(sim.get("gap", 0.2)) < 0.0:
            raise ConfigError("simulate.gap: must be >= 0")
        if int(sim.get("horizon", 10000)) < 1 or int(sim.get("runs", 100)) < 1:
            raise ConfigError("simulate.horizon/runs: must be >= 1")
    elif cfg.mode == "bench-greedy":
        sizes = cfg.bench.get("sizes", [64, 256, 1024])
        if any(int(n) < 1 or int(n) > 8192 for n in sizes):
            raise ConfigError("bench.sizes: entries must lie in [1, 8192]")


def _toml_scalar(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        out = repr(value)
        return out if ("." in out or "e" in out or "inf" in out or "nan" in out) \
            else out + ".0"
    if isinstance(value, str):
        escaped = value.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    if isinstance(value, list):
        return "[" + ", ".join(_toml_scalar(v) for v in value) + "]"
    raise TypeError(f"cannot serialize {type(value)} to TOML")


def dump_toml(data: dict) -> str:
    """Minimal TOML emitter for the resolved-config echo."""
    lines = []
    tables = []
    for key, value in data.items():
        if isinstance(value, dict):
            tables.append((key, value, False))
        elif isinstance(value, list) and value and isinstance(value[0], dict):
            tables.append((key, value, True))
        else:
            lines.append(f"{key} = {_toml_scalar(value)}")
    for key, value, is_array in tables:
        if is_array:
            for item in value:
                lines.append("")
                lines.append(f"[[{key}]]")
                lines.extend(dump_toml(item).splitlines())
        else:
            lines.append("")
            lines.append(f"[{key}]")
            for k, v in value.items():
                if isinstance(v, dict):
                    lines.append(f"{k} = " + "{" + ", ".join(
                        f"{kk} = {_toml_scalar(vv)}" for kk, vv in v.items()) + "}")
                else:
                    lines.append(f"{k} = {_toml_scalar(v)}")
    return "\n".join(lines) + "\n"


def write_echo(cfg: ExperimentConfig, out_dir: Path) -> Path:
    echo = out_dir / "config.echo"
    echo.write_text(dump_toml(cfg.resolved()), encoding="utf-8")
    return echo
