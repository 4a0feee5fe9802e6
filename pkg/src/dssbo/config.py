"""Experiment configuration: a sectioned INI file checked against a typed schema.

Unknown sections or keys, and values of the wrong type, raise
:class:`ConfigError` carrying a ``section.key`` path.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable

from .errors import ConfigError

ENVS = ("drone", "pursuit", "pursuit_het", "synthetic")
OPTIMIZERS = ("dss_gp_ucb", "gp_ucb", "random")


def _int_list(s: str) -> list[int]:
    return [int(v) for v in s.replace(",", " ").split()]


def _auto_float(s: str):
    return "auto" if s.strip().lower() == "auto" else float(s)


def _opt_int(s: str):
    return None if s.strip().lower() in ("", "auto", "none") else int(s)


def _bool(s: str) -> bool:
    key = s.strip().lower()
    if key in ("1", "true", "yes", "on"):
        return True
    if key in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _choice(*options) -> Callable[[str], str]:
    def parse(s: str) -> str:
        v = s.strip().lower()
        if v not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return v
    return parse


# section -> key -> (parser, default)
SCHEMA: dict[str, dict[str, tuple[Callable[[str], Any], Any]]] = {
    "experiment": {
        "env": (_choice(*ENVS), "synthetic"),
        "optimizer": (_choice(*OPTIMIZERS), "dss_gp_ucb"),
        "iterations": (int, 100),
        "batch_size": (int, 1),
        "seeds": (_int_list, [0]),
        "eval_repeats": (_opt_int, None),
        "output": (str, ""),
    },
    "synthetic": {
        "dim": (int, 10),
        "p_g": (float, 0.2),
        "noise": (float, 0.0),
        "hessian_noise": (float, 0.1),
        "hessian": (_choice("analytic", "fd"), "analytic"),
    },
    "drone": {
        "n_drones": (int, 3),
        "n_points": (int, 3),
        "epoch_len": (int, 150),
    },
    "pursuit": {
        "n_predators": (int, 3),
        "epoch_len": (int, 150),
    },
    "policy": {
        "hidden_layers": (int, 3),
        "hidden_width": (int, 4),
        "weight_range": (float, 2.0),
        "tau": (int, 2),
        "self_edges": (_bool, False),
    },
    "structure": {
        "T0": (_opt_int, None),
        "C1": (_opt_int, None),
        "c_h": (_auto_float, "auto"),
        "sigma_n": (_auto_float, "auto"),
        "edge_cap": (int, 1500),
        "delta1": (float, 0.1),
        "n_states": (int, 16),
        "fd_step": (float, 1e-3),
        "aggregate": (_choice("mean", "abs"), "mean"),
    },
    "kernel": {
        "family": (_choice("matern52", "rbf"), "matern52"),
        "lengthscale": (float, 0.2),
        "variance": (float, 1.0),
        "noise_var": (float, 1e-3),
        "refit_every": (int, 0),
    },
    "beta": {
        "mode": (_choice("practical", "theoretical"), "practical"),
        "delta": (float, 0.1),
        "a": (float, 1.0),
        "b": (float, 1.0),
        "r": (float, 1.0),
    },
    "acquisition": {
        "n_random": (int, 256),
        "n_keep": (int, 8),
        "n_rounds": (int, 50),
    },
}


@dataclass
class ExperimentConfig:
    values: dict = field(default_factory=dict)
    source: str = ""

    def __getitem__(self, path: str):
        section, key = path.split(".")
        return self.values[section][key]

    def get(self, section: str) -> dict:
        return self.values[section]

    @property
    def env(self) -> str:
        return self["experiment.env"]

    @property
    def optimizer(self) -> str:
        return self["experiment.optimizer"]

    @property
    def T(self) -> int:
        return self["experiment.iterations"]

    @property
    def seeds(self) -> list[int]:
        return list(self["experiment.seeds"])

    @property
    def batch_size(self) -> int:
        return self["experiment.batch_size"]

    @property
    def eval_repeats(self) -> int:
        r = self["experiment.eval_repeats"]
        if r is not None:
            return r
        return 1 if self.env == "synthetic" else 3

    def override(self, path: str, value) -> "ExperimentConfig":
        section, key = path.split(".")
        vals = {s: dict(v) for s, v in self.values.items()}
        vals[section][key] = value
        cfg = replace(self, values=vals)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.T < 1:
            raise ConfigError("experiment.iterations", "must be positive")
        if self.batch_size < 1:
            raise ConfigError("experiment.batch_size", "must be >= 1")
        if not self.seeds:
            raise ConfigError("experiment.seeds", "at least one seed is required")
        if self["experiment.eval_repeats"] is not None and self["experiment.eval_repeats"] < 1:
            raise ConfigError("experiment.eval_repeats", "must be >= 1")
        for key in ("T0", "C1"):
            v = self[f"structure.{key}"]
            if v is not None and v < 1:
                raise ConfigError(f"structure.{key}", "must be >= 1")
        if self.optimizer == "dss_gp_ucb":
            T0 = self["structure.T0"]
            if T0 is not None and self.T <= T0:
                raise ConfigError("experiment.iterations", f"must exceed structure.T0={T0}")
        if self["structure.edge_cap"] < 1:
            raise ConfigError("structure.edge_cap", "must be >= 1")
        if not 0 < self["structure.delta1"] < 1:
            raise ConfigError("structure.delta1", "must lie in (0, 1)")
        if self["structure.n_states"] < 1:
            raise ConfigError("structure.n_states", "must be >= 1")
        if not 0 < self["kernel.variance"] <= 1:
            raise ConfigError("kernel.variance", "must lie in (0, 1]")
        if self["kernel.lengthscale"] <= 0:
            raise ConfigError("kernel.lengthscale", "must be positive")
        if self["kernel.noise_var"] < 0:
            raise ConfigError("kernel.noise_var", "must be non-negative")
        if self["policy.tau"] < 1:
            raise ConfigError("policy.tau", "must be >= 1")
        if not 0 < self["synthetic.p_g"] < 1:
            raise ConfigError("synthetic.p_g", "must lie in (0, 1)")

    def to_ini(self) -> str:
        lines = []
        for section, entries in self.values.items():
            lines.append(f"[{section}]")
            for key, val in entries.items():
                if isinstance(val, list):
                    val = ", ".join(str(v) for v in val)
                elif val is None:
                    val = "auto"
                elif isinstance(val, bool):
                    val = str(val).lower()
                lines.append(f"{key} = {val}")
            lines.append("")
        return "\n".join(lines)


def defaults() -> ExperimentConfig:
    return ExperimentConfig({s: {k: d for k, (_, d) in keys.items()} for s, keys in SCHEMA.items()})


def parse_config(text: str, source: str = "<string>") -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",))
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(source, f"malformed config: {exc}") from exc
    cfg = defaults()
    cfg.source = source
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(section, "unknown section")
        for key, raw in parser.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"{section}.{key}", "unknown key")
            fn = SCHEMA[section][key][0]
            try:
                cfg.values[section][key] = fn(raw)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{section}.{key}", f"invalid value {raw!r}: {exc}") from exc
    cfg.validate()
    return cfg


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(str(p), f"cannot read config: {exc.strerror}") from exc
    return parse_config(text, str(p))
