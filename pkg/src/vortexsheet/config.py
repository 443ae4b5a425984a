"""INI-style experiment configuration.

A configuration file holds ``key = value`` lines under the sections
``[problem]``, ``[numerics]`` and ``[experiment]``.  Every key is listed in
:data:`KEYS` with its type, default and meaning; unknown sections or keys
are rejected.  Lists are comma separated; ``none`` (or an empty value)
selects the automatic choice where one exists.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

from .errors import ConfigError
from .evolution import SolverConfig
from .experiments import ExperimentConfig
from .inequalities import SAMPLERS


def _optional(conv):
    def parse(text):
        return None if text.strip().lower() in ("", "none", "auto") else conv(text)
    parse.__name__ = f"optional {conv.__name__}"
    return parse


def _list(conv):
    def parse(text):
        items = [t.strip() for t in text.split(",") if t.strip()]
        return tuple(conv(t) for t in items)
    parse.__name__ = f"{conv.__name__} list"
    return parse


def _str(text):
    return text.strip()


_str.__name__ = "str"


@dataclass(frozen=True)
class Key:
    section: str
    parse: Callable[[str], Any]
    default: Any
    help: str


KEYS: dict[str, Key] = {
    # problem
    "mu": Key("problem", float, 1.0, "linear wave speed squared, mu > 0"),
    "delta": Key("problem", float, 0.1, "floor for the hyperbolicity margin mu - 2 phi_x"),
    "data_family": Key("problem", _str, "power", "mode weights of varphi0: power (k^-decay) or exp"),
    "amplitude": Key("problem", float, 0.01, "amplitude of varphi0"),
    "data_modes": Key("problem", int, 1, "number of cosine modes in varphi0"),
    "data_decay": Key("problem", float, 4.0, "decay exponent/rate of the mode weights"),
    "velocity_family": Key("problem", _str, "power", "varphi1: power (sine modes) or travelling"),
    "velocity_amplitude": Key("problem", float, 0.0, "amplitude of varphi1 for the power family"),
    # numerics
    "K": Key("numerics", int, 32, "Galerkin truncation degree"),
    "cfl": Key("numerics", float, 0.5, "CFL number for adaptive steps"),
    "dt": Key("numerics", _optional(float), None, "fixed time step (none = CFL rule)"),
    "T": Key("numerics", float, 1.0, "final time"),
    "save_stride": Key("numerics", int, 1, "record every n-th step"),
    "form": Key("numerics", _str, "C", "acceleration form A, B or C"),
    "C1": Key("numerics", float, 1.0, "constant in the default existence time"),
    "oversample": Key("numerics", int, 4, "grid oversampling for the margin check (>= 4)"),
    # experiment
    "s": Key("experiment", float, 3.0, "Sobolev index of the strong topology (>= 3)"),
    "R": Key("experiment", float, 1.0, "admissibility radius for the data"),
    "C2": Key("experiment", _optional(float), None, "a priori constant, monitored only"),
    "amp_scale": Key("experiment", float, 1.0, "perturbation amplitude a_n = amp_scale / n"),
    "mode_cap": Key("experiment", _optional(int), None, "perturbation mode k_n = min(n, mode_cap); none = K/2"),
    "smoothing": Key("experiment", _optional(float), None, "smoothing exponent of the perturbation; none = s"),
    "n_list": Key("experiment", _list(int), (2, 4, 8, 16), "perturbation indices"),
    "epsilon_list": Key("experiment", _list(float), (1e-1, 1e-2, 1e-3), "regularization levels"),
    "epsilon_prime_list": Key("experiment", _list(float), (1e-2, 1e-3, 1e-4), "targets of the eps' table"),
    "triangulate_n": Key("experiment", _optional(int), None, "n used by triangulate; none = first of n_list"),
    "K_list": Key("experiment", _list(int), (8, 16, 32), "resolutions of the resolution study"),
    "seed": Key("experiment", int, 0, "master seed for random inputs"),
    "samples": Key("experiment", int, 1000, "samples per level and parameter point"),
    "K_levels": Key("experiment", _list(int), (16, 32, 64), "resolutions of inequality campaigns"),
    "inequalities": Key("experiment", _list(_str), (), "campaigns to run; empty = all"),
    "equiv_samples": Key("experiment", int, 50, "random inputs for the form-equivalence check"),
    "illposed_a": Key("experiment", float, 1.0, "background amplitude of the ill-posedness probe"),
    "illposed_k_list": Key("experiment", _list(int), (8, 16, 32), "probe wavenumbers"),
    "illposed_T_short": Key("experiment", _optional(float), None, "probe horizon; none = growth capped at 1e6"),
    "output_dir": Key("experiment", _str, "runs", "directory for CSV and JSON outputs"),
}

SECTIONS = ("problem", "numerics", "experiment")
_SOLVER_KEYS = ("mu", "delta", "K", "cfl", "dt", "T", "save_stride", "form", "C1", "oversample")


def defaults() -> dict:
    return {name: key.default for name, key in KEYS.items()}


def build(values: dict) -> ExperimentConfig:
    """Assemble an ExperimentConfig from a flat ``{key: value}`` mapping."""
    unknown = set(values) - set(KEYS)
    if unknown:
        raise ConfigError(f"unknown keys: {', '.join(sorted(unknown))}")
    merged = {**defaults(), **values}
    for name in merged["inequalities"]:
        if name not in SAMPLERS:
            raise ConfigError(f"unknown inequality {name!r}")
    try:
        solver = SolverConfig(**{k: merged[k] for k in _SOLVER_KEYS}, s=merged["s"])
        rest = {k: v for k, v in merged.items() if k not in _SOLVER_KEYS}
        return ExperimentConfig(base=solver, **rest)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def parse_text(text: str) -> dict:
    """Parse configuration text into a flat, typed ``{key: value}`` mapping."""
    parser = configparser.ConfigParser(interpolation=None, default_section="__defaults__")
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed configuration: {exc}") from exc
    values = {}
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        for name, raw in parser.items(section):
            key = KEYS.get(name)
            if key is None:
                raise ConfigError(f"unknown key {name!r} in [{section}]")
            if key.section != section:
                raise ConfigError(f"key {name!r} belongs in [{key.section}], not [{section}]")
            try:
                value = key.parse(raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for {name!r}: {raw!r}") from exc
            if isinstance(value, float) and not math.isfinite(value):
                raise ConfigError(f"non-finite value for {name!r}")
            values[name] = value
    return values


def load(path: str | Path | None = None, overrides: dict | None = None) -> ExperimentConfig:
    values = parse_text(Path(path).read_text(encoding="utf-8")) if path else {}
    values.update(overrides or {})
    return build(values)


def parse_override(item: str) -> tuple[str, Any]:
    """``key=value`` (or ``section.key=value``) from the command line."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not of the form key=value")
    name, raw = (t.strip() for t in item.split("=", 1))
    name = name.split(".", 1)[-1]
    key = KEYS.get(name)
    if key is None:
        raise ConfigError(f"unknown key {name!r}")
    try:
        return name, key.parse(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {name!r}: {raw!r}") from exc


def _format(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, tuple):
        return ", ".join(str(v) for v in value)
    return str(value)


def default_text() -> str:
    """Commented configuration file listing every key with its default."""
    lines = []
    for section in SECTIONS:
        lines.append(f"[{section}]")
        for name, key in KEYS.items():
            if key.section == section:
                lines.append(f"# {key.help}")
                lines.append(f"{name} = {_format(key.default)}")
        lines.append("")
    return "\n".join(lines)
