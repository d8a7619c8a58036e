"""Run configuration files.

INI-style text, one ``key = value`` per line, grouped in ``[section]`` blocks;
``#`` and ``;`` start comments. Every section and key is checked against a
fixed schema and anything unknown is rejected. See ``docs/formats.md``.
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from .dsf import DsfModel, make_model
from .errors import ConfigError
from .statmech import GasParameters, Statistics
from .tmatrix import TMatrixModel, make_tmatrix

__all__ = ["RunConfig", "SCHEMA", "load_config", "parse_config"]

CONFIG_VERSION = 1


def _float(text):
    value = float(text)
    if not math.isfinite(value):
        raise ValueError("not a finite number")
    return value


def _int(text):
    return int(text)


def _str(text):
    return text.strip()


def _floats(text):
    return [_float(item) for item in text.replace(",", " ").split()]


# section -> key -> (parser, default); a default of None means "not set"
SCHEMA = {
    "gas": {
        "m": (_float, 1.0),
        "M": (_float, 100.0),
        "beta": (_float, None),
        "temperature": (_float, None),
        "statistics": (_str, "mb"),
        "n": (_float, None),
        "z": (_float, None),
        "hbar": (_float, 1.0),
    },
    "tmatrix": {
        "model": (_str, "constant"),
        "t0": (_float, 1.0),
        "qc": (_float, None),
    },
    "dsf": {
        "model": (_str, "free_exact"),
        "order": (_int, 3),
        "table": (_str, None),
        "q_min": (_float, 0.1),
        "q_max": (_float, 5.0),
        "n_q": (_int, 11),
        "E_min": (_float, -2.0),
        "E_max": (_float, 2.0),
        "n_E": (_int, 11),
    },
    "grid": {
        "kind": (_str, "gauss_legendre"),
        "nodes": (_int, 80),
        "widths": (_float, 7.0),
        "n_angular": (_int, 32),
        "q_max": (_float, None),
    },
    "evolve": {
        "mode": (_str, "pauli"),
        "dt": (_float, None),
        "steps": (_int, 1000),
        "monitor_every": (_int, 10),
        "record_every": (_int, 10),
        "initial_beta": (_float, None),
        "tolerance": (_float, 1e-6),
    },
    "output": {
        "directory": (_str, None),
    },
    "run": {
        "seed": (_int, 0),
    },
    "sweep": {
        "parameter": (_str, None),
        "values": (_floats, None),
        "command": (_str, "coeffs"),
        "workers": (_int, 1),
    },
}


def _key_line(text: str, section: str, key: str) -> int | None:
    current = None
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        header = re.match(r"\[(.+)\]", stripped)
        if header:
            current = header.group(1).strip()
        elif current == section and re.match(rf"{re.escape(key)}\s*[=:]", stripped):
            return lineno
    return None


def _section_line(text: str, section: str) -> int | None:
    for lineno, line in enumerate(text.splitlines(), 1):
        if line.strip() == f"[{section}]":
            return lineno
    return None


def _where(source, lineno):
    return f"{source}:{lineno}" if lineno else source


@dataclass
class RunConfig:
    """Typed view of a configuration file; unset keys carry schema defaults."""

    values: dict
    source: str = "<config>"
    explicit: dict = field(default_factory=dict)

    def __getitem__(self, section):
        return self.values[section]

    def get(self, section, key):
        return self.values[section][key]

    def with_override(self, dotted: str, value) -> RunConfig:
        """Copy with ``section.key`` set to ``value`` (used by parameter sweeps)."""
        section, _, key = dotted.partition(".")
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise ConfigError(f"unknown sweep parameter {dotted!r}")
        values = {name: dict(entries) for name, entries in self.values.items()}
        if SCHEMA[section][key][0] is _int:
            if float(value) != int(value):
                raise ConfigError(f"sweep value {value!r} for {dotted} must be an integer")
            value = int(value)
        values[section][key] = value
        explicit = {name: set(keys) for name, keys in self.explicit.items()}
        explicit.setdefault(section, set()).add(key)
        if section == "gas" and key in ("n", "z"):
            other = "z" if key == "n" else "n"
            values["gas"][other] = None
            explicit["gas"].discard(other)
        if section == "gas" and key in ("beta", "temperature"):
            other = "temperature" if key == "beta" else "beta"
            values["gas"][other] = None
            explicit["gas"].discard(other)
        return RunConfig(values, f"{self.source} [{dotted}={value!r}]", explicit)

    def beta(self) -> float:
        gas = self.values["gas"]
        if gas["beta"] is not None and gas["temperature"] is not None:
            raise ConfigError(f"{self.source}: give either gas.beta or gas.temperature, not both")
        if gas["temperature"] is not None:
            if not gas["temperature"] > 0:
                raise ConfigError(f"{self.source}: gas.temperature must be positive")
            return 1.0 / gas["temperature"]
        return 1.0 if gas["beta"] is None else gas["beta"]

    def gas_parameters(self) -> GasParameters:
        gas = self.values["gas"]
        n, z = gas["n"], gas["z"]
        if n is not None and z is not None:
            raise ConfigError(f"{self.source}: give either gas.n or gas.z, not both")
        if n is None and z is None:
            z = 0.01
        try:
            statistics = Statistics.parse(gas["statistics"])
        except ValueError as exc:
            raise ConfigError(f"{self.source}: gas.statistics: {exc}") from exc
        return GasParameters(m=gas["m"], M=gas["M"], beta=self.beta(), statistics=statistics,
                             n=n, z=z, hbar=gas["hbar"])

    def tmatrix(self) -> TMatrixModel:
        t = self.values["tmatrix"]
        return make_tmatrix(t["model"], t["t0"], t["qc"])

    def dsf_model(self, params: GasParameters) -> DsfModel:
        d = self.values["dsf"]
        return make_model(d["model"], params, order=d["order"], table=d["table"])


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    """Parse configuration text strictly.

    Raises
    ------
    ConfigError
        Syntax errors, unknown sections or keys, and values that do not parse,
        with the offending line where it can be located.
    """
    parser = configparser.ConfigParser(
        interpolation=None, strict=True, comment_prefixes=("#", ";"),
        inline_comment_prefixes=("#", ";"), empty_lines_in_values=False,
    )
    parser.optionxform = str  # keys are case sensitive (M vs m)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}".strip()) from exc

    values = {section: {key: default for key, (_, default) in keys.items()}
              for section, keys in SCHEMA.items()}
    explicit = {}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(
                f"{_where(source, _section_line(text, section))}: unknown section [{section}]"
                f" (known: {', '.join(SCHEMA)})"
            )
        explicit[section] = set()
        for key, raw in parser.items(section):
            lineno = _key_line(text, section, key)
            if key not in SCHEMA[section]:
                raise ConfigError(
                    f"{_where(source, lineno)}: unknown key {key!r} in [{section}]"
                    f" (known: {', '.join(SCHEMA[section])})"
                )
            convert = SCHEMA[section][key][0]
            try:
                values[section][key] = convert(raw)
            except ValueError as exc:
                raise ConfigError(
                    f"{_where(source, lineno)}: bad value {raw!r} for {section}.{key}: {exc}"
                ) from exc
            explicit[section].add(key)
    return RunConfig(values, source, explicit)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, str(path))
