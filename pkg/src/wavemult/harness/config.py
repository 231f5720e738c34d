"""INI run configuration: one section per subcommand, CLI flags override file values."""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field

from ..errors import ValidationError


def _float(s) -> float:
    try:
        return float(s)
    except (TypeError, ValueError):
        raise ValidationError(f"expected a number, got {s!r}") from None


def _int(s) -> int:
    try:
        return int(s)
    except (TypeError, ValueError):
        raise ValidationError(f"expected an integer, got {s!r}") from None


def _floats(s) -> list[float]:
    if isinstance(s, (list, tuple)):
        return [_float(x) for x in s]
    return [_float(x) for x in str(s).replace(",", " ").split()]


#: Accepted keys per section with their parsers and defaults.
SCHEMA = {
    "partition-check": {"n": (_int, 2), "j": (_int, 6), "trials": (_int, 100), "seed": (_int, 0)},
    "kernel-scan": {"n": (_int, 2), "jmin": (_int, 6), "jmax": (_int, 11), "p": (_floats, [1.0, 2.0, float("inf")]),
                    "plateau": (_int, 1)},
    "l1-probe": {"n": (_int, 2), "jmin": (_int, 3), "jmax": (_int, 8), "variant": (str, "highpass"),
                 "phase": (str, "euclidean")},
    "angular-check": {"jmin": (_int, 4), "jmax": (_int, 9), "sample": (_int, 8), "phase": (str, "euclidean")},
    "expand-symbol": {"n": (_int, 1), "m": (_float, -1.0), "j": (_int, 2), "k": (_int, 2), "radius": (_int, 0),
                      "points": (_int, 1000), "seed": (_int, 0)},
    "sharpness": {"case": (str, "1"), "n": (_int, 2), "p": (_float, 1.0), "q": (_float, 1.0), "jmin": (_int, 5),
                  "jmax": (_int, 8), "delta": (_float, 1.0), "delta_prime": (_float, 0.0), "draws": (_int, 64),
                  "seed": (_int, 0)},
    "upper-bound": {"n": (_int, 2), "p": (_float, 1.0), "q": (_float, float("inf")), "m": (_floats, [-1.0]),
                    "family": (str, "sigma_j"), "jmin": (_int, 5), "jmax": (_int, 8), "delta": (_float, 1.0),
                    "delta_prime": (_float, 0.25), "seed": (_int, 0)},
    "report": {"format": (str, "all")},
}

COMMANDS = tuple(SCHEMA)


@dataclass
class RunConfig:
    """Resolved settings of one invocation."""

    command: str
    settings: dict = field(default_factory=dict)
    out_dir: str | None = None

    def __getitem__(self, key):
        return self.settings[key]


def read_config_file(path) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None)
    with open(path, encoding="utf-8") as fh:
        cp.read_file(fh)
    for section in cp.sections():
        if section not in SCHEMA and section != "output":
            raise ValidationError(f"config file: unknown section [{section}]")
        allowed = {"dir"} if section == "output" else set(SCHEMA[section])
        unknown = set(cp[section]) - allowed
        if unknown:
            raise ValidationError(f"config file: unknown key(s) {sorted(unknown)} in [{section}]")
    return cp


def resolve(command: str, flags: dict, path=None) -> RunConfig:
    """Merge built-in defaults, the file section and non-``None`` CLI flags, in that order."""
    if command not in SCHEMA:
        raise ValidationError(f"unknown command {command!r}")
    schema = SCHEMA[command]
    settings = {k: v for k, (_, v) in schema.items()}
    out_dir = None
    if path is not None:
        cp = read_config_file(path)
        if cp.has_section(command):
            for k, v in cp[command].items():
                settings[k] = schema[k][0](v)
        if cp.has_section("output"):
            out_dir = cp["output"].get("dir")
    for k, v in flags.items():
        if v is None:
            continue
        if k not in schema:
            raise ValidationError(f"flag --{k} not accepted by {command}")
        settings[k] = schema[k][0](v)
    return RunConfig(command, settings, out_dir)
