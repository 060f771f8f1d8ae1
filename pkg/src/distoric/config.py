"""Run configuration files.

A run is described by one INI file. Section and key names follow the
hardware parameter table; unknown sections or keys are errors so that typos
never fall back silently to defaults. Example::

    [run]
    seed = 7
    workers = 1
    cache_dir = cache
    output_dir = results

    [hardware]
    column = 2            ; parameter column 1-4 of the reference table
    f_dec = 1             ; column 3 coherence scaling
    f_eta = 1             ; column 4 detection scaling

    [coherence]           ; optional overrides, any of the listed keys
    T2_link_n = 0.1

    [protocol]
    builtin = septimum    ; or: recipe = path/to/file.recipe, or: search = yes

    [ghz]
    t_ghz = heuristic     ; or a duration in seconds, or none
    p_th_estimate = 0.002
    probe_shots = 1000

    [superop]
    shots = 10000

    [sweep]
    model = protocol      ; protocol | phenomenological | identity
    p = 0.001 0.0015 0.002
    L = 8 12 16
    shots = 20000

    [fit]
    p_min = 0.001
    p_max = 0.003
    level = 0.95
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .noise import BellParams, CoherenceTimes, Hardware, NoiseParams, OperationTimes, table_one


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


SECTIONS = {
    "run": {"seed", "workers", "cache_dir", "output_dir"},
    "hardware": {"column", "f_dec", "f_eta", "n_dd", "decoherence", "noiseless_swap", "p_link",
                 "p_g", "p_m"},
    "bell": {f.name for f in fields(BellParams)} | {"lambda"},
    "times": {f.name for f in fields(OperationTimes)},
    "coherence": {f.name for f in fields(CoherenceTimes)},
    "protocol": {"builtin", "recipe", "search"},
    "search": {"p", "n_max", "k_max", "n_buffer", "shots", "stabilizer_type", "max_slots", "t_ghz", "top"},
    "ghz": {"t_ghz", "p_th_estimate", "probe_shots"},
    "superop": {"shots", "cadence"},
    "sweep": {"model", "p", "p_range", "L", "shots", "n_cycles", "order"},
    "fit": {"p_min", "p_max", "level"},
}

MODELS = ("protocol", "phenomenological", "identity")


@dataclass(frozen=True)
class HardwareSpec:
    """Hardware parameter set without the swept error probability."""

    base: Hardware

    def at(self, p: float | None) -> Hardware:
        """Parameter set with ``p_g = p_m = p`` (unchanged when ``p`` is None)."""
        return self.base if p is None else self.base.with_error_probability(p)


@dataclass(frozen=True)
class SearchSettings:
    n_max: int = 4
    k_max: int = 7
    n_buffer: int = 5
    shots: int = 100
    stabilizer_type: str = "X"
    max_slots: int | None = None
    t_ghz: float | None = None
    top: int = 5
    p: float | None = None  # error probability of gates and measurements during the search


@dataclass(frozen=True)
class ProtocolSource:
    kind: str  # builtin | recipe | search
    value: str = ""


@dataclass(frozen=True)
class GhzPolicy:
    mode: str  # explicit | heuristic | none
    t_ghz: float | None = None
    p_th_estimate: float | None = None
    probe_shots: int = 1000


@dataclass(frozen=True)
class SweepGrid:
    model: str
    p: tuple
    L: tuple
    shots: int
    n_cycles: int | None = None
    order: str = "ZZXX"


@dataclass(frozen=True)
class FitWindow:
    p_min: float = -math.inf
    p_max: float = math.inf
    level: float = 0.95

    def select(self, data):
        return [d for d in data if self.p_min <= d.p <= self.p_max]


@dataclass(frozen=True)
class RunConfig:
    path: Path
    seed: int
    workers: int
    cache_dir: Path
    output_dir: Path
    hardware: HardwareSpec
    protocol: ProtocolSource
    search: SearchSettings
    ghz: GhzPolicy
    superop_shots: int
    superop_cadence: int | None
    sweep: SweepGrid | None
    fit: FitWindow


# ---------------------------------------------------------------------------
# value parsing


def _number(section: str, key: str, text: str, kind=float):
    try:
        if kind is int:
            value = float(text)
            if value != int(value):
                raise ValueError
            return int(value)
        return float(text)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: expected {'an integer' if kind is int else 'a number'}, "
                          f"got {text!r}") from None


def _flag(section: str, key: str, text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "yes", "true", "on"):
        return True
    if low in ("0", "no", "false", "off"):
        return False
    raise ConfigError(f"[{section}] {key}: expected yes/no, got {text!r}")


def _optional(text: str) -> bool:
    return text.strip().lower() in ("", "none", "auto")


def _numbers(section: str, key: str, text: str, kind=float) -> tuple:
    out = tuple(_number(section, key, t, kind) for t in text.replace(",", " ").split())
    if not out:
        raise ConfigError(f"[{section}] {key}: empty list")
    return out


def _section(parser: configparser.ConfigParser, name: str) -> dict:
    return dict(parser[name]) if parser.has_section(name) else {}


def _check_keys(parser: configparser.ConfigParser) -> None:
    for name in parser.sections():
        if name not in SECTIONS:
            raise ConfigError(f"unknown section [{name}]; known: {', '.join(sorted(SECTIONS))}")
        unknown = set(parser[name]) - SECTIONS[name]
        if unknown:
            raise ConfigError(f"[{name}]: unknown key(s) {', '.join(sorted(unknown))}")


def _override(obj, section: str, values: dict, rename=None):
    if not values:
        return obj
    kw = {}
    types = {f.name: f.type for f in fields(obj)}
    for key, text in values.items():
        name = (rename or {}).get(key, key)
        if "str" in str(types[name]) and not text.replace(".", "", 1).isdigit():
            kw[name] = text.strip()
        elif _optional(text) and "None" in str(types[name]):
            kw[name] = None
        else:
            kw[name] = _number(section, key, text)
    try:
        return replace(obj, **kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}]: {exc}") from None


def _hardware(parser: configparser.ConfigParser) -> HardwareSpec:
    hw_sec = _section(parser, "hardware")
    column = _number("hardware", "column", hw_sec.get("column", "2"), int)
    f_dec = _number("hardware", "f_dec", hw_sec.get("f_dec", "1"))
    f_eta = _number("hardware", "f_eta", hw_sec.get("f_eta", "1"))
    try:
        base = table_one(column, f_dec=f_dec, f_eta=f_eta)
    except ValueError as exc:
        raise ConfigError(f"[hardware] {exc}") from None
    bell = _override(base.bell, "bell", _section(parser, "bell"), {"lambda": "lam"})
    times = _override(base.times, "times", _section(parser, "times"))
    coherence = _override(base.coherence, "coherence", _section(parser, "coherence"))
    noise = base.noise
    if "p_g" in hw_sec or "p_m" in hw_sec:
        noise = NoiseParams(_number("hardware", "p_g", hw_sec.get("p_g", str(noise.p_g))),
                            _number("hardware", "p_m", hw_sec.get("p_m", str(noise.p_m))))
    n_dd = base.n_dd
    if "n_dd" in hw_sec:
        n_dd = None if _optional(hw_sec["n_dd"]) else _number("hardware", "n_dd", hw_sec["n_dd"], int)
    elif any(parser.has_section(s) for s in ("bell", "times")):
        n_dd = None  # link parameters changed: re-derive the decoupling length
    p_link = None
    if "p_link" in hw_sec and not _optional(hw_sec["p_link"]):
        p_link = _number("hardware", "p_link", hw_sec["p_link"])
    try:
        hw = Hardware(bell, times, coherence, noise, n_dd=n_dd,
                      decoherence=_flag("hardware", "decoherence", hw_sec.get("decoherence", "yes")),
                      noiseless_swap=_flag("hardware", "noiseless_swap", hw_sec.get("noiseless_swap", "no")),
                      p_link_override=p_link)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[hardware] {exc}") from None
    return HardwareSpec(hw)


def _protocol(parser, root: Path) -> ProtocolSource:
    sec = _section(parser, "protocol")
    given = [k for k in ("builtin", "recipe", "search") if k in sec]
    if len(given) > 1:
        raise ConfigError(f"[protocol]: give exactly one of builtin, recipe, search (got {', '.join(given)})")
    if not given:
        return ProtocolSource("builtin", "plain")
    kind = given[0]
    if kind == "builtin":
        from .protocols.builtin import BUILTIN

        name = sec["builtin"].strip().lower()
        if name not in BUILTIN:
            raise ConfigError(f"[protocol] builtin: unknown protocol {name!r}; choose from {', '.join(BUILTIN)}")
        return ProtocolSource("builtin", name)
    if kind == "recipe":
        path = (root / sec["recipe"].strip()).resolve()
        if not path.is_file():
            raise ConfigError(f"[protocol] recipe: file {path} does not exist")
        return ProtocolSource("recipe", str(path))
    if not _flag("protocol", "search", sec["search"]):
        raise ConfigError("[protocol] search: set to yes or remove the key")
    return ProtocolSource("search")


def _search(parser) -> SearchSettings:
    sec = _section(parser, "search")
    out = SearchSettings()
    kw = {}
    for key in ("n_max", "k_max", "n_buffer", "shots", "top"):
        if key in sec:
            kw[key] = _number("search", key, sec[key], int)
    if "stabilizer_type" in sec:
        kw["stabilizer_type"] = sec["stabilizer_type"].strip().upper()
        if kw["stabilizer_type"] not in ("X", "Z"):
            raise ConfigError("[search] stabilizer_type: expected X or Z")
    if "max_slots" in sec:
        kw["max_slots"] = None if _optional(sec["max_slots"]) else _number("search", "max_slots", sec["max_slots"], int)
    if "p" in sec:
        kw["p"] = _number("search", "p", sec["p"])
    if "t_ghz" in sec:
        kw["t_ghz"] = None if _optional(sec["t_ghz"]) else _number("search", "t_ghz", sec["t_ghz"])
    return replace(out, **kw)


def _ghz(parser) -> GhzPolicy:
    sec = _section(parser, "ghz")
    text = sec.get("t_ghz", "none").strip().lower()
    probe = _number("ghz", "probe_shots", sec.get("probe_shots", "1000"), int)
    if probe < 1:
        raise ConfigError("[ghz] probe_shots must be positive")
    est = _number("ghz", "p_th_estimate", sec["p_th_estimate"]) if "p_th_estimate" in sec else None
    if text in ("none", ""):
        return GhzPolicy("none", probe_shots=probe)
    if text == "heuristic":
        return GhzPolicy("heuristic", p_th_estimate=est, probe_shots=probe)
    t = _number("ghz", "t_ghz", text)
    if t <= 0:
        raise ConfigError("[ghz] t_ghz must be positive")
    return GhzPolicy("explicit", t_ghz=t, probe_shots=probe)


def _sweep(parser) -> SweepGrid | None:
    if not parser.has_section("sweep"):
        return None
    sec = _section(parser, "sweep")
    model = sec.get("model", "protocol").strip().lower()
    if model not in MODELS:
        raise ConfigError(f"[sweep] model: expected one of {', '.join(MODELS)}")
    if ("p" in sec) == ("p_range" in sec):
        raise ConfigError("[sweep]: give exactly one of p and p_range")
    if "p" in sec:
        ps = _numbers("sweep", "p", sec["p"])
    else:
        lo, hi, n = _numbers("sweep", "p_range", sec["p_range"])
        if n < 1 or n != int(n):
            raise ConfigError("[sweep] p_range: expected 'start stop count'")
        ps = tuple(float(x) for x in np.linspace(lo, hi, int(n)))
    if any(not 0.0 <= p <= 1.0 for p in ps):
        raise ConfigError("[sweep] p: probabilities must lie in [0, 1]")
    Ls = _numbers("sweep", "L", sec.get("L", ""), int)
    if any(L < 2 or L % 2 for L in Ls):
        raise ConfigError("[sweep] L: lattice sizes must be even and at least 2")
    shots = _number("sweep", "shots", sec.get("shots", "1000"), int)
    if shots < 1:
        raise ConfigError("[sweep] shots must be positive")
    n_cycles = None
    if "n_cycles" in sec and not _optional(sec["n_cycles"]):
        n_cycles = _number("sweep", "n_cycles", sec["n_cycles"], int)
    order = sec.get("order", "ZZXX").strip().upper()
    if sorted(order) != ["X", "X", "Z", "Z"]:
        raise ConfigError("[sweep] order: expected two Z and two X batches, e.g. ZZXX")
    return SweepGrid(model, tuple(sorted(set(ps))), tuple(sorted(set(Ls))), shots, n_cycles, order)


def load_config(path) -> RunConfig:
    """Parse and validate a run configuration file.

    Raises
    ------
    ConfigError
        Unreadable file, unknown keys, malformed values or missing inputs.
    """
    path = Path(path)
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    parser.optionxform = str  # keys are case sensitive (T1_link_n, F_prep, ...)
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    _check_keys(parser)
    root = path.parent
    run = _section(parser, "run")
    seed = _number("run", "seed", run.get("seed", "0"), int)
    workers = _number("run", "workers", run.get("workers", "1"), int)
    if workers < 1:
        raise ConfigError("[run] workers must be positive")
    sup = _section(parser, "superop")
    shots = _number("superop", "shots", sup.get("shots", "10000"), int)
    if shots < 1:
        raise ConfigError("[superop] shots must be positive")
    cadence = _number("superop", "cadence", sup["cadence"], int) if "cadence" in sup else None
    fit = _section(parser, "fit")
    window = FitWindow(_number("fit", "p_min", fit.get("p_min", "-inf")),
                       _number("fit", "p_max", fit.get("p_max", "inf")),
                       _number("fit", "level", fit.get("level", "0.95")))
    if not 0 < window.level < 1:
        raise ConfigError("[fit] level must lie in (0, 1)")
    return RunConfig(
        path=path,
        seed=seed,
        workers=workers,
        cache_dir=(root / run.get("cache_dir", "cache")).resolve(),
        output_dir=(root / run.get("output_dir", "results")).resolve(),
        hardware=_hardware(parser),
        protocol=_protocol(parser, root),
        search=_search(parser),
        ghz=_ghz(parser),
        superop_shots=shots,
        superop_cadence=cadence,
        sweep=_sweep(parser),
        fit=window,
    )
