"""Experiment configuration: INI-style (``key = value`` under ``[section]``) or JSON.

INI layout::

    [sector]
    n = 12
    target_size = 57600          ; or radius_in_a = 400
    orientation = zigzag         ; zigzag | armchair
    perturbations = remove_edge_row:second, remove_tip_atoms:4

    [params]
    t = 2.8
    t_prime = 0.0
    boundary_t_scale = 1.0

    [analysis]
    windows = 0.02:0.2, 2.95:3.0
    analyses = nnsd, delta3
    unfold = polynomial          ; polynomial | dos
    degree = 6
    bin_width = 0.25
    L_max = 15
    seeds = 200

    [output]
    output_dir = out
    cache_dir = .sectorlab-cache

JSON uses the same sections as nested objects, with windows as ``[[lo, hi], ...]``
and perturbations as ``[{"kind": ..., "edge": ..., "count": ...}, ...]``.
"""

from __future__ import annotations

import configparser
import json
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from .hamiltonian import TBParams
from .lattice import LatticeError, Perturbation, SectorSpec
from .spectra import config_hash

ANALYSES = ("nnsd", "delta3", "lengths", "qb_match", "parity")
UNFOLD_METHODS = ("polynomial", "dos")
CACHE_ENV = "SECTORLAB_CACHE_DIR"
DEFAULT_CACHE = ".sectorlab-cache"


class ConfigError(ValueError):
    """Invalid configuration; ``field`` and ``line`` point at the offending entry when known."""

    def __init__(self, message: str, field: str = "", line: Optional[int] = None):
        self.field = field
        self.line = line
        where = field + (f" (line {line})" if line else "")
        super().__init__(f"{where}: {message}" if where else message)


@dataclass(frozen=True)
class ExperimentConfig:
    sector: SectorSpec
    params: TBParams = field(default_factory=TBParams)
    windows: tuple[tuple[float, float], ...] = ()
    analyses: tuple[str, ...] = ()
    unfold: str = "polynomial"
    degree: int = 6
    bin_width: float = 0.25
    L_max: float = 15.0
    seeds: int = 200
    output_dir: str = "out"
    cache_dir: Optional[str] = None

    def __post_init__(self):
        if not self.analyses:
            raise ConfigError("at least one analysis is required", "analysis.analyses")
        bad = [a for a in self.analyses if a not in ANALYSES]
        if bad:
            raise ConfigError(f"unknown analyses {bad}; choose from {list(ANALYSES)}", "analysis.analyses")
        if self.unfold not in UNFOLD_METHODS:
            raise ConfigError(f"unfold must be one of {list(UNFOLD_METHODS)}", "analysis.unfold")
        if not 1 <= self.degree <= 12:
            raise ConfigError("degree must lie in 1..12", "analysis.degree")
        if not self.windows:
            raise ConfigError("at least one energy window is required", "analysis.windows")
        bound = 3.0 + 6.0 * self.params.t_prime_over_t
        for lo, hi in self.windows:
            if not lo < hi:
                raise ConfigError(f"window [{lo}, {hi}] is empty", "analysis.windows")
            if lo < -bound - 1e-12 or hi > bound + 1e-12:
                raise ConfigError(f"window [{lo}, {hi}] leaves the band [-{bound:g}, {bound:g}]", "analysis.windows")
        if self.bin_width <= 0 or self.L_max <= 0 or self.seeds < 1:
            raise ConfigError("bin_width, L_max and seeds must be positive", "analysis")

    @property
    def spectrum_hash(self) -> str:
        """Keys cached spectra: lattice and hopping only."""
        return config_hash(self.sector.to_dict(), self.params.to_dict())

    @property
    def full_hash(self) -> str:
        return config_hash(self.to_dict())

    def resolved_cache_dir(self) -> Path:
        return Path(os.environ.get(CACHE_ENV) or self.cache_dir or DEFAULT_CACHE)

    def to_dict(self) -> dict[str, Any]:
        return {
            "sector": self.sector.to_dict(),
            "params": self.params.to_dict(),
            "analysis": {
                "windows": [list(w) for w in self.windows],
                "analyses": list(self.analyses),
                "unfold": self.unfold,
                "degree": self.degree,
                "bin_width": self.bin_width,
                "L_max": self.L_max,
                "seeds": self.seeds,
            },
            "output": {"output_dir": self.output_dir, "cache_dir": self.cache_dir},
        }

    def replace(self, **changes) -> "ExperimentConfig":
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        d.update(changes)
        return ExperimentConfig(**d)


# --- parsing ---------------------------------------------------------------------------

def _line_of(text: str, section: str, key: str) -> Optional[int]:
    current = None
    for i, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        m = re.match(r"\[(.+)\]", line)
        if m:
            current = m.group(1).strip().lower()
        elif current == section and re.match(rf"{re.escape(key)}\s*[=:]", line, re.IGNORECASE):
            return i
    return None


def _parse_windows(value) -> tuple[tuple[float, float], ...]:
    if isinstance(value, str):
        out = []
        for item in filter(None, (s.strip() for s in value.split(","))):
            lo, hi = item.split(":")
            out.append((float(lo), float(hi)))
        return tuple(out)
    return tuple((float(a), float(b)) for a, b in value)


def _parse_perturbations(value) -> tuple[Perturbation, ...]:
    if not value:
        return ()
    if isinstance(value, str):
        out = []
        for item in filter(None, (s.strip() for s in value.split(","))):
            kind, _, arg = item.partition(":")
            kind = kind.strip().lower()
            if kind == "remove_tip_atoms":
                out.append(Perturbation(kind, count=int(arg)))
            else:
                out.append(Perturbation(kind, edge=arg.strip().lower()))
        return tuple(out)
    return tuple(Perturbation(p["kind"], p.get("edge"), p.get("count")) for p in value)


def _split_list(value) -> tuple[str, ...]:
    if isinstance(value, str):
        return tuple(filter(None, (s.strip().lower() for s in value.split(","))))
    return tuple(str(v).lower() for v in value)


_FIELDS = {
    "sector": {"n": int, "target_size": int, "radius_in_a": float, "orientation": str, "perturbations": None},
    "params": {"t": float, "t_prime": float, "boundary_t_scale": float},
    "analysis": {
        "windows": None, "analyses": None, "unfold": str, "degree": int,
        "bin_width": float, "l_max": float, "seeds": int,
    },
    "output": {"output_dir": str, "cache_dir": str},
}


def from_mapping(data: dict, text: str = "") -> ExperimentConfig:
    """Build a config from nested ``{section: {key: value}}`` data (INI strings or JSON values)."""
    data = {str(k).lower(): {str(kk).lower(): vv for kk, vv in (v or {}).items() if vv is not None} for k, v in data.items()}
    for sec, entries in data.items():
        if sec not in _FIELDS:
            raise ConfigError(f"unknown section [{sec}]", sec, _line_of(text, sec, "") if text else None)
        for key in entries:
            if key not in _FIELDS[sec]:
                raise ConfigError("unknown key", f"{sec}.{key}", _line_of(text, sec, key))
    if "sector" not in data:
        raise ConfigError("missing [sector] section", "sector")

    def get(sec, key, default=None):
        if key not in data.get(sec, {}):
            return default
        raw = data[sec][key]
        conv = _FIELDS[sec][key]
        try:
            if key == "windows":
                return _parse_windows(raw)
            if key == "perturbations":
                return _parse_perturbations(raw)
            if key == "analyses":
                return _split_list(raw)
            return conv(raw.strip() if isinstance(raw, str) else raw)
        except (ValueError, TypeError, KeyError, LatticeError) as exc:
            raise ConfigError(f"cannot parse {raw!r}: {exc}", f"{sec}.{key}", _line_of(text, sec, key)) from None

    try:
        sector = SectorSpec(
            n=get("sector", "n"),
            target_size=get("sector", "target_size"),
            radius_in_a=get("sector", "radius_in_a"),
            orientation=(get("sector", "orientation", "zigzag") or "zigzag").lower(),
            perturbations=get("sector", "perturbations", ()),
        )
    except (LatticeError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc), "sector", _line_of(text, "sector", "n")) from None
    try:
        params = TBParams(
            t=get("params", "t", 2.8),
            t_prime=get("params", "t_prime", 0.0),
            boundary_t_scale=get("params", "boundary_t_scale", 1.0),
        )
    except ValueError as exc:
        raise ConfigError(str(exc), "params") from None
    try:
        return ExperimentConfig(
            sector=sector,
            params=params,
            windows=get("analysis", "windows", ()),
            analyses=get("analysis", "analyses", ()),
            unfold=(get("analysis", "unfold", "polynomial") or "polynomial").lower(),
            degree=get("analysis", "degree", 6),
            bin_width=get("analysis", "bin_width", 0.25),
            L_max=get("analysis", "l_max", 15.0),
            seeds=get("analysis", "seeds", 200),
            output_dir=get("output", "output_dir", "out"),
            cache_dir=get("output", "cache_dir"),
        )
    except ConfigError as exc:
        if exc.line is None and exc.field and "." in exc.field and text:
            sec, key = exc.field.split(".", 1)
            raise ConfigError(str(exc).split(": ", 1)[-1], exc.field, _line_of(text, sec, key)) from None
        raise


def loads(text: str, fmt: Optional[str] = None) -> ExperimentConfig:
    if fmt is None:
        fmt = "json" if text.lstrip().startswith("{") else "ini"
    if fmt == "json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(exc.msg, "json", exc.lineno) from None
        return from_mapping(data)
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    parser.optionxform = str.lower
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc).splitlines()[0], "ini", getattr(exc, "lineno", None)) from None
    return from_mapping({s: dict(parser[s]) for s in parser.sections()}, text)


def load(path: Path | str) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", str(path)) from None
    return loads(text, "json" if path.suffix.lower() == ".json" else None)
