"""Run configuration files.

A configuration is an INI-style file with flat sections::

    [material]   preset (patch|cantilever), law, remanent_strain, E0, P0, ...
    [geometry]   mode = point|fem; point: dim; fem: mesh = beam|square|file, ...
    [solver]     tol, max_iter, probe
    [schedule.1] steps and ramp targets; further segments [schedule.2], ...
    [output]     dir, curve, vtk, vtk_every, log

Numbers may carry a unit suffix (``1000 V/mm``, ``-200 N/mm^2``, ``2 mm``);
everything is converted to SI units at parse time.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field, fields
from pathlib import Path

from .constitutive import Law, MaterialParams, ModelKind, cantilever_params, patch_test_params
from .errors import ParseError, ValidationError
from .vi_core import DEFAULT_TOL, MAX_ITER, Schedule

UNITS = {
    "": 1.0, "-": 1.0,
    "V/m": 1.0, "V/mm": 1e3, "kV/mm": 1e6, "MV/m": 1e6,
    "Pa": 1.0, "N/m^2": 1.0, "N/mm^2": 1e6, "MPa": 1e6, "GPa": 1e9,
    "m": 1.0, "mm": 1e-3,
    "V": 1.0, "kV": 1e3,
    "N/m": 1.0, "N/mm": 1e3,
    "N/m^3": 1.0,
    "C/m^2": 1.0, "C/(V*m)": 1.0, "F/m": 1.0, "m/V": 1.0, "V*m/C": 1.0,
}

MATERIAL_FIELDS = ("E0", "P0", "S0", "m", "eps", "E_Y", "nu", "d31", "d33", "H0")
POINT_KEYS = ("E3", "T33")
FEM_KEYS = ("potential", "traction_x", "traction_y", "body_force_x", "body_force_y")
PRESETS = {"patch": patch_test_params, "cantilever": cantilever_params}
MESHES = ("beam", "square", "file")
_NUMBER = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(.*?)\s*$")


@dataclass
class OutputSpec:
    dir: str = "out"
    curve: str = "curve.csv"
    vtk: str = "fields"
    vtk_every: int = 1
    log: str = "iterations.csv"


@dataclass
class RunConfig:
    mode: str
    params: MaterialParams
    geometry: dict
    segments: list[tuple[int, dict]]
    tol: float = DEFAULT_TOL
    max_iter: int = MAX_ITER
    probe: bool = True
    output: OutputSpec = field(default_factory=OutputSpec)
    preset: str | None = None
    base_dir: str = "."

    def schedule(self) -> Schedule:
        return Schedule.ramps(self.segments)

    def mesh_path(self) -> Path:
        return Path(self.base_dir) / self.geometry["path"]


def parse_quantity(text: str, where: str = "value") -> float:
    match = _NUMBER.match(text)
    if not match:
        raise ValueError(f"{where}: not a number: {text!r}")
    number, unit = match.groups()
    if unit not in UNITS:
        raise ValueError(f"{where}: unknown unit {unit!r}")
    return float(number) * UNITS[unit]


def _line_of(lines: list[str], section: str, key: str | None) -> int | None:
    """1-based line of ``key`` inside ``section`` (or of the section header)."""
    current = None
    for no, raw in enumerate(lines, start=1):
        s = raw.strip()
        if s.startswith("[") and s.endswith("]"):
            current = s[1:-1].strip()
            if key is None and current == section:
                return no
            continue
        if current == section and key is not None and re.match(rf"^{re.escape(key)}\s*[=:]", s, re.IGNORECASE):
            return no
    return None


class _Reader:
    def __init__(self, cp: configparser.ConfigParser, lines: list[str]):
        self.cp = cp
        self.lines = lines

    def number(self, section, key, default=None, integer=False):
        if not self.cp.has_option(section, key):
            if default is None:
                raise ValidationError(key, f"missing in [{section}]")
            return default
        raw = self.cp.get(section, key)
        try:
            value = parse_quantity(raw, key)
        except ValueError as exc:
            raise ParseError(str(exc), _line_of(self.lines, section, key)) from None
        if integer:
            if value != int(value):
                raise ParseError(f"{key}: expected an integer, got {raw!r}", _line_of(self.lines, section, key))
            return int(value)
        return value

    def flag(self, section, key, default):
        if not self.cp.has_option(section, key):
            return default
        try:
            return self.cp.getboolean(section, key)
        except ValueError:
            raise ParseError(f"{key}: expected true/false", _line_of(self.lines, section, key)) from None

    def text(self, section, key, default=None):
        if not self.cp.has_option(section, key):
            if default is None:
                raise ValidationError(key, f"missing in [{section}]")
            return default
        return self.cp.get(section, key).strip()


def _read_material(r: _Reader) -> tuple[MaterialParams, str | None]:
    if not r.cp.has_section("material"):
        raise ValidationError("material", "section missing")
    preset = r.text("material", "preset", "").lower() or None
    if preset is not None and preset not in PRESETS:
        raise ValidationError("preset", f"unknown preset {preset!r}")
    law = r.text("material", "law", "saturating").lower()
    try:
        law = Law(law)
    except ValueError:
        raise ValidationError("law", f"unknown law {law!r}") from None
    remanent = r.flag("material", "remanent_strain", True)
    base = PRESETS[preset](law, remanent).as_dict() if preset else {}
    values = {}
    for name in MATERIAL_FIELDS:
        if r.cp.has_option("material", name):
            values[name] = r.number("material", name)
        elif name in base:
            values[name] = base[name]
        else:
            raise ValidationError(name, "missing in [material]")
    if r.cp.has_option("material", "reg_eps"):
        values["reg_eps"] = r.number("material", "reg_eps")
    elif preset:
        values["reg_eps"] = base["reg_eps"]
    else:
        values["reg_eps"] = values["P0"] * 1e-6
    known = set(MATERIAL_FIELDS) | {"reg_eps", "preset", "law", "remanent_strain"}
    for key in r.cp.options("material"):
        if key not in {k.lower() for k in known}:
            raise ValidationError(key, "unknown key in [material]")
    return MaterialParams(model=ModelKind(law, remanent), **values), preset


def _read_geometry(r: _Reader, base_dir: Path) -> tuple[str, dict]:
    if not r.cp.has_section("geometry"):
        raise ValidationError("geometry", "section missing")
    mode = r.text("geometry", "mode").lower()
    if mode == "point":
        dim = r.number("geometry", "dim", 3, integer=True)
        if dim not in (2, 3):
            raise ValidationError("dim", "must be 2 or 3")
        return mode, {"dim": dim}
    if mode != "fem":
        raise ValidationError("mode", f"expected point or fem, got {mode!r}")
    kind = r.text("geometry", "mesh").lower()
    if kind not in MESHES:
        raise ValidationError("mesh", f"expected one of {MESHES}")
    geo: dict = {"mesh": kind}
    if kind == "file":
        geo["path"] = r.text("geometry", "path")
        if not (base_dir / geo["path"]).is_file():
            raise ValidationError("path", f"mesh file {geo['path']!r} not found")
    elif kind == "beam":
        geo["length"] = r.number("geometry", "length")
        geo["height"] = r.number("geometry", "height")
        geo["nx"] = r.number("geometry", "nx", integer=True)
        geo["ny"] = r.number("geometry", "ny", integer=True)
    else:
        geo["side"] = r.number("geometry", "side")
        geo["n"] = r.number("geometry", "n", 1, integer=True)
    for key in ("length", "height", "side"):
        if key in geo and geo[key] <= 0:
            raise ValidationError(key, "must be positive")
    for key in ("nx", "ny", "n"):
        if key in geo and geo[key] < 1:
            raise ValidationError(key, "must be at least 1")
    return mode, geo


def _read_schedule(r: _Reader, mode: str) -> list[tuple[int, dict]]:
    numbered = []
    for name in r.cp.sections():
        if name.startswith("schedule."):
            suffix = name.split(".", 1)[1]
            if not suffix.isdigit():
                raise ParseError(f"bad schedule section [{name}]", _line_of(r.lines, name, None))
            numbered.append((int(suffix), name))
    if not numbered:
        raise ValidationError("schedule", "no [schedule.N] sections")
    numbered.sort()
    if [n for n, _ in numbered] != list(range(1, len(numbered) + 1)):
        raise ValidationError("schedule", "segments must be numbered 1, 2, 3, ...")
    allowed = POINT_KEYS if mode == "point" else FEM_KEYS
    lookup = {k.lower(): k for k in allowed}
    segments = []
    for _, name in numbered:
        steps = r.number(name, "steps", integer=True)
        if steps < 1:
            raise ValidationError("steps", f"must be at least 1 in [{name}]")
        targets = {}
        for key in r.cp.options(name):
            if key == "steps":
                continue
            if key not in lookup:
                raise ValidationError(key, f"not a {mode} load key (expected one of {allowed})")
            targets[lookup[key]] = r.number(name, key)
        segments.append((steps, targets))
    return segments


def parse_config_text(text: str, base_dir: str | Path = ".") -> RunConfig:
    lines = text.splitlines()
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str.lower
    try:
        cp.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ParseError("content before the first [section]", exc.lineno) from None
    except (configparser.DuplicateSectionError, configparser.DuplicateOptionError) as exc:
        raise ParseError(exc.message.split(":", 1)[-1].strip(), exc.lineno) from None
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] if exc.errors else None
        raise ParseError("malformed line", lineno) from None
    r = _Reader(cp, lines)
    base_dir = Path(base_dir)
    params, preset = _read_material(r)
    mode, geometry = _read_geometry(r, base_dir)
    segments = _read_schedule(r, mode)
    tol = r.number("solver", "tol", DEFAULT_TOL) if cp.has_section("solver") else DEFAULT_TOL
    max_iter = r.number("solver", "max_iter", MAX_ITER, integer=True) if cp.has_section("solver") else MAX_ITER
    probe = r.flag("solver", "probe", True) if cp.has_section("solver") else True
    if tol <= 0:
        raise ValidationError("tol", "must be positive")
    if max_iter < 1:
        raise ValidationError("max_iter", "must be at least 1")
    out = OutputSpec()
    if cp.has_section("output"):
        for f in fields(OutputSpec):
            if cp.has_option("output", f.name):
                if f.type in (int, "int"):
                    setattr(out, f.name, r.number("output", f.name, integer=True))
                else:
                    setattr(out, f.name, r.text("output", f.name))
        if out.vtk_every < 1:
            raise ValidationError("vtk_every", "must be at least 1")
    return RunConfig(mode, params, geometry, segments, tol, max_iter, probe, out, preset, str(base_dir))


def parse_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ValidationError("config", f"cannot read {path}: {exc.strerror}") from None
    return parse_config_text(text, path.parent)


def serialize_config(config: RunConfig) -> str:
    """Text form in SI units; parsing it gives back an equivalent config."""
    prm = config.params
    out = ["[material]", f"law = {prm.model.law.value}",
           f"remanent_strain = {'true' if prm.model.remanent_strain else 'false'}"]
    out += [f"{name} = {getattr(prm, name)!r}" for name in MATERIAL_FIELDS + ("reg_eps",)]
    out += ["", "[geometry]", f"mode = {config.mode}"]
    out += [f"{k} = {v!r}" if not isinstance(v, str) else f"{k} = {v}" for k, v in config.geometry.items()]
    out += ["", "[solver]", f"tol = {config.tol!r}", f"max_iter = {config.max_iter}",
            f"probe = {'true' if config.probe else 'false'}"]
    for i, (steps, targets) in enumerate(config.segments, start=1):
        out += ["", f"[schedule.{i}]", f"steps = {steps}"]
        out += [f"{k} = {float(v)!r}" for k, v in targets.items()]
    out += ["", "[output]"] + [f"{f.name} = {getattr(config.output, f.name)}" for f in fields(OutputSpec)]
    return "\n".join(out) + "\n"
