"""Sectioned ``key = value`` workbench configuration.

Lines are ``[section]`` headers, ``key = value`` entries, ``#`` comments or
blanks. Values are SI numbers (scientific notation allowed) optionally
followed by a unit with an SI prefix, e.g. ``485e-6``, ``485 uH``,
``50 kHz``. A unit must match the key's dimension. Serialization writes
the canonical form, so a canonical file round-trips byte for byte.
"""
from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field, replace
from importlib import resources

from .converter import ConverterParams, OperatingPoint, voltage_transfer
from .errors import (ConfigError, ConfigSyntaxError, MissingSection, NonPositiveValue,
                     UnitViolation, UnknownKey)
from .planner import PlantSpec, Shading
from .sim.transient import SimSettings


@dataclass(frozen=True)
class Key:
    kind: type               # float, int, bool or str
    unit: str = ""           # SI unit symbol, "" for dimensionless
    default: object = None   # None: required when the section is present
    positive: bool = False   # strictly positive
    choices: tuple = ()


_F = float
SCHEMA = {
    "converter": {
        "n": Key(_F, "", None, True),
        "f_sw": Key(_F, "Hz", None, True),
        "l": Key(_F, "H", None, True),
        "l_m": Key(_F, "H", None, True),
        "l_kpri": Key(_F, "H", 0.0),
        "l_ksec": Key(_F, "H", 0.0),
        "c_d": Key(_F, "F", None, True),
        "c_o": Key(_F, "F", None, True),
        "c_oss": Key(_F, "F", 0.0),
        "r_dson": Key(_F, "Ohm", 0.0),
        "v_f1": Key(_F, "V", 0.0),
        "v_f2": Key(_F, "V", 0.0),
        "v_fd": Key(_F, "V", 0.0),
        "r_pri": Key(_F, "Ohm", 0.0),
        "r_sec": Key(_F, "Ohm", 0.0),
        "r_l_dc": Key(_F, "Ohm", 0.0),
    },
    "operating-point": {
        "v_i": Key(_F, "V", None, True),
        "d": Key(_F, "", None, True),
        "p_o": Key(_F, "W", 0.0),
        "i_string": Key(_F, "A", 0.0),
        "r_load": Key(_F, "Ohm", 0.0),
        "reset_model": Key(str, "", "circuit", choices=("circuit", "paper")),
    },
    "plant": {
        "p_plant": Key(_F, "W", None, True),
        "v_string": Key(_F, "V", None, True),
        "p_mpp": Key(_F, "W", None, True),
        "v_mpp": Key(_F, "V", None, True),
        "panels_required": Key(int, "", 0),
        "extra_panels": Key(int, "", 6),
        "panels_per_string_min": Key(int, "", 5, True),
        "panels_per_string_max": Key(int, "", 60, True),
    },
    "scenario": {
        "shaded_fraction": Key(_F, "", 0.0),
        "shaded_v_mpp": Key(_F, "V", 0.0),
        "shaded_p_mpp": Key(_F, "W", 0.0),
        "integer_panels": Key(bool, "", False),
        "d_max": Key(_F, "", 0.75, True),
        "tolerance": Key(_F, "", 0.02),
        "n_step": Key(_F, "", 0.25, True),
    },
    "simulation": {
        "steps_per_period": Key(int, "", 2000, True),
        "max_events": Key(int, "", 10_000, True),
        "diode_drops": Key(bool, "", False),
        "periods": Key(int, "", 200, True),
        "dt_max": Key(_F, "s", 0.0),
        "tol": Key(_F, "", 1e-6, True),
        "max_periods": Key(int, "", 5000, True),
    },
    "sweep": {
        "f_min": Key(_F, "Hz", 10.0, True),
        "f_max": Key(_F, "Hz", 12.5e3, True),
        "points": Key(int, "", 10, True),
        "amplitude": Key(_F, "", 0.0),
        "min_window": Key(int, "", 500, True),
    },
}
REQUIRED = ("converter",)
# at least one of these names the work to do
PAYLOAD = ("operating-point", "scenario", "plant")

_PREFIX = {"p": 1e-12, "n": 1e-9, "u": 1e-6, "µ": 1e-6, "μ": 1e-6, "m": 1e-3,
           "": 1.0, "k": 1e3, "M": 1e6, "G": 1e9}
_UNIT_ALIASES = {"ohm": "Ohm", "Ohm": "Ohm", "Ω": "Ohm"}
_NUMBER = re.compile(r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")
_KEY = re.compile(r"[a-z][a-z0-9_]*")
_SECTION = re.compile(r"\[([a-z][a-z0-9_-]*)\]")


def _split_unit(token: str):
    """``'uH' -> (1e-6, 'H')``; ``(None, token)`` when no known unit matches."""
    for base in ("Hz", "Ohm", "ohm", "Ω", "H", "F", "V", "A", "W", "s"):
        if token.endswith(base):
            prefix = token[: -len(base)]
            if prefix in _PREFIX:
                return _PREFIX[prefix], _UNIT_ALIASES.get(base, base)
    return None, token


@dataclass(frozen=True)
class Entry:
    key: str
    raw: str
    value: object
    line: int
    comment: str = ""


@dataclass(frozen=True)
class Line:
    kind: str                # "blank", "comment", "section", "entry"
    text: str = ""
    entry: Entry | None = None


@dataclass(frozen=True)
class WorkbenchConfig:
    """Parsed document: ordered lines plus typed values per section."""
    lines: tuple
    values: dict = field(default_factory=dict)

    def section(self, name) -> dict:
        """Typed values with defaults filled in; raises if the section is absent."""
        if name not in self.values:
            raise MissingSection([name])
        out = {k: spec.default for k, spec in SCHEMA[name].items()}
        out.update(self.values[name])
        return out

    def has(self, name) -> bool:
        return name in self.values

    def override(self, section: str, key: str, value) -> "WorkbenchConfig":
        """Copy with one value replaced (command-line flags)."""
        if section not in SCHEMA:
            raise MissingSection([section], f"unknown section [{section}]")
        if key not in SCHEMA[section]:
            raise UnknownKey(key, section=section)
        raw = _format_value(value)
        val = _convert(SCHEMA[section][key], key, raw, None, 1)
        values = {s: dict(v) for s, v in self.values.items()}
        values.setdefault(section, {})[key] = val
        lines = list(self.lines)
        current = None
        replaced = False
        insert_at = None
        for i, ln in enumerate(lines):
            if ln.kind == "section":
                current = ln.text
            if current == section:
                insert_at = i + 1
                if ln.kind == "entry" and ln.entry.key == key:
                    lines[i] = replace(ln, entry=replace(ln.entry, raw=raw, value=val))
                    replaced = True
        if not replaced:
            new = Line("entry", entry=Entry(key, raw, val, 0))
            if insert_at is None:
                lines += [Line("blank"), Line("section", section), new]
            else:
                lines.insert(insert_at, new)
        return WorkbenchConfig(tuple(lines), values)

    def digest(self) -> str:
        return hashlib.sha256(serialize(self).encode()).hexdigest()[:16]

    # typed views ------------------------------------------------------

    def converter_params(self) -> ConverterParams:
        c = self.section("converter")
        kw = {f: c[f.lower()] for f in ConverterParams.__dataclass_fields__}
        return ConverterParams(**kw)

    def operating_point(self) -> OperatingPoint:
        o = self.section("operating-point")
        n = self.section("converter")["n"]
        given = [k for k in ("p_o", "i_string", "r_load") if o[k] > 0]
        if len(given) != 1:
            raise ConfigError("[operating-point] needs exactly one of p_o, i_string, r_load")
        if o["i_string"] > 0:
            return OperatingPoint.from_current(o["v_i"], o["d"], o["i_string"], n)
        if o["r_load"] > 0:
            V_o = voltage_transfer(o["v_i"], n, o["d"])
            return OperatingPoint.create(o["v_i"], o["d"], V_o ** 2 / o["r_load"], n)
        return OperatingPoint.create(o["v_i"], o["d"], o["p_o"], n)

    def plant_spec(self) -> PlantSpec:
        p = self.section("plant")
        return PlantSpec(p["p_plant"], p["v_string"], p["p_mpp"], p["v_mpp"],
                         p["panels_required"] or None)

    def shading(self) -> Shading:
        s = self.section("scenario") if self.has("scenario") else self.section_defaults("scenario")
        return Shading(s["shaded_fraction"], s["shaded_v_mpp"], s["shaded_p_mpp"],
                       s["integer_panels"])

    def sim_settings(self) -> SimSettings:
        s = self.section("simulation") if self.has("simulation") else self.section_defaults("simulation")
        return SimSettings(steps_per_period=s["steps_per_period"], max_events=s["max_events"],
                           diode_drops=s["diode_drops"])

    def get(self, section, key):
        """Value with the schema default when the section or key is absent."""
        if self.has(section):
            return self.section(section)[key]
        return self.section_defaults(section)[key]

    @staticmethod
    def section_defaults(name) -> dict:
        return {k: spec.default for k, spec in SCHEMA[name].items()}


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _convert(spec: Key, key, raw, line, col):
    if spec.kind is bool:
        if raw.lower() in ("true", "yes", "1"):
            return True
        if raw.lower() in ("false", "no", "0"):
            return False
        raise ConfigSyntaxError(f"{key}: expected true/false, got {raw!r}", line, col)
    if spec.kind is str:
        if spec.choices and raw not in spec.choices:
            raise ConfigError(f"{key}: expected one of {', '.join(spec.choices)}, got {raw!r}"
                              + (f" (line {line})" if line else ""))
        return raw
    m = _NUMBER.match(raw)
    if not m:
        raise ConfigSyntaxError(f"{key}: expected a number, got {raw!r}", line, col)
    number = float(m.group(0))
    unit = raw[m.end():].strip()
    if unit:
        scale, base = _split_unit(unit)
        if scale is None or base != spec.unit:
            raise UnitViolation(key, unit, spec.unit, line)
        number *= scale
    if spec.kind is int:
        if number != int(number):
            raise ConfigSyntaxError(f"{key}: expected an integer, got {raw!r}", line, col)
        number = int(number)
    if spec.positive and not number > 0:
        raise NonPositiveValue(key, number, line)
    if not spec.positive and number < 0:
        raise NonPositiveValue(key, number, line)
    return number


def parse_config(text: str) -> WorkbenchConfig:
    """Parse and validate a workbench document.

    Raises
    ------
    ConfigSyntaxError
        Malformed line, anchored by line and column.
    UnknownKey
        Key or section not in the schema.
    UnitViolation
        Unit suffix incompatible with the key.
    NonPositiveValue
        Negative value, or non-positive where a strictly positive one is needed.
    MissingSection
        Required section absent (an empty file lists all of them).
    """
    lines = []
    values = {}
    section = None
    seen_lines = {}
    for no, raw_line in enumerate(text.splitlines(), start=1):
        body, _, comment = raw_line.partition("#")
        stripped = body.strip()
        if not stripped:
            if comment or raw_line.lstrip().startswith("#"):
                lines.append(Line("comment", raw_line.strip()[1:].strip()))
            else:
                lines.append(Line("blank"))
            continue
        col = len(body) - len(body.lstrip()) + 1
        if stripped.startswith("["):
            m = _SECTION.fullmatch(stripped)
            if not m:
                raise ConfigSyntaxError("malformed section header", no, col)
            section = m.group(1)
            if section not in SCHEMA:
                raise UnknownKey(section, no)
            if section in values:
                raise ConfigSyntaxError(f"section [{section}] repeated", no, col)
            values[section] = {}
            lines.append(Line("section", section))
            continue
        if "=" not in stripped:
            raise ConfigSyntaxError("expected 'key = value'", no, col)
        key, _, raw = stripped.partition("=")
        key, raw = key.strip(), raw.strip()
        if section is None:
            raise ConfigSyntaxError("entry before any [section]", no, col)
        if not _KEY.fullmatch(key):
            raise ConfigSyntaxError(f"malformed key {key!r}", no, col)
        if key not in SCHEMA[section]:
            raise UnknownKey(key, no, section)
        if (section, key) in seen_lines:
            raise ConfigSyntaxError(f"key {key!r} repeated (first on line "
                                    f"{seen_lines[section, key]})", no, col)
        if not raw:
            raise ConfigSyntaxError(f"{key}: missing value", no, len(body.rstrip()) + 1)
        after = body[body.index("=") + 1:]
        value_col = body.index("=") + 2 + len(after) - len(after.lstrip())
        seen_lines[section, key] = no
        value = _convert(SCHEMA[section][key], key, raw, no, value_col)
        values[section][key] = value
        lines.append(Line("entry", entry=Entry(key, raw, value, no, comment.strip())))

    missing = [s for s in REQUIRED if s not in values]
    if missing or not any(s in values for s in PAYLOAD):
        need = list(missing)
        msg = None
        if not any(s in values for s in PAYLOAD):
            msg = ("missing required section(s): "
                   + ", ".join(f"[{s}]" for s in missing)
                   + ("; " if missing else "")
                   + "and at least one of " + ", ".join(f"[{s}]" for s in PAYLOAD))
            need += list(PAYLOAD)
        raise MissingSection(need, msg)
    for name, entries in values.items():
        for key, spec in SCHEMA[name].items():
            if spec.default is None and key not in entries:
                raise ConfigError(f"[{name}] is missing required key {key!r}")
    return WorkbenchConfig(tuple(lines), values)


def serialize(cfg: WorkbenchConfig) -> str:
    out = []
    for ln in cfg.lines:
        if ln.kind == "blank":
            out.append("")
        elif ln.kind == "comment":
            out.append(f"# {ln.text}" if ln.text else "#")
        elif ln.kind == "section":
            out.append(f"[{ln.text}]")
        else:
            e = ln.entry
            out.append(f"{e.key} = {e.raw}" + (f"  # {e.comment}" if e.comment else ""))
    return "\n".join(out) + "\n"


def load_config(path) -> WorkbenchConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def bundled_text(name: str = "prototype.cfg") -> str:
    return resources.files("afz").joinpath("data", name).read_text(encoding="utf-8")


def bundled_path(name: str = "prototype.cfg"):
    return resources.files("afz").joinpath("data", name)
