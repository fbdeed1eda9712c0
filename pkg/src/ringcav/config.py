"""JSON simulation configuration: validation, defaults and canonical form.

Frequencies are ordinary frequencies in Hz, times are in s and lengths in m.
Conversion to angular frequency happens only in the :class:`SimulationConfig`
builders (``medium``, ``geometry``, ``input_signal``).
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

from jsonschema import Draft202012Validator

from . import __version__
from .cavity import CavityGeometry, find_resonance, tune_cavity
from .dispersion import (
    HELIUM_LINE_OMEGA,
    TWO_PI,
    DetunedEIT,
    GainDoublet,
    Vacuum,
    calibrate_amplitude_from_absorption,
    calibrate_amplitude_from_group_delay,
)
from .exceptions import CavityError, ConfigError
from .timedomain import InputSignal

HELIUM_LINE_HZ = HELIUM_LINE_OMEGA / TWO_PI

_NUMBER = {"type": "number"}
_POSITIVE = {"type": "number", "exclusiveMinimum": 0}
_NON_NEGATIVE = {"type": "number", "minimum": 0}
_FRACTION = {"type": "number", "minimum": 0, "exclusiveMaximum": 1}


def _object(properties, required=()):
    return {
        "type": "object",
        "properties": properties,
        "required": list(required),
        "additionalProperties": False,
    }


TOP_SCHEMA = _object(
    {
        "geometry": _object(
            {
                "R": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "T": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "L_vac": _POSITIVE,
                "L_cell": _NON_NEGATIVE,
                "L_m": _POSITIVE,
                "extra_loss": _FRACTION,
                "tune": {"type": "boolean"},
            },
            required=("R", "T", "L_vac", "L_cell", "L_m"),
        ),
        "medium": {
            "type": "object",
            "properties": {"type": {"enum": ["vacuum", "gain_doublet", "detuned_eit"]}},
            "required": ["type"],
        },
        "drive": _object(
            {
                "detuning_hz": _NUMBER,
                "raman_detuning_hz": _NUMBER,
                "E0": {
                    "oneOf": [
                        _NUMBER,
                        {"type": "array", "items": _NUMBER, "minItems": 2, "maxItems": 2},
                    ]
                },
                "fall_time_s": _NON_NEGATIVE,
            }
        ),
        "numerics": _object(
            {
                "span_hz": _POSITIVE,
                "points": {"type": "integer", "minimum": 16},
                "search_points": {"type": "integer", "minimum": 10000},
                "search_span_hz": _POSITIVE,
                "peak_threshold_factor": _POSITIVE,
                "min_points_per_fwhm": {"type": "integer", "minimum": 2},
                "decay_times": _POSITIVE,
                "t_post_s": _POSITIVE,
            }
        ),
    },
    required=("geometry", "medium"),
)

MEDIUM_SCHEMAS = {
    "vacuum": _object({"type": {"const": "vacuum"}, "center_hz": _POSITIVE}, required=("type",)),
    "gain_doublet": _object(
        {
            "type": {"const": "gain_doublet"},
            "center_hz": _POSITIVE,
            "separation_hz": _POSITIVE,
            "fwhm_hz": _POSITIVE,
            "peak_gain": _FRACTION,
            "absorbing": {"type": "boolean"},
        },
        required=("type", "separation_hz", "fwhm_hz", "peak_gain"),
    ),
    "detuned_eit": _object(
        {
            "type": {"const": "detuned_eit"},
            "coupling_hz": _POSITIVE,
            "rabi_hz": _POSITIVE,
            "optical_detuning_hz": _NUMBER,
            "raman_decay_hz": _POSITIVE,
            "optical_decay_hz": _POSITIVE,
            "doppler_width_hz": _NON_NEGATIVE,
            "amplitude": _NON_NEGATIVE,
            "resonant_absorption": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
            "cell_group_delay_s": _NUMBER,
            "operating_point": {"oneOf": [_NUMBER, {"const": "absorption_max"}]},
        },
        required=("type", "rabi_hz", "optical_detuning_hz", "raman_decay_hz", "optical_decay_hz"),
    ),
}

EIT_STRENGTH_KEYS = ("amplitude", "resonant_absorption", "cell_group_delay_s")

GEOMETRY_DEFAULTS = {"extra_loss": 0.0, "tune": True}
DRIVE_DEFAULTS = {"detuning_hz": 0.0, "E0": 1.0, "fall_time_s": 0.0}
NUMERICS_DEFAULTS = {
    "points": 20001,
    "search_points": 10000,
    "peak_threshold_factor": 3.0,
    "min_points_per_fwhm": 8,
    "decay_times": 12.0,
}


def _pointer(path):
    return "".join("/" + str(p).replace("~", "~0").replace("/", "~1") for p in path)


def _schema_errors(validator, instance, prefix=()):
    out = []
    for err in validator.iter_errors(instance):
        path = list(prefix) + list(err.absolute_path)
        if err.validator == "additionalProperties":
            allowed = set(err.schema.get("properties", {}))
            for key in sorted(set(err.instance) - allowed):
                out.append((_pointer(path + [key]), "unknown key"))
        elif err.validator == "required":
            for key in err.validator_value:
                if key not in err.instance:
                    out.append((_pointer(path + [key]), "required field is missing"))
        else:
            out.append((_pointer(path), err.message))
    return out


def _resolve(data):
    """Validate ``data`` and return a deep copy with every default filled in."""
    errors = _schema_errors(Draft202012Validator(TOP_SCHEMA), data)
    medium = data.get("medium") if isinstance(data, dict) else None
    if isinstance(medium, dict) and medium.get("type") in MEDIUM_SCHEMAS:
        errors += _schema_errors(Draft202012Validator(MEDIUM_SCHEMAS[medium["type"]]), medium, ("medium",))
    if errors:
        raise ConfigError(sorted(set(errors)))

    out = copy.deepcopy(data)
    geometry = {**GEOMETRY_DEFAULTS, **out["geometry"]}
    given_drive = out.get("drive", {})
    drive = {**DRIVE_DEFAULTS, **given_drive}
    numerics = {**NUMERICS_DEFAULTS, **out.get("numerics", {})}
    medium = dict(out["medium"])

    if geometry["T"] > 1.0 - geometry["R"] + 1e-12:
        errors.append(("/geometry/T", f"T = {geometry['T']} exceeds 1 - R = {1.0 - geometry['R']}"))
    if geometry["L_m"] > geometry["L_vac"] + geometry["L_cell"]:
        errors.append(("/geometry/L_m", "L_m exceeds the round-trip length L_vac + L_cell"))
    kind = medium["type"]
    if kind != "vacuum" and geometry["L_cell"] <= 0:
        errors.append(("/geometry/L_cell", f"a {kind} medium needs L_cell > 0"))
    if kind in ("vacuum", "gain_doublet"):
        medium.setdefault("center_hz", HELIUM_LINE_HZ)
    if kind == "gain_doublet":
        medium.setdefault("absorbing", False)
        if medium["separation_hz"] >= medium["center_hz"]:
            errors.append(("/medium/separation_hz", "separation must be smaller than the centre frequency"))
    if kind == "detuned_eit":
        medium.setdefault("coupling_hz", HELIUM_LINE_HZ)
        medium.setdefault("operating_point", "absorption_max")
        if "raman_detuning_hz" in given_drive:
            del drive["detuning_hz"]
        given = [k for k in EIT_STRENGTH_KEYS if k in medium]
        if len(given) != 1:
            errors.append(("/medium", "exactly one of " + ", ".join(EIT_STRENGTH_KEYS) + " is required"))
    if "raman_detuning_hz" in given_drive:
        if kind != "detuned_eit":
            errors.append(("/drive/raman_detuning_hz", "only defined for a detuned_eit medium"))
        if "detuning_hz" in given_drive:
            errors.append(("/drive", "give either detuning_hz or raman_detuning_hz, not both"))
    if errors:
        raise ConfigError(errors)
    return {"geometry": geometry, "medium": medium, "drive": drive, "numerics": numerics}


def canonical_json(data):
    return json.dumps(data, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


@dataclass(frozen=True, eq=False)
class SimulationConfig:
    """A validated configuration with all defaults resolved."""

    data: dict

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError([("", "configuration must be a JSON object")])
        config = cls(_resolve(data))
        config._check_buildable()
        return config

    def __eq__(self, other):
        return isinstance(other, SimulationConfig) and self.canonical_json() == other.canonical_json()

    def __hash__(self):
        return hash(self.canonical_json())

    @property
    def geometry_block(self):
        return self.data["geometry"]

    @property
    def medium_block(self):
        return self.data["medium"]

    @property
    def drive_block(self):
        return self.data["drive"]

    @property
    def numerics(self):
        return self.data["numerics"]

    def canonical_json(self):
        return canonical_json(self.data)

    def config_hash(self):
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()

    def with_value(self, dotted_key, value):
        """Copy with one field replaced, e.g. ``with_value("medium.peak_gain", 0.2)``."""
        data = copy.deepcopy(self.data)
        node = data
        *parents, leaf = dotted_key.split(".")
        for key in parents:
            if key not in node or not isinstance(node[key], dict):
                raise ConfigError([("/" + "/".join(dotted_key.split(".")), "no such block")])
            node = node[key]
        node[leaf] = value
        return SimulationConfig.from_dict(data)

    # -- builders ------------------------------------------------------------
    def _check_buildable(self):
        try:
            self.raw_geometry
        except CavityError as exc:
            raise ConfigError([("/geometry", str(exc))]) from exc
        try:
            self.medium
        except CavityError as exc:
            raise ConfigError([("/medium", str(exc))]) from exc

    @cached_property
    def raw_geometry(self):
        g = self.geometry_block
        return CavityGeometry(g["R"], g["T"], g["L_vac"], g["L_cell"], g["L_m"], g["extra_loss"])

    @cached_property
    def medium(self):
        m = self.medium_block
        kind = m["type"]
        if kind == "vacuum":
            return Vacuum(TWO_PI * m["center_hz"])
        if kind == "gain_doublet":
            return GainDoublet(
                TWO_PI * m["center_hz"],
                TWO_PI * m["separation_hz"],
                TWO_PI * m["fwhm_hz"],
                m["peak_gain"],
                self.geometry_block["L_cell"],
                absorbing=m["absorbing"],
            )
        op = m["operating_point"]
        kwargs = dict(
            coupling_rabi=TWO_PI * m["rabi_hz"],
            optical_detuning=TWO_PI * m["optical_detuning_hz"],
            raman_decay=TWO_PI * m["raman_decay_hz"],
            optical_decay=TWO_PI * m["optical_decay_hz"],
            omega_coupling=TWO_PI * m["coupling_hz"],
            operating_detuning=None if op == "absorption_max" else TWO_PI * op,
        )
        if "doppler_width_hz" in m:
            kwargs["doppler_width"] = TWO_PI * m["doppler_width_hz"]
        model = DetunedEIT(amplitude=m.get("amplitude", 0.0), **kwargs)
        cell = self.geometry_block["L_cell"]
        at = model.operating_frequency - model.omega_coupling
        if "resonant_absorption" in m:
            model = calibrate_amplitude_from_absorption(model, m["resonant_absorption"], cell, at)
        elif "cell_group_delay_s" in m:
            model = calibrate_amplitude_from_group_delay(model, m["cell_group_delay_s"], cell, at)
        return model

    @cached_property
    def geometry(self):
        """Cavity geometry, locked to the medium's operating frequency when ``tune`` is set."""
        if self.geometry_block["tune"]:
            return tune_cavity(self.raw_geometry, self.medium)
        return self.raw_geometry

    @cached_property
    def principal_resonance(self):
        return find_resonance(self.geometry, self.medium, self.medium.operating_frequency)

    @property
    def drive_amplitude(self):
        e0 = self.drive_block["E0"]
        return complex(e0[0], e0[1]) if isinstance(e0, list) else complex(e0)

    def input_signal(self):
        d = self.drive_block
        if "raman_detuning_hz" in d:
            omega_l = self.medium.omega_coupling + TWO_PI * d["raman_detuning_hz"]
        else:
            omega_l = self.principal_resonance + TWO_PI * d["detuning_hz"]
        return InputSignal(self.drive_amplitude, omega_l, 0.0, d["fall_time_s"])

    def default_span_hz(self):
        if "span_hz" in self.numerics:
            return self.numerics["span_hz"]
        model = self.medium
        fsr_hz = self.geometry.fsr / TWO_PI
        if not math.isfinite(model.linewidth) or self.geometry_block["L_cell"] == 0:
            return 2.0 * fsr_hz
        span = 4.0 * (model.feature_halfwidth + 10.0 * model.linewidth) / TWO_PI
        span = max(span, 4.0 * abs(model.feature_center - self.principal_resonance) / TWO_PI)
        return min(span, fsr_hz)


def parse_config(path):
    """Read, validate and resolve a UTF-8 JSON configuration file."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigError([("", f"cannot read {path}: {exc}")]) from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([("", f"invalid JSON: {exc}")]) from exc
    return SimulationConfig.from_dict(data)


def load_fixture(name):
    """Parse one of the shipped example configurations (``vacuum``, ``fig3``, ``eit``)."""
    from importlib.resources import files

    resource = files("ringcav") / "fixtures" / f"{name}.json"
    return SimulationConfig.from_dict(json.loads(resource.read_text(encoding="utf-8")))


def metadata(config, **extra):
    """Header shared by every emitted file."""
    return {
        "tool": "ringcav",
        "version": __version__,
        "config_hash": config.config_hash(),
        "config": config.data,
        **extra,
    }
