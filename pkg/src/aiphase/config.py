"""Scenario files.

A scenario is a TOML document with six tables; units are part of every key
name. Unknown tables or keys are errors, so a misspelt key can never fall
back silently to a default.

.. code-block:: toml

    [atom]
    mass_kg = 1.443e-25

    [laser]
    k_per_m = 1.61e7
    alpha_rad_per_s2 = 0.0            # or kg_minus_alpha_rad_per_s2
    detuning0_rad_per_s = 0.0         # optional

    [geometry]
    T_s = 0.5
    tau_s = 5e-5
    tau_select_s = 1e-4               # optional; sets the velocity spread

    [initial]                         # optional table
    z0_m = 0.0
    v0_m_per_s = 0.0

    [potential]
    g_m_per_s2 = 9.81
    gamma_per_s2 = 3e-6               # optional
    perturbation_poly = [0.0, 0.0]    # J/m^n, optional
    # perturbation_file = "v.txt"     # two columns z_m V_J, optional

    [pulses]                          # optional table
    shape = "rect"                    # rect | gauss | file
    ideal = true
    # file = "pulse.txt"              # two columns t_s Omega_rad_per_s
    # area_scale = 1.0                # rect only, when ideal = false
"""
from __future__ import annotations

import sys
from dataclasses import dataclass
from pathlib import Path

from .model import (AtomSpecies, InitialKinematics, LaserDrive, QuadraticPotential, Scenario,
                    velocity_spread_from_selection)
from .perturbation import PolynomialPotential, TabulatedPotential
from .pulses import PulseSequence, TabulatedShape

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    """Invalid scenario file."""


@dataclass(frozen=True)
class _Key:
    required: bool
    kind: type | tuple


_NUM = (int, float)
SCHEMA: dict[str, dict[str, _Key]] = {
    "atom": {"mass_kg": _Key(True, _NUM)},
    "laser": {
        "k_per_m": _Key(True, _NUM),
        "alpha_rad_per_s2": _Key(False, _NUM),
        "kg_minus_alpha_rad_per_s2": _Key(False, _NUM),
        "detuning0_rad_per_s": _Key(False, _NUM),
    },
    "geometry": {
        "T_s": _Key(True, _NUM),
        "tau_s": _Key(True, _NUM),
        "tau_select_s": _Key(False, _NUM),
    },
    "initial": {"z0_m": _Key(False, _NUM), "v0_m_per_s": _Key(False, _NUM)},
    "potential": {
        "g_m_per_s2": _Key(True, _NUM),
        "gamma_per_s2": _Key(False, _NUM),
        "perturbation_poly": _Key(False, list),
        "perturbation_file": _Key(False, str),
    },
    "pulses": {
        "shape": _Key(False, str),
        "ideal": _Key(False, bool),
        "file": _Key(False, str),
        "area_scale": _Key(False, _NUM),
    },
}
REQUIRED_TABLES = ("atom", "laser", "geometry", "potential")


def _check(doc: dict) -> None:
    for table in doc:
        if table not in SCHEMA:
            raise ConfigError(f"unknown table [{table}]")
        if not isinstance(doc[table], dict):
            raise ConfigError(f"[{table}] must be a table")
    for table, keys in SCHEMA.items():
        body = doc.get(table, {})
        for key, value in body.items():
            if key not in keys:
                raise ConfigError(f"unknown key {table}.{key}")
            spec = keys[key]
            # bool is an int subclass; keep numbers and flags apart
            if isinstance(value, bool) and spec.kind is not bool:
                raise ConfigError(f"{table}.{key} must be a number, got {value!r}")
            if not isinstance(value, spec.kind):
                raise ConfigError(f"{table}.{key} has the wrong type ({type(value).__name__})")
    for table in REQUIRED_TABLES:
        if table not in doc:
            raise ConfigError(f"missing table [{table}]")
    for table, keys in SCHEMA.items():
        for key, spec in keys.items():
            if spec.required and key not in doc.get(table, {}):
                raise ConfigError(f"missing key {table}.{key}")
    laser = doc["laser"]
    if ("alpha_rad_per_s2" in laser) == ("kg_minus_alpha_rad_per_s2" in laser):
        raise ConfigError("give exactly one of laser.alpha_rad_per_s2 and "
                          "laser.kg_minus_alpha_rad_per_s2")
    pot = doc["potential"]
    if "perturbation_poly" in pot and "perturbation_file" in pot:
        raise ConfigError("give at most one of potential.perturbation_poly and "
                          "potential.perturbation_file")
    for i, c in enumerate(pot.get("perturbation_poly", [])):
        if isinstance(c, bool) or not isinstance(c, _NUM):
            raise ConfigError(f"potential.perturbation_poly[{i}] must be a number")


def parse(text: str, base: Path | None = None) -> Scenario:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"TOML syntax error: {exc}") from None
    _check(doc)
    return _build(doc, Path(".") if base is None else base)


def load(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse(text, path.parent)


def _build(doc: dict, base: Path) -> Scenario:
    laser_d, geo, pot_d = doc["laser"], doc["geometry"], doc["potential"]
    ini, pulses = doc.get("initial", {}), doc.get("pulses", {})
    try:
        atom = AtomSpecies(float(doc["atom"]["mass_kg"]))
        alpha = laser_d.get("alpha_rad_per_s2")
        resid = laser_d.get("kg_minus_alpha_rad_per_s2")
        laser = LaserDrive(float(laser_d["k_per_m"]),
                           alpha=None if alpha is None else float(alpha),
                           detuning0=float(laser_d.get("detuning0_rad_per_s", 0.0)),
                           kg_minus_alpha=None if resid is None else float(resid))
        tau_sel = geo.get("tau_select_s")
        sigma_v = 0.0 if tau_sel is None else velocity_spread_from_selection(laser.k, tau_sel)
        kin = InitialKinematics(float(ini.get("z0_m", 0.0)), float(ini.get("v0_m_per_s", 0.0)),
                                sigma_v, None if tau_sel is None else float(tau_sel))
        pot = QuadraticPotential(float(pot_d["g_m_per_s2"]), float(pot_d.get("gamma_per_s2", 0.0)))
        seq = _sequence(float(geo["T_s"]), float(geo["tau_s"]), pulses, base)
        perturbation = None
        if "perturbation_poly" in pot_d:
            perturbation = PolynomialPotential([float(c) for c in pot_d["perturbation_poly"]])
        elif "perturbation_file" in pot_d:
            perturbation = TabulatedPotential.from_file(base / pot_d["perturbation_file"])
        return Scenario(atom, laser, kin, pot, seq, perturbation)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _sequence(T: float, tau: float, pulses: dict, base: Path) -> PulseSequence:
    shape = pulses.get("shape", "rect")
    ideal = pulses.get("ideal", True)
    scale = float(pulses.get("area_scale", 1.0))
    if "area_scale" in pulses and (shape != "rect" or ideal):
        raise ConfigError("pulses.area_scale applies to rect pulses with ideal = false")
    if "file" in pulses and shape != "file":
        raise ConfigError("pulses.file needs shape = \"file\"")
    if shape == "rect":
        return PulseSequence.rectangular(T, tau, scale)
    if shape == "gauss":
        if not ideal:
            raise ConfigError("gauss pulses are always normalised; use ideal = true")
        return PulseSequence.gaussian(T, tau) if tau > 0 else PulseSequence.rectangular(T, 0.0)
    if shape == "file":
        if "file" not in pulses:
            raise ConfigError("shape = \"file\" needs pulses.file")
        return PulseSequence.tabulated(T, tau, TabulatedShape.from_file(base / pulses["file"]),
                                       ideal=ideal)
    raise ConfigError(f"pulses.shape must be rect, gauss or file, got {shape!r}")
