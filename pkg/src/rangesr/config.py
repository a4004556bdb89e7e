"""Radar waveform configuration and scene truth descriptions."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

# exact SI value; docs quote the usual 3e8 round numbers (good to 0.07%)
C_LIGHT = 299_792_458.0


class ConfigError(ValueError):
    """Raised when a configuration value violates its contract."""


@dataclass(frozen=True)
class RadarConfig:
    """LFMCW waveform and uniform-linear-array geometry.

    Derived quantities are computed by :func:`make_radar_config`; construct
    through it so the invariants hold.
    """

    carrier_hz: float          # f_c
    bandwidth_hz: float        # B, swept per chirp
    chirp_s: float             # T, one modulation period
    sample_rate_hz: float      # 1 / fast-time sample interval
    n_elements: int            # L
    element_spacing_m: float   # d
    n_fast: int                # N = round(T * fs)
    chirp_rate_hz_per_s: float = field(default=0.0)   # gamma = B / T
    range_res_m: float = field(default=0.0)           # c / (2 B)
    wavelength_m: float = field(default=0.0)          # c / f_c

    @property
    def dt(self) -> float:
        """Fast-time sample interval (s)."""
        return 1.0 / self.sample_rate_hz

    def beat_freq(self, range_m: float) -> float:
        """Normalized fast-time beat frequency of a target at `range_m`."""
        return 2.0 * self.chirp_rate_hz_per_s * range_m / C_LIGHT * self.dt

    def range_of_freq(self, freq: float) -> float:
        """Inverse of :meth:`beat_freq`: range (m) of a normalized frequency."""
        return freq * C_LIGHT / (2.0 * self.chirp_rate_hz_per_s * self.dt)

    def doppler_freq(self, velocity_mps: float) -> float:
        """Normalized slow-time frequency of a radial velocity (cycles/chirp)."""
        return 2.0 * self.carrier_hz * velocity_mps / C_LIGHT * self.chirp_s


def make_radar_config(
    carrier_hz: float,
    bandwidth_hz: float,
    chirp_s: float,
    sample_rate_hz: float,
    n_elements: int,
    element_spacing_m: float | None = None,
) -> RadarConfig:
    """Validate raw parameters and fill in derived fields.

    Element spacing defaults to half the carrier wavelength.
    """
    raw = {
        "carrier_hz": carrier_hz,
        "bandwidth_hz": bandwidth_hz,
        "chirp_s": chirp_s,
        "sample_rate_hz": sample_rate_hz,
        "n_elements": n_elements,
    }
    for name, value in raw.items():
        if not value > 0:
            raise ConfigError(f"{name} must be positive, got {value!r}")
    wavelength = C_LIGHT / carrier_hz
    spacing = wavelength / 2.0 if element_spacing_m is None else element_spacing_m
    if not spacing > 0:
        raise ConfigError(f"element_spacing_m must be positive, got {spacing!r}")
    n_fast = int(round(chirp_s * sample_rate_hz))
    if n_fast < 8:
        raise ConfigError(f"chirp_s * sample_rate_hz gives n_fast={n_fast}, need >= 8")
    gamma = bandwidth_hz / chirp_s
    return RadarConfig(
        carrier_hz=carrier_hz,
        bandwidth_hz=bandwidth_hz,
        chirp_s=chirp_s,
        sample_rate_hz=sample_rate_hz,
        n_elements=int(n_elements),
        element_spacing_m=spacing,
        n_fast=n_fast,
        chirp_rate_hz_per_s=gamma,
        range_res_m=C_LIGHT / (2.0 * bandwidth_hz),
        wavelength_m=wavelength,
    )


@dataclass(frozen=True)
class UavTruth:
    """One point target: initial radial range, radial velocity (positive =
    receding), arrival angle, and complex scattering amplitude."""

    range0_m: float
    velocity_mps: float
    angle_rad: float = 0.0
    amplitude: complex = 1.0 + 0.0j

    def __post_init__(self) -> None:
        if not self.range0_m > 0:
            raise ConfigError(f"range0_m must be positive, got {self.range0_m!r}")
        if not abs(self.angle_rad) < np.pi / 2:
            raise ConfigError(f"|angle_rad| must be < pi/2, got {self.angle_rad!r}")

    def advanced(self, gap_s: float) -> "UavTruth":
        """Truth after `gap_s` seconds of constant radial motion."""
        return UavTruth(
            range0_m=self.range0_m + self.velocity_mps * gap_s,
            velocity_mps=self.velocity_mps,
            angle_rad=self.angle_rad,
            amplitude=self.amplitude,
        )


def config_to_dict(cfg: RadarConfig) -> dict:
    return {
        "carrier_hz": cfg.carrier_hz,
        "bandwidth_hz": cfg.bandwidth_hz,
        "chirp_s": cfg.chirp_s,
        "sample_rate_hz": cfg.sample_rate_hz,
        "n_elements": cfg.n_elements,
        "element_spacing_m": cfg.element_spacing_m,
    }


def config_from_dict(raw: dict) -> RadarConfig:
    return make_radar_config(
        carrier_hz=raw["carrier_hz"],
        bandwidth_hz=raw["bandwidth_hz"],
        chirp_s=raw["chirp_s"],
        sample_rate_hz=raw["sample_rate_hz"],
        n_elements=raw["n_elements"],
        element_spacing_m=raw.get("element_spacing_m"),
    )


def truth_to_dict(t: UavTruth) -> dict:
    return {
        "range0_m": t.range0_m,
        "velocity_mps": t.velocity_mps,
        "angle_rad": t.angle_rad,
        "amplitude": [t.amplitude.real, t.amplitude.imag],
    }


def truth_from_dict(raw: dict) -> UavTruth:
    amp = raw.get("amplitude", 1.0)
    if isinstance(amp, (list, tuple)):
        amp = complex(amp[0], amp[1])
    else:
        amp = complex(amp)
    return UavTruth(
        range0_m=raw["range0_m"],
        velocity_mps=raw.get("velocity_mps", 0.0),
        angle_rad=raw.get("angle_rad", 0.0),
        amplitude=amp,
    )


def load_json(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def dump_json(obj, path) -> None:
    """Canonical JSON writer: sorted keys, fixed separators, trailing newline.

    Used for every serialized artifact so identical inputs yield identical
    bytes.
    """
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
