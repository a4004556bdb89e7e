"""LFMCW beat-signal synthesis for point-target scenes.

Discrete dechirped model for target k at initial range R, radial velocity v,
angle theta, element l (one-based), fast-time index n, chirp index m:

    C_k * exp(j2pi (2 gamma R / c) n dt)
        * exp(j2pi (2 gamma v / c) m T n dt)      (range walk coupling)
        * exp(j2pi (2 f_c v / c) m T)             (Doppler)
        * exp(j2pi f_c l d sin(theta) / c)        (array phase)

with C_k the scattering amplitude times the carrier phase exp(j2pi f_c 2R/c).
The quadratic residual exp(-j pi gamma tau^2) of dechirping is negligible at
these delays and is omitted.
"""

from __future__ import annotations

import numpy as np

from .config import C_LIGHT, ConfigError, RadarConfig, UavTruth
from .cube import DataCube, axis_values

# slow-time block size for memory-bounded synthesis/noise loops
_CHUNK_M = 256


class OutOfBandError(ConfigError):
    """Target's beat frequency exceeds the fast-time Nyquist limit."""


def array_phase(cfg: RadarConfig, angle_rad: float) -> np.ndarray:
    """Per-element phase 2pi f_c l d sin(theta) / c, l = 1..L."""
    l = np.arange(1, cfg.n_elements + 1)
    return 2.0 * np.pi * cfg.carrier_hz * l * cfg.element_spacing_m * np.sin(angle_rad) / C_LIGHT

def synth_beat_cube(
    cfg: RadarConfig,
    targets: list[UavTruth],
    n_slow: int,
    dtype=np.complex128,
) -> DataCube:
    """Noise-free beat-signal cube over (n, m, l) for the given scene."""
    if n_slow < 1:
        raise ConfigError(f"n_slow must be >= 1, got {n_slow}")
    n_fast = cfg.n_fast
    data = np.zeros((n_fast, n_slow, cfg.n_elements), dtype=dtype)
    if not targets:
        return DataCube(data=data, axis2_kind="element", config=cfg)

    n = axis_values(n_fast).astype(np.float64)
    m = axis_values(n_slow).astype(np.float64)
    dt = cfg.dt
    gamma = cfg.chirp_rate_hz_per_s
    for t in targets:
        f_beat = cfg.beat_freq(t.range0_m)
        if f_beat >= 0.5:
            raise OutOfBandError(
                f"target at {t.range0_m} m maps to normalized beat frequency "
                f"{f_beat:.4f} >= 0.5 (fast-time Nyquist)"
            )
        c_amp = t.amplitude * np.exp(2j * np.pi * cfg.carrier_hz * 2.0 * t.range0_m / C_LIGHT)
        phase_n = 2.0 * np.pi * f_beat * n
        f_dop = cfg.doppler_freq(t.velocity_mps)
        walk = 2.0 * np.pi * (2.0 * gamma * t.velocity_mps / C_LIGHT) * cfg.chirp_s * dt
        elem = np.exp(1j * array_phase(cfg, t.angle_rad)).astype(dtype)
        for m0 in range(0, n_slow, _CHUNK_M):
            mc = m[m0:m0 + _CHUNK_M]
            # phase over (n, m): beat tone + walk coupling + Doppler
            ph = (
                phase_n[:, None]
                + walk * np.outer(n, mc)
                + (2.0 * np.pi * f_dop) * mc[None, :]
            )
            tone = np.exp(1j * ph)
            data[:, m0:m0 + _CHUNK_M, :] += (c_amp * tone[:, :, None] * elem).astype(dtype)
    return DataCube(data=data, axis2_kind="element", config=cfg)


def noise_sigma(snr_db: float) -> float:
    """Per-sample complex noise std for a unit-amplitude target at `snr_db`."""
    return 10.0 ** (-snr_db / 20.0)


def add_noise(cube: DataCube, snr_db: float | None, rng_seed: int) -> DataCube:
    """Add circular complex white Gaussian noise at the given per-sample SNR.

    SNR reference: a unit-amplitude target, per element, per fast-time sample,
    before any integration. `snr_db=None` (or +inf) disables noise and
    returns the input unchanged.
    """
    if snr_db is None or np.isinf(snr_db):
        return cube
    sigma = noise_sigma(float(snr_db))
    rng = np.random.default_rng(rng_seed)
    out = cube.data.copy()
    n_fast, n_slow, n_ch = out.shape
    scale = sigma / np.sqrt(2.0)
    for m0 in range(0, n_slow, _CHUNK_M):
        block = out[:, m0:m0 + _CHUNK_M, :]
        shape = block.shape
        noise = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        block += (scale * noise).astype(block.dtype)
    return DataCube(
        data=out, axis2_kind=cube.axis2_kind, config=cube.config, beam_angles=cube.beam_angles
    )
