"""Monte Carlo success-rate benchmark for within-cell range recovery.

Each trial drops K targets into a two-cell range window with a minimum
mutual spacing (rejection sampling), all at the same velocity and angle with
unit amplitudes and random phases, then runs the stare-and-solve path: one
matched beam, keystone integration, CFAR, Doppler-channel grouping, band
construction, extraction, and the chosen solver. Success is a per-target RMS
range error below 0.1 range cells after optimal assignment.

Common random numbers: truth and noise draws are keyed by
(seed_base, K, spacing, trial) only, so every method and every SNR sees the
same targets and the same unit-variance noise realization (scaled to the SNR
under test). Baselines ("ram", "music") receive a single modulation period,
as the comparison prescribes; the band-constrained solver gets the full
dwell.
"""

from __future__ import annotations

import hashlib
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .beamform import steering_vector
from .cfar import CfarSettings, ca_cfar, cluster_detections
from .config import UavTruth
from .cube import DataCube
from .integrate import integrate_cube
from .pipeline import table_radar_config
from .sdp import AdmmOptions
from .superres import SuperResError, extract_mmv, prior_band, solve_by_name
from .synth import noise_sigma, synth_beat_cube

METHODS = ("fsram", "ram", "music")


@dataclass(frozen=True)
class GridSpec:
    k_values: tuple[int, ...] = (1, 2, 3, 4)
    delta_ratios: tuple[float, ...] = (
        0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0,
    )
    snr_values_db: tuple[float, ...] = (0.0,)
    trials: int = 20
    seed_base: int = 0
    n_ex: int = 32
    n_slow: int = 128
    window_start_m: float = 165.0
    window_cells: float = 2.0
    velocity_mps: float = 44.07
    sample_rate_hz: float = 5.12e6
    max_draws: int = 10_000

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if any(d <= 0 for d in self.delta_ratios):
            raise ValueError("delta ratios must be positive")
        if any(k < 1 for k in self.k_values):
            raise ValueError("K values must be >= 1")

    def to_dict(self) -> dict:
        return {
            "k_values": list(self.k_values),
            "delta_ratios": list(self.delta_ratios),
            "snr_values_db": list(self.snr_values_db),
            "trials": self.trials,
            "seed_base": self.seed_base,
            "n_ex": self.n_ex,
            "n_slow": self.n_slow,
            "window_start_m": self.window_start_m,
            "window_cells": self.window_cells,
            "velocity_mps": self.velocity_mps,
            "sample_rate_hz": self.sample_rate_hz,
            "max_draws": self.max_draws,
        }


def grid_spec_from_dict(d: dict) -> GridSpec:
    kwargs = {}
    for key in (
        "k_values", "delta_ratios", "snr_values_db",
    ):
        if key in d:
            kwargs[key] = tuple(d[key])
    for key in (
        "trials", "seed_base", "n_ex", "n_slow", "max_draws",
    ):
        if key in d:
            kwargs[key] = int(d[key])
    for key in (
        "window_start_m", "window_cells", "velocity_mps", "sample_rate_hz",
    ):
        if key in d:
            kwargs[key] = float(d[key])
    return GridSpec(**kwargs)


@dataclass
class SuccessGrid:
    """Axes: (K, delta, SNR). Cells where drawing failed are infeasible."""

    spec: GridSpec
    method: str
    successes: np.ndarray
    trials_run: np.ndarray
    mean_rms_m: np.ndarray
    infeasible: np.ndarray
    truth_hash: str

    @property
    def rates(self) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            return np.where(
                self.trials_run > 0, self.successes / self.trials_run, np.nan
            )

    @property
    def standard_errors(self) -> np.ndarray:
        p = self.rates
        with np.errstate(invalid="ignore"):
            return np.sqrt(p * (1.0 - p) / np.maximum(self.trials_run, 1))

    def mean_rate(self, snr_db: float | None = None) -> float:
        rates = self.rates
        if snr_db is not None:
            js = list(self.spec.snr_values_db).index(snr_db)
            rates = rates[:, :, js : js + 1]
        return float(np.nanmean(rates))

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "method": self.method,
            "successes": self.successes.tolist(),
            "trials_run": self.trials_run.tolist(),
            "rates": np.nan_to_num(self.rates, nan=-1.0).tolist(),
            "standard_errors": np.nan_to_num(self.standard_errors, nan=-1.0).tolist(),
            "mean_rms_m": np.nan_to_num(self.mean_rms_m, nan=-1.0).tolist(),
            "infeasible": self.infeasible.tolist(),
            "truth_hash": self.truth_hash,
        }

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(
                "method,k,delta_ratio,snr_db,trials,successes,rate,"
                "standard_error,mean_rms_m,infeasible\n"
            )
            for ik, k in enumerate(self.spec.k_values):
                for idx, d in enumerate(self.spec.delta_ratios):
                    for js, snr in enumerate(self.spec.snr_values_db):
                        bad = bool(self.infeasible[ik, idx])
                        n = int(self.trials_run[ik, idx, js])
                        s = int(self.successes[ik, idx, js])
                        rate = f"{s / n:.6f}" if n else ""
                        se = (
                            f"{self.standard_errors[ik, idx, js]:.6f}" if n else ""
                        )
                        rms = self.mean_rms_m[ik, idx, js]
                        rms_s = f"{rms:.6f}" if math.isfinite(rms) else ""
                        fh.write(
                            f"{self.method},{k},{d:.3f},{snr:.1f},{n},{s},"
                            f"{rate},{se},{rms_s},{int(bad)}\n"
                        )


def assignment_rms(truth: np.ndarray, recovered: np.ndarray) -> float:
    """Per-target RMS range error under the best truth-recovery pairing."""
    truth = np.asarray(truth, dtype=np.float64)
    recovered = np.asarray(recovered, dtype=np.float64)
    k = truth.shape[0]
    if recovered.shape[0] < k:
        return float("inf")
    if k > 6:
        raise ValueError("exhaustive assignment supports K <= 6")
    best = float("inf")
    for perm in itertools.permutations(range(recovered.shape[0]), k):
        err = truth - recovered[list(perm)]
        best = min(best, float(np.mean(err * err)))
    return math.sqrt(best)


def _draw_ranges(rng, spec: GridSpec, k: int, delta_ratio: float):
    cfg = table_radar_config(spec.sample_rate_hz)
    width = spec.window_cells * cfg.range_res_m
    min_sep = delta_ratio * cfg.range_res_m
    for _ in range(spec.max_draws):
        cand = spec.window_start_m + width * rng.random(k)
        if k == 1:
            return np.sort(cand)
        cand = np.sort(cand)
        if np.min(np.diff(cand)) >= min_sep:
            return cand
    return None


def _unit_noise(rng, shape) -> np.ndarray:
    return (
        rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    ) / np.sqrt(2.0)


@dataclass
class _TrialData:
    truth_ranges: np.ndarray
    clean: np.ndarray          # element cube, full dwell
    unit_noise: np.ndarray


def _prepare_trial(spec: GridSpec, k: int, delta_ratio: float, trial: int):
    entropy = (
        spec.seed_base,
        int(k),
        int(round(delta_ratio * 1000)),
        int(trial),
    )
    rng = np.random.default_rng(np.random.SeedSequence(entropy))
    ranges = _draw_ranges(rng, spec, k, delta_ratio)
    if ranges is None:
        return None
    phases = 2.0 * np.pi * rng.random(k)
    cfg = table_radar_config(spec.sample_rate_hz)
    truths = tuple(
        UavTruth(
            range0_m=float(r),
            velocity_mps=spec.velocity_mps,
            angle_rad=0.0,
            amplitude=complex(np.exp(1j * ph)),
        )
        for r, ph in zip(ranges, phases)
    )
    clean = synth_beat_cube(cfg, truths, spec.n_slow)
    noise_rng = np.random.default_rng(np.random.SeedSequence(entropy + (999,)))
    unit = _unit_noise(noise_rng, clean.data.shape)
    return _TrialData(truth_ranges=ranges, clean=clean.data, unit_noise=unit)


def run_trial_method(
    spec: GridSpec,
    data: _TrialData,
    snr_db: float,
    method: str,
    options: AdmmOptions | None = None,
) -> float:
    """Returns the assignment RMS in meters (inf on any failure)."""
    cfg = table_radar_config(spec.sample_rate_hz)
    sigma = noise_sigma(snr_db)
    k = data.truth_ranges.shape[0]
    noisy = data.clean + sigma * data.unit_noise
    cube = DataCube(data=noisy, axis2_kind="element", config=cfg)

    w = steering_vector(cfg, 0.0)
    beam = DataCube(
        data=(cube.data @ w)[:, :, None],
        axis2_kind="beam",
        config=cfg,
        beam_angles=(0.0,),
    )
    rda = integrate_cube(beam)
    detections = ca_cfar(rda, CfarSettings())
    groups = cluster_detections(detections)
    if not groups:
        return float("inf")
    group = groups[0]  # clusters come sorted by falling power

    try:
        band = prior_band(group, cfg.n_fast)
        if method == "fsram":
            mmv = extract_mmv(
                cube,
                doppler_bin=group.strongest.refined_doppler_bin,
                band=band,
                n_ex=spec.n_ex,
                noise_sigma=sigma,
            )
        else:
            mid = spec.n_slow // 2
            single = DataCube(
                data=np.ascontiguousarray(cube.data[:, mid : mid + 1, :]),
                axis2_kind="element",
                config=cfg,
            )
            mmv = extract_mmv(
                single, doppler_bin=0.0, band=band, n_ex=spec.n_ex, noise_sigma=sigma
            )
        result = solve_by_name(method, mmv, n_atoms=k, options=options)
    except (SuperResError, ValueError, np.linalg.LinAlgError):
        return float("inf")
    recovered = result.top_ranges(k)
    return assignment_rms(data.truth_ranges, recovered)


def run_success_grid(
    spec: GridSpec,
    method: str = "fsram",
    options: AdmmOptions | None = None,
    progress=None,
) -> SuccessGrid:
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    cfg = table_radar_config(spec.sample_rate_hz)
    ok_limit = 0.1 * cfg.range_res_m
    nk, nd, ns = len(spec.k_values), len(spec.delta_ratios), len(spec.snr_values_db)
    successes = np.zeros((nk, nd, ns), dtype=np.int64)
    trials_run = np.zeros((nk, nd, ns), dtype=np.int64)
    rms_sums = np.zeros((nk, nd, ns))
    rms_counts = np.zeros((nk, nd, ns), dtype=np.int64)
    infeasible = np.zeros((nk, nd), dtype=bool)
    hasher = hashlib.sha256()

    for ik, k in enumerate(spec.k_values):
        for idx, delta in enumerate(spec.delta_ratios):
            for trial in range(spec.trials):
                data = _prepare_trial(spec, k, delta, trial)
                if data is None:
                    infeasible[ik, idx] = True
                    break
                hasher.update(np.ascontiguousarray(data.truth_ranges).tobytes())
                for js, snr in enumerate(spec.snr_values_db):
                    rms = run_trial_method(spec, data, snr, method, options)
                    trials_run[ik, idx, js] += 1
                    if rms < ok_limit:
                        successes[ik, idx, js] += 1
                    if math.isfinite(rms):
                        rms_sums[ik, idx, js] += rms
                        rms_counts[ik, idx, js] += 1
                if progress is not None:
                    progress(ik, idx, trial)
    with np.errstate(invalid="ignore"):
        mean_rms = np.where(rms_counts > 0, rms_sums / np.maximum(rms_counts, 1), np.nan)
    return SuccessGrid(
        spec=spec,
        method=method,
        successes=successes,
        trials_run=trials_run,
        mean_rms_m=mean_rms,
        infeasible=infeasible,
        truth_hash=hasher.hexdigest(),
    )


def compare_methods(
    spec: GridSpec,
    methods: tuple[str, ...] = METHODS,
    options: AdmmOptions | None = None,
    progress=None,
) -> dict[str, SuccessGrid]:
    grids = {
        m: run_success_grid(spec, m, options=options, progress=progress)
        for m in methods
    }
    hashes = {g.truth_hash for g in grids.values()}
    if len(hashes) != 1:
        raise RuntimeError("common-random-number violation: truth draws differ")
    return grids
