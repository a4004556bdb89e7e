"""Three-step range super-resolution pipeline over synthetic scenes.

Step 1 (search): short dwell, full beam fan, keystone integration, CFAR;
produces a swarm angle prior as a power-weighted beam centroid. Step 2
(stare): long dwell on the prior angle, a narrow beam window, per-beam
integration and CFAR; detection groups carry refined range/Doppler cells.
Step 3 (super-resolve): per group, extract the multi-snapshot matrix at the
detected Doppler, build the range prior band, run the gridless solver, and
map recovered frequencies back to meters.

Scenes are JSON-serializable truth sets. The two dwells observe the scene at
different times; the long-dwell truth can be given explicitly (as the
experiment tables do) or derived by advancing ranges through a configurable
gap.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .beamform import beamform_cube, default_grid, steering_vector
from .cfar import (
    CfarSettings,
    Detection,
    DetectionGroup,
    ca_cfar,
    cluster_detections,
    merge_beam_duplicates,
)
from .config import (
    C_LIGHT,
    RadarConfig,
    UavTruth,
    config_from_dict,
    config_to_dict,
    make_radar_config,
    truth_from_dict,
    truth_to_dict,
)
from .cube import DataCube, RdaCube
from .integrate import integrate_cube, range_profile_ft
from .sdp import AdmmOptions
from .superres import SuperResError, extract_mmv, prior_band, solve_by_name
from .synth import add_noise, noise_sigma, synth_beat_cube

DEFAULT_GAP_S = 6.0 / 44.01   # the table offsets: 6 m advance at swarm speed


def table_radar_config(sample_rate_hz: float = 5.12e6) -> RadarConfig:
    """The experiment radar: X band, 50 MHz ramp over 100 us, 16 elements.

    The published runs sample at 50 MHz (5000 fast-time samples). The default
    here keeps every derived quantity that matters to the method (range cell
    size, cell index per meter, keystone warp, Doppler axis) identical while
    shrinking the fast-time grid to fit small machines; pass 50e6 to
    reproduce the full-rate grid.
    """
    return make_radar_config(
        carrier_hz=10e9,
        bandwidth_hz=50e6,
        chirp_s=100e-6,
        sample_rate_hz=sample_rate_hz,
        n_elements=16,
    )


@dataclass(frozen=True)
class Scene:
    name: str
    config: RadarConfig
    uavs: tuple[UavTruth, ...]
    step2_uavs: tuple[UavTruth, ...] | None = None
    dwell1_s: float = 0.1
    dwell2_s: float = 0.5
    gap_s: float = DEFAULT_GAP_S
    snr_db: float | None = None
    seed: int = 0

    def noise_sigma(self) -> float:
        return 0.0 if self.snr_db is None else noise_sigma(self.snr_db)

    def step2_truths(self) -> tuple[UavTruth, ...]:
        if self.step2_uavs is not None:
            return self.step2_uavs
        return tuple(u.advanced(self.gap_s) for u in self.uavs)


def scene_to_dict(scene: Scene) -> dict:
    d = {
        "name": scene.name,
        "radar": config_to_dict(scene.config),
        "uavs": [truth_to_dict(u) for u in scene.uavs],
        "dwell1_s": scene.dwell1_s,
        "dwell2_s": scene.dwell2_s,
        "gap_s": scene.gap_s,
        "snr_db": scene.snr_db,
        "seed": scene.seed,
    }
    if scene.step2_uavs is not None:
        d["step2_uavs"] = [truth_to_dict(u) for u in scene.step2_uavs]
    return d


def scene_from_dict(d: dict) -> Scene:
    return Scene(
        name=str(d.get("name", "scene")),
        config=config_from_dict(d["radar"]),
        uavs=tuple(truth_from_dict(u) for u in d.get("uavs", [])),
        step2_uavs=(
            tuple(truth_from_dict(u) for u in d["step2_uavs"])
            if d.get("step2_uavs") is not None
            else None
        ),
        dwell1_s=float(d.get("dwell1_s", 0.1)),
        dwell2_s=float(d.get("dwell2_s", 0.5)),
        gap_s=float(d.get("gap_s", DEFAULT_GAP_S)),
        snr_db=(None if d.get("snr_db") is None else float(d["snr_db"])),
        seed=int(d.get("seed", 0)),
    )


def _swarm(name, cfg, rows, step2_rows, angle, snr_db, seed):
    def truths(rows):
        return tuple(
            UavTruth(range0_m=r, velocity_mps=v, angle_rad=angle) for r, v in rows
        )

    return Scene(
        name=name,
        config=cfg,
        uavs=truths(rows),
        step2_uavs=truths(step2_rows),
        snr_db=snr_db,
        seed=seed,
    )


def make_exp1_scene(
    snr_db: float | None = None,
    sample_rate_hz: float = 5.12e6,
    angle_rad: float = 0.2,
    seed: int = 0,
) -> Scene:
    """Three UAVs, same direction; the close pair shares one range cell."""
    return _swarm(
        "exp1",
        table_radar_config(sample_rate_hz),
        [(165.00, 44.01), (166.20, 44.07), (167.40, 44.07)],
        [(171.00, 44.01), (172.20, 44.07), (173.40, 44.07)],
        angle_rad,
        snr_db,
        seed,
    )


def make_exp2_scene(
    snr_db: float | None = None,
    sample_rate_hz: float = 5.12e6,
    angle_rad: float = 0.2,
    seed: int = 0,
) -> Scene:
    """Four UAVs; three share a range-Doppler cell, one differs in Doppler."""
    return _swarm(
        "exp2",
        table_radar_config(sample_rate_hz),
        [(162.00, 44.01), (162.00, 44.13), (163.20, 44.13), (164.40, 44.13)],
        [(168.00, 44.01), (168.00, 44.13), (169.20, 44.13), (170.40, 44.13)],
        angle_rad,
        snr_db,
        seed,
    )


def make_exp3_scene(seed: int = 0, sample_rate_hz: float = 5.12e6) -> Scene:
    return replace(make_exp2_scene(sample_rate_hz=sample_rate_hz, seed=seed),
                   name="exp3", snr_db=-13.0)


def _n_chirps(dwell_s: float, chirp_s: float) -> int:
    m = int(round(dwell_s / chirp_s))
    if m < 1:
        raise ValueError("dwell shorter than one chirp")
    return m - (m % 2) if m >= 2 else m


@dataclass
class Step1Report:
    detections: list[Detection]
    groups: list[DetectionGroup]
    angle_est_rad: float | None
    sin_est: float | None
    n_chirps: int
    beam_angles: tuple[float, ...]
    elapsed_s: float = 0.0
    rda: RdaCube | None = None

    def to_dict(self) -> dict:
        return {
            "step": 1,
            "n_chirps": self.n_chirps,
            "angle_est_rad": self.angle_est_rad,
            "sin_est": self.sin_est,
            "detections": [d.to_dict() for d in self.detections],
        }


@dataclass
class Step2Report:
    detections: list[Detection]
    groups: list[DetectionGroup]
    angle_prior_rad: float
    beam_indices: tuple[int, ...]
    beam_angles: tuple[float, ...]
    n_chirps: int
    noise_sigma: float
    elapsed_s: float = 0.0
    element_cube: DataCube | None = None

    def to_dict(self) -> dict:
        return {
            "step": 2,
            "n_chirps": self.n_chirps,
            "angle_prior_rad": self.angle_prior_rad,
            "beam_angles": list(self.beam_angles),
            "detections": [d.to_dict() for d in self.detections],
            "n_groups": len(self.groups),
        }


@dataclass(frozen=True)
class UavEstimate:
    range_m: float
    velocity_mps: float
    angle_rad: float
    power: float
    step: str            # "step2" | "step3" | "step3-fallback"
    group_index: int

    def to_dict(self) -> dict:
        return {
            "range_m": self.range_m,
            "velocity_mps": self.velocity_mps,
            "angle_rad": self.angle_rad,
            "power": self.power,
            "step": self.step,
            "group_index": self.group_index,
        }


@dataclass
class LocalizationResult:
    estimates: list[UavEstimate]
    group_reports: list[dict]
    method: str
    elapsed_s: float = 0.0

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "estimates": [e.to_dict() for e in self.estimates],
            "groups": self.group_reports,
        }


def _angle_centroid(rda: RdaCube, det: Detection, half_window: int = 2) -> float:
    i = det.range_bin + rda.n_range // 2
    j = det.doppler_bin + rda.n_doppler // 2
    pw = np.abs(rda.data[i, j, :]) ** 2
    g0 = int(np.argmax(pw))
    sel = slice(max(0, g0 - half_window), min(pw.shape[0], g0 + half_window + 1))
    sines = np.sin(np.asarray(rda.beam_angles[sel]))
    weights = pw[sel]
    if weights.sum() <= 0.0:
        return float(rda.beam_angles[g0])
    centroid = float(np.sum(weights * sines) / np.sum(weights))
    return float(np.arcsin(np.clip(centroid, -1.0, 1.0)))


def run_step1(
    scene: Scene,
    dwell_s: float | None = None,
    cfar: CfarSettings | None = None,
    keep_rda: bool = False,
) -> Step1Report:
    t0 = time.perf_counter()
    cfg = scene.config
    m1 = _n_chirps(dwell_s if dwell_s is not None else scene.dwell1_s, cfg.chirp_s)
    cube = synth_beat_cube(cfg, scene.uavs, m1)
    cube = add_noise(cube, scene.snr_db, rng_seed=scene.seed * 10 + 1)
    grid = default_grid(cfg)
    beams = beamform_cube(cube, grid)
    del cube
    rda = integrate_cube(beams)
    del beams
    detections = merge_beam_duplicates(ca_cfar(rda, cfar))
    groups = cluster_detections(detections)
    angle = sin_est = None
    if detections:
        angle = _angle_centroid(rda, detections[0])
        sin_est = float(np.sin(angle))
    return Step1Report(
        detections=detections,
        groups=groups,
        angle_est_rad=angle,
        sin_est=sin_est,
        n_chirps=m1,
        beam_angles=grid.angles_rad,
        elapsed_s=time.perf_counter() - t0,
        rda=rda if keep_rda else None,
    )


def run_step2(
    scene: Scene,
    angle_prior_rad: float,
    dwell_s: float | None = None,
    half_window: int = 2,
    cfar: CfarSettings | None = None,
) -> Step2Report:
    """Long stare at the prior angle; integrates and detects one beam at a time."""
    t0 = time.perf_counter()
    cfg = scene.config
    m2 = _n_chirps(dwell_s if dwell_s is not None else scene.dwell2_s, cfg.chirp_s)
    cube = synth_beat_cube(cfg, scene.step2_truths(), m2)
    cube = add_noise(cube, scene.snr_db, rng_seed=scene.seed * 10 + 2)

    grid = default_grid(cfg)
    sines = np.sin(np.asarray(grid.angles_rad))
    g0 = int(np.argmin(np.abs(sines - np.sin(angle_prior_rad))))
    lo, hi = max(0, g0 - half_window), min(len(sines), g0 + half_window + 1)
    beam_idx = tuple(range(lo, hi))
    beam_angles = tuple(grid.angles_rad[g] for g in beam_idx)

    detections: list[Detection] = []
    for slot, g in enumerate(beam_idx):
        w = steering_vector(cfg, grid.angles_rad[g])
        beam = DataCube(
            data=(cube.data @ w)[:, :, None],
            axis2_kind="beam",
            config=cfg,
            beam_angles=(grid.angles_rad[g],),
        )
        rda = integrate_cube(beam)
        for det in ca_cfar(rda, cfar):
            detections.append(replace(det, beam=slot))
        del beam, rda
    detections = merge_beam_duplicates(detections)
    groups = cluster_detections(detections)
    return Step2Report(
        detections=detections,
        groups=groups,
        angle_prior_rad=float(angle_prior_rad),
        beam_indices=beam_idx,
        beam_angles=beam_angles,
        n_chirps=m2,
        noise_sigma=scene.noise_sigma(),
        elapsed_s=time.perf_counter() - t0,
        element_cube=cube,
    )


def _dedup(estimates: list[UavEstimate], cfg: RadarConfig, n_slow: int) -> list[UavEstimate]:
    range_tol = 1e-3 * cfg.range_res_m
    vel_tol = 1e-3 * C_LIGHT / (2.0 * n_slow * cfg.chirp_s * cfg.carrier_hz)
    kept: list[UavEstimate] = []
    for est in sorted(estimates, key=lambda e: -e.power):
        dup = any(
            abs(est.range_m - k.range_m) < range_tol
            and abs(est.velocity_mps - k.velocity_mps) < vel_tol
            for k in kept
        )
        if not dup:
            kept.append(est)
    kept.sort(key=lambda e: e.range_m)
    return kept


def _strip_leakage(
    estimates: list[UavEstimate],
    fallbacks: dict[int, UavEstimate],
    reports: list[dict],
    cfg: RadarConfig,
) -> list[UavEstimate]:
    """Drop solved atoms that echo a much stronger atom of another group.

    A strong target bleeds into neighboring Doppler channels through the
    slow-time filter sidelobes, so a weak channel's solve can return a
    genuine tone at the intruder's range. Such an echo sits within a
    fraction of a range cell of the source atom but carries a small
    fraction of its power; a real target sharing the range at a different
    velocity shows up at comparable power in its own channel and survives.
    A group whose every atom was leakage still detected something, so its
    CFAR estimate is restored.
    """
    tol = 0.5 * cfg.range_res_m
    atoms = [e for e in estimates if e.step == "step3"]
    kept: list[UavEstimate] = []
    dropped: dict[int, int] = {}
    for est in estimates:
        if est.step == "step3" and any(
            other.group_index != est.group_index
            and abs(other.range_m - est.range_m) <= tol
            and est.power < 0.1 * other.power
            for other in atoms
        ):
            dropped[est.group_index] = dropped.get(est.group_index, 0) + 1
            continue
        kept.append(est)
    survivors = {e.group_index for e in kept if e.step == "step3"}
    for gi, n in dropped.items():
        reports[gi]["leakage_atoms"] = n
        if gi not in survivors and gi in fallbacks:
            kept.append(replace(fallbacks[gi], step="step3-fallback"))
    return kept


def run_step3(
    step2: Step2Report,
    method: str = "fsram",
    n_ex: int = 32,
    solve_singletons: bool = True,
    rel_power_min: float = 1e-2,
    rel_group_power_min: float = 1e-5,
    options: AdmmOptions | None = None,
    angle_rad: float | None = None,
) -> LocalizationResult:
    """Solve each detection group; falls back to the CFAR estimate if a solve
    returns nothing usable (keeps the final count >= the group count).

    Single-cell groups are solved too (`solve_singletons`): several targets
    in one range-Doppler cell look exactly like one, so cell count cannot
    identify the multi-target suspects. The cost of solving true singletons
    is cross-channel leakage atoms, which `_strip_leakage` removes after the
    fact.

    Groups more than 50 dB below the strongest group (`rel_group_power_min`)
    keep their CFAR estimate without a solve; on noise-free synthetic scenes
    the integration sidelobes clear the CFAR floor and would otherwise burn
    one SDP solve per speck.
    """
    t0 = time.perf_counter()
    cube = step2.element_cube
    if cube is None:
        raise ValueError("step-2 report lacks the element cube")
    cfg = cube.config
    angle_default = angle_rad if angle_rad is not None else step2.angle_prior_rad
    power_top = max((g.strongest.power for g in step2.groups), default=0.0)
    estimates: list[UavEstimate] = []
    group_reports: list[dict] = []
    fallbacks: dict[int, UavEstimate] = {}
    for gi, group in enumerate(step2.groups):
        rep = group.strongest
        report: dict = {
            "group_index": gi,
            "size": group.size,
            "range_bins": list(group.range_bins),
            "doppler_bin": rep.doppler_bin,
            "velocity_mps": rep.refined_velocity_mps,
        }
        fallback = UavEstimate(
            range_m=rep.refined_range_m,
            velocity_mps=rep.refined_velocity_mps,
            angle_rad=angle_default,
            power=rep.power,
            step="step2",
            group_index=gi,
        )
        if rep.power < rel_group_power_min * power_top:
            estimates.append(fallback)
            report.update({"solved": False, "skipped": "below dynamic-range gate"})
            group_reports.append(report)
            continue
        if group.size == 1 and not solve_singletons:
            estimates.append(fallback)
            report["solved"] = False
            group_reports.append(report)
            continue
        try:
            band = prior_band(group, cfg.n_fast)
            mmv = extract_mmv(
                cube,
                doppler_bin=rep.refined_doppler_bin,
                band=band,
                n_ex=n_ex,
                noise_sigma=step2.noise_sigma,
            )
            result = solve_by_name(method, mmv, options=options)
        except (SuperResError, ValueError) as err:
            estimates.append(replace(fallback, step="step3-fallback"))
            report.update({"solved": False, "error": str(err)})
            group_reports.append(report)
            continue
        keep = result.powers >= rel_power_min * max(
            result.powers.max() if result.n_atoms else 0.0, 1e-300
        )
        keep &= result.in_band
        ranges = result.ranges_m[keep]
        powers = result.powers[keep]
        report.update(
            {
                "solved": True,
                "method": result.method,
                "band": [band.f_lo, band.f_hi],
                "eta": result.eta,
                "n_atoms": int(keep.sum()),
                "feasible": (
                    bool(result.diagnostics.feasible) if result.diagnostics else True
                ),
            }
        )
        if ranges.size == 0:
            estimates.append(replace(fallback, step="step3-fallback"))
        else:
            fallbacks[gi] = fallback
            for r, p in zip(ranges, powers):
                estimates.append(
                    UavEstimate(
                        range_m=float(r),
                        velocity_mps=rep.refined_velocity_mps,
                        angle_rad=angle_default,
                        power=float(p),
                        step="step3",
                        group_index=gi,
                    )
                )
        group_reports.append(report)
    estimates = _strip_leakage(estimates, fallbacks, group_reports, cfg)
    estimates = _dedup(estimates, cfg, step2.n_chirps)
    return LocalizationResult(
        estimates=estimates,
        group_reports=group_reports,
        method=method,
        elapsed_s=time.perf_counter() - t0,
    )


@dataclass
class FullRunResult:
    scene: Scene
    step1: Step1Report
    step2: Step2Report | None
    localization: LocalizationResult | None
    method: str

    def to_dict(self) -> dict:
        out = {
            "scene": scene_to_dict(self.scene),
            "method": self.method,
            "step1": self.step1.to_dict(),
        }
        if self.step2 is not None:
            out["step2"] = self.step2.to_dict()
        if self.localization is not None:
            out["localization"] = self.localization.to_dict()
            out["estimates"] = [e.to_dict() for e in self.localization.estimates]
        else:
            out["estimates"] = []
        return out


def run_full(
    scene: Scene,
    method: str = "fsram",
    n_ex: int = 32,
    solve_singletons: bool = True,
    options: AdmmOptions | None = None,
) -> FullRunResult:
    step1 = run_step1(scene)
    if not step1.detections:
        return FullRunResult(scene, step1, None, None, method)
    step2 = run_step2(scene, step1.angle_est_rad)
    if not step2.groups:
        return FullRunResult(scene, step1, step2, None, method)
    loc = run_step3(
        step2,
        method=method,
        n_ex=n_ex,
        solve_singletons=solve_singletons,
        options=options,
        angle_rad=step1.angle_est_rad,
    )
    step2.element_cube = None
    return FullRunResult(scene, step1, step2, loc, method)


def write_range_walk_csv(beam_cube: DataCube, path, beam: int = 0) -> None:
    """Per-chirp strongest range cell (the migration trajectory) as CSV."""
    profiles = range_profile_ft(beam_cube)
    mags = np.abs(profiles[:, :, beam])
    arg = np.argmax(mags, axis=0) - beam_cube.n_fast // 2
    cfg = beam_cube.config
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("chirp_index,range_bin,range_m\n")
        for m, bin_ in enumerate(arg):
            r = bin_ * cfg.range_res_m
            fh.write(f"{m - beam_cube.n_slow // 2},{int(bin_)},{r:.6f}\n")
