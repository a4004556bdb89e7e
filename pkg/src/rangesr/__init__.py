"""Radar range super-resolution toolkit for closely spaced slow targets.

Processing chain: LFMCW beat-signal synthesis -> steering-vector beamforming
-> keystone long-time integration -> CA-CFAR detection -> within-cell
gridless frequency recovery (band-constrained reweighted Toeplitz SDP) ->
range estimates, plus a Monte Carlo benchmark harness and a CLI.
"""

from .beamform import BeamGrid, beamform_cube, beams_to_elements, default_grid, steering_vector
from .bench import GridSpec, SuccessGrid, assignment_rms, compare_methods, run_success_grid
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
    ConfigError,
    RadarConfig,
    UavTruth,
    make_radar_config,
)
from .cube import CubeError, DataCube, RdaCube, load_cube, save_cube
from .integrate import (
    integrate_cube,
    keystone_explicit,
    range_ft,
    scaled_slow_time_ft_direct,
    scaled_slow_time_ft_fast,
)
from .pipeline import (
    LocalizationResult,
    Scene,
    make_exp1_scene,
    make_exp2_scene,
    make_exp3_scene,
    run_full,
    run_step1,
    run_step2,
    run_step3,
    table_radar_config,
)
from .sdp import AdmmError, AdmmOptions, SdpDiagnostics, solve_weighted_toeplitz_sdp
from .superres import (
    FreqBand,
    MmvMatrix,
    SuperResError,
    SuperResResult,
    extract_mmv,
    fsram_solve,
    music_solve,
    prior_band,
    ram_solve,
    vandermonde_decompose,
)
from .synth import add_noise, noise_sigma, synth_beat_cube

__version__ = "0.1.0"

__all__ = [
    "AdmmError",
    "AdmmOptions",
    "BeamGrid",
    "C_LIGHT",
    "CfarSettings",
    "ConfigError",
    "CubeError",
    "DataCube",
    "Detection",
    "DetectionGroup",
    "FreqBand",
    "GridSpec",
    "LocalizationResult",
    "MmvMatrix",
    "RadarConfig",
    "RdaCube",
    "Scene",
    "SdpDiagnostics",
    "SuccessGrid",
    "SuperResError",
    "SuperResResult",
    "UavTruth",
    "add_noise",
    "assignment_rms",
    "beamform_cube",
    "beams_to_elements",
    "ca_cfar",
    "cluster_detections",
    "compare_methods",
    "default_grid",
    "extract_mmv",
    "fsram_solve",
    "integrate_cube",
    "keystone_explicit",
    "load_cube",
    "make_exp1_scene",
    "make_exp2_scene",
    "make_exp3_scene",
    "make_radar_config",
    "merge_beam_duplicates",
    "music_solve",
    "noise_sigma",
    "prior_band",
    "ram_solve",
    "range_ft",
    "run_full",
    "run_step1",
    "run_step2",
    "run_step3",
    "run_success_grid",
    "save_cube",
    "scaled_slow_time_ft_direct",
    "scaled_slow_time_ft_fast",
    "solve_weighted_toeplitz_sdp",
    "steering_vector",
    "synth_beat_cube",
    "table_radar_config",
    "vandermonde_decompose",
]
