"""Scaled slow-time transform, keystone interpolation, range DFT."""

import numpy as np
import pytest

from rangesr.config import UavTruth, make_radar_config
from rangesr.cube import CubeError, DataCube
from rangesr.integrate import (
    integrate_cube,
    keystone_explicit,
    range_ft,
    range_profile_ft,
    scaled_slow_time_ft_direct,
    scaled_slow_time_ft_fast,
    symmetric_fft,
    symmetric_ifft,
)
from rangesr.synth import synth_beat_cube


def random_beam_cube(cfg, n, m, g, seed):
    rng = np.random.default_rng(seed)
    data = rng.standard_normal((n, m, g)) + 1j * rng.standard_normal((n, m, g))
    # fast-time length is decoupled from cfg.n_fast for transform-only tests
    return DataCube(data=data, axis2_kind="beam", config=cfg, beam_angles=None)


def rel_err(a, b):
    return np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300)


def test_symmetric_fft_parseval_and_inverse():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((32, 5)) + 1j * rng.standard_normal((32, 5))
    spec = symmetric_fft(x, axis=0)
    assert np.sum(np.abs(spec) ** 2) == pytest.approx(32 * np.sum(np.abs(x) ** 2), rel=1e-12)
    assert np.allclose(symmetric_ifft(spec, axis=0), x, rtol=1e-12, atol=1e-12)


def test_symmetric_fft_places_symmetric_tone():
    n = 16
    k = 3
    x = np.exp(2j * np.pi * k * (np.arange(n) - n // 2) / n)
    spec = symmetric_fft(x)
    assert int(np.argmax(np.abs(spec))) == k + n // 2
    assert spec[k + n // 2] == pytest.approx(n)


def test_fast_path_matches_direct_oracle(tiny_cfg):
    rng = np.random.default_rng(42)
    for _ in range(6):
        n, m, g = rng.integers(3, 48), rng.integers(1, 48), rng.integers(1, 4)
        cube = random_beam_cube(tiny_cfg, int(n), int(m), int(g), seed=int(rng.integers(1e6)))
        direct = scaled_slow_time_ft_direct(cube)
        fast = scaled_slow_time_ft_fast(cube)
        assert rel_err(fast.data, direct.data) < 1e-9


def test_single_chirp_is_identity(tiny_cfg):
    cube = random_beam_cube(tiny_cfg, 8, 1, 2, seed=5)
    assert np.allclose(scaled_slow_time_ft_fast(cube).data, cube.data, rtol=1e-12)
    assert np.allclose(scaled_slow_time_ft_direct(cube).data, cube.data, rtol=1e-12)


def test_zero_cube_stays_zero(tiny_cfg):
    cube = DataCube(np.zeros((16, 8, 2), complex), "beam", tiny_cfg)
    assert not scaled_slow_time_ft_fast(cube).data.any()
    assert not integrate_cube(cube).data.any()


def test_transforms_reject_element_cubes(tiny_cfg):
    cube = DataCube(np.zeros((8, 4, 4), complex), "element", tiny_cfg)
    for fn in (scaled_slow_time_ft_fast, scaled_slow_time_ft_direct, keystone_explicit):
        with pytest.raises(CubeError):
            fn(cube)


def on_grid_truth(cfg, n_slow, range_bin, doppler_bin):
    rda = integrate_cube(DataCube(np.zeros((cfg.n_fast, n_slow, 1), complex), "beam", cfg))
    return float(rda.range_of_bin(range_bin)), float(rda.velocity_of_bin(doppler_bin))


def test_on_grid_target_peaks_at_truth_bins(tiny_cfg_1ch):
    cfg = tiny_cfg_1ch
    m = 64
    r0, v0 = on_grid_truth(cfg, m, 10, 7)
    cube = synth_beat_cube(cfg, [UavTruth(r0, v0)], m)
    rda = integrate_cube(DataCube(cube.data, "beam", cfg, (0.0,)))
    i, j, _ = np.unravel_index(np.argmax(np.abs(rda.data)), rda.data.shape)
    rbin, dbin = i - cfg.n_fast // 2, j - m // 2
    assert (rbin, dbin) == (10, 7)
    assert rda.range_of_bin(rbin) == pytest.approx(r0, rel=1e-12)
    assert rda.velocity_of_bin(dbin) == pytest.approx(v0, rel=1e-12)


def test_doppler_ambiguity_wraps(tiny_cfg_1ch):
    cfg = tiny_cfg_1ch
    m = 64
    delta = 0.25
    v_alias = 299792458.0 / (4.0 * cfg.carrier_hz * cfg.chirp_s) * (2.0 + delta)
    r0, _ = on_grid_truth(cfg, m, 10, 0)
    cube = synth_beat_cube(cfg, [UavTruth(r0, v_alias)], m)
    rda = integrate_cube(DataCube(cube.data, "beam", cfg, (0.0,)))
    _, j, _ = np.unravel_index(np.argmax(np.abs(rda.data)), rda.data.shape)
    # normalized Doppler (2 + delta)/2 wraps to delta/2
    assert j - m // 2 == round(m * delta / 2.0)


def test_keystone_identity_for_stationary_target(tiny_cfg_1ch):
    cube = synth_beat_cube(tiny_cfg_1ch, [UavTruth(30.0, 0.0)], 32)
    beam = DataCube(cube.data, "beam", tiny_cfg_1ch, (0.0,))
    kt = keystone_explicit(beam)
    assert rel_err(kt.data, beam.data) < 1e-9


def walk_cfg():
    # experiment waveform, one channel: range cell 3 m, visible migration
    return make_radar_config(10e9, 50e6, 100e-6, 5.12e6, 1)


def test_keystone_removes_range_walk():
    cfg = walk_cfg()
    v, m = 44.07, 2000
    cube = synth_beat_cube(cfg, [UavTruth(165.0, v)], m)
    beam = DataCube(cube.data, "beam", cfg, (0.0,))

    def drift(bc):
        profiles = range_profile_ft(bc)
        arg = np.argmax(np.abs(profiles[:, :, 0]), axis=0)
        return int(arg.max() - arg.min())

    walk_cells = v * m * cfg.chirp_s / cfg.range_res_m
    pre = drift(beam)
    post = drift(keystone_explicit(beam))
    assert abs(pre - walk_cells) <= 1.0
    assert post <= 1


def test_keystone_then_plain_dft_matches_scaled_transform():
    cfg = walk_cfg()
    m = 256
    r0, v0 = on_grid_truth(cfg, m, 10, 7)
    cube = synth_beat_cube(cfg, [UavTruth(r0, v0)], m)
    beam = DataCube(cube.data, "beam", cfg, (0.0,))
    inter = symmetric_fft(keystone_explicit(beam).data, axis=1)
    via_kt = range_ft(DataCube(inter, "beam", cfg, (0.0,)))
    via_czt = integrate_cube(beam)
    peak_kt = np.unravel_index(np.argmax(np.abs(via_kt.data)), via_kt.data.shape)
    peak_czt = np.unravel_index(np.argmax(np.abs(via_czt.data)), via_czt.data.shape)
    assert peak_kt == peak_czt
    assert np.max(np.abs(via_kt.data)) == pytest.approx(np.max(np.abs(via_czt.data)), rel=0.01)


def test_keystone_and_scaled_transform_agree_on_migrating_peak():
    cfg = walk_cfg()
    cube = synth_beat_cube(cfg, [UavTruth(165.0, 44.07)], 256)
    beam = DataCube(cube.data, "beam", cfg, (0.0,))
    inter = symmetric_fft(keystone_explicit(beam).data, axis=1)
    via_kt = range_ft(DataCube(inter, "beam", cfg, (0.0,))).data
    via_czt = integrate_cube(beam).data
    assert np.unravel_index(np.argmax(np.abs(via_kt)), via_kt.shape) == np.unravel_index(
        np.argmax(np.abs(via_czt)), via_czt.shape
    )


def test_integrate_cube_direct_flag(tiny_cfg):
    cube = random_beam_cube(tiny_cfg, 16, 12, 2, seed=9)
    fast = integrate_cube(cube, fast=True)
    slow = integrate_cube(cube, fast=False)
    assert rel_err(fast.data, slow.data) < 1e-9
    assert fast.n_slow == 12
    # integration is the scaled slow-time FT followed by the range DFT
    assert np.allclose(
        fast.data, range_ft(scaled_slow_time_ft_fast(cube)).data, rtol=1e-12, atol=1e-9
    )
