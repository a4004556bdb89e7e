"""Keystone-based long-time integration.

The slow-time rescaling m_hat = (1 + gamma n dt / f_c) m removes the
range-walk coupling between fast time and chirp index. Doing the rescale and
the slow-time DFT in one go is a scaled discrete Fourier transform

    out[n, k, g] = sum_m in[n, m, g] exp(-j 2pi k alpha_n m / M),
    alpha_n = 1 + gamma n dt / f_c,

evaluated here either by direct summation (the oracle) or by the chirp-z
(Bluestein) factorization: k m = (k^2 + m^2 - (k-m)^2)/2 turns the scaled DFT
into a pre-chirp multiply, a cyclic convolution of length >= 2M-1 done with
FFTs, and a post-chirp multiply. An explicit interpolating keystone transform
is kept alongside as an independent check.
"""

from __future__ import annotations

import numpy as np
import scipy.fft as sfft

from .cube import CubeError, DataCube, RdaCube, axis_values

# cap on complex workspace entries per Bluestein chunk (~64 MB complex128)
_CHUNK_BUDGET = 4_000_000


def symmetric_fft(x: np.ndarray, axis: int = 0) -> np.ndarray:
    """DFT with both time and frequency indexed symmetrically about zero."""
    shifted = np.fft.ifftshift(x, axes=axis)
    return np.fft.fftshift(sfft.fft(shifted, axis=axis), axes=axis)


def symmetric_ifft(x: np.ndarray, axis: int = 0) -> np.ndarray:
    """Inverse of :func:`symmetric_fft` (1/length normalization)."""
    shifted = np.fft.ifftshift(x, axes=axis)
    return np.fft.fftshift(sfft.ifft(shifted, axis=axis), axes=axis)


def _alphas(cube: DataCube) -> np.ndarray:
    cfg = cube.config
    n = cube.fast_index().astype(np.float64)
    return 1.0 + cfg.chirp_rate_hz_per_s * n * cfg.dt / cfg.carrier_hz


def _require_beam(cube: DataCube) -> None:
    if cube.axis2_kind != "beam":
        raise CubeError(f"slow-time integration expects a beam cube, got {cube.axis2_kind!r}")


def scaled_slow_time_ft_direct(cube: DataCube) -> DataCube:
    """O(M^2) direct evaluation of the scaled slow-time DFT; the oracle path."""
    _require_beam(cube)
    m = axis_values(cube.n_slow).astype(np.float64)
    alphas = _alphas(cube)
    out = np.empty_like(cube.data, dtype=np.complex128)
    km = np.outer(m, m)  # k and m share the same symmetric index set
    for i, alpha in enumerate(alphas):
        kernel = np.exp(-2j * np.pi * alpha / cube.n_slow * km)
        out[i] = kernel @ cube.data[i]
    return DataCube(
        data=out, axis2_kind="beam", config=cube.config, beam_angles=cube.beam_angles
    )


def _scaled_dft(rows: np.ndarray, scales: np.ndarray) -> np.ndarray:
    """Per-row scaled DFT out[i,k,:] = sum_m rows[i,m,:] e^{-j2pi scales[i] k m / M}.

    Both k and m run over the symmetric index set of length M. Evaluated by the
    Bluestein factorization, chunked over rows to bound workspace.
    """
    n_rows, n_slow, n_beams = rows.shape
    m_vals = axis_values(n_slow).astype(np.float64)
    l_fft = sfft.next_fast_len(2 * n_slow - 1)
    lags = np.arange(-(n_slow - 1), n_slow)
    lag_pos = np.mod(lags, l_fft)
    chunk = max(1, _CHUNK_BUDGET // (l_fft * n_beams))
    out = np.empty((n_rows, n_slow, n_beams), dtype=np.complex128)
    m_sq = m_vals * m_vals
    lag_sq = (lags * lags).astype(np.float64)
    for i0 in range(0, n_rows, chunk):
        i1 = min(i0 + chunk, n_rows)
        w = (np.pi / n_slow) * scales[i0:i1]          # (nc,)
        q = np.exp(-1j * np.outer(w, m_sq))           # pre/post chirp, (nc, M)
        a = np.zeros((i1 - i0, l_fft, n_beams), dtype=np.complex128)
        a[:, :n_slow, :] = rows[i0:i1] * q[:, :, None]
        b = np.zeros((i1 - i0, l_fft), dtype=np.complex128)
        b[:, lag_pos] = np.exp(1j * np.outer(w, lag_sq))
        conv = sfft.ifft(
            sfft.fft(a, axis=1) * sfft.fft(b, axis=1)[:, :, None], axis=1
        )[:, :n_slow, :]
        out[i0:i1] = q[:, :, None] * conv
    return out


def scaled_slow_time_ft_fast(cube: DataCube) -> DataCube:
    """Chirp-z evaluation of the scaled slow-time DFT, chunked over fast time."""
    _require_beam(cube)
    out = _scaled_dft(cube.data, _alphas(cube))
    return DataCube(
        data=out, axis2_kind="beam", config=cube.config, beam_angles=cube.beam_angles
    )


def range_ft(inter: DataCube) -> RdaCube:
    """DFT along fast time, completing the 2-D integration."""
    data = symmetric_fft(inter.data, axis=0)
    return RdaCube(
        data=data,
        config=inter.config,
        n_slow=inter.n_slow,
        beam_angles=inter.beam_angles,
    )


def range_profile_ft(cube: DataCube) -> np.ndarray:
    """Per-chirp range profiles: DFT along fast time only (no slow-time work)."""
    return symmetric_fft(cube.data, axis=0)


def keystone_explicit(cube: DataCube) -> DataCube:
    """Interpolating keystone transform (didactic/oracle path).

    Resamples each fast-time row at slow-time positions m / alpha_n by
    evaluating the row's trigonometric interpolant there,

        y[n, m, g] = (1/M) sum_k spec[n, k, g] e^{+j2pi k (m/alpha_n) / M},

    i.e. a scaled inverse DFT of the row spectrum, run through the same
    chirp-z core as the fast path. Truncated finite-support kernels hop a
    range cell on the first/last few chirps (one-sided windows); the full
    interpolant has no such edge.
    """
    _require_beam(cube)
    spec = symmetric_fft(cube.data, axis=1)
    inv_scales = 1.0 / _alphas(cube)
    out = np.conj(_scaled_dft(np.conj(spec), inv_scales)) / cube.n_slow
    return DataCube(
        data=out, axis2_kind="beam", config=cube.config, beam_angles=cube.beam_angles
    )


def integrate_cube(cube: DataCube, fast: bool = True) -> RdaCube:
    """Convenience composition: scaled slow-time FT then range DFT."""
    ft = scaled_slow_time_ft_fast if fast else scaled_slow_time_ft_direct
    return range_ft(ft(cube))
