"""Reweighted Toeplitz-constrained SDP solved by ADMM.

Solves, for a multi-snapshot matrix S in C^{N x L} and noise budget eta,

    min  (sqrt(N)/2) Tr(W T(u)) + (1/(2 sqrt(N))) Tr(Z)
    s.t. [[Z, Y^H], [Y, T(u)]] >= 0,   ||S - Y||_F <= eta,
         Tb(u) >= 0                      (optional, band-selective)

where T(u) is Hermitian Toeplitz with first column u and Tb is the
(N-1)x(N-1) combination h1*T[:-1,1:] + h2*T[:-1,:-1] + conj(h1)*T[1:,:-1].
With h1 = exp(j pi (f_lo+f_hi)) and h2 = -2 cos(pi (f_hi-f_lo)), a unit
power atom a(f)_n = exp(j 2 pi f n) gives Tb = 2(cos(2 pi f - pi(f_lo+f_hi))
- cos(pi(f_hi-f_lo))) a'a'^H, which is PSD exactly when f lies inside
[f_lo, f_hi]; imposing Tb >= 0 therefore confines the recovered line
spectrum to the band.

The weight W is refreshed outside the ADMM loop as (T(u) + eps I)^{-1}
(majorization-minimization for log-det sparsity); W = I on the first pass.
A new outer iterate is accepted only if it does not increase the weighted
objective, which keeps the surrogate sequence monotone even with loose
inner tolerances.

ADMM splitting: consensus copies Q (of the big block matrix) and P (of Tb)
carry the PSD constraints; Z, Y, u have closed-form updates. The u update
is a banded real least-squares problem whose normal matrix depends only on
(N, band), so it is Cholesky-factored once per solve.

The returned solution must survive a feasibility audit (ball within
eta(1+1e-6)+1e-9, block matrix and Tb eigenvalues above -1e-6 relative).
First-order iterates approach that set tangentially near low-rank optima,
so the solver refits the atoms of the final iterate to the data
(projected Gauss-Newton on the frequencies, clipped to the band) and
returns the Gram-form certificate [[C^H P^-1 C, C^H A^H], [A C, A P A^H]],
which is PSD by construction with Tb PSD because in-band atoms have
nonnegative transform weights. Only the data misfit can then fail, which
is exactly the eta-infeasible case and raises AdmmError.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, toeplitz
from scipy.optimize import nnls

from .config import ConfigError


@dataclass(frozen=True)
class AdmmOptions:
    max_outer: int = 8
    inner_iters_first: int = 300
    inner_iters: int = 150
    tol_abs: float = 1e-8
    tol_rel: float = 1e-6
    over_relax: float = 1.8
    rho_init: float = 0.05
    adapt_every: int = 25
    adapt_ratio: float = 5.0
    adapt_factor: float = 1.5
    rho_min: float = 1e-4
    rho_max: float = 1e4
    eps_decay: float = 0.5
    eps_floor_rel: float = 1e-8
    outer_tol: float = 1e-4
    restore_sweeps: int = 400


@dataclass
class SdpDiagnostics:
    outer_iters: int = 0
    inner_iters: list = field(default_factory=list)
    objective_pairs: list = field(default_factory=list)   # (prev at same W, new)
    eta: float = 0.0
    scale: float = 1.0
    data_misfit: float = 0.0
    min_eig_main: float = 0.0
    max_eig_main: float = 0.0
    min_eig_band: float = 0.0
    max_eig_band: float = 0.0
    feasible: bool = True
    converged: bool = False
    stop_reason: str = ""
    restore_path: str = ""
    restore_sweeps: int = 0
    restore_gap: float = 0.0
    rho_final: float = 0.0


class AdmmError(RuntimeError):
    """Solver could not produce an audited feasible iterate within budget."""

    def __init__(self, message: str, diagnostics: SdpDiagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


def hermitize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.conj().T)


def psd_project(a: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(hermitize(a))
    np.clip(vals, 0.0, None, out=vals)
    return (vecs * vals) @ vecs.conj().T


def toeplitz_from_u(u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=np.complex128)
    col = u.copy()
    col[0] = col[0].real
    return toeplitz(col, col.conj())


def band_coefficients(f_lo: float, f_hi: float) -> tuple[complex, float]:
    """Coefficients (h1, h2) of the band-selective transform."""
    if not f_lo < f_hi:
        raise ConfigError("band requires f_lo < f_hi")
    if f_hi - f_lo >= 1.0:
        raise ConfigError("band width must be below one cycle")
    h1 = np.exp(1j * np.pi * (f_lo + f_hi))
    h2 = -2.0 * np.cos(np.pi * (f_hi - f_lo))
    return complex(h1), float(h2)


def _band_diagonals(u: np.ndarray, h1: complex, h2: float) -> np.ndarray:
    """First column of Tb(u): tb_e = h1 u_{e-1} + h2 u_e + conj(h1) u_{e+1}."""
    n = u.shape[0]
    ue_minus = np.concatenate(([np.conj(u[1])], u[: n - 2]))
    ue = u[: n - 1]
    ue_plus = u[1:n]
    return h1 * ue_minus + h2 * ue + np.conj(h1) * ue_plus


def band_matrix_from_u(u: np.ndarray, h1: complex, h2: float) -> np.ndarray:
    col = _band_diagonals(np.asarray(u, dtype=np.complex128), h1, h2)
    col = col.copy()
    col[0] = col[0].real
    return toeplitz(col, col.conj())


def _diag_means(a: np.ndarray) -> np.ndarray:
    """Mean of each lower diagonal d = 0..n-1 of a Hermitian matrix."""
    n = a.shape[0]
    return np.array([np.diagonal(a, offset=-d).mean() for d in range(n)])


def _interleave(weights: np.ndarray, values: np.ndarray) -> np.ndarray:
    """[w0*Re v0, w1*Re v1, w1*Im v1, ...]: index 0 is real-only."""
    out = np.empty(2 * values.shape[0] - 1)
    out[0] = weights[0] * values[0].real
    out[1::2] = weights[1:] * values[1:].real
    out[2::2] = weights[1:] * values[1:].imag
    return out


def _u_from_x(x: np.ndarray) -> np.ndarray:
    n = (x.shape[0] + 1) // 2
    u = np.empty(n, dtype=np.complex128)
    u[0] = x[0]
    u[1:] = x[1::2] + 1j * x[2::2]
    return u


def _x_from_u(u: np.ndarray) -> np.ndarray:
    x = np.empty(2 * u.shape[0] - 1)
    x[0] = u[0].real
    x[1::2] = u[1:].real
    x[2::2] = u[1:].imag
    return x


class _UUpdate:
    """Prefactored least-squares map for the Toeplitz vector update.

    Minimizes over u:
        g(W)^T x + (rho/2)(||T(u) - A||_F^2 + ||Tb(u) - B||_F^2)
    which in real parameters x is g^T x + (rho/2)||Phi x - tau(A, B)||^2.
    Phi depends only on (N, band), so its normal matrix is factored once.
    """

    def __init__(self, n: int, band: tuple[complex, float] | None):
        self.n = n
        self.band = band
        self.kappa = np.sqrt(np.array([n] + [2.0 * (n - d) for d in range(1, n)]))
        if band is not None:
            self.mu = np.sqrt(
                np.array([n - 1.0] + [2.0 * (n - 1 - e) for e in range(1, n - 1)])
            )
        dim = 2 * n - 1
        cols = [self._apply(np.eye(dim)[:, j]) for j in range(dim)]
        phi = np.stack(cols, axis=1)
        self.phi = phi
        self.cho = cho_factor(phi.T @ phi + 1e-12 * np.eye(dim))

    def _apply(self, x: np.ndarray) -> np.ndarray:
        u = _u_from_x(x)
        parts = [_interleave(self.kappa, u)]
        if self.band is not None:
            h1, h2 = self.band
            parts.append(_interleave(self.mu, _band_diagonals(u, h1, h2)))
        return np.concatenate(parts)

    def target(self, a_means: np.ndarray, b_means: np.ndarray | None) -> np.ndarray:
        parts = [_interleave(self.kappa, a_means)]
        if self.band is not None:
            parts.append(_interleave(self.mu, b_means))
        return np.concatenate(parts)

    def solve(self, g: np.ndarray, rho: float, tau: np.ndarray) -> np.ndarray:
        rhs = self.phi.T @ tau - g / rho
        return _u_from_x(cho_solve(self.cho, rhs))


def _objective_gradient(w: np.ndarray) -> np.ndarray:
    """Gradient of (sqrt(N)/2) Tr(W T(u)) in the real parameterization."""
    n = w.shape[0]
    root = np.sqrt(n)
    g = np.empty(2 * n - 1)
    g[0] = 0.5 * root * np.trace(w).real
    supers = np.array([np.diagonal(w, offset=d).sum() for d in range(1, n)])
    g[1::2] = root * supers.real
    g[2::2] = -root * supers.imag
    return g


def _objective_value(w: np.ndarray, u: np.ndarray, z: np.ndarray) -> float:
    t = toeplitz_from_u(u)
    n = u.shape[0]
    return float(
        0.5 * np.sqrt(n) * np.trace(w @ t).real
        + np.trace(z).real / (2.0 * np.sqrt(n))
    )


def _ball_project(a: np.ndarray, s: np.ndarray, eta: float) -> np.ndarray:
    diff = a - s
    nrm = np.linalg.norm(diff)
    if nrm <= eta:
        return a.copy()
    if nrm == 0.0:
        return s.copy()
    return s + diff * (eta / nrm)


def _assemble(z: np.ndarray, y: np.ndarray, u: np.ndarray) -> np.ndarray:
    l, n = y.shape[1], y.shape[0]
    m = np.empty((l + n, l + n), dtype=np.complex128)
    m[:l, :l] = z
    m[l:, :l] = y
    m[:l, l:] = y.conj().T
    m[l:, l:] = toeplitz_from_u(u)
    return m


def _esprit_freqs(u: np.ndarray, rank_tol: float = 1e-6) -> np.ndarray:
    """Frequencies of the dominant atoms of T(u) by rotational invariance."""
    n = u.shape[0]
    vals, vecs = np.linalg.eigh(toeplitz_from_u(u))
    rank = int(np.count_nonzero(vals > rank_tol * max(vals[-1], 1e-300)))
    rank = min(rank, n - 1)
    if rank == 0:
        return np.empty(0)
    sub = vecs[:, n - rank:]
    rot = np.linalg.pinv(sub[:-1]) @ sub[1:]
    f = np.angle(np.linalg.eigvals(rot)) / (2.0 * np.pi)
    return np.sort(np.mod(f, 1.0))


def _nnls_powers(u: np.ndarray, freqs: np.ndarray) -> np.ndarray:
    """Nonnegative atom powers fitting u: u_d ~= sum_q p_q e^{j2pi f_q d}."""
    n = u.shape[0]
    basis = np.exp(2j * np.pi * np.arange(n)[:, None] * freqs[None, :])
    stacked = np.vstack([basis.real, basis.imag])
    target = np.concatenate([u.real, u.imag])
    powers, _ = nnls(stacked, target)
    return powers


def _gn_refine(
    ss: np.ndarray,
    freqs: np.ndarray,
    band: tuple[float, float] | None,
    max_iter: int = 30,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Refine atom frequencies against the data by projected Gauss-Newton.

    Variable projection with the Kaufman approximation: amplitudes are the
    least-squares fit at each step, the Jacobian uses only the projected
    atom derivatives. Frequencies stay clipped to the prior band, so the
    refined atoms keep nonnegative band-transform weights.
    """
    n, l = ss.shape
    idx = np.arange(n)[:, None]
    lo, hi = band if band is not None else (0.0, 1.0)
    f = np.clip(np.sort(freqs), lo, hi)

    def fit(fv: np.ndarray):
        a = np.exp(2j * np.pi * idx * fv[None, :])
        c, *_ = np.linalg.lstsq(a, ss, rcond=None)
        r = ss - a @ c
        return a, c, r, float(np.linalg.norm(r) ** 2)

    a, c, r, cost = fit(f)
    for _ in range(max_iter):
        da = (2j * np.pi * idx) * a
        jac = np.empty((2 * n * l, f.size))
        for q in range(f.size):
            m_q = da[:, q][:, None] * c[q][None, :]
            proj, *_ = np.linalg.lstsq(a, m_q, rcond=None)
            col = (m_q - a @ proj).ravel()
            jac[:, q] = np.concatenate([col.real, col.imag])
        rhs = np.concatenate([r.ravel().real, r.ravel().imag])
        delta, *_ = np.linalg.lstsq(jac, rhs, rcond=None)
        if not np.all(np.isfinite(delta)):
            break
        step = 1.0
        improved = False
        for _ in range(6):
            f_try = np.clip(f + step * delta, lo, hi)
            a_t, c_t, r_t, cost_t = fit(f_try)
            if cost_t < cost:
                f, a, c, r, cost = f_try, a_t, c_t, r_t, cost_t
                improved = True
                break
            step *= 0.5
        if not improved or np.max(np.abs(delta)) * step < 1e-13:
            break
    order = np.argsort(f)
    return f[order], c[order], cost


def _residual_peak(residual: np.ndarray, band: tuple[float, float] | None) -> float:
    """Frequency whose atom best correlates with the residual, on a dense grid."""
    n = residual.shape[0]
    lo, hi = band if band is not None else (0.0, 1.0)
    grid = lo + (hi - lo) * np.arange(2048) / (2048 if band is None else 2047)
    corr = np.exp(-2j * np.pi * np.outer(grid, np.arange(n))) @ residual
    return float(grid[int(np.argmax(np.sum(np.abs(corr) ** 2, axis=1)))])


def _refined_fit(
    ss: np.ndarray, init: np.ndarray, band: tuple[float, float] | None
) -> tuple[np.ndarray, np.ndarray, float]:
    freqs, c, cost = _gn_refine(ss, init, band)
    keep = np.concatenate(([True], np.diff(freqs) > 1e-9))
    return freqs[keep], c[keep], float(np.sqrt(cost))


def _atomic_certificate(
    u_admm: np.ndarray,
    ss: np.ndarray,
    band: tuple[float, float] | None,
    eta_s: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, float] | None:
    """Exactly feasible (z, y, u) built from refined atoms of the iterate.

    With atoms A, powers Sigma and amplitudes C the block matrix
    [[C^H Sigma^-1 C, C^H A^H], [A C, A Sigma A^H]] is a Gram matrix, hence
    PSD to machine precision, and every clipped atom has a nonnegative
    band-transform weight, so Tb(u) is PSD as well. The only quantity left
    to audit is the data misfit ||S - AC||, which the caller compares
    against eta; a miss there means the band cannot explain the data.

    Candidate atom sets come from ESPRIT on the iterate and from forward
    selection on residual peaks; the fewest atoms that stay inside the eta
    ball win. A half-converged iterate can split one true atom in two, and
    reading its rank verbatim would lock in the overfit.
    """
    n = u_admm.shape[0]
    fit_ok = eta_s * (1.0 + 1e-6) + 1e-9
    candidates: list[tuple[np.ndarray, np.ndarray, float]] = []

    freqs = _esprit_freqs(u_admm)
    if band is not None:
        freqs = np.clip(freqs, band[0], band[1])
    freqs = np.unique(freqs)
    if freqs.size:
        candidates.append(_refined_fit(ss, freqs, band))

    forward: list[float] = []
    for _ in range(min(n - 1, 16)):
        a = np.exp(2j * np.pi * np.outer(np.arange(n), np.array(forward)))
        coef, *_ = np.linalg.lstsq(a, ss, rcond=None) if forward else (np.zeros((0, ss.shape[1])),)
        forward.append(_residual_peak(ss - a @ coef, band))
        cand = _refined_fit(ss, np.array(forward), band)
        candidates.append(cand)
        forward = list(cand[0])
        if cand[2] <= fit_ok:
            break

    if not candidates:
        return None
    feasible = [c for c in candidates if c[2] <= fit_ok]
    pool = feasible or candidates
    freqs, c, misfit = min(pool, key=lambda c: (c[0].size, c[2]))
    if freqs.size == 0:
        return None
    powers = _nnls_powers(u_admm, freqs)
    if powers.max() <= 0.0:
        return None
    powers = np.maximum(powers, 1e-9 * powers.max())
    atoms = np.exp(2j * np.pi * np.arange(n)[:, None] * freqs[None, :])
    c, *_ = np.linalg.lstsq(atoms, ss, rcond=None)
    y = atoms @ c
    z = hermitize(c.conj().T @ ((1.0 / powers)[:, None] * c))
    u = atoms @ powers.astype(np.complex128)
    misfit = float(np.linalg.norm(ss - y))
    return z, y, u, misfit


def _restore_feasibility(
    z: np.ndarray,
    y: np.ndarray,
    u: np.ndarray,
    ss: np.ndarray,
    eta_s: float,
    hcoefs: tuple[complex, float] | None,
    upd: _UUpdate,
    max_sweeps: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, int, float]:
    """Alternating-projection fallback toward the audited feasible set.

    Cycles between the PSD cones and the coupled structure set
    {(assemble(z,y,u), Tb(u)) : ||S - y|| <= eta}; all sets are convex, so
    the violation shrinks whenever the intersection is nonempty. Stops on
    the audit tolerance (with headroom), a stall, or the sweep budget.
    """
    l = ss.shape[1]
    g_zero = np.zeros(2 * u.shape[0] - 1)
    gap = np.inf
    history: list[float] = []
    for sweep in range(max_sweeps + 1):
        m = _assemble(z, y, u)
        vals, vecs = np.linalg.eigh(hermitize(m))
        ok = vals[0] >= -0.5e-6 * max(vals[-1], 1e-12)
        gap = max(0.0, -float(vals[0]))
        bvals = bvecs = None
        if hcoefs is not None:
            tb = band_matrix_from_u(u, *hcoefs)
            bvals, bvecs = np.linalg.eigh(hermitize(tb))
            ok = ok and bvals[0] >= -0.5e-6 * max(bvals[-1], 1e-12)
            gap = max(gap, max(0.0, -float(bvals[0])))
        history.append(gap)
        stalled = len(history) > 25 and gap > 0.5 * history[-25]
        if ok or stalled or sweep == max_sweeps:
            return z, y, u, sweep, gap
        np.clip(vals, 0.0, None, out=vals)
        mp = (vecs * vals) @ vecs.conj().T
        b_means = None
        if hcoefs is not None:
            np.clip(bvals, 0.0, None, out=bvals)
            b_means = _diag_means((bvecs * bvals) @ bvecs.conj().T)
        z = hermitize(mp[:l, :l])
        y = _ball_project(mp[l:, :l], ss, eta_s)
        u = upd.solve(g_zero, 1.0, upd.target(_diag_means(mp[l:, l:]), b_means))
    return z, y, u, max_sweeps, gap


def solve_weighted_toeplitz_sdp(
    s: np.ndarray,
    eta: float,
    band: tuple[float, float] | None = None,
    options: AdmmOptions | None = None,
) -> tuple[np.ndarray, np.ndarray, SdpDiagnostics]:
    """Returns (u, Y, diagnostics); T(u) carries the recovered line spectrum."""
    opts = options or AdmmOptions()
    s = np.asarray(s, dtype=np.complex128)
    if s.ndim != 2:
        raise ConfigError("S must be a 2-D (samples x snapshots) array")
    n, l = s.shape
    if n < 2:
        raise ConfigError("need at least two samples per snapshot")
    if eta < 0:
        raise ConfigError("eta must be non-negative")
    diag = SdpDiagnostics(eta=eta)

    scale = float(np.sqrt(np.mean(np.abs(s) ** 2)))
    diag.scale = scale
    if scale == 0.0:
        diag.converged = True
        return np.zeros(n, dtype=np.complex128), np.zeros_like(s), diag
    ss = s / scale
    eta_s = eta / scale

    hcoefs = band_coefficients(*band) if band is not None else None
    upd = _UUpdate(n, hcoefs)
    root = np.sqrt(n)

    # cold start from the sample covariance of the data
    t0 = hermitize(ss @ ss.conj().T) / max(l, 1)
    u = _diag_means(t0)
    u[0] = u[0].real
    y = ss.copy()
    z = hermitize(y.conj().T @ y) / root
    q = psd_project(_assemble(z, y, u))
    lam = np.zeros_like(q)
    p = gam = None
    if hcoefs is not None:
        p = psd_project(band_matrix_from_u(u, *hcoefs))
        gam = np.zeros_like(p)
    rho = opts.rho_init

    w = np.eye(n, dtype=np.complex128)
    eps = None
    lam_max_first = None
    u_acc, y_acc, z_acc = u.copy(), y.copy(), z.copy()
    f_acc = None
    accepted_outer = 0

    for outer in range(opts.max_outer):
        g_vec = _objective_gradient(w)
        max_inner = opts.inner_iters_first if outer == 0 else opts.inner_iters
        inner_done = 0
        for it in range(max_inner):
            a = hermitize(q - lam)
            z = hermitize(a[:l, :l]) - (1.0 / (2.0 * root * rho)) * np.eye(l)
            y = _ball_project(a[l:, :l], ss, eta_s)
            a_means = _diag_means(a[l:, l:])
            b_means = None
            if hcoefs is not None:
                b = hermitize(p - gam)
                b_means = _diag_means(b)
            tau = upd.target(a_means, b_means)
            u = upd.solve(g_vec, rho, tau)

            m_new = _assemble(z, y, u)
            q_prev = q
            m_relax = opts.over_relax * m_new + (1.0 - opts.over_relax) * q_prev
            q = psd_project(m_relax + lam)
            lam = lam + m_relax - q
            r_norm = np.linalg.norm(m_new - q)
            s_norm = rho * np.linalg.norm(q - q_prev)
            m_scale = max(np.linalg.norm(m_new), np.linalg.norm(q))
            if hcoefs is not None:
                tb_new = band_matrix_from_u(u, *hcoefs)
                p_prev = p
                tb_relax = opts.over_relax * tb_new + (1.0 - opts.over_relax) * p_prev
                p = psd_project(tb_relax + gam)
                gam = gam + tb_relax - p
                r_norm = np.hypot(r_norm, np.linalg.norm(tb_new - p))
                s_norm = np.hypot(s_norm, rho * np.linalg.norm(p - p_prev))
                m_scale = max(m_scale, np.linalg.norm(tb_new))
            inner_done = it + 1

            eps_pri = opts.tol_abs * (l + n) + opts.tol_rel * m_scale
            eps_dual = opts.tol_abs * (l + n) + opts.tol_rel * rho * m_scale
            if r_norm < eps_pri and s_norm < eps_dual:
                break
            if opts.adapt_every and (it + 1) % opts.adapt_every == 0:
                if r_norm > opts.adapt_ratio * s_norm and rho < opts.rho_max:
                    rho *= opts.adapt_factor
                    lam /= opts.adapt_factor
                    if gam is not None:
                        gam /= opts.adapt_factor
                elif s_norm > opts.adapt_ratio * r_norm and rho > opts.rho_min:
                    rho /= opts.adapt_factor
                    lam *= opts.adapt_factor
                    if gam is not None:
                        gam *= opts.adapt_factor
        diag.inner_iters.append(inner_done)

        f_new = _objective_value(w, u, z)
        f_prev = _objective_value(w, u_acc, z_acc) if outer > 0 else np.inf
        diag.objective_pairs.append((f_prev, f_new))
        if outer > 0 and f_new > f_prev + 1e-9 * (1.0 + abs(f_prev)):
            diag.stop_reason = "objective_stall"
            break
        u_change = np.linalg.norm(u - u_acc) / max(np.linalg.norm(u_acc), 1e-12)
        u_acc, y_acc, z_acc = u.copy(), y.copy(), z.copy()
        f_acc = f_new
        accepted_outer = outer + 1
        if outer > 0 and u_change < opts.outer_tol:
            diag.stop_reason = "u_change"
            break

        t_acc = toeplitz_from_u(u_acc)
        vals, vecs = np.linalg.eigh(t_acc)
        lam_max = float(vals[-1])
        if lam_max_first is None:
            lam_max_first = max(lam_max, 1e-12)
            eps = lam_max_first / 10.0
        else:
            eps = max(eps * opts.eps_decay, opts.eps_floor_rel * lam_max_first)
        w = (vecs * (1.0 / (np.clip(vals, 0.0, None) + eps))) @ vecs.conj().T

    diag.outer_iters = accepted_outer
    if not diag.stop_reason:
        diag.stop_reason = "max_outer"
    diag.converged = diag.stop_reason != "max_outer"
    del f_acc

    def audit(z_c: np.ndarray, y_c: np.ndarray, u_c: np.ndarray) -> bool:
        vals_m = np.linalg.eigvalsh(hermitize(_assemble(z_c, y_c, u_c)))
        diag.min_eig_main = float(vals_m[0])
        diag.max_eig_main = float(vals_m[-1])
        ok = diag.min_eig_main >= -1e-6 * max(diag.max_eig_main, 1e-12)
        if hcoefs is not None:
            vals_b = np.linalg.eigvalsh(band_matrix_from_u(u_c, *hcoefs))
            diag.min_eig_band = float(vals_b[0])
            diag.max_eig_band = float(vals_b[-1])
            ok = ok and diag.min_eig_band >= -1e-6 * max(diag.max_eig_band, 1e-12)
        misfit = float(np.linalg.norm(ss - y_c))
        diag.data_misfit = misfit * scale
        return ok and misfit <= eta_s * (1.0 + 1e-6) + 1e-9

    # the raw iterate rarely survives the audit at loose inner tolerances;
    # refit its atoms to the data, which is exactly feasible by construction
    # unless eta genuinely cannot cover the residual
    final = None
    cert = _atomic_certificate(u_acc, ss, band, eta_s)
    if cert is not None and audit(*cert[:3]):
        final = cert[:3]
        diag.restore_path = "atoms"
    if final is None and audit(z_acc, y_acc, u_acc):
        final = (z_acc, y_acc, u_acc)
        diag.restore_path = "raw"
    if final is None:
        z_p, y_p, u_p, sweeps, gap = _restore_feasibility(
            z_acc, y_acc, u_acc, ss, eta_s, hcoefs, upd, opts.restore_sweeps
        )
        diag.restore_sweeps = sweeps
        diag.restore_gap = float(gap)
        if audit(z_p, y_p, u_p):
            final = (z_p, y_p, u_p)
            diag.restore_path = "projection"
    diag.rho_final = rho
    diag.feasible = final is not None
    if final is None:
        raise AdmmError(
            "no audited feasible iterate within budget (residual gap "
            f"{diag.restore_gap:.3e}, data misfit {diag.data_misfit:.3e} vs "
            f"eta {diag.eta:.3e}); eta may be below the distance from the "
            "data to the band-constrained signal set",
            diag,
        )

    _, y_fin, u_fin = final
    return u_fin * scale * scale, y_fin * scale, diag
