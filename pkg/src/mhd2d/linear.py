"""Exact per-mode theory of the damped dispersive operator.

The linear flow-map system ``Y_tt - Lap(Y_t) - d1^2 Y = f`` closes per Fourier
mode on the companion system

    d/dt (yhat, vhat) = [[0, 1], [-xi1^2, -|xi|^2]] (yhat, vhat) + (0, fhat),

whose symbol ``lam^2 + |xi|^2 lam + xi1^2 = 0`` has roots

    lam_pm = -(|xi|^2 +- sqrt(|xi|^4 - 4 xi1^2)) / 2.

Low frequencies (|xi|^2 <= 2 |xi1|) carry a conjugate pair decaying like
exp(-t |xi|^2 / 2); high frequencies split into a fast branch ~ exp(-t |xi|^2)
and a slow branch whose rate ~ xi1^2 / |xi|^2 degenerates as xi1 -> 0.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from mhd2d.grid import Grid, RealField, SpectralField, from_spectral, to_spectral
from mhd2d.lp import _mask, resolved_range
from mhd2d.propagators import apply2, etd_tables, expm2

__all__ = [
    "ModeEigen",
    "LinearTrajectory",
    "eigenvalues",
    "regime",
    "mode_solution",
    "evolve_linear",
    "block_energy",
    "block_energy_series",
    "measured_decay_rate",
    "companion_matrices",
    "write_eigen_csv",
    "write_block_energy_csv",
]


@dataclass(frozen=True)
class ModeEigen:
    xi: tuple[float, float]
    lambda_plus: complex
    lambda_minus: complex
    regime: str  # "parabolic_pair" (low) or "slow_fast" (high)


def regime(xi: tuple[float, float]) -> str:
    """Frequency-split label: 'low' iff |xi|^2 <= 2 |xi1| (boundary inclusive)."""
    x1, x2 = xi
    if x1 == 0.0 and x2 == 0.0:
        raise ValueError("zero frequency has no regime")
    return "low" if x1 * x1 + x2 * x2 <= 2.0 * abs(x1) else "high"


def eigenvalues(xi: tuple[float, float]) -> ModeEigen:
    """Roots of lam^2 + |xi|^2 lam + xi1^2, exact complex branch.

    For real roots the slow one is computed in the rationalized form
    ``lam_- = -2 xi1^2 / (|xi|^2 + sqrt(|xi|^4 - 4 xi1^2))`` (no cancellation
    when xi1^2 << |xi|^4); the fast branch has no cancellation as written.
    """
    x1, x2 = float(xi[0]), float(xi[1])
    if x1 == 0.0 and x2 == 0.0:
        raise ValueError("zero frequency rejected")
    ksq = x1 * x1 + x2 * x2
    disc = ksq * ksq - 4.0 * x1 * x1
    if disc >= 0.0:
        root = math.sqrt(disc)
        lam_p = complex(-(ksq + root) / 2.0)
        lam_m = complex(-2.0 * x1 * x1 / (ksq + root))
    else:
        root = 1j * math.sqrt(-disc)
        lam_p = -(ksq + root) / 2.0
        lam_m = -(ksq - root) / 2.0
    kind = "parabolic_pair" if regime(xi) == "low" else "slow_fast"
    return ModeEigen((x1, x2), lam_p, lam_m, kind)


def _companion(xi: tuple[float, float]) -> np.ndarray:
    x1, x2 = xi
    ksq = x1 * x1 + x2 * x2
    return np.array([[0.0, 1.0], [-x1 * x1, -ksq]])


def companion_matrices(grid: Grid) -> np.ndarray:
    """Stack of per-mode companion matrices, shape (nx, ny, 2, 2)."""
    m = np.zeros(grid.shape + (2, 2))
    m[..., 0, 1] = 1.0
    m[..., 1, 0] = -grid.k1**2 + 0.0 * grid.k2
    m[..., 1, 1] = -grid.k_sq
    return m


def mode_solution(xi: tuple[float, float], y0: complex, y1: complex, t) -> tuple[np.ndarray, np.ndarray]:
    """Unforced mode evolution (yhat(t), yhat_t(t)); t may be an array."""
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t_arr < 0):
        raise ValueError("t must be nonnegative")
    m = _companion(xi)
    y = np.empty(t_arr.shape, dtype=complex)
    v = np.empty(t_arr.shape, dtype=complex)
    for i, ti in enumerate(t_arr):
        p = expm2(m, float(ti))
        y[i] = p[0, 0] * y0 + p[0, 1] * y1
        v[i] = p[1, 0] * y0 + p[1, 1] * y1
    if np.isscalar(t) or np.ndim(t) == 0:
        return y[0], v[0]
    return y, v


@dataclass(frozen=True)
class LinearTrajectory:
    """Stored spectral evolution of a vector field pair (Y, Y_t)."""

    grid: Grid
    times: np.ndarray  # (M,)
    yhat: np.ndarray  # (M, 2, nx, ny) complex
    vhat: np.ndarray  # (M, 2, nx, ny) complex
    forcing: str = "none"

    def fields(self, i: int) -> tuple[tuple[RealField, RealField], tuple[RealField, RealField]]:
        g = self.grid
        y = tuple(from_spectral(SpectralField(g, self.yhat[i, c])) for c in range(2))
        v = tuple(from_spectral(SpectralField(g, self.vhat[i, c])) for c in range(2))
        return y, v


def evolve_linear(
    Y0: tuple[RealField, RealField],
    Y1: tuple[RealField, RealField],
    times: Sequence[float],
    forcing: Callable[[float], tuple[np.ndarray, np.ndarray]] | None = None,
    substep: float = 1e-2,
) -> LinearTrajectory:
    """Evolve the linear system, storing states at the requested times.

    With no forcing every stored state comes from the exact per-mode
    propagator applied to the initial data (no time-step error).  With
    forcing, steps use the exponential trapezoidal rule (second order in the
    substep size).
    """
    g = Y0[0].grid
    times = np.asarray(sorted(float(t) for t in times))
    if times[0] < 0:
        raise ValueError("times must be nonnegative")
    m = companion_matrices(g)
    y0 = np.stack([to_spectral(f).coeffs for f in Y0])
    v0 = np.stack([to_spectral(f).coeffs for f in Y1])
    ny = np.empty((times.size, 2) + g.shape, dtype=complex)
    nv = np.empty_like(ny)
    if forcing is None:
        for i, t in enumerate(times):
            p = expm2(m, float(t))
            for c in range(2):
                ny[i, c], nv[i, c] = apply2(p, y0[c], v0[c])
        return LinearTrajectory(g, times, ny, nv, "none")

    # forced path: march with uniform substeps, storing by interpolation of
    # step endpoints onto the requested times (times must align with steps)
    t_end = float(times[-1])
    n_steps = max(1, int(round(t_end / substep)))
    h = t_end / n_steps
    p, r1, r2 = etd_tables(m, h)
    y, v = y0.copy(), v0.copy()
    t = 0.0
    out_idx = 0
    stored = {}
    if abs(times[0]) < 1e-14:
        stored[0] = (y.copy(), v.copy())
        out_idx = 1
    for _ in range(n_steps):
        f_now = forcing(t)
        f_next = forcing(t + h)
        for c in range(2):
            c0 = f_now[c]
            c1 = (f_next[c] - f_now[c]) / h
            hy, hv = apply2(p, y[c], v[c])
            fy = r1[..., 0, 1] * c0 + r2[..., 0, 1] * c1
            fv = r1[..., 1, 1] * c0 + r2[..., 1, 1] * c1
            y[c], v[c] = hy + fy, hv + fv
        t += h
        while out_idx < times.size and times[out_idx] <= t + 1e-12:
            stored[out_idx] = (y.copy(), v.copy())
            out_idx += 1
    for i in range(times.size):
        if i not in stored:
            raise ValueError("requested store times must align with forced substeps")
        ny[i], nv[i] = stored[i]
    return LinearTrajectory(g, times, ny, nv, "callable")


# ---------------------------------------------------------------------------
# block energies
# ---------------------------------------------------------------------------


def _gsq_from_spectral(g: Grid, yh: np.ndarray, vh: np.ndarray, wsq: np.ndarray) -> float:
    """g^2 = 1/2 (||w_t||^2 + ||d1 w||^2 + 1/4 ||Lap w||^2) - 1/4 (w_t | Lap w)
    for the block-localized pair, all in spectral form (wsq = squared mask)."""
    area = g.lx * g.ly
    k1sq = g.k1**2 + 0.0 * g.k2
    ksq = g.k_sq
    nv = np.sum(wsq * (np.abs(vh[0]) ** 2 + np.abs(vh[1]) ** 2))
    nd1 = np.sum(wsq * k1sq * (np.abs(yh[0]) ** 2 + np.abs(yh[1]) ** 2))
    nlap = np.sum(wsq * ksq**2 * (np.abs(yh[0]) ** 2 + np.abs(yh[1]) ** 2))
    cross = np.sum(wsq * ksq * np.real(vh[0] * np.conj(yh[0]) + vh[1] * np.conj(yh[1])))
    return float(area * (0.5 * (nv + nd1 + 0.25 * nlap) + 0.25 * cross))


def block_energy(Y: tuple[RealField, RealField], Y_t: tuple[RealField, RealField], j: int, k: int) -> float:
    """Anisotropic block energy g_{j,k}^2 of the state (Y, Y_t)."""
    g = Y[0].grid
    w = _mask(g, "iso", j, low=False) * _mask(g, "h", k, low=False)
    yh = [to_spectral(f).coeffs for f in Y]
    vh = [to_spectral(f).coeffs for f in Y_t]
    return _gsq_from_spectral(g, yh, vh, w * w)


def block_energy_series(traj: LinearTrajectory) -> dict[tuple[int, int], np.ndarray]:
    """g_{j,k}^2 over stored times for every resolved (j, k) pair."""
    g = traj.grid
    j0, j1 = resolved_range(g, "iso")
    k0, k1 = resolved_range(g, "h")
    table: dict[tuple[int, int], np.ndarray] = {}
    for j in range(j0, j1 + 1):
        mj = _mask(g, "iso", j, low=False)
        for k in range(k0, k1 + 1):
            w = mj * _mask(g, "h", k, low=False)
            if not w.any():
                continue
            wsq = w * w
            series = np.array(
                [_gsq_from_spectral(g, traj.yhat[i], traj.vhat[i], wsq) for i in range(traj.times.size)]
            )
            if series.max() > 0.0:
                table[(j, k)] = series
    return table


@dataclass(frozen=True)
class DecayFit:
    rate: float
    window_ok: bool
    n_points: int


def _fit_log_slope(times: np.ndarray, values: np.ndarray) -> float:
    a = np.polyfit(times, np.log(values), 1)
    return float(a[0])


def measured_decay_rate(traj: LinearTrajectory, xi_mode: tuple[int, int], component: int = 0) -> DecayFit:
    """Least-squares tail slope of log |yhat(t)| at one integer mode.

    Uses the last half of the stored samples (past the fast transient) and
    flags windows that span less than one e-folding of decay.
    """
    g = traj.grid
    idx = g.mode_index(*xi_mode)
    series = np.abs(traj.yhat[:, component, idx[0], idx[1]])
    # discard the round-off floor left by branch contamination at eps level
    keep = series > max(1e-300, float(series.max()) * 1e-13)
    t, s = traj.times[keep], series[keep]
    if t.size < 3:
        return DecayFit(rate=float("nan"), window_ok=False, n_points=int(t.size))
    half = t.size // 2
    t_fit, s_fit = t[half:], s[half:]
    if s_fit.min() <= 0 or np.allclose(s_fit, s_fit[0], rtol=1e-13, atol=0.0):
        return DecayFit(rate=0.0, window_ok=True, n_points=int(t_fit.size))
    rate = _fit_log_slope(t_fit, s_fit)
    efold = math.log(s_fit[0] / s_fit[-1]) if s_fit[-1] > 0 else math.inf
    return DecayFit(rate=rate, window_ok=bool(efold >= 1.0 or abs(rate) < 1e-8), n_points=int(t_fit.size))


# ---------------------------------------------------------------------------
# CSV export
# ---------------------------------------------------------------------------


def write_eigen_csv(grid: Grid, path) -> None:
    """Per-mode eigenvalue table over the grid frequency lattice."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["xi1", "xi2", "lambda_plus_re", "lambda_plus_im", "lambda_minus_re", "lambda_minus_im", "regime"])
        for i in range(grid.nx):
            for jj in range(grid.ny):
                x1 = float(grid.k1[i, 0])
                x2 = float(grid.k2[0, jj])
                if x1 == 0.0 and x2 == 0.0:
                    continue
                e = eigenvalues((x1, x2))
                w.writerow(
                    [x1, x2, e.lambda_plus.real, e.lambda_plus.imag, e.lambda_minus.real, e.lambda_minus.imag, regime((x1, x2))]
                )


def write_block_energy_csv(traj: LinearTrajectory, path) -> None:
    table = block_energy_series(traj)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "j", "k", "g_sq"])
        for (j, k), series in sorted(table.items()):
            for t, val in zip(traj.times, series):
                w.writerow([float(t), j, k, float(val)])
