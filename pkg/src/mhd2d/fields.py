"""Initial-data recipes shared by experiments and tests."""

from __future__ import annotations

import numpy as np

from mhd2d.grid import Grid, RealField, SpectralField, from_spectral, l2_norm, to_spectral

__all__ = [
    "gaussian_bump",
    "bump_dx1",
    "single_mode",
    "random_band_field",
    "random_solenoidal",
    "mode_field",
]


def _wrapped_offsets(grid: Grid, center: tuple[float, float]):
    dx1 = np.mod(grid.x1 - center[0] + 0.5 * grid.lx, grid.lx) - 0.5 * grid.lx
    dx2 = np.mod(grid.x2 - center[1] + 0.5 * grid.ly, grid.ly) - 0.5 * grid.ly
    return dx1 + 0.0 * dx2, dx2 + 0.0 * dx1


def gaussian_bump(grid: Grid, amplitude: float, center: tuple[float, float] | None = None, width: float = 0.5) -> RealField:
    """amplitude * exp(-(|x - center|^2) / (2 width^2)), argument wrapped."""
    if center is None:
        center = (0.5 * grid.lx, 0.5 * grid.ly)
    d1, d2 = _wrapped_offsets(grid, center)
    return RealField(grid, amplitude * np.exp(-(d1**2 + d2**2) / (2.0 * width**2)))


def bump_dx1(grid: Grid, amplitude: float, center: tuple[float, float] | None = None, width: float = 0.5) -> RealField:
    """x1-derivative-shaped bump: zero x1-integral along every row."""
    if center is None:
        center = (0.5 * grid.lx, 0.5 * grid.ly)
    d1, d2 = _wrapped_offsets(grid, center)
    env = np.exp(-(d1**2 + d2**2) / (2.0 * width**2))
    return RealField(grid, -amplitude * d1 / width * env)


def single_mode(grid: Grid, m: int, n: int, amplitude: float = 1.0, phase: float = 0.0) -> RealField:
    """Real mode amplitude * cos(xi . x + phase) at integer mode (m, n)."""
    k1 = 2.0 * np.pi * m / grid.lx
    k2 = 2.0 * np.pi * n / grid.ly
    return RealField(grid, amplitude * np.cos(k1 * grid.x1 + k2 * grid.x2 + phase))


def mode_field(grid: Grid, m: int, n: int, coeff: complex) -> RealField:
    """Real field whose spectral coefficient at (m, n) is ``coeff`` (and the
    conjugate at the mirror mode)."""
    c = np.zeros(grid.shape, dtype=complex)
    i, j = grid.mode_index(m, n)
    c[i, j] = coeff
    im, jm = grid.mode_index(-m, -n)
    c[im, jm] = np.conj(coeff)
    return from_spectral(SpectralField(grid, c))


def random_band_field(
    grid: Grid,
    rng: np.random.Generator,
    kmin: float = 1.0,
    kmax: float = 8.0,
    amplitude: float = 1.0,
    decay: float = 0.0,
    normalize: str = "l2",
) -> RealField:
    """Zero-mean random field band-limited to kmin <= |m| <= kmax.

    ``decay`` applies a spectral envelope exp(-decay |m|^2); normalization is
    by L2 norm ('l2') or sup norm ('inf')."""
    noise = rng.standard_normal(grid.shape)
    c = to_spectral(RealField(grid, noise)).coeffs
    mm = np.sqrt(grid.m1.astype(float) ** 2 + grid.m2.astype(float) ** 2)
    mask = (mm >= kmin) & (mm <= kmax)
    c = np.where(mask, c * np.exp(-decay * mm**2), 0.0)
    c[0, 0] = 0.0
    f = from_spectral(SpectralField(grid, c))
    scale = l2_norm(f) if normalize == "l2" else float(np.max(np.abs(f.samples)))
    if scale == 0.0:
        return RealField(grid, f.samples)
    return RealField(grid, amplitude * f.samples / scale)


def random_solenoidal(
    grid: Grid,
    rng: np.random.Generator,
    kmin: float = 1.0,
    kmax: float = 8.0,
    amplitude: float = 1.0,
    decay: float = 0.0,
) -> tuple[RealField, RealField]:
    """Divergence-free pair from a random stream function: (d2 chi, -d1 chi)."""
    chi = random_band_field(grid, rng, kmin, kmax, 1.0, decay)
    ch = to_spectral(chi).coeffs
    u1 = from_spectral(SpectralField(grid, 1j * grid.k2 * ch))
    u2 = from_spectral(SpectralField(grid, -1j * grid.k1 * ch))
    scale = float(np.sqrt(l2_norm(u1) ** 2 + l2_norm(u2) ** 2))
    if scale == 0.0:
        return u1, u2
    return (
        RealField(grid, amplitude * u1.samples / scale),
        RealField(grid, amplitude * u2.samples / scale),
    )
