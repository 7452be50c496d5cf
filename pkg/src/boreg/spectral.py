"""Periodic pseudospectral substrate.

Fourier convention used everywhere in the package: for samples ``u_i`` on a
grid of ``n`` points the coefficients are

    c_j = (1/n) * sum_i u_i exp(-i k_j (x_i - x_left)),

stored in numpy FFT order (``j = 0, 1, ..., n/2 - 1, -n/2, ..., -1``).  With
this normalization Parseval reads

    h * sum_i |u_i|^2 = L * sum_j |c_j|^2,

and every L2 / Sobolev norm in the package is routed through
:func:`parseval_l2_squared` so the factor ``L`` lives in exactly one place.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = [
    "Grid",
    "RealField",
    "SpectralField",
    "ContractViolation",
    "SeamViolation",
    "forward",
    "inverse",
    "hilbert_transform",
    "fractional_derivative",
    "spatial_derivative",
    "dealias",
    "dealias_mask",
    "lp_norm",
    "sobolev_norm",
    "parseval_l2_squared",
    "inner",
    "oversample",
    "spectral_tail_fraction",
]


class ContractViolation(ValueError):
    """Raised when an operation's preconditions are not met."""


class SeamViolation(ContractViolation):
    """Something that must stay away from the periodic seam comes too close."""


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid:
    """Uniform periodic sampling of ``[x_left, x_left + length)``."""

    n: int
    length: float
    x_left: float = 0.0

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or not _is_power_of_two(int(self.n)) or self.n < 8:
            raise ContractViolation(f"grid size must be a power of two >= 8, got {self.n!r}")
        if not (np.isfinite(self.length) and self.length > 0):
            raise ContractViolation(f"domain length must be positive, got {self.length!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "length", float(self.length))
        object.__setattr__(self, "x_left", float(self.x_left))

    @classmethod
    def centered(cls, n: int, length: float) -> "Grid":
        return cls(n=n, length=length, x_left=-0.5 * length)

    @property
    def spacing(self) -> float:
        return self.length / self.n

    @property
    def x_right(self) -> float:
        return self.x_left + self.length

    @cached_property
    def x(self) -> np.ndarray:
        x = self.x_left + self.spacing * np.arange(self.n)
        x.setflags(write=False)
        return x

    @cached_property
    def mode_index(self) -> np.ndarray:
        """Integer mode numbers ``j`` in FFT order."""
        j = np.fft.fftfreq(self.n, d=1.0 / self.n).astype(np.int64)
        j.setflags(write=False)
        return j

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """``k_j = 2 pi j / L`` in FFT order; index ``n // 2`` is the Nyquist mode."""
        k = 2.0 * np.pi * self.mode_index / self.length
        k.setflags(write=False)
        return k

    @property
    def nyquist_index(self) -> int:
        return self.n // 2

    def refined(self, factor: int = 2) -> "Grid":
        return Grid(self.n * factor, self.length, self.x_left)

    def field(self, samples) -> "RealField":
        return RealField(self, samples)


@dataclass(frozen=True, eq=False)
class RealField:
    grid: Grid
    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        s = np.array(self.samples, dtype=float)
        if s.shape != (self.grid.n,):
            raise ContractViolation(
                f"sample count {s.shape} does not match grid size {self.grid.n}"
            )
        if not np.all(np.isfinite(s)):
            raise ContractViolation("field samples must be finite")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @classmethod
    def from_function(cls, grid: Grid, func) -> "RealField":
        return cls(grid, func(grid.x))

    def __add__(self, other):
        return RealField(self.grid, self.samples + _samples_of(other, self.grid))

    def __sub__(self, other):
        return RealField(self.grid, self.samples - _samples_of(other, self.grid))

    def __mul__(self, other):
        return RealField(self.grid, self.samples * _samples_of(other, self.grid))

    __rmul__ = __mul__

    def __neg__(self):
        return RealField(self.grid, -self.samples)

    def mean(self) -> float:
        return float(np.mean(self.samples))


def _samples_of(other, grid: Grid):
    if isinstance(other, RealField):
        if other.grid != grid:
            raise ContractViolation("fields live on different grids")
        return other.samples
    return other


@dataclass(frozen=True, eq=False)
class SpectralField:
    grid: Grid
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        if c.shape != (self.grid.n,):
            raise ContractViolation(
                f"coefficient count {c.shape} does not match grid size {self.grid.n}"
            )
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    def hermitian_defect(self) -> float:
        """Relative violation of ``c_{-j} = conj(c_j)``."""
        c = self.coeffs
        mirror = np.conj(c[(-self.grid.mode_index) % self.grid.n])
        scale = max(np.max(np.abs(c)), np.finfo(float).tiny)
        return float(np.max(np.abs(c - mirror)) / scale)


def _check_grid(f, grid: Grid | None = None):
    if grid is not None and f.grid != grid:
        raise ContractViolation("grid mismatch")


def forward(f: RealField) -> SpectralField:
    if f.samples.shape != (f.grid.n,):
        raise ContractViolation("size mismatch between samples and grid")
    return SpectralField(f.grid, np.fft.fft(f.samples) / f.grid.n)


def inverse(F: SpectralField) -> RealField:
    if F.coeffs.shape != (F.grid.n,):
        raise ContractViolation("size mismatch between coefficients and grid")
    return RealField(F.grid, np.fft.ifft(F.coeffs * F.grid.n).real)


def _apply_multiplier(f: RealField, symbol: np.ndarray) -> RealField:
    c = np.fft.fft(f.samples)
    return RealField(f.grid, np.fft.ifft(c * symbol).real)


def hilbert_symbol(grid: Grid) -> np.ndarray:
    sym = -1j * np.sign(grid.wavenumbers)
    sym[grid.nyquist_index] = 0.0
    return sym


def derivative_symbol(grid: Grid, m: int) -> np.ndarray:
    sym = (1j * grid.wavenumbers) ** m
    if m % 2 == 1:
        sym[grid.nyquist_index] = 0.0
    return sym


def fractional_symbol(grid: Grid, s: float) -> np.ndarray:
    sym = np.abs(grid.wavenumbers) ** s
    sym[0] = 0.0
    return sym


def hilbert_transform(f: RealField) -> RealField:
    """Periodic Hilbert transform, symbol ``-i sgn(k)`` with ``sgn(0) = 0``."""
    return _apply_multiplier(f, hilbert_symbol(f.grid))


def fractional_derivative(f: RealField, s: float) -> RealField:
    """``D^s f`` with symbol ``|k|^s``; the mean mode is always annihilated."""
    if not (s >= 0):
        raise ContractViolation(f"fractional order must be nonnegative, got {s!r}")
    return _apply_multiplier(f, fractional_symbol(f.grid, s))


def spatial_derivative(f: RealField, m: int = 1) -> RealField:
    if m < 0 or int(m) != m:
        raise ContractViolation(f"derivative order must be a nonnegative integer, got {m!r}")
    if m == 0:
        return f
    return _apply_multiplier(f, derivative_symbol(f.grid, int(m)))


def dealias_mask(grid: Grid) -> np.ndarray:
    """Boolean mask of modes kept by the 2/3 rule (``|j| <= n/3``)."""
    return np.abs(grid.mode_index) <= grid.n / 3.0


def dealias(F: SpectralField) -> SpectralField:
    return SpectralField(F.grid, np.where(dealias_mask(F.grid), F.coeffs, 0.0))


def parseval_l2_squared(grid: Grid, coeffs: np.ndarray, weight: np.ndarray | None = None) -> float:
    """``L * sum_j w_j |c_j|^2`` -- the single place the Parseval factor lives."""
    power = np.abs(coeffs) ** 2
    if weight is not None:
        power = power * weight
    return float(grid.length * np.sum(power))


_SUPPORTED_P = (1, 2, 4, np.inf)


def lp_norm(f: RealField, p=2) -> float:
    """Rectangle-rule L^p norm; ``p = inf`` is the sample maximum."""
    if p in ("inf", "infinity"):
        p = np.inf
    if p not in _SUPPORTED_P:
        raise ContractViolation(f"unsupported p={p!r}; choose from 1, 2, 4, inf")
    u = np.abs(f.samples)
    if p == np.inf:
        return float(np.max(u))
    return float((f.grid.spacing * np.sum(u**p)) ** (1.0 / p))


def sobolev_norm(f: RealField, s: float) -> float:
    """``(L * sum (1 + k^2)^s |c_j|^2)^{1/2}``; equals the L2 norm at ``s = 0``."""
    F = forward(f)
    weight = (1.0 + F.grid.wavenumbers**2) ** s
    return float(np.sqrt(parseval_l2_squared(F.grid, F.coeffs, weight)))


def inner(f: RealField, g: RealField) -> float:
    """L2 inner product by the rectangle rule."""
    _check_grid(g, f.grid)
    return float(f.grid.spacing * np.dot(f.samples, g.samples))


def oversample(f: RealField, factor: int = 4) -> RealField:
    """Trigonometric interpolation of ``f`` onto a grid ``factor`` times finer.

    The Nyquist coefficient is split evenly between the two mirrored modes so
    the interpolant stays real.
    """
    grid = f.grid
    fine = Grid(grid.n * factor, grid.length, grid.x_left)
    c = np.fft.fft(f.samples) / grid.n
    big = np.zeros(fine.n, dtype=complex)
    half = grid.n // 2
    big[:half] = c[:half]
    big[-half + 1:] = c[-half + 1:]
    big[half] = 0.5 * c[half]
    big[-half] = 0.5 * c[half]
    return RealField(fine, np.fft.ifft(big * fine.n).real)


def spectral_tail_fraction(f: RealField, keep: float = 1.0 / 3.0) -> float:
    """Fraction of spectral energy in modes with ``|j| > keep * n``."""
    c = np.fft.fft(f.samples)
    power = np.abs(c) ** 2
    total = power.sum()
    if total == 0:
        return 0.0
    tail = power[np.abs(f.grid.mode_index) > keep * f.grid.n].sum()
    return float(tail / total)
