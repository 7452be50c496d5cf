"""Initial data: Gaussians, solitons, one-sided singular profiles, mollifications."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .cutoff import mollifier_rho
from .spectral import ContractViolation, Grid, RealField, SeamViolation

__all__ = [
    "Gaussian",
    "Soliton",
    "OneSidedSingular",
    "Mollified",
    "Samples",
    "DatumSpec",
    "make_datum",
    "profile",
    "fourier_decay_exponent",
]


@dataclass(frozen=True)
class Gaussian:
    amplitude: float = 1.0
    center: float = 0.0
    width: float = 1.0

    def __call__(self, x):
        return self.amplitude * np.exp(-(((x - self.center) / self.width) ** 2))

    breakpoints = ()


@dataclass(frozen=True)
class Soliton:
    """Periodic BO travelling wave of speed ``c`` centred at ``x_c``."""

    c: float = 1.0
    x_c: float = 0.0


@dataclass(frozen=True)
class OneSidedSingular:
    """``A (x0 - x)_+^gamma w(x) + background``.

    ``w`` is a smooth bump equal to 1 at ``x0`` and supported on
    ``(x0 - bump_width, x0 + bump_width)``, so the profile vanishes
    identically to the right of ``x0`` and is singular only as ``x -> x0-``.
    """

    gamma: float = 1.3
    x0: float = 0.0
    amplitude: float = 0.5
    bump_width: float = 4.0
    background: Optional["DatumSpec"] = None

    def __post_init__(self):
        if not (1.0 < self.gamma < 2.0):
            raise ContractViolation(f"one-sided datum needs gamma in (1, 2), got {self.gamma!r}")
        if not self.bump_width > 0:
            raise ContractViolation("bump_width must be positive")

    def singular_part(self, x):
        x = np.asarray(x, dtype=float)
        s = (x - self.x0) / self.bump_width
        w = np.zeros_like(x)
        inside = np.abs(s) < 1
        w[inside] = np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
        return self.amplitude * np.maximum(self.x0 - x, 0.0) ** self.gamma * w

    def __call__(self, x):
        out = self.singular_part(x)
        if self.background is not None:
            out = out + profile(self.background)(x)
        return out

    @property
    def breakpoints(self):
        return (self.x0,)


@dataclass(frozen=True)
class Mollified:
    """``rho_tau * inner`` evaluated by quadrature against the analytic profile."""

    inner: "DatumSpec"
    tau: float

    def __post_init__(self):
        if not self.tau > 0:
            raise ContractViolation("mollification width tau must be positive")


@dataclass(frozen=True, eq=False)
class Samples:
    values: tuple


DatumSpec = Union[Gaussian, Soliton, OneSidedSingular, Mollified, Samples]


def profile(spec: DatumSpec):
    """Vectorized callable ``x -> u0(x)`` for analytic data kinds."""
    if isinstance(spec, (Gaussian, OneSidedSingular)):
        return spec
    if isinstance(spec, Mollified):
        inner = profile(spec.inner)
        breaks = tuple(getattr(spec.inner, "breakpoints", ()))
        return lambda x: _mollify(inner, breaks, np.asarray(x, dtype=float), spec.tau)
    raise ContractViolation(f"datum kind {type(spec).__name__} has no analytic profile")


_GL_X, _GL_W = np.polynomial.legendre.leggauss(20)


def _panel_nodes(a, b, graded_to: Optional[str], n_panels: int = 12, ratio: float = 0.3):
    """Composite Gauss-Legendre nodes on ``[a, b]`` (arrays of intervals).

    With ``graded_to`` = "a" or "b" the panels shrink geometrically toward
    that end point to resolve an algebraic end-point singularity.
    """
    a = np.asarray(a, dtype=float)[:, None]
    b = np.asarray(b, dtype=float)[:, None]
    if graded_to is None:
        edges = np.linspace(0.0, 1.0, n_panels + 1)
    else:
        # geometric panels toward 0 merged with a uniform partition
        g = ratio ** np.arange(n_panels)[::-1]
        edges = np.union1d(np.concatenate(([0.0], g)), np.linspace(0.0, 1.0, n_panels + 1))
        if graded_to == "b":
            edges = 1.0 - edges[::-1]
    lo, hi = edges[:-1], edges[1:]
    # reference nodes in [0, 1] for every panel
    ref = (lo[:, None] + 0.5 * (hi - lo)[:, None] * (_GL_X[None, :] + 1)).ravel()
    wref = (0.5 * (hi - lo)[:, None] * _GL_W[None, :]).ravel()
    nodes = a + (b - a) * ref[None, :]
    weights = (b - a) * wref[None, :]
    return nodes, weights


def _mollify(func, breaks, x: np.ndarray, tau: float) -> np.ndarray:
    flat = x.ravel()
    out = np.zeros_like(flat)
    sing = [bp for bp in breaks]
    # s* such that x - tau s* hits a breakpoint
    split = np.full(flat.shape, np.nan)
    for bp in sing:
        s_star = (flat - bp) / tau
        hit = np.abs(s_star) < 1
        split = np.where(hit & np.isnan(split), s_star, split)
    has = ~np.isnan(split)
    if np.any(~has):
        idx = np.where(~has)[0]
        nodes, weights = _panel_nodes(-np.ones(idx.size), np.ones(idx.size), None)
        vals = mollifier_rho(nodes) * func(flat[idx, None] - tau * nodes)
        out[idx] = np.sum(vals * weights, axis=1)
    if np.any(has):
        idx = np.where(has)[0]
        s = split[idx]
        for lo, hi, toward in ((-np.ones(idx.size), s, "b"), (s, np.ones(idx.size), "a")):
            nodes, weights = _panel_nodes(lo, hi, toward)
            vals = mollifier_rho(nodes) * func(flat[idx, None] - tau * nodes)
            out[idx] += np.sum(vals * weights, axis=1)
    return out.reshape(x.shape)


def _spectral_mollify(samples: np.ndarray, grid: Grid, tau: float) -> np.ndarray:
    k = grid.wavenumbers
    nodes, weights = _panel_nodes(np.array([-1.0]), np.array([1.0]), None, n_panels=16)
    rho_hat = np.sum(mollifier_rho(nodes[0])[None, :] * np.cos(np.outer(k * tau, nodes[0])) * weights[0], axis=1)
    return np.fft.ifft(np.fft.fft(samples) * rho_hat).real


def _check_inside(grid: Grid, lo: float, hi: float, what: str):
    margin = grid.length / 8
    if lo - grid.x_left < margin or grid.x_right - hi < margin:
        raise SeamViolation(
            f"{what} [{lo:.4g}, {hi:.4g}] lies within L/8 = {margin:.4g} of the periodic seam"
        )


def make_datum(spec: DatumSpec, grid: Grid) -> RealField:
    if isinstance(spec, Samples):
        return RealField(grid, np.asarray(spec.values, dtype=float))
    if isinstance(spec, Soliton):
        from .evolution import periodic_soliton

        return RealField(grid, periodic_soliton(spec.c, grid, x_c=spec.x_c))
    if isinstance(spec, Gaussian):
        _check_inside(grid, spec.center - 6 * spec.width, spec.center + 6 * spec.width, "Gaussian (6 widths)")
    if isinstance(spec, OneSidedSingular):
        _check_inside(grid, spec.x0 - spec.bump_width, spec.x0, "singular point and bump support")
        if isinstance(spec.background, Gaussian):
            make_datum(spec.background, grid)
    if isinstance(spec, Mollified):
        inner = spec.inner
        if isinstance(inner, (Gaussian, OneSidedSingular)):
            make_datum(inner, grid)
        if isinstance(inner, OneSidedSingular):
            _check_inside(grid, inner.x0 - inner.bump_width - spec.tau, inner.x0 + spec.tau,
                          "singular point and bump support")
        if isinstance(inner, (Samples, Soliton)):
            base = make_datum(inner, grid).samples
            return RealField(grid, _spectral_mollify(base, grid, spec.tau))
    return RealField(grid, profile(spec)(grid.x))


def fourier_decay_exponent(u: RealField, k_min: float, k_max: float) -> float:
    """Least-squares slope ``p`` in ``|c_k| ~ |k|^{-p}`` over dyadic shells.

    Each dyadic shell ``[K, 2K)`` contributes the RMS coefficient magnitude,
    which smooths out the oscillation of individual coefficients.
    """
    k = np.abs(u.grid.wavenumbers)
    c = np.abs(np.fft.fft(u.samples) / u.grid.n)
    logk, logc = [], []
    K = k_min
    while 2 * K <= k_max * (1 + 1e-12):
        shell = (k >= K) & (k < 2 * K)
        if shell.any():
            logk.append(np.log(K * np.sqrt(2)))
            logc.append(0.5 * np.log(np.mean(c[shell] ** 2)))
        K *= 2
    if len(logk) < 2:
        raise ContractViolation("need at least two dyadic shells to fit a decay rate")
    slope = np.polyfit(logk, logc, 1)[0]
    return float(-slope)
