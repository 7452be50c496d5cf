"""Empirical constants for the commutator, Leibniz and interpolation bounds.

Each check returns a left/right ratio; a suite runs seeded random families at
a base resolution and at twice that resolution and reports the maximum ratio
and its relative change.  A finite maximum that is stable under refinement is
the observable content of "there exists c".

Normalization: coefficients are ``np.fft.fft(u) / n`` (see
:mod:`boreg.spectral`), so ``||h_hat'||_1 = sum_j |k_j c_j|``.  Sup norms are
taken on a 4x oversampled trigonometric interpolant.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy.special import erf

from . import spectral as sp
from .spectral import ContractViolation, Grid, RealField

__all__ = [
    "TestFunctionFamily",
    "RatioReport",
    "commutator_hilbert",
    "commutator_halfder",
    "halfder_commutator_coefficients",
    "symbol_inequality_scan",
    "leibniz_ratio",
    "interpolation_check",
    "run_suite",
    "plateau",
]

OVERSAMPLE = 4


def _norm(f: RealField, p) -> float:
    if p == np.inf or p == "inf":
        return sp.lp_norm(sp.oversample(f, OVERSAMPLE), np.inf)
    return sp.lp_norm(f, p)


def plateau(x, left: float, right: float, width: float):
    """Gaussian-mollified indicator of ``[left, right]`` (an erf plateau)."""
    return 0.5 * (erf((x - left) / width) - erf((x - right) / width))


class TestFunctionFamily:
    """Seeded smooth test functions defined on the whole real line.

    Members are callables ``x -> values`` so the same function can be
    sampled on any grid.  Sample ``i`` draws from its own generator
    ``default_rng([seed, i])``, independent of evaluation order.
    """

    __test__ = False
    KINDS = ("trig", "gaussian", "ramp")

    def __init__(self, kind: str, count: int = 100, seed: int = 0, length: float = 40.0):
        if kind not in self.KINDS:
            raise ContractViolation(f"unknown family kind {kind!r}")
        self.kind = kind
        self.count = count
        self.seed = seed
        self.length = length

    def member(self, i: int, salt: int = 0) -> Callable:
        rng = np.random.default_rng([self.seed, salt, self.KINDS.index(self.kind), i])
        L = self.length
        if self.kind == "trig":
            modes = np.arange(1, 11)
            a = rng.normal(size=modes.size) / modes
            b = rng.normal(size=modes.size) / modes
            k = 2 * np.pi * modes / L
            return lambda x: np.cos(np.outer(x, k)) @ a + np.sin(np.outer(x, k)) @ b
        if self.kind == "gaussian":
            amps = rng.normal(size=3)
            centers = rng.uniform(-L / 8, L / 8, size=3)
            widths = rng.uniform(0.8, 1.5, size=3)
            return lambda x: sum(A * np.exp(-(((x - c) / s) ** 2)) for A, c, s in zip(amps, centers, widths))
        left = rng.uniform(-L / 5, -L / 12)
        right = rng.uniform(L / 12, L / 5)
        width = rng.uniform(0.8, 1.5)
        return lambda x: plateau(x, left, right, width)

    def sample(self, i: int, grid: Grid, salt: int = 0) -> RealField:
        return RealField(grid, self.member(i, salt)(grid.x))


@dataclass
class RatioReport:
    inequality: str
    ratios: list
    ratios_refined: list
    max_ratio: float
    max_ratio_refined: float
    refinement_change: float
    normalization: str = "c_j = fft(u)/n; ||h_hat'||_1 = sum |k_j c_j|; sup norms on 4x oversampled grid"
    extra: dict = field(default_factory=dict)

    @property
    def finite(self) -> bool:
        vals = np.array(self.ratios + self.ratios_refined, dtype=float)
        return bool(np.all(np.isfinite(vals)) and np.all(vals >= 0))

    def to_dict(self, include_samples: bool = False) -> dict:
        d = asdict(self)
        if not include_samples:
            d.pop("ratios")
            d.pop("ratios_refined")
        d["finite"] = self.finite
        return d


def commutator_hilbert(psi: RealField, f: RealField, l: int, m: int, p=2) -> float:
    """``||d^l [H; psi] d^m f||_p / (||d^{l+m} psi||_inf ||f||_p)``."""
    if l + m < 1:
        raise ContractViolation("commutator bound needs l + m >= 1")
    if p not in (2, 4):
        raise ContractViolation("commutator ratio supports p in {2, 4}")
    fp = _norm(f, p)
    if fp == 0:
        raise ContractViolation("||f||_p = 0")
    dmf = sp.spatial_derivative(f, m)
    comm = sp.hilbert_transform(psi * dmf) - psi * sp.hilbert_transform(dmf)
    g = sp.spatial_derivative(comm, l)
    num = _norm(g, p)
    den = _norm(sp.spatial_derivative(psi, l + m), np.inf) * fp
    scale = _norm(psi, np.inf) * _norm(dmf, p)
    if num <= 1e-13 * max(scale, 1e-300):
        return 0.0
    return float(num / den)


def halfder_commutator_coefficients(h_hat: np.ndarray, f_hat: np.ndarray, grid: Grid) -> np.ndarray:
    """Fourier coefficients of ``[D^{1/2}; h] d_x f`` by the double sum.

    ``out_j = sum_q (|k_j|^{1/2} - |k_q|^{1/2}) (i k_q) h_hat_{j-q} f_hat_q``
    with ``j - q`` taken modulo ``n`` (the same cyclic convolution the grid
    product performs).
    """
    n = grid.n
    k = grid.wavenumbers
    ik = sp.derivative_symbol(grid, 1)
    rootk = np.sqrt(np.abs(k))
    j = np.arange(n)
    diff = (j[:, None] - j[None, :]) % n
    weight = (rootk[:, None] - rootk[None, :]) * (ik * f_hat)[None, :]
    return np.sum(weight * h_hat[diff], axis=1)


def commutator_halfder(h: RealField, f: RealField, return_routes: bool = False):
    """``||[D^{1/2}; h] d_x f||_2 / (||h_hat'||_1 ||D^{1/2} f||_2)``.

    Computed both as an operator product in physical space and by the double
    sum; the routes must agree to 1e-10 (relative).
    """
    grid = f.grid
    dxf = sp.spatial_derivative(f, 1)
    operator = sp.fractional_derivative(h * dxf, 0.5) - h * sp.fractional_derivative(dxf, 0.5)
    coeffs = halfder_commutator_coefficients(np.fft.fft(h.samples) / grid.n, np.fft.fft(f.samples) / grid.n, grid)
    double = np.fft.ifft(coeffs * grid.n).real
    scale = max(np.max(np.abs(operator.samples)), np.max(np.abs(double)), 1e-300)
    agreement = float(np.max(np.abs(operator.samples - double)) / scale)
    h_hat = np.fft.fft(h.samples) / grid.n
    l1 = float(np.sum(np.abs(grid.wavenumbers * h_hat)))
    dhalf = sp.lp_norm(sp.fractional_derivative(f, 0.5), 2)
    if l1 * dhalf == 0:
        raise ContractViolation("zero denominator in the half-derivative commutator ratio")
    ratio = sp.lp_norm(operator, 2) / (l1 * dhalf)
    if return_routes:
        return float(ratio), agreement
    return float(ratio)


def symbol_inequality_scan(limit: float = 100.0, step: float = 0.05, chunk: int = 256) -> dict:
    """Sup of ``||xi|^{1/2} - |eta|^{1/2}| |eta| / (|eta|^{1/2} |xi - eta|)`` on a square grid.

    Points with ``xi == eta`` or ``eta == 0`` are excluded.
    """
    n = int(round(2 * limit / step)) + 1
    axis = np.linspace(-limit, limit, n)
    best, arg = -np.inf, (np.nan, np.nan)
    for start in range(0, n, chunk):
        xi = axis[start:start + chunk, None]
        eta = axis[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            num = np.abs(np.sqrt(np.abs(xi)) - np.sqrt(np.abs(eta))) * np.abs(eta)
            den = np.sqrt(np.abs(eta)) * np.abs(xi - eta)
            r = num / den
        valid = (np.abs(xi - eta) > 0.5 * step) & (np.abs(eta) > 0.5 * step)
        r = np.where(valid, r, -np.inf)
        idx = np.unravel_index(np.argmax(r), r.shape)
        if r[idx] > best:
            best = float(r[idx])
            arg = (float(axis[start + idx[0]]), float(axis[idx[1]]))
    return {"sup": best, "argmax_xi": arg[0], "argmax_eta": arg[1], "limit": limit, "step": step}


_LEIBNIZ_EXPONENTS = {(np.inf, 2), (2, np.inf), (4, 4)}


def leibniz_ratio(f: RealField, g: RealField, alpha: float = 0.5, exponents=(2, np.inf, 2, 2, np.inf)) -> float:
    """``||D^a(fg)||_p / (||f||_p1 ||D^a g||_p2 + ||D^a f||_p3 ||g||_p4)``."""
    p, p1, p2, p3, p4 = (np.inf if e in ("inf", np.inf) else e for e in exponents)
    if not 0 < alpha < 1:
        raise ContractViolation("alpha must lie in (0, 1)")
    if p != 2 or (p1, p2) not in _LEIBNIZ_EXPONENTS or (p3, p4) not in _LEIBNIZ_EXPONENTS:
        raise ContractViolation(f"unsupported or inconsistent exponents {exponents!r}")
    lhs = sp.lp_norm(sp.fractional_derivative(f * g, alpha), 2)
    rhs = (_norm(f, p1) * _norm(sp.fractional_derivative(g, alpha), p2)
           + _norm(sp.fractional_derivative(f, alpha), p3) * _norm(g, p4))
    if rhs == 0:
        raise ContractViolation("zero right-hand side in the Leibniz ratio")
    return float(lhs / rhs)


def interpolation_check(f: RealField) -> dict:
    """Ratios of the three interpolation lines (plus their chained halves)."""
    if abs(f.mean()) > 1e-12 * max(sp.lp_norm(f, np.inf), 1e-300):
        raise ContractViolation("interpolation checks need a mean-zero field")
    D = sp.fractional_derivative
    n4 = sp.lp_norm(f, 4)
    n2 = sp.lp_norm(f, 2)
    d14 = sp.lp_norm(D(f, 0.25), 2)
    d12_2 = sp.lp_norm(D(f, 0.5), 2)
    d12_4 = sp.lp_norm(D(f, 0.5), 4)
    d34 = sp.lp_norm(D(f, 0.75), 2)
    dx4 = sp.lp_norm(sp.spatial_derivative(f, 1), 4)
    dx2 = sp.lp_norm(sp.spatial_derivative(f, 1), 2)
    dens = [d14, dx4 * n4, d34, d12_2 * n2, dx2 * n2]
    if min(dens) == 0:
        raise ContractViolation("zero denominator in interpolation ratios")
    return {
        "lp4_by_d14": n4 / d14,
        "d12_lp4_by_dx": d12_4 / np.sqrt(dx4 * n4),
        "d12_lp4_by_d34": d12_4 / d34,
        "d14_by_d12": d14 / np.sqrt(d12_2 * n2),
        "d34_by_dx": d34 / (dx2 ** 0.75 * n2 ** 0.25),
    }


def _ce_pair(i, grid, seed, psi_fam, f_fam):
    psi = psi_fam.sample(i, grid, salt=1)
    f = f_fam.sample(i, grid, salt=2)
    return psi, f


def run_suite(seed: int = 0, count: int = 100, n: int = 256, length: float = 40.0) -> list:
    """All inequality checks over ``count`` samples at ``n`` and ``2 n`` points."""
    trig = TestFunctionFamily("trig", count, seed, length)
    gauss = TestFunctionFamily("gaussian", count, seed, length)
    ramp = TestFunctionFamily("ramp", count, seed, length)
    psi_fams = (ramp, gauss)
    f_fams = (trig, gauss)

    def per_grid(grid: Grid) -> dict:
        out: dict = {}
        agreement = 0.0
        for i in range(count):
            psi_fam = psi_fams[i % 2]
            f_fam = f_fams[(i // 2) % 2]
            psi = psi_fam.sample(i, grid, salt=1)
            f = f_fam.sample(i, grid, salt=2)
            g = gauss.sample(i, grid, salt=3)
            for l, m in ((0, 1), (1, 1), (1, 3)):
                for p in (2, 4):
                    out.setdefault(f"CE_l{l}_m{m}_p{p}", []).append(commutator_hilbert(psi, f, l, m, p))
            r, a = commutator_halfder(psi, f, return_routes=True)
            agreement = max(agreement, a)
            out.setdefault("CE2", []).append(r)
            out.setdefault("FD_inf2_2inf", []).append(leibniz_ratio(f, g, 0.5, (2, np.inf, 2, 2, np.inf)))
            out.setdefault("FD_44_44", []).append(leibniz_ratio(f, g, 0.5, (2, 4, 4, 4, 4)))
            fz = f - f.mean()
            for key, val in interpolation_check(fz).items():
                out.setdefault(f"INT_{key}", []).append(val)
        out["_agreement"] = agreement
        return out

    base = Grid.centered(n, length)
    coarse = per_grid(base)
    fine = per_grid(base.refined())
    reports = []
    for key in coarse:
        if key.startswith("_"):
            continue
        mc, mf = max(coarse[key]), max(fine[key])
        change = abs(mf - mc) / mc if mc > 0 else 0.0
        extra = {}
        if key == "CE2":
            extra["route_agreement"] = max(coarse["_agreement"], fine["_agreement"])
        reports.append(RatioReport(key, coarse[key], fine[key], mc, mf, change, extra=extra))
    return reports
