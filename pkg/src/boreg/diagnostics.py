"""Windowed energies, smoothing fluxes and tail norms along trajectories.

Every window is the moving cut-off ``chi_{eps,b}(x - x0 + v t)``.  All
integrals are rectangle-rule sums over the periodic grid; ``infinity`` upper
limits become the right end of the domain (the seam), whose distance from
the cut is reported as a margin.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import spectral as sp
from .cutoff import CutoffFamily, CutoffParams
from .evolution import PdeSpec, Trajectory, _nonlinear_hat
from .spectral import ContractViolation, RealField, SeamViolation

__all__ = [
    "WindowSpec",
    "TailSpec",
    "DiagnosticRecord",
    "DiagnosticRecorder",
    "windowed_energy",
    "smoothing_density",
    "eta_smoothing_density",
    "half_windowed_energy",
    "gradient_flux_density",
    "tail_energy",
    "energy_identity_terms",
    "energy_identity_residual",
    "seam_energy_fraction",
]


@dataclass(frozen=True)
class WindowSpec:
    m: int = 2
    eps: float = 0.5
    b: float = 2.5
    v: float = 1.0
    x0: float = 0.0
    name: str = ""

    def __post_init__(self):
        if self.m < 0 or int(self.m) != self.m:
            raise ContractViolation("window derivative order m must be a nonnegative integer")
        if self.v < 0:
            raise ContractViolation("window speed v must be >= 0")
        CutoffParams(self.eps, self.b)

    @property
    def cutoff(self) -> CutoffParams:
        return CutoffParams(self.eps, self.b, self.x0, self.v)

    @property
    def family(self) -> CutoffFamily:
        return CutoffFamily(self.cutoff)

    @property
    def label(self) -> str:
        return self.name or f"m{self.m}_eps{self.eps:g}_b{self.b:g}_v{self.v:g}_x{self.x0:g}"


@dataclass(frozen=True)
class TailSpec:
    """Fixed tail cut ``x0 + eps - v t`` used in place of each window's own."""

    k: int = 2
    eps: float = 0.0
    v: float = 0.0
    x0: float = 0.0


def _weights(u: RealField, w: WindowSpec, t: float, which: str) -> np.ndarray:
    fam = w.family
    return getattr(fam, which)(u.grid.x, t)


def windowed_energy(u: RealField, w: WindowSpec, t: float) -> float:
    """``int (d^m u)^2 chi(x - x0 + v t) dx``."""
    dm = sp.spatial_derivative(u, w.m).samples
    return float(u.grid.spacing * np.sum(dm**2 * _weights(u, w, t, "chi")))


def smoothing_density(u: RealField, w: WindowSpec, t: float) -> float:
    """``int (D^{1/2} d^m u)^2 chi'(x - x0 + v t) dx``."""
    g = sp.fractional_derivative(sp.spatial_derivative(u, w.m), 0.5).samples
    return float(u.grid.spacing * np.sum(g**2 * _weights(u, w, t, "chi_prime")))


def eta_smoothing_density(u: RealField, w: WindowSpec, t: float) -> float:
    """``int (D^{1/2}(d^m u eta))^2 dx`` with ``eta^2 = chi'``."""
    prod = RealField(u.grid, sp.spatial_derivative(u, w.m).samples * _weights(u, w, t, "eta"))
    g = sp.fractional_derivative(prod, 0.5).samples
    return float(u.grid.spacing * np.sum(g**2))


def half_windowed_energy(u: RealField, w: WindowSpec, t: float) -> float:
    """``int (D^{1/2}(d^m u chi))^2 dx``."""
    prod = RealField(u.grid, sp.spatial_derivative(u, w.m).samples * _weights(u, w, t, "chi"))
    g = sp.fractional_derivative(prod, 0.5).samples
    return float(u.grid.spacing * np.sum(g**2))


def gradient_flux_density(u: RealField, w: WindowSpec, t: float) -> float:
    """``int (d^{m+1} u)^2 chi' chi dx``."""
    d = sp.spatial_derivative(u, w.m + 1).samples
    fam = w.family
    x = u.grid.x
    return float(u.grid.spacing * np.sum(d**2 * fam.chi_prime(x, t) * fam.chi(x, t)))


def tail_energy(u: RealField, k: int, t: float, eps: float, v: float, x0: float,
                return_margin: bool = False):
    """``int_{x0 + eps - v t}^{seam} (d^k u)^2 dx``.

    The cell containing the cut contributes its covered fraction.  Raises if
    the cut lies within four grid cells of either end of the domain.
    """
    grid = u.grid
    h = grid.spacing
    cut = x0 + eps - v * t
    if cut < grid.x_left + 4 * h or cut > grid.x_right - 4 * h:
        raise SeamViolation(f"tail cut {cut:.6g} lies within 4h of the periodic seam")
    d = sp.spatial_derivative(u, k).samples ** 2
    # cell i covers [x_i - h/2, x_i + h/2); the left half of cell 0 wraps to the seam
    frac = np.clip((grid.x + 0.5 * h - cut) / h, 0.0, 1.0)
    val = float(h * np.sum(d * frac) + 0.5 * h * d[0])
    if return_margin:
        return val, grid.x_right - cut
    return val


def seam_energy_fraction(u: RealField, margin_fraction: float = 1.0 / 16.0) -> float:
    """Share of ``int u^2`` within ``margin_fraction * L`` of the seam."""
    grid = u.grid
    x = grid.x
    m = margin_fraction * grid.length
    near = (x < grid.x_left + m) | (x >= grid.x_right - m)
    total = np.sum(u.samples**2)
    if total == 0:
        return 0.0
    return float(np.sum(u.samples[near] ** 2) / total)


def _linear_part(u: RealField, spec: PdeSpec) -> RealField:
    if spec.dispersion == "kdv":
        return -sp.spatial_derivative(u, 3)
    return sp.hilbert_transform(sp.spatial_derivative(u, 2))


def energy_identity_terms(u: RealField, w: WindowSpec, t: float, spec: PdeSpec,
                          dealias: bool = True) -> dict:
    """Spatial terms of the windowed energy identity at one instant.

    ``A1 = v int (d^m u)^2 chi'``, ``A2 = int d^m(Lu) d^m u chi`` (for BO and
    ``m = 2`` this is ``int H d^4 u d^2 u chi``) and
    ``A3 = -int d^m(N(u)) d^m u chi`` with ``N`` the solver's nonlinear term,
    i.e. ``int d^2(u u_x) d^2 u chi`` for focusing BO.
    """
    fam = w.family
    x = u.grid.x
    h = u.grid.spacing
    chi = fam.chi(x, t)
    dchi = fam.chi_prime(x, t)
    dm = sp.spatial_derivative(u, w.m).samples
    a1 = w.v * h * np.sum(dm**2 * dchi)
    a2 = h * np.sum(sp.spatial_derivative(_linear_part(u, spec), w.m).samples * dm * chi)
    if spec.nonlinear:
        nl = np.fft.irfft(_nonlinear_hat(np.fft.rfft(u.samples), u.grid, spec, dealias), u.grid.n)
        a3 = -h * np.sum(sp.spatial_derivative(RealField(u.grid, nl), w.m).samples * dm * chi)
    else:
        a3 = 0.0
    return {"A1": float(a1), "A2": float(a2), "A3": float(a3), "E": float(h * np.sum(dm**2 * chi))}


def energy_identity_residual(traj: Trajectory, w: WindowSpec, index: int, dealias: bool = True) -> float:
    """Signed residual ``(1/2) dE/dt - A1/2 - A2 + A3`` at snapshot ``index``.

    ``dE/dt`` is the centred difference over the neighbouring snapshots,
    which must be equally spaced in time.
    """
    if index < 1 or index + 1 >= len(traj.times):
        raise ContractViolation("energy identity needs snapshots on both sides of the evaluation time")
    t_prev, t, t_next = traj.times[index - 1:index + 2]
    if not np.isclose(t - t_prev, t_next - t, rtol=1e-9, atol=0):
        raise ContractViolation("snapshots around the evaluation time are not equally spaced")
    e_prev = windowed_energy(traj.fields[index - 1], w, t_prev)
    e_next = windowed_energy(traj.fields[index + 1], w, t_next)
    terms = energy_identity_terms(traj.fields[index], w, t, traj.spec, dealias)
    dEdt = (e_next - e_prev) / (t_next - t_prev)
    return 0.5 * dEdt - 0.5 * terms["A1"] - terms["A2"] + terms["A3"]


@dataclass
class DiagnosticRecord:
    t: float
    window: str
    E_m: float
    F_half: float
    F_eta: float
    E_half: float
    G_flux: float
    tail: float
    cum_F_half: float = 0.0
    cum_F_eta: float = 0.0
    cum_G_flux: float = 0.0

    FIELDS = ("t", "window", "E_m", "F_half", "F_eta", "E_half", "G_flux", "tail",
              "cum_F_half", "cum_F_eta", "cum_G_flux")

    def as_row(self) -> list:
        return [getattr(self, f) for f in self.FIELDS]

    def to_dict(self) -> dict:
        return {f: getattr(self, f) for f in self.FIELDS}


@dataclass
class DiagnosticRecorder:
    """Trajectory hook that evaluates every window at each snapshot.

    Cumulative integrals use the trapezoid rule in ``|t|`` so they are
    nondecreasing for forward and backward runs alike.
    """

    windows: list
    tail_order: Optional[int] = None
    tail: Optional[TailSpec] = None
    records: dict = field(default_factory=dict)

    def __post_init__(self):
        labels = [w.label for w in self.windows]
        if len(set(labels)) != len(labels):
            raise ContractViolation("window labels must be unique")
        self.records = {w.label: [] for w in self.windows}

    def __call__(self, t: float, u: RealField):
        for w in self.windows:
            k = w.m if self.tail_order is None else self.tail_order
            if self.tail is not None:
                k = self.tail.k
            rec = DiagnosticRecord(
                t=float(t),
                window=w.label,
                E_m=windowed_energy(u, w, t),
                F_half=smoothing_density(u, w, t),
                F_eta=eta_smoothing_density(u, w, t),
                E_half=half_windowed_energy(u, w, t),
                G_flux=gradient_flux_density(u, w, t),
                tail=_safe_tail(u, k, t, w if self.tail is None else self.tail),
            )
            series = self.records[w.label]
            if series:
                prev = series[-1]
                dt = abs(rec.t - prev.t)
                rec.cum_F_half = prev.cum_F_half + 0.5 * dt * (prev.F_half + rec.F_half)
                rec.cum_F_eta = prev.cum_F_eta + 0.5 * dt * (prev.F_eta + rec.F_eta)
                rec.cum_G_flux = prev.cum_G_flux + 0.5 * dt * (prev.G_flux + rec.G_flux)
            series.append(rec)

    def rows(self) -> list:
        """All records ordered by time, then by window order."""
        out = []
        n = len(next(iter(self.records.values()))) if self.records else 0
        for i in range(n):
            for w in self.windows:
                out.append(self.records[w.label][i])
        return out

    def summary(self) -> dict:
        out = {}
        for label, recs in self.records.items():
            out[label] = {
                "sup_E_m": max(r.E_m for r in recs),
                "sup_E_half": max(r.E_half for r in recs),
                "cum_F_half": recs[-1].cum_F_half,
                "cum_F_eta": recs[-1].cum_F_eta,
                "cum_G_flux": recs[-1].cum_G_flux,
                "sup_tail": max(r.tail for r in recs),
            }
        return out


def _safe_tail(u: RealField, k: int, t: float, w: WindowSpec) -> float:
    try:
        return tail_energy(u, k, t, w.eps, w.v, w.x0)
    except ContractViolation:
        return float("nan")
