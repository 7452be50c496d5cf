"""Two-parameter cut-off family built by mollifying a piecewise-linear ramp.

``chi_{eps,b} = rho_eps * nu_{eps,b}`` where ``nu`` rises linearly from 0 at
``2 eps`` to 1 at ``b - eps`` and ``rho`` is the standard ``exp(1/(x^2-1))``
bump.  Because ``nu'`` is a box function, every derivative of ``chi`` reduces
to the partial mass ``R(z)`` and partial first moment ``M(z)`` of ``rho``:

    chi(x)   = eps / (b - 3 eps) * (G(z1) - G(z2)),   G(z) = z R(z) - M(z)
    chi'(x)  = (R(z1) - R(z2)) / (b - 3 eps)
    chi''(x) = (rho(z1) - rho(z2)) / (eps (b - 3 eps))

with ``z1 = (x - 2 eps)/eps`` and ``z2 = (x - b + eps)/eps``.  ``R`` and ``M``
are evaluated by composite Gauss-Legendre quadrature (vectorized) or by
adaptive quadrature (:meth:`CutoffFamily.evaluate_adaptive`).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy import integrate

from .spectral import ContractViolation, Grid

__all__ = [
    "CutoffParams",
    "CutoffFamily",
    "CutoffQuadratureError",
    "mollifier_rho",
    "rho_mass",
    "rho_moment",
    "ramp_nu",
    "verify_family",
]


class CutoffQuadratureError(RuntimeError):
    def __init__(self, x, estimate):
        super().__init__(f"adaptive quadrature did not converge at x={x!r} (error estimate {estimate:.3e})")
        self.x = x
        self.estimate = estimate


def _bump(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inside = np.abs(x) < 1.0
    xi = x[inside]
    out[inside] = np.exp(1.0 / (xi * xi - 1.0))
    return out


@lru_cache(maxsize=None)
def _rho_normalization() -> float:
    mass, _ = integrate.quad(lambda s: float(_bump(s)), -1.0, 1.0, epsabs=1e-14, epsrel=1e-13, limit=200)
    return 1.0 / mass


def mollifier_rho(x):
    """Unit-mass even bump supported in ``(-1, 1)``."""
    out = _rho_normalization() * _bump(x)
    return out if np.ndim(out) else float(out)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)
_GL_PANELS = 8


def _partial_integral(z, moment: int):
    """``int_{-1}^{min(z,1)} s^moment rho(s) ds`` for an array of ``z``."""
    z = np.clip(np.asarray(z, dtype=float), -1.0, 1.0)
    flat = z.reshape(-1)
    width = (flat + 1.0) / _GL_PANELS
    # panel p spans [-1 + p w, -1 + (p+1) w]
    panel_left = -1.0 + width[:, None] * np.arange(_GL_PANELS)[None, :]
    s = panel_left[:, :, None] + 0.5 * width[:, None, None] * (_GL_NODES[None, None, :] + 1.0)
    integrand = mollifier_rho(s)
    if moment:
        integrand = integrand * s**moment
    total = 0.5 * width * np.einsum("pqr,r->p", integrand, _GL_WEIGHTS)
    return total.reshape(z.shape)


def rho_mass(z):
    """Partial mass ``R(z) = int_{-1}^z rho``; accurate near both ends."""
    z = np.asarray(z, dtype=float)
    upper = z > 0
    lo = _partial_integral(np.where(upper, 0.0, z), 0)
    hi = 1.0 - _partial_integral(np.where(upper, -z, 0.0), 0)
    out = np.where(upper, hi, lo)
    return out if out.ndim else float(out)


def rho_tail(z):
    """``1 - R(z)`` computed without cancellation (``rho`` is even)."""
    return rho_mass(-np.asarray(z, dtype=float))


def rho_moment(z):
    """Partial first moment ``M(z) = int_{-1}^z s rho(s) ds`` (even in ``z``)."""
    z = np.asarray(z, dtype=float)
    out = _partial_integral(-np.abs(z), 1)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class CutoffParams:
    eps: float
    b: float
    x0: float = 0.0
    v: float = 0.0

    def __post_init__(self):
        if not (self.eps > 0):
            raise ContractViolation(f"cut-off requires eps > 0, got eps={self.eps!r}")
        # b >= 5 eps, with a relative slack for values such as (0.05, 0.25)
        if self.b < 5.0 * self.eps * (1.0 - 1e-12):
            raise ContractViolation(
                f"cut-off requires b >= 5*eps (got eps={self.eps!r}, b={self.b!r})"
            )

    @property
    def slope(self) -> float:
        """``1 / (b - 3 eps)``, the ramp slope and the maximum of ``chi'``."""
        return 1.0 / (self.b - 3.0 * self.eps)

    def shifted(self, dx: float) -> "CutoffParams":
        return replace(self, x0=self.x0 + dx)


def ramp_nu(x, p: CutoffParams):
    x = np.asarray(x, dtype=float)
    out = np.clip((x - 2.0 * p.eps) * p.slope, 0.0, 1.0)
    return out if out.ndim else float(out)


class CutoffFamily:
    """Evaluators for ``chi``, ``chi'``, ``chi''``, ``eta``, ``eta'``.

    Evaluation points are taken relative to the window: the argument passed
    to the cut-off is ``x - x0 + v t``.
    """

    def __init__(self, params: CutoffParams):
        self.params = params

    def _local(self, x, t):
        p = self.params
        y = np.asarray(x, dtype=float) - p.x0 + p.v * t
        return (y - 2.0 * p.eps) / p.eps, (y - p.b + p.eps) / p.eps

    @staticmethod
    def _out(a):
        return a if np.ndim(a) else float(a)

    def chi(self, x, t: float = 0.0):
        p = self.params
        z1, z2 = self._local(x, t)
        z1c = np.clip(z1, -1.0, 1.0)
        z2c = np.clip(z2, -1.0, 1.0)
        g1 = np.where(z1 >= 1.0, z1, z1c * rho_mass(z1c) - rho_moment(z1c))
        g1 = np.where(z1 <= -1.0, 0.0, g1)
        g2 = np.where(z2 >= 1.0, z2, z2c * rho_mass(z2c) - rho_moment(z2c))
        g2 = np.where(z2 <= -1.0, 0.0, g2)
        return self._out(np.clip(p.eps * p.slope * (g1 - g2), 0.0, 1.0))

    def chi_prime(self, x, t: float = 0.0):
        p = self.params
        z1, z2 = self._local(x, t)
        # z1 - z2 >= 2, so at most one of R(z1) < 1 or R(z2) > 0 holds
        val = np.where(z1 < 1.0, rho_mass(z1), rho_tail(z2))
        return self._out(p.slope * val)

    def chi_second(self, x, t: float = 0.0):
        p = self.params
        z1, z2 = self._local(x, t)
        return self._out(p.slope / p.eps * (mollifier_rho(z1) - mollifier_rho(z2)))

    def eta(self, x, t: float = 0.0):
        return self._out(np.sqrt(np.maximum(self.chi_prime(x, t), 0.0)))

    def eta_prime(self, x, t: float = 0.0):
        e = np.asarray(self.eta(x, t))
        d2 = np.asarray(self.chi_second(x, t))
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(e > 0.0, d2 / (2.0 * e), 0.0)
        return self._out(np.nan_to_num(out, nan=0.0, posinf=0.0, neginf=0.0))

    def sample(self, grid: Grid, t: float = 0.0) -> dict[str, np.ndarray]:
        x = grid.x
        return {
            "chi": self.chi(x, t),
            "chi_prime": self.chi_prime(x, t),
            "eta": self.eta(x, t),
        }

    def evaluate_adaptive(self, x: float, t: float = 0.0, tol: float = 1e-10) -> dict[str, float]:
        """Direct adaptive-quadrature convolution ``int rho(s) nu(y - eps s) ds``.

        Independent of the closed-form reduction used by the vectorized
        evaluators; raises :class:`CutoffQuadratureError` on non-convergence.
        """
        p = self.params
        y = float(x) - p.x0 + p.v * t
        c = _rho_normalization()
        breaks = sorted({-1.0, 1.0, *[b for b in ((y - 2 * p.eps) / p.eps, (y - p.b + p.eps) / p.eps) if -1 < b < 1]})

        def piecewise(func):
            total = 0.0
            for a, b in zip(breaks[:-1], breaks[1:]):
                val, err = integrate.quad(func, a, b, epsabs=tol * 1e-2, epsrel=1e-13, limit=200)
                if not np.isfinite(val) or err > tol:
                    raise CutoffQuadratureError(x, err)
                total += val
            return total

        chi = piecewise(lambda s: c * float(_bump(s)) * float(ramp_nu(y - p.eps * s, p)))
        dnu = lambda yy: p.slope if 2 * p.eps < yy < p.b - p.eps else 0.0
        chi_p = piecewise(lambda s: c * float(_bump(s)) * dnu(y - p.eps * s))
        return {"chi": chi, "chi_prime": chi_p, "eta": float(np.sqrt(max(chi_p, 0.0)))}


def _fourth_difference_max(family: CutoffFamily, lo: float, hi: float, h: float) -> float:
    x = np.arange(lo, hi + h / 2, h)
    e = family.eta(x)
    d4 = e[4:] - 4 * e[3:-1] + 6 * e[2:-2] - 4 * e[1:-3] + e[:-4]
    return float(np.max(np.abs(d4)) / h**4)


def verify_family(params: CutoffParams, probe: Grid, tol: float = 1e-8, identity_tol: float = 1e-10) -> dict:
    """Numerically certify the support, slope, lower-bound and nesting properties.

    Returns a JSON-serializable report with one entry per property, each
    carrying ``passed`` and the observed quantity.
    """
    eps, b = params.eps, params.b
    h = probe.spacing
    if h > eps / 20.0 * (1 + 1e-12):
        raise ContractViolation(f"probe grid under-resolves eps: spacing {h:.3g} > eps/20 = {eps / 20:.3g}")
    p = CutoffParams(eps, b)
    fam = CutoffFamily(p)
    x = probe.x
    chi = fam.chi(x)
    dchi = fam.chi_prime(x)
    eta = fam.eta(x)
    slope = p.slope
    checks: dict[str, dict] = {}

    outside = x < eps
    viol_chi = float(np.max(np.abs(chi[outside]), initial=0.0))
    outside_d = (x < eps) | (x > b)
    viol_dchi = float(np.max(np.abs(dchi[outside_d]), initial=0.0))
    checks["support"] = {
        "passed": bool(viol_chi <= tol and viol_dchi <= tol),
        "max_chi_left_of_eps": viol_chi,
        "max_chi_prime_outside_eps_b": viol_dchi,
    }

    # closed interval: for b = 5 eps the open interval is empty but the
    # mollifier support still stays on the linear ramp at the end points
    ramp_x = np.concatenate(([3 * eps, b - 2 * eps], x[(x > 3 * eps) & (x < b - 2 * eps)]))
    ramp_d = fam.chi_prime(ramp_x)
    min_slope = float(np.min(ramp_d))
    flat_dev = float(np.max(np.abs(ramp_d - slope)))
    checks["slope_lower_bound"] = {
        "passed": bool(min_slope >= slope - tol),
        "min_chi_prime": min_slope,
        "bound": slope,
        "max_deviation_from_slope": flat_dev,
        "interior_points": int(ramp_x.size - 2),
    }

    chi_3eps = float(fam.chi(3 * eps))
    right = x > 3 * eps
    min_right = float(np.min(chi[right]))
    lower = 0.5 * eps * slope
    checks["value_lower_bound"] = {
        "passed": bool(min_right >= chi_3eps - tol and chi_3eps >= lower - tol),
        "chi_at_3eps": chi_3eps,
        "min_chi_right_of_3eps": min_right,
        "bound": lower,
    }

    max_slope = float(np.max(dchi))
    checks["slope_upper_bound"] = {"passed": bool(max_slope <= slope + tol), "max_chi_prime": max_slope, "bound": slope}

    sq_err = float(np.max(np.abs(eta**2 - dchi)))
    checks["eta_square"] = {"passed": bool(sq_err <= identity_tol), "max_abs_error": sq_err}

    mono = float(np.min(np.diff(chi)))
    bounded = float(np.min(chi)) >= -tol and float(np.max(chi)) <= 1 + tol
    checks["monotone"] = {
        "passed": bool(mono >= -tol and bounded and float(np.min(dchi)) >= -tol),
        "min_increment": mono,
    }

    inner = CutoffFamily(CutoffParams(eps / 5.0, eps))
    on_supp = x >= eps
    cl1_viol = float(np.max(np.abs(inner.chi(x[on_supp]) - 1.0), initial=0.0))
    checks["nesting_unit_on_support"] = {"passed": bool(cl1_viol <= identity_tol), "max_violation": cl1_viol}

    wide = CutoffFamily(CutoffParams(eps / 3.0, b + 2.0 * eps / 3.0))
    supp = dchi > 0
    denom = wide.chi_prime(x[supp]) * wide.chi(x[supp])
    ratio2 = dchi[supp] / denom
    c2 = float(np.max(ratio2)) if supp.any() else 0.0
    checks["nesting_derivative_product"] = {
        "passed": bool(np.all(denom > 0) and np.isfinite(c2)),
        "observed_c": c2,
    }

    inner_vals = inner.chi(x[supp])
    ratio3 = dchi[supp] / inner_vals
    c3 = float(np.max(ratio3)) if supp.any() else 0.0
    checks["nesting_derivative_bound"] = {
        "passed": bool(np.all(inner_vals > 0) and np.isfinite(c3)),
        "observed_c": c3,
    }

    lo, hi = eps - 2 * h, b + 2 * h
    d4 = [_fourth_difference_max(fam, lo, hi, h / 2**i) for i in range(3)]
    ratios = [d4[i + 1] / d4[i] for i in range(2)]
    checks["eta_smoothness"] = {
        "passed": bool(all(np.isfinite(d4)) and all(r <= 2.0 for r in ratios)),
        "max_fourth_difference": d4,
        "ratios": ratios,
    }

    return {
        "eps": eps,
        "b": b,
        "probe": {"n": probe.n, "length": probe.length, "x_left": probe.x_left},
        "tolerance": tol,
        "identity_tolerance": identity_tol,
        "checks": checks,
        "all_passed": all(c["passed"] for c in checks.values()),
    }
