"""Experiment orchestration behind the command-line subcommands."""

from __future__ import annotations

import datetime as _dt
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from . import io as bio
from . import spectral as sp
from .config import ConfigError, RunConfig, validate
from .cutoff import CutoffFamily, CutoffParams, verify_family
from .datum import make_datum
from .diagnostics import DiagnosticRecord, DiagnosticRecorder, energy_identity_residual, seam_energy_fraction
from .evolution import BlowUpError, SolverConfig, hamiltonian_sign, integrate, soliton_direction, stable_dt
from .inequalities import run_suite, symbol_inequality_scan
from .spectral import ContractViolation, Grid, SeamViolation

log = logging.getLogger("boreg")

REFINEMENT_TOLERANCE = 0.20


@dataclass
class Prepared:
    cfg: RunConfig
    grid: Grid
    spec: object
    u0: sp.RealField
    solver: SolverConfig
    windows: list
    tail: object


def resolve_dt(t_end: float, dt: Optional[float], grid: Grid, u0: sp.RealField, spec, cfl: float) -> float:
    """Step size that divides ``t_end`` exactly and carries its sign."""
    if dt is None:
        dt = stable_dt(grid, float(np.max(np.abs(u0.samples))), spec, cfl)
    dt = abs(dt)
    if t_end == 0:
        return dt
    steps = max(1, math.ceil(abs(t_end) / dt - 1e-9))
    return t_end / steps


def _check_seam(cfg: RunConfig, grid: Grid):
    margin = grid.length / 16
    lo_ok, hi_ok = grid.x_left + margin, grid.x_right - margin
    t_end = cfg.solver.t_end
    for i, w in enumerate(cfg.windows):
        for t in (0.0, t_end):
            a, b = w.x0 + w.eps - w.v * t, w.x0 + w.b - w.v * t
            if a < lo_ok or b > hi_ok:
                raise SeamViolation(
                    f"windows.{i}: transition region [{a:.4g}, {b:.4g}] at t={t:g} is within L/16 of the periodic seam"
                )
    tail = cfg.diagnostics.tail
    if tail is not None:
        for t in (0.0, t_end):
            cut = tail.x0 + tail.eps - tail.v * t
            if cut < grid.x_left + 4 * grid.spacing or cut > grid.x_right - 4 * grid.spacing:
                raise SeamViolation(f"diagnostics.tail: cut {cut:.4g} at t={t:g} lies within 4h of the periodic seam")


def prepare(cfg: RunConfig, tau_cells: Optional[float] = None) -> Prepared:
    grid = cfg.grid.build()
    spec = cfg.pde.build()
    u0 = make_datum(cfg.datum.build(grid, tau_cells), grid)
    _check_seam(cfg, grid)
    dt = resolve_dt(cfg.solver.t_end, cfg.solver.dt, grid, u0, spec, cfg.solver.cfl)
    s = cfg.solver
    solver = SolverConfig(grid, dt, s.t_end, s.scheme, s.dealias, s.snapshot_stride, s.u_ceiling)
    windows = [w.build() for w in cfg.windows]
    tail = None if cfg.diagnostics.tail is None else cfg.diagnostics.tail.build()
    return Prepared(cfg, grid, spec, u0, solver, windows, tail)


@dataclass
class SimulationResult:
    trajectory: object
    recorder: DiagnosticRecorder
    manifest: dict


def _manifest_base(cfg: RunConfig, command: str) -> dict:
    return {
        "command": command,
        "artifact_version": __version__,
        "config": cfg.model_dump(mode="json"),
        "config_hash": cfg.config_hash(),
        "seed": cfg.seed,
        "started_at": _dt.datetime.now(_dt.timezone.utc).isoformat(),
    }


def simulate(cfg: RunConfig, out: Optional[Path] = None, tau_cells: Optional[float] = None) -> SimulationResult:
    """Integrate the configured problem with the diagnostics recorder attached.

    On blow-up the partial diagnostics are still written before the
    :class:`BlowUpError` propagates.
    """
    t0 = time.perf_counter()
    prep = prepare(cfg, tau_cells)
    recorder = DiagnosticRecorder(prep.windows, tail=prep.tail)
    manifest = _manifest_base(cfg, "simulate")
    manifest.update({
        "soliton_direction_sigma": soliton_direction(),
        "hamiltonian_potential_sign": hamiltonian_sign(prep.spec.dispersion),
        "dt": prep.solver.dt,
        "n_steps": prep.solver.n_steps,
        "grid": {"n": prep.grid.n, "length": prep.grid.length, "x_left": prep.grid.x_left},
    })
    error = None
    try:
        traj = integrate(prep.u0, prep.solver, prep.spec, hooks=recorder)
    except BlowUpError as exc:
        error = exc
        traj = exc.trajectory
        manifest["blow_up"] = {"t": exc.t, "sup_history_tail": exc.sup_history[-10:]}
    limit = cfg.diagnostics.seam_fraction_limit
    if traj is not None and traj.fields:
        seam = [seam_energy_fraction(traj.fields[0]), seam_energy_fraction(traj.final())]
        manifest["invariant_drift"] = traj.drift()
        manifest["invariants_initial"] = dict(zip(("mass", "l2", "hamiltonian"), traj.invariants[0]))
    else:
        seam = [seam_energy_fraction(prep.u0)]
    tail_nan = any(math.isnan(r.tail) for r in recorder.rows())
    manifest["seam"] = {
        "energy_fraction_initial": seam[0],
        "energy_fraction_final": seam[-1],
        "limit": limit,
        "flag_energy_near_seam": bool(max(seam) > limit),
        "flag_tail_cut_near_seam": bool(tail_nan),
    }
    if recorder.rows():
        manifest["summary"] = recorder.summary()
    manifest["wall_clock_s"] = time.perf_counter() - t0
    if out is not None:
        write_simulation(out, cfg, recorder, traj, manifest)
    if error is not None:
        raise error
    return SimulationResult(traj, recorder, manifest)


def write_simulation(out: Path, cfg: RunConfig, recorder: DiagnosticRecorder, traj, manifest: dict):
    out.mkdir(parents=True, exist_ok=True)
    rows = recorder.rows()
    bio.write_csv(out / "diagnostics.csv", DiagnosticRecord.FIELDS, (r.as_row() for r in rows))
    if traj is not None and traj.fields:
        bio.write_csv(out / "invariants.csv", ("t", "I1", "I2", "I3"),
                      ([float(t), *map(float, inv)] for t, inv in zip(traj.times, traj.invariants)))
        manifest["invariant_series"] = "invariants.csv"
    mode = cfg.diagnostics.fields
    if traj is not None and mode != "none":
        fdir = out / "fields"
        fdir.mkdir(exist_ok=True)
        idx = range(len(traj.times)) if mode == "all" else sorted({0, len(traj.times) - 1})
        for i in idx:
            bio.write_field(fdir / f"u_{i:06d}.bin", traj.fields[i], traj.times[i])
    if cfg.diagnostics.plots and rows:
        pdir = out / "plots"
        pdir.mkdir(exist_ok=True)
        for key, title in (("E_m", "windowed energy"), ("cum_F_half", "cumulative smoothing"), ("tail", "tail energy")):
            series = {
                label: ([r.t for r in recs], [getattr(r, key) for r in recs])
                for label, recs in recorder.records.items()
            }
            (pdir / f"{key}.svg").write_text(bio.svg_line_chart(series, title, "t", key))
    bio.write_json(out / "manifest.json", manifest)


SWEEP_COLUMNS = ("index", "eps", "b", "v", "m", "n", "dt", "status", "window", "sup_E_m", "sup_E_half",
                 "cum_F_half", "cum_F_eta", "cum_G_flux", "sup_tail", "drift_mass", "drift_l2",
                 "drift_hamiltonian")


def point_config(base: dict, point: dict) -> RunConfig:
    data = {**base, "sweep": None}
    data["windows"] = [dict(w) for w in base["windows"]]
    for ax in ("eps", "b", "v", "m"):
        if ax in point:
            for w in data["windows"]:
                w[ax] = point[ax]
    if "n" in point:
        data["grid"] = {**base["grid"], "n": point["n"]}
    if "dt" in point:
        data["solver"] = {**base["solver"], "dt": point["dt"]}
    return validate(data)


def _sweep_worker(index: int, point: dict, base: dict) -> dict:
    row = {"index": index, **point}
    try:
        cfg = point_config(base, point)
        res = simulate(cfg)
    except ConfigError as exc:
        return {**row, "status": f"config_error: {exc}"}
    except BlowUpError as exc:
        return {**row, "status": f"blow_up: {exc}"}
    except SeamViolation as exc:
        return {**row, "status": f"seam_violation: {exc}"}
    except (ContractViolation, ArithmeticError) as exc:
        return {**row, "status": f"error: {exc}"}
    label, summ = next(iter(res.manifest["summary"].items()))
    drift = res.manifest["invariant_drift"]
    w = cfg.windows[0]
    return {
        **row, "status": "ok", "window": label, "dt": res.manifest["dt"], "n": cfg.grid.n,
        "eps": w.eps, "b": w.b, "v": w.v, "m": w.m,
        **summ,
        "drift_mass": drift["mass"], "drift_l2": drift["l2"], "drift_hamiltonian": drift["hamiltonian"],
    }


def sweep(cfg: RunConfig, out: Optional[Path] = None, workers: Optional[int] = None) -> list[dict]:
    """Run every lattice point; rows come back ordered by lattice index."""
    if cfg.sweep is None:
        raise ConfigError("sweep", "configuration has no [sweep] table")
    t0 = time.perf_counter()
    points = cfg.sweep.points()
    base = cfg.model_dump(mode="json")
    workers = workers or cfg.sweep.workers or os.cpu_count() or 1
    if workers == 1 or len(points) == 1:
        rows = [_sweep_worker(i, p, base) for i, p in enumerate(points)]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {i: pool.submit(_sweep_worker, i, p, base) for i, p in enumerate(points)}
            rows = [futures[i].result() for i in sorted(futures)]
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        bio.write_csv(out / "sweep.csv", SWEEP_COLUMNS, ([r.get(c, "") for c in SWEEP_COLUMNS] for r in rows))
        manifest = _manifest_base(cfg, "sweep")
        manifest.update({
            "points": len(rows),
            "failed": sum(r["status"] != "ok" for r in rows),
            "wall_clock_s": time.perf_counter() - t0,
        })
        bio.write_json(out / "manifest.json", manifest)
    return rows


def fit_order(steps, errors) -> float:
    """Least-squares slope of ``log|error|`` against ``log step``."""
    steps = np.asarray(steps, float)
    errors = np.abs(np.asarray(errors, float))
    if np.any(errors == 0) or len(steps) < 2:
        return float("nan")
    return float(np.polyfit(np.log(np.abs(steps)), np.log(errors), 1)[0])


def dt_ladder(cfg: RunConfig) -> dict:
    """Energy-identity residual and Hamiltonian drift on the dt-halving ladder."""
    conv = cfg.convergence
    w = cfg.windows[0].build()
    grid = cfg.grid.build()
    spec = cfg.pde.build()
    u0 = make_datum(cfg.datum.build(grid), grid)
    residuals, drifts = [], []
    for dt in conv.dt_ladder:
        k = int(round(conv.eval_time / dt))
        if not math.isclose(k * dt, conv.eval_time, rel_tol=1e-9):
            raise ConfigError("convergence.eval_time", f"{conv.eval_time} is not a multiple of dt={dt}")
        solver = SolverConfig(grid, dt, (k + 1) * dt, cfg.solver.scheme, cfg.solver.dealias)
        traj = integrate(u0, solver, spec)
        residuals.append(energy_identity_residual(traj, w, k, cfg.solver.dealias))
        drifts.append(abs(traj.invariants[k][2] - traj.invariants[0][2]))
    return {
        "dt": list(conv.dt_ladder),
        "energy_identity_residual": residuals,
        "energy_identity_order": fit_order(conv.dt_ladder, residuals),
        "hamiltonian_drift": drifts,
        "hamiltonian_drift_order": fit_order(conv.dt_ladder, drifts),
    }


def _restrict(u: sp.RealField, grid: Grid) -> np.ndarray:
    """Samples on a coarser grid of the trigonometric interpolant of ``u``."""
    c = np.fft.rfft(u.samples) / u.grid.n
    m = grid.n // 2
    coarse = c[: m + 1].copy()
    coarse[m] = coarse[m].real
    return np.fft.irfft(coarse * grid.n, grid.n)


def n_ladder(cfg: RunConfig) -> dict:
    """Successive-refinement differences of ``u(T)`` along the N ladder.

    The step size is fixed at the stability rule of the finest grid so the
    differences isolate the spatial error.
    """
    ns = sorted(cfg.convergence.n_ladder)
    spec = cfg.pde.build()
    finals = []
    fine_cfg = validate({**cfg.model_dump(mode="json"), "grid": {**cfg.grid.model_dump(), "n": ns[-1]}})
    fine = prepare(fine_cfg)
    dt = fine.solver.dt
    for n in ns:
        c = validate({**cfg.model_dump(mode="json"), "grid": {**cfg.grid.model_dump(), "n": n}})
        p = prepare(c)
        solver = SolverConfig(p.grid, dt, cfg.solver.t_end, cfg.solver.scheme, cfg.solver.dealias,
                              snapshot_stride=max(1, p.solver.n_steps))
        finals.append(integrate(p.u0, solver, spec).final())
    diffs = []
    for a, b in zip(finals[:-1], finals[1:]):
        d = sp.RealField(a.grid, a.samples - _restrict(b, a.grid))
        diffs.append(sp.lp_norm(d, 2))
    return {"n": ns, "dt": dt, "l2_successive_difference": diffs,
            "observed_order": fit_order([1.0 / n for n in ns[:-1]], diffs)}


def mollification_ladder(cfg: RunConfig) -> dict:
    """Run the configured scenario for each ``tau`` (in cells) of the ladder."""
    taus = sorted(cfg.convergence.tau_cells_ladder, reverse=True)
    sup_e, finals = [], []
    for tau in taus:
        res = simulate(cfg, tau_cells=tau)
        sup_e.append(next(iter(res.manifest["summary"].values()))["sup_E_m"])
        finals.append(res.trajectory.final())
    diffs = [sp.sobolev_norm(a - b, 1.5) for a, b in zip(finals[:-1], finals[1:])]
    return {
        "tau_cells": taus,
        "sup_E_m": sup_e,
        "h32_successive_difference": diffs,
        "monotone_decrease": bool(all(b < a for a, b in zip(diffs[:-1], diffs[1:]))),
        "sup_E_m_spread": float(max(sup_e) / min(sup_e) - 1.0),
    }


def convergence(cfg: RunConfig, out: Optional[Path] = None) -> dict:
    t0 = time.perf_counter()
    report = {"dt_ladder": dt_ladder(cfg)}
    if cfg.convergence.n_ladder:
        report["n_ladder"] = n_ladder(cfg)
    if cfg.convergence.tau_cells_ladder:
        report["mollification_ladder"] = mollification_ladder(cfg)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        rows = []
        for name, lad in report.items():
            steps = lad.get("dt") if name == "dt_ladder" else lad.get("n", lad.get("tau_cells"))
            for key, vals in lad.items():
                if isinstance(vals, list) and key not in ("dt", "n", "tau_cells"):
                    rows += [(name, key, s, v) for s, v in zip(steps, vals)]
        bio.write_csv(out / "convergence.csv", ("ladder", "quantity", "rung", "value"), rows)
        bio.write_json(out / "convergence.json", report)
        manifest = _manifest_base(cfg, "convergence")
        manifest["wall_clock_s"] = time.perf_counter() - t0
        bio.write_json(out / "manifest.json", manifest)
    return report


def _probe_grid(eps: float, b: float, n_min: int) -> Grid:
    span = 4 * b
    n = n_min
    while span / n > eps / 20:
        n *= 2
    return Grid(n, span, -b)


def verify_cutoffs(cfg: RunConfig, out: Optional[Path] = None) -> dict:
    reports = {}
    profile_rows = []
    for eps, b in cfg.cutoff.params:
        probe = _probe_grid(eps, b, cfg.cutoff.probe_n)
        rep = verify_family(CutoffParams(eps, b), probe, tol=cfg.cutoff.tol)
        reports[f"eps={eps:g},b={b:g}"] = rep
        fam = CutoffFamily(CutoffParams(eps, b))
        x = probe.x
        for xi, c, d, e in zip(x, fam.chi(x), fam.chi_prime(x), fam.eta(x)):
            profile_rows.append((eps, b, xi, c, d, e))
    result = {"all_passed": all(r["all_passed"] for r in reports.values()), "families": reports}
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        bio.write_json(out / "cutoff_report.json", result)
        bio.write_csv(out / "cutoff_profile.csv", ("eps", "b", "x", "chi", "chi_prime", "eta"),
                      ([float(v) for v in r] for r in profile_rows))
        bio.write_json(out / "manifest.json", _manifest_base(cfg, "verify-cutoff"))
    return result


def verify_inequalities(cfg: RunConfig, out: Optional[Path] = None) -> dict:
    q = cfg.inequalities
    reports = run_suite(cfg.seed, q.count, q.n, q.length)
    scan = symbol_inequality_scan()
    stable = all(r.finite and r.refinement_change <= REFINEMENT_TOLERANCE for r in reports)
    agreement = max(r.extra.get("route_agreement", 0.0) for r in reports)
    result = {
        "all_passed": bool(stable and 0.99 <= scan["sup"] <= 1 + 1e-9 and agreement <= 1e-10),
        "refinement_tolerance": REFINEMENT_TOLERANCE,
        "seed": cfg.seed,
        "count": q.count,
        "grid_points": [q.n, 2 * q.n],
        "reports": [r.to_dict() for r in reports],
        "symbol_scan": scan,
    }
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        bio.write_json(out / "inequality_report.json", result)
        rows = [(r.inequality, i, a, b) for r in reports for i, (a, b) in enumerate(zip(r.ratios, r.ratios_refined))]
        bio.write_csv(out / "inequality_samples.csv", ("inequality", "sample", f"ratio_n{q.n}", f"ratio_n{2 * q.n}"), rows)
        bio.write_json(out / "manifest.json", _manifest_base(cfg, "verify-inequalities"))
    return result
