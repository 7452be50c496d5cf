"""Run configuration: a strict TOML/JSON schema and its bundled presets.

Unknown keys are rejected everywhere; validation failures are reported as
``ConfigError`` with the dotted key path of the offending entry.
"""

from __future__ import annotations

import hashlib
import itertools
import json
from importlib import resources
from pathlib import Path
from typing import ClassVar, Literal, Optional, Union

import tomli
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .cutoff import CutoffParams
from .datum import Gaussian, Mollified, OneSidedSingular, Soliton
from .diagnostics import TailSpec, WindowSpec
from .evolution import Family, PdeSpec, Scheme
from .spectral import ContractViolation, Grid

MAX_SWEEP_POINTS = 10_000
PRESET_PREFIX = "preset:"


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
        self.message = message


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class PdeModel(_Strict):
    family: Family = Family.BO
    k: int = Field(1, ge=1)
    focusing_sign: Literal[1, -1] = 1
    nonlinear: bool = True

    @model_validator(mode="after")
    def _bo_power(self):
        if self.family is Family.BO and self.k != 1:
            raise ValueError("family BO requires k = 1 (use gBO for higher powers)")
        return self

    def build(self) -> PdeSpec:
        return PdeSpec(self.family, self.k, self.focusing_sign, self.nonlinear)


class GridModel(_Strict):
    n: int = Field(1024, ge=8)
    length: float = Field(100.0, gt=0)
    x_left: Optional[float] = None

    @field_validator("n")
    @classmethod
    def _power_of_two(cls, v):
        if v & (v - 1):
            raise ValueError(f"n must be a power of two, got {v}")
        return v

    def build(self) -> Grid:
        left = -self.length / 2 if self.x_left is None else self.x_left
        return Grid(self.n, self.length, left)


class SolverModel(_Strict):
    t_end: float = 0.5
    dt: Optional[float] = None
    cfl: float = Field(0.25, gt=0, le=1)
    scheme: Scheme = Scheme.ETDRK4
    dealias: bool = True
    snapshot_stride: int = Field(1, ge=1)
    u_ceiling: float = Field(1e6, gt=0)

    @field_validator("dt")
    @classmethod
    def _dt_nonzero(cls, v):
        if v is not None and v == 0:
            raise ValueError("dt must be nonzero (omit it to use the stability rule)")
        return v


class GaussianModel(_Strict):
    kind: Literal["gaussian"] = "gaussian"
    amplitude: float = 1.0
    center: float = 0.0
    width: float = Field(1.0, gt=0)

    def build(self):
        return Gaussian(self.amplitude, self.center, self.width)


class SolitonModel(_Strict):
    kind: Literal["soliton"] = "soliton"
    c: float = Field(1.0, gt=0)
    x_c: float = 0.0

    def build(self):
        return Soliton(self.c, self.x_c)


class OneSidedModel(_Strict):
    kind: Literal["one_sided"] = "one_sided"
    gamma: float = Field(1.3, gt=1, lt=2)
    x0: float = 0.0
    amplitude: float = 0.5
    bump_width: float = Field(4.0, gt=0)
    background: Optional[GaussianModel] = None

    def build(self):
        bg = None if self.background is None else self.background.build()
        return OneSidedSingular(self.gamma, self.x0, self.amplitude, self.bump_width, bg)


class MollifyModel(_Strict):
    """Mollification width, absolute (``tau``) or in grid cells (``tau_cells``)."""

    tau: Optional[float] = Field(None, gt=0)
    tau_cells: Optional[float] = Field(None, gt=0)

    @model_validator(mode="after")
    def _exactly_one(self):
        if (self.tau is None) == (self.tau_cells is None):
            raise ValueError("give exactly one of tau or tau_cells")
        return self

    def width(self, grid: Grid) -> float:
        return self.tau if self.tau is not None else self.tau_cells * grid.spacing


class DatumModel(_Strict):
    profile: Union[GaussianModel, SolitonModel, OneSidedModel] = Field(
        default_factory=GaussianModel, discriminator="kind"
    )
    mollify: Optional[MollifyModel] = None

    def build(self, grid: Grid, tau_cells: Optional[float] = None):
        inner = self.profile.build()
        if tau_cells is not None:
            return Mollified(inner, tau_cells * grid.spacing)
        if self.mollify is None:
            return inner
        return Mollified(inner, self.mollify.width(grid))


class WindowModel(_Strict):
    m: int = Field(2, ge=0)
    eps: float = Field(0.5, gt=0)
    b: float = 2.5
    v: float = Field(1.0, ge=0)
    x0: float = 0.0
    name: str = ""

    @field_validator("b")
    @classmethod
    def _b_vs_eps(cls, b, info):
        eps = info.data.get("eps")
        if eps is not None:
            try:
                CutoffParams(eps, b)
            except ContractViolation:
                raise ValueError(f"cut-off family needs b >= 5*eps; got b={b!r} < 5*{eps!r}") from None
        return b

    def build(self) -> WindowSpec:
        return WindowSpec(self.m, self.eps, self.b, self.v, self.x0, self.name)


class TailModel(_Strict):
    k: int = Field(2, ge=0)
    eps: float = 0.0
    v: float = Field(0.0, ge=0)
    x0: float = 0.0

    def build(self) -> TailSpec:
        return TailSpec(self.k, self.eps, self.v, self.x0)


class DiagnosticsModel(_Strict):
    tail: Optional[TailModel] = None
    fields: Literal["none", "ends", "all"] = "ends"
    plots: bool = True
    seam_fraction_limit: float = Field(1e-8, gt=0)


class SweepModel(_Strict):
    """Lattice axes; omitted axes keep the base configuration's value.

    ``eps_b`` lists paired ``(eps, b)`` values and excludes the separate
    ``eps`` and ``b`` axes.
    """

    eps: Optional[list[float]] = None
    b: Optional[list[float]] = None
    eps_b: Optional[list[tuple[float, float]]] = None
    v: Optional[list[float]] = None
    m: Optional[list[int]] = None
    n: Optional[list[int]] = None
    dt: Optional[list[float]] = None
    workers: Optional[int] = Field(None, ge=1)

    AXES: ClassVar[tuple] = ("eps", "b", "eps_b", "v", "m", "n", "dt")

    @model_validator(mode="after")
    def _guard(self):
        if self.eps_b is not None and (self.eps is not None or self.b is not None):
            raise ValueError("eps_b cannot be combined with separate eps or b axes")
        size = 1
        for ax in self.AXES:
            vals = getattr(self, ax)
            if vals is not None:
                if not vals:
                    raise ValueError(f"sweep axis {ax} is empty")
                size *= len(vals)
        if size > MAX_SWEEP_POINTS:
            raise ValueError(f"sweep lattice has {size} points, limit is {MAX_SWEEP_POINTS}")
        return self

    def points(self) -> list[dict]:
        axes = [(ax, getattr(self, ax)) for ax in self.AXES if getattr(self, ax) is not None]
        out = []
        for combo in itertools.product(*[v for _, v in axes]):
            point = {}
            for (name, _), val in zip(axes, combo):
                if name == "eps_b":
                    point["eps"], point["b"] = val
                else:
                    point[name] = val
            out.append(point)
        return out


class ConvergenceModel(_Strict):
    dt_ladder: list[float] = Field(default_factory=lambda: [2e-3, 1e-3, 5e-4])
    eval_time: float = 0.2
    n_ladder: Optional[list[int]] = None
    tau_cells_ladder: Optional[list[float]] = None

    @field_validator("dt_ladder")
    @classmethod
    def _ladder(cls, v):
        if len(v) < 2:
            raise ValueError("a ladder needs at least two rungs")
        return v


class CutoffCheckModel(_Strict):
    params: list[tuple[float, float]] = Field(default_factory=lambda: [(0.1, 0.5), (0.2, 1.0), (0.05, 0.25)])
    probe_n: int = Field(4096, ge=64)
    tol: float = 1e-8

    @field_validator("params")
    @classmethod
    def _valid(cls, v):
        for i, (eps, b) in enumerate(v):
            try:
                CutoffParams(eps, b)
            except ContractViolation as exc:
                raise ValueError(f"entry {i}: {exc}") from None
        return v


class InequalityModel(_Strict):
    count: int = Field(100, ge=1)
    n: int = Field(256, ge=16)
    length: float = Field(40.0, gt=0)


class OutputModel(_Strict):
    dir: str = "out"


class RunConfig(_Strict):
    seed: int = Field(0, ge=0, lt=2**64)
    pde: PdeModel = Field(default_factory=PdeModel)
    grid: GridModel = Field(default_factory=GridModel)
    solver: SolverModel = Field(default_factory=SolverModel)
    datum: DatumModel = Field(default_factory=DatumModel)
    windows: list[WindowModel] = Field(default_factory=lambda: [WindowModel()])
    diagnostics: DiagnosticsModel = Field(default_factory=DiagnosticsModel)
    output: OutputModel = Field(default_factory=OutputModel)
    sweep: Optional[SweepModel] = None
    convergence: ConvergenceModel = Field(default_factory=ConvergenceModel)
    cutoff: CutoffCheckModel = Field(default_factory=CutoffCheckModel)
    inequalities: InequalityModel = Field(default_factory=InequalityModel)

    @model_validator(mode="after")
    def _consistent(self):
        grid = self.grid.build()
        names = [w.build().label for w in self.windows]
        if len(set(names)) != len(names):
            raise ValueError("window labels must be unique (set distinct names)")
        for i, w in enumerate(self.windows):
            # the ramp of the cut-off must span several cells
            if w.b - w.eps < 4 * grid.spacing:
                raise ValueError(
                    f"windows.{i}: transition width b - eps = {w.b - w.eps:.3g} is below 4 grid cells ({4 * grid.spacing:.3g})"
                )
        return self

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    def with_seed(self, seed: Optional[int]) -> "RunConfig":
        if seed is None:
            return self
        return validate({**self.model_dump(mode="json"), "seed": seed})


def _loc(loc) -> str:
    return ".".join(str(p) for p in loc if not (isinstance(p, str) and p in ("gaussian", "soliton", "one_sided")))


def validate(data: dict) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        err = exc.errors()[0]
        msg = err["msg"].removeprefix("Value error, ")
        raise ConfigError(_loc(err["loc"]), msg) from None


def preset_names() -> list[str]:
    root = resources.files("boreg") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def read_text(source: str) -> tuple[str, str]:
    """Return ``(text, format)`` for a path or ``preset:<name>``."""
    if source.startswith(PRESET_PREFIX):
        name = source[len(PRESET_PREFIX):]
        if name not in preset_names():
            raise ConfigError("", f"unknown preset {name!r}; available: {', '.join(preset_names())}")
        return (resources.files("boreg") / "presets" / f"{name}.toml").read_text(), "toml"
    path = Path(source)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("", f"cannot read config {source!r}: {exc.strerror}") from None
    return text, "json" if path.suffix.lower() == ".json" else "toml"


def parse(text: str, fmt: str = "toml") -> dict:
    try:
        return json.loads(text) if fmt == "json" else tomli.loads(text)
    except (tomli.TOMLDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError("", f"malformed {fmt}: {exc}") from None


def load(source: Optional[str]) -> RunConfig:
    if source is None:
        return validate({})
    text, fmt = read_text(source)
    return validate(parse(text, fmt))
