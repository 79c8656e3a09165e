"""Problem assembly: kernels, Fourier-multiplier operators, initial data,
the nonlinearity, and the structural checks they must pass.

A problem couples N scalar equations on one grid.  Each channel m carries a
convolution kernel K_m, a bounded multiplier operator T_m, and an initial
data component; the channels interact only through the nonlinearity
g: R^N -> R^N applied pointwise to the full state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from . import exprdsl, spectral
from .errors import AssumptionViolation, ConfigurationError
from .exprdsl import Expr, NonlinearitySpec
from .spectral import Grid, ScalarField

TAIL_MASS_WARN = 1e-8


# --- kernels -----------------------------------------------------------------

@dataclass(frozen=True)
class GaussianKernel:
    """Built-in kernel exp(-alpha |x|^2)."""
    alpha: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise ConfigurationError(f"gaussian decay rate must be positive, got {self.alpha}")


@dataclass(frozen=True)
class ExpressionKernel:
    """Kernel given as a spatial expression over x1..xd."""
    text: str


@dataclass(frozen=True)
class TabulatedKernel:
    """Kernel given as raw samples on the grid."""
    values: np.ndarray


KernelSpec = Union[GaussianKernel, ExpressionKernel, TabulatedKernel]


def _gaussian_expr(alpha: float, d: int) -> Expr:
    r2: Expr = exprdsl.Pow(exprdsl.Var("x", 1), 2)
    for i in range(2, d + 1):
        r2 = exprdsl.Add(r2, exprdsl.Pow(exprdsl.Var("x", i), 2))
    return exprdsl.Call("exp", exprdsl.fold_neg(
        exprdsl.fold_mul(exprdsl.Num(float(alpha)), r2)))


@dataclass(frozen=True)
class MaterializedKernel:
    """A kernel sampled on the grid with its Laplacian and norms."""

    field: ScalarField
    delta: ScalarField
    delta_source: str  # 'symbolic' or 'spectral'
    l1: float
    delta_l1: float
    w21: float
    tail_fraction: float

    @property
    def nontrivial(self) -> bool:
        return bool(np.any(self.field.values != 0.0))


def materialize_kernel(spec: KernelSpec, grid: Grid, strict: bool = True) -> MaterializedKernel:
    """Sample the kernel and its Laplacian.  The Laplacian is exact symbolic
    for built-in and expression kernels, spectral for tabulated ones.
    With strict=True a kernel that vanishes identically raises."""
    if isinstance(spec, GaussianKernel):
        expr = _gaussian_expr(spec.alpha, grid.d)
    elif isinstance(spec, ExpressionKernel):
        expr = exprdsl.parse(spec.text, grid.d, "x")
    elif isinstance(spec, TabulatedKernel):
        expr = None
    else:
        raise ConfigurationError(f"unknown kernel spec {spec!r}")

    if expr is not None:
        K = _sample_expression(expr, grid)
        delta_expr = exprdsl.laplacian_symbolic(expr, grid.d)
        dK = _sample_expression(delta_expr, grid)
        source = "symbolic"
    else:
        vals = np.asarray(spec.values, dtype=float)
        K = ScalarField(grid, vals)
        dK = spectral.laplacian(K)
        source = "spectral"

    if strict and not np.any(K.values != 0.0):
        raise AssumptionViolation("kernel vanishes identically on the grid")

    l1 = spectral.l1_norm(K)
    dl1 = spectral.l1_norm(dK)
    return MaterializedKernel(
        field=K,
        delta=dK,
        delta_source=source,
        l1=l1,
        delta_l1=dl1,
        w21=float(np.hypot(l1, dl1)),
        tail_fraction=spectral.tail_mass_fraction(K, "l1"),
    )


def _sample_expression(expr: Expr, grid: Grid) -> ScalarField:
    vals = exprdsl.evaluate_arrays(expr, grid.coords)
    return ScalarField(grid, np.array(np.broadcast_to(vals, grid.shape)))


# --- operators ---------------------------------------------------------------

@dataclass(frozen=True)
class InverseHelmholtz:
    """Multiplier 1 / (1 + |xi|^2)."""


@dataclass(frozen=True)
class ScaledIdentity:
    alpha: float


@dataclass(frozen=True)
class RationalMultiplier:
    """Multiplier p(s)/q(s) with s = |xi|^2; q must stay positive on s >= 0.
    Coefficients are ascending in s."""
    p: tuple[float, ...]
    q: tuple[float, ...]


OperatorSpec = Union[InverseHelmholtz, ScaledIdentity, RationalMultiplier]


def multiplier_values(spec: OperatorSpec, grid: Grid) -> np.ndarray:
    """The multiplier evaluated on the grid's frequency lattice."""
    s = grid.xi_squared
    if isinstance(spec, InverseHelmholtz):
        return 1.0 / (1.0 + s)
    if isinstance(spec, ScaledIdentity):
        return np.full(grid.shape, float(spec.alpha))
    if isinstance(spec, RationalMultiplier):
        p = np.polynomial.polynomial.polyval(s, np.asarray(spec.p, dtype=float))
        q = np.polynomial.polynomial.polyval(s, np.asarray(spec.q, dtype=float))
        if np.min(q) <= 0:
            raise ConfigurationError("rational multiplier denominator is not positive "
                                     "on the frequency lattice")
        # polyval collapses degree-0 polynomials to scalars
        return np.array(np.broadcast_to(np.asarray(p / q, dtype=float), grid.shape))
    raise ConfigurationError(f"unknown operator spec {spec!r}")


def apply_operator(spec: OperatorSpec, f: ScalarField) -> ScalarField:
    """Apply the operator in frequency space."""
    return spectral.apply_multiplier(f, multiplier_values(spec, f.grid))


def operator_norm(spec: OperatorSpec, grid: Grid) -> float:
    """Exact operator norm on the discrete Sobolev space: the multiplier
    commutes with the (1 + |xi|^4) weight, so the norm is sup |multiplier|
    over the lattice."""
    norm = float(np.max(np.abs(multiplier_values(spec, grid))))
    if norm == 0.0:
        raise AssumptionViolation("operator multiplier vanishes identically")
    return norm


# --- vector fields -------------------------------------------------------------

@dataclass(frozen=True)
class VectorField:
    """N scalar components on one shared grid."""

    components: tuple[ScalarField, ...]

    def __post_init__(self):
        if not self.components:
            raise ConfigurationError("vector field needs at least one component")
        g = self.components[0].grid
        for c in self.components[1:]:
            if c.grid != g:
                raise ConfigurationError("vector field components live on different grids")

    @property
    def grid(self) -> Grid:
        return self.components[0].grid

    @property
    def n(self) -> int:
        return len(self.components)

    @classmethod
    def zero(cls, grid: Grid, n: int) -> "VectorField":
        return cls(tuple(ScalarField.zero(grid) for _ in range(n)))

    def h2_norm(self) -> float:
        return spectral.h2_norm_many(self.components)

    def __add__(self, other: "VectorField") -> "VectorField":
        return VectorField(tuple(a + b for a, b in zip(self.components, other.components)))

    def __sub__(self, other: "VectorField") -> "VectorField":
        return VectorField(tuple(a - b for a, b in zip(self.components, other.components)))

    def __mul__(self, scalar: float) -> "VectorField":
        return VectorField(tuple(c * scalar for c in self.components))

    __rmul__ = __mul__

    def values_list(self) -> list[np.ndarray]:
        return [c.values for c in self.components]


# --- problem -----------------------------------------------------------------

@dataclass(frozen=True)
class ProblemSpec:
    """Full problem description prior to sampling."""

    grid: Grid
    kernels: tuple[KernelSpec, ...]
    operators: tuple[OperatorSpec, ...]
    g: NonlinearitySpec
    u0: tuple[Union[Expr, np.ndarray], ...]
    rho: float | None = None
    c_e_override: float | None = None
    c_a_override: float | None = None

    def __post_init__(self):
        n = self.g.n
        if not (len(self.kernels) == len(self.operators) == len(self.u0) == n):
            raise ConfigurationError(
                "kernels, operators, u0, and g must all have the same component count")
        if self.rho is not None and not (0.0 < self.rho <= 1.0):
            raise ConfigurationError(f"ball radius must lie in (0, 1], got {self.rho}")

    @property
    def n(self) -> int:
        return self.g.n


@dataclass(frozen=True)
class MaterializedProblem:
    """A problem with every field sampled and every operator norm computed."""

    spec: ProblemSpec
    kernels: tuple[MaterializedKernel, ...]
    multipliers: tuple[np.ndarray, ...]
    operator_norms: tuple[float, ...]
    u0: VectorField
    u0_norm: float
    u0_tail_fractions: tuple[float, ...]

    @property
    def grid(self) -> Grid:
        return self.spec.grid

    @property
    def n(self) -> int:
        return self.spec.n

    @property
    def g(self) -> NonlinearitySpec:
        return self.spec.g


def materialize_u0(problem: ProblemSpec, strict: bool = True) -> VectorField:
    """Sample the initial data.  With strict=True, initial data that vanishes
    identically in every component raises."""
    comps = []
    for entry in problem.u0:
        if isinstance(entry, np.ndarray):
            comps.append(ScalarField(problem.grid, np.asarray(entry, dtype=float)))
        else:
            comps.append(_sample_expression(entry, problem.grid))
    u0 = VectorField(tuple(comps))
    if strict and not any(np.any(c.values != 0.0) for c in u0.components):
        raise AssumptionViolation("initial data vanishes identically in every component")
    return u0


def materialize(problem: ProblemSpec, strict: bool = True) -> MaterializedProblem:
    """Sample all fields and precompute operator data."""
    kernels = tuple(materialize_kernel(k, problem.grid, strict=strict)
                    for k in problem.kernels)
    mults = tuple(multiplier_values(op, problem.grid) for op in problem.operators)
    norms = []
    for op, m in zip(problem.operators, mults):
        norm = float(np.max(np.abs(m)))
        if strict and norm == 0.0:
            raise AssumptionViolation("operator multiplier vanishes identically")
        norms.append(norm)
    u0 = materialize_u0(problem, strict=strict)
    return MaterializedProblem(
        spec=problem,
        kernels=kernels,
        multipliers=mults,
        operator_norms=tuple(norms),
        u0=u0,
        u0_norm=u0.h2_norm(),
        u0_tail_fractions=tuple(spectral.tail_mass_fraction(c, "l2") for c in u0.components),
    )


# --- validation -----------------------------------------------------------------

@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_assumptions(mat: MaterializedProblem,
                         ball_radius: float | None = None,
                         sample_seed: int = 0) -> ValidationReport:
    """Check the structural hypotheses of the problem data and collect every
    violation instead of stopping at the first.

    `ball_radius` is the radius of the state ball on which the nonlinearity
    must not vanish identically; when omitted a unit ball is probed.
    """
    report = ValidationReport()
    spec = mat.spec

    for m, k in enumerate(mat.kernels):
        if not k.nontrivial:
            report.violations.append(f"kernel {m + 1} vanishes identically")
        elif k.tail_fraction > TAIL_MASS_WARN:
            report.warnings.append(
                f"kernel {m + 1} has relative tail mass {k.tail_fraction:.3e} "
                f"in the outer shell of the box; consider a larger L")

    if not any(np.any(c.values != 0.0) for c in mat.u0.components):
        report.violations.append("initial data vanishes identically in every component")
    for m, frac in enumerate(mat.u0_tail_fractions):
        if frac > TAIL_MASS_WARN:
            report.warnings.append(
                f"initial data component {m + 1} has relative tail mass {frac:.3e}")

    if not exprdsl.check_zero_at_origin(spec.g):
        report.violations.append("nonlinearity does not vanish at the origin")

    r = 1.0 if ball_radius is None else float(ball_radius)
    rng = np.random.default_rng(sample_seed)
    pts = rng.standard_normal((256, spec.n))
    radii = np.linalg.norm(pts, axis=1, keepdims=True)
    radii[radii == 0.0] = 1.0
    pts = pts / radii * (r * rng.uniform(0, 1, (256, 1)) ** (1.0 / spec.n))
    cols = [pts[:, j] for j in range(spec.n)]
    try:
        values = spec.g.evaluate_components(cols)
        if all(np.max(np.abs(v)) <= 1e-14 for v in values):
            report.violations.append("nonlinearity vanishes identically on the state ball")
    except Exception as exc:  # domain fault inside the probed ball
        report.violations.append(f"nonlinearity evaluation failed on the state ball: {exc}")

    for m, norm in enumerate(mat.operator_norms):
        if norm == 0.0:
            report.violations.append(f"operator {m + 1} multiplier vanishes identically")
        elif not np.isfinite(norm):
            report.violations.append(f"operator {m + 1} norm is not finite")

    if spec.rho is not None and not (0.0 < spec.rho <= 1.0):
        report.violations.append(f"ball radius {spec.rho} outside (0, 1]")

    return report
