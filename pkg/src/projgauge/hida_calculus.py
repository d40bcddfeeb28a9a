"""Heat-kernel norms, the projective metric and the S-transform on the class-function sector.

A test function is f = sum_L c_L chi_L / p1 with p1 the heat kernel at beta = 1.
Its t-norm is sqrt(sum |c_L|^2 exp((1 - 1/t) c(L))), using Delta chi = -c chi.
Distributions are either finite sums of weighted point masses or finite
character series paired with test functions against Haar measure.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .group_core import (
    ClassCoordinates,
    GroupElement,
    GroupKind,
    GroupKindMismatch,
    RepLabel,
    character,
    class_coordinates,
    haar_sample,
    inverse,
    laplacian_eigenvalue,
    multiply,
)
from .heat_kernel import CharacterSeries, class_quadrature, heat_kernel, kernel_series

METRIC_N_MAX = 40
P1_BETA = 1.0


@dataclass(frozen=True)
class TestFunction:
    kind: GroupKind
    coefficients: Mapping[RepLabel, complex] = field(default_factory=dict)

    # keep pytest from collecting this class
    __test__ = False

    def __post_init__(self):
        kind = GroupKind.parse(self.kind)
        object.__setattr__(self, "kind", kind)
        coeffs = {}
        for rep, value in dict(self.coefficients).items():
            if rep.kind is not kind:
                raise GroupKindMismatch(f"{rep.kind.name} label in a {kind.name} test function")
            coeffs[rep] = complex(value)
        object.__setattr__(self, "coefficients", coeffs)

    def __sub__(self, other: "TestFunction") -> "TestFunction":
        return self + other.scale(-1)

    def __add__(self, other: "TestFunction") -> "TestFunction":
        if other.kind is not self.kind:
            raise GroupKindMismatch(f"{self.kind.name} vs {other.kind.name}")
        out = dict(self.coefficients)
        for rep, value in other.coefficients.items():
            out[rep] = out.get(rep, 0) + value
        return TestFunction(self.kind, out)

    def scale(self, factor) -> "TestFunction":
        return TestFunction(self.kind, {r: factor * v for r, v in self.coefficients.items()})

    def numerator(self, c: ClassCoordinates) -> np.ndarray:
        """sum_L c_L chi_L, i.e. p1 * f."""
        total = np.zeros(c.batch_shape, dtype=complex)
        for rep, value in self.coefficients.items():
            total = total + value * character(rep, c)
        return total

    def evaluate(self, c: ClassCoordinates) -> np.ndarray:
        return self.numerator(c) / p1(c)


def p1(c: ClassCoordinates) -> np.ndarray:
    return heat_kernel(c.kind, c, P1_BETA)


def norm_t(f: TestFunction, t: float) -> float:
    if not t >= 1:
        raise ValueError(f"norm index t must be >= 1, got {t}")
    # summed in log space; weights like exp(c) overflow for large labels
    logs = [2 * math.log(abs(v)) + (1.0 - 1.0 / t) * laplacian_eigenvalue(rep)
            for rep, v in f.coefficients.items() if v != 0]
    if not logs:
        return 0.0
    top = max(logs)
    half_log = 0.5 * (top + math.log(sum(math.exp(x - top) for x in logs)))
    return math.exp(half_log) if half_log < 709.0 else math.inf


def metric_d(f: TestFunction, g: TestFunction, n_max: int = METRIC_N_MAX) -> float:
    """sum_{n=1}^{n_max} 2^-n |f-g|_n / (1 + |f-g|_n); the omitted tail is below 2^-n_max."""
    diff = f - g
    total = 0.0
    for n in range(1, n_max + 1):
        v = norm_t(diff, n)
        if math.isinf(v):
            total += 2.0**-n
        else:
            total += 2.0**-n * v / (1.0 + v)
    return total


def e_x(x: GroupElement, y: GroupElement) -> np.ndarray:
    """p1(x^-1 y) / p1(y)."""
    if x.kind is not y.kind:
        raise GroupKindMismatch(f"{x.kind.name} vs {y.kind.name}")
    num = p1(class_coordinates(multiply(inverse(x), y)))
    return num / p1(class_coordinates(y))


@dataclass(frozen=True)
class PointMasses:
    """sum_i w_i delta_{g_i}."""

    points: GroupElement
    weights: np.ndarray

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=complex))
        object.__setattr__(self, "weights", w)
        if self.points.batch_shape != w.shape:
            raise ValueError("one weight per point required")

    @property
    def kind(self) -> GroupKind:
        return self.points.kind

    def total_mass(self) -> complex:
        return complex(np.sum(self.weights))

    def pair(self, f: TestFunction) -> complex:
        return complex(np.sum(self.weights * f.evaluate(class_coordinates(self.points))))


def combine(a: PointMasses, b: PointMasses, alpha=1.0, beta=1.0) -> PointMasses:
    """alpha a + beta b as a single point-mass distribution."""
    if a.kind is not b.kind:
        raise GroupKindMismatch(f"{a.kind.name} vs {b.kind.name}")
    data = np.concatenate([a.points.data, b.points.data])
    return PointMasses(GroupElement(a.kind, data), np.concatenate([alpha * a.weights, beta * b.weights]))


@dataclass(frozen=True)
class SeriesDistribution:
    """Distribution with density sum_L a_L chi_L against Haar measure."""

    series: CharacterSeries

    @property
    def kind(self) -> GroupKind:
        return self.series.kind

    def total_mass(self) -> complex:
        return complex(self.series.coefficients.get(RepLabel.trivial(self.kind), 0.0))

    def pair(self, f: TestFunction, n: int = 512) -> complex:
        """Haar pairing by class quadrature (U1, SU2 and SU3 periodic trapezoid)."""
        coords, w = class_quadrature(self.kind, n)
        return complex(np.sum(w * self.series.evaluate(coords) * f.evaluate(coords)))


@dataclass(frozen=True)
class MonteCarloEstimate:
    value: complex
    stderr: float
    samples: int


def _su2_pair_quadrature(n_angle: int, n_axis: int):
    """Nodes for integrating g(Re Tr(x^-1 y)/2) over Haar y at fixed x.

    y = (cos a, sin a n) with a in [0, pi] under (2/pi) sin^2 a da and n
    uniform on the sphere; only u = n . n_x enters.
    """
    t, w = np.polynomial.legendre.leggauss(n_angle)
    a = 0.5 * np.pi * (t + 1)
    wa = 0.5 * np.pi * w * (2 / np.pi) * np.sin(a) ** 2
    u, wu = np.polynomial.legendre.leggauss(n_axis)
    return a, wa, u, 0.5 * wu


def s_transform(phi, x: GroupElement, rng: np.random.Generator | None = None, samples: int = 200000,
                nodes: int = 400):
    """(S phi)(x) = phi(e_x).

    Point masses: sum_i w_i e_x(g_i).  Series distributions: the Haar
    integral of density * e_x by periodic trapezoid (U1), a two-dimensional
    Gauss-Legendre rule in (class angle of y, relative axis) (SU2), or Haar
    Monte Carlo (SU3, returns a MonteCarloEstimate).
    """
    if isinstance(phi, PointMasses):
        if phi.kind is not x.kind:
            raise GroupKindMismatch(f"{phi.kind.name} vs {x.kind.name}")
        return complex(np.sum(phi.weights * e_x(x, phi.points)))
    kind = phi.kind
    if kind is not x.kind:
        raise GroupKindMismatch(f"{kind.name} vs {x.kind.name}")
    series = phi.series
    if kind is GroupKind.U1:
        y = np.arange(nodes * 4) / (nodes * 4)
        c = ClassCoordinates(kind, y)
        vals = series.evaluate(c) * p1(ClassCoordinates(kind, y - x.data)) / p1(c)
        return complex(np.mean(vals))
    if kind is GroupKind.SU2:
        # x^-1 y for x of class angle b: Re Tr / 2 = cos a cos b + sin a sin b u
        b = float(class_coordinates(x).values) * np.pi
        a, wa, u, wu = _su2_pair_quadrature(nodes, nodes // 2)
        ya = ClassCoordinates(kind, a / np.pi)
        base = series.evaluate(ya) / p1(ya)
        half_tr = np.cos(a)[:, None] * np.cos(b) + np.sin(a)[:, None] * np.sin(b) * u[None, :]
        rel = ClassCoordinates(kind, np.arccos(np.clip(half_tr, -1, 1)) / np.pi)
        return complex(np.sum(wa[:, None] * wu[None, :] * base[:, None] * p1(rel)))
    if rng is None:
        raise ValueError("SU3 series pairing is Monte Carlo and needs an rng")
    y = haar_sample(kind, rng, samples)
    cy = class_coordinates(y)
    vals = series.evaluate(cy) * e_x(x, y)
    return MonteCarloEstimate(complex(np.mean(vals)), float(np.std(vals) / math.sqrt(samples)), samples)


def kernel_pairing(kind: GroupKind | str, rep: RepLabel, beta: float, n: int = 512) -> complex:
    """Pair K_beta (as a distribution) with the test function chi_L / p1 * p1 = chi_L.

    Evaluated by class quadrature; equals d_L e^{-c_L beta} for real characters
    (the conjugate character for complex ones, by orthogonality).
    """
    kind = GroupKind.parse(kind)
    coords, w = class_quadrature(kind, n)
    return complex(np.sum(w * heat_kernel(kind, coords, beta) * np.conj(character(rep, coords))))


# ---------------------------------------------------------------------------
# product distributions on G^{#E}


@dataclass(frozen=True)
class ProductDistribution:
    """Finite tensor product of per-edge distributions, keyed by edge, times a scalar."""

    factors: Mapping[object, object]
    scale: complex = 1.0

    def restrict(self, edges: Sequence) -> "ProductDistribution":
        """Edgewise restriction: keep the listed edges, absorb the dropped total masses."""
        keep = {e: self.factors[e] for e in edges}
        mass = self.scale
        for e, f in self.factors.items():
            if e not in keep:
                mass *= f.total_mass()
        return ProductDistribution(keep, mass)

    def total_mass(self) -> complex:
        mass = self.scale
        for f in self.factors.values():
            mass *= f.total_mass()
        return mass

    def pair(self, tests: Mapping[object, TestFunction]) -> complex:
        """Pair with a product test function; edges without a factor use the constant 1."""
        value = self.scale
        for e, f in self.factors.items():
            value *= f.pair(tests[e]) if e in tests else f.total_mass()
        return value


def constant_one(kind: GroupKind | str) -> TestFunction:
    """The test function 1 = p1 / p1, i.e. the kernel coefficients of p1."""
    return TestFunction(kind, kernel_series(kind, P1_BETA).coefficients)
