"""Orbit-type strata of holonomy sets for SU(2) and SU(3).

A finite set H of holonomies is classified by the complex dimension of its
commutant {X in M_n(C) : X h = h X for all h in H}, computed as the null
space of the stacked linear maps X -> X h - h X.  Block structure fixes the
dimension: SU2 irreducible 1, diagonal 2, central 4; SU3 irreducible 1,
(2 + 1) blocks 2, diagonal with distinct phases 3, (scalar 2-block + phase) 5,
central 9.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .group_core import (
    GroupElement,
    GroupKind,
    GroupKindMismatch,
    class_coordinates,
    haar_sample,
    pauli,
    su3_from_octet,
)
from .heat_kernel import heat_kernel

COMMUTANT_RTOL = 1e-9
INDETERMINATE_FACTOR = 10.0


class IndeterminateStratum(ValueError):
    """The commutant spectrum has a singular value too close to the threshold."""

    def __init__(self, report: "CommutantReport"):
        self.report = report
        near = [s for s in report.singular_values if report.threshold / INDETERMINATE_FACTOR <= s
                <= report.threshold * INDETERMINATE_FACTOR]
        super().__init__(f"singular values {near} within {INDETERMINATE_FACTOR:g}x of threshold "
                         f"{report.threshold:.3e}")


@dataclass(frozen=True)
class HolonomySet:
    kind: GroupKind
    elements: tuple

    def __post_init__(self):
        kind = GroupKind.parse(self.kind)
        if kind is GroupKind.U1:
            raise ValueError("strata are classified for SU2 and SU3 only")
        elements = tuple(self.elements)
        if not elements:
            raise ValueError("holonomy set must be nonempty")
        for g in elements:
            if g.kind is not kind:
                raise GroupKindMismatch(f"{g.kind.name} element in a {kind.name} holonomy set")
            if g.batch_shape:
                raise ValueError("holonomy set elements must be single group elements")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "elements", elements)

    @classmethod
    def from_matrices(cls, kind, matrices) -> "HolonomySet":
        return cls(kind, tuple(GroupElement(kind, np.asarray(m, dtype=complex)) for m in matrices))

    def matrices(self) -> np.ndarray:
        return np.stack([g.data for g in self.elements])

    def conjugated(self, h: GroupElement) -> "HolonomySet":
        hinv = np.conj(h.data.T)
        return HolonomySet(self.kind, tuple(GroupElement(self.kind, h.data @ g.data @ hinv) for g in self.elements))

    def __add__(self, other: "HolonomySet") -> "HolonomySet":
        return HolonomySet(self.kind, self.elements + other.elements)


@dataclass(frozen=True)
class CommutantReport:
    dimension: int
    singular_values: tuple
    threshold: float
    indeterminate: bool


@dataclass(frozen=True)
class StratumType:
    kind: GroupKind
    index: int
    isotropy: str
    max_subbundle: str

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "index": self.index, "isotropy": self.isotropy,
                "max_subbundle": self.max_subbundle}


# index -> (commutant dimension, isotropy S_A, maximal-subbundle group H'_A)
STRATUM_TABLE = {
    GroupKind.SU2: {
        1: (1, "Z2", "SU(2)"),
        2: (2, "U(1)", "U(1)"),
        3: (4, "SU(2)", "Z2"),
    },
    GroupKind.SU3: {
        1: (1, "Z3", "SU(3)"),
        2: (2, "U(1)", "U(2)"),
        3: (3, "U(1)xU(1)", "U(1)xU(1)"),
        4: (5, "U(2)", "U(1)"),
        5: (9, "SU(3)", "Z3"),
    },
}

ALLOWED_DIMENSIONS = {kind: {row[0] for row in rows.values()} for kind, rows in STRATUM_TABLE.items()}


def stratum_type(kind: GroupKind | str, index: int) -> StratumType:
    kind = GroupKind.parse(kind)
    try:
        _, iso, sub = STRATUM_TABLE[kind][index]
    except KeyError:
        raise ValueError(f"no stratum {index} for {kind.name}") from None
    return StratumType(kind, index, iso, sub)


def commutant_dimension(H: HolonomySet, rtol: float = COMMUTANT_RTOL) -> CommutantReport:
    """Null-space dimension of X -> (X h - h X)_h on M_n(C).

    With row-major vec, vec(X h) = (I kron h^T) vec X and vec(h X) = (h kron I) vec X.
    The threshold is rtol times max(largest singular value, 1): the elements are
    unitary, so the operator norm is O(1) unless every element is central.
    """
    n = H.kind.matrix_size
    eye = np.eye(n)
    blocks = [np.kron(eye, h.data.T) - np.kron(h.data, eye) for h in H.elements]
    s = np.linalg.svd(np.concatenate(blocks), compute_uv=False)
    threshold = rtol * max(float(s[0]), 1.0)
    dim = int(np.count_nonzero(s < threshold))
    near = (s >= threshold / INDETERMINATE_FACTOR) & (s <= threshold * INDETERMINATE_FACTOR)
    return CommutantReport(dim, tuple(float(v) for v in s), threshold, bool(np.any(near)))


def classify_stratum(H: HolonomySet, rtol: float = COMMUTANT_RTOL) -> StratumType:
    report = commutant_dimension(H, rtol)
    if report.indeterminate:
        raise IndeterminateStratum(report)
    for index, (dim, iso, sub) in STRATUM_TABLE[H.kind].items():
        if dim == report.dimension:
            return StratumType(H.kind, index, iso, sub)
    raise ValueError(f"commutant dimension {report.dimension} matches no {H.kind.name} stratum "
                     f"(singular values {report.singular_values})")


# ---------------------------------------------------------------------------
# constructed examples


def su2_rotation(theta: float, n) -> np.ndarray:
    """exp(-i theta/2 n.sigma) = cos(theta/2) - i sin(theta/2) n.sigma."""
    n = np.asarray(n, dtype=float)
    n = n / np.linalg.norm(n)
    return math.cos(theta / 2) * np.eye(2) - 1j * math.sin(theta / 2) * np.einsum("k,kij->ij", n, pauli())


def _unit_vector(rng) -> np.ndarray:
    v = rng.standard_normal(3)
    return v / np.linalg.norm(v)


def _separated_axes(rng, min_angle: float = 0.3):
    n1 = _unit_vector(rng)
    while True:
        n2 = _unit_vector(rng)
        if abs(n1 @ n2) < math.cos(min_angle):
            return n1, n2


def _su2_irreducible_pair(rng) -> list[np.ndarray]:
    # rotation angles kept away from 0 and 4 pi (the central elements)
    n1, n2 = _separated_axes(rng)
    return [su2_rotation(rng.uniform(0.6, 2 * math.pi - 0.6), n1),
            su2_rotation(rng.uniform(0.6, 2 * math.pi - 0.6), n2)]


def _separated_phases(rng, count: int, gap: float = 0.5) -> np.ndarray:
    """count phases summing to 0 mod 2 pi whose exponentials are pairwise >= gap apart in angle."""
    while True:
        ph = rng.uniform(-math.pi, math.pi, count - 1)
        ph = np.append(ph, -ph.sum())
        d = np.angle(np.exp(1j * (ph[:, None] - ph[None, :])))
        off = np.abs(d[~np.eye(count, dtype=bool)])
        if off.min() >= gap:
            return ph


def _spread_unitary(rng, kind: GroupKind, floor: float = 0.1) -> np.ndarray:
    """Haar element whose entries all have modulus >= floor."""
    while True:
        u = haar_sample(kind, rng).data
        if np.abs(u).min() >= floor:
            return u


def _su3_example(index: int, rng) -> list[np.ndarray]:
    if index == 1:
        # distinct-phase diagonal plus a matrix with no vanishing entries: only scalars commute with both
        return [np.diag(np.exp(1j * _separated_phases(rng, 3))), _spread_unitary(rng, GroupKind.SU3)]
    if index == 2:
        z = np.exp(1j * rng.uniform(-math.pi, math.pi))
        out = []
        for u in _su2_irreducible_pair(rng):
            m = np.zeros((3, 3), dtype=complex)
            m[:2, :2] = z * u
            m[2, 2] = z**-2
            out.append(m)
        return out
    if index == 3:
        return [np.diag(np.exp(1j * _separated_phases(rng, 3))) for _ in range(rng.integers(1, 3))]
    if index == 4:
        # diag(w, w, w^-2) with w^3 kept away from 1 so the two blocks differ
        alpha = rng.uniform(0.3, 2 * math.pi / 3 - 0.3) + 2 * math.pi / 3 * rng.integers(0, 3)
        w = np.exp(1j * alpha)
        return [np.diag([w, w, w**-2])]
    if index == 5:
        omega = np.exp(2j * math.pi / 3)
        return [omega ** rng.integers(0, 3) * np.eye(3) for _ in range(rng.integers(1, 3))]
    raise ValueError(f"no stratum {index} for SU3")


def _su2_example(index: int, rng) -> list[np.ndarray]:
    if index == 1:
        return _su2_irreducible_pair(rng)
    if index == 2:
        n = _unit_vector(rng)
        count = int(rng.integers(1, 4))
        return [su2_rotation(rng.uniform(0.6, 2 * math.pi - 0.6), n) for _ in range(count)]
    if index == 3:
        return [rng.choice([-1.0, 1.0]) * np.eye(2, dtype=complex) for _ in range(rng.integers(1, 3))]
    raise ValueError(f"no stratum {index} for SU2")


def stratum_examples(kind: GroupKind | str, index: int, rng: np.random.Generator,
                     conjugate: bool = True) -> HolonomySet:
    """Random generator set lying in the requested stratum, conjugated by a Haar element."""
    kind = GroupKind.parse(kind)
    stratum_type(kind, index)
    mats = _su2_example(index, rng) if kind is GroupKind.SU2 else _su3_example(index, rng)
    H = HolonomySet.from_matrices(kind, mats)
    if conjugate:
        H = H.conjugated(haar_sample(kind, rng))
    return H


# ---------------------------------------------------------------------------
# partial order of types
#
# type a <= type b when the isotropy group of b is conjugate to a subgroup of
# that of a (more symmetric strata sit lower, in the closure of the others).
# Fixed representatives are chosen nested so containment is literal.


def stratum_representative(kind: GroupKind | str, index: int) -> HolonomySet:
    """Fixed generator set of a stratum; the representatives are nested so isotropy groups contain each other."""
    kind = GroupKind.parse(kind)
    if kind is GroupKind.SU2:
        mats = {
            1: [su2_rotation(2.0, [1, 0, 0]), su2_rotation(2.0, [0, 0, 1])],
            2: [su2_rotation(2.0, [0, 0, 1])],
            3: [np.eye(2, dtype=complex)],
        }[index]
        return HolonomySet.from_matrices(kind, mats)
    u = [su2_rotation(2.0, [1, 0, 0]), su2_rotation(2.0, [0, 0, 1])]
    z = np.exp(0.4j)
    block = []
    for m in u:
        b = np.zeros((3, 3), dtype=complex)
        b[:2, :2] = z * m
        b[2, 2] = z**-2
        block.append(b)
    mats = {
        1: block + [_fixed_spread_su3()],
        2: block,
        3: [np.diag(np.exp(1j * np.array([0.9, -2.1, 1.2])))],
        4: [np.diag(np.exp(1j * np.array([0.7, 0.7, -1.4])))],
        5: [np.eye(3, dtype=complex)],
    }[index]
    return HolonomySet.from_matrices(kind, mats)


def _fixed_spread_su3() -> np.ndarray:
    return _spread_unitary(np.random.default_rng(7), GroupKind.SU3)


def isotropy_sample(kind: GroupKind | str, index: int, rng: np.random.Generator, size: int = 8) -> np.ndarray:
    """Random elements of the isotropy group (commutant within the group) of the fixed representative."""
    kind = GroupKind.parse(kind)
    n = kind.matrix_size
    phases = lambda k: np.exp(1j * rng.uniform(-math.pi, math.pi, (size, k)))  # noqa: E731
    out = np.zeros((size, n, n), dtype=complex)
    if kind is GroupKind.SU2:
        if index == 1:
            out[:] = rng.choice([-1.0, 1.0], size)[:, None, None] * np.eye(2)
        elif index == 2:
            z = phases(1)[:, 0]
            out[:, 0, 0], out[:, 1, 1] = z, np.conj(z)
        elif index == 3:
            out = haar_sample(kind, rng, size).data
        else:
            raise ValueError(f"no stratum {index} for SU2")
        return out
    omega = np.exp(2j * math.pi / 3)
    if index == 1:
        out[:] = (omega ** rng.integers(0, 3, size))[:, None, None] * np.eye(3)
    elif index == 2:
        z = phases(1)[:, 0]
        out[:, 0, 0] = out[:, 1, 1] = z
        out[:, 2, 2] = z**-2
    elif index == 3:
        a = phases(2)
        out[:, 0, 0], out[:, 1, 1], out[:, 2, 2] = a[:, 0], a[:, 1], 1 / (a[:, 0] * a[:, 1])
    elif index == 4:
        u = haar_sample(GroupKind.SU2, rng, size).data
        z = phases(1)[:, 0]
        out[:, :2, :2] = z[:, None, None] * u
        out[:, 2, 2] = z**-2
    elif index == 5:
        out = haar_sample(kind, rng, size).data
    else:
        raise ValueError(f"no stratum {index} for SU3")
    return out


def stratum_leq(kind: GroupKind | str, a: int, b: int) -> bool:
    """Static partial order: a <= b iff S_b is conjugate into S_a (a total order here)."""
    kind = GroupKind.parse(kind)
    stratum_type(kind, a)
    stratum_type(kind, b)
    return a >= b


def check_isotropy_containment(kind: GroupKind | str, a: int, b: int, rng: np.random.Generator,
                               size: int = 16, tol: float = 1e-10) -> bool:
    """Do random elements of S_b (for its representative) commute with the representative of a?"""
    kind = GroupKind.parse(kind)
    rep = stratum_representative(kind, a).matrices()
    g = isotropy_sample(kind, b, rng, size)
    comm = np.einsum("sij,hjk->shik", g, rep) - np.einsum("hij,sjk->shik", rep, g)
    return bool(np.abs(comm).max() < tol)


# ---------------------------------------------------------------------------
# measure intensity along strata


@dataclass(frozen=True)
class StratumProfile:
    kind: GroupKind
    index: int
    beta: float
    parameter: np.ndarray
    kernel: np.ndarray
    identity_value: float


def stratum_family(kind: GroupKind | str, index: int, t: float) -> HolonomySet:
    """One-parameter family inside a stratum; t -> 0 moves the generators toward the identity.

    For the central strata t indexes the central elements instead (t = 0 the identity).
    """
    kind = GroupKind.parse(kind)
    if kind is GroupKind.SU2:
        if index == 1:
            mats = [su2_rotation(t, [1, 0, 0]), su2_rotation(t, [0, 1, 0])]
        elif index == 2:
            mats = [su2_rotation(t, [0, 0, 1])]
        elif index == 3:
            mats = [su2_rotation(t, [0, 0, 1])]
            if not np.allclose(mats[0], np.round(mats[0].real), atol=1e-12):
                raise ValueError("stratum 3 holds only the central elements t in {0, 2 pi}")
        else:
            raise ValueError(f"no stratum {index} for SU2")
        return HolonomySet.from_matrices(kind, mats)
    if index == 1:
        a1 = np.array([0.8, 0.1, 0.3, 0.2, -0.5, 0.4, 0.1, 0.6])
        a2 = np.array([-0.2, 0.7, 0.1, -0.4, 0.3, 0.2, 0.5, -0.1])
        return HolonomySet(kind, (su3_from_octet(t * a1), su3_from_octet(t * a2)))
    if index == 2:
        mats = []
        for u in (su2_rotation(t, [1, 0, 0]), su2_rotation(t, [0, 1, 0])):
            m = np.zeros((3, 3), dtype=complex)
            m[:2, :2] = np.exp(0.3j * t) * u
            m[2, 2] = np.exp(-0.6j * t)
            mats.append(m)
        return HolonomySet.from_matrices(kind, mats)
    if index == 3:
        return HolonomySet.from_matrices(kind, [np.diag(np.exp(1j * t * np.array([1.0, -0.37, -0.63])))])
    if index == 4:
        return HolonomySet.from_matrices(kind, [np.diag(np.exp(1j * t * np.array([1.0, 1.0, -2.0])))])
    if index == 5:
        return HolonomySet.from_matrices(kind, [np.exp(1j * t) * np.eye(3)])
    raise ValueError(f"no stratum {index} for SU3")


def _central_parameters(kind: GroupKind) -> np.ndarray:
    if kind is GroupKind.SU2:
        return np.array([0.0, 2 * math.pi])
    return np.array([0.0, 2 * math.pi / 3, 4 * math.pi / 3])


def stratum_measure_profile(kind: GroupKind | str, index: int, beta: float, n_points: int = 50,
                            t_max: float | None = None) -> StratumProfile:
    """Heat-kernel density of the first generator along stratum_family, t ascending.

    Central strata return the finitely many central elements.
    """
    kind = GroupKind.parse(kind)
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    central = (kind is GroupKind.SU2 and index == 3) or (kind is GroupKind.SU3 and index == 5)
    if central:
        ts = _central_parameters(kind)
    else:
        stratum_type(kind, index)
        if t_max is None:
            t_max = math.pi if kind is GroupKind.SU2 else 1.0
        ts = np.linspace(t_max / n_points, t_max, n_points)
    gens = [stratum_family(kind, index, float(t)).elements[0] for t in ts]
    coords = class_coordinates(GroupElement(kind, np.stack([g.data for g in gens])))
    values = heat_kernel(kind, coords, beta)
    ident = class_coordinates(GroupElement(kind, np.eye(kind.matrix_size, dtype=complex)))
    return StratumProfile(kind, index, float(beta), ts, np.asarray(values, dtype=float),
                          float(heat_kernel(kind, ident, beta)))


def classify_all(sets: Sequence[HolonomySet]) -> list[StratumType]:
    return [classify_stratum(H) for H in sets]
