"""Group arithmetic, Haar sampling, class coordinates and characters for U(1), SU(2), SU(3).

Elements are stored in numpy arrays and may carry leading batch axes:

* ``U1``  -- real angle ``theta`` in [0, 1), the element being ``exp(2 pi i theta)``;
* ``SU2`` -- complex ``(..., 2, 2)`` unitary matrices with unit determinant;
* ``SU3`` -- complex ``(..., 3, 3)`` unitary matrices with unit determinant.

The Laplacian is normalized so that ``Delta chi = -c(Lambda) chi`` with
``c(n) = (2 pi n)^2`` (U1), ``c(lam) = lam (lam + 1) / 2`` (SU2) and
``c(p, q) = (p^2 + q^2 + p q) / 3 - 1`` (SU3).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from functools import cache
from typing import Callable

import numpy as np

UNITARITY_TOL = 1e-12


class GroupKind(str, enum.Enum):
    U1 = "u1"
    SU2 = "su2"
    SU3 = "su3"

    @property
    def matrix_size(self) -> int:
        return {GroupKind.U1: 1, GroupKind.SU2: 2, GroupKind.SU3: 3}[self]

    @property
    def algebra_dim(self) -> int:
        return {GroupKind.U1: 1, GroupKind.SU2: 3, GroupKind.SU3: 8}[self]

    @classmethod
    def parse(cls, value: "GroupKind | str") -> "GroupKind":
        if isinstance(value, GroupKind):
            return value
        return cls(str(value).lower())


class GroupKindMismatch(ValueError):
    """Raised when elements of different structure groups are combined."""


@dataclass(frozen=True, eq=False)
class GroupElement:
    """One element (or a stack of elements) of a structure group."""

    kind: GroupKind
    data: np.ndarray

    def __post_init__(self):
        kind = GroupKind.parse(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is GroupKind.U1:
            data = np.mod(np.asarray(self.data, dtype=float), 1.0)
            # mod can return exactly 1.0 for tiny negative inputs
            data = np.where(data >= 1.0, 0.0, data)
        else:
            n = kind.matrix_size
            data = np.asarray(self.data, dtype=complex)
            if data.shape[-2:] != (n, n):
                raise ValueError(f"{kind.name} payload must end in ({n}, {n}), got {data.shape}")
        object.__setattr__(self, "data", data)

    @property
    def batch_shape(self) -> tuple[int, ...]:
        if self.kind is GroupKind.U1:
            return self.data.shape
        return self.data.shape[:-2]

    def __len__(self) -> int:
        if not self.batch_shape:
            raise TypeError("single group element has no length")
        return self.batch_shape[0]

    def __getitem__(self, index) -> "GroupElement":
        if not self.batch_shape:
            raise TypeError("single group element is not indexable")
        return GroupElement(self.kind, self.data[index])

    def __mul__(self, other: "GroupElement") -> "GroupElement":
        return multiply(self, other)

    def matrix(self) -> np.ndarray:
        """Defining-representation matrix (1x1 for U1)."""
        if self.kind is GroupKind.U1:
            return np.exp(2j * np.pi * self.data)[..., None, None]
        return self.data

    def __repr__(self) -> str:
        return f"GroupElement({self.kind.name}, batch_shape={self.batch_shape})"


def identity(kind: GroupKind | str, shape: tuple[int, ...] = ()) -> GroupElement:
    kind = GroupKind.parse(kind)
    if kind is GroupKind.U1:
        return GroupElement(kind, np.zeros(shape))
    n = kind.matrix_size
    return GroupElement(kind, np.broadcast_to(np.eye(n, dtype=complex), shape + (n, n)).copy())


def unitarity_defect(g: GroupElement) -> np.ndarray:
    """max |U^dagger U - I| and |det U - 1| per element (zeros for U1)."""
    if g.kind is GroupKind.U1:
        return np.zeros(g.batch_shape)
    u = g.data
    n = u.shape[-1]
    gram = np.conj(np.swapaxes(u, -1, -2)) @ u - np.eye(n)
    defect = np.max(np.abs(gram), axis=(-2, -1))
    return np.maximum(defect, np.abs(np.linalg.det(u) - 1.0))


def project_to_group(u: np.ndarray) -> np.ndarray:
    """Nearest special unitary matrix: polar factor with the determinant phase removed."""
    w, _, vh = np.linalg.svd(u)
    q = w @ vh
    n = u.shape[-1]
    det = np.linalg.det(q)
    return q / (det ** (1.0 / n))[..., None, None]


def _reunitarize(data: np.ndarray) -> np.ndarray:
    g = GroupElement.__new__(GroupElement)
    object.__setattr__(g, "kind", GroupKind.SU2)
    object.__setattr__(g, "data", data)
    bad = unitarity_defect(g) > UNITARITY_TOL
    if np.any(bad):
        data = data.copy()
        data[bad] = project_to_group(data[bad])
    return data


def multiply(a: GroupElement, b: GroupElement) -> GroupElement:
    if a.kind is not b.kind:
        raise GroupKindMismatch(f"cannot multiply {a.kind.name} by {b.kind.name}")
    if a.kind is GroupKind.U1:
        return GroupElement(a.kind, a.data + b.data)
    return GroupElement(a.kind, _reunitarize(a.data @ b.data))


def inverse(g: GroupElement) -> GroupElement:
    if g.kind is GroupKind.U1:
        return GroupElement(g.kind, -g.data)
    return GroupElement(g.kind, np.conj(np.swapaxes(g.data, -1, -2)))


def conjugate_by(h: GroupElement, g: GroupElement) -> GroupElement:
    """h g h^-1."""
    return multiply(multiply(h, g), inverse(h))


def _size_tuple(size) -> tuple[int, ...]:
    if size is None:
        return ()
    if isinstance(size, (int, np.integer)):
        return (int(size),)
    return tuple(size)


def su2_from_quaternion(q: np.ndarray) -> np.ndarray:
    """Unit quaternion (a, b, c, d) -> [[a + ib, c + id], [-c + id, a - ib]]."""
    a, b, c, d = np.moveaxis(np.asarray(q, dtype=float), -1, 0)
    out = np.empty(a.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = a + 1j * b
    out[..., 0, 1] = c + 1j * d
    out[..., 1, 0] = -c + 1j * d
    out[..., 1, 1] = a - 1j * b
    return out


def haar_sample(kind: GroupKind | str, rng: np.random.Generator, size=None) -> GroupElement:
    """Draw from the normalized Haar measure.

    SU3 samples use the QR decomposition of a complex Ginibre matrix with the
    phases of R's diagonal pushed into Q, followed by division of the last
    column by the determinant.
    """
    kind = GroupKind.parse(kind)
    shape = _size_tuple(size)
    if kind is GroupKind.U1:
        return GroupElement(kind, rng.random(shape))
    if kind is GroupKind.SU2:
        q = rng.standard_normal(shape + (4,))
        q /= np.linalg.norm(q, axis=-1, keepdims=True)
        return GroupElement(kind, su2_from_quaternion(q))
    z = (rng.standard_normal(shape + (3, 3)) + 1j * rng.standard_normal(shape + (3, 3))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r, axis1=-2, axis2=-1)
    q = q * (diag / np.abs(diag))[..., None, :]
    det = np.linalg.det(q)
    q[..., :, 2] /= det[..., None]
    return GroupElement(kind, q)


# ---------------------------------------------------------------------------
# class coordinates


@dataclass(frozen=True, eq=False)
class ClassCoordinates:
    """Conjugation-invariant coordinates.

    ``values`` holds theta (U1), x in [0, 1] (SU2) or the pair
    (theta1, theta2) on a trailing axis (SU3).
    """

    kind: GroupKind
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "kind", GroupKind.parse(self.kind))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))

    @property
    def batch_shape(self) -> tuple[int, ...]:
        if self.kind is GroupKind.SU3:
            return self.values.shape[:-1]
        return self.values.shape

    def trace(self) -> np.ndarray:
        """Trace in the defining representation."""
        if self.kind is GroupKind.U1:
            return np.exp(2j * np.pi * self.values)
        if self.kind is GroupKind.SU2:
            return 2.0 * np.cos(np.pi * self.values)
        t1, t2 = self.values[..., 0], self.values[..., 1]
        return np.exp(1j * t1) + np.exp(1j * t2) + np.exp(-1j * (t1 + t2))

    def __getitem__(self, index) -> "ClassCoordinates":
        if self.kind is GroupKind.SU3:
            return ClassCoordinates(self.kind, self.values[index])
        return ClassCoordinates(self.kind, self.values[index])


def su3_coordinates(theta1, theta2) -> ClassCoordinates:
    return ClassCoordinates(GroupKind.SU3, np.stack(np.broadcast_arrays(theta1, theta2), axis=-1))


def canonical_su3_phases(phases: np.ndarray) -> np.ndarray:
    """Sort three eigenphases in (-pi, pi] descending and keep the first two."""
    phases = np.angle(np.exp(1j * np.asarray(phases)))
    phases = -np.sort(-phases, axis=-1)
    return phases[..., :2]


def class_coordinates(g: GroupElement) -> ClassCoordinates:
    if g.kind is GroupKind.U1:
        return ClassCoordinates(g.kind, g.data)
    if g.kind is GroupKind.SU2:
        half_trace = np.real(np.trace(g.data, axis1=-2, axis2=-1)) / 2.0
        return ClassCoordinates(g.kind, np.arccos(np.clip(half_trace, -1.0, 1.0)) / np.pi)
    eig = np.linalg.eigvals(g.data)
    return ClassCoordinates(g.kind, canonical_su3_phases(np.angle(eig)))


def torus_element(coords: ClassCoordinates) -> GroupElement:
    """A diagonal representative of the conjugacy class."""
    kind = coords.kind
    if kind is GroupKind.U1:
        return GroupElement(kind, coords.values)
    if kind is GroupKind.SU2:
        phase = np.exp(1j * np.pi * coords.values)
        diag = np.stack([phase, np.conj(phase)], axis=-1)
    else:
        t1, t2 = coords.values[..., 0], coords.values[..., 1]
        diag = np.exp(1j * np.stack([t1, t2, -t1 - t2], axis=-1))
    n = diag.shape[-1]
    out = np.zeros(diag.shape + (n,), dtype=complex)
    idx = np.arange(n)
    out[..., idx, idx] = diag
    return GroupElement(kind, out)


# ---------------------------------------------------------------------------
# representations


@dataclass(frozen=True, order=True)
class RepLabel:
    """Irreducible representation label.

    ``value`` is ``(n,)`` for U1, ``(2 lam,)`` for SU2 and ``(p, q)`` with
    ``p, q >= 1`` for SU3 (``(1, 1)`` trivial, ``(2, 1)`` fundamental).
    """

    kind: GroupKind
    value: tuple[int, ...]

    def __post_init__(self):
        kind = GroupKind.parse(self.kind)
        object.__setattr__(self, "kind", kind)
        value = tuple(int(v) for v in self.value)
        object.__setattr__(self, "value", value)
        if kind is GroupKind.U1 and len(value) != 1:
            raise ValueError("U1 label is a single integer")
        if kind is GroupKind.SU2 and (len(value) != 1 or value[0] < 0):
            raise ValueError("SU2 label needs 2*lambda >= 0")
        if kind is GroupKind.SU3 and (len(value) != 2 or min(value) < 1):
            raise ValueError("SU3 label is (p, q) with p, q >= 1")

    @classmethod
    def u1(cls, n: int) -> "RepLabel":
        return cls(GroupKind.U1, (n,))

    @classmethod
    def su2(cls, lam) -> "RepLabel":
        twice = Fraction(lam) * 2
        if twice.denominator != 1:
            raise ValueError(f"2*lambda must be an integer, got lambda={lam}")
        return cls(GroupKind.SU2, (int(twice),))

    @classmethod
    def su3(cls, p: int, q: int) -> "RepLabel":
        return cls(GroupKind.SU3, (p, q))

    @classmethod
    def trivial(cls, kind: GroupKind | str) -> "RepLabel":
        kind = GroupKind.parse(kind)
        return {GroupKind.U1: cls.u1(0), GroupKind.SU2: cls.su2(0), GroupKind.SU3: cls.su3(1, 1)}[kind]

    @property
    def lam(self) -> Fraction:
        return Fraction(self.value[0], 2)

    def __str__(self) -> str:
        if self.kind is GroupKind.SU2:
            return str(self.lam)
        if self.kind is GroupKind.SU3:
            return f"({self.value[0]},{self.value[1]})"
        return str(self.value[0])


def dimension(rep: RepLabel) -> int:
    if rep.kind is GroupKind.U1:
        return 1
    if rep.kind is GroupKind.SU2:
        return rep.value[0] + 1
    p, q = rep.value
    return p * q * (p + q) // 2


def laplacian_eigenvalue(rep: RepLabel) -> float:
    if rep.kind is GroupKind.U1:
        return float((2 * np.pi * rep.value[0]) ** 2)
    if rep.kind is GroupKind.SU2:
        twice = rep.value[0]
        return twice * (twice + 2) / 8.0
    p, q = rep.value
    return (p * p + q * q + p * q) / 3.0 - 1.0


def chebyshev_u(n_max: int, c: np.ndarray) -> np.ndarray:
    """U_0(c) .. U_{n_max}(c) stacked on a trailing axis."""
    c = np.asarray(c, dtype=float)
    out = np.empty(c.shape + (n_max + 1,))
    out[..., 0] = 1.0
    if n_max >= 1:
        out[..., 1] = 2.0 * c
    for n in range(2, n_max + 1):
        out[..., n] = 2.0 * c * out[..., n - 1] - out[..., n - 2]
    return out


def su3_complete_homogeneous(trace: np.ndarray, k_max: int) -> np.ndarray:
    """h_0 .. h_{k_max} of the eigenvalues of an SU3 element with the given trace.

    For det = 1 unitary matrices the elementary symmetric polynomials are
    (tr, conj(tr), 1), so h_k = tr h_{k-1} - conj(tr) h_{k-2} + h_{k-3}.
    """
    trace = np.asarray(trace, dtype=complex)
    e1, e2 = trace, np.conj(trace)
    h = np.zeros(trace.shape + (k_max + 1,), dtype=complex)
    h[..., 0] = 1.0
    for k in range(1, k_max + 1):
        acc = e1 * h[..., k - 1]
        if k >= 2:
            acc = acc - e2 * h[..., k - 2]
        if k >= 3:
            acc = acc + h[..., k - 3]
        h[..., k] = acc
    return h


def su3_characters_from_h(h: np.ndarray, p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Jacobi-Trudi: chi_{p,q} = h_{p+q-2} h_{q-1} - h_{p+q-1} h_{q-2}."""
    p = np.asarray(p)
    q = np.asarray(q)
    first = h[..., p + q - 2] * h[..., q - 1]
    second = h[..., p + q - 1] * np.where(q >= 2, h[..., np.maximum(q - 2, 0)], 0.0)
    return first - second


def character(rep: RepLabel, coords: ClassCoordinates) -> np.ndarray:
    """chi_Lambda evaluated from class coordinates (complex array).

    SU2 uses the Chebyshev recursion for sin((2 lam + 1) pi x) / sin(pi x) and
    SU3 the Jacobi-Trudi determinant, so degenerate eigenvalues need no
    special treatment.
    """
    if rep.kind is not coords.kind:
        raise GroupKindMismatch(f"{rep.kind.name} label with {coords.kind.name} coordinates")
    if rep.kind is GroupKind.U1:
        return np.exp(2j * np.pi * rep.value[0] * coords.values)
    if rep.kind is GroupKind.SU2:
        twice = rep.value[0]
        u = chebyshev_u(twice, np.cos(np.pi * coords.values))
        return u[..., twice].astype(complex)
    p, q = rep.value
    h = su3_complete_homogeneous(coords.trace(), p + q - 1)
    return su3_characters_from_h(h, np.array(p), np.array(q))


def character_of(rep: RepLabel, g: GroupElement) -> np.ndarray:
    return character(rep, class_coordinates(g))


def representations(kind: GroupKind | str, max_dimension: int, max_u1: int = 5) -> list[RepLabel]:
    """All labels with dimension <= max_dimension (U1: |n| <= max_u1)."""
    kind = GroupKind.parse(kind)
    if kind is GroupKind.U1:
        return [RepLabel.u1(n) for n in range(-max_u1, max_u1 + 1)]
    if kind is GroupKind.SU2:
        return [RepLabel(kind, (t,)) for t in range(max_dimension)]
    out = []
    for p in range(1, max_dimension + 1):
        for q in range(1, max_dimension + 1):
            rep = RepLabel.su3(p, q)
            if dimension(rep) <= max_dimension:
                out.append(rep)
    return out


# ---------------------------------------------------------------------------
# Lie algebra


def gell_mann() -> np.ndarray:
    lam = np.zeros((8, 3, 3), dtype=complex)
    lam[0][0, 1] = lam[0][1, 0] = 1
    lam[1][0, 1], lam[1][1, 0] = -1j, 1j
    lam[2][0, 0], lam[2][1, 1] = 1, -1
    lam[3][0, 2] = lam[3][2, 0] = 1
    lam[4][0, 2], lam[4][2, 0] = -1j, 1j
    lam[5][1, 2] = lam[5][2, 1] = 1
    lam[6][1, 2], lam[6][2, 1] = -1j, 1j
    lam[7] = np.diag([1, 1, -2]) / np.sqrt(3)
    return lam


def pauli() -> np.ndarray:
    return np.array([[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]], dtype=complex)


@cache
def su3_d_symbols() -> np.ndarray:
    """Totally symmetric d_abc = Tr({lam_a, lam_b} lam_c) / 4."""
    lam = gell_mann()
    anti = np.einsum("aij,bjk->abik", lam, lam)
    anti = anti + np.swapaxes(anti, 0, 1)
    d = np.einsum("abik,cki->abc", anti, lam).real / 4.0
    d[np.abs(d) < 1e-15] = 0.0
    return d


@dataclass(frozen=True, eq=False)
class LieAlgebraBasis:
    """Orthonormal basis under <X, Y> = -scale * Tr(X Y).

    ``scale`` is fixed so that the Casimir reproduces the eigenvalues c(Lambda)
    listed in the module docstring.  For U1 the single generator is 2 pi i and
    moves theta at unit speed.
    """

    kind: GroupKind
    generators: np.ndarray
    scale: float

    def gram(self) -> np.ndarray:
        x = self.generators
        return -self.scale * np.einsum("aij,bji->ab", x, x).real


@cache
def lie_algebra_basis(kind: GroupKind | str) -> LieAlgebraBasis:
    kind = GroupKind.parse(kind)
    if kind is GroupKind.U1:
        return LieAlgebraBasis(kind, np.array([[[2j * np.pi]]]), 1.0 / (4 * np.pi**2))
    if kind is GroupKind.SU2:
        return LieAlgebraBasis(kind, 1j * pauli() / (2 * np.sqrt(2)), 4.0)
    return LieAlgebraBasis(kind, 1j * gell_mann() / 2.0, 2.0)


def exp_algebra(kind: GroupKind | str, coeffs: np.ndarray) -> GroupElement:
    """exp(sum_a coeffs[..., a] xi_a) in the orthonormal basis."""
    kind = GroupKind.parse(kind)
    coeffs = np.asarray(coeffs, dtype=float)
    if kind is GroupKind.U1:
        return GroupElement(kind, coeffs[..., 0])
    if kind is GroupKind.SU2:
        # X = i (c . sigma) / (2 sqrt 2): exp(X) = cos r + i sin r (n . sigma)
        v = coeffs / (2 * np.sqrt(2))
        r = np.linalg.norm(v, axis=-1)
        safe = np.where(r > 0, r, 1.0)
        n = v / safe[..., None]
        q = np.concatenate([np.cos(r)[..., None], np.sin(r)[..., None] * n[..., [2]],
                            np.sin(r)[..., None] * n[..., [1]], np.sin(r)[..., None] * n[..., [0]]], axis=-1)
        return GroupElement(kind, su2_from_quaternion(q))
    herm = np.einsum("...a,aij->...ij", coeffs, gell_mann()) / 2.0
    w, v = np.linalg.eigh(herm)
    u = (v * np.exp(1j * w)[..., None, :]) @ np.conj(np.swapaxes(v, -1, -2))
    return GroupElement(kind, u)


def _basis_step(kind: GroupKind, index: int, t: float) -> GroupElement:
    coeffs = np.zeros(kind.algebra_dim)
    coeffs[index] = t
    return exp_algebra(kind, coeffs)


def directional_derivative(f: Callable[[GroupElement], np.ndarray], index: int, g: GroupElement,
                           h: float = 1e-4) -> np.ndarray:
    """Central difference for d/dt f(exp(t xi_index) g) at t = 0."""
    if h <= 0:
        raise ValueError("step size must be positive")
    plus = multiply(_basis_step(g.kind, index, h), g)
    minus = multiply(_basis_step(g.kind, index, -h), g)
    return (f(plus) - f(minus)) / (2 * h)


def laplacian_apply(f: Callable[[GroupElement], np.ndarray], g: GroupElement, h: float = 1e-3) -> np.ndarray:
    """Sum of second central differences along the orthonormal basis."""
    if h <= 0:
        raise ValueError("step size must be positive")
    center = f(g)
    total = 0.0
    for i in range(g.kind.algebra_dim):
        plus = multiply(_basis_step(g.kind, i, h), g)
        minus = multiply(_basis_step(g.kind, i, -h), g)
        total = total + (f(plus) + f(minus) - 2 * center)
    return total / h**2


# ---------------------------------------------------------------------------
# octet parametrization


class DegenerateOctetError(ValueError):
    pass


OCTET_DEGENERACY_TOL = 1e-9


def octet_eigenphases(a: np.ndarray) -> tuple[np.ndarray, float, float]:
    """phi_n (n = 1, 2, 3) and the invariants I2 = a.a, I3 = d_ijk a_i a_j a_k."""
    a = np.asarray(a, dtype=float)
    i2 = float(a @ a)
    i3 = float(np.einsum("ijk,i,j,k->", su3_d_symbols(), a, a, a))
    arg = np.clip(np.sqrt(3.0) * i3 * i2 ** -1.5, -1.0, 1.0)
    n = np.arange(1, 4)
    phi = 2 * np.sqrt(i2 / 3.0) * np.cos((2 * np.pi * n + np.arccos(arg)) / 3.0)
    return phi, i2, i3


def su3_from_octet(a) -> GroupElement:
    """U = u0 + i u_k lam_k = exp(i a . lam) in closed form.

    u_k = alpha a_k + beta d_ijk a_i a_j with alpha and beta built from the
    eigenvalues phi_n of a . lam.  Raises ``DegenerateOctetError`` when
    3 phi_n^2 - I2 vanishes (coincident eigenvalues).
    """
    a = np.asarray(a, dtype=float)
    if a.shape != (8,):
        raise ValueError("octet vector must have 8 components")
    if not np.any(a):
        return identity(GroupKind.SU3)
    phi, i2, _ = octet_eigenphases(a)
    denom = 3 * phi**2 - i2
    for n, value in enumerate(denom, start=1):
        if abs(value) < OCTET_DEGENERACY_TOL:
            raise DegenerateOctetError(
                f"degenerate octet: 3*phi_{n}^2 - I2 = {value:.3e} (phi_{n} = {phi[n - 1]:.12g})")
    expo = np.exp(1j * phi)
    u0 = expo.sum() / 3.0
    alpha = -1j * np.sum(phi * expo / denom)
    beta = -1j * np.sum(expo / denom)
    daa = np.einsum("ijk,i,j->k", su3_d_symbols(), a, a)
    u = alpha * a + beta * daa
    mat = u0 * np.eye(3) + 1j * np.einsum("k,kij->ij", u, gell_mann())
    return GroupElement(GroupKind.SU3, mat)
