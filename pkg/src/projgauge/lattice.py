"""Hypercubic lattices at refinement level k, one-plaquette refinement, coarsening
projections, gauge transformations and cylindrical functions.

Coordinates are integers in units of a / 2^level.  Edges point in the positive
coordinate direction.  A plaquette word is read in traversal order:
U = h(bottom) h(right) h(top)^-1 h(left)^-1, and the element of a path made of
consecutive segments is the product of the segment elements in traversal order.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import cached_property
from math import comb
from typing import Callable, Iterable, Sequence

import numpy as np

from .group_core import GroupElement, GroupKind, exp_algebra, haar_sample, identity, inverse, multiply

Vertex = tuple[int, ...]


def _unit(d: int, mu: int) -> np.ndarray:
    v = np.zeros(d, dtype=int)
    v[mu] = 1
    return v


@dataclass(frozen=True, order=True)
class Edge:
    """Segment from base to base + e_mu, of length a / 2^level."""

    level: int
    base: Vertex
    mu: int

    def halves(self) -> tuple["Edge", "Edge"]:
        b = tuple(2 * x for x in self.base)
        second = list(b)
        second[self.mu] += 1
        return Edge(self.level + 1, b, self.mu), Edge(self.level + 1, tuple(second), self.mu)

    def start(self, resolution: int) -> Vertex:
        s = 2 ** (resolution - self.level)
        return tuple(s * x for x in self.base)

    def end(self, resolution: int) -> Vertex:
        s = 2 ** (resolution - self.level)
        v = [s * x for x in self.base]
        v[self.mu] += s
        return tuple(v)

    def parent(self) -> "Edge | None":
        if self.level == 0:
            return None
        return Edge(self.level - 1, tuple(x // 2 for x in self.base), self.mu)


@dataclass(frozen=True, order=True)
class Plaquette:
    level: int
    base: Vertex
    mu: int
    nu: int

    def __post_init__(self):
        if not self.mu < self.nu:
            raise ValueError("plaquette plane needs mu < nu")

    def sides(self) -> tuple[Edge, Edge, Edge, Edge]:
        """(bottom, right, top, left)."""
        b = np.array(self.base)
        d = len(self.base)
        right = tuple(int(x) for x in b + _unit(d, self.mu))
        top = tuple(int(x) for x in b + _unit(d, self.nu))
        return (Edge(self.level, self.base, self.mu), Edge(self.level, right, self.nu),
                Edge(self.level, top, self.mu), Edge(self.level, self.base, self.nu))

    def subplaquettes(self) -> tuple["Plaquette", ...]:
        d = len(self.base)
        b = 2 * np.array(self.base)
        out = []
        for j in (0, 1):
            for i in (0, 1):
                v = b + i * _unit(d, self.mu) + j * _unit(d, self.nu)
                out.append(Plaquette(self.level + 1, tuple(int(x) for x in v), self.mu, self.nu))
        return tuple(out)

    def interior_edges(self) -> tuple[Edge, ...]:
        d = len(self.base)
        b = 2 * np.array(self.base)
        em, en = _unit(d, self.mu), _unit(d, self.nu)
        pts = [(b + en, self.mu), (b + em + en, self.mu), (b + em, self.nu), (b + em + en, self.nu)]
        return tuple(Edge(self.level + 1, tuple(int(x) for x in v), mu) for v, mu in pts)


class LatticeError(ValueError):
    pass


def full_edge_count(d: int, extent: int, k: int) -> int:
    n = extent * 2**k
    return d * n * (n + 1) ** (d - 1)


def full_plaquette_count(d: int, extent: int, k: int) -> int:
    n = extent * 2**k
    return comb(d, 2) * n * n * (n + 1) ** (d - 2)


def full_vertex_count(d: int, extent: int, k: int) -> int:
    return (extent * 2**k + 1) ** d


@dataclass(frozen=True)
class LatticeLevel:
    """Level-k lattice with ``extent`` coarse cells per axis, plus a set of
    level-k plaquettes that have been subdivided."""

    d: int
    extent: int
    k: int = 0
    a: float = 1.0
    refined: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.d < 2:
            raise LatticeError("dimension must be at least 2")
        if self.extent < 1 or self.k < 0:
            raise LatticeError("extent >= 1 and k >= 0 required")
        object.__setattr__(self, "refined", frozenset(self.refined))
        for p in self.refined:
            if p.level != self.k or p not in self._base_plaquette_set:
                raise LatticeError(f"{p} is not a level-{self.k} plaquette of this lattice")

    @property
    def cells(self) -> int:
        return self.extent * 2**self.k

    @cached_property
    def _base_plaquettes(self) -> list[Plaquette]:
        n = self.cells
        out = []
        for mu, nu in itertools.combinations(range(self.d), 2):
            ranges = [range(n) if ax in (mu, nu) else range(n + 1) for ax in range(self.d)]
            for base in itertools.product(*ranges):
                out.append(Plaquette(self.k, base, mu, nu))
        return out

    @cached_property
    def _base_plaquette_set(self) -> frozenset:
        return frozenset(self._base_plaquettes)

    @cached_property
    def _base_edges(self) -> list[Edge]:
        n = self.cells
        out = []
        for mu in range(self.d):
            ranges = [range(n) if ax == mu else range(n + 1) for ax in range(self.d)]
            for base in itertools.product(*ranges):
                out.append(Edge(self.k, base, mu))
        return out

    def _sort_key(self, e: Edge):
        return (e.start(self.k + 1), e.mu)

    @cached_property
    def edges(self) -> tuple[Edge, ...]:
        split = set()
        extra = set()
        for p in self.refined:
            split.update(p.sides())
            extra.update(p.interior_edges())
        edges = set()
        for e in self._base_edges:
            if e in split:
                edges.update(e.halves())
            else:
                edges.add(e)
        edges |= extra
        return tuple(sorted(edges, key=self._sort_key))

    @cached_property
    def edge_index(self) -> dict[Edge, int]:
        return {e: i for i, e in enumerate(self.edges)}

    @cached_property
    def plaquettes(self) -> tuple[Plaquette, ...]:
        out = []
        for p in self._base_plaquettes:
            if p in self.refined:
                out.extend(p.subplaquettes())
            else:
                out.append(p)
        return tuple(sorted(out, key=lambda p: (Edge(p.level, p.base, p.mu).start(self.k + 1), p.mu, p.nu)))

    @cached_property
    def vertices(self) -> tuple[Vertex, ...]:
        r = self.k + 1
        vs = set()
        for e in self.edges:
            vs.add(e.start(r))
            vs.add(e.end(r))
        return tuple(sorted(vs))

    def contains_edge(self, e: Edge) -> bool:
        return e in self.edge_index

    def decompose(self, e: Edge) -> list[Edge] | None:
        """Edges of this lattice covering segment e in traversal order, or None."""
        if e in self.edge_index:
            return [e]
        if e.level >= self.k + 1:
            return None
        first, second = e.halves()
        a = self.decompose(first)
        if a is None:
            return None
        b = self.decompose(second)
        if b is None:
            return None
        return a + b

    def word(self, p: Plaquette) -> list[tuple[int, bool]]:
        """Plaquette boundary as (edge index, inverted) in traversal order."""
        bottom, right, top, left = p.sides()
        out = []
        for side, inv in ((bottom, False), (right, False), (top, True), (left, True)):
            parts = self.decompose(side)
            if parts is None:
                raise LatticeError(f"side {side} of {p} is not resolved by this lattice")
            if inv:
                parts = parts[::-1]
            out.extend((self.edge_index[q], inv) for q in parts)
        return out

    def header(self) -> dict:
        mask = sorted([p.level, list(p.base), p.mu, p.nu] for p in self.refined)
        return {"d": self.d, "a": self.a, "k": self.k, "extent": self.extent, "mask": mask}


def lattice(d: int, extent: int, k: int = 0, a: float = 1.0) -> LatticeLevel:
    return LatticeLevel(d, extent, k, a)


def enumerate_edges(L: LatticeLevel) -> list[Edge]:
    return list(L.edges)


def enumerate_plaquettes(L: LatticeLevel) -> list[Plaquette]:
    return list(L.plaquettes)


def refine_once(L: LatticeLevel, p: Plaquette) -> LatticeLevel:
    """Subdivide one level-k plaquette into four.

    In d = 2, refining the last unrefined plaquette gives the full level-(k+1)
    lattice, which is returned in that form.
    """
    if p in L.refined:
        raise LatticeError(f"{p} is already refined")
    if p.level != L.k or p not in L._base_plaquette_set:
        raise LatticeError(f"{p} is not an unrefined plaquette of this level-{L.k} lattice")
    refined = L.refined | {p}
    if L.d == 2 and len(refined) == len(L._base_plaquettes):
        return LatticeLevel(L.d, L.extent, L.k + 1, L.a)
    return LatticeLevel(L.d, L.extent, L.k, L.a, refined)


def refine_all(L: LatticeLevel) -> LatticeLevel:
    out = L
    for p in L._base_plaquettes:
        if p not in L.refined:
            out = refine_once(out, p)
    return out


def precedes(coarse: LatticeLevel, fine: LatticeLevel) -> bool:
    """coarse <= fine: same region, and every coarse edge is a union of fine edges."""
    if (coarse.d, coarse.extent, coarse.a) != (fine.d, fine.extent, fine.a):
        return False
    if coarse.k > fine.k:
        return False
    return all(fine.decompose(e) is not None for e in coarse.edges)


# ---------------------------------------------------------------------------
# configurations


def edge_axis(kind: GroupKind) -> int:
    return -1 if kind is GroupKind.U1 else -3


def take_edge(values: GroupElement, i: int) -> GroupElement:
    """Element on edge i of a stacked assignment."""
    if values.kind is GroupKind.U1:
        return GroupElement(values.kind, values.data[..., i])
    return GroupElement(values.kind, values.data[..., i, :, :])


def put_edge(data: np.ndarray, kind: GroupKind, i: int, value: np.ndarray) -> None:
    if kind is GroupKind.U1:
        data[..., i] = value
    else:
        data[..., i, :, :] = value


def stack_edges(kind: GroupKind, elements: Sequence[GroupElement]) -> GroupElement:
    return GroupElement(kind, np.stack([g.data for g in elements], axis=edge_axis(kind)))


@dataclass(frozen=True, eq=False)
class GaugeConfig:
    """Assignment edge -> group element; ``values`` has batch shape (..., n_edges)
    so a stack of configurations (e.g. one per chain) shares one object."""

    lattice: LatticeLevel
    values: GroupElement

    def __post_init__(self):
        shape = self.values.batch_shape
        if not shape or shape[-1] != len(self.lattice.edges):
            raise LatticeError(f"expected {len(self.lattice.edges)} edge values, got batch shape {shape}")

    @property
    def kind(self) -> GroupKind:
        return self.values.kind

    def edge_value(self, e: Edge) -> GroupElement:
        return take_edge(self.values, self.lattice.edge_index[e])

    def segment_value(self, e: Edge) -> GroupElement:
        """Element of a (possibly subdivided) segment, composed by binary halving."""
        idx = self.lattice.edge_index.get(e)
        if idx is not None:
            return take_edge(self.values, idx)
        if e.level >= self.lattice.k + 1:
            raise LatticeError(f"segment {e} not resolved by the lattice")
        first, second = e.halves()
        return multiply(self.segment_value(first), self.segment_value(second))


def config_from_list(L: LatticeLevel, elements: Sequence[GroupElement]) -> GaugeConfig:
    return GaugeConfig(L, stack_edges(elements[0].kind, elements))


def uniform_config(L: LatticeLevel, g: GroupElement, batch: tuple[int, ...] = ()) -> GaugeConfig:
    n = len(L.edges)
    if g.kind is GroupKind.U1:
        data = np.broadcast_to(g.data, batch + (n,)).copy()
    else:
        m = g.kind.matrix_size
        data = np.broadcast_to(g.data, batch + (n, m, m)).copy()
    return GaugeConfig(L, GroupElement(g.kind, data))


def word_product(values: GroupElement, word: Sequence[tuple[int, bool]]) -> GroupElement:
    out = None
    for idx, inv in word:
        g = take_edge(values, idx)
        if inv:
            g = inverse(g)
        out = g if out is None else multiply(out, g)
    return out


def plaquette_holonomy(c: GaugeConfig, p: Plaquette) -> GroupElement:
    """U = h1 h2 h3^-1 h4^-1 with (h1, h2, h3, h4) = (bottom, right, top, left)."""
    bottom, right, top, left = (c.segment_value(e) for e in p.sides())
    return multiply(multiply(bottom, right), multiply(inverse(top), inverse(left)))


def coarsen(c_fine: GaugeConfig, L_coarse: LatticeLevel) -> GaugeConfig:
    if not precedes(L_coarse, c_fine.lattice):
        raise LatticeError("target lattice is not coarser than the configuration's lattice")
    vals = [c_fine.segment_value(e) for e in L_coarse.edges]
    return GaugeConfig(L_coarse, stack_edges(c_fine.kind, vals))


def coarse_preimage(c_coarse: GaugeConfig, L_fine: LatticeLevel) -> GaugeConfig:
    """A fine configuration mapping onto c_coarse: the full coarse element on the
    first fine piece of each coarse edge, identity elsewhere (new edges identity)."""
    if not precedes(c_coarse.lattice, L_fine):
        raise LatticeError("target lattice is not finer than the configuration's lattice")
    kind = c_coarse.kind
    data = identity(kind, c_coarse.values.batch_shape[:-1] + (len(L_fine.edges),)).data.copy()
    for e in c_coarse.lattice.edges:
        first = L_fine.decompose(e)[0]
        put_edge(data, kind, L_fine.edge_index[first], c_coarse.edge_value(e).data)
    return GaugeConfig(L_fine, GroupElement(kind, data))


# ---------------------------------------------------------------------------
# gauge transformations


def random_gauge(L: LatticeLevel, kind: GroupKind, rng: np.random.Generator, batch=()) -> dict[Vertex, GroupElement]:
    return {v: haar_sample(kind, rng, batch if batch else None) for v in L.vertices}


def gauge_transform(c: GaugeConfig, omega: dict[Vertex, GroupElement]) -> GaugeConfig:
    """g(e) -> Omega(start) g(e) Omega(end)^-1; vertices missing from omega are fixed."""
    L = c.lattice
    r = L.k + 1
    out = []
    for i, e in enumerate(L.edges):
        g = take_edge(c.values, i)
        s, t = omega.get(e.start(r)), omega.get(e.end(r))
        if s is not None:
            g = multiply(s, g)
        if t is not None:
            g = multiply(g, inverse(t))
        out.append(g)
    return GaugeConfig(L, stack_edges(c.kind, out))


def restrict_gauge(omega: dict[Vertex, GroupElement], fine: LatticeLevel, coarse: LatticeLevel) -> dict:
    """Re-key a gauge transformation from fine to coarse vertex coordinates (coarse vertices only)."""
    shift = (fine.k + 1) - (coarse.k + 1)
    out = {}
    for v in coarse.vertices:
        key = tuple(x * 2**shift for x in v)
        if key in omega:
            out[v] = omega[key]
    return out


# ---------------------------------------------------------------------------
# cylindrical functions and operators


@dataclass(frozen=True, eq=False)
class CylindricalFunction:
    lattice: LatticeLevel
    func: Callable[[GaugeConfig], np.ndarray]

    def __call__(self, c: GaugeConfig) -> np.ndarray:
        if c.lattice != self.lattice:
            raise LatticeError("configuration lives on a different lattice")
        return self.func(c)


def pullback_function(f: CylindricalFunction, L_fine: LatticeLevel) -> CylindricalFunction:
    if not precedes(f.lattice, L_fine):
        raise LatticeError("pullback target is not finer than the function's lattice")
    if f.lattice == L_fine:
        return f
    return CylindricalFunction(L_fine, lambda c: f.func(coarsen(c, f.lattice)))


Operator = Callable[[CylindricalFunction], CylindricalFunction]


def identity_operator(f: CylindricalFunction) -> CylindricalFunction:
    return f


def multiplication_operator(h: CylindricalFunction) -> Operator:
    """f -> (pullback of h) * f on f's lattice."""

    def op(f: CylindricalFunction) -> CylindricalFunction:
        hh = pullback_function(h, f.lattice)
        return CylindricalFunction(f.lattice, lambda c: hh(c) * f(c))

    return op


def edge_laplacian(step: float = 1e-3) -> Operator:
    """Sum over edges of the group Laplacian in that edge variable (finite differences)."""
    def op(f: CylindricalFunction) -> CylindricalFunction:
        def value(c: GaugeConfig):
            kind = c.kind
            center = f(c)
            total = np.zeros_like(center, dtype=float)
            for i in range(len(c.lattice.edges)):
                for a in range(kind.algebra_dim):
                    for sgn in (1.0, -1.0):
                        coeffs = np.zeros(kind.algebra_dim)
                        coeffs[a] = sgn * step
                        s = exp_algebra(kind, coeffs)
                        data = c.values.data.copy()
                        put_edge(data, kind, i, multiply(s, take_edge(c.values, i)).data)
                        total = total + f(GaugeConfig(c.lattice, GroupElement(kind, data)))
                    total = total - 2 * center
            return total / step**2

        return CylindricalFunction(f.lattice, value)

    return op


@dataclass
class OperatorReport:
    defect: float
    samples: int


def verify_operator_consistency(O_coarse: Operator, O_fine: Operator, f: CylindricalFunction,
                                L_fine: LatticeLevel, samples: Iterable[GaugeConfig]) -> OperatorReport:
    """max over samples of |O_fine(pi* f) - pi*(O_coarse f)|."""
    lhs = O_fine(pullback_function(f, L_fine))
    rhs = pullback_function(O_coarse(f), L_fine)
    worst = 0.0
    n = 0
    for c in samples:
        worst = max(worst, float(np.max(np.abs(np.asarray(lhs(c)) - np.asarray(rhs(c))))))
        n += 1
    return OperatorReport(worst, n)


# ---------------------------------------------------------------------------
# serialization


def config_to_json(c: GaugeConfig) -> str:
    if c.values.batch_shape != (len(c.lattice.edges),):
        raise LatticeError("serialization handles a single configuration")
    kind = c.kind
    if kind is GroupKind.U1:
        payload = [float(v) for v in c.values.data]
    else:
        payload = [[[float(z.real), float(z.imag)] for z in m.ravel()] for m in c.values.data]
    header = dict(c.lattice.header(), kind=kind.value)
    return json.dumps({"header": header, "edges": payload}, sort_keys=True)


def config_from_json(text: str) -> GaugeConfig:
    obj = json.loads(text)
    h = obj["header"]
    kind = GroupKind.parse(h["kind"])
    refined = frozenset(Plaquette(lv, tuple(b), mu, nu) for lv, b, mu, nu in h["mask"])
    L = LatticeLevel(h["d"], h["extent"], h["k"], h["a"], refined)
    if kind is GroupKind.U1:
        data = np.array(obj["edges"], dtype=float)
    else:
        n = kind.matrix_size
        arr = np.array(obj["edges"], dtype=float)
        data = (arr[..., 0] + 1j * arr[..., 1]).reshape(-1, n, n)
    return GaugeConfig(L, GroupElement(kind, data))
