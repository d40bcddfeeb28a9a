"""Kinematical and heat-kernel interaction measures on finite lattices, Metropolis
sampling, and statistical checks of the projective consistency conditions.

Consistency is certified by Kolmogorov-Smirnov tests on class angles: the
folded angle for U1 and x = arccos(Tr/2) / pi for SU2.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Iterator

import numpy as np
from scipy import stats

from .group_core import (
    ClassCoordinates,
    GroupElement,
    GroupKind,
    class_coordinates,
    exp_algebra,
    haar_sample,
    identity,
    project_to_group,
    unitarity_defect,
)
from .heat_kernel import (
    class_angle_law,
    class_density,
    fold_u1,
    gaussian_limit,
    heat_kernel,
    kernel_coefficient,
    kernel_series,
    log_heat_kernel,
    su3_quadratic,
)
from .lattice import GaugeConfig, LatticeLevel, Plaquette, coarsen, lattice, plaquette_holonomy, refine_all

TARGET_ACCEPTANCE = 0.45
MIN_SAMPLES = 1000


@dataclass(frozen=True)
class BetaSchedule:
    """beta_k = c / 4^k (computed as c * 0.25**k, exact in binary)."""

    c: float

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("schedule constant must be positive")

    def beta(self, k: int) -> float:
        return self.c * 0.25**k


@dataclass(frozen=True)
class MCMCParams:
    """Metropolis settings.  ``sweeps`` counts all sweeps including burn-in; one
    configuration per chain is recorded every ``thinning`` sweeps after burn-in.
    ``sweeps = 0`` records only the initial configuration."""

    sweeps: int = 200
    burn_in: int = 150
    thinning: int = 50
    epsilon: float = 0.3
    seed: int = 0
    chains: int = 1
    tune: bool = True
    start: str = "hot"

    def __post_init__(self):
        if self.sweeps != 0 and not self.sweeps > self.burn_in >= 0:
            raise ValueError("need sweeps > burn_in >= 0")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.thinning < 1 or self.chains < 1:
            raise ValueError("thinning and chains must be positive")
        if self.start not in ("hot", "cold"):
            raise ValueError("start is 'hot' or 'cold'")

    @property
    def samples_per_chain(self) -> int:
        if self.sweeps == 0:
            return 1
        return (self.sweeps - self.burn_in - 1) // self.thinning + 1


@dataclass
class ConsistencyReport:
    name: str
    sample_sizes: tuple
    statistic: float
    p_value: float
    significance: float
    passed: bool
    negative_control: bool = False
    effective_sample_size: float | None = None
    acceptance_rate: float | None = None
    details: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sample_sizes"] = list(self.sample_sizes)
        return d


def _report(name, a, b_or_cdf, significance, negative_control=False, **extra) -> ConsistencyReport:
    """KS test; a negative control passes when it rejects at ``significance``."""
    if callable(b_or_cdf):
        res = stats.kstest(a, b_or_cdf)
        sizes = (len(a),)
    else:
        res = stats.ks_2samp(a, b_or_cdf)
        sizes = (len(a), len(b_or_cdf))
    p = float(min(max(res.pvalue, 0.0), 1.0))
    passed = p < significance if negative_control else p > significance
    rep = ConsistencyReport(name, sizes, float(res.statistic), p, significance, passed, negative_control, **extra)
    if min(sizes) < MIN_SAMPLES:
        rep.warnings.append(f"undersized sample: N = {min(sizes)} < {MIN_SAMPLES}")
    return rep


def class_angle(g: GroupElement) -> np.ndarray:
    """Scalar class angle used in the KS tests: folded theta (U1) or x (SU2)."""
    c = class_coordinates(g)
    if g.kind is GroupKind.U1:
        return fold_u1(c.values)
    if g.kind is GroupKind.SU2:
        return c.values
    return su3_quadratic(c.values[..., 0], c.values[..., 1])


# ---------------------------------------------------------------------------
# densities


def sample_kinematical(L: LatticeLevel, kind: GroupKind | str, rng: np.random.Generator, n: int | None = None) -> GaugeConfig:
    """Independent Haar element on every edge (``n`` stacked configurations if given)."""
    kind = GroupKind.parse(kind)
    shape = (len(L.edges),) if n is None else (n, len(L.edges))
    return GaugeConfig(L, haar_sample(kind, rng, shape))


def _plaquette_beta(beta, p: Plaquette) -> float:
    return beta.beta(p.level) if isinstance(beta, BetaSchedule) else float(beta)


def log_density(c: GaugeConfig, beta: "float | BetaSchedule") -> np.ndarray:
    """sum over plaquettes of log K(U_p, beta); a schedule picks beta by plaquette level."""
    total = 0.0
    for p in c.lattice.plaquettes:
        u = plaquette_holonomy(c, p)
        total = total + log_heat_kernel(c.kind, class_coordinates(u), _plaquette_beta(beta, p))
    return total


def metropolis_log_acceptance(log_new: np.ndarray, log_old: np.ndarray) -> np.ndarray:
    """log min(1, exp(log_new - log_old)) for a symmetric proposal."""
    return np.minimum(0.0, log_new - log_old)


# ---------------------------------------------------------------------------
# Metropolis sampler
#
# Internal state is edge-major: U1 angles (E, C), SU2 unit quaternions
# (E, 4, C) in the basis (1, i sigma_1, i sigma_2, i sigma_3), SU3 matrices
# (E, C, 3, 3).


def _quat_from_matrix(m: np.ndarray) -> np.ndarray:
    """[[a + i b3, b2 + i b1], [-b2 + i b1, a - i b3]] -> (a, b1, b2, b3)."""
    return np.stack([m[..., 0, 0].real, m[..., 0, 1].imag, m[..., 0, 1].real, m[..., 0, 0].imag], axis=-1)


def _matrix_from_quat(q: np.ndarray) -> np.ndarray:
    a, b1, b2, b3 = np.moveaxis(q, -1, 0)
    out = np.empty(q.shape[:-1] + (2, 2), dtype=complex)
    out[..., 0, 0] = a + 1j * b3
    out[..., 0, 1] = b2 + 1j * b1
    out[..., 1, 0] = -b2 + 1j * b1
    out[..., 1, 1] = a - 1j * b3
    return out


def _quat_mul(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Product of (i sigma)-basis quaternions stored component-first, shape (4, ...).

    e_j e_k = -delta_jk - eps_jkl e_l, so (a, v)(b, w) = (ab - v.w, aw + bv - v x w).
    """
    a1, x1, y1, z1 = p
    a2, x2, y2, z2 = q
    return np.stack([
        a1 * a2 - x1 * x2 - y1 * y2 - z1 * z2,
        a1 * x2 + a2 * x1 - (y1 * z2 - z1 * y2),
        a1 * y2 + a2 * y1 - (z1 * x2 - x1 * z2),
        a1 * z2 + a2 * z1 - (x1 * y2 - y1 * x2),
    ])


_QUAT_CONJ = np.array([1.0, -1.0, -1.0, -1.0])[:, None]


def _to_internal(kind: GroupKind, data: np.ndarray) -> np.ndarray:
    """(C, E, ...) public layout -> edge-major internal layout."""
    if kind is GroupKind.U1:
        return np.ascontiguousarray(data.T)
    moved = np.moveaxis(data, 1, 0)
    if kind is GroupKind.SU2:
        return np.ascontiguousarray(np.moveaxis(_quat_from_matrix(moved), -1, 1))
    return np.ascontiguousarray(moved)


def _to_public(kind: GroupKind, state: np.ndarray) -> np.ndarray:
    if kind is GroupKind.U1:
        return np.ascontiguousarray(state.T)
    mats = _matrix_from_quat(np.moveaxis(state, 1, -1)) if kind is GroupKind.SU2 else state
    return np.ascontiguousarray(np.moveaxis(mats, 0, 1))


def _internal_word(kind: GroupKind, state: np.ndarray, word) -> np.ndarray:
    if kind is GroupKind.U1:
        total = np.zeros(state.shape[1:])
        for idx, inv in word:
            if inv:
                total -= state[idx]
            else:
                total += state[idx]
        return np.mod(total, 1.0)
    out = None
    for idx, inv in word:
        g = state[idx]
        if kind is GroupKind.SU2:
            g = g * _QUAT_CONJ if inv else g
            out = g if out is None else _quat_mul(out, g)
        else:
            g = np.conj(np.swapaxes(g, -1, -2)) if inv else g
            out = g if out is None else out @ g
    return out


def _internal_log_kernel(kind: GroupKind, hol: np.ndarray, beta: float) -> np.ndarray:
    if kind is GroupKind.U1:
        return log_heat_kernel(kind, ClassCoordinates(kind, hol), beta)
    if kind is GroupKind.SU2:
        x = np.arccos(np.clip(hol[0], -1.0, 1.0)) / np.pi
        return log_heat_kernel(kind, ClassCoordinates(kind, x), beta)
    return log_heat_kernel(kind, class_coordinates(GroupElement(kind, hol)), beta)


def _word_holonomy(kind: GroupKind, data: np.ndarray, word) -> np.ndarray:
    """Product of edge data along a word, public layout (angles for U1, matrices otherwise)."""
    if kind is GroupKind.U1:
        total = np.zeros(data.shape[:-1])
        for idx, inv in word:
            total = total - data[..., idx] if inv else total + data[..., idx]
        return np.mod(total, 1.0)
    out = None
    for idx, inv in word:
        m = data[..., idx, :, :]
        if inv:
            m = np.conj(np.swapaxes(m, -1, -2))
        out = m if out is None else out @ m
    return out


class MetropolisSampler:
    """Single-edge Metropolis on all chains at once.

    Proposal g -> s g with s uniform in [-eps, eps] (U1) or
    s = exp(eps sum_a r_a xi_a), r_a standard normal (SU2, SU3); both are
    symmetric, and left-invariance of Haar measure makes min(1, ratio of plaquette
    kernels) the correct acceptance.  eps is tuned toward TARGET_ACCEPTANCE
    during the first half of burn-in and frozen afterwards.
    """

    def __init__(self, L: LatticeLevel, kind: GroupKind | str, beta: "float | BetaSchedule", params: MCMCParams,
                 rng: np.random.Generator | None = None):
        self.lattice = L
        self.kind = GroupKind.parse(kind)
        self.params = params
        self.rng = rng if rng is not None else np.random.default_rng(params.seed)
        self.words = [L.word(p) for p in L.plaquettes]
        self.betas = [_plaquette_beta(beta, p) for p in L.plaquettes]
        self.edge_plaquettes = [[] for _ in L.edges]
        for j, w in enumerate(self.words):
            for idx in sorted({i for i, _ in w}):
                self.edge_plaquettes[idx].append(j)
        self.epsilon = params.epsilon
        self.accepted = 0
        self.proposed = 0
        self.tuning_history: list[float] = []
        if params.start == "hot":
            init = haar_sample(self.kind, self.rng, (params.chains, len(L.edges)))
        else:
            init = identity(self.kind, (params.chains, len(L.edges)))
        self.state = _to_internal(self.kind, init.data)
        self.log_k = np.stack([self._log_k(j) for j in range(len(self.words))])

    def _log_k(self, j: int) -> np.ndarray:
        return _internal_log_kernel(self.kind, _internal_word(self.kind, self.state, self.words[j]), self.betas[j])

    def _propose(self, n: int) -> np.ndarray:
        if self.kind is GroupKind.U1:
            return self.rng.uniform(-self.epsilon, self.epsilon, size=n)
        r = self.rng.standard_normal((n, self.kind.algebra_dim))
        if self.kind is GroupKind.SU2:
            # exp of eps r.xi with xi = i sigma / (2 sqrt 2): rotation angle eps |r| / (2 sqrt 2)
            # about r / |r|; r is isotropic so the basis labelling does not matter
            r = r.T
            norm = np.sqrt(np.sum(r * r, axis=0))
            theta = self.epsilon * norm / (2.0 * math.sqrt(2.0))
            axis = r / np.where(norm > 0, norm, 1.0)
            return np.concatenate([np.cos(theta)[None], np.sin(theta) * axis])
        return exp_algebra(self.kind, self.epsilon * r).data

    def _left_multiply(self, s: np.ndarray, g: np.ndarray) -> np.ndarray:
        if self.kind is GroupKind.U1:
            return np.mod(g + s, 1.0)
        if self.kind is GroupKind.SU2:
            return _quat_mul(s, g)
        return s @ g

    def sweep(self) -> float:
        """One Metropolis pass over all edges; returns the acceptance fraction."""
        acc = 0
        n = self.params.chains
        for e, plaqs in enumerate(self.edge_plaquettes):
            s = self._propose(n)
            old = self.state[e].copy()
            self.state[e] = self._left_multiply(s, old)
            new_logs = [self._log_k(j) for j in plaqs]
            delta = np.zeros(n)
            for new, j in zip(new_logs, plaqs):
                delta += new - self.log_k[j]
            accept = np.log(self.rng.random(n)) < metropolis_log_acceptance(delta, 0.0)
            reject = ~accept
            if self.kind is GroupKind.SU2:
                self.state[e][:, reject] = old[:, reject]
            else:
                self.state[e][reject] = old[reject]
            for new, j in zip(new_logs, plaqs):
                self.log_k[j][accept] = new[accept]
            acc += int(np.count_nonzero(accept))
        total = n * len(self.edge_plaquettes)
        self.accepted += acc
        self.proposed += total
        return acc / total

    def reunitarize(self) -> None:
        if self.kind is GroupKind.U1:
            return
        if self.kind is GroupKind.SU2:
            self.state /= np.linalg.norm(self.state, axis=1, keepdims=True)
            return
        bad = unitarity_defect(GroupElement(self.kind, self.state)) > 1e-13
        if np.any(bad):
            self.state[bad] = project_to_group(self.state[bad])

    def config(self) -> GaugeConfig:
        self.reunitarize()
        return GaugeConfig(self.lattice, GroupElement(self.kind, _to_public(self.kind, self.state)))

    def run(self) -> Iterator[GaugeConfig]:
        p = self.params
        if p.sweeps == 0:
            yield self.config()
            return
        tune_until = p.burn_in // 2 if p.tune else 0
        window = []
        for t in range(p.sweeps):
            rate = self.sweep()
            if t < tune_until:
                window.append(rate)
                if len(window) == 5:
                    mean = float(np.mean(window))
                    self.epsilon *= math.exp(2.0 * (mean - TARGET_ACCEPTANCE))
                    self.epsilon = min(self.epsilon, 0.5 if self.kind is GroupKind.U1 else 4.0)
                    self.tuning_history.append(self.epsilon)
                    window = []
            if t == tune_until - 1:
                # statistics count only the frozen-proposal phase
                self.accepted = 0
                self.proposed = 0
            if t % 25 == 24:
                self.reunitarize()
            if t >= p.burn_in and (t - p.burn_in) % p.thinning == 0:
                yield self.config()

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.proposed if self.proposed else float("nan")


def mcmc_sample(L: LatticeLevel, kind: GroupKind | str, beta, params: MCMCParams,
                rng: np.random.Generator | None = None) -> Iterator[GaugeConfig]:
    """Stream of stacked configurations (batch axis = chains)."""
    return MetropolisSampler(L, kind, beta, params, rng).run()


def _collect(sampler: MetropolisSampler, observable) -> np.ndarray:
    """Run the sampler and stack observable(config) -> (samples_per_chain, chains)."""
    return np.stack([observable(c) for c in sampler.run()])


def _ess(series: np.ndarray) -> float:
    """chains * samples / tau, tau from the lag-1 autocorrelation along the sample axis."""
    m, n = series.shape
    if m < 3:
        return float(m * n)
    x = series - series.mean(axis=0)
    var = float(np.mean(x * x))
    if var == 0:
        return float(m * n)
    rho = float(np.mean(x[1:] * x[:-1]) / var)
    rho = min(max(rho, 0.0), 0.99)
    return m * n * (1 - rho) / (1 + rho)


# ---------------------------------------------------------------------------
# geometry helpers


def unit_square(k: int = 0, d: int = 2) -> LatticeLevel:
    L = lattice(d, 1, 0)
    for _ in range(k):
        L = refine_all(L)
    return L


COARSE_PLAQUETTE = Plaquette(0, (0, 0), 0, 1)


def coarse_boundary_angle(c: GaugeConfig) -> np.ndarray:
    """Class angle of the boundary word of the unit square read on c's lattice."""
    word = c.lattice.word(COARSE_PLAQUETTE)
    hol = _word_holonomy(c.kind, c.values.data, word)
    return class_angle(GroupElement(c.kind, hol))


# ---------------------------------------------------------------------------
# consistency checks


def _broken_coarse_angle(c_fine: GaugeConfig, mode: str) -> np.ndarray:
    """Coarse plaquette angle under a deliberately wrong projection.

    "mislabel": top reads the bottom segment and left reads the right segment,
    so the word becomes a commutator.  "drop": the bottom segment keeps only its
    first half.
    """
    L = c_fine.lattice
    bottom, right, top, left = COARSE_PLAQUETTE.sides()
    if mode == "mislabel":
        seg = {"b": bottom, "r": right, "t": bottom, "l": right}
    elif mode == "drop":
        seg = {"b": bottom.halves()[0], "r": right, "t": top, "l": left}
    else:
        raise ValueError(f"unknown broken-projection mode {mode!r}")
    word = []
    for key, inv in (("b", False), ("r", False), ("t", True), ("l", True)):
        parts = L.decompose(seg[key])
        if inv:
            parts = parts[::-1]
        word.extend((L.edge_index[q], inv) for q in parts)
    hol = _word_holonomy(c_fine.kind, c_fine.values.data, word)
    return class_angle(GroupElement(c_fine.kind, hol))


def verify_kinematical_consistency(kind: GroupKind | str, N: int, rng: np.random.Generator,
                                   significance: float = 0.01, broken: str | None = None,
                                   k_fine: int = 1, k_coarse: int = 0) -> ConsistencyReport:
    """Coarse plaquette angle of projected fine Haar configurations vs direct coarse Haar samples."""
    kind = GroupKind.parse(kind)
    L_fine, L_coarse = unit_square(k_fine), unit_square(k_coarse)
    fine = sample_kinematical(L_fine, kind, rng, N)
    if broken is None:
        projected = class_angle(plaquette_holonomy(coarsen(fine, L_coarse), COARSE_PLAQUETTE))
        name = f"kinematical_{kind.value}_k{k_fine}_to_k{k_coarse}"
    else:
        projected = _broken_coarse_angle(fine, broken)
        name = f"kinematical_{kind.value}_broken_{broken}"
    direct = class_angle(plaquette_holonomy(sample_kinematical(L_coarse, kind, rng, N), COARSE_PLAQUETTE))
    negative = broken == "mislabel"
    return _report(name, projected, direct, significance, negative_control=negative,
                   effective_sample_size=float(N), details={"broken": broken})


def refinement_params(N: int, seed: int = 0) -> MCMCParams:
    """Defaults for the refinement check: N independent chains, one sample each."""
    return MCMCParams(sweeps=121, burn_in=120, thinning=1, epsilon=0.3, seed=seed, chains=N)


def verify_refinement_consistency(kind: GroupKind | str, beta: float, N: int, params: MCMCParams | None,
                                  rng: np.random.Generator, divisor: float = 4.0,
                                  significance: float = 0.01, negative_control: bool = False) -> ConsistencyReport:
    """Subdivided unit square sampled at beta / divisor vs direct single-plaquette samples at beta.

    The fine measure is prod K(U_sub, beta / divisor) on the 12-edge lattice; the
    class angle of its 8-edge boundary word is compared (two-sample KS) with
    inverse-CDF samples of the single-plaquette law at beta.
    """
    kind = GroupKind.parse(kind)
    if params is None:
        params = refinement_params(N)
    chains_needed = math.ceil(N / params.samples_per_chain)
    params = MCMCParams(params.sweeps, params.burn_in, params.thinning, params.epsilon, params.seed,
                        chains_needed, params.tune, params.start)
    L_fine = unit_square(1)
    sampler = MetropolisSampler(L_fine, kind, beta / divisor, params, rng)
    series = _collect(sampler, coarse_boundary_angle)
    fine_angles = series.reshape(-1)[:N]
    direct = class_angle_law(kind, beta).sample(rng, N)
    name = f"refinement_{kind.value}_beta{beta:g}_div{divisor:g}"
    rep = _report(name, fine_angles, direct, significance, negative_control=negative_control,
                  effective_sample_size=_ess(series), acceptance_rate=sampler.acceptance_rate,
                  details={"beta": beta, "fine_beta": beta / divisor, "epsilon": sampler.epsilon,
                           "sweeps": params.sweeps, "burn_in": params.burn_in, "chains": params.chains})
    if not 0.1 <= sampler.acceptance_rate <= 0.9:
        rep.warnings.append(f"acceptance rate {sampler.acceptance_rate:.3f} outside [0.1, 0.9]")
    return rep


# ---------------------------------------------------------------------------
# convolution


@dataclass
class ConvolutionReport:
    name: str
    max_deviation: float
    tolerance: float
    passed: bool
    worst_point: list
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def u1_convolution(theta1: float, theta2: float, beta: float, nodes: int = 2048) -> float:
    """int_0^1 K(theta1 + x) K(theta2 - x) dx by the periodic trapezoid rule."""
    x = np.arange(nodes) / nodes
    return float(np.mean(heat_kernel("u1", np.mod(theta1 + x, 1.0), beta) * heat_kernel("u1", np.mod(theta2 - x, 1.0), beta)))


def su2_convolution(h: GroupElement, beta: float, n_angle: int = 400, n_axis: int = 200) -> float:
    """int K(y) K(y^-1 h) dy over Haar y, by Gauss-Legendre in the class angle of y and
    the cosine between rotation axes (the integrand depends on nothing else)."""
    b = float(class_coordinates(h).values) * np.pi
    t, w = np.polynomial.legendre.leggauss(n_angle)
    a = 0.5 * np.pi * (t + 1)
    wa = 0.5 * np.pi * w * (2 / np.pi) * np.sin(a) ** 2
    u, wu = np.polynomial.legendre.leggauss(n_axis)
    ky = heat_kernel("su2", a / np.pi, beta)
    half_tr = np.cos(a)[:, None] * np.cos(b) + np.sin(a)[:, None] * np.sin(b) * u[None, :]
    rel = np.arccos(np.clip(half_tr, -1, 1)) / np.pi
    return float(np.sum(wa[:, None] * 0.5 * wu[None, :] * ky[:, None] * heat_kernel("su2", rel, beta)))


def coefficient_identity(kind: GroupKind | str, beta: float, rtol: float = 1e-14) -> ConvolutionReport:
    """K_beta * K_beta = K_2beta coefficientwise on the truncation labels of K_beta."""
    kind = GroupKind.parse(kind)
    k1 = kernel_series(kind, beta)
    conv = k1.convolve(k1)
    worst, where = 0.0, None
    for rep, value in conv.coefficients.items():
        expected = kernel_coefficient(rep, 2 * beta)
        dev = abs(value - expected) / max(abs(expected), 1e-300)
        if dev > worst:
            worst, where = dev, str(rep)
    return ConvolutionReport(f"coefficients_{kind.value}_beta{beta:g}", worst, rtol, worst <= rtol, [where],
                             {"labels": len(conv)})


def convolution_check(kind: GroupKind | str, rng: np.random.Generator, points: int = 20,
                      tol: float = 1e-8, mc_samples: int = 10**6, beta_range=(0.05, 1.0),
                      sigmas: float = 5.0) -> ConvolutionReport:
    """int K(g1 x, beta) K(x^-1 g2, beta) dx against K(g1 g2, 2 beta).

    U1 and SU2 use quadrature at ``points`` random (g1, g2, beta) with absolute
    tolerance ``tol``; SU3 uses Haar Monte Carlo at a single point, accepted
    within ``sigmas`` standard errors.
    """
    kind = GroupKind.parse(kind)
    worst, where = 0.0, []
    if kind is GroupKind.U1:
        for _ in range(points):
            t1, t2 = rng.random(2)
            beta = float(rng.uniform(*beta_range))
            lhs = u1_convolution(t1, t2, beta)
            rhs = float(heat_kernel(kind, np.mod(t1 + t2, 1.0), 2 * beta))
            if abs(lhs - rhs) >= worst:
                worst, where = abs(lhs - rhs), [float(t1), float(t2), beta]
        return ConvolutionReport(f"convolution_{kind.value}", worst, tol, worst <= tol, where, {"points": points})
    if kind is GroupKind.SU2:
        for _ in range(points):
            g1, g2 = haar_sample(kind, rng), haar_sample(kind, rng)
            beta = float(rng.uniform(*beta_range))
            h = GroupElement(kind, g1.data @ g2.data)
            lhs = su2_convolution(h, beta)
            rhs = float(heat_kernel(kind, class_coordinates(h), 2 * beta))
            if abs(lhs - rhs) >= worst:
                worst, where = abs(lhs - rhs), [float(class_coordinates(h).values), beta]
        return ConvolutionReport(f"convolution_{kind.value}", worst, tol, worst <= tol, where, {"points": points})
    return su3_convolution_mc(identity(kind), identity(kind), 0.5, mc_samples, rng, sigmas)


def su3_convolution_mc(g1: GroupElement, g2: GroupElement, beta: float, samples: int,
                       rng: np.random.Generator, sigmas: float = 5.0, chunk: int = 200000) -> ConvolutionReport:
    kind = GroupKind.SU3
    vals = []
    for start in range(0, samples, chunk):
        x = haar_sample(kind, rng, min(chunk, samples - start))
        a = class_coordinates(GroupElement(kind, g1.data @ x.data))
        b = class_coordinates(GroupElement(kind, np.conj(np.swapaxes(x.data, -1, -2)) @ g2.data))
        vals.append(heat_kernel(kind, a, beta) * heat_kernel(kind, b, beta))
    vals = np.concatenate(vals)
    mean = float(np.mean(vals))
    err = float(np.std(vals) / math.sqrt(samples))
    target = float(heat_kernel(kind, class_coordinates(GroupElement(kind, g1.data @ g2.data)), 2 * beta))
    dev = abs(mean - target)
    return ConvolutionReport(f"convolution_{kind.value}_mc", dev, sigmas * err, dev <= sigmas * err, [beta],
                             {"estimate": mean, "stderr": err, "target": target, "samples": samples,
                              "z": dev / err if err > 0 else float("inf")})


# ---------------------------------------------------------------------------
# small-beta limit


def gaussian_limit_law(kind: GroupKind | str, beta: float):
    """Class-angle law of the leading small-beta term times the class measure."""
    kind = GroupKind.parse(kind)
    if kind is GroupKind.SU3:
        return _su3_q_law(beta)
    return class_angle_law(kind, None, density=lambda v: gaussian_limit(kind, ClassCoordinates(kind, v), beta))


class _TabulatedLaw:
    def __init__(self, grid, cdf):
        self.grid, self.cdf_values = grid, cdf

    def cdf(self, x):
        return np.interp(x, self.grid, self.cdf_values)


def _su3_q_law(beta: float, n: int = 1601) -> _TabulatedLaw:
    """Law of Q = t1^2 + t2^2 + t1 t2 under the SU3 Gaussian-limit density x class density."""
    half = min(np.pi, 12 * math.sqrt(beta))
    ang = np.linspace(-half, half, n)
    t1, t2 = np.meshgrid(ang, ang, indexing="ij")
    v = np.stack([t1, t2], axis=-1)
    w = gaussian_limit(GroupKind.SU3, ClassCoordinates(GroupKind.SU3, v), beta) * class_density(GroupKind.SU3, v)
    q = su3_quadratic(t1, t2).ravel()
    order = np.argsort(q)
    cdf = np.cumsum(w.ravel()[order])
    return _TabulatedLaw(q[order], cdf / cdf[-1])


def wilson_limit_compare(kind: GroupKind | str, beta_small: float, N: int, rng: np.random.Generator,
                         params: MCMCParams | None = None, significance: float = 0.01,
                         negative_control: bool = False) -> ConsistencyReport:
    """Single-plaquette Metropolis samples vs the Gaussian-limit class-angle law.

    Also compares E[1 - Tr U / 2] with pi^2 E[x^2] / 2 (SU2) or E[3 - Re Tr U]
    with E[t1^2 + t2^2 + t1 t2] (SU3), using the standard errors of the two
    estimators.
    """
    kind = GroupKind.parse(kind)
    if kind is GroupKind.U1:
        raise ValueError("the Wilson comparison is defined for SU2 and SU3")
    if params is None:
        params = MCMCParams(sweeps=151, burn_in=150, thinning=1, epsilon=0.3, seed=0, chains=N)
    L = unit_square(0)
    sampler = MetropolisSampler(L, kind, beta_small, params, rng)
    hols = [GroupElement(kind, _word_holonomy(kind, c.values.data, L.word(COARSE_PLAQUETTE))) for c in sampler.run()]
    hol = GroupElement(kind, np.concatenate([h.data for h in hols])[:N])
    coords = class_coordinates(hol)
    tr = np.trace(hol.data, axis1=-2, axis2=-1).real
    if kind is GroupKind.SU2:
        x = coords.values
        lhs = 1 - tr / 2
        rhs = np.pi**2 * x**2 / 2
        stat_sample = x
    else:
        q = su3_quadratic(coords.values[..., 0], coords.values[..., 1])
        lhs = 3 - tr
        rhs = q
        stat_sample = q
    law = gaussian_limit_law(kind, beta_small)
    name = f"wilson_{kind.value}_beta{beta_small:g}"
    mean_l, mean_r = float(np.mean(lhs)), float(np.mean(rhs))
    se = math.sqrt(np.var(lhs) / len(lhs) + np.var(rhs) / len(rhs))
    z = abs(mean_l - mean_r) / se if se > 0 else float("inf")
    rep = _report(name, stat_sample, law.cdf, significance, negative_control=negative_control,
                  effective_sample_size=float(len(stat_sample)), acceptance_rate=sampler.acceptance_rate,
                  details={"beta": beta_small, "trace_estimator": mean_l, "angle_estimator": mean_r,
                           "combined_stderr": se, "z": z, "moments_agree_3sigma": bool(z <= 3.0)})
    return rep


def single_plaquette_check(kind: GroupKind | str, beta: float, N: int, rng: np.random.Generator,
                           params: MCMCParams | None = None, significance: float = 0.01) -> ConsistencyReport:
    """Metropolis single-plaquette class angle vs the exact kernel law (one-sample KS)."""
    kind = GroupKind.parse(kind)
    if params is None:
        params = MCMCParams(sweeps=101, burn_in=100, thinning=1, epsilon=0.3, seed=0, chains=N)
    L = unit_square(0)
    sampler = MetropolisSampler(L, kind, beta, params, rng)
    series = _collect(sampler, coarse_boundary_angle)
    sample = series.reshape(-1)[:N]
    return _report(f"single_plaquette_{kind.value}_beta{beta:g}", sample, class_angle_law(kind, beta).cdf,
                   significance, effective_sample_size=_ess(series), acceptance_rate=sampler.acceptance_rate)
