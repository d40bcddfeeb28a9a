"""Command-line interface.

    projgauge kernel-grid --group u1 --out out/
    projgauge verify --quick --seed 1
    projgauge sample --group su2 --beta 0.4 --level 1
    projgauge classify --input sets.json

Every output carries a metadata block (package version, seed, sha256 of the
semantic configuration).  CSV numbers use 17 significant digits; JSON uses
sorted keys.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path

import numpy as np

from .group_core import GroupKind, RepLabel
from .heat_kernel import heat_kernel
from .hida_calculus import TestFunction, metric_d, norm_t
from .lattice import config_to_json, lattice, refine_all
from .measures import BetaSchedule, MCMCParams, MetropolisSampler, coefficient_identity, convolution_check, \
    verify_kinematical_consistency
from .strata import HolonomySet, STRATUM_TABLE, classify_stratum, commutant_dimension, stratum_measure_profile
from .suite import CRITERIA, SuiteSettings, run_criterion

DEFAULT_SEED = 20261015


def package_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


@dataclass(frozen=True)
class RunConfig:
    group: str = "u1"
    beta: float = 0.4
    # beta_k = schedule_c / 4^k on refined plaquettes when set
    schedule_c: float | None = None
    dim: int = 2
    extent: int = 1
    level: int = 0
    sweeps: int = 200
    burn_in: int = 150
    thinning: int = 50
    epsilon: float = 0.3
    chains: int = 1
    start: str = "hot"
    seed: int = DEFAULT_SEED
    out: str = "out"
    quick: bool = False
    workers: int = 1
    criteria: tuple = ()
    tolerances: dict = field(default_factory=dict)
    grid_points: int = 101
    grid_betas: tuple = (0.001, 0.01, 0.05, 0.1, 0.2, 0.4)
    samples: int = 10_000
    stratum: int | None = None
    n_points: int = 50
    input: str | None = None

    # fields that do not change results
    NON_SEMANTIC = ("out", "workers")

    def __post_init__(self):
        GroupKind.parse(self.group)
        object.__setattr__(self, "criteria", tuple(int(c) for c in self.criteria))
        object.__setattr__(self, "grid_betas", tuple(float(b) for b in self.grid_betas))
        unknown = set(self.tolerances) - {f.name for f in dataclasses.fields(SuiteSettings)}
        if unknown:
            raise ValueError(f"unknown tolerance keys: {sorted(unknown)}")
        bad = set(self.criteria) - set(CRITERIA)
        if bad:
            raise ValueError(f"unknown criteria: {sorted(bad)}")

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def semantic(self) -> dict:
        d = dataclasses.asdict(self)
        for key in self.NON_SEMANTIC:
            d.pop(key)
        d["criteria"] = list(d["criteria"])
        d["grid_betas"] = list(d["grid_betas"])
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.semantic(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def kind(self) -> GroupKind:
        return GroupKind.parse(self.group)

    def beta_or_schedule(self):
        return BetaSchedule(self.schedule_c) if self.schedule_c is not None else self.beta

    def suite_settings(self) -> SuiteSettings:
        return SuiteSettings.make(self.quick, **self.tolerances)


def meta(cfg: RunConfig, command: str) -> dict:
    return {"command": command, "version": package_version(), "seed": cfg.seed, "config_hash": cfg.config_hash(),
            "config": cfg.semantic()}


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return "%.17g" % v


def write_csv(path: Path, header: list, rows, info: dict) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for key in ("command", "version", "seed", "config_hash"):
            fh.write(f"# {key}: {info[key]}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def write_json(path: Path, obj) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dump_json(obj), encoding="utf-8")
    return path


# ---------------------------------------------------------------------------
# commands


def cmd_kernel_grid(cfg: RunConfig) -> Path:
    kind = cfg.kind()
    n = cfg.grid_points
    rows = []
    if kind is GroupKind.SU3:
        ang = np.linspace(-math.pi, math.pi, n)
        t1, t2 = np.meshgrid(ang, ang, indexing="ij")
        coords = np.stack([t1.ravel(), t2.ravel()], axis=-1)
        header = ["theta1", "theta2", "beta", "density"]
    else:
        coords = np.linspace(0.0, 1.0, n)
        header = ["theta" if kind is GroupKind.U1 else "x", "beta", "density"]
    for beta in cfg.grid_betas:
        dens = heat_kernel(kind, coords, beta)
        for c, d in zip(coords, dens):
            rows.append([*np.atleast_1d(c), beta, d])
    return write_csv(Path(cfg.out) / f"kernel_grid_{kind.value}.csv", header, rows, meta(cfg, "kernel-grid"))


def verify_report(cfg: RunConfig) -> dict:
    settings = cfg.suite_settings()
    numbers = sorted(cfg.criteria) if cfg.criteria else sorted(CRITERIA)
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            futures = [pool.submit(run_criterion, n, settings, cfg.seed) for n in numbers]
            results = [f.result() for f in futures]
    else:
        results = [run_criterion(n, settings, cfg.seed) for n in numbers]
    positive = [name for r in results for name in r.positive_failures]
    return {
        "meta": meta(cfg, "verify"),
        "settings": dataclasses.asdict(settings),
        "criteria": [r.to_dict() for r in results],
        "all_passed": all(r.passed for r in results),
        "positive_failures": positive,
    }


def cmd_verify(cfg: RunConfig) -> tuple[Path, int]:
    """Write verify.json; the exit status is nonzero iff a non-negative-control check fails."""
    report = verify_report(cfg)
    for r in report["criteria"]:
        print(f"[{'PASS' if r['passed'] else 'FAIL'}] criterion {r['number']:2d} {r['name']}")
    path = write_json(Path(cfg.out) / "verify.json", report)
    return path, 1 if report["positive_failures"] else 0


def _sample_lattice(cfg: RunConfig):
    L = lattice(cfg.dim, cfg.extent, 0)
    for _ in range(cfg.level):
        L = refine_all(L)
    return L


def cmd_sample(cfg: RunConfig) -> Path:
    L = _sample_lattice(cfg)
    params = MCMCParams(cfg.sweeps, cfg.burn_in, cfg.thinning, cfg.epsilon, cfg.seed, cfg.chains, True, cfg.start)
    sampler = MetropolisSampler(L, cfg.kind(), cfg.beta_or_schedule(), params, np.random.default_rng(cfg.seed))
    samples = []
    for c in sampler.run():
        for chain in range(cfg.chains):
            samples.append(json.loads(config_to_json(type(c)(c.lattice, c.values[chain]))))
    out = {"meta": meta(cfg, "sample"), "samples": samples, "epsilon": sampler.epsilon,
           "acceptance_rate": None if math.isnan(sampler.acceptance_rate) else sampler.acceptance_rate}
    return write_json(Path(cfg.out) / "samples.json", out)


def cmd_coarsen_test(cfg: RunConfig) -> Path:
    rng = np.random.default_rng(cfg.seed)
    k_fine = max(cfg.level, 1)
    settings = cfg.suite_settings()
    rep = verify_kinematical_consistency(cfg.kind(), cfg.samples, rng, settings.significance, k_fine=k_fine,
                                         k_coarse=k_fine - 1)
    return write_json(Path(cfg.out) / "coarsen_test.json", {"meta": meta(cfg, "coarsen-test"), "report": rep.to_dict()})


def cmd_verify_convolution(cfg: RunConfig) -> Path:
    rng = np.random.default_rng(cfg.seed)
    kind = cfg.kind()
    rep = convolution_check(kind, rng, mc_samples=cfg.samples)
    coeff = coefficient_identity(kind, cfg.beta)
    out = {"meta": meta(cfg, "verify-convolution"), "convolution": rep.to_dict(), "coefficients": coeff.to_dict()}
    return write_json(Path(cfg.out) / "convolution.json", out)


def parse_matrix(m) -> np.ndarray:
    """Nested list of numbers, [re, im] pairs, or complex strings such as "0.5-0.1j"."""
    def entry(z):
        if isinstance(z, str):
            return complex(z.replace(" ", ""))
        if isinstance(z, (list, tuple)):
            return complex(z[0], z[1])
        return complex(z)
    return np.array([[entry(z) for z in row] for row in m], dtype=complex)


def load_holonomy_sets(text: str, default_group: str) -> list[HolonomySet]:
    """Either {"group": ..., "sets": [[matrix, ...], ...]} or a bare list of matrices (one set)."""
    obj = json.loads(text)
    if isinstance(obj, list):
        obj = {"group": default_group, "sets": [obj]}
    group = obj.get("group", default_group)
    return [HolonomySet.from_matrices(group, [parse_matrix(m) for m in s]) for s in obj["sets"]]


def _read_input(cfg: RunConfig) -> str:
    if cfg.input is None:
        raise ValueError("this command needs --input")
    return Path(cfg.input).read_text(encoding="utf-8")


def cmd_classify(cfg: RunConfig) -> Path:
    rows = []
    for H in load_holonomy_sets(_read_input(cfg), cfg.group):
        rep = commutant_dimension(H)
        row = {"commutant_dimension": rep.dimension, "indeterminate": rep.indeterminate,
               "threshold": rep.threshold}
        if not rep.indeterminate:
            row.update(classify_stratum(H).to_dict())
            print(f"{row['kind']} stratum {row['index']}: S_A = {row['isotropy']}, H' = {row['max_subbundle']}")
        else:
            print(f"{H.kind.value}: indeterminate commutant spectrum")
        rows.append(row)
    return write_json(Path(cfg.out) / "classify.json", {"meta": meta(cfg, "classify"), "strata": rows})


def load_test_functions(text: str, default_group: str) -> tuple[GroupKind, list[TestFunction], list[float]]:
    """{"group": ..., "t": [...], "functions": [[[label..., re, im], ...], ...]}.

    Labels are n (U1), 2 lambda (SU2) or p, q (SU3).
    """
    obj = json.loads(text)
    kind = GroupKind.parse(obj.get("group", default_group))
    width = 2 if kind is GroupKind.SU3 else 1
    funcs = []
    for terms in obj["functions"]:
        coeffs = {}
        for term in terms:
            rep = RepLabel(kind, tuple(term[:width]))
            coeffs[rep] = coeffs.get(rep, 0) + complex(term[width], term[width + 1] if len(term) > width + 1 else 0.0)
        funcs.append(TestFunction(kind, coeffs))
    return kind, funcs, [float(t) for t in obj.get("t", [1, 2, 5, 10])]


def cmd_norms(cfg: RunConfig) -> Path:
    if cfg.input is None:
        kind, funcs, ts = cfg.kind(), [TestFunction(cfg.kind(), {})], [1.0, 2.0, 5.0, 10.0]
    else:
        kind, funcs, ts = load_test_functions(_read_input(cfg), cfg.group)
    norms = [[norm_t(f, t) for t in ts] for f in funcs]
    dist = [[metric_d(f, g) for g in funcs] for f in funcs]
    out = {"meta": meta(cfg, "norms"), "group": kind.value, "t": ts,
           "norms": [[v if math.isfinite(v) else "inf" for v in row] for row in norms], "distances": dist}
    return write_json(Path(cfg.out) / "norms.json", out)


def cmd_profile_strata(cfg: RunConfig) -> Path:
    kind = cfg.kind()
    if kind is GroupKind.U1:
        raise ValueError("strata profiles exist for su2 and su3")
    indices = [cfg.stratum] if cfg.stratum is not None else sorted(STRATUM_TABLE[kind])
    rows = []
    for index in indices:
        prof = stratum_measure_profile(kind, index, cfg.beta, cfg.n_points)
        for t, v in zip(prof.parameter, prof.kernel):
            rows.append([index, t, v, prof.identity_value])
    return write_csv(Path(cfg.out) / f"strata_profile_{kind.value}.csv",
                     ["stratum", "parameter", "kernel", "identity_value"], rows, meta(cfg, "profile-strata"))


COMMANDS = {
    "kernel-grid": cmd_kernel_grid,
    "verify": cmd_verify,
    "sample": cmd_sample,
    "coarsen-test": cmd_coarsen_test,
    "verify-convolution": cmd_verify_convolution,
    "classify": cmd_classify,
    "norms": cmd_norms,
    "profile-strata": cmd_profile_strata,
}


# ---------------------------------------------------------------------------
# argument handling


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with RunConfig fields; flags override it")
    common.add_argument("--seed", type=int)
    common.add_argument("--out")
    common.add_argument("--quick", action="store_true", default=None)
    common.add_argument("--group", choices=[k.value for k in GroupKind])
    common.add_argument("--beta", type=float)
    common.add_argument("--schedule-c", type=float, dest="schedule_c")
    common.add_argument("--level", type=int)
    common.add_argument("--extent", type=int)
    common.add_argument("--dim", type=int, choices=[2, 3, 4])
    common.add_argument("--sweeps", type=int)
    common.add_argument("--burn-in", type=int, dest="burn_in")
    common.add_argument("--thinning", type=int)
    common.add_argument("--chains", type=int)
    common.add_argument("--start", choices=["hot", "cold"])
    common.add_argument("--samples", type=int)
    common.add_argument("--workers", type=int)
    common.add_argument("--criteria", type=int, nargs="+")
    common.add_argument("--stratum", type=int)
    common.add_argument("--n-points", type=int, dest="n_points")
    common.add_argument("--grid-points", type=int, dest="grid_points")
    common.add_argument("--input")
    parser = argparse.ArgumentParser(prog="projgauge", description="Heat-kernel lattice gauge measures: "
                                     "kernels, consistency checks, sampling and strata.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    data = {}
    if args.config:
        data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        if not isinstance(data, dict):
            raise ValueError("config file must hold a JSON object")
    for key, value in vars(args).items():
        if key in ("config", "command") or value is None:
            continue
        data[key] = value
    return RunConfig.from_dict(data)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
    except (ValueError, TypeError, OSError) as exc:
        parser.error(str(exc))
    try:
        result = COMMANDS[args.command](cfg)
    except (ValueError, OSError) as exc:
        print(f"projgauge {args.command}: {exc}", file=sys.stderr)
        return 2
    if args.command == "verify":
        path, status = result
        print(path)
        return status
    print(result)
    return 0


if __name__ == "__main__":
    sys.exit(main())
