"""Command-line driver.

Subcommands: eisenstein (values and q-expansions), jacobi (kernel
evaluation plus pointwise property checks), omega (evaluate and
serialize the connection at sample points), verify (identity suites),
monodromy (transport along a path file), cache (build or list the
q-expansion store).  Configuration comes from a flat `key = value` file
overridden by flags of the same names; all sampling is seeded, so runs
with the same config and seed produce byte-identical reports.

Exit status: 0 all checks pass, 1 a check failed (report still
written), 2 configuration or usage errors.
"""

from __future__ import annotations

import argparse
import math
import random
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from .connection import (KZBContext, automorphy, ctx_inner,
                         curvature_residual, degeneration_check,
                         invariance_residual, omega, residue_cusp,
                         residue_torsion, restrict_singular_fiber,
                         t0_welldef_residual)
from .eisenstein import eisenstein_cusp, eisenstein_qexp_torsion, \
    eisenstein_value
from .hodge import (automorphism_filtration_levels, cusp_sl2_operators,
                    derivation_filtration_levels, realized_pairs,
                    sl2_iso_check)
from .jacobi import a_coeffs, check_elliptic, check_modularity, \
    check_symmetry, kronecker_point, verify_heat
from .lie import Derivation, bch, is_primitive
from .monodromy import FiberPath, homology_check, lattice_mn, \
    transport_inverse
from .qcache import cache_get, cache_list, cache_put
from .report import Report
from .series import NCSeries, GEN_X, dumps_series, gen_label
from .torsion import TorsionPoint, gamma_generators

TWO_PI_I = 2j * math.pi

CONFIG_KEYS = ("level", "subgroup", "degree", "qorder", "cutoff", "tol",
               "seed", "samples", "tau_box", "z_box", "cache_dir", "out")


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    level: int = 1
    subgroup: str = "full"
    degree: int = 5
    qorder: int = 20
    cutoff: int = 400
    tol: float = 1e-7
    seed: int = 0
    samples: int = 10
    # the z box is in lattice coordinates (u, v) with z = u + v tau; the
    # default keeps v away from 1 so fixed-qorder checks stay converged
    tau_box: tuple[float, float, float, float] = (-0.45, 0.45, 0.9, 1.7)
    z_box: tuple[float, float, float, float] = (0.05, 0.95, 0.05, 0.62)
    cache_dir: str = ""
    out: str = ""

    def __post_init__(self):
        if self.level < 1:
            raise ConfigError("level must be >= 1")
        if self.degree < 2:
            raise ConfigError("degree must be >= 2")
        if self.qorder < 1:
            raise ConfigError("qorder must be >= 1")
        if self.tol <= 0:
            raise ConfigError("tol must be positive")
        if self.subgroup not in ("full", "gamma1", "sl2z"):
            raise ConfigError(f"unknown subgroup {self.subgroup!r}")

    def canonical_text(self) -> str:
        parts = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = " ".join(repr(float(x)) for x in v)
            parts.append(f"{f.name} = {v}")
        return "\n".join(parts) + "\n"

    def context(self) -> KZBContext:
        # connection values keep the adaptive q-order: a fixed order is
        # blind to samples whose transformed band fraction needs more
        # terms.  The explicit qorder governs the subcommands whose
        # subject is the q-expansion itself (heat, eisenstein, cache).
        return KZBContext(self.level, self.subgroup, self.degree,
                          cutoff=self.cutoff, tol=self.tol)


def parse_config_file(path: str) -> dict[str, str]:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config file: {e}") from None
    out: dict[str, str] = {}
    for i, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{i}: expected `key = value`")
        key, _, val = line.partition("=")
        key = key.strip()
        if key not in CONFIG_KEYS:
            raise ConfigError(f"{path}:{i}: unknown key {key!r}")
        out[key] = val.strip()
    return out


def _parse_box(text: str) -> tuple[float, float, float, float]:
    parts = text.split()
    if len(parts) != 4:
        raise ConfigError("sample box needs 4 numbers: "
                          "re_min re_max im_min im_max")
    a, b, c, d = (float(p) for p in parts)
    if not (a < b and c < d):
        raise ConfigError("sample box bounds out of order")
    return a, b, c, d


def build_config(args: argparse.Namespace) -> RunConfig:
    values: dict = {}
    cfg_file = getattr(args, "config", None)
    if cfg_file:
        values.update(parse_config_file(cfg_file))
    for key in CONFIG_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    kw: dict = {}
    for f in fields(RunConfig):
        if f.name not in values:
            continue
        raw = values[f.name]
        try:
            if f.name in ("tau_box", "z_box"):
                kw[f.name] = _parse_box(raw) if isinstance(raw, str) else raw
            elif f.type == "int":
                kw[f.name] = int(raw)
            elif f.type == "float":
                kw[f.name] = float(raw)
            else:
                kw[f.name] = str(raw)
        except ValueError:
            raise ConfigError(f"bad value for {f.name}: {raw!r}") from None
    return RunConfig(**kw)


# -- seeded sampling ------------------------------------------------------


def sample_tau(rng: random.Random, cfg: RunConfig) -> complex:
    a, b, c, d = cfg.tau_box
    return complex(rng.uniform(a, b), rng.uniform(c, d))


def sample_z(rng: random.Random, cfg: RunConfig, tau: complex) -> complex:
    """A fiber point u + v tau with (u, v) in the z box, kept away from
    every torsion lift by 1/(4N) in lattice coordinates."""
    lvl = cfg.level
    margin = 1.0 / (4 * lvl)
    pts = [(k / lvl, j / lvl) for k in range(lvl) for j in range(lvl)]
    a, b, c, d = cfg.z_box

    def wrap(t):
        t = t % 1.0
        return min(t, 1.0 - t)

    for _ in range(200):
        u, v = rng.uniform(a, b), rng.uniform(c, d)
        if all(max(wrap(u - x), wrap(v - y)) >= margin for x, y in pts):
            return u + v * tau
    raise ConfigError("z box leaves no room away from the torsion lifts")


def _pool(jobs):
    """Run the job closures in a thread pool; results are collected in
    submission order, so report assembly stays deterministic."""
    if len(jobs) <= 1:
        return [j() for j in jobs]
    with ThreadPoolExecutor(max_workers=min(8, len(jobs))) as ex:
        return list(ex.map(lambda f: f(), jobs))


def _flat_add(rep: Report, results) -> None:
    for batch in results:
        for name, params, residual, tol in batch:
            rep.add(name, params, residual, tol)


# -- q-expansion cache ----------------------------------------------------


def _qexp_key(level: int, m: int, alpha: TorsionPoint, qorder: int) -> str:
    return f"eis_N{level}_m{m}_a{alpha.nx}_{alpha.ny}_Q{qorder}"


def get_qexp(cfg: RunConfig, m: int, alpha: TorsionPoint):
    """Torsion Eisenstein q-expansion, through the disk cache when one
    is configured.  The cache stores the exact coefficient list, so a
    hit cannot change numerical results."""
    if not cfg.cache_dir:
        return eisenstein_qexp_torsion(m, alpha, cfg.qorder)
    key = _qexp_key(cfg.level, m, alpha, cfg.qorder)
    hit = cache_get(cfg.cache_dir, key)
    if hit is not None:
        return hit
    qs = eisenstein_qexp_torsion(m, alpha, cfg.qorder)
    cache_put(cfg.cache_dir, key, qs)
    return qs


# -- subcommands ----------------------------------------------------------


def cmd_eisenstein(cfg: RunConfig, rep: Report) -> None:
    """Evaluate the torsion Eisenstein series at a seeded point through
    the q-expansion, cross-check the lattice route, and compare the
    constant terms against their closed form."""
    rng = random.Random(cfg.seed)
    tau = sample_tau(rng, cfg)
    ctx = cfg.context()
    rep.info(f"tau sample: {tau!r}")

    def one(m, alpha):
        qs = get_qexp(cfg, m, alpha)
        val, tail = qs.eval(tau)
        recs = [("eisenstein_tail",
                 {"m": m, "alpha": alpha.label(), "qorder": cfg.qorder},
                 tail, cfg.tol)]
        if m != 2:   # weight 2 has no unconditional lattice route
            lat = eisenstein_value(m, alpha, tau, cutoff=cfg.cutoff)
            scale = max(abs(val), abs(lat), 1.0)
            recs.append(("eisenstein_route_match",
                         {"m": m, "alpha": alpha.label(),
                          "cutoff": cfg.cutoff},
                         abs(val - lat) / scale, cfg.tol))
        cusp = eisenstein_cusp(m, alpha)
        recs.append(("eisenstein_cusp_constant",
                     {"m": m, "alpha": alpha.label()},
                     abs(complex(qs.coeffs[0]) - cusp), 1e-10))
        return recs

    jobs = [lambda m=m, a=a: one(m, a)
            for m in range(2, 9) for a in ctx.admitted()]
    _flat_add(rep, _pool(jobs))
    for m in range(2, 9):
        for a in ctx.admitted():
            val, _ = get_qexp(cfg, m, a).eval(tau)
            rep.info(f"G m={m} alpha={a.label()} value={val!r}")


def cmd_jacobi(cfg: RunConfig, rep: Report) -> None:
    """Evaluate the two-variable kernel at seeded points and check its
    symmetry, quasi-periodicity, and modular transformation."""
    smat, tmat = ((0, -1), (1, 0)), ((1, 1), (0, 1))

    def one(i):
        rng = random.Random(cfg.seed + 7 * i)
        tau = sample_tau(rng, cfg)
        z = sample_z(rng, cfg, tau)
        x = 0.31 + 0.07j * (i + 1)
        val = kronecker_point(x, z, tau)
        scale = max(abs(val), 1.0)
        p = {"sample": i, "x": format(x, ".3f"), "z": format(z, ".3f")}
        return [("jacobi_symmetry", p, check_symmetry(x, z, tau) / scale,
                 cfg.tol),
                ("jacobi_elliptic", {**p, "mn": "(1,0)"},
                 check_elliptic(x, z, tau, 1, 0) / scale, cfg.tol),
                ("jacobi_elliptic", {**p, "mn": "(0,1)"},
                 check_elliptic(x, z, tau, 0, 1) / scale, cfg.tol),
                ("jacobi_modular", {**p, "gamma": "S"},
                 check_modularity(x, z, tau, smat) / scale, cfg.tol),
                ("jacobi_modular", {**p, "gamma": "T"},
                 check_modularity(x, z, tau, tmat) / scale, cfg.tol)]

    _flat_add(rep, _pool([lambda i=i: one(i) for i in range(cfg.samples)]))
    rng = random.Random(cfg.seed)
    tau = sample_tau(rng, cfg)
    z = sample_z(rng, cfg, tau)
    rep.info(f"kernel at x=0.31, z={z!r}, tau={tau!r}: "
             f"{kronecker_point(0.31, z, tau)!r}")


def cmd_omega(cfg: RunConfig, rep: Report) -> None:
    """Evaluate the connection at seeded points; serialize the dz
    component and the dtau images, and check that the series parts stay
    Lie elements."""
    rng = random.Random(cfg.seed)
    ctx = cfg.context()
    for i in range(min(cfg.samples, 3)):
        tau = sample_tau(rng, cfg)
        z = sample_z(rng, cfg, tau)
        val = omega(ctx, tau, z)
        rep.add("omega_dz_primitive", {"sample": i},
                0.0 if is_primitive(val.b_elem, tol=1e-9) else 1.0, 1.0)
        rep.add("omega_nu1_primitive", {"sample": i},
                0.0 if is_primitive(val.nu1_elem, tol=1e-9) else 1.0, 1.0)
        rep.info(f"omega sample {i}: tau={tau!r} z={z!r}")
        for line in dumps_series(val.b_elem).splitlines():
            rep.info(f"omega[{i}] dz {line}")
        for gid in ctx.gen_ids():
            for line in dumps_series(val.a_deriv.image(gid)).splitlines():
                rep.info(f"omega[{i}] dtau {gen_label(gid, ctx.level)} "
                         f"-> {line}")


def verify_suite(cfg: RunConfig, rep: Report, which: str) -> None:
    suites = ("heat", "flatness", "invariance", "residues",
              "degeneration", "sl2")
    run = suites if which == "all" else (which,)
    for name in run:
        globals()[f"_verify_{name}"](cfg, rep)


def _verify_heat(cfg: RunConfig, rep: Report) -> None:
    # residual of d/dtau F = d^2/(dz dx) F through x-order 8
    def one(i):
        rng = random.Random(cfg.seed + 1000 * i)
        tau = sample_tau(rng, cfg)
        z = sample_z(rng, cfg, tau)
        r = verify_heat(z, tau, 8, qorder=cfg.qorder)
        return [("heat", {"sample": i, "order": 8, "qorder": cfg.qorder},
                 r["residual"], cfg.tol)]

    _flat_add(rep, _pool([lambda i=i: one(i) for i in range(cfg.samples)]))


def _verify_flatness(cfg: RunConfig, rep: Report) -> None:
    ctx = cfg.context()

    def one(i):
        rng = random.Random(cfg.seed + 2000 * i)
        tau = sample_tau(rng, cfg)
        z = sample_z(rng, cfg, tau)
        r = curvature_residual(ctx, tau, z)
        p = {"sample": i, "degree": cfg.degree}
        return [("flatness_exact", p, r["residual_exact"] / r["scale"],
                 cfg.tol),
                ("flatness_wedge", p, r["residual_wedge"] / r["scale"],
                 cfg.tol),
                ("flatness_total", p, r["residual"] / r["scale"], cfg.tol)]

    _flat_add(rep, _pool([lambda i=i: one(i)
                          for i in range(min(cfg.samples, 5))]))


def _verify_invariance(cfg: RunConfig, rep: Report) -> None:
    ctx = cfg.context()
    moves = [("lattice(1,0)", ((1, 0), (0, 1)), (1, 0)),
             ("lattice(0,1)", ((1, 0), (0, 1)), (0, 1))]
    for g in gamma_generators(cfg.level):
        moves.append((f"gamma{g}", g, (0, 0)))

    def one(i, tag, gamma, mn):
        rng = random.Random(cfg.seed + 3000 * i)
        tau = sample_tau(rng, cfg)
        z = sample_z(rng, cfg, tau)
        r = invariance_residual(ctx, gamma, mn, tau, z)
        return [("invariance", {"move": tag, "sample": i},
                 r["residual"] / r["scale"], cfg.tol)]

    jobs = [lambda i=i, t=t, g=g, mn=mn: one(i, t, g, mn)
            for t, g, mn in moves for i in range(min(cfg.samples, 5))]
    _flat_add(rep, _pool(jobs))


def _verify_residues(cfg: RunConfig, rep: Report) -> None:
    ctx = cfg.context()
    rng = random.Random(cfg.seed)
    tau = sample_tau(rng, cfg)

    def coeff_match(alpha):
        avals = a_coeffs(min(6, cfg.degree), alpha, tau, qorder=cfg.qorder)
        recs = []
        for m in range(len(avals)):
            g = eisenstein_value(m + 2, alpha, tau, cutoff=cfg.cutoff)
            want = -(m + 1) / TWO_PI_I ** (m + 1) * g
            scale = max(abs(avals[m]), abs(want), 1.0)
            recs.append(("residue_a_vs_eisenstein",
                         {"m": m, "alpha": alpha.label()},
                         abs(avals[m] - want) / scale, 1e-6))
        return recs

    def welldef(m, alpha):
        return [("residue_zero_letter", {"m": m, "alpha": alpha.label()},
                 t0_welldef_residual(ctx, m, alpha), 1e-15)]

    jobs = [lambda a=a: coeff_match(a) for a in ctx.admitted()]
    jobs += [lambda m=m, a=a: welldef(m, a)
             for m in range(5) for a in ctx.admitted()]
    _flat_add(rep, _pool(jobs))

    # cusp residue must commute with the root-of-unity residues
    lq = residue_cusp(ctx)
    fib = restrict_singular_fiber(ctx, 2.0 + 0.5j)
    for k in sorted(fib.pole_roots):
        lw = ctx_inner(ctx, fib.pole_roots[k])
        comm = lq.dbracket(lw)
        rep.add("residue_commutation", {"root": k},
                comm.max_abs() / max(lw.max_abs(), 1.0), 1e-10)


def _verify_degeneration(cfg: RunConfig, rep: Report) -> None:
    r = degeneration_check(cfg.context())
    for pole in sorted(r["per_pole"]):
        rep.add("degeneration", {"pole": pole}, r["per_pole"][pole], 1e-12)
    if "offending_word" in r:
        rep.info(f"degeneration offending word: {r['offending_word']}")


def _verify_sl2(cfg: RunConfig, rep: Report) -> None:
    """Filtration levels of the residues and automorphy factors, then
    the raising-power rank sweep over realized graded pieces."""
    ctx = cfg.context()
    lq, lqw = cusp_sl2_operators(ctx)

    def defect(got, want):
        return float(sum(abs(a - b) for a, b in zip(got, want)))

    rep.add("filtration_cusp_residue", {"want": "(-1,0,-2)"},
            defect(derivation_filtration_levels(lq), (-1, 0, -2)), 1e-15)
    for alpha in ctx.admitted():
        lz = Derivation.inner(residue_torsion(ctx, alpha))
        rep.add("filtration_torsion_residue",
                {"alpha": alpha.label(), "want": "(-1,-2,-2)"},
                defect(derivation_filtration_levels(lz), (-1, -2, -2)),
                1e-15)
    rng = random.Random(cfg.seed)
    tau = sample_tau(rng, cfg)
    z = sample_z(rng, cfg, tau)
    # the level-0 statement covers the translation and parabolic factors;
    # lower-triangular moves shift M by +2
    n = cfg.level
    factors = [("translation(1,0)", ((1, 0), (0, 1)), (1, 0)),
               ("translation(0,1)", ((1, 0), (0, 1)), (0, 1)),
               (f"parabolic(1,{n})", ((1, n), (0, 1)), (0, 0))]
    for tag, g, mn in factors:
        M = automorphy(ctx, g, mn, tau, z)
        rep.add("filtration_automorphy", {"move": tag, "want": "(0,0,0)"},
                defect(automorphism_filtration_levels(M), (0, 0, 0)), 1e-15)

    for m, r in realized_pairs(cfg.level, cfg.degree, 6, 6):
        for tag, L in (("lq", lq), ("lq+lw0", lqw)):
            res = sl2_iso_check(ctx, L, m, r)
            if not res["ok"]:
                bad = 1.0
            elif not res["bijective"]:
                bad = float(res["dim_source"] + res["dim_target"]
                            - 2 * res["rank"])
            else:
                bad = 0.0
            rep.add("sl2_rank", {"m": m, "r": r, "op": tag}, bad, 1.0)


def cmd_monodromy(cfg: RunConfig, rep: Report, path_file: str) -> None:
    """Transport along a path file; checks convergence of the step
    doubling and, when the path declares a lattice class, the degree-1
    homology identity."""
    try:
        path = FiberPath.loads(Path(path_file).read_text())
    except OSError as e:
        raise ConfigError(f"cannot read path file: {e}") from None
    except ValueError as e:
        raise ConfigError(f"bad path file: {e}") from None
    if path.tau is None:
        raise ConfigError("path file declares no tau; fiber transport "
                          "needs one")
    ctx = cfg.context()
    res = transport_inverse(ctx, path, tol=cfg.tol)
    for deg in sorted(res.errors):
        rep.add("transport_convergence", {"degree": deg},
                res.errors[deg], cfg.tol)
    rep.info(f"steps per segment: {','.join(str(s) for s in res.steps)}")
    for line in dumps_series(res.log_t.degree_part(1)).splitlines():
        rep.info(f"log transport degree 1: {line}")
    if path.mn is not None:
        m, _ = lattice_mn(path.tau, path.end - path.start)
        mx = NCSeries.generator(ctx.level, ctx.degree, GEN_X) * float(-m)
        psi = bch(res.log_t, mx)
        r = homology_check(ctx, path, psi, tol=1e-6)
        rep.add("loop_homology", {"mn": path.mn}, r["residual"], 1e-6)


def cmd_cache(cfg: RunConfig, rep: Report, action: str) -> None:
    if not cfg.cache_dir:
        raise ConfigError("cache subcommand needs --cache-dir")
    if action == "list":
        rows = cache_list(cfg.cache_dir)
        rep.info(f"cache entries: {len(rows)}")
        for key, denom, qorder in rows:
            rep.info(f"cache {key} denom={denom} qorder={qorder}")
        return
    ctx = cfg.context()
    built = 0
    for m in range(2, 9):
        for alpha in ctx.admitted():
            key = _qexp_key(cfg.level, m, alpha, cfg.qorder)
            if cache_get(cfg.cache_dir, key) is None:
                cache_put(cfg.cache_dir, key,
                          eisenstein_qexp_torsion(m, alpha, cfg.qorder))
                built += 1
    rep.info(f"cache build: {built} new entries, "
             f"{len(cache_list(cfg.cache_dir))} total")


# -- entry point ----------------------------------------------------------


def make_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False,
                                     argument_default=argparse.SUPPRESS)
    common.add_argument("--level", type=int)
    common.add_argument("--subgroup", choices=["full", "gamma1", "sl2z"])
    common.add_argument("--degree", type=int)
    common.add_argument("--qorder", type=int)
    common.add_argument("--cutoff", type=int)
    common.add_argument("--tol", type=float)
    common.add_argument("--seed", type=int)
    common.add_argument("--samples", type=int)
    common.add_argument("--config")
    common.add_argument("--out")
    common.add_argument("--cache-dir", dest="cache_dir")
    p = argparse.ArgumentParser(
        prog="ekzb", parents=[common],
        description="Level-N elliptic KZB connection: evaluation and "
                    "identity verification.")
    sub = p.add_subparsers(dest="cmd", required=True)
    sub.add_parser("eisenstein", parents=[common],
                   help="Eisenstein values and q-expansions")
    sub.add_parser("jacobi", parents=[common],
                   help="kernel evaluation and property checks")
    sub.add_parser("omega", parents=[common],
                   help="evaluate and serialize the connection")
    v = sub.add_parser("verify", parents=[common],
                       help="run an identity suite")
    v.add_argument("suite", choices=["heat", "flatness", "invariance",
                                     "residues", "degeneration", "sl2",
                                     "all"])
    mo = sub.add_parser("monodromy", parents=[common],
                        help="transport along a path file")
    mo.add_argument("path_file")
    c = sub.add_parser("cache", parents=[common],
                       help="build or list the q-expansion cache")
    c.add_argument("action", choices=["build", "list"])
    return p


def main(argv: list[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    try:
        cfg = build_config(args)
        rep = Report(cfg.canonical_text(),
                     {"package": f"ekzb {__version__}",
                      "numpy": np.__version__})
        if args.cmd == "eisenstein":
            cmd_eisenstein(cfg, rep)
        elif args.cmd == "jacobi":
            cmd_jacobi(cfg, rep)
        elif args.cmd == "omega":
            cmd_omega(cfg, rep)
        elif args.cmd == "verify":
            verify_suite(cfg, rep, args.suite)
        elif args.cmd == "monodromy":
            cmd_monodromy(cfg, rep, args.path_file)
        else:
            cmd_cache(cfg, rep, args.action)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    text = rep.text()
    sys.stdout.write(text)
    if cfg.out:
        paths = rep.write(cfg.out)
        print("written: " + " ".join(str(p) for p in paths),
              file=sys.stderr)
    return 0 if rep.passed else 1


if __name__ == "__main__":
    sys.exit(main())
