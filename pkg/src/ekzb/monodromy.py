"""Parallel transport in a fixed fiber and on the degenerate fiber.

Transport solves the right-invariant series ODE u'(t) = u(t) A(t) whose
solution is the iterated-integral series 1 + int w + int w w + ... with
letters ordered along the path, so concatenation multiplies transports
in path order.  Segments use a fourth-order two-node product scheme:
each step multiplies by the exponential of a degree-weighted quadrature,
which keeps every partial product group-like, and segments are bisected
until successive refinements agree below tolerance.
"""

import cmath
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .connection import KZBContext, kz_letter
from .jacobi import lattice_distance, section_kernels
from .lie import (Automorphism, adjoint_series_action, bch, bracket,
                  exp_trunc, log_trunc)
from .series import GEN_X, GEN_Y, NCSeries, gen_count, gen_t

TWO_PI = 2.0 * math.pi
TWO_PI_I = 2j * math.pi
_GAUSS = math.sqrt(3.0) / 6.0
_MAX_STEPS = 4096


# -- paths ------------------------------------------------------------------


@dataclass(frozen=True)
class LineSeg:
    z0: complex
    z1: complex

    def point(self, t: float) -> complex:
        return self.z0 + t * (self.z1 - self.z0)

    def velocity(self, t: float) -> complex:
        return self.z1 - self.z0

    def reversed(self) -> "LineSeg":
        return LineSeg(self.z1, self.z0)

    def dumps(self) -> str:
        return f"L {format_complex(self.z0)} {format_complex(self.z1)}"


@dataclass(frozen=True)
class ArcSeg:
    center: complex
    radius: float
    a0: float        # radians
    a1: float

    def point(self, t: float) -> complex:
        return self.center + self.radius * cmath.exp(
            1j * (self.a0 + t * (self.a1 - self.a0)))

    def velocity(self, t: float) -> complex:
        return 1j * (self.a1 - self.a0) * (self.point(t) - self.center)

    def reversed(self) -> "ArcSeg":
        return ArcSeg(self.center, self.radius, self.a1, self.a0)

    def dumps(self) -> str:
        return (f"C {format_complex(self.center)} {self.radius!r} "
                f"{self.a0!r} {self.a1!r}")


def parse_complex(tok: str) -> complex:
    """Complex literal with an i or j suffix, e.g. 0.25+0.5i."""
    return complex(tok.strip().replace("i", "j"))


def format_complex(z: complex) -> str:
    return f"{z.real!r}{'+' if z.imag >= 0 else '-'}{abs(z.imag)!r}i"


@dataclass(frozen=True)
class FiberPath:
    """A piecewise path, with the fiber parameter and optional declared
    homology data (m, n, windings) carried along for cross-checking.

    Windings are keyed by torsion coordinates (nx, ny).
    """

    segments: tuple
    tau: complex | None = None
    mn: tuple[int, int] | None = None
    winding: dict | None = field(default=None, compare=False)

    @classmethod
    def line(cls, z0: complex, z1: complex, **kw) -> "FiberPath":
        return cls((LineSeg(z0, z1),), **kw)

    @classmethod
    def circle(cls, center: complex, radius: float, a0: float = 0.0,
               a1: float = TWO_PI, **kw) -> "FiberPath":
        return cls((ArcSeg(center, radius, a0, a1),), **kw)

    @property
    def start(self) -> complex:
        return self.segments[0].point(0.0)

    @property
    def end(self) -> complex:
        return self.segments[-1].point(1.0)

    def then(self, other: "FiberPath") -> "FiberPath":
        assert abs(self.end - other.start) < 1e-9, "segments do not chain"
        return replace(self, segments=self.segments + other.segments,
                       mn=None, winding=None)

    def reversed(self) -> "FiberPath":
        segs = tuple(s.reversed() for s in reversed(self.segments))
        return replace(self, segments=segs, mn=None, winding=None)

    def dumps(self) -> str:
        lines = []
        if self.tau is not None:
            lines.append(f"tau {format_complex(self.tau)}")
        if self.mn is not None:
            lines.append(f"mn {self.mn[0]} {self.mn[1]}")
        for (nx, ny), c in (self.winding or {}).items():
            cs = str(int(c)) if float(c).is_integer() else repr(float(c))
            lines.append(f"wind {nx} {ny} {cs}")
        lines.extend(s.dumps() for s in self.segments)
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "FiberPath":
        segments, tau, mn = [], None, None
        winding: dict = {}
        for raw in text.splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            op, *args = line.split()
            if op == "L":
                if len(args) != 2:
                    raise ValueError(f"L needs 2 fields: {line!r}")
                segments.append(LineSeg(*map(parse_complex, args)))
            elif op == "C":
                if len(args) != 4:
                    raise ValueError(f"C needs 4 fields: {line!r}")
                segments.append(ArcSeg(parse_complex(args[0]),
                                       float(args[1]), float(args[2]),
                                       float(args[3])))
            elif op == "tau":
                if len(args) != 1:
                    raise ValueError(f"tau needs 1 field: {line!r}")
                tau = parse_complex(args[0])
            elif op == "mn":
                if len(args) != 2:
                    raise ValueError(f"mn needs 2 fields: {line!r}")
                mn = (int(args[0]), int(args[1]))
            elif op == "wind":
                if len(args) != 3:
                    raise ValueError(f"wind needs 3 fields: {line!r}")
                c = float(args[2])
                winding[(int(args[0]), int(args[1]))] = \
                    int(c) if c.is_integer() else c
            else:
                raise ValueError(f"unknown path directive {op!r}")
        if not segments:
            raise ValueError("path file has no segments")
        return cls(tuple(segments), tau, mn, winding or None)


# -- transport engine --------------------------------------------------------


@dataclass(frozen=True)
class TransportResult:
    """Iterated-integral series along a path.

    t_inv is group-like; log_t is its (primitive) logarithm; errors maps
    each word length to the coefficient change of the final refinement,
    a per-degree quadrature error estimate."""

    t_inv: NCSeries
    log_t: NCSeries
    errors: dict[int, float]
    steps: tuple


def grouplike_inverse(u: NCSeries) -> NCSeries:
    return exp_trunc(log_trunc(u) * (-1.0))


def _segment_transport(form, seg, one: NCSeries, steps: int) -> NCSeries:
    u = one
    h = 1.0 / steps
    w = math.sqrt(3.0) * h * h / 12.0
    for i in range(steps):
        t0 = i * h
        ta = t0 + (0.5 - _GAUSS) * h
        tb = t0 + (0.5 + _GAUSS) * h
        a1 = form(seg.point(ta)) * seg.velocity(ta)
        a2 = form(seg.point(tb)) * seg.velocity(tb)
        # right ODE: the commutator enters with the opposite sign to the
        # usual left-invariant scheme
        u = u * exp_trunc((a1 + a2) * (h / 2.0) + bracket(a1, a2) * w)
    return u


def _check_margin(divisor_distance, path: FiberPath, margin: float):
    for seg in path.segments:
        for k in range(33):
            z = seg.point(k / 32.0)
            d = divisor_distance(z)
            if d < margin:
                raise ValueError(
                    f"path point {z!r} is {d:.3e} from the divisor, "
                    f"inside the margin {margin:.3e}")


def _transport(form, path: FiberPath, one: NCSeries, tol: float,
               divisor_distance, margin: float) -> TransportResult:
    _check_margin(divisor_distance, path, margin)
    deg = one.degree
    u = one
    all_steps = []
    errors = {d: 0.0 for d in range(1, deg + 1)}
    for seg in path.segments:
        steps = 8
        prev = _segment_transport(form, seg, one, steps)
        while True:
            steps *= 2
            cur = _segment_transport(form, seg, one, steps)
            diff = cur - prev
            if diff.max_abs() < tol:
                break
            if steps >= _MAX_STEPS:
                raise RuntimeError(
                    f"transport did not converge below {tol} "
                    f"within {steps} steps per segment")
            prev = cur
        for d in range(1, deg + 1):
            errors[d] = max(errors[d], diff.degree_part(d).max_abs())
        all_steps.append(steps)
        u = u * cur
    return TransportResult(u, log_trunc(u), errors, tuple(all_steps))


# -- the fiber form ----------------------------------------------------------


def fiber_form(ctx: KZBContext, tau: complex):
    """Evaluator z -> dz-component of the connection (an algebra element,
    2 pi i Y + sum_alpha h_alpha(X, z|tau) . t_alpha)."""
    assert tau.imag > 0
    lvl, deg = ctx.level, ctx.degree
    base = NCSeries.generator(lvl, deg, GEN_Y) * TWO_PI_I
    letters = [(alpha, ctx.t_elem(alpha)) for alpha in ctx.admitted()]

    def value(z: complex) -> NCSeries:
        out = base
        for alpha, t in letters:
            h, _ = section_kernels(alpha, z, tau, deg - 1, qorder=ctx.qorder)
            out = out + adjoint_series_action(
                [h.coeff(k) for k in range(deg)], t)
        return out

    return value


def fiber_divisor_distance(ctx: KZBContext, tau: complex):
    lifts = [alpha.lift(tau) for alpha in ctx.admitted()]

    def dist(z: complex) -> float:
        return min(lattice_distance(z - lift, tau)[0] for lift in lifts)

    return dist


def default_margin(level: int) -> float:
    return 1.0 / (8.0 * level)


def transport_inverse(ctx: KZBContext, path: FiberPath, form=None,
                      tol: float = 1e-9,
                      margin: float | None = None) -> TransportResult:
    """Inverse-monodromy series of the dz-component along the path."""
    assert path.tau is not None, "path carries no fiber parameter"
    if form is None:
        form = fiber_form(ctx, path.tau)
    if margin is None:
        margin = default_margin(ctx.level)
    one = NCSeries.scalar(ctx.level, ctx.degree, 1.0)
    return _transport(form, path, one, tol,
                      fiber_divisor_distance(ctx, path.tau), margin)


# -- fiber monodromy ---------------------------------------------------------


def lattice_mn(tau: complex, disp: complex) -> tuple[int, int]:
    """Solve disp = m tau + n over the integers."""
    m = disp.imag / tau.imag
    mr = round(m)
    nr = round(disp.real - mr * tau.real)
    if abs(disp - (mr * tau + nr)) > 1e-8 * max(1.0, abs(disp)):
        raise ValueError(f"displacement {disp!r} is not a lattice vector")
    return mr, nr


def monodromy_grouplike(ctx: KZBContext, path: FiberPath,
                        tol: float = 1e-9,
                        margin: float | None = None) -> NCSeries:
    """(1 + int nu_2 + ...) e^{-mX} for a loop lifting to a path with
    endpoint displacement m tau + n."""
    m, _ = lattice_mn(path.tau, path.end - path.start)
    u = transport_inverse(ctx, path, tol=tol, margin=margin).t_inv
    twist = exp_trunc(NCSeries.generator(ctx.level, ctx.degree, GEN_X)
                      * float(-m))
    return u * twist


def theta_tau(ctx: KZBContext, path: FiberPath, tol: float = 1e-9,
              margin: float | None = None) -> Automorphism:
    """Inverse monodromy of the loop as an algebra automorphism Ad(g)."""
    g = monodromy_grouplike(ctx, path, tol=tol, margin=margin)
    ginv = grouplike_inverse(g)
    lvl, deg = ctx.level, ctx.degree
    images = {gid: g * NCSeries.generator(lvl, deg, gid) * ginv
              for gid in range(gen_count(lvl))}
    return Automorphism(lvl, deg, images)


def psi_tau(ctx: KZBContext, path: FiberPath, tol: float = 1e-9,
            margin: float | None = None) -> NCSeries:
    """log((1 + int nu_2 + ...) e^{-mX}), a primitive element."""
    m, _ = lattice_mn(path.tau, path.end - path.start)
    u = transport_inverse(ctx, path, tol=tol, margin=margin).t_inv
    mx = NCSeries.generator(ctx.level, ctx.degree, GEN_X) * float(-m)
    return bch(log_trunc(u), mx)


def base_point(level: int, tau: complex) -> complex:
    return (1 + tau) / (2 * level)


def standard_loops(ctx: KZBContext, tau: complex,
                   z0: complex | None = None,
                   radius: float | None = None) -> dict[str, FiberPath]:
    """Generator loops: the two lattice directions based at z0 and one
    positive circle around each admitted letter."""
    if z0 is None:
        z0 = base_point(ctx.level, tau)
    if radius is None:
        radius = 1.0 / (4.0 * ctx.level)
    lvl = ctx.level
    # The straight lattice lifts carry intrinsic fractional class data on the
    # torsion letters: the t_alpha coefficient of the abelianized transport is
    # 2 pi i ((N - ny) % N)/N along z0 -> z0+1 and -2 pi i ((N - nx) % N)/N
    # along z0 -> z0+tau, relative to t_0.  Integer winding added by rerouting
    # cannot cancel a fraction, so the canonical loops declare it.
    wa = {(a.nx, a.ny): ((lvl - a.ny) % lvl) / lvl
          for a in ctx.admitted_nonzero() if a.ny % lvl}
    wb = {(a.nx, a.ny): -((lvl - a.nx) % lvl) / lvl
          for a in ctx.admitted_nonzero() if a.nx % lvl}
    loops = {
        "a": FiberPath.line(z0, z0 + 1, tau=tau, mn=(0, 1), winding=wa),
        "b": FiberPath.line(z0, z0 + tau, tau=tau, mn=(1, 0), winding=wb),
    }
    for alpha in ctx.admitted():
        loops[alpha.label()] = FiberPath.circle(
            alpha.lift(tau), radius, tau=tau, mn=(0, 0),
            winding={(alpha.nx, alpha.ny): 1})
    return loops


def homology_expected(ctx: KZBContext, tau: complex, mn: tuple[int, int],
                      winding: dict | None) -> NCSeries:
    """Degree-1 part a declared homology class forces on psi_tau:
    2 pi i (m tau + n) Y - m X + 2 pi i sum (c_alpha - c_0) t_alpha,
    the c_0 shift coming from the resolved t_0."""
    lvl, deg = ctx.level, ctx.degree
    m, n = mn
    out = NCSeries.generator(lvl, deg, GEN_Y) * (TWO_PI_I * (m * tau + n)) \
        + NCSeries.generator(lvl, deg, GEN_X) * float(-m)
    wind = winding or {}
    c0 = wind.get((0, 0), 0)
    for alpha in ctx.admitted_nonzero():
        c = wind.get((alpha.nx, alpha.ny), 0) - c0
        if c:
            out = out + NCSeries.generator(lvl, deg, gen_t(alpha)) \
                * (TWO_PI_I * c)
    return out


def homology_check(ctx: KZBContext, path: FiberPath, psi: NCSeries,
                   tol: float = 1e-6) -> dict:
    """Compare the degree-1 part of psi against the path's declared
    homology data."""
    if path.mn is None:
        raise ValueError("path declares no homology data")
    want = homology_expected(ctx, path.tau, path.mn, path.winding)
    residual = (psi.degree_part(1) - want).max_abs()
    return {"residual": residual, "passed": bool(residual < tol)}


def monodromy_rank_check(ctx: KZBContext, tau: complex, tol: float = 1e-6,
                         quad_tol: float = 1e-9) -> dict:
    """Degree-1 data of the standard loops: per-loop homology residuals
    and the rank of the induced degree-1 matrix (expected N^2 + 1 on the
    full context)."""
    loops = standard_loops(ctx, tau)
    basis = [GEN_X, GEN_Y] + [gen_t(a) for a in ctx.admitted_nonzero()]
    rows, per_loop = [], {}
    for name, path in loops.items():
        psi = psi_tau(ctx, path, tol=quad_tol)
        per_loop[name] = homology_check(ctx, path, psi, tol=tol)["residual"]
        rows.append([psi.coeff((g,)) for g in basis])
    rank = int(np.linalg.matrix_rank(np.array(rows), tol=1e-8))
    expected = len(basis)
    worst = max(per_loop.values())
    return {"per_loop": per_loop, "residual": worst, "rank": rank,
            "expected_rank": expected,
            "passed": bool(worst < tol and rank == expected)}


# -- the KZ side -------------------------------------------------------------


def kz_pole_form(level: int, degree: int):
    """Evaluator w -> e_0/w + sum_k e_k/(w - zeta^k), the pole map whose
    transports match substituted fiber transports directly."""
    e0 = kz_letter(level, degree, None)
    roots = [(cmath.exp(TWO_PI_I * k / level), kz_letter(level, degree, k))
             for k in range(level)]

    def value(w: complex) -> NCSeries:
        out = e0 * (1.0 / w)
        for rt, e in roots:
            out = out + e * (1.0 / (w - rt))
        return out

    return value


def kz_divisor_distance(level: int):
    roots = [cmath.exp(TWO_PI_I * k / level) for k in range(level)]

    def dist(w: complex) -> float:
        return min(abs(w), min(abs(w - rt) for rt in roots))

    return dist


def kz_transport(level: int, path: FiberPath, degree: int = 5,
                 tol: float = 1e-10,
                 margin: float | None = None) -> TransportResult:
    """Iterated-integral series of the cyclotomic KZ pole map."""
    if margin is None:
        margin = default_margin(level)
    one = NCSeries.scalar(level, degree, 1.0)
    return _transport(kz_pole_form(level, degree), path, one, tol,
                      kz_divisor_distance(level), margin)
