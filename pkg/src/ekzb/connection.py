"""The level-N KZB connection form, its symmetries and its boundary data.

The connection value at a point (tau, z) is a pair of derivations of the
truncated fiber Lie algebra: the dtau-component assembles the Eisenstein
coefficients A_{m,alpha} against the delta derivations plus an adjoint
series term, and the dz-component is the adjoint action of an element
built from the section kernels h_alpha.  The same module carries the
factors of automorphy, the invariance and flatness residuals, the
restrictions to the zero section and to the degenerate fiber, and the
comparison with the cyclotomic KZ form.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import lru_cache

from .eisenstein import (bernoulli_number, bernoulli_poly_eval,
                         eisenstein_lattice_grid, eisenstein_value,
                         periodic_bernoulli)
from .jacobi import a_coeffs, section_kernels
from .lie import (Automorphism, Derivation, ad_pow, adjoint_series_action,
                  bracket, resolve_t0)
from .series import GEN_X, GEN_Y, NCSeries, gen_count, gen_point, gen_t, word_tag
from .torsion import (IDENT, Mat2, TorsionPoint, in_gamma, is_sl2, mat_mod,
                      mat_mul, moebius, torsion_group)

TWO_PI_I = 2j * math.pi

SUBGROUPS = ("full", "gamma1", "sl2z")


@dataclass(frozen=True)
class KZBContext:
    """Level, structure subgroup, truncation degree, numerical knobs.

    The subgroup selector decides which torsion letters survive: "full"
    keeps all of them, "gamma1" keeps the letters with y = 0, "sl2z"
    keeps only the zero section.  A dropped letter is set to zero, so
    torsion sums skip it and the resolved t_0 loses its term.
    """

    level: int
    subgroup: str = "full"
    degree: int = 5
    qorder: int | None = None
    cutoff: int = 400
    tol: float = 1e-7

    def __post_init__(self):
        assert self.level >= 1 and self.degree >= 1
        if self.subgroup not in SUBGROUPS:
            raise ValueError(f"unknown subgroup selector {self.subgroup!r}")

    def admitted(self) -> tuple[TorsionPoint, ...]:
        return _admitted(self.level, self.subgroup)

    def admitted_nonzero(self) -> tuple[TorsionPoint, ...]:
        return tuple(p for p in self.admitted() if not p.is_zero())

    def gen_ids(self) -> list[int]:
        return [GEN_X, GEN_Y] + [gen_t(p) for p in self.admitted_nonzero()]

    def t_elem(self, alpha: TorsionPoint) -> NCSeries:
        assert alpha.level == self.level
        return _t_elem(self, alpha)

    def in_subgroup(self, g: Mat2) -> bool:
        if not is_sl2(g):
            return False
        if self.subgroup == "sl2z":
            return True
        if self.subgroup == "gamma1":
            n = self.level
            (a, _), (c, d) = mat_mod(g, n)
            return a == 1 % n and d == 1 % n and c == 0
        return in_gamma(g, self.level)


@lru_cache(maxsize=None)
def _admitted(level: int, subgroup: str) -> tuple[TorsionPoint, ...]:
    pts = torsion_group(level)
    if subgroup == "gamma1":
        pts = [p for p in pts if p.ny == 0]
    elif subgroup == "sl2z":
        pts = [p for p in pts if p.is_zero()]
    return tuple(pts)


@lru_cache(maxsize=None)
def _t_elem(ctx: KZBContext, alpha: TorsionPoint) -> NCSeries:
    if alpha not in _admitted(ctx.level, ctx.subgroup):
        return NCSeries.zero(ctx.level, ctx.degree)
    if alpha.is_zero():
        return resolve_t0(ctx.level, ctx.degree, list(ctx.admitted_nonzero()))
    return NCSeries.generator(ctx.level, ctx.degree, gen_t(alpha))


def ctx_inner(ctx: KZBContext, v: NCSeries) -> Derivation:
    """ad(v), with images only on the letters the context admits."""
    images = {g: bracket(v, NCSeries.generator(ctx.level, ctx.degree, g))
              for g in ctx.gen_ids()}
    return Derivation(ctx.level, ctx.degree, images)


# -- the two derivation families ----------------------------------------


def _delta_t_image(ctx: KZBContext, m: int, alpha: TorsionPoint,
                   beta: TorsionPoint) -> NCSeries:
    x = NCSeries.generator(ctx.level, ctx.degree, GEN_X)
    arg = ad_pow(x, ctx.t_elem(beta + alpha), m) \
        + ad_pow(x, ctx.t_elem(beta - alpha), m) * float((-1) ** m)
    return bracket(ctx.t_elem(beta), arg)


@lru_cache(maxsize=None)
def delta_deriv(ctx: KZBContext, m: int, alpha: TorsionPoint) -> Derivation:
    """X -> 0; Y -> sum over j+k = m-1 and beta of
    (-1)^j [ad_X^j t_beta, ad_X^k t_{alpha+beta}]; t_beta -> the bracket
    [t_beta, ad_X^m t_{beta+alpha} + (-1)^m ad_X^m t_{beta-alpha}].

    Images of words longer than the truncation degree vanish, so the
    derivation is identically zero once m >= degree.
    """
    assert m >= 0 and alpha.level == ctx.level
    x = NCSeries.generator(ctx.level, ctx.degree, GEN_X)
    towers: dict[TorsionPoint, list[NCSeries]] = {}

    def tower(pt: TorsionPoint) -> list[NCSeries]:
        if pt not in towers:
            tw = [ctx.t_elem(pt)]
            for _ in range(m - 1):
                tw.append(bracket(x, tw[-1]))
            towers[pt] = tw
        return towers[pt]

    y_img = NCSeries.zero(ctx.level, ctx.degree)
    for beta in ctx.admitted():
        left, right = tower(beta), tower(alpha + beta)
        for j in range(m):
            y_img = y_img + bracket(left[j], right[m - 1 - j]) * float((-1) ** j)
    images = {GEN_Y: y_img}
    for beta in ctx.admitted_nonzero():
        images[gen_t(beta)] = _delta_t_image(ctx, m, alpha, beta)
    return Derivation(ctx.level, ctx.degree, images)


@lru_cache(maxsize=None)
def epsilon_deriv(ctx: KZBContext, m: int, alpha: TorsionPoint) -> Derivation:
    """delta_{m-2,alpha} plus the adjoint action of
    ad_X^{m-2}(t_alpha) + (-1)^m ad_X^{m-2}(t_{-alpha}); kills t_0."""
    assert m >= 2 and alpha.level == ctx.level
    x = NCSeries.generator(ctx.level, ctx.degree, GEN_X)
    v = ad_pow(x, ctx.t_elem(alpha), m - 2) \
        + ad_pow(x, ctx.t_elem(-alpha), m - 2) * float((-1) ** m)
    return delta_deriv(ctx, m - 2, alpha) + ctx_inner(ctx, v)


def t0_welldef_residual(ctx: KZBContext, m: int, alpha: TorsionPoint) -> float:
    """|delta([X,Y]) - sum_beta delta(t_beta)|, the t_0 image taken from
    the defining table (with t_0 resolved) rather than by substitution.

    All coefficients along the way are integers, so the residual is
    exactly zero when the derivation is well defined.
    """
    d = delta_deriv(ctx, m, alpha)
    x = NCSeries.generator(ctx.level, ctx.degree, GEN_X)
    y = NCSeries.generator(ctx.level, ctx.degree, GEN_Y)
    lhs = d.apply(bracket(x, y))
    rhs = NCSeries.zero(ctx.level, ctx.degree)
    for beta in ctx.admitted():
        rhs = rhs + _delta_t_image(ctx, m, alpha, beta)
    return (lhs - rhs).max_abs()


# -- the connection form -------------------------------------------------


@dataclass
class ConnectionValue:
    """A value of the connection form: dtau-component A, dz-component B.

    b_deriv is the adjoint action of b_elem; nu1_elem is the element
    whose adjoint action sits inside a_deriv.  Values on the degenerate
    fiber use coordinates (q_N, w) instead: a_deriv multiplies
    dq_N/q_N, b_elem multiplies dw, and the pole_* fields record the
    residue elements of b_elem at w = 0 and at the roots of unity
    (keyed by k for the root exp(2 pi i k/N)).
    """

    ctx: KZBContext | None
    tau: complex | None
    z: complex | None
    a_deriv: Derivation
    b_deriv: Derivation
    b_elem: NCSeries
    nu1_elem: NCSeries | None = None
    pole_origin: NCSeries | None = None
    pole_roots: dict[int, NCSeries] | None = None


def omega(ctx: KZBContext, tau: complex, z: complex) -> ConnectionValue:
    """The connection value at (tau, z).

    A = 2 pi i Y d/dX + (1/2) sum_{m,alpha} A_{m,alpha} delta_{m,alpha}
      + ad(sum_alpha g_alpha(X,z|tau) . t_alpha),
    B = ad(2 pi i Y + sum_alpha h_alpha(X,z|tau) . t_alpha).
    """
    assert tau.imag > 0
    lvl, deg = ctx.level, ctx.degree
    ygen = NCSeries.generator(lvl, deg, GEN_Y)
    a_der = Derivation(lvl, deg, {GEN_X: ygen * TWO_PI_I})
    nu1 = NCSeries.zero(lvl, deg)
    b_elem = ygen * TWO_PI_I
    for alpha in ctx.admitted():
        coeffs = a_coeffs(deg, alpha, tau, qorder=ctx.qorder)
        # terms with m >= deg multiply the zero derivation; the top one
        # is kept to make the truncation visible rather than assumed
        for m in range(deg + 1):
            c = complex(coeffs[m])
            if c != 0:
                a_der = a_der + delta_deriv(ctx, m, alpha) * (0.5 * c)
        h, g = section_kernels(alpha, z, tau, deg - 1, qorder=ctx.qorder)
        t = ctx.t_elem(alpha)
        nu1 = nu1 + adjoint_series_action([g.coeff(k) for k in range(deg)], t)
        b_elem = b_elem + adjoint_series_action([h.coeff(k) for k in range(deg)], t)
    a_der = a_der + ctx_inner(ctx, nu1)
    return ConnectionValue(ctx, tau, z, a_der, ctx_inner(ctx, b_elem),
                           b_elem, nu1)


# -- factors of automorphy -----------------------------------------------


def semidirect_act(g: Mat2, v: tuple[int, int], tau: complex,
                   z: complex) -> tuple[complex, complex]:
    """Action of (g, (m, n)) on the base: tau -> g tau,
    z -> (z + m tau + n)/(c tau + d)."""
    (_, _), (c, d) = g
    m, n = v
    return moebius(g, tau), (z + m * tau + n) / (c * tau + d)


def semidirect_compose(g1: Mat2, v1: tuple[int, int], g2: Mat2,
                       v2: tuple[int, int]) -> tuple[Mat2, tuple[int, int]]:
    """(g1, v1)(g2, v2) = (g1 g2, v2 + v1 g2), row vectors on the right."""
    (a, b), (c, d) = g2
    m, n = v1
    return mat_mul(g1, g2), (v2[0] + m * a + n * c, v2[1] + m * b + n * d)


def automorphy(ctx: KZBContext, gamma: Mat2, mn: tuple[int, int],
               tau: complex, z: complex, relabel: bool = False) -> Automorphism:
    """The factor of automorphy of (gamma, (m, n)) at (tau, z).

    v -> M(exp(nu ad_X) v) with nu = c(z + m tau + n)/(c tau + d) - m
    and M the linear factor X -> (c tau + d) X,
    Y -> (c tau + d)^{-1} Y + (c/2 pi i) X, fixing the torsion letters.
    relabel additionally sends t_beta -> t_{beta gamma} and skips the
    subgroup membership check; inside the structure subgroup the
    relabeling is trivial on admitted letters.
    """
    if relabel:
        assert is_sl2(gamma)
    elif not ctx.in_subgroup(gamma):
        raise ValueError(
            f"{gamma!r} is not in the {ctx.subgroup!r} structure subgroup")
    (_, _), (c, d) = gamma
    m, _ = mn
    lam = c * tau + d
    nu = c * semidirect_act(gamma, mn, tau, z)[1] - m
    lvl, deg = ctx.level, ctx.degree
    x = NCSeries.generator(lvl, deg, GEN_X)
    lin = {GEN_X: x * lam,
           GEN_Y: NCSeries.generator(lvl, deg, GEN_Y) * (1 / lam)
           + x * (c / TWO_PI_I)}
    for g in range(gen_count(lvl)):
        lin.setdefault(g, NCSeries.generator(lvl, deg, g))
    mlin = Automorphism(lvl, deg, lin)
    exp_ad = [nu ** k / math.factorial(k) for k in range(deg + 1)]
    images = {}
    for g in range(gen_count(lvl)):
        src = g
        if relabel and g not in (GEN_X, GEN_Y):
            src = gen_t(gen_point(g, lvl).act(gamma))
        conj = adjoint_series_action(exp_ad, NCSeries.generator(lvl, deg, src), x)
        images[g] = mlin.apply(conj)
    return Automorphism(lvl, deg, images)


def d_automorphy(ctx: KZBContext, gamma: Mat2, mn: tuple[int, int],
                 tau: complex, z: complex) -> tuple[Derivation, Derivation]:
    """(dM~) M~^{-1} in closed form, as (dtau-part, dz-part).

    Writing lam = c tau + d and w = c(md - cn - cz)/lam:
    dtau part: X -> (c/lam) X, Y -> -(c/lam) Y - (c^2/2 pi i) X + w [X,Y],
    t -> w [X, t]; dz part: Y -> c [X,Y], t -> c [X, t].
    Pure translations give zero.
    """
    if not ctx.in_subgroup(gamma):
        raise ValueError(
            f"{gamma!r} is not in the {ctx.subgroup!r} structure subgroup")
    return _d_automorphy_raw(ctx, gamma, mn, tau, z)


def _d_automorphy_raw(ctx: KZBContext, gamma: Mat2, mn: tuple[int, int],
                      tau: complex, z: complex) -> tuple[Derivation, Derivation]:
    (_, _), (c, d) = gamma
    m, n = mn
    lam = c * tau + d
    wt = c * (m * d - c * n - c * z) / lam
    lvl, deg = ctx.level, ctx.degree
    x = NCSeries.generator(lvl, deg, GEN_X)
    y = NCSeries.generator(lvl, deg, GEN_Y)
    xy = bracket(x, y)
    dt = {GEN_X: x * (c / lam),
          GEN_Y: y * (-c / lam) + x * (-c * c / TWO_PI_I) + xy * wt}
    dz = {GEN_Y: xy * c}
    for beta in ctx.admitted_nonzero():
        xt = bracket(x, NCSeries.generator(lvl, deg, gen_t(beta)))
        dt[gen_t(beta)] = xt * wt
        dz[gen_t(beta)] = xt * c
    return Derivation(lvl, deg, dt), Derivation(lvl, deg, dz)


def _conjugate(ctx: KZBContext, mt: Automorphism, mt_inv: Automorphism,
               der: Derivation) -> Derivation:
    images = {g: mt.apply(der.apply(mt_inv.images[g])) for g in ctx.gen_ids()}
    return Derivation(ctx.level, ctx.degree, images)


def invariance_residual(ctx: KZBContext, gamma: Mat2, mn: tuple[int, int],
                        tau: complex, z: complex,
                        relabel: bool = False) -> dict:
    """g*Omega - (Ad(M~) Omega - (dM~) M~^{-1}) at (tau, z).

    The pullback Jacobians are symbolic: dtau' = lam^{-2} dtau and
    dz' = ((md - cn - cz)/lam^2) dtau + lam^{-1} dz.  Both components
    of the residual must vanish.  relabel only makes sense for the
    informational sweep over gamma outside the structure subgroup.
    """
    (_, _), (c, d) = gamma
    m, n = mn
    lam = c * tau + d
    tpr, zpr = semidirect_act(gamma, mn, tau, z)
    val = omega(ctx, tpr, zpr)
    jac = (m * d - c * n - c * z) / lam ** 2
    gstar_tau = val.a_deriv * (1 / lam ** 2) + val.b_deriv * jac
    gstar_z = val.b_deriv * (1 / lam)
    base = omega(ctx, tau, z)
    mt = automorphy(ctx, gamma, mn, tau, z, relabel=relabel)
    mt_inv = mt.inverse()
    conj_a = _conjugate(ctx, mt, mt_inv, base.a_deriv)
    conj_b = _conjugate(ctx, mt, mt_inv, base.b_deriv)
    # relabeling is constant in (tau, z), so the same closed form applies
    dm_tau, dm_z = _d_automorphy_raw(ctx, gamma, mn, tau, z)
    res_tau = gstar_tau - conj_a + dm_tau
    res_z = gstar_z - conj_b + dm_z
    rt, rz = res_tau.max_abs(), res_z.max_abs()
    scale = max(conj_a.max_abs(), conj_b.max_abs(), 1.0)
    return {"residual": max(rt, rz), "residual_tau": rt, "residual_z": rz,
            "scale": scale, "passed": bool(max(rt, rz) < ctx.tol),
            "res_tau": res_tau, "res_z": res_z}


def curvature_residual(ctx: KZBContext, tau: complex, z: complex) -> dict:
    """Flatness residual dB/dtau - dA/dz + [A, B] at (tau, z).

    The first two terms collapse to the adjoint action of
    sum_alpha (d_tau h_alpha - d_z g_alpha) . t_alpha, which the heat
    equation kills coefficientwise; the bracket term must vanish on its
    own.  Both sub-residuals are reported separately.
    """
    lvl, deg = ctx.level, ctx.degree
    exact_elem = NCSeries.zero(lvl, deg)
    for alpha in ctx.admitted():
        h_t, _ = section_kernels(alpha, z, tau, deg - 1, qorder=ctx.qorder, dtau=1)
        _, g_z = section_kernels(alpha, z, tau, deg - 1, qorder=ctx.qorder, dz=1)
        diff = [h_t.coeff(k) - g_z.coeff(k) for k in range(deg)]
        exact_elem = exact_elem + adjoint_series_action(diff, ctx.t_elem(alpha))
    exact = ctx_inner(ctx, exact_elem)
    val = omega(ctx, tau, z)
    wedge = val.a_deriv.dbracket(val.b_deriv)
    total = exact + wedge
    re, rw, rt = exact.max_abs(), wedge.max_abs(), total.max_abs()
    scale = max(val.a_deriv.max_abs(), val.b_deriv.max_abs(), 1.0)
    return {"residual": rt, "residual_exact": re, "residual_wedge": rw,
            "scale": scale,
            "passed": bool(max(rt, re, rw) < ctx.tol), "total": total}


# -- restrictions and residues -------------------------------------------


def restrict_zero_section(ctx: KZBContext, tau: complex) \
        -> tuple[Derivation, NCSeries]:
    """dtau-part of the connection restricted to first order at z = 0,
    and the residue t_0 of the dz/z term.

    The delta-sum and the z -> 0 limit of the adjoint term combine into
    2 pi i Y d/dX - (1/2) sum_{m >= 2, alpha} (m-1)/(2 pi i)^{m-1}
    G_{m,alpha}(tau) epsilon_{m,alpha}.
    """
    assert tau.imag > 0
    lvl, deg = ctx.level, ctx.degree
    y = NCSeries.generator(lvl, deg, GEN_Y)
    out = Derivation(lvl, deg, {GEN_X: y * TWO_PI_I})
    grids = {m: eisenstein_lattice_grid(m, lvl, tau, cutoff=ctx.cutoff)
             for m in range(3, deg + 2)}
    for alpha in ctx.admitted():
        for m in range(2, deg + 2):
            if m == 2:
                gval = eisenstein_value(2, alpha, tau, cutoff=ctx.cutoff)
            else:
                gval = complex(grids[m][alpha.nx, alpha.ny])
            coef = -0.5 * (m - 1) / TWO_PI_I ** (m - 1) * gval
            out = out + epsilon_deriv(ctx, m, alpha) * coef
    return out, ctx.t_elem(TorsionPoint(0, 0, lvl))


def residue_torsion(ctx: KZBContext, alpha: TorsionPoint) -> NCSeries:
    """Residue e^{-y_alpha X} . t_alpha of the dz-component along the
    torsion section z = lift(alpha)."""
    assert alpha in ctx.admitted(), "letter not admitted by the context"
    coeffs = [float((-alpha.y) ** k) / math.factorial(k)
              for k in range(ctx.degree)]
    return adjoint_series_action(coeffs, ctx.t_elem(alpha))


def residue_cusp(ctx: KZBContext, gamma: Mat2 = IDENT,
                 half: bool = True) -> Derivation:
    """Residue of the connection along the degenerate fiber at the cusp
    reached by gamma, in dq_N/q_N units:
    N (Y d/dX + (1/2) sum (-1)^m B_{m+2}([y]) / (m! (m+2))
    epsilon_{m+2, alpha gamma^{-1}}), the sum reindexed over admitted
    letters so each coefficient reads off the letter's image at the
    cusp.  half toggles the 1/2 normalization; the width-one reading
    divides the whole derivation by N.
    """
    assert is_sl2(gamma)
    lvl, deg = ctx.level, ctx.degree
    y = NCSeries.generator(lvl, deg, GEN_Y)
    out = Derivation(lvl, deg, {GEN_X: y})
    w = 0.5 if half else 1.0
    for beta in ctx.admitted():
        yb = beta.act(gamma).y
        for m in range(deg):
            bval = periodic_bernoulli(m + 2, yb)
            if bval == 0:
                continue
            coef = w * (-1) ** m * float(bval) / (math.factorial(m) * (m + 2))
            out = out + epsilon_deriv(ctx, m + 2, beta) * coef
    return out * float(lvl)


def _fiber_origin_element(ctx: KZBContext) -> NCSeries:
    """Coefficient of dw/w on the degenerate fiber.

    Summing the limiting kernels e^{-y X}/(e^X - 1) leaves 1/X poles
    whose total is (1/X) . [X, Y]; reading that as Y regularizes the
    sum.  Computed by multiplying out e^{-y x} x/(e^x - 1) termwise.
    """
    lvl, deg = ctx.level, ctx.degree
    out = NCSeries.generator(lvl, deg, GEN_Y)
    bern = [float(bernoulli_number(k)) / math.factorial(k)
            for k in range(deg + 1)]
    for alpha in ctx.admitted():
        t = ctx.t_elem(alpha)
        expc = [float((-alpha.y) ** i) / math.factorial(i)
                for i in range(deg + 1)]
        conv = [sum(expc[i] * bern[k - i] for i in range(k + 1))
                for k in range(deg + 1)]
        out = out + adjoint_series_action(conv[1:], t)
        if alpha.ny != 0:
            out = out + adjoint_series_action(expc, t)
    return out


def restrict_singular_fiber(ctx: KZBContext, w: complex) -> ConnectionValue:
    """Connection value on the identity component of the degenerate
    fiber in coordinates (q_N, w): a_deriv multiplies dq_N/q_N and
    b_elem multiplies dw.

    b_elem has simple poles at w = 0 (pole_origin) and at the admitted
    roots of unity (pole_roots[k] under w = exp(2 pi i k/N)).
    """
    lvl, deg = ctx.level, ctx.degree
    if abs(w) < 1e-9:
        raise ValueError("w = 0 lies on the divisor of the degenerate fiber")
    roots: dict[int, NCSeries] = {}
    for beta in ctx.admitted():
        if beta.ny == 0:
            rt = cmath.exp(TWO_PI_I * beta.nx / lvl)
            if abs(w - rt) < 1e-9:
                raise ValueError(f"w within 1e-9 of the divisor point {rt!r}")
            roots[beta.nx] = ctx.t_elem(beta)
    origin = _fiber_origin_element(ctx)
    b_elem = origin * (1 / w)
    for k, t in roots.items():
        b_elem = b_elem + t * (1 / (w - cmath.exp(TWO_PI_I * k / lvl)))
    return ConnectionValue(ctx, None, w, residue_cusp(ctx, IDENT, half=True),
                           ctx_inner(ctx, b_elem), b_elem, None, origin, roots)


# -- the cyclotomic KZ side ----------------------------------------------


def kz_letter(level: int, degree: int, k: int | None) -> NCSeries:
    """Free letters of the cyclotomic KZ algebra, reusing the level-N
    alphabet: k = None is the letter at w = 0, an integer k the letter
    at the root exp(2 pi i k/N)."""
    gid = 0 if k is None else 1 + (k % level)
    return NCSeries.generator(level, degree, gid)


def kz_form(level: int, w: complex, degree: int = 5) -> ConnectionValue:
    """Value at w of the cyclotomic KZ form on the free letters.

    The classical display carries minus signs, so b_elem is
    -e_0/w - sum_k e_k/(w - zeta^k); pole_origin and pole_roots hold
    the letters themselves, the residues in the covariant-derivative
    reading, which is what the degeneration comparison consumes.
    """
    if abs(w) < 1e-9:
        raise ValueError("w = 0 lies on the divisor of the KZ form")
    b = kz_letter(level, degree, None) * (-1 / w)
    roots = {}
    for k in range(level):
        rt = cmath.exp(TWO_PI_I * k / level)
        if abs(w - rt) < 1e-9:
            raise ValueError(f"w within 1e-9 of the divisor point {rt!r}")
        b = b + kz_letter(level, degree, k) * (-1 / (w - rt))
        roots[k] = kz_letter(level, degree, k)
    ids = list(range(level + 1))
    b_der = Derivation(level, degree,
                       {g: bracket(b, NCSeries.generator(level, degree, g))
                        for g in ids})
    return ConnectionValue(None, None, w, Derivation.zero(level, degree),
                           b_der, b, None, kz_letter(level, degree, None),
                           roots)


def kz_substitution(ctx: KZBContext) -> dict[int, NCSeries]:
    """Images of the KZ letters inside the level algebra.

    The letter at w = 0 maps to Y plus Bernoulli-polynomial correction
    terms; with only the y = 0 letters kept this collapses to the
    shortcut X/(e^X - 1) . Y.  The letter at exp(2 pi i k/N) maps to
    the torsion letter at (k, 0).
    """
    lvl, deg = ctx.level, ctx.degree
    if ctx.subgroup == "gamma1":
        bern = [float(bernoulli_number(k)) / math.factorial(k)
                for k in range(deg + 1)]
        e0 = adjoint_series_action(bern, NCSeries.generator(lvl, deg, GEN_Y))
    else:
        e0 = NCSeries.generator(lvl, deg, GEN_Y)
        for alpha in ctx.admitted():
            t = ctx.t_elem(alpha)
            reg = [float(bernoulli_poly_eval(j + 1, -alpha.y))
                   / math.factorial(j + 1) for j in range(deg)]
            e0 = e0 + adjoint_series_action(reg, t)
            if alpha.ny != 0:
                expc = [float((-alpha.y) ** i) / math.factorial(i)
                        for i in range(deg + 1)]
                e0 = e0 + adjoint_series_action(expc, t)
    images = {0: e0}
    for k in range(lvl):
        images[1 + k] = ctx.t_elem(TorsionPoint(k, 0, lvl))
    return images


def substitute(images: dict[int, NCSeries], s: NCSeries) -> NCSeries:
    """Apply the algebra homomorphism given by letter images."""
    sample = next(iter(images.values()))
    out = NCSeries.zero(sample.level, sample.degree)
    one = NCSeries.scalar(sample.level, sample.degree, 1.0)
    for word, c in s.terms.items():
        acc = one
        for g in word:
            acc = acc * images[g]
            if not acc.terms:
                break
        out = out + acc * c
    return out


def degeneration_check(ctx: KZBContext) -> dict:
    """Letterwise comparison of the substituted KZ residues against the
    q_N -> 0 restriction of the connection, as formal series.

    Pure algebra: the tolerance is fixed at 1e-12 independent of the
    context's numerical tolerance.
    """
    lvl, deg = ctx.level, ctx.degree
    sub = kz_substitution(ctx)
    fiber = restrict_singular_fiber(ctx, 2.0 + 0.5j)
    pairs = {"w=0": (sub[0], fiber.pole_origin)}
    for k in range(lvl):
        fib = fiber.pole_roots.get(k, NCSeries.zero(lvl, deg))
        pairs[f"w=zeta^{k}"] = (sub[1 + k], fib)
    per_pole = {}
    worst, worst_word = 0.0, None
    for name, (lhs, rhs) in pairs.items():
        diff = lhs - rhs
        r = diff.max_abs()
        per_pole[name] = r
        if r > worst:
            worst = r
            worst_word = max(diff.terms, key=lambda wd: abs(diff.terms[wd]))
    out = {"per_pole": per_pole, "residual": worst,
           "passed": bool(worst < 1e-12)}
    if worst_word is not None and worst >= 1e-12:
        out["offending_word"] = word_tag(worst_word, lvl)
    return out
