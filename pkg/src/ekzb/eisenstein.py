"""Eisenstein series of level N: lattice sums, q-expansions, cusp values.

Three evaluation routes are kept deliberately independent so they can
oracle each other:

  * eisenstein_lattice: the defining lattice sum.  Plain mode is the
    partial sum over the square 0 < max(|k|,|l|) <= K with its
    O(K^(2-m)) error; accelerated mode sums rows exactly (Euler-
    Maclaurin tails per residue class, which is the row-by-row ordering,
    so it is also valid at weight 2).
  * eisenstein_qexp / eisenstein_qexp_torsion: Fourier coefficients in
    closed form (signed divisor sums), in q for the root-of-unity form
    and in q_N for a general torsion point.
  * eisenstein_cusp: the constant term as a Bernoulli polynomial value.
"""

from __future__ import annotations

import cmath
import math
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.special import zeta as _hurwitz_zeta

from .qcache import QSeries
from .torsion import TorsionPoint

TWO_PI_I = 2j * math.pi


# -- Bernoulli ----------------------------------------------------------


@lru_cache(maxsize=None)
def bernoulli_number(m: int) -> Fraction:
    assert m >= 0
    if m == 0:
        return Fraction(1)
    # sum_{j<=m} C(m+1, j) B_j = 0
    acc = Fraction(0)
    for j in range(m):
        acc += math.comb(m + 1, j) * bernoulli_number(j)
    return -acc / (m + 1)


def bernoulli_poly(m: int) -> list[Fraction]:
    """Ascending coefficients of B_m(x), exact rationals."""
    assert m >= 0
    return [math.comb(m, k) * bernoulli_number(m - k) for k in range(m + 1)]


def bernoulli_poly_eval(m: int, x):
    acc = 0 if isinstance(x, Fraction) else 0.0
    for c in reversed(bernoulli_poly(m)):
        acc = acc * x + (c if isinstance(x, Fraction) else float(c))
    return acc


def periodic_bernoulli(m: int, y: Fraction) -> Fraction:
    """B_m([y]) with [y] the representative in [0, 1)."""
    frac = y - Fraction(math.floor(y))
    return bernoulli_poly_eval(m, frac)


# -- zeta values --------------------------------------------------------


def _em_tail_up(w, a, m: int):
    """sum_{s >= a} (w + s)^(-m), Euler-Maclaurin with two corrections.

    Valid for integer m >= 2 when w + a - 1/2 stays away from the
    negative real axis along the summation ray (Im w fixed sign, or w
    real with w + a > 0).  Vectorized over w and a.
    """
    t = np.asarray(w, dtype=complex) + np.asarray(a) - 0.5
    rise = m * (m + 1) * (m + 2)
    return (t ** (1 - m) / (m - 1)
            - (m / 24.0) * t ** (-m - 1)
            + (7.0 * rise / 5760.0) * t ** (-m - 3)
            - (31.0 * rise * (m + 3) * (m + 4) / 967680.0) * t ** (-m - 5))


def zeta_value(m: int) -> float:
    """Riemann zeta at an integer m >= 2, direct series plus tail."""
    assert m >= 2
    head = sum(n ** (-float(m)) for n in range(1, 41))
    return head + float(_em_tail_up(0.0, 41, m).real)


def hurwitz_value(m: int, x: float) -> float:
    assert m >= 2 and x > 0
    return float(_hurwitz_zeta(m, x))


# -- q-expansions -------------------------------------------------------


def _divisors(n: int) -> list[int]:
    out = []
    for d in range(1, int(math.isqrt(n)) + 1):
        if n % d == 0:
            out.append(d)
            if d * d != n:
                out.append(n // d)
    return out


def _snap_root_of_unity(zeta: complex, level: int) -> int:
    """Return k with zeta = e^(2 pi i k / level), or raise ValueError."""
    ang = cmath.phase(complex(zeta)) / (2 * math.pi)
    k = round(ang * level) % level
    ref = cmath.exp(TWO_PI_I * k / level)
    if abs(complex(zeta) - ref) > 1e-8:
        raise ValueError(f"{zeta!r} is not a level-{level} root of unity")
    return k


def eisenstein_qexp(m: int, zeta: complex, level: int, qorder: int) -> QSeries:
    """Weight-m series attached to a root of unity (sections with y = 0).

    Returned in the integer nome q = e^(2 pi i tau).  Coefficients:
    a_0 = (1 + (-1)^m) zeta(m) and, for n >= 1,
    a_n = (-2 pi i)^m/(m-1)! * sum over signed divisors d of n of
    sgn(d) d^(m-1) zeta^(n/d).
    """
    assert m >= 2 and qorder >= 0
    k0 = _snap_root_of_unity(zeta, level)
    coeffs = np.zeros(qorder + 1, dtype=complex)
    coeffs[0] = (1 + (-1) ** m) * zeta_value(m)
    front = TWO_PI_I ** m * (-1) ** m / math.factorial(m - 1)
    for n in range(1, qorder + 1):
        s = 0j
        for d in _divisors(n):
            k = n // d
            zk = cmath.exp(TWO_PI_I * ((k * k0) % level) / level)
            s += d ** (m - 1) * (zk + (-1) ** m / zk)
        coeffs[n] = front * s
    return QSeries(1, coeffs)


def eisenstein_qexp_normalized(m: int, zeta: complex, level: int,
                               qorder: int) -> QSeries:
    """Rescaled so the q^1 coefficient is 1 (and a_0 a Bernoulli value)."""
    z = complex(zeta)
    denom = z.conjugate() + (-1) ** m * z
    if abs(denom) < 1e-12:
        raise ValueError("normalization factor vanishes for this root of unity")
    scale = math.factorial(m - 1) / (TWO_PI_I ** m) / denom
    return eisenstein_qexp(m, zeta, level, qorder) * scale


def eisenstein_qexp_torsion(m: int, alpha: TorsionPoint, qorder: int) -> QSeries:
    """Weight-m series of a general torsion point, in the nome q_N.

    Row-by-row (Lipschitz) expansion of the lattice sum: the k = 0 row
    gives the constant term through Hurwitz zeta values, and each k != 0
    row contributes to q_N^(dk) for d in the residue class of N y mod N.
    """
    assert m >= 2 and qorder >= 0
    n_lev = alpha.level
    r = alpha.ny
    coeffs = np.zeros(qorder + 1, dtype=complex)
    a0 = 0j
    for j in range(1, n_lev + 1):
        ph = cmath.exp(-TWO_PI_I * j * r / n_lev)
        a0 += (ph + (-1) ** m / ph) * hurwitz_value(m, j / n_lev)
    coeffs[0] = a0 / n_lev ** m
    front = (TWO_PI_I * (-1)) ** m / (math.factorial(m - 1) * n_lev ** (m - 1))
    for n in range(1, qorder + 1):
        s = 0j
        for k in _divisors(n):
            d = n // k
            if d % n_lev == r % n_lev:
                s += cmath.exp(TWO_PI_I * k * alpha.nx / n_lev) * d ** (m - 1)
            if d % n_lev == (-r) % n_lev:
                s += (-1) ** m * cmath.exp(-TWO_PI_I * k * alpha.nx / n_lev) \
                    * d ** (m - 1)
        coeffs[n] = front * s
    return QSeries(n_lev, coeffs)


def eisenstein_cusp(m: int, alpha: TorsionPoint) -> complex:
    """Value at the infinite cusp: -(-2 pi i)^m B_m([y]) / m!."""
    assert m >= 2
    b = periodic_bernoulli(m, alpha.y)
    return -((-TWO_PI_I) ** m) * float(b) / math.factorial(m)


def auto_qorder(level: int, tau: complex, tol: float, minimum: int = 8) -> int:
    aq = abs(cmath.exp(TWO_PI_I * tau / level))
    assert aq < 1
    q = math.ceil(math.log(tol * (1 - aq)) / math.log(aq))
    return max(minimum, q + 8)


# -- lattice sums -------------------------------------------------------


def plain_error_estimate(m: int, cutoff: int) -> float:
    """Order of the tail dropped by the square-cutoff partial sum."""
    assert m >= 3
    return 8.0 * cutoff ** (2 - m)


def _lattice_core(m: int, tau: complex, cutoff: int) -> np.ndarray:
    ks = np.arange(-cutoff, cutoff + 1)
    kl = ks[:, None] * tau + ks[None, :]
    kl[cutoff, cutoff] = 1.0  # placeholder, zeroed below
    mat = kl ** (-m)
    mat[cutoff, cutoff] = 0.0
    return mat


def eisenstein_lattice_grid(m: int, level: int, tau: complex,
                            cutoff: int = 400, accel: bool = True) -> np.ndarray:
    """All torsion points at once; entry [nx, ny] is G at (nx/N, ny/N).

    The phase over the lattice separates into row and column characters,
    so the whole grid is two small matrix products against the kernel.
    """
    assert tau.imag > 0
    if accel:
        assert m >= 2
    else:
        assert m >= 3, "square-cutoff partial sum needs absolute convergence"
    mat = _lattice_core(m, tau, cutoff)
    ks = np.arange(-cutoff, cutoff + 1)
    ps = np.arange(level)
    u = np.exp(TWO_PI_I * np.outer(ks, ps) / level)        # rows: e^(2pi i k x)
    v = np.exp(-TWO_PI_I * np.outer(ks, ps) / level)       # cols: e^(-2pi i l y)
    grid = u.T @ mat @ v
    if not accel:
        return grid
    # exact row tails, grouped by residue class of l mod level
    js = np.arange(level)
    w = (ks[:, None] * tau + js[None, :]) / level          # (2K+1, N)
    s_up = (cutoff - js) // level + 1
    s_dn = -((cutoff + js) // level) - 1
    tail = (_em_tail_up(w, s_up[None, :], m)
            + (-1) ** m * _em_tail_up(-w, -s_dn[None, :], m)) / level ** m
    wy = np.exp(-TWO_PI_I * np.outer(js, ps) / level)
    return grid + u.T @ tail @ wy


def eisenstein_lattice(m: int, alpha: TorsionPoint, tau: complex,
                       cutoff: int = 400, accel: bool = True) -> complex:
    grid = eisenstein_lattice_grid(m, alpha.level, tau, cutoff, accel)
    return complex(grid[alpha.nx, alpha.ny])


def eisenstein_value(m: int, alpha: TorsionPoint, tau: complex,
                     cutoff: int = 400, tol: float = 1e-9) -> complex:
    """Primary evaluator: weight 2 goes through the q-expansion (the
    square-cutoff sum is only conditionally convergent there), higher
    weights through the accelerated lattice."""
    if m == 2:
        q = eisenstein_qexp_torsion(m, alpha, auto_qorder(alpha.level, tau, tol))
        return q.eval(tau)[0]
    return eisenstein_lattice(m, alpha, tau, cutoff=cutoff, accel=True)
