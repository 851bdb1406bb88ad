"""The meromorphic Jacobi form F, its x-Laurent expansions, and the
section coefficients h_alpha, g_alpha, A_{m,alpha}.

Ground truth is the Fourier expansion

    F(x,z,tau) = pi i (coth(x/2) + coth(pi i z))
                 - 4 pi i sum_{n>=1} sum_{d|n} sinh(dx + 2 pi i n z / d) q^n

with q = e^{2 pi i tau}; every Laurent coefficient and every tau/z
partial derivative is computed term by term in closed form from it.
The theta-quotient evaluator is the independent cross-check.

Convergence of the Fourier sum needs 0 <= Im z < Im tau, so arguments
are first reduced into that band with the elliptic property
F(x, z + m tau + n, tau) = e^{-mx} F(x,z,tau); the reduction's tau
dependence is carried through the chain rule for derivatives.
"""

from __future__ import annotations

import cmath
import math

import numpy as np

from .eisenstein import _divisors, bernoulli_number
from .torsion import TorsionPoint

TWO_PI_I = 2j * math.pi


class XLaurent:
    """Finite Laurent expansion in x with complex coefficients."""

    __slots__ = ("min_order", "coeffs")

    def __init__(self, min_order: int, coeffs):
        self.min_order = min_order
        self.coeffs = np.asarray(coeffs, dtype=complex)
        assert self.coeffs.ndim == 1 and len(self.coeffs) >= 1

    @property
    def max_order(self) -> int:
        return self.min_order + len(self.coeffs) - 1

    def coeff(self, k: int) -> complex:
        if self.min_order <= k <= self.max_order:
            return complex(self.coeffs[k - self.min_order])
        return 0j

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.coeffs)))

    def eval(self, x: complex) -> complex:
        acc = 0j
        for c in self.coeffs[::-1]:
            acc = acc * x + c
        return acc * x ** self.min_order

    def derivative_x(self) -> "XLaurent":
        ks = np.arange(self.min_order, self.max_order + 1)
        out = self.coeffs * ks
        if self.min_order == 0:
            return XLaurent(0, out[1:] if len(out) > 1 else [0j])
        return XLaurent(self.min_order - 1, out)

    def scale_x(self, lam: complex) -> "XLaurent":
        """Substitute x -> lam x."""
        ks = np.arange(self.min_order, self.max_order + 1)
        return XLaurent(self.min_order, self.coeffs * np.power(complex(lam), ks))

    def mul_poly(self, pol) -> "XLaurent":
        """Multiply by a polynomial in x (ascending coefficients from x^0),
        truncating to this expansion's order window."""
        pol = np.asarray(pol, dtype=complex)
        out = np.zeros_like(self.coeffs)
        for j, p in enumerate(pol):
            if p == 0:
                continue
            if j == 0:
                out += p * self.coeffs
            elif j < len(out):
                out[j:] += p * self.coeffs[:-j]
        return XLaurent(self.min_order, out)

    def truncate(self, kmax: int) -> "XLaurent":
        assert kmax >= self.min_order
        n = min(len(self.coeffs), kmax - self.min_order + 1)
        return XLaurent(self.min_order, self.coeffs[:n])

    def drop_pole(self) -> "XLaurent":
        assert self.min_order == -1
        return XLaurent(0, self.coeffs[1:])

    def _align(self, other: "XLaurent"):
        lo = min(self.min_order, other.min_order)
        hi = max(self.max_order, other.max_order)
        a = np.zeros(hi - lo + 1, dtype=complex)
        b = np.zeros(hi - lo + 1, dtype=complex)
        a[self.min_order - lo: self.max_order - lo + 1] = self.coeffs
        b[other.min_order - lo: other.max_order - lo + 1] = other.coeffs
        return lo, a, b

    def __add__(self, other: "XLaurent") -> "XLaurent":
        lo, a, b = self._align(other)
        return XLaurent(lo, a + b)

    def __sub__(self, other: "XLaurent") -> "XLaurent":
        lo, a, b = self._align(other)
        return XLaurent(lo, a - b)

    def __mul__(self, c) -> "XLaurent":
        return XLaurent(self.min_order, self.coeffs * complex(c))

    __rmul__ = __mul__


# -- theta route --------------------------------------------------------


def theta(v: complex, tau: complex) -> complex:
    """Sum over n of (-1)^n e^{i pi tau (n+1/2)^2} e^{v(n+1/2)}."""
    assert tau.imag > 0
    acc = 0j
    peak = 0.0
    for n in range(0, 220):
        mates = (cmath.exp(1j * math.pi * tau * (n + 0.5) ** 2 + v * (n + 0.5)),
                 cmath.exp(1j * math.pi * tau * (n + 0.5) ** 2 - v * (n + 0.5)))
        term = (-1) ** n * (mates[0] - mates[1])   # the -n-1 partner
        acc += term
        peak = max(peak, abs(mates[0]), abs(mates[1]))
        if abs(mates[0]) + abs(mates[1]) < 1e-18 * max(peak, 1e-300) and n > 2:
            return acc
    raise ValueError(f"theta series did not converge at v={v!r}, tau={tau!r}")


def theta_prime0(tau: complex) -> complex:
    assert tau.imag > 0
    acc = 0j
    for n in range(0, 220):
        term = (-1) ** n * (2 * n + 1) * cmath.exp(1j * math.pi * tau * (n + 0.5) ** 2)
        acc += term
        if abs(term) < 1e-18 * max(abs(acc), 1e-300) and n > 2:
            return acc
    raise ValueError(f"theta derivative did not converge at tau={tau!r}")


def lattice_distance(c: complex, tau: complex) -> tuple[float, complex]:
    """Distance from c to the lattice Z + tau Z, with the nearest point."""
    b = c.imag / tau.imag
    a = c.real - b * tau.real
    best, arg = math.inf, 0j
    for dn in (-1, 0, 1):
        for dm in (-1, 0, 1):
            p = (round(a) + dn) + (round(b) + dm) * tau
            d = abs(c - p)
            if d < best:
                best, arg = d, p
    return best, arg


def kronecker_point(x: complex, z: complex, tau: complex,
                    pole_tol: float = 1e-9) -> complex:
    """F as a theta quotient: 2 pi i th'(0) th(x + 2 pi i z)/(th(x) th(2 pi i z))."""
    assert tau.imag > 0
    dx, px = lattice_distance(x / TWO_PI_I, tau)
    if dx < pole_tol:
        raise ValueError(f"x = {x!r} within {dx:.2e} of the pole divisor x = 2 pi i ({px!r})")
    dz, pz = lattice_distance(z, tau)
    if dz < pole_tol:
        raise ValueError(f"z = {z!r} within {dz:.2e} of the pole divisor z = {pz!r}")
    return TWO_PI_I * theta_prime0(tau) * theta(x + TWO_PI_I * z, tau) \
        / (theta(x, tau) * theta(TWO_PI_I * z, tau))


# -- Fourier route ------------------------------------------------------


def _auto_qorder_band(order: int, im_tau: float, band: float,
                      tail_tol: float) -> int:
    """Smallest Q whose next term bound drops below tail_tol.

    Term n is bounded by 8 pi n^(order+1)/order! |q_eff|^n with
    |q_eff| = e^{-2 pi Im tau (1 - band)}."""
    lq = -2 * math.pi * im_tau * (1.0 - band)
    assert lq < 0
    fact = math.lgamma(order + 1)
    bound = lambda n: math.log(8 * math.pi) + (order + 1) * math.log(n) - fact + n * lq
    peak = max(1, math.ceil((order + 1) / -lq))
    n = peak
    while n < 6000:
        if bound(n + 1) < math.log(tail_tol):
            return max(n, 4)
        n += 1
    raise ValueError(
        f"q-expansion will not reach tolerance {tail_tol:g}: z is too close "
        f"to the upper edge of the fundamental band (band = {band:.4f})")


def _fourier_core(zr: complex, tau: complex, order: int, qorder: int,
                  dz: int, dtau: int) -> np.ndarray:
    """x-Laurent coefficients (orders -1..order) of the chosen partial of F
    at a band-reduced argument.  Index k+1 holds the x^k coefficient."""
    out = np.zeros(order + 2, dtype=complex)
    if dz == 0 and dtau == 0:
        out[0] = TWO_PI_I
        j = 1
        while 2 * j - 1 <= order:
            out[2 * j] += TWO_PI_I * float(bernoulli_number(2 * j)) / math.factorial(2 * j)
            j += 1
        out[1] += 1j * math.pi / cmath.tanh(1j * math.pi * zr)
    elif dz == 1:
        out[1] += math.pi ** 2 / cmath.sinh(1j * math.pi * zr) ** 2
    fact = np.array([math.factorial(k) for k in range(order + 1)],
                    dtype=float)
    ks = np.arange(order + 1)
    for n in range(1, qorder + 1):
        wn = -4j * math.pi
        if dtau:
            wn *= TWO_PI_I * n
        lt = TWO_PI_I * tau * n   # log of q^n, folded in so nothing overflows
        for d in _divisors(n):
            c = TWO_PI_I * n * zr / d
            ep, em = cmath.exp(c + lt), cmath.exp(-c + lt)
            sh, ch = (ep - em) / 2, (ep + em) / 2
            pows = np.power(float(d), ks) / fact
            if dz:
                even_val, odd_val = ch, sh
                scale = wn * TWO_PI_I * n / d
            else:
                even_val, odd_val = sh, ch
                scale = wn
            vals = np.where(ks % 2 == 0, even_val, odd_val)
            out[1:] += scale * pows * vals
    return out


def kronecker_laurent(z: complex, tau: complex, order: int,
                      qorder: int | None = None, dz: int = 0, dtau: int = 0,
                      tail_tol: float = 1e-12,
                      pole_tol: float = 1e-9) -> XLaurent:
    """x-Laurent expansion of F (or of dF/dz or dF/dtau) at (z, tau)."""
    assert tau.imag > 0 and order >= 0
    assert dz in (0, 1) and dtau in (0, 1) and dz + dtau <= 1
    b = z.imag / tau.imag
    mm = math.floor(b)
    nn = math.floor(z.real - b * tau.real)
    zr = z - mm * tau - nn
    dist, near = lattice_distance(zr, tau)
    if dist < pole_tol:
        raise ValueError(
            f"z = {z!r} within {dist:.2e} of the divisor z = {near + mm * tau + nn!r}")
    band = zr.imag / tau.imag
    if qorder is None:
        qorder = _auto_qorder_band(order + 1, tau.imag, band, tail_tol)
    if dtau:
        arr = _fourier_core(zr, tau, order, qorder, 0, 1)
        if mm:
            arr = arr - mm * _fourier_core(zr, tau, order, qorder, 1, 0)
    else:
        arr = _fourier_core(zr, tau, order, qorder, dz, 0)
    out = XLaurent(-1, arr)
    if mm:
        pol = [(-mm) ** j / math.factorial(j) for j in range(order + 2)]
        out = out.mul_poly(pol)
    return out


# -- section coefficients -----------------------------------------------


def _route_qorder(order: int, im_tau: float, band: float,
                  tail_tol: float) -> int | None:
    """Estimated q-sum length for the direct Fourier route, None when the
    tolerance is out of reach.  Only proximity to the upper band edge
    (band -> 1) starves the sum; the lower edge costs nothing."""
    try:
        return _auto_qorder_band(order, im_tau, band % 1.0, tail_tol)
    except ValueError:
        return None


def _section_kernels_via_s(alpha: TorsionPoint, z: complex, tau: complex,
                           order: int, tail_tol: float,
                           pole_tol: float) -> tuple[XLaurent, XLaurent]:
    """h_alpha reconstructed through the S transformation law.

    Near a band edge the w-Fourier sum stalls even far from the divisor
    (the obstruction is |q| < |e^{2 pi i w}| < 1, not pole distance), but
    the S image of such a point sits near the center of its band.
    Inverting h_{alpha'}(x, z/tau | -1/tau) = tau h_alpha(tau x, z | tau)
    e^{zx} + 2 pi i (e^{zx} - 1)/x with alpha' = alpha S^{-1} gives

      h_alpha(x) = (1/tau) e^{-mu x} h_{alpha'}(x/tau) - 2 pi i
                   (1 - e^{-mu x})/x,   mu = z/tau.
    """
    mu = z / tau
    apr = alpha.act(((0, 1), (-1, 0)))
    deep = order + 7
    hp, _ = section_kernels(apr, z / tau, -1.0 / tau, deep,
                            tail_tol=tail_tol, pole_tol=pole_tol)
    emu = [(-mu) ** j / math.factorial(j) for j in range(deep + 2)]
    out = ((1.0 / tau) * hp.scale_x(1.0 / tau)).mul_poly(emu)
    tail = XLaurent(0, [-TWO_PI_I * (-1) ** j * mu ** (j + 1)
                        / math.factorial(j + 1) for j in range(deep + 1)])
    out = out + tail
    return out.truncate(order), out.derivative_x().truncate(order)


def section_kernels(alpha: TorsionPoint, z: complex, tau: complex, order: int,
                    qorder: int | None = None, dz: int = 0, dtau: int = 0,
                    tail_tol: float = 1e-12,
                    pole_tol: float = 1e-9) -> tuple[XLaurent, XLaurent]:
    """(h_alpha, g_alpha) x-expansions at (z, tau), both to x^order.

    h_alpha = e^{-y x} F(x, z - lift, tau) - 2 pi i / x with the pole
    cancelled exactly; g_alpha is its x-derivative.  dz/dtau select the
    corresponding partial derivative of the pair; the tau-dependence of
    the lift contributes the -y dF/dz chain-rule term.
    """
    y = float(alpha.y)
    w = z - (float(alpha.x) + y * tau)
    if dz == 0 and dtau == 0 and qorder is None:
        cost = _route_qorder(order + 3, tau.imag, w.imag / tau.imag, tail_tol)
        if cost is None or cost > 300:
            tpr = -1.0 / tau
            apr = alpha.act(((0, 1), (-1, 0)))
            wpr = z / tau - (float(apr.x) + float(apr.y) * tpr)
            costp = _route_qorder(order + 10, tpr.imag,
                                  wpr.imag / tpr.imag, tail_tol)
            if costp is not None and (cost is None or costp < cost):
                return _section_kernels_via_s(alpha, z, tau, order,
                                              tail_tol, pole_tol)
    deep = order + 2
    if dtau:
        arr = kronecker_laurent(w, tau, deep, qorder, dtau=1,
                                tail_tol=tail_tol, pole_tol=pole_tol) \
            + (-y) * kronecker_laurent(w, tau, deep, qorder, dz=1,
                                       tail_tol=tail_tol, pole_tol=pole_tol)
    else:
        arr = kronecker_laurent(w, tau, deep, qorder, dz=dz,
                                tail_tol=tail_tol, pole_tol=pole_tol)
    pol = [(-y) ** j / math.factorial(j) for j in range(deep + 2)]
    full = arr.mul_poly(pol)
    if dz == 0 and dtau == 0:
        resid = abs(full.coeff(-1) - TWO_PI_I)
    else:
        resid = abs(full.coeff(-1))   # derivatives kill the constant pole
    assert resid < 1e-9 * max(1.0, full.max_abs()), \
        f"x^-1 coefficient {full.coeff(-1)!r} fails to cancel the pole"
    h_full = XLaurent(0, full.coeffs[1:])
    g_full = h_full.derivative_x()
    return h_full.truncate(order), g_full.truncate(order)


def a_coeffs(m_max: int, alpha: TorsionPoint, tau: complex,
             qorder: int | None = None, tail_tol: float = 1e-12) -> np.ndarray:
    """A_{m,alpha}(tau) for m = 0..m_max: Taylor coefficients of g(x,0)."""
    if not alpha.is_zero():
        _, g = section_kernels(alpha, 0j, tau, m_max, qorder, tail_tol=tail_tol)
        return np.array([g.coeff(m) for m in range(m_max + 1)])
    # at the zero section, first symmetrize z -> -z, which kills the odd
    # coth(pi i z) term and the 1/z pole; sinh(dx + 2 pi i n z/d) averages
    # to sinh(dx), so the z -> 0 limit is immediate
    order = m_max + 1
    if qorder is None:
        qorder = _auto_qorder_band(order + 1, tau.imag, 0.0, tail_tol)
    out = np.zeros(order + 2, dtype=complex)
    j = 1
    while 2 * j - 1 <= order:
        out[2 * j] += TWO_PI_I * float(bernoulli_number(2 * j)) / math.factorial(2 * j)
        j += 1
    q = cmath.exp(TWO_PI_I * tau)
    for n in range(1, qorder + 1):
        qn = -4j * math.pi * q ** n
        for d in _divisors(n):
            for k in range(1, order + 1, 2):
                out[k + 1] += qn * d ** k / math.factorial(k)
    h = XLaurent(0, out[1:])   # x^-1 slot empty: 2 pi i / x cancelled by hand
    g = h.derivative_x()
    return np.array([g.coeff(m) for m in range(m_max + 1)])


def verify_heat(z: complex, tau: complex, order: int,
                qorder: int | None = None, tol: float = 1e-8) -> dict:
    """Residual of dF/dtau = d^2 F/(dz dx) on x-orders -1..order.

    The identity holds exactly per Fourier mode, so truncating both
    sides at the same order would cancel the tail instead of measuring
    it.  An explicit qorder therefore truncates only the dtau side; the
    dz side keeps a deeper reference, and the residual surfaces the
    dropped tail.
    """
    ft = kronecker_laurent(z, tau, order, qorder, dtau=1)
    ref = None if qorder is None else qorder + 16
    fz = kronecker_laurent(z, tau, order + 1, ref, dz=1)
    fzx = fz.derivative_x()
    diffs = np.array([abs(ft.coeff(k) - fzx.coeff(k))
                      for k in range(-1, order + 1)])
    scale = max(ft.max_abs(), fzx.max_abs(), 1.0)
    resid = float(np.max(diffs))
    return {"residual": resid, "scale": scale, "passed": bool(resid < tol),
            "per_order": diffs}


# -- pointwise property checks ------------------------------------------


def check_symmetry(x: complex, z: complex, tau: complex) -> float:
    return abs(kronecker_point(x, z, tau) + kronecker_point(-x, -z, tau))


def check_elliptic(x: complex, z: complex, tau: complex, m: int, n: int) -> float:
    lhs = kronecker_point(x, z + m * tau + n, tau)
    rhs = cmath.exp(-m * x) * kronecker_point(x, z, tau)
    return abs(lhs - rhs)


def check_modularity(x: complex, z: complex, tau: complex, gamma) -> float:
    (a, b), (c, d) = gamma
    lam = c * tau + d
    new_tau = (a * tau + b) / lam
    lhs = kronecker_point(x / lam, z / lam, new_tau)
    rhs = lam * cmath.exp(c * z * x / lam) * kronecker_point(x, z, tau)
    return abs(lhs - rhs)
