"""Torsion points of level N and the SL2(Z) bookkeeping around them.

A torsion point is a pair (x, y) in (Z/N)^2 read as the section
tau |-> x/N + (y/N)*tau of the universal elliptic curve.  SL2(Z) acts on
the right; the convention is fixed so that Eisenstein series satisfy
G_{m,alpha}(gamma tau) = (c tau + d)^m G_{m, alpha.gamma}(tau), which forces

    (x, y) . gamma = (d*x + b*y, c*x + a*y)   (mod N).

Matrices are plain 2x2 integer tuples ((a, b), (c, d)).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

Mat2 = tuple[tuple[int, int], tuple[int, int]]

IDENT: Mat2 = ((1, 0), (0, 1))
GEN_S: Mat2 = ((0, -1), (1, 0))
GEN_T: Mat2 = ((1, 1), (0, 1))


def mat_mul(g: Mat2, h: Mat2) -> Mat2:
    (a, b), (c, d) = g
    (e, f), (p, q) = h
    return ((a * e + b * p, a * f + b * q), (c * e + d * p, c * f + d * q))


def mat_inv(g: Mat2) -> Mat2:
    (a, b), (c, d) = g
    assert a * d - b * c == 1, "not in SL2(Z)"
    return ((d, -b), (-c, a))


def is_sl2(g: Mat2) -> bool:
    (a, b), (c, d) = g
    return a * d - b * c == 1


def mat_mod(g: Mat2, n: int) -> Mat2:
    (a, b), (c, d) = g
    return ((a % n, b % n), (c % n, d % n))


def in_gamma(g: Mat2, n: int) -> bool:
    """Membership in the principal congruence subgroup of level n."""
    return is_sl2(g) and mat_mod(g, n) == ((1 % n, 0), (0, 1 % n))


def moebius(g: Mat2, tau: complex) -> complex:
    (a, b), (c, d) = g
    return (a * tau + b) / (c * tau + d)


def cocycle_j(g: Mat2, tau: complex) -> complex:
    """The automorphy denominator c*tau + d."""
    (_, _), (c, d) = g
    return c * tau + d


@dataclass(frozen=True, order=True)
class TorsionPoint:
    """An N-torsion section, stored by numerators modulo the level."""

    nx: int
    ny: int
    level: int

    def __post_init__(self):
        assert self.level >= 1
        object.__setattr__(self, "nx", self.nx % self.level)
        object.__setattr__(self, "ny", self.ny % self.level)

    @property
    def x(self) -> Fraction:
        return Fraction(self.nx, self.level)

    @property
    def y(self) -> Fraction:
        """Fractional tau-coordinate, lifted to [0, 1)."""
        return Fraction(self.ny, self.level)

    def is_zero(self) -> bool:
        return self.nx == 0 and self.ny == 0

    def __neg__(self) -> "TorsionPoint":
        return TorsionPoint(-self.nx, -self.ny, self.level)

    def __add__(self, other: "TorsionPoint") -> "TorsionPoint":
        assert self.level == other.level
        return TorsionPoint(self.nx + other.nx, self.ny + other.ny, self.level)

    def __sub__(self, other: "TorsionPoint") -> "TorsionPoint":
        assert self.level == other.level
        return TorsionPoint(self.nx - other.nx, self.ny - other.ny, self.level)

    def lift(self, tau: complex) -> complex:
        """The point x + y*tau with y lifted to [0, 1)."""
        return float(self.x) + float(self.y) * tau

    def act(self, g: Mat2) -> "TorsionPoint":
        """Right action compatible with Eisenstein modularity (see module doc)."""
        (a, b), (c, d) = g
        return TorsionPoint(d * self.nx + b * self.ny,
                            c * self.nx + a * self.ny, self.level)

    def label(self) -> str:
        return f"T({self.nx},{self.ny})"


def torsion_group(level: int) -> list[TorsionPoint]:
    """All N^2 torsion points, row-major in (nx, ny)."""
    return [TorsionPoint(i, j, level) for i in range(level) for j in range(level)]


def torsion_nonzero(level: int) -> list[TorsionPoint]:
    return [p for p in torsion_group(level) if not p.is_zero()]


def gamma_generators(level: int) -> list[Mat2]:
    """A generating set of the principal congruence subgroup of the level.

    Reidemeister-Schreier relative to SL2(Z) = <S, T>: BFS over the
    finite quotient SL2(Z/N) builds a Schreier transversal, and the
    elements r g (rep(rg))^{-1} generate the kernel.  Identity and
    duplicate entries (also mutual inverses) are dropped.
    """
    if level == 1:
        return [GEN_S, GEN_T]
    reps: dict[Mat2, Mat2] = {mat_mod(IDENT, level): IDENT}
    queue = [IDENT]
    gens = [GEN_S, GEN_T, mat_inv(GEN_S), mat_inv(GEN_T)]
    while queue:
        r = queue.pop(0)
        for g in gens:
            rg = mat_mul(r, g)
            key = mat_mod(rg, level)
            if key not in reps:
                reps[key] = rg
                queue.append(rg)
    out: list[Mat2] = []
    seen: set[Mat2] = set()
    for r in reps.values():
        for g in (GEN_S, GEN_T):
            rg = mat_mul(r, g)
            rep = reps[mat_mod(rg, level)]
            elt = mat_mul(rg, mat_inv(rep))
            assert in_gamma(elt, level)
            if elt == IDENT or elt in seen:
                continue
            seen.add(elt)
            seen.add(mat_inv(elt))
            out.append(elt)
    return out
