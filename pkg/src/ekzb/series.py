"""Truncated noncommutative power series over the level-N fiber alphabet.

The alphabet has N^2 + 1 letters: X, Y, and one letter for each nonzero
torsion point (the zero point is not a generator; it resolves to a series,
see lie.resolve_t0).  A series is a sparse map from words (tuples of
generator ids) to complex coefficients, truncated to words of length <= D.
Instances are treated as immutable: every operation returns a new object.

Generator ids: 0 is X, 1 is Y, and 2 + (nx*N + ny - 1) is the letter for
the nonzero torsion point (nx, ny).
"""

from __future__ import annotations

import math
import re

from .torsion import TorsionPoint

GEN_X = 0
GEN_Y = 1

Word = tuple[int, ...]


def gen_t(pt: TorsionPoint) -> int:
    assert not pt.is_zero(), "the zero torsion point is not a generator"
    return 2 + pt.nx * pt.level + pt.ny - 1


def gen_point(gid: int, level: int) -> TorsionPoint:
    assert gid >= 2
    k = gid - 2 + 1
    return TorsionPoint(k // level, k % level, level)


def gen_count(level: int) -> int:
    return level * level + 1


def gen_label(gid: int, level: int) -> str:
    if gid == GEN_X:
        return "X"
    if gid == GEN_Y:
        return "Y"
    return gen_point(gid, level).label()


_T_RE = re.compile(r"^T\((-?\d+),(-?\d+)\)$")


def label_gen(tag: str, level: int) -> int:
    if tag == "X":
        return GEN_X
    if tag == "Y":
        return GEN_Y
    m = _T_RE.match(tag)
    assert m, f"bad generator tag {tag!r}"
    return gen_t(TorsionPoint(int(m.group(1)), int(m.group(2)), level))


class NCSeries:
    """Sparse truncated series in the free associative algebra."""

    __slots__ = ("level", "degree", "terms")

    def __init__(self, level: int, degree: int, terms: dict[Word, complex] | None = None):
        assert level >= 1 and degree >= 0
        self.level = level
        self.degree = degree
        t = {}
        if terms:
            for w, c in terms.items():
                if len(w) <= degree and c != 0:
                    t[w] = complex(c)
        self.terms = t

    # -- constructors ---------------------------------------------------

    @classmethod
    def zero(cls, level: int, degree: int) -> "NCSeries":
        return cls(level, degree)

    @classmethod
    def scalar(cls, level: int, degree: int, c: complex) -> "NCSeries":
        return cls(level, degree, {(): c})

    @classmethod
    def generator(cls, level: int, degree: int, gid: int) -> "NCSeries":
        assert 0 <= gid < gen_count(level)
        return cls(level, degree, {(gid,): 1.0})

    # -- basic queries ---------------------------------------------------

    def coeff(self, word: Word) -> complex:
        return self.terms.get(tuple(word), 0j)

    def constant_term(self) -> complex:
        return self.terms.get((), 0j)

    def max_abs(self) -> float:
        return max((abs(c) for c in self.terms.values()), default=0.0)

    def is_zero(self, tol: float = 0.0) -> bool:
        return self.max_abs() <= tol

    def min_word_len(self) -> int:
        """Length of the shortest word present (degree+1 when empty)."""
        return min((len(w) for w in self.terms), default=self.degree + 1)

    def degree_part(self, n: int) -> "NCSeries":
        return NCSeries(self.level, self.degree,
                        {w: c for w, c in self.terms.items() if len(w) == n})

    def truncated(self, degree: int) -> "NCSeries":
        return NCSeries(self.level, degree,
                        {w: c for w, c in self.terms.items() if len(w) <= degree})

    def chop(self, tol: float) -> "NCSeries":
        """Drop coefficients with |c| <= tol (used to bound quadrature fill-in)."""
        return NCSeries(self.level, self.degree,
                        {w: c for w, c in self.terms.items() if abs(c) > tol})

    # -- arithmetic -------------------------------------------------------

    def _compat(self, other: "NCSeries"):
        assert self.level == other.level and self.degree == other.degree, \
            "mixed truncation contexts"

    def __add__(self, other):
        if isinstance(other, (int, float, complex)):
            other = NCSeries.scalar(self.level, self.degree, other)
        self._compat(other)
        t = dict(self.terms)
        for w, c in other.terms.items():
            s = t.get(w, 0j) + c
            if s == 0:
                t.pop(w, None)
            else:
                t[w] = s
        return NCSeries(self.level, self.degree, t)

    def __neg__(self):
        return NCSeries(self.level, self.degree, {w: -c for w, c in self.terms.items()})

    def __sub__(self, other):
        if isinstance(other, (int, float, complex)):
            other = NCSeries.scalar(self.level, self.degree, other)
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, (int, float, complex)):
            if other == 0:
                return NCSeries(self.level, self.degree)
            return NCSeries(self.level, self.degree,
                            {w: c * other for w, c in self.terms.items()})
        self._compat(other)
        deg = self.degree
        out: dict[Word, complex] = {}
        bterms = other.terms
        for w1, c1 in self.terms.items():
            room = deg - len(w1)
            for w2, c2 in bterms.items():
                if len(w2) > room:
                    continue
                w = w1 + w2
                s = out.get(w, 0j) + c1 * c2
                if s == 0:
                    out.pop(w, None)
                else:
                    out[w] = s
        return NCSeries(self.level, self.degree, out)

    def __rmul__(self, other):
        assert isinstance(other, (int, float, complex))
        return self * other

    def __repr__(self):
        n = len(self.terms)
        return f"<NCSeries level={self.level} degree={self.degree} terms={n}>"


def exp_trunc(a: NCSeries) -> NCSeries:
    """exp of a series with zero constant term."""
    assert a.constant_term() == 0, "exp needs a vanishing constant term"
    out = NCSeries.scalar(a.level, a.degree, 1.0)
    power = NCSeries.scalar(a.level, a.degree, 1.0)
    for k in range(1, a.degree + 1):
        power = power * a
        if not power.terms:
            break
        out = out + power * (1.0 / math.factorial(k))
    return out


def log_trunc(u: NCSeries) -> NCSeries:
    """log of a series with constant term 1."""
    assert abs(u.constant_term() - 1.0) < 1e-12, "log needs constant term 1"
    v = u - 1.0
    out = NCSeries.zero(u.level, u.degree)
    power = NCSeries.scalar(u.level, u.degree, 1.0)
    for k in range(1, u.degree + 1):
        power = power * v
        if not power.terms:
            break
        out = out + power * ((-1.0) ** (k + 1) / k)
    return out


# -- serialization ------------------------------------------------------


def word_tag(word: Word, level: int) -> str:
    # dot separated: the torsion labels themselves contain commas
    return ".".join(gen_label(g, level) for g in word)


def dumps_series(s: NCSeries) -> str:
    """One line per word: tag<TAB>re<TAB>im, sorted by tag."""
    lines = []
    for w in sorted(s.terms, key=lambda w: word_tag(w, s.level)):
        c = s.terms[w]
        lines.append(f"{word_tag(w, s.level)}\t{c.real!r}\t{c.imag!r}")
    return "\n".join(lines)


def loads_series(text: str, level: int, degree: int) -> NCSeries:
    terms: dict[Word, complex] = {}
    for line in text.splitlines():
        line = line.strip("\n")
        if not line.strip():
            continue
        tag, re_s, im_s = line.split("\t")
        word = tuple(label_gen(t, level) for t in tag.split(".")) if tag else ()
        terms[word] = complex(float(re_s), float(im_s))
    return NCSeries(level, degree, terms)
