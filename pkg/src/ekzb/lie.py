"""Lie-algebra operations on truncated noncommutative series.

A Lie element is a series that is primitive, certified degreewise by the
Dynkin criterion: left-to-right bracketing of each homogeneous degree-n
component returns n times the component.  Derivations are stored by their
generator images and act by the Leibniz rule; algebra endomorphisms
(factors of automorphy) are stored the same way and act multiplicatively.
"""

from __future__ import annotations

import numpy as np

from .series import (GEN_X, GEN_Y, NCSeries, Word, gen_count, gen_t,
                     exp_trunc, log_trunc)
from .torsion import TorsionPoint, torsion_nonzero


def bracket(a: NCSeries, b: NCSeries) -> NCSeries:
    return a * b - b * a


def ad_pow(x: NCSeries, v: NCSeries, m: int) -> NCSeries:
    for _ in range(m):
        v = bracket(x, v)
    return v


def adjoint_series_action(coeffs, v: NCSeries, x: NCSeries | None = None) -> NCSeries:
    """sum_n coeffs[n] ad_x^n(v) for a one-sided power series in x.

    coeffs is indexed from n = 0.  Negative orders are the caller's
    problem: any pole must have been cancelled before reaching here.
    """
    if x is None:
        x = NCSeries.generator(v.level, v.degree, GEN_X)
    out = NCSeries.zero(v.level, v.degree)
    term = v
    for n, c in enumerate(coeffs):
        if n > 0:
            term = bracket(x, term)
        if not term.terms:
            break
        if c != 0:
            out = out + term * c
    return out


def dynkin(s: NCSeries) -> NCSeries:
    """Linear extension of the left bracketing map on words."""
    out = NCSeries.zero(s.level, s.degree)
    for w, c in s.terms.items():
        if len(w) == 0:
            continue
        acc = NCSeries.generator(s.level, s.degree, w[0])
        for g in w[1:]:
            acc = bracket(acc, NCSeries.generator(s.level, s.degree, g))
        out = out + acc * c
    return out


def is_primitive(s: NCSeries, tol: float = 1e-9) -> bool:
    """Dynkin certificate, checked per homogeneous degree."""
    if s.constant_term() != 0:
        return False
    for n in range(1, s.degree + 1):
        part = s.degree_part(n)
        if not part.terms:
            continue
        resid = (dynkin(part) - part * float(n)).max_abs()
        if resid > tol * max(1.0, part.max_abs()):
            return False
    return True


def bch(a: NCSeries, b: NCSeries) -> NCSeries:
    """Baker-Campbell-Hausdorff composition log(exp(a) exp(b))."""
    return log_trunc(exp_trunc(a) * exp_trunc(b))


def resolve_t0(level: int, degree: int,
               admitted: list[TorsionPoint] | None = None) -> NCSeries:
    """The zero-point letter as a series: [X, Y] minus the nonzero letters.

    admitted restricts which nonzero torsion letters take part (subgroup
    selectors set the rest to zero, which drops them here as well).
    """
    x = NCSeries.generator(level, degree, GEN_X)
    y = NCSeries.generator(level, degree, GEN_Y)
    out = bracket(x, y)
    pts = admitted if admitted is not None else torsion_nonzero(level)
    for p in pts:
        if p.is_zero():
            continue
        out = out - NCSeries.generator(level, degree, gen_t(p))
    return out


class Derivation:
    """A derivation of the truncated free Lie algebra, by generator images."""

    __slots__ = ("level", "degree", "images")

    def __init__(self, level: int, degree: int,
                 images: dict[int, NCSeries] | None = None):
        self.level = level
        self.degree = degree
        self.images: dict[int, NCSeries] = {}
        if images:
            for g, s in images.items():
                assert s.level == level and s.degree == degree
                if s.terms:
                    self.images[g] = s

    @classmethod
    def zero(cls, level: int, degree: int) -> "Derivation":
        return cls(level, degree)

    @classmethod
    def inner(cls, v: NCSeries) -> "Derivation":
        """ad(v), the inner derivation."""
        images = {}
        for g in range(gen_count(v.level)):
            images[g] = bracket(v, NCSeries.generator(v.level, v.degree, g))
        return cls(v.level, v.degree, images)

    def image(self, gid: int) -> NCSeries:
        s = self.images.get(gid)
        return s if s is not None else NCSeries.zero(self.level, self.degree)

    def apply(self, s: NCSeries) -> NCSeries:
        deg = self.degree
        out: dict[Word, complex] = {}
        for w, c in s.terms.items():
            for i, g in enumerate(w):
                img = self.images.get(g)
                if img is None:
                    continue
                pre, post = w[:i], w[i + 1:]
                room = deg - len(pre) - len(post)
                for wi, ci in img.terms.items():
                    if len(wi) > room:
                        continue
                    key = pre + wi + post
                    val = out.get(key, 0j) + c * ci
                    if val == 0:
                        out.pop(key, None)
                    else:
                        out[key] = val
        return NCSeries(self.level, self.degree, out)

    def __add__(self, other: "Derivation") -> "Derivation":
        assert self.level == other.level and self.degree == other.degree
        images = dict(self.images)
        for g, s in other.images.items():
            images[g] = images[g] + s if g in images else s
        return Derivation(self.level, self.degree, images)

    def __sub__(self, other: "Derivation") -> "Derivation":
        return self + (other * -1.0)

    def __mul__(self, c) -> "Derivation":
        return Derivation(self.level, self.degree,
                          {g: s * c for g, s in self.images.items()})

    __rmul__ = __mul__

    def dbracket(self, other: "Derivation") -> "Derivation":
        """Commutator of derivations, by images on generators.

        Generators without an image in either factor map to zero in both
        composites, so only the supported ones need computing."""
        images = {}
        for g in set(self.images) | set(other.images):
            images[g] = self.apply(other.image(g)) - other.apply(self.image(g))
        return Derivation(self.level, self.degree, images)

    def min_shift(self) -> int:
        """Least increase of word length over all images (large when zero)."""
        best = self.degree + 1
        for s in self.images.values():
            if s.terms:
                best = min(best, s.min_word_len() - 1)
        return best

    def max_abs(self) -> float:
        return max((s.max_abs() for s in self.images.values()), default=0.0)

    def __repr__(self):
        return f"<Derivation level={self.level} degree={self.degree} images={len(self.images)}>"


def derivation_diff(a: Derivation, b: Derivation) -> float:
    return (a - b).max_abs()


class Automorphism:
    """Algebra endomorphism by generator images (words map to products)."""

    __slots__ = ("level", "degree", "images")

    def __init__(self, level: int, degree: int, images: dict[int, NCSeries]):
        self.level = level
        self.degree = degree
        self.images = dict(images)
        for g in range(gen_count(level)):
            assert g in self.images, f"missing image for generator {g}"

    @classmethod
    def identity(cls, level: int, degree: int) -> "Automorphism":
        return cls(level, degree,
                   {g: NCSeries.generator(level, degree, g)
                    for g in range(gen_count(level))})

    def apply(self, s: NCSeries) -> NCSeries:
        out = NCSeries.zero(self.level, self.degree)
        cache: dict[Word, NCSeries] = {(): NCSeries.scalar(self.level, self.degree, 1.0)}
        for w, c in s.terms.items():
            for i in range(len(w)):
                pre = w[:i + 1]
                if pre not in cache:
                    cache[pre] = cache[w[:i]] * self.images[w[i]]
            out = out + cache[w] * c
        return out

    def compose(self, other: "Automorphism") -> "Automorphism":
        """self after other."""
        return Automorphism(self.level, self.degree,
                            {g: self.apply(img) for g, img in other.images.items()})

    def linear_part(self) -> np.ndarray:
        n = gen_count(self.level)
        m = np.zeros((n, n), dtype=complex)
        for g in range(n):
            for h in range(n):
                m[h, g] = self.images[g].coeff((h,))
        return m

    def inverse(self) -> "Automorphism":
        """Degreewise Newton iteration around the inverted linear part."""
        n = gen_count(self.level)
        lin = self.linear_part()
        lin_inv = np.linalg.inv(lin)
        lam_inv = Automorphism(self.level, self.degree, {
            g: NCSeries(self.level, self.degree,
                        {(h,): lin_inv[h, g] for h in range(n) if lin_inv[h, g] != 0})
            for g in range(n)})
        lam = Automorphism(self.level, self.degree, {
            g: NCSeries(self.level, self.degree,
                        {(h,): lin[h, g] for h in range(n) if lin[h, g] != 0})
            for g in range(n)})
        images = {g: lam_inv.images[g] for g in range(n)}
        for _ in range(self.degree):
            nxt = {}
            for g in range(n):
                s = images[g]
                rem = self.apply(s) - lam.apply(s)   # the degree-raising part
                nxt[g] = lam_inv.apply(
                    NCSeries.generator(self.level, self.degree, g) - rem)
            stable = all((nxt[g] - images[g]).max_abs() == 0 for g in range(n))
            images = nxt
            if stable:
                break
        return Automorphism(self.level, self.degree, images)

    def conjugate_derivation(self, d: Derivation) -> Derivation:
        """self o d o self^{-1}, again a derivation."""
        inv = self.inverse()
        images = {}
        for g in range(gen_count(self.level)):
            images[g] = self.apply(d.apply(inv.images[g]))
        return Derivation(self.level, self.degree, images)


# -- Lyndon words -------------------------------------------------------


def lyndon_words(letters: list[int], max_len: int) -> list[Word]:
    """All Lyndon words over the sorted letter list, lengths 1..max_len (Duval)."""
    letters = sorted(letters)
    k = len(letters)
    out: list[Word] = []
    w = [-1]
    while w:
        w[-1] += 1
        if w[-1] < k:
            out.append(tuple(letters[i] for i in w))
            m = len(w)
            while len(w) < max_len:
                w.append(w[len(w) - m])
        else:
            w.pop()
            continue
        while w and w[-1] == k - 1:
            w.pop()
    return sorted(out, key=lambda t: (len(t), t))


def lyndon_bracketing(word: Word, level: int, degree: int) -> NCSeries:
    """Standard bracketing of a Lyndon word (leading term is the word itself)."""
    if len(word) == 1:
        return NCSeries.generator(level, degree, word[0])
    # standard factorization: longest proper Lyndon suffix
    n = len(word)
    for i in range(1, n):
        suf = word[i:]
        if _is_lyndon(suf):
            u, v = word[:i], suf
            return bracket(lyndon_bracketing(u, level, degree),
                           lyndon_bracketing(v, level, degree))
    raise AssertionError(f"not a Lyndon word: {word}")


def _is_lyndon(w: Word) -> bool:
    return all(w < w[i:] for i in range(1, len(w)))


def lyndon_coordinates(s: NCSeries, basis: list[Word]) -> np.ndarray:
    """Coordinates of a Lie element in the given Lyndon basis (triangular solve).

    basis must contain every Lyndon word whose multidegree occurs in s;
    an assertion fires if a remainder survives.
    """
    coords = np.zeros(len(basis), dtype=complex)
    rem = s
    # the bracketing of w is w plus lex-greater words of the same multidegree,
    # so sweeping in lex order peels coordinates off triangularly
    for i in sorted(range(len(basis)), key=lambda j: basis[j]):
        c = rem.coeff(basis[i])
        if c != 0:
            coords[i] = c
            rem = rem - lyndon_bracketing(basis[i], s.level, s.degree) * c
    assert rem.max_abs() < 1e-9 * max(1.0, s.max_abs()), \
        "series is not in the span of the given Lyndon basis"
    return coords
