"""Hodge (F), weight (W), and relative weight (M) filtration levels on
the truncated free Lie algebra, filtration shifts of derivations and
automorphisms, and the sl2 raising checks on the weight-graded pieces.

Levels are integer functionals of a word's letter counts: with a copies
of X, b of Y, and k torsion letters,

    F-level = -(b + k),  W-level = -(a + b + 2k),  M-level = -2(b + k).

Counting happens on the free alphabet {X, Y, t_(alpha != 0)}; the zero
letter only ever appears through its resolved series [X, Y] - sum t,
whose two parts share the same levels, so levels are well defined.
A mixed element sits in a filtration step iff every word does, which
makes the overall F-level the minimum over words and the overall W- and
M-levels the maxima.
"""

from __future__ import annotations

import numpy as np

from .connection import KZBContext, residue_cusp
from .lie import (Automorphism, Derivation, lyndon_bracketing,
                  lyndon_coordinates, lyndon_words)
from .series import GEN_X, GEN_Y, NCSeries, Word, gen_count
from .torsion import TorsionPoint


def word_levels(word: Word) -> tuple[int, int, int]:
    """(F, W, M) levels of a single word."""
    a = sum(1 for g in word if g == GEN_X)
    b = sum(1 for g in word if g == GEN_Y)
    k = len(word) - a - b
    return -(b + k), -(a + b + 2 * k), -2 * (b + k)


def filtration_levels(v: NCSeries) -> dict:
    """Per-word levels and the element's overall (F, W, M) levels.

    Overall levels are None for the zero element, which lies in every
    step of every filtration."""
    per_word = {w: word_levels(w) for w in v.terms}
    if not per_word:
        return {"per_word": per_word, "f": None, "w": None, "m": None}
    fs, ws, ms = zip(*per_word.values())
    return {"per_word": per_word,
            "f": min(fs), "w": max(ws), "m": max(ms)}


def _image_shifts(images: dict[int, NCSeries]) -> tuple[int, int, int]:
    f = w = m = None
    for gid, img in images.items():
        if not img.terms:
            continue
        bf, bw, bm = word_levels((gid,))
        lv = filtration_levels(img)
        sf, sw, sm = lv["f"] - bf, lv["w"] - bw, lv["m"] - bm
        f = sf if f is None else min(f, sf)
        w = sw if w is None else max(w, sw)
        m = sm if m is None else max(m, sm)
    assert f is not None, "map with no nonzero generator images"
    return f, w, m


def derivation_filtration_levels(d: Derivation) -> tuple[int, int, int]:
    """Exact (F, W, M) shifts of a derivation, computed on generators
    (sufficient by Leibniz): d lands in F^f W_w M_m of End."""
    return _image_shifts(d.images)


def automorphism_filtration_levels(phi: Automorphism) -> tuple[int, int, int]:
    """Exact (F, W, M) shifts of an automorphism, computed on generators."""
    return _image_shifts(phi.images)


# -- weight-graded bases -------------------------------------------------


_BASIS_CACHE: dict[tuple[int, int], list[tuple[Word, tuple[int, int, int]]]] = {}


def _lyndon_levels(level: int, degree: int):
    key = (level, degree)
    got = _BASIS_CACHE.get(key)
    if got is None:
        words = lyndon_words(list(range(gen_count(level))), degree)
        got = [(w, word_levels(w)) for w in words]
        _BASIS_CACHE[key] = got
    return got


def weight_basis(level: int, degree: int, m: int) -> list[Word]:
    """Lyndon words spanning Gr^W_m of the degree-truncated Lie algebra."""
    return [w for w, lv in _lyndon_levels(level, degree) if lv[1] == m]


def graded_basis(level: int, degree: int, m: int, mlvl: int) -> list[Word]:
    """Lyndon words spanning Gr^M_mlvl of Gr^W_m."""
    return [w for w, lv in _lyndon_levels(level, degree)
            if lv[1] == m and lv[2] == mlvl]


def h_weight(word: Word) -> int:
    """Eigenvalue under h = [e, f] for e = X d/dY, f = Y d/dX."""
    a = sum(1 for g in word if g == GEN_X)
    b = sum(1 for g in word if g == GEN_Y)
    return a - b


def sl2_multiplicities(level: int, degree: int, m: int) -> dict[int, int]:
    """Multiplicity of each irreducible S^j inside Gr^W_m under the
    (e, f, h) action, from weight-space dimensions."""
    words = weight_basis(level, degree, m)
    dims: dict[int, int] = {}
    for w in words:
        s = h_weight(w)
        dims[s] = dims.get(s, 0) + 1
    out = {}
    top = max(dims, default=-1)
    for j in range(max(top, 0), -1, -1):
        mult = dims.get(j, 0) - dims.get(j + 2, 0)
        if mult:
            out[j] = mult
    return out


# -- the sl2 raising check -----------------------------------------------


def sl2_iso_check(ctx: KZBContext, L: Derivation, m: int, r: int) -> dict:
    """Rank report for L^r: Gr^M_(m+r) Gr^W_m -> Gr^M_(m-r) Gr^W_m on the
    degree-truncated algebra.

    Preconditions L(W_c) within W_c and L(M_c) within M_(c-2) are
    verified first from the derivation's exact shifts; a failure is
    reported in the dict rather than raised."""
    assert r >= 0
    lvl, deg = ctx.level, ctx.degree
    _, sw, sm = derivation_filtration_levels(L)
    if sw > 0 or sm > -2:
        return {"m": m, "r": r, "ok": False,
                "violation": f"shifts W{sw:+d} M{sm:+d} break the "
                             f"W_0/M_-2 precondition"}
    src = graded_basis(lvl, deg, m, m + r)
    tgt = graded_basis(lvl, deg, m, m - r)
    cols = []
    for word in src:
        u = lyndon_bracketing(word, lvl, deg)
        for _ in range(r):
            u = L.apply(u)
        proj = NCSeries(lvl, deg,
                        {w: c for w, c in u.terms.items()
                         if word_levels(w)[1] == m
                         and word_levels(w)[2] == m - r})
        cols.append(lyndon_coordinates(proj, tgt))
    if src and tgt:
        mat = np.column_stack(cols)
        rank = int(np.linalg.matrix_rank(mat, tol=1e-9))
    else:
        rank = 0
    return {"m": m, "r": r, "ok": True,
            "dim_source": len(src), "dim_target": len(tgt), "rank": rank,
            "bijective": rank == len(src) == len(tgt)}


def realized_pairs(level: int, degree: int, max_m: int = 6,
                   max_r: int = 6) -> list[tuple[int, int]]:
    """(m, r) with |m| <= max_m, 0 <= r <= max_r and at least one of the
    two graded pieces nonzero in the truncation."""
    out = []
    for m in range(-1, -max_m - 1, -1):
        for r in range(max_r + 1):
            if graded_basis(level, degree, m, m + r) \
                    or graded_basis(level, degree, m, m - r):
                out.append((m, r))
    return out


def cusp_sl2_operators(ctx: KZBContext) -> tuple[Derivation, Derivation]:
    """The raising operator at the cusp and its W_(-2) perturbation:
    L_q and L_q + L_(w,0), the latter adding the inner derivation of the
    resolved zero letter."""
    lq = residue_cusp(ctx)
    lw0 = Derivation.inner(ctx.t_elem(TorsionPoint(0, 0, ctx.level)))
    return lq, lq + lw0
