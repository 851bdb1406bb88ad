"""Truncated Fourier expansions in a fractional nome, with a disk cache.

A QSeries holds coefficients of q_N^n for n = 0..Q where q_N = exp(2 pi i
tau / N).  The disk format is one header line `qseries N Q` followed by
Q+1 lines `n re im`; writes go through a temp file and os.replace so
concurrent readers always see a complete snapshot.
"""

from __future__ import annotations

import cmath
import os
import tempfile
from pathlib import Path

import numpy as np

TWO_PI_I = 2j * cmath.pi


class QSeries:
    __slots__ = ("denom", "coeffs")

    def __init__(self, denom: int, coeffs):
        assert denom >= 1
        self.denom = denom
        self.coeffs = np.asarray(coeffs, dtype=complex)
        assert self.coeffs.ndim == 1 and len(self.coeffs) >= 1

    @property
    def qorder(self) -> int:
        return len(self.coeffs) - 1

    def nome(self, tau: complex) -> complex:
        return cmath.exp(TWO_PI_I * tau / self.denom)

    def eval(self, tau: complex) -> tuple[complex, float]:
        """Horner evaluation plus the geometric tail bound.

        The bound |q|^(Q+1)/(1-|q|) is scaled by the largest retained
        coefficient; it is a heuristic for slowly growing coefficients,
        not a certificate.
        """
        assert tau.imag > 0
        q = self.nome(tau)
        acc = 0j
        for c in self.coeffs[::-1]:
            acc = acc * q + c
        aq = abs(q)
        scale = float(np.max(np.abs(self.coeffs))) if len(self.coeffs) else 0.0
        tail = scale * aq ** (self.qorder + 1) / (1.0 - aq)
        return acc, tail

    def __add__(self, other: "QSeries") -> "QSeries":
        assert self.denom == other.denom
        n = max(len(self.coeffs), len(other.coeffs))
        a = np.zeros(n, dtype=complex)
        a[:len(self.coeffs)] += self.coeffs
        a[:len(other.coeffs)] += other.coeffs
        return QSeries(self.denom, a)

    def __mul__(self, c) -> "QSeries":
        return QSeries(self.denom, self.coeffs * complex(c))

    __rmul__ = __mul__

    def dumps(self) -> str:
        lines = [f"qseries {self.denom} {self.qorder}"]
        for n, c in enumerate(self.coeffs):
            lines.append(f"{n} {float(c.real)!r} {float(c.imag)!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "QSeries":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        head = lines[0].split()
        assert head[0] == "qseries", "not a qseries file"
        denom, qorder = int(head[1]), int(head[2])
        assert len(lines) == qorder + 2, "truncated qseries file"
        coeffs = np.zeros(qorder + 1, dtype=complex)
        for ln in lines[1:]:
            n_s, re_s, im_s = ln.split()
            coeffs[int(n_s)] = complex(float(re_s), float(im_s))
        return cls(denom, coeffs)


# -- disk cache ---------------------------------------------------------


def cache_path(cache_dir: str | Path, key: str) -> Path:
    assert "/" not in key and ".." not in key
    return Path(cache_dir) / f"{key}.qs"


def cache_get(cache_dir: str | Path, key: str) -> QSeries | None:
    p = cache_path(cache_dir, key)
    if not p.exists():
        return None
    return QSeries.loads(p.read_text())


def cache_put(cache_dir: str | Path, key: str, qs: QSeries) -> Path:
    d = Path(cache_dir)
    d.mkdir(parents=True, exist_ok=True)
    p = cache_path(cache_dir, key)
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(qs.dumps())
        os.replace(tmp, p)   # atomic snapshot swap
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return p


def cache_list(cache_dir: str | Path) -> list[tuple[str, int, int]]:
    d = Path(cache_dir)
    out = []
    if not d.is_dir():
        return out
    for p in sorted(d.glob("*.qs")):
        head = p.read_text().splitlines()[0].split()
        out.append((p.stem, int(head[1]), int(head[2])))
    return out
