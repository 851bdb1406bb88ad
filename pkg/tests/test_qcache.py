import cmath

import numpy as np
import pytest

from ekzb.qcache import QSeries, cache_get, cache_list, cache_path, cache_put


def test_eval_geometric():
    qs = QSeries(1, np.ones(40))
    tau = 1j
    q = cmath.exp(2j * cmath.pi * tau)
    val, tail = qs.eval(tau)
    assert abs(val - 1.0 / (1.0 - q)) < tail + 1e-15
    assert tail < 1e-100  # |q| = e^{-2pi}, 41st power


def test_eval_requires_upper_half_plane():
    qs = QSeries(2, [1.0])
    with pytest.raises(AssertionError):
        qs.eval(-1j)


def test_dumps_loads_roundtrip():
    qs = QSeries(3, [1 + 2j, -0.5, 3e-17 + 1j])
    back = QSeries.loads(qs.dumps())
    assert back.denom == 3 and back.qorder == 2
    assert np.max(np.abs(back.coeffs - qs.coeffs)) == 0.0


def test_loads_rejects_garbage():
    with pytest.raises(AssertionError):
        QSeries.loads("notaseries 1 1\n0 0 0\n1 0 0")


def test_add_mul():
    a = QSeries(2, [1.0, 2.0])
    b = QSeries(2, [0.5, 0.0, 1.0])
    c = a + b * 2.0
    assert np.allclose(c.coeffs, [2.0, 2.0, 2.0])


def test_cache_roundtrip(tmp_path):
    qs = QSeries(4, [1j, 2.0, -1.0])
    p = cache_put(tmp_path, "eis_m2_N4_a1_0_Q2", qs)
    assert p.exists()
    back = cache_get(tmp_path, "eis_m2_N4_a1_0_Q2")
    assert back is not None and back.denom == 4
    assert np.max(np.abs(back.coeffs - qs.coeffs)) == 0.0
    assert cache_get(tmp_path, "missing") is None
    rows = cache_list(tmp_path)
    assert rows == [("eis_m2_N4_a1_0_Q2", 4, 2)]
    # no stray temp files left behind
    assert list(tmp_path.glob("*.tmp")) == []


def test_cache_key_sanitized(tmp_path):
    with pytest.raises(AssertionError):
        cache_path(tmp_path, "../escape")
