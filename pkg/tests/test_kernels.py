import json
import os
import subprocess
import sys

import numpy as np
import pytest

from stokesdn import _backend, kernels

needs_numba = pytest.mark.skipif(not _backend.HAVE_NUMBA, reason="numba not installed")


def random_terms(rng, n, d, K, n_rates, n_deg):
    k = rng.integers(-K, K + 1, size=(n, d))
    r = rng.integers(0, n_rates, size=n)
    p = rng.integers(0, n_deg, size=n)
    c = rng.normal(size=n) + 1j * rng.normal(size=n)
    return k, r, p, c


def conv_args(rng, d=1, K=5, na=40, nb=30, ra=4, rb=3, pa=3, pb=2):
    a = random_terms(rng, na, d, K, ra, pa)
    b = random_terms(rng, nb, d, K, rb, pb)
    n_rates = ra * rb
    rate_map = np.arange(n_rates).reshape(ra, rb)
    return (*a, *b, rate_map, K, n_rates, pa + pb - 1)


def conv_reference(ka, ra, pa, ca, kb, rb, pb, cb, rate_map, K, n_rates, n_deg):
    d = ka.shape[1]
    M = 2 * K + 1
    out = np.zeros((M**d, n_rates, n_deg), dtype=complex)
    for i in range(len(ca)):
        for j in range(len(cb)):
            kk = ka[i] + kb[j]
            if np.any(np.abs(kk) > K):
                continue
            flat = int(np.ravel_multi_index(tuple(kk + K), (M,) * d))
            out[flat, rate_map[ra[i], rb[j]], pa[i] + pb[j]] += ca[i] * cb[j]
    return out


@pytest.mark.parametrize("d", [1, 2])
def test_convolve_numpy_matches_loop(rng, d):
    args = conv_args(rng, d=d)
    assert np.allclose(kernels.convolve_terms_numpy(*args), conv_reference(*args), rtol=0, atol=1e-13)


def test_convolve_numpy_blocks(rng, monkeypatch):
    args = conv_args(rng, na=50, nb=20)
    whole = kernels.convolve_terms_numpy(*args)
    monkeypatch.setattr(kernels, "_PAIR_BLOCK", 7)
    assert np.allclose(kernels.convolve_terms_numpy(*args), whole, rtol=0, atol=1e-13)


def test_convolve_empty():
    z = np.zeros((0, 1), dtype=np.int64)
    e = np.zeros(0, dtype=np.int64)
    out = kernels.convolve_terms_numpy(z, e, e, np.zeros(0, complex), z, e, e, np.zeros(0, complex),
                                       np.zeros((1, 1), np.int64), 2, 1, 1)
    assert out.shape == (5, 1, 1) and not out.any()


@needs_numba
@pytest.mark.parametrize("d", [1, 2])
def test_convolve_backends_agree(rng, d):
    args = conv_args(rng, d=d)
    assert np.allclose(kernels.convolve_terms_numba(*args), kernels.convolve_terms_numpy(*args), rtol=0, atol=1e-13)


def resolvent_residual(Q, C, s):
    dQ = np.zeros_like(Q)
    dQ[:, :-1] = Q[:, 1:] * np.arange(1, Q.shape[1])
    return np.max(np.abs(dQ + s[:, None] * Q - C))


def test_resolvent_solves_ode(rng):
    C = rng.normal(size=(20, 6)) + 1j * rng.normal(size=(20, 6))
    s = rng.uniform(0.5, 5.0, 20) * rng.choice([-1, 1], 20)
    Q = kernels.poly_resolvent_numpy(C, s)
    assert resolvent_residual(Q, C, s) < 1e-12


def test_resolvent_constant_row():
    Q = kernels.poly_resolvent_numpy(np.array([[3.0 + 0j, 0, 0]]), np.array([2.0]))
    assert np.allclose(Q, [[1.5, 0, 0]])


@needs_numba
def test_resolvent_backends_agree(rng):
    C = rng.normal(size=(30, 7)) + 1j * rng.normal(size=(30, 7))
    s = rng.uniform(0.3, 4.0, 30)
    a = kernels.poly_resolvent_numba(C, s)
    b = kernels.poly_resolvent_numpy(C, s)
    assert np.allclose(a, b, rtol=1e-13, atol=1e-13)


def test_antiderivative():
    C = np.array([[1.0, 2.0, 3.0]])
    assert np.allclose(kernels.poly_antiderivative(C), [[0, 1, 1, 1]])


SCRIPT = """
import json
from stokesdn import PeriodicFunction, _backend
from stokesdn.dirichlet_neumann import DNConfig, apply_dn
eta = PeriodicFunction.cos(1, 16, 0.05) + PeriodicFunction.sin(2, 16, 0.01)
G = apply_dn(eta, PeriodicFunction.cos(1, 16) + PeriodicFunction.sin(3, 16, 0.4), DNConfig(K=16))
print(json.dumps({"backend": _backend.backend_name(), "G": G.to_json_dict()}))
"""


def run_backend(flag):
    env = dict(os.environ, STOKESDN_NUMBA=flag)
    out = subprocess.run([sys.executable, "-c", SCRIPT], env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout)


@needs_numba
def test_env_flag_switches_backend_end_to_end():
    from stokesdn import PeriodicFunction

    fast, slow = run_backend("1"), run_backend("0")
    assert fast["backend"] == "numba" and slow["backend"] == "numpy"
    a = PeriodicFunction.from_json_dict(fast["G"])
    b = PeriodicFunction.from_json_dict(slow["G"])
    assert a.allclose(b, atol=1e-14)
