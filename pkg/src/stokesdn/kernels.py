"""Hot numeric kernels.

Each kernel has a numba implementation and a numpy implementation with
identical semantics. The public names dispatch on ``_backend.USE_NUMBA``;
the ``*_numpy`` / ``*_numba`` variants stay importable for testing and
benchmarking.
"""
import numpy as np

from . import _backend

# Upper bound on the (i, j) pair block the numpy convolution materializes.
_PAIR_BLOCK = 1 << 21


def convolve_terms_numpy(ka, ra, pa, ca, kb, rb, pb, cb, rate_map, K, n_rates, n_deg):
    """Sparse triple convolution of two term lists.

    Term ``i`` of the first list is ``ca[i] * y**pa[i] * exp(rate_a[ra[i]] y)``
    at Fourier mode ``ka[i]`` (integer vector). The product of term ``i`` and
    term ``j`` lands at mode ``ka[i] + kb[j]`` (dropped when any component
    exceeds ``K`` in absolute value), rate index ``rate_map[ra[i], rb[j]]``
    and degree ``pa[i] + pb[j]``.

    Returns a dense complex array of shape ``((2K+1)**d, n_rates, n_deg)``
    indexed by the flattened mode.
    """
    d = ka.shape[1]
    M = 2 * K + 1
    n_modes = M**d
    size = n_modes * n_rates * n_deg
    re = np.zeros(size)
    im = np.zeros(size)
    na, nb = len(ca), len(cb)
    if na == 0 or nb == 0:
        return np.zeros((n_modes, n_rates, n_deg), dtype=complex)
    step = max(1, _PAIR_BLOCK // nb)
    for start in range(0, na, step):
        sl = slice(start, start + step)
        kk = ka[sl, None, :] + kb[None, :, :]
        ok = np.all(np.abs(kk) <= K, axis=2)
        flat = np.zeros(ok.shape, dtype=np.int64)
        for ax in range(d):
            flat = flat * M + (kk[:, :, ax] + K)
        lin = (flat * n_rates + rate_map[ra[sl, None], rb[None, :]]) * n_deg + (
            pa[sl, None] + pb[None, :]
        )
        vals = ca[sl, None] * cb[None, :]
        lin = lin[ok]
        vals = vals[ok]
        re += np.bincount(lin, weights=vals.real, minlength=size)
        im += np.bincount(lin, weights=vals.imag, minlength=size)
    return (re + 1j * im).reshape(n_modes, n_rates, n_deg)


def poly_resolvent_numpy(C, s):
    """Polynomial solution ``Q`` of ``Q' + s Q = C`` for each row.

    Rows of ``C`` hold polynomial coefficients in ascending degree. The
    solution is ``sum_j (-1)**j C^(j) / s**(j+1)``; ``s`` must be nonzero.
    """
    n, P = C.shape
    Q = np.zeros_like(C)
    if n == 0:
        return Q
    D = C.copy()
    inv = 1.0 / s
    fac = inv.copy()
    scale = np.arange(1, P)
    for _ in range(P):
        Q += fac[:, None] * D
        nxt = np.zeros_like(D)
        nxt[:, :-1] = D[:, 1:] * scale
        D = nxt
        if not D.any():
            break
        fac = fac * (-inv)
    return Q


if _backend.HAVE_NUMBA:
    from numba import njit

    @njit(cache=True)
    def convolve_terms_numba(ka, ra, pa, ca, kb, rb, pb, cb, rate_map, K, n_rates, n_deg):
        d = ka.shape[1]
        M = 2 * K + 1
        n_modes = M**d
        out = np.zeros((n_modes, n_rates, n_deg), dtype=np.complex128)
        na = ca.shape[0]
        nb = cb.shape[0]
        for i in range(na):
            for j in range(nb):
                flat = 0
                ok = True
                for ax in range(d):
                    kk = ka[i, ax] + kb[j, ax]
                    if kk < -K or kk > K:
                        ok = False
                        break
                    flat = flat * M + (kk + K)
                if ok:
                    out[flat, rate_map[ra[i], rb[j]], pa[i] + pb[j]] += ca[i] * cb[j]
        return out

    @njit(cache=True)
    def poly_resolvent_numba(C, s):
        n, P = C.shape
        Q = np.zeros_like(C)
        for r in range(n):
            inv = 1.0 / s[r]
            for q in range(P):
                # coefficient of y**q: sum_j (-1)^j (q+j)!/q! C[q+j] / s^(j+1)
                acc = 0.0 + 0.0j
                fac = inv
                ratio = 1.0
                for j in range(P - q):
                    acc += fac * ratio * C[r, q + j]
                    fac = -fac * inv
                    ratio = ratio * (q + j + 1)
                Q[r, q] = acc
        return Q

else:  # pragma: no cover
    convolve_terms_numba = None
    poly_resolvent_numba = None


def convolve_terms(ka, ra, pa, ca, kb, rb, pb, cb, rate_map, K, n_rates, n_deg):
    if _backend.USE_NUMBA:
        return convolve_terms_numba(ka, ra, pa, ca, kb, rb, pb, cb, rate_map, K, n_rates, n_deg)
    return convolve_terms_numpy(ka, ra, pa, ca, kb, rb, pb, cb, rate_map, K, n_rates, n_deg)


def poly_resolvent(C, s):
    C = np.ascontiguousarray(C, dtype=np.complex128)
    s = np.ascontiguousarray(s, dtype=np.float64)
    if _backend.USE_NUMBA:
        return poly_resolvent_numba(C, s)
    return poly_resolvent_numpy(C, s)


def poly_antiderivative(C):
    """Antiderivative vanishing at ``y = 0``; adds one degree column."""
    n, P = C.shape
    out = np.zeros((n, P + 1), dtype=C.dtype)
    out[:, 1:] = C / np.arange(1, P + 1)
    return out
