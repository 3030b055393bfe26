"""Decaying solutions of the flat half-cylinder Poisson problem.

Given a source ``g`` with no constant part, ``L(g)`` is the unique ``u`` in
``C + H`` with

    Delta_{x,y} u = g   on y < 0,    u(x, 0) = 0,    d_y u -> 0 as y -> -inf.

Mode by mode this is ``u_k'' - |k|^2 u_k = g_k``, solved in closed form with
the integral operators

    T_lam p(y)  = int_{-inf}^y exp(lam (z - y)) p(z) dz
    Tt_lam p(y) = int_y^0     exp(lam (y - z)) p(z) dz.

Both map exponential-polynomials to exponential-polynomials. A column
``P(y) e^{mu y}`` (``P`` a polynomial) is sent by ``T_lam`` to
``Q(y) e^{mu y}`` where ``Q' + (lam + mu) Q = P``; the polynomial solution is
given by :func:`kernels.poly_resolvent`.

The per-profile functions operate on :class:`ExpPolyProfile` and serve as a
readable reference; :func:`solve_poisson` is the vectorized version used by
the solver.
"""
from collections import defaultdict

import numpy as np

from . import kernels
from .halfspace import (
    DEFAULT_TOLS,
    ExpPolyProfile,
    HalfCylinderFunction,
    merge_rates,
    normalize,
)
from .analytic_spaces import mode_euclid
from .errors import DivergentIntegral, NonzeroConstantSource


def _columns(profile):
    """Group terms by rate: ``{mu: coefficient array in ascending degree}``."""
    cols = defaultdict(dict)
    for mu, p, c in profile.terms:
        cols[mu][p] = cols[mu].get(p, 0j) + c
    out = {}
    for mu, entries in cols.items():
        arr = np.zeros(max(entries) + 1, dtype=complex)
        for p, c in entries.items():
            arr[p] = c
        out[mu] = arr
    return out


def _resolvent(C, s):
    return kernels.poly_resolvent(C[None, :], np.array([s]))[0]


def _eval_poly(C, y):
    return np.polynomial.polynomial.polyval(y, C)


def _is_resonant(mu, lam, tol):
    return abs(mu - lam) <= tol * max(1.0, mu)


def t_lambda(profile, lam):
    """``T_lam`` applied to an exp-poly profile; output rates equal input rates."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    terms = []
    for mu, C in _columns(profile).items():
        s = lam + mu
        if s == 0:
            raise DivergentIntegral("T_0 of a term with zero decay rate diverges")
        Q = _resolvent(C, s)
        terms += [(mu, p, q) for p, q in enumerate(Q)]
    return ExpPolyProfile(terms, allow_constant=True)


def t_tilde_lambda(profile, lam, tols=DEFAULT_TOLS):
    """``Tt_lam`` applied to an exp-poly profile (``lam > 0``).

    Rates equal to ``lam`` (within the merge tolerance) take the resonant
    branch and raise the degree by one instead of dividing by ``mu - lam``.
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    terms = []
    for mu, C in _columns(profile).items():
        if _is_resonant(mu, lam, tols.merge):
            anti = kernels.poly_antiderivative(C[None, :])[0]
            terms += [(lam, p, -a) for p, a in enumerate(anti)]
        else:
            R = _resolvent(C, mu - lam)
            terms.append((lam, 0, R[0]))
            terms += [(mu, p, -r) for p, r in enumerate(R)]
    return ExpPolyProfile(terms, tols=tols, allow_constant=True)


def solve_mode_zero(g0):
    """``u'' = g0``, ``u(0) = 0``, ``u' -> 0``: returns ``(profile, constant)``."""
    if len(g0) == 0:
        return ExpPolyProfile(), 0j
    if np.any(g0.mus <= 0):
        raise DivergentIntegral("mode-0 source needs strictly positive decay rates")
    prof = t_lambda(t_lambda(g0, 0.0), 0.0)
    return prof, -prof.value_at_zero()


def solve_mode(k, gk, tols=DEFAULT_TOLS):
    """Decaying solution of ``u'' - |k|^2 u = gk`` with ``u(0) = 0`` (k != 0)."""
    lam = float(np.linalg.norm(np.atleast_1d(k)))
    if lam == 0:
        raise ValueError("use solve_mode_zero for k = 0")
    if len(gk) == 0:
        return ExpPolyProfile()
    if np.any(gk.mus <= 0):
        raise ValueError("sources at k != 0 must have strictly positive decay rates")
    T = t_lambda(gk, lam)
    Tt = t_tilde_lambda(gk, lam, tols)
    boundary = ExpPolyProfile([(lam, 0, T.value_at_zero())])
    return (T * -1.0 - Tt + boundary) * (1.0 / (2.0 * lam))


def solve_poisson(g, tols=DEFAULT_TOLS):
    """``L(g)`` for a :class:`HalfCylinderFunction` source with zero constant part."""
    if g.constant != 0:
        raise NonzeroConstantSource(f"source has constant part {g.constant}")
    d, K = g.d, g.K
    if not np.any(g.coeffs):
        return HalfCylinderFunction.zeros(d, K)
    if np.any(g.rates <= 0):
        raise DivergentIntegral("source terms need strictly positive decay rates")
    lam_all = mode_euclid(g.modes())
    m_idx, r_idx = np.nonzero(np.any(g.coeffs != 0, axis=2))
    lam = lam_all[m_idx]
    mu = g.rates[r_idx]
    C = g.coeffs[m_idx, r_idx, :]
    P = g.n_deg

    grid, gi = merge_rates(np.concatenate([g.rates, np.unique(lam_all[lam_all > 0])]), tols.merge)
    rate_of_mu = gi[: g.rates.size]
    lam_vals = np.unique(lam_all[lam_all > 0])
    lam_pos = dict(zip(lam_vals.tolist(), gi[g.rates.size:].tolist()))

    out = np.zeros((g.n_modes, grid.size, P + 1), dtype=complex)
    const = 0j

    zero = lam == 0
    if np.any(zero):
        C0, mu0 = C[zero], mu[zero]
        Q = kernels.poly_resolvent(kernels.poly_resolvent(C0, mu0), mu0)
        np.add.at(out, (m_idx[zero], rate_of_mu[r_idx[zero]], slice(0, P)), Q)
        const = -np.sum(Q[:, 0])

    nz = ~zero
    if np.any(nz):
        m1, r1, l1, mu1, C1 = m_idx[nz], r_idx[nz], lam[nz], mu[nz], C[nz]
        half = 1.0 / (2.0 * l1)
        Tcol = kernels.poly_resolvent(C1, l1 + mu1)
        lam_rate = np.array([lam_pos[v] for v in l1.tolist()], dtype=np.int64)
        res = np.abs(mu1 - l1) <= tols.merge * np.maximum(1.0, mu1)

        nr = ~res
        if np.any(nr):
            R = kernels.poly_resolvent(C1[nr], mu1[nr] - l1[nr])
            h = half[nr][:, None]
            np.add.at(out, (m1[nr], rate_of_mu[r1[nr]], slice(0, P)), (R - Tcol[nr]) * h)
            np.add.at(out, (m1[nr], lam_rate[nr], 0), (Tcol[nr, 0] - R[:, 0]) * half[nr])
        if np.any(res):
            anti = kernels.poly_antiderivative(C1[res])
            body = anti.copy()
            body[:, :P] -= Tcol[res]
            body[:, 0] += Tcol[res, 0]
            np.add.at(out, (m1[res], lam_rate[res], slice(0, P + 1)), body * half[res][:, None])

    u = HalfCylinderFunction(d, K, grid, out, const)
    return normalize(u, tols=tols)
