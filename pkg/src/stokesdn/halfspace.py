"""Functions on the half-cylinder ``T^d x (-inf, 0]`` in closed form.

Every Fourier mode carries an exponential-polynomial profile

    u_k(y) = sum_t c_t y**p_t exp(mu_t y),   mu_t >= 0,

and the constant part of the function (the ``C`` summand of ``C + H``) is
stored separately. This class of functions is closed under products,
``d/dy``, ``d/dx_j``, the harmonic propagator ``exp(y|D|)`` and the
variation-of-constants integrals used by :mod:`stokesdn.poisson`, so no
discretization in ``y`` is ever needed.

Storage is dense: ``coeffs[m, r, p]`` multiplies ``y**p exp(rates[r] y)`` at
the mode with flat index ``m`` (see :func:`analytic_spaces.flat_index`).
All instances share the same invariants: ``rates`` strictly increasing,
no nonzero coefficient at rate 0 (constants live in ``constant``).
"""
from dataclasses import dataclass
from math import factorial

import numpy as np

from . import kernels
from .analytic_spaces import (
    PeriodicFunction,
    flat_index,
    mode_bracket,
    mode_euclid,
    mode_l1,
    mode_list,
)
from .errors import DimensionMismatch, MuTooSmall, TermCapExceeded


@dataclass(frozen=True)
class Tolerances:
    """Normalization policy.

    ``merge``: relative gap under which two rates are identified.
    ``prune``: terms whose sup-norm ``|c| sup_y |y^p e^{mu y}|`` is below
    ``prune`` times the largest such value in the function are dropped.
    ``max_terms``: hard cap on stored terms per mode.
    """

    merge: float = 1e-12
    prune: float = 1e-14
    max_terms: int = 512


DEFAULT_TOLS = Tolerances()
# Derivatives and norms never add terms, so they skip pruning and the cap.
_UNCAPPED = Tolerances(DEFAULT_TOLS.merge, 0.0, np.iinfo(np.int64).max)


@dataclass(frozen=True)
class WeightedNormParams:
    sigma: float = 0.0
    s: float = 0
    a: float = 0.5

    def __post_init__(self):
        if not 0 < self.a < 1:
            raise ValueError("weight a must lie in (0, 1)")
        if self.sigma < 0 or self.s < 0:
            raise ValueError("sigma and s must be nonnegative")


# ------------------------------------------------------------------ rates


def merge_rates(values, tol):
    """Cluster sorted rates; returns (grid, index of each input value).

    A value joins the current cluster when it is within ``tol * max(1, mu)``
    of the cluster's smallest member, which is the representative.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return np.zeros(0), np.zeros(0, dtype=np.int64)
    order = np.argsort(values, kind="stable")
    sv = values[order]
    # fast path: exact duplicates only
    uniq, inv = np.unique(sv, return_inverse=True)
    gaps = np.diff(uniq)
    if uniq.size < 2 or np.all(gaps > tol * np.maximum(1.0, uniq[:-1])):
        grid = uniq
        cl = inv
    else:
        labels = np.empty(uniq.size, dtype=np.int64)
        reps = []
        start = None
        for i, v in enumerate(uniq):
            if start is None or v - start > tol * max(1.0, start):
                start = v
                reps.append(v)
            labels[i] = len(reps) - 1
        grid = np.array(reps)
        cl = labels[inv]
    idx = np.empty(values.size, dtype=np.int64)
    idx[order] = cl
    return grid, idx


def sup_weights(rates, n_deg):
    """``sup_{y<=0} |y|^p e^{mu y} = (p / (e mu))^p`` for each (rate, degree)."""
    rates = np.asarray(rates, dtype=float)
    p = np.arange(n_deg, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        w = (p[None, :] / (np.e * rates[:, None])) ** p[None, :]
    w[:, 0] = 1.0
    w[~np.isfinite(w)] = np.inf
    return w


# --------------------------------------------------------------- profiles


class ExpPolyProfile:
    """Finite sum of ``c y**p exp(mu y)`` on ``y <= 0``.

    Terms are merged (equal ``p``, ``mu`` within ``merge`` tolerance) and
    zero coefficients dropped on construction. The pure constant term
    (``mu = 0, p = 0``) is not allowed here.
    """

    __slots__ = ("mus", "ps", "cs")

    def __init__(self, terms=(), *, tols=DEFAULT_TOLS, allow_constant=False):
        terms = list(terms)
        mus = np.array([float(t[0]) for t in terms], dtype=float)
        ps = np.array([int(t[1]) for t in terms], dtype=np.int64)
        cs = np.array([complex(t[2]) for t in terms], dtype=complex)
        if np.any(mus < 0):
            raise ValueError("decay rates must be nonnegative")
        if np.any(ps < 0):
            raise ValueError("degrees must be nonnegative")
        grid, idx = merge_rates(mus, tols.merge)
        acc = {}
        for i, (r, p) in enumerate(zip(idx, ps)):
            acc[(int(r), int(p))] = acc.get((int(r), int(p)), 0j) + cs[i]
        keys = sorted(k for k, v in acc.items() if v != 0)
        self.mus = np.array([grid[r] for r, _ in keys], dtype=float)
        self.ps = np.array([p for _, p in keys], dtype=np.int64)
        self.cs = np.array([acc[k] for k in keys], dtype=complex)
        if not allow_constant and np.any((self.mus == 0) & (self.ps == 0)):
            raise ValueError("constant term (mu=0, p=0) belongs in the constant slot")

    @property
    def terms(self):
        return [(float(m), int(p), complex(c)) for m, p, c in zip(self.mus, self.ps, self.cs)]

    def __len__(self):
        return len(self.cs)

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        out = np.zeros(y.shape, dtype=complex)
        for m, p, c in zip(self.mus, self.ps, self.cs):
            out = out + c * y**p * np.exp(m * y)
        return out

    def value_at_zero(self):
        return complex(np.sum(self.cs[self.ps == 0]))

    def dy(self):
        terms = [(m, p, c * m) for m, p, c in zip(self.mus, self.ps, self.cs) if m != 0]
        terms += [(m, p - 1, c * p) for m, p, c in zip(self.mus, self.ps, self.cs) if p > 0]
        return ExpPolyProfile(terms, allow_constant=True)

    def __add__(self, other):
        return ExpPolyProfile(self.terms + other.terms, allow_constant=True)

    def __sub__(self, other):
        return self + other * -1.0

    def __mul__(self, scalar):
        return ExpPolyProfile([(m, p, c * scalar) for m, p, c in self.terms], allow_constant=True)

    __rmul__ = __mul__

    def is_close(self, other, atol=1e-12):
        diff = self - other
        return bool(np.all(np.abs(diff.cs) <= atol))

    def __repr__(self):
        body = " + ".join(f"({c:.6g}) y^{p} e^({m:g} y)" for m, p, c in self.terms) or "0"
        return f"ExpPolyProfile[{body}]"


# ---------------------------------------------------------- the function


class HalfCylinderFunction:
    """``u(x, y) = constant + sum_k u_k(y) e^{i k.x}`` with exp-poly ``u_k``."""

    __slots__ = ("d", "K", "rates", "coeffs", "constant")

    def __init__(self, d, K, rates, coeffs, constant=0.0):
        rates = np.asarray(rates, dtype=float)
        coeffs = np.asarray(coeffs, dtype=complex)
        n_modes = (2 * K + 1) ** d
        if coeffs.ndim != 3 or coeffs.shape[0] != n_modes or coeffs.shape[1] != rates.size:
            raise ValueError(
                f"coeffs shape {coeffs.shape} inconsistent with d={d}, K={K}, {rates.size} rates"
            )
        if coeffs.shape[2] == 0:
            coeffs = np.zeros((n_modes, rates.size, 1), dtype=complex)
        self.d = d
        self.K = K
        self.rates = rates
        self.coeffs = coeffs
        self.constant = complex(constant)

    # construction
    @classmethod
    def zeros(cls, d, K):
        return cls(d, K, np.zeros(0), np.zeros(((2 * K + 1) ** d, 0, 1)))

    @classmethod
    def constant_function(cls, value, d, K):
        out = cls.zeros(d, K)
        out.constant = complex(value)
        return out

    @classmethod
    def from_profiles(cls, d, K, profiles, constant=0.0, tols=DEFAULT_TOLS):
        """Build from ``{k: ExpPolyProfile}`` (keys int or tuple)."""
        mus, rows = [], []
        for k, prof in profiles.items():
            m = flat_index(k, K)
            if np.max(np.abs(np.atleast_1d(k))) > K:
                raise ValueError(f"mode {k} exceeds K={K}")
            for mu, p, c in prof.terms:
                mus.append(mu)
                rows.append((m, p, c))
        grid, idx = merge_rates(mus, tols.merge)
        P = 1 + max((r[1] for r in rows), default=0)
        coeffs = np.zeros(((2 * K + 1) ** d, grid.size, P), dtype=complex)
        for (m, p, c), r in zip(rows, idx):
            coeffs[m, r, p] += c
        out = cls(d, K, grid, coeffs, constant)
        if np.any(out.coeffs[:, out.rates == 0, 0] != 0):
            raise ValueError("constant terms belong in the constant slot")
        return out

    # inspection
    @property
    def n_modes(self):
        return self.coeffs.shape[0]

    @property
    def n_deg(self):
        return self.coeffs.shape[2]

    def modes(self):
        return mode_list(self.d, self.K)

    def profile(self, k):
        k = np.atleast_1d(k)
        if np.max(np.abs(k)) > self.K:
            return ExpPolyProfile()
        block = self.coeffs[flat_index(k, self.K)]
        r, p = np.nonzero(block)
        return ExpPolyProfile(
            [(self.rates[i], j, block[i, j]) for i, j in zip(r, p)], allow_constant=True
        )

    def nonzero_terms(self):
        """(mode vectors (n, d), rate indices, degrees, coefficients) of nonzero terms."""
        m, r, p = np.nonzero(self.coeffs)
        modes = self.modes()[m]
        return (
            np.ascontiguousarray(modes, dtype=np.int64),
            r.astype(np.int64),
            p.astype(np.int64),
            np.ascontiguousarray(self.coeffs[m, r, p]),
        )

    def terms_per_mode(self):
        return np.count_nonzero(self.coeffs.reshape(self.n_modes, -1), axis=1)

    def is_zero(self):
        return self.constant == 0 and not np.any(self.coeffs)

    def max_abs(self):
        """Largest ``|c| sup|y^p e^{mu y}|`` over stored terms."""
        if self.coeffs.size == 0 or not np.any(self.coeffs):
            return 0.0
        w = sup_weights(self.rates, self.n_deg)
        return float(np.max(np.abs(self.coeffs) * w[None]))

    def pi(self):
        """Drop the constant part."""
        return HalfCylinderFunction(self.d, self.K, self.rates, self.coeffs, 0.0)

    def with_constant(self, value):
        return HalfCylinderFunction(self.d, self.K, self.rates, self.coeffs, value)

    def __repr__(self):
        return (
            f"HalfCylinderFunction(d={self.d}, K={self.K}, rates={self.rates.size}, "
            f"deg<{self.n_deg}, terms={int(np.count_nonzero(self.coeffs))}, "
            f"constant={self.constant:.3g})"
        )

    # evaluation
    def evaluate(self, x, y):
        """Values at points ``x`` (shape ``(n, d)`` or ``(n,)`` when d=1) and depths ``y`` (n,)."""
        x = np.asarray(x, dtype=float)
        if self.d == 1 and x.ndim == 1:
            x = x[:, None]
        y = np.asarray(y, dtype=float)
        k = self.modes()
        phase = np.exp(1j * x @ k.T)  # (n, modes)
        ypow = y[:, None] ** np.arange(self.n_deg)[None, :]  # (n, P)
        ex = np.exp(np.outer(y, self.rates))  # (n, R)
        prof = np.einsum("mrp,nr,np->nm", self.coeffs, ex, ypow)
        return np.sum(prof * phase, axis=1) + self.constant

    # linear structure
    def _aligned(self, other, tols):
        if other.d != self.d:
            raise DimensionMismatch(f"d={self.d} vs d={other.d}")
        K = max(self.K, other.K)
        a, b = embed(self, K), embed(other, K)
        grid, idx = merge_rates(np.concatenate([a.rates, b.rates]), tols.merge)
        P = max(a.n_deg, b.n_deg)
        ca = np.zeros((a.n_modes, grid.size, P), dtype=complex)
        cb = np.zeros_like(ca)
        np.add.at(ca, (slice(None), idx[: a.rates.size], slice(0, a.n_deg)), a.coeffs)
        np.add.at(cb, (slice(None), idx[a.rates.size:], slice(0, b.n_deg)), b.coeffs)
        return K, grid, ca, cb

    def add(self, other, tols=DEFAULT_TOLS):
        if np.isscalar(other):
            return HalfCylinderFunction(self.d, self.K, self.rates, self.coeffs, self.constant + other)
        K, grid, ca, cb = self._aligned(other, tols)
        out = HalfCylinderFunction(self.d, K, grid, ca + cb, self.constant + other.constant)
        return normalize(out, tols=tols)

    def scale(self, s):
        return HalfCylinderFunction(self.d, self.K, self.rates, self.coeffs * s, self.constant * s)

    def __add__(self, other):
        return self.add(other)

    __radd__ = __add__

    def __neg__(self):
        return self.scale(-1.0)

    def __sub__(self, other):
        return self.add(-other)

    def __rsub__(self, other):
        return (-self).add(other)

    def __mul__(self, other):
        if isinstance(other, HalfCylinderFunction):
            return multiply(self, other)
        return self.scale(other)

    __rmul__ = __mul__

    def distance(self, other, tols=DEFAULT_TOLS):
        """Largest sup-weighted coefficient of ``self - other`` (including the constant)."""
        diff = self.add(-other, tols=Tolerances(tols.merge, 0.0, 1 << 30))
        return max(diff.max_abs(), abs(diff.constant))

    # JSON
    def to_json_dict(self):
        modes = self.modes()
        entries = []
        for m in range(self.n_modes):
            r, p = np.nonzero(self.coeffs[m])
            if r.size == 0:
                continue
            terms = [
                {
                    "mu": float(self.rates[i]),
                    "p": int(j),
                    "re": float(self.coeffs[m, i, j].real),
                    "im": float(self.coeffs[m, i, j].imag),
                }
                for i, j in zip(r, p)
            ]
            entries.append({"k": [int(v) for v in modes[m]], "terms": terms})
        return {
            "d": self.d,
            "K": self.K,
            "constant": {"re": self.constant.real, "im": self.constant.imag},
            "coeffs": entries,
        }

    @classmethod
    def from_json_dict(cls, data, tols=DEFAULT_TOLS):
        d, K = int(data["d"]), int(data["K"])
        profiles = {}
        for e in data["coeffs"]:
            k = tuple(int(v) for v in e["k"])
            profiles[k] = ExpPolyProfile(
                [(t["mu"], t["p"], complex(t["re"], t.get("im", 0.0))) for t in e["terms"]],
                tols=tols,
            )
        const = data.get("constant", {"re": 0.0, "im": 0.0})
        return cls.from_profiles(d, K, profiles, complex(const["re"], const.get("im", 0.0)), tols)


# ------------------------------------------------------------- operations


def embed(u, K):
    """Re-truncate to ``K`` (zero-pad or clip modes with ``|k|_inf > K``)."""
    if K == u.K:
        return u
    d, K0 = u.d, u.K
    M0, M = 2 * K0 + 1, 2 * K + 1
    c0 = u.coeffs.reshape((M0,) * d + u.coeffs.shape[1:])
    c = np.zeros((M,) * d + u.coeffs.shape[1:], dtype=complex)
    m = min(K, K0)
    src = tuple(slice(K0 - m, K0 + m + 1) for _ in range(d))
    dst = tuple(slice(K - m, K + m + 1) for _ in range(d))
    c[dst] = c0[src]
    return HalfCylinderFunction(d, K, u.rates, c.reshape((M**d,) + u.coeffs.shape[1:]), u.constant)


def normalize(u, tols=DEFAULT_TOLS, *, merge_tol=None, prune_tol=None):
    """Merge near-equal rates, prune negligible terms, trim empty storage.

    Raises :class:`TermCapExceeded` when a mode keeps more than
    ``tols.max_terms`` terms. Idempotent.
    """
    merge = tols.merge if merge_tol is None else merge_tol
    prune = tols.prune if prune_tol is None else prune_tol
    rates, coeffs = u.rates, u.coeffs
    if rates.size:
        grid, idx = merge_rates(rates, merge)
        if grid.size != rates.size:
            merged = np.zeros((coeffs.shape[0], grid.size, coeffs.shape[2]), dtype=complex)
            np.add.at(merged, (slice(None), idx, slice(None)), coeffs)
            rates, coeffs = grid, merged
    if coeffs.size and np.any(coeffs):
        w = sup_weights(rates, coeffs.shape[2])
        mag = np.abs(coeffs) * w[None]
        top = float(np.max(mag))
        if prune > 0:
            coeffs = np.where(mag < prune * top, 0.0, coeffs)
    keep_r = np.any(coeffs != 0, axis=(0, 2))
    rates, coeffs = rates[keep_r], coeffs[:, keep_r, :]
    used_p = np.nonzero(np.any(coeffs != 0, axis=(0, 1)))[0]
    P = int(used_p[-1]) + 1 if used_p.size else 1
    coeffs = np.ascontiguousarray(coeffs[:, :, :P])
    if rates.size and np.any(rates == 0):
        raise ValueError("rate-0 profile term encountered; constants belong in the constant slot")
    out = HalfCylinderFunction(u.d, u.K, rates, coeffs, u.constant)
    if rates.size:
        worst = int(np.max(out.terms_per_mode()))
        if worst > tols.max_terms:
            raise TermCapExceeded(f"{worst} terms in one mode exceeds cap {tols.max_terms}")
    return out


def lift_harmonic(g):
    """Harmonic extension ``exp(y|D|) g``: mode k gets ``g_k e^{|k| y}``, mode 0 the constant."""
    d, K = g.d, g.K
    modes = mode_list(d, K)
    lam = mode_euclid(modes)
    c = g.coeffs.reshape(-1)
    nz = (lam > 0) & (c != 0)
    grid, idx = merge_rates(lam[nz], DEFAULT_TOLS.merge)
    coeffs = np.zeros((modes.shape[0], grid.size, 1), dtype=complex)
    coeffs[np.nonzero(nz)[0], idx, 0] = c[nz]
    const = g.coeffs[(K,) * d]
    return HalfCylinderFunction(d, K, grid, coeffs, const)


def trace(u):
    """Restriction to ``y = 0`` as a :class:`PeriodicFunction` (constant included)."""
    d, K = u.d, u.K
    c = u.coeffs[:, :, 0].sum(axis=1).reshape((2 * K + 1,) * d)
    c = c.copy()
    c[(K,) * d] += u.constant
    return PeriodicFunction(c, check=False)


def dy(u):
    """``d/dy`` term by term; kills the constant."""
    r = u.rates[None, :, None]
    c = u.coeffs * r
    if u.n_deg > 1:
        c[:, :, :-1] += u.coeffs[:, :, 1:] * np.arange(1, u.n_deg)[None, None, :]
    return normalize(HalfCylinderFunction(u.d, u.K, u.rates, c, 0.0), _UNCAPPED)


def dx(u, j=0):
    """``d/dx_j``: multiply mode k by ``i k_j``; kills the constant."""
    kj = u.modes()[:, j].astype(float)
    c = u.coeffs * (1j * kj)[:, None, None]
    return normalize(HalfCylinderFunction(u.d, u.K, u.rates, c, 0.0), _UNCAPPED)


def laplacian_x(u):
    """Horizontal Laplacian ``sum_j d^2/dx_j^2``."""
    k2 = np.sum(u.modes().astype(float) ** 2, axis=1)
    c = u.coeffs * (-k2)[:, None, None]
    return normalize(HalfCylinderFunction(u.d, u.K, u.rates, c, 0.0), _UNCAPPED)


def laplacian(u, tols=DEFAULT_TOLS):
    """Full Laplacian ``Delta_{x,y}``."""
    return dy(dy(u)).add(laplacian_x(u), tols=tols)


def _sum_rate_map(ra, rb, tols):
    sums = (ra[:, None] + rb[None, :]).ravel()
    allv = np.concatenate([sums, ra, rb])
    grid, idx = merge_rates(allv, tols.merge)
    n = sums.size
    rate_map = idx[:n].reshape(ra.size, rb.size)
    return grid, rate_map, idx[n:n + ra.size], idx[n + ra.size:]


def multiply(u, v, tols=DEFAULT_TOLS):
    """Product on the representation: modes convolve, rates and degrees add.

    The result is truncated to ``max(K_u, K_v)`` and normalized.
    """
    if u.d != v.d:
        raise DimensionMismatch(f"d={u.d} vs d={v.d}")
    K = max(u.K, v.K)
    u, v = embed(u, K), embed(v, K)
    grid, rate_map, ia, ib = _sum_rate_map(u.rates, v.rates, tols)
    P = u.n_deg + v.n_deg - 1
    ka, ra, pa, ca = u.nonzero_terms()
    kb, rb, pb, cb = v.nonzero_terms()
    out = kernels.convolve_terms(
        ka, ra, pa, ca, kb, rb, pb, cb, np.ascontiguousarray(rate_map), K, grid.size, P
    )
    if v.constant != 0 and u.rates.size:
        out[:, ia, : u.n_deg] += v.constant * u.coeffs
    if u.constant != 0 and v.rates.size:
        out[:, ib, : v.n_deg] += u.constant * v.coeffs
    res = HalfCylinderFunction(u.d, K, grid, out, u.constant * v.constant)
    return normalize(res, tols=tols)


def _gram(rates, n_deg, a):
    """``int_{-inf}^0 y^{p+q} e^{(mu+nu-2a) y} dy`` for all (rate, degree) pairs."""
    mu = rates[:, None, None, None] + rates[None, None, :, None] - 2.0 * a
    pq = np.arange(n_deg)[None, :, None, None] + np.arange(n_deg)[None, None, None, :]
    fact = np.array([float(factorial(n)) for n in range(2 * n_deg)])
    G = (-1.0) ** pq * fact[pq] / mu ** (pq + 1)
    R = rates.size
    return G.reshape(R * n_deg, R * n_deg)


def weighted_norm_parts(u, p=WeightedNormParams()):
    """``(||Pi u||_{sigma,s,a}, |u - Pi u|)``.

    ``s`` may be real: y-derivatives ``j = 0..floor(s)`` are weighted by
    ``<k>^{2(s-j)}``.
    """
    const = abs(u.constant)
    if not np.any(u.coeffs):
        return 0.0, const
    live = np.any(u.coeffs != 0, axis=(0, 2))
    if np.any(u.rates[live] <= p.a):
        bad = float(np.min(u.rates[live]))
        raise MuTooSmall(f"rate {bad} <= a={p.a}: weighted norm is infinite")
    modes = u.modes()
    sob = np.exp(2.0 * p.sigma * mode_l1(modes))
    br = mode_bracket(modes)
    total = 0.0
    f = normalize(u.pi(), _UNCAPPED)
    for j in range(int(np.floor(p.s)) + 1):
        if j > 0:
            f = dy(f)
        if not np.any(f.coeffs):
            break
        G = _gram(f.rates, f.n_deg, p.a)
        X = f.coeffs.reshape(f.n_modes, -1)
        per_mode = np.real(np.einsum("mi,ij,mj->m", np.conj(X), G, X))
        total += float(np.sum(sob * br ** (2.0 * (p.s - j)) * per_mode))
    return float(np.sqrt(max(total, 0.0))), const


def norm_sigma_s_a(u, p=WeightedNormParams()):
    """Norm on ``C + H^{sigma,s,a}``: ``||Pi u|| + |u - Pi u|``."""
    hnorm, const = weighted_norm_parts(u, p)
    return hnorm + const


def profile_norm(profile, a=0.5):
    """``||p||_{L^{2,a}} = (int_{-inf}^0 |p(y)|^2 e^{-2 a y} dy)^{1/2}`` in closed form."""
    if len(profile) == 0:
        return 0.0
    if np.any(profile.mus <= a):
        raise MuTooSmall(f"rate {float(np.min(profile.mus))} <= a={a}")
    mu = profile.mus[:, None] + profile.mus[None, :] - 2.0 * a
    pq = profile.ps[:, None] + profile.ps[None, :]
    fact = np.array([float(factorial(int(n))) for n in pq.ravel()]).reshape(pq.shape)
    G = (-1.0) ** pq * fact / mu ** (pq + 1)
    val = np.real(np.conj(profile.cs) @ G @ profile.cs)
    return float(np.sqrt(max(val, 0.0)))
