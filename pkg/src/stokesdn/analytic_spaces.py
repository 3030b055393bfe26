"""Truncated Fourier series on the torus and analytic-Sobolev norms.

A :class:`PeriodicFunction` stores the full complex coefficient array of a
real function on ``T^d`` (``d`` in {1, 2}) with modes ``|k|_inf <= K``.
Array index ``i`` along each axis holds wavenumber ``i - K``.
"""
from dataclasses import dataclass

import numpy as np
from scipy import signal

from .errors import DimensionMismatch

SYMMETRY_TOL = 1e-9


# ---------------------------------------------------------------- modes


def mode_l1(k):
    """``|k|_1`` for an integer vector (or array of them along the last axis)."""
    return np.sum(np.abs(np.asarray(k)), axis=-1)


def mode_euclid(k):
    """Euclidean norm ``|k|``."""
    k = np.asarray(k, dtype=float)
    return np.sqrt(np.sum(k * k, axis=-1))


def mode_bracket(k):
    """``<k> = max(1, |k|)``."""
    return np.maximum(1.0, mode_euclid(k))


def mode_grid(d, K):
    """Integer wavenumbers of shape ``(2K+1,)*d + (d,)``."""
    ax = np.arange(-K, K + 1)
    mesh = np.meshgrid(*([ax] * d), indexing="ij")
    return np.stack(mesh, axis=-1)


def mode_list(d, K):
    """Wavenumbers in flattened (row-major) order, shape ``((2K+1)**d, d)``."""
    return mode_grid(d, K).reshape(-1, d)


def flat_index(k, K):
    """Row-major flat index of the mode vector ``k``."""
    M = 2 * K + 1
    idx = 0
    for kj in np.atleast_1d(k):
        idx = idx * M + (int(kj) + K)
    return idx


def grid_size(K):
    """Collocation points per dimension used for pointwise nonlinearities."""
    return 4 * K + 4


# ---------------------------------------------------------- the function


class PeriodicFunction:
    """Real-valued truncated Fourier series ``u(x) = sum_k u_k e^{i k.x}``.

    Conjugate symmetry ``u_{-k} = conj(u_k)`` is enforced on construction:
    the input is symmetrized and rejected if it was far from symmetric.
    Instances are immutable.
    """

    __slots__ = ("_c",)

    def __init__(self, coeffs, *, check=True):
        c = np.array(coeffs, dtype=complex)
        if c.ndim not in (1, 2):
            raise DimensionMismatch(f"only d in {{1, 2}} supported, got d={c.ndim}")
        M = c.shape[0]
        if any(n != M for n in c.shape) or M % 2 == 0:
            raise ValueError(f"coefficient array must be (2K+1,)*d, got {c.shape}")
        mirrored = np.conj(c[(slice(None, None, -1),) * c.ndim])
        sym = 0.5 * (c + mirrored)
        if check:
            scale = max(1.0, float(np.max(np.abs(c)))) if c.size else 1.0
            if np.max(np.abs(c - sym)) > SYMMETRY_TOL * scale:
                raise ValueError("coefficients are not conjugate-symmetric (function not real)")
        sym.flags.writeable = False
        self._c = sym

    # construction helpers
    @classmethod
    def zeros(cls, d, K):
        return cls(np.zeros((2 * K + 1,) * d, dtype=complex), check=False)

    @classmethod
    def constant(cls, value, d=1, K=0):
        c = np.zeros((2 * K + 1,) * d, dtype=complex)
        c[(K,) * d] = value
        return cls(c)

    @classmethod
    def from_modes(cls, modes, d, K):
        """Build from ``{k: value}``; conjugate partners are filled in.

        Keys are ints (d=1) or tuples. Specifying both ``k`` and ``-k`` is
        allowed if they are consistent.
        """
        c = np.zeros((2 * K + 1,) * d, dtype=complex)
        seen = {}
        for k, v in modes.items():
            k = tuple(np.atleast_1d(k).astype(int))
            if len(k) != d:
                raise DimensionMismatch(f"mode {k} has wrong dimension for d={d}")
            if max(abs(kj) for kj in k) > K:
                raise ValueError(f"mode {k} exceeds truncation K={K}")
            seen[k] = complex(v)
        for k, v in seen.items():
            neg = tuple(-kj for kj in k)
            idx = tuple(kj + K for kj in k)
            nidx = tuple(kj + K for kj in neg)
            c[idx] = v
            if neg in seen:
                continue
            c[nidx] = np.conj(v)
        return cls(c)

    @classmethod
    def cos(cls, k, K, amplitude=1.0, d=1):
        """``amplitude * cos(k . x)``."""
        return cls.from_modes({tuple(np.atleast_1d(k)): 0.5 * amplitude}, d, K)

    @classmethod
    def sin(cls, k, K, amplitude=1.0, d=1):
        """``amplitude * sin(k . x)``."""
        return cls.from_modes({tuple(np.atleast_1d(k)): -0.5j * amplitude}, d, K)

    @classmethod
    def from_grid(cls, values, K):
        """Project collocation values on the uniform grid to modes ``|k|_inf <= K``."""
        values = np.asarray(values)
        d = values.ndim
        N = values.shape[0]
        if N < 2 * K + 1:
            raise ValueError(f"grid of {N} points cannot resolve K={K}")
        hat = np.fft.fftn(values) / N**d
        idx = np.arange(-K, K + 1) % N
        c = hat[np.ix_(*([idx] * d))]
        return cls(c, check=False)

    # accessors
    @property
    def coeffs(self):
        return self._c

    @property
    def d(self):
        return self._c.ndim

    @property
    def K(self):
        return (self._c.shape[0] - 1) // 2

    def __getitem__(self, k):
        k = np.atleast_1d(k)
        K = self.K
        if np.max(np.abs(k)) > K:
            return 0j
        return complex(self._c[tuple(int(kj) + K for kj in k)])

    def modes(self):
        return mode_grid(self.d, self.K)

    def mean(self):
        return self[(0,) * self.d].real

    # algebra
    def resize(self, K):
        """Zero-pad or clip (keeping ``|k|_inf <= K``) to a new truncation."""
        d, K0 = self.d, self.K
        c = np.zeros((2 * K + 1,) * d, dtype=complex)
        m = min(K, K0)
        src = tuple(slice(K0 - m, K0 + m + 1) for _ in range(d))
        dst = tuple(slice(K - m, K + m + 1) for _ in range(d))
        c[dst] = self._c[src]
        return PeriodicFunction(c, check=False)

    def _aligned(self, other):
        if not isinstance(other, PeriodicFunction):
            raise TypeError("expected PeriodicFunction")
        if other.d != self.d:
            raise DimensionMismatch(f"d={self.d} vs d={other.d}")
        K = max(self.K, other.K)
        return self.resize(K)._c, other.resize(K)._c

    def __add__(self, other):
        if np.isscalar(other):
            return self + PeriodicFunction.constant(float(np.real(other)), self.d, self.K)
        a, b = self._aligned(other)
        return PeriodicFunction(a + b, check=False)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other)

    def __neg__(self):
        return PeriodicFunction(-self._c, check=False)

    def __mul__(self, other):
        if isinstance(other, PeriodicFunction):
            return product(self, other)
        return PeriodicFunction(self._c * float(other), check=False)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return PeriodicFunction(self._c / float(scalar), check=False)

    def allclose(self, other, atol=1e-12):
        a, b = self._aligned(other)
        return bool(np.max(np.abs(a - b), initial=0.0) <= atol)

    # grid evaluation
    def to_grid(self, N=None):
        """Values on the uniform grid ``x_j = 2 pi j / N`` in each dimension."""
        d, K = self.d, self.K
        N = grid_size(K) if N is None else N
        if N < 2 * K + 1:
            raise ValueError(f"grid of {N} points cannot resolve K={K}")
        arr = np.zeros((N,) * d, dtype=complex)
        idx = np.arange(-K, K + 1) % N
        arr[np.ix_(*([idx] * d))] = self._c
        return np.real(np.fft.ifftn(arr) * N**d)

    def __call__(self, x):
        """Evaluate at points ``x`` of shape ``(..., d)`` (or scalar/1-d array when d=1)."""
        x = np.asarray(x, dtype=float)
        if self.d == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            x = x[..., None]
        k = mode_list(self.d, self.K)
        phase = np.exp(1j * np.tensordot(x, k.T, axes=1))
        return np.real(phase @ self._c.reshape(-1))

    def __repr__(self):
        return f"PeriodicFunction(d={self.d}, K={self.K})"

    # JSON
    def to_json_dict(self):
        d, K = self.d, self.K
        entries = []
        for k in mode_list(d, K):
            if not _lex_nonneg(k):
                continue
            v = self[k]
            if v == 0:
                continue
            entries.append({"k": [int(x) for x in k], "re": float(v.real), "im": float(v.imag)})
        return {"d": d, "K": K, "coeffs": entries}

    @classmethod
    def from_json_dict(cls, data):
        try:
            d = int(data["d"])
            K = int(data["K"])
            raw = data["coeffs"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed coefficient record: {exc}") from exc
        modes = {}
        for e in raw:
            k = tuple(int(x) for x in e["k"])
            if not _lex_nonneg(np.array(k)):
                raise ValueError(f"mode {k} is not lexicographically >= 0")
            modes[k] = complex(float(e["re"]), float(e.get("im", 0.0)))
        return cls.from_modes(modes, d, K)


def _lex_nonneg(k):
    for kj in k:
        if kj > 0:
            return True
        if kj < 0:
            return False
    return True


# ----------------------------------------------------------------- norms


@dataclass(frozen=True)
class NormParams:
    sigma: float = 0.0
    s: float = 0.0

    def __post_init__(self):
        if self.sigma < 0 or self.s < 0:
            raise ValueError("sigma and s must be nonnegative")


def sobolev_weights(d, K, sigma, s):
    """``e^{2 sigma |k|_1} <k>^{2 s}`` on the mode grid."""
    k = mode_grid(d, K)
    return np.exp(2.0 * sigma * mode_l1(k)) * mode_bracket(k) ** (2.0 * s)


def norm_sigma_s(u, p=None, *, sigma=None, s=None):
    """Analytic-Sobolev norm ``(sum_k e^{2 sigma |k|_1} <k>^{2s} |u_k|^2)^{1/2}``."""
    if p is None:
        p = NormParams(sigma or 0.0, s or 0.0)
    w = sobolev_weights(u.d, u.K, p.sigma, p.s)
    return float(np.sqrt(np.sum(w * np.abs(u.coeffs) ** 2)))


def l2_inner(u, v):
    """Normalized L^2 pairing ``(2 pi)^{-d} int u v dx = sum_k u_k conj(v_k)``."""
    a, b = u._aligned(v)
    return float(np.real(np.sum(a * np.conj(b))))


# ---------------------------------------------------------- operations


def product(u, v, *, full=False):
    """Exact product by discrete convolution of the coefficient arrays.

    The full product has support ``K_u + K_v``; unless ``full`` is set it is
    clipped back to ``max(K_u, K_v)``.
    """
    if u.d != v.d:
        raise DimensionMismatch(f"d={u.d} vs d={v.d}")
    c = signal.convolve(u.coeffs, v.coeffs, method="direct")
    out = PeriodicFunction(c, check=False)
    return out if full else out.resize(max(u.K, v.K))


def fourier_multiplier(u, symbol):
    """Multiply coefficient ``k`` by ``symbol(k)``.

    ``symbol`` is a callable receiving the integer mode grid of shape
    ``(2K+1,)*d + (d,)`` and returning an array of shape ``(2K+1,)*d``, or
    such an array directly. The result must again describe a real function.
    """
    sym = symbol(u.modes()) if callable(symbol) else np.asarray(symbol)
    return PeriodicFunction(u.coeffs * sym)


def ddx(u, j=0):
    """``d/dx_j``."""
    return fourier_multiplier(u, lambda k: 1j * k[..., j])


def abs_d(u):
    """``|D| = (-Delta)^{1/2}``."""
    return fourier_multiplier(u, mode_euclid)


def laplacian(u):
    return fourier_multiplier(u, lambda k: -np.sum(k * k, axis=-1).astype(float))


def translate(u, theta):
    """``u(x + theta)``."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    return fourier_multiplier(u, lambda k: np.exp(1j * (k @ theta)))


def reflect(u):
    """``u(-x)``."""
    c = u.coeffs[(slice(None, None, -1),) * u.d]
    return PeriodicFunction(c, check=False)


def gradient(u):
    return [ddx(u, j) for j in range(u.d)]


def check_tame_product(u, v, sigma, s, s0):
    """Empirical constant of the tame product estimate.

    Returns a record with the ratio
    ``|uv|_{sigma,s} / (|u|_{sigma,s} |v|_{sigma,s0} + |u|_{sigma,s0} |v|_{sigma,s})``;
    the ratio is 0 when the denominator vanishes.
    """
    if s0 <= u.d / 2:
        raise ValueError(f"s0={s0} must exceed d/2={u.d / 2}")
    if s < s0:
        raise ValueError("need s >= s0")
    uv = product(u, v, full=True)
    hi = NormParams(sigma, s)
    lo = NormParams(sigma, s0)
    num = norm_sigma_s(uv, hi)
    den = norm_sigma_s(u, hi) * norm_sigma_s(v, lo) + norm_sigma_s(u, lo) * norm_sigma_s(v, hi)
    ratio = 0.0 if den == 0 else num / den
    return {"ratio": ratio, "numerator": num, "denominator": den, "sigma": sigma, "s": s, "s0": s0}
