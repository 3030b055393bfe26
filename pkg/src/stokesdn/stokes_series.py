"""Small-amplitude expansion of Stokes waves, order by order in epsilon.

This is an oracle for the continuation code and deliberately shares nothing
with the flattening construction. The potential is written as

    Phi(x, y) = sum_j B_j e^{j y} sin(j x),

so it is harmonic and decays by construction; every surface quantity is a
power series in ``epsilon`` whose coefficients are sampled on an ``x`` grid.
With ``u = Phi_x`` and ``v = Phi_y`` at ``y = eta(x)`` the traveling wave
equations read

    c eta_x + v - eta_x u = 0
    c (u + eta_x v) - g eta + (v^2 - u^2 - 2 eta_x u v) / 2 = 0

and the amplitude is pinned by ``(sqrt(k) a_k + sqrt(g) b_k)/(k + g) = eps``
with ``a_k`` the ``cos(kx)`` coefficient of ``eta`` and ``b_k`` the
``sin(kx)`` coefficient of ``psi = Phi(x, eta)``.

At each order the unknowns of modes ``j != k`` solve the 2x2 linearized
system; mode ``k`` is singular there and is completed by the wave-speed
correction of the previous order and the amplitude constraint.
"""
from dataclasses import dataclass
from math import factorial, sqrt

import numpy as np


def _mul(a, b):
    """Truncated Cauchy product of two grid-valued power series."""
    n = a.shape[0]
    out = np.zeros(np.broadcast_shapes(a.shape, b.shape))
    for i in range(n):
        if np.any(a[i]):
            out[i:] += a[i] * b[: n - i]
    return out


def _sin_cos(vals, jmax):
    """Sine and cosine coefficients (j = 0..jmax) of real samples on a uniform grid."""
    hat = np.fft.rfft(vals, axis=-1) / vals.shape[-1]
    cosc = 2 * hat.real[..., : jmax + 1]
    cosc[..., 0] /= 2
    return -2 * hat.imag[..., : jmax + 1], cosc


@dataclass
class StokesSeries:
    """Taylor coefficients ``c[n]``, ``eta_cos[n, j]``, ``psi_sin[n, j]`` for n <= order."""

    k: int
    g: float
    order: int
    c: np.ndarray
    eta_cos: np.ndarray
    psi_sin: np.ndarray
    mean_defect: float

    def speed(self, eps):
        return float(np.polynomial.polynomial.polyval(eps, self.c))


class _Expansion:
    def __init__(self, k, g, N):
        self.k, self.g, self.N = k, g, N
        self.jmax = N * k
        self.ng = 8 * (self.jmax + 2)
        self.x = 2 * np.pi * np.arange(self.ng) / self.ng
        js = np.arange(self.jmax + 1)
        self.js = js
        self.cos = np.cos(np.outer(js, self.x))
        self.sin = np.sin(np.outer(js, self.x))
        self.A = np.zeros((N + 1, self.jmax + 1))
        self.B = np.zeros((N + 1, self.jmax + 1))
        self.C = np.zeros(N + 1)

    def surface(self):
        """(kinematic, dynamic, psi) as grid-valued power series."""
        N, ng = self.N, self.ng
        eta = self.A @ self.cos
        eta_x = self.A @ (-self.js[:, None] * self.sin)
        powers = [np.zeros((N + 1, ng))]
        powers[0][0] = 1.0
        for _ in range(N):
            powers.append(_mul(powers[-1], eta))
        u = np.zeros((N + 1, ng))
        v = np.zeros_like(u)
        psi = np.zeros_like(u)
        for j in range(1, self.jmax + 1):
            if not np.any(self.B[:, j]):
                continue
            ej = sum(powers[m] * (j**m / factorial(m)) for m in range(N + 1))
            s = _mul(self.B[:, j][:, None], ej)
            psi += s * self.sin[j]
            u += s * (j * self.cos[j])
            v += s * (j * self.sin[j])
        c = self.C[:, None]
        kin = _mul(c, eta_x) + v - _mul(eta_x, u)
        dyn = (
            _mul(c, u + _mul(eta_x, v))
            - self.g * eta
            + 0.5 * (_mul(v, v) - _mul(u, u) - 2 * _mul(eta_x, _mul(u, v)))
        )
        return kin, dyn, psi

    def solve(self):
        k, g = self.k, self.g
        c0 = sqrt(g / k)
        self.C[0] = c0
        self.A[1, k] = sqrt(k)
        self.B[1, k] = sqrt(g)
        mean_defect = 0.0
        for n in range(2, self.N + 1):
            kin, dyn, psi = self.surface()
            ks, _ = _sin_cos(kin[n], self.jmax)
            _, dc = _sin_cos(dyn[n], self.jmax)
            ps, _ = _sin_cos(psi[n], self.jmax)
            mean_defect = max(mean_defect, abs(dc[0]))
            for j in range(1, self.jmax + 1):
                if j == k:
                    M = np.array(
                        [
                            [-c0 * k, k, -k * self.A[1, k]],
                            [-g, c0 * k, k * self.B[1, k]],
                            [sqrt(k), sqrt(g), 0.0],
                        ]
                    )
                    rhs = [-ks[k], -dc[k], -sqrt(g) * ps[k]]
                    self.A[n, k], self.B[n, k], self.C[n - 1] = np.linalg.solve(M, rhs)
                else:
                    M = np.array([[-c0 * j, j], [-g, c0 * j]])
                    self.A[n, j], self.B[n, j] = np.linalg.solve(M, [-ks[j], -dc[j]])
        return mean_defect


def stokes_series(k=1, g=1.0, order=5):
    """Expansion coefficients through ``order`` of the branch bifurcating at ``sqrt(g/k)``.

    Internally solves one order further, since ``c`` at order ``n`` is fixed by
    the solvability condition at order ``n + 1``.
    """
    if k < 1 or g <= 0 or order < 1:
        raise ValueError("need k >= 1, g > 0, order >= 1")
    ex = _Expansion(k, g, order + 1)
    mean_defect = ex.solve()
    _, _, psi = ex.surface()
    psi_sin, _ = _sin_cos(psi, ex.jmax)
    n = order + 1
    jm = order * k + 1
    return StokesSeries(
        k,
        g,
        order,
        ex.C[:n].copy(),
        ex.A[:n, :jm].copy(),
        psi_sin[:n, :jm].copy(),
        mean_defect,
    )
