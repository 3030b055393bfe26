"""The Dirichlet-Neumann operator of a periodic surface over infinite depth.

Pipeline for ``G(eta) psi``:

1. Flatten the fluid domain with ``(x, y) -> (x, y + exp(y|D|) eta)``.
   The harmonic potential becomes the solution ``phi`` of
   ``Delta phi = F(eta)[phi]`` with ``phi(x, 0) = psi``, where ``F`` has
   variable coefficients ``alpha, beta, gamma, delta`` built from
   ``rho = y + exp(y|D|) eta``.
2. Write ``phi = exp(y|D|) psi + u`` and solve ``u = L F (phi0 + u)`` by the
   Neumann series (``L`` is the flat Poisson inverse).
3. Assemble ``G = -grad eta . grad psi + (1 + f) d_y phi|_{y=0}`` with
   ``f = (|grad eta|^2 - |D| eta) / (1 + |D| eta)``.

All ``y``-dependence is exact (exp-poly algebra); the only approximations
are Fourier truncation, term pruning and series truncation.
"""
from dataclasses import asdict, dataclass, field

import numpy as np

from . import analytic_spaces as asp
from .analytic_spaces import PeriodicFunction, grid_size
from .errors import GuardViolation, NoContraction, SeriesDivergence
from .halfspace import (
    HalfCylinderFunction,
    Tolerances,
    WeightedNormParams,
    dx,
    dy,
    laplacian,
    lift_harmonic,
    multiply,
    norm_sigma_s_a,
    trace,
)
from .poisson import solve_poisson


@dataclass(frozen=True)
class DNConfig:
    K: int = 32
    d: int = 1
    a: float = 0.5
    neumann_tol: float = 1e-12
    neumann_max_iter: int = 200
    series_tol: float = 1e-16
    series_max_terms: int = 400
    merge_tol: float = 1e-12
    prune_tol: float = 1e-14
    max_terms: int = 512
    eta_smallness_guard: float = 1.0
    compute_residual: bool = True

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError("d must be 1 or 2")
        if self.K < 1:
            raise ValueError("K must be positive")
        if not 0 < self.a < 1:
            raise ValueError("a must lie in (0, 1)")
        if not 0 < self.eta_smallness_guard <= 1:
            raise ValueError("eta_smallness_guard must lie in (0, 1]")

    @property
    def tols(self):
        return Tolerances(self.merge_tol, self.prune_tol, self.max_terms)

    @property
    def norm_params(self):
        return WeightedNormParams(0.0, 1, self.a)

    def to_dict(self):
        return asdict(self)


@dataclass
class FlatteningCoefficients:
    alpha: HalfCylinderFunction
    beta: HalfCylinderFunction
    gamma: list
    delta: HalfCylinderFunction
    series_terms: int = 0
    series_residual: float = 0.0
    tols: Tolerances = field(default_factory=Tolerances)

    def is_zero(self):
        return all(c.is_zero() for c in [self.alpha, self.beta, self.delta, *self.gamma])


@dataclass
class SolveReport:
    iterations: int
    ratios: list
    residual: float
    guard: float
    series_terms: int
    series_residual: float

    @property
    def contraction(self):
        """Largest observed ratio of successive Neumann corrections."""
        return max(self.ratios, default=0.0)

    def to_dict(self):
        return {**asdict(self), "contraction": self.contraction}


def _fit(u, cfg):
    if u.d != cfg.d:
        raise ValueError(f"function has d={u.d}, config has d={cfg.d}")
    return u.resize(cfg.K)


def guard_value(eta, N=None):
    """``sup_x |(|D| eta)(x)|`` on the collocation grid (the y = 0 supremum)."""
    vals = asp.abs_d(eta).to_grid(grid_size(eta.K) if N is None else N)
    return float(np.max(np.abs(vals))) if vals.size else 0.0


def check_guard(eta, cfg):
    gv = guard_value(eta)
    if gv >= cfg.eta_smallness_guard:
        raise GuardViolation(
            f"sup |(|D| eta)| = {gv:.6g} >= {cfg.eta_smallness_guard}: flattening is not a diffeomorphism"
        )
    return gv


def flattening_coeffs(eta, cfg=DNConfig()):
    """Coefficients of ``F(eta)``.

    With ``b = exp(y|D|)|D| eta = d_y rho - 1`` and
    ``W = 1/d_y rho - 1 = sum_{j>=1} (-b)^j``:

        alpha = -W - |grad rho|^2 - W |grad rho|^2
        beta  = -b
        gamma = 2 grad rho
        delta = Delta_x rho - 2 (1+W) grad rho . grad b
                + (1 + |grad rho|^2)(1+W)^2 d_y b
    """
    eta = _fit(eta, cfg)
    check_guard(eta, cfg)
    tols = cfg.tols
    d, K = cfg.d, cfg.K
    b = lift_harmonic(asp.abs_d(eta))
    beta = -b
    grad_rho = [lift_harmonic(asp.ddx(eta, j)) for j in range(d)]
    gamma = [g * 2.0 for g in grad_rho]
    zero = HalfCylinderFunction.zeros(d, K)
    if b.is_zero():
        return FlatteningCoefficients(zero, zero, [zero] * d, zero, 0, 0.0, tols)

    # geometric series for 1/d_y rho - 1
    W = beta
    term = beta
    history = [beta.max_abs()]
    n_terms = 1
    while history[-1] >= cfg.series_tol:
        if n_terms >= cfg.series_max_terms:
            raise SeriesDivergence(f"no convergence after {n_terms} terms")
        term = multiply(term, beta, tols)
        W = W.add(term, tols)
        n_terms += 1
        history.append(term.max_abs())
        if len(history) >= 6 and all(
            history[i + 1] >= history[i] for i in range(len(history) - 6, len(history) - 1)
        ):
            raise SeriesDivergence("series terms non-decreasing over 5 consecutive terms")

    grad_sq = zero
    for g in grad_rho:
        grad_sq = grad_sq.add(multiply(g, g, tols), tols)
    alpha = -(W.add(grad_sq, tols).add(multiply(W, grad_sq, tols), tols))

    one_w = W + 1.0
    lap_rho = lift_harmonic(asp.laplacian(eta))
    grad_b = [lift_harmonic(asp.ddx(asp.abs_d(eta), j)) for j in range(d)]
    rho_yy = dy(b)
    cross = zero
    for g, gb in zip(grad_rho, grad_b):
        cross = cross.add(multiply(g, gb, tols), tols)
    delta = lap_rho.add(multiply(one_w, cross, tols) * -2.0, tols)
    factor = multiply(grad_sq + 1.0, multiply(one_w, one_w, tols), tols)
    delta = delta.add(multiply(factor, rho_yy, tols), tols)
    return FlatteningCoefficients(alpha, beta, gamma, delta, n_terms, history[-1], tols)


def apply_F(coeffs, phi):
    """``(alpha d_yy + beta Delta_x + gamma . grad d_y + delta d_y) phi``."""
    tols = coeffs.tols
    d, K = phi.d, phi.K
    if coeffs.is_zero():
        return HalfCylinderFunction.zeros(d, max(K, coeffs.beta.K))
    phi_y = dy(phi)
    out = multiply(coeffs.alpha, dy(phi_y), tols)
    lap = HalfCylinderFunction.zeros(d, K)
    for j in range(d):
        lap = lap.add(dx(dx(phi, j), j), tols)
    out = out.add(multiply(coeffs.beta, lap, tols), tols)
    for j, g in enumerate(coeffs.gamma):
        out = out.add(multiply(g, dx(phi_y, j), tols), tols)
    out = out.add(multiply(coeffs.delta, phi_y, tols), tols)
    return out.pi()


def _solve(coeffs, psi, cfg):
    tols = cfg.tols
    npar = cfg.norm_params
    phi0 = lift_harmonic(psi)
    ratios = []
    if coeffs.is_zero():
        return phi0, 0, ratios
    scale = norm_sigma_s_a(phi0.pi(), npar)
    u = HalfCylinderFunction.zeros(cfg.d, cfg.K)
    v = solve_poisson(apply_F(coeffs, phi0), tols)
    prev = scale
    iterations = 0
    streak = 0
    while True:
        nv = norm_sigma_s_a(v, npar)
        if nv == 0 and iterations == 0:
            break
        iterations += 1
        u = u.add(v, tols)
        ratio = nv / prev if prev > 0 else 0.0
        ratios.append(ratio)
        if nv <= cfg.neumann_tol * scale:
            break
        streak = streak + 1 if ratio >= 1 else 0
        if streak >= 3:
            raise NoContraction(f"Neumann ratios {ratios[-3:]} do not contract")
        if iterations >= cfg.neumann_max_iter:
            raise NoContraction(f"no convergence in {iterations} iterations (last ratio {ratio:.3g})")
        prev = nv
        v = solve_poisson(apply_F(coeffs, v), tols)
    return phi0.add(u, tols), iterations, ratios


def solve_transformed(eta, psi, cfg=DNConfig(), coeffs=None):
    """Flattened potential ``phi`` with ``phi(x,0) = psi``; returns ``(phi, SolveReport)``."""
    eta, psi = _fit(eta, cfg), _fit(psi, cfg)
    gv = check_guard(eta, cfg)
    if coeffs is None:
        coeffs = flattening_coeffs(eta, cfg)
    phi, iterations, ratios = _solve(coeffs, psi, cfg)
    residual = 0.0
    if cfg.compute_residual and iterations:
        r = laplacian(phi, cfg.tols).add(-apply_F(coeffs, phi), cfg.tols)
        residual = norm_sigma_s_a(r, WeightedNormParams(0.0, 0, cfg.a))
    rep = SolveReport(iterations, ratios, residual, gv, coeffs.series_terms, coeffs.series_residual)
    return phi, rep


def surface_factor(eta, N=None):
    """Grid values of ``f(eta) = (|grad eta|^2 - |D| eta) / (1 + |D| eta)``."""
    N = grid_size(eta.K) if N is None else N
    grad_sq = sum(asp.ddx(eta, j).to_grid(N) ** 2 for j in range(eta.d))
    ad = asp.abs_d(eta).to_grid(N)
    return (grad_sq - ad) / (1.0 + ad)


def assemble_dn(eta, psi, phi, K):
    """``G1 + G2 + G3`` from a solved flattened potential."""
    g2 = trace(dy(phi.pi()))
    g1 = PeriodicFunction.zeros(eta.d, K)
    for j in range(eta.d):
        g1 = g1 - asp.product(asp.ddx(eta, j), asp.ddx(psi, j), full=True).resize(K)
    N = 2 * grid_size(K)
    g3 = PeriodicFunction.from_grid(surface_factor(eta, N) * g2.to_grid(N), K)
    return (g1 + g2.resize(K) + g3).resize(K)


def apply_dn(eta, psi, cfg=DNConfig(), *, coeffs=None, return_report=False):
    """``G(eta) psi`` truncated to ``cfg.K`` modes."""
    eta, psi = _fit(eta, cfg), _fit(psi, cfg)
    phi, rep = solve_transformed(eta, psi, cfg, coeffs)
    out = assemble_dn(eta, psi, phi, cfg.K)
    return (out, rep) if return_report else out


class DNOperator:
    """``G(eta)`` for fixed ``eta``: flattening coefficients are computed once."""

    def __init__(self, eta, cfg=DNConfig()):
        self.cfg = cfg
        self.eta = _fit(eta, cfg)
        self.guard = check_guard(self.eta, cfg)
        self.coeffs = flattening_coeffs(self.eta, cfg)

    def __call__(self, psi, return_report=False):
        return apply_dn(self.eta, psi, self.cfg, coeffs=self.coeffs, return_report=return_report)


# ---------------------------------------------------------------- oracle


def dn_oracle_manufactured(harmonic_coeffs, eta, N=None):
    """Exact ``(psi, G(eta) psi)`` for ``Phi = sum_k c_k e^{|k| y} e^{i k.x}``.

    Evaluates ``Phi`` and its gradient at ``y = eta(x)`` on the collocation
    grid and projects; independent of the flattening construction.
    """
    if harmonic_coeffs.d != eta.d:
        raise ValueError("dimension mismatch")
    d = eta.d
    K = max(harmonic_coeffs.K, eta.K)
    N = 2 * grid_size(K) if N is None else N
    axes = [2 * np.pi * np.arange(N) / N] * d
    X = np.meshgrid(*axes, indexing="ij")
    e = eta.to_grid(N)
    grads = [asp.ddx(eta, j).to_grid(N) for j in range(d)]
    phi = np.zeros(e.shape, dtype=complex)
    phi_y = np.zeros_like(phi)
    phi_x = [np.zeros_like(phi) for _ in range(d)]
    cs = harmonic_coeffs.coeffs.reshape(-1)
    for k, c in zip(asp.mode_list(d, harmonic_coeffs.K), cs):
        if c == 0:
            continue
        lam = float(np.linalg.norm(k))
        w = c * np.exp(lam * e + 1j * sum(kj * Xj for kj, Xj in zip(k, X)))
        phi += w
        phi_y += lam * w
        for j in range(d):
            phi_x[j] += 1j * k[j] * w
    g = phi_y - sum(gj * px for gj, px in zip(grads, phi_x))
    return (
        PeriodicFunction.from_grid(phi.real, K),
        PeriodicFunction.from_grid(g.real, K),
    )


# ------------------------------------------------------------ invariances


def bernoulli_mean(eta, psi, G):
    """Mean of ``|grad psi|^2 - (G + grad eta . grad psi)^2/(1+|grad eta|^2)`` over the torus.

    Computed on a doubled grid so the quadratic products are alias free; the
    quotient term is smooth and resolved by the same grid.
    """
    K = max(eta.K, psi.K, G.K)
    N = 2 * grid_size(K)
    gp = [asp.ddx(psi, j).to_grid(N) for j in range(psi.d)]
    ge = [asp.ddx(eta, j).to_grid(N) for j in range(eta.d)]
    Gv = G.to_grid(N)
    dot = sum(a * b for a, b in zip(ge, gp))
    val = sum(p**2 for p in gp) - (Gv + dot) ** 2 / (1.0 + sum(a**2 for a in ge))
    return float(np.mean(val))


def verify_suite(eta, psi1, psi2, theta, m, cfg=DNConfig()):
    """Signed discrepancies of the symmetry identities of ``G(eta)``.

    ``theta`` is a horizontal shift (scalar or length-d vector) and ``m`` a
    vertical shift of the surface. Returns a dict of floats.
    """
    eta, psi1, psi2 = _fit(eta, cfg), _fit(psi1, cfg), _fit(psi2, cfg)
    op = DNOperator(eta, cfg)
    G1 = op(psi1)
    G2 = op(psi2)
    scale = max(1.0, asp.norm_sigma_s(psi1, sigma=0, s=1))

    sym = asp.l2_inner(G1, psi2) - asp.l2_inner(psi1, G2)
    pos = asp.l2_inner(G1, psi1).real

    theta = np.broadcast_to(np.asarray(theta, dtype=float), (eta.d,))
    shifted = apply_dn(asp.translate(eta, theta), asp.translate(psi1, theta), cfg)
    trans = asp.norm_sigma_s(shifted - asp.translate(G1, theta), sigma=0, s=0)

    refl = apply_dn(asp.reflect(eta), asp.reflect(psi1), cfg)
    refl_d = asp.norm_sigma_s(refl - asp.reflect(G1), sigma=0, s=0)

    lifted = apply_dn(eta + m, psi1, cfg)
    vert = asp.norm_sigma_s(lifted - G1, sigma=0, s=0)

    one = op(PeriodicFunction.constant(1.0, eta.d, cfg.K))
    g_one = float(np.max(np.abs(one.coeffs)))

    return {
        "self_adjoint": float(abs(sym)) / scale**2,
        "positivity": float(max(0.0, -pos)) / scale**2,
        "translation": trans / scale,
        "reflection": refl_d / scale,
        "vertical": vert / scale,
        "bernoulli_mean": bernoulli_mean(eta, psi1, G1) / scale**2,
        "g_of_one": g_one,
        "mean": float(abs(G1.mean())) / scale,
    }
