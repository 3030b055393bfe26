"""Stokes waves bifurcating from the flat surface (d = 1).

A traveling wave of speed ``c`` is a zero of

    F(eta, psi, c) = ( c eta_x + G(eta) psi,
                       c psi_x - g eta - psi_x^2 / 2
                       + (G(eta) psi + eta_x psi_x)^2 / (2 (1 + eta_x^2)) )

restricted to ``eta`` even with zero mean and ``psi`` odd. At ``c = sqrt(g/k)``
the linearization has the one-dimensional kernel spanned by
``u* = (sqrt(k) cos kx, sqrt(g) sin kx)`` and a branch of nontrivial
solutions emanates. It is computed by Newton's method on the reduced
coordinates ``(a_1..a_K, b_1..b_K, c)`` with
``eta = sum a_j cos jx``, ``psi = sum b_j sin jx``, augmented by the amplitude
constraint ``<(eta, psi), u*> / |u*|^2 = eps``.
"""
import logging
from dataclasses import dataclass, field, replace
from math import sqrt

import numpy as np
import scipy.linalg

from . import analytic_spaces as asp
from .analytic_spaces import PeriodicFunction, grid_size
from .dirichlet_neumann import DNConfig, DNOperator
from .errors import (
    NewtonDivergence,
    NotInRange,
    StokesDNError,
    SymmetryViolation,
    TooFewModes,
)

log = logging.getLogger(__name__)

PARITY_TOL = 1e-11


@dataclass(frozen=True)
class StokesConfig:
    K: int = 64
    stokes_tol: float = 1e-11
    newton_max_iter: int = 25
    fd_step: float = 1e-7
    eps_cap: float = 0.3
    jacobian_refresh: float = 0.3
    polish_steps: int = 3
    dn: DNConfig = None

    def __post_init__(self):
        dn = self.dn if self.dn is not None else DNConfig(K=self.K, compute_residual=False)
        if dn.K != self.K or dn.d != 1:
            dn = replace(dn, K=self.K, d=1)
        object.__setattr__(self, "dn", dn)

    def to_dict(self):
        out = {k: getattr(self, k) for k in self.__dataclass_fields__ if k != "dn"}
        out["dn"] = self.dn.to_dict()
        return out


# ------------------------------------------------------------ coordinates


def cos_coeffs(u):
    """``a_j`` (j = 1..K) in ``u = a_0 + sum a_j cos jx + b_j sin jx``."""
    c = u.coeffs
    return 2.0 * c[u.K + 1:].real


def sin_coeffs(u):
    c = u.coeffs
    return -2.0 * c[u.K + 1:].imag


def from_cos(a, K=None):
    K = len(a) if K is None else K
    c = np.zeros(2 * K + 1, dtype=complex)
    n = min(K, len(a))
    c[K + 1:K + 1 + n] = np.asarray(a[:n]) / 2
    c[K - n:K] = c[K + 1:K + 1 + n][::-1].conj()
    return PeriodicFunction(c, check=False)


def from_sin(b, K=None):
    K = len(b) if K is None else K
    c = np.zeros(2 * K + 1, dtype=complex)
    n = min(K, len(b))
    c[K + 1:K + 1 + n] = -0.5j * np.asarray(b[:n])
    c[K - n:K] = c[K + 1:K + 1 + n][::-1].conj()
    return PeriodicFunction(c, check=False)


@dataclass(frozen=True)
class SymmetricPair:
    """``eta`` even with zero mean, ``psi`` odd."""

    eta: PeriodicFunction
    psi: PeriodicFunction

    def __post_init__(self):
        for name, u in (("eta", self.eta), ("psi", self.psi)):
            if u.d != 1:
                raise ValueError(f"{name} must be one dimensional")
        scale = max(1.0, float(np.max(np.abs(self.eta.coeffs))), float(np.max(np.abs(self.psi.coeffs))))
        bad_eta = max(np.max(np.abs(self.eta.coeffs.imag)), abs(self.eta.mean()))
        bad_psi = np.max(np.abs(self.psi.coeffs.real))
        if bad_eta > PARITY_TOL * scale or bad_psi > PARITY_TOL * scale:
            raise SymmetryViolation("eta must be even with zero mean and psi odd")

    @classmethod
    def from_vector(cls, x, K):
        return cls(from_cos(x[:K], K), from_sin(x[K:2 * K], K))

    @classmethod
    def zeros(cls, K):
        return cls(PeriodicFunction.zeros(1, K), PeriodicFunction.zeros(1, K))

    @property
    def K(self):
        return max(self.eta.K, self.psi.K)

    def vector(self, K=None):
        K = self.K if K is None else K
        return np.concatenate([cos_coeffs(self.eta.resize(K)), sin_coeffs(self.psi.resize(K))])

    def __add__(self, other):
        return SymmetricPair(self.eta + other.eta, self.psi + other.psi)

    def __sub__(self, other):
        return SymmetricPair(self.eta - other.eta, self.psi - other.psi)

    def scale(self, s):
        return SymmetricPair(self.eta * s, self.psi * s)

    def shift_half_period(self, k):
        """Image under ``x -> x + pi/k``."""
        theta = np.pi / k
        return SymmetricPair(asp.translate(self.eta, theta), asp.translate(self.psi, theta))

    def h01_norm(self):
        return float(
            np.hypot(asp.norm_sigma_s(self.eta, sigma=0, s=1), asp.norm_sigma_s(self.psi, sigma=0, s=1))
        )

    def to_json_dict(self):
        return {"eta": self.eta.to_json_dict(), "psi": self.psi.to_json_dict()}

    @classmethod
    def from_json_dict(cls, data):
        return cls(PeriodicFunction.from_json_dict(data["eta"]), PeriodicFunction.from_json_dict(data["psi"]))


def kernel_vector(k, g, K=None):
    """``u* = (sqrt(k) cos kx, sqrt(g) sin kx)``."""
    if k < 1 or g <= 0:
        raise ValueError("need k >= 1 and g > 0")
    K = k if K is None else K
    return SymmetricPair(PeriodicFunction.cos(k, K, sqrt(k)), PeriodicFunction.sin(k, K, sqrt(g)))


def critical_speed(k, g):
    return sqrt(g / k)


def amplitude(pair, k, g):
    """Projection ``<pair, u*> / |u*|^2`` onto the kernel direction."""
    a = cos_coeffs(pair.eta)
    b = sin_coeffs(pair.psi)
    ak = a[k - 1] if k <= len(a) else 0.0
    bk = b[k - 1] if k <= len(b) else 0.0
    return (sqrt(k) * ak + sqrt(g) * bk) / (k + g)


# ------------------------------------------------------------ the map


def f_map(pair, c, g, cfg=StokesConfig(), *, op=None):
    """Both components of ``F`` as periodic functions truncated to ``cfg.K``."""
    K = cfg.K
    eta, psi = pair.eta.resize(K), pair.psi.resize(K)
    if op is None:
        op = DNOperator(eta, cfg.dn)
    G = op(psi)
    eta_x, psi_x = asp.ddx(eta), asp.ddx(psi)
    F1 = eta_x * c + G
    N = 2 * grid_size(K)
    ex, px, Gv = eta_x.to_grid(N), psi_x.to_grid(N), G.to_grid(N)
    nonlin = -0.5 * px**2 + (Gv + ex * px) ** 2 / (2.0 * (1.0 + ex**2))
    F2 = psi_x * c - eta * g + PeriodicFunction.from_grid(nonlin, K)
    _check_parity(F1, F2)
    return F1, F2


def _check_parity(F1, F2):
    odd_defect = max(float(np.max(np.abs(F1.coeffs.real))), abs(F1.mean()))
    even_defect = max(float(np.max(np.abs(F2.coeffs.imag))), abs(F2.mean()))
    if odd_defect > PARITY_TOL or even_defect > PARITY_TOL:
        raise SymmetryViolation(
            f"parity broken: odd part {odd_defect:.3g}, even/mean part {even_defect:.3g}"
        )


def residual_norm(F1, F2):
    return float(np.hypot(asp.norm_sigma_s(F1, sigma=0, s=1), asp.norm_sigma_s(F2, sigma=0, s=1)))


def linear_operator(pair, c, g):
    """Linearization at the flat state: ``(c eta_x + |D| psi, c psi_x - g eta)``."""
    return (
        asp.ddx(pair.eta) * c + asp.abs_d(pair.psi),
        asp.ddx(pair.psi) * c - pair.eta * g,
    )


def mode_matrix(j, c, g):
    """Action of the linearization on ``(a cos jx, b sin jx)`` in (sin, cos) coefficients."""
    return np.array([[-c * j, j], [-g, c * j]], dtype=float)


def linearized_inverse_at_zero(f, g_rhs, k, g, c=None, *, tol=1e-10, project=False):
    """Solve the flat linearization at ``c = sqrt(g/k)`` on the range.

    ``f`` must be odd and ``g_rhs`` even with zero mean. Mode ``k`` is
    solvable iff ``sqrt(g) f_k = sqrt(k) g_k`` (``f_k`` the sine and ``g_k``
    the cosine coefficient); the returned solution has ``psi_k = 0``. With
    ``project=True`` the incompatible part of mode ``k`` is discarded instead
    of raising :class:`NotInRange`.
    """
    cstar = critical_speed(k, g)
    if c is not None and abs(c - cstar) > 1e-12 * max(1.0, cstar):
        raise ValueError(f"the explicit inverse holds at c = {cstar}, got {c}")
    K = max(f.K, g_rhs.K)
    fs = sin_coeffs(f.resize(K))
    gc = cos_coeffs(g_rhs.resize(K))
    a = np.zeros(K)
    b = np.zeros(K)
    j = np.arange(1, K + 1, dtype=float)
    off = j != k
    jj, ff, gg = j[off], fs[off], gc[off]
    a[off] = sqrt(k) * (sqrt(g) * ff - sqrt(k) * gg) / (g * (k - jj))
    b[off] = sqrt(k) * (sqrt(k * g) * ff - jj * gg) / (sqrt(g) * jj * (k - jj))
    if k <= K:
        fk, gk = fs[k - 1], gc[k - 1]
        defect = sqrt(g) * fk - sqrt(k) * gk
        if abs(defect) > tol * max(1.0, abs(fk), abs(gk)):
            if not project:
                raise NotInRange(f"mode {k}: sqrt(g) f_k - sqrt(k) g_k = {defect:.3g}")
            fk -= sqrt(g) * defect / (g + k)
        a[k - 1] = -fk / sqrt(k * g)
    return SymmetricPair(from_cos(a, K), from_sin(b, K))


# ------------------------------------------------------------ Newton


@dataclass
class StokesSolution:
    pair: SymmetricPair
    c: float
    epsilon: float
    residual_norm: float
    sigma_estimate: float = None
    sigma_fit_quality: float = None
    iterations: int = 0

    def to_json_dict(self):
        return {
            "epsilon": self.epsilon,
            "c": self.c,
            "residual_norm": self.residual_norm,
            "sigma_estimate": self.sigma_estimate,
            "sigma_fit_quality": self.sigma_fit_quality,
            "iterations": self.iterations,
            **self.pair.to_json_dict(),
        }

    @classmethod
    def from_json_dict(cls, data):
        return cls(
            SymmetricPair.from_json_dict(data),
            data["c"],
            data["epsilon"],
            data["residual_norm"],
            data.get("sigma_estimate"),
            data.get("sigma_fit_quality"),
            data.get("iterations", 0),
        )


class _System:
    """Augmented residual on reduced coordinates and its Jacobian."""

    def __init__(self, epsilon, k, g, cfg):
        self.eps, self.k, self.g, self.cfg = epsilon, k, g, cfg
        self.K = cfg.K
        self.row = np.zeros(2 * self.K + 1)
        if k <= self.K:
            self.row[k - 1] = sqrt(k) / (k + g)
            self.row[self.K + k - 1] = sqrt(g) / (k + g)
        self.lu = None
        self.jac_evals = 0

    def unpack(self, x):
        return SymmetricPair.from_vector(x, self.K), float(x[-1])

    def residual(self, x, op=None):
        pair, c = self.unpack(x)
        F1, F2 = f_map(pair, c, self.g, self.cfg, op=op)
        vec = np.concatenate([sin_coeffs(F1), cos_coeffs(F2), [self.row @ x - self.eps]])
        return vec, residual_norm(F1, F2)

    def jacobian(self, x, r0):
        K, h0 = self.K, self.cfg.fd_step
        n = x.size
        J = np.empty((n, n))
        base_op = DNOperator(SymmetricPair.from_vector(x, K).eta, self.cfg.dn)
        for i in range(n):
            h = h0 * max(1.0, abs(x[i]))
            xp = x.copy()
            xp[i] += h
            # psi and c perturbations keep eta: reuse its flattening coefficients
            op = base_op if i >= K else None
            J[:, i] = (self.residual(xp, op)[0] - r0) / h
        self.lu = scipy.linalg.lu_factor(J)
        self.jac_evals += 1
        return J

    def step(self, r):
        return -scipy.linalg.lu_solve(self.lu, r)


def _predict(epsilon, k, g, cfg):
    """``eps u*`` plus the flat-inverse correction of the quadratic defect."""
    K = cfg.K
    base = kernel_vector(k, g, K).scale(epsilon)
    c = critical_speed(k, g)
    x = np.concatenate([base.vector(K), [c]])
    if epsilon == 0:
        return x
    F1, F2 = f_map(base, c, g, cfg)
    corr = linearized_inverse_at_zero(F1, F2, k, g, project=True)
    # keep the amplitude fixed: remove the kernel component of the correction
    corr = corr - kernel_vector(k, g, K).scale(amplitude(corr, k, g))
    return np.concatenate([(base - corr).vector(K), [c]])


def _newton(system, x, cfg, reuse=False):
    r, rn = system.residual(x)
    history = [rn]
    fresh = False
    if system.lu is None or not reuse:
        system.jacobian(x, r)
        fresh = True
    it = 0
    polish = 0
    stall = 0
    while True:
        cons = abs(r[-1])
        if rn < cfg.stokes_tol and cons < cfg.stokes_tol:
            if polish >= cfg.polish_steps:
                break
        if it >= cfg.newton_max_iter:
            if rn < cfg.stokes_tol:
                break
            raise NewtonDivergence(f"no convergence in {it} iterations, residual {rn:.3g}")
        xn = x + system.step(r)
        rn_new_vec, rn_new = system.residual(xn)
        it += 1
        if rn < cfg.stokes_tol:
            # polishing: accept only strict improvement, stop otherwise
            polish += 1
            if rn_new >= 0.5 * rn:
                if rn_new < rn:
                    x, r, rn = xn, rn_new_vec, rn_new
                break
            x, r, rn = xn, rn_new_vec, rn_new
            continue
        ratio = rn_new / rn if rn > 0 else 0.0
        if ratio > cfg.jacobian_refresh and not fresh:
            # stale Jacobian: rebuild at the better of the two points and retry
            if rn_new < rn:
                x, r, rn = xn, rn_new_vec, rn_new
            system.jacobian(x, r)
            fresh = True
            history.append(rn)
            continue
        x, r, rn = xn, rn_new_vec, rn_new
        history.append(rn)
        stall = stall + 1 if ratio >= 1 else 0
        if stall >= 3:
            raise NewtonDivergence(f"residual non-decreasing: {history[-4:]}")
        if ratio > cfg.jacobian_refresh:
            system.jacobian(x, r)
            fresh = True
        else:
            fresh = False
    return x, rn, it


def newton_solve(epsilon, k, g, init=None, cfg=StokesConfig(), *, _system=None):
    """Point of the branch with kernel amplitude ``epsilon``."""
    if abs(epsilon) > cfg.eps_cap:
        raise ValueError(f"|epsilon| = {abs(epsilon)} exceeds cap {cfg.eps_cap}")
    K = cfg.K
    if epsilon == 0:
        return StokesSolution(SymmetricPair.zeros(K), critical_speed(k, g), 0.0, 0.0)
    if init is None:
        x0 = _predict(epsilon, k, g, cfg)
    elif isinstance(init, StokesSolution):
        x0 = np.concatenate([init.pair.vector(K), [init.c]])
    else:
        x0 = np.asarray(init, dtype=float)
    system = _system if _system is not None else _System(epsilon, k, g, cfg)
    system.eps = epsilon
    reuse = _system is not None and system.lu is not None
    x, rn, it = _newton(system, x0, cfg, reuse=reuse)
    pair, c = system.unpack(x)
    sol = StokesSolution(pair, c, float(epsilon), rn, iterations=it)
    _attach_sigma(sol)
    return sol


def _attach_sigma(sol):
    try:
        sol.sigma_estimate, sol.sigma_fit_quality = estimate_sigma(sol.pair.eta)
    except TooFewModes:
        sol.sigma_estimate = sol.sigma_fit_quality = None


# ------------------------------------------------------------ branches


@dataclass
class StokesBranch:
    k: int
    g: float
    solutions: list = field(default_factory=list)
    complete: bool = True
    failure: str = None

    @property
    def epsilons(self):
        return np.array([s.epsilon for s in self.solutions])

    @property
    def speeds(self):
        return np.array([s.c for s in self.solutions])

    def c_extrapolated(self, degree=None):
        """``c`` at ``eps -> 0`` by a least-squares polynomial in ``eps^2`` (nonzero points only)."""
        pts = [(s.epsilon, s.c) for s in self.solutions if s.epsilon != 0]
        if not pts:
            return critical_speed(self.k, self.g)
        e, c = map(np.array, zip(*pts))
        deg = min(len(e) - 1, 4) if degree is None else degree
        coef = np.polynomial.polynomial.polyfit(e**2 / np.max(e**2), c, deg)
        return float(coef[0])

    def to_json_dict(self, cfg=None):
        out = {
            "k": self.k,
            "g": self.g,
            "complete": self.complete,
            "failure": self.failure,
            "c_extrapolated": self.c_extrapolated(),
            "solutions": [s.to_json_dict() for s in self.solutions],
        }
        if cfg is not None:
            out["config"] = cfg.to_dict()
        return out

    @classmethod
    def from_json_dict(cls, data):
        return cls(
            data["k"],
            data["g"],
            [StokesSolution.from_json_dict(s) for s in data["solutions"]],
            data.get("complete", True),
            data.get("failure"),
        )

    def profiles(self, n=512):
        """Rows ``(x, eta(x), psi(x))`` per solution on an ``n``-point grid."""
        x = 2 * np.pi * np.arange(n) / n
        return x, [(s.pair.eta.to_grid(n), s.pair.psi.to_grid(n)) for s in self.solutions]


def branch_epsilons(eps_max, eps_step):
    if eps_step <= 0:
        raise ValueError("eps_step must be positive")
    if eps_max < 0:
        raise ValueError("eps_max must be nonnegative")
    n = int(np.floor(eps_max / eps_step + 1e-9))
    eps = [round(i * eps_step, 15) for i in range(n + 1)]
    if eps_max - eps[-1] > 1e-12 * max(1.0, eps_max):
        eps.append(eps_max)
    return eps


def continue_branch(eps_max, eps_step, k, g, cfg=StokesConfig()):
    """March in ``eps`` with warm starts; on failure return the partial branch."""
    branch = StokesBranch(k, g)
    system = _System(0.0, k, g, cfg)
    xs = []
    for eps in branch_epsilons(eps_max, eps_step):
        if eps > cfg.eps_cap:
            branch.complete = False
            branch.failure = f"eps={eps}: exceeds eps_cap={cfg.eps_cap}"
            log.warning("branch truncated at %s", branch.failure)
            break
        try:
            if eps == 0:
                sol = newton_solve(0.0, k, g, cfg=cfg)
            else:
                if len(xs) >= 2 and xs[-1][0] != 0:
                    (e1, x1), (e2, x2) = xs[-2], xs[-1]
                    init = x2 + (x2 - x1) * (eps - e2) / (e2 - e1)
                else:
                    init = None
                sol = newton_solve(eps, k, g, init, cfg, _system=system)
        except (StokesDNError, np.linalg.LinAlgError) as exc:
            branch.complete = False
            branch.failure = f"eps={eps}: {type(exc).__name__}: {exc}"
            log.warning("branch truncated at %s", branch.failure)
            break
        branch.solutions.append(sol)
        xs.append((eps, np.concatenate([sol.pair.vector(cfg.K), [sol.c]])))
        log.info("eps=%.6g c=%.15f residual=%.3g iters=%d", eps, sol.c, sol.residual_norm, sol.iterations)
    return branch


# ------------------------------------------------------------ diagnostics


def estimate_sigma(u, floor=1e-14):
    """Decay rate of ``|u_k|`` in ``|k|_1``: returns ``(sigma, R^2)``.

    Uses modes with ``k`` lexicographically positive whose magnitude exceeds
    ``floor * max(1, max |u_k|)``.
    """
    modes = asp.mode_list(u.d, u.K)
    c = np.abs(u.coeffs.reshape(-1))
    pos = np.array([asp._lex_nonneg(m) and np.any(m) for m in modes])
    c, kk = c[pos], asp.mode_l1(modes[pos])
    keep = c > floor * max(1.0, float(c.max(initial=0.0)))
    if np.count_nonzero(keep) < 6:
        raise TooFewModes(f"{np.count_nonzero(keep)} modes above the noise floor; need 6")
    xk, yk = kk[keep].astype(float), np.log(c[keep])
    slope, icpt = np.polyfit(xk, yk, 1)
    fit = slope * xk + icpt
    ss_res = float(np.sum((yk - fit) ** 2))
    ss_tot = float(np.sum((yk - yk.mean()) ** 2))
    quality = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(-slope), quality


@dataclass
class TaylorFit:
    order: int
    degree: int
    c: np.ndarray
    eta_cos: np.ndarray
    psi_sin: np.ndarray
    condition: float
    residual: float
    ill_conditioned: bool


def taylor_fit(branch, order, modes=None, degree=None, mirror=True):
    """Least-squares Taylor coefficients in ``eps`` through ``order``.

    With ``mirror`` each branch point at ``eps`` is also used at ``-eps``
    through the half period shift ``x -> x + pi/k``, so odd and even parts
    are both sampled. ``mirror=False`` fits the one-sided data as given,
    which leaves the parity of the coefficients untested by construction.
    The fit uses a higher degree than ``order`` (default: as high as the
    sample allows, capped at 12) in the scaled variable ``eps / max|eps|``
    to keep the truncation error of the fit out of the reported orders.
    """
    sols = branch.solutions
    if len(sols) < order + 2:
        raise ValueError(f"need at least {order + 2} branch points for order {order}")
    k = branch.k
    K = sols[0].pair.K
    jmax = K if modes is None else modes
    rows_e, rows_c, rows_a, rows_b = [], [], [], []
    for s in sols:
        a = cos_coeffs(s.pair.eta.resize(K))[:jmax]
        b = sin_coeffs(s.pair.psi.resize(K))[:jmax]
        rows_e.append(s.epsilon)
        rows_c.append(s.c)
        rows_a.append(a)
        rows_b.append(b)
        if mirror and s.epsilon != 0:
            sign = np.cos(np.arange(1, jmax + 1) * np.pi / k)
            rows_e.append(-s.epsilon)
            rows_c.append(s.c)
            rows_a.append(a * sign)
            rows_b.append(b * sign)
    e = np.array(rows_e)
    scale = float(np.max(np.abs(e)))
    if scale == 0:
        z = np.zeros(order + 1)
        return TaylorFit(order, 0, z, np.zeros((order + 1, jmax)), np.zeros((order + 1, jmax)), 1.0, 0.0, False)
    deg = min(len(e) - 2, 12) if degree is None else degree
    deg = max(deg, order)
    V = np.vander(e / scale, deg + 1, increasing=True)
    Y = np.column_stack([np.array(rows_c), np.array(rows_a), np.array(rows_b)])
    coef, res, rank, sv = np.linalg.lstsq(V, Y, rcond=None)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else np.inf
    resid = float(np.max(np.abs(V @ coef - Y)))
    coef = coef / scale ** np.arange(deg + 1)[:, None]
    coef = coef[: order + 1]
    return TaylorFit(
        order,
        deg,
        coef[:, 0],
        coef[:, 1:1 + jmax],
        coef[:, 1 + jmax:],
        cond,
        resid,
        bool(cond > 1e10 or rank < deg + 1),
    )
