import json
from math import sqrt

import numpy as np
import pytest

from stokesdn import PeriodicFunction
from stokesdn.errors import NotInRange, SymmetryViolation, TooFewModes
from stokesdn.stokes import (
    StokesBranch,
    StokesConfig,
    SymmetricPair,
    amplitude,
    branch_epsilons,
    continue_branch,
    cos_coeffs,
    critical_speed,
    estimate_sigma,
    f_map,
    from_cos,
    from_sin,
    kernel_vector,
    linear_operator,
    linearized_inverse_at_zero,
    mode_matrix,
    newton_solve,
    residual_norm,
    sin_coeffs,
    taylor_fit,
)
from stokesdn.stokes_series import stokes_series

CFG = StokesConfig(K=16)


def random_pair(rng, K, kmax=6, scale=1.0):
    a = np.zeros(K)
    b = np.zeros(K)
    a[:kmax] = scale * rng.normal(size=kmax)
    b[:kmax] = scale * rng.normal(size=kmax)
    return SymmetricPair(from_cos(a, K), from_sin(b, K))


@pytest.fixture(scope="module")
def branch():
    return continue_branch(0.05, 0.005, 1, 1.0, CFG)


# ------------------------------------------------------------- linear theory


def test_kernel_vector_examples():
    u = kernel_vector(1, 1.0)
    assert u.eta.allclose(PeriodicFunction.cos(1, 1), atol=0)
    assert u.psi.allclose(PeriodicFunction.sin(1, 1), atol=0)
    u4 = kernel_vector(4, 1.0, 8)
    assert np.allclose(cos_coeffs(u4.eta), np.eye(8)[3] * 2.0)
    assert np.allclose(sin_coeffs(u4.psi), np.eye(8)[3])


@pytest.mark.parametrize("k,g", [(1, 1.0), (4, 1.0), (3, 2.5)])
def test_kernel_is_annihilated(k, g):
    F1, F2 = linear_operator(kernel_vector(k, g, 8), critical_speed(k, g), g)
    assert np.max(np.abs(F1.coeffs)) < 1e-15 and np.max(np.abs(F2.coeffs)) < 1e-15


def test_inverse_example():
    f = PeriodicFunction.sin(2, 4)
    out = linearized_inverse_at_zero(f, PeriodicFunction.zeros(1, 4), 1, 1.0)
    assert cos_coeffs(out.eta)[1] == pytest.approx(-1.0, abs=1e-15)
    assert sin_coeffs(out.psi)[1] == pytest.approx(-0.5, abs=1e-15)
    F1, F2 = linear_operator(out, 1.0, 1.0)
    assert F1.allclose(f, atol=1e-15) and np.max(np.abs(F2.coeffs)) < 1e-15


@pytest.mark.parametrize("k,g", [(1, 1.0), (2, 1.0), (3, 0.7)])
def test_inverse_on_random_range(rng, k, g):
    K = 12
    c = critical_speed(k, g)
    for _ in range(50):
        pair = random_pair(rng, K, kmax=K)
        f, gr = linear_operator(pair, c, g)
        out = linearized_inverse_at_zero(f, gr, k, g)
        a0, b0 = cos_coeffs(pair.eta), sin_coeffs(pair.psi)
        a1, b1 = cos_coeffs(out.eta), sin_coeffs(out.psi)
        off = np.arange(1, K + 1) != k
        assert np.max(np.abs(a1[off] - a0[off])) < 1e-12
        assert np.max(np.abs(b1[off] - b0[off])) < 1e-12
        # mode k: equal up to a multiple of the kernel vector
        da, db = a1[k - 1] - a0[k - 1], b1[k - 1] - b0[k - 1]
        assert abs(sqrt(g) * da - sqrt(k) * db) < 1e-12 * max(1.0, abs(a0[k - 1]), abs(b0[k - 1]))
        F1, F2 = linear_operator(out, c, g)
        assert (F1 - f).allclose(PeriodicFunction.zeros(1, K), atol=1e-12)
        assert (F2 - gr).allclose(PeriodicFunction.zeros(1, K), atol=1e-12)


def test_inverse_rejects_incompatible():
    with pytest.raises(NotInRange):
        linearized_inverse_at_zero(PeriodicFunction.sin(1, 2), PeriodicFunction.cos(1, 2), 1, 4.0)
    # sqrt(g) f_1 = sqrt(k) g_1 holds for g = k = 1
    linearized_inverse_at_zero(PeriodicFunction.sin(1, 2), PeriodicFunction.cos(1, 2), 1, 1.0)
    out = linearized_inverse_at_zero(
        PeriodicFunction.sin(1, 2), PeriodicFunction.cos(1, 2), 1, 4.0, project=True
    )
    F1, F2 = linear_operator(out, critical_speed(1, 4.0), 4.0)
    assert abs(2.0 * sin_coeffs(F1)[0] - cos_coeffs(F2)[0]) < 1e-14
    with pytest.raises(ValueError):
        linearized_inverse_at_zero(PeriodicFunction.sin(2, 2), PeriodicFunction.zeros(1, 2), 1, 1.0, c=1.1)


@pytest.mark.parametrize("k,g", [(1, 1.0), (2, 3.0), (5, 0.4)])
def test_determinant_law(k, g):
    c = critical_speed(k, g)
    for j in range(1, 33):
        want = j**2 * (g / j - g / k)
        assert np.linalg.det(mode_matrix(j, c, g)) == pytest.approx(want, rel=1e-12, abs=1e-12)
        # the matrix is the linearization restricted to mode j
        ej = np.zeros(j)
        ej[-1] = 1.0
        F1, F2 = linear_operator(SymmetricPair(from_cos(ej, j), from_sin(ej * 0.3, j)), c, g)
        assert np.allclose(mode_matrix(j, c, g) @ [1.0, 0.3], [sin_coeffs(F1)[-1], cos_coeffs(F2)[-1]])


def test_pair_parity_enforced():
    with pytest.raises(SymmetryViolation):
        SymmetricPair(PeriodicFunction.sin(1, 2), PeriodicFunction.sin(1, 2))
    with pytest.raises(SymmetryViolation):
        SymmetricPair(PeriodicFunction.constant(1.0, 1, 2), PeriodicFunction.zeros(1, 2))


def test_pair_vector_round_trip(rng):
    p = random_pair(rng, 10)
    q = SymmetricPair.from_vector(p.vector(), 10)
    assert q.eta.allclose(p.eta, atol=0) and q.psi.allclose(p.psi, atol=0)
    assert amplitude(kernel_vector(2, 3.0, 5).scale(0.4), 2, 3.0) == pytest.approx(0.4, rel=1e-15)


# -------------------------------------------------------------- nonlinear map


def test_f_map_zero():
    F1, F2 = f_map(SymmetricPair.zeros(16), 0.8, 1.0, CFG)
    assert not np.any(F1.coeffs) and not np.any(F2.coeffs)


def test_f_map_on_kernel_is_quadratic():
    res = []
    for eps in (0.01, 0.005, 0.0025):
        F1, F2 = f_map(kernel_vector(1, 1.0, 16).scale(eps), 1.0, 1.0, CFG)
        res.append(residual_norm(F1, F2) / eps**2)
    assert max(res) / min(res) < 1.05


def test_f_map_parities(rng):
    for _ in range(5):
        F1, F2 = f_map(random_pair(rng, 16, kmax=5, scale=0.01), 0.9, 1.3, CFG)
        assert np.max(np.abs(F1.coeffs.real)) < 1e-11
        assert np.max(np.abs(F2.coeffs.imag)) < 1e-11 and abs(F2.mean()) < 1e-11


# ------------------------------------------------------------------- Newton


def test_newton_trivial():
    sol = newton_solve(0.0, 2, 1.0, cfg=CFG)
    assert sol.c == critical_speed(2, 1.0) and sol.residual_norm == 0.0
    assert not np.any(sol.pair.vector())


def test_newton_small_amplitude():
    eps = 0.02
    sol = newton_solve(eps, 1, 1.0, cfg=CFG)
    assert sol.residual_norm < 1e-11
    assert amplitude(sol.pair, 1, 1.0) == pytest.approx(eps, abs=1e-13)
    dev = (sol.pair - kernel_vector(1, 1.0, 16).scale(eps)).h01_norm()
    assert dev <= 2.0 * eps**2
    # stored residual is reproducible from the stored coefficients
    assert abs(residual_norm(*f_map(sol.pair, sol.c, 1.0, CFG)) - sol.residual_norm) < 1e-13


def test_branch_symmetry():
    plus = newton_solve(0.02, 1, 1.0, cfg=CFG)
    minus = newton_solve(-0.02, 1, 1.0, cfg=CFG)
    assert minus.c == pytest.approx(plus.c, abs=1e-12)
    assert np.max(np.abs(plus.pair.shift_half_period(1).vector() - minus.pair.vector())) < 1e-11


def test_newton_other_wavenumber():
    sol = newton_solve(0.01, 2, 1.0, cfg=CFG)
    assert sol.residual_norm < 1e-11
    a = cos_coeffs(sol.pair.eta)
    assert np.all(np.abs(a[0::2]) < 1e-13)  # only multiples of k = 2
    s = stokes_series(2, 1.0, 4)
    assert sol.c == pytest.approx(s.speed(0.01), abs=1e-9)


def test_newton_cap():
    with pytest.raises(ValueError):
        newton_solve(0.5, 1, 1.0, cfg=CFG)


# ----------------------------------------------------------------- branches


def test_branch_epsilons():
    assert branch_epsilons(0, 0.1) == [0.0]
    assert branch_epsilons(0.05, 0.005)[-1] == 0.05 and len(branch_epsilons(0.05, 0.005)) == 11
    assert branch_epsilons(0.25, 0.1) == [0.0, 0.1, 0.2, 0.25]
    with pytest.raises(ValueError):
        branch_epsilons(0.1, 0.0)


def test_trivial_branch():
    b = continue_branch(0.0, 0.01, 1, 1.0, CFG)
    assert b.complete and len(b.solutions) == 1 and b.solutions[0].epsilon == 0.0
    fit = taylor_fit(StokesBranch(1, 1.0, b.solutions * 5), 3)
    assert not np.any(fit.c) and not np.any(fit.eta_cos) and not np.any(fit.psi_sin)


def test_branch_truncates():
    b = continue_branch(1.5, 0.25, 1, 1.0, StokesConfig(K=16, eps_cap=2.0))
    assert not b.complete and "GuardViolation" in b.failure
    assert len(b.solutions) >= 1
    capped = continue_branch(0.5, 0.2, 1, 1.0, CFG)
    assert not capped.complete and "eps_cap" in capped.failure and len(capped.solutions) == 2


def test_branch_residuals_and_speed(branch):
    assert branch.complete and len(branch.solutions) == 11
    assert all(s.residual_norm < 1e-10 for s in branch.solutions)
    assert abs(branch.c_extrapolated() - 1.0) < 1e-8
    eps = branch.epsilons[1:]
    fit = np.polyfit(eps**2, branch.speeds[1:] - 1.0, 1)
    assert np.max(np.abs(np.polyval(fit, eps**2) - (branch.speeds[1:] - 1.0))) < 1e-6


def test_branch_asymptotics(branch):
    ratios = {}
    for s in branch.solutions:
        if round(s.epsilon, 6) in (0.04, 0.02, 0.01, 0.005):
            dev = (s.pair - kernel_vector(1, 1.0, 16).scale(s.epsilon)).h01_norm()
            ratios[s.epsilon] = dev / s.epsilon**2
    assert len(ratios) == 4
    assert max(ratios.values()) / min(ratios.values()) < 2


def test_branch_json_round_trip(branch):
    data = json.loads(json.dumps(branch.to_json_dict(CFG)))
    back = StokesBranch.from_json_dict(data)
    assert back.to_json_dict(CFG) == branch.to_json_dict(CFG)
    assert data["config"]["dn"]["K"] == 16


# -------------------------------------------------------------- diagnostics


def test_estimate_sigma_synthetic():
    K = 20
    c = np.exp(-0.7 * np.abs(np.arange(-K, K + 1))).astype(complex)
    sigma, q = estimate_sigma(PeriodicFunction(c))
    assert sigma == pytest.approx(0.7, abs=1e-6) and q == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(TooFewModes):
        estimate_sigma(PeriodicFunction.cos(1, 8))


def test_estimate_sigma_on_branch(branch):
    s = next(s for s in branch.solutions if abs(s.epsilon - 0.04) < 1e-12)
    assert s.sigma_estimate > 0 and s.sigma_fit_quality > 0.99


def test_taylor_fit_needs_points(branch):
    with pytest.raises(ValueError):
        taylor_fit(StokesBranch(1, 1.0, branch.solutions[:3]), 3)


def test_taylor_two_sided_odd_coefficients(branch):
    # Solve at -eps independently (cold start), then fit the raw two-sided data.
    neg = [newton_solve(-s.epsilon, 1, 1.0, cfg=CFG) for s in branch.solutions[2::2]]
    both = StokesBranch(1, 1.0, sorted(neg + branch.solutions[::2], key=lambda s: s.epsilon))
    fit = taylor_fit(both, 3, modes=4, mirror=False)
    assert abs(fit.c[1]) < 1e-8 and abs(fit.c[3]) < 1e-8
    assert fit.eta_cos[1, 0] == pytest.approx(1.0, abs=1e-8)


def test_taylor_against_oracle(branch):
    fit = taylor_fit(branch, 3, modes=3)
    s = stokes_series(1, 1.0, 3)
    for got, want in ((fit.c, s.c), (fit.eta_cos, s.eta_cos[:, 1:4]), (fit.psi_sin, s.psi_sin[:, 1:4])):
        want = np.asarray(want)
        tol = 1e-6 * np.maximum(np.abs(want), np.max(np.abs(want), axis=0))
        assert np.all(np.abs(np.asarray(got) - want) <= tol)
