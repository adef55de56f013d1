"""Benchmark fields checked against an independent symbolic derivation."""

import numpy as np
import pytest
import sympy as S

from stokesbiot.mms import MmsCase, ZeroCase, interface_residuals, make_case
from stokesbiot.params import PhysicalParams

t, x, y = S.symbols("t x y", real=True)
_shape = S.Matrix([-3 * x + S.cos(y), y + 1])
U = S.pi * S.cos(S.pi * t) * _shape
P = S.exp(t) * S.sin(S.pi * x) * S.cos(S.pi * y / 2) + 2 * S.pi * S.cos(S.pi * t)
ETA = S.sin(S.pi * t) * _shape
PHI = S.exp(t) * S.sin(S.pi * x) * S.cos(S.pi * y / 2)


def _grad(v):
    return v.jacobian([x, y])


def _div_tensor(T):
    return S.Matrix([S.diff(T[i, 0], x) + S.diff(T[i, 1], y) for i in range(2)])


def symbolic_forcings(q: PhysicalParams):
    """Bulk forcings derived from the strong equations (not the closed forms)."""
    K = S.Matrix(q.K_matrix.tolist())
    gu, ge = _grad(U), _grad(ETA)
    sig_f = q.mu_f * (gu + gu.T) - P * S.eye(2)
    sig_p = q.mu_p * (ge + ge.T) + (q.lambda_p * ge.trace() - q.alpha * PHI) * S.eye(2)
    F_f = q.rho_f * S.diff(U, t) - _div_tensor(sig_f)
    g_f = gu.trace()
    F_e = q.rho_p * S.diff(ETA, t, 2) - _div_tensor(sig_p)
    flux = K * S.Matrix([S.diff(PHI, x), S.diff(PHI, y)])
    F_d = q.C0 * S.diff(PHI, t) + q.alpha * _grad(S.diff(ETA, t)).trace() - (S.diff(flux[0], x) + S.diff(flux[1], y))
    return F_f, g_f, F_e, F_d


def _points(seed=0, k=20, region="fluid"):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(size=(k, 3))
    if region == "poro":
        pts[:, 2] -= 1.0
    return pts


PARAM_SETS = [
    PhysicalParams(),
    PhysicalParams(rho_f=2.0, mu_f=0.5, rho_p=3.0, mu_p=1.7, lambda_p=4.0, alpha=0.3, C0=2.5,
                   K=((2.0, 0.3), (0.3, 0.5))),
]


@pytest.mark.parametrize("q", PARAM_SETS)
def test_forcings_match_symbolic_residual(q):
    case = MmsCase(q)
    F_f, g_f, F_e, F_d = (S.lambdify((t, x, y), e, "numpy") for e in symbolic_forcings(q))
    for tt, xx, yy in _points(1):
        np.testing.assert_allclose(case.forcing_F_f(tt, xx, yy), np.ravel(F_f(tt, xx, yy)), atol=1e-8)
        assert abs(case.forcing_g_f(tt, xx, yy) - g_f(tt, xx, yy)) <= 1e-8
    for tt, xx, yy in _points(2, region="poro"):
        np.testing.assert_allclose(case.forcing_F_e(tt, xx, yy), np.ravel(F_e(tt, xx, yy)), atol=1e-8)
        assert abs(case.forcing_F_d(tt, xx, yy) - F_d(tt, xx, yy)) <= 1e-8


def test_exact_fields_and_gradients_match_symbolic():
    case = MmsCase()
    fields = [(case.exact_u, case.grad_u, U), (case.exact_eta, case.grad_eta, ETA),
              (case.exact_xi, case.grad_xi, S.diff(ETA, t))]
    for pt in _points(3):
        for f, g, e in fields:
            np.testing.assert_allclose(f(*pt), np.ravel(S.lambdify((t, x, y), e)(*pt)), atol=1e-13)
            np.testing.assert_allclose(g(*pt), np.array(S.lambdify((t, x, y), _grad(e))(*pt), float), atol=1e-13)
        np.testing.assert_allclose(case.grad_phi(*pt),
                                   np.ravel(S.lambdify((t, x, y), S.Matrix([PHI]).jacobian([x, y]))(*pt)), atol=1e-13)
        assert case.exact_p(*pt) == pytest.approx(float(P.subs({t: pt[0], x: pt[1], y: pt[2]})), abs=1e-13)


def test_strong_residual_by_finite_differences():
    # fluid momentum residual with fourth-order central differences, no closed forms
    case = MmsCase()
    h = 1e-3

    def d(f, i, pt):
        e = np.zeros(3)
        e[i] = h
        return (-f(*(pt + 2 * e)) + 8 * f(*(pt + e)) - 8 * f(*(pt - e)) + f(*(pt - 2 * e))) / (12 * h)

    for pt in _points(4):
        pt = np.clip(pt, 0.05, 0.95)
        lap = sum(d(lambda *a, i=i: d(case.exact_u, i, np.array(a)), i, pt) for i in (1, 2))
        grad_div = np.array([d(lambda *a: np.trace(case.grad_u(*a)), i, pt) for i in (1, 2)])
        grad_p = np.array([d(case.exact_p, i, pt) for i in (1, 2)])
        res = d(case.exact_u, 0, pt) - lap - grad_div + grad_p - case.forcing_F_f(*pt)
        assert np.max(np.abs(res)) <= 1e-6


def test_xi_is_time_derivative_of_eta():
    case = MmsCase()
    h = 1e-6
    for tt, xx, yy in _points(5):
        fd = (case.exact_eta(tt + h, xx, yy) - case.exact_eta(tt - h, xx, yy)) / (2 * h)
        np.testing.assert_allclose(fd, case.exact_xi(tt, xx, yy), atol=1e-6)


def test_divergence_equals_g_f():
    case = MmsCase()
    assert S.simplify(_grad(U).trace() + 2 * S.pi * S.cos(S.pi * t)) == 0
    div = np.trace(case.grad_u(0.0, 0.3, 0.7))
    assert div == pytest.approx(-2 * np.pi, abs=1e-14)
    assert case.forcing_g_f(0.0) == pytest.approx(-2 * np.pi)


def test_literal_values():
    case = MmsCase()
    np.testing.assert_allclose(case.exact_u(0, 0, 0), [np.pi, np.pi], atol=1e-15)
    np.testing.assert_allclose(case.exact_u(0.5, 0.3, 0.8), [0, 0], atol=1e-15)
    assert case.exact_p(0, 0.5, 0) == pytest.approx(1 + 2 * np.pi, abs=1e-14)
    assert case.exact_phi(0.7, 0.0, -0.4) == 0.0
    pts = _points(6)
    for tt, xx, yy in pts:
        assert case.exact_p(tt, xx, yy) - case.exact_phi(tt, xx, yy) == pytest.approx(2 * np.pi * np.cos(np.pi * tt))
    np.testing.assert_array_equal(case.exact_eta(0.0, 0.2, -0.3), [0, 0])
    np.testing.assert_allclose(case.exact_xi(0.0, 0.2, -0.3), case.exact_u(0.0, 0.2, -0.3), atol=1e-15)
    np.testing.assert_allclose(case.exact_eta(0.5, 1, 0), [-2, 1], atol=1e-15)
    assert case.forcing_F_d(0, 0.5, 0) == pytest.approx(1 - 2 * np.pi + 1.25 * np.pi**2, abs=1e-13)


def test_fields_broadcast():
    case = MmsCase()
    xx = np.linspace(0, 1, 7).reshape(7, 1)
    yy = np.linspace(-1, 0, 5).reshape(1, 5)
    assert case.exact_u(0.3, xx, yy).shape == (7, 5, 2)
    assert case.grad_eta(0.3, xx, yy).shape == (7, 5, 2, 2)
    assert case.forcing_F_d(0.3, xx, yy).shape == (7, 5)
    assert case.forcing_g_f(0.3, xx, yy).shape == (7, 5)


def test_interface_conditions_report():
    # the benchmark happens to satisfy all four coupling conditions on y = 0
    res = interface_residuals(MmsCase(), 0.37, np.linspace(0, 1, 21))
    assert set(res) == {"mass", "bjs", "normal_stress", "traction"}
    assert max(res.values()) <= 1e-12


def test_zero_case_and_factory():
    z = make_case("zero")
    assert isinstance(z, ZeroCase)
    assert np.all(z.exact_u(1.0, np.ones(3), np.ones(3)) == 0)
    assert np.all(z.forcing_F_d(1.0, 0.2, -0.1) == 0)
    with pytest.raises(ValueError):
        make_case("nope")
