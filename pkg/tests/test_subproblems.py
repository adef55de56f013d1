import numpy as np
import pytest

from stokesbiot import subproblems as sub
from stokesbiot.driver import RunConfig, build_systems, initialize
from stokesbiot.mms import MmsCase, ZeroCase
from stokesbiot.params import PhysicalParams


@pytest.fixture(scope="module")
def mms8():
    cfg = RunConfig(n=8, dt=0.05 / 8, T=0.05 / 8)
    sysm = build_systems(cfg)
    return sysm, initialize(cfg, sysm)


def test_params_validation():
    for bad in (dict(dt=0.0), dict(L=0.0), dict(gamma=-1.0), dict(mu_f=-1.0), dict(K=((1, 2), (2, 1)))):
        with pytest.raises(ValueError):
            PhysicalParams(**bad)
    assert PhysicalParams().with_(L=3.0).L == 3.0


def test_dimensions(disc4):
    n = 4
    assert disc4.V_f.size + disc4.Q_f.size == 2 * (2 * n + 1) ** 2 + (n + 1) ** 2
    assert disc4.V_p.size + disc4.Q_p.size == 2 * (2 * n + 1) ** 2 + (n + 1) ** 2


def test_fluid_u_block_spd(systems4):
    fs = systems4.fluid
    nu = fs.n_u
    A = fs.reduction.matrix[:nu, :nu].toarray()
    free = np.setdiff1d(np.arange(nu), fs.bc_dofs)
    Af = A[np.ix_(free, free)]
    assert np.allclose(Af, Af.T, atol=1e-13)
    assert np.linalg.eigvalsh(Af).min() > 0


def test_poro_interface_blocks_skew(systems4):
    ps = systems4.poro
    nx = ps.n_xi
    top_right = ps.lhs[:nx, nx:] + ps.params.alpha * ps.coupling.T
    bottom_left = ps.lhs[nx:, :nx] - ps.params.alpha * ps.coupling
    assert abs(top_right + bottom_left.T).max() <= 1e-13
    assert abs(top_right).max() > 0


def test_zero_data_gives_zero(disc4):
    params = PhysicalParams(dt=0.1)
    fs, ps = sub.build_fluid_system(disc4, params), sub.build_poro_system(disc4, params)
    z = sub.State.zeros(disc4)
    u, p = sub.fluid_step(fs, z, ZeroCase(params), 0.1)
    eta, xi, phi = sub.poro_step(ps, z, ZeroCase(params), 0.1)
    assert max(np.abs(v).max() for v in (u, p, eta, xi, phi)) == 0.0


def test_discrete_residuals(mms8):
    sysm, st = mms8
    t1 = sysm.fluid.params.dt
    u, p = sub.fluid_step(sysm.fluid, st, sysm.case, t1)
    eta, xi, phi = sub.poro_step(sysm.poro, st, sysm.case, t1)
    assert sub.fluid_residual(sysm.fluid, st, u, p, sysm.case, t1) <= 1e-10
    assert sub.poro_residual(sysm.poro, st, eta, xi, phi, sysm.case, t1) <= 1e-10
    assert np.array_equal(eta, st.eta + sysm.poro.params.dt * xi)
    # perturbing the solution must be detected
    assert sub.fluid_residual(sysm.fluid, st, u * 1.001, p, sysm.case, t1) > 1e-6
    assert sub.poro_residual(sysm.poro, st, eta, xi, phi * 1.001, sysm.case, t1) > 1e-6


def test_boundary_values_imposed(mms8):
    sysm, st = mms8
    t1 = sysm.fluid.params.dt
    d = sysm.disc
    u, _ = sub.fluid_step(sysm.fluid, st, sysm.case, t1)
    _, xi, phi = sub.poro_step(sysm.poro, st, sysm.case, t1)
    bc = d.V_f.dirichlet_dofs()
    np.testing.assert_allclose(u[bc], d.V_f.interpolate(sysm.case.exact_u, t1, bc), atol=1e-14)
    bx = d.V_p.dirichlet_dofs()
    np.testing.assert_allclose(xi[bx], d.V_p.interpolate(sysm.case.exact_xi, t1, bx), atol=1e-14)


def test_one_step_error_is_small(mms8):
    sysm, st = mms8
    t1 = sysm.fluid.params.dt
    d = sysm.disc
    u, _ = sub.fluid_step(sysm.fluid, st, sysm.case, t1)
    err = np.max(np.abs(u - d.V_f.interpolate(sysm.case.exact_u, t1)))
    assert err < 1e-2


def test_time_check(systems4):
    st = sub.State.zeros(systems4.disc)
    with pytest.raises(ValueError):
        sub.fluid_step(systems4.fluid, st, systems4.case, 0.5)
    with pytest.raises(ValueError):
        sub.poro_step(systems4.poro, st, systems4.case, 0.5)


def test_state_is_immutable(disc4):
    st = sub.State.zeros(disc4)
    with pytest.raises(ValueError):
        st.u[0] = 1.0


def test_gamma_zero_removes_tangential_coupling(disc4):
    q = PhysicalParams(gamma=0.0)
    assert sub.build_fluid_system(disc4, q).slip_cross.count_nonzero() == 0
    assert sub.build_poro_system(disc4, q).slip_cross.count_nonzero() == 0


def test_larger_L_pins_normal_trace(disc4):
    # at fixed lagged data, a larger L pulls u.n_f on the interface toward u^n.n_f
    rng = np.random.default_rng(0)
    st = sub.State.zeros(disc4)
    d = disc4
    u0 = rng.standard_normal(d.V_f.size)
    u0[d.V_f.dirichlet_dofs()] = 0.0
    st = sub.State(u0, st.p, st.eta, st.xi, rng.standard_normal(d.Q_p.size) * 0, 0.0)
    gaps = []
    for L in (1.0, 100.0):
        q = PhysicalParams(L=L, dt=0.1)
        fs = sub.build_fluid_system(disc4, q)
        u, _ = sub.fluid_step(fs, st, ZeroCase(q), 0.1)
        N = fs.normal_self / L
        du = u - u0
        gaps.append(du @ N @ du)
    assert gaps[1] < gaps[0]


def test_lhs_reassembly_bitwise(disc4, params):
    a = sub.build_poro_system(disc4, params).lhs
    b = sub.build_poro_system(disc4, params).lhs
    assert (a != b).nnz == 0
