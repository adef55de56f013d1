"""Error norms, Ritz projections, discrete energy balance and observed rates."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
import scipy.sparse as sp

from . import fem
from .linalg import Factorization
from .mesh import INTERFACE
from .params import PhysicalParams
from .subproblems import Discretization, State

CSV_HEADER = "n,dt,h,e_eta,e_xi,e_phi,e_u,e_p"


# --------------------------------------------------------------------------
# error norms
# --------------------------------------------------------------------------


def l2_error(coeffs, exact, t: float, mesh, dofmap: fem.DofMap) -> float:
    """L2 distance between a discrete field and ``exact(t, x, y)``.

    The exact field is sampled at quadrature points, not interpolated.
    """
    vals, _ = fem.evaluate(dofmap, coeffs)
    pts, dx = fem.quadrature_points(mesh)
    diff = vals - np.asarray(exact(t, pts[..., 0], pts[..., 1]))
    sq = diff**2 if not dofmap.is_vector else np.sum(diff**2, axis=-1)
    return math.sqrt(float(np.sum(dx * sq)))


def h1_error(coeffs, exact, grad_exact, t: float, dofmap: fem.DofMap) -> float:
    """Full H1 norm of the error (L2 part plus gradient part)."""
    vals, grads = fem.evaluate(dofmap, coeffs)
    pts, dx = fem.quadrature_points(dofmap.mesh)
    x, y = pts[..., 0], pts[..., 1]
    dv = vals - np.asarray(exact(t, x, y))
    dg = grads - np.asarray(grad_exact(t, x, y))
    axes_v = tuple(range(2, dv.ndim))
    axes_g = tuple(range(2, dg.ndim))
    sq = np.sum(dv**2, axis=axes_v) + np.sum(dg**2, axis=axes_g)
    return math.sqrt(float(np.sum(dx * sq)))


@dataclass(frozen=True)
class ErrorReport:
    n: int
    dt: float
    h: float
    t: float
    e_eta: float
    e_xi: float
    e_phi: float
    e_u: float
    e_p: float

    def values(self):
        return self.e_eta, self.e_xi, self.e_phi, self.e_u, self.e_p

    def csv_row(self) -> str:
        return ",".join(f"{v:.6g}" for v in (self.n, self.dt, self.h, *self.values()))

    def as_dict(self):
        return asdict(self)


def final_errors(state: State, disc: Discretization, case, dt: float) -> ErrorReport:
    t = state.t
    return ErrorReport(
        n=disc.n,
        dt=dt,
        h=1.0 / disc.n,
        t=t,
        e_eta=l2_error(state.eta, case.exact_eta, t, disc.poro_mesh, disc.V_p),
        e_xi=l2_error(state.xi, case.exact_xi, t, disc.poro_mesh, disc.V_p),
        e_phi=l2_error(state.phi, case.exact_phi, t, disc.poro_mesh, disc.Q_p),
        e_u=l2_error(state.u, case.exact_u, t, disc.fluid_mesh, disc.V_f),
        e_p=l2_error(state.p, case.exact_p, t, disc.fluid_mesh, disc.Q_f),
    )


# --------------------------------------------------------------------------
# Ritz projections
# --------------------------------------------------------------------------


RITZ_REFINEMENT = 3  # projections are solved once, so extra sweeps are cheap


def _solve_constrained(A, b, dofs, values):
    red = fem.DirichletReduction(A, dofs)
    return Factorization(red.matrix, RITZ_REFINEMENT).solve(red.rhs(b, values))


def _sym(g):
    return 0.5 * (g + np.swapaxes(g, -1, -2))


def _trace(g):
    return g[..., 0, 0] + g[..., 1, 1]


def ritz_project_stokes(u, grad_u, p, t: float, disc: Discretization, params: PhysicalParams):
    """Stokes projection carrying the interface penalty terms.

    Solves 2 mu_f (D U, D v) - (P, div v) + (div U, q) + gamma <P U, P v>
    + L <U.n_f, v.n_f> = same form applied to (u, p), with U equal to the
    interpolant of u on the exterior boundary.
    """
    mesh, V, Q, pair = disc.fluid_mesh, disc.V_f, disc.Q_f, disc.pairing
    n_f, tau = INTERFACE.n_f, INTERFACE.tangent
    C = fem.assemble_pressure_div(mesh, V, Q)
    A = (fem.assemble_sym_grad_stiffness(mesh, V, params.mu_f)
         + fem.assemble_interface_tangential(pair, V, V, tau, params.gamma)
         + fem.assemble_interface_normal(pair, V, V, n_f, n_f, params.L))
    lhs = sp.bmat([[A, -C.T], [C, None]], format="csr")

    def stress(t_, x, y):
        return 2 * params.mu_f * _sym(grad_u(t_, x, y)) - np.asarray(p(t_, x, y))[..., None, None] * np.eye(2)

    b_u = (fem.assemble_gradient_load(mesh, V, stress, t)
           + fem.assemble_interface_load(pair, V, tau, lambda t_, x, y: u(t_, x, y) @ tau, params.gamma, t)
           + fem.assemble_interface_load(pair, V, n_f, lambda t_, x, y: u(t_, x, y) @ n_f, params.L, t))
    b_p = fem.assemble_load(mesh, Q, lambda t_, x, y: _trace(grad_u(t_, x, y)), t)
    bc = V.dirichlet_dofs()
    x = _solve_constrained(lhs, np.concatenate([b_u, b_p]), bc, V.interpolate(u, t, bc))
    return x[:V.size], x[V.size:]


def ritz_project_elasticity(eta, grad_eta, t: float, disc: Discretization, params: PhysicalParams):
    """Elasticity projection; exterior boundary values fixed to the interpolant."""
    mesh, V = disc.poro_mesh, disc.V_p
    A = (fem.assemble_sym_grad_stiffness(mesh, V, params.mu_p)
         + fem.assemble_div_div(mesh, V, params.lambda_p))

    def stress(t_, x, y):
        g = grad_eta(t_, x, y)
        return 2 * params.mu_p * _sym(g) + params.lambda_p * _trace(g)[..., None, None] * np.eye(2)

    b = fem.assemble_gradient_load(mesh, V, stress, t)
    bc = V.dirichlet_dofs()
    return _solve_constrained(A, b, bc, V.interpolate(eta, t, bc))


def ritz_project_darcy(phi, grad_phi, t: float, disc: Discretization, params: PhysicalParams,
                       dirichlet: bool = False):
    """Darcy projection with the 1/L interface term.

    The interface term makes the form coercive, so no boundary constraint is
    needed; ``dirichlet=True`` additionally pins exterior values to the
    interpolant, matching the solver's pore-pressure space.
    """
    mesh, Q, pair = disc.poro_mesh, disc.Q_p, disc.pairing
    K = params.K_matrix
    A = (fem.assemble_scalar_stiffness(mesh, Q, K)
         + fem.assemble_interface_normal(pair, Q, Q, None, None, 1.0 / params.L))
    b = (fem.assemble_gradient_load(mesh, Q, lambda t_, x, y: grad_phi(t_, x, y) @ K.T, t)
         + fem.assemble_interface_load(pair, Q, None, phi, 1.0 / params.L, t))
    if not dirichlet:
        return Factorization(A, RITZ_REFINEMENT).solve(b)
    bc = Q.dirichlet_dofs()
    return _solve_constrained(A, b, bc, Q.interpolate(phi, t, bc))


def initial_ritz_state(systems, t: float = 0.0) -> State:
    """All five fields from their Ritz projections at time t."""
    disc, case, params = systems.disc, systems.case, systems.fluid.params
    u, p = ritz_project_stokes(case.exact_u, case.grad_u, case.exact_p, t, disc, params)
    eta = ritz_project_elasticity(case.exact_eta, case.grad_eta, t, disc, params)
    xi = ritz_project_elasticity(case.exact_xi, case.grad_xi, t, disc, params)
    phi = ritz_project_darcy(case.exact_phi, case.grad_phi, t, disc, params, dirichlet=True)
    return State(u, p, eta, xi, phi, t)


# --------------------------------------------------------------------------
# discrete energy balance
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class EnergyRecord:
    X_prev: float
    X: float
    Y: float
    Z: float

    @property
    def residual(self) -> float:
        """X_{n+1}^2 - X_n^2 + Y_{n+1}^2 + Z_{n+1}; zero for homogeneous data."""
        return self.X**2 - self.X_prev**2 + self.Y**2 + self.Z

    @property
    def relative_residual(self) -> float:
        return abs(self.residual) / max(self.X_prev**2, 1.0)


class EnergyForms:
    """Weighted Gram matrices entering the energy quantities X, Y and Z."""

    def __init__(self, disc: Discretization, params: PhysicalParams):
        mf, mp, pair = disc.fluid_mesh, disc.poro_mesh, disc.pairing
        Vf, Vp, Qp = disc.V_f, disc.V_p, disc.Q_p
        n_f, n_p, tau = INTERFACE.n_f, INTERFACE.n_p, INTERFACE.tangent
        q = params
        self.dt = q.dt
        self.m_u = fem.assemble_mass(mf, Vf, q.rho_f)
        self.m_xi = fem.assemble_mass(mp, Vp, q.rho_p)
        self.m_phi = fem.assemble_mass(mp, Qp, q.C0)
        self.strain_f = fem.assemble_sym_grad_stiffness(mf, Vf, q.mu_f)
        self.strain_p = fem.assemble_sym_grad_stiffness(mp, Vp, q.mu_p)
        self.div_p = fem.assemble_div_div(mp, Vp, q.lambda_p)
        self.darcy = fem.assemble_scalar_stiffness(mp, Qp, q.K_matrix)
        self.tan_ff = fem.assemble_interface_tangential(pair, Vf, Vf, tau, q.gamma)
        self.tan_pp = fem.assemble_interface_tangential(pair, Vp, Vp, tau, q.gamma)
        self.tan_fp = fem.assemble_interface_tangential(pair, Vf, Vp, tau, q.gamma)
        self.nrm_u = fem.assemble_interface_normal(pair, Vf, Vf, n_f, n_f, q.L)
        self.nrm_xi = fem.assemble_interface_normal(pair, Vp, Vp, n_p, n_p, 1.0)
        self.nrm_phi = fem.assemble_interface_normal(pair, Qp, Qp, None, None, 1.0 / q.L)
        self.phi_un = fem.assemble_interface_normal(pair, Qp, Vf, None, n_f, 1.0)  # <phi, u.n_f>

    @staticmethod
    def _q(A, a, b=None):
        return float(a @ (A @ (a if b is None else b)))

    def X(self, s: State) -> float:
        q, dt = self._q, self.dt
        X2 = (q(self.m_u, s.u) + q(self.m_xi, s.xi) + q(self.strain_p, s.eta)
              + q(self.div_p, s.eta) + q(self.m_phi, s.phi)
              + dt * (q(self.tan_ff, s.u) + q(self.tan_pp, s.xi) + q(self.nrm_u, s.u)
                      + q(self.nrm_xi, s.xi) + q(self.nrm_phi, s.phi)))
        return math.sqrt(max(X2, 0.0))

    def _slip_gap(self, u, xi):
        """gamma-weighted ||P_f u - P_p xi||^2 on the interface."""
        return self._q(self.tan_ff, u) - 2 * self._q(self.tan_fp, u, xi) + self._q(self.tan_pp, xi)

    def Y(self, s: State, prev: State) -> float:
        q, dt = self._q, self.dt
        du, dxi, deta, dphi = s.u - prev.u, s.xi - prev.xi, s.eta - prev.eta, s.phi - prev.phi
        Y2 = (q(self.m_u, du) + q(self.m_xi, dxi) + q(self.strain_p, deta) + q(self.div_p, deta)
              + q(self.m_phi, dphi)
              + 2 * dt * q(self.strain_f, s.u) + 2 * dt * q(self.darcy, s.phi)
              + dt * self._slip_gap(s.u, prev.xi) + dt * self._slip_gap(prev.u, s.xi)
              + dt * (q(self.nrm_u, du) + q(self.nrm_xi, dxi) + q(self.nrm_phi, dphi)))
        return math.sqrt(max(Y2, 0.0))

    def Z(self, s: State, prev: State) -> float:
        # <u.n_p, psi> = -<psi, u.n_f> because n_p = -n_f
        du, dphi = s.u - prev.u, s.phi - prev.phi
        return 2 * self.dt * (self._q(self.phi_un, prev.phi, du) - self._q(self.phi_un, dphi, prev.u))

    def record(self, prev: State, s: State) -> EnergyRecord:
        return EnergyRecord(self.X(prev), self.X(s), self.Y(s, prev), self.Z(s, prev))


def energy_X(forms: EnergyForms, state: State) -> float:
    return forms.X(state)


def energy_Y(forms: EnergyForms, state: State, prev: State) -> float:
    return forms.Y(state, prev)


def energy_Z(forms: EnergyForms, state: State, prev: State) -> float:
    return forms.Z(state, prev)


def energy_identity_residual(records) -> float:
    """Largest relative per-step residual of the energy balance."""
    return max((r.relative_residual for r in records), default=0.0)


# --------------------------------------------------------------------------
# rates
# --------------------------------------------------------------------------


def convergence_rates(errors, factor: float = 2.0) -> list[float]:
    errors = [float(e) for e in errors]
    if len(errors) < 2:
        raise ValueError("need at least two errors")
    if any(not e > 0 for e in errors):
        raise ValueError("errors must be positive")
    return [math.log(a / b) / math.log(factor) for a, b in zip(errors, errors[1:])]
