"""The fluid and poroelastic steps of the explicit splitting scheme.

Each step reads only the previous state and can run concurrently with the
other. Left-hand sides are time independent: they are assembled and factored
once when a system is built.

Fluid step, unknowns (u, p)::

    rho_f/dt (u - u^n, v) + 2 mu_f (D u, D v) - (p, div v) + (div u, q)
      + gamma <P u, P v> + L <u.n_f, v.n_f>
    = (F_f, v) + (g_f, q) + gamma <P xi^n, P v> + <L u^n.n_f - phi^n, v.n_f>

Poroelastic step, unknowns (xi, phi) with eta = eta^n + dt xi::

    rho_p/dt (xi - xi^n, z) + 2 mu_p (D eta, D z) + lambda_p (div eta, div z)
      - alpha (phi, div z) + C0/dt (phi - phi^n, psi) + alpha (div xi, psi)
      + (K grad phi, grad psi) + gamma <P xi, P z> + <xi.n_p, z.n_p>
      + <phi, z.n_p> + 1/L <phi, psi> - <xi.n_p, psi>
    = (F_e, z) + (F_d, psi) + gamma <P u^n, P z> + <xi^n.n_p, z.n_p>
      + <-u^n.n_p + phi^n/L, psi>
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import fem
from .linalg import Factorization
from .mesh import INTERFACE, Mesh2D, Region, build_rect_mesh
from .mms import MmsCase
from .params import PhysicalParams

__all__ = [
    "Discretization", "FluidSystem", "PhysicalParams", "PoroSystem", "State",
    "build_discretization", "build_fluid_system", "build_poro_system",
    "fluid_residual", "fluid_step", "poro_residual", "poro_step",
]


@dataclass(frozen=True, eq=False)
class Discretization:
    """Meshes, function spaces and the interface pairing for one refinement."""

    n: int
    fluid_mesh: Mesh2D
    poro_mesh: Mesh2D
    V_f: fem.DofMap
    Q_f: fem.DofMap
    V_p: fem.DofMap
    Q_p: fem.DofMap
    pairing: fem.InterfacePairing


def build_discretization(n: int) -> Discretization:
    mf = build_rect_mesh(n, Region.FLUID)
    mp = build_rect_mesh(n, Region.PORO)
    return Discretization(
        n=n,
        fluid_mesh=mf,
        poro_mesh=mp,
        V_f=fem.DofMap(mf, 2, 2, "u"),
        Q_f=fem.DofMap(mf, 1, 1, "p"),
        V_p=fem.DofMap(mp, 2, 2, "xi"),
        Q_p=fem.DofMap(mp, 1, 1, "phi"),
        pairing=fem.InterfacePairing(mf, mp),
    )


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class State:
    """Coefficient vectors of all five fields at one time level."""

    u: np.ndarray
    p: np.ndarray
    eta: np.ndarray
    xi: np.ndarray
    phi: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        for name in ("u", "p", "eta", "xi", "phi"):
            object.__setattr__(self, name, _readonly(getattr(self, name)))

    @classmethod
    def zeros(cls, disc: Discretization, t: float = 0.0) -> "State":
        return cls(np.zeros(disc.V_f.size), np.zeros(disc.Q_f.size), np.zeros(disc.V_p.size),
                   np.zeros(disc.V_p.size), np.zeros(disc.Q_p.size), t)

    def fields(self):
        return self.u, self.p, self.eta, self.xi, self.phi


def _relative_residual(A, x, b):
    r = A @ x - b
    scale = abs(A).sum(axis=1).max() * np.max(np.abs(x), initial=0.0) + np.max(np.abs(b), initial=0.0)
    return float(np.max(np.abs(r), initial=0.0) / scale) if scale > 0 else float(np.max(np.abs(r), initial=0.0))


# --------------------------------------------------------------------------
# fluid
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FluidSystem:
    disc: Discretization
    params: PhysicalParams
    lhs: sp.csr_matrix  # unconstrained block operator over (u, p)
    reduction: fem.DirichletReduction
    factorization: Factorization
    mass: sp.csr_matrix  # rho_f/dt M_u
    slip_cross: sp.csr_matrix  # gamma <P xi, P v>, fluid rows, poro cols
    normal_self: sp.csr_matrix  # L <u.n_f, v.n_f>
    pressure_cross: sp.csr_matrix  # <phi, v.n_f>, fluid rows, poro cols
    bc_dofs: np.ndarray  # constrained velocity dofs

    @property
    def n_u(self) -> int:
        return self.disc.V_f.size


def build_fluid_system(disc: Discretization, params: PhysicalParams) -> FluidSystem:
    mesh, V, Q, Vp, Qp = disc.fluid_mesh, disc.V_f, disc.Q_f, disc.V_p, disc.Q_p
    pair, n_f, tau = disc.pairing, INTERFACE.n_f, INTERFACE.tangent
    mass = fem.assemble_mass(mesh, V, params.rho_f / params.dt)
    visc = fem.assemble_sym_grad_stiffness(mesh, V, params.mu_f)
    slip = fem.assemble_interface_tangential(pair, V, V, tau, params.gamma)
    normal = fem.assemble_interface_normal(pair, V, V, n_f, n_f, params.L)
    C = fem.assemble_pressure_div(mesh, V, Q)
    lhs = sp.bmat([[mass + visc + slip + normal, -C.T], [C, None]], format="csr")
    bc = V.dirichlet_dofs()
    reduction = fem.DirichletReduction(lhs, bc)
    return FluidSystem(
        disc=disc,
        params=params,
        lhs=lhs,
        reduction=reduction,
        factorization=Factorization(reduction.matrix),
        mass=mass,
        slip_cross=fem.assemble_interface_tangential(pair, V, Vp, tau, params.gamma),
        normal_self=normal,
        pressure_cross=fem.assemble_interface_normal(pair, V, Qp, n_f, None, 1.0),
        bc_dofs=bc,
    )


def fluid_rhs(sys: FluidSystem, prev: State, case: MmsCase, t_next: float) -> np.ndarray:
    d = sys.disc
    rhs_u = (sys.mass @ prev.u
             + fem.assemble_load(d.fluid_mesh, d.V_f, case.forcing_F_f, t_next)
             + sys.slip_cross @ prev.xi
             + sys.normal_self @ prev.u
             - sys.pressure_cross @ prev.phi)
    rhs_p = fem.assemble_load(d.fluid_mesh, d.Q_f, case.forcing_g_f, t_next)
    return np.concatenate([rhs_u, rhs_p])


def fluid_bc_values(sys: FluidSystem, case: MmsCase, t: float) -> np.ndarray:
    return sys.disc.V_f.interpolate(case.exact_u, t, sys.reduction.dofs)


def fluid_step(sys: FluidSystem, prev: State, case: MmsCase, t_next: float):
    """Advance (u, p) to ``t_next`` from the level-n state."""
    _check_time(prev, sys.params.dt, t_next)
    b = sys.reduction.rhs(fluid_rhs(sys, prev, case, t_next), fluid_bc_values(sys, case, t_next))
    x = sys.factorization.solve(b)
    return x[:sys.n_u], x[sys.n_u:]


def fluid_residual(sys: FluidSystem, prev: State, u, p, case: MmsCase, t_next: float) -> float:
    """Relative residual of the discrete fluid equations at (u, p).

    Free rows are tested against the unconstrained operator; constrained rows
    against the boundary data.
    """
    x = np.concatenate([u, p])
    b = fluid_rhs(sys, prev, case, t_next)
    free = np.ones(len(x), dtype=bool)
    free[sys.reduction.dofs] = False
    r_free = _relative_residual(sys.lhs[free], x, b[free])
    g = fluid_bc_values(sys, case, t_next)
    r_bc = np.max(np.abs(x[sys.reduction.dofs] - g), initial=0.0) / max(1.0, np.max(np.abs(g), initial=0.0))
    return max(r_free, float(r_bc))


# --------------------------------------------------------------------------
# poroelastic structure
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PoroSystem:
    disc: Discretization
    params: PhysicalParams
    lhs: sp.csr_matrix  # unconstrained block operator over (xi, phi)
    reduction: fem.DirichletReduction
    factorization: Factorization
    mass_xi: sp.csr_matrix  # rho_p/dt M
    mass_phi: sp.csr_matrix  # C0/dt M
    elastic: sp.csr_matrix  # 2 mu_p (D, D) + lambda_p (div, div)
    coupling: sp.csr_matrix  # C with C[k, j] = (psi_k, div z_j)
    darcy: sp.csr_matrix  # (K grad, grad)
    slip_self: sp.csr_matrix  # gamma <P xi, P z>
    normal_self: sp.csr_matrix  # <xi.n_p, z.n_p>
    phi_normal: sp.csr_matrix  # <phi, z.n_p>, xi rows, phi cols
    phi_self: sp.csr_matrix  # 1/L <phi, psi>
    slip_cross: sp.csr_matrix  # gamma <P u, P z>, poro rows, fluid cols
    flux_cross: sp.csr_matrix  # <u.n_p, psi>, phi rows, fluid cols
    bc_xi: np.ndarray
    bc_phi: np.ndarray

    @property
    def n_xi(self) -> int:
        return self.disc.V_p.size


def build_poro_system(disc: Discretization, params: PhysicalParams) -> PoroSystem:
    mesh, V, Q, Vf = disc.poro_mesh, disc.V_p, disc.Q_p, disc.V_f
    pair, n_p, tau, dt = disc.pairing, INTERFACE.n_p, INTERFACE.tangent, params.dt
    mass_xi = fem.assemble_mass(mesh, V, params.rho_p / dt)
    mass_phi = fem.assemble_mass(mesh, Q, params.C0 / dt)
    elastic = (fem.assemble_sym_grad_stiffness(mesh, V, params.mu_p)
               + fem.assemble_div_div(mesh, V, params.lambda_p))
    C = fem.assemble_pressure_div(mesh, V, Q)
    darcy = fem.assemble_scalar_stiffness(mesh, Q, params.K_matrix)
    slip = fem.assemble_interface_tangential(pair, V, V, tau, params.gamma)
    normal = fem.assemble_interface_normal(pair, V, V, n_p, n_p, 1.0)
    phi_normal = fem.assemble_interface_normal(pair, V, Q, n_p, None, 1.0)
    phi_self = fem.assemble_interface_normal(pair, Q, Q, None, None, 1.0 / params.L)
    lhs = sp.bmat([
        [mass_xi + dt * elastic + slip + normal, -params.alpha * C.T + phi_normal],
        [params.alpha * C - phi_normal.T, mass_phi + darcy + phi_self],
    ], format="csr")
    bc_xi = V.dirichlet_dofs()
    bc_phi = Q.dirichlet_dofs()
    reduction = fem.DirichletReduction(lhs, np.concatenate([bc_xi, V.size + bc_phi]))
    return PoroSystem(
        disc=disc,
        params=params,
        lhs=lhs,
        reduction=reduction,
        factorization=Factorization(reduction.matrix),
        mass_xi=mass_xi,
        mass_phi=mass_phi,
        elastic=elastic,
        coupling=C,
        darcy=darcy,
        slip_self=slip,
        normal_self=normal,
        phi_normal=phi_normal,
        phi_self=phi_self,
        slip_cross=fem.assemble_interface_tangential(pair, V, Vf, tau, params.gamma),
        flux_cross=fem.assemble_interface_normal(pair, Q, Vf, None, n_p, 1.0),
        bc_xi=bc_xi,
        bc_phi=bc_phi,
    )


def _poro_data(sys: PoroSystem, prev: State, case: MmsCase, t_next: float):
    """Forcing plus lagged interface data, before the eta elimination."""
    d = sys.disc
    f_xi = (fem.assemble_load(d.poro_mesh, d.V_p, case.forcing_F_e, t_next)
            + sys.slip_cross @ prev.u
            + sys.normal_self @ prev.xi)
    f_phi = (fem.assemble_load(d.poro_mesh, d.Q_p, case.forcing_F_d, t_next)
             - sys.flux_cross @ prev.u
             + sys.phi_self @ prev.phi)
    return f_xi, f_phi


def poro_bc_values(sys: PoroSystem, case: MmsCase, t: float) -> np.ndarray:
    d = sys.disc
    return np.concatenate([d.V_p.interpolate(case.exact_xi, t, sys.bc_xi),
                           d.Q_p.interpolate(case.exact_phi, t, sys.bc_phi)])


def poro_step(sys: PoroSystem, prev: State, case: MmsCase, t_next: float):
    """Advance (eta, xi, phi) to ``t_next`` from the level-n state."""
    _check_time(prev, sys.params.dt, t_next)
    f_xi, f_phi = _poro_data(sys, prev, case, t_next)
    rhs = np.concatenate([
        f_xi + sys.mass_xi @ prev.xi - sys.elastic @ prev.eta,
        f_phi + sys.mass_phi @ prev.phi,
    ])
    # the reduction keeps its dofs sorted; xi dofs precede phi dofs
    x = sys.factorization.solve(sys.reduction.rhs(rhs, poro_bc_values(sys, case, t_next)))
    xi, phi = x[:sys.n_xi], x[sys.n_xi:]
    eta = prev.eta + sys.params.dt * xi
    return eta, xi, phi


def poro_residual(sys: PoroSystem, prev: State, eta, xi, phi, case: MmsCase, t_next: float) -> float:
    """Relative residual of the poroelastic equations written in (eta, xi, phi).

    Uses the individual operators rather than the eliminated block matrix.
    """
    dt, a = sys.params.dt, sys.params.alpha
    f_xi, f_phi = _poro_data(sys, prev, case, t_next)
    C = sys.coupling
    r_xi_terms = [
        sys.mass_xi @ (xi - prev.xi), sys.elastic @ eta, -a * (C.T @ phi),
        sys.slip_self @ xi, sys.normal_self @ xi, sys.phi_normal @ phi, -f_xi,
    ]
    r_phi_terms = [
        sys.mass_phi @ (phi - prev.phi), a * (C @ xi), sys.darcy @ phi,
        sys.phi_self @ phi, -(sys.phi_normal.T @ xi), -f_phi,
    ]
    out = []
    for terms, bc in ((r_xi_terms, sys.bc_xi), (r_phi_terms, sys.bc_phi)):
        r = np.sum(terms, axis=0)
        scale = np.sum([np.abs(v) for v in terms], axis=0)
        free = np.ones(len(r), dtype=bool)
        free[bc] = False
        out.append(np.max(np.abs(r[free]), initial=0.0) / max(np.max(scale[free], initial=0.0), 1e-300))
    g = poro_bc_values(sys, case, t_next)
    got = np.concatenate([xi[sys.bc_xi], phi[sys.bc_phi]])
    out.append(np.max(np.abs(got - g), initial=0.0) / max(1.0, np.max(np.abs(g), initial=0.0)))
    out.append(np.max(np.abs(eta - prev.eta - dt * xi), initial=0.0))
    return float(max(out))


def _check_time(prev, dt, t_next):
    if not np.isclose(prev.t + dt, t_next, rtol=0.0, atol=1e-9 * max(1.0, abs(t_next))):
        raise ValueError(f"t_next={t_next} does not equal prev.t + dt = {prev.t + dt}")
