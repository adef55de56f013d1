"""Manufactured-solution benchmark on (0,1) x (-1,1).

Exact fields::

    u   = pi cos(pi t) [-3x + cos y, y + 1]
    p   = e^t sin(pi x) cos(pi y / 2) + 2 pi cos(pi t)
    eta = sin(pi t) [-3x + cos y, y + 1]
    phi = e^t sin(pi x) cos(pi y / 2)

Forcings are the closed forms obtained by substituting these into the bulk
equations. Their material coefficients are taken from the bound parameters,
so the formulas stay exact away from the all-ones setting as well (K enters
only through the Darcy term).

Every callable takes ``(t, x, y)`` with broadcasting; vector fields return a
trailing axis of length 2 and gradients a trailing (2, 2) block with entry
[i, j] = d(v_i)/dx_j.
"""

from __future__ import annotations

import numpy as np

from .params import PhysicalParams

PI = np.pi


def _vec(a, b):
    a, b = np.broadcast_arrays(a, b)
    return np.stack([a, b], axis=-1)


def _tensor(a, b, c, d):
    a, b, c, d = np.broadcast_arrays(a, b, c, d)
    return np.stack([np.stack([a, b], axis=-1), np.stack([c, d], axis=-1)], axis=-2)


def _shape(x, y):
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    return _vec(-3.0 * x + np.cos(y), y + 1.0)


def _shape_grad(x, y):
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    return _tensor(np.full_like(x, -3.0), -np.sin(y), np.zeros_like(x), np.ones_like(x))


def _bump(t, x, y):
    return np.exp(t) * np.sin(PI * x) * np.cos(PI * y / 2)


class MmsCase:
    """Exact fields and forcings of the benchmark."""

    name = "mms"

    def __init__(self, params: PhysicalParams | None = None):
        self.params = params or PhysicalParams()

    # exact fields ---------------------------------------------------------

    def exact_u(self, t, x, y):
        return PI * np.cos(PI * t) * _shape(x, y)

    def exact_p(self, t, x, y):
        return _bump(t, x, y) + 2 * PI * np.cos(PI * t)

    def exact_eta(self, t, x, y):
        return np.sin(PI * t) * _shape(x, y)

    def exact_xi(self, t, x, y):
        return PI * np.cos(PI * t) * _shape(x, y)

    def exact_phi(self, t, x, y):
        return _bump(t, x, y)

    def grad_u(self, t, x, y):
        return PI * np.cos(PI * t) * _shape_grad(x, y)

    def grad_eta(self, t, x, y):
        return np.sin(PI * t) * _shape_grad(x, y)

    def grad_xi(self, t, x, y):
        return PI * np.cos(PI * t) * _shape_grad(x, y)

    def grad_phi(self, t, x, y):
        e = np.exp(t)
        return _vec(PI * e * np.cos(PI * x) * np.cos(PI * y / 2),
                    -PI / 2 * e * np.sin(PI * x) * np.sin(PI * y / 2))

    grad_p = grad_phi

    # forcings -------------------------------------------------------------

    def forcing_F_f(self, t, x, y):
        q = self.params
        s, c, e = np.sin(PI * t), np.cos(PI * t), np.exp(t)
        f1 = (q.rho_f * PI**2 * s * (3 * x - np.cos(y))
              + PI * e * np.cos(PI * x) * np.cos(PI * y / 2)
              + q.mu_f * PI * c * np.cos(y))
        f2 = -q.rho_f * PI**2 * s * (y + 1) - PI / 2 * e * np.sin(PI * x) * np.sin(PI * y / 2)
        return _vec(f1, f2)

    def forcing_g_f(self, t, x=0.0, y=0.0):
        return np.broadcast_to(-2 * PI * np.cos(PI * t), np.broadcast(x, y).shape) * 1.0

    def forcing_F_e(self, t, x, y):
        q = self.params
        s, e = np.sin(PI * t), np.exp(t)
        f1 = (q.rho_p * PI**2 * s * (3 * x - np.cos(y))
              + q.alpha * PI * e * np.cos(PI * x) * np.cos(PI * y / 2)
              + q.mu_p * s * np.cos(y))
        f2 = -q.rho_p * PI**2 * s * (y + 1) - q.alpha * PI / 2 * e * np.sin(PI * x) * np.sin(PI * y / 2)
        return _vec(f1, f2)

    def forcing_F_d(self, t, x, y):
        q = self.params
        K = q.K_matrix
        e = np.exp(t)
        phi = _bump(t, x, y)
        phi_xx = -PI**2 * phi
        phi_yy = -PI**2 / 4 * phi
        phi_xy = -PI**2 / 2 * e * np.cos(PI * x) * np.sin(PI * y / 2)
        div_flux = K[0, 0] * phi_xx + 2 * K[0, 1] * phi_xy + K[1, 1] * phi_yy
        return q.C0 * phi - 2 * q.alpha * PI * np.cos(PI * t) - div_flux


class ZeroCase(MmsCase):
    """Homogeneous data: zero forcing and zero boundary values."""

    name = "zero"

    def _zero_vec(self, t, x, y):
        return np.zeros(np.broadcast(x, y).shape + (2,))

    def _zero(self, t, x, y=0.0):
        return np.zeros(np.broadcast(x, y).shape)

    def _zero_tensor(self, t, x, y):
        return np.zeros(np.broadcast(x, y).shape + (2, 2))

    exact_u = exact_eta = exact_xi = forcing_F_f = forcing_F_e = grad_phi = grad_p = _zero_vec
    exact_p = exact_phi = forcing_F_d = _zero
    grad_u = grad_eta = grad_xi = _zero_tensor

    def forcing_g_f(self, t, x=0.0, y=0.0):
        return self._zero(t, x, y)


def make_case(name: str, params: PhysicalParams | None = None) -> MmsCase:
    if name == "mms":
        return MmsCase(params)
    if name == "zero":
        return ZeroCase(params)
    raise ValueError(f"unknown case {name!r}")


def interface_residuals(case: MmsCase, t: float, x) -> dict[str, float]:
    """Max residual of each coupling condition along y = 0 for the exact fields.

    Returned keys: ``mass`` for (xi + u_p).n_f = u.n_f, ``bjs`` for the slip
    law, ``normal_stress`` for n_f.sigma_f n_f = -phi and ``traction`` for
    sigma_f n_f = sigma_p n_f.
    """
    q = case.params
    x = np.asarray(x, dtype=float)
    y = np.zeros_like(x)
    n_f = np.array([0.0, -1.0])
    tau = np.array([1.0, 0.0])
    eye = np.eye(2)

    u, xi, phi = case.exact_u(t, x, y), case.exact_xi(t, x, y), case.exact_phi(t, x, y)
    u_p = -case.grad_phi(t, x, y) @ q.K_matrix.T
    gu, ge = case.grad_u(t, x, y), case.grad_eta(t, x, y)
    sigma_f = q.mu_f * (gu + gu.swapaxes(-1, -2)) - case.exact_p(t, x, y)[..., None, None] * eye
    div_eta = ge[..., 0, 0] + ge[..., 1, 1]
    sigma_p = (q.mu_p * (ge + ge.swapaxes(-1, -2))
               + (q.lambda_p * div_eta - q.alpha * phi)[..., None, None] * eye)
    tf = sigma_f @ n_f
    tp = sigma_p @ n_f
    return {
        "mass": float(np.max(np.abs((xi + u_p) @ n_f - u @ n_f))),
        "bjs": float(np.max(np.abs(tf @ tau + q.gamma * (u - xi) @ tau))),
        "normal_stress": float(np.max(np.abs(tf @ n_f + phi))),
        "traction": float(np.max(np.abs(tf - tp))),
    }
