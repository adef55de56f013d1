"""Lagrange P1/P2 elements on triangles and assembly of the scheme's forms.

All assembly routines are vectorised over elements and return CSR matrices
with sorted, deduplicated column indices. Vector-valued spaces use a blocked
layout: global index = component * n_scalar + scalar index.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .mesh import EdgeTag, Mesh2D


# --------------------------------------------------------------------------
# reference element
# --------------------------------------------------------------------------

_BARY_GRADS = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
_P2_EDGES = ((0, 1), (1, 2), (2, 0))


def _barycentric(points):
    points = np.atleast_2d(np.asarray(points, dtype=float))
    x, y = points[:, 0], points[:, 1]
    return np.column_stack([1.0 - x - y, x, y])


@dataclass(frozen=True)
class ReferenceBasis:
    """Nodal Lagrange basis on the triangle (0,0), (1,0), (0,1).

    P2 nodes are the three vertices followed by the midpoints of the edges
    (0,1), (1,2), (2,0).
    """

    degree: int

    @property
    def node_count(self) -> int:
        return 3 if self.degree == 1 else 6

    @property
    def nodes(self) -> np.ndarray:
        verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        if self.degree == 1:
            return verts
        mids = np.array([(verts[i] + verts[j]) / 2 for i, j in _P2_EDGES])
        return np.vstack([verts, mids])

    def eval(self, points) -> np.ndarray:
        """Basis values, shape (npts, node_count)."""
        lam = _barycentric(points)
        if self.degree == 1:
            return lam
        cols = [lam[:, i] * (2 * lam[:, i] - 1) for i in range(3)]
        cols += [4 * lam[:, i] * lam[:, j] for i, j in _P2_EDGES]
        return np.column_stack(cols)

    def grad(self, points) -> np.ndarray:
        """Reference gradients, shape (npts, node_count, 2)."""
        lam = _barycentric(points)
        g = _BARY_GRADS
        if self.degree == 1:
            return np.broadcast_to(g, (len(lam), 3, 2)).copy()
        out = [(4 * lam[:, i] - 1)[:, None] * g[i] for i in range(3)]
        out += [4 * (lam[:, j][:, None] * g[i] + lam[:, i][:, None] * g[j]) for i, j in _P2_EDGES]
        return np.stack(out, axis=1)


P1 = ReferenceBasis(1)
P2 = ReferenceBasis(2)


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray
    order: int


def _triangle_rule_order4() -> QuadratureRule:
    a1, w1 = 0.445948490915964886318329253883, 0.223381589678011465944657041055
    a2, w2 = 0.091576213509770743459571463402, 0.109951743655321867638998766054
    pts, wts = [], []
    for a, w in ((a1, w1), (a2, w2)):
        b = 1.0 - 2.0 * a
        pts += [(a, a), (b, a), (a, b)]
        wts += [w, w, w]
    # weights above sum to one; the reference triangle has area 1/2
    return QuadratureRule(np.array(pts), 0.5 * np.array(wts), order=4)


def _edge_rule_order5() -> QuadratureRule:
    s, w = np.polynomial.legendre.leggauss(3)
    return QuadratureRule(0.5 * (s + 1.0), 0.5 * w, order=5)


TRIANGLE_RULE = _triangle_rule_order4()
EDGE_RULE = _edge_rule_order5()


def _edge_basis(degree, s):
    s = np.asarray(s, dtype=float)
    if degree == 1:
        return np.column_stack([1.0 - s, s])
    return np.column_stack([(1 - s) * (1 - 2 * s), 4 * s * (1 - s), s * (2 * s - 1)])


# --------------------------------------------------------------------------
# degrees of freedom
# --------------------------------------------------------------------------


class DofMap:
    """Global numbering of a continuous Lagrange space on one mesh.

    Parameters
    ----------
    mesh : Mesh2D
    degree : 1 or 2
    ncomp : 1 for scalar fields, 2 for vector fields
    name : label used in error messages
    """

    def __init__(self, mesh: Mesh2D, degree: int, ncomp: int = 1, name: str = ""):
        if degree not in (1, 2):
            raise ValueError(f"unsupported degree {degree}")
        if ncomp not in (1, 2):
            raise ValueError(f"unsupported component count {ncomp}")
        self.mesh = mesh
        self.degree = degree
        self.ncomp = ncomp
        self.name = name
        self.basis = P1 if degree == 1 else P2
        nv = len(mesh.vertices)
        if degree == 1:
            self.cell_dofs = np.asarray(mesh.triangles)
            self.n_scalar = nv
            self.node_coords = np.asarray(mesh.vertices)
        else:
            self.cell_dofs = np.hstack([mesh.triangles, nv + mesh.triangle_edges])
            self.n_scalar = nv + len(mesh.edges)
            mids = mesh.vertices[mesh.edges].mean(axis=1)
            self.node_coords = np.vstack([mesh.vertices, mids])
        self.size = self.n_scalar * ncomp

    @property
    def is_vector(self) -> bool:
        return self.ncomp == 2

    def component(self, c: int) -> slice:
        return slice(c * self.n_scalar, (c + 1) * self.n_scalar)

    def element_dofs(self) -> np.ndarray:
        """Global dofs per element in local order (component-major)."""
        return np.hstack([self.cell_dofs + c * self.n_scalar for c in range(self.ncomp)])

    def edge_scalar_dofs(self, edge_ids) -> np.ndarray:
        """Scalar dofs on each edge ordered by increasing x along the edge."""
        mesh = self.mesh
        e = mesh.edges[edge_ids]
        flip = mesh.vertices[e[:, 0], 0] > mesh.vertices[e[:, 1], 0]
        first = np.where(flip, e[:, 1], e[:, 0])
        last = np.where(flip, e[:, 0], e[:, 1])
        if self.degree == 1:
            return np.column_stack([first, last])
        mid = len(mesh.vertices) + np.asarray(edge_ids)
        return np.column_stack([first, mid, last])

    def exterior_scalar_dofs(self) -> np.ndarray:
        """Scalar dofs on the exterior (non-interface) boundary.

        Interface endpoints are included since they sit on exterior edges.
        """
        ext = self.mesh.exterior_edges()
        return np.unique(self.edge_scalar_dofs(ext))

    def dirichlet_dofs(self) -> np.ndarray:
        s = self.exterior_scalar_dofs()
        return np.concatenate([s + c * self.n_scalar for c in range(self.ncomp)])

    def interpolate(self, f, t: float = 0.0, dofs=None) -> np.ndarray:
        """Nodal interpolant of ``f(t, x, y)``; restricted to ``dofs`` if given."""
        xy = self.node_coords
        vals = np.asarray(f(t, xy[:, 0], xy[:, 1]), dtype=float)
        if self.is_vector:
            vals = np.concatenate([np.broadcast_to(vals[..., c], (self.n_scalar,)) for c in range(2)])
        else:
            vals = np.broadcast_to(vals, (self.n_scalar,)).copy()
        return vals if dofs is None else vals[dofs]


# --------------------------------------------------------------------------
# element geometry and field evaluation
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class _Geometry:
    points: np.ndarray  # (nt, nq, 2) physical quadrature points
    dx: np.ndarray  # (nt, nq) quadrature weight * |det J|
    inv_jt: np.ndarray  # (nt, 2, 2)


@functools.lru_cache(maxsize=32)
def _geometry(mesh: Mesh2D) -> _Geometry:
    p = mesh.vertices[mesh.triangles]
    jac = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)
    det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
    inv_jt = np.linalg.inv(jac).transpose(0, 2, 1)
    pts = p[:, None, 0, :] + np.einsum("eij,qj->eqi", jac, TRIANGLE_RULE.points)
    dx = np.abs(det)[:, None] * TRIANGLE_RULE.weights[None, :]
    return _Geometry(pts, dx, inv_jt)


@functools.lru_cache(maxsize=32)
def _scalar_tables(mesh: Mesh2D, degree: int):
    basis = P1 if degree == 1 else P2
    vals = basis.eval(TRIANGLE_RULE.points)  # (nq, nloc)
    ref = basis.grad(TRIANGLE_RULE.points)  # (nq, nloc, 2)
    grads = np.einsum("eij,qaj->eqai", _geometry(mesh).inv_jt, ref)
    return vals, grads


def _vector_tables(dm: DofMap):
    """Values (nq, 2*nloc, 2) and gradient tensors (nt, nq, 2*nloc, 2, 2).

    Gradient tensor entry [i, j] is d(v_i)/dx_j.
    """
    vals, grads = _scalar_tables(dm.mesh, dm.degree)
    nt, nq, nloc, _ = grads.shape
    vv = np.zeros((nq, 2 * nloc, 2))
    gg = np.zeros((nt, nq, 2 * nloc, 2, 2))
    for c in range(2):
        vv[:, c * nloc:(c + 1) * nloc, c] = vals
        gg[:, :, c * nloc:(c + 1) * nloc, c, :] = grads
    return vv, gg


def quadrature_points(mesh: Mesh2D) -> tuple[np.ndarray, np.ndarray]:
    """Physical quadrature points (nt, nq, 2) and weights (nt, nq)."""
    g = _geometry(mesh)
    return g.points, g.dx


def evaluate(dm: DofMap, coeffs) -> tuple[np.ndarray, np.ndarray]:
    """Field values and gradients at the quadrature points of every element.

    Scalars give shapes (nt, nq) and (nt, nq, 2); vectors (nt, nq, 2) and
    (nt, nq, 2, 2) with gradient entry [i, j] = d(v_i)/dx_j.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    vals, grads = _scalar_tables(dm.mesh, dm.degree)
    comps_v, comps_g = [], []
    for c in range(dm.ncomp):
        local = coeffs[dm.component(c)][dm.cell_dofs]  # (nt, nloc)
        comps_v.append(local @ vals.T)
        comps_g.append(np.einsum("ea,eqai->eqi", local, grads))
    if dm.ncomp == 1:
        return comps_v[0], comps_g[0]
    return np.stack(comps_v, axis=-1), np.stack(comps_g, axis=-2)


# --------------------------------------------------------------------------
# volume forms
# --------------------------------------------------------------------------


def _to_csr(local, rows, cols, shape):
    r = np.broadcast_to(rows[:, :, None], local.shape)
    c = np.broadcast_to(cols[:, None, :], local.shape)
    m = sp.coo_matrix((local.ravel(), (r.ravel(), c.ravel())), shape=shape).tocsr()
    m.sum_duplicates()
    m.sort_indices()
    return m


def _require_same_mesh(*dms):
    if any(dm.mesh is not dms[0].mesh for dm in dms):
        raise ValueError("dofmaps live on different meshes")


def _require_vector(dm):
    if not dm.is_vector:
        raise ValueError(f"expected a vector dofmap, got scalar {dm.name!r}")


def _require_scalar(dm):
    if dm.is_vector:
        raise ValueError(f"expected a scalar dofmap, got vector {dm.name!r}")


def assemble_mass(mesh: Mesh2D, dofmap: DofMap, density: float = 1.0) -> sp.csr_matrix:
    """density * (phi_j, phi_i); block diagonal for vector spaces."""
    if density < 0:
        raise ValueError("density must be non-negative")
    if dofmap.mesh is not mesh:
        raise ValueError("dofmap was not built on this mesh")
    vals, _ = _scalar_tables(mesh, dofmap.degree)
    dx = _geometry(mesh).dx
    local = density * np.einsum("eq,qa,qb->eab", dx, vals, vals)
    scalar = _to_csr(local, dofmap.cell_dofs, dofmap.cell_dofs, (dofmap.n_scalar,) * 2)
    if dofmap.ncomp == 1:
        return scalar
    return sp.block_diag([scalar] * dofmap.ncomp, format="csr")


def assemble_sym_grad_stiffness(mesh: Mesh2D, dofmap: DofMap, coeff: float) -> sp.csr_matrix:
    """2 * coeff * (D(u), D(v)) with D the symmetric gradient."""
    _require_vector(dofmap)
    _, gg = _vector_tables(dofmap)
    sym = 0.5 * (gg + gg.swapaxes(-1, -2))
    local = 2.0 * coeff * np.einsum("eq,eqaij,eqbij->eab", _geometry(mesh).dx, sym, sym)
    dofs = dofmap.element_dofs()
    return _to_csr(local, dofs, dofs, (dofmap.size,) * 2)


def _divergence(dm):
    _, gg = _vector_tables(dm)
    return gg[..., 0, 0] + gg[..., 1, 1]  # (nt, nq, 2*nloc)


def assemble_div_div(mesh: Mesh2D, dofmap: DofMap, coeff: float) -> sp.csr_matrix:
    """coeff * (div u, div v)."""
    _require_vector(dofmap)
    div = _divergence(dofmap)
    local = coeff * np.einsum("eq,eqa,eqb->eab", _geometry(mesh).dx, div, div)
    dofs = dofmap.element_dofs()
    return _to_csr(local, dofs, dofs, (dofmap.size,) * 2)


def assemble_pressure_div(mesh: Mesh2D, v_dofmap: DofMap, q_dofmap: DofMap) -> sp.csr_matrix:
    """Rectangular C with C[k, j] = (psi_k, div Phi_j)."""
    _require_vector(v_dofmap)
    _require_scalar(q_dofmap)
    _require_same_mesh(v_dofmap, q_dofmap)
    div = _divergence(v_dofmap)
    qvals, _ = _scalar_tables(mesh, q_dofmap.degree)
    local = np.einsum("eq,qk,eqb->ekb", _geometry(mesh).dx, qvals, div)
    return _to_csr(local, q_dofmap.cell_dofs, v_dofmap.element_dofs(), (q_dofmap.size, v_dofmap.size))


def assemble_scalar_stiffness(mesh: Mesh2D, dofmap: DofMap, K) -> sp.csr_matrix:
    """(K grad phi_j, grad phi_i) for a constant SPD tensor K."""
    _require_scalar(dofmap)
    K = np.asarray(K, dtype=float)
    if K.shape != (2, 2) or not np.allclose(K, K.T) or np.any(np.linalg.eigvalsh(K) <= 0):
        raise ValueError("K must be a symmetric positive definite 2x2 tensor")
    _, grads = _scalar_tables(mesh, dofmap.degree)
    local = np.einsum("eq,eqai,ij,eqbj->eab", _geometry(mesh).dx, grads, K, grads)
    return _to_csr(local, dofmap.cell_dofs, dofmap.cell_dofs, (dofmap.size,) * 2)


def assemble_load(mesh: Mesh2D, dofmap: DofMap, f, t: float = 0.0) -> np.ndarray:
    """b_i = (f(t, .), phi_i); ``f`` returns shape (..., 2) for vector spaces."""
    geo = _geometry(mesh)
    vals, _ = _scalar_tables(mesh, dofmap.degree)
    x, y = geo.points[..., 0], geo.points[..., 1]
    fv = np.asarray(f(t, x, y), dtype=float)
    out = np.zeros(dofmap.size)
    for c in range(dofmap.ncomp):
        fc = fv[..., c] if dofmap.is_vector else fv
        local = np.einsum("eq,eq,qa->ea", geo.dx, np.broadcast_to(fc, x.shape), vals)
        np.add.at(out[dofmap.component(c)], dofmap.cell_dofs, local)
    return out


# --------------------------------------------------------------------------
# interface forms
# --------------------------------------------------------------------------


class InterfacePairing:
    """Interface edges of two meshes matched one-to-one by position.

    The same mesh may appear on both sides, which gives single-sided forms.
    """

    def __init__(self, mesh_a: Mesh2D, mesh_b: Mesh2D):
        self.mesh_a, self.mesh_b = mesh_a, mesh_b
        self.edges_a = self._sorted_interface(mesh_a)
        self.edges_b = self._sorted_interface(mesh_b)
        if len(self.edges_a) != len(self.edges_b):
            raise ValueError("interface edge counts differ between meshes")
        xa = np.sort(mesh_a.vertices[mesh_a.edges[self.edges_a]][:, :, 0], axis=1)
        xb = np.sort(mesh_b.vertices[mesh_b.edges[self.edges_b]][:, :, 0], axis=1)
        if not np.array_equal(xa, xb):
            raise ValueError("interface nodes of the two meshes do not match")
        self.lengths = xa[:, 1] - xa[:, 0]

    @staticmethod
    def _sorted_interface(mesh):
        ids = np.flatnonzero(mesh.edge_tags == EdgeTag.INTERFACE)
        mid = mesh.vertices[mesh.edges[ids]][:, :, 0].mean(axis=1)
        return ids[np.argsort(mid, kind="stable")]

    def edges_for(self, dm: DofMap) -> np.ndarray:
        if dm.mesh is self.mesh_a:
            return self.edges_a
        if dm.mesh is self.mesh_b:
            return self.edges_b
        raise ValueError(f"dofmap {dm.name!r} is not on either interface mesh")


def _traces(pairing, dm, direction):
    """Global dofs (ne, m) and trace values (nq, m) for one side."""
    sdofs = dm.edge_scalar_dofs(pairing.edges_for(dm))
    phi = _edge_basis(dm.degree, EDGE_RULE.points)
    if not dm.is_vector:
        if direction is not None:
            raise ValueError("scalar traces take no direction")
        return sdofs, phi
    if direction is None:
        raise ValueError("vector traces need a direction")
    d = np.asarray(direction, dtype=float)
    dofs = np.hstack([sdofs + c * dm.n_scalar for c in range(2)])
    vals = np.hstack([phi * d[c] for c in range(2)])
    return dofs, vals


def assemble_interface(pairing: InterfacePairing, dofmap_row: DofMap, dofmap_col: DofMap,
                       dir_row, dir_col, coeff: float) -> sp.csr_matrix:
    """coeff * <trace_j, trace_i> on the interface.

    A vector trace is the field dotted with its direction; a scalar trace is
    the field itself (direction ``None``).
    """
    rdofs, rvals = _traces(pairing, dofmap_row, dir_row)
    cdofs, cvals = _traces(pairing, dofmap_col, dir_col)
    w = coeff * pairing.lengths[:, None] * EDGE_RULE.weights[None, :]
    local = np.einsum("eq,qa,qb->eab", w, rvals, cvals)
    return _to_csr(local, rdofs, cdofs, (dofmap_row.size, dofmap_col.size))


def assemble_interface_tangential(pairing, dofmap_row, dofmap_col, tangent, coeff):
    """coeff * <(Phi_j . tau), (Phi_i . tau)>, i.e. <P Phi_j, P Phi_i> on a flat interface."""
    _require_vector(dofmap_row)
    _require_vector(dofmap_col)
    return assemble_interface(pairing, dofmap_row, dofmap_col, tangent, tangent, coeff)


def assemble_interface_normal(pairing, dofmap_row, dofmap_col, normal_row, normal_col, coeff):
    """coeff * <trace_j, trace_i> with normal traces for vector spaces."""
    return assemble_interface(
        pairing,
        dofmap_row,
        dofmap_col,
        normal_row if dofmap_row.is_vector else None,
        normal_col if dofmap_col.is_vector else None,
        coeff,
    )


# --------------------------------------------------------------------------
# essential boundary conditions
# --------------------------------------------------------------------------


class DirichletReduction:
    """Row replacement plus column elimination for a fixed matrix.

    ``matrix`` has identity rows and zero columns at the constrained dofs;
    ``rhs`` moves the known columns to the right-hand side.
    """

    def __init__(self, A, dofs):
        A = sp.csr_matrix(A)
        self.dofs = np.unique(np.asarray(dofs, dtype=np.int64))
        keep = np.ones(A.shape[0])
        keep[self.dofs] = 0.0
        self.coupling = A[:, self.dofs].tocsr()
        D = sp.diags(keep)
        m = (D @ A @ D + sp.diags(1.0 - keep)).tocsr()
        m.eliminate_zeros()
        m.sort_indices()
        self.matrix = m

    def rhs(self, b, values) -> np.ndarray:
        """``values`` are ordered like ``self.dofs``."""
        values = np.asarray(values, dtype=float)
        out = np.asarray(b, dtype=float) - self.coupling @ values
        out[self.dofs] = values
        return out


def apply_dirichlet(system, rhs, mask, values):
    """Return the constrained (matrix, rhs) pair."""
    mask = np.asarray(mask, dtype=np.int64)
    values = np.broadcast_to(np.asarray(values, dtype=float), mask.shape)
    _, first = np.unique(mask, return_index=True)
    red = DirichletReduction(system, mask)
    return red.matrix, red.rhs(rhs, values[first])


# --------------------------------------------------------------------------
# loads from exact fields (used by the Ritz projections)
# --------------------------------------------------------------------------


def assemble_gradient_load(mesh: Mesh2D, dofmap: DofMap, g, t: float = 0.0) -> np.ndarray:
    """b_i = (g, grad phi_i) for scalar spaces, (g : grad Phi_i) for vector spaces.

    ``g(t, x, y)`` returns shape (..., 2) or (..., 2, 2) respectively.
    """
    geo = _geometry(mesh)
    _, grads = _scalar_tables(mesh, dofmap.degree)
    gv = np.asarray(g(t, geo.points[..., 0], geo.points[..., 1]), dtype=float)
    out = np.zeros(dofmap.size)
    for c in range(dofmap.ncomp):
        gc = gv[..., c, :] if dofmap.is_vector else gv
        local = np.einsum("eq,eqi,eqai->ea", geo.dx, gc, grads)
        np.add.at(out[dofmap.component(c)], dofmap.cell_dofs, local)
    return out


def assemble_interface_load(pairing: InterfacePairing, dofmap: DofMap, direction, g,
                            coeff: float = 1.0, t: float = 0.0) -> np.ndarray:
    """b_i = coeff * <g, trace_i> on the interface, g a scalar function of (t, x, y)."""
    dofs, vals = _traces(pairing, dofmap, direction if dofmap.is_vector else None)
    mesh = dofmap.mesh
    e = mesh.edges[pairing.edges_for(dofmap)]
    x0 = np.min(mesh.vertices[e][:, :, 0], axis=1)
    xq = x0[:, None] + pairing.lengths[:, None] * EDGE_RULE.points[None, :]
    gq = np.asarray(g(t, xq, np.zeros_like(xq)), dtype=float)
    w = coeff * pairing.lengths[:, None] * EDGE_RULE.weights[None, :]
    out = np.zeros(dofmap.size)
    np.add.at(out, dofs, np.einsum("eq,eq,qa->ea", w, gq, vals))
    return out
