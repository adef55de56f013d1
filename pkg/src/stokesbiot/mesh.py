"""Structured triangulations of the fluid and poroelastic rectangles.

The fluid block is (0,1) x (0,1) and the poroelastic block (0,1) x (-1,0);
the two share the interface y = 0. Each block is meshed independently with
the same vertex layout along the interface, so that interface quadrature can
pair traces from both sides node by node.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import TextIO

import numpy as np


class Region(str, enum.Enum):
    FLUID = "Fluid"
    PORO = "Poro"


class EdgeTag(enum.IntEnum):
    INTERIOR = 0
    EXTERIOR_FLUID = 1
    EXTERIOR_PORO = 2
    INTERFACE = 3


@dataclass(frozen=True)
class InterfaceGeometry:
    """Constant normals and tangent of the flat interface."""

    n_f: np.ndarray = field(default_factory=lambda: np.array([0.0, -1.0]))
    n_p: np.ndarray = field(default_factory=lambda: np.array([0.0, 1.0]))
    tangent: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0]))


INTERFACE = InterfaceGeometry()


def _frozen(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Mesh2D:
    """Triangle mesh of one subdomain.

    Attributes
    ----------
    vertices : (nv, 2) float array
    triangles : (nt, 3) int array, counterclockwise
    edges : (ne, 2) int array, vertex pairs with the lower index first
    edge_tags : (ne,) int array of ``EdgeTag`` values
    triangle_edges : (nt, 3) int array; local edge k joins local vertices
        k and (k+1) % 3
    region : Region
    n : cells per unit length
    """

    vertices: np.ndarray
    triangles: np.ndarray
    edges: np.ndarray
    edge_tags: np.ndarray
    triangle_edges: np.ndarray
    region: Region
    n: int

    @property
    def triangle_region(self) -> np.ndarray:
        return np.full(len(self.triangles), self.region.value)

    @property
    def spacing(self) -> float:
        return 1.0 / self.n

    @property
    def h(self) -> float:
        """Largest edge length."""
        p = self.vertices[self.edges]
        return float(np.max(np.linalg.norm(p[:, 1] - p[:, 0], axis=1)))

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def boundary_edges(self) -> np.ndarray:
        return np.flatnonzero(self.edge_tags != EdgeTag.INTERIOR)

    def exterior_edges(self) -> np.ndarray:
        tag = EdgeTag.EXTERIOR_FLUID if self.region is Region.FLUID else EdgeTag.EXTERIOR_PORO
        return np.flatnonzero(self.edge_tags == tag)


def build_rect_mesh(n: int, region: Region | str) -> Mesh2D:
    """Uniform mesh of n x n squares, each cut along its rising diagonal."""
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    n = int(n)
    region = Region(region)

    ticks = np.arange(n + 1) / n
    xs, ys = np.meshgrid(ticks, ticks)
    # poro block sits below the interface; -1 + j/n hits 0.0 exactly at j = n
    ys = ys if region is Region.FLUID else ys - 1.0
    vertices = np.column_stack([xs.ravel(), ys.ravel()])

    i, j = np.meshgrid(np.arange(n), np.arange(n))
    a = (i + j * (n + 1)).ravel()
    b, c, d = a + 1, a + n + 2, a + n + 1
    triangles = np.concatenate([np.column_stack([a, b, c]), np.column_stack([a, c, d])])

    local = np.stack([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]], axis=1)
    keys = np.sort(local.reshape(-1, 2), axis=1)
    edges, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    triangle_edges = inverse.reshape(-1, 3)

    on_boundary = counts == 1
    on_interface = on_boundary & np.all(vertices[edges][:, :, 1] == 0.0, axis=1)
    exterior = EdgeTag.EXTERIOR_FLUID if region is Region.FLUID else EdgeTag.EXTERIOR_PORO
    tags = np.full(len(edges), EdgeTag.INTERIOR, dtype=np.int64)
    tags[on_boundary] = exterior
    tags[on_interface] = EdgeTag.INTERFACE

    return Mesh2D(
        vertices=_frozen(vertices),
        triangles=_frozen(triangles.astype(np.int64)),
        edges=_frozen(edges.astype(np.int64)),
        edge_tags=_frozen(tags),
        triangle_edges=_frozen(triangle_edges.astype(np.int64)),
        region=region,
        n=n,
    )


def interface_edges(mesh: Mesh2D) -> list[tuple[int, int]]:
    """(edge, owning triangle) pairs on y = 0, sorted by midpoint x."""
    ids = np.flatnonzero(mesh.edge_tags == EdgeTag.INTERFACE)
    mid_x = mesh.vertices[mesh.edges[ids]][:, :, 0].mean(axis=1)
    ids = ids[np.argsort(mid_x, kind="stable")]
    owner = {}
    for t, row in enumerate(mesh.triangle_edges):
        for e in row:
            owner.setdefault(int(e), t)
    return [(int(e), owner[int(e)]) for e in ids]


def dump_mesh(mesh: Mesh2D, stream: TextIO) -> None:
    """Plain-text dump: ``v x y``, ``t i j k`` and ``e i j TAG`` lines."""
    for x, y in mesh.vertices:
        stream.write(f"v {float(x)!r} {float(y)!r}\n")
    for i, j, k in mesh.triangles:
        stream.write(f"t {i} {j} {k}\n")
    for (i, j), tag in zip(mesh.edges, mesh.edge_tags):
        if tag != EdgeTag.INTERIOR:
            stream.write(f"e {i} {j} {EdgeTag(tag).name}\n")
