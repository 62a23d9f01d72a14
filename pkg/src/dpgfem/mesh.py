"""Structured meshes of axis-aligned rectangles with tagged boundary facets.

Element (i, j) has index j*nx + i. Facets are stored explicitly with a
single global unit normal each: on interior facets the normal points from
the incident element of lower index to the one of higher index, on
boundary facets it points out of the domain. A mesh is immutable after
construction and safe to share between threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np


class FacetTag(IntEnum):
    INTERIOR = 0
    DIRICHLET = 1
    NEUMANN = 2
    ROBIN = 3


SIDES = ("left", "right", "bottom", "top")

_TAG_FROM_NAME = {
    "dirichlet": FacetTag.DIRICHLET,
    "neumann": FacetTag.NEUMANN,
    "robin": FacetTag.ROBIN,
}

# local facet order used everywhere: left, right, bottom, top
LOCAL_EDGES = (0, 1, 2, 3)


class InvalidPartitionError(ValueError):
    pass


@dataclass(frozen=True)
class Rectangle:
    """Axis-aligned domain (x0, x1) x (y0, y1)."""

    x0: float = 0.0
    x1: float = 1.0
    y0: float = 0.0
    y1: float = 1.0

    def __post_init__(self):
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ValueError("degenerate rectangle: need x1 > x0 and y1 > y0")

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    @property
    def area(self) -> float:
        return self.width * self.height


@dataclass(frozen=True)
class BoundaryPartition:
    """Boundary tag per side of the rectangle.

    Sides carry exactly one tag each; a partition is valid for the
    concentration problem when every side is Neumann, and for the
    potential problem when the Neumann and Robin parts are both
    non-empty (the Dirichlet part may be empty).
    """

    left: FacetTag = FacetTag.NEUMANN
    right: FacetTag = FacetTag.NEUMANN
    bottom: FacetTag = FacetTag.NEUMANN
    top: FacetTag = FacetTag.NEUMANN

    @classmethod
    def from_names(cls, names: dict) -> "BoundaryPartition":
        tags = {}
        for side, name in names.items():
            if side not in SIDES:
                raise InvalidPartitionError(f"invalid partition: unknown side {side!r}")
            key = str(name).lower()
            if key not in _TAG_FROM_NAME:
                raise InvalidPartitionError(
                    f"invalid partition: unknown boundary tag {name!r} on side {side!r}"
                )
            tags[side] = _TAG_FROM_NAME[key]
        return cls(**tags)

    def side_tags(self) -> dict:
        return {"left": self.left, "right": self.right,
                "bottom": self.bottom, "top": self.top}

    def validate_for(self, problem_kind: str) -> None:
        tags = list(self.side_tags().values())
        if problem_kind == "concentration":
            if any(t != FacetTag.NEUMANN for t in tags):
                raise InvalidPartitionError(
                    "invalid partition: concentration problem requires Neumann data "
                    "on every side"
                )
        elif problem_kind == "potential":
            if FacetTag.NEUMANN not in tags or FacetTag.ROBIN not in tags:
                raise InvalidPartitionError(
                    "invalid partition: potential problem requires non-empty Neumann "
                    "and Robin boundary parts"
                )
        else:
            raise ValueError(f"unknown problem kind {problem_kind!r}")


@dataclass(eq=False)
class Mesh:
    """Structured rectangle mesh; see module docstring for conventions."""

    domain: Rectangle
    nx: int
    ny: int
    vertices: np.ndarray          # (n_vertices, 2)
    elem_verts: np.ndarray        # (n_elems, 4) counterclockwise from lower-left
    facet_verts: np.ndarray       # (n_facets, 2) vertex ids
    facet_normals: np.ndarray     # (n_facets, 2) global unit normal
    facet_elems: np.ndarray       # (n_facets, 2) incident elements, -1 if absent
    facet_tags: np.ndarray        # (n_facets,) FacetTag values
    elem_facets: np.ndarray       # (n_elems, 4) facet id per local edge L,R,B,T
    elem_facet_signs: np.ndarray  # (n_elems, 4) +1 if global normal is outward
    partition: BoundaryPartition | None = None
    problem_kind: str | None = None

    @property
    def n_elems(self) -> int:
        return self.nx * self.ny

    @property
    def n_facets(self) -> int:
        return self.facet_verts.shape[0]

    @property
    def dx(self) -> float:
        return self.domain.width / self.nx

    @property
    def dy(self) -> float:
        return self.domain.height / self.ny

    @property
    def h_max(self) -> float:
        return float(np.hypot(self.dx, self.dy))

    @property
    def element_area(self) -> float:
        return self.dx * self.dy

    def element_origin(self, e: int) -> tuple[float, float]:
        i, j = e % self.nx, e // self.nx
        return (self.domain.x0 + i * self.dx, self.domain.y0 + j * self.dy)

    def interior_facets(self) -> np.ndarray:
        return np.flatnonzero(self.facet_elems[:, 1] >= 0)

    def boundary_facets(self) -> np.ndarray:
        return np.flatnonzero(self.facet_elems[:, 1] < 0)

    def facets_with_tag(self, tag: FacetTag) -> np.ndarray:
        return np.flatnonzero(self.facet_tags == int(tag))

    def facet_length(self, f: int) -> float:
        a, b = self.facet_verts[f]
        return float(np.linalg.norm(self.vertices[b] - self.vertices[a]))

    def facet_endpoints(self, f: int) -> np.ndarray:
        return self.vertices[self.facet_verts[f]]

    def summary(self) -> dict:
        tags = {t.name.lower(): int(np.sum(self.facet_tags == int(t))) for t in FacetTag}
        return {
            "nx": self.nx,
            "ny": self.ny,
            "n_elements": self.n_elems,
            "n_facets": self.n_facets,
            "facet_counts": tags,
            "h_max": self.h_max,
        }


def facet_geometry(mesh: Mesh, f: int):
    """Length, global normal, incident elements and per-element signs of a facet."""
    elems = tuple(int(e) for e in mesh.facet_elems[f] if e >= 0)
    signs = []
    for e in elems:
        k = int(np.flatnonzero(mesh.elem_facets[e] == f)[0])
        signs.append(float(mesh.elem_facet_signs[e, k]))
    return mesh.facet_length(f), mesh.facet_normals[f].copy(), elems, tuple(signs)


def build_rect_mesh(domain: Rectangle, nx: int, ny: int) -> Mesh:
    """Uniform nx-by-ny mesh of the rectangle; boundary facets tagged Neumann."""
    if nx < 1 or ny < 1:
        raise ValueError("need at least one element per direction")
    dx = domain.width / nx
    dy = domain.height / ny

    xs = domain.x0 + dx * np.arange(nx + 1)
    ys = domain.y0 + dy * np.arange(ny + 1)
    X, Y = np.meshgrid(xs, ys)                 # row-major, vertex v = j*(nx+1)+i
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return j * (nx + 1) + i

    elem_verts = np.empty((nx * ny, 4), dtype=np.int64)
    for j in range(ny):
        for i in range(nx):
            e = j * nx + i
            elem_verts[e] = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1))

    # vertical facets first (constant x), then horizontal (constant y)
    n_vert = (nx + 1) * ny
    n_horz = nx * (ny + 1)
    n_facets = n_vert + n_horz
    facet_verts = np.empty((n_facets, 2), dtype=np.int64)
    facet_normals = np.zeros((n_facets, 2))
    facet_elems = np.full((n_facets, 2), -1, dtype=np.int64)
    facet_tags = np.full(n_facets, int(FacetTag.INTERIOR), dtype=np.int64)

    def vfid(i, j):
        return j * (nx + 1) + i

    def hfid(i, j):
        return n_vert + j * nx + i

    for j in range(ny):
        for i in range(nx + 1):
            f = vfid(i, j)
            facet_verts[f] = (vid(i, j), vid(i, j + 1))
            left = j * nx + (i - 1) if i > 0 else -1
            right = j * nx + i if i < nx else -1
            if left >= 0 and right >= 0:
                facet_elems[f] = (left, right)   # lower element index first
                facet_normals[f] = (1.0, 0.0)
            elif right >= 0:                     # domain boundary x = x0
                facet_elems[f] = (right, -1)
                facet_normals[f] = (-1.0, 0.0)
                facet_tags[f] = int(FacetTag.NEUMANN)
            else:                                # domain boundary x = x1
                facet_elems[f] = (left, -1)
                facet_normals[f] = (1.0, 0.0)
                facet_tags[f] = int(FacetTag.NEUMANN)

    for j in range(ny + 1):
        for i in range(nx):
            f = hfid(i, j)
            facet_verts[f] = (vid(i, j), vid(i + 1, j))
            below = (j - 1) * nx + i if j > 0 else -1
            above = j * nx + i if j < ny else -1
            if below >= 0 and above >= 0:
                facet_elems[f] = (below, above)
                facet_normals[f] = (0.0, 1.0)
            elif above >= 0:                     # y = y0
                facet_elems[f] = (above, -1)
                facet_normals[f] = (0.0, -1.0)
                facet_tags[f] = int(FacetTag.NEUMANN)
            else:                                # y = y1
                facet_elems[f] = (below, -1)
                facet_normals[f] = (0.0, 1.0)
                facet_tags[f] = int(FacetTag.NEUMANN)

    elem_facets = np.empty((nx * ny, 4), dtype=np.int64)
    elem_facet_signs = np.empty((nx * ny, 4))
    outward = np.array([(-1.0, 0.0), (1.0, 0.0), (0.0, -1.0), (0.0, 1.0)])
    for j in range(ny):
        for i in range(nx):
            e = j * nx + i
            elem_facets[e] = (vfid(i, j), vfid(i + 1, j), hfid(i, j), hfid(i, j + 1))
            for k in range(4):
                n = facet_normals[elem_facets[e, k]]
                elem_facet_signs[e, k] = 1.0 if np.dot(n, outward[k]) > 0 else -1.0

    return Mesh(domain, nx, ny, vertices, elem_verts, facet_verts, facet_normals,
                facet_elems, facet_tags, elem_facets, elem_facet_signs)


def _side_of_boundary_facet(mesh: Mesh, f: int) -> str:
    n = mesh.facet_normals[f]
    if n[0] < -0.5:
        return "left"
    if n[0] > 0.5:
        return "right"
    if n[1] < -0.5:
        return "bottom"
    return "top"


def classify_boundary(mesh: Mesh, partition: BoundaryPartition,
                      problem_kind: str) -> Mesh:
    """New mesh with boundary facets tagged per side, validated for the problem."""
    partition.validate_for(problem_kind)
    side_tags = partition.side_tags()
    tags = mesh.facet_tags.copy()
    for f in mesh.boundary_facets():
        tags[f] = int(side_tags[_side_of_boundary_facet(mesh, f)])
    return Mesh(mesh.domain, mesh.nx, mesh.ny, mesh.vertices, mesh.elem_verts,
                mesh.facet_verts, mesh.facet_normals, mesh.facet_elems, tags,
                mesh.elem_facets, mesh.elem_facet_signs, partition, problem_kind)


def refine_uniform(mesh: Mesh) -> Mesh:
    """Halve every element; boundary tags are inherited from the parent sides."""
    fine = build_rect_mesh(mesh.domain, 2 * mesh.nx, 2 * mesh.ny)
    if mesh.partition is not None:
        fine = classify_boundary(fine, mesh.partition, mesh.problem_kind)
    return fine
