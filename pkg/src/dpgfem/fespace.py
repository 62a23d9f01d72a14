"""Lagrange bases on Gauss-Lobatto nodes and global dof numbering.

Trial spaces per element: globally continuous scalar field of degree p,
element-local vector flux of degree p-1 per component, and facet traces
of degree p-1 on active facets. The enriched test space is a broken
scalar space of degree p + delta_p.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_DEGREE = 10


def gauss_lobatto_nodes(degree: int) -> np.ndarray:
    """Nodes in [-1, 1] of the degree-`degree` Lobatto family (degree+1 points).

    Degree 0 degenerates to the single midpoint node.
    """
    if degree < 0:
        raise ValueError("degree must be >= 0")
    if degree == 0:
        return np.array([0.0])
    if degree == 1:
        return np.array([-1.0, 1.0])
    coeffs = np.zeros(degree + 1)
    coeffs[degree] = 1.0
    interior = np.polynomial.legendre.legroots(np.polynomial.legendre.legder(coeffs))
    return np.concatenate([[-1.0], np.sort(np.real(interior)), [1.0]])


def lagrange_1d(nodes: np.ndarray, x: np.ndarray, deriv: bool = False):
    """Values (and optionally derivatives) of the nodal Lagrange basis at x.

    Returns (npts, nnodes) arrays. The product formula is used directly,
    which is exact and stable for the small degrees supported here.
    """
    nodes = np.asarray(nodes, dtype=float)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = nodes.shape[0]
    vals = np.ones((x.shape[0], n))
    for i in range(n):
        for j in range(n):
            if j != i:
                vals[:, i] *= (x - nodes[j]) / (nodes[i] - nodes[j])
    if not deriv:
        return vals
    ders = np.zeros((x.shape[0], n))
    for i in range(n):
        denom = np.prod([nodes[i] - nodes[j] for j in range(n) if j != i]) if n > 1 else 1.0
        for k in range(n):
            if k == i:
                continue
            term = np.ones_like(x)
            for j in range(n):
                if j != i and j != k:
                    term *= x - nodes[j]
            ders[:, i] += term / denom
    return vals, ders


def tabulate_h1_basis(p: int, points: np.ndarray):
    """Tensor Lagrange basis of degree p on [-1,1]^2 at reference points.

    Returns (values, grads) with shapes (npts, (p+1)^2) and
    (npts, (p+1)^2, 2); gradients are in reference coordinates. Local dof
    a = iy*(p+1) + ix corresponds to the node (ix, iy) of the lattice.
    """
    if not 1 <= p <= MAX_DEGREE:
        raise ValueError(f"field degree {p} outside supported range [1, {MAX_DEGREE}]")
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    nodes = gauss_lobatto_nodes(p)
    vx, dx = lagrange_1d(nodes, pts[:, 0], deriv=True)
    vy, dy = lagrange_1d(nodes, pts[:, 1], deriv=True)
    npts, n1 = vx.shape
    values = np.empty((npts, n1 * n1))
    grads = np.empty((npts, n1 * n1, 2))
    for iy in range(n1):
        for ix in range(n1):
            a = iy * n1 + ix
            values[:, a] = vx[:, ix] * vy[:, iy]
            grads[:, a, 0] = dx[:, ix] * vy[:, iy]
            grads[:, a, 1] = vx[:, ix] * dy[:, iy]
    return values, grads


def tabulate_l2_basis(degree: int, points: np.ndarray) -> np.ndarray:
    """Scalar modes of the element-local space of degree `degree`.

    Returns (npts, (degree+1)^2). The vector flux basis consists of these
    modes per Cartesian component, x-component block first.
    """
    if not 0 <= degree <= MAX_DEGREE:
        raise ValueError(f"flux degree {degree} outside supported range [0, {MAX_DEGREE}]")
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    nodes = gauss_lobatto_nodes(degree)
    vx = lagrange_1d(nodes, pts[:, 0])
    vy = lagrange_1d(nodes, pts[:, 1])
    n1 = nodes.shape[0]
    values = np.empty((pts.shape[0], n1 * n1))
    for iy in range(n1):
        for ix in range(n1):
            values[:, iy * n1 + ix] = vx[:, ix] * vy[:, iy]
    return values


def tabulate_facet_basis(degree: int, t: np.ndarray) -> np.ndarray:
    """Facet polynomial basis of degree `degree` at 1d reference points t."""
    if not 0 <= degree <= MAX_DEGREE:
        raise ValueError(f"trace degree {degree} outside supported range [0, {MAX_DEGREE}]")
    return lagrange_1d(gauss_lobatto_nodes(degree), np.atleast_1d(t))


@dataclass(frozen=True)
class SpaceLayout:
    """Polynomial degrees of the trial and enriched test spaces."""

    p: int
    delta_p: int = 1

    def __post_init__(self):
        if not 1 <= self.p <= MAX_DEGREE:
            raise ValueError(f"field degree {self.p} outside supported range [1, {MAX_DEGREE}]")
        if self.delta_p < 1:
            raise ValueError("test enrichment delta_p must be >= 1")
        if self.p + self.delta_p > MAX_DEGREE:
            raise ValueError(f"enriched degree {self.p + self.delta_p} exceeds {MAX_DEGREE}")

    @property
    def n_field_local(self) -> int:
        return (self.p + 1) ** 2

    @property
    def n_flux_scalar(self) -> int:
        return self.p ** 2

    @property
    def n_flux_local(self) -> int:
        return 2 * self.p ** 2

    @property
    def n_trace_facet(self) -> int:
        return self.p

    @property
    def enriched_degree(self) -> int:
        return self.p + self.delta_p

    @property
    def n_enriched(self) -> int:
        return (self.enriched_degree + 1) ** 2

    @property
    def default_quad_points(self) -> int:
        # exact for every bilinear-form integrand appearing in the kernels
        return self.p + self.delta_p + 1


class DofMap:
    """Global numbering: field block, then flux block, then trace block.

    Field dofs live on the (nx*p+1) x (ny*p+1) lattice; flux dofs are
    element-local (2 p^2 per element); trace dofs take p slots per active
    facet, ordered by ascending facet id.
    """

    def __init__(self, mesh, layout: SpaceLayout, active_facets: np.ndarray):
        self.mesh = mesh
        self.layout = layout
        p = layout.p
        nxp = mesh.nx * p + 1
        nyp = mesh.ny * p + 1
        self.n_field = nxp * nyp
        self.n_flux = layout.n_flux_local * mesh.n_elems
        self.active_facets = np.sort(np.asarray(active_facets, dtype=np.int64))
        self.n_trace = layout.n_trace_facet * self.active_facets.shape[0]
        self.n_total = self.n_field + self.n_flux + self.n_trace
        self.flux_offset = self.n_field
        self.trace_offset = self.n_field + self.n_flux

        self.facet_slot = np.full(mesh.n_facets, -1, dtype=np.int64)
        self.facet_slot[self.active_facets] = np.arange(self.active_facets.shape[0])

        n1 = p + 1
        self.elem_field = np.empty((mesh.n_elems, n1 * n1), dtype=np.int64)
        for e in range(mesh.n_elems):
            i, j = e % mesh.nx, e // mesh.nx
            for iy in range(n1):
                row = (j * p + iy) * nxp + i * p
                self.elem_field[e, iy * n1:(iy + 1) * n1] = row + np.arange(n1)
        self._nxp = nxp
        self._nyp = nyp

    def field_lattice_shape(self) -> tuple[int, int]:
        return (self._nxp, self._nyp)

    def elem_flux_dofs(self, e: int) -> np.ndarray:
        n = self.layout.n_flux_local
        return self.flux_offset + e * n + np.arange(n)

    def facet_trace_dofs(self, f: int) -> np.ndarray:
        s = self.facet_slot[f]
        if s < 0:
            raise ValueError(f"facet {f} carries no trace dofs")
        k = self.layout.n_trace_facet
        return self.trace_offset + s * k + np.arange(k)

    def element_active_edges(self, e: int):
        """(local edge, facet id, sign) for each active facet of element e."""
        out = []
        for k in range(4):
            f = int(self.mesh.elem_facets[e, k])
            if self.facet_slot[f] >= 0:
                out.append((k, f, float(self.mesh.elem_facet_signs[e, k])))
        return out

    def element_dofs(self, e: int) -> np.ndarray:
        """Global dofs in local trial order: field, flux, traces by local edge."""
        parts = [self.elem_field[e], self.elem_flux_dofs(e)]
        for _, f, _ in self.element_active_edges(e):
            parts.append(self.facet_trace_dofs(f))
        return np.concatenate(parts)


def build_dofmap(mesh, layout: SpaceLayout, active_facets: np.ndarray) -> DofMap:
    return DofMap(mesh, layout, active_facets)
