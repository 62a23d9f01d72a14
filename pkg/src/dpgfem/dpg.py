"""Per-element DPG kernels.

The broken test space splits into a scalar broken-H1 component and a
vector L2 component. The L2 Riesz map is the identity, so its optimal
test functions are formed analytically from the first-order (constitutive)
equation and contribute the least-squares block A_fosls directly. Only
the broken-H1 component needs discrete Riesz inversions, done on an
enriched space of degree p + delta_p with the Gram of the standard
H1 inner product per element.

Local trial dof order: field (p+1)^2, flux x-modes p^2, flux y-modes p^2,
then p trace dofs per incident active facet in local edge order
(left, right, bottom, top). Trace columns already include the facet sign
(+1 when the facet's global normal is outward for the element).

All kernels are pure functions of immutable inputs; congruent elements
with identical data yield bit-identical matrices because every template
is tabulated once per geometry and reused.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg

from dpgfem.fespace import (
    SpaceLayout,
    tabulate_facet_basis,
    tabulate_h1_basis,
    tabulate_l2_basis,
)
from dpgfem.mesh import FacetTag, Mesh
from dpgfem.quadrature import gauss_1d, tensor_quad

# local edge order: left, right, bottom, top
_EDGE_REF = (
    lambda t: np.column_stack([np.full_like(t, -1.0), t]),
    lambda t: np.column_stack([np.full_like(t, 1.0), t]),
    lambda t: np.column_stack([t, np.full_like(t, -1.0)]),
    lambda t: np.column_stack([t, np.full_like(t, 1.0)]),
)


@dataclass
class LocalSystem:
    """Element matrices of the condensed DPG scheme.

    gram: enriched-test Gram (n_enr x n_enr), SPD.
    coupling: B (n_enr x n_trial), trial-to-enriched-test.
    load: l (n_enr,).
    lsq_matrix: A_fosls (n_trial x n_trial), PSD, zero on trace dofs.
    lsq_load: f_fosls (n_trial,).
    lsq_const: the u-independent part of the first-order residual square.
    """

    gram: np.ndarray
    coupling: np.ndarray
    load: np.ndarray
    lsq_matrix: np.ndarray
    lsq_load: np.ndarray
    lsq_const: float = 0.0
    gram_factor: tuple | None = None
    # pointwise first-order residual data; lets the indicator square the
    # residual at quadrature points instead of expanding the quadratic
    # form, which would cancel catastrophically near exact solutions
    res_x: np.ndarray | None = None
    res_y: np.ndarray | None = None
    res_shift: np.ndarray | None = None
    res_weights: np.ndarray | None = None

    def factor(self):
        if self.gram_factor is None:
            self.gram_factor = scipy.linalg.cho_factor(self.gram, lower=True)
        return self.gram_factor


@dataclass(frozen=True)
class IndicatorResult:
    eta_sq_riesz: float
    eta_sq_fosls: float

    @property
    def total_sq(self) -> float:
        return self.eta_sq_riesz + self.eta_sq_fosls


class GeometryKernels:
    """Problem-independent tabulations for one element geometry dx-by-dy."""

    def __init__(self, layout: SpaceLayout, dx: float, dy: float,
                 n_quad: int | None = None):
        self.layout = layout
        self.dx, self.dy = float(dx), float(dy)
        self.n_quad = int(n_quad) if n_quad else layout.default_quad_points
        n = self.n_quad

        vol = tensor_quad(n)
        self.jac = 0.25 * self.dx * self.dy
        self.wvol = vol.weights * self.jac
        self.vol_ref = vol.points
        self.scale_x = 2.0 / self.dx
        self.scale_y = 2.0 / self.dy

        q = layout.enriched_degree
        ev, eg = tabulate_h1_basis(q, vol.points)
        self.enr_val = ev
        self.enr_gx = self.scale_x * eg[:, :, 0]
        self.enr_gy = self.scale_y * eg[:, :, 1]
        fv, fg = tabulate_h1_basis(layout.p, vol.points)
        self.field_val = fv
        self.field_gx = self.scale_x * fg[:, :, 0]
        self.field_gy = self.scale_y * fg[:, :, 1]
        self.flux_val = tabulate_l2_basis(layout.p - 1, vol.points)

        w = self.wvol[:, None]
        self.gram = ((ev * w).T @ ev + (self.enr_gx * w).T @ self.enr_gx
                     + (self.enr_gy * w).T @ self.enr_gy)
        self.gram_factor = scipy.linalg.cho_factor(self.gram, lower=True)

        line = gauss_1d(n)
        self.edge_t = line.points
        self.edge_t01 = 0.5 * (line.points + 1.0)
        lengths = (self.dy, self.dy, self.dx, self.dx)
        self.edge_len = lengths
        self.edge_w = [0.5 * L * line.weights for L in lengths]
        self.enr_edge = []
        self.field_edge = []
        for k in range(4):
            coords = _EDGE_REF[k](line.points)
            self.enr_edge.append(tabulate_h1_basis(q, coords)[0])
            self.field_edge.append(tabulate_h1_basis(layout.p, coords)[0])
        self.trace_val = tabulate_facet_basis(layout.p - 1, line.points)
        # sign-free trace pairing int_f mu_b r_e per local edge
        self.trace_tmpl = [
            (self.enr_edge[k] * self.edge_w[k][:, None]).T @ self.trace_val
            for k in range(4)
        ]

    def vol_points(self, origin) -> np.ndarray:
        x0, y0 = origin
        pts = np.empty_like(self.vol_ref)
        pts[:, 0] = x0 + 0.5 * (self.vol_ref[:, 0] + 1.0) * self.dx
        pts[:, 1] = y0 + 0.5 * (self.vol_ref[:, 1] + 1.0) * self.dy
        return pts

    def edge_points(self, k: int, origin) -> np.ndarray:
        x0, y0 = origin
        t = self.edge_t01
        if k == 0:
            return np.column_stack([np.full_like(t, x0), y0 + t * self.dy])
        if k == 1:
            return np.column_stack([np.full_like(t, x0 + self.dx), y0 + t * self.dy])
        if k == 2:
            return np.column_stack([x0 + t * self.dx, np.full_like(t, y0)])
        return np.column_stack([x0 + t * self.dx, np.full_like(t, y0 + self.dy)])


class ProblemKernels:
    """Adds the coefficient-dependent templates for one problem."""

    def __init__(self, geom: GeometryKernels, problem):
        self.geom = geom
        self.problem = problem
        layout = geom.layout
        self.n_field = layout.n_field_local
        self.n_fs = layout.n_flux_scalar
        self.n_ff = layout.n_field_local + layout.n_flux_local
        w = geom.wvol[:, None]

        if problem.kind == "concentration":
            ainv = 1.0 / problem.D
            self.trace_factor = problem.dt
            flux_scale = -problem.dt
        else:
            ainv = 1.0 / problem.kappa
            self.trace_factor = 1.0
            flux_scale = -1.0
        self.coef_inv = ainv

        # first-order residual components per field+flux trial column
        nq = geom.wvol.shape[0]
        Px = np.zeros((nq, self.n_ff))
        Py = np.zeros((nq, self.n_ff))
        Px[:, :self.n_field] = geom.field_gx
        Py[:, :self.n_field] = geom.field_gy
        Px[:, self.n_field:self.n_field + self.n_fs] = ainv * geom.flux_val
        Py[:, self.n_field + self.n_fs:] = ainv * geom.flux_val
        self.res_x, self.res_y = Px, Py
        self.lsq_tmpl = (Px * w).T @ Px + (Py * w).T @ Py

        bvol = np.zeros((layout.n_enriched, self.n_ff))
        if problem.kind == "concentration":
            bvol[:, :self.n_field] = (geom.enr_val * w).T @ geom.field_val
        bvol[:, self.n_field:self.n_field + self.n_fs] = \
            flux_scale * (geom.enr_gx * w).T @ geom.flux_val
        bvol[:, self.n_field + self.n_fs:] = \
            flux_scale * (geom.enr_gy * w).T @ geom.flux_val
        self.coupling_tmpl = bvol

    def _boundary_edges(self, mesh: Mesh, e: int):
        out = []
        for k in range(4):
            f = int(mesh.elem_facets[e, k])
            if mesh.facet_elems[f, 1] < 0:
                out.append((k, f, FacetTag(mesh.facet_tags[f])))
        return out

    def local_system(self, mesh: Mesh, e: int, active_edges) -> LocalSystem:
        """Build B, l, A_fosls, f_fosls for element e.

        active_edges: list of (local edge, facet id, sign) carrying trace dofs.
        """
        geom = self.geom
        layout = geom.layout
        p = layout.p
        n_trial = self.n_ff + p * len(active_edges)
        B = np.zeros((layout.n_enriched, n_trial))
        B[:, :self.n_ff] = self.coupling_tmpl
        col = self.n_ff
        for k, _f, sign in active_edges:
            B[:, col:col + p] = (self.trace_factor * sign) * geom.trace_tmpl[k]
            col += p

        A = np.zeros((n_trial, n_trial))
        A[:self.n_ff, :self.n_ff] = self.lsq_tmpl
        f = np.zeros(n_trial)
        c0 = 0.0
        load = np.zeros(layout.n_enriched)

        origin = mesh.element_origin(e)
        prob = self.problem
        shift = None
        if prob.kind == "concentration":
            pts = geom.vol_points(origin)
            cp = np.array([prob.c_prev(x, y) for x, y in pts])
            load += (geom.enr_val * (geom.wvol * cp)[:, None]).sum(axis=0)
            for k, fct, _tag in self._boundary_edges(mesh, e):
                epts = geom.edge_points(k, origin)
                nrm = mesh.facet_normals[fct]
                jv = np.array([prob.J(x, y, nrm[0], nrm[1]) for x, y in epts])
                load -= prob.dt * (geom.enr_edge[k]
                                   * (geom.edge_w[k] * jv)[:, None]).sum(axis=0)
        else:
            pts = geom.vol_points(origin)
            sx = np.array([prob.S[0](x, y) for x, y in pts])
            sy = np.array([prob.S[1](x, y) for x, y in pts])
            if np.any(sx) or np.any(sy):
                ainv = self.coef_inv
                f[:self.n_ff] = -ainv * ((self.res_x * (geom.wvol * sx)[:, None]).sum(axis=0)
                                         + (self.res_y * (geom.wvol * sy)[:, None]).sum(axis=0))
                c0 = ainv * ainv * float(np.dot(geom.wvol, sx * sx + sy * sy))
                shift = np.column_stack([ainv * sx, ainv * sy])
            for k, fct, tag in self._boundary_edges(mesh, e):
                epts = geom.edge_points(k, origin)
                nrm = mesh.facet_normals[fct]
                if tag == FacetTag.ROBIN:
                    bv = np.array([prob.beta(x, y) for x, y in epts])
                    B[:, :self.n_field] += (geom.enr_edge[k]
                                            * (geom.edge_w[k] * bv)[:, None]).T \
                        @ geom.field_edge[k]
                    rv = np.array([prob.R(x, y, nrm[0], nrm[1]) for x, y in epts])
                    load -= (geom.enr_edge[k]
                             * (geom.edge_w[k] * rv)[:, None]).sum(axis=0)
                elif tag == FacetTag.NEUMANN:
                    iv = np.array([prob.I(x, y, nrm[0], nrm[1]) for x, y in epts])
                    load -= (geom.enr_edge[k]
                             * (geom.edge_w[k] * iv)[:, None]).sum(axis=0)

        return LocalSystem(geom.gram, B, load, A, f, c0, geom.gram_factor,
                           res_x=self.res_x, res_y=self.res_y,
                           res_shift=shift, res_weights=geom.wvol)


@lru_cache(maxsize=32)
def geometry_kernels(layout: SpaceLayout, dx: float, dy: float,
                     n_quad: int | None = None) -> GeometryKernels:
    return GeometryKernels(layout, dx, dy, n_quad)


def _active_edges_of(mesh: Mesh, e: int, active_facets) -> list:
    active = set(int(f) for f in np.atleast_1d(active_facets))
    out = []
    for k in range(4):
        f = int(mesh.elem_facets[e, k])
        if f in active:
            out.append((k, f, float(mesh.elem_facet_signs[e, k])))
    return out


def local_gram(mesh: Mesh, e: int, layout: SpaceLayout,
               n_quad: int | None = None) -> np.ndarray:
    """Enriched-test Gram int_K (r_a r_b + grad r_a . grad r_b)."""
    del e  # congruent elements share one Gram
    return geometry_kernels(layout, mesh.dx, mesh.dy, n_quad).gram


def local_trial_test(mesh: Mesh, e: int, problem, layout: SpaceLayout,
                     active_facets, n_quad: int | None = None):
    """Coupling matrix B and enriched load l of element e."""
    geom = geometry_kernels(layout, mesh.dx, mesh.dy, n_quad)
    ls = ProblemKernels(geom, problem).local_system(
        mesh, e, _active_edges_of(mesh, e, active_facets))
    return ls.coupling, ls.load


def local_fosls(mesh: Mesh, e: int, problem, layout: SpaceLayout,
                n_quad: int | None = None):
    """Least-squares block of the first-order equation: (A_fosls, f_fosls, c0)."""
    geom = geometry_kernels(layout, mesh.dx, mesh.dy, n_quad)
    ls = ProblemKernels(geom, problem).local_system(mesh, e, [])
    return ls.lsq_matrix, ls.lsq_load, ls.lsq_const


def build_local_system(mesh: Mesh, e: int, problem, layout: SpaceLayout,
                       active_facets, n_quad: int | None = None) -> LocalSystem:
    geom = geometry_kernels(layout, mesh.dx, mesh.dy, n_quad)
    return ProblemKernels(geom, problem).local_system(
        mesh, e, _active_edges_of(mesh, e, active_facets))


def condense_local(ls: LocalSystem):
    """Element stiffness S_K = A + B^T G^-1 B and load rhs_K = f + B^T G^-1 l."""
    try:
        factor = ls.factor()
    except scipy.linalg.LinAlgError as exc:
        raise ValueError(f"enriched Gram is not SPD: {exc}") from None
    X = scipy.linalg.cho_solve(factor, ls.coupling)
    y = scipy.linalg.cho_solve(factor, ls.load)
    S = ls.lsq_matrix + ls.coupling.T @ X
    S = 0.5 * (S + S.T)
    rhs = ls.lsq_load + ls.coupling.T @ y
    return S, rhs


def error_indicator(ls: LocalSystem, u_local: np.ndarray) -> IndicatorResult:
    """Squared residual parts of one element at the given trial coefficients."""
    r = ls.load - ls.coupling @ u_local
    y = scipy.linalg.cho_solve(ls.factor(), r)
    eta_riesz = float(r @ y)
    if ls.res_x is not None:
        uf = u_local[:ls.res_x.shape[1]]
        rx = ls.res_x @ uf
        ry = ls.res_y @ uf
        if ls.res_shift is not None:
            rx = rx + ls.res_shift[:, 0]
            ry = ry + ls.res_shift[:, 1]
        eta_fosls = float(np.dot(ls.res_weights, rx * rx + ry * ry))
    else:
        eta_fosls = float(u_local @ (ls.lsq_matrix @ u_local)
                          - 2.0 * (ls.lsq_load @ u_local) + ls.lsq_const)
    return IndicatorResult(max(eta_riesz, 0.0), max(eta_fosls, 0.0))
