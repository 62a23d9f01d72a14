"""Verification tools: error norms, trace dual norms, a classical Galerkin
oracle, convergence studies, and discrete inf-sup constants."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from dpgfem.dpg import geometry_kernels
from dpgfem.fespace import SpaceLayout, build_dofmap, tabulate_facet_basis
from dpgfem.manufactured import ManufacturedCase, manufactured_case
from dpgfem.mesh import FacetTag, Mesh, build_rect_mesh, classify_boundary
from dpgfem.quadrature import gauss_1d
from dpgfem.solver import (
    GlobalSystem,
    active_facets,
    assemble,
    dirichlet_field_dofs,
    solve_dpg,
    solve_spd,
)

INFSUP_DOF_CAP = 600


def _error_quad(layout: SpaceLayout, n_quad: int | None) -> int:
    return n_quad if n_quad else layout.default_quad_points + 1


def field_l2(mesh: Mesh, dofmap, coeffs: np.ndarray,
             n_quad: int | None = None) -> float:
    """L2 norm of a field-space function given by its coefficients."""
    geom = geometry_kernels(dofmap.layout, mesh.dx, mesh.dy,
                            _error_quad(dofmap.layout, n_quad))
    total = 0.0
    for e in range(mesh.n_elems):
        vals = geom.field_val @ coeffs[dofmap.elem_field[e]]
        total += float(np.dot(geom.wvol, vals * vals))
    return float(np.sqrt(total))


def field_boundary_l2(mesh: Mesh, dofmap, coeffs: np.ndarray, tag: FacetTag,
                      n_quad: int | None = None) -> float:
    """L2 norm of the field's trace over all boundary facets with a tag."""
    geom = geometry_kernels(dofmap.layout, mesh.dx, mesh.dy,
                            _error_quad(dofmap.layout, n_quad))
    total = 0.0
    for f in mesh.facets_with_tag(tag):
        e = int(mesh.facet_elems[f, 0])
        k = int(np.flatnonzero(mesh.elem_facets[e] == f)[0])
        vals = geom.field_edge[k] @ coeffs[dofmap.elem_field[e]]
        total += float(np.dot(geom.edge_w[k], vals * vals))
    return float(np.sqrt(total))


def field_l2_error(mesh: Mesh, dofmap, coeffs: np.ndarray, exact,
                   n_quad: int | None = None) -> tuple[float, float]:
    """(L2 error, L2 norm of exact) for the scalar field."""
    geom = geometry_kernels(dofmap.layout, mesh.dx, mesh.dy,
                            _error_quad(dofmap.layout, n_quad))
    err = norm = 0.0
    for e in range(mesh.n_elems):
        pts = geom.vol_points(mesh.element_origin(e))
        ex = np.array([exact(x, y) for x, y in pts])
        vals = geom.field_val @ coeffs[dofmap.elem_field[e]]
        err += float(np.dot(geom.wvol, (vals - ex) ** 2))
        norm += float(np.dot(geom.wvol, ex * ex))
    return float(np.sqrt(err)), float(np.sqrt(norm))


def flux_l2_error(mesh: Mesh, dofmap, flux_coeffs: np.ndarray, exact_flux,
                  n_quad: int | None = None) -> tuple[float, float]:
    """(L2 error, L2 norm of exact) for the vector flux."""
    layout = dofmap.layout
    geom = geometry_kernels(layout, mesh.dx, mesh.dy, _error_quad(layout, n_quad))
    ns = layout.n_flux_scalar
    err = norm = 0.0
    for e in range(mesh.n_elems):
        pts = geom.vol_points(mesh.element_origin(e))
        ex = np.array([exact_flux(x, y) for x, y in pts])
        base = e * layout.n_flux_local
        vx = geom.flux_val @ flux_coeffs[base:base + ns]
        vy = geom.flux_val @ flux_coeffs[base + ns:base + 2 * ns]
        err += float(np.dot(geom.wvol, (vx - ex[:, 0]) ** 2 + (vy - ex[:, 1]) ** 2))
        norm += float(np.dot(geom.wvol, ex[:, 0] ** 2 + ex[:, 1] ** 2))
    return float(np.sqrt(err)), float(np.sqrt(norm))


def project_trace(mesh: Mesh, layout: SpaceLayout, active: np.ndarray,
                  normal_flux, n_quad: int | None = None) -> np.ndarray:
    """Facetwise L2 projection of a normal-flux function onto the trace space.

    normal_flux is evaluated against each facet's global unit normal, so the
    result is single-valued like the trace unknowns.
    """
    p = layout.p
    nq = _error_quad(layout, n_quad)
    line = gauss_1d(nq)
    basis = tabulate_facet_basis(p - 1, line.points)
    out = np.empty(len(active) * p)
    for slot, f in enumerate(np.sort(np.asarray(active))):
        ends = mesh.facet_endpoints(f)
        L = mesh.facet_length(f)
        w = 0.5 * L * line.weights
        t01 = 0.5 * (line.points + 1.0)
        pts = ends[0][None, :] + t01[:, None] * (ends[1] - ends[0])[None, :]
        nx, ny = mesh.facet_normals[f]
        vals = np.array([normal_flux(x, y, nx, ny) for x, y in pts])
        M = (basis * w[:, None]).T @ basis
        rhs = basis.T @ (w * vals)
        out[slot * p:(slot + 1) * p] = scipy.linalg.solve(M, rhs, assume_a="pos")
    return out


def skeleton_dual_norm(mesh: Mesh, layout: SpaceLayout, active: np.ndarray,
                       trace_coeffs: np.ndarray,
                       n_quad: int | None = None) -> float:
    """Discrete dual norm of a trace function over the active skeleton.

    The supremum of <sigma, u> / ||u||_H1 over the broken enriched test
    space equals (c^T C G^-1 C^T c)^(1/2); it is evaluated element by
    element through the block-diagonal Gram.
    """
    geom = geometry_kernels(layout, mesh.dx, mesh.dy, n_quad)
    p = layout.p
    active = np.sort(np.asarray(active, dtype=np.int64))
    slot = {int(f): s for s, f in enumerate(active)}
    total = 0.0
    for e in range(mesh.n_elems):
        b = None
        for k in range(4):
            f = int(mesh.elem_facets[e, k])
            s = slot.get(f)
            if s is None:
                continue
            sign = float(mesh.elem_facet_signs[e, k])
            contrib = sign * (geom.trace_tmpl[k] @ trace_coeffs[s * p:(s + 1) * p])
            b = contrib if b is None else b + contrib
        if b is not None:
            y = scipy.linalg.cho_solve(geom.gram_factor, b)
            total += float(b @ y)
    return float(np.sqrt(max(total, 0.0)))


@dataclass
class ErrorNorms:
    e_field: float
    e_flux: float
    e_trace: float
    norm_field: float
    norm_flux: float
    norm_trace: float

    @property
    def e_combined(self) -> float:
        return float(np.hypot(self.e_field, self.e_flux))


def error_norms(mesh: Mesh, dofmap, solution, case: ManufacturedCase,
                n_quad: int | None = None) -> ErrorNorms:
    """Field/flux L2 errors and the trace error in the skeleton dual norm.

    The trace is compared against the facetwise L2 projection of the exact
    normal flux on active facets.
    """
    e_field, n_field = field_l2_error(mesh, dofmap, solution.field,
                                      case.exact_field, n_quad)
    e_flux, n_flux = flux_l2_error(mesh, dofmap, solution.flux,
                                   case.exact_flux, n_quad)
    active = dofmap.active_facets
    proj = project_trace(mesh, dofmap.layout, active, case.exact_normal_flux,
                         n_quad)
    nq = _error_quad(dofmap.layout, n_quad)
    e_trace = skeleton_dual_norm(mesh, dofmap.layout, active,
                                 solution.trace - proj, nq)
    n_trace = skeleton_dual_norm(mesh, dofmap.layout, active, proj, nq)
    return ErrorNorms(e_field, e_flux, e_trace, n_field, n_flux, n_trace)


def classical_galerkin_solve(mesh: Mesh, problem, layout: SpaceLayout,
                             tol: float = 1e-10,
                             n_quad: int | None = None) -> np.ndarray:
    """Continuous Galerkin solve of the same BVP on the field space alone.

    Concentration: (c, r) + dt (D grad c, grad r) = (c_prev, r) - dt <J, r>.
    Potential: (kappa grad phi, grad zeta) + <beta phi, zeta>_R =
    -(S, grad zeta) - <I, zeta>_N - <R, zeta>_R with phi = 0 on the
    Dirichlet part. Independent discretization used as an oracle.
    """
    geom = geometry_kernels(layout, mesh.dx, mesh.dy, n_quad)
    dofmap = build_dofmap(mesh, layout, np.empty(0, dtype=np.int64))
    n = dofmap.n_field
    w = geom.wvol[:, None]
    mass = (geom.field_val * w).T @ geom.field_val
    stiff = ((geom.field_gx * w).T @ geom.field_gx
             + (geom.field_gy * w).T @ geom.field_gy)

    rows, cols, vals = [], [], []
    rhs = np.zeros(n)
    for e in range(mesh.n_elems):
        origin = mesh.element_origin(e)
        pts = geom.vol_points(origin)
        if problem.kind == "concentration":
            S_e = mass + problem.dt * problem.D * stiff
            cp = np.array([problem.c_prev(x, y) for x, y in pts])
            load = geom.field_val.T @ (geom.wvol * cp)
        else:
            S_e = problem.kappa * stiff.copy()
            sx = np.array([problem.S[0](x, y) for x, y in pts])
            sy = np.array([problem.S[1](x, y) for x, y in pts])
            load = -(geom.field_gx.T @ (geom.wvol * sx)
                     + geom.field_gy.T @ (geom.wvol * sy))
        for k in range(4):
            f = int(mesh.elem_facets[e, k])
            if mesh.facet_elems[f, 1] >= 0:
                continue
            tag = FacetTag(mesh.facet_tags[f])
            epts = geom.edge_points(k, origin)
            ew = geom.edge_w[k]
            nx, ny = mesh.facet_normals[f]
            if problem.kind == "concentration":
                jv = np.array([problem.J(x, y, nx, ny) for x, y in epts])
                load -= problem.dt * geom.field_edge[k].T @ (ew * jv)
            elif tag == FacetTag.ROBIN:
                bv = np.array([problem.beta(x, y) for x, y in epts])
                S_e = S_e + (geom.field_edge[k] * (ew * bv)[:, None]).T \
                    @ geom.field_edge[k]
                rv = np.array([problem.R(x, y, nx, ny) for x, y in epts])
                load -= geom.field_edge[k].T @ (ew * rv)
            elif tag == FacetTag.NEUMANN:
                iv = np.array([problem.I(x, y, nx, ny) for x, y in epts])
                load -= geom.field_edge[k].T @ (ew * iv)
        dofs = dofmap.elem_field[e]
        m = dofs.shape[0]
        rows.append(np.repeat(dofs, m))
        cols.append(np.tile(dofs, m))
        vals.append(S_e.ravel())
        np.add.at(rhs, dofs, load)

    matrix = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n)).tocsr()
    constrained = np.empty(0, dtype=np.int64)
    if problem.kind == "potential":
        constrained = dirichlet_field_dofs(mesh, dofmap)
        if constrained.size:
            keep = np.ones(n)
            keep[constrained] = 0.0
            P = sp.diags(keep)
            matrix = (P @ matrix @ P + sp.diags(1.0 - keep)).tocsr()
            rhs[constrained] = 0.0
    system = GlobalSystem(matrix, rhs, dofmap, constrained, problem.kind)
    coeffs, _info = solve_spd(system, tol)
    return coeffs


@dataclass
class EocRow:
    level: int
    n: int
    h: float
    dofs: int
    e_field: float
    e_flux: float
    e_trace: float
    eta: float
    iterations: int
    runtime: float
    oracle_e_field: float | None = None
    # true when errors sit at the solver-tolerance floor (exact
    # reproduction); rates computed from such rows are meaningless
    floor: bool = False

    @property
    def e_combined(self) -> float:
        return float(np.hypot(self.e_field, self.e_flux))


@dataclass
class EocReport:
    """Mesh-refinement study; rates are log2 ratios of consecutive levels.

    Runtimes are kept in memory for console reports but never written to
    CSV/JSON so identical configs yield bit-identical output files.
    """

    case: str
    p: int
    delta_p: int
    rows: list

    def _rates(self, getter) -> list:
        out = [None]
        for a, b in zip(self.rows, self.rows[1:]):
            va, vb = getter(a), getter(b)
            out.append(float(np.log2(va / vb)) if va > 0 and vb > 0 else None)
        return out[:len(self.rows)]

    def eoc_field(self):
        return self._rates(lambda r: r.e_field)

    def eoc_flux(self):
        return self._rates(lambda r: r.e_flux)

    def eoc_trace(self):
        return self._rates(lambda r: r.e_trace)

    def eoc_combined(self):
        return self._rates(lambda r: r.e_combined)

    def eoc_eta(self):
        return self._rates(lambda r: r.eta)

    def to_csv_text(self) -> str:
        lines = ["level,n,h,dofs,e_field,e_flux,e_trace,eta,"
                 "eoc_field,eoc_flux,eoc_combined,eoc_eta"]
        ef, ex, ec, ee = (self.eoc_field(), self.eoc_flux(),
                          self.eoc_combined(), self.eoc_eta())
        for i, r in enumerate(self.rows):
            rates = ",".join("" if v is None else repr(v)
                             for v in (ef[i], ex[i], ec[i], ee[i]))
            lines.append(f"{r.level},{r.n},{r.h!r},{r.dofs},{r.e_field!r},"
                         f"{r.e_flux!r},{r.e_trace!r},{r.eta!r},{rates}")
        return "\n".join(lines) + "\n"

    def to_json_dict(self) -> dict:
        return {
            "case": self.case,
            "p": self.p,
            "delta_p": self.delta_p,
            "levels": [
                {"level": r.level, "n": r.n, "h": r.h, "dofs": r.dofs,
                 "e_field": r.e_field, "e_flux": r.e_flux,
                 "e_trace": r.e_trace, "eta": r.eta,
                 "iterations": r.iterations, "floor": r.floor}
                for r in self.rows
            ],
            "eoc_field": self.eoc_field(),
            "eoc_flux": self.eoc_flux(),
            "eoc_combined": self.eoc_combined(),
            "eoc_eta": self.eoc_eta(),
        }


def case_mesh(case: ManufacturedCase, n: int) -> Mesh:
    mesh = build_rect_mesh(case.domain, n, n)
    return classify_boundary(mesh, case.partition, case.kind)


def eoc_study(case, p: int, levels: int, delta_p: int = 1, base_n: int = 8,
              tol: float = 1e-10, n_quad: int | None = None,
              with_oracle: bool = False, verbose: bool = False) -> EocReport:
    """Solve a manufactured case on base_n, 2*base_n, ... meshes."""
    if isinstance(case, str):
        case = manufactured_case(case)
    layout = SpaceLayout(p, delta_p)
    rows = []
    for lvl in range(levels):
        n = base_n * 2 ** lvl
        mesh = case_mesh(case, n)
        t0 = time.perf_counter()
        solution, info, system = solve_dpg(mesh, case.problem, layout,
                                           tol=tol, n_quad=n_quad)
        runtime = time.perf_counter() - t0
        norms = error_norms(mesh, system.dofmap, solution, case, n_quad)
        oracle = None
        if with_oracle:
            gal = classical_galerkin_solve(mesh, case.problem, layout, tol, n_quad)
            oracle = field_l2_error(mesh, system.dofmap, gal,
                                    case.exact_field, n_quad)[0]
        scale = norms.norm_field + norms.norm_flux + 1.0
        rows.append(EocRow(lvl, n, mesh.h_max, system.dofmap.n_total,
                           norms.e_field, norms.e_flux, norms.e_trace,
                           solution.eta, info.iterations, runtime, oracle,
                           floor=norms.e_combined <= 1e-11 * scale))
        if verbose:
            print(f"{case.name} p={p} n={n:4d} dofs={rows[-1].dofs:7d} "
                  f"e_field={norms.e_field:.3e} e_flux={norms.e_flux:.3e} "
                  f"eta={solution.eta:.3e} [{runtime:.2f}s]")
    return EocReport(case.name, p, delta_p, rows)


def trial_gram_dense(mesh: Mesh, dofmap, n_quad: int | None = None) -> np.ndarray:
    """Dense trial-space Gram: H1 for the field, L2 for the flux, and the
    skeleton dual norm for the traces."""
    layout = dofmap.layout
    geom = geometry_kernels(layout, mesh.dx, mesh.dy, n_quad)
    n = dofmap.n_total
    M = np.zeros((n, n))
    w = geom.wvol[:, None]
    field_gram = ((geom.field_val * w).T @ geom.field_val
                  + (geom.field_gx * w).T @ geom.field_gx
                  + (geom.field_gy * w).T @ geom.field_gy)
    flux_gram = (geom.flux_val * w).T @ geom.flux_val
    p = layout.p
    ns = layout.n_flux_scalar
    for e in range(mesh.n_elems):
        fd = dofmap.elem_field[e]
        M[np.ix_(fd, fd)] += field_gram
        xd = dofmap.elem_flux_dofs(e)
        M[np.ix_(xd[:ns], xd[:ns])] += flux_gram
        M[np.ix_(xd[ns:], xd[ns:])] += flux_gram
        edges = dofmap.element_active_edges(e)
        if edges:
            C = np.column_stack([sign * geom.trace_tmpl[k]
                                 for k, _f, sign in edges])
            Y = scipy.linalg.cho_solve(geom.gram_factor, C)
            td = np.concatenate([dofmap.facet_trace_dofs(f) for _k, f, _s in edges])
            M[np.ix_(td, td)] += C.T @ Y
    return M


def infsup_constant(mesh: Mesh, problem, layout: SpaceLayout,
                    n_quad: int | None = None) -> float:
    """Discrete inf-sup constant: sqrt of the smallest eigenvalue of the
    condensed DPG matrix against the trial-space Gram."""
    dofmap = build_dofmap(mesh, layout, active_facets(mesh, problem))
    if dofmap.n_total > INFSUP_DOF_CAP:
        raise ValueError(f"size cap exceeded: {dofmap.n_total} trial dofs "
                         f"(limit {INFSUP_DOF_CAP}) for the dense eigensolve")
    system = assemble(mesh, dofmap, problem, n_quad, constrain=False)
    A = system.matrix.toarray()
    A = 0.5 * (A + A.T)
    M = trial_gram_dense(mesh, dofmap, n_quad)
    if problem.kind == "potential":
        fixed = dirichlet_field_dofs(mesh, dofmap)
        if fixed.size:
            free = np.setdiff1d(np.arange(dofmap.n_total), fixed)
            A = A[np.ix_(free, free)]
            M = M[np.ix_(free, free)]
    vals = scipy.linalg.eigh(A, M, eigvals_only=True)
    return float(np.sqrt(max(vals[0], 0.0)))
