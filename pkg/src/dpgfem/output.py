"""Writers for solution exports: legacy-VTK structured grids, indicator and
study CSVs, and JSON run reports. Floats are emitted with repr so identical
runs produce bit-identical files."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from dpgfem.fespace import tabulate_l2_basis
from dpgfem.mesh import Mesh

FIELD_NAMES = {"concentration": ("concentration", "species_flux"),
               "potential": ("potential", "current_density")}

_CORNERS = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])


def _fmt(x: float) -> str:
    return repr(float(x))


def vertex_field_values(mesh: Mesh, dofmap, field: np.ndarray) -> np.ndarray:
    """Field values at mesh vertices, x-fastest ordering.

    Vertices coincide with Gauss-Lobatto lattice points, so sampling is a
    gather from the coefficient vector.
    """
    p = dofmap.layout.p
    row = p * (mesh.nx * p + 1)
    out = np.empty((mesh.ny + 1) * (mesh.nx + 1))
    for j in range(mesh.ny + 1):
        for i in range(mesh.nx + 1):
            out[j * (mesh.nx + 1) + i] = field[j * row + i * p]
    return out


def vertex_flux_values(mesh: Mesh, dofmap, flux: np.ndarray) -> np.ndarray:
    """Element fluxes evaluated at corners and averaged over incident
    elements; (n_vertices, 2), x-fastest ordering."""
    layout = dofmap.layout
    ns = layout.n_flux_scalar
    basis = tabulate_l2_basis(layout.p - 1, _CORNERS)
    acc = np.zeros((mesh.vertices.shape[0], 2))
    count = np.zeros(mesh.vertices.shape[0])
    for e in range(mesh.n_elems):
        base = e * layout.n_flux_local
        vx = basis @ flux[base:base + ns]
        vy = basis @ flux[base + ns:base + 2 * ns]
        verts = mesh.elem_verts[e]
        acc[verts, 0] += vx
        acc[verts, 1] += vy
        count[verts] += 1.0
    return acc / count[:, None]


def write_vtk(path, mesh: Mesh, dofmap, solution, kind: str) -> None:
    """Legacy-VTK ASCII structured grid with vertex-sampled field and flux."""
    scalar_name, vector_name = FIELD_NAMES[kind]
    field = vertex_field_values(mesh, dofmap, solution.field)
    flux = vertex_flux_values(mesh, dofmap, solution.flux)
    npts = (mesh.nx + 1) * (mesh.ny + 1)
    lines = ["# vtk DataFile Version 3.0",
             "dpgfem solution export",
             "ASCII",
             "DATASET STRUCTURED_GRID",
             f"DIMENSIONS {mesh.nx + 1} {mesh.ny + 1} 1",
             f"POINTS {npts} double"]
    for j in range(mesh.ny + 1):
        for i in range(mesh.nx + 1):
            x, y = mesh.vertices[j * (mesh.nx + 1) + i]
            lines.append(f"{_fmt(x)} {_fmt(y)} 0.0")
    lines.append(f"POINT_DATA {npts}")
    lines.append(f"SCALARS {scalar_name} double")
    lines.append("LOOKUP_TABLE default")
    lines.extend(_fmt(v) for v in field)
    lines.append(f"VECTORS {vector_name} double")
    lines.extend(f"{_fmt(fx)} {_fmt(fy)} 0.0" for fx, fy in flux)
    Path(path).write_text("\n".join(lines) + "\n", newline="\n")


def write_indicators_csv(path, solution) -> None:
    lines = ["element,eta_sq_riesz,eta_sq_fosls"]
    for e, (riesz, fosls) in enumerate(solution.indicators):
        lines.append(f"{e},{_fmt(riesz)},{_fmt(fosls)}")
    Path(path).write_text("\n".join(lines) + "\n", newline="\n")


def write_eoc_csv(path, report) -> None:
    Path(path).write_text(report.to_csv_text(), newline="\n")


def write_infsup_csv(path, rows) -> None:
    """rows: sequence of (level, n, dofs, alpha)."""
    lines = ["level,n,dofs,alpha,ratio"]
    prev = None
    for level, n, dofs, alpha in rows:
        ratio = "" if prev is None else _fmt(alpha / prev)
        lines.append(f"{level},{n},{dofs},{_fmt(alpha)},{ratio}")
        prev = alpha
    Path(path).write_text("\n".join(lines) + "\n", newline="\n")


def write_report_json(path, report: dict) -> None:
    Path(path).write_text(json.dumps(report, indent=2) + "\n", newline="\n")
