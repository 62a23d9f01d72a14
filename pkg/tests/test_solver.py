import numpy as np
import pytest
import scipy.sparse as sp

import dpgfem.solver as solver_mod
from dpgfem.fespace import SpaceLayout, build_dofmap
from dpgfem.manufactured import manufactured_case
from dpgfem.mesh import (
    BoundaryPartition,
    Rectangle,
    build_rect_mesh,
    classify_boundary,
)
from dpgfem.problems import ConcentrationProblem, PotentialProblem
from dpgfem.solver import (
    GlobalSystem,
    SolverError,
    active_facets,
    assemble,
    dirichlet_field_dofs,
    extract_solution,
    solve_dpg,
    solve_spd,
)
from dpgfem.verify import case_mesh, error_norms

UNIT = Rectangle(0.0, 1.0, 0.0, 1.0)

POT_PARTITION = BoundaryPartition.from_names(
    {"left": "dirichlet", "right": "neumann",
     "bottom": "robin", "top": "robin"})

NO_DIRICHLET_PARTITION = BoundaryPartition.from_names(
    {"left": "neumann", "right": "neumann",
     "bottom": "robin", "top": "robin"})


def _pot_problem(partition=POT_PARTITION, **overrides):
    base = dict(kappa=1.0, beta=1.0, S=(0.0, 0.0), I=0.0, R=0.0,
                partition=partition)
    base.update(overrides)
    return PotentialProblem(**base)


def _hand_system(matrix, rhs):
    return GlobalSystem(sp.csr_matrix(np.asarray(matrix, dtype=float)),
                        np.asarray(rhs, dtype=float),
                        None, np.empty(0, dtype=np.int64), "test")


class TestActiveFacets:
    def test_concentration_uses_interior_only(self):
        mesh = build_rect_mesh(UNIT, 2, 2)
        problem = ConcentrationProblem(D=0.5, dt=0.1, c_prev=0.0, J=0.0)
        assert active_facets(mesh, problem).size == 4

    def test_potential_adds_dirichlet_facets(self):
        mesh = classify_boundary(build_rect_mesh(UNIT, 2, 2),
                                 POT_PARTITION, "potential")
        assert active_facets(mesh, _pot_problem()).size == 6

    def test_single_element_without_dirichlet_has_none(self):
        mesh = classify_boundary(build_rect_mesh(UNIT, 1, 1),
                                 NO_DIRICHLET_PARTITION, "potential")
        problem = _pot_problem(partition=NO_DIRICHLET_PARTITION)
        assert active_facets(mesh, problem).size == 0


class TestDirichletFieldDofs:
    def test_left_side_lattice_column(self):
        mesh = classify_boundary(build_rect_mesh(UNIT, 2, 2),
                                 POT_PARTITION, "potential")
        for p in (1, 2):
            layout = SpaceLayout(p=p)
            dofmap = build_dofmap(mesh, layout,
                                  active_facets(mesh, _pot_problem()))
            dofs = dirichlet_field_dofs(mesh, dofmap)
            nxp = 2 * p + 1
            assert dofs.size == nxp  # full x=0 lattice column
            assert np.array_equal(dofs, np.arange(nxp) * nxp)

    def test_empty_without_dirichlet_facets(self):
        mesh = build_rect_mesh(UNIT, 2, 2)
        problem = ConcentrationProblem(D=0.5, dt=0.1, c_prev=0.0, J=0.0)
        dofmap = build_dofmap(mesh, SpaceLayout(p=1),
                              active_facets(mesh, problem))
        assert dirichlet_field_dofs(mesh, dofmap).size == 0


class TestSolveSpd:
    def test_identity_system(self):
        x, info = solve_spd(_hand_system(np.eye(3), [1.0, 0.0, 0.0]))
        assert np.allclose(x, [1.0, 0.0, 0.0], atol=1e-14)
        assert info.method == "dense"
        assert info.relative_residual <= 1e-12

    def test_two_by_two_reference_solve(self):
        x, _ = solve_spd(_hand_system([[2.0, 1.0], [1.0, 2.0]], [1.0, 1.0]))
        assert np.allclose(x, [1.0 / 3.0, 1.0 / 3.0], atol=1e-14)

    def test_zero_rhs_short_circuits(self):
        x, info = solve_spd(_hand_system(np.eye(4), np.zeros(4)))
        assert np.all(x == 0.0)
        assert info.method == "trivial"
        assert info.iterations == 0

    def test_indefinite_matrix_raises(self):
        with pytest.raises(SolverError, match="not SPD / no convergence"):
            solve_spd(_hand_system([[1.0, 2.0], [2.0, 1.0]], [1.0, 1.0]))

    def test_nonpositive_diagonal_raises(self):
        with pytest.raises(SolverError, match="not SPD / no convergence"):
            solve_spd(_hand_system([[-1.0, 0.0], [0.0, 1.0]], [1.0, 1.0]))

    def test_pcg_path_matches_dense(self, monkeypatch):
        mesh = build_rect_mesh(UNIT, 2, 2)
        problem = ConcentrationProblem(D=0.5, dt=0.1, c_prev="x*y", J=0.0)
        dofmap = build_dofmap(mesh, SpaceLayout(p=1),
                              active_facets(mesh, problem))
        system = assemble(mesh, dofmap, problem)
        dense, info_d = solve_spd(system, tol=1e-12)
        assert info_d.method == "dense"
        monkeypatch.setattr(solver_mod, "DENSE_LIMIT", 1)
        iterative, info_i = solve_spd(system, tol=1e-12)
        assert info_i.method == "pcg"
        assert info_i.iterations > 0
        assert info_i.relative_residual <= 1e-12
        assert np.allclose(iterative, dense, atol=1e-9)


class TestAssemble:
    def test_matrix_symmetric(self):
        mesh = classify_boundary(build_rect_mesh(UNIT, 3, 3),
                                 POT_PARTITION, "potential")
        problem = _pot_problem(S=("x", "y"), I=1.0, R="x")
        dofmap = build_dofmap(mesh, SpaceLayout(p=2),
                              active_facets(mesh, problem))
        system = assemble(mesh, dofmap, problem)
        asym = (system.matrix - system.matrix.T).toarray()
        scale = np.abs(system.matrix.toarray()).max()
        assert np.abs(asym).max() <= 1e-12 * scale

    def test_dirichlet_rows_replaced_by_identity(self):
        mesh = classify_boundary(build_rect_mesh(UNIT, 2, 2),
                                 POT_PARTITION, "potential")
        problem = _pot_problem(S=("x", "0"))
        dofmap = build_dofmap(mesh, SpaceLayout(p=1),
                              active_facets(mesh, problem))
        system = assemble(mesh, dofmap, problem)
        A = system.matrix.toarray()
        for dof in system.constrained:
            row = A[dof].copy()
            row[dof] -= 1.0
            assert np.all(row == 0.0)
            assert system.rhs[dof] == 0.0

    def test_unconstrained_assembly_keeps_couplings(self):
        mesh = classify_boundary(build_rect_mesh(UNIT, 2, 2),
                                 POT_PARTITION, "potential")
        problem = _pot_problem(S=("x", "0"))
        dofmap = build_dofmap(mesh, SpaceLayout(p=1),
                              active_facets(mesh, problem))
        system = assemble(mesh, dofmap, problem, constrain=False)
        A = system.matrix.toarray()
        dof = system.constrained[0]
        off_diag = np.abs(np.delete(A[dof], dof)).max()
        assert off_diag > 0.0


class TestSolveDpg:
    def test_zero_loads_give_zero_solution(self):
        mesh = build_rect_mesh(UNIT, 2, 2)
        problem = ConcentrationProblem(D=0.5, dt=0.1, c_prev=0.0, J=0.0)
        solution, info, _ = solve_dpg(mesh, problem, SpaceLayout(p=1))
        assert np.all(solution.field == 0.0)
        assert np.all(solution.flux == 0.0)
        assert np.all(solution.trace == 0.0)
        assert solution.eta == 0.0
        assert info.method == "trivial"

    @pytest.mark.parametrize("name", ["conc-poly2", "pot-poly2"])
    def test_exact_reproduction_of_quadratic_cases(self, name):
        case = manufactured_case(name)
        mesh = case_mesh(case, 2)
        solution, _, _ = solve_dpg(mesh, case.problem, SpaceLayout(p=2))
        dofmap = build_dofmap(mesh, SpaceLayout(p=2),
                              active_facets(mesh, case.problem))
        norms = error_norms(mesh, dofmap, solution, case)
        assert norms.e_field <= 1e-9 * norms.norm_field
        assert norms.e_flux <= 1e-9 * norms.norm_flux
        assert norms.e_trace <= 1e-9 * max(norms.norm_trace, 1.0)

    def test_dirichlet_dofs_exactly_zero(self):
        case = manufactured_case("pot-trig")
        mesh = case_mesh(case, 4)
        solution, _, system = solve_dpg(mesh, case.problem, SpaceLayout(p=2))
        assert system.constrained.size > 0
        assert np.all(solution.field[system.constrained] == 0.0)

    def test_load_linearity(self):
        mesh = build_rect_mesh(UNIT, 4, 4)
        layout = SpaceLayout(p=2)
        one = ConcentrationProblem(D=0.5, dt=0.1, c_prev="x*y + 1", J="x")
        two = ConcentrationProblem(D=0.5, dt=0.1, c_prev="2*(x*y + 1)",
                                   J="2*x")
        sol1, _, _ = solve_dpg(mesh, one, layout, tol=1e-12)
        sol2, _, _ = solve_dpg(mesh, two, layout, tol=1e-12)
        for a, b in ((sol1.field, sol2.field), (sol1.flux, sol2.flux),
                     (sol1.trace, sol2.trace)):
            scale = np.abs(b).max()
            assert np.abs(2.0 * a - b).max() <= 1e-9 * scale

    def test_repeat_runs_bitwise_identical(self):
        case = manufactured_case("pot-trig")
        mesh = case_mesh(case, 4)
        sol_a, _, _ = solve_dpg(mesh, case.problem, SpaceLayout(p=1))
        sol_b, _, _ = solve_dpg(mesh, case.problem, SpaceLayout(p=1))
        assert np.array_equal(sol_a.field, sol_b.field)
        assert np.array_equal(sol_a.flux, sol_b.flux)
        assert np.array_equal(sol_a.trace, sol_b.trace)
        assert np.array_equal(sol_a.indicators, sol_b.indicators)

    def test_indicator_layout_and_eta(self):
        case = manufactured_case("conc-trig")
        mesh = case_mesh(case, 4)
        solution, _, _ = solve_dpg(mesh, case.problem, SpaceLayout(p=1))
        assert solution.indicators.shape == (16, 2)
        assert np.all(solution.indicators >= 0.0)
        assert solution.eta == pytest.approx(
            np.sqrt(solution.indicators.sum()), rel=1e-14)


class TestExtractSolution:
    def test_rejects_mismatched_sizes(self):
        mesh = build_rect_mesh(UNIT, 2, 2)
        problem = ConcentrationProblem(D=0.5, dt=0.1, c_prev=0.0, J=0.0)
        dofmap = build_dofmap(mesh, SpaceLayout(p=1),
                              active_facets(mesh, problem))
        with pytest.raises(ValueError):
            extract_solution(np.zeros(dofmap.n_total + 1), dofmap,
                             np.zeros((4, 2)))
        with pytest.raises(ValueError):
            extract_solution(np.zeros(dofmap.n_total), dofmap,
                             np.zeros((3, 2)))

    def test_block_sizes(self):
        mesh = build_rect_mesh(UNIT, 2, 2)
        problem = ConcentrationProblem(D=0.5, dt=0.1, c_prev=0.0, J=0.0)
        dofmap = build_dofmap(mesh, SpaceLayout(p=1),
                              active_facets(mesh, problem))
        solution = extract_solution(np.arange(dofmap.n_total, dtype=float),
                                    dofmap, np.zeros((4, 2)))
        assert solution.field.size == dofmap.n_field
        assert solution.flux.size == dofmap.n_flux
        assert solution.trace.size == dofmap.n_trace
        assert solution.field[0] == 0.0
        assert solution.trace[-1] == dofmap.n_total - 1
