import dataclasses

import numpy as np
import pytest

import quadint.spectral as sp
from quadint import model, sampling, solver
from quadint.analysis import constants_report
from quadint.errors import (BallEscapeError, ConfigurationError,
                            NonConvergenceError)
from quadint.exprdsl import NonlinearitySpec, parse
from quadint.model import (ExpressionKernel, InverseHelmholtz, ProblemSpec,
                           TabulatedKernel, VectorField, materialize)
from quadint.oracle import direct_convolution
from quadint.solver import (IterationTrace, a_posteriori_bound, apply_map_tg,
                            assemble_solution, continuity_experiment,
                            picard_solve, residual_original_system)
from quadint.spectral import Grid, ScalarField


def small_problem(g_texts=("z1^2",), kernel="0.005*exp(-x1^2-x2^2)", n=16):
    grid = Grid(2, n, 8.0)
    n_comp = len(g_texts)
    return ProblemSpec(
        grid=grid,
        kernels=tuple(ExpressionKernel(kernel) for _ in range(n_comp)),
        operators=tuple(InverseHelmholtz() for _ in range(n_comp)),
        g=NonlinearitySpec.from_strings(list(g_texts)),
        u0=tuple(parse("0.1*exp(-x1^2-x2^2)", 2, "x") for _ in range(n_comp)),
    )


class TestApplyMap:
    def test_zero_nonlinearity_gives_zero(self):
        mat = materialize(dataclasses.replace(
            small_problem(), g=NonlinearitySpec.from_strings(["0*z1"])))
        v = VectorField.zero(mat.grid, 1)
        out = apply_map_tg(mat, v)
        assert np.all(out.components[0].values == 0.0)

    def test_zero_kernel_gives_zero(self):
        # diagnostic mode: materialize non-strictly with an all-zero kernel
        mat = materialize(dataclasses.replace(
            small_problem(), kernels=(TabulatedKernel(np.zeros((16, 16))),)),
            strict=False)
        out = apply_map_tg(mat, VectorField.zero(mat.grid, 1))
        assert np.all(out.components[0].values == 0.0)

    def test_matches_direct_quadrature_composition(self):
        # same map with the convolution replaced by the literal Riemann sum
        mat = materialize(small_problem(n=16))
        v = VectorField.zero(mat.grid, 1)
        fast = apply_map_tg(mat, v)

        w = mat.u0 + v
        g_vals = mat.g.evaluate_components(w.values_list())
        integrand = ScalarField(mat.grid, np.array(np.broadcast_to(
            g_vals[0], mat.grid.shape)))
        conv = direct_convolution(mat.kernels[0].field, integrand)
        prefactor = model.apply_operator(InverseHelmholtz(), w.components[0])
        reference = prefactor * conv

        rel = sp.l2_norm(fast.components[0] - reference) / sp.l2_norm(reference)
        assert rel <= 1e-9

    def test_grid_mismatch_rejected(self, certified):
        mat, _ = certified
        with pytest.raises(ConfigurationError):
            apply_map_tg(mat, VectorField.zero(Grid(2, 16, 8.0), 1))


class TestPicard:
    def test_certified_problem_converges(self, certified):
        mat, report = certified
        sol, trace = picard_solve(mat, report)
        assert sol.certified
        assert sol.residual <= solver.default_tolerance(mat.u0_norm)
        assert sol.u_p.h2_norm() <= report.rho
        for ratio in trace.ratios[1:]:
            assert ratio <= report.sigma + 1e-9
        # deltas non-increasing once contraction kicks in
        for a, b in zip(trace.deltas, trace.deltas[1:]):
            assert b <= a + 1e-12

    def test_two_component_system(self, two_component):
        mat, report = two_component
        tol = 1e-10
        sol, _ = picard_solve(mat, report, tol=tol)
        assert residual_original_system(mat, sol.u) <= 10 * tol

    def test_nonconvergence_carries_first_delta(self, certified):
        mat, report = certified
        with pytest.raises(NonConvergenceError) as err:
            picard_solve(mat, report, tol=1e-30, max_iter=1)
        assert err.value.iterations == 1
        assert err.value.last_delta > 0

    def test_uncertified_requires_best_effort(self):
        mat = materialize(small_problem(kernel="5.0*exp(-x1^2-x2^2)"))
        report = constants_report(mat)
        assert not report.certificate.passed
        with pytest.raises(ConfigurationError, match="best_effort"):
            picard_solve(mat, report)

    def test_best_effort_can_converge_without_certificate(self):
        # moderately above the certifiable amplitude: iteration still contracts
        mat = materialize(small_problem(kernel="0.05*exp(-x1^2-x2^2)"))
        report = constants_report(mat)
        assert not report.certificate.passed
        sol, _ = picard_solve(mat, report, best_effort=True)
        assert not sol.certified
        assert sol.residual <= solver.default_tolerance(mat.u0_norm)

    def test_best_effort_divergence_is_reported(self):
        mat = materialize(small_problem(kernel="40.0*exp(-x1^2-x2^2)"))
        report = constants_report(mat)
        with pytest.raises(NonConvergenceError):
            picard_solve(mat, report, best_effort=True, max_iter=60)

    def test_start_outside_ball_rejected(self, certified):
        mat, report = certified
        start = VectorField((ScalarField(
            mat.grid, np.full(mat.grid.shape, 1.0)),))
        assert start.h2_norm() > report.rho
        with pytest.raises(ConfigurationError, match="outside"):
            picard_solve(mat, report, start=start)

    def test_ball_escape_guard_fires_on_unsound_radius(self, certified):
        # simulate an unsound certificate by shrinking rho below the reach
        # of the very first iterate
        mat, report = certified
        fake_cert = dataclasses.replace(report.certificate, rho=1e-9)
        fake = dataclasses.replace(report, rho=1e-9, certificate=fake_cert)
        with pytest.raises(BallEscapeError):
            picard_solve(mat, fake)

    def test_uniqueness_from_random_starts(self, two_component):
        mat, report = two_component
        tol = 1e-11
        baseline, _ = picard_solve(mat, report, tol=tol)
        rng = np.random.default_rng(3)
        for _ in range(3):
            start = sampling.random_vector_in_ball(mat.grid, mat.n,
                                                   report.rho, rng)
            sol, _ = picard_solve(mat, report, tol=tol, start=start)
            assert (sol.u_p - baseline.u_p).h2_norm() <= 10 * tol


class TestAssembleAndResidual:
    def test_assemble_trivial_cases(self, certified):
        mat, _ = certified
        zero = VectorField.zero(mat.grid, mat.n)
        assert np.all(assemble_solution(mat.u0, zero).components[0].values
                      == mat.u0.components[0].values)
        assert np.all(assemble_solution(zero, mat.u0).components[0].values
                      == mat.u0.components[0].values)

    def test_triangle_inequality(self, certified):
        mat, report = certified
        sol, _ = picard_solve(mat, report)
        assert sol.u.h2_norm() <= mat.u0_norm + report.rho

    def test_nontrivial_solution(self, certified):
        mat, report = certified
        sol, _ = picard_solve(mat, report)
        assert sp.sup_norm(sol.u.components[0]) > 0.0

    def test_residual_zero_for_zero_nonlinearity(self):
        mat = materialize(dataclasses.replace(
            small_problem(), g=NonlinearitySpec.from_strings(["0*z1"])))
        assert residual_original_system(mat, mat.u0) == 0.0

    def test_residual_positive_at_initial_data(self, certified):
        mat, _ = certified
        assert residual_original_system(mat, mat.u0) > 0.0

    def test_residual_consistent_with_perturbative_route(self, certified):
        mat, report = certified
        tol = 1e-10
        sol, _ = picard_solve(mat, report, tol=tol)
        assert residual_original_system(mat, sol.u) <= 10 * tol


class TestAPosteriori:
    def test_geometric_series(self):
        trace = IterationTrace(sigma=0.5)
        trace.record(1, 1.0, 1.0)
        trace.record(2, 1.0, 0.5)
        trace.record(3, 1.0, 0.25)
        bounds = a_posteriori_bound(trace, 0.5)
        assert bounds == pytest.approx([1.0, 0.5, 0.25])

    def test_sigma_at_least_one_rejected(self):
        trace = IterationTrace(sigma=None)
        trace.record(1, 1.0, 1.0)
        with pytest.raises(ConfigurationError):
            a_posteriori_bound(trace, 1.0)

    def test_bound_dominates_true_error(self, certified):
        # oversolve and compare each iterate against a much later one
        mat, report = certified
        rng = np.random.default_rng(8)
        start = sampling.random_vector_in_ball(mat.grid, mat.n, report.rho, rng)
        iterates = [start]
        v = start
        for _ in range(12):
            v = apply_map_tg(mat, v)
            iterates.append(v)
        reference = v
        for _ in range(20):
            reference = apply_map_tg(mat, reference)
        d1 = (iterates[1] - iterates[0]).h2_norm()
        for k in range(1, len(iterates)):
            bound = report.sigma ** k / (1 - report.sigma) * d1
            true_err = (iterates[k] - reference).h2_norm()
            assert true_err <= bound + 1e-12


class TestMapProperties:
    def test_self_map_and_growth(self, certified, rng):
        mat, report = certified
        cap = report.c_a * report.M * (report.u0_norm + 1) ** 2 * report.Q
        for _ in range(20):
            v = sampling.random_vector_in_ball(mat.grid, mat.n, report.rho, rng)
            img = apply_map_tg(mat, v).h2_norm()
            assert img <= report.rho
            assert img <= cap * (1 + 1e-12)

    def test_contraction(self, certified, rng):
        mat, report = certified
        for _ in range(20):
            v1 = sampling.random_vector_in_ball(mat.grid, mat.n, report.rho, rng)
            v2 = sampling.random_vector_in_ball(mat.grid, mat.n, report.rho, rng)
            lhs = (apply_map_tg(mat, v1) - apply_map_tg(mat, v2)).h2_norm()
            assert lhs <= report.sigma * (v1 - v2).h2_norm() + 1e-9

    def test_contraction_3d(self, certified_3d, rng):
        mat, report = certified_3d
        for _ in range(10):
            v1 = sampling.random_vector_in_ball(mat.grid, mat.n, report.rho, rng)
            v2 = sampling.random_vector_in_ball(mat.grid, mat.n, report.rho, rng)
            lhs = (apply_map_tg(mat, v1) - apply_map_tg(mat, v2)).h2_norm()
            assert lhs <= report.sigma * (v1 - v2).h2_norm() + 1e-9


class TestTrace:
    def test_csv_format(self, certified, tmp_path):
        mat, report = certified
        _, trace = picard_solve(mat, report)
        path = tmp_path / "trace.csv"
        trace.write_csv(path)
        lines = path.read_text().strip().split("\n")
        assert lines[0] == "k,norm,delta,ratio,apost_bound"
        assert len(lines) == len(trace.ks) + 1
        first = lines[1].split(",")
        assert first[0] == "1"
        assert float(first[1]) == pytest.approx(trace.norms[0])
        assert first[3] == "nan"
        # 17 significant digits survive a round trip
        assert float(first[2]) == trace.deltas[0]


class TestContinuity:
    def test_identical_nonlinearities(self, certified):
        mat, report = certified
        out = continuity_experiment(mat, report, mat.g, tol=1e-11)
        assert out.measured_distance <= 2e-11
        assert out.passed

    def test_small_perturbation_within_bound(self, certified):
        mat, report = certified
        out = continuity_experiment(mat, report, mat.g.scaled(1.001), tol=1e-12)
        assert out.passed
        assert out.measured_distance <= out.bound
        assert out.M_joint >= report.M

    def test_uncertifiable_joint_bound_rejected(self, certified):
        mat, report = certified
        # scaling by 3 pushes the joint C1 bound past the condition
        with pytest.raises(ConfigurationError, match="joint"):
            continuity_experiment(mat, report, mat.g.scaled(3.0), tol=1e-10)
