import math

import numpy
import pytest
from hypothesis import given, settings, strategies as st

import factories
from regbox import bsgame
from regbox import numkit
from regbox import oracle


def test_create_rescales_by_inf_norm():
    game = bsgame.RegGame.create([[2.0, 0.0], [0.0, 1.0]], [1.0, 0.5], [0.2, 0.4], 1.0, 0.1)
    assert game.scale == 2.0
    assert game.A.to_dense().tolist() == [[1.0, 0.0], [0.0, 0.5]]
    assert game.b.tolist() == [0.5, 0.25]
    assert game.c.tolist() == [0.1, 0.2]
    assert game.mu == 0.5
    assert game.eps_reg == 0.1
    assert game.C_max == 1.0


def test_create_floors_zero_columns_at_heaviest_row():
    game = bsgame.RegGame.create([[0.25, 0.0], [0.5, 0.0]], [0.0, 0.0], [0.0, 0.0], 1.0, 0.1, delta_col=1e-6)
    dense = game.A.to_dense()
    assert game.scale == 1.0
    assert dense[0, 1] == 0.0
    assert dense[1, 1] == 1e-6
    assert game.A.col_abs_max().min() >= game.delta_col


def test_create_floors_small_columns_on_their_largest_entry():
    A = [[0.5, 1e-8, 0.0], [0.25, -3e-8, 0.0]]
    game = bsgame.RegGame.create(A, [0.0] * 3, [0.0, 0.0], 1.0, 0.1, delta_col=1e-6)
    dense = game.A.to_dense()
    assert dense[0, 1] == 1e-8
    assert dense[1, 1] == pytest.approx(-3e-8 - 1e-6, rel=1e-12)
    assert dense[:, 2].tolist() == [1e-6, 0.0]
    assert dense[:, 0].tolist() == [0.5, 0.25]


def test_create_rejects_bad_input():
    with pytest.raises(numkit.InstanceError):
        bsgame.RegGame.create([[1.0]], [0.0, 0.0], [0.0], 1.0, 0.1)
    with pytest.raises(numkit.InstanceError):
        bsgame.RegGame.create([[1.0]], [0.0], [0.0], 0.0, 0.1)
    with pytest.raises(numkit.InstanceError):
        bsgame.RegGame.create([[1.0]], [0.0], [0.0], 1.0, -1.0)


def test_require_eps():
    game = bsgame.RegGame.create([[1.0]], [0.0], [0.0], 1.0)
    with pytest.raises(bsgame.ParameterError):
        game.require_eps()
    assert game.with_eps_reg(0.5).require_eps() == 0.5


def test_best_response_maximizes_objective(rng, small_game):
    for _ in range(50):
        z = factories.random_point(rng, small_game)
        y_star = bsgame.best_response_y(small_game, z.x)
        best = bsgame.objective(small_game, bsgame.PDPoint(z.x, y_star))
        assert bsgame.objective(small_game, z) <= best + 1e-12
        assert bsgame.primal_value(small_game, z.x) == pytest.approx(best)


def test_gap_is_nonnegative(rng):
    for _ in range(200):
        game = factories.random_game(rng, int(rng.integers(2, 8)), int(rng.integers(1, 5)), mu=rng.uniform(0.05, 1.0),
                                     eps=rng.uniform(0.01, 0.5))
        z = factories.random_point(rng, game)
        assert bsgame.dual_value(game, z.y) <= bsgame.objective(game, z) + 1e-12
        assert bsgame.objective(game, z) <= bsgame.primal_value(game, z.x) + 1e-12
        assert bsgame.certified_gap(game, z) >= -1e-12
        assert bsgame.half_primal_value(game, z.x) >= bsgame.primal_value(game, z.x) - 1e-12


def test_gradient_matches_finite_differences(rng, small_game):
    z = factories.random_point(rng, small_game)
    g_x, g_y = bsgame.grad_operator(small_game, z)
    h = 1e-7
    for i in range(small_game.m):
        step = numpy.zeros(small_game.m)
        step[i] = h
        forward = bsgame.objective(small_game, bsgame.PDPoint(z.x + step, z.y))
        backward = bsgame.objective(small_game, bsgame.PDPoint(z.x - step, z.y))
        assert g_x[i] == pytest.approx((forward - backward) / (2 * h), abs=1e-5)
    for j in range(small_game.n):
        step = numpy.zeros(small_game.n)
        step[j] = h
        forward = bsgame.objective(small_game, bsgame.PDPoint(z.x, z.y + step))
        backward = bsgame.objective(small_game, bsgame.PDPoint(z.x, z.y - step))
        assert -g_y[j] == pytest.approx((forward - backward) / (2 * h), abs=1e-5)


def test_regularizer_gradient_and_divergence(rng, small_game):
    z = factories.random_point(rng, small_game)
    w = factories.random_point(rng, small_game)
    rho = 4.0
    r_x, r_y = bsgame.regularizer_grad(small_game, z, rho)
    expected = (bsgame.regularizer_value(small_game, w, rho) - bsgame.regularizer_value(small_game, z, rho)
                - r_x @ (w.x - z.x) - r_y @ (w.y - z.y))
    assert bsgame.breg_div(small_game, z, w, rho) == pytest.approx(expected, abs=1e-10)
    assert bsgame.breg_div(small_game, z, z, rho) == pytest.approx(0.0, abs=1e-12)


def test_hessian_sandwich(rng):
    for _ in range(1000):
        game = factories.random_game(rng, int(rng.integers(1, 7)), int(rng.integers(1, 5)), mu=0.5, eps=0.1)
        z = factories.random_point(rng, game)
        w = factories.random_direction(rng, game)
        rho = rng.uniform(3.0, 20.0)
        lower = bsgame.diag_form(game, z.x, w, rho)
        value = bsgame.hessian_form(game, z, w, rho)
        assert lower * (1 - 1e-9) <= value <= 4.0 * lower * (1 + 1e-9)


def test_strong_monotonicity(rng):
    for _ in range(1000):
        eps = rng.uniform(0.005, 0.1)
        mu = eps * rng.uniform(4.5, 100.0)
        game = factories.random_game(rng, int(rng.integers(2, 7)), int(rng.integers(1, 5)), mu=mu, eps=eps)
        rho = game.default_rho()
        nu = 0.5 * math.sqrt(mu * eps / 2.0)
        z = factories.random_point(rng, game)
        w = factories.random_point(rng, game)
        g_z = bsgame.grad_operator(game, z)
        g_w = bsgame.grad_operator(game, w)
        lhs = (g_w[0] - g_z[0]) @ (w.x - z.x) + (g_w[1] - g_z[1]) @ (w.y - z.y)
        rhs = nu * (bsgame.breg_div(game, z, w, rho) + bsgame.breg_div(game, w, z, rho))
        assert lhs >= rhs - 1e-9 * (1.0 + abs(rhs))


def test_padding_moves_divergence_by_at_most_m_delta(rng):
    for _ in range(200):
        game = factories.random_game(rng, int(rng.integers(2, 10)), int(rng.integers(1, 5)), mu=0.5, eps=0.05)
        m = game.m
        delta = rng.uniform(1e-6, 0.5 / m)
        x = factories.random_simplex(rng, m, floor=0.0)
        x[rng.integers(m)] = 1e-12
        x = x / x.sum()
        z = bsgame.PDPoint(x, rng.random(game.n))
        z_padded = bsgame.PDPoint(bsgame.pad_simplex(x, delta), z.y)
        w = factories.random_point(rng, game)
        rho = rng.uniform(3.0, 10.0)
        increase = bsgame.breg_div(game, z_padded, w, rho) - bsgame.breg_div(game, z, w, rho)
        assert increase <= (rho + 8.0 / rho) * m * delta + 1e-9


def test_pad_simplex():
    x = bsgame.pad_simplex(numpy.array([1.0, 0.0, 0.0, 0.0]), 0.01)
    assert x.sum() == pytest.approx(1.0)
    assert x.min() >= 0.01 / (1 + 4 * 0.01) - 1e-15
    with pytest.raises(numkit.InstanceError):
        bsgame.pad_simplex(numpy.full(4, 0.25), 0.25)


def test_altmin_approximately_minimizes(rng, small_game):
    rho = 3.0
    theta = 2.0
    z0 = factories.random_point(rng, small_game)
    gamma_x = rng.normal(size=small_game.m)
    gamma_y = rng.normal(size=small_game.n)

    def value(z):
        return gamma_x @ z.x + gamma_y @ z.y + theta * bsgame.regularizer_value(small_game, z, rho)

    z = bsgame.altmin_bs(small_game, gamma_x, gamma_y, theta, z0, 300, rho)
    assert z.x.sum() == pytest.approx(1.0)
    assert numpy.all((z.y >= 0.0) & (z.y <= 1.0))
    for _ in range(100):
        assert value(z) <= value(factories.random_point(rng, small_game)) + 1e-9


def test_solver_params_theory_preconditions(small_game):
    with pytest.raises(bsgame.ParameterError):
        bsgame.SolverParams.for_game(small_game.with_eps_reg(0.1), 1e-6, bsgame.THEORY)
    with pytest.raises(bsgame.ParameterError):
        bsgame.SolverParams.for_game(small_game, 1e-6, "fast")
    with pytest.raises(bsgame.ParameterError):
        bsgame.SolverParams.for_game(small_game, 0.0)

    game = small_game.with_eps_reg(0.5 / 100.0)
    params = bsgame.SolverParams.for_game(game, 1e-6, bsgame.THEORY)
    assert params.rho == pytest.approx(math.sqrt(2 * 0.5 / 0.005))
    assert params.nu == pytest.approx(0.5 * math.sqrt(0.5 * 0.005 / 2))
    assert params.alpha_start == params.alpha
    assert 0 < params.delta < 1.0 / game.m


def test_practical_params_floor_rho(small_game):
    params = bsgame.SolverParams.for_game(small_game.with_eps_reg(1.0), 1e-4)
    assert params.rho == bsgame.PRACTICAL_RHO_FLOOR
    assert params.rho_floored
    assert params.alpha_start <= params.alpha


def test_solve_certifies_and_matches_oracle(small_game):
    x, report = bsgame.solve(small_game, 1e-6)
    assert report.certified
    assert report.final_gap <= 1e-6
    assert report.outer_iterations == len(report.trace)
    assert report.l1_bound == pytest.approx(math.sqrt(2 * report.final_gap / small_game.mu))

    reference = oracle.brute_reg_optimum(small_game, tol=1e-13, method=oracle.DUAL_NEWTON)
    assert numpy.abs(x - reference.x).sum() <= math.sqrt(2e-6 / small_game.mu) + 1e-6


def test_solve_reports_uncertified_under_cap(small_game):
    x, report = bsgame.solve(small_game, 1e-12, max_outer=1)
    assert report.status == bsgame.UNCERTIFIED
    assert not report.certified
    assert report.outer_iterations == 1
    assert x.sum() == pytest.approx(1.0)


def test_solve_single_coordinate():
    game = bsgame.RegGame.create([[0.5, -0.5]], [0.1, 0.2], [0.3], 0.5, 0.1)
    x, report = bsgame.solve(game, 1e-9)
    assert x.tolist() == [1.0]
    assert report.certified
    assert report.outer_iterations == 0


def test_solve_callback_and_warm_start(small_game):
    seen = []
    _, report = bsgame.solve(small_game, 1e-4, on_iteration=seen.append)
    assert [info.k for info in seen] == list(range(1, report.outer_iterations + 1))

    _, warm = bsgame.solve(small_game, 1e-4, z0=report.point)
    assert warm.certified
    assert warm.outer_iterations <= report.outer_iterations


def test_outer_iterations_contract_towards_the_optimum(rng):
    sigma = 1e-5
    for _ in range(5):
        game = factories.random_game(rng, int(rng.integers(4, 7)), int(rng.integers(1, 4)), mu=0.9, eps=0.01)
        reference = oracle.brute_reg_optimum(game, tol=1e-13, method=oracle.DUAL_NEWTON)
        z_star = bsgame.PDPoint(reference.x, bsgame.best_response_y(game, reference.x))
        params = bsgame.SolverParams.for_game(game, sigma, bsgame.THEORY)
        padding = (params.rho + 8.0 / params.rho) * game.m * params.delta
        steps = []
        bsgame.solve(game, sigma, bsgame.THEORY, max_outer=15, on_iteration=steps.append)
        assert len(steps) == 15
        for info in steps:
            before = bsgame.breg_div(game, info.z_prev, z_star, info.rho)
            after = bsgame.breg_div(game, info.z, z_star, info.rho)
            factor = info.alpha / (info.nu + info.alpha)
            assert after <= factor * before + padding + 1e-8 + 1e-9 * before


def test_any_point_pays_its_divergence_from_the_optimum(rng):
    # f^x - mu H is convex, so f^x(x) - f^x(x*) >= mu KL(x || x*) on the whole simplex,
    # including optima of games restricted to a subset of rows
    for _ in range(20):
        game = factories.random_game(rng, int(rng.integers(3, 8)), int(rng.integers(1, 4)), mu=rng.uniform(0.05, 1.0),
                                     eps=rng.uniform(0.01, 0.2), density=1.0)
        keep = numpy.sort(rng.choice(game.m, size=int(rng.integers(1, game.m)), replace=False))
        restricted = bsgame.RegGame.create(game.A.select_rows(keep), game.b, game.c[keep], game.mu, game.eps_reg)
        full = oracle.brute_reg_optimum(game, tol=1e-12, method=oracle.DUAL_NEWTON)
        part = oracle.brute_reg_optimum(restricted, tol=1e-12, method=oracle.DUAL_NEWTON)
        x_part = bsgame.embed_truncated(part.x, keep, game.m)
        increase = bsgame.primal_value(game, x_part) - bsgame.primal_value(game, full.x)
        assert increase >= game.mu * numkit.kl_div(x_part, full.x) - 1e-6


@pytest.mark.parametrize("epsilon", [1e-2, 1e-3])
def test_solve_half_regularized_meets_half_epsilon(rng, epsilon):
    for _ in range(4):
        game = factories.random_game(rng, int(rng.integers(2, 8)), int(rng.integers(1, 5)), mu=0.5, eps=None)
        x, report = bsgame.solve_half_regularized(game, epsilon)
        assert report.certified
        regularized = game.with_eps_reg(epsilon / game.scale)
        reference = oracle.brute_reg_optimum(regularized, tol=1e-12, method=oracle.DUAL_NEWTON)
        optimum = bsgame.primal_value(regularized, reference.x)
        assert (bsgame.primal_value(regularized, x) - optimum) * game.scale <= epsilon / 2.0 + 1e-12
        # the quadratic term costs at most eps/2, and the regularized optimum is below the plain one
        assert (bsgame.half_primal_value(game, x) - optimum) * game.scale <= epsilon + 1e-12


def test_dual_polish_certifies_small_mu_games(rng):
    for _ in range(5):
        game = factories.random_game(rng, int(rng.integers(5, 30)), int(rng.integers(2, 8)), mu=1e-4, eps=1e-4)
        z, gap, steps = bsgame.dual_polish(game, numpy.zeros(game.n), 1e-10)
        assert gap <= 1e-10
        assert gap == bsgame.certified_gap(game, z)
        assert 0 < steps <= bsgame.POLISH_STEPS
        assert z.x.sum() == pytest.approx(1.0)
        assert numpy.all((z.y >= 0.0) & (z.y <= 1.0))


def test_solve_polishes_stalled_games(rng):
    game = factories.random_game(rng, 20, 6, mu=1e-4, eps=1e-4)
    sigma = 1e-10
    _, report = bsgame.solve(game, sigma)
    assert report.certified
    assert report.polish_steps > 0
    assert report.outer_iterations >= bsgame.POLISH_AFTER

    _, plain = bsgame.solve(game, sigma, max_outer=bsgame.POLISH_AFTER + 5, polish=False)
    assert plain.polish_steps == 0
    assert not plain.certified
    _, capped = bsgame.solve(game, sigma, max_outer=bsgame.POLISH_AFTER - 1)
    assert capped.polish_steps == 0


def test_solve_without_timestamps(small_game):
    _, report = bsgame.solve(small_game, 1e-3, timestamps=False)
    assert report.elapsed_ns is None


def test_theory_mode_keeps_iterates_stable(rng):
    for _ in range(20):
        game = factories.random_game(rng, int(rng.integers(2, 6)), int(rng.integers(1, 4)), mu=0.9, eps=0.01)
        _, report = bsgame.solve(game, 1e-2, bsgame.THEORY, max_outer=20)
        assert report.max_stability_excursion <= bsgame.STABILITY_BAND + 1e-9


def test_solve_half_regularized_bounds_half_primal(small_game):
    half_game = bsgame.RegGame.create(small_game.A, small_game.b, small_game.c, small_game.mu)
    x, report = bsgame.solve_half_regularized(half_game, 1e-3)
    assert report.certified
    reference = oracle.brute_reg_optimum(half_game.with_eps_reg(1e-3), tol=1e-10, method=oracle.DUAL_NEWTON)
    # the quadratic term costs at most eps in value
    assert bsgame.half_primal_value(half_game, x) <= bsgame.half_primal_value(half_game, reference.x) + 2e-3


def test_truncate_costs():
    game = bsgame.RegGame.create([[0.5], [0.5], [0.5]], [0.1], [0.0, 0.5, 5.0], 0.5, 0.1)
    truncated, keep = bsgame.truncate_costs(game, 1.0)
    assert keep.tolist() == [0, 1]
    assert truncated.m == 2
    _, keep = bsgame.truncate_costs(game, 0.0)
    assert keep.tolist() == [0]
    with pytest.raises(numkit.InstanceError):
        bsgame.truncate_costs(game, -1.0)
    assert bsgame.embed_truncated(numpy.array([0.25, 0.75]), numpy.array([0, 2]), 3).tolist() == [0.25, 0.0, 0.75]


@pytest.mark.parametrize("tau", [4.0, 8.0])
def test_truncation_error(rng, tau):
    for _ in range(5):
        game = factories.random_game(rng, 6, 3, mu=0.5, eps=0.1)
        costs = numpy.array(game.c) * 12.0
        game = bsgame.RegGame.create(game.A, game.b, costs, game.mu, game.eps_reg)
        truncated, keep = bsgame.truncate_costs(game, tau)
        full = oracle.brute_reg_optimum(game, tol=1e-11, method=oracle.DUAL_NEWTON)
        part = oracle.brute_reg_optimum(truncated, tol=1e-11, method=oracle.DUAL_NEWTON)
        full_value = bsgame.primal_value(game, full.x)
        part_value = bsgame.primal_value(truncated, part.x)
        assert part_value <= full_value + game.mu * game.m * math.exp(-(tau - 3.0) / game.mu) + 1e-9


@given(st.integers(min_value=0, max_value=2 ** 32 - 1))
@settings(max_examples=30, deadline=None)
def test_objective_decomposes(seed):
    rng = numpy.random.default_rng(seed)
    game = factories.random_game(rng, 4, 3, mu=0.3, eps=0.2)
    z = factories.random_point(rng, game)
    At_x = game.A.to_dense().T @ z.x
    absAt_x = numpy.abs(game.A.to_dense()).T @ z.x
    expected = (z.y @ At_x + game.c @ z.x - game.b @ z.y + game.mu * numpy.sum(z.x * numpy.log(z.x))
                - 0.5 * game.eps_reg * (z.y ** 2) @ absAt_x)
    assert bsgame.objective(game, z) == pytest.approx(expected, abs=1e-12)


@pytest.mark.slow
def test_solver_accuracy_against_oracle(rng):
    for _ in range(50):
        m = int(rng.integers(2, 41))
        n = int(rng.integers(1, 21))
        eps = rng.uniform(1e-3, 1e-2)
        mu = rng.uniform(72.0 * eps, 1.0)
        game = factories.random_game(rng, m, n, mu=mu, eps=eps)
        x, report = bsgame.solve(game, 1e-6)
        assert report.certified
        reference = oracle.brute_reg_optimum(game, tol=1e-13, method=oracle.DUAL_NEWTON)
        assert numpy.abs(x - reference.x).sum() <= math.sqrt(2e-6 / mu) + 1e-6
