import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from sixdma.channel import CapacityModel, gram_exclusive
from sixdma.errors import NonFiniteObjective
from sixdma.geometry import (
    ArrayLayout,
    PlacementConstraints,
    SiteBox,
    SurfacePose,
    check_constraints,
    fibonacci_candidates,
    initial_poses,
    layout_clearance,
    poses_to_arrays,
    rotation_matrix,
    surface_normal,
)
from sixdma.optimizer import (
    ConvergenceTrace,
    OptimizerConfig,
    alternating_optimize,
    armijo,
    fd_gradient,
    normal_jacobian,
    position_constraints,
    position_step,
    rotation_constraints,
    rotation_step,
)
from sixdma.propagation import PathLossModel, RadiationPattern, path_gains
from sixdma.scenario import DensityModel, UserDrop, monte_carlo_set

LAM = 0.125
LAYOUT = ArrayLayout.upa(4, LAM / 2)
PC = PlacementConstraints(layout_clearance(LAYOUT, LAM / 2), SiteBox.cube(1.0))
PLM = PathLossModel()


def make_model(S=3, mu=10, seed=0, layout=LAYOUT, drops=None):
    if drops is None:
        drops = monte_carlo_set(DensityModel(mu, 0.2), PLM, S, seed)
    return CapacityModel(drops, layout, RadiationPattern(), 0.04, 1e-8, LAM)


def start_poses(B, seed):
    return initial_poses(B, fibonacci_candidates(64, 0.5), seed, PC.d_min)


def test_fd_gradient_linear_and_quadratic():
    c = np.array([1.5, -2.0, 0.25])
    assert_allclose(fd_gradient(lambda x: c @ x, np.zeros(3), 1e-6), c, atol=1e-8)
    g = fd_gradient(lambda x: x @ x, np.array([1.0, 0.0, 0.0]), 1e-6)
    assert_allclose(g, [2 + 1e-6, 1e-6, 1e-6], atol=1e-9)


def test_fd_gradient_non_finite():
    with pytest.raises(NonFiniteObjective):
        fd_gradient(lambda x: -math.inf if x[0] <= 0 else math.log(x[0]), np.array([0.0, 0, 0]), 1e-6)
    with pytest.raises(NonFiniteObjective):
        fd_gradient(lambda x: math.nan if x[1] > 0 else 1.0, np.array([1.0, 0, 0]), 1e-6)


def test_armijo_accepts_and_rejects():
    cfg = OptimizerConfig()
    f = lambda x: -float((x - 1.0) @ (x - 1.0))  # noqa: E731
    x0 = np.zeros(3)
    d = np.ones(3)
    step = armijo(f, x0, d, f(x0), 6.0, cfg)
    assert step.accepted and step.tau == 1.0 and step.gain == pytest.approx(3.0)
    stalled = armijo(f, x0, d, f(x0), 0.0, cfg)
    assert not stalled.accepted and np.array_equal(stalled.x, x0)
    blocked = armijo(f, x0, d, f(x0), 6.0, cfg, feasible=lambda x: False)
    assert not blocked.accepted and np.array_equal(blocked.x, x0)
    half = armijo(f, x0, 4 * d, f(x0), 24.0, cfg)
    # tau = 1 overshoots and tau = 1/2 gains nothing
    assert half.tau == 0.25 and half.accepted


def test_config_validation():
    for bad in ({"t_inner": 0}, {"t_outer": -1}, {"tau_ini": 0.0}, {"iota": 1.0}, {"delta": 1.0},
                {"fd_eps": 0.0}, {"trust_rot": 1.0}, {"conv_tol": -1.0},
                {"rotation_linearization": "exact"}):
        with pytest.raises(ValueError):
            OptimizerConfig(**bad)


def test_zero_gradient_leaves_variable_unchanged():
    model = make_model(drops=[UserDrop(np.zeros((0, 3)), np.zeros(0))])
    Q, U = poses_to_arrays(start_poses(2, 1))
    obj = model.surface_objective(gram_exclusive(model.blocks(Q, U), 0))
    for step in (position_step(0, Q, U, obj, PC, OptimizerConfig()),
                 rotation_step(0, Q, U, obj, OptimizerConfig())):
        assert not step.accepted
    assert np.array_equal(step.x, U[0])


def test_current_point_satisfies_linearized_constraints():
    rng = np.random.default_rng(3)
    for trial in range(20):
        poses = start_poses(6, trial)
        Q, U = poses_to_arrays(poses)
        b = int(rng.integers(6))
        A, c = position_constraints(b, Q, U, PC, LAYOUT.local_normal)
        assert (A @ Q[b] - c).max() <= 1e-12
        A, c = rotation_constraints(b, Q, U, math.pi / 16, LAYOUT.local_normal)
        assert (-c).max() <= 1e-12


def test_linearized_position_region_is_safe():
    # any point of the linearized distance region keeps the true distance
    rng = np.random.default_rng(4)
    for trial in range(200):
        poses = start_poses(4, 100 + trial)
        Q, U = poses_to_arrays(poses)
        A, c = position_constraints(0, Q, U, PC, LAYOUT.local_normal)
        q = Q[0] + rng.normal(size=3) * 0.2
        if np.all(A @ q <= c):
            assert np.linalg.norm(Q[1:] - q, axis=1).min() >= PC.d_min - 1e-12


@pytest.mark.parametrize("mode", ["jacobian", "incremental"])
def test_normal_jacobian_first_order(mode):
    rng = np.random.default_rng(5)
    n_loc = LAYOUT.local_normal
    for _ in range(50):
        u = rng.uniform(-1.2, 1.2, 3)
        J = normal_jacobian(u, n_loc, mode)
        du = rng.normal(size=3) * 1e-4
        if mode == "jacobian":
            exact = rotation_matrix(u + du) @ n_loc
        else:
            exact = rotation_matrix(u) @ rotation_matrix(du) @ n_loc
        assert np.linalg.norm(exact - (rotation_matrix(u) @ n_loc + J @ du)) < 1e-7


def test_single_surface_smoke():
    model = make_model()
    poses, trace = alternating_optimize(start_poses(1, 0), model, PC, OptimizerConfig(t_outer=3))
    assert len(poses) == 1
    assert trace.is_monotone()
    assert trace.objective[-1] >= trace.objective[0]
    assert check_constraints(poses, LAYOUT, PC).feasible


def test_zero_outer_iterations():
    model = make_model()
    init = start_poses(3, 2)
    poses, trace = alternating_optimize(init, model, PC, OptimizerConfig(t_outer=0))
    assert len(trace.objective) == 1
    assert all(np.array_equal(a.q, b.q) and np.array_equal(a.u, b.u) for a, b in zip(poses, init))


def test_monotone_and_feasible_small_run():
    model = make_model(S=2, mu=8, seed=9)
    poses, trace = alternating_optimize(start_poses(4, 9), model, PC,
                                        OptimizerConfig(t_outer=4, conv_tol=0.0))
    assert trace.is_monotone(1e-9)
    assert max(trace.max_violation) <= 1e-9
    assert max(trace.step_violations, default=0.0) <= 1e-9
    assert trace.objective[-1] > trace.objective[0]


def test_clustered_users_rotate_single_surface():
    # all users in a tight cluster: the lone surface should turn to face it
    rng = np.random.default_rng(6)
    target = np.array([math.cos(0.6) * math.cos(0.2), math.sin(0.6) * math.cos(0.2), math.sin(0.2)])
    pos = 60 * target + rng.normal(size=(6, 3)) * 0.5
    drops = [UserDrop(pos, path_gains(pos, PLM))]
    model = make_model(drops=drops)
    start = SurfacePose(0.3 * target, np.zeros(3))
    cfg = OptimizerConfig(t_outer=20, conv_tol=0.0)
    poses, trace = alternating_optimize([start], model, PC, cfg, positions=False)
    n = surface_normal(poses[0].u, LAYOUT)
    angle = math.degrees(math.acos(np.clip(n @ target, -1, 1)))
    assert angle < 5.0
    assert trace.is_monotone()


def test_determinism():
    model = make_model(S=2, mu=6, seed=11)
    cfg = OptimizerConfig(t_outer=2)
    a, ta = alternating_optimize(start_poses(3, 11), model, PC, cfg)
    b, tb = alternating_optimize(start_poses(3, 11), model, PC, cfg)
    assert ta.objective == tb.objective
    assert all(np.array_equal(x.q, y.q) and np.array_equal(x.u, y.u) for x, y in zip(a, b))


def test_trace_csv():
    t = ConvergenceTrace()
    t.record_outer(1.0, 0.0)
    t.record_outer(1.23456789012, 1e-13)
    lines = t.to_csv().splitlines()
    assert lines[0] == "outer_iter,objective_bps_hz,max_violation"
    assert lines[2] == "1,1.23456789,1e-13"
    assert t.is_monotone()
    t.record_outer(1.0, 0.0)
    assert not t.is_monotone()


def test_fd_gradient_matches_central_difference():
    # a central difference cancels the curvature term that a one-sided
    # secant of the same step carries, isolating the gradient error
    rng = np.random.default_rng(105)
    h = 1e-4
    for trial in range(20):
        model = make_model(S=3, mu=35, seed=(105, trial))
        Q, U = poses_to_arrays(start_poses(6, (105, trial)))
        b = int(rng.integers(6))
        obj = model.surface_objective(gram_exclusive(model.blocks(Q, U), b))
        d = rng.normal(size=3)
        d /= np.linalg.norm(d)
        if trial % 2 == 0:
            g = fd_gradient(lambda q: obj.excess(q, U[b]), Q[b], 1e-6)

            def f(t):
                Q2 = Q.copy()
                Q2[b] = Q[b] + t * d
                return model.capacity(Q2, U)
        else:
            g = fd_gradient(lambda u: obj.excess(Q[b], u), U[b], 1e-6)

            def f(t):
                U2 = U.copy()
                U2[b] = U[b] + t * d
                return model.capacity(Q, U2)
        f0, fp, fm = f(0.0), f(h), f(-h)
        gd = float(g @ d)
        assert abs((fp - fm) / (2 * h) - gd) <= 2e-4 * abs(gd)
        # the forward secant is off by its own second-order term
        forward_error = (fp - f0) / h - gd
        curvature = (fp - 2 * f0 + fm) / (2 * h)
        assert forward_error == pytest.approx(curvature, rel=0.1, abs=1e-4 * abs(gd))
