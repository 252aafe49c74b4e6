import math

import numpy as np
import pytest

from bitclimb.codec import BitGenome, WeightFormat
from bitclimb.net import Topology
from bitclimb.pendulum import (
    ControlProblem,
    SimConfig,
    SimState,
    batch_errors,
    fitness,
    holdout_errors,
    simulate,
    step,
)

FMT = WeightFormat(8, 10.0)
TOP4 = Topology((4, 5, 1), ("symmetric-sigmoid", "linear"))
TOP2R = Topology((2, 6, 1), ("symmetric-sigmoid", "linear"), recurrent=True)


def random_genome(topology, rng, zero_biases=False):
    layout = topology.layout()
    h = rng.integers(FMT.h_min, FMT.h_max + 1, layout.n_weights)
    if zero_biases:
        for c in layout.coords:
            if c[0] == "b":
                h[layout.index_of(c)] = 0
    return BitGenome.from_multipliers(FMT, layout, h)


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(dt=0.0)
    with pytest.raises(ValueError):
        SimConfig(t_min=100.0, horizon=100.0)
    with pytest.raises(ValueError):
        SimConfig(hold=0)


def test_step_preserves_upright_equilibrium():
    cfg = SimConfig()
    s = SimState()
    for _ in range(100):
        s = step(s, 0.0, cfg)
    assert (s.x, s.x_dot, s.theta, s.theta_dot) == (0.0, 0.0, 0.0, 0.0)


def test_step_falls_away_from_upright():
    cfg = SimConfig()
    s = step(SimState(theta=1e-3), 0.0, cfg)
    assert s.theta_dot > 0.0
    s = step(SimState(theta=-1e-3), 0.0, cfg)
    assert s.theta_dot < 0.0


def test_step_matches_hand_evaluated_formulas():
    cfg = SimConfig()
    th, f = 0.1, 0.7
    s = step(SimState(x=0.2, x_dot=-0.3, theta=th, theta_dot=0.4), f, cfg)
    sin, cos = math.sin(th), math.cos(th)
    x_dd = (f - 1.0 * sin * (1.0 * 0.4**2 - 9.81 * cos)) / (1.0 + sin * sin)
    th_dd = (x_dd * cos + 9.81 * sin) / 1.0
    assert s.x == pytest.approx(0.2 + 0.01 * -0.3, abs=1e-12)
    assert s.x_dot == pytest.approx(-0.3 + 0.01 * x_dd, abs=1e-12)
    assert s.theta == pytest.approx(th + 0.01 * 0.4, abs=1e-12)
    assert s.theta_dot == pytest.approx(0.4 + 0.01 * th_dd, abs=1e-12)


def test_step_rejects_non_finite():
    with pytest.raises(ValueError):
        step(SimState(theta=math.nan), 0.0, SimConfig())
    with pytest.raises(ValueError):
        step(SimState(), math.inf, SimConfig())


def test_euler_consistency_under_dt_refinement():
    # Free fall from 0.1 rad for one second: halving dt changes theta(1s)
    # by O(dt), so successive refinements converge.
    def theta_at_1s(dt):
        cfg = SimConfig(dt=dt, horizon=2.0)
        s = SimState(theta=0.1)
        for _ in range(round(1.0 / dt)):
            s = step(s, 0.0, cfg)
        return s.theta

    diffs = [
        abs(theta_at_1s(dt) - theta_at_1s(dt / 2))
        for dt in (0.01, 0.005, 0.0025)
    ]
    assert diffs[0] > diffs[1] > diffs[2]
    assert diffs[2] < 0.02


def test_perfect_hold_zero_error():
    g = BitGenome.zeros(FMT, TOP4.layout())
    res = simulate(g, TOP4, 0.0, SimConfig())
    assert res.err == 0.0 and not res.diverged


def test_zero_controller_from_tilt_has_large_error():
    g = BitGenome.zeros(FMT, TOP4.layout())
    res = simulate(g, TOP4, 0.4, SimConfig())
    assert res.err > 0.1


def test_err_sign_flip_symmetry():
    # With all biases zero the controller is an odd function, so the
    # mirrored trajectory (theta, x, F all negated) has identical error.
    rng = np.random.default_rng(0)
    cfg = SimConfig(horizon=20.0)
    for top in (TOP4, TOP2R):
        for _ in range(5):
            g = random_genome(top, rng, zero_biases=True)
            a = simulate(g, top, 0.31, cfg)
            b = simulate(g, top, -0.31, cfg)
            assert a.err == pytest.approx(b.err, abs=1e-12)
            assert a.max_abs_theta == pytest.approx(b.max_abs_theta, abs=1e-12)


def test_controller_arity_validation():
    g = BitGenome.zeros(FMT, Topology((3, 4, 1), ("symmetric-sigmoid", "linear")).layout())
    with pytest.raises(ValueError):
        simulate(g, Topology((3, 4, 1), ("symmetric-sigmoid", "linear")), 0.1,
                 SimConfig())
    with pytest.raises(ValueError):
        simulate(g, Topology((4, 4, 1), ("symmetric-sigmoid", "logistic")), 0.1,
                 SimConfig())


def test_trajectory_recording():
    g = BitGenome.zeros(FMT, TOP4.layout())
    cfg = SimConfig(horizon=2.0)
    res = simulate(g, TOP4, 0.1, cfg, record_trajectory=True)
    assert res.trajectory.shape == (cfg.n_steps, 6)
    t = res.trajectory[:, 0]
    assert t[0] == 0.0
    assert np.allclose(np.diff(t), cfg.dt, atol=1e-9)


def test_batch_kernel_matches_reference():
    rng = np.random.default_rng(1)
    cfg = SimConfig(horizon=5.0)
    theta0s = rng.uniform(-0.4, 0.4, size=8)
    for top in (TOP4, TOP2R):
        for _ in range(3):
            g = random_genome(top, rng)
            errs, div, mt = batch_errors(g, top, theta0s, cfg)
            for n, th0 in enumerate(theta0s):
                ref = simulate(g, top, th0, cfg)
                # The two routes sum the network query in different
                # orders; chaotic trajectories amplify that ulp-level
                # difference, so the comparison is relative.
                assert errs[n] == pytest.approx(ref.err, rel=1e-6, abs=1e-9)
                assert div[n] == ref.diverged
                assert mt[n] == pytest.approx(ref.max_abs_theta, rel=1e-6, abs=1e-9)


def test_finite_limits_truncate_and_fill():
    # With a theta bound, a free-falling pendulum is cut off and charged
    # the worst in-bounds density for the unsimulated remainder; falling
    # later from a smaller tilt costs strictly less.
    g = BitGenome.zeros(FMT, TOP4.layout())
    cfg = SimConfig(horizon=20.0, theta_limit=math.pi, x_limit=100.0)
    near = simulate(g, TOP4, 0.39, cfg)
    far = simulate(g, TOP4, 0.05, cfg)
    assert near.diverged and far.diverged
    assert near.err > far.err
    assert far.err < cfg.sentinel
    # Kernel agrees on the truncated path too.
    errs, div, _ = batch_errors(g, TOP4, np.array([0.39, 0.05]), cfg)
    assert div.all()
    assert errs[0] == pytest.approx(near.err, abs=1e-9)
    assert errs[1] == pytest.approx(far.err, abs=1e-9)


def test_fitness_is_mean_of_errors():
    rng = np.random.default_rng(2)
    g = random_genome(TOP4, rng)
    cfg = SimConfig(horizon=3.0)
    theta0s = np.array([0.1, -0.2, 0.3])
    errs, _, _ = batch_errors(g, TOP4, theta0s, cfg)
    assert fitness(g, TOP4, cfg, theta0s) == pytest.approx(np.mean(errs), abs=1e-12)
    with pytest.raises(ValueError):
        fitness(g, TOP4, cfg, np.array([]))


def test_control_problem_probe_commit_roundtrip():
    rng = np.random.default_rng(3)
    cfg = SimConfig(horizon=2.0)
    prob = ControlProblem(TOP4, cfg, batch_seed=7, n_train=5, n_val=5)
    g = random_genome(TOP4, rng)
    prob.attach(g)
    before = prob.objective()
    codes = g.codes.copy()
    bit = 17
    delta = prob.probe(bit)
    assert np.array_equal(g.codes, codes)  # probe restored the genome
    assert prob.objective() == before
    prob.commit(bit)
    assert prob.objective() == pytest.approx(before + delta, abs=1e-12)
    assert np.isfinite(prob.validation_loss())


def test_control_problem_batches_frozen_and_seeded():
    cfg = SimConfig()
    a = ControlProblem(TOP4, cfg, batch_seed=5)
    b = ControlProblem(TOP4, cfg, batch_seed=5)
    c = ControlProblem(TOP4, cfg, batch_seed=6)
    assert np.array_equal(a.train_theta0, b.train_theta0)
    assert not np.array_equal(a.train_theta0, c.train_theta0)
    assert not np.array_equal(a.train_theta0, a.val_theta0)
    assert np.all(np.abs(a.train_theta0) <= cfg.theta0_range)


def test_validation_batches_resample_deterministically():
    # Each validation call draws a fresh seeded batch (robustness
    # selection); two problems with the same seed draw identical
    # sequences, and resampling can be disabled.
    cfg = SimConfig(horizon=2.0)
    g = BitGenome.zeros(FMT, TOP4.layout())
    a = ControlProblem(TOP4, cfg, batch_seed=5)
    b = ControlProblem(TOP4, cfg, batch_seed=5)
    a.attach(g)
    b.attach(g)
    for _ in range(3):
        assert a.validation_loss() == b.validation_loss()
        assert np.array_equal(a.val_theta0, b.val_theta0)
    first = a.val_theta0.copy()
    a.validation_loss()
    assert not np.array_equal(a.val_theta0, first)
    frozen = ControlProblem(TOP4, cfg, batch_seed=5,
                            resample_validation=False)
    frozen.attach(g)
    kept = frozen.val_theta0.copy()
    frozen.validation_loss()
    assert np.array_equal(frozen.val_theta0, kept)


def test_test_errors_stretches_horizon():
    g = BitGenome.zeros(FMT, TOP4.layout())
    cfg = SimConfig(horizon=2.0)
    errs, div, mt = holdout_errors(g, TOP4, cfg, n=4, seed=1, horizon_factor=10.0)
    assert errs.shape == (4,)
    ref = simulate(g, TOP4,
                   np.random.default_rng(1).uniform(-0.4, 0.4, size=4)[0],
                   SimConfig(horizon=20.0))
    assert errs[0] == pytest.approx(ref.err, abs=1e-9)
