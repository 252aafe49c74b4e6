"""Cart-pole simulator and closed-loop control fitness.

The cart (mass M) slides along x under an applied force F; a point mass
m on a massless rod of length l must be kept upright. Dynamics:

    x_dd     = (F - m sin(th) (l th_d^2 - g cos(th))) / (M + m sin(th)^2)
    theta_dd = (x_dd cos(th) + g sin(th)) / l

integrated with first-order Euler steps. The controller network is
queried every ``hold`` steps and its (linear) output is applied as the
force until the next query. Fitness is the time-averaged theta^2 +
lam * x^2 over [t_min, T).

By default a falling pendulum is integrated through: theta is not
wrapped, so a pole that overturns or spins keeps contributing theta^2
and the error of a failed controller stays finite and informative.
Divergence therefore means numerical blowup (non-finite state),
reported as a large sentinel with a flag. This unmodified-dynamics
configuration is the right one for held-out evaluation.

For *training*, finite ``theta_limit`` / ``x_limit`` bounds work
better: a trajectory crossing them stops integrating and its remaining
error window (plus any unsurvived pre-window steps) is charged the
worst in-bounds integrand, so surviving longer always scores better
and probes of hopeless candidates cost only the few simulated seconds
until the fall. Without the caps, local search is usually captured by
the hanging-pendulum attractor (theta near pi, error near pi^2).

Two evaluation paths exist on purpose: a plain-Python reference
(:func:`step` / :func:`simulate`) used for trajectory dumps and as the
oracle in tests, and a fused batch kernel (numba-compiled when
available) used by the search, which must agree with the reference to
tight tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .codec import BitGenome
from .net import Topology, weight_matrices

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        return wrap


@dataclass(frozen=True)
class SimConfig:
    cart_mass: float = 1.0
    pole_mass: float = 1.0
    length: float = 1.0
    gravity: float = 9.81
    dt: float = 0.01
    horizon: float = 100.0
    hold: int = 10
    t_min: float = 1.0
    lam: float = 0.01  # cart-position weight in the error functional
    theta0_range: float = 0.4
    theta_limit: float = math.inf
    x_limit: float = math.inf
    sentinel: float = 1e6  # reported error for numerically blown-up runs

    def __post_init__(self):
        if min(self.cart_mass, self.pole_mass, self.length, self.dt) <= 0:
            raise ValueError("masses, length, and dt must be positive")
        if not 0 <= self.t_min < self.horizon:
            raise ValueError("need 0 <= t_min < horizon")
        if self.hold < 1:
            raise ValueError("hold must be >= 1")

    @property
    def n_steps(self) -> int:
        return round(self.horizon / self.dt)

    @property
    def t_min_steps(self) -> int:
        return round(self.t_min / self.dt)

    @property
    def divergence_density(self) -> float:
        """Per-step integrand charged for the unsimulated tail of a truncated run.

        Infinite when no finite bounds are configured; the sentinel cap
        then turns any truncated run's error into the sentinel itself.
        """
        return self.theta_limit**2 + self.lam * self.x_limit**2


@dataclass
class SimState:
    x: float = 0.0
    x_dot: float = 0.0
    theta: float = 0.0
    theta_dot: float = 0.0
    t: float = 0.0

    def is_finite(self) -> bool:
        return all(map(math.isfinite, (self.x, self.x_dot, self.theta, self.theta_dot)))


def step(state: SimState, force: float, config: SimConfig) -> SimState:
    """One Euler step of the dynamics under constant applied force."""
    if not (state.is_finite() and math.isfinite(force)):
        raise ValueError("non-finite state or force")
    sin, cos = math.sin(state.theta), math.cos(state.theta)
    m, M, l, g = config.pole_mass, config.cart_mass, config.length, config.gravity
    x_dd = (force - m * sin * (l * state.theta_dot**2 - g * cos)) / (M + m * sin * sin)
    theta_dd = (x_dd * cos + g * sin) / l
    dt = config.dt
    return SimState(
        x=state.x + dt * state.x_dot,
        x_dot=state.x_dot + dt * x_dd,
        theta=state.theta + dt * state.theta_dot,
        theta_dot=state.theta_dot + dt * theta_dd,
        t=state.t + dt,
    )


@dataclass
class SimResult:
    err: float
    diverged: bool
    max_abs_theta: float
    trajectory: np.ndarray | None = None  # rows of (t, x, x_dot, theta, theta_dot, F)


def _check_controller(topology: Topology):
    if len(topology.layer_sizes) != 3:
        raise ValueError("controller must have exactly one hidden layer")
    if topology.transfer != ("symmetric-sigmoid", "linear"):
        raise ValueError("controller needs tanh hidden and linear output")
    if topology.n_inputs not in (2, 4) or topology.n_outputs != 1:
        raise ValueError("controller takes (x, theta[, x_dot, theta_dot]) -> force")


def simulate(genome: BitGenome, topology: Topology, theta0: float,
             config: SimConfig, record_trajectory: bool = False) -> SimResult:
    """Reference closed-loop simulation of a single initial condition.

    Complete feedback (4 inputs) feeds (x, theta, x_dot, theta_dot);
    derivative-free feedback (2 inputs) feeds only (x, theta), and a
    recurrent hidden layer carries state across queries.
    """
    _check_controller(topology)
    view = weight_matrices(genome, topology)
    state = SimState(theta=float(theta0))
    hidden = np.zeros(topology.layer_sizes[1])
    force = 0.0
    acc = 0.0
    n_acc = 0
    max_theta = abs(state.theta)
    diverged = False
    rows = [] if record_trajectory else None
    for i in range(config.n_steps):
        if i % config.hold == 0:
            if topology.n_inputs == 4:
                inp = np.array([state.x, state.theta, state.x_dot, state.theta_dot])
            else:
                inp = np.array([state.x, state.theta])
            s1 = inp @ view.W[0] + view.b[0]
            if topology.recurrent:
                s1 = s1 + hidden @ view.R
            o1 = np.tanh(s1)
            if topology.recurrent:
                hidden = o1
            force = float((o1 @ view.W[1] + view.b[1])[0])
        if rows is not None:
            rows.append((state.t, state.x, state.x_dot, state.theta,
                         state.theta_dot, force))
        if i >= config.t_min_steps:
            acc += state.theta**2 + config.lam * state.x**2
            n_acc += 1
        state = step(state, force, config)
        max_theta = max(max_theta, abs(state.theta))
        if (not state.is_finite()
                or abs(state.theta) > config.theta_limit
                or abs(state.x) > config.x_limit):
            diverged = True
            survived = i + 1
            break
    else:
        survived = config.n_steps
    n_total = config.n_steps - config.t_min_steps
    short = max(0, config.t_min_steps - survived)
    miss = n_total - n_acc + short
    err = (acc + config.divergence_density * miss if miss else acc) / n_total
    err = min(err, config.sentinel)
    traj = np.array(rows) if rows is not None else None
    return SimResult(err, diverged, max_theta, traj)


def _batch_err_impl(theta0s, W1, b1, R, W2, b2, recurrent, n_inputs,
                    M, m, l, g, dt, n_steps, hold, t_min_steps, lam,
                    theta_limit, x_limit, sentinel, div_density,
                    abort_above):
    n_sims = theta0s.shape[0]
    nh = b1.shape[0]
    errs = np.zeros(n_sims)
    diverged = np.zeros(n_sims, np.bool_)
    max_theta = np.zeros(n_sims)
    running = 0.0
    for sim in range(n_sims):
        if running > abort_above:
            # The error sum can only grow; a caller that just compares
            # against an incumbent total can stop early. Remaining sims
            # keep zero error, so the returned sum is a lower bound.
            break
        x = 0.0
        xd = 0.0
        th = theta0s[sim]
        thd = 0.0
        h = np.zeros(nh)
        force = 0.0
        acc = 0.0
        n_acc = 0
        mt = abs(th)
        div = False
        survived = n_steps
        for i in range(n_steps):
            if i % hold == 0:
                s1 = np.empty(nh)
                for j in range(nh):
                    v = b1[j] + W1[0, j] * x + W1[1, j] * th
                    if n_inputs == 4:
                        v += W1[2, j] * xd + W1[3, j] * thd
                    if recurrent:
                        for k in range(nh):
                            v += R[k, j] * h[k]
                    s1[j] = math.tanh(v)
                if recurrent:
                    h = s1
                force = b2[0]
                for j in range(nh):
                    force += W2[j, 0] * s1[j]
            if i >= t_min_steps:
                acc += th * th + lam * x * x
                n_acc += 1
            sin = math.sin(th)
            cos = math.cos(th)
            xdd = (force - m * sin * (l * thd * thd - g * cos)) / (M + m * sin * sin)
            thdd = (xdd * cos + g * sin) / l
            x += dt * xd
            xd += dt * xdd
            th += dt * thd
            thd += dt * thdd
            if abs(th) > mt:
                mt = abs(th)
            if (not (math.isfinite(th) and math.isfinite(x)
                     and math.isfinite(thd) and math.isfinite(xd))
                    or abs(th) > theta_limit or abs(x) > x_limit):
                div = True
                survived = i + 1
                break
        n_total = n_steps - t_min_steps
        short = max(0, t_min_steps - survived)
        miss = n_total - n_acc + short
        err = (acc + div_density * miss if miss > 0 else acc) / n_total
        errs[sim] = min(err, sentinel)
        diverged[sim] = div
        max_theta[sim] = mt
        running += errs[sim]
    return errs, diverged, max_theta


_batch_err = njit(cache=True)(_batch_err_impl) if _HAVE_NUMBA else _batch_err_impl


def batch_errors(genome: BitGenome, topology: Topology, theta0s,
                 config: SimConfig, abort_above: float = math.inf):
    """Errs, divergence flags, and max |theta| for a batch of theta0 values.

    If the running error sum exceeds ``abort_above``, evaluation stops
    and the remaining entries stay zero: the sum of the returned errors
    is then a lower bound that already proves no improvement.
    """
    _check_controller(topology)
    view = weight_matrices(genome, topology)
    nh = topology.layer_sizes[1]
    R = view.R if view.R is not None else np.zeros((nh, nh))
    theta0s = np.ascontiguousarray(theta0s, dtype=np.float64)
    return _batch_err(
        theta0s, np.ascontiguousarray(view.W[0]), np.ascontiguousarray(view.b[0]),
        np.ascontiguousarray(R), np.ascontiguousarray(view.W[1]),
        np.ascontiguousarray(view.b[1]), topology.recurrent, topology.n_inputs,
        config.cart_mass, config.pole_mass, config.length, config.gravity,
        config.dt, config.n_steps, config.hold, config.t_min_steps, config.lam,
        config.theta_limit, config.x_limit, config.sentinel,
        config.divergence_density, abort_above,
    )


def fitness(genome: BitGenome, topology: Topology, config: SimConfig,
            theta0s) -> float:
    """Mean Err over a batch of initial pendulum angles."""
    theta0s = np.asarray(theta0s, dtype=np.float64)
    if theta0s.size == 0:
        raise ValueError("batch of initial conditions is empty")
    errs, _, _ = batch_errors(genome, topology, theta0s, config)
    return float(np.mean(errs))


class ControlProblem:
    """Closed-loop control fitness for the search loop.

    The training batch of initial angles is drawn once from a seeded
    generator and frozen, so every probe compares against the same
    instances. Validation draws a *fresh* seeded batch per call
    (``resample_validation=False`` freezes it instead): a genome only
    keeps the best-validation title by scoring well across many
    independent initial-condition draws, which selects controllers that
    are robust rather than tuned to one batch. Every probe runs full
    simulations; the incremental cache does not apply to closed-loop
    trajectories.
    """

    def __init__(self, topology: Topology, config: SimConfig,
                 batch_seed: int = 0, n_train: int = 50, n_val: int = 50,
                 resample_validation: bool = True):
        _check_controller(topology)
        self.topology = topology
        self.config = config
        rng = np.random.default_rng(batch_seed)
        r = config.theta0_range
        self.train_theta0 = rng.uniform(-r, r, size=n_train)
        self.n_val = n_val
        self.resample_validation = resample_validation
        self._val_rng = np.random.default_rng((batch_seed, 0x5eed))
        self.val_theta0 = self._val_rng.uniform(-r, r, size=n_val)
        self.genome: BitGenome | None = None
        self._current = math.inf

    def attach(self, genome: BitGenome) -> None:
        self.genome = genome
        self._current = fitness(genome, self.topology, self.config,
                                self.train_theta0)

    def objective(self) -> float:
        return self._current

    def probe(self, bit_index: int) -> float:
        from .codec import flip_bit

        flip_bit(self.genome, bit_index)
        try:
            # Abort once the candidate's error sum provably exceeds the
            # incumbent's: the returned delta is then a positive lower
            # bound, which is all a strict-improvement test needs.
            budget = self._current * len(self.train_theta0)
            errs, _, _ = batch_errors(self.genome, self.topology,
                                      self.train_theta0, self.config,
                                      abort_above=budget)
            candidate = float(np.sum(errs)) / len(self.train_theta0)
        finally:
            flip_bit(self.genome, bit_index)
        return candidate - self._current

    def commit(self, bit_index: int) -> None:
        from .codec import flip_bit

        flip_bit(self.genome, bit_index)
        self._current = fitness(self.genome, self.topology, self.config,
                                self.train_theta0)

    def validation_loss(self) -> float:
        if self.resample_validation:
            r = self.config.theta0_range
            self.val_theta0 = self._val_rng.uniform(-r, r, size=self.n_val)
        return fitness(self.genome, self.topology, self.config, self.val_theta0)


def holdout_errors(genome: BitGenome, topology: Topology, config: SimConfig,
                n: int = 50, seed: int = 12345, horizon_factor: float = 10.0):
    """Fresh-batch evaluation at a stretched horizon (test protocol)."""
    test_config = replace(config, horizon=config.horizon * horizon_factor)
    rng = np.random.default_rng(seed)
    theta0s = rng.uniform(-config.theta0_range, config.theta0_range, size=n)
    return batch_errors(genome, topology, theta0s, test_config)
