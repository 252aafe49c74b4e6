"""The local-search engine.

A run repeatedly probes single-bit flips of the genome, commits the
first (or best) strictly improving one, and stops, restarts, or unlocks
finer bits when no flip improves. All randomness flows through one
seeded numpy Generator (PCG64), so identical (seed, config, data) give
identical accepted-move sequences.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Protocol

import numpy as np

from .codec import BitGenome, WeightFormat
from .net import Topology, forward
from .objective import LossSpec, classification_accuracy, loss_from_aggregate, sample_contributions
from . import evalcache
from .telescope import TelescopeConfig, TelescopeState, unlocked_bits

# Deltas this close to zero are treated as ties and rejected; keeps the
# accepted-loss sequence strictly decreasing despite fp reassociation.
IMPROVEMENT_TOL = 1e-12


@dataclass(frozen=True)
class SearchConfig:
    strategy: str = "first-improving"  # "first-improving" | "best-move"
    restart: str = "none"  # "none" | "repeated"
    sparsity: str = "off"  # "off" | "prefer-nonzero"
    init: str = "bounded-random"  # "full-random" | "bounded-random" | "telescopic-grid"
    w_init: float = 0.001
    seed: int = 0
    max_seconds: Optional[float] = None
    max_moves: Optional[int] = None
    validate_every: int = 100

    def __post_init__(self):
        if self.strategy not in ("first-improving", "best-move"):
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.restart not in ("none", "repeated"):
            raise ValueError(f"unknown restart mode {self.restart!r}")
        if self.sparsity not in ("off", "prefer-nonzero"):
            raise ValueError(f"unknown sparsity mode {self.sparsity!r}")
        if self.init not in ("full-random", "bounded-random", "telescopic-grid"):
            raise ValueError(f"unknown init {self.init!r}")
        if self.max_seconds is not None and self.max_seconds <= 0:
            raise ValueError("max_seconds must be positive")
        if self.max_moves is not None and self.max_moves <= 0:
            raise ValueError("max_moves must be positive")
        if self.validate_every < 1:
            raise ValueError("validate_every must be >= 1")


class FitnessProblem(Protocol):
    """What a training task must expose to the search loop."""

    def attach(self, genome: BitGenome) -> None: ...
    def objective(self) -> float: ...
    def probe(self, bit_index: int) -> float: ...
    def commit(self, bit_index: int) -> None: ...
    def validation_loss(self) -> float: ...


class DatasetProblem:
    """Static-sample fitness backed by the incremental evaluation cache."""

    def __init__(self, topology: Topology, loss_spec: LossSpec,
                 train: tuple, validation: Optional[tuple] = None):
        self.topology = topology
        self.loss_spec = loss_spec
        self.train = train
        self.validation = validation
        self.genome: Optional[BitGenome] = None
        self.cache = None

    def attach(self, genome: BitGenome) -> None:
        self.genome = genome
        self.cache = evalcache.build_cache(genome, self.topology, self.train,
                                           self.loss_spec)

    def objective(self) -> float:
        return self.cache.objective()

    def probe(self, bit_index: int) -> float:
        return evalcache.probe_move(self.cache, self.genome, bit_index)

    def commit(self, bit_index: int) -> None:
        evalcache.commit_move(self.cache, self.genome, bit_index)

    def validation_loss(self) -> float:
        if self.validation is None:
            return self.cache.data_loss()
        Xv, Yv = self.validation
        Yv = np.asarray(Yv, dtype=np.float64)
        if Yv.ndim == 1:
            Yv = Yv[:, None]
        pred, _ = forward(self.genome, self.topology, Xv)
        contrib = sample_contributions(pred, Yv, self.loss_spec.kind)
        return loss_from_aggregate(float(np.sum(contrib)), Xv.shape[0],
                                   pred.shape[1], self.loss_spec.kind)

    def train_accuracy(self) -> float:
        return classification_accuracy(self.cache.predictions(), self.cache.Y)


@dataclass
class RunTrace:
    """Everything a run records: per-validation events plus move history."""

    records: list = field(default_factory=list)
    # each record: (wall seconds, accepted moves, n_prime, train loss,
    #               validation loss, mean explored fraction since last event)
    accepted_losses: list = field(default_factory=list)
    accepted_bits: list = field(default_factory=list)
    unlock_events: list = field(default_factory=list)  # (seconds, moves, n_prime)
    restarts: int = 0
    total_probes: int = 0
    best_val_loss: float = float("inf")
    best_genome: Optional[BitGenome] = None
    best_at_move: int = -1
    stopped_by: str = "local-minimum"


def initialize(topology: Topology, fmt: WeightFormat, config: SearchConfig,
               rng: np.random.Generator, n_prime: Optional[int] = None) -> BitGenome:
    """Draw an initial genome per the configured strategy."""
    layout = topology.layout()
    n = fmt.n_bits
    eps = fmt.epsilon
    if config.init == "full-random":
        codes = rng.integers(0, 2**n, size=layout.n_weights)
        from .codec import gray_decode
        h = np.array([gray_decode(int(c), n) for c in codes], dtype=np.int64)
    elif config.init == "bounded-random":
        w = rng.uniform(-config.w_init, config.w_init, size=layout.n_weights)
        h = np.clip(np.rint(w / eps), fmt.h_min, fmt.h_max).astype(np.int64)
        # A nonzero draw never rounds to zero: the all-zero genome is a
        # strict local minimum of the flip neighborhood (a hidden-weight
        # change cannot reach the output through zero output weights),
        # so tiny init ranges keep the smallest representable magnitude.
        h = np.where((h == 0) & (w != 0), np.sign(w).astype(np.int64), h)
    else:  # telescopic-grid
        n_prime = n_prime if n_prime is not None else n
        step = 2 ** (n - n_prime)
        grid = step * eps
        m_max = int(config.w_init / grid)
        if m_max < 1:
            raise ValueError(
                f"w_init {config.w_init} below the coarse grid step {grid}"
            )
        m_lo = max(-m_max, fmt.h_min // step)
        m_hi = min(m_max, fmt.h_max // step)
        h = step * rng.integers(m_lo, m_hi + 1, size=layout.n_weights)
    if config.sparsity == "prefer-nonzero":
        h = np.where(rng.random(layout.n_weights) < 0.5, 0, h)
    return BitGenome.from_multipliers(fmt, layout, h)


def explore_first_improving(problem, bits: np.ndarray, rng: np.random.Generator):
    """Probe ``bits`` in a fresh random order; return (move, probes spent).

    The move is the first strictly improving flip, or None after
    exhausting the whole set (local minimum); probes spent includes the
    successful probe.
    """
    order = rng.permutation(bits)
    for c, bit in enumerate(order, start=1):
        if problem.probe(int(bit)) < -IMPROVEMENT_TOL:
            return int(bit), c
    return None, len(order)


def explore_best(problem, bits: np.ndarray, rng: np.random.Generator):
    """Probe every bit; return the one with maximal decrease (random ties)."""
    deltas = np.array([problem.probe(int(b)) for b in bits])
    best = deltas.min()
    if best >= -IMPROVEMENT_TOL:
        return None, len(bits)
    ties = np.flatnonzero(deltas == best)
    pick = ties[rng.integers(len(ties))] if len(ties) > 1 else ties[0]
    return int(bits[pick]), len(bits)


def _explore(problem, genome, bits, config, rng):
    """One exploration step honoring strategy and sparsity ordering."""
    if config.sparsity == "prefer-nonzero":
        nonzero = genome.mult[bits // genome.format.n_bits] != 0
        groups = [bits[nonzero], bits[~nonzero]]
    else:
        groups = [bits]
    fn = explore_first_improving if config.strategy == "first-improving" else explore_best
    total_c = 0
    for group in groups:
        if len(group) == 0:
            continue
        move, c = fn(problem, group, rng)
        total_c += c
        if move is not None:
            return move, total_c
    return None, total_c


def run(topology: Topology, fmt: WeightFormat, problem, config: SearchConfig,
        telescope: Optional[TelescopeConfig] = None,
        stop_when: Optional[Callable] = None) -> RunTrace:
    """Execute a full training session; returns the recorded trace.

    ``stop_when(trace, problem)`` is consulted at every validation event
    and may end the run early (used for accuracy/error targets).
    """
    rng = np.random.default_rng(config.seed)
    trace = RunTrace()
    layout = topology.layout()
    n_bits = fmt.n_bits
    if telescope is not None and telescope.n_max != n_bits:
        raise ValueError("telescope n_max must equal the weight bit count")

    def fresh_start():
        n_prime = telescope.n_start if telescope is not None else None
        genome = initialize(topology, fmt, config, rng, n_prime=n_prime)
        problem.attach(genome)
        state = TelescopeState(telescope, layout.n_weights) if telescope else None
        if state is not None:
            bits = unlocked_bits(layout.n_weights, n_bits, state.n_prime)
        else:
            bits = np.arange(genome.n_bits_total, dtype=np.int64)
        return genome, state, bits

    genome, tele, bits = fresh_start()
    t0 = time.monotonic()
    moves = 0
    fracs = []

    def n_prime_now():
        return tele.n_prime if tele is not None else n_bits

    def record_event():
        val = problem.validation_loss()
        mean_frac = float(np.mean(fracs)) if fracs else 0.0
        trace.records.append((time.monotonic() - t0, moves, n_prime_now(),
                              problem.objective(), val, mean_frac))
        fracs.clear()
        if val < trace.best_val_loss:
            trace.best_val_loss = val
            trace.best_genome = genome.copy()
            trace.best_at_move = moves
        return stop_when is not None and stop_when(trace, problem)

    while True:
        if config.max_seconds is not None and time.monotonic() - t0 >= config.max_seconds:
            trace.stopped_by = "budget"
            break
        if config.max_moves is not None and moves >= config.max_moves:
            trace.stopped_by = "budget"
            break
        move, c = _explore(problem, genome, bits, config, rng)
        trace.total_probes += c
        if move is None:
            # Local minimum for the current neighborhood: exhaustion
            # bypasses the moving average and forces an unlock.
            if tele is not None and tele.n_prime < tele.config.n_max:
                tele.unlock()
                bits = unlocked_bits(layout.n_weights, n_bits, tele.n_prime)
                trace.unlock_events.append((time.monotonic() - t0, moves, tele.n_prime))
                continue
            if config.restart == "repeated":
                genome, tele, bits = fresh_start()
                trace.restarts += 1
                continue
            trace.stopped_by = "local-minimum"
            break
        problem.commit(move)
        moves += 1
        trace.accepted_bits.append(move)
        trace.accepted_losses.append(problem.objective())
        fracs.append(c / len(bits))
        if tele is not None and tele.config.trigger == "threshold":
            if tele.update_and_check(max(c - 1, 0)):
                tele.unlock()
                bits = unlocked_bits(layout.n_weights, n_bits, tele.n_prime)
                trace.unlock_events.append((time.monotonic() - t0, moves, tele.n_prime))
        if moves % config.validate_every == 0:
            if record_event():
                trace.stopped_by = "callback"
                break
    if not trace.records or trace.records[-1][1] != moves:
        record_event()
    return trace
