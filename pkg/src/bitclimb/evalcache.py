"""Memory-based incremental neighborhood evaluation.

Stores pre-activations and outputs for every neuron and every sample, so
the loss of a single-weight change can be obtained by recomputing only
the affected slice of the network instead of a full forward pass. Probes
never mutate; commits flip the genome bit and patch the cache in place.

Only static per-sample fitness (datasets) is evaluated incrementally;
closed-loop simulation fitness bypasses this module entirely, because a
single weight change perturbs the whole trajectory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .codec import BitGenome, flip_bit
from .net import TRANSFERS, Topology, WeightView, weight_matrices
from .objective import (
    LossSpec,
    loss_from_aggregate,
    sample_contributions,
)


@dataclass
class ActivationCache:
    topology: Topology
    loss_spec: LossSpec
    X: np.ndarray
    Y: np.ndarray
    view: WeightView
    S: list = field(default_factory=list)
    O: list = field(default_factory=list)
    contrib: np.ndarray | None = None  # per-sample summed loss contribution
    agg: float = 0.0
    reg_sum: float = 0.0  # sum of (w / w_max)^2 over all weights
    n_weights: int = 0
    last_probe_neurons: int = 0  # neuron columns recomputed by the last probe

    @property
    def n_samples(self) -> int:
        return self.X.shape[0]

    def data_loss(self) -> float:
        return loss_from_aggregate(
            self.agg, self.n_samples, self.Y.shape[1], self.loss_spec.kind
        )

    def objective(self) -> float:
        reg = self.loss_spec.reg_coeff * self.reg_sum / self.n_weights
        return self.data_loss() + reg

    def predictions(self) -> np.ndarray:
        return self.O[-1]


def build_cache(genome: BitGenome, topology: Topology,
                samples: tuple, loss_spec: LossSpec) -> ActivationCache:
    """Full forward pass over ``samples = (X, Y)``; returns a consistent cache."""
    X = np.asarray(samples[0], dtype=np.float64)
    Y = np.asarray(samples[1], dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    if X.shape[0] == 0:
        raise ValueError("sample set is empty")
    if X.shape[1] != topology.n_inputs or Y.shape[1] != topology.n_outputs:
        raise ValueError("sample dimensions do not match the topology")
    if topology.recurrent:
        raise ValueError("incremental evaluation applies to feed-forward nets only")
    cache = ActivationCache(
        topology, loss_spec, X, Y, weight_matrices(genome, topology)
    )
    cache.n_weights = genome.layout.n_weights
    _rebuild(cache, genome)
    return cache


def _rebuild(cache: ActivationCache, genome: BitGenome):
    cache.view.refresh(genome)
    cache.S, cache.O = [], []
    o = cache.X
    for layer, tag in enumerate(cache.topology.transfer):
        s = o @ cache.view.W[layer] + cache.view.b[layer]
        o = TRANSFERS[tag](s)
        cache.S.append(s)
        cache.O.append(o)
    cache.contrib = sample_contributions(cache.O[-1], cache.Y, cache.loss_spec.kind)
    cache.agg = math.fsum(cache.contrib)
    w = genome.values / genome.format.w_max
    cache.reg_sum = float(np.dot(w, w))


def _propagate(cache: ActivationCache, genome: BitGenome, bit_index: int):
    """Shared probe/commit computation for one flipped bit.

    Returns (coord, new_value, first affected layer index, new column
    (s, o) at that layer, list of recomputed (s, o) for later layers,
    per-sample contribution delta restricted to the affected outputs).
    """
    coord, new_value = genome.peek_flip(bit_index)
    widx = genome.layout.index_of(coord)
    dv = new_value - genome.values[widx]
    kind = coord[0]
    if kind == "w":
        _, layer, i, j = coord
        o_prev = cache.X if layer == 1 else cache.O[layer - 2]
        d_s = dv * o_prev[:, i]
    elif kind == "b":
        _, layer, j = coord
        d_s = dv
    else:
        raise ValueError("recurrent weights have no incremental evaluation")
    L = layer - 1  # 0-based index into cache.S / cache.O
    last = len(cache.S) - 1
    tags = cache.topology.transfer
    s_col = cache.S[L][:, j] + d_s
    o_col = TRANSFERS[tags[L]](s_col)
    neurons = 1
    if L == last:
        # Only output j changes: O(1) work per sample.
        new_rows = sample_contributions(o_col[:, None], cache.Y[:, j : j + 1],
                                        cache.loss_spec.kind)
        old_rows = sample_contributions(cache.O[L][:, j : j + 1],
                                        cache.Y[:, j : j + 1],
                                        cache.loss_spec.kind)
        d_contrib = new_rows - old_rows
        tail = []
    else:
        d_o = o_col - cache.O[L][:, j]
        s_next = cache.S[L + 1] + np.outer(d_o, cache.view.W[L + 1][j, :])
        o_next = TRANSFERS[tags[L + 1]](s_next)
        tail = [(s_next, o_next)]
        neurons += s_next.shape[1]
        o = o_next
        for layer2 in range(L + 2, last + 1):
            s = o @ cache.view.W[layer2] + cache.view.b[layer2]
            o = TRANSFERS[tags[layer2]](s)
            tail.append((s, o))
            neurons += s.shape[1]
        new_contrib = sample_contributions(o, cache.Y, cache.loss_spec.kind)
        d_contrib = new_contrib - cache.contrib
    cache.last_probe_neurons = neurons
    return coord, new_value, widx, L, (s_col, o_col), tail, d_contrib


def probe_move(cache: ActivationCache, genome: BitGenome, bit_index: int) -> float:
    """Objective delta the flip would cause; cache and genome untouched."""
    coord, new_value, widx, _, _, _, d_contrib = _propagate(cache, genome, bit_index)
    new_agg = cache.agg + math.fsum(d_contrib)
    old_obj = cache.objective()
    w_max = genome.format.w_max
    old_w, new_w = genome.values[widx] / w_max, new_value / w_max
    new_reg_sum = cache.reg_sum - old_w * old_w + new_w * new_w
    new_obj = (
        loss_from_aggregate(new_agg, cache.n_samples, cache.Y.shape[1],
                            cache.loss_spec.kind)
        + cache.loss_spec.reg_coeff * new_reg_sum / cache.n_weights
    )
    return new_obj - old_obj


def commit_move(cache: ActivationCache, genome: BitGenome, bit_index: int) -> None:
    """Apply the flip to the genome and patch the cache to the new state."""
    coord, new_value, widx, L, (s_col, o_col), tail, d_contrib = _propagate(
        cache, genome, bit_index
    )
    w_max = genome.format.w_max
    old_w, new_w = genome.values[widx] / w_max, new_value / w_max
    cache.reg_sum += new_w * new_w - old_w * old_w
    flip_bit(genome, bit_index)
    cache.view.update(coord, new_value)
    j = coord[3] if coord[0] == "w" else coord[2]
    cache.S[L][:, j] = s_col
    cache.O[L][:, j] = o_col
    for offset, (s, o) in enumerate(tail, start=L + 1):
        cache.S[offset] = s
        cache.O[offset] = o
    cache.contrib = cache.contrib + d_contrib
    cache.agg = math.fsum(cache.contrib)


def rebuild_cache(cache: ActivationCache, genome: BitGenome) -> None:
    """Recompute everything from scratch (restart, or consistency checks)."""
    _rebuild(cache, genome)
