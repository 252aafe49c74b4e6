"""Network topology and the plain (non-incremental) forward pass."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .codec import BitGenome, Layout

TRANSFERS = {
    "symmetric-sigmoid": np.tanh,
    "logistic": lambda x: 1.0 / (1.0 + np.exp(-x)),
    "linear": lambda x: x,
}


@dataclass(frozen=True)
class Topology:
    """Layer sizes plus per-layer transfer tags for the non-input layers."""

    layer_sizes: tuple
    transfer: tuple  # one tag per non-input layer
    recurrent: bool = False

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        object.__setattr__(self, "transfer", tuple(self.transfer))
        if any(s < 1 for s in sizes) or len(sizes) < 2:
            raise ValueError(f"bad layer sizes {sizes}")
        if len(self.transfer) != len(sizes) - 1:
            raise ValueError("need one transfer tag per non-input layer")
        for tag in self.transfer:
            if tag not in TRANSFERS:
                raise ValueError(f"unknown transfer {tag!r}")
        if self.recurrent and len(sizes) != 3:
            raise ValueError("recurrence requires exactly one hidden layer")

    @property
    def n_inputs(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_outputs(self) -> int:
        return self.layer_sizes[-1]

    def layout(self) -> Layout:
        return Layout(self.layer_sizes, recurrent=self.recurrent)

    @classmethod
    def from_arch(cls, arch: str, hidden="symmetric-sigmoid", output="logistic",
                  recurrent=False) -> "Topology":
        """Build from a dash string like \"2-20-20-1\"."""
        sizes = tuple(int(tok) for tok in arch.split("-"))
        transfer = (hidden,) * (len(sizes) - 2) + (output,)
        return cls(sizes, transfer, recurrent=recurrent)


class WeightView:
    """Per-layer weight/bias matrices materialized from a genome.

    Index arrays are built once from the layout; ``refresh`` re-reads all
    values, ``update`` patches the single entry a flip changed.
    """

    def __init__(self, topology: Topology, layout: Layout):
        sizes = topology.layer_sizes
        self.topology = topology
        self.layout = layout
        self.w_idx = []
        self.b_idx = []
        for layer in range(1, len(sizes)):
            wi = np.empty((sizes[layer - 1], sizes[layer]), dtype=np.int64)
            bi = np.empty(sizes[layer], dtype=np.int64)
            for j in range(sizes[layer]):
                for i in range(sizes[layer - 1]):
                    wi[i, j] = layout.index_of(("w", layer, i, j))
                bi[j] = layout.index_of(("b", layer, j))
            self.w_idx.append(wi)
            self.b_idx.append(bi)
        if topology.recurrent:
            nh = sizes[1]
            self.r_idx = np.empty((nh, nh), dtype=np.int64)
            for j in range(nh):
                for k in range(nh):
                    self.r_idx[k, j] = layout.index_of(("r", k, j))
        else:
            self.r_idx = None
        self.W = None
        self.b = None
        self.R = None

    def refresh(self, genome: BitGenome):
        v = genome.values
        self.W = [v[idx] for idx in self.w_idx]
        self.b = [v[idx] for idx in self.b_idx]
        self.R = v[self.r_idx] if self.r_idx is not None else None

    def update(self, coord, value):
        kind = coord[0]
        if kind == "w":
            _, layer, i, j = coord
            self.W[layer - 1][i, j] = value
        elif kind == "b":
            _, layer, j = coord
            self.b[layer - 1][j] = value
        else:
            _, k, j = coord
            self.R[k, j] = value


def weight_matrices(genome: BitGenome, topology: Topology) -> WeightView:
    view = WeightView(topology, genome.layout)
    view.refresh(genome)
    return view


def forward(genome: BitGenome, topology: Topology, x):
    """Full forward pass; returns (outputs, activation record).

    ``x`` may be a single input vector or a (samples, n_inputs) matrix.
    The record is a list of (s, o) pairs, one per non-input layer.
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.shape[1] != topology.n_inputs:
        raise ValueError(
            f"expected {topology.n_inputs} inputs, got {X.shape[1]}"
        )
    view = weight_matrices(genome, topology)
    record = []
    o = X
    for layer in range(len(topology.layer_sizes) - 1):
        s = o @ view.W[layer] + view.b[layer]
        o = TRANSFERS[topology.transfer[layer]](s)
        record.append((s, o))
    out = o[0] if single else o
    return out, record


def forward_recurrent(genome: BitGenome, topology: Topology, x, hidden_state):
    """One step of the recurrent network; returns (output, new hidden state).

    The hidden pre-activation adds the recurrent contribution of the
    previous hidden outputs; start a simulation with an all-zero state.
    """
    if not topology.recurrent:
        raise ValueError("topology is not recurrent")
    x = np.asarray(x, dtype=np.float64)
    h = np.asarray(hidden_state, dtype=np.float64)
    if x.shape != (topology.n_inputs,):
        raise ValueError(f"expected {topology.n_inputs} inputs, got {x.shape}")
    if h.shape != (topology.layer_sizes[1],):
        raise ValueError(f"hidden state must have length {topology.layer_sizes[1]}")
    view = weight_matrices(genome, topology)
    s1 = x @ view.W[0] + h @ view.R + view.b[0]
    o1 = TRANSFERS[topology.transfer[0]](s1)
    s2 = o1 @ view.W[1] + view.b[1]
    o2 = TRANSFERS[topology.transfer[1]](s2)
    return o2, o1
