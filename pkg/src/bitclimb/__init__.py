"""Derivative-free neural network training by bit-flip local search.

Weights live on a discretized grid, each encoded as a Gray-coded bit
group, and training is a stochastic local search over single-bit flips
with incremental loss evaluation and an adaptive multi-scale schedule
that gradually unlocks less significant bits.
"""

from .codec import BitGenome, WeightFormat, gray_decode, gray_encode
from .net import Topology, forward, forward_recurrent

__all__ = [
    "BitGenome",
    "WeightFormat",
    "Topology",
    "forward",
    "forward_recurrent",
    "gray_decode",
    "gray_encode",
]
