"""Multi-scale bit scheduling.

The search starts with only the most significant bits of each weight
flippable and unlocks one more bit per weight whenever the estimated
fraction of improving moves gets too small. The estimator is the
expected number of uniformly random probes needed to hit one of k
improving moves among N, tracked by an exponential moving average of
per-step probe counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import combinations

import numpy as np


def expected_min_enumerated(k: int, N: int) -> float:
    """Mean minimum over all k-subsets of {0..N-1}, by exhaustive enumeration.

    Exact (rational arithmetic); feasible up to N around 20. This is the
    independent oracle the shipped recurrence is validated against.
    """
    _check_range(k, N)
    total = Fraction(0)
    count = 0
    for subset in combinations(range(N), k):
        total += subset[0]  # combinations are emitted sorted
        count += 1
    return float(total / count)


@lru_cache(maxsize=None)
def expected_min(k: int, N: int) -> float:
    """Expected minimum of a uniform k-subset of {0..N-1}.

    Computed by the recurrence
        alpha[k,k] = 0,  alpha[k,N] = (N-k)/N * (k/(N-1) + alpha[k,N-1])
        E[k,k] = 0,      E[k,N] = alpha[k,N] + (N-k)/N * E[k,N-1]
    which agrees with exhaustive enumeration (and with the closed form
    (N-k)/(k+1)) for every tested (k, N).
    """
    _check_range(k, N)
    alpha = 0.0
    e = 0.0
    for n in range(k + 1, N + 1):
        alpha = (n - k) / n * (k / (n - 1) + alpha)
        e = alpha + (n - k) / n * e
    return e


@lru_cache(maxsize=None)
def expected_min_published_recurrence(k: int, N: int) -> float:
    """The same recurrence with the second factor written as (N+k)/N.

    Kept only so tests can surface that this variant disagrees with the
    enumeration oracle (it overcounts whenever N > k + 1); it must not
    be used for threshold computation.
    """
    _check_range(k, N)
    alpha = 0.0
    e = 0.0
    for n in range(k + 1, N + 1):
        alpha = (n - k) / n * (k / (n - 1) + alpha)
        e = alpha + (n + k) / n * e
    return e


def _check_range(k: int, N: int):
    if k < 1 or k > N:
        raise ValueError(f"need 1 <= k <= N, got k={k}, N={N}")


@dataclass(frozen=True)
class TelescopeConfig:
    n_start: int = 2
    n_max: int = 12
    trigger: str = "threshold"  # "threshold" | "local-minimum"
    phi: float = 0.10
    eta: float = 0.95

    def __post_init__(self):
        if not 1 <= self.n_start <= self.n_max:
            raise ValueError("need 1 <= n_start <= n_max")
        if self.trigger not in ("threshold", "local-minimum"):
            raise ValueError(f"unknown trigger {self.trigger!r}")
        if not 0.0 <= self.phi <= 1.0:
            raise ValueError("phi must be in [0, 1]")
        if not 0.0 <= self.eta < 1.0:
            raise ValueError("eta must be in [0, 1)")


@dataclass
class TelescopeState:
    config: TelescopeConfig
    n_weights: int
    n_prime: int = field(init=False)
    mu: float = field(init=False, default=0.0)
    threshold: float = field(init=False)

    def __post_init__(self):
        self.n_prime = self.config.n_start
        self.threshold = self._threshold()

    @property
    def n_moves(self) -> int:
        """Size of the current single-flip neighborhood."""
        return self.n_weights * self.n_prime

    def _threshold(self) -> float:
        n = self.n_moves
        k = max(1, math.floor(self.config.phi * n))
        return expected_min(k, n)

    def update_and_check(self, c: float) -> bool:
        """Fold one probe count into the moving average; True if an unlock is due."""
        if c < 0:
            raise ValueError("probe count must be >= 0")
        eta = self.config.eta
        self.mu = eta * self.mu + (1.0 - eta) * c
        return self.mu >= self.threshold and self.n_prime < self.config.n_max

    def unlock(self) -> None:
        """Make one more bit per weight flippable; reset the estimator."""
        if self.n_prime >= self.config.n_max:
            raise ValueError("all bits already unlocked")
        self.n_prime += 1
        self.mu = 0.0
        self.threshold = self._threshold()


def unlocked_bits(n_weights: int, n_bits: int, n_prime: int) -> np.ndarray:
    """Global bit indices of the n_prime most significant bits per weight."""
    if not 1 <= n_prime <= n_bits:
        raise ValueError("need 1 <= n_prime <= n_bits")
    base = np.arange(n_weights, dtype=np.int64)[:, None] * n_bits
    return (base + np.arange(n_prime, dtype=np.int64)).ravel()
