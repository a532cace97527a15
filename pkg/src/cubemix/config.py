"""Centralized tolerances and practical constants.

The worst-case thresholds in the analysis (k^{-O(k^2)} spans, k^{-O(k^3)}
sampling rates) underflow doubles long before they bind, so every learner
takes its working constants from a single :class:`LearnConfig` record with
desk-scale defaults.  Correctness is guarded by the final moment-verification
step rather than by the astronomically conservative constants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import CubemixError


class ToleranceError(CubemixError):
    """A configured tolerance or threshold is out of range."""


def moment_degree_cap(k: int) -> int:
    """Row-degree cap for span tests: ceil(2*log2(2k)), at least 2."""
    if k < 1:
        raise ToleranceError(f"component count must be >= 1, got {k}")
    return max(2, math.ceil(2.0 * math.log2(2.0 * k)))


def subset_budget_degree(k: int) -> int:
    """Degree s(k) = 2k + 1 + k(k-1)/2 used by the product-mixture row sets."""
    if k < 0:
        raise ToleranceError(f"negative degree index {k}")
    return 2 * k + 1 + (k * (k - 1)) // 2


@dataclass(frozen=True)
class LearnConfig:
    """Knobs shared by the subcube and product learners and the tree driver.

    Any ``None`` field is derived from ``epsilon`` and the component count at
    the point of use; the formulas are given in each accessor.
    """

    epsilon: float = 0.1
    # InSpan residual threshold: max(floor, mult * oracle.tolerance * k).
    # The declared Fact-style tolerance is conservative; mult = 2 keeps the
    # half-threshold k * tolerance above in-span noise residuals while
    # staying under the out-of-span gaps of non-degenerate instances.
    inspan_floor: float = 1e-6
    inspan_tolerance_mult: float = 2.0
    # Weight-gap truncation: ratio between consecutive sorted weights plus a
    # floor upsilon (default epsilon / (20k)).
    gap_ratio: float = 100.0
    weight_floor: float | None = None
    # Window sweep [rho*tau, tau], ..., [rho^{k+1} tau, rho^k tau].
    window_tau: float | None = None
    window_rho: float = 0.01
    # Candidate mixture accepted when all moments of degree <= cap match the
    # oracle within this threshold (default 0.5 * epsilon / k).
    verify_threshold: float | None = None
    # "smallest" follows the prose gap rule; "largest" follows the pseudocode.
    rprime_rule: str = "smallest"
    # Last-resort conditioning on an arbitrary coordinate when no witness and
    # no verified mixture exist (exact-oracle step 6 analogue); off by default.
    last_resort_pad: bool = False
    # Enumeration guards.
    max_guesses: int = 250_000
    max_condition_sets: int = 8
    max_candidates: int = 10_000
    max_regression_rows: int = 5_000
    # Brute-force enumeration cap (2^n tables).
    bruteforce_cap: int = 20
    # Sampling-tree driver.
    min_conditioned_samples: int = 64
    node_sample_count: int = 200_000
    tau_trunc: float | None = None
    select_epsilon: float | None = None
    scheffe_max_pairwise: int = 4096
    # Empirical-oracle confidence for the Fact-style tolerance declaration.
    oracle_confidence: float = 0.02

    def __post_init__(self) -> None:
        if not (0.0 < self.epsilon <= 1.0):
            raise ToleranceError(f"epsilon must be in (0, 1], got {self.epsilon}")
        if self.gap_ratio <= 1.0:
            raise ToleranceError("gap_ratio must exceed 1")
        if self.rprime_rule not in ("smallest", "largest"):
            raise ToleranceError(f"unknown rprime_rule {self.rprime_rule!r}")
        if not (0.0 < self.window_rho < 1.0):
            raise ToleranceError("window_rho must be in (0, 1)")

    def with_epsilon(self, epsilon: float) -> "LearnConfig":
        return replace(self, epsilon=epsilon)

    def inspan_threshold(self, k: int, oracle_tolerance: float) -> float:
        return max(self.inspan_floor, self.inspan_tolerance_mult * oracle_tolerance * k)

    def weight_floor_for(self, k: int) -> float:
        if self.weight_floor is not None:
            return self.weight_floor
        return self.epsilon / (20.0 * max(k, 1))

    def windows(self, k: int) -> list[tuple[float, float]]:
        """The k+1 avoiding windows [rho^{j+1} tau, rho^j tau]."""
        tau = self.window_tau if self.window_tau is not None else self.epsilon / 10.0
        rho = self.window_rho
        return [(tau * rho ** (j + 1), tau * rho**j) for j in range(k + 1)]

    def verify_threshold_for(self, k: int, oracle_tolerance: float = 0.0) -> float:
        """Moment-verification threshold: 0.5 eps / k floored at twice the
        oracle's declared tolerance (estimates cannot match better than
        their own error)."""
        if self.verify_threshold is not None:
            return self.verify_threshold
        return max(0.5 * self.epsilon / max(k, 1), 2.0 * oracle_tolerance)

    def tau_trunc_subcube(self, k: int) -> float:
        if self.tau_trunc is not None:
            return self.tau_trunc
        return max(1e-6, self.epsilon / 2.0 ** (k * k))

    def tau_trunc_product(self, k: int) -> float:
        if self.tau_trunc is not None:
            return self.tau_trunc
        return max(1e-6, (2.0 * self.epsilon / (2.0 ** (k + 1) * 5.0)) ** k)

    def select_epsilon_for(self) -> float:
        return self.select_epsilon if self.select_epsilon is not None else self.epsilon


DEFAULT_CONFIG = LearnConfig()
