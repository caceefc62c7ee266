"""Welfare objective: discounted CRRA utility of all retirement benefits.

A candidate policy is scored by simulating a batch of fund paths, averaging
the discounted utility of the benefit stream across paths and inverting the
average through the utility function into a certainty equivalent. Any
bankruptcy in the batch zeroes the certainty equivalent (soft constraint).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fund import FundConfig, PolicyParams, SimulationBatch, simulate_batch
from .market import MarketParams

__all__ = [
    "ObjectiveSpec",
    "ObjectiveValue",
    "crra_utility",
    "certainty_equivalent",
    "certainty_equivalent_stderr",
    "discounted_utility_sum",
    "evaluate_policy",
    "value_from_batch",
]


@dataclass(frozen=True)
class ObjectiveSpec:
    """Monte Carlo setup for scoring policies: fund, market, batch size, seed."""

    cfg: FundConfig
    mkt: MarketParams
    n_paths: int = 10_000
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_paths < 1:
            raise ValueError(f"n_paths must be >= 1, got {self.n_paths}")


@dataclass(frozen=True)
class ObjectiveValue:
    """Scored policy: certainty equivalent, raw expected utility and its
    Monte Carlo standard error, and the bankruptcy tally.

    ``ce`` is zero (and ``eu`` NaN) whenever any path went bankrupt.
    """

    ce: float
    eu: float
    eu_stderr: float
    any_bankruptcy: bool
    n_bankrupt: int


def crra_utility(x, gamma: float):
    """Power utility with constant relative risk aversion ``gamma``.

    ``x**(1-gamma) / (1-gamma)`` for ``gamma != 1`` and ``log(x)`` at
    ``gamma == 1``. Accepts scalars or arrays; raises for any ``x <= 0``.
    """
    if gamma < 0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    arr = np.asarray(x, dtype=float)
    if np.any(arr <= 0.0):
        raise ValueError("utility undefined for non-positive consumption")
    if gamma == 1.0:
        out = np.log(arr)
    else:
        out = arr ** (1.0 - gamma) / (1.0 - gamma)
    return out if out.ndim else float(out)


def certainty_equivalent(eu: float, gamma: float) -> float:
    """Invert the CRRA utility: the sure amount whose utility equals ``eu``."""
    if gamma < 0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    if gamma == 1.0:
        return float(np.exp(eu))
    scaled = (1.0 - gamma) * eu
    if scaled <= 0.0:
        raise ValueError(
            f"eu={eu} is outside the utility's range for gamma={gamma}"
        )
    return float(scaled ** (1.0 / (1.0 - gamma)))


def certainty_equivalent_stderr(eu: float, eu_stderr: float, gamma: float) -> float:
    """Delta-method standard error of the certainty equivalent."""
    ce = certainty_equivalent(eu, gamma)
    if gamma == 1.0:
        return ce * eu_stderr
    return abs(ce / ((1.0 - gamma) * eu)) * eu_stderr


def discounted_utility_sum(payments, beta: float, gamma: float) -> float:
    """Sum of ``beta**t * U(payment_t)`` over the benefit stream ``t = 1..T``.

    ``payments[t-1]`` is the benefit paid at year ``t``; there is no year-0
    term because no benefit is paid at inception.
    """
    b = np.asarray(payments, dtype=float)
    if b.ndim != 1:
        raise ValueError("payments must be one-dimensional")
    discounts = beta ** np.arange(1, b.size + 1)
    return float(discounts @ crra_utility(b, gamma))


def value_from_batch(batch: SimulationBatch, cfg: FundConfig) -> ObjectiveValue:
    """Score an already simulated batch under the config's preferences.

    The reduction over paths is a fixed-order mean, so repeated runs with the
    same draws are bit-identical.
    """
    n_bankrupt = batch.n_bankrupt
    if n_bankrupt > 0:
        return ObjectiveValue(
            ce=0.0, eu=float("nan"), eu_stderr=float("nan"),
            any_bankruptcy=True, n_bankrupt=n_bankrupt,
        )
    discounts = cfg.beta ** np.arange(1, batch.horizon + 1)
    per_path = crra_utility(batch.payments, cfg.gamma) @ discounts
    eu = float(per_path.mean())
    if per_path.size > 1:
        stderr = float(per_path.std(ddof=1) / np.sqrt(per_path.size))
    else:
        stderr = 0.0
    return ObjectiveValue(
        ce=certainty_equivalent(eu, cfg.gamma),
        eu=eu,
        eu_stderr=stderr,
        any_bankruptcy=False,
        n_bankrupt=0,
    )


def evaluate_policy(policy: PolicyParams, spec: ObjectiveSpec) -> ObjectiveValue:
    """Monte Carlo estimate of the policy's certainty equivalent."""
    batch = simulate_batch(spec.cfg, policy, spec.mkt, seed=spec.seed, n_paths=spec.n_paths)
    return value_from_batch(batch, spec.cfg)
