"""Bayesian optimization of the fund's policy pair over the search box.

Latin hypercube initial design, Gaussian-process surrogate on normalized
inputs, expected-improvement acquisition maximized by quasi-random candidates
with local refinement, sequential evaluation of the welfare objective.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import ndtr
from scipy.stats import qmc

from .fund import PolicyParams
from .gp import GpModel, fit, posterior
from .market import RandomStream
from .objective import ObjectiveSpec, ObjectiveValue, evaluate_policy

__all__ = [
    "OMEGA",
    "BoConfig",
    "BoRecord",
    "BoTrace",
    "latin_hypercube",
    "expected_improvement",
    "maximize_acquisition",
    "run_bo",
]

# search box: risky fraction in [0, 3], adjustment strength in [0, 1]
OMEGA = ((0.0, 3.0), (0.0, 1.0))

# substream indices reserved for the optimizer's own randomness; market path
# streams use indices 0..n_paths-1 of the objective seed
_LHS_STREAM = 2**62
_ACQ_STREAM = 2**62 + 1


@dataclass(frozen=True)
class BoConfig:
    """Optimizer budget and seeding.

    With ``common_random_numbers`` every candidate is scored on the same
    market draws, so differences between candidates are policy-driven; when
    disabled each evaluation re-seeds the objective.
    """

    n_init: int = 10
    n_total: int = 100
    acquisition_budget: int = 256
    seed: int = 0
    common_random_numbers: bool = True

    def __post_init__(self) -> None:
        if self.n_init < 2:
            raise ValueError(f"n_init must be >= 2, got {self.n_init}")
        if self.n_total <= self.n_init:
            raise ValueError(
                f"n_total must exceed n_init, got {self.n_total} <= {self.n_init}"
            )
        if self.acquisition_budget < 1:
            raise ValueError(f"acquisition_budget must be >= 1, got {self.acquisition_budget}")


@dataclass(frozen=True)
class BoRecord:
    """One evaluated candidate plus the incumbent after it."""

    iteration: int
    pi: float
    theta: float
    ce: float
    eu: float
    eu_stderr: float
    any_bankruptcy: bool
    n_bankrupt: int
    incumbent_pi: float
    incumbent_theta: float
    incumbent_ce: float
    gp_length_scale: float
    gp_noise: float


@dataclass
class BoTrace:
    """Ordered evaluation log of one optimization run."""

    records: list[BoRecord]

    @property
    def incumbent(self) -> BoRecord:
        return self.records[-1]

    def best_points(self, k: int) -> list[BoRecord]:
        """The top-k evaluated candidates by objective value."""
        return sorted(self.records, key=lambda rec: rec.ce, reverse=True)[:k]


def latin_hypercube(n: int, bounds, rng: np.random.Generator) -> np.ndarray:
    """Latin hypercube design: per coordinate, one uniform draw in each of
    ``n`` equal-width strata, with the strata independently permuted."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    bounds = np.asarray(bounds, dtype=float)
    d = bounds.shape[0]
    pts = np.empty((n, d))
    for j in range(d):
        strata = (rng.permutation(n) + rng.uniform(size=n)) / n
        lo, hi = bounds[j]
        pts[:, j] = lo + strata * (hi - lo)
    return pts


def expected_improvement(model: GpModel, x, f_star: float):
    """Expected improvement of the posterior over the incumbent value.

    ``sigma * pdf(zscore) + (mean - f_star) * cdf(zscore)``; degenerates to
    ``max(mean - f_star, 0)`` where the posterior deviation vanishes.
    """
    mean, std = posterior(model, x)
    mean = np.asarray(mean, dtype=float)
    std = np.asarray(std, dtype=float)
    gap = mean - f_star
    safe_std = np.where(std > 1e-12, std, 1.0)
    zscore = gap / safe_std
    pdf = np.exp(-0.5 * zscore * zscore) / math.sqrt(2.0 * math.pi)
    ei = np.where(std > 1e-12, safe_std * pdf + gap * ndtr(zscore), np.maximum(gap, 0.0))
    return float(ei) if ei.ndim == 0 else ei


def maximize_acquisition(
    model: GpModel,
    f_star: float,
    budget: int,
    rng: np.random.Generator,
    bounds=OMEGA,
) -> np.ndarray:
    """Pick the next point: best expected improvement over quasi-random
    candidates, sharpened by two rounds of shrinking boxes around the leader.

    Returns the winning point on the raw scale, clipped to the search box.
    """
    if budget < 1:
        raise ValueError(f"budget must be >= 1, got {budget}")
    d = len(bounds)
    # qmc needs a seed-sequence-backed rng; derive an integer seed instead
    qmc_seed = int(rng.integers(2**63))
    candidates = qmc.Halton(d=d, scramble=True, seed=qmc_seed).random(budget)
    best_x, best_ei = _argmax_ei(model, f_star, candidates)
    for half_width in (0.1, 0.025):
        lo = np.clip(best_x - half_width, 0.0, 1.0)
        hi = np.clip(best_x + half_width, 0.0, 1.0)
        local = rng.uniform(lo, hi, size=(budget, d))
        x, ei = _argmax_ei(model, f_star, local)
        if ei > best_ei:
            best_x, best_ei = x, ei
    bounds = np.asarray(bounds, dtype=float)
    raw = bounds[:, 0] + best_x * (bounds[:, 1] - bounds[:, 0])
    return np.clip(raw, bounds[:, 0], bounds[:, 1])


def _argmax_ei(model, f_star, candidates):
    ei = expected_improvement(model, candidates, f_star)
    idx = int(np.argmax(ei))
    return candidates[idx], float(ei[idx])


def _normalize(points: np.ndarray, bounds) -> np.ndarray:
    bounds = np.asarray(bounds, dtype=float)
    return (points - bounds[:, 0]) / (bounds[:, 1] - bounds[:, 0])


def run_bo(spec: ObjectiveSpec, bo_cfg: BoConfig) -> BoTrace:
    """Run the optimization loop against the fund objective."""

    def evaluate(pi: float, theta: float, iteration: int) -> ObjectiveValue:
        eval_spec = spec
        if not bo_cfg.common_random_numbers:
            eval_spec = replace(spec, seed=spec.seed + 1 + iteration)
        return evaluate_policy(PolicyParams(pi=pi, theta=theta), eval_spec)

    return optimize(evaluate, bo_cfg, bounds=OMEGA)


def optimize(evaluate, bo_cfg: BoConfig, bounds=OMEGA) -> BoTrace:
    """Optimization loop over an arbitrary evaluator ``(pi, theta, k) -> ObjectiveValue``.

    Split out from :func:`run_bo` so the loop can be exercised on synthetic
    objectives.
    """
    lhs_rng = RandomStream(bo_cfg.seed, _LHS_STREAM).generator()
    acq_rng = RandomStream(bo_cfg.seed, _ACQ_STREAM).generator()

    design = latin_hypercube(bo_cfg.n_init, bounds, lhs_rng)
    records: list[BoRecord] = []
    points: list[np.ndarray] = []
    values: list[float] = []
    inc_idx = -1

    def record(k: int, x, val: ObjectiveValue, h: float, noise: float) -> None:
        nonlocal inc_idx
        points.append(np.asarray(x, dtype=float))
        values.append(val.ce)
        if inc_idx < 0 or val.ce > values[inc_idx]:
            inc_idx = len(values) - 1
        records.append(
            BoRecord(
                iteration=k,
                pi=float(x[0]),
                theta=float(x[1]),
                ce=val.ce,
                eu=val.eu,
                eu_stderr=val.eu_stderr,
                any_bankruptcy=val.any_bankruptcy,
                n_bankrupt=val.n_bankrupt,
                incumbent_pi=float(points[inc_idx][0]),
                incumbent_theta=float(points[inc_idx][1]),
                incumbent_ce=values[inc_idx],
                gp_length_scale=h,
                gp_noise=noise,
            )
        )

    for k in range(bo_cfg.n_init):
        record(k, design[k], evaluate(design[k][0], design[k][1], k), float("nan"), float("nan"))

    for k in range(bo_cfg.n_init, bo_cfg.n_total):
        model = fit(_normalize(np.array(points), bounds), np.array(values))
        nxt = maximize_acquisition(
            model, values[inc_idx], bo_cfg.acquisition_budget, acq_rng, bounds=bounds
        )
        record(
            k,
            nxt,
            evaluate(nxt[0], nxt[1], k),
            model.kernel.length_scale,
            model.noise_variance,
        )

    return BoTrace(records=records)
