"""Experiment orchestration: config parsing, subcommands and file outputs.

Subcommands: ``evaluate | optimize | grid | simulate | analyze | run-cell``.
One top-level seed fans out deterministically: market path ``p`` uses stream
``(seed, p)``, the optimizer's design and acquisition streams use reserved
substream indices of the same seed. All outputs are CSV/JSON with stable
column sets; a manifest makes every run byte-reproducible.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .analysis import (
    ir_roughness_batch,
    mean_funding_ratio_trajectory,
    tail_cdf_points,
    welfare_rows,
)
from .bo import BoConfig, BoTrace, run_bo
from .fund import FundConfig, PolicyParams, simulate_batch
from .idc import idc_terminal_benefits, idc_trajectories
from .market import MARKET_PRESETS, MarketParams, preset_market
from .objective import ObjectiveSpec, evaluate_policy

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "parse_config",
    "load_config",
    "run_grid_oracle",
    "run_cell",
    "main",
]

TRACKED_GENERATION = 41  # generation whose account path is dumped and scored

_CONFIG_KEYS = {
    "market": "M1",
    "gamma": 3.0,
    "n_paths": 10_000,
    "horizon": 100,
    "dt": 1.0 / 12.0,
    "beta": 0.98,
    "y": 1.0,
    "entry_age": 25,
    "retirement_age": 65,
    "n_init": 10,
    "n_total": 100,
    "acquisition_budget": 256,
    "common_random_numbers": True,
    "seed": 0,
    "tail_fraction": 0.10,
}


class ConfigError(ValueError):
    """Raised for unparseable or invalid experiment configs."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment settings with all defaults filled."""

    market: MarketParams
    market_name: str | None = "M1"
    gamma: float = 3.0
    n_paths: int = 10_000
    horizon: int = 100
    dt: float = 1.0 / 12.0
    beta: float = 0.98
    y: float = 1.0
    entry_age: int = 25
    retirement_age: int = 65
    n_init: int = 10
    n_total: int = 100
    acquisition_budget: int = 256
    common_random_numbers: bool = True
    seed: int = 0
    tail_fraction: float = 0.10

    def fund_config(self) -> FundConfig:
        return FundConfig(
            y=self.y,
            entry_age=self.entry_age,
            retirement_age=self.retirement_age,
            dt=self.dt,
            horizon=self.horizon,
            beta=self.beta,
            gamma=self.gamma,
        )

    def objective_spec(self) -> ObjectiveSpec:
        return ObjectiveSpec(
            cfg=self.fund_config(), mkt=self.market, n_paths=self.n_paths, seed=self.seed
        )

    def bo_config(self) -> BoConfig:
        return BoConfig(
            n_init=self.n_init,
            n_total=self.n_total,
            acquisition_budget=self.acquisition_budget,
            seed=self.seed,
            common_random_numbers=self.common_random_numbers,
        )

    def echo(self) -> dict:
        """JSON-serializable view of the effective settings."""
        out = {k: v for k, v in asdict(self).items() if k != "market"}
        out["market"] = (
            self.market_name
            if self.market_name
            else {"mu": self.market.mu, "r": self.market.r, "sigma": self.market.sigma}
        )
        return out


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a JSON config document.

    Unknown keys are rejected; parse errors carry line/column positions and
    validation errors name the offending key. An empty document yields the
    defaults.
    """
    text = text.strip()
    if not text:
        raw = {}
    else:
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(
                f"config parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}"
            ) from None
    if not isinstance(raw, dict):
        raise ConfigError("config document must be a JSON object")
    unknown = set(raw) - set(_CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"unknown config key {sorted(unknown)[0]!r}")
    merged = {**_CONFIG_KEYS, **raw}
    return _validate(merged)


def load_config(path: str | Path | None) -> ExperimentConfig:
    if path is None:
        return parse_config("")
    return parse_config(Path(path).read_text())


def _validate(raw: dict) -> ExperimentConfig:
    def require(cond: bool, key: str, why: str) -> None:
        if not cond:
            raise ConfigError(f"invalid value for {key!r}: {why} (got {raw[key]!r})")

    market_spec = raw["market"]
    if isinstance(market_spec, str):
        if market_spec not in MARKET_PRESETS:
            raise ConfigError(
                f"invalid value for 'market': expected one of {sorted(MARKET_PRESETS)} "
                f"or a custom triple (got {market_spec!r})"
            )
        market = preset_market(market_spec)
        market_name = market_spec
    elif isinstance(market_spec, dict):
        if set(market_spec) != {"mu", "r", "sigma"}:
            raise ConfigError("invalid value for 'market': custom market needs keys mu, r, sigma")
        try:
            market = MarketParams(**{k: float(v) for k, v in market_spec.items()})
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid value for 'market': {exc}") from None
        market_name = None
    else:
        raise ConfigError("invalid value for 'market': expected preset name or object")

    for key in ("gamma", "dt", "beta", "y", "tail_fraction"):
        require(isinstance(raw[key], (int, float)) and not isinstance(raw[key], bool), key, "expected a number")
    for key in ("n_paths", "horizon", "entry_age", "retirement_age", "n_init",
                "n_total", "acquisition_budget", "seed"):
        require(isinstance(raw[key], int) and not isinstance(raw[key], bool), key, "expected an integer")
    require(isinstance(raw["common_random_numbers"], bool), "common_random_numbers", "expected a boolean")

    require(raw["gamma"] >= 0, "gamma", "must be >= 0")
    require(raw["n_paths"] >= 1, "n_paths", "must be >= 1")
    require(raw["horizon"] >= 1, "horizon", "must be >= 1")
    require(0 < raw["beta"] < 1, "beta", "must lie in (0, 1)")
    require(raw["y"] > 0, "y", "must be positive")
    require(raw["retirement_age"] > raw["entry_age"], "retirement_age", "must exceed entry_age")
    require(raw["n_init"] >= 2, "n_init", "must be >= 2")
    require(raw["n_total"] > raw["n_init"], "n_total", "must exceed n_init")
    require(raw["acquisition_budget"] >= 1, "acquisition_budget", "must be >= 1")
    require(0 <= raw["seed"] < 2**64, "seed", "must fit in 64 bits")
    require(0 < raw["tail_fraction"] <= 1, "tail_fraction", "must lie in (0, 1]")
    dt = float(raw["dt"])
    steps = 1.0 / dt if dt > 0 else float("nan")
    require(dt > 0 and abs(steps - round(steps)) < 1e-9, "dt", "steps per year must be integer")

    return ExperimentConfig(
        market=market,
        market_name=market_name,
        gamma=float(raw["gamma"]),
        n_paths=raw["n_paths"],
        horizon=raw["horizon"],
        dt=dt,
        beta=float(raw["beta"]),
        y=float(raw["y"]),
        entry_age=raw["entry_age"],
        retirement_age=raw["retirement_age"],
        n_init=raw["n_init"],
        n_total=raw["n_total"],
        acquisition_budget=raw["acquisition_budget"],
        common_random_numbers=raw["common_random_numbers"],
        seed=raw["seed"],
        tail_fraction=float(raw["tail_fraction"]),
    )


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        if np.isnan(value):
            return "nan"
        return format(value, ".17g")
    return str(value)


def _write_csv(path: Path, header: list[str], rows) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


# ---------------------------------------------------------------------------
# stages
# ---------------------------------------------------------------------------

TRACE_HEADER = [
    "iteration", "pi", "theta", "ce", "eu", "eu_stderr", "n_bankrupt",
    "any_bankruptcy", "incumbent_pi", "incumbent_theta", "incumbent_ce",
    "gp_length_scale", "gp_noise",
]
GRID_HEADER = ["pi", "theta", "ce", "eu", "eu_stderr", "n_bankrupt"]
TRAJECTORY_HEADER = ["account_kind", "path_id", "t_months", "A", "L", "funding_ratio", "B_41"]
WELFARE_HEADER = ["generation", "plan", "median", "q01", "ce"]
ROUGHNESS_HEADER = ["plan", "generation", "mean_roughness", "n_paths"]
FUNDING_HEADER = ["month", "years", "mean_ratio"]
CDF_HEADER = ["generation", "plan", "benefit", "cdf"]


def _write_trace(path: Path, trace: BoTrace) -> None:
    rows = [
        [rec.iteration, rec.pi, rec.theta, rec.ce, rec.eu, rec.eu_stderr,
         rec.n_bankrupt, rec.any_bankruptcy, rec.incumbent_pi,
         rec.incumbent_theta, rec.incumbent_ce, rec.gp_length_scale, rec.gp_noise]
        for rec in trace.records
    ]
    _write_csv(path, TRACE_HEADER, rows)


def _trace_summary(trace: BoTrace) -> dict:
    inc = trace.incumbent
    runners = [
        {"pi": rec.pi, "theta": rec.theta, "ce": rec.ce}
        for rec in trace.best_points(11)
        if not (rec.pi == inc.incumbent_pi and rec.theta == inc.incumbent_theta)
    ][:10]
    return {
        "pi_star": inc.incumbent_pi,
        "theta_star": inc.incumbent_theta,
        "ce_star": inc.incumbent_ce,
        "runner_up": runners,
    }


def run_grid_oracle(config: ExperimentConfig, resolution: int):
    """Evaluate the objective on a full lattice over the search box.

    Returns (rows, argmax_row) where each row is (pi, theta, ce, eu,
    eu_stderr, n_bankrupt). The lattice includes the box corners.
    """
    if resolution < 2:
        raise ValueError(f"resolution must be >= 2 per axis, got {resolution}")
    spec = config.objective_spec()
    pis = np.linspace(0.0, 3.0, resolution)
    thetas = np.linspace(0.0, 1.0, resolution)
    rows = []
    best = None
    for pi in pis:
        for theta in thetas:
            val = evaluate_policy(PolicyParams(pi=float(pi), theta=float(theta)), spec)
            row = (float(pi), float(theta), val.ce, val.eu, val.eu_stderr, val.n_bankrupt)
            rows.append(row)
            if best is None or row[2] > best[2]:
                best = row
    return rows, best


def _analysis_outputs(config: ExperimentConfig, policy: PolicyParams, outdir: Path) -> list[Path]:
    cfg = config.fund_config()
    generations = range(cfg.n_generations, cfg.horizon + 1)
    batch = simulate_batch(
        cfg, policy, config.market, seed=config.seed, n_paths=config.n_paths,
        record_funding_ratios=True, tracked_generations=(TRACKED_GENERATION,),
    )
    idc_terms = idc_terminal_benefits(
        cfg, policy.pi, config.market, seed=config.seed, n_paths=config.n_paths,
        generations=generations,
    )
    idc_traj = idc_trajectories(
        cfg, policy.pi, config.market, seed=config.seed, n_paths=config.n_paths,
        generations=(TRACKED_GENERATION,),
    )

    cdc_by_gen = {i: batch.benefits(i) for i in generations}
    rows = welfare_rows(cdc_by_gen, idc_terms, config.gamma)
    welfare_path = outdir / "welfare_table.csv"
    _write_csv(
        welfare_path,
        WELFARE_HEADER,
        [(r.generation, r.plan, r.median, r.q01, r.ce) for r in rows],
    )

    cdc_rough = ir_roughness_batch(batch.account_trajectories[TRACKED_GENERATION])
    idc_rough = ir_roughness_batch(idc_traj[TRACKED_GENERATION])
    rough_path = outdir / "roughness.csv"
    _write_csv(
        rough_path,
        ROUGHNESS_HEADER,
        [
            ("CDC", TRACKED_GENERATION, float(np.nanmean(cdc_rough)), int(np.isfinite(cdc_rough).sum())),
            ("IDC", TRACKED_GENERATION, float(np.nanmean(idc_rough)), int(np.isfinite(idc_rough).sum())),
        ],
    )

    mean_ratio = mean_funding_ratio_trajectory(batch.funding_ratios)
    spy = cfg.steps_per_year
    funding_path = outdir / "funding_ratio.csv"
    _write_csv(
        funding_path,
        FUNDING_HEADER,
        [(m, m / spy, mean_ratio[m]) for m in range(mean_ratio.size)],
    )

    cdf_rows = []
    for i in generations:
        for plan, values in (("CDC", cdc_by_gen[i]), ("IDC", idc_terms[i])):
            for benefit, cdf in tail_cdf_points(values, config.tail_fraction):
                cdf_rows.append((i, plan, benefit, cdf))
    cdf_path = outdir / "cdf_tail.csv"
    _write_csv(cdf_path, CDF_HEADER, cdf_rows)

    summary_path = outdir / "analysis_summary.json"
    _write_json(
        summary_path,
        {
            "pi": policy.pi,
            "theta": policy.theta,
            "n_paths": config.n_paths,
            "n_bankrupt": batch.n_bankrupt,
            "mean_roughness": {
                "CDC": float(np.nanmean(cdc_rough)),
                "IDC": float(np.nanmean(idc_rough)),
            },
            "mean_funding_ratio_at_end": float(mean_ratio[-1]),
        },
    )
    return [welfare_path, rough_path, funding_path, cdf_path, summary_path]


def _trajectory_output(config: ExperimentConfig, policy: PolicyParams, outdir: Path,
                       n_paths: int) -> Path:
    cfg = config.fund_config()
    batch = simulate_batch(
        cfg, policy, config.market, seed=config.seed, n_paths=n_paths,
        record_funding_ratios=True, record_state=True,
        tracked_generations=(TRACKED_GENERATION,),
    )
    idc_traj = idc_trajectories(
        cfg, policy.pi, config.market, seed=config.seed, n_paths=n_paths,
        generations=(TRACKED_GENERATION,),
    )
    spy = cfg.steps_per_year
    birth_month = (TRACKED_GENERATION - cfg.n_generations) * spy
    life = cfg.n_generations * spy

    rows = []
    for p in range(n_paths):
        cdc_traj = batch.account_trajectories[TRACKED_GENERATION][p]
        for m in range(cfg.n_steps + 1):
            local = m - birth_month
            b41 = cdc_traj[local] if 0 <= local <= life else None
            b41 = None if b41 is not None and np.isnan(b41) else b41
            rows.append(
                ("CDC", p, m, batch.assets[p, m], batch.liabilities[p, m],
                 batch.funding_ratios[p, m], b41)
            )
        for local in range(life + 1):
            rows.append(
                ("IDC", p, birth_month + local, idc_traj[TRACKED_GENERATION][p, local],
                 None, None, idc_traj[TRACKED_GENERATION][p, local])
            )
    path = outdir / "trajectory.csv"
    _write_csv(path, TRAJECTORY_HEADER, rows)
    return path


def run_cell(config: ExperimentConfig, outdir: Path, trajectory_paths: int = 10) -> dict:
    """Full experiment cell: optimize, then simulate and analyze the incumbent.

    Writes all artifacts plus a manifest with seeds, versions and wall times;
    any stage failure is recorded in the manifest and re-raised.
    """
    outdir.mkdir(parents=True, exist_ok=True)
    manifest: dict = {
        "config": config.echo(),
        "seed_fanout": {
            "market_path_streams": "(seed, path_index) for path_index < n_paths",
            "design_stream": "(seed, 2**62)",
            "acquisition_stream": "(seed, 2**62 + 1)",
        },
        "versions": {
            "cdcfund": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": sys.version.split()[0],
        },
        "stages": {},
        "outputs": {},
    }
    outputs: list[Path] = []
    config_path = outdir / "effective_config.json"
    _write_json(config_path, config.echo())
    outputs.append(config_path)

    def stage(name: str, fn):
        start = time.perf_counter()
        try:
            result = fn()
        except Exception as exc:
            manifest["stages"][name] = {"status": "failed", "error": repr(exc)}
            _write_json(outdir / "manifest.json", manifest)
            raise
        manifest["stages"][name] = {
            "status": "ok",
            "wall_time_seconds": time.perf_counter() - start,
        }
        return result

    def _optimize():
        trace = run_bo(config.objective_spec(), config.bo_config())
        _write_trace(outdir / "bo_trace.csv", trace)
        _write_json(outdir / "bo_summary.json", _trace_summary(trace))
        outputs.extend([outdir / "bo_trace.csv", outdir / "bo_summary.json"])
        return trace

    trace = stage("optimize", _optimize)
    incumbent = PolicyParams(pi=trace.incumbent.incumbent_pi, theta=trace.incumbent.incumbent_theta)
    outputs.append(stage("simulate", lambda: _trajectory_output(config, incumbent, outdir, trajectory_paths)))
    outputs.extend(stage("analyze", lambda: _analysis_outputs(config, incumbent, outdir)))

    manifest["outputs"] = {p.name: _sha256(p) for p in outputs}
    _write_json(outdir / "manifest.json", manifest)
    return manifest


# ---------------------------------------------------------------------------
# argument parsing and dispatch
# ---------------------------------------------------------------------------

def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="path to a JSON config file")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--output-dir", default="outputs", help="directory for file outputs")
    parser.add_argument(
        "--fast", action="store_true",
        help="desk-scale profile: 2000 paths and 60 optimizer evaluations",
    )


def _policy_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--pi", type=float, required=True, help="risky investment fraction")
    parser.add_argument("--theta", type=float, required=True, help="declaration adjustment strength")


def _effective_config(args) -> ExperimentConfig:
    config = load_config(args.config)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if args.fast:
        config = replace(config, n_paths=2_000, n_total=60)
    return config


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="cdcfund",
        description="Collective defined-contribution pension fund simulator and policy optimizer",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_eval = sub.add_parser("evaluate", help="score one policy, print JSON")
    _add_common(p_eval)
    _policy_args(p_eval)

    p_opt = sub.add_parser("optimize", help="run the policy optimization loop")
    _add_common(p_opt)

    p_grid = sub.add_parser("grid", help="brute-force lattice over the search box")
    _add_common(p_grid)
    p_grid.add_argument("--resolution", type=int, default=20, help="lattice points per axis")

    p_sim = sub.add_parser("simulate", help="dump per-path trajectories at a policy")
    _add_common(p_sim)
    _policy_args(p_sim)
    p_sim.add_argument("--paths", type=int, default=10, help="paths to dump")

    p_ana = sub.add_parser("analyze", help="welfare statistics at a policy")
    _add_common(p_ana)
    _policy_args(p_ana)

    p_cell = sub.add_parser("run-cell", help="optimize, then simulate and analyze the incumbent")
    _add_common(p_cell)
    p_cell.add_argument("--paths", type=int, default=10, help="paths in the trajectory dump")

    args = parser.parse_args(argv)
    try:
        config = _effective_config(args)
    except (ConfigError, OSError) as exc:
        print(str(exc), file=sys.stderr)
        return 2

    outdir = Path(args.output_dir)

    if args.command == "evaluate":
        value = evaluate_policy(PolicyParams(pi=args.pi, theta=args.theta), config.objective_spec())
        print(json.dumps({
            "pi": args.pi, "theta": args.theta, "ce": value.ce, "eu": value.eu,
            "eu_stderr": value.eu_stderr, "n_bankrupt": value.n_bankrupt,
            "any_bankruptcy": value.any_bankruptcy,
        }, sort_keys=True))
        return 0

    outdir.mkdir(parents=True, exist_ok=True)
    _write_json(outdir / "effective_config.json", config.echo())

    if args.command == "optimize":
        trace = run_bo(config.objective_spec(), config.bo_config())
        _write_trace(outdir / "bo_trace.csv", trace)
        summary = _trace_summary(trace)
        _write_json(outdir / "bo_summary.json", summary)
        print(json.dumps(summary, sort_keys=True))
    elif args.command == "grid":
        rows, best = run_grid_oracle(config, args.resolution)
        _write_csv(outdir / "grid.csv", GRID_HEADER, rows)
        print(json.dumps({"pi_star": best[0], "theta_star": best[1], "ce_star": best[2]},
                         sort_keys=True))
    elif args.command == "simulate":
        _trajectory_output(config, PolicyParams(pi=args.pi, theta=args.theta), outdir, args.paths)
    elif args.command == "analyze":
        _analysis_outputs(config, PolicyParams(pi=args.pi, theta=args.theta), outdir)
    elif args.command == "run-cell":
        run_cell(config, outdir, trajectory_paths=args.paths)
    return 0


if __name__ == "__main__":
    sys.exit(main())
