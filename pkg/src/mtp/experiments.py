"""Receding-horizon episodes, planner comparisons and parameter sweeps."""

from __future__ import annotations

import configparser
import dataclasses
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from mtp import csvio
from mtp.baselines import BASELINE_KINDS, BaselineConfig, BaselinePlanner
from mtp.diagnostics import empirical_coverage
from mtp.envs import DomainRandomizer, EnvironmentModel, Perturbation, make_env, randomize_models
from mtp.planner import MTPPlanner, PlannerConfig, StepDiagnostics
from mtp.tensor_sampling import Interpolation

log = logging.getLogger(__name__)

SWEEP_KINDS = ("beta", "elites", "grid_mn", "bspline_degree", "softmax_onoff")


class ConfigError(ValueError):
    """Invalid or unresolvable experiment configuration."""


# --------------------------------------------------------------------------- configuration


def _coerce(text: str) -> Any:
    low = text.strip().lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    if "," in text:
        return tuple(_coerce(part) for part in text.split(","))
    return text.strip()


def _fmt(value: Any) -> str:
    if isinstance(value, (tuple, list)):
        return ",".join(_fmt(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce a run.

    ``planner`` is a name such as ``mtp-akima``, ``mtp-bspline(3)``,
    ``mtp-linear``, ``mppi``, ``ps`` or ``cem``. ``planner_params`` override
    the defaults of the matching config class. ``randomize`` maps model
    parameters to ``kind:low:high`` perturbation strings.
    """

    env: str = "navigation"
    env_params: dict[str, Any] = field(default_factory=dict)
    planner: str = "mtp-akima"
    planner_params: dict[str, Any] = field(default_factory=dict)
    randomize: dict[str, str] = field(default_factory=dict)
    n_models: int = 1
    seeds: tuple[int, ...] = (0,)
    max_steps: int = 300
    sweep: str = ""
    sweep_values: tuple = ()
    planners: tuple[str, ...] = ()
    coverage_grid: tuple[tuple[int, int], ...] = ((3, 4), (5, 16), (9, 64))
    coverage_draws: int = 20

    def __post_init__(self) -> None:
        if not self.seeds:
            raise ConfigError("seeds must be non-empty")
        if self.max_steps < 1:
            raise ConfigError(f"max_steps must be positive, got {self.max_steps}")
        if self.n_models < 1:
            raise ConfigError(f"n_models must be positive, got {self.n_models}")

    def with_overrides(self, **changes: Any) -> ExperimentConfig:
        return dataclasses.replace(self, **{k: v for k, v in changes.items() if v is not None})

    # ---- INI round trip

    @classmethod
    def from_file(cls, path: str | Path) -> ExperimentConfig:
        parser = configparser.ConfigParser()
        parser.optionxform = str  # keep parameter case (M, N, B, T)
        try:
            with open(path) as fh:
                parser.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_parser(parser)

    @classmethod
    def from_parser(cls, parser: configparser.ConfigParser) -> ExperimentConfig:
        def section(name: str) -> dict[str, Any]:
            return {k: _coerce(v) for k, v in parser[name].items()} if parser.has_section(name) else {}

        env = section("env")
        planner = section("planner")
        run = section("run")
        rand = {k: str(v) for k, v in (parser["randomize"].items() if parser.has_section("randomize") else [])}
        kwargs: dict[str, Any] = {}
        if "name" in env:
            kwargs["env"] = str(env.pop("name"))
        kwargs["env_params"] = env
        if "name" in planner:
            kwargs["planner"] = str(planner.pop("name"))
        kwargs["planner_params"] = planner
        kwargs["randomize"] = rand
        for key in ("n_models", "max_steps", "coverage_draws"):
            if key in run:
                kwargs[key] = int(run.pop(key))
        if "seeds" in run:
            kwargs["seeds"] = tuple(int(s) for s in np.atleast_1d(run.pop("seeds")))
        if "sweep" in run:
            kwargs["sweep"] = str(run.pop("sweep"))
        if "sweep_values" in run:
            kwargs["sweep_values"] = _parse_sweep_values(kwargs.get("sweep", ""), run.pop("sweep_values"))
        if "planners" in run:
            value = run.pop("planners")
            kwargs["planners"] = tuple(str(p) for p in (value if isinstance(value, tuple) else (value,)))
        if "coverage_grid" in run:
            kwargs["coverage_grid"] = _parse_grid(run.pop("coverage_grid"))
        if run:
            raise ConfigError(f"unknown [run] keys: {sorted(run)}")
        return cls(**kwargs)

    def to_ini(self) -> str:
        lines = ["[env]", f"name = {self.env}"]
        lines += [f"{k} = {_fmt(v)}" for k, v in sorted(self.env_params.items())]
        lines += ["", "[planner]", f"name = {self.planner}"]
        lines += [f"{k} = {_fmt(v)}" for k, v in sorted(self.planner_params.items())]
        if self.randomize:
            lines += ["", "[randomize]"] + [f"{k} = {v}" for k, v in sorted(self.randomize.items())]
        lines += [
            "",
            "[run]",
            f"seeds = {_fmt(self.seeds)}",
            f"max_steps = {self.max_steps}",
            f"n_models = {self.n_models}",
        ]
        if self.sweep:
            lines += [f"sweep = {self.sweep}", f"sweep_values = {_sweep_values_text(self.sweep, self.sweep_values)}"]
        if self.planners:
            lines.append(f"planners = {','.join(self.planners)}")
        lines.append(f"coverage_grid = {' '.join(f'{m}x{n}' for m, n in self.coverage_grid)}")
        lines.append(f"coverage_draws = {self.coverage_draws}")
        return "\n".join(lines) + "\n"


def _parse_grid(value: Any) -> tuple[tuple[int, int], ...]:
    cells = []
    for token in str(value).replace(",", " ").split():
        m, _, n = token.partition("x")
        try:
            cells.append((int(m), int(n)))
        except ValueError:
            raise ConfigError(f"grid cells look like MxN, got {token!r}") from None
    return tuple(cells)


def _parse_sweep_values(kind: str, value: Any) -> tuple:
    if kind == "grid_mn":
        return _parse_grid(value if not isinstance(value, tuple) else " ".join(map(str, value)))
    return value if isinstance(value, tuple) else (value,)


def _sweep_values_text(kind: str, values: Sequence) -> str:
    if kind == "grid_mn":
        return " ".join(f"{m}x{n}" for m, n in values)
    return _fmt(tuple(values))


# --------------------------------------------------------------------------- builders


def build_env(config: ExperimentConfig) -> EnvironmentModel:
    try:
        return make_env(config.env, **config.env_params)
    except KeyError as exc:
        raise ConfigError(str(exc.args[0])) from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad parameters for environment {config.env!r}: {exc}") from exc


def build_randomizer(env: EnvironmentModel, config: ExperimentConfig) -> DomainRandomizer:
    perts = {}
    for name, text in config.randomize.items():
        try:
            kind, low, high = text.split(":")
            perts[name] = Perturbation(kind, float(low), float(high))
        except ValueError as exc:
            raise ConfigError(f"perturbation for {name!r} must be kind:low:high, got {text!r}") from exc
    try:
        return DomainRandomizer(env, perts, config.n_models)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def build_planner(name: str, params: dict[str, Any], seed: int = 0):
    """Resolve a planner name plus parameter overrides into a planner object."""
    params = dict(params)
    try:
        if name.startswith("mtp"):
            _, _, interp = name.partition("-")
            if interp:
                params["interpolation"] = Interpolation.parse(interp)
            fields = {f.name for f in dataclasses.fields(PlannerConfig)}
            return MTPPlanner(PlannerConfig(seed=seed, **{k: v for k, v in params.items() if k in fields}))
        if name in BASELINE_KINDS:
            if "sigma_init" in params and "sigma" not in params:
                params["sigma"] = params["sigma_init"]
            fields = {f.name for f in dataclasses.fields(BaselineConfig)}
            return BaselinePlanner(BaselineConfig(kind=name, seed=seed, **{k: v for k, v in params.items() if k in fields}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad parameters for planner {name!r}: {exc}") from exc
    raise ConfigError(f"unknown planner {name!r}; use mtp-<interp>, {', '.join(BASELINE_KINDS)}")


# --------------------------------------------------------------------------- episodes


@dataclass(frozen=True)
class EpisodeResult:
    planner: str
    seed: int
    success: bool
    steps_to_success: int  # max_steps + 1 when the goal was never reached
    final_cost: float
    diagnostics: list[StepDiagnostics]

    @property
    def mean_entropy(self) -> float:
        return float(np.mean([d.entropy for d in self.diagnostics]))


def run_episode(
    env: EnvironmentModel,
    planner,
    seed: int,
    max_steps: int,
    randomizer: DomainRandomizer | None = None,
) -> EpisodeResult:
    """Closed-loop run on the nominal model, planning against R randomized copies."""
    rng = np.random.default_rng(seed)
    model_rng, plan_rng = rng.spawn(2)
    models = randomize_models(randomizer, model_rng) if randomizer else [env]
    x = env.initial_state()
    dist = planner.initial_distribution(env.limits)
    total = 0.0
    diagnostics = []
    steps = max_steps + 1
    success = False
    for k in range(max_steps):
        u, dist, diag = planner.step(x, dist, models, plan_rng)
        total += float(env.running_cost(x, u))
        x = env.step(x, u)
        diagnostics.append(dataclasses.replace(diag, step=k, elapsed=(k + 1) * env.dt))
        if not np.all(np.isfinite(x)):
            raise RuntimeError(f"state diverged at step {k}")
        if env.success(x):
            success, steps = True, k + 1
            break
        dist = dist.shifted(1)
    total += float(env.terminal_cost(x))
    return EpisodeResult(planner.label, seed, success, steps, total, diagnostics)


def _episodes(config: ExperimentConfig, planner_name: str, params: dict[str, Any]) -> list[EpisodeResult]:
    env = build_env(config)
    randomizer = build_randomizer(env, config)
    results = []
    for seed in config.seeds:
        planner = build_planner(planner_name, params, seed)
        log.info("running %s on %s, seed %d", planner.label, config.env, seed)
        results.append(run_episode(env, planner, seed, config.max_steps, randomizer))
    return results


SUMMARY_COLUMNS = ("planner", "seed", "success", "steps_to_success", "final_cost", "mean_entropy")
TRACE_COLUMNS = ("planner", "seed", *StepDiagnostics.CSV_COLUMNS)


def _summary_row(r: EpisodeResult) -> list:
    return [r.planner, r.seed, r.success, r.steps_to_success, r.final_cost, r.mean_entropy]


def _trace_rows(results: Iterable[EpisodeResult]) -> Iterable[list]:
    for r in results:
        for d in r.diagnostics:
            yield [r.planner, r.seed, *d.as_row()]


def _echo_config(config: ExperimentConfig, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.ini").write_text(config.to_ini())


def run_plan(config: ExperimentConfig, out: str | Path) -> list[EpisodeResult]:
    """Run one planner on every seed; writes ``steps.csv`` and ``summary.csv``."""
    out = Path(out)
    results = _episodes(config, config.planner, config.planner_params)
    _echo_config(config, out)
    csvio.write_csv(out / "steps.csv", "plan-steps", TRACE_COLUMNS, _trace_rows(results))
    csvio.write_csv(out / "summary.csv", "plan-summary", SUMMARY_COLUMNS, [_summary_row(r) for r in results])
    return results


def run_compare(config: ExperimentConfig, out: str | Path) -> dict[str, list[EpisodeResult]]:
    """Run every planner in ``config.planners`` on the same seeds and budget.

    Writes per-step traces, per-seed results and a ranking by median
    steps-to-success (censored runs count as ``max_steps + 1``).
    """
    out = Path(out)
    names = config.planners or (config.planner,)
    results = {name: _episodes(config, name, config.planner_params) for name in names}
    _echo_config(config, out)
    everything = [r for name in names for r in results[name]]
    csvio.write_csv(out / "compare_steps.csv", "compare-steps", TRACE_COLUMNS, _trace_rows(everything))
    csvio.write_csv(out / "compare.csv", "compare", SUMMARY_COLUMNS, [_summary_row(r) for r in everything])
    ranking = rank_planners(results)
    csvio.write_csv(
        out / "ranking.csv",
        "compare-ranking",
        ("rank", "planner", "median_steps", "success_rate", "mean_entropy"),
        ranking,
    )
    return results


def rank_planners(results: dict[str, list[EpisodeResult]]) -> list[list]:
    stats = []
    for name, runs in results.items():
        stats.append(
            (
                float(np.median([r.steps_to_success for r in runs])),
                name,
                float(np.mean([r.success for r in runs])),
                float(np.mean([r.mean_entropy for r in runs])),
            )
        )
    order = sorted(range(len(stats)), key=lambda i: (stats[i][0], i))
    return [[rank + 1, stats[i][1], stats[i][0], stats[i][2], stats[i][3]] for rank, i in enumerate(order)]


def _sweep_overrides(kind: str, value: Any, planner: str) -> tuple[str, dict[str, Any]]:
    if kind == "beta":
        return planner, {"beta": float(value)}
    if kind == "elites":
        return planner, {"elites": int(value)}
    if kind == "grid_mn":
        M, N = value
        return planner, {"M": int(M), "N": int(N)}
    if kind == "bspline_degree":
        return f"mtp-bspline({int(value)})", {}
    if kind == "softmax_onoff":
        return planner, {"softmax": bool(value)}
    raise ConfigError(f"unknown sweep {kind!r}; expected one of {SWEEP_KINDS}")


def run_sweep(config: ExperimentConfig, out: str | Path) -> list[list]:
    """One row per (sweep value, seed): final cost, success flag, mean entropy."""
    out = Path(out)
    if config.sweep not in SWEEP_KINDS:
        raise ConfigError(f"unknown sweep {config.sweep!r}; expected one of {SWEEP_KINDS}")
    if not config.sweep_values:
        raise ConfigError("sweep_values is empty")
    if not config.planner.startswith("mtp"):
        raise ConfigError(f"sweeps vary MTP parameters; planner {config.planner!r} is not an MTP variant")
    rows = []
    for value in config.sweep_values:
        name, overrides = _sweep_overrides(config.sweep, value, config.planner)
        params = {**config.planner_params, **overrides}
        for r in _episodes(config, name, params):
            label = f"{value[0]}x{value[1]}" if config.sweep == "grid_mn" else value
            rows.append([config.sweep, label, r.seed, r.final_cost, r.success, r.steps_to_success, r.mean_entropy])
    _echo_config(config, out)
    csvio.write_csv(
        out / "sweep.csv",
        f"sweep-{config.sweep}",
        ("sweep", "value", "seed", "final_cost", "success", "steps_to_success", "mean_entropy"),
        rows,
    )
    return rows


def run_coverage(config: ExperimentConfig, out: str | Path):
    out = Path(out)
    rng = np.random.default_rng(config.seeds[0])
    report = empirical_coverage(config.coverage_grid, config.coverage_draws, rng)
    _echo_config(config, out)
    csvio.write_csv(out / "coverage_draws.csv", "coverage-draws", ("M", "N", "draw", "min_distance", "exhaustive"), report.draw_rows())
    csvio.write_csv(
        out / "coverage.csv",
        "coverage",
        ("M", "N", "draws", "median_distance", "min_distance", "exhaustive"),
        report.summary_rows(),
    )
    return report
