"""End-user entry point: data ingestion, experiment runs, CSV/JSON emission.

One experiment streams a dataset (the USPS digits files or a synthetic
scenario) through a single pass that maintains one nearest-neighbour cache
and produces four martingale trajectories:

    black   plain conformal p-values on the concept measure's scores
    red     label-conditional p-values on the concept measure's scores
            (concept-shift detector)
    green   plain conformal p-values on class-averaged scores of the label
            measure (label-shift detector)
    blue    product of red and green, the perfectly decomposable
            exchangeability martingale

Each leg draws its tie-breaking values from its own named substream of the
experiment seed ("tau-black", "tau", "tau-prime"), so legs can be added or
removed without disturbing each other; with ``shared_randomization`` all
draws come from one "shared" substream (order per step: black, red, green),
mirroring the single-seed shortcut some older experiments used.

Exit codes: 0 success, 2 config error, 3 data error, 4 internal invariant
violation.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .betting import (
    STRATEGY_TAGS,
    MartingaleTrajectory,
    initial_state,
    bet_step,
    product_martingale,
)
from .conformity import NN_VARIANTS, NnCache
from .core import Observation, RandomSource
from .synth import ScenarioConfig, generate, uniformity_report
from .transducer import _step_scores, p_conformal, p_label_conditional

USPS_DIM = 256
USPS_FIELDS = USPS_DIM + 1
_FEATURE_TOL = 1e-6

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_INTERNAL = 4


class ConfigError(Exception):
    """Bad experiment configuration (exit code 2)."""


class DataError(Exception):
    """Unreadable or malformed input data (exit code 3)."""


class InvariantViolation(Exception):
    """An internal consistency check failed (exit code 4)."""


# ---------------------------------------------------------------------------
# USPS ingestion
# ---------------------------------------------------------------------------


def _parse_usps_file(path: str) -> list[Observation]:
    observations = []
    try:
        handle = open(path, "r", encoding="ascii")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from exc
    with handle:
        for lineno, line in enumerate(handle, start=1):
            fields = line.split()
            if not fields:
                continue
            if len(fields) != USPS_FIELDS:
                raise DataError(
                    f"{path}:{lineno}: expected {USPS_FIELDS} fields, got {len(fields)}"
                )
            try:
                raw_label = float(fields[0])
                features = np.array(fields[1:], dtype=np.float64)
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: unparsable number: {exc}") from exc
            label = round(raw_label)
            if abs(raw_label - label) > _FEATURE_TOL or not 0 <= label <= 9:
                raise DataError(
                    f"{path}:{lineno}: label must be an integer in 0..9, got {fields[0]}"
                )
            if not np.isfinite(features).all() or np.abs(features).max() > 1.0 + _FEATURE_TOL:
                raise DataError(
                    f"{path}:{lineno}: feature out of [-1, 1] beyond tolerance"
                )
            observations.append(Observation(features, label))
    return observations


def load_usps(train_path: str, test_path: str) -> list[Observation]:
    """Load the USPS digits text files, train rows first then test rows.

    Each row is whitespace-separated: an integer label 0-9 followed by 256
    pixel intensities in [-1, 1]. Malformed rows raise DataError naming the
    file and line.
    """
    observations = _parse_usps_file(train_path) + _parse_usps_file(test_path)
    if not observations:
        raise DataError(f"no observations in {train_path} + {test_path}")
    return observations


# ---------------------------------------------------------------------------
# Experiment configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class UspsPaths:
    train_path: str
    test_path: str


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: a data source plus the three run components."""

    data: UspsPaths | ScenarioConfig
    concept_measure: str = "ratio"
    label_measure: str | None = "ratio"
    strategy: str = "sleepy-jumper"
    jump_rate: float = 0.001
    reluctance: float = 0.01
    seed: int = 1
    shared_randomization: bool = False
    output: str | None = None

    def __post_init__(self):
        if self.concept_measure not in NN_VARIANTS:
            raise ConfigError(f"unknown concept_measure {self.concept_measure!r}")
        if self.label_measure is not None and self.label_measure not in NN_VARIANTS:
            raise ConfigError(f"unknown label_measure {self.label_measure!r}")
        if self.strategy not in STRATEGY_TAGS:
            raise ConfigError(f"unknown strategy {self.strategy!r}")
        if not 0.0 < self.jump_rate <= 1.0:
            raise ConfigError(f"jump_rate must lie in (0, 1], got {self.jump_rate}")


_CONFIG_KEYS = {
    "data",
    "concept_measure",
    "label_measure",
    "strategy",
    "jump_rate",
    "reluctance",
    "seed",
    "shared_randomization",
    "output",
}


def config_from_dict(raw: dict) -> ExperimentConfig:
    """Build an ExperimentConfig from the JSON document schema."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "data" not in raw:
        raise ConfigError("config requires a 'data' section")
    data_raw = raw["data"]
    if not isinstance(data_raw, dict) or "kind" not in data_raw:
        raise ConfigError("'data' must be an object with a 'kind' field")
    kind = data_raw["kind"]
    try:
        if kind == "usps":
            data = UspsPaths(data_raw["train_path"], data_raw["test_path"])
        elif kind == "scenario":
            fields = {k: v for k, v in data_raw.items() if k != "kind"}
            if "label_transition" in fields and fields["label_transition"] is not None:
                fields["label_transition"] = tuple(
                    tuple(row) for row in fields["label_transition"]
                )
            data = ScenarioConfig(**fields)
        else:
            raise ConfigError(f"unknown data kind {kind!r}")
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid data section: {exc}") from exc
    kwargs = {k: v for k, v in raw.items() if k != "data"}
    try:
        return ExperimentConfig(data=data, **kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str, overrides: dict | None = None) -> ExperimentConfig:
    """Read the JSON config file and apply CLI flag overrides."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            raw = json.load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if overrides:
        raw.update({k: v for k, v in overrides.items() if v is not None})
    return config_from_dict(raw)


# ---------------------------------------------------------------------------
# The four-martingale run
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class TrajectoryTable:
    """Per-step p-values and the four log10 trajectories of one run.

    The p arrays have one entry per observation; the trajectories have one
    extra leading entry for the initial capital. ``p_label``, ``log10_green``
    and ``log10_blue`` are None when the run had no label-measure leg.
    """

    p_concept: np.ndarray
    p_label: np.ndarray | None
    log10_black: np.ndarray
    log10_red: np.ndarray
    log10_green: np.ndarray | None
    log10_blue: np.ndarray | None

    def __eq__(self, other):
        if not isinstance(other, TrajectoryTable):
            return NotImplemented

        def same(a, b):
            if a is None or b is None:
                return a is None and b is None
            return np.array_equal(a, b)

        return all(
            same(getattr(self, f.name), getattr(other, f.name))
            for f in dataclasses.fields(self)
        )

    @property
    def n_steps(self) -> int:
        return self.p_concept.size


def _load_stream(config: ExperimentConfig) -> list[Observation]:
    if isinstance(config.data, UspsPaths):
        return load_usps(config.data.train_path, config.data.test_path)
    scenario_seed = config.data.seed if config.data.seed is not None else config.seed
    try:
        return generate(config.data, RandomSource(scenario_seed, "scenario"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def run_experiment(config: ExperimentConfig) -> TrajectoryTable:
    """Single pass over the stream emitting all four trajectories.

    Deterministic given the config: the scenario, the black leg and the two
    product legs each consume their own substream of the experiment seed.
    """
    stream = _load_stream(config)
    n = len(stream)
    if config.shared_randomization:
        shared = RandomSource(config.seed, "shared")
        tau_black_src = tau_src = tau_prime_src = shared
    else:
        tau_black_src = RandomSource(config.seed, "tau-black")
        tau_src = RandomSource(config.seed, "tau")
        tau_prime_src = RandomSource(config.seed, "tau-prime")

    with_label_leg = config.label_measure is not None
    label_measure = config.label_measure if with_label_leg else config.concept_measure

    cache = NnCache()
    black = initial_state(config.strategy, config.jump_rate, config.reluctance)
    red = initial_state(config.strategy, config.jump_rate, config.reluctance)
    green = initial_state(config.strategy, config.jump_rate, config.reluctance)

    p_concept = np.empty(n)
    p_label = np.empty(n) if with_label_leg else None
    log10_black = np.zeros(n + 1)
    log10_red = np.zeros(n + 1)
    log10_green = np.zeros(n + 1) if with_label_leg else None

    for k, obs in enumerate(stream):
        tau_black = tau_black_src.uniform_draw()
        tau = tau_src.uniform_draw()
        tau_prime = tau_prime_src.uniform_draw() if with_label_leg else None
        concept_scores, label_scores, labels = _step_scores(
            cache, obs, config.concept_measure, label_measure
        )
        pb = p_conformal(concept_scores, tau_black)
        pr = p_label_conditional(concept_scores, labels, tau)
        if not (0.0 <= pb <= 1.0 and 0.0 <= pr <= 1.0):
            raise InvariantViolation(f"p-value out of range at step {k + 1}")
        p_concept[k] = pr
        black = bet_step(black, pb)
        red = bet_step(red, pr)
        log10_black[k + 1] = black.log10_capital
        log10_red[k + 1] = red.log10_capital
        if with_label_leg:
            pg = p_conformal(label_scores, tau_prime)
            if not 0.0 <= pg <= 1.0:
                raise InvariantViolation(f"p-value out of range at step {k + 1}")
            p_label[k] = pg
            green = bet_step(green, pg)
            log10_green[k + 1] = green.log10_capital

    log10_blue = None
    if with_label_leg:
        red_traj = MartingaleTrajectory(log10_red, tau_src.describe())
        green_traj = MartingaleTrajectory(log10_green, tau_prime_src.describe())
        blue_traj = product_martingale(
            red_traj, green_traj, allow_shared=config.shared_randomization
        )
        log10_blue = blue_traj.log10_values
        if np.abs(log10_blue - (log10_red + log10_green)).max() > 1e-9:
            raise InvariantViolation("product decomposition violated")

    return TrajectoryTable(
        p_concept, p_label, log10_black, log10_red, log10_green, log10_blue
    )


# ---------------------------------------------------------------------------
# CSV emission
# ---------------------------------------------------------------------------

CSV_HEADER = "n,p_concept,p_label,log10_black,log10_red,log10_green,log10_blue"


def _fmt(value) -> str:
    return "" if value is None else repr(float(value))


def render_trajectory_csv(table: TrajectoryTable) -> str:
    """Format the table as CSV text; floats use shortest round-trip formatting.

    Row n=0 carries the initial capitals and empty p fields.
    """
    lines = [CSV_HEADER]
    green0 = None if table.log10_green is None else table.log10_green[0]
    blue0 = None if table.log10_blue is None else table.log10_blue[0]
    lines.append(
        f"0,,,{_fmt(table.log10_black[0])},{_fmt(table.log10_red[0])},"
        f"{_fmt(green0)},{_fmt(blue0)}"
    )
    for k in range(table.n_steps):
        p_label = None if table.p_label is None else table.p_label[k]
        green = None if table.log10_green is None else table.log10_green[k + 1]
        blue = None if table.log10_blue is None else table.log10_blue[k + 1]
        lines.append(
            f"{k + 1},{_fmt(table.p_concept[k])},{_fmt(p_label)},"
            f"{_fmt(table.log10_black[k + 1])},{_fmt(table.log10_red[k + 1])},"
            f"{_fmt(green)},{_fmt(blue)}"
        )
    return "\n".join(lines) + "\n"


def write_trajectory_csv(table: TrajectoryTable, path: str) -> None:
    """Emit the table to ``path`` atomically, leaving no partial output."""
    tmp = f"{path}.tmp"
    try:
        with open(tmp, "w", encoding="ascii") as out:
            out.write(render_trajectory_csv(table))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def read_trajectory_csv(path: str) -> TrajectoryTable:
    """Parse a trajectory CSV back into a table (inverse of write)."""
    try:
        with open(path, "r", encoding="ascii") as handle:
            lines = [line.rstrip("\n") for line in handle]
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from exc
    if not lines or lines[0] != CSV_HEADER:
        raise DataError(f"{path}: missing or wrong header")
    rows = [line.split(",") for line in lines[1:] if line]
    if not rows or any(len(r) != 7 for r in rows):
        raise DataError(f"{path}: malformed rows")
    n = len(rows) - 1

    def column(idx, start):
        cells = [r[idx] for r in rows[start:]]
        if all(c == "" for c in cells):
            return None
        return np.array([float(c) for c in cells])

    p_concept = column(1, 1)
    p_label = column(2, 1)
    log10_black = column(3, 0)
    log10_red = column(4, 0)
    log10_green = column(5, 0)
    log10_blue = column(6, 0)
    if p_concept is None or log10_black is None or log10_red is None:
        raise DataError(f"{path}: required columns are empty")
    if p_concept.size != n or log10_black.size != n + 1:
        raise DataError(f"{path}: inconsistent row counts")
    return TrajectoryTable(
        p_concept, p_label, log10_black, log10_red, log10_green, log10_blue
    )


# ---------------------------------------------------------------------------
# Command-line interface
# ---------------------------------------------------------------------------


def _run_single(config: ExperimentConfig) -> TrajectoryTable:
    table = run_experiment(config)
    if config.output:
        write_trajectory_csv(table, config.output)
    else:
        sys.stdout.write(render_trajectory_csv(table))
    return table


def _sweep_worker(args):
    config, seed, out_path = args
    run_config = dataclasses.replace(config, seed=seed, output=out_path)
    table = run_experiment(run_config)
    write_trajectory_csv(table, out_path)
    return out_path


def _cmd_run(args) -> int:
    overrides = {
        "seed": args.seed,
        "output": args.output,
        "concept_measure": args.concept_measure,
        "label_measure": args.label_measure,
        "strategy": args.strategy,
        "jump_rate": args.jump_rate,
        "reluctance": args.reluctance,
    }
    if args.shared_randomization:
        overrides["shared_randomization"] = True
    config = load_config(args.config, overrides)
    _run_single(config)
    return EXIT_OK


def _cmd_sweep(args) -> int:
    config = load_config(args.config)
    os.makedirs(args.out_dir, exist_ok=True)
    base = args.seed if args.seed is not None else config.seed
    tasks = [
        (config, base + i, os.path.join(args.out_dir, f"seed{base + i}.csv"))
        for i in range(args.seeds)
    ]
    if args.workers == 1:
        for task in tasks:
            print(_sweep_worker(task))
    else:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            for path in pool.map(_sweep_worker, tasks):
                print(path)
    return EXIT_OK


def _cmd_report(args) -> int:
    table = read_trajectory_csv(args.trajectory)
    reports = {}
    if args.column in ("p_concept", "both"):
        reports["p_concept"] = dataclasses.asdict(
            uniformity_report(table.p_concept, bins=args.bins)
        )
    if args.column in ("p_label", "both"):
        if table.p_label is None:
            raise DataError("trajectory has no p_label column")
        pairs = np.column_stack([table.p_concept, table.p_label])
        reports["p_label"] = dataclasses.asdict(
            uniformity_report(table.p_label, bins=args.bins)
        )
        reports["pair"] = dataclasses.asdict(
            uniformity_report(table.p_label, pairs=pairs, bins=args.bins)
        )
    json.dump(reports, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shiftmart",
        description="Conformal martingales separating concept shift from label shift",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment from a JSON config")
    run.add_argument("--config", required=True, help="path to the JSON config")
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--output", default=None, help="CSV output path (default stdout)")
    run.add_argument("--concept-measure", dest="concept_measure", choices=NN_VARIANTS)
    run.add_argument("--label-measure", dest="label_measure", choices=NN_VARIANTS)
    run.add_argument("--strategy", choices=STRATEGY_TAGS)
    run.add_argument("--jump-rate", dest="jump_rate", type=float, default=None)
    run.add_argument("--reluctance", type=float, default=None)
    run.add_argument(
        "--shared-randomization",
        dest="shared_randomization",
        action="store_true",
        help="draw all tie-breaking values from one substream (compatibility mode)",
    )
    run.set_defaults(func=_cmd_run)

    sweep = sub.add_parser("sweep", help="fan one config out over many seeds")
    sweep.add_argument("--config", required=True)
    sweep.add_argument("--seeds", type=int, required=True, help="number of seeds")
    sweep.add_argument("--seed", type=int, default=None, help="first seed (default: config seed)")
    sweep.add_argument("--out-dir", dest="out_dir", required=True)
    sweep.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    sweep.set_defaults(func=_cmd_sweep)

    report = sub.add_parser("report", help="uniformity report for a trajectory CSV")
    report.add_argument("trajectory", help="trajectory CSV emitted by run")
    report.add_argument("--column", choices=("p_concept", "p_label", "both"), default="both")
    report.add_argument("--bins", type=int, default=10)
    report.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except InvariantViolation as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
