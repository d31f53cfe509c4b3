import cProfile
import sys
from argparse import ArgumentParser, Namespace
from dataclasses import asdict, replace
from pathlib import Path
from typing import Any, Optional

import numpy as np
import pandas as pd

from configuration import restrict
from diagnostics import count_histogram, dlr_battery, estimate_intensity, partition_bounds, poisson_chi_square, reports_frame, stationarize_samples
from energy import model_summary
from errors import ConfigError, DiagnosticsPreconditionError, GibbsError, InfiniteEnvironmentError, RejectionExhaustedError, SamplerSpecError
from geometry import Complement
from experiment import ExperimentConfig, read_config_text, parse_config, validate_config
from logger import logger
from manifest import write_manifest
from rng import derive_seed, spawn_generator
from sampler import SampleSet, read_sample_set, sample, write_sample_set

VERSION = "1.0.0"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SAMPLER = 3
EXIT_DIAGNOSTICS = 4

# paths depend on where a run happens, never on what it computes
UNRECORDED_KEYS = ("output_dir", "diagnostics.samples_dir")

PARTITION_STREAM = 1
DLR_STREAM = 2
STATIONARIZE_STREAM = 3


def write_csv(path: Path, frame: pd.DataFrame) -> None:
    frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")


def write_run_manifest(directory: Path, cfg: ExperimentConfig, s: Optional[SampleSet]) -> None:
    write_manifest(directory / "manifest.txt", {
        "library": {"name": "gibbs", "version": VERSION},
        "config": {key: value for key, value in cfg.entries.items() if key not in UNRECORDED_KEYS},
        "model": model_summary(cfg.model),
        "spec": (s.spec if s is not None else cfg.sampler_spec()).summary(),
        "reports": list(cfg.diagnostics.reports),
    })


def write_sample_artifacts(directory: Path, s: SampleSet) -> None:
    write_sample_set(directory / "samples", s)

    last = s.configs[-1].points if len(s.configs) > 0 else np.zeros((0, s.window.dim))
    write_csv(directory / "plot_points.csv", pd.DataFrame(last, columns=[f"x{i}" for i in range(s.window.dim)]))

    if len(s.configs) > 0:
        write_csv(directory / "count_histogram.csv", count_histogram(s))


def intensity_rows(cfg: ExperimentConfig, s: SampleSet) -> list[dict[str, Any]]:
    rows = [{"region": "window", **asdict(estimate_intensity(s))}]
    for delta in cfg.diagnostics.deltas():
        rows.append({"region": f"{delta.lower}..{delta.upper}", **asdict(estimate_intensity(s, delta))})

    return rows


def partition_rows(cfg: ExperimentConfig, s: SampleSet) -> list[dict[str, Any]]:
    rows = []
    for index, delta in enumerate(cfg.diagnostics.deltas()):
        for exterior in range(min(cfg.diagnostics.exteriors, len(s.configs))):
            rng = spawn_generator(derive_seed(cfg.seed, PARTITION_STREAM, index), exterior)
            report = partition_bounds(cfg.model, delta, restrict(s.configs[exterior], Complement(delta)), cfg.diagnostics.xi_cap, cfg.diagnostics.partition_draws, rng)

            rows.append({"delta": f"{delta.lower}..{delta.upper}", "exterior": exterior, **asdict(report)})

    return rows


def run_diagnostics(directory: Path, cfg: ExperimentConfig, s: SampleSet, threads: int) -> dict[str, Any]:
    try:
        return diagnostics_summary(directory, cfg, s, threads)
    except ValueError as e:
        if isinstance(e, GibbsError):
            raise

        raise DiagnosticsPreconditionError(f"Diagnostics cannot run on these samples: {e}") from e


def diagnostics_summary(directory: Path, cfg: ExperimentConfig, s: SampleSet, threads: int) -> dict[str, Any]:
    diagnostics = cfg.diagnostics
    summary: dict[str, Any] = {}

    if "intensity" in diagnostics.reports:
        rows = intensity_rows(cfg, s)
        write_csv(directory / "intensity.csv", pd.DataFrame(rows))

        summary["intensity"] = rows[0]["estimate"]
        summary["intensity_bound_satisfied"] = all(row["satisfied"] for row in rows)

        statistic, p_value, dof = poisson_chi_square(s.counts(), cfg.model.zeta * s.window.volume())
        summary["poisson_chi_square"] = {"statistic": statistic, "p_value": p_value, "dof": dof}

    if "partition" in diagnostics.reports:
        rows = partition_rows(cfg, s)
        write_csv(directory / "partition.csv", pd.DataFrame(rows))

        summary["partition_checks"] = len(rows)

    if "dlr" in diagnostics.reports:
        reports = dlr_battery(cfg.model, s, diagnostics.battery(), diagnostics.inner_draws, diagnostics.eps, derive_seed(cfg.seed, DLR_STREAM), threads)
        write_csv(directory / "dlr.csv", reports_frame(reports))

        summary["dlr_checks"] = len(reports)
        summary["dlr_above_3_sigma"] = sum(1 for report in reports if abs(report.z_score) > 3)

    if "stationarize" in diagnostics.reports:
        stationary = stationarize_samples(s, diagnostics.copies, spawn_generator(derive_seed(cfg.seed, STATIONARIZE_STREAM)))
        write_sample_set(directory / "stationary", stationary)

        summary["stationary_intensity"] = estimate_intensity(stationary).estimate

    return summary


def write_summary(directory: Path, cfg: ExperimentConfig, s: SampleSet, diagnostics: dict[str, Any]) -> None:
    """Flat key=value digest for CI gating."""
    write_manifest(directory / "summary.txt", {
        "model": {"kind": cfg.model.kind, "stability_A": cfg.model.stability_A},
        "method": s.spec.method,
        "samples": len(s.configs),
        "mean_count": float(np.mean(s.counts())) if len(s.configs) > 0 else 0.0,
        "ess": s.ess,
        "acceptance": s.acceptance,
        **diagnostics,
    })


def run_sampler(cfg: ExperimentConfig, threads: int) -> SampleSet:
    print(f"Sampling {cfg.model!r} on {cfg.window}")
    s = sample(cfg.sampler_spec(), threads)
    print(f"Retained {len(s.configs):,} configurations")

    return s


def run_experiment(cfg: ExperimentConfig, threads: int = 1) -> Path:
    directory = cfg.output_dir
    directory.mkdir(parents=True, exist_ok=True)

    s = run_sampler(cfg, threads)

    write_run_manifest(directory, cfg, s)
    write_sample_artifacts(directory, s)

    diagnostics = run_diagnostics(directory, cfg, s, threads)
    write_summary(directory, cfg, s, diagnostics)

    print(f"Artifacts written to {directory}")
    return directory


def sample_experiment(cfg: ExperimentConfig, threads: int = 1) -> Path:
    directory = cfg.output_dir
    directory.mkdir(parents=True, exist_ok=True)

    s = run_sampler(cfg, threads)

    write_run_manifest(directory, cfg, s)
    write_sample_artifacts(directory, s)
    write_summary(directory, cfg, s, {})

    print(f"Samples written to {directory / 'samples'}")
    return directory


def dlr_experiment(cfg: ExperimentConfig, threads: int = 1) -> Path:
    directory = cfg.output_dir
    samples_dir = cfg.diagnostics.samples_dir or directory / "samples"

    if not (samples_dir / "manifest.txt").is_file():
        raise ConfigError(f"no sample set found at {samples_dir}", field="diagnostics.samples_dir")

    s = read_sample_set(samples_dir, cfg.model)
    print(f"Loaded {len(s.configs):,} configurations from {samples_dir}")

    directory.mkdir(parents=True, exist_ok=True)

    if "dlr" not in cfg.diagnostics.reports:
        cfg = replace(cfg, diagnostics=replace(cfg.diagnostics, reports=cfg.diagnostics.reports + ("dlr",)))

    diagnostics = run_diagnostics(directory, cfg, s, threads)
    write_summary(directory, cfg, s, diagnostics)

    print(f"Diagnostics written to {directory}")
    return directory


def exit_code(e: Exception) -> int:
    if isinstance(e, ConfigError):
        return EXIT_CONFIG
    elif isinstance(e, (RejectionExhaustedError, SamplerSpecError)):
        return EXIT_SAMPLER
    elif isinstance(e, (DiagnosticsPreconditionError, InfiniteEnvironmentError)):
        return EXIT_DIAGNOSTICS

    raise e


def load_config(args: Namespace) -> ExperimentConfig:
    path = Path(args.config)
    cfg = parse_config(read_config_text(path), path.parent)

    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)

    if args.out is not None:
        cfg = cfg.with_output_dir(Path(args.out))

    return cfg


def dispatch(args: Namespace) -> int:
    if args.verb == "validate":
        violations = validate_config(Path(args.config))
        for violation in violations:
            print(violation)

        if len(violations) > 0:
            return EXIT_CONFIG

        print("Config is valid")
        return EXIT_OK

    cfg = load_config(args)

    if args.verb == "run":
        run_experiment(cfg, args.threads)
    elif args.verb == "sample":
        sample_experiment(cfg, args.threads)
    elif args.verb == "dlr":
        dlr_experiment(cfg, args.threads)

    return EXIT_OK


def main(argv: Optional[list[str]] = None) -> int:
    parser = ArgumentParser(description="Sample finite-volume Gibbs point processes and check them.")
    parser.add_argument("verb", type=str, choices=["run", "validate", "sample", "dlr"], help="what to do with the experiment")
    parser.add_argument("config", type=str, help="the experiment config file")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--out", type=str, help="override the output directory")
    parser.add_argument("--threads", type=int, default=1, help="worker cap for chains and diagnostics")
    parser.add_argument("--profile", type=str, help="write a cProfile dump to this file, open it with snakeviz")

    args = parser.parse_args(argv)

    if args.threads < 1:
        parser.error("--threads must be positive")

    profiler = cProfile.Profile() if args.profile is not None else None
    if profiler is not None:
        profiler.enable()

    try:
        status = dispatch(args)
    except Exception as e:
        status = exit_code(e)
        print(f"Error: {e}", file=sys.stderr)
        logger.flush("run_failed", {"error": type(e).__name__, "message": str(e), "exit_code": status})
    finally:
        if profiler is not None:
            profiler.disable()
            profiler.dump_stats(args.profile)
            print(f"Profile written to {args.profile}, view it with: snakeviz {args.profile}")

    return status


if __name__ == "__main__":
    sys.exit(main())
