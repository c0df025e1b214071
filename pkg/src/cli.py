"""
ddinfer - Command Line Interface

Subcommands:
    generate  Sample synthetic material data sets and cache their beta_f
    run       Population annealing run; writes samples, histogram, quench log and summary
    oracle    Reference distribution (Gaussian posterior or Weibull failure mixture)
    study     Repeated runs over a parameter sweep
    ks        Kolmogorov-Smirnov distance of a sample file to a second file or the oracle

Every subcommand reads a run configuration (--config, a JSON file or the
name of a preset in scenarios/). --seed, --threads and --out override the
configured values.

Usage:
    ./ddinfer.py generate --config three-bar-gauss
    ./ddinfer.py run --config three-bar-gauss --seed 7 --threads 4
    ./ddinfer.py ks output/three-bar-gauss/samples.csv --config three-bar-gauss
"""

import argparse
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd
from scipy import stats

from src.app_config import config
from src.errors import ConfigError, DataDrivenError
from src.inference import histogram, ks_statistic, cluster_masses, summarize
from src.material_data import beta_estimate, save
from src.rng_streams import fresh_seed, substream
from src.run_config import RunConfig, load_run_config
from src.scenario import (Reference, anneal, build_reference, build_scenario, build_structure,
                          generate_dataset)
from src.study import run_study

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.17g'


def resolve_seed(args: argparse.Namespace, cfg: RunConfig) -> int:
    if args.seed is not None:
        return args.seed
    if cfg.seed is not None:
        return cfg.seed
    seed = fresh_seed()
    logger.info(f"No seed configured; using {seed}")
    return seed


def output_directory(args: argparse.Namespace, cfg: RunConfig) -> Path:
    out = Path(args.out) if args.out else cfg.output.directory
    out.mkdir(parents=True, exist_ok=True)
    return out


def write_json(data: Dict[str, Any], path: Path) -> Path:
    with open(path, 'w') as f:
        json.dump(data, f, indent=2)
    logger.info(f"✓ Wrote {path}")
    return path


def write_table(frame: pd.DataFrame, path: Path) -> Path:
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.info(f"✓ Wrote {path}")
    return path


def read_samples(path: Path, column: Optional[str] = None) -> np.ndarray:
    """Values of a sample file (first column unless named)."""
    if not path.exists():
        raise ConfigError(f"Sample file not found: {path}")
    frame = pd.read_csv(path)
    if frame.empty:
        raise ConfigError(f"Sample file {path} has no rows")
    if column is not None and column not in frame.columns:
        raise ConfigError(f"Sample file {path} has no column '{column}'")
    return frame[column or frame.columns[0]].to_numpy(dtype=float)


def reference_summary(reference: Optional[Reference]) -> Optional[Dict[str, Any]]:
    if reference is None:
        return None
    summary = {'kind': reference.kind, 'mean': reference.mean, 'std': reference.std}
    if reference.modes is not None:
        summary['modes'] = [{'value': v, 'mass': w} for v, w in reference.modes]
    return summary


# ----------------------------------------------------------------------------
# Subcommands
# ----------------------------------------------------------------------------

def cmd_generate(args: argparse.Namespace) -> int:
    """Write the generated data set of every material with a generator."""
    cfg = load_run_config(args.config)
    seed = resolve_seed(args, cfg)
    structure = build_structure(cfg)
    truss = structure.truss
    generated = 0
    for index, spec in enumerate(cfg.materials):
        if spec.generator is None:
            logger.info(f"Material '{spec.id}' has no generator; skipped")
            continue
        members = np.array([e for e, mat in enumerate(truss.materials) if mat == spec.id])
        dataset = generate_dataset(spec, structure.E, structure.metric, members,
                                   substream(seed, 'data', index), args.size)
        dataset = dataset.with_beta(spec.beta if spec.beta is not None else beta_estimate(dataset, spec.modulus))
        if args.out:
            path = Path(args.out) / f"{spec.id}.csv"
        elif spec.data is not None:
            path = spec.data
        else:
            path = cfg.output.directory / f"{spec.id}.csv"
        save(dataset, path)
        print(f"{spec.id}: M={dataset.size} beta_f={dataset.beta!r} -> {path}")
        generated += 1
    if not generated:
        raise ConfigError(f"Config '{cfg.name}' defines no material generator")
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    """Run population annealing and write samples, histogram, quench log and summary."""
    cfg = load_run_config(args.config)
    seed = resolve_seed(args, cfg)
    out = output_directory(args, cfg)
    scenario = build_scenario(cfg, seed)
    reference = build_reference(cfg, scenario, seed)
    outcome = anneal(cfg, scenario, seed, args.threads)
    samples = outcome.samples

    write_table(pd.DataFrame({scenario.qoi.name: samples}), out / 'samples.csv')
    centers, freqs = histogram(samples, cfg.output.bins, cfg.output.bin_width)
    write_table(pd.DataFrame({'bin_center': centers, 'frequency': freqs}), out / 'histogram.csv')
    write_table(pd.DataFrame([record.as_row() for record in outcome.history]), out / 'quench_log.csv')

    summary = {'name': cfg.name, 'seed': seed, 'qoi': scenario.qoi.name,
               **summarize(samples),
               'ml_estimate': outcome.ml_estimate,
               'runtime_seconds': outcome.runtime,
               'energy_eval_seconds': outcome.eval_seconds,
               'energy_evaluations': outcome.eval_count,
               'target_betas': outcome.target_betas,
               'oracle': reference_summary(reference)}
    if reference is not None:
        summary['ks'] = reference.ks(samples)
        if reference.modes is not None:
            values = [v for v, _ in reference.modes]
            summary['cluster_masses'] = cluster_masses(samples, values).tolist()
    write_json(summary, out / 'summary.json')

    print(f"{scenario.qoi.name}: mean={summary['mean']:.6g} std={summary['std']:.6g} "
          f"ML={outcome.ml_estimate:.6g} runtime={outcome.runtime:.1f}s")
    if 'ks' in summary:
        print(f"KS vs {reference.kind} oracle: {summary['ks']:.4g}")
    return 0


def cmd_oracle(args: argparse.Namespace) -> int:
    """Write the reference distribution of the configured QoI."""
    cfg = load_run_config(args.config)
    if cfg.oracle is None:
        raise ConfigError(f"Config '{cfg.name}' has no oracle section")
    seed = resolve_seed(args, cfg)
    out = output_directory(args, cfg)
    structure = build_structure(cfg)
    reference = build_reference(cfg, structure, seed)
    summary = {'name': cfg.name, 'qoi': structure.qoi.name, **reference_summary(reference)}

    if reference.kind == 'weibull':
        mixture = reference.source
        write_table(pd.DataFrame({'failed': ['+'.join(c.failed) or 'none' for c in mixture.components],
                                  'value': mixture.values, 'weight': mixture.weights}),
                    out / 'oracle_mixture.csv')
        for value, mass in reference.modes:
            print(f"  {structure.qoi.name}={value:.6g}  mass={mass:.4f}")
    else:
        posterior = reference.source
        summary['mean_u'] = posterior.mean_u.tolist()
        summary['mean_v'] = posterior.mean_v.tolist()
        if callable(reference.target):
            grid = np.linspace(reference.mean - 5 * reference.std, reference.mean + 5 * reference.std,
                               config.ORACLE_CDF_POINTS)
            cdf = reference.target(grid)
            pdf = stats.norm.pdf(grid, reference.mean, reference.std)
        else:
            ordered = np.sort(reference.target)
            grid = np.quantile(ordered, np.linspace(0, 1, config.ORACLE_CDF_POINTS))
            cdf = np.searchsorted(ordered, grid, side='right') / ordered.size
            pdf = np.full(grid.size, np.nan)
            write_table(pd.DataFrame({structure.qoi.name: ordered}), out / 'oracle_samples.csv')
        write_table(pd.DataFrame({'x': grid, 'cdf': cdf, 'pdf': pdf}), out / 'oracle_cdf.csv')
    write_json(summary, out / 'oracle.json')
    print(f"{reference.kind} oracle of {structure.qoi.name}: mean={reference.mean:.6g} std={reference.std:.6g}")
    return 0


def cmd_study(args: argparse.Namespace) -> int:
    """Run the configured parameter sweep and write the convergence report."""
    cfg = load_run_config(args.config)
    seed = resolve_seed(args, cfg)
    out = output_directory(args, cfg)
    report = run_study(cfg, seed, args.threads, args.repeats)
    write_table(report.runs, out / 'study_runs.csv')
    write_table(report.summary, out / 'study_summary.csv')
    write_json({'name': cfg.name, 'seed': seed, 'parameter': report.parameter, 'fit': report.fit},
               out / 'study.json')
    print(report.summary.to_string(index=False))
    if report.fit is not None:
        print(f"log-log slope of KS error vs {report.parameter}: {report.fit['slope']:.3f}")
    return 0


def cmd_ks(args: argparse.Namespace) -> int:
    """KS distance of a sample file to a reference file or the configured oracle."""
    samples = read_samples(Path(args.samples), args.column)
    if args.reference:
        statistic = ks_statistic(samples, read_samples(Path(args.reference), args.column))
        against = args.reference
    else:
        if not args.config:
            raise ConfigError("ks needs --reference or a --config with an oracle section")
        cfg = load_run_config(args.config)
        if cfg.oracle is None:
            raise ConfigError(f"Config '{cfg.name}' has no oracle section")
        reference = build_reference(cfg, build_structure(cfg), resolve_seed(args, cfg))
        statistic = reference.ks(samples)
        against = f"{reference.kind} oracle"
    logger.info(f"KS({args.samples} vs {against}) = {statistic:.6g}")
    print(f"{statistic!r}")
    return 0


COMMANDS = {'generate': cmd_generate, 'run': cmd_run, 'oracle': cmd_oracle,
            'study': cmd_study, 'ks': cmd_ks}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', type=str, help='Run configuration file or preset name')
    common.add_argument('--seed', type=int, default=None, help='Root seed (overrides the config)')
    common.add_argument('--threads', type=int, default=None, help='Worker threads for the Metropolis sweeps')
    common.add_argument('--out', type=str, default=None, help='Output directory (overrides the config)')
    common.add_argument('--verbose', action='store_true', help='Enable debug logging')

    parser = argparse.ArgumentParser(prog='ddinfer',
                                     description='Model-free data-driven inference for trusses')
    sub = parser.add_subparsers(dest='command', required=True)
    generate = sub.add_parser('generate', parents=[common], help='Generate synthetic material data')
    generate.add_argument('--size', type=int, default=None, help='Number of points (overrides the generator)')
    sub.add_parser('run', parents=[common], help='Run population annealing')
    sub.add_parser('oracle', parents=[common], help='Evaluate the reference distribution')
    study = sub.add_parser('study', parents=[common], help='Run a parameter study')
    study.add_argument('--repeats', type=int, default=None, help='Repeats per cell (overrides the config)')
    ks = sub.add_parser('ks', parents=[common], help='KS distance of a sample file')
    ks.add_argument('samples', type=str, help='Sample file (CSV)')
    ks.add_argument('--reference', type=str, default=None, help='Second sample file instead of the oracle')
    ks.add_argument('--column', type=str, default=None, help='Column to compare (default: first)')
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, dispatch the subcommand and map errors to exit codes."""
    args = build_parser().parse_args(argv)
    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)
    if args.command != 'ks' and not args.config:
        logger.error(f"{args.command} needs --config")
        return 1
    if args.threads is not None and args.threads < 1:
        logger.error(f"--threads must be at least 1, got {args.threads}")
        return 1
    try:
        return COMMANDS[args.command](args)
    except DataDrivenError as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"Error: {e}")
        return 1
    except KeyboardInterrupt:
        logger.warning("Interrupted by user")
        return 130
    except Exception as e:
        logger.exception(f"Unexpected error in '{args.command}': {e}")
        print(f"Error: {e}")
        return 1
