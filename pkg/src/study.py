"""
ddinfer - Parameter Studies

Repeats annealing runs over a sweep of one parameter (data-set size,
population, quench/trial counts, backtracking checks, likelihood cutoff,
tree versus direct evaluation or prescribed displacement) and aggregates
the KS error, the QoI moments and the timings of every cell.
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from src.errors import ConfigError
from src.rng_streams import child_seed, substream
from src.run_config import RunConfig
from src.scenario import Scenario, anneal, build_reference, build_scenario

logger = logging.getLogger(__name__)

# Sweeps that change the scenario itself rather than the annealing section
SCENARIO_PARAMETERS = ('data_size', 'displacement')


@dataclass
class StudyReport:
    """
    Attributes:
        parameter: Swept parameter
        runs: One row per run
        summary: One row per cell with means and max deviations
        fit: Log-log fit of the mean KS error against the swept value, if any
    """
    parameter: str
    runs: pd.DataFrame
    summary: pd.DataFrame
    fit: Optional[Dict[str, float]] = None


def _cells(cfg: RunConfig) -> List[Dict[str, Any]]:
    """Parameter combinations of the sweep, each as (value, overrides)."""
    study = cfg.study
    cells = []
    for value in study.values:
        if study.parameter == 'quenches':
            for trials in (study.trials or [cfg.annealing.trials]):
                cells.append({'value': int(value), 'trials': int(trials),
                              'overrides': {'quenches': int(value), 'trials': int(trials)}})
        elif study.parameter == 'population':
            cells.append({'value': int(value), 'trials': cfg.annealing.trials,
                          'overrides': {'population': int(value)}})
        elif study.parameter == 'n_checks':
            # null in the config means unlimited backtracking
            checks = None if value is None else int(value)
            cells.append({'value': np.inf if checks is None else checks, 'trials': cfg.annealing.trials,
                          'overrides': {'n_checks': checks}})
        elif study.parameter == 'tol':
            cells.append({'value': float(value), 'trials': cfg.annealing.trials,
                          'overrides': {'tol': float(value)}})
        elif study.parameter == 'use_tree':
            cells.append({'value': bool(value), 'trials': cfg.annealing.trials,
                          'overrides': {'use_tree': bool(value)}})
        elif study.parameter in SCENARIO_PARAMETERS:
            cells.append({'value': value, 'trials': cfg.annealing.trials, 'overrides': {}})
        else:
            raise ConfigError(f"Unknown study parameter '{study.parameter}'")
    return cells


def fit_loglog(x: np.ndarray, y: np.ndarray) -> Optional[Dict[str, float]]:
    """Least-squares line log y = slope log x + intercept over positive finite pairs."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    keep = np.isfinite(x) & np.isfinite(y) & (x > 0) & (y > 0)
    if keep.sum() < 2:
        return None
    slope, intercept = np.polyfit(np.log(x[keep]), np.log(y[keep]), 1)
    return {'slope': float(slope), 'intercept': float(intercept), 'rate': float(-slope)}


def summarize_runs(runs: pd.DataFrame) -> pd.DataFrame:
    """Per-cell means and maximum deviations from the mean."""
    def max_dev(values: pd.Series) -> float:
        return float(np.max(np.abs(values - values.mean()))) if values.notna().any() else np.nan

    grouped = runs.groupby(['value', 'trials'], sort=True)
    summary = grouped.agg(repeats=('repeat', 'count'),
                          ks_mean=('ks', 'mean'),
                          ks_maxdev=('ks', max_dev),
                          ks_std=('ks', 'std'),
                          qoi_mean=('mean', 'mean'),
                          qoi_std=('std', 'mean'),
                          qoi_std_maxdev=('std', max_dev),
                          runtime_mean=('runtime', 'mean'),
                          eval_seconds_mean=('eval_seconds', 'mean'))
    return summary.reset_index()


def run_study(cfg: RunConfig, seed: int, threads: Optional[int] = None,
              repeats: Optional[int] = None) -> StudyReport:
    """
    Run every cell of the configured sweep `repeats` times.

    Repeat r of every cell uses the same seed, derived from the root seed,
    so cells differ only in the swept parameter. Data-size sweeps draw a
    fresh data set per run; other sweeps share the data of the base seed.
    """
    study = cfg.study
    if study is None:
        raise ConfigError(f"Config '{cfg.name}' has no study section")
    repeats = repeats or study.repeats
    seeds = [child_seed(substream(seed, 'study', r)) for r in range(repeats)]
    cells = _cells(cfg)
    logger.info(f"Study '{cfg.name}': {study.parameter} over {len(cells)} cells x {repeats} repeats")

    shared: Optional[Scenario] = None
    shared_reference = None
    if study.parameter not in SCENARIO_PARAMETERS:
        shared = build_scenario(cfg, seed)
        shared_reference = build_reference(cfg, shared, seed)

    rows = []
    for cell in cells:
        for r, run_seed in enumerate(seeds):
            if study.parameter == 'data_size':
                scenario = build_scenario(cfg, run_seed, data_size=int(cell['value']))
                reference = build_reference(cfg, scenario, seed)
            elif study.parameter == 'displacement':
                scenario = build_scenario(cfg, seed, magnitude=float(cell['value']))
                reference = build_reference(cfg, scenario, seed)
            else:
                scenario, reference = shared, shared_reference
            outcome = anneal(cfg, scenario, run_seed, threads, cell['overrides'])
            samples = outcome.samples
            rows.append({'value': cell['value'], 'trials': cell['trials'], 'repeat': r, 'seed': run_seed,
                         'population': len(samples), 'mean': float(np.mean(samples)),
                         'std': float(np.std(samples)),
                         'ks': reference.ks(samples) if reference is not None else np.nan,
                         'ml_estimate': outcome.ml_estimate, 'runtime': outcome.runtime,
                         'eval_seconds': outcome.eval_seconds,
                         'beta_f': float(np.mean(list(outcome.target_betas.values())))})
            logger.info(f"  {study.parameter}={cell['value']} trials={cell['trials']} repeat {r}: "
                        f"ks={rows[-1]['ks']:.4g} mean={rows[-1]['mean']:.6g} t={outcome.runtime:.1f}s")

    runs = pd.DataFrame(rows)
    summary = summarize_runs(runs)
    fit = None
    if study.parameter in ('data_size', 'population'):
        fit = fit_loglog(summary['value'].to_numpy(), summary['ks_mean'].to_numpy())
        if fit is not None:
            logger.info(f"✓ log-log fit of KS error vs {study.parameter}: slope {fit['slope']:.3f}")
    return StudyReport(study.parameter, runs, summary, fit)
