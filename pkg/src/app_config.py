#!/usr/bin/env python3
"""
ddinfer - Application Configuration

Centralized library defaults for the data-driven inference engine. Run
specific values (scenario, population size, quench counts) live in the JSON
run configurations; the values here are the tunables shared by every run.
"""

from dataclasses import dataclass
from typing import Optional
import os


@dataclass
class AppConfig:
    """Application configuration settings."""

    # Search tree
    BRANCHING_FACTOR: int = 16
    LEAF_SIZE: int = 32
    KMEANS_MAX_ITER: int = 10

    # Likelihood evaluation
    TOL: float = 1e-16  # kernel cutoff, r_TOL^2 = -log(TOL)/beta
    N_CHECKS: Optional[int] = None  # None = exact radius search
    DIRECT_CHUNK_ELEMENTS: int = 2_000_000  # queries x points per direct-sum block

    # Population annealing
    TARGET_ACCEPTANCE: float = 0.25
    INITIAL_STEP: float = 1.0
    MIN_STEP_FRACTION: float = 1e-12  # floor for s_p relative to s_0
    MIN_DIST_MAX_ITERS: int = 100
    MOVE_CHUNK_SIZE: int = 256  # members per worker task

    # Constraint set
    NULLSPACE_RTOL: float = 1e-10
    PCA_SAMPLE_FACTOR: int = 10  # K = factor * N random points
    PCA_MAX_RETRIES: int = 3
    ADMISSIBILITY_TOL: float = 1e-8

    # Reporting
    HISTOGRAM_BINS: int = 60
    ORACLE_CDF_POINTS: int = 201
    REFERENCE_SAMPLES: int = 100_000  # Monte Carlo size for nonlinear QoI oracles
    STRAIN_RANGE_MARGIN: float = 3.0  # generator range vs elastic strains

    # File paths
    LOG_FILENAME: str = "ddinfer.log"
    SCENARIO_DIRECTORY: str = "scenarios"
    OUTPUT_DIRECTORY: str = "output"

    def get_scenario_path(self, name: str, base_path: Optional[str] = None) -> str:
        """Get the full path of a shipped scenario preset by name."""
        if base_path is None:
            # Project root (parent of src/)
            src_dir = os.path.dirname(os.path.abspath(__file__))
            base_path = os.path.dirname(src_dir)
        return os.path.join(base_path, self.SCENARIO_DIRECTORY, f"{name}.json")


# Global configuration instance
config = AppConfig()
