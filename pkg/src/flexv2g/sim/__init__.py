"""Scenario sampling, baselines and seeded experiments."""

from .datasets import DatasetBundle, DatasetPaths, bundled_paths, load_datasets
from .experiment import (BASELINES, ExperimentResult, arbitrage_threshold_check, average_delay_minutes,
                         run_experiment, schedule_baseline)
from .scenarios import StationConfig, random_toy, sample_scenario
from .config import ExperimentConfig
