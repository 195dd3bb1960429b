"""CLI harness: configs, presets, sweeps, lemma suites, reporting."""

from .config import ExperimentConfig, GeneratorConfig, emit_config, load_config, parse_config
from .lemmas import LemmaCheck, lemmas_csv, verify_lemmas
from .presets import PRESET_NAMES, preset
from .sweep import SweepReport, fit_slope, run_uniform_sweep, summary_csv, sweep_csv
