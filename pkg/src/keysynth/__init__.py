"""Synthetic keystroke timing generators and human-vs-bot detectors.

The package covers the full loop: timing features from press/release logs,
three generators (universal and user-dependent kernel density models and a
key-conditioned neural generator), six detectors, and an experiment harness
that pits each detector against each generator.
"""
from __future__ import annotations

from .corpus import Corpus, PseudoHumanProfile, generate_pseudo_human, load_corpus, save_corpus
from .detectors import KINDS, DetectorConfig, DetectorModel, accuracy, fit_detector, predict, vectorize
from .errors import KeysynthError
from .features import (
    FeatureSequence,
    KeyEvent,
    KeystrokeSequence,
    extract_features,
    normalize_key,
    read_events_csv,
    reconstruct_timestamps,
    truncate,
    write_events_csv,
)
from .gnn import GnnConfig, GnnModel, gnn_forward, gnn_sample, nll_loss, synthesize_gnn, train_gnn
from .harness import (
    ExperimentConfig,
    GridConfig,
    Scenario,
    ScenarioBuilder,
    build_scenario,
    derive_rng,
    emit_report,
    fit_synthesizers,
    report_csv,
    report_table,
    run_experiment,
    run_grid,
)
from .kde import KdeModel, fit_universal, fit_user_dependent, kde_density, kde_fit, kde_sample, synthesize_kde
from .persist import load_model, save_model

__version__ = "0.1.0"

__all__ = [
    "KINDS",
    "Corpus",
    "DetectorConfig",
    "DetectorModel",
    "ExperimentConfig",
    "FeatureSequence",
    "GnnConfig",
    "GnnModel",
    "GridConfig",
    "KdeModel",
    "KeyEvent",
    "KeysynthError",
    "KeystrokeSequence",
    "PseudoHumanProfile",
    "Scenario",
    "ScenarioBuilder",
    "accuracy",
    "build_scenario",
    "derive_rng",
    "emit_report",
    "extract_features",
    "fit_detector",
    "fit_synthesizers",
    "fit_universal",
    "fit_user_dependent",
    "generate_pseudo_human",
    "gnn_forward",
    "gnn_sample",
    "kde_density",
    "kde_fit",
    "kde_sample",
    "load_corpus",
    "load_model",
    "nll_loss",
    "normalize_key",
    "predict",
    "read_events_csv",
    "reconstruct_timestamps",
    "report_csv",
    "report_table",
    "run_experiment",
    "run_grid",
    "save_corpus",
    "save_model",
    "synthesize_gnn",
    "synthesize_kde",
    "train_gnn",
    "truncate",
    "vectorize",
    "write_events_csv",
]
