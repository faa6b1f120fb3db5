"""A reduced experiment grid, printed as an accuracy table.

The full desk-scale run (1,200 simulated typists, 108 cells) is
``run_experiment(ExperimentConfig(seed=0))``; this one shrinks every axis so
it finishes in about a minute.
"""
from __future__ import annotations

from keysynth import ExperimentConfig, report_table, run_experiment

cfg = ExperimentConfig.from_dict(
    {
        "seed": 7,
        "pseudo_human": {"n_subjects": 150, "samples_per_subject": 15},
        "synth": {"gnn": {"max_epochs": 20, "max_pairs": 20000}},
        "grid": {
            "generators": ["universal", "gnn"],
            "open_pairs": [["universal", "gnn"]],
            "detectors": ["ocsvm", "svm", "gnb", "rf"],
            "sizes": [20, 60],
            "eval_subjects": 50,
        },
    }
)
rows = run_experiment(cfg)
print(report_table(rows))
