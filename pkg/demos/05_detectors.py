"""Six detectors on one closed-set scenario.

Human and bot training samples come from disjoint subjects than the
evaluation samples. Each bot replays the key sequence of a paired human
sample, so only timing separates the classes.
"""
from __future__ import annotations

from keysynth import KINDS, DetectorConfig, ScenarioBuilder, accuracy, fit_detector, fit_synthesizers, generate_pseudo_human
from keysynth.harness import split_subjects

humans = generate_pseudo_human(160, 15, rng=3)
train_pool, eval_pool = split_subjects(humans, n_eval=60, seed=0, k=5)
synths = fit_synthesizers(train_pool, ["universal"])
builder = ScenarioBuilder(train_pool, eval_pool, synths, eval_subjects=60, eval_samples_per_subject=5)
train, test = builder.build(40, "universal", "universal")
print(f"training vectors: {len(train)}, evaluation vectors: {len(test)}")

config = DetectorConfig(lstm_epochs=30)
for kind in KINDS:
    row = []
    for keys in (False, True):
        X, y = train.X(keys), train.y
        if kind == "ocsvm":  # trained on humans only
            X, y = X[y == 0], None
        model = fit_detector(kind, X, y, config, rng=0)
        row.append(accuracy(model, test.X(keys), test.y))
    print(f"{kind:7s} K=0 {row[0]:.3f}   K=1 {row[1]:.3f}")
