"""Kernel density generators: one pooled model, or one model per typist."""
from __future__ import annotations

import numpy as np

from keysynth import fit_universal, fit_user_dependent, generate_pseudo_human, kde_density, kde_fit, kde_sample, synthesize_kde

rng = np.random.default_rng(0)

# The building block is a 1-D Gaussian mixture with one kernel per observation.
m = kde_fit([100.0, 110.0, 250.0], bandwidth=5.0)
print("density at 105 ms:", round(float(kde_density(m, 105.0)), 5))
print("five draws:", kde_sample(m, rng, size=5).round(1))

# Fit both generators on a small simulated population.
humans = generate_pseudo_human(30, 10, rng=1)
feats = humans.features()
universal = fit_universal(feats)
per_user = fit_user_dependent(feats)
print(f"universal model pools {universal.f_models[0].n_points} hold values")
print(f"user-dependent model holds {len(per_user)} typists")

# A bot types the same text as a human sample. Only the timing is synthetic.
text = humans.sequences[0]
bot_u = synthesize_kde(universal, text.key_codes, rng)
bot_d = synthesize_kde(per_user.user(text.subject_id), text.key_codes, rng)


def holds(seq):
    return seq.release - seq.press


print("mean hold, human       :", holds(text).mean().round(1))
print("mean hold, universal   :", holds(bot_u).mean().round(1))
print("mean hold, same typist :", holds(bot_d).mean().round(1))
print("population mean hold   :", np.mean(np.concatenate([holds(s) for s in humans])).round(1))
