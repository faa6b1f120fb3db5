"""Shared sample-assembly path for every generator.

A generator only has to supply ``draw(feature, codes, rng)`` returning one
value of time feature ``feature`` (1..4) per entry of ``codes``. Holds are
drawn per key, transition features per key pair (conditioned on the first
key). Only holds and inter-key latencies feed the timestamp reconstruction;
inter-press and inter-release are drawn for completeness and then
discarded, so re-extracting features from the output yields values that are
consistent with the reconstructed timestamps.
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import NonCausalSequence, SamplingExhausted, SequenceTooShort
from .features import KeystrokeSequence, reconstruct_timestamps

MAX_RETRIES = 100

DrawFn = Callable[[int, np.ndarray, np.random.Generator], np.ndarray]


def assemble_sample(
    draw: DrawFn,
    key_codes: Sequence[int],
    rng: np.random.Generator,
    subject_id: str = "synthetic",
    sample_id: str = "0",
    max_retries: int = MAX_RETRIES,
    condition_on: str = "first",
) -> KeystrokeSequence:
    """Draw features for ``key_codes`` and rebuild a causal event log.

    ``condition_on`` picks which key of each pair the transition features
    are drawn for ("first" or "second"). Steps whose draws would make press
    times non-increasing get their hold and inter-key redrawn.
    """
    codes = np.asarray(key_codes, dtype=np.int64)
    if len(codes) < 2:
        raise SequenceTooShort(f"need at least 2 key codes, got {len(codes)}")
    if condition_on not in ("first", "second"):
        raise ValueError(f"condition_on must be 'first' or 'second', got {condition_on!r}")
    pair_codes = codes[:-1] if condition_on == "first" else codes[1:]
    holds = draw(1, codes, rng)
    draw(2, pair_codes, rng)
    draw(3, pair_codes, rng)
    inter_keys = draw(4, pair_codes, rng)

    for _ in range(max_retries + 1):
        try:
            return reconstruct_timestamps(codes, holds, inter_keys, subject_id, sample_id)
        except NonCausalSequence as err:
            bad = err.offending
            holds = holds.copy()
            inter_keys = inter_keys.copy()
            holds[bad] = draw(1, codes[bad], rng)
            inter_keys[bad] = draw(4, pair_codes[bad], rng)
    raise SamplingExhausted(f"non-causal draws persisted after {max_retries} resamples")
