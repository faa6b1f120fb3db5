"""Keystroke corpora: loading, saving and the pseudo-human generator.

The pseudo-human generator is a structured stand-in for a real keystroke
dataset. Each subject gets a latent typing profile:

* a personal hold level and typing speed (log-normal across subjects),
* key-specific timing offsets shared by the population plus small personal ones,
* serially correlated (AR(1), log-space) inter-key noise,
* occasional long pauses, mostly at word boundaries,
* a personal rollover rate: the next key pressed before the current one is released.

It types sentences drawn from a small English vocabulary, one sentence per sample.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.signal import lfilter

from .errors import EmptyCorpus
from .features import KeystrokeSequence, extract_features, read_events_csv, write_events_csv

WORDS = (
    "the be to of and a in that have it for not on with he as you do at this but his by from "
    "they we say her she or an will my one all would there their what so up out if about who "
    "get which go me when make can like time no just him know take people into year your good "
    "some could them see other than then now look only come its over think also back after use "
    "two how our work first well way even new want because any these give day most us is was "
    "are been has had were said did made find where still long down place right through little "
    "world very great old same tell boy follow came show around form three small set put end "
    "does another large must big such turn here why ask went men read need land different home "
    "move try kind hand picture again change off play spell air away animal house point page "
    "letter mother answer found study learn should america earth father head stand own school "
    "quick brown fox jumps lazy dog river mountain window garden yellow purple keyboard typing"
).split()


@dataclass
class Corpus:
    sequences: list[KeystrokeSequence]
    provenance: str = "human"
    n_skipped: int = 0
    _index: dict = field(default=None, init=False, repr=False)

    def __len__(self) -> int:
        return len(self.sequences)

    def __iter__(self):
        return iter(self.sequences)

    def by_subject(self) -> dict[str, list[KeystrokeSequence]]:
        if self._index is None:
            idx: dict[str, list[KeystrokeSequence]] = {}
            for s in self.sequences:
                idx.setdefault(s.subject_id, []).append(s)
            self._index = idx
        return self._index

    @property
    def subjects(self) -> list[str]:
        return list(self.by_subject())

    def subset(self, subject_ids: Iterable[str]) -> "Corpus":
        groups = self.by_subject()
        seqs = [s for sid in subject_ids for s in groups[sid]]
        return Corpus(seqs, self.provenance)

    def features(self):
        return [extract_features(s) for s in self.sequences if len(s) >= 2]


def load_corpus(path, provenance: str = "human") -> Corpus:
    sequences, skipped = read_events_csv(path)
    if not sequences:
        raise EmptyCorpus(f"{path}: no valid samples ({skipped} skipped)")
    return Corpus(sequences, provenance, skipped)


def save_corpus(corpus: Corpus | Sequence[KeystrokeSequence], path) -> None:
    write_events_csv(corpus, Path(path))


@dataclass(frozen=True)
class PseudoHumanProfile:
    hold_ms: float = 95.0
    hold_subject_sd: float = 0.35
    hold_noise_sd: float = 0.12
    inter_key_ms: float = 110.0
    speed_subject_sd: float = 0.45
    inter_key_noise_sd: float = 0.35
    inter_key_ar: float = 0.5
    key_hold_sd: float = 0.15
    key_gap_sd: float = 0.25
    personal_key_sd: float = 0.08
    sample_speed_sd: float = 0.08
    space_pause: float = 1.4
    pause_prob: float = 0.02
    pause_range: tuple[float, float] = (2.0, 5.0)
    rollover_max: float = 0.10
    min_chars: int = 30
    max_chars: int = 70
    capitalize_prob: float = 0.3


def _sentence(rng: np.random.Generator, min_chars: int, max_chars: int) -> str:
    target = int(rng.integers(min_chars, max_chars + 1))
    while True:
        words: list[str] = []
        while len(" ".join(words)) < target:
            words.append(WORDS[int(rng.integers(len(WORDS)))])
        text = " ".join(words)
        if len(words) > 3 and len(text) > max_chars:
            text = " ".join(words[:-1])
        if min_chars <= len(text) <= max_chars and len(text.split()) >= 3:
            return text


def generate_pseudo_human(
    n_subjects: int,
    samples_per_subject: int = 15,
    rng: np.random.Generator | int = 0,
    profile: PseudoHumanProfile | None = None,
) -> Corpus:
    """Simulate ``n_subjects`` typists, each typing ``samples_per_subject`` sentences."""
    if n_subjects < 1:
        raise ValueError("n_subjects must be >= 1")
    p = profile or PseudoHumanProfile()
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)

    key_hold = np.exp(p.key_hold_sd * rng.standard_normal(256))
    key_gap = np.exp(p.key_gap_sd * rng.standard_normal(256))
    key_gap[ord(" ")] *= p.space_pause

    width = len(str(n_subjects - 1))
    sequences = []
    for u in range(n_subjects):
        hold_u = p.hold_ms * np.exp(p.hold_subject_sd * rng.standard_normal())
        gap_u = p.inter_key_ms * np.exp(p.speed_subject_sd * rng.standard_normal())
        own_hold = np.exp(p.personal_key_sd * rng.standard_normal(256))
        own_gap = np.exp(p.personal_key_sd * rng.standard_normal(256))
        rollover = rng.uniform(0.0, p.rollover_max)
        sid = f"u{u:0{width}d}"
        for s in range(samples_per_subject):
            text = _sentence(rng, p.min_chars, p.max_chars)
            if rng.random() < p.capitalize_prob:
                text = text[0].upper() + text[1:]
            codes = np.frombuffer(text.encode("ascii"), dtype=np.uint8).astype(np.int64)
            n = len(codes)
            speed = np.exp(p.sample_speed_sd * rng.standard_normal())
            holds = hold_u * key_hold[codes] * own_hold[codes] * np.exp(p.hold_noise_sd * rng.standard_normal(n))

            eps = rng.standard_normal(n - 1) * p.inter_key_noise_sd
            ar = lfilter([np.sqrt(1.0 - p.inter_key_ar**2)], [1.0, -p.inter_key_ar], eps)
            first = codes[:-1]
            gaps = gap_u * speed * key_gap[first] * own_gap[first] * np.exp(ar)
            pauses = rng.random(n - 1) < p.pause_prob
            gaps[pauses] *= rng.uniform(*p.pause_range, pauses.sum())
            rolled = rng.random(n - 1) < rollover
            gaps[rolled] = -rng.uniform(0.1, 0.7, rolled.sum()) * holds[:-1][rolled]

            press = np.concatenate([[0.0], np.cumsum(holds[:-1] + gaps)])
            sequences.append(KeystrokeSequence(sid, f"s{s:02d}", codes, press, press + holds))
    return Corpus(sequences, "human")
