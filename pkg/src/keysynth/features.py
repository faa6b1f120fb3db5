"""Keystroke event model, timing features and timestamp reconstruction.

A sample of ``K`` keys yields ``K - 1`` feature steps. Step ``j`` holds

    hold           release[j] - press[j]
    inter_press    press[j+1] - press[j]
    inter_release  release[j+1] - release[j]
    inter_key      press[j+1] - release[j]      (negative under rollover)
    key_norm       key_code[j] / 255

so the hold of the final key is not represented. All times are milliseconds.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple, Sequence

import numpy as np

from .errors import (
    CorpusIOError,
    InvalidKeyCode,
    MalformedSequence,
    NonCausalSequence,
    SequenceTooShort,
)

log = logging.getLogger(__name__)

KEY_CODE_MAX = 255
N_TIME_FEATURES = 4
FEATURE_NAMES = ("hold", "inter_press", "inter_release", "inter_key", "key_norm")
CSV_HEADER = ("subject_id", "sample_id", "key_code", "press_time_ms", "release_time_ms")


class KeyEvent(NamedTuple):
    key_code: int
    press_time: float
    release_time: float


class FeatureStep(NamedTuple):
    hold: float
    inter_press: float
    inter_release: float
    inter_key: float
    key_norm: float


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class KeystrokeSequence:
    """Press/release log of one typed sentence, stored column-wise."""

    subject_id: str
    sample_id: str
    key_codes: np.ndarray
    press: np.ndarray
    release: np.ndarray

    def __post_init__(self):
        codes = np.array(self.key_codes, dtype=np.int64).reshape(-1)
        press = np.array(self.press, dtype=np.float64).reshape(-1)
        release = np.array(self.release, dtype=np.float64).reshape(-1)
        if not (len(codes) == len(press) == len(release)):
            raise MalformedSequence(
                f"column lengths differ: {len(codes)}, {len(press)}, {len(release)}"
            )
        object.__setattr__(self, "key_codes", _frozen(codes))
        object.__setattr__(self, "press", _frozen(press))
        object.__setattr__(self, "release", _frozen(release))

    @classmethod
    def from_events(cls, subject_id: str, sample_id: str, events: Iterable) -> "KeystrokeSequence":
        rows = [KeyEvent(*e) for e in events]
        return cls(
            subject_id,
            sample_id,
            [r.key_code for r in rows],
            [r.press_time for r in rows],
            [r.release_time for r in rows],
        )

    def __len__(self) -> int:
        return len(self.key_codes)

    @property
    def events(self) -> list[KeyEvent]:
        return [
            KeyEvent(int(k), float(p), float(r))
            for k, p, r in zip(self.key_codes, self.press, self.release)
        ]

    def validate(self) -> "KeystrokeSequence":
        """Raise MalformedSequence unless every event invariant holds."""
        if len(self) == 0:
            raise MalformedSequence("sequence has no events")
        if np.any((self.key_codes < 0) | (self.key_codes > KEY_CODE_MAX)):
            raise MalformedSequence("key code outside [0, 255]")
        if not (np.all(np.isfinite(self.press)) and np.all(np.isfinite(self.release))):
            raise MalformedSequence("non-finite timestamp")
        if np.any(self.press < 0):
            raise MalformedSequence("negative press time")
        if np.any(self.release <= self.press):
            raise MalformedSequence("release time not after press time")
        if np.any(np.diff(self.press) <= 0):
            raise MalformedSequence("press times not strictly increasing")
        return self

    def same_timing(self, other: "KeystrokeSequence") -> bool:
        return (
            np.array_equal(self.key_codes, other.key_codes)
            and np.array_equal(self.press, other.press)
            and np.array_equal(self.release, other.release)
        )


@dataclass(frozen=True, eq=False)
class FeatureSequence:
    """Per-step feature matrix of shape ``(n_steps, 5)``; columns follow FEATURE_NAMES."""

    subject_id: str
    sample_id: str
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[1] != len(FEATURE_NAMES):
            raise MalformedSequence(f"feature matrix must be (n, 5), got {v.shape}")
        object.__setattr__(self, "values", _frozen(v))

    @property
    def n_steps(self) -> int:
        return self.values.shape[0]

    @property
    def n_keys(self) -> int:
        return self.n_steps + 1

    hold = property(lambda self: self.values[:, 0])
    inter_press = property(lambda self: self.values[:, 1])
    inter_release = property(lambda self: self.values[:, 2])
    inter_key = property(lambda self: self.values[:, 3])
    key_norm = property(lambda self: self.values[:, 4])

    @property
    def steps(self) -> list[FeatureStep]:
        return [FeatureStep(*map(float, row)) for row in self.values]


def normalize_key(code):
    """Map a byte key code (scalar or array) onto [0, 1]."""
    arr = np.asarray(code)
    if arr.dtype.kind not in "iu" and not (
        arr.dtype.kind == "f" and np.all(np.isfinite(arr)) and np.all(arr == np.round(arr))
    ):
        raise InvalidKeyCode(f"key code must be an integer, got {code!r}")
    if np.any((arr < 0) | (arr > KEY_CODE_MAX)):
        raise InvalidKeyCode(f"key code outside [0, {KEY_CODE_MAX}]: {code!r}")
    out = arr.astype(np.float64) / KEY_CODE_MAX
    return float(out) if out.ndim == 0 else out


def extract_features(seq: KeystrokeSequence) -> FeatureSequence:
    if len(seq) < 2:
        raise SequenceTooShort(f"need at least 2 events, got {len(seq)}")
    seq.validate()
    p, r = seq.press, seq.release
    values = np.column_stack(
        [
            r[:-1] - p[:-1],
            p[1:] - p[:-1],
            r[1:] - r[:-1],
            p[1:] - r[:-1],
            seq.key_codes[:-1] / KEY_CODE_MAX,
        ]
    )
    return FeatureSequence(seq.subject_id, seq.sample_id, values)


def reconstruct_timestamps(
    key_codes: Sequence[int],
    holds: Sequence[float],
    inter_keys: Sequence[float],
    subject_id: str = "synthetic",
    sample_id: str = "0",
) -> KeystrokeSequence:
    """Rebuild press/release times from hold and inter-key latencies.

    The event stream starts at zero and alternates hold, inter-key, hold, ...
    Raises NonCausalSequence (with ``.offending`` step indices) when a
    transition would not move the press time strictly forward.
    """
    codes = np.asarray(key_codes, dtype=np.int64)
    h = np.asarray(holds, dtype=np.float64)
    ik = np.asarray(inter_keys, dtype=np.float64)
    if len(h) != len(codes) or len(ik) != len(codes) - 1 or len(codes) == 0:
        raise MalformedSequence(
            f"expected len(holds)=len(keys)={len(codes)} and len(inter_keys)={len(codes) - 1}"
        )
    if np.any((codes < 0) | (codes > KEY_CODE_MAX)):
        raise InvalidKeyCode("key code outside [0, 255]")
    if not (np.all(np.isfinite(h)) and np.all(np.isfinite(ik))):
        raise MalformedSequence("non-finite timing value")
    if np.any(h <= 0):
        raise MalformedSequence("hold latencies must be positive")

    gaps = np.empty(2 * len(codes) - 1)
    gaps[0::2] = h
    gaps[1::2] = ik
    t = np.concatenate([[0.0], np.cumsum(gaps)])
    press, release = t[0::2], t[1::2]
    bad = np.flatnonzero(np.diff(press) <= 0)
    if bad.size:
        err = NonCausalSequence(f"press times not increasing at steps {bad.tolist()}")
        err.offending = bad
        raise err
    return KeystrokeSequence(subject_id, sample_id, codes, press, release)


def truncate(fs: FeatureSequence, L: int) -> FeatureSequence | None:
    """Keep the first ``L - 1`` steps; None when the sample has fewer than ``L`` keys."""
    if L < 2:
        raise ValueError(f"L must be >= 2, got {L}")
    if fs.n_keys < L:
        return None
    if fs.n_keys == L:
        return fs
    return FeatureSequence(fs.subject_id, fs.sample_id, fs.values[: L - 1])


# -- event-log CSV ---------------------------------------------------------


def write_events_csv(sequences: Iterable[KeystrokeSequence], path) -> None:
    """Write samples in the canonical event-log format; floats use repr for exact round trips."""
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for seq in sequences:
                for k, p, r in zip(seq.key_codes, seq.press, seq.release):
                    w.writerow((seq.subject_id, seq.sample_id, int(k), repr(float(p)), repr(float(r))))
    except OSError as exc:
        raise CorpusIOError(f"cannot write {path}: {exc}") from exc


def _group_rows(reader) -> Iterator[tuple[str, str, list[tuple[str, str, str]]]]:
    current, rows = None, []
    for rec in reader:
        key = (rec["subject_id"], rec["sample_id"])
        if key != current and rows:
            yield current[0], current[1], rows
            rows = []
        current = key
        rows.append((rec["key_code"], rec["press_time_ms"], rec["release_time_ms"]))
    if rows:
        yield current[0], current[1], rows


def read_events_csv(path) -> tuple[list[KeystrokeSequence], int]:
    """Parse an event-log CSV.

    Returns the valid samples in file order and the number of samples that
    were skipped because they violated an event invariant or would not parse.
    """
    path = Path(path)
    out: list[KeystrokeSequence] = []
    seen: set[tuple[str, str]] = set()
    skipped = 0
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            missing = set(CSV_HEADER) - set(reader.fieldnames or ())
            if missing:
                raise CorpusIOError(f"{path}: missing columns {sorted(missing)}")
            for subject, sample, rows in _group_rows(reader):
                try:
                    if (subject, sample) in seen:
                        raise MalformedSequence("sample rows are not contiguous")
                    seen.add((subject, sample))
                    codes = [int(k) for k, _, _ in rows]
                    press = [float(p) for _, p, _ in rows]
                    release = [float(r) for _, _, r in rows]
                    seq = KeystrokeSequence(subject, sample, codes, press, release).validate()
                except (ValueError, TypeError) as exc:
                    log.debug("skipping %s/%s: %s", subject, sample, exc)
                    skipped += 1
                    continue
                out.append(seq)
    except OSError as exc:
        raise CorpusIOError(f"cannot read {path}: {exc}") from exc
    return out, skipped
