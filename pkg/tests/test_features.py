from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from keysynth.errors import (
    CorpusIOError,
    InvalidKeyCode,
    MalformedSequence,
    NonCausalSequence,
    SequenceTooShort,
)
from keysynth.features import (
    KeyEvent,
    KeystrokeSequence,
    extract_features,
    normalize_key,
    read_events_csv,
    reconstruct_timestamps,
    truncate,
    write_events_csv,
)


def seq(events, sid="u", sample="s"):
    return KeystrokeSequence.from_events(sid, sample, events)


def random_sequence(rng, n, rollover=0.1):
    codes = rng.integers(0, 256, n)
    holds = rng.uniform(30, 250, n)
    gaps = rng.uniform(0, 400, n - 1)
    roll = rng.random(n - 1) < rollover
    gaps[roll] = -rng.uniform(0.05, 0.9, roll.sum()) * holds[:-1][roll]
    return reconstruct_timestamps(codes, holds, gaps), holds, gaps


# -- extraction -------------------------------------------------------------------


def test_two_key_example():
    fs = extract_features(seq([(65, 0, 100), (66, 150, 270)]))
    (step,) = fs.steps
    assert step.hold == 100
    assert step.inter_press == 150
    assert step.inter_release == 170
    assert step.inter_key == 50
    assert step.key_norm == 65 / 255


def test_rollover_gives_negative_inter_key():
    (step,) = extract_features(seq([(72, 0, 120), (73, 80, 200)])).steps
    assert (step.hold, step.inter_press, step.inter_release, step.inter_key) == (120, 80, 80, -40)


def test_identities_on_random_30_key_sample():
    rng = np.random.default_rng(3)
    s, _, _ = random_sequence(rng, 30, rollover=0.3)
    fs = extract_features(s)
    assert fs.n_steps == 29
    p, r = s.press, s.release
    # recomputed directly from the raw timestamps
    np.testing.assert_allclose(fs.inter_press, fs.hold + fs.inter_key, atol=1e-9)
    np.testing.assert_allclose(fs.inter_release, fs.inter_key + (r[1:] - p[1:]), atol=1e-9)
    np.testing.assert_allclose(fs.inter_release[:-1], fs.inter_key[:-1] + fs.hold[1:], atol=1e-9)


def test_final_hold_is_dropped():
    fs = extract_features(seq([(1, 0, 10), (2, 20, 35), (3, 50, 99)]))
    np.testing.assert_array_equal(fs.hold, [10, 15])


def test_too_short_and_malformed():
    with pytest.raises(SequenceTooShort):
        extract_features(seq([(65, 0, 100)]))
    with pytest.raises(MalformedSequence):
        extract_features(seq([(65, 0, 100), (66, 0, 120)]))  # coinciding presses
    with pytest.raises(MalformedSequence):
        extract_features(seq([(65, 0, 0), (66, 10, 120)]))  # zero hold
    with pytest.raises(MalformedSequence):
        extract_features(seq([(300, 0, 10), (66, 20, 120)]))


def test_sequence_arrays_are_read_only():
    s = seq([(65, 0, 100), (66, 150, 270)])
    with pytest.raises(ValueError):
        s.press[0] = 5.0
    assert s.events[1] == KeyEvent(66, 150.0, 270.0)


# -- reconstruction ---------------------------------------------------------------


def test_reconstruct_single_key():
    s = reconstruct_timestamps([65], [100.0], [])
    assert s.press.tolist() == [0.0] and s.release.tolist() == [100.0]


def test_reconstruct_two_keys():
    s = reconstruct_timestamps([65, 66], [100.0, 120.0], [50.0])
    assert [s.press[0], s.release[0], s.press[1], s.release[1]] == [0, 100, 150, 270]


def test_reconstruct_non_causal_reports_offending_steps():
    with pytest.raises(NonCausalSequence) as info:
        reconstruct_timestamps([1, 2, 3], [50.0, 50.0, 50.0], [10.0, -60.0])
    assert info.value.offending.tolist() == [1]


def test_reconstruct_rejects_bad_lengths_and_holds():
    with pytest.raises(MalformedSequence):
        reconstruct_timestamps([1, 2], [10.0], [5.0])
    with pytest.raises(MalformedSequence):
        reconstruct_timestamps([1, 2], [10.0, -1.0], [5.0])


def test_round_trip_1000_random_inputs():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        n = int(rng.integers(2, 60))
        s, holds, gaps = random_sequence(rng, n)
        fs = extract_features(s)
        assert np.max(np.abs(fs.hold - holds[:-1])) <= 1e-9
        assert np.max(np.abs(fs.inter_key - gaps)) <= 1e-9


timing = st.floats(min_value=0.5, max_value=2000, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.tuples(st.integers(0, 255), timing, st.floats(0.0, 0.99), timing, st.booleans()), min_size=2, max_size=40)
)
def test_round_trip_property(rows):
    codes = [r[0] for r in rows]
    holds = np.array([r[1] for r in rows])
    # rollover gaps are a fraction of the previous hold, so press times stay increasing
    gaps = np.array([-r[2] * h if r[4] else r[3] for r, h in zip(rows[:-1], holds[:-1])])
    s = reconstruct_timestamps(codes, holds, gaps)
    fs = extract_features(s)
    scale = max(1.0, float(s.release.max()))
    np.testing.assert_allclose(fs.hold, holds[:-1], atol=1e-12 * scale + 1e-9)
    np.testing.assert_allclose(fs.inter_key, gaps, atol=1e-12 * scale + 1e-9)
    np.testing.assert_allclose(fs.inter_press, fs.hold + fs.inter_key, atol=1e-9)
    again = reconstruct_timestamps(codes, np.append(fs.hold, holds[-1]), fs.inter_key)
    np.testing.assert_allclose(again.press, s.press, atol=1e-9)


# -- truncation and key codes ---------------------------------------------------


@pytest.mark.parametrize("keys,steps", [(40, 29), (30, 29), (12, None)])
def test_truncate(keys, steps):
    s, _, _ = random_sequence(np.random.default_rng(keys), keys)
    t = truncate(extract_features(s), 30)
    if steps is None:
        assert t is None
    else:
        assert t.n_steps == steps
        np.testing.assert_array_equal(t.values, extract_features(s).values[:steps])


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 60), st.integers(2, 40))
def test_truncate_idempotent(n, L):
    s, _, _ = random_sequence(np.random.default_rng(n), n)
    t = truncate(extract_features(s), L)
    if t is None:
        return
    np.testing.assert_array_equal(truncate(t, L).values, t.values)


def test_truncate_rejects_small_L():
    s, _, _ = random_sequence(np.random.default_rng(0), 5)
    with pytest.raises(ValueError):
        truncate(extract_features(s), 1)


def test_normalize_key():
    assert normalize_key(0) == 0.0
    assert normalize_key(255) == 1.0
    assert normalize_key(65) == pytest.approx(0.2549, abs=1e-4)
    v = normalize_key(np.arange(256))
    assert np.all(np.diff(v) > 0) and len(np.unique(v)) == 256
    for bad in (-1, 256, 3.5):
        with pytest.raises(InvalidKeyCode):
            normalize_key(bad)


# -- event CSV --------------------------------------------------------------------


def test_csv_round_trip_is_exact(tmp_path):
    rng = np.random.default_rng(1)
    seqs = []
    for i in range(3):
        for j in range(2):
            s = random_sequence(rng, 20)[0]
            # offset so times carry awkward binary fractions
            seqs.append(KeystrokeSequence(f"u{i}", f"s{j}", s.key_codes, s.press + 0.1, s.release + 0.1))
    path = tmp_path / "ev.csv"
    write_events_csv(seqs, path)
    back, skipped = read_events_csv(path)
    assert skipped == 0
    assert len(back) == 6
    assert all(a.same_timing(b) and (a.subject_id, a.sample_id) == (b.subject_id, b.sample_id) for a, b in zip(seqs, back))


def test_csv_skips_invalid_samples(tmp_path):
    path = tmp_path / "ev.csv"
    path.write_text(
        "subject_id,sample_id,key_code,press_time_ms,release_time_ms\n"
        "a,1,65,0,100\na,1,66,150,270\n"
        "a,2,65,0,100\na,2,66,50,40\n"  # release before press
        "b,1,x,0,1\n"
    )
    seqs, skipped = read_events_csv(path)
    assert [(s.subject_id, s.sample_id) for s in seqs] == [("a", "1")]
    assert skipped == 2


def test_csv_missing_columns_and_file(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("subject_id,key_code\n")
    with pytest.raises(CorpusIOError):
        read_events_csv(path)
    with pytest.raises(CorpusIOError):
        read_events_csv(tmp_path / "missing.csv")
