"""Command-line entry point: ``keysynth <subcommand> ...``.

Exit codes: 0 on success, 1 when a component fails (the error class name is
printed on stderr as ``error: <Name>: <message>``), 2 for usage errors.
Stochastic subcommands require ``--seed``; nothing reads the clock or OS
entropy. Reports and scores go to stdout or ``--out``; diagnostics go to stderr.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .corpus import Corpus, PseudoHumanProfile, generate_pseudo_human, load_corpus, save_corpus
from .detectors import KINDS, DetectorConfig, DetectorModel, fit_detector, vectorize
from .errors import CorpusIOError, KeysynthError
from .features import extract_features, truncate, write_events_csv
from .gnn import GnnConfig, GnnModel, synthesize_gnn, train_gnn
from .harness import (
    ExperimentConfig,
    UserDepSynth,
    derive_rng,
    emit_report,
    report_table,
    run_experiment,
)
from .kde import DEFAULT_BANDWIDTH, UniversalModel, UserDependentModel, fit_universal, fit_user_dependent, synthesize_kde
from .persist import load_model, save_model

log = logging.getLogger("keysynth")
U64 = 2**64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def seed_arg(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed {text!r}") from None
    if not 0 <= v < U64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _read_json(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(d, dict):
        raise UsageError(f"config {path} must hold a JSON object")
    return d


def _existing(path) -> Path:
    p = Path(path)
    if not p.is_file():
        raise CorpusIOError(f"no such file: {path}")
    return p


def _load(path) -> Corpus:
    corpus = load_corpus(_existing(path))
    if corpus.n_skipped:
        print(f"{path}: skipped {corpus.n_skipped} malformed samples", file=sys.stderr)
    return corpus


def _out_dir_ok(path: str) -> Path:
    p = Path(path)
    if not p.parent.exists() and str(p.parent) not in ("", "."):
        raise CorpusIOError(f"output directory does not exist: {p.parent}")
    return p


# -- subcommands ----------------------------------------------------------------


def cmd_fit_universal(a) -> None:
    humans = _load(a.data)
    save_model(fit_universal(humans.features(), a.bandwidth), _out_dir_ok(a.out))


def cmd_fit_userdep(a) -> None:
    humans = _load(a.data)
    save_model(fit_user_dependent(humans.features(), a.bandwidth), _out_dir_ok(a.out))


def cmd_train_gnn(a) -> None:
    cfg = dict(_read_json(a.config)) if a.config else {}
    for key in ("max_epochs", "max_pairs", "hidden", "lr", "batch_size"):
        v = getattr(a, key)
        if v is not None:
            cfg[key] = v
    try:
        config = GnnConfig(**cfg)
    except TypeError as exc:
        raise UsageError(f"bad GNN config: {exc}") from exc
    data, out = _existing(a.data), _out_dir_ok(a.out)
    model = train_gnn(_load(data).features(), config, a.seed)
    for i, h in enumerate(model.history, start=1):
        print(f"f{i}: {len(h)} epochs, final NLL {h[-1]:.6f}", file=sys.stderr)
    save_model(model, out)


def cmd_synth(a) -> None:
    model = load_model(_existing(a.model))
    text = _load(a.text_from)
    out = _out_dir_ok(a.out)
    slots: dict[str, int] = {}
    synth = []
    for seq in text:
        slot = slots.setdefault(seq.subject_id, len(slots))
        rng = derive_rng(a.seed, "synth", slot, seq.sample_id)
        sid = f"bot-{seq.subject_id}"
        if isinstance(model, UserDependentModel):
            user = UserDepSynth(model, a.seed).user_for(slot)
            synth.append(synthesize_kde(user, seq.key_codes, rng, sid, seq.sample_id))
        elif isinstance(model, UniversalModel):
            synth.append(synthesize_kde(model, seq.key_codes, rng, sid, seq.sample_id))
        elif isinstance(model, GnnModel):
            synth.append(synthesize_gnn(model, seq.key_codes, rng, sid, seq.sample_id))
        else:
            raise UsageError(f"{a.model} is not a generator model")
    write_events_csv(synth, out)
    print(f"wrote {len(synth)} synthetic samples to {out}", file=sys.stderr)


def _vectors(path, L: int, use_keys: bool):
    corpus = _load(path)
    kept, rows = [], []
    for seq in corpus:
        t = truncate(extract_features(seq), L) if len(seq) >= 2 else None
        if t is not None:
            kept.append(seq)
            rows.append(vectorize(t, L, use_keys))
    dropped = len(corpus) - len(kept)
    if dropped:
        print(f"{path}: skipped {dropped} samples shorter than {L} keys", file=sys.stderr)
    return kept, np.asarray(rows).reshape(len(rows), -1)


def cmd_train_detector(a) -> None:
    cfg = DetectorConfig.from_dict(_read_json(a.config) if a.config else None)
    use_keys = bool(a.keys)
    out = _out_dir_ok(a.out)
    _, Xh = _vectors(a.human, a.length, use_keys)
    if a.kind == "ocsvm":
        X, y = Xh, np.zeros(len(Xh), dtype=np.int64)
    else:
        if a.bot is None:
            raise UsageError(f"--bot is required for {a.kind}")
        _, Xb = _vectors(a.bot, a.length, use_keys)
        X = np.concatenate([Xh, Xb]) if len(Xb) else Xh
        y = np.concatenate([np.zeros(len(Xh)), np.ones(len(Xb))]).astype(np.int64)
    model = fit_detector(a.kind, X, y, cfg, derive_rng(a.seed, "detector", a.kind), 5 if use_keys else 4)
    save_model(model, out)


def cmd_score(a) -> None:
    model = load_model(_existing(a.model))
    if not isinstance(model, DetectorModel):
        raise UsageError(f"{a.model} is not a detector model")
    L = model.dim // model.step_width + 1
    seqs, X = _vectors(a.inp, L, model.step_width == 5)
    labels, scores = model.predict(X) if len(X) else (np.empty(0, int), np.empty(0))
    fh = open(_out_dir_ok(a.out), "w", encoding="utf-8", newline="") if a.out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("subject_id", "sample_id", "label", "score"))
        for seq, lab, s in zip(seqs, labels, scores):
            w.writerow((seq.subject_id, seq.sample_id, int(lab), repr(float(s))))
    finally:
        if fh is not sys.stdout:
            fh.close()


def cmd_run_grid(a) -> None:
    raw = _read_json(a.config) if a.config else {}
    try:
        cfg = ExperimentConfig.from_dict(raw)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad grid config: {exc}") from exc
    if a.seed is not None:
        cfg = cfg.with_seed(a.seed)
    elif "seed" not in raw:
        raise UsageError("run-grid needs a seed: pass --seed or set \"seed\" in the config")
    if a.data is not None:
        cfg = replace(cfg, data=str(_existing(a.data)))

    def progress(row):
        acc = "ERR" if row.accuracy is None else f"{row.accuracy:.4f}"
        print(
            f"{row.generator_train}->{row.generator_test} n={row.n_train_subjects} "
            f"{row.detector} K={row.K}: {acc} {row.status}",
            file=sys.stderr,
            flush=True,
        )

    rows = run_experiment(cfg, progress=progress)
    out = Path(a.out)
    emit_report(rows, out)
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    sys.stdout.write(report_table(rows))


def cmd_gen_pseudo_human(a) -> None:
    profile = PseudoHumanProfile()
    if a.profile:
        try:
            profile = replace(profile, **_read_json(a.profile))
        except TypeError as exc:
            raise UsageError(f"bad profile: {exc}") from exc
    corpus = generate_pseudo_human(a.subjects, a.samples, derive_rng(a.seed, "humans"), profile)
    save_corpus(corpus, _out_dir_ok(a.out))


# -- parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="keysynth", description="Synthesize keystroke timings and train human-vs-bot detectors.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_, description=help_)
        sp.set_defaults(fn=fn)
        return sp

    for name, fn, what in (
        ("fit-universal", cmd_fit_universal, "Fit the pooled (universal) KDE generator on an event CSV."),
        ("fit-userdep", cmd_fit_userdep, "Fit one KDE generator per subject of an event CSV."),
    ):
        sp = add(name, fn, what)
        sp.add_argument("--data", required=True, help="human event CSV")
        sp.add_argument("--out", required=True, help="model file to write (JSON)")
        sp.add_argument("--bandwidth", type=float, default=DEFAULT_BANDWIDTH, help="Gaussian kernel width in ms")

    sp = add("train-gnn", cmd_train_gnn, "Train the key-conditional generative network on an event CSV.")
    sp.add_argument("--data", required=True, help="human event CSV")
    sp.add_argument("--out", required=True, help="model file to write (JSON)")
    sp.add_argument("--seed", type=seed_arg, required=True)
    sp.add_argument("--config", help="JSON object of GNN hyperparameters")
    sp.add_argument("--max-epochs", dest="max_epochs", type=int)
    sp.add_argument("--max-pairs", dest="max_pairs", type=int, help="subsample training pairs per feature")
    sp.add_argument("--hidden", type=int)
    sp.add_argument("--lr", type=float)
    sp.add_argument("--batch-size", dest="batch_size", type=int)

    sp = add("synth", cmd_synth, "Type the key sequences of an event CSV with a fitted generator.")
    sp.add_argument("--model", required=True, help="universal, user-dependent or GNN model file")
    sp.add_argument("--text-from", dest="text_from", required=True, help="event CSV supplying key sequences")
    sp.add_argument("--seed", type=seed_arg, required=True)
    sp.add_argument("--out", required=True, help="synthetic event CSV to write")

    sp = add("train-detector", cmd_train_detector, "Train a human-vs-bot detector on truncated samples.")
    sp.add_argument("--kind", required=True, choices=KINDS)
    sp.add_argument("--human", required=True, help="human event CSV")
    sp.add_argument("--bot", help="bot event CSV (not used by ocsvm)")
    sp.add_argument("--keys", type=int, choices=(0, 1), default=0, help="include key codes (1) or not (0)")
    sp.add_argument("--length", type=int, default=30, help="keys kept per sample; shorter samples are skipped")
    sp.add_argument("--seed", type=seed_arg, required=True)
    sp.add_argument("--config", help="JSON object of detector hyperparameters")
    sp.add_argument("--out", required=True, help="model file to write (JSON)")

    sp = add("score", cmd_score, "Score samples with a trained detector; prints label and score CSV.")
    sp.add_argument("--model", required=True)
    sp.add_argument("--in", dest="inp", required=True, help="event CSV to score")
    sp.add_argument("--out", help="write CSV here instead of stdout")

    sp = add("run-grid", cmd_run_grid, "Run a detection grid and write report.csv and report.txt.")
    sp.add_argument("--config", help="JSON experiment config; omitted keys take desk-scale defaults")
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--seed", type=seed_arg, help="overrides the config seed")
    sp.add_argument("--data", help="human event CSV; overrides the config and replaces the pseudo-human corpus")

    sp = add("gen-pseudo-human", cmd_gen_pseudo_human, "Write a simulated human typing corpus as event CSV.")
    sp.add_argument("--subjects", type=int, default=1200)
    sp.add_argument("--samples", type=int, default=15, help="samples per subject")
    sp.add_argument("--profile", help="JSON object overriding typing-profile fields")
    sp.add_argument("--seed", type=seed_arg, required=True)
    sp.add_argument("--out", required=True)
    return p


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr)
        args.fn(args)
    except UsageError as exc:
        print(f"error: usage: {exc}", file=sys.stderr)
        return 2
    except KeysynthError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
