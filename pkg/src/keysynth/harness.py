"""Bot-detection experiments: scenarios, grids and reports.

A scenario pairs every selected human sample with one synthetic sample
typing the same key sequence. Training humans and evaluation humans come
from disjoint subject pools. Closed-set scenarios use the same generator
for training and evaluation bots; open-set scenarios use different ones.

Randomness is derived from the scenario seed and stable labels (side,
generator, subject position, grid cell), so a subject's bots never depend
on how many subjects a scenario uses, and grid cells can run in any order.
"""
from __future__ import annotations

import csv
import io
import logging
import math
import zlib
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import Corpus, PseudoHumanProfile, generate_pseudo_human, load_corpus
from .detectors import (
    BOT,
    HUMAN,
    KINDS,
    DetectorConfig,
    accuracy,
    drop_key_codes,
    fit_detector,
    vectorize,
)
from .errors import CorpusIOError, InsufficientData, KeysynthError
from .features import KeystrokeSequence, extract_features, truncate
from .gnn import GnnConfig, GnnModel, synthesize_gnn, train_gnn
from .kde import (
    DEFAULT_BANDWIDTH,
    UniversalModel,
    UserDependentModel,
    fit_universal,
    fit_user_dependent,
    synthesize_kde,
)

log = logging.getLogger(__name__)

GENERATORS = ("userdep", "universal", "gnn")
REPORT_HEADER = ("generator_train", "generator_test", "detector", "K", "n_train_subjects", "accuracy", "status")


def derive_rng(seed: int, *labels) -> np.random.Generator:
    """Independent stream for ``(seed, *labels)``; labels may be ints or strings."""
    words = [int(seed) & 0xFFFFFFFFFFFFFFFF]
    for lab in labels:
        words.append(lab if isinstance(lab, int) else zlib.crc32(str(lab).encode()))
    return np.random.default_rng(np.random.SeedSequence(words))


# -- generators ------------------------------------------------------------------


class Synthesizer:
    """Binds a fitted model to the 'one synthetic subject per human subject' rule."""

    name = "base"

    def sample(self, key_codes, rng, subject_slot: int, subject_id: str, sample_id: str) -> KeystrokeSequence:
        raise NotImplementedError


class UniversalSynth(Synthesizer):
    name = "universal"

    def __init__(self, model: UniversalModel):
        self.model = model

    def sample(self, key_codes, rng, subject_slot, subject_id, sample_id):
        return synthesize_kde(self.model, key_codes, rng, subject_id, sample_id)


class UserDepSynth(Synthesizer):
    """Synthetic subject ``slot`` types with user model ``assignment[slot]``."""

    name = "userdep"

    def __init__(self, model: UserDependentModel, seed: int = 0):
        self.model = model
        self.seed = seed

    def user_for(self, slot: int):
        m = len(self.model)
        # a fresh permutation per block of m slots keeps assignments balanced
        block, pos = divmod(slot, m)
        perm = derive_rng(self.seed, "userdep-assign", block).permutation(m)
        return self.model[int(perm[pos])]

    def sample(self, key_codes, rng, subject_slot, subject_id, sample_id):
        return synthesize_kde(self.user_for(subject_slot), key_codes, rng, subject_id, sample_id)


class GnnSynth(Synthesizer):
    name = "gnn"

    def __init__(self, model: GnnModel):
        self.model = model

    def sample(self, key_codes, rng, subject_slot, subject_id, sample_id):
        return synthesize_gnn(self.model, key_codes, rng, subject_id, sample_id)


@dataclass(frozen=True)
class SynthConfig:
    bandwidth: float = DEFAULT_BANDWIDTH
    gnn: GnnConfig = field(default_factory=GnnConfig)


def fit_synthesizers(
    humans: Corpus,
    names: Iterable[str] = GENERATORS,
    config: SynthConfig | None = None,
    seed: int = 0,
) -> dict[str, Synthesizer]:
    config = config or SynthConfig()
    feats = humans.features()
    out: dict[str, Synthesizer] = {}
    for name in names:
        if name == "universal":
            out[name] = UniversalSynth(fit_universal(feats, config.bandwidth))
        elif name == "userdep":
            out[name] = UserDepSynth(fit_user_dependent(feats, config.bandwidth), seed)
        elif name == "gnn":
            out[name] = GnnSynth(train_gnn(feats, config.gnn, seed))
        else:
            raise ValueError(f"unknown generator {name!r}; choose from {GENERATORS}")
    return out


# -- scenarios --------------------------------------------------------------------


@dataclass(frozen=True)
class Scenario:
    n_train_subjects: int = 20
    synth_train: str = "universal"
    synth_test: str = "universal"
    samples_per_subject: int = 15
    L: int = 30
    use_keys: bool = False
    eval_subjects: int = 500
    eval_samples_per_subject: int = 15
    seed: int = 0

    @property
    def closed_set(self) -> bool:
        return self.synth_train == self.synth_test


@dataclass(eq=False)
class LabeledSet:
    """Row vectors with K=1 layout plus labels and provenance per row."""

    X_full: np.ndarray
    y: np.ndarray
    subjects: np.ndarray
    pair: np.ndarray  # index of the human row each bot row was paired with (itself for humans)
    key_codes: list[np.ndarray] = field(default_factory=list)

    def X(self, use_keys: bool) -> np.ndarray:
        return self.X_full if use_keys else drop_key_codes(self.X_full)

    def __len__(self) -> int:
        return len(self.y)

    @property
    def humans(self) -> np.ndarray:
        return self.y == HUMAN


def eligible_samples(seqs: Sequence[KeystrokeSequence], L: int, k: int):
    """First ``k`` samples that survive truncation, as (sequence, truncated features) pairs."""
    out = []
    for s in seqs:
        if len(s) < 2:
            continue
        t = truncate(extract_features(s), L)
        if t is not None:
            out.append((s, t))
            if len(out) == k:
                break
    return out


def split_subjects(humans: Corpus, n_eval: int, seed: int, L: int = 30, k: int = 1) -> tuple[Corpus, Corpus]:
    """Split into (train pool, eval pool); eval subjects are drawn among those with ``k`` usable samples."""
    groups = humans.by_subject()
    ids = humans.subjects
    order = derive_rng(seed, "split").permutation(len(ids))
    eval_ids, rest = [], []
    for i in order:
        sid = ids[i]
        if len(eval_ids) < n_eval and len(eligible_samples(groups[sid], L, k)) == k:
            eval_ids.append(sid)
        else:
            rest.append(sid)
    if len(eval_ids) < n_eval:
        raise InsufficientData(f"only {len(eval_ids)} subjects qualify for evaluation, need {n_eval}")
    rest_set = set(rest)
    return humans.subset([s for s in ids if s in rest_set]), humans.subset([s for s in ids if s in set(eval_ids)])


class ScenarioBuilder:
    """Builds and caches paired human/bot sets for one pair of subject pools."""

    def __init__(
        self,
        train_humans: Corpus,
        eval_humans: Corpus,
        synthesizers: Mapping[str, Synthesizer],
        L: int = 30,
        samples_per_subject: int = 15,
        eval_subjects: int = 500,
        eval_samples_per_subject: int = 15,
        seed: int = 0,
    ):
        overlap = set(train_humans.subjects) & set(eval_humans.subjects)
        if overlap:
            raise InsufficientData(f"train and eval pools share subjects: {sorted(overlap)[:5]}")
        self.synthesizers = dict(synthesizers)
        self.L = L
        self.k_train = samples_per_subject
        self.k_eval = eval_samples_per_subject
        self.seed = seed
        self._train_pool = self._eligible(train_humans, self.k_train, "train")
        self._eval_pool = self._eligible(eval_humans, self.k_eval, "eval")
        if len(self._eval_pool) < eval_subjects:
            raise InsufficientData(
                f"need {eval_subjects} eval subjects with {self.k_eval} usable samples, have {len(self._eval_pool)}"
            )
        self._eval_pool = self._eval_pool[:eval_subjects]
        self._human_cache: dict[str, LabeledSet] = {}
        self._bot_cache: dict[tuple[str, str], tuple[list, list]] = {}

    def _eligible(self, corpus: Corpus, k: int, side: str):
        groups = corpus.by_subject()
        ids = corpus.subjects
        order = derive_rng(self.seed, "order", side).permutation(len(ids))
        pool = []
        for i in order:
            picked = eligible_samples(groups[ids[i]], self.L, k)
            if len(picked) == k:
                pool.append((ids[i], picked))
        return pool

    @property
    def max_train_subjects(self) -> int:
        return len(self._train_pool)

    def _pool(self, side: str):
        return self._train_pool if side == "train" else self._eval_pool

    def _subjects_needed(self, side: str, n_subjects: int | None) -> int:
        pool = self._pool(side)
        return len(pool) if n_subjects is None else min(n_subjects, len(pool))

    def humans(self, side: str, n_subjects: int | None = None) -> LabeledSet:
        n_subj = self._subjects_needed(side, n_subjects)
        cached = self._human_cache.get(side)
        if cached is None or len(cached) < n_subj * self._k(side):
            rows, subj, codes = [], [], []
            for sid, picked in self._pool(side)[:n_subj]:
                for seq, t in picked:
                    rows.append(vectorize(t, self.L, True))
                    subj.append(sid)
                    codes.append(seq.key_codes)
            n = len(rows)
            cached = LabeledSet(np.asarray(rows), np.full(n, HUMAN), np.asarray(subj), np.arange(n), codes)
            self._human_cache[side] = cached
        return _head(cached, n_subj * self._k(side))

    def bots(self, side: str, generator: str, n_subjects: int | None = None) -> LabeledSet:
        """Bots paired row-by-row with ``humans(side, n_subjects)``."""
        if generator not in self.synthesizers:
            raise KeyError(f"no fitted synthesizer named {generator!r}")
        n_subj = self._subjects_needed(side, n_subjects)
        synth = self.synthesizers[generator]
        rows, subj = self._bot_cache.setdefault((side, generator), ([], []))
        k = self._k(side)
        for slot in range(len(rows) // k, n_subj):
            sid, picked = self._pool(side)[slot]
            rng = derive_rng(self.seed, "bots", side, generator, slot)
            bot_sid = f"bot-{generator}-{side}-{slot}"
            for j, (seq, _) in enumerate(picked):
                b = synth.sample(seq.key_codes, rng, slot, bot_sid, f"b{j:02d}")
                t = truncate(extract_features(b), self.L)
                rows.append(vectorize(t, self.L, True))
                subj.append(bot_sid)
        n = n_subj * k
        return LabeledSet(np.asarray(rows[:n]), np.full(n, BOT), np.asarray(subj[:n]), np.arange(n))

    def _k(self, side: str) -> int:
        return self.k_train if side == "train" else self.k_eval

    def build(self, n_train_subjects: int, synth_train: str, synth_test: str) -> tuple[LabeledSet, LabeledSet]:
        if n_train_subjects > self.max_train_subjects:
            raise InsufficientData(
                f"need {n_train_subjects} training subjects, only {self.max_train_subjects} qualify"
            )
        n = n_train_subjects
        return (
            _stack(self.humans("train", n), self.bots("train", synth_train, n)),
            _stack(self.humans("eval"), self.bots("eval", synth_test)),
        )


def _head(s: LabeledSet, n: int) -> LabeledSet:
    if len(s) == n:
        return s
    return LabeledSet(s.X_full[:n], s.y[:n], s.subjects[:n], s.pair[:n], s.key_codes[:n])


def _stack(h: LabeledSet, b: LabeledSet) -> LabeledSet:
    n = len(h)
    return LabeledSet(
        np.concatenate([h.X_full, b.X_full]),
        np.concatenate([h.y, b.y]),
        np.concatenate([h.subjects, b.subjects]),
        np.concatenate([np.arange(n), np.arange(n)]),
        h.key_codes,
    )


def build_scenario(
    humans: Corpus,
    sc: Scenario,
    synthesizers: Mapping[str, Synthesizer],
    eval_humans: Corpus | None = None,
) -> tuple[LabeledSet, LabeledSet]:
    """Training and evaluation sets for one scenario.

    Without ``eval_humans`` the evaluation subjects are split off ``humans``
    first (the synthesizers may then have seen them).
    """
    if eval_humans is None:
        humans, eval_humans = split_subjects(humans, sc.eval_subjects, sc.seed, sc.L, sc.eval_samples_per_subject)
    builder = ScenarioBuilder(
        humans,
        eval_humans,
        synthesizers,
        sc.L,
        sc.samples_per_subject,
        sc.eval_subjects,
        sc.eval_samples_per_subject,
        sc.seed,
    )
    return builder.build(sc.n_train_subjects, sc.synth_train, sc.synth_test)


# -- grid -----------------------------------------------------------------------------


@dataclass(frozen=True)
class ReportRow:
    generator_train: str
    generator_test: str
    detector: str
    K: int
    n_train_subjects: int
    accuracy: float | None
    status: str = "ok"


@dataclass(frozen=True)
class GridConfig:
    generators: tuple[str, ...] = GENERATORS
    open_pairs: tuple[tuple[str, str], ...] = ()
    closed: bool = True
    detectors: tuple[str, ...] = KINDS
    keys: tuple[int, ...] = (0, 1)
    sizes: tuple[int, ...] = (20, 100, 500)
    L: int = 30
    samples_per_subject: int = 15
    eval_subjects: int = 200
    eval_samples_per_subject: int = 5
    seed: int = 0
    detector: DetectorConfig = field(default_factory=DetectorConfig)

    def pairs(self) -> list[tuple[str, str]]:
        out = [(g, g) for g in self.generators] if self.closed else []
        return out + [tuple(p) for p in self.open_pairs]


def run_cell(
    builder: ScenarioBuilder,
    gen_train: str,
    gen_test: str,
    n: int,
    kind: str,
    K: int,
    config: DetectorConfig,
    seed: int,
) -> ReportRow:
    try:
        train, test = builder.build(n, gen_train, gen_test)
        use_keys = bool(K)
        Xtr, ytr = train.X(use_keys), train.y
        if kind == "ocsvm":
            Xtr, ytr = Xtr[ytr == HUMAN], ytr[ytr == HUMAN]
        rng = derive_rng(seed, "cell", gen_train, gen_test, n, kind, K)
        model = fit_detector(kind, Xtr, ytr, config, rng, step_width=5 if use_keys else 4)
        acc = accuracy(model, test.X(use_keys), test.y)
        return ReportRow(gen_train, gen_test, kind, K, n, acc)
    except (KeysynthError, ValueError, ArithmeticError) as exc:
        log.warning("cell %s/%s n=%d %s K=%d failed: %s", gen_train, gen_test, n, kind, K, exc)
        return ReportRow(gen_train, gen_test, kind, K, n, None, f"error:{type(exc).__name__}")


def run_grid(
    train_humans: Corpus,
    eval_humans: Corpus,
    synthesizers: Mapping[str, Synthesizer],
    config: GridConfig,
    progress=None,
) -> list[ReportRow]:
    """Train and evaluate every (pair, size, detector, K) cell; failures become error rows."""
    builder = ScenarioBuilder(
        train_humans,
        eval_humans,
        synthesizers,
        config.L,
        config.samples_per_subject,
        config.eval_subjects,
        config.eval_samples_per_subject,
        config.seed,
    )
    rows = []
    for gt, ge in config.pairs():
        for n in config.sizes:
            for kind in config.detectors:
                for K in config.keys:
                    row = run_cell(builder, gt, ge, n, kind, K, config.detector, config.seed)
                    rows.append(row)
                    if progress is not None:
                        progress(row)
    return rows


# -- reports --------------------------------------------------------------------------


def _order(values: Sequence[str], v: str) -> tuple[int, str]:
    return (values.index(v), v) if v in values else (len(values), v)


def sort_rows(rows: Iterable[ReportRow]) -> list[ReportRow]:
    return sorted(
        rows,
        key=lambda r: (
            _order(GENERATORS, r.generator_train),
            _order(GENERATORS, r.generator_test),
            r.n_train_subjects,
            _order(KINDS, r.detector),
            r.K,
        ),
    )


def _fmt_acc(a: float | None) -> str:
    return "" if a is None else repr(float(a))


def report_csv(rows: Sequence[ReportRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_HEADER)
    for r in sort_rows(rows):
        w.writerow((r.generator_train, r.generator_test, r.detector, r.K, r.n_train_subjects, _fmt_acc(r.accuracy), r.status))
    return buf.getvalue()


def parse_report_csv(text: str) -> list[ReportRow]:
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != REPORT_HEADER:
        raise ValueError(f"unexpected report header {reader.fieldnames}")
    return [
        ReportRow(
            r["generator_train"],
            r["generator_test"],
            r["detector"],
            int(r["K"]),
            int(r["n_train_subjects"]),
            float(r["accuracy"]) if r["accuracy"] else None,
            r["status"],
        )
        for r in reader
    ]


def report_table(rows: Sequence[ReportRow]) -> str:
    """Plain-text table laid out like the closed/open-set accuracy tables."""
    rows = sort_rows(rows)
    detectors = [d for d in KINDS if any(r.detector == d for r in rows)]
    detectors += sorted({r.detector for r in rows} - set(detectors))
    keys = sorted({r.K for r in rows})
    cols = [(d, k) for d in detectors for k in keys]
    head = ["train", "test", "subjects"] + [f"{d.upper()} K={k}" for d, k in cols]
    cells = {(r.generator_train, r.generator_test, r.n_train_subjects, r.detector, r.K): r for r in rows}
    groups = []
    for r in rows:
        g = (r.generator_train, r.generator_test, r.n_train_subjects)
        if g not in groups:
            groups.append(g)
    body = []
    for gt, ge, n in groups:
        line = [gt, ge, str(n)]
        for d, k in cols:
            r = cells.get((gt, ge, n, d, k))
            line.append("-" if r is None else ("ERR" if r.accuracy is None else f"{r.accuracy:.2f}"))
        body.append(line)
    widths = [max(len(x) for x in col) for col in zip(head, *body)]
    fmt = lambda line: "  ".join(x.rjust(w) for x, w in zip(line, widths))
    rule = "-" * len(fmt(head))
    return "\n".join([fmt(head), rule, *map(fmt, body)]) + "\n"


def emit_report(rows: Sequence[ReportRow], out, formats: Sequence[str] = ("csv", "txt")) -> list[Path]:
    """Write ``report.csv`` and/or ``report.txt`` into directory ``out``."""
    if not rows:
        raise ValueError("no report rows to emit")
    out = Path(out)
    written = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        for fmt in formats:
            path = out / f"report.{fmt}"
            if fmt == "csv":
                path.write_text(report_csv(rows), encoding="utf-8")
            elif fmt == "txt":
                path.write_text(report_table(rows), encoding="utf-8")
            else:
                raise ValueError(f"unknown report format {fmt!r}")
            written.append(path)
    except OSError as exc:
        raise CorpusIOError(f"cannot write report to {out}: {exc}") from exc
    return written


def mean_accuracy(rows: Iterable[ReportRow], **match) -> float:
    vals = [r.accuracy for r in rows if all(getattr(r, k) == v for k, v in match.items())]
    vals = [v for v in vals if v is not None]
    return float(np.mean(vals)) if vals else math.nan


# -- experiment configs -------------------------------------------------------------

DESK_GNN = GnnConfig(max_epochs=60, max_pairs=50_000)
DESK_DETECTOR = DetectorConfig(lstm_max_updates=3_000)


def _known(cls, d: Mapping, what: str) -> dict:
    names = {f.name for f in fields(cls)}
    unknown = set(d) - names
    if unknown:
        raise ValueError(f"unknown {what} keys: {sorted(unknown)}")
    return dict(d)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a grid run needs: data source, synthesizer and detector settings, grid shape.

    Defaults are the desk-scale profile: a 1,200-subject pseudo-human
    corpus, 200 evaluation subjects with 5 samples each, and capped GNN and
    LSTM training so the full closed-set grid runs in minutes.
    """

    seed: int = 0
    data: str | None = None
    pseudo_subjects: int = 1200
    pseudo_samples: int = 15
    profile: PseudoHumanProfile = field(default_factory=PseudoHumanProfile)
    synth: SynthConfig = field(default_factory=lambda: SynthConfig(gnn=DESK_GNN))
    grid: GridConfig = field(default_factory=lambda: GridConfig(detector=DESK_DETECTOR))

    @classmethod
    def from_dict(cls, d: Mapping) -> "ExperimentConfig":
        d = dict(d)
        top = {"seed", "data", "pseudo_human", "synth", "grid", "detector"}
        unknown = set(d) - top
        if unknown:
            raise ValueError(f"unknown config sections: {sorted(unknown)}")
        base = cls()
        ph = dict(d.get("pseudo_human") or {})
        n_subj = int(ph.pop("n_subjects", base.pseudo_subjects))
        n_samp = int(ph.pop("samples_per_subject", base.pseudo_samples))
        ph = _known(PseudoHumanProfile, ph, "pseudo_human")
        if "pause_range" in ph:
            ph["pause_range"] = tuple(ph["pause_range"])
        sy = dict(d.get("synth") or {})
        gnn = replace(base.synth.gnn, **_known(GnnConfig, sy.pop("gnn", None) or {}, "synth.gnn"))
        synth = SynthConfig(**_known(SynthConfig, sy, "synth"), gnn=gnn)
        det = replace(base.grid.detector, **_known(DetectorConfig, d.get("detector") or {}, "detector"))
        gr = _known(GridConfig, d.get("grid") or {}, "grid")
        gr.pop("detector", None)
        for key in ("generators", "detectors", "keys", "sizes"):
            if key in gr:
                gr[key] = tuple(gr[key])
        if "open_pairs" in gr:
            gr["open_pairs"] = tuple(tuple(p) for p in gr["open_pairs"])
        seed = int(d.get("seed", base.seed))
        grid = replace(base.grid, **gr, detector=det, seed=seed)
        return cls(seed, d.get("data"), n_subj, n_samp, replace(base.profile, **ph), synth, grid)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, seed=seed, grid=replace(self.grid, seed=seed))

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "data": self.data,
            "pseudo_human": {
                "n_subjects": self.pseudo_subjects,
                "samples_per_subject": self.pseudo_samples,
                **asdict(self.profile),
            },
            "synth": asdict(self.synth),
            "grid": {k: v for k, v in asdict(self.grid).items() if k not in ("detector", "seed")},
            "detector": self.grid.detector.to_dict(),
        }


def experiment_humans(cfg: ExperimentConfig) -> Corpus:
    if cfg.data is not None:
        return load_corpus(cfg.data)
    return generate_pseudo_human(cfg.pseudo_subjects, cfg.pseudo_samples, derive_rng(cfg.seed, "humans"), cfg.profile)


def run_experiment(cfg: ExperimentConfig, humans: Corpus | None = None, progress=None) -> list[ReportRow]:
    """Split subjects, fit the needed synthesizers on the training pool, run the grid."""
    humans = humans if humans is not None else experiment_humans(cfg)
    g = cfg.grid
    train, evals = split_subjects(humans, g.eval_subjects, cfg.seed, g.L, g.eval_samples_per_subject)
    needed = [n for n in GENERATORS if any(n in p for p in g.pairs())]
    synths = fit_synthesizers(train, needed, cfg.synth, cfg.seed)
    return run_grid(train, evals, synths, g, progress)
