"""Config-driven experiment runner: teacher -> distillation data -> students -> evaluation.

Config schema (YAML, ``schema_version: 1``)::

    schema_version: 1
    seed: 1234                      # expands into per-stage seeds, see derive_seed
    langs: {src: xx, tgt: yy}
    clean: {min_words: 3, max_words: 150}
    corpora:
      para:     {type: parallel, src: train.xx, tgt: train.yy,
                 src_provenance: natural, tgt_provenance: human, oversample: 1000}
      mono_src: {type: mono, path: mono.xx, lang: xx}
      mono_tgt: {type: mono, path: mono.yy, lang: yy}
    backends:
      rev:     {toy: {recipe: [{kind: P, source: para}], iterations: 10}, direction: [yy, xx]}
      teacher: {toy: {recipe: [{kind: P, source: para}, {kind: BT, source: mono_tgt}],
                      rev: rev, iterations: 10}, direction: [xx, yy]}
      ext:     {command: [my-decoder, --beam, "4"], direction: [xx, yy], batch_size: 64}
      svc:     {http: "http://host:8080/translate", direction: [xx, yy]}
    teacher: teacher                # forward backend used to build student data
    reverse: rev                    # reverse backend for BT / FT_BT
    students:
      - name: all
        recipe: [{kind: FT_P, source: para}, {kind: FT_MONO, source: mono_src, budget: 300},
                 {kind: FT_BT, source: mono_tgt, budget: 300}]
        iterations: 10
        prune: {top_k: 1, min_prob: 0.0}
        quantize: [{mode: log, bits: 4}, {mode: fixed, bits: 8}]
    evaluation:
      testset: {src: test.xx.sgm, ref: test.yy.sgm}     # or add tsv: for plain text
      metrics: [bleu, chrf, ter]
      tokenizer: 13a
      smoothing: none
      bootstrap: {metric: bleu, n_resamples: 1000}
      ttr: {lowercase: true}

Relative paths resolve against the config file's directory. ``KDCORPUS_BACKEND_<ID>_URL``
overrides the URL of an HTTP backend; no other setting can come from the environment.
"""

from __future__ import annotations

import hashlib
import logging
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import yaml

from . import __version__
from .backend import BackendSpec, CommandTransport, HttpTransport, IDENTITY, probe, translate_batch
from .corpus import (
    HUMAN,
    NATURAL,
    Corpus,
    MonoCorpus,
    ParallelCorpus,
    Provenance,
    SideRecord,
    clean,
    clean_mono,
    load_mono,
    load_parallel,
    oversample,
    write_parallel,
)
from .errors import BackendError, ConfigError, KDError
from .metrics import METRICS, MetricConfig, paired_bootstrap
from .origin import (
    ScoreReport,
    dumps_jsonl,
    evaluate_by_origin,
    format_table,
    load_testset,
    origins,
    references,
    sources,
    ttr_by_origin,
)
from .pipeline import Component, DatasetKind, Recipe, back_translate, check_lineage, compose_training_set
from .quant import QuantConfig, quantize, size_report
from .toymt import LexTable, dumps_table, prune, save_table, table_transport, train_ibm1

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
_PROVENANCE = {"natural": NATURAL, "human": HUMAN}


def derive_seed(global_seed: int, *names: str) -> int:
    """Per-stage seed: first 4 bytes of sha256("<global>/<name>/..."), so stages never shift each other."""
    key = "/".join([str(global_seed), *names]).encode("utf-8")
    return int.from_bytes(hashlib.sha256(key).digest()[:4], "big")


# --- config --------------------------------------------------------------------


@dataclass
class CorpusDecl:
    name: str
    type: str
    paths: tuple[Path, ...]
    langs: tuple[str, ...]
    origin_lang: str
    provenance: tuple[Provenance, ...]
    oversample: Optional[int] = None


@dataclass
class BackendDecl:
    name: str
    direction: tuple[str, str]
    transport: str  # toy | command | http | identity
    argv: tuple[str, ...] = ()
    url: str = ""
    batch_size: int = 64
    workers: int = 1
    recipe: tuple[Component, ...] = ()
    rev: Optional[str] = None
    iterations: int = 10
    prune: Optional[dict] = None


@dataclass
class StudentDecl:
    name: str
    recipe: tuple[Component, ...]
    iterations: int = 10
    prune: Optional[dict] = None
    quantize: tuple[QuantConfig, ...] = ()


@dataclass
class EvalDecl:
    testset: dict
    metric_config: MetricConfig
    bootstrap_metric: str = "bleu"
    n_resamples: int = 1000
    ttr_lowercase: bool = True


@dataclass
class ExperimentConfig:
    seed: int
    src_lang: str
    tgt_lang: str
    min_words: int
    max_words: int
    corpora: dict[str, CorpusDecl]
    backends: dict[str, BackendDecl]
    teacher: str
    reverse: Optional[str]
    students: list[StudentDecl]
    evaluation: Optional[EvalDecl]
    base_dir: Path
    digest: str
    raw: dict = field(default_factory=dict, repr=False)


def _req(obj: dict, key: str, where: str):
    if not isinstance(obj, dict) or key not in obj:
        raise ConfigError(f"{where}: missing required key {key!r}")
    return obj[key]


def _components(items, where: str, seed: int) -> tuple[Component, ...]:
    if not isinstance(items, list) or not items:
        raise ConfigError(f"{where}: recipe must be a non-empty list")
    out = []
    for i, it in enumerate(items):
        kind = _req(it, "kind", f"{where}[{i}]")
        try:
            kind = DatasetKind(kind)
        except ValueError:
            raise ConfigError(f"{where}[{i}]: unknown kind {kind!r}") from None
        budget = it.get("budget", "all")
        if budget == "all":
            budget = None
        elif not isinstance(budget, int) or budget < 0:
            raise ConfigError(f"{where}[{i}]: budget must be a non-negative integer or 'all'")
        comp_seed = it.get("seed", derive_seed(seed, where, str(i), kind.value))
        out.append(Component(kind, str(_req(it, "source", f"{where}[{i}]")), budget, int(comp_seed)))
    return tuple(out)


def _prune_cfg(obj, where: str) -> Optional[dict]:
    if obj is None:
        return None
    top_k = int(obj.get("top_k", 1))
    min_prob = float(obj.get("min_prob", 0.0))
    if top_k < 1 or not 0.0 <= min_prob < 1.0:
        raise ConfigError(f"{where}: invalid prune settings")
    return {"top_k": top_k, "min_prob": min_prob}


def _env_key(name: str) -> str:
    return "KDCORPUS_BACKEND_" + re.sub(r"[^A-Za-z0-9]", "_", name).upper() + "_URL"


def parse_config(raw: dict, base_dir: Path, digest: str = "") -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    version = raw.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")
    seed = _req(raw, "seed", "config")
    if not isinstance(seed, int):
        raise ConfigError("seed must be an integer")
    langs = _req(raw, "langs", "config")
    src_lang, tgt_lang = str(_req(langs, "src", "langs")), str(_req(langs, "tgt", "langs"))
    cl = raw.get("clean", {}) or {}
    min_words, max_words = int(cl.get("min_words", 3)), int(cl.get("max_words", 150))
    if min_words < 1 or max_words < min_words:
        raise ConfigError(f"invalid clean bounds [{min_words}, {max_words}]")

    corpora = {}
    for name, c in (_req(raw, "corpora", "config") or {}).items():
        where = f"corpora.{name}"
        ctype = _req(c, "type", where)
        over = c.get("oversample")
        if ctype == "parallel":
            paths = (base_dir / _req(c, "src", where), base_dir / _req(c, "tgt", where))
            langs_ = (str(c.get("src_lang", src_lang)), str(c.get("tgt_lang", tgt_lang)))
            prov = []
            for key, default in (("src_provenance", "natural"), ("tgt_provenance", "human")):
                value = c.get(key, default)
                if value not in _PROVENANCE:
                    raise ConfigError(f"{where}.{key}: expected natural or human, got {value!r}")
                prov.append(_PROVENANCE[value])
            decl = CorpusDecl(name, ctype, paths, langs_, str(c.get("origin", langs_[0])), tuple(prov), over)
        elif ctype == "mono":
            lang = str(_req(c, "lang", where))
            value = c.get("provenance", "natural")
            if value not in _PROVENANCE:
                raise ConfigError(f"{where}.provenance: expected natural or human, got {value!r}")
            decl = CorpusDecl(name, ctype, (base_dir / _req(c, "path", where),), (lang,),
                              str(c.get("origin", lang)), (_PROVENANCE[value],), over)
        else:
            raise ConfigError(f"{where}: unknown corpus type {ctype!r}")
        corpora[name] = decl

    backends = {}
    for name, b in (_req(raw, "backends", "config") or {}).items():
        where = f"backends.{name}"
        direction = _req(b, "direction", where)
        if not (isinstance(direction, list) and len(direction) == 2):
            raise ConfigError(f"{where}.direction must be [src, tgt]")
        common = dict(name=name, direction=(str(direction[0]), str(direction[1])),
                      batch_size=int(b.get("batch_size", 64)), workers=int(b.get("workers", 1)))
        if "toy" in b:
            toy = b["toy"] or {}
            decl = BackendDecl(
                transport="toy",
                recipe=_components(_req(toy, "recipe", f"{where}.toy"), f"{where}.toy.recipe", seed),
                rev=toy.get("rev"),
                iterations=int(toy.get("iterations", 10)),
                prune=_prune_cfg(toy.get("prune"), f"{where}.toy.prune"),
                **common,
            )
        elif "command" in b:
            argv = b["command"]
            if isinstance(argv, str) or not argv:
                raise ConfigError(f"{where}.command must be a non-empty argv list")
            decl = BackendDecl(transport="command", argv=tuple(str(a) for a in argv), **common)
        elif "http" in b:
            decl = BackendDecl(transport="http", url=os.environ.get(_env_key(name), str(b["http"])), **common)
        elif b.get("identity"):
            decl = BackendDecl(transport="identity", **common)
        else:
            raise ConfigError(f"{where}: expected one of toy, command, http, identity")
        backends[name] = decl

    teacher = str(_req(raw, "teacher", "config"))
    reverse = raw.get("reverse")
    students = []
    for i, s in enumerate(raw.get("students", []) or []):
        name = str(_req(s, "name", f"students[{i}]"))
        quants = []
        for q in s.get("quantize", []) or []:
            try:
                quants.append(QuantConfig(q["mode"], int(q["bits"])))
            except (KeyError, ValueError) as e:
                raise ConfigError(f"students.{name}.quantize: {e}") from None
        students.append(StudentDecl(
            name,
            _components(_req(s, "recipe", f"students.{name}"), f"students.{name}.recipe", seed),
            int(s.get("iterations", 10)),
            _prune_cfg(s.get("prune"), f"students.{name}.prune"),
            tuple(quants),
        ))

    evaluation = None
    if raw.get("evaluation"):
        ev = raw["evaluation"]
        testset = dict(_req(ev, "testset", "evaluation"))
        for key in ("src", "ref", "tsv"):
            if key in testset:
                testset[key] = base_dir / testset[key]
        if "src" not in testset:
            raise ConfigError("evaluation.testset: missing required key 'src'")
        boot = ev.get("bootstrap", {}) or {}
        try:
            mcfg = MetricConfig(
                tuple(ev.get("metrics", METRICS)),
                ev.get("tokenizer", "13a"),
                ev.get("smoothing", "none"),
                int(ev.get("char_n", 6)),
                float(ev.get("beta", 2.0)),
                int(ev.get("max_shift_dist", 10)),
            )
        except ValueError as e:
            raise ConfigError(f"evaluation: {e}") from None
        metric = boot.get("metric", "bleu")
        if metric not in METRICS:
            raise ConfigError(f"evaluation.bootstrap.metric: unknown metric {metric!r}")
        evaluation = EvalDecl(testset, mcfg, metric, int(boot.get("n_resamples", 1000)),
                              bool((ev.get("ttr") or {}).get("lowercase", True)))

    cfg = ExperimentConfig(seed, src_lang, tgt_lang, min_words, max_words, corpora, backends, teacher,
                           reverse, students, evaluation, base_dir, digest, raw)
    validate(cfg)
    return cfg


def _recipe_sources(recipe) -> list[str]:
    return [c.source for c in recipe]


def validate(cfg: ExperimentConfig) -> None:
    """Check every reference and input path before any work starts."""
    for c in cfg.corpora.values():
        for p in c.paths:
            if not p.is_file():
                raise ConfigError(f"corpus {c.name!r}: file not found: {p}")
    for ref in (cfg.teacher, cfg.reverse):
        if ref is not None and ref not in cfg.backends:
            raise ConfigError(f"unknown backend {ref!r}")
    if cfg.backends[cfg.teacher].direction != (cfg.src_lang, cfg.tgt_lang):
        raise ConfigError(f"teacher {cfg.teacher!r} must translate {cfg.src_lang}->{cfg.tgt_lang}")
    if cfg.reverse is not None and cfg.backends[cfg.reverse].direction != (cfg.tgt_lang, cfg.src_lang):
        raise ConfigError(f"reverse backend {cfg.reverse!r} must translate {cfg.tgt_lang}->{cfg.src_lang}")
    recipes = [(f"backends.{b.name}", b.recipe, b.rev) for b in cfg.backends.values() if b.transport == "toy"]
    recipes += [(f"students.{s.name}", s.recipe, cfg.reverse) for s in cfg.students]
    for where, recipe, rev in recipes:
        for src in _recipe_sources(recipe):
            if src not in cfg.corpora:
                raise ConfigError(f"{where}: unknown corpus {src!r}")
        if rev is not None and rev not in cfg.backends:
            raise ConfigError(f"{where}: unknown reverse backend {rev!r}")
        if any(c.kind in (DatasetKind.BT, DatasetKind.FT_BT) for c in recipe) and rev is None:
            raise ConfigError(f"{where}: BT and FT_BT components need a reverse backend")
    names = [s.name for s in cfg.students]
    if len(set(names)) != len(names) or set(names) & set(cfg.backends):
        raise ConfigError("student names must be unique and distinct from backend names")
    _backend_order(cfg)
    ev = cfg.evaluation
    if ev is not None:
        for key in ("src", "ref", "tsv"):
            if key in ev.testset and not Path(ev.testset[key]).is_file():
                raise ConfigError(f"evaluation.testset.{key}: file not found: {ev.testset[key]}")


def _backend_order(cfg: ExperimentConfig) -> list[str]:
    order, state = [], {}

    def visit(name: str):
        if state.get(name) == "done":
            return
        if state.get(name) == "visiting":
            raise ConfigError(f"backend dependency cycle through {name!r}")
        state[name] = "visiting"
        rev = cfg.backends[name].rev
        if rev is not None:
            visit(rev)
        state[name] = "done"
        order.append(name)

    for name in cfg.backends:
        visit(name)
    return order


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    try:
        raw = yaml.safe_load(data)
    except yaml.YAMLError as e:
        raise ConfigError(f"cannot parse config {path}: {e}") from e
    return parse_config(raw, path.resolve().parent, hashlib.sha256(data).hexdigest())


# --- running -------------------------------------------------------------------


class StageError(KDError):
    def __init__(self, stage: str, cause: Exception, completed: list[str]):
        super().__init__(f"stage {stage!r} failed: {cause} (completed stages: {', '.join(completed) or 'none'})")
        self.stage = stage
        self.cause = cause
        self.completed = completed
        self.exit_code = getattr(cause, "exit_code", 5)


@dataclass
class _Counted:
    """Transport wrapper counting translated lines for the manifest."""

    inner: Any
    lines: int = 0

    def describe(self) -> dict:
        return self.inner.describe()

    def __call__(self, lines: list[str]) -> list[str]:
        out = self.inner(lines)
        self.lines += len(lines)
        return out


@dataclass
class RunReport:
    scores: list[ScoreReport]
    bootstrap: list[dict]
    ttr: list[dict]
    sizes: list[dict]
    manifest: list[dict]
    config_digest: str

    def to_jsonl(self) -> list[dict]:
        rows = [{"kind": "header", "config_digest": self.config_digest, "version": __version__}]
        if self.scores:
            rows.append({"kind": "metric_config", **self.scores[0].config.to_json()})
        for r in self.scores:
            rows.extend({"kind": "score", **row} for row in r.to_jsonl())
        rows.extend(self.bootstrap)
        rows.extend(self.ttr)
        rows.extend(self.sizes)
        return rows

    def to_text(self) -> str:
        parts = [f"config sha256 {self.config_digest}  kdcorpus {__version__}", ""]
        parts.append(format_table(self.scores))
        if self.bootstrap:
            metric = self.bootstrap[0]["metric"]
            parts.append(f"Paired bootstrap ({metric}, one-sided p that row beats column)")
            systems = list(dict.fromkeys(b["system_a"] for b in self.bootstrap))
            width = max(len(s) for s in systems)
            parts.append(" " * width + "".join(f"{s[:10]:>11}" for s in systems))
            cell = {(b["system_a"], b["system_b"]): b["p_value"] for b in self.bootstrap}
            for a in systems:
                parts.append(f"{a:<{width}}" + "".join(
                    f"{'-':>11}" if a == b else f"{cell[(a, b)]:>11.3f}" for b in systems))
            parts.append("")
        if self.ttr:
            groups = list(dict.fromkeys(t["grouping"] for t in self.ttr))
            parts.append("Type-token ratio by original language")
            systems = list(dict.fromkeys(t["system"] for t in self.ttr))
            width = max(len(s) for s in systems)
            parts.append(" " * width + "".join(f"{g:>10}" for g in groups))
            cell = {(t["system"], t["grouping"]): t["ratio"] for t in self.ttr}
            for s in systems:
                parts.append(f"{s:<{width}}" + "".join(f"{cell.get((s, g), float('nan')):>10.4f}" for g in groups))
            parts.append("")
        if self.sizes:
            parts.append("Model size")
            for r in self.sizes:
                parts.append(
                    f"{r['system']:<24}{r['config'] or 'float64':>10}  entries {r['entries']:>6}  "
                    f"distinct {r['distinct_values']:>6}  text {r['text_bytes']:>8} B  packed {r['packed_bytes']:>8} B"
                )
            parts.append("")
        return "\n".join(parts)


class Runner:
    def __init__(self, cfg: ExperimentConfig, out_dir):
        self.cfg = cfg
        self.out = Path(out_dir)
        self.manifest: list[dict] = []
        self.completed: list[str] = []
        self.corpora: dict[str, Corpus] = {}
        self.backends: dict[str, BackendSpec] = {}
        self.systems: dict[str, BackendSpec] = {}
        self.models: dict[str, LexTable] = {}
        self._bt_cache: dict[tuple[str, str], str] = {}

    # stage bookkeeping

    def _stage(self, name: str, fn, *args):
        logger.info("stage %s", name)
        try:
            result = fn(*args)
        except Exception as e:
            self.manifest.append({"stage": name, "status": "failed", "error": str(e)})
            self._write_manifest()
            raise StageError(name, e, list(self.completed)) from e
        self.completed.append(name)
        return result

    def _record(self, stage: str, **fields) -> None:
        self.manifest.append({"stage": stage, "status": "ok", **fields})

    def _write_manifest(self) -> None:
        self.out.mkdir(parents=True, exist_ok=True)
        (self.out / "manifest.jsonl").write_text(dumps_jsonl(self.manifest), encoding="utf-8")

    # stages

    def _load(self) -> None:
        cfg = self.cfg
        for name, d in cfg.corpora.items():
            if d.type == "parallel":
                c: Corpus = load_parallel(d.paths[0], d.paths[1], d.langs[0], d.langs[1], d.origin_lang,
                                          d.provenance[0], d.provenance[1])
                loaded = len(c)
                c = clean(c, cfg.min_words, cfg.max_words)
            else:
                c = load_mono(d.paths[0], d.langs[0], d.origin_lang, d.provenance[0])
                loaded = len(c)
                c = clean_mono(c, cfg.min_words, cfg.max_words)
            cleaned = len(c)
            over_seed = None
            if d.oversample is not None:
                over_seed = derive_seed(cfg.seed, "oversample", name)
                c = oversample(c, d.oversample, over_seed)
            self.corpora[name] = c
            self._record("load", corpus=name, loaded=loaded, cleaned=cleaned, size=len(c),
                         clean_bounds=[self.cfg.min_words, self.cfg.max_words],
                         oversample_seed=over_seed, digest=c.digest())

    def _materialize_bt(self, source: str, rev: str) -> str:
        """Back-translate a target mono corpus once and write it to disk; returns its corpus key."""
        key = (source, rev)
        if key not in self._bt_cache:
            mono = self.corpora[source]
            if not isinstance(mono, MonoCorpus):
                raise ConfigError(f"BT source {source!r} must be a monolingual corpus")
            bt = back_translate(self.backends[rev], mono)
            name = f"bt.{source}.{rev}"
            write_parallel(bt, self.out / "data" / f"{name}.{bt.src_lang}", self.out / "data" / f"{name}.{bt.tgt_lang}")
            self.corpora[name] = bt
            self._bt_cache[key] = name
            self._record("bt", corpus=name, source=source, backend=rev, count=len(bt), digest=bt.digest())
        return self._bt_cache[key]

    def _resolve(self, recipe, rev: Optional[str]) -> tuple[Component, ...]:
        out = []
        for c in recipe:
            if c.kind in (DatasetKind.BT, DatasetKind.FT_BT) and isinstance(self.corpora[c.source], MonoCorpus):
                c = Component(c.kind, self._materialize_bt(c.source, rev), c.budget, c.seed)
            out.append(c)
        return tuple(out)

    def _compose(self, label: str, recipe, fwd: Optional[str], rev: Optional[str]):
        comps = self._resolve(recipe, rev)
        r = Recipe(comps, self.backends.get(fwd) if fwd else None, self.backends.get(rev) if rev else None)
        result = compose_training_set(r, self.corpora)
        check_lineage(result)
        for entry in result.manifest:
            self._record("compose", recipe=label, **entry)
        return result.corpus

    def _train_toy(self, label: str, corpus: ParallelCorpus, iterations: int, prune_cfg: Optional[dict]):
        table, stats = train_ibm1(corpus, iterations)
        if prune_cfg:
            table = prune(table, prune_cfg["top_k"], prune_cfg["min_prob"])
        path = self.out / "models" / f"{label}.tsv"
        save_table(table, path)
        self._record("train", model=label, pairs=len(corpus), iterations=iterations, prune=prune_cfg,
                     log_likelihood=list(stats.log_likelihood), entries=len(table),
                     digest=hashlib.sha256(dumps_table(table).encode("utf-8")).hexdigest())
        return table

    def _backends(self) -> None:
        cfg = self.cfg
        for name in _backend_order(cfg):
            d = cfg.backends[name]
            src, tgt = d.direction
            if d.transport == "toy":
                if d.recipe and any(c.kind not in (DatasetKind.P, DatasetKind.BT) for c in d.recipe):
                    raise ConfigError(f"toy backend {name!r}: training recipes may only use P and BT")
                corpus = self._compose(f"backend:{name}", d.recipe, None, d.rev)
                if (src, tgt) == (cfg.tgt_lang, cfg.src_lang):
                    corpus = corpus.reversed()
                elif (src, tgt) != (corpus.src_lang, corpus.tgt_lang):
                    raise ConfigError(f"toy backend {name!r}: direction {src}->{tgt} does not match its data")
                table = self._train_toy(name, corpus, d.iterations, d.prune)
                self.models[name] = table
                transport: Any = table_transport(table, f"toy:{name}")
            elif d.transport == "command":
                transport = CommandTransport(d.argv)
            elif d.transport == "http":
                transport = HttpTransport(d.url)
            else:
                transport = IDENTITY
            spec = BackendSpec(name, src, tgt, _Counted(transport), d.batch_size, d.workers)
            if d.transport in ("command", "http"):
                health = probe(spec)
                if not health.ok:
                    raise BackendError(f"backend {name!r} probe failed: {health.error}")
            self.backends[name] = spec
            self._record("backend", **spec.describe())

    def _student(self, s: StudentDecl) -> None:
        cfg = self.cfg
        corpus = self._compose(f"student:{s.name}", s.recipe, cfg.teacher, cfg.reverse)
        write_parallel(corpus, self.out / "data" / f"student.{s.name}.{cfg.src_lang}",
                       self.out / "data" / f"student.{s.name}.{cfg.tgt_lang}")
        table = self._train_toy(s.name, corpus, s.iterations, s.prune)
        self.models[s.name] = table
        self.systems[s.name] = BackendSpec(s.name, cfg.src_lang, cfg.tgt_lang, table_transport(table, f"toy:{s.name}"))
        for q in s.quantize:
            label = f"{s.name}+{q}"
            res = quantize(table, q)
            save_table(res.table, self.out / "models" / f"{label}.tsv")
            self.models[label] = res.table
            self.systems[label] = BackendSpec(label, cfg.src_lang, cfg.tgt_lang, table_transport(res.table, f"toy:{label}"))
            self._record("quantize", model=label, mode=q.mode.value, bits=q.bits,
                         distinct_values=res.distinct_values, mae=res.mae)

    def _evaluate(self):
        cfg, ev = self.cfg, self.cfg.evaluation
        ts = ev.testset
        docs = load_testset(ts["src"], ts.get("ref"), ts.get("tsv"), ts.get("missing_origlang"))
        srcs = [SideRecord(s, cfg.src_lang, o) for s, o in zip(sources(docs), origins(docs))]
        systems = {cfg.teacher: self.backends[cfg.teacher], **self.systems}
        hyps, reports = {}, []
        for name, spec in systems.items():
            out = translate_batch(spec, srcs).texts()
            hyps[name] = out
            path = self.out / "hyps" / f"{name}.{cfg.tgt_lang}"
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text("".join(h + "\n" for h in out), encoding="utf-8")
            reports.append(evaluate_by_origin(out, docs, cfg.src_lang, cfg.tgt_lang, ev.metric_config, name))
        self._record("evaluate", systems=list(systems), segments=len(srcs),
                     buckets=reports[0].sizes if reports else {})
        return docs, hyps, reports

    def _bootstrap(self, docs, hyps) -> list[dict]:
        ev = self.cfg.evaluation
        refs = references(docs)
        seed = derive_seed(self.cfg.seed, "bootstrap")
        rows = []
        names = list(hyps)
        for a in names:
            for b in names:
                if a == b:
                    continue
                res = paired_bootstrap(hyps[a], hyps[b], refs, ev.bootstrap_metric, ev.n_resamples, seed,
                                       ev.metric_config)
                rows.append({**res.to_json(), "system_a": a, "system_b": b})
        self._record("bootstrap", metric=ev.bootstrap_metric, n_resamples=ev.n_resamples, seed=seed, pairs=len(rows))
        return rows

    def _ttr(self, docs, hyps) -> list[dict]:
        lower = self.cfg.evaluation.ttr_lowercase
        labels = origins(docs)
        rows = []
        for name, sents in [("reference", references(docs)), *hyps.items()]:
            for report in ttr_by_origin(sents, labels, lower).values():
                rows.append({**report.to_json(), "system": name})
        self._record("ttr", lowercase=lower, systems=len(hyps) + 1)
        return rows

    def _sizes(self) -> list[dict]:
        rows = []
        for s in self.cfg.students:
            table = self.models[s.name]
            rows.append({**size_report(table).to_json(), "system": s.name})
            for q in s.quantize:
                rows.append({**size_report(table, q).to_json(), "system": f"{s.name}+{q}"})
        return rows

    def run(self) -> RunReport:
        self.out.mkdir(parents=True, exist_ok=True)
        (self.out / "config.sha256").write_text(self.cfg.digest + "\n", encoding="utf-8")
        (self.out / "VERSION").write_text(__version__ + "\n", encoding="utf-8")
        self._stage("load", self._load)
        self._stage("backends", self._backends)
        for s in self.cfg.students:
            self._stage(f"student:{s.name}", self._student, s)
        scores, boot, ttr = [], [], []
        if self.cfg.evaluation is not None:
            docs, hyps, scores = self._stage("evaluate", self._evaluate)
            boot = self._stage("bootstrap", self._bootstrap, docs, hyps) if len(hyps) > 1 else []
            ttr = self._stage("ttr", self._ttr, docs, hyps)
        sizes = self._stage("size", self._sizes)
        for name, spec in self.backends.items():
            self._record("backend_usage", backend=name, lines=spec.transport.lines)
        report = RunReport(scores, boot, ttr, sizes, self.manifest, self.cfg.digest)
        self._write_manifest()
        (self.out / "report.jsonl").write_text(dumps_jsonl(report.to_jsonl()), encoding="utf-8")
        (self.out / "report.txt").write_text(report.to_text(), encoding="utf-8")
        return report


def run(config_path, out_dir=None) -> RunReport:
    cfg = load_config(config_path)
    if out_dir is None:
        out_dir = cfg.base_dir / (cfg.raw.get("output") or "out")
    return Runner(cfg, out_dir).run()
