"""Builders for the distillation training sets and budgeted mixtures of them.

Dataset kinds and their lineage signatures (source side, target side):

========  =====================================  ==============================
kind      built from                             signature
========  =====================================  ==============================
P         parallel corpus as is                  (natural/human d0, natural/human d0)
BT        target mono, reverse backend           (machine d1, natural d0), origin = tgt
FT_P      parallel sources, forward backend      (natural/human d0, machine d1)
FT_MONO   source mono, forward backend           (natural d0, machine d1), origin = src
FT_BT     target mono, reverse then forward      (machine d1, machine d2), origin = tgt
========  =====================================  ==============================

FT_P and FT_MONO coincide when the parallel corpus' source side is natural source-origin
text; composed corpora are therefore checked per component range, using the manifest.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Mapping, Optional, Union

from .backend import BackendSpec, translate_batch
from .corpus import Corpus, Kind, MonoCorpus, Pair, ParallelCorpus, concat, sample
from .errors import ConfigError, DataError

logger = logging.getLogger(__name__)

ALL = None  # budget meaning "every available pair"


class DatasetKind(str, enum.Enum):
    P = "P"
    BT = "BT"
    FT_P = "FT_P"
    FT_BT = "FT_BT"
    FT_MONO = "FT_MONO"


def _check_direction(b: BackendSpec, src: str, tgt: str, role: str) -> None:
    if b.direction != (src, tgt):
        raise ConfigError(f"{role} backend {b.id} translates {b.src_lang}->{b.tgt_lang}, expected {src}->{tgt}")


def back_translate(rev: BackendSpec, m: MonoCorpus) -> ParallelCorpus:
    """Pair machine translations of target-language text with the natural originals."""
    _check_direction(rev, m.lang, rev.tgt_lang, "reverse")
    result = translate_batch(rev, m.records)
    return ParallelCorpus(rev.tgt_lang, m.lang, tuple(zip(result.outputs, m.records)))


def forward_translate_mono(fwd: BackendSpec, m: MonoCorpus) -> ParallelCorpus:
    _check_direction(fwd, m.lang, fwd.tgt_lang, "forward")
    result = translate_batch(fwd, m.records)
    return ParallelCorpus(m.lang, fwd.tgt_lang, tuple(zip(m.records, result.outputs)))


def distill_parallel(fwd: BackendSpec, p: ParallelCorpus) -> ParallelCorpus:
    """Replace the targets of ``p`` with forward translations of its sources."""
    _check_direction(fwd, p.src_lang, p.tgt_lang, "forward")
    sources = [s for s, _ in p.pairs]
    result = translate_batch(fwd, sources)
    return ParallelCorpus(p.src_lang, p.tgt_lang, tuple(zip(sources, result.outputs)))


def round_trip(rev: BackendSpec, fwd: BackendSpec, m: MonoCorpus) -> ParallelCorpus:
    return distill_parallel(fwd, back_translate(rev, m))


# --- lineage -------------------------------------------------------------------


def _d0(r, kinds=(Kind.NATURAL, Kind.HUMAN)) -> bool:
    return r.provenance.depth == 0 and r.provenance.kind in kinds


def _machine(r, depth: int) -> bool:
    return r.provenance.kind is Kind.MACHINE and r.provenance.depth == depth


def matches_signature(pair: Pair, kind: DatasetKind, src_lang: str, tgt_lang: str) -> bool:
    s, t = pair
    if kind is DatasetKind.P:
        return _d0(s) and _d0(t)
    if kind is DatasetKind.BT:
        return _machine(s, 1) and _d0(t, (Kind.NATURAL,)) and s.origin_lang == t.origin_lang == tgt_lang
    if kind is DatasetKind.FT_P:
        return _d0(s) and _machine(t, 1)
    if kind is DatasetKind.FT_MONO:
        return _d0(s, (Kind.NATURAL,)) and _machine(t, 1) and s.origin_lang == t.origin_lang == src_lang
    if kind is DatasetKind.FT_BT:
        return _machine(s, 1) and _machine(t, 2) and s.origin_lang == t.origin_lang == tgt_lang
    raise ValueError(kind)


def signatures(pair: Pair, src_lang: str, tgt_lang: str) -> frozenset[DatasetKind]:
    return frozenset(k for k in DatasetKind if matches_signature(pair, k, src_lang, tgt_lang))


# --- recipes -------------------------------------------------------------------


@dataclass(frozen=True)
class Component:
    kind: DatasetKind
    source: str
    budget: Optional[int] = ALL
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", DatasetKind(self.kind))
        if self.budget is not None and self.budget < 0:
            raise ConfigError(f"negative budget for {self.kind.value}:{self.source}")


@dataclass(frozen=True)
class Recipe:
    components: tuple[Component, ...]
    fwd: Optional[BackendSpec] = None
    rev: Optional[BackendSpec] = None

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        for c in self.components:
            if c.kind in (DatasetKind.FT_P, DatasetKind.FT_BT, DatasetKind.FT_MONO) and self.fwd is None:
                raise ConfigError(f"{c.kind.value} component needs a forward backend")
            if c.kind in (DatasetKind.BT, DatasetKind.FT_BT) and self.rev is None:
                raise ConfigError(f"{c.kind.value} component needs a reverse backend")


@dataclass
class ComposeResult:
    corpus: ParallelCorpus
    manifest: list[dict] = field(default_factory=list)


def build_component(
    c: Component,
    corpora: Mapping[str, Union[Corpus, ParallelCorpus]],
    fwd: Optional[BackendSpec],
    rev: Optional[BackendSpec],
) -> tuple[ParallelCorpus, Corpus]:
    """Build one component over its full source; returns (built, input)."""
    if c.source not in corpora:
        raise ConfigError(f"unknown corpus {c.source!r}")
    src = corpora[c.source]

    def need(cls):
        if not isinstance(src, cls):
            raise ConfigError(f"{c.kind.value} needs a {cls.__name__}, {c.source!r} is a {type(src).__name__}")

    if c.kind is DatasetKind.P:
        need(ParallelCorpus)
        return src, src
    if c.kind is DatasetKind.BT:
        if isinstance(src, ParallelCorpus):  # materialized BT corpus
            return src, src
        need(MonoCorpus)
        return back_translate(rev, src), src
    if c.kind is DatasetKind.FT_P:
        need(ParallelCorpus)
        return distill_parallel(fwd, src), src
    if c.kind is DatasetKind.FT_MONO:
        need(MonoCorpus)
        return forward_translate_mono(fwd, src), src
    if c.kind is DatasetKind.FT_BT:
        # either raw target mono, or an already materialized BT corpus
        if isinstance(src, ParallelCorpus):
            return distill_parallel(fwd, src), src
        return round_trip(rev, fwd, src), src
    raise ValueError(c.kind)


def _budgeted(c: Component, available: Corpus) -> Corpus:
    if c.budget is None or c.budget == len(available):
        return available
    if c.budget > len(available):
        raise DataError(
            f"{c.kind.value}:{c.source} budget {c.budget} exceeds the {len(available)} available pairs; "
            "oversample the source corpus"
        )
    return sample(available, c.budget, c.seed)


def compose_training_set(r: Recipe, corpora: Mapping[str, Corpus]) -> ComposeResult:
    """Build each component, sample it down to its budget, and concatenate in recipe order.

    Sampling happens on the source corpus before translation so budgeted components only
    translate what they keep; the selected indices are the same as sampling afterwards.
    """
    parts, manifest = [], []
    for i, c in enumerate(r.components):
        if c.source not in corpora:
            raise ConfigError(f"unknown corpus {c.source!r}")
        selected = _budgeted(c, corpora[c.source])
        built, _ = build_component(c, {c.source: selected}, r.fwd, r.rev)
        backends = sorted({
            side.provenance.producer for pair in built.pairs for side in pair if side.provenance.producer
        })
        manifest.append({
            "index": i,
            "kind": c.kind.value,
            "source": c.source,
            "budget": "all" if c.budget is None else c.budget,
            "count": len(built),
            "seed": c.seed,
            "backends": backends,
            "input_digest": corpora[c.source].digest(),
            "output_digest": built.digest(),
        })
        parts.append(built)
        logger.info("component %d %s:%s -> %d pairs", i, c.kind.value, c.source, len(built))
    if not parts:
        raise ConfigError("recipe has no components")
    return ComposeResult(concat(parts), manifest)


def check_lineage(result: ComposeResult) -> None:
    """Assert every pair matches the signature of the component that produced it."""
    corpus = result.corpus
    start = 0
    for entry in result.manifest:
        kind = DatasetKind(entry["kind"])
        for j in range(start, start + entry["count"]):
            if not matches_signature(corpus.pairs[j], kind, corpus.src_lang, corpus.tgt_lang):
                raise DataError(f"pair {j} does not match the {kind.value} lineage signature")
        start += entry["count"]
    if start != len(corpus):
        raise DataError(f"manifest covers {start} pairs, corpus has {len(corpus)}")
