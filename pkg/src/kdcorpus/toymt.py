"""Word-level toy translator: IBM Model 1 (no NULL word) trained by EM, greedy lexical decoding.

It stands in for the neural teacher and student so the whole distillation pipeline can run
locally in seconds.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .backend import BuiltinTransport
from .corpus import ParallelCorpus, SideRecord
from .errors import DataError

ROW_SUM_TOL = 1e-9


@dataclass(frozen=True)
class LexTable:
    """Conditional word-translation probabilities ``t[f][e] = t(e | f)``."""

    src_lang: str
    tgt_lang: str
    t: Mapping[str, Mapping[str, float]] = field(default_factory=dict)

    def __post_init__(self):
        rows = {f: dict(row) for f, row in sorted(self.t.items()) if row}
        object.__setattr__(self, "t", rows)
        # argmax cache; ties -> lexicographically smallest target word
        best = {f: min(row.items(), key=lambda kv: (-kv[1], kv[0]))[0] for f, row in rows.items()}
        object.__setattr__(self, "_best", best)

    @property
    def src_vocab(self) -> set[str]:
        return set(self.t)

    @property
    def tgt_vocab(self) -> set[str]:
        return {e for row in self.t.values() for e in row}

    def __len__(self) -> int:
        return sum(len(row) for row in self.t.values())

    def prob(self, e: str, f: str) -> float:
        return self.t.get(f, {}).get(e, 0.0)

    def best(self, f: str) -> str | None:
        return self._best.get(f)

    def entries(self) -> list[tuple[str, str, float]]:
        """All entries sorted by (f, -prob, e), the on-disk order."""
        out = []
        for f, row in self.t.items():
            out.extend((f, e, p) for e, p in sorted(row.items(), key=lambda kv: (-kv[1], kv[0])))
        return out

    def check(self, tol: float = ROW_SUM_TOL) -> None:
        for f, row in self.t.items():
            if any(not 0.0 <= p <= 1.0 for p in row.values()):
                raise DataError(f"row {f!r} has a probability outside [0, 1]")
            if abs(math.fsum(row.values()) - 1.0) > tol:
                raise DataError(f"row {f!r} sums to {math.fsum(row.values())!r}")


@dataclass(frozen=True)
class TrainStats:
    log_likelihood: tuple[float, ...]


def _tokenize(corpus: ParallelCorpus) -> list[tuple[list[str], list[str]]]:
    return [(s.text.split(), t.text.split()) for s, t in corpus.pairs]


def _estep(bitext, t):
    """Expected counts and corpus log-likelihood under ``t``."""
    counts: dict[str, dict[str, float]] = defaultdict(lambda: defaultdict(float))
    ll = 0.0
    for fs, es in bitext:
        inv_len = 1.0 / len(fs)
        for e in es:
            z = 0.0
            for f in fs:
                z += t[f][e]
            ll += math.log(z * inv_len)
            for f in fs:
                counts[f][e] += t[f][e] / z
    return counts, ll


def _mstep(counts) -> dict[str, dict[str, float]]:
    t = {}
    for f, row in counts.items():
        total = math.fsum(row.values())
        t[f] = {e: c / total for e, c in row.items()}
    return t


def train_ibm1(corpus: ParallelCorpus, iterations: int = 10) -> tuple[LexTable, TrainStats]:
    """Train t(e|f) with EM.

    Rows start uniform over the target words co-occurring with ``f``. The recorded
    log-likelihood after iteration k is that of the parameters produced by iteration k.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    bitext = [(fs, es) for fs, es in _tokenize(corpus) if fs and es]
    if not bitext:
        raise DataError("cannot train on an empty corpus")

    cooc: dict[str, set[str]] = defaultdict(set)
    for fs, es in bitext:
        for f in fs:
            cooc[f].update(es)
    t = {f: dict.fromkeys(sorted(es), 1.0 / len(es)) for f, es in sorted(cooc.items())}

    lls = []
    counts, _ = _estep(bitext, t)
    for it in range(iterations):
        t = _mstep(counts)
        counts, ll = _estep(bitext, t)
        lls.append(ll)
    return LexTable(corpus.src_lang, corpus.tgt_lang, t), TrainStats(tuple(lls))


def decode_text(m: LexTable, text: str) -> str:
    return " ".join(m.best(w) or w for w in text.split())


def decode(m: LexTable, s: SideRecord, producer: str = "toy") -> SideRecord:
    """Word-by-word argmax translation; unknown words are copied through."""
    return s.translated(decode_text(m, s.text), m.tgt_lang, producer)


def prune(m: LexTable, top_k: int, min_prob: float = 0.0) -> LexTable:
    """Keep the ``top_k`` most probable entries with ``t >= min_prob`` per row, renormalized.

    A row left empty by ``min_prob`` keeps its argmax with probability 1.
    """
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    if not 0.0 <= min_prob < 1.0:
        raise ValueError("min_prob must be in [0, 1)")
    rows = {}
    for f, row in m.t.items():
        ranked = sorted(row.items(), key=lambda kv: (-kv[1], kv[0]))
        kept = [(e, p) for e, p in ranked[:top_k] if p >= min_prob]
        if not kept:
            rows[f] = {ranked[0][0]: 1.0}
            continue
        total = math.fsum(p for _, p in kept)
        rows[f] = {e: p / total for e, p in kept}
    return LexTable(m.src_lang, m.tgt_lang, rows)


def table_transport(m: LexTable, name: str = "toy") -> BuiltinTransport:
    return BuiltinTransport(lambda lines: [decode_text(m, line) for line in lines], name)


# --- serialization -------------------------------------------------------------


def dumps_table(m: LexTable) -> str:
    return "".join(f"{f}\t{e}\t{p!r}\n" for f, e, p in m.entries())


def save_table(m: LexTable, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_table(m), encoding="utf-8")


def loads_table(text: str, src_lang: str, tgt_lang: str) -> LexTable:
    rows: dict[str, dict[str, float]] = defaultdict(dict)
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise DataError(f"model line {lineno}: expected f<TAB>e<TAB>prob")
        f, e, p = parts
        try:
            rows[f][e] = float(p)
        except ValueError as err:
            raise DataError(f"model line {lineno}: bad probability {p!r}") from err
    return LexTable(src_lang, tgt_lang, rows)


def load_table(path, src_lang: str, tgt_lang: str) -> LexTable:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise DataError(f"cannot read model {path}: {e}") from e
    return loads_table(text, src_lang, tgt_lang)


def translate_texts(m: LexTable, texts: Sequence[str]) -> list[str]:
    return [decode_text(m, t) for t in texts]
