"""Sentence corpora with per-side provenance, plus the cleaning/chunking/sampling ops.

Corpora are immutable: every operation returns a new corpus and never touches the
``origin_lang`` or ``provenance`` of the records it keeps.
"""

from __future__ import annotations

import enum
import hashlib
import json
import logging
import os
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence, TypeVar, Union

from .errors import DataError

logger = logging.getLogger(__name__)

SIDECAR_SUFFIX = ".meta.jsonl"


class Kind(str, enum.Enum):
    NATURAL = "natural"
    HUMAN = "human"
    MACHINE = "machine"


@dataclass(frozen=True)
class Provenance:
    kind: Kind = Kind.NATURAL
    depth: int = 0
    producer: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.depth < 0:
            raise ValueError(f"negative provenance depth {self.depth}")
        if (self.kind is Kind.MACHINE) != (self.depth >= 1):
            raise ValueError(f"provenance kind {self.kind.value} inconsistent with depth {self.depth}")

    def translated(self, producer: str) -> "Provenance":
        return Provenance(Kind.MACHINE, self.depth + 1, producer)

    def to_json(self) -> dict:
        return {"kind": self.kind.value, "depth": self.depth, "producer": self.producer}

    @classmethod
    def from_json(cls, obj: dict) -> "Provenance":
        return cls(Kind(obj["kind"]), int(obj.get("depth", 0)), obj.get("producer"))


NATURAL = Provenance(Kind.NATURAL)
HUMAN = Provenance(Kind.HUMAN)


@dataclass(frozen=True)
class SideRecord:
    text: str
    lang: str
    origin_lang: str
    provenance: Provenance = NATURAL

    def __post_init__(self):
        if "\n" in self.text or "\r" in self.text:
            raise ValueError(f"sentence contains a newline: {self.text!r}")

    def translated(self, text: str, lang: str, producer: str) -> "SideRecord":
        return SideRecord(text, lang, self.origin_lang, self.provenance.translated(producer))

    def meta(self) -> dict:
        return {"origin_lang": self.origin_lang, "provenance": self.provenance.to_json()}


@dataclass(frozen=True)
class MonoCorpus:
    lang: str
    records: tuple[SideRecord, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        for i, r in enumerate(self.records):
            if r.lang != self.lang:
                raise ValueError(f"record {i} has lang {r.lang!r}, corpus is {self.lang!r}")

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def texts(self) -> list[str]:
        return [r.text for r in self.records]

    def _replace_items(self, items) -> "MonoCorpus":
        return MonoCorpus(self.lang, tuple(items))

    @property
    def _items(self):
        return self.records

    def digest(self) -> str:
        h = hashlib.sha256()
        for r in self.records:
            h.update(json.dumps([r.text, r.meta()], sort_keys=True, ensure_ascii=False).encode())
            h.update(b"\n")
        return h.hexdigest()


Pair = tuple[SideRecord, SideRecord]


@dataclass(frozen=True)
class ParallelCorpus:
    src_lang: str
    tgt_lang: str
    pairs: tuple[Pair, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple((s, t) for s, t in self.pairs))
        for i, (s, t) in enumerate(self.pairs):
            if s.lang != self.src_lang or t.lang != self.tgt_lang:
                raise ValueError(
                    f"pair {i} has langs ({s.lang}, {t.lang}), corpus is ({self.src_lang}, {self.tgt_lang})"
                )

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    @property
    def sources(self) -> MonoCorpus:
        return MonoCorpus(self.src_lang, tuple(s for s, _ in self.pairs))

    @property
    def targets(self) -> MonoCorpus:
        return MonoCorpus(self.tgt_lang, tuple(t for _, t in self.pairs))

    def reversed(self) -> "ParallelCorpus":
        return ParallelCorpus(self.tgt_lang, self.src_lang, tuple((t, s) for s, t in self.pairs))

    def _replace_items(self, items) -> "ParallelCorpus":
        return ParallelCorpus(self.src_lang, self.tgt_lang, tuple(items))

    @property
    def _items(self):
        return self.pairs

    def digest(self) -> str:
        h = hashlib.sha256()
        for s, t in self.pairs:
            h.update(json.dumps([s.text, s.meta(), t.text, t.meta()], sort_keys=True, ensure_ascii=False).encode())
            h.update(b"\n")
        return h.hexdigest()


Corpus = Union[MonoCorpus, ParallelCorpus]
C = TypeVar("C", MonoCorpus, ParallelCorpus)


# --- I/O -----------------------------------------------------------------------


def sidecar_path(path: Union[str, os.PathLike]) -> Path:
    return Path(str(path) + SIDECAR_SUFFIX)


def _read_lines(path: Union[str, os.PathLike]) -> list[str]:
    try:
        raw = Path(path).read_bytes()
    except OSError as e:
        raise DataError(f"cannot read {path}: {e}") from e
    lines = raw.split(b"\n")
    if lines and lines[-1] == b"":
        lines.pop()
    out = []
    for lineno, line in enumerate(lines, 1):
        try:
            out.append(line.decode("utf-8").rstrip("\r"))
        except UnicodeDecodeError as e:
            raise DataError(f"{path}: invalid UTF-8 on line {lineno}") from e
    return out


def _read_sidecar(path: Path, n_lines: int) -> list[dict]:
    metas = []
    for lineno, line in enumerate(_read_lines(path), 1):
        try:
            metas.append(json.loads(line))
        except json.JSONDecodeError as e:
            raise DataError(f"{path}: bad JSON on line {lineno}: {e}") from e
    if len(metas) != n_lines:
        raise DataError(f"{path}: sidecar has {len(metas)} lines, sentence file has {n_lines}")
    return metas


def _record(text: str, lang: str, origin_lang: str, provenance: Provenance, meta: Optional[dict]) -> SideRecord:
    if meta is not None:
        return SideRecord(text, lang, meta["origin_lang"], Provenance.from_json(meta["provenance"]))
    return SideRecord(text, lang, origin_lang, provenance)


def load_mono(
    path,
    lang: str,
    origin_lang: Optional[str] = None,
    provenance: Provenance = NATURAL,
    use_sidecar: bool = True,
) -> MonoCorpus:
    """Read one sentence per line. Blank lines are skipped with a warning.

    A ``<path>.meta.jsonl`` sidecar, when present, overrides ``origin_lang`` and
    ``provenance`` per line.
    """
    origin_lang = origin_lang or lang
    lines = _read_lines(path)
    side = sidecar_path(path)
    metas = _read_sidecar(side, len(lines)) if use_sidecar and side.exists() else None
    records = []
    for i, line in enumerate(lines):
        if not line.strip():
            logger.warning("%s: skipping blank line %d", path, i + 1)
            continue
        records.append(_record(line, lang, origin_lang, provenance, metas[i] if metas else None))
    logger.info("loaded %d sentences from %s", len(records), path)
    return MonoCorpus(lang, tuple(records))


def load_parallel(
    path_src,
    path_tgt,
    src_lang: str,
    tgt_lang: str,
    origin_lang: Optional[str] = None,
    src_provenance: Provenance = NATURAL,
    tgt_provenance: Provenance = HUMAN,
    use_sidecar: bool = True,
) -> ParallelCorpus:
    origin_lang = origin_lang or src_lang
    src_lines = _read_lines(path_src)
    tgt_lines = _read_lines(path_tgt)
    if len(src_lines) != len(tgt_lines):
        raise DataError(f"length mismatch {len(src_lines)} vs {len(tgt_lines)} ({path_src}, {path_tgt})")
    metas = []
    for path, n in ((path_src, len(src_lines)), (path_tgt, len(tgt_lines))):
        side = sidecar_path(path)
        metas.append(_read_sidecar(side, n) if use_sidecar and side.exists() else None)
    pairs = []
    for i, (s, t) in enumerate(zip(src_lines, tgt_lines)):
        if not s.strip() or not t.strip():
            raise DataError(f"blank line {i + 1} in parallel input ({path_src}, {path_tgt})")
        pairs.append((
            _record(s, src_lang, origin_lang, src_provenance, metas[0][i] if metas[0] else None),
            _record(t, tgt_lang, origin_lang, tgt_provenance, metas[1][i] if metas[1] else None),
        ))
    logger.info("loaded %d pairs from %s / %s", len(pairs), path_src, path_tgt)
    return ParallelCorpus(src_lang, tgt_lang, tuple(pairs))


def _write_side(path, records: Sequence[SideRecord]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for r in records:
            f.write(r.text + "\n")
    with open(sidecar_path(path), "w", encoding="utf-8", newline="\n") as f:
        for r in records:
            f.write(json.dumps(r.meta(), sort_keys=True, ensure_ascii=False) + "\n")


def write_mono(c: MonoCorpus, path) -> None:
    _write_side(path, c.records)


def write_parallel(c: ParallelCorpus, path_src, path_tgt) -> None:
    _write_side(path_src, [s for s, _ in c.pairs])
    _write_side(path_tgt, [t for _, t in c.pairs])


# --- operations ----------------------------------------------------------------


def word_count(text: str) -> int:
    return len(text.split())


def _check_bounds(min_words: int, max_words: int) -> None:
    if min_words < 1 or max_words < min_words:
        raise ValueError(f"invalid word bounds [{min_words}, {max_words}]")


def clean(c: ParallelCorpus, min_words: int = 3, max_words: int = 150) -> ParallelCorpus:
    """Keep pairs whose sides both have ``min_words <= words <= max_words``."""
    _check_bounds(min_words, max_words)
    kept = [
        (s, t) for s, t in c.pairs
        if min_words <= word_count(s.text) <= max_words and min_words <= word_count(t.text) <= max_words
    ]
    return c._replace_items(kept)


def clean_mono(c: MonoCorpus, min_words: int = 3, max_words: int = 150) -> MonoCorpus:
    _check_bounds(min_words, max_words)
    return c._replace_items(r for r in c.records if min_words <= word_count(r.text) <= max_words)


def chunk(c: C, n: int) -> list[C]:
    """Split into ``n`` contiguous slices; the first ``len(c) % n`` chunks get one extra item."""
    if n < 1:
        raise ValueError("chunk count must be >= 1")
    items = c._items
    if n > len(items):
        raise DataError(f"cannot split {len(items)} sentences into {n} chunks")
    base, extra = divmod(len(items), n)
    out, start = [], 0
    for i in range(n):
        size = base + (1 if i < extra else 0)
        out.append(c._replace_items(items[start:start + size]))
        start += size
    return out


def sample(c: C, size: int, seed: int) -> C:
    """Uniform sample without replacement, returned in original corpus order."""
    items = c._items
    if size < 0:
        raise ValueError("sample size must be non-negative")
    if size > len(items):
        raise DataError(f"sample size {size} exceeds corpus size {len(items)}; oversample the corpus first")
    idx = sorted(random.Random(seed).sample(range(len(items)), size))
    return c._replace_items(items[i] for i in idx)


def oversample(c: C, target: int, seed: int) -> C:
    """``target // len(c)`` full copies followed by a seeded sample of the remainder."""
    items = c._items
    if not items:
        raise DataError("cannot oversample an empty corpus")
    if target < len(items):
        raise ValueError(f"oversample target {target} is below corpus size {len(items)}")
    copies, rest = divmod(target, len(items))
    tail = sample(c, rest, seed)._items
    return c._replace_items(items * copies + tail)


def concat(cs: Iterable[C]) -> C:
    cs = list(cs)
    if not cs:
        raise ValueError("concat needs at least one corpus")
    first = cs[0]
    key = _lang_key(first)
    for other in cs[1:]:
        if type(other) is not type(first) or _lang_key(other) != key:
            raise DataError(f"language mismatch in concat: {_lang_key(other)} vs {key}")
    items = []
    for other in cs:
        items.extend(other._items)
    return first._replace_items(items)


def _lang_key(c: Corpus) -> tuple:
    if isinstance(c, ParallelCorpus):
        return (c.src_lang, c.tgt_lang)
    return (c.lang,)
