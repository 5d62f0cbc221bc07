"""Test sets split by original language, per-bucket scoring and type-token ratio."""

from __future__ import annotations

import html
import json
import re
import xml.etree.ElementTree as ET
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import metrics
from .errors import DataError

OTHER = "other"
BUCKETS = ("src", "tgt", OTHER)


@dataclass(frozen=True)
class TestDoc:
    __test__ = False  # keep pytest from collecting this class

    doc_id: str
    origlang: str
    segments: tuple[tuple[str, str], ...]

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple((s, r) for s, r in self.segments))
        if not self.segments:
            raise DataError(f"document {self.doc_id!r} has no segments")


def sources(docs: Sequence[TestDoc]) -> list[str]:
    return [s for d in docs for s, _ in d.segments]


def references(docs: Sequence[TestDoc]) -> list[str]:
    return [r for d in docs for _, r in d.segments]


def origins(docs: Sequence[TestDoc]) -> list[str]:
    return [d.origlang for d in docs for _ in d.segments]


# --- parsing -------------------------------------------------------------------

_DOC_RE = re.compile(r"<doc\b([^>]*)>", re.IGNORECASE)
_ATTR_RE = re.compile(r'(\w+)\s*=\s*"([^"]*)"')
_SEG_RE = re.compile(r"<seg\b[^>]*>(.*?)</seg>", re.IGNORECASE | re.DOTALL)


def _read_text(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise DataError(f"cannot read {path}: {e}") from e


def _parse_sgml_docs(path, missing_origlang: Optional[str]) -> "OrderedDict[str, tuple[Optional[str], list[str]]]":
    text = _read_text(path)
    docs: OrderedDict = OrderedDict()
    starts = list(_DOC_RE.finditer(text))
    for k, m in enumerate(starts):
        body_end = starts[k + 1].start() if k + 1 < len(starts) else len(text)
        body = text[m.end():body_end]
        close = body.lower().find("</doc>")
        if close >= 0:
            body = body[:close]
        attrs = dict(_ATTR_RE.findall(m.group(1)))
        doc_id = attrs.get("docid") or attrs.get("id")
        if doc_id is None:
            raise DataError(f"{path}: <doc> without docid")
        origlang = attrs.get("origlang") or missing_origlang
        segs = [html.unescape(s.strip()) for s in _SEG_RE.findall(body)]
        if doc_id in docs:
            raise DataError(f"{path}: duplicate docid {doc_id!r}")
        docs[doc_id] = (origlang, segs)
    return docs


def parse_sgml_testset(src_path, ref_path, missing_origlang: Optional[str] = None) -> list[TestDoc]:
    """Parse WMT SGML source and reference files into documents.

    ``origlang`` is read from either file's ``<doc>`` tag. Documents without it raise unless
    ``missing_origlang`` supplies a fallback label (e.g. ``"other"``).
    """
    src_docs = _parse_sgml_docs(src_path, None)
    ref_docs = _parse_sgml_docs(ref_path, None)
    out = []
    for doc_id, (origlang, src_segs) in src_docs.items():
        if doc_id not in ref_docs:
            raise DataError(f"document {doc_id!r} missing from {ref_path}")
        ref_origlang, ref_segs = ref_docs[doc_id]
        if len(src_segs) != len(ref_segs):
            raise DataError(f"document {doc_id!r}: {len(src_segs)} source segments vs {len(ref_segs)} reference")
        origlang = origlang or ref_origlang or missing_origlang
        if origlang is None:
            raise DataError(f"document {doc_id!r} has no origlang attribute")
        out.append(TestDoc(doc_id, origlang, tuple(zip(src_segs, ref_segs))))
    extra = set(ref_docs) - set(src_docs)
    if extra:
        raise DataError(f"reference documents without source: {sorted(extra)}")
    return out


def parse_wmt_xml(path, ref_translator: Optional[str] = None, missing_origlang: Optional[str] = None) -> list[TestDoc]:
    """Parse the single-file WMT XML format (``<doc origlang=..><src>..</src><ref>..</ref></doc>``)."""
    try:
        root = ET.parse(path).getroot()
    except (OSError, ET.ParseError) as e:
        raise DataError(f"cannot parse {path}: {e}") from e
    out = []
    for doc in root.iter("doc"):
        doc_id = doc.get("id") or doc.get("docid")
        origlang = doc.get("origlang") or missing_origlang
        if origlang is None:
            raise DataError(f"document {doc_id!r} has no origlang attribute")
        src = doc.find("src")
        refs = doc.findall("ref")
        if ref_translator is not None:
            refs = [r for r in refs if r.get("translator") == ref_translator]
        if src is None or not refs:
            raise DataError(f"document {doc_id!r} lacks a src or ref block")
        src_segs = {s.get("id"): (s.text or "").strip() for s in src.iter("seg")}
        ref_segs = {s.get("id"): (s.text or "").strip() for s in refs[0].iter("seg")}
        if len(src_segs) != len(ref_segs):
            raise DataError(f"document {doc_id!r}: {len(src_segs)} source segments vs {len(ref_segs)} reference")
        try:
            segs = tuple((text, ref_segs[sid]) for sid, text in src_segs.items())
        except KeyError as e:
            raise DataError(f"document {doc_id!r}: reference lacks segment {e}") from e
        out.append(TestDoc(doc_id, origlang, segs))
    return out


def _plain_lines(path) -> list[str]:
    return _read_text(path).splitlines()


def parse_tsv_testset(src_path, ref_path, tsv_path) -> list[TestDoc]:
    """Plain-text source/reference plus a TSV of ``doc_id, origlang, start, end``.

    Line ranges are 0-based and half-open, and must tile the files in order.
    """
    src, ref = _plain_lines(src_path), _plain_lines(ref_path)
    if len(src) != len(ref):
        raise DataError(f"segment count mismatch {len(src)} vs {len(ref)}")
    docs, expected_start = [], 0
    for lineno, line in enumerate(_plain_lines(tsv_path), 1):
        if not line.strip() or line.startswith("doc_id\t"):
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise DataError(f"{tsv_path} line {lineno}: expected 4 tab-separated fields")
        doc_id, origlang, start, end = parts[0], parts[1], int(parts[2]), int(parts[3])
        if start != expected_start or not start < end <= len(src):
            raise DataError(f"{tsv_path} line {lineno}: range [{start}, {end}) does not continue the tiling")
        if not origlang:
            raise DataError(f"document {doc_id!r} has no origlang")
        docs.append(TestDoc(doc_id, origlang, tuple(zip(src[start:end], ref[start:end]))))
        expected_start = end
    if expected_start != len(src):
        raise DataError(f"{tsv_path} covers {expected_start} of {len(src)} segments")
    return docs


def write_tsv_testset(docs: Sequence[TestDoc], src_path, ref_path, tsv_path) -> None:
    Path(src_path).write_text("".join(s + "\n" for s in sources(docs)), encoding="utf-8")
    Path(ref_path).write_text("".join(r + "\n" for r in references(docs)), encoding="utf-8")
    rows, start = [], 0
    for d in docs:
        rows.append(f"{d.doc_id}\t{d.origlang}\t{start}\t{start + len(d.segments)}\n")
        start += len(d.segments)
    Path(tsv_path).write_text("".join(rows), encoding="utf-8")


def write_sgml_testset(docs: Sequence[TestDoc], src_path, ref_path, setid: str = "test",
                       src_lang: str = "src", tgt_lang: str = "tgt") -> None:
    def render(kind: str, lang: str, idx: int) -> str:
        lines = [f'<{kind}set setid="{setid}" srclang="{src_lang}" trglang="{tgt_lang}">']
        for d in docs:
            lines.append(f'<doc sysid="{kind}" docid="{html.escape(d.doc_id)}" origlang="{d.origlang}">')
            for i, seg in enumerate(d.segments, 1):
                lines.append(f'<seg id="{i}">{html.escape(seg[idx], quote=False)}</seg>')
            lines.append("</doc>")
        lines.append(f"</{kind}set>")
        return "\n".join(lines) + "\n"

    Path(src_path).write_text(render("src", src_lang, 0), encoding="utf-8")
    Path(ref_path).write_text(render("ref", tgt_lang, 1), encoding="utf-8")


def load_testset(src_path, ref_path=None, tsv_path=None, missing_origlang: Optional[str] = None) -> list[TestDoc]:
    """Dispatch on format: TSV sidecar, single-file XML, or SGML pair."""
    if tsv_path is not None:
        return parse_tsv_testset(src_path, ref_path, tsv_path)
    if ref_path is None:
        if str(src_path).endswith(".xml"):
            return parse_wmt_xml(src_path, missing_origlang=missing_origlang)
        # a lone SGML file: origlang and segment layout only, references mirror sources
        return parse_sgml_testset(src_path, src_path, missing_origlang)
    return parse_sgml_testset(src_path, ref_path, missing_origlang)


# --- buckets and scoring -------------------------------------------------------


@dataclass(frozen=True)
class OriginBuckets:
    src: tuple[int, ...]
    tgt: tuple[int, ...]
    other: tuple[int, ...]

    def sizes(self) -> tuple[int, int, int]:
        return (len(self.src), len(self.tgt), len(self.other))

    def items(self):
        return (("src", self.src), ("tgt", self.tgt), (OTHER, self.other))


def split_by_origin(docs: Sequence[TestDoc], src_lang: str, tgt_lang: str) -> OriginBuckets:
    buckets: dict[str, list[int]] = {b: [] for b in BUCKETS}
    for i, lang in enumerate(origins(docs)):
        key = "src" if lang == src_lang else "tgt" if lang == tgt_lang else OTHER
        buckets[key].append(i)
    return OriginBuckets(*(tuple(buckets[b]) for b in BUCKETS))


@dataclass
class ScoreReport:
    """Scores per bucket; buckets with no segments are absent rather than zero."""

    system: str
    sizes: dict[str, int]
    scores: dict[str, dict[str, object]]
    config: metrics.MetricConfig = field(default_factory=metrics.MetricConfig)

    def columns(self) -> list[str]:
        return list(self.scores)

    def value(self, bucket: str, metric: str) -> float:
        return self.scores[bucket][metric].score

    def to_jsonl(self) -> list[dict]:
        rows = []
        for bucket, by_metric in self.scores.items():
            for metric, sc in by_metric.items():
                rows.append({
                    "system": self.system,
                    "bucket": bucket,
                    "segments": self.sizes[bucket],
                    **sc.to_json(),
                })
        return rows


def evaluate_by_origin(
    hyps: Sequence[str],
    docs: Sequence[TestDoc],
    src_lang: str,
    tgt_lang: str,
    cfg: metrics.MetricConfig = metrics.MetricConfig(),
    system: str = "system",
) -> ScoreReport:
    """Score each non-empty origin bucket and the pooled ``all`` column.

    Each metric's per-segment statistics are computed once; bucket and ``all`` scores sum
    those statistics, so ``all`` is a pooled corpus score, not an average of buckets.
    """
    refs = references(docs)
    if len(hyps) != len(refs):
        raise DataError(f"{len(hyps)} hypotheses for {len(refs)} test segments")
    buckets = split_by_origin(docs, src_lang, tgt_lang)
    stats = {m: metrics.segment_stats(m, hyps, refs, cfg) for m in cfg.metrics}
    columns = [(name, idx) for name, idx in buckets.items() if idx]
    columns.append(("all", tuple(range(len(refs)))))
    scores, sizes = {}, {}
    for name, idx in columns:
        sel = np.asarray(idx, dtype=np.int64)
        scores[name] = {m: metrics.score_from_total(m, stats[m][sel].sum(axis=0), cfg) for m in cfg.metrics}
        sizes[name] = len(idx)
    return ScoreReport(system, sizes, scores, cfg)


def format_table(reports: Sequence[ScoreReport]) -> str:
    """Plain-text table, one row per system, one column group per metric."""
    if not reports:
        return ""
    cfg = reports[0].config
    cols: list[str] = []
    for r in reports:
        for c in r.columns():
            if c not in cols:
                cols.append(c)
    cols.sort(key=lambda c: ("src", "tgt", OTHER, "all").index(c))
    width = max(len(r.system) for r in reports + [ScoreReport("system", {}, {})])
    lines = [f"# {cfg.signature()}"]
    for m in cfg.metrics:
        lines.append(f"{m.upper()} by original language" + (" (lower is better)" if m == "ter" else ""))
        lines.append(" " * width + "".join(f"{c:>10}" for c in cols))
        for r in reports:
            cells = []
            for c in cols:
                if c in r.scores:
                    v = r.scores[c][m].score
                    cells.append(f"{v:>10.4f}" if m == "ter" else f"{v:>10.2f}")
                else:
                    cells.append(f"{'-':>10}")
            lines.append(f"{r.system:<{width}}" + "".join(cells))
        lines.append("")
    return "\n".join(lines)


# --- type-token ratio ----------------------------------------------------------


@dataclass(frozen=True)
class TtrReport:
    types: int
    tokens: int
    ratio: float
    grouping: Optional[str] = None

    def to_json(self) -> dict:
        return {"kind": "ttr", "types": self.types, "tokens": self.tokens, "ratio": self.ratio, "grouping": self.grouping}


def type_token_ratio(sentences: Sequence[str], lowercase: bool = True, grouping: Optional[str] = None) -> TtrReport:
    tokens = [tok for s in sentences for tok in (s.lower() if lowercase else s).split()]
    if not tokens:
        raise DataError("type-token ratio of a corpus with no tokens")
    types = len(set(tokens))
    return TtrReport(types, len(tokens), types / len(tokens), grouping)


def ttr_by_origin(sentences: Sequence[str], origin_langs: Sequence[str], lowercase: bool = True) -> dict[str, TtrReport]:
    """One TTR per original language, in order of first appearance."""
    if len(sentences) != len(origin_langs):
        raise DataError(f"{len(sentences)} sentences but {len(origin_langs)} origin labels")
    groups: dict[str, list[str]] = {}
    for s, lang in zip(sentences, origin_langs):
        groups.setdefault(lang, []).append(s)
    return {lang: type_token_ratio(ss, lowercase, lang) for lang, ss in groups.items()}


def dumps_jsonl(rows: Sequence[dict]) -> str:
    return "".join(json.dumps(r, sort_keys=True, ensure_ascii=False) + "\n" for r in rows)
