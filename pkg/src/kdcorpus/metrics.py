"""Corpus-level BLEU, chrF and TER, and paired bootstrap resampling.

All three metrics are computed from per-segment sufficient statistics that are summed over
the corpus, so bucketed scores, pooled scores and bootstrap resamples share one code path.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .errors import DataError

NGRAM_ORDER = 4
CHRF_ORDER = 6
CHRF_BETA = 2.0
TER_MAX_SHIFT_DIST = 10
TER_MAX_SHIFT_SIZE = 10
SMOOTH_EPS = 0.1

TOKENIZERS = ("13a", "none")
SMOOTHING = ("none", "add_k_eps")
METRICS = ("bleu", "chrf", "ter")


# --- tokenization --------------------------------------------------------------

_13A_RULES = [
    (re.compile(r"([\{-\~\[-\` -\&\(-\+\:-\@\/])"), r" \1 "),
    (re.compile(r"([^0-9])([\.,])"), r"\1 \2 "),
    (re.compile(r"([\.,])([^0-9])"), r" \1 \2"),
    (re.compile(r"([0-9])(-)"), r"\1 \2 "),
]


def tokenize_13a(line: str) -> str:
    """mteval-v13a tokenization: pad punctuation and symbols with spaces, case preserved."""
    norm = line.replace("<skipped>", "").replace("-\n", "").replace("\n", " ")
    if "&" in norm:
        norm = norm.replace("&quot;", '"').replace("&amp;", "&").replace("&lt;", "<").replace("&gt;", ">")
    norm = f" {norm} "
    for pattern, repl in _13A_RULES:
        norm = pattern.sub(repl, norm)
    return " ".join(norm.split())


def tokenize(line: str, tokenizer: str) -> list[str]:
    if tokenizer in ("13a", "thirteen_a"):
        return tokenize_13a(line).split()
    if tokenizer == "none":
        return line.split()
    raise ValueError(f"unknown tokenizer {tokenizer!r}")


def _check_lengths(hyps: Sequence[str], refs: Sequence[str]) -> None:
    if len(hyps) != len(refs):
        raise DataError(f"hypothesis/reference length mismatch {len(hyps)} vs {len(refs)}")
    if not refs:
        raise DataError("empty reference corpus")


# --- BLEU ----------------------------------------------------------------------


@dataclass(frozen=True)
class BleuScore:
    score: float
    precisions: tuple[float, ...]
    brevity_penalty: float
    hyp_len: int
    ref_len: int
    tokenizer: str = "13a"
    smoothing: str = "none"

    def to_json(self) -> dict:
        return {"metric": "bleu", **asdict(self)}


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu_segment_stats(hyp: str, ref: str, tokenizer: str = "13a") -> list[int]:
    """[matches_1..4, totals_1..4, hyp_len, ref_len] with clipped n-gram matches."""
    h, r = tokenize(hyp, tokenizer), tokenize(ref, tokenizer)
    matches, totals = [], []
    for n in range(1, NGRAM_ORDER + 1):
        hc, rc = _ngrams(h, n), _ngrams(r, n)
        matches.append(sum(min(c, rc[g]) for g, c in hc.items()))
        totals.append(max(len(h) - n + 1, 0))
    return matches + totals + [len(h), len(r)]


def bleu_stats(hyps, refs, tokenizer: str = "13a") -> np.ndarray:
    return np.array([bleu_segment_stats(h, r, tokenizer) for h, r in zip(hyps, refs)], dtype=np.int64).reshape(
        -1, 2 * NGRAM_ORDER + 2
    )


def _bleu_parts(stats: np.ndarray, smoothing: str):
    stats = np.asarray(stats, dtype=np.float64)
    matches = stats[..., :NGRAM_ORDER]
    totals = stats[..., NGRAM_ORDER:2 * NGRAM_ORDER]
    hyp_len = stats[..., 2 * NGRAM_ORDER]
    ref_len = stats[..., 2 * NGRAM_ORDER + 1]
    safe_totals = np.where(totals > 0, totals, 1.0)
    if smoothing == "add_k_eps":
        matches = np.where((matches == 0) & (totals > 0), SMOOTH_EPS, matches)
    elif smoothing != "none":
        raise ValueError(f"unknown smoothing {smoothing!r}")
    precisions = np.where(totals > 0, matches / safe_totals, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        bp = np.where(hyp_len > ref_len, 1.0, np.exp(1.0 - ref_len / np.where(hyp_len > 0, hyp_len, 1.0)))
        bp = np.where(hyp_len > 0, bp, 0.0)
        all_positive = np.all(precisions > 0, axis=-1)
        log_mean = np.mean(np.log(np.where(precisions > 0, precisions, 1.0)), axis=-1)
    score = np.where(all_positive, 100.0 * bp * np.exp(log_mean), 0.0)
    return score, precisions, bp, hyp_len, ref_len


def bleu_from_stats(stats: np.ndarray, smoothing: str = "none") -> np.ndarray:
    """Vectorized BLEU over the leading axes of summed statistics."""
    return _bleu_parts(stats, smoothing)[0]


def bleu(hyps: Sequence[str], refs: Sequence[str], tokenizer: str = "13a", smoothing: str = "none") -> BleuScore:
    _check_lengths(hyps, refs)
    total = bleu_stats(hyps, refs, tokenizer).sum(axis=0)
    score, precisions, bp, hyp_len, ref_len = _bleu_parts(total, smoothing)
    return BleuScore(
        float(score), tuple(float(p) for p in precisions), float(bp), int(hyp_len), int(ref_len), tokenizer, smoothing
    )


# --- chrF ----------------------------------------------------------------------


@dataclass(frozen=True)
class ChrfScore:
    score: float
    char_n: int = CHRF_ORDER
    beta: float = CHRF_BETA

    def to_json(self) -> dict:
        return {"metric": "chrf", **asdict(self)}


def _char_ngrams(text: str, n: int) -> Counter:
    return Counter(text[i:i + n] for i in range(len(text) - n + 1))


def chrf_segment_stats(hyp: str, ref: str, char_n: int = CHRF_ORDER) -> list[int]:
    """Per order: [matches, hyp_total, ref_total], whitespace removed before extraction."""
    h = "".join(hyp.split())
    r = "".join(ref.split())
    out = []
    for n in range(1, char_n + 1):
        hc, rc = _char_ngrams(h, n), _char_ngrams(r, n)
        out += [sum((hc & rc).values()), sum(hc.values()), sum(rc.values())]
    return out


def chrf_stats(hyps, refs, char_n: int = CHRF_ORDER) -> np.ndarray:
    return np.array([chrf_segment_stats(h, r, char_n) for h, r in zip(hyps, refs)], dtype=np.int64).reshape(
        -1, 3 * char_n
    )


def chrf_from_stats(stats: np.ndarray, beta: float = CHRF_BETA) -> np.ndarray:
    """Average precision and recall over the orders with any n-grams, then combine into F-beta."""
    stats = np.asarray(stats, dtype=np.float64)
    s = stats.reshape(stats.shape[:-1] + (-1, 3))
    m, h, r = s[..., 0], s[..., 1], s[..., 2]
    prec = np.where(h > 0, m / np.where(h > 0, h, 1.0), 0.0)
    rec = np.where(r > 0, m / np.where(r > 0, r, 1.0), 0.0)
    effective = (h > 0) | (r > 0)
    n_eff = effective.sum(axis=-1)
    denom_n = np.where(n_eff > 0, n_eff, 1)
    avg_p = np.where(effective, prec, 0.0).sum(axis=-1) / denom_n
    avg_r = np.where(effective, rec, 0.0).sum(axis=-1) / denom_n
    b2 = beta * beta
    denom = b2 * avg_p + avg_r
    with np.errstate(divide="ignore", invalid="ignore"):
        f = np.where(denom > 0, (1 + b2) * avg_p * avg_r / np.where(denom > 0, denom, 1.0), 0.0)
    return 100.0 * f


def chrf(hyps: Sequence[str], refs: Sequence[str], char_n: int = CHRF_ORDER, beta: float = CHRF_BETA) -> ChrfScore:
    _check_lengths(hyps, refs)
    total = chrf_stats(hyps, refs, char_n).sum(axis=0)
    return ChrfScore(float(chrf_from_stats(total, beta)), char_n, beta)


# --- TER -----------------------------------------------------------------------


@dataclass(frozen=True)
class TerScore:
    score: float
    edits: int
    ref_tokens: int
    max_shift_dist: int = TER_MAX_SHIFT_DIST

    def to_json(self) -> dict:
        return {"metric": "ter", **asdict(self)}


def _batch_levenshtein(cands: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """Word-level edit distance of each row of ``cands`` (K x n) against ``ref`` (m)."""
    k, n = cands.shape
    m = len(ref)
    prev = np.tile(np.arange(m + 1, dtype=np.int64), (k, 1))
    for i in range(1, n + 1):
        cur = np.empty_like(prev)
        cur[:, 0] = i
        sub = prev[:, :-1] + (cands[:, i - 1:i] != ref[None, :])
        best = np.minimum(sub, prev[:, 1:] + 1)
        for j in range(1, m + 1):
            cur[:, j] = np.minimum(best[:, j - 1], cur[:, j - 1] + 1)
        prev = cur
    return prev[:, m]


def levenshtein(a: Sequence, b: Sequence) -> int:
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, 1):
        cur = [i]
        for j, y in enumerate(b, 1):
            cur.append(min(prev[j - 1] + (x != y), prev[j] + 1, cur[j - 1] + 1))
        prev = cur
    return prev[-1]


def _shift_candidates(n: int, max_dist: int, max_size: int):
    """(start, length, dest) in tie-break order: leftmost start, then shortest block, then dest."""
    out = []
    for i in range(n):
        for length in range(1, min(max_size, n - i) + 1):
            for j in range(max(0, i - max_dist), min(n - length, i + max_dist) + 1):
                if j != i:
                    out.append((i, length, j))
    return out


def _apply_shift(seq: list, i: int, length: int, j: int) -> list:
    block = seq[i:i + length]
    rest = seq[:i] + seq[i + length:]
    return rest[:j] + block + rest[j:]


def ter_edits(hyp: Sequence[str], ref: Sequence[str], max_shift_dist: int = TER_MAX_SHIFT_DIST,
              max_shift_size: int = TER_MAX_SHIFT_SIZE) -> tuple[int, int]:
    """Greedy shifts then Levenshtein; returns (edits, shifts)."""
    vocab: dict[str, int] = {}
    h = [vocab.setdefault(w, len(vocab)) for w in hyp]
    r = np.array([vocab.setdefault(w, len(vocab)) for w in ref], dtype=np.int64)
    current = levenshtein(h, r.tolist())
    shifts = 0
    cands = _shift_candidates(len(h), max_shift_dist, max_shift_size)
    while current > 0 and cands:
        seqs = np.array([_apply_shift(h, *c) for c in cands], dtype=np.int64)
        eds = _batch_levenshtein(seqs, r)
        best = int(np.argmin(eds))  # first minimum = tie-break order
        if eds[best] >= current:
            break
        h = seqs[best].tolist()
        current = int(eds[best])
        shifts += 1
    return current + shifts, shifts


def ter_segment_stats(hyp: str, ref: str, max_shift_dist: int = TER_MAX_SHIFT_DIST) -> list[int]:
    h, r = hyp.split(), ref.split()
    if not r:
        return [len(h), 0]
    return [ter_edits(h, r, max_shift_dist)[0], len(r)]


def ter_stats(hyps, refs, max_shift_dist: int = TER_MAX_SHIFT_DIST) -> np.ndarray:
    return np.array([ter_segment_stats(h, r, max_shift_dist) for h, r in zip(hyps, refs)], dtype=np.int64).reshape(
        -1, 2
    )


def ter_from_stats(stats: np.ndarray) -> np.ndarray:
    stats = np.asarray(stats, dtype=np.float64)
    edits, ref_len = stats[..., 0], stats[..., 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(ref_len > 0, edits / np.where(ref_len > 0, ref_len, 1.0), np.where(edits > 0, 1.0, 0.0))


def ter(hyps: Sequence[str], refs: Sequence[str], max_shift_dist: int = TER_MAX_SHIFT_DIST) -> TerScore:
    _check_lengths(hyps, refs)
    total = ter_stats(hyps, refs, max_shift_dist).sum(axis=0)
    return TerScore(float(ter_from_stats(total)), int(total[0]), int(total[1]), max_shift_dist)


# --- configuration and dispatch -----------------------------------------------


@dataclass(frozen=True)
class MetricConfig:
    metrics: tuple[str, ...] = METRICS
    tokenizer: str = "13a"
    smoothing: str = "none"
    char_n: int = CHRF_ORDER
    beta: float = CHRF_BETA
    max_shift_dist: int = TER_MAX_SHIFT_DIST

    def __post_init__(self):
        object.__setattr__(self, "metrics", tuple(self.metrics))
        for m in self.metrics:
            if m not in METRICS:
                raise ValueError(f"unknown metric {m!r}")
        if self.tokenizer not in TOKENIZERS + ("thirteen_a",):
            raise ValueError(f"unknown tokenizer {self.tokenizer!r}")
        if self.smoothing not in SMOOTHING:
            raise ValueError(f"unknown smoothing {self.smoothing!r}")

    def to_json(self) -> dict:
        return asdict(self)

    def signature(self) -> str:
        return (
            f"bleu:tok={self.tokenizer}|smooth={self.smoothing} "
            f"chrf:n={self.char_n}|beta={self.beta:g} ter:shift_dist={self.max_shift_dist}"
        )


HIGHER_IS_BETTER = {"bleu": True, "chrf": True, "ter": False}


def segment_stats(metric: str, hyps, refs, cfg: MetricConfig = MetricConfig()) -> np.ndarray:
    if metric == "bleu":
        return bleu_stats(hyps, refs, cfg.tokenizer)
    if metric == "chrf":
        return chrf_stats(hyps, refs, cfg.char_n)
    if metric == "ter":
        return ter_stats(hyps, refs, cfg.max_shift_dist)
    raise ValueError(f"unknown metric {metric!r}")


def score_from_stats(metric: str, stats: np.ndarray, cfg: MetricConfig = MetricConfig()) -> np.ndarray:
    if metric == "bleu":
        return bleu_from_stats(stats, cfg.smoothing)
    if metric == "chrf":
        return chrf_from_stats(stats, cfg.beta)
    if metric == "ter":
        return ter_from_stats(stats)
    raise ValueError(f"unknown metric {metric!r}")


def score(metric: str, hyps, refs, cfg: MetricConfig = MetricConfig()):
    if metric == "bleu":
        return bleu(hyps, refs, cfg.tokenizer, cfg.smoothing)
    if metric == "chrf":
        return chrf(hyps, refs, cfg.char_n, cfg.beta)
    if metric == "ter":
        return ter(hyps, refs, cfg.max_shift_dist)
    raise ValueError(f"unknown metric {metric!r}")


def score_from_total(metric: str, total: np.ndarray, cfg: MetricConfig = MetricConfig()):
    """Score dataclass from corpus-summed statistics."""
    total = np.asarray(total)
    if metric == "bleu":
        s, precisions, bp, hyp_len, ref_len = _bleu_parts(total, cfg.smoothing)
        return BleuScore(float(s), tuple(float(p) for p in precisions), float(bp), int(hyp_len), int(ref_len),
                         cfg.tokenizer, cfg.smoothing)
    if metric == "chrf":
        return ChrfScore(float(chrf_from_stats(total, cfg.beta)), cfg.char_n, cfg.beta)
    if metric == "ter":
        return TerScore(float(ter_from_stats(total)), int(total[0]), int(total[1]), cfg.max_shift_dist)
    raise ValueError(f"unknown metric {metric!r}")


# --- paired bootstrap ----------------------------------------------------------


@dataclass(frozen=True)
class BootstrapResult:
    metric: str
    p_value: float
    n_resamples: int
    seed: int
    wins_a: int
    wins_b: int
    ties: int
    score_a: float
    score_b: float

    def to_json(self) -> dict:
        return {"kind": "bootstrap", **asdict(self)}


def paired_bootstrap(
    hyps_a: Sequence[str],
    hyps_b: Sequence[str],
    refs: Sequence[str],
    metric: str = "bleu",
    n_resamples: int = 1000,
    seed: int = 0,
    cfg: MetricConfig = MetricConfig(),
) -> BootstrapResult:
    """One-sided test that system A beats system B.

    p = (resamples where B is at least as good as A) / n_resamples, floored at 1 / n_resamples.
    """
    if not len(hyps_a) == len(hyps_b) == len(refs):
        raise DataError(f"length mismatch {len(hyps_a)} / {len(hyps_b)} / {len(refs)}")
    if len(refs) < 2:
        raise DataError("paired bootstrap needs at least 2 segments")
    if n_resamples < 1:
        raise ValueError("n_resamples must be >= 1")
    stats_a = segment_stats(metric, hyps_a, refs, cfg).astype(np.float64)
    stats_b = segment_stats(metric, hyps_b, refs, cfg).astype(np.float64)
    n = len(refs)
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, n, size=(n_resamples, n))
    weights = np.zeros((n_resamples, n), dtype=np.float64)
    np.add.at(weights, (np.repeat(np.arange(n_resamples), n), idx.ravel()), 1.0)
    sa = score_from_stats(metric, weights @ stats_a, cfg)
    sb = score_from_stats(metric, weights @ stats_b, cfg)
    if not HIGHER_IS_BETTER[metric]:
        sa, sb = -sa, -sb
    wins_a = int(np.sum(sa > sb))
    wins_b = int(np.sum(sb > sa))
    ties = n_resamples - wins_a - wins_b
    p = max((wins_b + ties) / n_resamples, 1.0 / n_resamples)
    full_a = float(score_from_stats(metric, stats_a.sum(axis=0), cfg))
    full_b = float(score_from_stats(metric, stats_b.sum(axis=0), cfg))
    return BootstrapResult(metric, p, n_resamples, seed, wins_a, wins_b, ties, full_a, full_b)
