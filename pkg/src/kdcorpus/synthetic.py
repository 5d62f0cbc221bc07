"""Synthetic toy language pairs with a one-to-one core lexicon, for local end-to-end experiments."""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .corpus import HUMAN, NATURAL, MonoCorpus, ParallelCorpus, SideRecord, write_mono, write_parallel
from .origin import TestDoc, write_sgml_testset, write_tsv_testset

_SRC_SYLLABLES = ["ka", "lo", "mi", "ne", "ru", "si", "to", "va", "ze", "pu"]
_TGT_SYLLABLES = ["bor", "dak", "fen", "gil", "hum", "jas", "kip", "lum", "mos", "nat"]


def _words(syllables: list[str], n: int, rng: random.Random) -> list[str]:
    pool = ["".join(p) for p in itertools.product(syllables, repeat=2)]
    if n > len(pool):
        pool += ["".join(p) for p in itertools.product(syllables, repeat=3)]
    if n > len(pool):
        raise ValueError(f"vocabulary of {n} words is too large")
    return sorted(rng.sample(pool, n))


@dataclass(frozen=True)
class ToyLanguage:
    src_lang: str
    tgt_lang: str
    lexicon: dict[str, str]  # source word -> its dominant translation
    synonyms: dict[str, str] = field(default_factory=dict)  # source word -> secondary translation
    synonym_prob: float = 0.3

    @property
    def src_words(self) -> list[str]:
        return sorted(self.lexicon)

    @property
    def tgt_words(self) -> list[str]:
        return sorted(set(self.lexicon.values()) | set(self.synonyms.values()))

    @property
    def inverse(self) -> dict[str, str]:
        inv = {e: f for f, e in self.synonyms.items()}
        inv.update({e: f for f, e in self.lexicon.items()})
        return inv

    def translate(self, sentence: str, rng: Optional[random.Random] = None) -> str:
        """Dominant translation, or a human-like one sampling synonyms when ``rng`` is given."""
        out = []
        for w in sentence.split():
            if rng is not None and w in self.synonyms and rng.random() < self.synonym_prob:
                out.append(self.synonyms[w])
            else:
                out.append(self.lexicon.get(w, w))
        return " ".join(out)

    def back_translate(self, sentence: str) -> str:
        inv = self.inverse
        return " ".join(inv.get(w, w) for w in sentence.split())


def make_language(vocab_size: int = 50, seed: int = 0, src_lang: str = "xx", tgt_lang: str = "yy",
                  synonym_rate: float = 0.0) -> ToyLanguage:
    """Bijective lexicon; ``synonym_rate`` of the source words also get a secondary translation."""
    rng = random.Random(seed)
    n_syn = round(vocab_size * synonym_rate)
    src = _words(_SRC_SYLLABLES, vocab_size, rng)
    tgt = _words(_TGT_SYLLABLES, vocab_size + n_syn, rng)
    rng.shuffle(tgt)
    lexicon = dict(zip(src, tgt[:vocab_size]))
    synonyms = dict(zip(sorted(rng.sample(src, n_syn)), tgt[vocab_size:]))
    return ToyLanguage(src_lang, tgt_lang, lexicon, synonyms)


def zipf_weights(n: int, exponent: float = 1.0) -> list[float]:
    return [1.0 / (r + 1) ** exponent for r in range(n)]


def sample_sentences(
    words: list[str],
    n: int,
    rng: random.Random,
    min_len: int = 3,
    max_len: int = 10,
    weights: Optional[list[float]] = None,
    cover: bool = False,
) -> list[str]:
    """Random sentences; with ``cover`` the leading sentences walk the whole vocabulary once."""
    out = []
    if cover:
        todo = list(words)
        while todo and len(out) < n:
            k = min(max(min_len, min(len(todo), max_len)), max_len)
            sent = todo[:k]
            todo = todo[k:]
            while len(sent) < min_len:
                sent.append(rng.choice(words))
            out.append(" ".join(sent))
    while len(out) < n:
        length = rng.randint(min_len, max_len)
        out.append(" ".join(rng.choices(words, weights=weights, k=length)))
    return out


@dataclass(frozen=True)
class ToyFixture:
    language: ToyLanguage
    parallel: ParallelCorpus
    mono_src: MonoCorpus
    mono_tgt: MonoCorpus
    test: list[TestDoc]


def make_fixture(
    vocab_size: int = 50,
    n_train: int = 500,
    n_test: int = 100,
    n_mono_src: int = 500,
    n_mono_tgt: int = 500,
    seed: int = 0,
    src_lang: str = "xx",
    tgt_lang: str = "yy",
    other_lang: str = "zz",
    doc_size: int = 5,
    synonym_rate: float = 0.0,
) -> ToyFixture:
    """Parallel, monolingual and test data in a toy language pair.

    Source-original and target-original text draw words with differently ranked Zipf
    distributions. Test documents cycle through src, tgt and other origins. With
    ``synonym_rate`` > 0 human translations sample secondary translations, and
    target-original text uses both translations of such words.
    """
    lang = make_language(vocab_size, seed, src_lang, tgt_lang, synonym_rate)
    rng = random.Random(seed + 1)
    src_words = lang.src_words
    tgt_ranked = [lang.lexicon[w] for w in reversed(src_words)]
    tgt_ranked += [lang.synonyms[w] for w in reversed(src_words) if w in lang.synonyms]
    w = zipf_weights(vocab_size, 0.8)
    w_tgt = zipf_weights(len(tgt_ranked), 0.8)

    train_src = sample_sentences(src_words, n_train, rng, weights=w, cover=True)
    parallel = ParallelCorpus(src_lang, tgt_lang, tuple(
        (SideRecord(s, src_lang, src_lang, NATURAL), SideRecord(lang.translate(s, rng), tgt_lang, src_lang, HUMAN))
        for s in train_src
    ))
    mono_src = MonoCorpus(src_lang, tuple(
        SideRecord(s, src_lang, src_lang, NATURAL) for s in sample_sentences(src_words, n_mono_src, rng, weights=w)
    ))
    mono_tgt = MonoCorpus(tgt_lang, tuple(
        SideRecord(s, tgt_lang, tgt_lang, NATURAL) for s in sample_sentences(tgt_ranked, n_mono_tgt, rng, weights=w_tgt)
    ))

    docs = []
    origins = [src_lang, tgt_lang, other_lang]
    made = 0
    for d in itertools.count():
        if made >= n_test:
            break
        size = min(doc_size, n_test - made)
        origin = origins[d % len(origins)]
        if origin == tgt_lang:
            refs = sample_sentences(tgt_ranked, size, rng, weights=w_tgt)
            segs = [(lang.back_translate(r), r) for r in refs]
        else:
            srcs = sample_sentences(src_words, size, rng, weights=w)
            segs = [(s, lang.translate(s, rng)) for s in srcs]
        docs.append(TestDoc(f"doc{d:03d}", origin, tuple(segs)))
        made += size
    return ToyFixture(lang, parallel, mono_src, mono_tgt, docs)


def write_fixture(fx: ToyFixture, out_dir) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    s, t = fx.language.src_lang, fx.language.tgt_lang
    paths = {
        "train_src": out / f"train.{s}",
        "train_tgt": out / f"train.{t}",
        "mono_src": out / f"mono.{s}",
        "mono_tgt": out / f"mono.{t}",
        "test_src_sgm": out / f"test.{s}.sgm",
        "test_ref_sgm": out / f"test.{t}.sgm",
        "test_src_txt": out / f"test.{s}",
        "test_ref_txt": out / f"test.{t}",
        "test_tsv": out / "test.origlang.tsv",
        "lexicon": out / "lexicon.tsv",
    }
    write_parallel(fx.parallel, paths["train_src"], paths["train_tgt"])
    write_mono(fx.mono_src, paths["mono_src"])
    write_mono(fx.mono_tgt, paths["mono_tgt"])
    write_sgml_testset(fx.test, paths["test_src_sgm"], paths["test_ref_sgm"], "toy", s, t)
    write_tsv_testset(fx.test, paths["test_src_txt"], paths["test_ref_txt"], paths["test_tsv"])
    paths["lexicon"].write_text("".join(f"{f}\t{e}\n" for f, e in sorted(fx.language.lexicon.items())), encoding="utf-8")
    return paths
