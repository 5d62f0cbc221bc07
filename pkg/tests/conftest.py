import pytest

from kdcorpus.backend import IDENTITY, BackendSpec
from kdcorpus.corpus import HUMAN, NATURAL, MonoCorpus, ParallelCorpus, SideRecord

SGML_SRC = """<srcset setid="fixture" srclang="tr">
<doc docid="d1" origlang="tr">
<seg id="1">bir iki uc dort</seg>
<seg id="2">bes alti yedi sekiz</seg>
</doc>
<doc docid="d2" origlang="tr">
<seg id="1">dokuz on bir iki</seg>
<seg id="2">on uc on dort</seg>
</doc>
<doc docid="d3" origlang="en">
<seg id="1">kirmizi ev mavi ev</seg>
<seg id="2">buyuk kedi kucuk kedi</seg>
</doc>
<doc docid="d4" origlang="cs">
<seg id="1">kedi &amp; kopek oyun</seg>
<seg id="2">ev araba yol deniz</seg>
</doc>
</srcset>
"""

SGML_REF = """<refset setid="fixture" srclang="tr" trglang="en">
<doc docid="d1" origlang="tr">
<seg id="1">one two three four</seg>
<seg id="2">five six seven eight</seg>
</doc>
<doc docid="d2" origlang="tr">
<seg id="1">nine ten eleven twelve</seg>
<seg id="2">thirteen fourteen fifteen sixteen</seg>
</doc>
<doc docid="d3" origlang="en">
<seg id="1">red house blue house</seg>
<seg id="2">big cat small cat</seg>
</doc>
<doc docid="d4" origlang="cs">
<seg id="1">cat &amp; dog play</seg>
<seg id="2">house car road sea</seg>
</doc>
</refset>
"""


@pytest.fixture
def sgml_fixture(tmp_path):
    src = tmp_path / "test.tr.sgm"
    ref = tmp_path / "test.en.sgm"
    src.write_text(SGML_SRC, encoding="utf-8")
    ref.write_text(SGML_REF, encoding="utf-8")
    return src, ref


def identity(id, src, tgt, batch_size=64, workers=1):
    return BackendSpec(id, src, tgt, IDENTITY, batch_size, workers)


def mono(lang, texts, origin=None, provenance=NATURAL):
    return MonoCorpus(lang, tuple(SideRecord(t, lang, origin or lang, provenance) for t in texts))


def parallel(src_lang, tgt_lang, pairs, origin=None):
    origin = origin or src_lang
    return ParallelCorpus(src_lang, tgt_lang, tuple(
        (SideRecord(s, src_lang, origin, NATURAL), SideRecord(t, tgt_lang, origin, HUMAN)) for s, t in pairs
    ))


# one line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
