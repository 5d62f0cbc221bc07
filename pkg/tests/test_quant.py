import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kdcorpus.quant import (
    HEADER,
    Mode,
    QuantConfig,
    fixed_point_value,
    log_value,
    pack,
    packed_size,
    pre_normalization_values,
    quantize,
    size_report,
    unpack,
)
from kdcorpus.synthetic import make_fixture
from kdcorpus.toymt import LexTable, dumps_table, train_ibm1

import oracles

CONFIGS = [QuantConfig(m, b) for m in ("fixed", "log") for b in range(2, 9)]


def random_table(n_rows=40, width=8, seed=0):
    rng = random.Random(seed)
    rows = {}
    for i in range(n_rows):
        vals = [rng.random() ** 2 for _ in range(rng.randint(1, width))]
        s = sum(vals)
        rows[f"f{i:03d}"] = {f"e{j}": v / s for j, v in enumerate(vals)}
    return LexTable("de", "en", rows)


def test_config_validation():
    for bits in (1, 9):
        with pytest.raises(ValueError):
            QuantConfig("fixed", bits)
    with pytest.raises(ValueError):
        QuantConfig("float", 4)
    assert str(QuantConfig("log", 4)) == "log4"


def test_log_examples():
    assert log_value(0.5, 4) == 0.5
    assert log_value(0.3, 4) == 0.25
    assert log_value(0.0, 4) == 0.0
    assert log_value(1e-9, 2) == 2.0 ** -3
    assert oracles.log_code(0.3, 4) == 0.25


def test_fixed_examples():
    assert fixed_point_value(0.5, 8) == 128 / 255
    assert fixed_point_value(1.0, 2) == 1.0
    assert fixed_point_value(0.1, 2) == 0.0


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 1), st.integers(2, 8))
def test_scalar_maps_match_oracles(p, bits):
    assert fixed_point_value(p, bits) == pytest.approx(oracles.fixed_code(p, bits), abs=1e-15)
    # exact log2 midpoints are irrational, so nearest-scan and round-half-up agree
    assert log_value(p, bits) == oracles.log_code(p, bits)


def test_codebook_size():
    for q in CONFIGS:
        assert len(q.codebook()) <= 2 ** q.bits
        assert len(set(q.codebook())) == len(q.codebook())


@pytest.mark.parametrize("q", CONFIGS, ids=str)
def test_idempotent_and_normalized(q):
    m = random_table(seed=q.bits)
    once = quantize(m, q).table
    once.check()
    assert quantize(once, q).table.t == once.t
    assert len(pre_normalization_values(m, q)) <= 2 ** q.bits
    assert pre_normalization_values(m, q) <= set(q.codebook())


def test_fixed_mae_non_increasing_in_bits():
    m = random_table(n_rows=120, width=10, seed=11)
    maes = [quantize(m, QuantConfig("fixed", b)).mae for b in range(2, 9)]
    assert all(a >= b for a, b in zip(maes, maes[1:]))


def test_quantize_drops_zero_codes_and_keeps_argmax():
    m = LexTable("de", "en", {"a": {"x": 0.9, "y": 0.09, "z": 0.01}})
    out = quantize(m, QuantConfig("fixed", 2)).table
    assert out.t == {"a": {"x": 1.0}}
    assert out.best("a") == "x"


def test_quantized_distinct_values_on_trained_table():
    fx = make_fixture(vocab_size=30, n_train=150, n_test=3, n_mono_src=1, n_mono_tgt=1, seed=5)
    m, _ = train_ibm1(fx.parallel, 5)
    plain = size_report(m)
    for q in CONFIGS:
        assert size_report(m, q).distinct_values <= plain.distinct_values


def test_size_report_empty():
    r = size_report(LexTable("de", "en", {}))
    assert (r.entries, r.rows, r.distinct_values, r.text_bytes) == (0, 0, 0, 0)
    assert r.packed_bytes == HEADER.size


@pytest.mark.parametrize("q", CONFIGS, ids=str)
def test_packed_size_rule(q):
    m = random_table(seed=3)
    qt = quantize(m, q).table
    data = pack(m, q)
    assert len(data) == oracles.packed_bytes(len(qt), len(qt.t), q.bits, len(q.codebook()))
    assert len(data) == packed_size(len(qt), len(qt.t), q)
    r = size_report(m, q)
    assert r.packed_bytes == len(data) and r.text_bytes == len(dumps_table(qt).encode())


def test_packed_4bit_is_about_half_a_byte_per_entry():
    m = random_table(n_rows=50, width=8, seed=9)
    q = QuantConfig("log", 4)
    n = len(quantize(m, q).table)
    overhead = 16 + 8 * 16 + 8 * 50
    assert len(pack(m, q)) == overhead + math.ceil(n / 2)


@pytest.mark.parametrize("q", [None] + CONFIGS, ids=str)
def test_pack_unpack_round_trip(q):
    m = random_table(seed=4)
    table = m if q is None else quantize(m, q).table
    keys = [(f, e) for f in sorted(table.t) for e in sorted(table.t[f])]
    back = unpack(pack(m, q), keys, "de", "en")
    assert back.t.keys() == table.t.keys()
    for f in table.t:
        assert back.t[f] == pytest.approx(table.t[f], abs=1e-15)


def test_unpack_rejects_garbage():
    with pytest.raises(ValueError):
        unpack(b"XXXX" + bytes(12), [], "de", "en")


def test_header_layout():
    m = LexTable("de", "en", {"a": {"x": 0.75, "y": 0.25}})
    data = pack(m, QuantConfig(Mode.LOG, 2))
    magic, mode, bits, cb, rows, n = HEADER.unpack_from(data)
    assert (magic, mode, bits, cb, rows, n) == (b"KDQ1", 2, 2, 4, 1, 2)
