import sys
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from kdcorpus.backend import (
    BackendSpec,
    BuiltinTransport,
    CommandTransport,
    HttpTransport,
    parse_backend,
    probe,
    translate_batch,
)
from kdcorpus.corpus import HUMAN, Kind, SideRecord
from kdcorpus.errors import BackendError

from conftest import identity


def recs(texts, lang="de", origin="de", prov=HUMAN):
    return [SideRecord(t, lang, origin, prov) for t in texts]


def test_identity_increments_depth():
    out = translate_batch(identity("id", "de", "en"), recs(["a b"]))
    (r,) = out.outputs
    assert r.text == "a b" and r.lang == "en" and r.origin_lang == "de"
    assert (r.provenance.kind, r.provenance.depth, r.provenance.producer) == (Kind.MACHINE, 1, "id")


def test_second_pass_reaches_depth_two():
    first = translate_batch(identity("r", "en", "de"), recs(["a"], "en", "en")).outputs
    second = translate_batch(identity("f", "de", "en"), first).outputs
    assert second[0].provenance.depth == 2 and second[0].provenance.kind is Kind.MACHINE
    assert second[0].origin_lang == "en"


def test_empty_input():
    assert len(translate_batch(identity("id", "de", "en"), [])) == 0


def test_wrong_input_language():
    with pytest.raises(BackendError):
        translate_batch(identity("id", "de", "en"), recs(["a"], "fr"))


def test_cat_command_is_identity():
    b = BackendSpec("cat", "de", "en", CommandTransport(("cat",)), batch_size=3)
    texts = [f"sentence {i} ü" for i in range(10)]
    assert translate_batch(b, recs(texts)).texts() == texts


def test_command_failure_captures_stderr():
    argv = (sys.executable, "-c", "import sys; sys.stderr.write('boom'); sys.exit(3)")
    b = BackendSpec("bad", "de", "en", CommandTransport(argv))
    with pytest.raises(BackendError, match="offset 0.*boom"):
        translate_batch(b, recs(["a"]))


def test_probe_builtin_and_bad_argv():
    h = probe(identity("id", "de", "en"))
    assert h.ok and h.latency > 0
    bad = parse_backend("/nonexistent/translator --flag", "x", "de", "en")
    h = probe(bad)
    assert not h.ok and "nonexistent" in h.error
    failing = BackendSpec("f", "de", "en", CommandTransport((sys.executable, "-c", "import sys; sys.stderr.write('bad flag'); sys.exit(2)")))
    h = probe(failing)
    assert not h.ok and "bad flag" in h.error


def test_invalid_utf8_output():
    argv = (sys.executable, "-c", "import sys; sys.stdin.read(); sys.stdout.buffer.write(b'\\xff\\n')")
    b = BackendSpec("u", "de", "en", CommandTransport(argv), retries=0)
    with pytest.raises(BackendError, match="UTF-8"):
        translate_batch(b, recs(["a"]))


class _Handler(BaseHTTPRequestHandler):
    def do_POST(self):
        body = self.rfile.read(int(self.headers["Content-Length"]))
        if self.server.mode == "double":
            body = body + body
        elif self.server.mode == "upper":
            body = body.upper()
        status = 500 if self.server.mode == "error" else 200
        self.send_response(status)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass


@pytest.fixture
def http_server():
    srv = HTTPServer(("127.0.0.1", 0), _Handler)
    srv.mode = "echo"
    t = threading.Thread(target=srv.serve_forever, daemon=True)
    t.start()
    yield srv
    srv.shutdown()
    srv.server_close()


def test_http_backend(http_server):
    url = f"http://127.0.0.1:{http_server.server_port}/translate"
    http_server.mode = "upper"
    b = parse_backend(url, "svc", "de", "en", batch_size=2)
    assert isinstance(b.transport, HttpTransport)
    assert translate_batch(b, recs(["a b", "c", "d"])).texts() == ["A B", "C", "D"]


def test_http_count_mismatch(http_server):
    http_server.mode = "double"
    b = parse_backend(f"http://127.0.0.1:{http_server.server_port}/", "svc", "de", "en")
    h = probe(b)
    assert not h.ok and "count mismatch" in h.error
    with pytest.raises(BackendError, match="count mismatch"):
        translate_batch(b, recs(["a"]))


def test_http_bad_status(http_server):
    http_server.mode = "error"
    b = parse_backend(f"http://127.0.0.1:{http_server.server_port}/", "svc", "de", "en")
    with pytest.raises(BackendError, match="500"):
        translate_batch(b, recs(["a"]))


def test_one_retry_then_success():
    calls = []

    def flaky(lines):
        calls.append(len(lines))
        if len(calls) == 1:
            raise BackendError("transient")
        return lines

    b = BackendSpec("flaky", "de", "en", BuiltinTransport(flaky))
    assert translate_batch(b, recs(["a"])).texts() == ["a"]
    assert len(calls) == 2


def test_retry_exhausted_names_offset():
    calls = []

    def broken_second_batch(lines):
        calls.append(lines)
        if lines[0] == "c":
            return []
        return lines

    b = BackendSpec("b", "de", "en", BuiltinTransport(broken_second_batch), batch_size=2)
    with pytest.raises(BackendError, match="offset 2"):
        translate_batch(b, recs(["a", "b", "c", "d"]))
    assert sum(1 for c in calls if c[0] == "c") == 2


def _reverse_words(lines):
    return [" ".join(reversed(x.split())) for x in lines]


@pytest.mark.parametrize("batch_size,workers", [(1, 1), (3, 1), (3, 4), (100, 2)])
def test_batching_does_not_change_results(batch_size, workers):
    texts = [f"w{i} v{i} u{i}" for i in range(23)]
    ref = BackendSpec("r", "de", "en", BuiltinTransport(_reverse_words, "rev"), batch_size=1000)
    b = BackendSpec("r", "de", "en", BuiltinTransport(_reverse_words, "rev"), batch_size=batch_size, workers=workers)
    whole = translate_batch(ref, recs(texts))
    assert translate_batch(b, recs(texts)) == whole
    a = translate_batch(b, recs(texts[:10]))
    c = translate_batch(b, recs(texts[10:]))
    assert a.outputs + c.outputs == whole.outputs


def test_parse_backend_kinds(tmp_path):
    assert parse_backend("identity", "i", "de", "en").transport.name == "identity"
    b = parse_backend("sed -e 's/a/b/'", "s", "de", "en")
    assert b.transport.argv == ("sed", "-e", "s/a/b/")
    assert translate_batch(b, recs(["a"])).texts() == ["b"]
    (tmp_path / "m.tsv").write_text("a\tx\t1.0\n", encoding="utf-8")
    toy = parse_backend(f"toy:{tmp_path / 'm.tsv'}", "t", "de", "en")
    assert translate_batch(toy, recs(["a q"])).texts() == ["x q"]
    with pytest.raises(ValueError):
        parse_backend("   ", "e", "de", "en")
    with pytest.raises(ValueError):
        BackendSpec("x", "de", "en", BuiltinTransport(_reverse_words), batch_size=0)
