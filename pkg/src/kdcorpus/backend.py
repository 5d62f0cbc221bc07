"""Translation backends behind one batch contract.

Three transports are supported:

* ``CommandTransport``: spawn ``argv`` per batch, write N lines to stdin, read N lines back.
* ``HttpTransport``: POST N newline-separated sentences, expect N lines and status 200.
* ``BuiltinTransport``: an in-process callable ``list[str] -> list[str]`` (identity, toy model).

Every output record is MachineGenerated with depth = input depth + 1, producer = backend id,
and the input's ``origin_lang``.
"""

from __future__ import annotations

import logging
import shlex
import subprocess
import time
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

from .corpus import SideRecord
from .errors import BackendError

logger = logging.getLogger(__name__)

CANARY = "this is a test ."


@dataclass(frozen=True)
class CommandTransport:
    argv: tuple[str, ...]
    timeout: float = 600.0

    def describe(self) -> dict:
        return {"type": "command", "argv": list(self.argv)}

    def __call__(self, lines: list[str]) -> list[str]:
        payload = "".join(line + "\n" for line in lines).encode("utf-8")
        try:
            proc = subprocess.run(list(self.argv), input=payload, capture_output=True, timeout=self.timeout)
        except FileNotFoundError as e:
            raise BackendError(f"cannot execute {self.argv[0]!r}: {e}") from e
        except subprocess.TimeoutExpired as e:
            raise BackendError(f"command timed out after {self.timeout}s") from e
        if proc.returncode != 0:
            stderr = proc.stderr.decode("utf-8", "replace").strip()
            raise BackendError(f"command exited with status {proc.returncode}: {stderr}")
        return _split_output(proc.stdout)


@dataclass(frozen=True)
class HttpTransport:
    url: str
    timeout: float = 600.0

    def describe(self) -> dict:
        return {"type": "http", "url": self.url}

    def __call__(self, lines: list[str]) -> list[str]:
        body = "".join(line + "\n" for line in lines).encode("utf-8")
        req = urllib.request.Request(
            self.url, data=body, method="POST", headers={"Content-Type": "text/plain; charset=utf-8"}
        )
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                status, data = resp.status, resp.read()
        except urllib.error.HTTPError as e:
            raise BackendError(f"{self.url} returned HTTP {e.code}") from e
        except (urllib.error.URLError, OSError) as e:
            raise BackendError(f"{self.url} unreachable: {e}") from e
        if status != 200:
            raise BackendError(f"{self.url} returned HTTP {status}")
        return _split_output(data)


@dataclass(frozen=True)
class BuiltinTransport:
    fn: Callable[[list[str]], list[str]] = field(compare=False)
    name: str = "builtin"

    def describe(self) -> dict:
        return {"type": "builtin", "model": self.name}

    def __call__(self, lines: list[str]) -> list[str]:
        return list(self.fn(lines))


def identity_lines(lines: list[str]) -> list[str]:
    return list(lines)


IDENTITY = BuiltinTransport(identity_lines, "identity")

Transport = Union[CommandTransport, HttpTransport, BuiltinTransport]


def _split_output(data: bytes) -> list[str]:
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as e:
        raise BackendError(f"backend produced invalid UTF-8 at byte {e.start}") from e
    if not text:
        return []
    if text.endswith("\n"):
        text = text[:-1]
    return [line.rstrip("\r") for line in text.split("\n")]


@dataclass(frozen=True)
class BackendSpec:
    id: str
    src_lang: str
    tgt_lang: str
    transport: Transport
    batch_size: int = 64
    workers: int = 1
    retries: int = 1

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    @property
    def direction(self) -> tuple[str, str]:
        return (self.src_lang, self.tgt_lang)

    def describe(self) -> dict:
        return {
            "id": self.id,
            "direction": [self.src_lang, self.tgt_lang],
            "transport": self.transport.describe(),
            "batch_size": self.batch_size,
        }


@dataclass(frozen=True)
class TranslationResult:
    outputs: tuple[SideRecord, ...]

    def __len__(self) -> int:
        return len(self.outputs)

    def texts(self) -> list[str]:
        return [r.text for r in self.outputs]


def _run_batch(b: BackendSpec, offset: int, lines: list[str]) -> list[str]:
    last: Optional[BackendError] = None
    for attempt in range(b.retries + 1):
        try:
            out = b.transport(lines)
            if len(out) != len(lines):
                raise BackendError(f"count mismatch: sent {len(lines)} lines, got {len(out)}")
            return out
        except BackendError as e:
            last = e
            logger.warning("backend %s batch at offset %d failed (attempt %d): %s", b.id, offset, attempt + 1, e)
    raise BackendError(f"backend {b.id}: batch at offset {offset} failed: {last}")


def translate_batch(b: BackendSpec, inputs: Sequence[SideRecord]) -> TranslationResult:
    """Translate ``inputs`` in batches of ``b.batch_size``; output order follows input order."""
    for i, r in enumerate(inputs):
        if r.lang != b.src_lang:
            raise BackendError(f"backend {b.id} translates {b.src_lang}->{b.tgt_lang}, input {i} is {r.lang}")
    texts = [r.text for r in inputs]
    offsets = list(range(0, len(texts), b.batch_size))
    batches = [texts[o:o + b.batch_size] for o in offsets]
    if b.workers > 1 and len(batches) > 1:
        with ThreadPoolExecutor(max_workers=b.workers) as pool:
            results = list(pool.map(lambda ob: _run_batch(b, *ob), zip(offsets, batches)))
    else:
        results = [_run_batch(b, o, batch) for o, batch in zip(offsets, batches)]
    out_texts = [line for res in results for line in res]
    outputs = []
    for r, text in zip(inputs, out_texts):
        try:
            outputs.append(r.translated(text, b.tgt_lang, b.id))
        except ValueError as e:
            raise BackendError(f"backend {b.id}: {e}") from e
    return TranslationResult(tuple(outputs))


@dataclass(frozen=True)
class Health:
    ok: bool
    latency: float
    error: Optional[str] = None


def probe(b: BackendSpec) -> Health:
    canary = SideRecord(CANARY, b.src_lang, b.src_lang)
    start = time.perf_counter()
    try:
        out = b.transport([canary.text])
        if len(out) != 1:
            raise BackendError(f"count mismatch: sent 1 line, got {len(out)}")
    except BackendError as e:
        return Health(False, time.perf_counter() - start, str(e))
    return Health(True, time.perf_counter() - start)


def parse_backend(text: str, id: str, src_lang: str, tgt_lang: str, batch_size: int = 64, workers: int = 1) -> BackendSpec:
    """Build a backend from a command-line string.

    ``identity`` -> builtin identity; ``toy:PATH`` -> toy lexical model file;
    ``http(s)://...`` -> HTTP line protocol; anything else is a shell-style argv.
    """
    if text == "identity":
        transport: Transport = IDENTITY
    elif text.startswith("toy:"):
        from .toymt import load_table, table_transport

        transport = table_transport(load_table(text[4:], src_lang, tgt_lang), text[4:])
    elif text.startswith(("http://", "https://")):
        transport = HttpTransport(text)
    else:
        argv = tuple(shlex.split(text))
        if not argv:
            raise ValueError("empty backend command")
        transport = CommandTransport(argv)
    return BackendSpec(id, src_lang, tgt_lang, transport, batch_size, workers)
