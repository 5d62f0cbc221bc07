"""Command-line entry point: ``kdcorpus <subcommand>``.

Backends are given as strings: ``identity``, ``toy:MODEL.tsv``, ``http://host/path``, or a
shell-quoted command line that reads sentences on stdin and writes translations to stdout.

Exit codes: 0 success, 2 parse/config error, 3 data error, 4 backend error, 5 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .backend import parse_backend, probe, translate_batch
from .corpus import (
    HUMAN,
    NATURAL,
    MonoCorpus,
    clean,
    clean_mono,
    load_mono,
    load_parallel,
    write_mono,
    write_parallel,
)
from .errors import ConfigError, DataError, KDError
from .metrics import METRICS, MetricConfig, paired_bootstrap, score
from .origin import load_testset, origins, split_by_origin, ttr_by_origin, type_token_ratio
from .pipeline import back_translate, distill_parallel, forward_translate_mono, round_trip
from .quant import QuantConfig, quantize, size_report
from .toymt import load_table, prune, save_table, train_ibm1

logger = logging.getLogger("kdcorpus")

_PROV = {"natural": NATURAL, "human": HUMAN}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(ConfigError.exit_code)


def _read_lines(path) -> list[str]:
    try:
        return Path(path).read_text(encoding="utf-8").splitlines()
    except (OSError, UnicodeDecodeError) as e:
        raise DataError(f"cannot read {path}: {e}") from e


def _out_pair(prefix: str, src_lang: str, tgt_lang: str) -> tuple[str, str]:
    return f"{prefix}.{src_lang}", f"{prefix}.{tgt_lang}"


def _mono(args, path, lang) -> MonoCorpus:
    return load_mono(path, lang, getattr(args, "origin", None) or lang)


def _parallel(args):
    return load_parallel(args.src, args.tgt, args.src_lang, args.tgt_lang, args.origin or args.src_lang,
                         _PROV[args.src_provenance], _PROV[args.tgt_provenance])


def _emit_parallel(corpus, prefix):
    s, t = _out_pair(prefix, corpus.src_lang, corpus.tgt_lang)
    write_parallel(corpus, s, t)
    print(f"wrote {len(corpus)} pairs to {s} / {t}")


# --- subcommands ---------------------------------------------------------------


def cmd_clean(args):
    if args.input:
        c = _mono(args, args.input, args.lang or args.src_lang)
        out = clean_mono(c, args.min_words, args.max_words)
        write_mono(out, args.out)
        print(f"kept {len(out)} of {len(c)} sentences -> {args.out}")
    else:
        if not (args.src and args.tgt):
            raise ConfigError("clean needs --in FILE or both --src and --tgt")
        c = _parallel(args)
        out = clean(c, args.min_words, args.max_words)
        print(f"kept {len(out)} of {len(c)} pairs")
        _emit_parallel(out, args.out)


def cmd_translate(args):
    b = parse_backend(args.backend, args.backend_id, args.src_lang, args.tgt_lang, args.batch_size, args.workers)
    c = _mono(args, args.input, args.src_lang)
    res = translate_batch(b, c.records)
    write_mono(MonoCorpus(args.tgt_lang, res.outputs), args.out)
    print(f"translated {len(res)} sentences -> {args.out}")


def cmd_bt(args):
    rev = parse_backend(args.rev, "rev", args.tgt_lang, args.src_lang, args.batch_size, args.workers)
    _emit_parallel(back_translate(rev, _mono(args, args.input, args.tgt_lang)), args.out)


def cmd_ft(args):
    fwd = parse_backend(args.fwd, "fwd", args.src_lang, args.tgt_lang, args.batch_size, args.workers)
    if args.input:
        out = forward_translate_mono(fwd, _mono(args, args.input, args.src_lang))
    elif args.src and args.tgt:
        out = distill_parallel(fwd, _parallel(args))
    else:
        raise ConfigError("ft needs --in MONO or --src/--tgt parallel files")
    _emit_parallel(out, args.out)


def cmd_ftbt(args):
    rev = parse_backend(args.rev, "rev", args.tgt_lang, args.src_lang, args.batch_size, args.workers)
    fwd = parse_backend(args.fwd, "fwd", args.src_lang, args.tgt_lang, args.batch_size, args.workers)
    _emit_parallel(round_trip(rev, fwd, _mono(args, args.input, args.tgt_lang)), args.out)


def cmd_compose(args):
    from .experiment import Runner, load_config
    from .origin import dumps_jsonl

    cfg = load_config(args.config)
    students = {s.name: s for s in cfg.students}
    if args.student not in students:
        raise ConfigError(f"no student recipe named {args.student!r}")
    runner = Runner(cfg, args.out)
    runner._stage("load", runner._load)
    runner._stage("backends", runner._backends)
    corpus = runner._stage("compose", runner._compose, f"student:{args.student}", students[args.student].recipe,
                           cfg.teacher, cfg.reverse)
    out = Path(args.out)
    write_parallel(corpus, out / f"train.{cfg.src_lang}", out / f"train.{cfg.tgt_lang}")
    (out / "manifest.jsonl").write_text(dumps_jsonl(runner.manifest), encoding="utf-8")
    print(f"composed {len(corpus)} pairs -> {out}")


def cmd_train_toy(args):
    c = load_parallel(args.src, args.tgt, args.src_lang, args.tgt_lang)
    table, stats = train_ibm1(c, args.iterations)
    save_table(table, args.out)
    for i, ll in enumerate(stats.log_likelihood, 1):
        print(f"iteration {i}\tlog-likelihood {ll!r}")
    print(f"wrote {len(table)} entries -> {args.out}")


def cmd_prune(args):
    table = load_table(args.model, args.src_lang, args.tgt_lang)
    out = prune(table, args.top_k, args.min_prob)
    save_table(out, args.out)
    print(f"pruned {len(table)} -> {len(out)} entries -> {args.out}")


def cmd_quantize(args):
    table = load_table(args.model, args.src_lang, args.tgt_lang)
    q = QuantConfig(args.mode, args.bits)
    res = quantize(table, q)
    save_table(res.table, args.out)
    before, after = size_report(table), size_report(table, q)
    print(json.dumps({"config": str(q), "distinct_values": res.distinct_values, "mae": res.mae,
                      "before": before.to_json(), "after": after.to_json()}, sort_keys=True))


def _metric_config(args) -> MetricConfig:
    return MetricConfig(tuple(args.metric or METRICS), args.tokenizer, args.smoothing, args.char_n, args.beta,
                        args.max_shift_dist)


def cmd_score(args):
    hyps, refs = _read_lines(args.hyp), _read_lines(args.ref)
    cfg = _metric_config(args)
    for m in cfg.metrics:
        sc = score(m, hyps, refs, cfg)
        if args.json:
            print(json.dumps({**sc.to_json(), "config": cfg.to_json()}, sort_keys=True))
        elif len(cfg.metrics) == 1:
            print(f"{sc.score:.1f}" if m != "ter" else f"{sc.score:.4f}")
        else:
            print(f"{m}\t{sc.score:.4f}")


def cmd_split_origlang(args):
    docs = load_testset(args.testset, args.ref, args.tsv, "other" if args.missing_as_other else None)
    b = split_by_origin(docs, args.src_lang, args.tgt_lang)
    for name, idx in b.items():
        print(f"{name}\t{len(idx)}")
    print("buckets " + "/".join(str(n) for n in b.sizes()))


def cmd_ttr(args):
    sents = _read_lines(args.input)
    if args.testset:
        docs = load_testset(args.testset, args.ref, args.tsv)
        reports = ttr_by_origin(sents, origins(docs), not args.case_sensitive).values()
    else:
        reports = [type_token_ratio(sents, not args.case_sensitive)]
    for r in reports:
        print(json.dumps(r.to_json(), sort_keys=True))


def cmd_bootstrap(args):
    a, b, refs = _read_lines(args.hyp_a), _read_lines(args.hyp_b), _read_lines(args.ref)
    cfg = MetricConfig((args.metric,), args.tokenizer, args.smoothing)
    res = paired_bootstrap(a, b, refs, args.metric, args.n_resamples, args.seed, cfg)
    print(json.dumps(res.to_json(), sort_keys=True))


def cmd_run(args):
    from .experiment import run

    report = run(args.config, args.out)
    print(report.to_text())


def cmd_probe(args):
    b = parse_backend(args.backend, args.backend_id, args.src_lang, args.tgt_lang)
    h = probe(b)
    print(json.dumps({"ok": h.ok, "latency": h.latency, "error": h.error}))
    if not h.ok:
        return 4
    return 0


# --- parser --------------------------------------------------------------------


def _langs(p, defaults=True):
    p.add_argument("--src-lang", default="src" if defaults else None)
    p.add_argument("--tgt-lang", default="tgt" if defaults else None)


def _parallel_args(p):
    p.add_argument("--src", help="source side sentence file")
    p.add_argument("--tgt", help="target side sentence file")
    p.add_argument("--origin", help="origin language of the input text (default: its own language)")
    p.add_argument("--src-provenance", choices=sorted(_PROV), default="natural")
    p.add_argument("--tgt-provenance", choices=sorted(_PROV), default="human")


def _backend_args(p):
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--workers", type=int, default=1)


def _metric_args(p, multi=True):
    if multi:
        p.add_argument("--metric", action="append", choices=METRICS)
    p.add_argument("--tokenizer", choices=["13a", "none"], default="13a")
    p.add_argument("--smoothing", choices=["none", "add_k_eps"], default="none")
    p.add_argument("--char-n", type=int, default=6)
    p.add_argument("--beta", type=float, default=2.0)
    p.add_argument("--max-shift-dist", type=int, default=10)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="kdcorpus", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--version", action="version", version=f"kdcorpus {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("clean", help="drop sentences outside the word-count bounds")
    _parallel_args(p)
    _langs(p)
    p.add_argument("--in", dest="input", help="monolingual input (instead of --src/--tgt)")
    p.add_argument("--lang")
    p.add_argument("--min-words", type=int, default=3)
    p.add_argument("--max-words", type=int, default=150)
    p.add_argument("--out", required=True, help="output file (mono) or prefix (parallel)")
    p.set_defaults(func=cmd_clean)

    p = sub.add_parser("translate", help="translate a sentence file with a backend")
    p.add_argument("--backend", required=True)
    p.add_argument("--backend-id", default="backend")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--origin")
    p.add_argument("--out", required=True)
    _langs(p)
    _backend_args(p)
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("bt", help="back-translate target-language monolingual text")
    p.add_argument("--rev", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--origin")
    p.add_argument("--out", required=True, help="output prefix")
    _langs(p)
    _backend_args(p)
    p.set_defaults(func=cmd_bt)

    p = sub.add_parser("ft", help="forward-translate source mono (--in) or distill a parallel corpus")
    p.add_argument("--fwd", required=True)
    p.add_argument("--in", dest="input")
    _parallel_args(p)
    p.add_argument("--out", required=True, help="output prefix")
    _langs(p)
    _backend_args(p)
    p.set_defaults(func=cmd_ft)

    p = sub.add_parser("ftbt", help="round-trip target mono: back-translate, then forward-translate")
    p.add_argument("--rev", required=True)
    p.add_argument("--fwd", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--origin")
    p.add_argument("--out", required=True, help="output prefix")
    _langs(p)
    _backend_args(p)
    p.set_defaults(func=cmd_ftbt)

    p = sub.add_parser("compose", help="build one student recipe from an experiment config")
    p.add_argument("--config", required=True)
    p.add_argument("--student", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_compose)

    p = sub.add_parser("train-toy", help="train the toy lexical model with EM")
    p.add_argument("--src", required=True)
    p.add_argument("--tgt", required=True)
    _langs(p)
    p.add_argument("--iterations", type=int, default=10)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_toy)

    p = sub.add_parser("prune", help="keep the top-k entries per source word")
    p.add_argument("--model", required=True)
    p.add_argument("--top-k", type=int, required=True)
    p.add_argument("--min-prob", type=float, default=0.0)
    p.add_argument("--out", required=True)
    _langs(p)
    p.set_defaults(func=cmd_prune)

    p = sub.add_parser("quantize", help="quantize a toy model and report its size")
    p.add_argument("--model", required=True)
    p.add_argument("--mode", choices=["fixed", "log"], required=True)
    p.add_argument("--bits", type=int, required=True)
    p.add_argument("--out", required=True)
    _langs(p)
    p.set_defaults(func=cmd_quantize)

    p = sub.add_parser("score", help="corpus BLEU / chrF / TER")
    p.add_argument("--hyp", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--json", action="store_true")
    _metric_args(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("split-origlang", help="count test segments per original-language bucket")
    p.add_argument("testset", help="SGML source file, WMT XML file, or plain source text with --tsv")
    p.add_argument("--ref")
    p.add_argument("--tsv")
    p.add_argument("--missing-as-other", action="store_true")
    _langs(p, defaults=False)
    p.set_defaults(func=cmd_split_origlang)

    p = sub.add_parser("ttr", help="type-token ratio, optionally grouped by test-set origin")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--testset")
    p.add_argument("--ref")
    p.add_argument("--tsv")
    p.add_argument("--case-sensitive", action="store_true")
    p.set_defaults(func=cmd_ttr)

    p = sub.add_parser("bootstrap", help="paired bootstrap significance test (A better than B)")
    p.add_argument("--hyp-a", required=True)
    p.add_argument("--hyp-b", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--metric", choices=METRICS, default="bleu")
    p.add_argument("--n-resamples", type=int, default=1000)
    p.add_argument("--seed", type=int, required=True)
    _metric_args(p, multi=False)
    p.set_defaults(func=cmd_bootstrap)

    p = sub.add_parser("run", help="run a full experiment from a config file")
    p.add_argument("config")
    p.add_argument("--out", help="output directory (default: the config's output key, or ./out)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("probe", help="send a canary sentence to a backend")
    p.add_argument("--backend", required=True)
    p.add_argument("--backend-id", default="backend")
    _langs(p)
    p.set_defaults(func=cmd_probe)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "split-origlang" and not (args.src_lang and args.tgt_lang):
        print("kdcorpus split-origlang: error: --src-lang and --tgt-lang are required", file=sys.stderr)
        return ConfigError.exit_code
    try:
        return args.func(args) or 0
    except KDError as e:
        print(f"kdcorpus {args.command}: {e}", file=sys.stderr)
        return e.exit_code
    except Exception:
        logger.exception("internal error")
        return KDError.exit_code
    except (ValueError, FileNotFoundError) as e:
        print(f"kdcorpus {args.command}: {e}", file=sys.stderr)
        return 3 if isinstance(e, FileNotFoundError) else 2
    except Exception as e:  # noqa: BLE001
        logger.exception("internal error")
        print(f"kdcorpus {args.command}: internal error: {e}", file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
