"""Write a synthetic toy-language dataset (train/mono/test files) to a directory."""

import argparse

from kdcorpus.synthetic import make_fixture, write_fixture


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", required=True)
    ap.add_argument("--vocab", type=int, default=50)
    ap.add_argument("--train", type=int, default=500)
    ap.add_argument("--test", type=int, default=100)
    ap.add_argument("--mono-src", type=int, default=500)
    ap.add_argument("--mono-tgt", type=int, default=500)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--synonym-rate", type=float, default=0.0,
                    help="fraction of source words with a secondary human translation")
    args = ap.parse_args()
    fx = make_fixture(args.vocab, args.train, args.test, args.mono_src, args.mono_tgt, args.seed,
                      synonym_rate=args.synonym_rate)
    for name, path in write_fixture(fx, args.out).items():
        print(f"{name}\t{path}")


if __name__ == "__main__":
    main()
