"""Accuracy before and after keeping the top fraction of combined grams.

    python3 scripts/feature_selection.py --fractions 0.05 0.1 0.25
"""
import argparse

from netgram.classifiers import AlgorithmSpec
from netgram.evaluation import cross_validate
from netgram.ngrams import GramSpec, featurize, fit_vocabulary
from netgram.selection import FAST, select_top_fraction
from netgram.synth import generate_corpus, matched_pair


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--n", type=int, default=4, help="combined grams 1..n")
    ap.add_argument("--strength", type=float, default=0.6)
    ap.add_argument("--fractions", type=float, nargs="+", default=[0.01, 0.05, 0.1, 0.25])
    ap.add_argument("--step", type=float, default=0.1)
    args = ap.parse_args()

    a, b = matched_pair(12, args.seed, args.strength)
    docs = generate_corpus([a, b], args.seed + 4)
    spec = GramSpec.combined(args.n)
    matrix = featurize(docs, fit_vocabulary(docs, spec), spec, "A")
    svm = AlgorithmSpec("svm")
    full = cross_validate(matrix, svm, 10, args.seed).mean.accuracy
    print(f"all {matrix.n_features:5d} features  accuracy {full:5.1f}")
    for frac in args.fractions:
        res = select_top_fraction(matrix, svm, frac, seed=args.seed, strategy=FAST,
                                  step=args.step)
        kept = matrix.take_columns(res.kept_columns)
        acc = cross_validate(kept, svm, 10, args.seed).mean.accuracy
        top = ", ".join(kept.vocabulary.grams[:8])
        print(f"top {frac:4.2f} ({kept.n_features:4d})      accuracy {acc:5.1f}   e.g. {top}")


if __name__ == "__main__":
    main()
