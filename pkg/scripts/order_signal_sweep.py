"""Fixed and combined n-gram sweeps on matched-unigram synthetic pairs.

    python3 scripts/order_signal_sweep.py --seeds 1 2 3 --order 1
"""
import argparse
import time

from netgram.classifiers import AlgorithmSpec
from netgram.evaluation import is_non_decreasing, scenario_sweep
from netgram.synth import generate_corpus, matched_pair


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[7])
    ap.add_argument("--order", type=int, choices=[1, 2], default=1)
    ap.add_argument("--alphabet-size", type=int, default=12)
    ap.add_argument("--strength", type=float, default=0.6)
    ap.add_argument("--samples", type=int, default=500)
    ap.add_argument("--n-max", type=int, default=8)
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()

    svm = AlgorithmSpec("svm")
    for seed in args.seeds:
        t0 = time.perf_counter()
        a, b = matched_pair(args.alphabet_size, seed, args.strength, order=args.order,
                            samples=args.samples)
        docs = generate_corpus([a, b], seed + 4)
        for mode in ("fixed", "combined"):
            accs = [r.report.accuracy for r in
                    scenario_sweep(docs, "A", svm, args.n_max, mode, 10, seed, args.jobs)]
            trend = "ok" if is_non_decreasing(accs, 3.0) else "drop"
            print(f"seed {seed:3d} {mode:8s} {' '.join(f'{x:5.1f}' for x in accs)}  [{trend}]")
        print(f"         {time.perf_counter() - t0:.1f}s")


if __name__ == "__main__":
    main()
