"""Command line front end.

Exit codes: 0 success, 2 usage error, 3 data or contract error. Every run
writes ``manifest.json`` into its output directory; ``netgram replay`` reruns
a manifest after checking that its inputs are unchanged.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .classifiers import AlgorithmSpec, dump_model, load_model, train
from .documents import build_corpus_documents, read_documents, write_documents
from .errors import NetgramError
from .evaluation import (ReportRow, cross_validate, format_table, is_non_decreasing,
                         scenario_sweep, write_report_csv)
from .events import default_alphabet, load_alphabet
from .ingest import read_corpus, write_labels, write_trace
from .ngrams import GramMode, GramSpec, Vocabulary, featurize, fit_vocabulary, write_libsvm
from .selection import AUTO, EXACT, FAST, rfs, rfs_sweep, select_top_fraction, write_selection
from .synth import documents_to_traces, generate_corpus, matched_pair, symbol_alphabet

log = logging.getLogger("netgram")

EXIT_USAGE = 2
EXIT_DATA = 3
TREND_TOLERANCE = 3.0


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _input_files(path):
    p = Path(path)
    if p.is_dir():
        return sorted(str(f) for f in p.rglob("*") if f.is_file())
    return [str(p)] if p.exists() else []


class Run:
    """Output directory plus the manifest bookkeeping for one command."""

    def __init__(self, args, argv):
        self.args = args
        self.argv = argv
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.inputs = {}
        self.outputs = []

    def input(self, path):
        if path is not None:
            for f in _input_files(path):
                self.inputs[f] = _sha256(f)
        return path

    def path(self, name):
        self.outputs.append(name)
        return self.out / name

    def alphabet(self):
        if self.args.alphabet:
            return load_alphabet(Path(self.input(self.args.alphabet)).read_text("utf-8"))
        return default_alphabet()

    def finish(self):
        manifest = {
            "tool": "netgram", "version": __version__,
            "command": self.args.command, "argv": self.argv, "cwd": os.getcwd(),
            "seed": self.args.seed,
            "inputs": self.inputs,
            "outputs": {n: _sha256(self.out / n) for n in self.outputs},
        }
        with open(self.out / "manifest.json", "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _algo(args, name=None):
    return AlgorithmSpec(name or args.algorithm, C=args.C, epochs=args.epochs, k=args.k,
                         max_depth=args.max_depth, seed=args.seed)


def _grams(text):
    try:
        return GramSpec.parse(text)
    except (ValueError, TypeError) as exc:
        raise argparse.ArgumentTypeError(f"bad gram spec {text!r}: {exc}") from None


# ---------------------------------------------------------------- commands

def cmd_build_docs(run):
    a = run.args
    corpus = read_corpus(run.input(a.traces), run.input(a.labels), a.positive or "")
    amap = run.alphabet()
    docs, quartiles = build_corpus_documents(corpus, amap)
    write_documents(docs, run.path("documents.csv"))
    with open(run.path("quartiles.json"), "w", encoding="utf-8") as fh:
        q = None if quartiles is None else {"q1": quartiles.q1, "q2": quartiles.q2,
                                            "q3": quartiles.q3}
        json.dump({"quartiles": q, "alphabet_size": amap.alphabet_size}, fh, sort_keys=True)
        fh.write("\n")
    log.info("wrote %d documents", len(docs))


def _load_vocab(run, spec, docs):
    if run.args.vocab:
        vocab = Vocabulary.read(run.input(run.args.vocab))
        if vocab.spec != spec:
            log.info("using gram spec %s from the vocabulary file", vocab.spec)
        return vocab
    return fit_vocabulary(docs, spec)


def cmd_featurize(run):
    a = run.args
    docs = read_documents(run.input(a.docs))
    vocab = _load_vocab(run, a.grams, docs)
    matrix = featurize(docs, vocab, vocab.spec, a.positive, tf_normalize=a.tf_normalize)
    write_libsvm(matrix, run.path("features.libsvm"))
    vocab.write(run.path("vocab.tsv"))
    with open(run.path("samples.txt"), "w", encoding="utf-8") as fh:
        fh.writelines(sid + "\n" for sid in matrix.sample_ids)


def cmd_train(run):
    a = run.args
    docs = read_documents(run.input(a.docs))
    vocab = _load_vocab(run, a.grams, docs)
    matrix = featurize(docs, vocab, vocab.spec, a.positive, tf_normalize=a.tf_normalize)
    model = train(_algo(a), matrix.X, matrix.y)
    extra = {"grams": str(vocab.spec), "positive_family": a.positive,
             "tf_normalize": a.tf_normalize}
    run.path("model.json").write_text(dump_model(model, vocab, extra) + "\n", "utf-8")
    vocab.write(run.path("vocab.tsv"))


def cmd_predict(run):
    a = run.args
    vocab = Vocabulary.read(run.input(a.vocab))
    model, params = load_model(Path(run.input(a.model)).read_text("utf-8"), vocab)
    docs = read_documents(run.input(a.docs))
    matrix = featurize(docs, vocab, vocab.spec, params.get("positive_family"),
                       tf_normalize=params.get("tf_normalize", False))
    labels = model.predict(matrix.X) if docs else []
    scores = model.scores(matrix.X) if docs else []
    with open(run.path("predictions.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample_id", "predicted_label", "margin_or_votes"])
        for sid, lab, s in zip(matrix.sample_ids, labels, scores):
            w.writerow([sid, "+1" if lab > 0 else "-1", repr(float(s))])


def cmd_evaluate(run):
    a = run.args
    docs = read_documents(run.input(a.docs))
    algo = _algo(a)
    if a.scenario in ("fixed", "combined"):
        rows = scenario_sweep(docs, a.positive, algo, a.n_max, GramMode(a.scenario),
                              a.cv_k, a.seed, a.jobs)
    elif a.scenario == "rfs":
        rows = rfs_sweep(docs, a.positive, algo, a.n_max, a.fraction, a.cv_k, a.seed,
                         a.strategy, a.step, a.jobs)
    else:
        spec = a.grams
        matrix = featurize(docs, fit_vocabulary(docs, spec), spec, a.positive)
        rows = []
        for name in ("svm", "knn", "tree"):
            res = cross_validate(matrix, _algo(a, name), a.cv_k, a.seed, a.jobs)
            rows.append(ReportRow("algorithms", str(spec), _algo(a, name).describe(), res.mean,
                                  matrix.n_features))
    write_report_csv(rows, run.path("report.csv"))
    table = format_table(rows)
    run.path("report.txt").write_text(table, "utf-8")
    sys.stdout.write(table)
    if a.self_test and a.scenario == "fixed":
        accs = [r.report.accuracy for r in rows]
        if not is_non_decreasing(accs, TREND_TOLERANCE):
            raise NetgramError(f"fixed-n accuracies not non-decreasing within "
                               f"{TREND_TOLERANCE} points: {accs}")


def cmd_select(run):
    a = run.args
    docs = read_documents(run.input(a.docs))
    spec = a.grams
    matrix = featurize(docs, fit_vocabulary(docs, spec), spec, a.positive)
    kw = dict(cv_k=a.cv_k, seed=a.seed, strategy=a.strategy, step=a.step, jobs=a.jobs)
    if a.target_k is not None:
        result = rfs(matrix, _algo(a), a.target_k, **kw)
    else:
        result = select_top_fraction(matrix, _algo(a), a.fraction, **kw)
    write_selection(result, matrix, run.path("selection.csv"), run.path("selected_vocab.tsv"))
    kept = matrix.take_columns(result.kept_columns)
    res = cross_validate(kept, _algo(a), a.cv_k, a.seed, a.jobs)
    row = ReportRow(f"select-{result.strategy}", str(spec), a.algorithm, res.mean,
                    kept.n_features)
    write_report_csv([row], run.path("report.csv"))
    sys.stdout.write(format_table([row]))


def cmd_synth(run):
    a = run.args
    fam_a, fam_b = matched_pair(a.alphabet_size, a.seed, a.strength, order=a.order,
                                doc_length_mean=a.length, samples=a.samples,
                                names=(a.positive or "A", a.negative_name))
    docs = generate_corpus([fam_a, fam_b], a.seed)
    write_documents(docs, run.path("documents.csv"))
    if a.traces:
        amap = symbol_alphabet(fam_a.symbols, run.alphabet())
        run.path("alphabet.txt").write_text(amap.dumps(), "utf-8")
        traces = documents_to_traces(docs, amap)
        tdir = run.out / "traces"
        tdir.mkdir(exist_ok=True)
        for t in traces:
            name = f"traces/{t.sample_id}.jsonl"
            with open(run.path(name), "w", encoding="utf-8") as fh:
                write_trace(t, fh)
        write_labels(traces, run.path("labels.csv"))


def cmd_replay(args):
    manifest = json.loads(Path(args.manifest).read_text("utf-8"))
    changed = [p for p, h in manifest["inputs"].items()
               if not Path(p if os.path.isabs(p) else os.path.join(manifest["cwd"], p)).exists()
               or _sha256(p if os.path.isabs(p) else os.path.join(manifest["cwd"], p)) != h]
    if changed:
        raise NetgramError(f"inputs changed since the manifest was written: {changed}")
    argv = list(manifest["argv"])
    out = os.path.abspath(args.out) if args.out else None
    here = os.getcwd()
    os.chdir(manifest["cwd"])
    try:
        if out:
            argv += ["--out", out]
        return main(argv)
    finally:
        os.chdir(here)


COMMANDS = {"build-docs": cmd_build_docs, "featurize": cmd_featurize, "train": cmd_train,
            "predict": cmd_predict, "evaluate": cmd_evaluate, "select": cmd_select,
            "synth": cmd_synth}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="seed for every RNG (default 0)")
    common.add_argument("--alphabet", help="alphabet config file (default: built-in 26 events)")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--jobs", type=int, default=1, help="parallel CV folds / candidates")
    common.add_argument("-v", "--verbose", action="count", default=0)

    learn = argparse.ArgumentParser(add_help=False)
    learn.add_argument("--algorithm", choices=["svm", "knn", "tree"], default="svm")
    learn.add_argument("--C", type=float, default=0.01, help="SVM penalty (default 0.01)")
    learn.add_argument("--epochs", type=int, default=30, help="SVM SGD epochs")
    learn.add_argument("--k", type=int, default=5, help="neighbours for kNN (odd)")
    learn.add_argument("--max-depth", type=int, default=16, help="tree depth cap")
    learn.add_argument("--cv-k", type=int, default=10, help="cross-validation folds")

    docs = argparse.ArgumentParser(add_help=False)
    docs.add_argument("--docs", required=True, help="documents CSV (sample_id,label,text)")
    docs.add_argument("--positive", required=True, help="family treated as the +1 class")

    grams = argparse.ArgumentParser(add_help=False)
    grams.add_argument("--grams", type=_grams, default=GramSpec.fixed(3),
                       help="fixed:N | combined:N | skip:K (default fixed:3)")

    select = argparse.ArgumentParser(add_help=False)
    select.add_argument("--fraction", type=float, default=0.1, help="share of features kept")
    select.add_argument("--strategy", choices=[AUTO, EXACT, FAST], default=AUTO)
    select.add_argument("--step", type=_step, default=None,
                        help="fast strategy: columns dropped per round (int) or share (float)")

    p = argparse.ArgumentParser(prog="netgram", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("build-docs", parents=[common], help="traces -> behavioral documents")
    s.add_argument("--traces", required=True, help="directory of <sample_id>.jsonl files")
    s.add_argument("--labels", required=True, help="CSV sample_id,family")
    s.add_argument("--positive", help="family of interest (only logged)")

    for name, helptext in (("featurize", "documents -> libsvm features + vocabulary"),
                           ("train", "documents -> model.json")):
        s = sub.add_parser(name, parents=[common, docs, grams] +
                           ([learn] if name == "train" else []), help=helptext)
        s.add_argument("--vocab", help="fixed vocabulary file (unseen grams are dropped)")
        s.add_argument("--tf-normalize", action="store_true",
                       help="divide counts by the document's gram total")

    s = sub.add_parser("predict", parents=[common], help="score documents with a model")
    s.add_argument("--model", required=True)
    s.add_argument("--vocab", required=True)
    s.add_argument("--docs", required=True)

    s = sub.add_parser("evaluate", parents=[common, docs, grams, learn, select],
                       help="cross-validated scenario report")
    s.add_argument("--scenario", choices=["fixed", "combined", "rfs", "algorithms"],
                   required=True)
    s.add_argument("--n-max", type=int, default=8)
    s.add_argument("--self-test", action="store_true",
                   help="fail (exit 3) if the fixed-n sweep is not non-decreasing")

    s = sub.add_parser("select", parents=[common, docs, grams, learn, select],
                       help="recursive feature selection")
    s.add_argument("--target-k", type=int, help="features to keep (overrides --fraction)")

    s = sub.add_parser("synth", parents=[common], help="matched-unigram synthetic corpus")
    s.add_argument("--alphabet-size", type=int, default=12)
    s.add_argument("--strength", type=float, default=0.6)
    s.add_argument("--samples", type=int, default=500, help="documents per family")
    s.add_argument("--length", type=int, default=60, help="mean document length")
    s.add_argument("--order", type=int, choices=[1, 2], default=1)
    s.add_argument("--positive", default="A", help="name of the first family")
    s.add_argument("--negative-name", default="B", help="name of the second family")
    s.add_argument("--traces", action="store_true",
                   help="also write JSONL traces, labels.csv and alphabet.txt")

    s = sub.add_parser("replay", help="rerun a manifest.json")
    s.add_argument("manifest")
    s.add_argument("--out", help="write outputs here instead of the original directory")
    s.add_argument("-v", "--verbose", action="count", default=0)
    return p


def _step(text):
    return float(text) if "." in text else int(text)


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "replay":
            return cmd_replay(args)
        run = Run(args, argv)
        COMMANDS[args.command](run)
        run.finish()
    except (NetgramError, ValueError, OSError) as exc:
        print(f"netgram {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    return 0


if __name__ == "__main__":
    sys.exit(main())
