"""Order-preserving n-gram features from network-event traces, with
binary family classifiers and cross-validated evaluation."""

__version__ = "0.1.0"

from .events import (AlphabetMap, NetworkEvent, SizeQuartiles, classify_event,
                     default_alphabet, load_alphabet)
from .ingest import Corpus, SampleTrace, read_corpus, read_trace, write_trace
from .documents import (BehavioralDocument, build_corpus_documents, build_document,
                        compute_quartiles)
from .ngrams import FeatureMatrix, GramMode, GramSpec, Vocabulary, featurize, fit_vocabulary, tokenize
from .classifiers import AlgorithmSpec, knn_train, svm_train, train, tree_train
from .evaluation import Confusion, MetricReport, cross_validate, make_folds, metrics, scenario_sweep
from .selection import rfs, select_top_fraction
from .synth import generate_corpus, matched_pair
