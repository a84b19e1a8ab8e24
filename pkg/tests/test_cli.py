import csv
import json
import subprocess
import sys

import pytest

from netgram.cli import main
from netgram.documents import read_documents
from netgram.events import DnsRecord, HttpMethod, Kind, NetworkEvent
from netgram.ingest import SampleTrace, write_labels, write_trace


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def golden_corpus(root):
    d = lambda t: NetworkEvent(t, Kind.DNS_QUERY, dns_record=DnsRecord.MX)
    # sizes are required by the default map's quartile entries but never win
    h = lambda t: NetworkEvent(t, Kind.HTTP_REQUEST, http_method=HttpMethod.GET,
                               payload_bytes=300)
    r = lambda t: NetworkEvent(t, Kind.HTTP_RESPONSE, status=200, payload_bytes=5000 + t)
    trace = SampleTrace("golden", "fam", (d(0), h(1), r(2), h(3), r(4), h(5), r(6), d(7)))
    (root / "traces").mkdir()
    with open(root / "traces" / "golden.jsonl", "w") as fh:
        write_trace(trace, fh)
    write_labels([trace], root / "labels.csv")


@pytest.fixture(scope="module")
def small_docs(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    assert main(["synth", "--samples", "60", "--seed", "3", "--out", str(out)]) == 0
    return out / "documents.csv"


def test_build_docs_golden(workdir):
    golden_corpus(workdir)
    argv = ["build-docs", "--traces", "traces", "--labels", "labels.csv", "--out", "o"]
    assert main(argv) == 0
    docs = read_documents(workdir / "o" / "documents.csv")
    assert [(d.sample_id, d.label, d.text) for d in docs] == [("golden", "fam", "dhrhrhrd")]
    first = (workdir / "o" / "documents.csv").read_bytes()
    assert main(argv[:-1] + ["o2"]) == 0
    assert (workdir / "o2" / "documents.csv").read_bytes() == first
    manifest = json.loads((workdir / "o" / "manifest.json").read_text())
    assert manifest["command"] == "build-docs"
    assert set(manifest["outputs"]) == {"documents.csv", "quartiles.json"}


def test_size_map_without_sizes(workdir, capsys):
    d = NetworkEvent(0, Kind.DNS_QUERY, dns_record=DnsRecord.A)
    (workdir / "traces").mkdir()
    with open(workdir / "traces" / "x.jsonl", "w") as fh:
        write_trace(SampleTrace("x", "fam", (d,)), fh)
    write_labels([SampleTrace("x", "fam", (d,))], workdir / "labels.csv")
    assert main(["build-docs", "--traces", "traces", "--labels", "labels.csv"]) == 3
    assert "NoSizedEvents" in capsys.readouterr().err
    (workdir / "dns.txt").write_text("a DNS_QUERY:A\n")
    assert main(["build-docs", "--traces", "traces", "--labels", "labels.csv",
                 "--alphabet", "dns.txt", "--out", "o"]) == 0
    assert read_documents(workdir / "o" / "documents.csv")[0].text == "a"


def test_build_docs_empty_directory(workdir, capsys):
    (workdir / "traces").mkdir()
    (workdir / "labels.csv").write_text("sample_id,family\n")
    code = main(["build-docs", "--traces", "traces", "--labels", "labels.csv"])
    assert code == 3
    assert "EmptyCorpus" in capsys.readouterr().err


def test_malformed_trace_reports_file_and_line(workdir, capsys):
    golden_corpus(workdir)
    with open(workdir / "traces" / "golden.jsonl", "a") as fh:
        fh.write('{"timestamp": -4, "kind": "DNS_QUERY"}\n')
    assert main(["build-docs", "--traces", "traces", "--labels", "labels.csv"]) == 3
    err = capsys.readouterr().err
    assert "golden.jsonl" in err and "line 9" in err


def test_evaluate_fixed_self_test(workdir, small_docs):
    argv = ["evaluate", "--docs", str(small_docs), "--positive", "A", "--scenario", "fixed",
            "--n-max", "4", "--cv-k", "5", "--self-test", "--out", "ev"]
    assert main(argv) == 0
    rows = list(csv.DictReader(open(workdir / "ev" / "report.csv")))
    assert [r["n"] for r in rows] == ["1", "2", "3", "4"]
    assert all(r["scenario"] == "fixed" for r in rows)
    table = (workdir / "ev" / "report.txt").read_text().splitlines()
    assert table[0].split()[:3] == ["scenario", "n", "algorithm"]
    assert len(table) == 2 + 4


def test_evaluate_rfs(workdir, small_docs):
    argv = ["evaluate", "--docs", str(small_docs), "--positive", "A", "--scenario", "rfs",
            "--n-max", "2", "--cv-k", "5", "--strategy", "fast", "--out", "ev"]
    assert main(argv) == 0
    rows = list(csv.DictReader(open(workdir / "ev" / "report.csv")))
    assert len(rows) == 2
    assert all(r["scenario"].startswith("rfs") for r in rows)


def test_unknown_scenario_is_usage_error(small_docs):
    with pytest.raises(SystemExit) as exc:
        main(["evaluate", "--docs", str(small_docs), "--positive", "A", "--scenario", "nope"])
    assert exc.value.code == 2


def test_train_predict_round_trip(workdir, small_docs):
    assert main(["train", "--docs", str(small_docs), "--positive", "A", "--grams",
                 "combined:2", "--out", "m"]) == 0
    assert main(["predict", "--model", "m/model.json", "--vocab", "m/vocab.tsv",
                 "--docs", str(small_docs), "--out", "p"]) == 0
    rows = list(csv.DictReader(open(workdir / "p" / "predictions.csv")))
    truth = {d.sample_id: d.label for d in read_documents(small_docs)}
    assert len(rows) == len(truth)
    hits = sum((r["predicted_label"] == "+1") == (truth[r["sample_id"]] == "A") for r in rows)
    assert hits / len(rows) >= 0.99
    assert {r["predicted_label"] for r in rows} <= {"+1", "-1"}


def test_predict_with_wrong_vocab(workdir, small_docs, capsys):
    assert main(["train", "--docs", str(small_docs), "--positive", "A", "--out", "m"]) == 0
    assert main(["featurize", "--docs", str(small_docs), "--positive", "A", "--grams",
                 "fixed:2", "--out", "f"]) == 0
    code = main(["predict", "--model", "m/model.json", "--vocab", "f/vocab.tsv",
                 "--docs", str(small_docs)])
    assert code == 3
    assert "VocabularyMismatch" in capsys.readouterr().err


def test_predict_empty_documents(workdir, small_docs):
    assert main(["train", "--docs", str(small_docs), "--positive", "A", "--out", "m"]) == 0
    (workdir / "empty.csv").write_text('"sample_id","label","text"\n')
    assert main(["predict", "--model", "m/model.json", "--vocab", "m/vocab.tsv",
                 "--docs", "empty.csv", "--out", "p"]) == 0
    assert (workdir / "p" / "predictions.csv").read_text() == \
        "sample_id,predicted_label,margin_or_votes\n"


def test_select_writes_ranked_eliminations(workdir, small_docs):
    assert main(["select", "--docs", str(small_docs), "--positive", "A", "--grams", "fixed:2",
                 "--target-k", "10", "--strategy", "fast", "--cv-k", "5", "--out", "s"]) == 0
    lines = (workdir / "s" / "selection.csv").read_text().splitlines()
    assert lines[0] == "rank,column,gram,accuracy_after_removal"
    kept = [ln for ln in (workdir / "s" / "selected_vocab.tsv").read_text().splitlines()
            if not ln.startswith("#")]
    assert len(kept) == 10


def test_synth_traces_round_trip(workdir):
    assert main(["synth", "--samples", "5", "--traces", "--seed", "1", "--out", "s"]) == 0
    assert main(["build-docs", "--traces", "s/traces", "--labels", "s/labels.csv",
                 "--alphabet", "s/alphabet.txt", "--out", "b"]) == 0
    original = {d.sample_id: d for d in read_documents(workdir / "s" / "documents.csv")}
    rebuilt = {d.sample_id: d for d in read_documents(workdir / "b" / "documents.csv")}
    assert original == rebuilt


def test_replay_is_byte_identical(workdir, small_docs):
    argv = ["evaluate", "--docs", str(small_docs), "--positive", "A", "--scenario",
            "combined", "--n-max", "3", "--cv-k", "5", "--seed", "4", "--out", "ev"]
    assert main(argv) == 0
    assert main(["replay", "ev/manifest.json", "--out", "again"]) == 0
    for name in ("report.csv", "report.txt"):
        assert (workdir / "ev" / name).read_bytes() == (workdir / "again" / name).read_bytes()


def test_replay_refuses_changed_inputs(workdir):
    golden_corpus(workdir)
    assert main(["build-docs", "--traces", "traces", "--labels", "labels.csv", "--out", "o"]) == 0
    (workdir / "labels.csv").write_text("sample_id,family\ngolden,other\n")
    assert main(["replay", "o/manifest.json"]) == 3


def test_console_entry_point(small_docs):
    proc = subprocess.run([sys.executable, "-m", "netgram.cli", "--version"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.strip()
