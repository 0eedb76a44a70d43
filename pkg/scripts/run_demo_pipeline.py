#!/usr/bin/env python3
"""Walk the whole toolkit once, on the shipped fixtures.

Runs the CLI the way a user would: extract candidate graphs from a CoNLL-U
corpus, label them twice (rule baseline and a prediction file), then pull a
few reports out of the labeled stores. Everything lands under --workdir.
"""

import argparse
import json
import subprocess
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parents[1]
FIXTURES = REPO / "tests" / "fixtures"


def cli(*args, capture=False):
    cmd = [sys.executable, "-m", "stancegraph.cli", *map(str, args)]
    print("$ stancegraph " + " ".join(map(str, args)))
    result = subprocess.run(cmd, capture_output=capture, text=True, cwd=REPO)
    if result.returncode != 0:
        if capture:
            sys.stderr.write(result.stderr)
        sys.exit(result.returncode)
    return result.stdout if capture else None


def main() -> None:
    # keep our narration ordered with the children's inherited stdout
    sys.stdout.reconfigure(line_buffering=True)
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--workdir", type=Path, default=REPO / "demo_out")
    args = parser.parse_args()
    work = args.workdir
    work.mkdir(parents=True, exist_ok=True)

    corpus = FIXTURES / "hedging" / "corpus"
    graphs = work / "graphs.jsonl"
    baseline = work / "baseline.jsonl"
    filed = work / "file_predictor.jsonl"

    print("== candidate extraction ==")
    cli("extract", corpus, "--jobs", 4, "-o", graphs)
    print(f"   wrote {sum(1 for _ in open(graphs))} tuples -> {graphs}\n")

    print("== rule baseline labels ==")
    cli("predict", graphs, "--predictor", "baseline", "--corpus", corpus, "-o", baseline)

    print("\n== labels from a prediction file ==")
    cli(
        "predict", graphs,
        "--predictor", f"file:{FIXTURES / 'hedging' / 'predictions.jsonl'}",
        "-o", filed,
    )

    print("\n== hedging profile of the labeled store ==")
    report = json.loads(cli("analyze", "hedging", filed, capture=True))
    for doc, row in report["by_doc"].items():
        print(f"   {doc:8s} {row['percent']:>5s}%  ({row['uncertain']}/{row['non_ne']})")

    print("\n== baseline scored against the file predictor ==")
    cli(
        "evaluate", "--gold", filed, "--pred", baseline,
        "-B", 500, "--seed", 7, "-o", work / "eval.json",
    )
    scores = json.loads((work / "eval.json").read_text())
    print(f"   macro F1 (all): {scores['macro_f1_all']:.1f}")
    print(f"   macro F1 (non-NE): {scores['macro_f1_non_ne']:.1f}")

    print("\n== crowd aggregation on a toy annotation set ==")
    ann = work / "annotations.csv"
    ann.write_text(
        "#labels=CT+|CT-|Uu\n"
        "item_id,annotator_id,label\n"
        "i1,a1,CT+\ni1,a2,CT+\ni1,a3,CT-\n"
        "i2,a1,Uu\ni2,a2,Uu\ni2,a3,Uu\n"
        "i3,a1,CT-\ni3,a2,CT-\ni3,a3,CT-\n",
        encoding="utf-8",
    )
    cli("aggregate", ann, "--seed", 5, "--table", "-o", work / "aggregate.json")

    print("\n== agreement on the same set ==")
    cli("agreement", ann, "--table", "-o", work / "agreement.json")

    print("\n== corpus composition ==")
    cli("corpus-stats", "--meta", FIXTURES / "corpus_meta.tsv")

    print(f"\nall outputs under {work}")


if __name__ == "__main__":
    main()
