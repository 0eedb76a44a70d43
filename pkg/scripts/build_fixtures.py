#!/usr/bin/env python3
"""Regenerate the committed test fixtures.

Everything here is deterministic (fixed seeds, stdlib RNG), so rerunning the
script reproduces the shipped files byte for byte. Three fixture families:

  hedging/    transcript-shaped CoNLL-U docs plus a prediction file that
              plants known hedging rates (5.41% / 8.32% / 12.2%)
  analytics/  a small labeled multi-book tuple store with NER spans and
              book metadata, for the analytics equivalence checks
  corpus_meta.tsv  book metadata shaped like the full corpus breakdown
              (370 books: 133 L / 226 R / 11 C)

The prediction file is written directly from the sentence templates, not by
running the extractor, so extractor bugs cannot leak into the planted labels.
"""

import argparse
import json
import random
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from stancegraph.core import (  # noqa: E402
    EventRef,
    SourceRef,
    StanceDistribution,
    StanceTuple,
    Token,
    build_graph,
)
from stancegraph.ingest import write_tuples  # noqa: E402

# ---------------------------------------------------------------------------
# hedging transcripts
# ---------------------------------------------------------------------------

# (sentences, uncertain author stances, NE author stances); the rest are CT+.
# 19/351 = 5.41%, 52/625 = 8.32%, 61/500 = 12.2% of non-NE stances.
TRANSCRIPTS = {
    "bush": (360, 19, 9),
    "carter": (640, 52, 15),
    "coltart": (510, 61, 10),
}

NAMES = ["Congress", "America", "Russia", "Washington", "Reagan", "Europe", "China", "Moscow"]
VERBS = [
    ("agreed", "agree"),
    ("arrived", "arrive"),
    ("responded", "respond"),
    ("listened", "listen"),
    ("voted", "vote"),
    ("marched", "march"),
]
ADVERBS = ["today", "yesterday", "quietly", "firmly", "early", "twice"]


def transcript_sentence(sid, name, verb_form, verb_lemma, adverb):
    return "\n".join(
        [
            f"# sent_id = {sid}",
            f"1\t{name}\t{name}\tPROPN\t_\t_\t2\tnsubj\t_\t_",
            f"2\t{verb_form}\t{verb_lemma}\tVERB\t_\t_\t0\troot\t_\t_",
            f"3\t{adverb}\t{adverb}\tADV\t_\t_\t2\tadvmod\t_\t_",
            "4\t.\t.\tPUNCT\t_\t_\t2\tpunct\t_\t_",
            "",
        ]
    )


def prediction_row(doc, sid, source, event_token, event_surface, label):
    return json.dumps(
        {
            "doc_id": doc,
            "sent_id": sid,
            "source": source,
            "event": {"token": event_token, "surface": event_surface},
            "label": label,
            "probs": None,
        },
        ensure_ascii=False,
    )


def build_hedging(root: Path) -> None:
    corpus_dir = root / "hedging" / "corpus"
    corpus_dir.mkdir(parents=True, exist_ok=True)
    rng = random.Random(74120)
    pred_lines = []

    for doc, (n_sentences, n_uncertain, n_ne) in TRANSCRIPTS.items():
        n_certain = n_sentences - n_uncertain - n_ne
        assert n_certain > 0
        # half PS+, the rest PR+, shuffled in among the certain stances
        uncertain = ["PS+" if i % 2 == 0 else "PR+" for i in range(n_uncertain)]
        labels = uncertain + ["CT+"] * n_certain + ["NE"] * n_ne
        rng.shuffle(labels)

        lines = [f"# newdoc id = {doc}"]
        for i, label in enumerate(labels):
            sid = f"s{i + 1:04d}"
            name = NAMES[rng.randrange(len(NAMES))]
            verb_form, verb_lemma = VERBS[rng.randrange(len(VERBS))]
            adverb = ADVERBS[rng.randrange(len(ADVERBS))]
            lines.append(transcript_sentence(sid, name, verb_form, verb_lemma, adverb))

            # the template yields exactly Author and the subject as sources
            # and the root verb as the only event
            author = {"kind": "author", "token": None, "surface": "Author"}
            mention = {"kind": "mention", "token": 0, "surface": name}
            pred_lines.append(prediction_row(doc, sid, author, 1, verb_form, label))
            pred_lines.append(prediction_row(doc, sid, mention, 1, verb_form, "NE"))

        (corpus_dir / f"{doc}.conllu").write_text("\n".join(lines) + "\n", encoding="utf-8")

    (root / "hedging" / "predictions.jsonl").write_text(
        "\n".join(pred_lines) + "\n", encoding="utf-8"
    )
    print(f"hedging: {sum(n for n, _, _ in TRANSCRIPTS.values())} sentences, "
          f"{len(pred_lines)} prediction rows")


# ---------------------------------------------------------------------------
# analytics corpus
# ---------------------------------------------------------------------------

LABELS = ["CT+", "CT-", "PR+", "PS+", "Uu", "NE"]
PEOPLE = [
    ("Barack Obama", "Person"),
    ("Hillary Clinton", "Person"),
    ("Ronald Reagan", "Person"),
    ("Congress", "Organization"),
    ("Pentagon", "Organization"),
    ("America", "GPE"),
    ("Newsweek", "Organization"),
    ("Medicare", "Law"),
]
FILLER = ["committee", "report", "voters", "economy", "senator", "debate", "critics", "media"]
EVENT_WORDS = ["failed", "passed", "collapsed", "won", "changed", "grew", "ended", "moved"]


def random_dist(rng, favored=None):
    """A random distribution; when ``favored`` is set that label wins argmax."""
    raw = [rng.uniform(0.02, 1.0) for _ in LABELS]
    if favored is not None:
        i = LABELS.index(favored)
        raw[i] = max(raw) + rng.uniform(0.1, 1.0)
    total = sum(raw)
    return StanceDistribution(tuple(v / total for v in raw))


def build_analytics(root: Path) -> None:
    out = root / "analytics"
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(90210)

    books = [f"b{i:02d}" for i in range(1, 11)]
    ideologies = ["L", "L", "L", "L", "R", "R", "R", "R", "C", "C"]

    graphs = []
    spans = []
    for book in books:
        n_sentences = rng.randint(8, 14)
        for si in range(1, n_sentences + 1):
            sid = f"s{si:03d}"
            n_tokens = rng.randint(6, 12)
            tokens = [Token(i, f"w{i}") for i in range(n_tokens)]

            positions = list(range(n_tokens))
            rng.shuffle(positions)
            n_mentions = rng.randint(0, 2)
            n_events = rng.randint(1, 3)
            mention_pos = sorted(positions[:n_mentions])
            event_pos = sorted(positions[n_mentions:n_mentions + n_events])

            sources = []
            for pos in mention_pos:
                if rng.random() < 0.6:
                    surface, etype = PEOPLE[rng.randrange(len(PEOPLE))]
                    # vary the mention casing; spans carry the canonical form
                    shown = surface.upper() if rng.random() < 0.3 else surface
                    sources.append(SourceRef.mention(pos, shown.split()[0]))
                    end = min(pos + len(surface.split()) - 1, n_tokens - 1)
                    spans.append(
                        {
                            "doc_id": book,
                            "sent_id": sid,
                            "start": pos,
                            "end": end,
                            "type": etype if rng.random() < 0.8 else "cardinal",
                            "surface": shown,
                        }
                    )
                else:
                    sources.append(
                        SourceRef.mention(pos, FILLER[rng.randrange(len(FILLER))])
                    )
            events = [
                EventRef(pos, EVENT_WORDS[rng.randrange(len(EVENT_WORDS))])
                for pos in event_pos
            ]

            graph = build_graph(book, sid, tokens, sources, events)
            tuples = []
            for t in graph.tuples:
                if t.source.kind.value == "author":
                    favored = rng.choices(LABELS, weights=[5, 2, 2, 2, 2, 1])[0]
                else:
                    favored = rng.choices(LABELS, weights=[2, 1, 1, 1, 1, 6])[0]
                dist = random_dist(rng, favored)
                tuples.append(StanceTuple(t.source, t.event, dist.argmax(), dist))
            graphs.append(
                build_graph(book, sid, tokens, sources, events, tuples=tuples)
            )

    write_tuples(out / "store.jsonl", graphs)
    with open(out / "ner.jsonl", "w", encoding="utf-8") as fh:
        for span in spans:
            fh.write(json.dumps(span, ensure_ascii=False) + "\n")

    rows = ["book_id\ttitle\tauthor\tyear\tideology"]
    for i, (book, ideo) in enumerate(zip(books, ideologies)):
        rows.append(f"{book}\tBook {i + 1}\tAuthor {i + 1}\t{1995 + i}\t{ideo}")
    (out / "meta.tsv").write_text("\n".join(rows) + "\n", encoding="utf-8")
    print(f"analytics: {len(graphs)} sentences, {len(spans)} spans, {len(books)} books")


# ---------------------------------------------------------------------------
# full-corpus metadata shape
# ---------------------------------------------------------------------------

def build_corpus_meta(root: Path) -> None:
    rng = random.Random(1889)
    ideologies = ["L"] * 133 + ["R"] * 226 + ["C"] * 11
    rng.shuffle(ideologies)
    rows = ["book_id\ttitle\tauthor\tyear\tideology"]
    for i, ideo in enumerate(ideologies, start=1):
        year = 1993 + (i * 7) % 18
        rows.append(f"mmm{i:03d}\tTitle {i}\tWriter {1 + (i * 13) % 97}\t{year}\t{ideo}")
    (root / "corpus_meta.tsv").write_text("\n".join(rows) + "\n", encoding="utf-8")
    print(f"corpus_meta.tsv: {len(ideologies)} rows")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "--root",
        type=Path,
        default=Path(__file__).resolve().parents[1] / "tests" / "fixtures",
        help="fixture directory (default: tests/fixtures)",
    )
    args = parser.parse_args()
    args.root.mkdir(parents=True, exist_ok=True)
    build_hedging(args.root)
    build_analytics(args.root)
    build_corpus_meta(args.root)


if __name__ == "__main__":
    main()
