"""Corpus handling: column files, scheme conversion, spans, statistics."""
import tempfile
from pathlib import Path

from contrastner import corpus


def main():
    sentences = [
        corpus.TaggedSentence(["John", "Smith", "visited", "Paris", "."],
                              ["B-PER", "I-PER", "O", "B-LOC", "O"]),
        corpus.TaggedSentence(["EU", "rejected", "German", "calls", "."],
                              ["B-ORG", "O", "B-MISC", "O", "O"]),
    ]

    with tempfile.TemporaryDirectory() as td:
        path = Path(td) / "tiny.conll"
        corpus.write_conll(sentences, path)
        print("--- on disk ---")
        print(path.read_text(), end="")
        again = corpus.parse_conll(path)
        print("round trip intact:",
              [(s.tokens, s.tags) for s in again]
              == [(s.tokens, s.tags) for s in sentences])

    # the older IOB scheme only uses B- between touching same-type entities
    iob = ["I-PER", "I-PER", "B-PER", "O", "I-LOC"]
    print("IOB  :", iob)
    print("BIO  :", corpus.iob_to_bio(iob))

    for sent in sentences:
        spans = sorted(corpus.bio_to_spans(sent.tags), key=lambda s: s.start)
        pretty = [f"{' '.join(sent.tokens[s.start:s.end + 1])}/{s.type_}"
                  for s in spans]
        print("spans:", pretty)

    stats = corpus.corpus_stats(sentences)
    print("stats:", stats)


if __name__ == "__main__":
    main()
