"""Knowledge-graph post-correction of predicted tags, stage by stage.

A tagger often drops or mistypes abbreviated mentions. The correction
pass harvests candidate surfaces from the corpus (acronym expansions and
capitalized runs), looks them up in a type snapshot, and overwrites any
prediction that disagrees with the harvested potential-entity set.
"""
import tempfile
from pathlib import Path

from contrastner import kg
from contrastner.corpus import TaggedSentence

SNAPSHOT = "The European Commission\tOrganisation\n"

PREDICTED = [
    TaggedSentence(["The", "European", "Commission", "meets", "today", "."],
                   ["B-ORG", "I-ORG", "I-ORG", "O", "O", "O"]),
    TaggedSentence(["TEC", "approved", "the", "budget", "."],
                   ["O", "O", "O", "O", "O"]),
]


def main():
    with tempfile.TemporaryDirectory() as td:
        path = Path(td) / "snapshot.tsv"
        path.write_text(SNAPSHOT, encoding="utf-8")
        index = kg.load_snapshot(path)

    phrase = "The European Commission"
    print("subphrases of the full mention:")
    for sub in kg.enumerate_subphrases(phrase):
        print("  ", sub)

    tokens = [list(s.tokens) for s in PREDICTED]
    print("\nacronym expansion for 'TEC':",
          kg.expand_acronym("TEC", tokens))

    pe = kg.build_pe(tokens, index)
    print("\npotential-entity set harvested from the corpus:")
    for surface, types in pe.items():
        print(f"  {surface!r} -> {types}")

    fixed = kg.modify_entities(PREDICTED, pe)
    print("\nbefore/after on the acronym sentence:")
    for token, before, after in zip(PREDICTED[1].tokens, PREDICTED[1].tags,
                                    fixed[1].tags):
        marker = "   <- corrected" if before != after else ""
        print(f"  {token:10s} {before:6s} -> {after:6s}{marker}")


if __name__ == "__main__":
    main()
