"""The whole pipeline through the command-line interface, in one sandbox.

Order of operations: contrastive pre-training of the encoder on sentence
pairs, warm-started tagger training, prediction, knowledge-graph
correction, and span-level evaluation of both the raw and the corrected
output. Every artifact lands in a temporary directory that is printed
but cleaned up on exit; pass --keep to inspect it afterwards.
"""
import argparse
import shutil
import tempfile
from pathlib import Path

from contrastner import cli, corpus, synth


def run(argv):
    printable = " ".join(str(a) for a in argv)
    print(f"\n$ contrastner {printable}")
    rc = cli.run([str(a) for a in argv])
    if rc != 0:
        raise SystemExit(f"subcommand failed with exit code {rc}")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--keep", action="store_true",
                    help="leave the working directory on disk")
    args = ap.parse_args()

    root = Path(tempfile.mkdtemp(prefix="contrastner-demo-"))
    print("working directory:", root)

    train, test = synth.ner_fixture(seed=0, n_train=120, n_test=30)
    gold, predicted, snapshot, _ = synth.kg_ablation_fixture(n_errors=5, seed=1)
    pairs = synth.pairs_fixture(seed=0, n_pairs=40)

    corpus.write_conll(train, root / "train.conll")
    corpus.write_conll(test, root / "test.conll")
    corpus.write_conll(gold, root / "abl_gold.conll")
    corpus.write_conll(predicted, root / "abl_pred.conll")
    (root / "snapshot.tsv").write_text("\n".join(snapshot) + "\n",
                                       encoding="utf-8")
    with open(root / "pairs.tsv", "w", encoding="utf-8") as f:
        for p in pairs:
            f.write(" ".join(p.sentence) + "\t" + " ".join(p.positive) + "\n")

    run(["stats", "--train", root / "train.conll",
         "--test", root / "test.conll"])
    run(["train-wcl", "--pairs", root / "pairs.tsv",
         "--out", root / "encoder.bin", "--epochs", "2", "--queue", "64",
         "--emb", "16", "--enc-hidden", "8", "--seed", "0"])
    run(["train-ner", "--train", root / "train.conll",
         "--encoder", root / "encoder.bin", "--out", root / "model.bin",
         "--epochs", "4", "--hidden", "16", "--seed", "0"])
    run(["predict", "--model", root / "model.bin",
         "--test", root / "test.conll", "--out", root / "pred.conll"])
    print("\nnote: a warm-started model keeps the vocabulary of its encoder"
          "\ncheckpoint; training tokens outside it share the unknown-word"
          "\nembedding, so transfer quality is bounded by corpus overlap."
          "\nDrop --encoder above to train on the full corpus vocabulary.")
    run(["eval", "--gold", root / "test.conll", "--pred", root / "pred.conll"])

    # the correction pass works on any prediction file; the ablation
    # fixture shows it repairing dropped acronym mentions
    run(["correct", "--pred", root / "abl_pred.conll",
         "--kg", root / "snapshot.tsv", "--out", root / "abl_fixed.conll"])
    run(["eval", "--gold", root / "abl_gold.conll",
         "--pred", root / "abl_pred.conll"])
    run(["eval", "--gold", root / "abl_gold.conll",
         "--pred", root / "abl_fixed.conll"])

    if args.keep:
        print("\nartifacts kept in", root)
    else:
        shutil.rmtree(root)


if __name__ == "__main__":
    main()
