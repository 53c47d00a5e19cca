"""Regenerate src/sesame/data/benign_domains.txt.

The benign class stands in for a top-sites ranking: a hand-picked head of
well-known domains followed by synthetic human-style names built from
benign_vocab.txt. Output is deterministic.
"""

import argparse
import random
from pathlib import Path

DATA = Path(__file__).resolve().parents[1] / "src" / "sesame" / "data"

TLDS = ["com"] * 40 + ["net"] * 8 + ["org"] * 8 + [
    "de", "uk", "io", "co", "ru", "fr", "jp", "br", "it", "nl", "pl", "info",
    "edu", "gov", "tv", "me", "us", "ca", "au", "es", "in", "ch", "se", "app",
]
SYLLABLES = ["ka", "zo", "li", "ra", "ne", "to", "mi", "sa", "vo", "lu", "da",
             "be", "ri", "go", "fa", "ni", "po", "te", "ju", "xa", "qu", "el"]


def synth(rng: random.Random, vocab: list[str]) -> str:
    r = rng.random()
    if r < 0.30:
        sld = rng.choice(vocab)
    elif r < 0.55:
        sld = rng.choice(vocab) + rng.choice(vocab)
    elif r < 0.65:
        sld = rng.choice(vocab) + "-" + rng.choice(vocab)
    elif r < 0.75:
        sld = rng.choice(vocab) + str(rng.choice([1, 2, 4, 7, 24, 99, 101, 360, 365]))
    elif r < 0.85:
        sld = "".join(rng.choice(SYLLABLES) for _ in range(rng.randint(2, 4)))
    else:
        sld = "".join(rng.choice("abcdefghijklmnopqrstuvwxyz") for _ in range(rng.randint(2, 4)))
        sld += rng.choice(vocab)
    return f"{sld}.{rng.choice(TLDS)}"


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--count", type=int, default=5000)
    ap.add_argument("--seed", type=int, default=2020)
    ap.add_argument("--out", type=Path, default=DATA / "benign_domains.txt")
    args = ap.parse_args()

    rng = random.Random(args.seed)
    vocab = sorted(set((DATA / "benign_vocab.txt").read_text().split()))
    out: list[str] = []
    seen: set[str] = set()
    for line in (DATA / "popular_domains.txt").read_text().split():
        labels = line.split(".")
        d = ".".join(labels[-2:])
        if d not in seen:
            seen.add(d)
            out.append(d)
    while len(out) < args.count:
        d = synth(rng, vocab)
        if d not in seen and len(d) >= 4:
            seen.add(d)
            out.append(d)
    args.out.write_text("\n".join(out) + "\n")
    print(f"wrote {len(out)} domains to {args.out}")


if __name__ == "__main__":
    main()
