"""Write a small sandbox DNS log mixing known, novel and benign samples."""

import argparse
import random
from datetime import date

from sesame.pipeline import md5_of, synth_log_lines
from sesame.zoo import get_family

SAMPLES = [
    ("lcgdga", None),
    ("lcgdga", {"seed": 31337, "tld": "com"}),
    ("permdga", {"base": "windowsdefenderscan", "tld": "org"}),
    ("iterdga", {"base": "cdnedge", "start": 77, "tld": "net"}),
    ("moddga", {"seed": 123456789, "tld": "ru"}),
    ("worddga", {"list_id": 2, "start": 9, "tld": "net"}),
    ("ticksdga", {"tld": "cc"}),
]


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("out")
    ap.add_argument("--date", type=date.fromisoformat, default=date(2025, 5, 5))
    ap.add_argument("--count", type=int, default=40)
    args = ap.parse_args()

    rng = random.Random(0)
    lines = []
    for name, seeds in SAMPLES:
        fam = get_family(name)
        seeds = seeds or dict(fam.known_campaigns[0])
        doms = fam.generate(seeds, args.date, args.count)
        lines += synth_log_lines(md5_of(f"{name}{sorted(seeds.items())}"), doms, args.date)
    # a benign-looking sample that mostly resolves: dropped by the NX filter
    md5 = md5_of("benign")
    t = int(rng.random() * 1000) + 1_746_446_400
    lines += [f"{t + i}\t{md5}\tsite{i}.example{i % 7}.com\tA\t93.184.216.{i}" for i in range(30)]
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"{len(lines)} records -> {args.out}")


if __name__ == "__main__":
    main()
