"""Real-vs-fake seed identification experiment, end to end in memory.

Builds the known-domain index over the experiment dates, trains the model
on the bundled data and prints the 2x2 table plus per-family rates.
"""

import argparse
import json
import time
from collections import Counter

from sesame import bundled_lines
from sesame.agd_db import Allowlist, build_index
from sesame.classifier import build_training_set, train
from sesame.config import PipelineConfig
from sesame.pipeline import Analyzer, experiment_dates, run_identification_experiment
from sesame.zoo import default_registry, families


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dates", type=int, default=8)
    ap.add_argument("--per-class", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--rows", help="write per-campaign JSONL rows here")
    args = ap.parse_args()

    t0 = time.perf_counter()
    dates = experiment_dates(args.dates)
    index = build_index(families(), start=min(dates), end=max(dates))
    ds = build_training_set(families(), bundled_lines("benign_domains.txt"), args.per_class, seed=args.seed)
    model = train(ds)
    analyzer = Analyzer(model, index, default_registry(), PipelineConfig(), Allowlist(bundled_lines("popular_domains.txt")))
    res = run_identification_experiment(analyzer, n_dates=args.dates, seed=args.seed)

    per_family = Counter()
    above = Counter()
    for o in res.outcomes:
        key = (o.campaign.family, "fake" if o.campaign.is_fake else "real")
        per_family[key] += 1
        above[key] += o.above
    print(json.dumps({"table": res.table(), "rates": res.rates()}, indent=2))
    print(f"{'family':10} {'kind':5} {'n':>4} {'>5':>4}")
    for (fam, kind), n in sorted(per_family.items()):
        print(f"{fam:10} {kind:5} {n:4d} {above[fam, kind]:4d}")
    print(f"done in {time.perf_counter() - t0:.1f}s")

    if args.rows:
        with open(args.rows, "w", encoding="utf-8") as fh:
            for o in res.outcomes:
                fh.write(json.dumps(o.as_dict(), separators=(",", ":")) + "\n")


if __name__ == "__main__":
    main()
