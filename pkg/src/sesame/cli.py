"""Command-line entry point: ``sesame <subcommand> ...``."""

from __future__ import annotations

import argparse
import contextlib
import json
import logging
import sys
from dataclasses import fields
from datetime import date
from pathlib import Path

from sesame import bundled_lines
from sesame.agd_db import Allowlist, KnownDomainIndex, build_index
from sesame.classifier import TrainConfig, build_training_set, k_fold_cv, train
from sesame.config import PipelineConfig, load_config
from sesame.domain import InvalidDomain, prepare
from sesame.pipeline import (
    Analyzer,
    analyze_log,
    md5_of,
    run_identification_experiment,
    stats,
    synth_log_lines,
    write_jsonl,
)
from sesame.reconstructors import ReconstructionRequest, reconstruct
from sesame.regex_tools import FamilyRegistry
from sesame.zoo import FAMILIES, default_registry, families, get_family

log = logging.getLogger("sesame")


def _date(text: str) -> date:
    try:
        return date.fromisoformat(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected YYYY-MM-DD, got {text!r}") from None


def _families_arg(text: str | None) -> list[str] | None:
    if not text:
        return None
    names = [n.strip() for n in text.split(",") if n.strip()]
    for n in names:
        if n not in FAMILIES:
            raise SystemExit(f"unknown family {n!r}; known: {', '.join(FAMILIES)}")
    return names


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value configuration file")
    for f in fields(PipelineConfig):
        flags = [f"--{f.name}"]
        if "_" in f.name:
            flags.append(f"--{f.name.replace('_', '-')}")
        p.add_argument(*flags, dest=f"cfg_{f.name}", default=None, metavar=f.type.upper(), help=argparse.SUPPRESS)


def _config(args) -> PipelineConfig:
    overrides = {k[4:]: v for k, v in vars(args).items() if k.startswith("cfg_") and v is not None}
    return load_config(args.config, overrides)


def _analyzer(cfg: PipelineConfig) -> Analyzer:
    from sesame.classifier import LinearModel

    model = LinearModel.load(cfg.model)
    index = KnownDomainIndex.load(cfg.index)
    registry = FamilyRegistry.loads(Path(cfg.registry).read_text(encoding="utf-8"))
    allow = Allowlist.from_file(cfg.allowlist, cfg.allowlist_limit) if cfg.allowlist else Allowlist()
    return Analyzer(model, index, registry, cfg, allow)


def _parent(path: str) -> str:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    return path


def _open_out(path: str | None):
    if path and path != "-":
        return open(_parent(path), "w", encoding="utf-8")
    return contextlib.nullcontext(sys.stdout)


# --- subcommands ------------------------------------------------------------


def cmd_build_db(args) -> int:
    failures: list = []
    idx = build_index(families(_families_arg(args.families)), start=args.start, end=args.end, failures=failures)
    idx.save(_parent(args.out))
    print(f"{len(idx)} domains written to {args.out}", file=sys.stderr)
    for fam, err in failures:
        print(f"warning: {fam}: {err}", file=sys.stderr)
    return 0


def _training_set(args):
    benign = Path(args.benign).read_text(encoding="utf-8").splitlines() if args.benign else bundled_lines("benign_domains.txt")
    return build_training_set(families(_families_arg(args.families)), benign, args.per_class, seed=args.seed)


def cmd_train(args) -> int:
    ds = _training_set(args)
    model = train(ds, config=TrainConfig(seed=args.seed, epochs=args.epochs))
    model.save(_parent(args.out))
    registry = default_registry(model.label_names[:-1])
    Path(_parent(args.registry_out)).write_text(registry.dumps(), encoding="utf-8")
    print(f"model ({len(ds)} domains, {len(model.label_names)} labels) -> {args.out}", file=sys.stderr)
    return 0


def cmd_eval(args) -> int:
    ds = _training_set(args)
    res = k_fold_cv(ds, k=args.folds, config=TrainConfig(seed=args.seed, epochs=args.epochs), split_seed=args.seed)
    out = {
        "labels": ds.label_names,
        "folds": [m.as_dict() for m in res.folds],
        "mean": res.mean.as_dict(),
    }
    json.dump(out, sys.stdout, indent=2)
    print()
    return 0


def cmd_analyze(args) -> int:
    cfg = _config(args)
    an = _analyzer(cfg)
    with open(args.log, encoding="utf-8") as fh, _open_out(args.output) as out:
        n = write_jsonl(analyze_log(fh, an), out)
    print(f"{n} samples reported", file=sys.stderr)
    return 0


def cmd_reconstruct(args) -> int:
    lines = Path(args.domains).read_text(encoding="utf-8").split()
    doms = []
    for raw in lines:
        try:
            doms.append(prepare(raw))
        except InvalidDomain as exc:
            log.warning("skipping %r: %s", raw, exc.reason)
    if not doms:
        raise SystemExit("no valid domains in input")
    req = ReconstructionRequest(
        args.family, doms, args.date, budget=args.budget, input_cap=args.input_cap, workers=args.workers
    )
    json.dump(reconstruct(req).as_dict(), sys.stdout, sort_keys=False)
    print()
    return 0


def cmd_zoo_gen(args) -> int:
    """Generated domains as an ingest-format log (one synthetic sample, all NXDOMAIN)."""
    fam = get_family(args.family)
    if args.seed:
        seeds = fam.parse_seed_id(args.seed)
    elif fam.known_campaigns:
        seeds = dict(fam.known_campaigns[0])
    else:
        seeds = {"tld": fam.tlds[0]}
    day = args.date or date.today()
    doms = fam.generate(seeds, day, args.count)
    md5 = md5_of(f"{fam.name}|{fam.seed_id(seeds)}|{day.isoformat()}")
    with _open_out(args.output) as out:
        for line in synth_log_lines(md5, doms, day, noise=()):
            out.write(line + "\n")
    return 0


def cmd_experiment(args) -> int:
    cfg = _config(args)
    an = _analyzer(cfg)
    if not cfg.allowlist:
        an.allowlist = Allowlist(bundled_lines("popular_domains.txt"))
    res = run_identification_experiment(an, n_dates=args.dates, seed=cfg.seed)
    if args.rows:
        with open(_parent(args.rows), "w", encoding="utf-8") as fh:
            for o in res.outcomes:
                fh.write(json.dumps(o.as_dict(), separators=(",", ":")) + "\n")
    json.dump({"table": res.table(), "rates": res.rates(), "campaigns": len(res.outcomes)}, sys.stdout, indent=2)
    print()
    return 0


def cmd_stats(args) -> int:
    cfg = _config(args)
    # recognition counts only when the configured index exists
    index = KnownDomainIndex.load(cfg.index) if Path(cfg.index).is_file() else None
    with open(args.log, encoding="utf-8") as fh:
        report = stats(fh, index, cfg)
    json.dump(report, sys.stdout, indent=2)
    print()
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sesame", description=__doc__)
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("build-db", help="precompute known AGDs of the zoo's known campaigns")
    s.add_argument("--out", required=True)
    s.add_argument("--start", type=_date)
    s.add_argument("--end", type=_date)
    s.add_argument("--families", help="comma-separated subset of zoo families")
    s.set_defaults(func=cmd_build_db)

    for name, func, help_ in (
        ("train", cmd_train, "train the classifier and write the family registry"),
        ("eval", cmd_eval, "k-fold cross-validation"),
    ):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--per-class", type=int, default=2000)
        s.add_argument("--seed", type=int, default=0)
        s.add_argument("--epochs", type=int, default=TrainConfig.epochs)
        s.add_argument("--benign", help="benign domain list (default: bundled list)")
        s.add_argument("--families", help="comma-separated subset of zoo families")
        if name == "train":
            s.add_argument("--out", required=True)
            s.add_argument("--registry-out", required=True)
        else:
            s.add_argument("--folds", type=int, default=5)
        s.set_defaults(func=func)

    s = sub.add_parser("analyze", help="score every sample of a DNS log (JSONL out)")
    s.add_argument("log")
    s.add_argument("-o", "--output")
    _add_config_flags(s)
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("reconstruct", help="recover the seed of a family from domains (JSON out)")
    s.add_argument("family")
    s.add_argument("domains", help="file with one domain per line")
    s.add_argument("--date", type=_date)
    s.add_argument("--budget", type=int, default=ReconstructionRequest.budget)
    s.add_argument("--input-cap", type=int)
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_reconstruct)

    s = sub.add_parser("zoo-gen", help="generate domains from a zoo family (TSV out)")
    s.add_argument("family", choices=sorted(FAMILIES))
    s.add_argument("--seed", help="seed set as k=v,k=v (default: first known campaign)")
    s.add_argument("--date", type=_date)
    s.add_argument("--count", type=int)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_zoo_gen)

    s = sub.add_parser("experiment", help="real vs fake seed identification experiment")
    s.add_argument("--dates", type=int, default=8)
    s.add_argument("--rows", help="write per-campaign rows (JSONL) here")
    _add_config_flags(s)
    s.set_defaults(func=cmd_experiment)

    s = sub.add_parser("stats", help="counting report over a DNS log")
    s.add_argument("log")
    _add_config_flags(s)
    s.set_defaults(func=cmd_stats)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
