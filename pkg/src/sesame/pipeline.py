"""Batch classification of sandbox DNS logs, plus experiment and stats harnesses."""

from __future__ import annotations

import hashlib
import itertools
import json
import logging
import random
from collections import Counter, defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import date, datetime, time, timedelta, timezone
from typing import Iterable, Iterator, Sequence

import numpy as np

from sesame.agd_db import KnownDomainIndex, flag_collisions, lookup_sample
from sesame.classifier import LinearModel
from sesame.config import PipelineConfig
from sesame.domain import DomainName
from sesame.ingest import (
    DroppedSample,
    SampleBatch,
    apply_allowlist,
    filter_records,
    group_samples,
    parse_log,
)
from sesame.reconstructors import (
    NO_SEED,
    NOT_APPLICABLE,
    ReconstructionRequest,
    has_reconstructor,
    reconstruct,
)
from sesame.regex_tools import EmptyInput, FamilyRegistry, extract_regex, matcher_pick, regex_agreement
from sesame.scoring import UNSUSPICIOUS, compute_indicators, compute_score
from sesame.zoo import DgaFamily, InvalidSeed, families as zoo_families

log = logging.getLogger(__name__)

PREDICTION = "prediction"
ALLOWLIST = "allowlist"


def majority_vote(predictions: Sequence[str], order: Sequence[str] = ()) -> str:
    """Most frequent label; ties go to the label listed first in ``order``."""
    if not predictions:
        raise ValueError("majority vote needs at least one prediction")
    counts = Counter(predictions)
    best = max(counts.values())
    tied = [lab for lab, c in counts.items() if c == best]
    rank = {name: i for i, name in enumerate(order)}
    return min(tied, key=lambda lab: (rank.get(lab, len(rank)), lab))


@dataclass
class SampleReport:
    md5hash: str
    execution_date: str
    n_domains: int
    n_allowlisted: int
    n_classified: int
    prediction_rgx_on: str
    prediction_rgx_off: str
    vote_counts: dict
    db_family_hits: dict
    db_collisions: dict
    alpha: float
    indicators: dict | None
    score: float
    category: str
    extracted_regex: str | None
    regex_agreement: dict | None
    reconstruction: dict | None
    tags: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), ensure_ascii=False, separators=(",", ":"))


@dataclass
class Analyzer:
    """Shared read-only artifacts for analysing samples."""

    model: LinearModel
    index: KnownDomainIndex
    registry: FamilyRegistry
    config: PipelineConfig = field(default_factory=PipelineConfig)
    allowlist: object = frozenset()

    def __post_init__(self):
        missing = [n for n in self.model.label_names if n not in self.registry]
        if missing:
            raise ValueError(f"registry lacks model labels {missing}")
        # matcher_pick indexes the registry by model label position
        self.registry = FamilyRegistry([self.registry[n] for n in self.model.label_names])
        self.labels = list(self.model.label_names)

    def analyze(self, batch: SampleBatch) -> SampleReport:
        cfg = self.config
        allowed, rest = apply_allowlist(batch, self.allowlist)
        allowed_set = {d.normalized for d in allowed}
        benign = self.registry.benign.family
        if not rest:
            tags = [{"domain": d.normalized, "tag": ALLOWLIST} for d in batch.domains]
            return SampleReport(
                batch.md5hash, batch.execution_date.isoformat(), len(batch.domains), len(allowed), 0,
                benign, benign, {"rgx_on": {}, "rgx_off": {}}, {}, {}, 0.0, None, 0.0, UNSUSPICIOUS,
                None, None, None, tags,
            )

        probs = self.model.predict_proba([d.normalized for d in rest])
        off = [self.labels[int(i)] for i in np.argmax(probs, axis=1)]
        on, changes = [], []
        discarded: frozenset[str] = frozenset()
        for d, p in zip(rest, probs):
            fam, changed, discarded = matcher_pick(p, d, self.registry, discarded)
            on.append(fam)
            changes.append(changed)

        lookup = lookup_sample(rest, self.index)
        vote_on = majority_vote(on, self.labels)
        vote_off = majority_vote(off, self.labels)
        entry = self.registry[vote_on]
        ind = compute_indicators(
            on,
            probs.max(axis=1),
            lookup.alpha,
            entry.deterministic,
            benign=benign,
            regex_changes=changes,
        )
        score = compute_score(ind)

        try:
            rx = extract_regex(rest, cfg.regex_min_fraction)
            rx_text, agreement = rx.pattern, regex_agreement(rx, entry)
        except EmptyInput:
            rx_text, agreement = None, None

        recon = None
        threshold = entry.threshold if entry.threshold is not None else cfg.default_threshold
        if cfg.reconstruct and lookup.alpha <= 0.96 and score.value > threshold:
            recon = self._reconstruct(batch, rest, on, off, vote_on, vote_off)

        on_it, off_it = iter(on), iter(off)
        tags = []
        for d in batch.domains:
            if d.normalized in allowed_set:
                tags.append({"domain": d.normalized, "tag": ALLOWLIST})
            else:
                tags.append(
                    {"domain": d.normalized, "tag": PREDICTION, "rgx_on": next(on_it), "rgx_off": next(off_it)}
                )
        return SampleReport(
            md5hash=batch.md5hash,
            execution_date=batch.execution_date.isoformat(),
            n_domains=len(batch.domains),
            n_allowlisted=len(allowed),
            n_classified=len(rest),
            prediction_rgx_on=vote_on,
            prediction_rgx_off=vote_off,
            vote_counts={"rgx_on": _ordered_counts(on, self.labels), "rgx_off": _ordered_counts(off, self.labels)},
            db_family_hits=lookup.per_family_hits,
            db_collisions=dict(flag_collisions(lookup.per_family_hits, len(rest))),
            alpha=lookup.alpha,
            indicators=ind.as_dict(),
            score=score.value,
            category=score.category,
            extracted_regex=rx_text,
            regex_agreement=agreement,
            reconstruction=recon,
            tags=tags,
        )

    def _reconstruct(self, batch, rest, on, off, vote_on, vote_off) -> dict | None:
        cfg = self.config
        tried = []
        result = None
        for family, preds in ((vote_on, on), (vote_off, off)):
            if family in tried or not has_reconstructor(family):
                continue
            tried.append(family)
            doms = [d for d, p in zip(rest, preds) if p == family] or list(rest)
            req = ReconstructionRequest(
                family,
                doms,
                batch.execution_date,
                budget=cfg.budget,
                input_cap=cfg.input_cap or None,
                required_match=cfg.required_match,
                workers=1,
            )
            result = reconstruct(req)
            if result.status not in (NOT_APPLICABLE, NO_SEED):
                break
        return result.as_dict() if result else None


def _ordered_counts(preds: Sequence[str], labels: Sequence[str]) -> dict[str, int]:
    c = Counter(preds)
    return {lab: c[lab] for lab in labels if c[lab]}


def load_batches(
    lines: Iterable[str],
    config: PipelineConfig = PipelineConfig(),
    dropped: list[DroppedSample] | None = None,
) -> list[SampleBatch]:
    records, errors = parse_log(lines)
    for err in errors:
        log.warning("line %d skipped: %s", err.line_no, err.reason)
    return group_samples(filter_records(records), config.min_domains, config.min_nx_ratio, dropped)


def analyze_batches(batches: Sequence[SampleBatch], analyzer: Analyzer) -> Iterator[SampleReport]:
    """Reports in input order; a failing sample is logged and skipped."""

    def safe(batch):
        try:
            return analyzer.analyze(batch)
        except Exception:  # noqa: BLE001 - one bad sample never aborts the run
            log.exception("sample %s failed", batch.md5hash)
            return None

    workers = max(1, analyzer.config.workers)
    if workers == 1:
        results = map(safe, batches)
        for r in results:
            if r is not None:
                yield r
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for r in pool.map(safe, batches):
            if r is not None:
                yield r


def analyze_log(lines: Iterable[str], analyzer: Analyzer) -> Iterator[SampleReport]:
    yield from analyze_batches(load_batches(lines, analyzer.config), analyzer)


def write_jsonl(reports: Iterable[SampleReport], fh) -> int:
    n = 0
    for r in reports:
        fh.write(r.to_json() + "\n")
        n += 1
    return n


# --- identification experiment ---------------------------------------------

NOISE_DOMAIN = "bing.com"


def md5_of(text: str) -> str:
    return hashlib.md5(text.encode()).hexdigest()


def synth_log_lines(md5: str, domains: Sequence[DomainName | str], day: date, noise: Sequence[str] = (NOISE_DOMAIN,)) -> list[str]:
    """Sandbox-style TSV: every AGD answered NXDOMAIN, noise domains resolved."""
    t0 = int(datetime.combine(day, time(12, 0), tzinfo=timezone.utc).timestamp())
    lines = [f"{t0}\t{md5}\t{n}\tA\t13.107.21.200" for n in noise]
    for i, d in enumerate(domains):
        text = d.normalized if isinstance(d, DomainName) else d
        lines.append(f"{t0 + i + 1}\t{md5}\t{text}\tA\tNXDOMAIN")
    return lines


@dataclass(frozen=True)
class Campaign:
    family: str
    kind: str  # "real", "fake" or "more"
    seeds: dict
    day: date | None
    count: int

    @property
    def is_fake(self) -> bool:
        return self.kind != "real"

    @property
    def campaign_id(self) -> str:
        day = self.day.isoformat() if self.day else "-"
        return f"{self.family}|{self.kind}|{json.dumps(self.seeds, sort_keys=True)}|{day}|{self.count}"


def experiment_dates(n: int, start: date = date(2025, 1, 15), step: int = 37) -> list[date]:
    return [start + timedelta(days=step * i) for i in range(n)]


def enumerate_campaigns(
    fams: Sequence[DgaFamily],
    dates: Sequence[date],
    rng: random.Random,
    more_factor: int = 3,
) -> list[Campaign]:
    """Real campaigns (known seeds), fake ones (every non-empty subset of seed
    parameters replaced by unseen values) and one "more domains" variant per family.

    Fakes drawn from different known campaigns can coincide; repeats are
    dropped so every campaign maps to its own sample hash."""
    out: list[Campaign] = []
    seen: set[str] = set()

    def add(c: Campaign) -> None:
        if c.campaign_id not in seen:
            seen.add(c.campaign_id)
            out.append(c)

    for fam in fams:
        if not has_reconstructor(fam.name):
            continue
        days = list(dates) if fam.date_dependent else [dates[0]]
        params = [p.name for p in fam.seed_schema]
        for known in fam.known_campaigns:
            for day in days:
                add(Campaign(fam.name, "real", dict(known), day, fam.default_count))
            for r in range(1, len(params) + 1):
                for subset in itertools.combinations(params, r):
                    fake = _fake_seeds(fam, known, subset, rng)
                    if fake is not None:
                        add(Campaign(fam.name, "fake", fake, days[0], fam.default_count))
        first = dict(fam.known_campaigns[0])
        add(Campaign(fam.name, "more", first, days[0], more_factor * fam.default_count))
    return out


def _fake_seeds(fam: DgaFamily, known: dict, subset: Sequence[str], rng: random.Random, attempts: int = 50) -> dict | None:
    for _ in range(attempts):
        seeds = dict(known)
        try:
            for name in subset:
                seeds[name] = fam.fake_value(name, known[name], rng)
        except InvalidSeed:
            break
        if not fam.is_known(seeds):
            return seeds
    log.info("no unseen value for %s %s", fam.name, subset)
    return None


@dataclass
class CampaignOutcome:
    campaign: Campaign
    md5hash: str
    score: float | None
    category: str | None
    alpha: float | None
    prediction: str | None
    reconstruction_status: str | None

    @property
    def above(self) -> bool:
        return self.score is not None and self.score > 5.0

    def as_dict(self) -> dict:
        c = self.campaign
        return {
            "family": c.family,
            "kind": c.kind,
            "seeds": c.seeds,
            "date": c.day.isoformat() if c.day else None,
            "count": c.count,
            "md5hash": self.md5hash,
            "score": self.score,
            "above_5": self.above,
            "category": self.category,
            "alpha": self.alpha,
            "prediction": self.prediction,
            "reconstruction": self.reconstruction_status,
        }


@dataclass
class ExperimentResult:
    outcomes: list[CampaignOutcome]

    def table(self) -> dict[str, dict[str, int]]:
        """2x2 counts: seed kind (fake/real) by score side (>5 / <=5)."""
        t = {"fake": {"gt5": 0, "le5": 0}, "real": {"gt5": 0, "le5": 0}}
        for o in self.outcomes:
            row = t["fake" if o.campaign.is_fake else "real"]
            row["gt5" if o.above else "le5"] += 1
        return t

    def rates(self) -> dict[str, float]:
        t = self.table()
        fake_n = sum(t["fake"].values())
        real_n = sum(t["real"].values())
        return {
            "fake_gt5": t["fake"]["gt5"] / fake_n if fake_n else 0.0,
            "real_le5": t["real"]["le5"] / real_n if real_n else 0.0,
        }


def run_identification_experiment(
    analyzer: Analyzer,
    fams: Sequence[DgaFamily] | None = None,
    n_dates: int = 8,
    seed: int = 0,
) -> ExperimentResult:
    """Synthesize one sandbox log over all campaigns and analyse it.

    The analyzer's index must cover the known campaigns on the experiment
    dates (see :func:`experiment_dates`).
    """
    fams = list(fams) if fams is not None else zoo_families()
    rng = random.Random(seed)
    campaigns = enumerate_campaigns(fams, experiment_dates(n_dates), rng)
    lines = []
    hashes = []
    for c in campaigns:
        fam = next(f for f in fams if f.name == c.family)
        md5 = md5_of(c.campaign_id)
        hashes.append(md5)
        lines.extend(synth_log_lines(md5, fam.generate(c.seeds, c.day, c.count), c.day))
    reports = {r.md5hash: r for r in analyze_log(lines, analyzer)}
    outcomes = []
    for c, md5 in zip(campaigns, hashes):
        r = reports.get(md5)
        outcomes.append(
            CampaignOutcome(
                c,
                md5,
                r.score if r else None,
                r.category if r else None,
                r.alpha if r else None,
                r.prediction_rgx_on if r else None,
                r.reconstruction["status"] if r and r.reconstruction else None,
            )
        )
    return ExperimentResult(outcomes)


# --- log statistics ---------------------------------------------------------

OCCURRENCE_CAP = 21


def stats(lines: Iterable[str], index: KnownDomainIndex | None = None, config: PipelineConfig = PipelineConfig()) -> dict:
    """Counting report over a raw log; every histogram is a sorted mapping."""
    records, errors = parse_log(lines)
    kept = filter_records(records)
    dropped: list[DroppedSample] = []
    batches = group_samples(kept, config.min_domains, config.min_nx_ratio, dropped)

    def day_of(ts):
        return datetime.fromtimestamp(ts, tz=timezone.utc).date().isoformat()

    per_day = Counter(day_of(r.timestamp) for r in records)
    per_day_kept = Counter(day_of(r.timestamp) for r in kept)
    per_day_known: Counter[str] = Counter()
    if index is not None:
        for r in kept:
            if r.domain in index:
                per_day_known[day_of(r.timestamp)] += 1

    hash_days: dict[str, set[str]] = defaultdict(set)
    hash_span: dict[str, list[int]] = {}
    for r in records:
        hash_days[r.md5hash].add(day_of(r.timestamp))
        lo_hi = hash_span.setdefault(r.md5hash, [r.timestamp, r.timestamp])
        lo_hi[0] = min(lo_hi[0], r.timestamp)
        lo_hi[1] = max(lo_hi[1], r.timestamp)
    occurrence = Counter(len(days) for days in hash_days.values())
    duration = Counter(int((hi - lo) // 3600) for lo, hi in hash_span.values())

    domain_hashes: dict[str, set[str]] = defaultdict(set)
    for r in kept:
        domain_hashes[r.domain].add(r.md5hash)
    dom_occ: Counter[str] = Counter()
    for hs in domain_hashes.values():
        n = len(hs)
        dom_occ[str(n) if n < OCCURRENCE_CAP else f"{OCCURRENCE_CAP}+"] += 1

    n = len(records)
    return {
        "records": n,
        "malformed": len(errors),
        "records_after_filter": len(kept),
        "unique_domains_after_filter": len(domain_hashes),
        "samples": len(hash_days),
        "samples_kept": len(batches),
        "samples_dropped": len(dropped),
        "nxdomain_fraction": sum(r.nxdomain for r in records) / n if n else 0.0,
        "type_counts": dict(sorted(Counter(r.dns_type for r in records).items())),
        "per_day": dict(sorted(per_day.items())),
        "per_day_after_filter": dict(sorted(per_day_kept.items())),
        "per_day_recognized": dict(sorted(per_day_known.items())),
        "hash_occurrence_days": {str(k): v for k, v in sorted(occurrence.items())},
        "hash_duration_hours": {str(k): v for k, v in sorted(duration.items())},
        "domain_occurrence": dict(sorted(dom_occ.items(), key=lambda kv: int(kv[0].rstrip("+")))),
    }
