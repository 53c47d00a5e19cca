"""Local database of precomputed known AGDs and collision flagging.

On disk the index is a sorted TSV ``domain<TAB>family<TAB>seed_id`` plus a
JSON sidecar (``<path>.meta.json``) with build metadata.
"""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path
from typing import Iterable, Sequence

from sesame.domain import DomainName, InvalidDomain, prepare

log = logging.getLogger(__name__)

KNOWN_THRESHOLD = 0.96
COLLISION_ABS = 5
COLLISION_FRAC = 0.03


class GenerationFailure(RuntimeError):
    pass


@dataclass
class KnownDomainIndex:
    entries: dict[str, set[tuple[str, str]]] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def add(self, domain: str, family: str, seed_id: str) -> None:
        self.entries.setdefault(domain, set()).add((family, seed_id))

    def _key(self, d: DomainName | str) -> str | None:
        if isinstance(d, DomainName):
            text = d.normalized
        else:
            text = d
        try:
            return prepare(text).normalized
        except InvalidDomain:
            return None

    def lookup(self, d: DomainName | str) -> set[tuple[str, str]]:
        key = self._key(d)
        return self.entries.get(key, set()) if key else set()

    def __contains__(self, d) -> bool:
        key = self._key(d)
        return key is not None and key in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def families(self) -> list[str]:
        return sorted({fam for attrs in self.entries.values() for fam, _ in attrs})

    def save(self, path: str | Path) -> None:
        path = Path(path)
        with path.open("w", encoding="utf-8") as fh:
            for dom in sorted(self.entries):
                for fam, seed_id in sorted(self.entries[dom]):
                    fh.write(f"{dom}\t{fam}\t{seed_id}\n")
        meta = dict(self.meta)
        meta["n_domains"] = len(self.entries)
        meta["families"] = self.families()
        Path(str(path) + ".meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "KnownDomainIndex":
        path = Path(path)
        idx = cls()
        with path.open(encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if not line:
                    continue
                dom, fam, seed_id = line.split("\t")
                idx.add(dom, fam, seed_id)
        meta_path = Path(str(path) + ".meta.json")
        if meta_path.exists():
            idx.meta = json.loads(meta_path.read_text())
        return idx


class Allowlist:
    """Exact-match set of trusted domains, e.g. the head of a top-sites ranking."""

    def __init__(self, domains: Iterable[str] = ()):
        self.domains: set[str] = set()
        for raw in domains:
            try:
                self.domains.add(prepare(raw).normalized)
            except InvalidDomain:
                continue

    def __contains__(self, d) -> bool:
        text = d.normalized if isinstance(d, DomainName) else d
        return text in self.domains

    def __len__(self) -> int:
        return len(self.domains)

    @classmethod
    def from_file(cls, path: str | Path, limit: int = 500_000) -> "Allowlist":
        out = []
        with Path(path).open(encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                # tolerate "rank,domain" ranking files
                out.append(line.rsplit(",", 1)[-1])
                if len(out) >= limit:
                    break
        return cls(out)


def date_range(start: date, end: date) -> list[date]:
    return [start + timedelta(days=i) for i in range((end - start).days + 1)]


def build_index(
    zoo_families: Sequence,
    known_seed_sets: dict[str, Sequence[dict]] | None = None,
    start: date | None = None,
    end: date | None = None,
    failures: list[tuple[str, str]] | None = None,
) -> KnownDomainIndex:
    """Precompute every domain each known seed generates over ``[start, end]``.

    ``known_seed_sets`` defaults to each family's ``known_campaigns``; the
    date range defaults to family first-seen through today + 30 days.
    Non-deterministic families are skipped. A failing family is logged and
    reported through ``failures``, never raised.
    """
    if end is None:
        end = date.today() + timedelta(days=30)
    idx = KnownDomainIndex()
    built = {}
    for fam in zoo_families:
        if not fam.deterministic:
            continue
        seeds = list(known_seed_sets.get(fam.name, ()) if known_seed_sets is not None else fam.known_campaigns)
        lo = start or fam.first_seen
        days = date_range(lo, end) if fam.date_dependent else [None]
        try:
            for seed in seeds:
                sid = fam.seed_id(seed)
                for day in days:
                    for d in fam.generate(seed, day, fam.default_count):
                        idx.add(d.normalized, fam.name, sid)
            built[fam.name] = len(seeds)
        except Exception as exc:  # noqa: BLE001 - one family never aborts the build
            log.warning("index build failed for %s: %s", fam.name, exc)
            if failures is not None:
                failures.append((fam.name, str(exc)))
    idx.meta = {
        "start": start.isoformat() if start else None,
        "end": end.isoformat(),
        "seed_sets": built,
    }
    return idx


@dataclass(frozen=True)
class LookupResult:
    alpha: float
    recognized: int
    total: int
    per_family_hits: dict[str, int]


def lookup_sample(domains: Sequence[DomainName], idx: KnownDomainIndex) -> LookupResult:
    """Known ratio over the classified (non-allowlisted) domains of a sample."""
    hits: Counter[str] = Counter()
    recognized = 0
    for d in domains:
        attrs = idx.lookup(d)
        if attrs:
            recognized += 1
            for fam in sorted({f for f, _ in attrs}):
                hits[fam] += 1
    total = len(domains)
    return LookupResult(
        alpha=recognized / total if total else 0.0,
        recognized=recognized,
        total=total,
        per_family_hits=dict(sorted(hits.items())),
    )


def is_collision(hits: int, batch_size: int) -> bool:
    return hits < COLLISION_ABS or hits < COLLISION_FRAC * batch_size


def flag_collisions(per_family_hits: dict[str, int], batch_size: int) -> list[tuple[str, bool]]:
    return [(fam, is_collision(h, batch_size)) for fam, h in sorted(per_family_hits.items())]
