"""Seed reconstruction from domain names, one reconstructor per zoo family.

Archetypes: permutator (permdga), iterator (iterdga), brute force (lcgdga),
smart brute force over residue classes (moddga) and wordlist segmentation
(worddga). ``reconstruct`` dispatches on the family name and turns every
outcome into a :class:`ReconstructionResult` status.
"""

from __future__ import annotations

import logging
import re
import threading
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import date, timedelta
from functools import lru_cache
from typing import Sequence

import numpy as np

from sesame.domain import DomainName, InvalidDomain, prepare
from sesame.zoo import (
    LETTERS,
    MOD_ALPHABET,
    MOD_SEEDS,
    N_WORDLISTS,
    WORD_OFFSET,
    WORD_STEP,
    DgaFamily,
    InvalidSeed,
    day_number,
    get_family,
    lcg_letter_codes,
    mod_packed,
    pack_letter_codes,
    pack_text,
    wordlist,
)

log = logging.getLogger(__name__)

SUCCESS = "success"
NO_SEED = "no_seed_found"
BUDGET = "budget_exhausted"
NOT_APPLICABLE = "not_applicable"

BRUTE_K = 32
LCG_SPACE = 1 << 16
DEFAULT_BUDGET = 4 * LCG_SPACE
DEFAULT_REQUIRED_MATCH = 0.6
DEFAULT_INPUT_CAP = 100
WORDLIST_FRACTION = 0.9
N_SHARDS = 8

# per-family overrides; values must stay within 5..100
INPUT_CAPS: dict[str, int] = {"permdga": 50, "iterdga": 100, "lcgdga": 100, "moddga": 100, "worddga": 100}
REQUIRED_MATCH: dict[str, float] = {}


class ReconstructionError(ValueError):
    pass


class AnagramMismatch(ReconstructionError):
    pass


class NoCommonBase(ReconstructionError):
    pass


class NoWordlistMatch(ReconstructionError):
    pass


class AmbiguousWordlist(ReconstructionError):
    pass


class BudgetExhausted(ReconstructionError):
    def __init__(self, msg: str, evaluations: int = 0):
        super().__init__(msg)
        self.evaluations = evaluations


@dataclass
class Recovery:
    seeds: list[dict]
    info: dict = field(default_factory=dict)
    evaluations: int = 0


@dataclass(frozen=True)
class ReconstructionRequest:
    family: str
    domains: Sequence[DomainName]
    date: date | None = None
    budget: int = DEFAULT_BUDGET
    input_cap: int | None = None
    required_match: float | None = None
    workers: int = 1

    def __post_init__(self):
        if not self.domains:
            raise ValueError("reconstruction needs at least one domain")
        if self.budget <= 0:
            raise ValueError("budget must be positive")


@dataclass
class ReconstructionResult:
    family: str
    status: str
    seeds: list[dict] = field(default_factory=list)
    coverage: float = 0.0
    evaluations: int = 0
    info: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "family": self.family,
            "status": self.status,
            "seeds": self.seeds,
            "coverage": self.coverage,
            "evaluations": self.evaluations,
            "info": self.info,
        }


def _as_domains(domains: Sequence[DomainName | str]) -> list[DomainName]:
    out = []
    for d in domains:
        if isinstance(d, DomainName):
            out.append(d)
            continue
        try:
            out.append(prepare(d))
        except InvalidDomain:
            continue
    return out


def _modal(values: Sequence) -> tuple:
    """Most common value; ties go to the smallest value."""
    counts = Counter(values)
    best = max(counts.values())
    return min(v for v, c in counts.items() if c == best), best


# --- permutator -------------------------------------------------------------


def reconstruct_permutator(domains: Sequence[DomainName | str], min_fraction: float = 1.0) -> Recovery:
    """Any member of an anagram class is a valid seed; return the first one seen."""
    doms = _as_domains(domains)
    if not doms:
        raise ValueError("need at least one domain")
    keys = [("".join(sorted(d.sld)), d.tld) for d in doms]
    key, n = _modal(keys)
    if n / len(doms) < min_fraction:
        raise AnagramMismatch(f"largest anagram group covers {n}/{len(doms)} inputs")
    first = next(d for d, k in zip(doms, keys) if k == key)
    seed = {"base": first.sld, "tld": first.tld}
    try:
        get_family("permdga").validate(seed)
    except InvalidSeed as exc:
        raise AnagramMismatch(str(exc)) from None
    return Recovery([seed], {"group_size": n}, evaluations=len(doms))


# --- iterator ---------------------------------------------------------------

_TRAILING_DIGITS = re.compile(r"^(?P<stem>.*?)(?P<num>\d+)$")


def reconstruct_iterator(domains: Sequence[DomainName | str], min_fraction: float = 1.0) -> Recovery:
    """Split each SLD into base + trailing counter; the dominant base is the seed."""
    doms = _as_domains(domains)
    if len(doms) < 2:
        raise ValueError("need at least two domains to separate base and counter")
    parts = []
    for d in doms:
        m = _TRAILING_DIGITS.match(d.sld)
        if m and m["stem"]:
            parts.append((m["stem"], int(m["num"]), d.tld))
    if not parts:
        raise NoCommonBase("no SLD ends in a counter")
    base, n = _modal([p[0] for p in parts])
    if n < 2 or n / len(doms) < min_fraction:
        raise NoCommonBase(f"no base shared by enough inputs (best {base!r}: {n}/{len(doms)})")
    counters = sorted(p[1] for p in parts if p[0] == base)
    tld, _ = _modal([p[2] for p in parts if p[0] == base])
    seed = {"base": base, "start": counters[0], "tld": tld}
    try:
        get_family("iterdga").validate(seed)
    except InvalidSeed as exc:
        raise NoCommonBase(str(exc)) from None
    info = {"counter_min": counters[0], "counter_max": counters[-1], "count": counters[-1] - counters[0] + 1}
    return Recovery([seed], info, evaluations=len(doms))


# --- brute force ------------------------------------------------------------


class _Counter:
    """Evaluation counter shared by shard workers."""

    def __init__(self):
        self.value = 0
        self._lock = threading.Lock()

    def add(self, n: int) -> None:
        with self._lock:
            self.value += n


@dataclass(frozen=True)
class _SeedTable:
    """Every (seed, position) output of a seed space, sorted by packed value."""

    values: np.ndarray
    seeds: np.ndarray
    space: int

    @classmethod
    def from_rows(cls, rows: np.ndarray) -> "_SeedTable":
        flat = rows.ravel()
        order = np.argsort(flat, kind="stable")
        seeds = (order // rows.shape[1]).astype(np.int32)
        return cls(flat[order], seeds, rows.shape[0])


def _sharded_table(fn, space: int, day: int, k: int, counter: _Counter, workers: int) -> _SeedTable:
    shards = np.array_split(np.arange(space, dtype=np.int64), N_SHARDS)

    def run(shard):
        out = fn(shard, day, k)
        counter.add(len(shard))
        return out

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, shards))
    else:
        parts = [run(s) for s in shards]
    # concatenation in shard order keeps the merge order-independent
    return _SeedTable.from_rows(np.concatenate(parts, axis=0))


def _lcg_table_fn(shard, day, k):
    return pack_letter_codes(lcg_letter_codes(shard, day, k))


def _mod_table_fn(shard, day, k):
    return mod_packed(shard, day, k)


@lru_cache(maxsize=6)
def _cached_table(kind: str, day: int, k: int) -> _SeedTable:
    fn, space = (_lcg_table_fn, LCG_SPACE) if kind == "lcg" else (_mod_table_fn, MOD_SEEDS)
    return _sharded_table(fn, space, day, k, _Counter(), 1)


def clear_cache() -> None:
    _cached_table.cache_clear()


def _table(kind: str, day: int, k: int, workers: int, use_cache: bool) -> _SeedTable:
    if use_cache:
        return _cached_table(kind, day, k)
    fn, space = (_lcg_table_fn, LCG_SPACE) if kind == "lcg" else (_mod_table_fn, MOD_SEEDS)
    return _sharded_table(fn, space, day, k, _Counter(), workers)


def _match_table(table: _SeedTable, targets: np.ndarray, need: int) -> tuple[np.ndarray, np.ndarray]:
    """Seeds whose first outputs contain at least ``need`` of the targets."""
    t = np.unique(targets)
    lo = np.searchsorted(table.values, t, side="left")
    hi = np.searchsorted(table.values, t, side="right")
    idx = np.concatenate([np.arange(a, b) for a, b in zip(lo, hi)]) if len(t) else np.empty(0, np.int64)
    hits = np.bincount(table.seeds[idx], minlength=table.space)
    return np.flatnonzero(hits >= need), hits


def _bruteforce(
    kind: str,
    space: int,
    targets: np.ndarray,
    tlds: list[str],
    day: date,
    budget: int,
    workers: int,
    use_cache: bool,
) -> Recovery:
    if budget < space:
        raise BudgetExhausted(f"budget {budget} below seed space {space}")
    need = min(5, len(targets))
    evaluations = 0
    for offset in (0, -1, 1):
        if evaluations + space > budget:
            break
        d = day + timedelta(days=offset)
        table = _table(kind, day_number(d), BRUTE_K, workers, use_cache)
        evaluations += space
        if need == 0:
            continue
        found, hits = _match_table(table, targets, need)
        if len(found):
            # a stream shifted by whole domains also matches, but explains fewer of them
            best = hits[found].max()
            tld, _ = _modal(tlds)
            seeds = [{"seed": int(s), "tld": tld} for s in found if hits[s] == best]
            info = {"date": d.isoformat(), "hits": int(best)}
            weaker = [int(s) for s in found if hits[s] < best]
            if weaker:
                info["weaker_matches"] = weaker
            return Recovery(seeds, info, evaluations)
    return Recovery([], {}, evaluations)


def reconstruct_bruteforce(
    domains: Sequence[DomainName | str],
    day: date,
    budget: int = DEFAULT_BUDGET,
    workers: int = 1,
    use_cache: bool = True,
) -> Recovery:
    """Try all 2^16 lcgdga seeds (request date, then +-1 day).

    A seed matches when at least ``min(5, n)`` of its first 32 domains are
    among the n usable inputs.
    """
    fam = get_family("lcgdga")
    doms = [d for d in _as_domains(domains) if _fits(fam, d)]
    targets = np.array([pack_text(d.sld, LETTERS, 26) for d in doms], dtype=np.int64)
    return _bruteforce("lcg", LCG_SPACE, targets, [d.tld for d in doms], day, budget, workers, use_cache)


def reconstruct_smart(
    domains: Sequence[DomainName | str],
    day: date,
    budget: int = DEFAULT_BUDGET,
    workers: int = 1,
    use_cache: bool = True,
) -> Recovery:
    """Brute force over the 31373 residue classes only; seeds are reported as residues."""
    fam = get_family("moddga")
    doms = [d for d in _as_domains(domains) if _fits(fam, d)]
    targets = np.array([pack_text(d.sld, MOD_ALPHABET, 17, offset=1) for d in doms], dtype=np.int64)
    rec = _bruteforce("mod", MOD_SEEDS, targets, [d.tld for d in doms], day, budget, workers, use_cache)
    if rec.seeds:
        rec.info["modulus"] = MOD_SEEDS
        rec.info["congruence"] = [f"seed = {s['seed']} (mod {MOD_SEEDS})" for s in rec.seeds]
    return rec


def _fits(fam: DgaFamily, d: DomainName) -> bool:
    sld = d.sld
    return (
        fam.min_len <= len(sld) <= fam.max_len
        and d.tld in fam.tlds
        and all(c in fam.charset for c in sld)
    )


# --- wordlist ---------------------------------------------------------------


@lru_cache(maxsize=None)
def _word_index(list_id: int) -> dict[str, int]:
    return {w: i for i, w in enumerate(wordlist(list_id))}


def _segmentations(sld: str, index: dict[str, int]) -> list[tuple[int, int]]:
    return [
        (index[sld[:k]], index[sld[k:]])
        for k in range(1, len(sld))
        if sld[:k] in index and sld[k:] in index
    ]


# p2 = 37*p1 - 35*start + 11 (see zoo.word_positions)
_INV35 = pow(WORD_STEP - 2, -1, 128)


def reconstruct_wordlist(domains: Sequence[DomainName | str], min_fraction: float = WORDLIST_FRACTION) -> Recovery:
    """Find the wordlist explaining the SLDs, then solve for the start index."""
    doms = _as_domains(domains)
    if not doms:
        raise ValueError("need at least one domain")
    explaining = []
    per_list = {}
    for lid in range(N_WORDLISTS):
        idx = _word_index(lid)
        segs = [_segmentations(d.sld, idx) for d in doms]
        frac = sum(bool(s) for s in segs) / len(doms)
        per_list[lid] = frac
        if frac >= min_fraction:
            explaining.append((lid, segs))
    if not explaining:
        raise NoWordlistMatch(f"no wordlist explains {min_fraction:.0%} of inputs: {per_list}")
    if len(explaining) > 1:
        raise AmbiguousWordlist(f"lists {[e[0] for e in explaining]} all explain the inputs")
    lid, segs = explaining[0]
    starts = [
        (_INV35 * (WORD_STEP * p1 + WORD_OFFSET - p2)) % 128
        for s in segs
        for p1, p2 in s
    ]
    start, _ = _modal(starts)
    positions = sorted(
        {(p1 - start) % 128 for s in segs for p1, p2 in s if (_INV35 * (WORD_STEP * p1 + WORD_OFFSET - p2)) % 128 == start}
    )
    tld, _ = _modal([d.tld for d, s in zip(doms, segs) if s])
    seed = {"list_id": lid, "start": int(start), "tld": tld}
    info = {"explained": per_list[lid], "position_min": positions[0], "position_max": positions[-1]}
    return Recovery([seed], info, evaluations=N_WORDLISTS * len(doms))


# --- dispatcher -------------------------------------------------------------

ARCHETYPES = ("permutator", "iterator", "bruteforce", "smart", "wordlist")


def has_reconstructor(family: str) -> bool:
    try:
        return get_family(family).archetype in ARCHETYPES
    except KeyError:
        return False


def _coverage(fam: DgaFamily, seeds: list[dict], doms: list[DomainName], info: dict, day: date | None):
    """Fraction of inputs regenerated, and the seeds that regenerate at least one input."""
    inputs = {d.normalized for d in doms}
    covered: set[str] = set()
    useful = []
    for seed in seeds:
        if fam.name == "permdga":
            key = ("".join(sorted(seed["base"])), seed["tld"])
            got = {d.normalized for d in doms if ("".join(sorted(d.sld)), d.tld) == key}
        else:
            if fam.name == "iterdga":
                count = info["count"]
            elif fam.name == "worddga":
                count = 128
            else:
                count = max(BRUTE_K, 2 * len(doms), fam.default_count)
            gen_day = date.fromisoformat(info["date"]) if "date" in info else day
            got = {d.normalized for d in fam.generate(seed, gen_day, count)} & inputs
        if got:
            useful.append(seed)
            covered |= got
    return len(covered) / len(inputs), useful


def reconstruct(req: ReconstructionRequest) -> ReconstructionResult:
    try:
        fam = get_family(req.family)
    except KeyError:
        return ReconstructionResult(req.family, NOT_APPLICABLE, info={"reason": "unknown family"})
    if fam.archetype not in ARCHETYPES:
        return ReconstructionResult(req.family, NOT_APPLICABLE, info={"reason": "no reconstructor"})
    cap = req.input_cap or INPUT_CAPS.get(fam.name, DEFAULT_INPUT_CAP)
    doms = _as_domains(req.domains)[:cap]
    required = req.required_match if req.required_match is not None else REQUIRED_MATCH.get(fam.name, DEFAULT_REQUIRED_MATCH)
    if not doms:
        return ReconstructionResult(fam.name, NO_SEED, info={"reason": "no valid domains"})
    if fam.date_dependent and req.date is None:
        return ReconstructionResult(fam.name, NOT_APPLICABLE, info={"reason": "date required"})
    try:
        if fam.archetype == "permutator":
            rec = reconstruct_permutator(doms, required)
        elif fam.archetype == "iterator":
            if len(doms) < 2:
                return ReconstructionResult(fam.name, NO_SEED, info={"reason": "need two domains"})
            rec = reconstruct_iterator(doms, required)
        elif fam.archetype == "bruteforce":
            rec = reconstruct_bruteforce(doms, req.date, req.budget, req.workers)
        elif fam.archetype == "smart":
            rec = reconstruct_smart(doms, req.date, req.budget, req.workers)
        else:
            rec = reconstruct_wordlist(doms)
    except BudgetExhausted as exc:
        return ReconstructionResult(fam.name, BUDGET, evaluations=exc.evaluations, info={"reason": str(exc)})
    except ReconstructionError as exc:
        return ReconstructionResult(fam.name, NO_SEED, info={"reason": f"{type(exc).__name__}: {exc}"})
    if rec.evaluations > req.budget:
        # cheap reconstructors count one evaluation per input; clamp to the contract
        rec.evaluations = req.budget
    if not rec.seeds:
        return ReconstructionResult(fam.name, NO_SEED, evaluations=rec.evaluations, info=rec.info)
    coverage, useful = _coverage(fam, rec.seeds, doms, rec.info, req.date)
    status = SUCCESS if useful and coverage >= required else NO_SEED
    return ReconstructionResult(fam.name, status, useful, coverage, rec.evaluations, rec.info)
