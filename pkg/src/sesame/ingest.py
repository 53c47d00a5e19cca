"""Sandbox DNS-log parsing, record filtering and per-sample grouping.

Log format (UTF-8 TSV, one record per line)::

    timestamp<TAB>md5hash<TAB>domain<TAB>dns_type<TAB>dns_response

Blank lines and lines starting with ``#`` are skipped.
"""

from __future__ import annotations

import logging
import re
from collections.abc import Iterable
from dataclasses import dataclass, field, replace
from datetime import date, datetime, timezone

from sesame.domain import DomainName, InvalidDomain, normalize, strip_subdomains

log = logging.getLogger(__name__)

DNS_TYPES = frozenset({"A", "AAAA", "MX", "PTR", "TXT", "NS"})
DROPPED_TYPES = frozenset({"NS", "PTR", "MX"})
NX_RESPONSES = frozenset({"NXDOMAIN", "0.0.0.0"})
MIN_DOMAINS = 20
MIN_NX_RATIO = 0.5

_MD5_RE = re.compile(r"^[0-9a-f]{32}$")


@dataclass(frozen=True)
class DnsLogRecord:
    timestamp: int
    md5hash: str
    domain: str
    dns_type: str
    dns_response: str
    nxdomain: bool = False


@dataclass(frozen=True)
class MalformedRecord:
    line_no: int
    reason: str


@dataclass
class SampleBatch:
    md5hash: str
    domains: list[DomainName]
    nxdomain_ratio: float
    execution_date: date
    first_seen: int = 0
    nx_flags: list[bool] = field(default_factory=list)


@dataclass(frozen=True)
class DroppedSample:
    md5hash: str
    reason: str
    n_domains: int
    nxdomain_ratio: float


def parse_line(line: str, line_no: int = 0) -> DnsLogRecord:
    """Parse one TSV line; raises ValueError with a human-readable reason."""
    cols = line.rstrip("\r\n").split("\t")
    if len(cols) != 5:
        raise ValueError(f"expected 5 columns, got {len(cols)}")
    ts, md5, dom, dtype, resp = (c.strip() for c in cols)
    try:
        timestamp = int(ts)
    except ValueError:
        raise ValueError(f"bad timestamp {ts!r}") from None
    md5 = md5.lower()
    if not _MD5_RE.match(md5):
        raise ValueError(f"bad md5hash {md5!r}")
    dtype = dtype.upper()
    if dtype not in DNS_TYPES:
        raise ValueError(f"unknown dns_type {dtype!r}")
    return DnsLogRecord(
        timestamp=timestamp,
        md5hash=md5,
        domain=dom,
        dns_type=dtype,
        dns_response=resp,
        nxdomain=resp.upper() in NX_RESPONSES,
    )


def parse_log(stream: Iterable[str]) -> tuple[list[DnsLogRecord], list[MalformedRecord]]:
    records: list[DnsLogRecord] = []
    errors: list[MalformedRecord] = []
    for line_no, line in enumerate(stream, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        try:
            records.append(parse_line(line, line_no))
        except ValueError as exc:
            errors.append(MalformedRecord(line_no, str(exc)))
    return records, errors


def filter_records(records: Iterable[DnsLogRecord]) -> list[DnsLogRecord]:
    """Drop invalid domains, NS/PTR/MX lookups and per-sample duplicates.

    Domains are rewritten to their stripped, normalized form. The first
    record of a (hash, domain) pair is kept; its ``nxdomain`` flag is the OR
    over all of the pair's records.
    """
    kept: dict[tuple[str, str], int] = {}
    out: list[DnsLogRecord] = []
    for rec in records:
        if rec.dns_type in DROPPED_TYPES:
            continue
        try:
            dom = strip_subdomains(normalize(rec.domain)).normalized
        except InvalidDomain:
            continue
        key = (rec.md5hash, dom)
        pos = kept.get(key)
        if pos is None:
            kept[key] = len(out)
            out.append(replace(rec, domain=dom))
        elif rec.nxdomain and not out[pos].nxdomain:
            out[pos] = replace(out[pos], nxdomain=True)
    return out


def _utc_date(ts: int) -> date:
    return datetime.fromtimestamp(ts, tz=timezone.utc).date()


def group_samples(
    records: Iterable[DnsLogRecord],
    min_domains: int = MIN_DOMAINS,
    min_nx_ratio: float = MIN_NX_RATIO,
    dropped: list[DroppedSample] | None = None,
) -> list[SampleBatch]:
    """Group filtered records by md5hash and apply the sample filters.

    Batches come out in order of the hash's first appearance. Grouping is
    single-threaded. Records must already be filtered (see
    :func:`filter_records`); duplicates are collapsed again defensively.
    """
    groups: dict[str, dict[str, bool]] = {}
    first_ts: dict[str, int] = {}
    for rec in records:
        doms = groups.setdefault(rec.md5hash, {})
        doms[rec.domain] = doms.get(rec.domain, False) or rec.nxdomain
        if rec.md5hash not in first_ts or rec.timestamp < first_ts[rec.md5hash]:
            first_ts[rec.md5hash] = rec.timestamp

    batches = []
    for md5, doms in groups.items():
        n = len(doms)
        ratio = sum(doms.values()) / n if n else 0.0
        reason = None
        if n < min_domains:
            reason = f"fewer than {min_domains} domains"
        elif ratio < min_nx_ratio:
            reason = f"nxdomain ratio {ratio:.3f} < {min_nx_ratio}"
        if reason is not None:
            log.debug("dropping sample %s: %s", md5, reason)
            if dropped is not None:
                dropped.append(DroppedSample(md5, reason, n, ratio))
            continue
        batches.append(
            SampleBatch(
                md5hash=md5,
                domains=[DomainName(raw=d, normalized=d) for d in doms],
                nxdomain_ratio=ratio,
                execution_date=_utc_date(first_ts[md5]),
                first_seen=first_ts[md5],
                nx_flags=list(doms.values()),
            )
        )
    return batches


def apply_allowlist(batch: SampleBatch, allowlist) -> tuple[list[DomainName], list[DomainName]]:
    """Split a batch into (allowlisted, to_classify); ``allowlist`` supports ``in``."""
    allowed, rest = [], []
    for d in batch.domains:
        (allowed if d.normalized in allowlist else rest).append(d)
    return allowed, rest


def load_samples(lines: Iterable[str], **kwargs) -> tuple[list[SampleBatch], list[MalformedRecord]]:
    records, errors = parse_log(lines)
    return group_samples(filter_records(records), **kwargs), errors
