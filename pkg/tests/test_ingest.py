import random
from datetime import date

from hypothesis import given, settings, strategies as st

from sesame.agd_db import Allowlist
from sesame.ingest import (
    DroppedSample,
    SampleBatch,
    apply_allowlist,
    filter_records,
    group_samples,
    load_samples,
    parse_line,
    parse_log,
)
from sesame.domain import prepare

H1 = "a" * 32
H2 = "b" * 32


def line(ts, h, dom, typ="A", resp="NXDOMAIN"):
    return f"{ts}\t{h}\t{dom}\t{typ}\t{resp}"


def sample_lines(h, n, n_nx, t0=1_700_000_000):
    return [line(t0 + i, h, f"dom{i:03d}x.com", resp="NXDOMAIN" if i < n_nx else "1.2.3.4") for i in range(n)]


def test_parse_valid_line():
    rec = parse_line(line(5, H1, "Example.com"))
    assert rec.md5hash == H1 and rec.timestamp == 5 and rec.nxdomain


def test_zero_address_counts_as_nxdomain():
    assert parse_line(line(5, H1, "x.com", resp="0.0.0.0")).nxdomain
    assert not parse_line(line(5, H1, "x.com", resp="1.1.1.1")).nxdomain


def test_malformed_lines_reported_not_fatal():
    text = [line(1, H1, "a.com"), "1\tonly\tfour\tcols", "# comment", "", line(2, H1, "b.com", typ="SOA")]
    recs, errs = parse_log(text)
    assert len(recs) == 1
    assert [e.line_no for e in errs] == [2, 5]


def test_filter_drops_types_dups_and_invalid():
    recs, _ = parse_log(
        [
            line(1, H1, "mail.example.com", typ="MX"),
            line(2, H1, "good.com"),
            line(3, H1, "www.good.com", resp="1.1.1.1"),
            line(4, H1, "ab"),
            line(5, H2, "good.com"),
        ]
    )
    kept = filter_records(recs)
    assert [(r.md5hash, r.domain) for r in kept] == [(H1, "good.com"), (H2, "good.com")]


def test_nxdomain_is_any_over_duplicates():
    recs, _ = parse_log([line(1, H1, "x1.com", resp="1.1.1.1"), line(2, H1, "x1.com")])
    (rec,) = filter_records(recs)
    assert rec.nxdomain and rec.timestamp == 1


def test_sample_thresholds():
    lines = sample_lines(H1, 19, 19) + sample_lines(H2, 20, 20)
    dropped = []
    batches, _ = load_samples(lines, dropped=dropped)
    assert [b.md5hash for b in batches] == [H2]
    assert dropped[0].md5hash == H1 and "fewer" in dropped[0].reason


def test_nx_ratio_below_half_dropped():
    batches, _ = load_samples(sample_lines(H1, 40, 19))
    assert batches == []


def test_nx_ratio_exactly_half_kept():
    (b,) = load_samples(sample_lines(H1, 40, 20))[0]
    assert b.nxdomain_ratio == 0.5


def test_execution_date_from_earliest_record():
    lines = sample_lines(H1, 25, 25, t0=1_735_700_000)  # 2025-01-01 02:53 UTC
    lines.reverse()
    (b,) = load_samples(lines)[0]
    assert b.execution_date == date(2025, 1, 1)


def test_allowlist_partition_is_exact():
    batch = SampleBatch(H1, [prepare(d) for d in ["google.com", "abcdefg.com", "qwerty.net"]], 1.0, date(2025, 1, 1))
    allowed, rest = apply_allowlist(batch, Allowlist(["google.com"]))
    assert [d.normalized for d in allowed] == ["google.com"]
    assert [d.normalized for d in rest] == ["abcdefg.com", "qwerty.net"]
    allowed, rest = apply_allowlist(batch, Allowlist())
    assert allowed == [] and len(rest) == 3


def _batch_sets(batches):
    return {b.md5hash: (frozenset(d.normalized for d in b.domains), b.nxdomain_ratio) for b in batches}


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_grouping_is_order_insensitive(seed):
    rng = random.Random(seed)
    lines = []
    for h in (H1, H2, "c" * 32):
        lines += sample_lines(h, rng.randint(15, 30), rng.randint(5, 30))
    shuffled = lines[:]
    rng.shuffle(shuffled)
    assert _batch_sets(load_samples(lines)[0]) == _batch_sets(load_samples(shuffled)[0])


def test_dropped_sample_records_ratio():
    dropped: list[DroppedSample] = []
    recs, _ = parse_log(sample_lines(H1, 30, 3))
    group_samples(filter_records(recs), dropped=dropped)
    assert dropped[0].n_domains == 30 and abs(dropped[0].nxdomain_ratio - 0.1) < 1e-12
