from datetime import date

from hypothesis import given, strategies as st

from sesame.agd_db import (
    Allowlist,
    KnownDomainIndex,
    build_index,
    date_range,
    flag_collisions,
    is_collision,
    lookup_sample,
)
from sesame.domain import prepare
from sesame.zoo import get_family

LCG = get_family("lcgdga")
WORD = get_family("worddga")
D0 = date(2025, 6, 1)


def test_counts_with_dedup():
    seed = {"seed": 1, "tld": "com"}
    idx = build_index([LCG], {"lcgdga": [seed]}, start=D0, end=date(2025, 6, 10))
    assert 0 < len(idx) <= 10 * LCG.default_count
    for day in date_range(D0, date(2025, 6, 10)):
        assert all(d in idx for d in LCG.generate(seed, day))


def test_date_independent_family_ignores_range():
    a = build_index([WORD], start=date(2024, 1, 1), end=date(2024, 1, 5))
    b = build_index([WORD], start=date(2025, 3, 1), end=date(2025, 9, 1))
    assert a.entries == b.entries


def test_multimap_attribution():
    idx = KnownDomainIndex()
    idx.add("shared.com", "a", "s=1")
    idx.add("shared.com", "b", "s=2")
    idx.add("shared.com", "b", "s=2")
    assert idx.lookup("www.SHARED.com") == {("a", "s=1"), ("b", "s=2")}


def test_nondeterministic_family_skipped():
    assert len(build_index([get_family("ticksdga")], start=D0, end=D0)) == 0


def test_failure_is_reported_not_raised():
    failures = []
    idx = build_index([LCG], {"lcgdga": [{"seed": -1, "tld": "com"}]}, start=D0, end=D0, failures=failures)
    assert len(idx) == 0 and failures[0][0] == "lcgdga"


def test_alpha_values():
    seed = {"seed": 77, "tld": "net"}
    d1 = date(2025, 6, 2)
    idx = build_index([LCG], {"lcgdga": [seed]}, start=D0, end=d1)
    # the index holds default_count domains per day
    known = LCG.generate(seed, D0) + LCG.generate(seed, d1, 97 - LCG.default_count)
    unknown = [prepare(f"unknown{i}.org") for i in range(3)]
    assert lookup_sample(known, idx).alpha == 1.0
    assert lookup_sample(unknown, idx).alpha == 0.0
    r = lookup_sample(known + unknown, idx)
    assert r.alpha == 0.97 and r.per_family_hits == {"lcgdga": 97}


def test_alpha_idempotent_under_reinsert():
    seed = {"seed": 5, "tld": "com"}
    idx = build_index([LCG], {"lcgdga": [seed]}, start=D0, end=D0)
    sample = LCG.generate(seed, D0, 30) + [prepare("other.com")]
    before = lookup_sample(sample, idx).alpha
    for dom, attrs in list(idx.entries.items()):
        for fam, sid in list(attrs):
            idx.add(dom, fam, sid)
    assert lookup_sample(sample, idx).alpha == before


def test_save_load_round_trip(tmp_path):
    idx = build_index([LCG, WORD], start=D0, end=D0)
    path = tmp_path / "known.tsv"
    idx.save(path)
    back = KnownDomainIndex.load(path)
    assert back.entries == idx.entries
    assert back.meta["families"] == ["lcgdga", "worddga"]
    lines = path.read_text().splitlines()
    assert lines == sorted(lines)


def test_collision_examples():
    assert is_collision(2, 1000)
    assert not is_collision(40, 1000)
    assert is_collision(4, 50)
    assert is_collision(20, 1000)  # >= 5 but < 3%
    assert flag_collisions({"b": 40, "a": 2}, 1000) == [("a", True), ("b", False)]


@given(st.integers(0, 500), st.integers(0, 500), st.integers(1, 5000))
def test_collision_monotone_in_hits(h1, h2, n):
    lo, hi = sorted((h1, h2))
    if not is_collision(lo, n):
        assert not is_collision(hi, n)


def test_allowlist_from_ranking_file(tmp_path):
    path = tmp_path / "top.csv"
    path.write_text("1,google.com\n2,www.youtube.com\n3,facebook.com\n")
    allow = Allowlist.from_file(path, limit=2)
    assert "google.com" in allow and "youtube.com" in allow
    assert "facebook.com" not in allow
