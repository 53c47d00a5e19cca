import random
import string
from datetime import date

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sesame.domain import ALPHABET, prepare
from sesame.regex_tools import (
    EmptyInput,
    FamilyRegex,
    FamilyRegistry,
    compact_charclass,
    expand_charclass,
    extract_regex,
    length_filter,
    matcher_pick,
    regex_agreement,
    render,
)
from sesame.zoo import BENIGN, default_registry, families, family_regex

SLD_CHARS = string.ascii_lowercase + string.digits + "-"


def doms(texts):
    return [prepare(t) for t in texts]


def probs_for(registry, ranking):
    """Probability vector ranking the named families first, in order."""
    p = np.full(len(registry), 0.001)
    for k, name in enumerate(ranking):
        p[registry.index[name]] = 0.9 - 0.1 * k
    return p / p.sum()


@given(st.sets(st.sampled_from(SLD_CHARS), min_size=1))
def test_charclass_round_trip(chars):
    assert expand_charclass(compact_charclass(chars)) == frozenset(chars)


def test_charclass_digits_first_and_ranges():
    assert compact_charclass("abcdexyz12345") == "1-5a-ex-z"
    assert compact_charclass("a-b") == "\\-a-b"
    assert compact_charclass("aceg") == "aceg"


def test_render_formats():
    assert render("abc", 12, 12, ["com"]) == "[a-c]{12}\\.(com)$"
    assert render("ab", 3, 5, ["net", "com"]) == "[a-b]{3,5}\\.(com|net)$"


def test_homogeneous_input():
    rng = random.Random(0)
    names = ["".join(rng.choice(string.ascii_lowercase) for _ in range(12)) + ".com" for _ in range(100)]
    # make sure every letter shows up
    names[0] = string.ascii_lowercase[:12] + ".com"
    names[1] = string.ascii_lowercase[12:24] + ".com"
    names[2] = "yz" + "a" * 10 + ".com"
    assert extract_regex(doms(names)).pattern == "[a-z]{12}\\.(com)$"


def test_canonical_example_shape():
    rng = random.Random(1)
    alphabet = "abcdefghijklmnopqrstuvwxy12345"
    names = []
    for i in range(200):
        n = 22 + i % 5
        sld = alphabet[i % 30] + "".join(rng.choice(alphabet) for _ in range(n - 1))
        names.append(f"{sld}.{('com', 'net')[i % 2]}")
    rx = extract_regex(doms(names))
    assert rx.pattern == "[1-5a-y]{22,26}\\.(com|net)$"
    assert all(rx.matches(d) for d in doms(names))


def test_length_filter_drops_rare_lengths():
    slds = ["x" * 16] * 96 + ["bing"] * 4
    keep = length_filter(slds)
    assert keep.count(False) == 4
    rx = extract_regex(doms([f"{'q' * 15}{i % 10}.com" for i in range(96)] + ["bingbo.com"] * 4))
    assert rx.dropped == 4 and rx.min_len == 16


def test_length_filter_keeps_at_threshold():
    # 5 of 100 is exactly 5%: not strictly below, so kept
    assert all(length_filter(["a" * 10] * 100 + ["b" * 3] * 5))


def test_empty_input():
    with pytest.raises(EmptyInput):
        extract_regex([])


@given(st.lists(st.text(SLD_CHARS, min_size=1, max_size=20).filter(lambda s: s[0] != "-"), min_size=1, max_size=40))
def test_extracted_regex_matches_survivors(slds):
    names = doms([f"{s}.com" for s in slds])
    rx = extract_regex(names)
    keep = length_filter([d.sld for d in names])
    assert all(rx.matches(d) for d, k in zip(names, keep) if k)


@pytest.mark.parametrize("fam", families(), ids=lambda f: f.name)
def test_family_regex_matches_generated(fam):
    rx = family_regex(fam)
    seeds = dict(fam.known_campaigns[0]) if fam.known_campaigns else {"tld": fam.tlds[0]}
    out = fam.generate(seeds, date(2025, 3, 1), 1000)
    assert all(rx.matches(d) for d in out)
    ex = extract_regex(out)
    agree = regex_agreement(ex, rx)
    assert all(agree.values()), agree


def test_agreement_reports_disjoint_tlds():
    rx = FamilyRegex.from_parts("x", "abc", 5, 9, ["com", "net"])
    ex = extract_regex(doms(["abcab.biz"] * 3))
    assert regex_agreement(ex, rx) == {"charclass_subset": True, "length_within": True, "tlds_subset": False}


def test_benign_matches_everything():
    reg = default_registry()
    for name in ["google.com", "a-b.co", "xn--bcher-kva.de", "12345.io"]:
        assert reg.benign.matches(prepare(name))


def test_matcher_noop_when_top_matches():
    reg = default_registry()
    d = prepare("abcdefghijkl.com")
    fam, changed, disc = matcher_pick(probs_for(reg, ["lcgdga", "permdga"]), d, reg)
    assert (fam, changed, disc) == ("lcgdga", False, frozenset())


def test_matcher_skips_digitless_family():
    reg = default_registry()
    d = prepare("abcd89.com")
    fam, changed, disc = matcher_pick(probs_for(reg, ["lcgdga", "iterdga"]), d, reg)
    assert fam == "iterdga" and changed
    assert disc == frozenset({"lcgdga"})


def test_matcher_falls_back_to_benign():
    reg = default_registry()
    d = prepare("my-shop.de")
    fam, changed, _ = matcher_pick(probs_for(reg, ["permdga", "lcgdga"]), d, reg)
    assert fam == BENIGN and changed


def test_discards_persist():
    reg = default_registry()
    d = prepare("abcdefghijkl.com")
    fam, _, _ = matcher_pick(probs_for(reg, ["lcgdga"]), d, reg, frozenset({"lcgdga"}))
    assert fam != "lcgdga"


@given(st.data())
def test_matcher_never_returns_discarded_or_nonmatching(data):
    reg = default_registry()
    p = np.array(data.draw(st.lists(st.floats(0, 1), min_size=len(reg), max_size=len(reg))))
    text = data.draw(st.text(SLD_CHARS, min_size=2, max_size=20).filter(lambda s: s[0] != "-"))
    d = prepare(text + "." + data.draw(st.sampled_from(["com", "net", "ru", "cc", "de"])))
    disc = frozenset(data.draw(st.sets(st.sampled_from(reg.names[:-1]))))
    fam, changed, new = matcher_pick(p, d, reg, disc)
    assert fam not in disc
    assert disc <= new
    assert reg[fam].is_benign or reg[fam].matches(d)
    assert changed == (fam != reg.entries[int(np.argmax(p))].family)


def test_registry_file_round_trip():
    reg = default_registry()
    back = FamilyRegistry.loads(reg.dumps())
    assert back.names == reg.names
    for a, b in zip(reg.entries, back.entries):
        assert (a.pattern, a.deterministic, a.threshold, a.is_benign) == (b.pattern, b.deterministic, b.threshold, b.is_benign)
        assert a.charset == b.charset and a.tlds == b.tlds


def test_registry_needs_one_benign():
    with pytest.raises(ValueError):
        FamilyRegistry([FamilyRegex.from_parts("x", "ab", 1, 2, ["com"])])


def test_alphabet_sanity():
    assert set(SLD_CHARS) | {"."} == set(ALPHABET)
