import random
import threading
from datetime import date, timedelta

import pytest

from sesame.domain import prepare
from sesame.reconstructors import (
    BUDGET,
    LCG_SPACE,
    NO_SEED,
    NOT_APPLICABLE,
    SUCCESS,
    AmbiguousWordlist,
    AnagramMismatch,
    NoCommonBase,
    NoWordlistMatch,
    ReconstructionRequest,
    clear_cache,
    has_reconstructor,
    reconstruct,
    reconstruct_bruteforce,
    reconstruct_iterator,
    reconstruct_permutator,
    reconstruct_smart,
    reconstruct_wordlist,
)
from sesame.zoo import MOD_SEEDS, get_family, wordlist

D0 = date(2025, 7, 20)


def names(texts):
    return [prepare(t) for t in texts]


# --- permutator -------------------------------------------------------------


def test_permutator_example():
    rec = reconstruct_permutator(names(["egtadobeflashplayer.net", "tegadobeflashplayer.net"]))
    assert rec.seeds == [{"base": "egtadobeflashplayer", "tld": "net"}]


def test_permutator_single_domain():
    rec = reconstruct_permutator(names(["qwertyuiop.org"]))
    assert rec.seeds == [{"base": "qwertyuiop", "tld": "org"}]


def test_permutator_mismatch():
    with pytest.raises(AnagramMismatch):
        reconstruct_permutator(names(["abcdefghij.net", "klmnopqrst.net"]))


def test_permutator_empty():
    with pytest.raises(ValueError):
        reconstruct_permutator([])


# --- iterator ---------------------------------------------------------------


def test_iterator_example():
    rec = reconstruct_iterator(names(["ns1dnsfor0.com", "ns1dnsfor1.com"]))
    assert rec.seeds == [{"base": "ns1dnsfor", "start": 0, "tld": "com"}]
    assert (rec.info["counter_min"], rec.info["counter_max"]) == (0, 1)


def test_iterator_no_common_base():
    with pytest.raises(NoCommonBase):
        reconstruct_iterator(names(["aaa1.com", "bbb2.com"]))


def test_iterator_hundred_consecutive():
    k = 4711
    out = get_family("iterdga").generate({"base": "cdnhost", "start": k, "tld": "org"}, None, 100)
    rec = reconstruct_iterator(out)
    assert rec.seeds[0]["base"] == "cdnhost"
    assert (rec.info["counter_min"], rec.info["counter_max"]) == (k, k + 99)


def test_iterator_needs_two():
    with pytest.raises(ValueError):
        reconstruct_iterator(names(["abc1.com"]))


# --- brute force ------------------------------------------------------------


def test_bruteforce_beef():
    out = get_family("lcgdga").generate({"seed": 0xBEEF, "tld": "com"}, D0, 20)
    rec = reconstruct_bruteforce(out, D0)
    assert [s["seed"] for s in rec.seeds] == [0xBEEF]
    assert rec.evaluations == LCG_SPACE


def test_bruteforce_random_domains_find_nothing():
    rng = random.Random(2)
    doms = names(["".join(rng.choice("abcdefghijklmnopqrstuvwxyz") for _ in range(12)) + ".com" for _ in range(30)])
    assert reconstruct_bruteforce(doms, D0).seeds == []


def test_bruteforce_budget():
    r = reconstruct(ReconstructionRequest("lcgdga", names(["abcdefghijkl.com"]), D0, budget=1000))
    assert r.status == BUDGET and r.evaluations <= 1000


def test_bruteforce_neighbour_date():
    # sandbox clock one day ahead of the generation date
    out = get_family("lcgdga").generate({"seed": 99, "tld": "net"}, D0 - timedelta(days=1), 20)
    r = reconstruct(ReconstructionRequest("lcgdga", out, D0))
    assert r.status == SUCCESS and r.seeds == [{"seed": 99, "tld": "net"}]
    assert r.info["date"] == (D0 - timedelta(days=1)).isoformat()
    assert r.evaluations == 2 * LCG_SPACE


def test_neighbour_dates_need_budget():
    out = get_family("lcgdga").generate({"seed": 99, "tld": "net"}, D0 - timedelta(days=1), 20)
    r = reconstruct(ReconstructionRequest("lcgdga", out, D0, budget=LCG_SPACE))
    assert r.status == NO_SEED and r.evaluations == LCG_SPACE


def test_sharded_sweep_with_workers_agrees():
    out = get_family("lcgdga").generate({"seed": 1234, "tld": "biz"}, D0, 10)
    a = reconstruct_bruteforce(out, D0, workers=4, use_cache=False)
    b = reconstruct_bruteforce(out, D0, workers=1, use_cache=False)
    assert a.seeds == b.seeds == [{"seed": 1234, "tld": "biz"}]


def test_concurrent_requests_are_deterministic():
    out = get_family("lcgdga").generate({"seed": 4321, "tld": "com"}, D0, 10)
    clear_cache()
    results = []

    def run():
        results.append(reconstruct(ReconstructionRequest("lcgdga", out, D0)).as_dict())

    threads = [threading.Thread(target=run) for _ in range(3)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert all(r == results[0] for r in results)


# --- smart brute force ------------------------------------------------------


def test_smart_residue():
    out = get_family("moddga").generate({"seed": 100000, "tld": "ru"}, D0, 20)
    rec = reconstruct_smart(out, D0)
    assert [s["seed"] for s in rec.seeds] == [100000 % MOD_SEEDS] == [5881]
    assert rec.evaluations <= MOD_SEEDS
    assert rec.info["modulus"] == MOD_SEEDS


def test_smart_congruent_seeds_same_residue():
    fam = get_family("moddga")
    a = reconstruct_smart(fam.generate({"seed": 777, "tld": "su"}, D0, 20), D0)
    b = reconstruct_smart(fam.generate({"seed": 777 + MOD_SEEDS, "tld": "su"}, D0, 20), D0)
    assert a.seeds == b.seeds


def test_smart_prefers_seed_explaining_most_domains():
    # 4080's stream is 4034's shifted by whole domains on this date
    day = date(2025, 5, 5)
    out = get_family("moddga").generate({"seed": 4034, "tld": "ru"}, day, 40)
    rec = reconstruct_smart(out, day)
    assert rec.seeds == [{"seed": 4034, "tld": "ru"}]
    assert 4080 in rec.info["weaker_matches"]


def test_wrong_family_fails():
    out = get_family("lcgdga").generate({"seed": 5, "tld": "com"}, D0, 30)
    r = reconstruct(ReconstructionRequest("moddga", out, D0))
    assert r.status != SUCCESS


# --- wordlist ---------------------------------------------------------------


def test_wordlist_list_recovered():
    out = get_family("worddga").generate({"list_id": 1, "start": 17, "tld": "com"}, None, 30)
    rec = reconstruct_wordlist(out)
    assert rec.seeds == [{"list_id": 1, "start": 17, "tld": "com"}]


def test_wordlist_mixed_lists():
    words = [wordlist(i) for i in range(3)]
    mixed = names([f"{words[i % 3][i]}{words[(i + 1) % 3][i + 3]}.com" for i in range(30)])
    with pytest.raises((AmbiguousWordlist, NoWordlistMatch)):
        reconstruct_wordlist(mixed)


def test_wordlist_empty():
    with pytest.raises(ValueError):
        reconstruct_wordlist([])


def test_wordlist_no_match():
    with pytest.raises(NoWordlistMatch):
        reconstruct_wordlist(names(["zzzzqqqq.com", "xxxxjjjj.net"]))


# --- dispatcher -------------------------------------------------------------


def test_not_applicable():
    r = reconstruct(ReconstructionRequest("ticksdga", names(["abcdefghijklmnop.cc"]), D0))
    assert r.status == NOT_APPLICABLE
    assert reconstruct(ReconstructionRequest("nosuchfamily", names(["abcd.com"]), D0)).status == NOT_APPLICABLE
    assert not has_reconstructor("ticksdga") and has_reconstructor("worddga")


def test_request_guards():
    with pytest.raises(ValueError):
        ReconstructionRequest("lcgdga", [], D0)
    with pytest.raises(ValueError):
        ReconstructionRequest("lcgdga", names(["abcd.com"]), D0, budget=0)


def test_success_implies_coverage_and_useful_seeds():
    fam = get_family("permdga")
    out = fam.generate({"base": "microsoftupdatecheck", "tld": "org"}, None, 30)
    noise = names([f"noise{i}.com" for i in range(10)])
    r = reconstruct(ReconstructionRequest("permdga", out + noise, D0))
    assert r.status == SUCCESS
    assert r.coverage == pytest.approx(30 / 40)


def test_noise_above_tolerance_fails():
    out = get_family("iterdga").generate({"base": "mailsrv", "start": 3, "tld": "net"}, None, 10)
    noise = names([f"other{i}x.com" for i in range(20)])
    r = reconstruct(ReconstructionRequest("iterdga", out + noise, D0))
    assert r.status == NO_SEED


def test_input_cap_applies():
    out = get_family("iterdga").generate({"base": "mailsrv", "start": 0, "tld": "net"}, None, 300)
    r = reconstruct(ReconstructionRequest("iterdga", out, D0))
    assert r.info["counter_max"] == 99
    r = reconstruct(ReconstructionRequest("iterdga", out, D0, input_cap=5))
    assert r.info["counter_max"] == 4


def test_identical_requests_identical_results():
    out = get_family("worddga").generate({"list_id": 0, "start": 100, "tld": "net"}, None, 40)
    req = ReconstructionRequest("worddga", out, D0)
    assert reconstruct(req) == reconstruct(req)
