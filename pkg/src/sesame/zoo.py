"""Reference DGA families.

Six synthetic families, one per reconstruction archetype plus a
non-deterministic one. Every PRNG is pinned down exactly so the
reconstructors can regenerate output bit for bit:

========  ===================  ==========================================
family    archetype            generator
========  ===================  ==========================================
permdga   permutator           Fisher-Yates shuffles of a base string
iterdga   iterator             base string + incrementing integer
lcgdga    bruteforcer target   16-bit seed, LCG(1103515245, 12345, 2^31)
moddga    smart bruteforcer    32-bit seed reduced mod 31373, Park-Miller
worddga   other (wordlist)     two words from one of three wordlists
ticksdga  non-deterministic    fresh OS entropy per run
========  ===================  ==========================================
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from datetime import date
from functools import lru_cache
from importlib import resources
from typing import Any, Sequence

import numpy as np

from sesame.domain import DomainName, normalize

LETTERS = "abcdefghijklmnopqrstuvwxyz"
DIGITS = "0123456789"
EPOCH = date(1970, 1, 1)

LCG_A = 1103515245
LCG_C = 12345
LCG_MASK = 0x7FFFFFFF  # m = 2^31

MOD_SEEDS = 31373
PM_MOD = 2**31 - 1
PM_MUL = 16807
MOD_ALPHABET = "abcdefghijklmnop"


class InvalidSeed(ValueError):
    pass


def day_number(d: date) -> int:
    return (d - EPOCH).days


@dataclass(frozen=True)
class SeedParam:
    name: str
    kind: str  # "int" | "str" | "choice"
    lo: int = 0
    hi: int = 0
    choices: tuple = ()
    alphabet: str = ""

    def validate(self, value: Any) -> Any:
        if self.kind == "int":
            if isinstance(value, str):
                value = int(value, 0)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise InvalidSeed(f"{self.name}: expected int, got {value!r}")
            value = int(value)
            if not self.lo <= value <= self.hi:
                raise InvalidSeed(f"{self.name}={value} outside [{self.lo}, {self.hi}]")
            return value
        if self.kind == "choice":
            if isinstance(value, str) and all(isinstance(c, int) for c in self.choices):
                value = int(value)
            if value not in self.choices:
                raise InvalidSeed(f"{self.name}={value!r} not in {self.choices}")
            return value
        if not isinstance(value, str):
            raise InvalidSeed(f"{self.name}: expected text, got {value!r}")
        if not self.lo <= len(value) <= self.hi:
            raise InvalidSeed(f"{self.name}: length {len(value)} outside [{self.lo}, {self.hi}]")
        bad = set(value) - set(self.alphabet)
        if bad:
            raise InvalidSeed(f"{self.name}: characters {sorted(bad)} not allowed")
        return value


class DgaFamily:
    name: str = ""
    archetype: str | None = None
    deterministic: bool = True
    date_dependent: bool = False
    charset: str = ""
    min_len: int = 0
    max_len: int = 0
    tlds: tuple[str, ...] = ()
    seed_schema: tuple[SeedParam, ...] = ()
    known_campaigns: tuple[dict, ...] = ()
    default_count: int = 50
    first_seen: date = date(2024, 1, 1)

    def validate(self, seeds: dict) -> dict:
        out = {}
        for p in self.seed_schema:
            if p.name not in seeds:
                raise InvalidSeed(f"{self.name}: missing seed {p.name!r}")
            out[p.name] = p.validate(seeds[p.name])
        extra = set(seeds) - {p.name for p in self.seed_schema}
        if extra:
            raise InvalidSeed(f"{self.name}: unknown seeds {sorted(extra)}")
        return out

    def seed_id(self, seeds: dict) -> str:
        seeds = self.validate(seeds)
        return ",".join(f"{p.name}={seeds[p.name]}" for p in self.seed_schema)

    def parse_seed_id(self, text: str) -> dict:
        raw = dict(item.split("=", 1) for item in text.split(",") if item)
        return self.validate(raw)

    def generate(self, seeds: dict, day: date | None = None, count: int | None = None) -> list[DomainName]:
        seeds = self.validate(seeds)
        if count is None:
            count = self.default_count
        if count < 0:
            raise ValueError("count must be non-negative")
        if self.date_dependent and day is None:
            raise ValueError(f"{self.name} needs a date")
        seen: dict[str, None] = {}
        for s in self._generate(seeds, day, count):
            seen.setdefault(s, None)
        return [normalize(s) for s in seen]

    def _generate(self, seeds: dict, day: date | None, count: int) -> list[str]:
        raise NotImplementedError

    def fake_value(self, param: str, known: Any, rng: random.Random) -> Any:
        """A schema-valid seed value different from ``known``.

        Whether the resulting seed set as a whole is unknown is checked by
        the caller (see :meth:`is_known`).
        """
        p = next(q for q in self.seed_schema if q.name == param)
        for _ in range(1000):
            if p.kind == "choice":
                v = rng.choice(p.choices)
            elif p.kind == "int":
                v = rng.randint(p.lo, p.hi)
            else:
                n = rng.randint(max(p.lo, len(known) - 2), min(p.hi, len(known) + 2))
                v = "".join(rng.choice(p.alphabet) for _ in range(n))
                v = self._fix_fake_text(param, v)
            if v != known and self._fake_ok(param, v, known):
                return p.validate(v)
        raise InvalidSeed(f"no fake value for {self.name}.{param}")

    def _fix_fake_text(self, param: str, value: str) -> str:
        return value

    def canonical(self, seeds: dict) -> tuple:
        """Key under which two seed sets generate identical output."""
        seeds = self.validate(seeds)
        return tuple(seeds[p.name] for p in self.seed_schema)

    def is_known(self, seeds: dict) -> bool:
        key = self.canonical(seeds)
        return any(self.canonical(c) == key for c in self.known_campaigns)

    def _fake_ok(self, param: str, value: Any, known: Any) -> bool:
        return True


# --- PRNG cores (vectorized over seeds) ------------------------------------


def fnv1a32(text: str) -> int:
    h = 0x811C9DC5
    for b in text.encode():
        h = ((h ^ b) * 0x01000193) & 0xFFFFFFFF
    return h


def lcg_initial_states(seeds: np.ndarray, day: int) -> np.ndarray:
    seeds = np.asarray(seeds, dtype=np.uint32)
    return ((seeds << np.uint32(15)) | np.uint32(day & 0x7FFF)) & np.uint32(LCG_MASK)


def lcg_letter_codes(seeds: np.ndarray, day: int, count: int, sld_len: int = 12) -> np.ndarray:
    """Letter indices (0..25) of shape (n_seeds, count, sld_len)."""
    state = lcg_initial_states(seeds, day)
    out = np.empty((state.shape[0], count, sld_len), dtype=np.uint8)
    a, c, mask = np.uint32(LCG_A), np.uint32(LCG_C), np.uint32(LCG_MASK)
    for k in range(count):
        for j in range(sld_len):
            state = (state * a + c) & mask  # uint32 wraparound is exact mod 2^31
            out[:, k, j] = (state >> np.uint32(16)) % np.uint32(26)
    return out


def pack_letter_codes(codes: np.ndarray) -> np.ndarray:
    """Pack the last axis (base 26) into int64; 12 letters fit in 57 bits."""
    packed = np.zeros(codes.shape[:-1], dtype=np.int64)
    for j in range(codes.shape[-1]):
        packed = packed * 26 + codes[..., j]
    return packed


def pack_text(sld: str, alphabet: str, base: int, offset: int = 0) -> int:
    v = 0
    for ch in sld:
        v = v * base + alphabet.index(ch) + offset
    return v


def mod_initial_states(residues: np.ndarray, day: int) -> np.ndarray:
    residues = np.asarray(residues, dtype=np.int64)
    return 1 + (residues + MOD_SEEDS * (day % 60000)) % (PM_MOD - 1)


def mod_packed(residues: np.ndarray, day: int, count: int) -> np.ndarray:
    """Packed SLDs (base 17, 1-offset so length is encoded) of shape (n, count)."""
    state = mod_initial_states(residues, day)
    out = np.empty((state.shape[0], count), dtype=np.int64)
    for k in range(count):
        state = (state * PM_MUL) % PM_MOD
        length = 10 + state % 6
        packed = np.zeros_like(state)
        for j in range(15):
            state = (state * PM_MUL) % PM_MOD
            ch = (state >> 8) & 15
            packed = np.where(j < length, packed * 17 + ch + 1, packed)
        out[:, k] = packed
    return out


def unpack_mod(packed: int) -> str:
    chars = []
    while packed:
        packed, r = divmod(packed, 17)
        chars.append(MOD_ALPHABET[r - 1])
    return "".join(reversed(chars))


def _shuffle(chars: list[str], state: int) -> tuple[list[str], int]:
    for i in range(len(chars) - 1, 0, -1):
        state = (state * LCG_A + LCG_C) & LCG_MASK
        j = (state >> 8) % (i + 1)
        chars[i], chars[j] = chars[j], chars[i]
    return chars, state


# --- families ---------------------------------------------------------------


class PermDga(DgaFamily):
    """Random permutations of a base string (VolatileCedar-style).

    The base is sorted before shuffling, so every anagram of a seed is an
    equivalent seed and generates the identical stream.
    """

    name = "permdga"
    archetype = "permutator"
    charset = LETTERS
    min_len, max_len = 8, 24
    tlds = ("net", "org", "info")
    seed_schema = (
        SeedParam("base", "str", 8, 24, alphabet=LETTERS),
        SeedParam("tld", "choice", choices=tlds),
    )
    known_campaigns = (
        {"base": "getadobeflashplayer", "tld": "net"},
        {"base": "microsoftupdatecheck", "tld": "org"},
        {"base": "javaruntimeservice", "tld": "info"},
    )
    default_count = 40

    def canonical(self, seeds):
        seeds = self.validate(seeds)
        return ("".join(sorted(seeds["base"])), seeds["tld"])

    def _generate(self, seeds, day, count):
        base = sorted(seeds["base"])
        state = fnv1a32("".join(base)) & LCG_MASK
        out = []
        for _ in range(count):
            chars, state = _shuffle(list(base), state)
            out.append("".join(chars) + "." + seeds["tld"])
        return out


class IterDga(DgaFamily):
    """Base string with an incrementing integer appended (BeeBone-style)."""

    name = "iterdga"
    archetype = "iterator"
    charset = DIGITS + LETTERS
    min_len, max_len = 4, 20
    tlds = ("com", "net", "org")
    seed_schema = (
        SeedParam("base", "str", 3, 12, alphabet=LETTERS + DIGITS),
        SeedParam("start", "int", 0, 9_000_000),
        SeedParam("tld", "choice", choices=tlds),
    )
    known_campaigns = (
        {"base": "ns1dnsfor", "start": 0, "tld": "com"},
        {"base": "mailsrv", "start": 100, "tld": "net"},
        {"base": "cdnhost", "start": 5000, "tld": "org"},
    )
    default_count = 50

    def validate(self, seeds):
        # a dotted base such as "ns1.dnsfor" is written without its dots
        if isinstance(seeds.get("base"), str) and "." in seeds["base"]:
            seeds = {**seeds, "base": seeds["base"].replace(".", "")}
        out = super().validate(seeds)
        base = out["base"]
        if base[0] not in LETTERS or base[-1] not in LETTERS:
            raise InvalidSeed("iterdga base must start and end with a letter")
        return out

    def _generate(self, seeds, day, count):
        base, start, tld = seeds["base"], seeds["start"], seeds["tld"]
        return [f"{base}{start + i}.{tld}" for i in range(count)]

    def _fix_fake_text(self, param, value):
        return "x" + value[1:-1] + "z" if len(value) >= 3 else value

    def _fake_ok(self, param, value, known):
        if param == "start":
            return abs(value - known) > 100_000
        return True


class LcgDga(DgaFamily):
    """12-letter SLDs from a date-mixed 16-bit seed driving an LCG."""

    name = "lcgdga"
    archetype = "bruteforce"
    date_dependent = True
    charset = LETTERS
    min_len = max_len = 12
    tlds = ("com", "net", "biz", "info")
    seed_schema = (
        SeedParam("seed", "int", 0, 0xFFFF),
        SeedParam("tld", "choice", choices=tlds),
    )
    known_campaigns = (
        {"seed": 0xBEEF, "tld": "com"},
        {"seed": 4242, "tld": "net"},
        {"seed": 31337, "tld": "biz"},
    )
    default_count = 50

    def _generate(self, seeds, day, count):
        codes = lcg_letter_codes(np.array([seeds["seed"]]), day_number(day), count)[0]
        return ["".join(LETTERS[c] for c in row) + "." + seeds["tld"] for row in codes]


class ModDga(DgaFamily):
    """32-bit seed reduced mod 31373 (MakLoader-style), Park-Miller PRNG."""

    name = "moddga"
    archetype = "smart"
    date_dependent = True
    charset = MOD_ALPHABET
    min_len, max_len = 10, 15
    tlds = ("ru", "su", "xyz")
    seed_schema = (
        SeedParam("seed", "int", 0, 0xFFFFFFFF),
        SeedParam("tld", "choice", choices=tlds),
    )
    known_campaigns = (
        {"seed": 100000, "tld": "ru"},
        {"seed": 7, "tld": "su"},
        {"seed": 2024061, "tld": "xyz"},
    )
    default_count = 40

    def _generate(self, seeds, day, count):
        packed = mod_packed(np.array([seeds["seed"] % MOD_SEEDS]), day_number(day), count)[0]
        return [unpack_mod(int(p)) + "." + seeds["tld"] for p in packed]

    def canonical(self, seeds):
        seeds = self.validate(seeds)
        return (seeds["seed"] % MOD_SEEDS, seeds["tld"])

    def _fake_ok(self, param, value, known):
        if param == "seed":
            return value % MOD_SEEDS != known % MOD_SEEDS
        return True


@lru_cache(maxsize=None)
def wordlist(list_id: int) -> tuple[str, ...]:
    text = resources.files("sesame.data").joinpath(f"wordlist_{list_id}.txt").read_text()
    words = tuple(text.split())
    if len(words) != 128:
        raise RuntimeError(f"wordlist {list_id} has {len(words)} words, expected 128")
    return words


N_WORDLISTS = 3
WORD_STEP = 37
WORD_OFFSET = 11


def word_positions(start: int, i: int) -> tuple[int, int]:
    return (start + i) % 128, (2 * start + WORD_STEP * i + WORD_OFFSET) % 128


class WordDga(DgaFamily):
    """Two-word concatenations from one of three built-in wordlists (date-independent)."""

    name = "worddga"
    archetype = "wordlist"
    charset = LETTERS
    tlds = ("com", "net")
    seed_schema = (
        SeedParam("list_id", "choice", choices=tuple(range(N_WORDLISTS))),
        SeedParam("start", "int", 0, 127),
        SeedParam("tld", "choice", choices=tlds),
    )
    # 16 tracked campaigns: the wordlists are small, so one campaign spans
    # at most 128 unique domains
    known_campaigns = tuple(
        {"list_id": i % 3, "start": (5 + 53 * i) % 128, "tld": ("net", "com")[i % 2]}
        for i in range(16)
    )
    default_count = 50

    def __init__(self):
        lens = [len(w) for i in range(N_WORDLISTS) for w in wordlist(i)]
        self.min_len, self.max_len = 2 * min(lens), 2 * max(lens)

    def _generate(self, seeds, day, count):
        words = wordlist(seeds["list_id"])
        out = []
        for i in range(count):
            p1, p2 = word_positions(seeds["start"], i)
            out.append(words[p1] + words[p2] + "." + seeds["tld"])
        return out


class TicksDga(DgaFamily):
    """Non-deterministic: fresh OS entropy on every call (Reconyc-style)."""

    name = "ticksdga"
    archetype = None
    deterministic = False
    charset = DIGITS + LETTERS
    min_len, max_len = 16, 24
    tlds = ("cc", "ws", "tk")
    seed_schema = (SeedParam("tld", "choice", choices=tlds),)
    known_campaigns = ()
    default_count = 60

    def _generate(self, seeds, day, count):
        rng = random.SystemRandom()
        alphabet = LETTERS + DIGITS
        return [
            "".join(rng.choice(alphabet) for _ in range(rng.randint(self.min_len, self.max_len)))
            + "."
            + seeds["tld"]
            for _ in range(count)
        ]


FAMILIES: dict[str, DgaFamily] = {
    f.name: f for f in (PermDga(), IterDga(), LcgDga(), ModDga(), WordDga(), TicksDga())
}


def get_family(name: str) -> DgaFamily:
    try:
        return FAMILIES[name]
    except KeyError:
        raise KeyError(f"unknown family {name!r}; known: {sorted(FAMILIES)}") from None


def families(names: Sequence[str] | None = None) -> list[DgaFamily]:
    return [get_family(n) for n in (names or FAMILIES)]


BENIGN = "benign"


def family_regex(f: DgaFamily, threshold: float = 5.0):
    from sesame.regex_tools import FamilyRegex

    return FamilyRegex.from_parts(
        f.name, f.charset, f.min_len, f.max_len, f.tlds,
        deterministic=f.deterministic, threshold=threshold,
    )


def default_registry(names: Sequence[str] | None = None):
    """Zoo families in declaration order, then the benign catch-all."""
    from sesame.regex_tools import BENIGN_PATTERN, FamilyRegex, FamilyRegistry

    entries = [family_regex(f) for f in families(names)]
    entries.append(FamilyRegex(BENIGN, BENIGN_PATTERN, deterministic=True, is_benign=True))
    return FamilyRegistry(entries)
