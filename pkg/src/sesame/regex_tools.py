"""Family regexes, the RegEx-Matcher reselection rule and per-sample regex extraction.

Canonical pattern format: ``[charclass]{min,max}\\.(tld1|tld2)$`` matched
from the start of the stripped domain (``sld.tld``).
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from sesame.domain import DomainName

BENIGN_PATTERN = r"[-.0-9a-z]+\.[-0-9a-z]+$"

_CANON_RE = re.compile(r"^\[(?P<cls>[^\]]+)\]\{(?P<min>\d+)(?:,(?P<max>\d+))?\}\\\.\((?P<tlds>[^)]*)\)\$$")


class EmptyInput(ValueError):
    pass


def compact_charclass(chars: Iterable[str]) -> str:
    """Collapse a character set to ranges in codepoint order; ``-`` goes first as ``\\-``."""
    chars = set(chars)
    out = []
    if "-" in chars:
        out.append(r"\-")
        chars.discard("-")
    cps = sorted(ord(c) for c in chars)
    i = 0
    while i < len(cps):
        j = i
        while j + 1 < len(cps) and cps[j + 1] == cps[j] + 1:
            j += 1
        if j > i:
            out.append(f"{re.escape(chr(cps[i]))}-{re.escape(chr(cps[j]))}")
        else:
            out.append(re.escape(chr(cps[i])))
        i = j + 1
    return "".join(out)


def expand_charclass(cls: str) -> frozenset[str]:
    """Inverse of :func:`compact_charclass` for the subset of syntax it emits."""
    chars: set[str] = set()
    tokens = []
    i = 0
    while i < len(cls):
        if cls[i] == "\\" and i + 1 < len(cls):
            tokens.append(cls[i + 1])
            i += 2
        else:
            tokens.append(None if cls[i] == "-" else cls[i])
            i += 1
    # None marks a range dash
    k = 0
    while k < len(tokens):
        if k + 2 < len(tokens) and tokens[k + 1] is None and tokens[k] is not None:
            lo, hi = ord(tokens[k]), ord(tokens[k + 2])
            chars.update(chr(c) for c in range(lo, hi + 1))
            k += 3
        else:
            chars.add("-" if tokens[k] is None else tokens[k])
            k += 1
    return frozenset(chars)


def render(charset: Iterable[str], min_len: int, max_len: int, tlds: Iterable[str]) -> str:
    quant = f"{{{min_len}}}" if min_len == max_len else f"{{{min_len},{max_len}}}"
    tld_part = "|".join(re.escape(t) for t in sorted(tlds))
    return f"[{compact_charclass(charset)}]{quant}\\.({tld_part})$"


@dataclass(frozen=True)
class ExtractedRegex:
    charclass: frozenset[str]
    min_len: int
    max_len: int
    tlds: tuple[str, ...]
    dropped: int = 0

    @property
    def pattern(self) -> str:
        return render(self.charclass, self.min_len, self.max_len, self.tlds)

    def matches(self, d: DomainName | str) -> bool:
        text = d.normalized if isinstance(d, DomainName) else d
        return re.match(self.pattern, text) is not None

    def __str__(self) -> str:
        return self.pattern


@dataclass(frozen=True)
class FamilyRegex:
    """A family's registered pattern; structured fields are None for the catch-all."""

    family: str
    pattern: str
    deterministic: bool = True
    threshold: float = 5.0
    is_benign: bool = False
    charset: frozenset[str] | None = None
    min_len: int | None = None
    max_len: int | None = None
    tlds: tuple[str, ...] | None = None
    _compiled: re.Pattern = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_compiled", re.compile(self.pattern))

    @classmethod
    def from_parts(cls, family, charset, min_len, max_len, tlds, **kw) -> "FamilyRegex":
        return cls(
            family=family,
            pattern=render(charset, min_len, max_len, tlds),
            charset=frozenset(charset),
            min_len=min_len,
            max_len=max_len,
            tlds=tuple(sorted(tlds)),
            **kw,
        )

    @classmethod
    def parse(cls, family: str, pattern: str, **kw) -> "FamilyRegex":
        m = _CANON_RE.match(pattern)
        if m is None:
            return cls(family=family, pattern=pattern, **kw)
        lo = int(m["min"])
        hi = int(m["max"]) if m["max"] else lo
        tlds = tuple(sorted(t.replace("\\", "") for t in m["tlds"].split("|")))
        return cls(
            family=family,
            pattern=pattern,
            charset=expand_charclass(m["cls"]),
            min_len=lo,
            max_len=hi,
            tlds=tlds,
            **kw,
        )

    def matches(self, d: DomainName | str) -> bool:
        text = d.normalized if isinstance(d, DomainName) else d
        return self._compiled.match(text) is not None


class FamilyRegistry:
    """Ordered label registry; list position is the label index used for tie-breaking."""

    def __init__(self, entries: Sequence[FamilyRegex]):
        self.entries = list(entries)
        names = [e.family for e in self.entries]
        if len(set(names)) != len(names):
            raise ValueError("duplicate family names in registry")
        if sum(e.is_benign for e in self.entries) != 1:
            raise ValueError("registry needs exactly one benign label")
        self.index = {n: i for i, n in enumerate(names)}

    @property
    def names(self) -> list[str]:
        return [e.family for e in self.entries]

    @property
    def benign(self) -> FamilyRegex:
        return next(e for e in self.entries if e.is_benign)

    def __getitem__(self, name: str) -> FamilyRegex:
        return self.entries[self.index[name]]

    def __contains__(self, name: str) -> bool:
        return name in self.index

    def __len__(self) -> int:
        return len(self.entries)

    def dumps(self) -> str:
        lines = ["# family\tdeterministic\tthreshold\tpattern"]
        for e in self.entries:
            lines.append(f"{e.family}\t{int(e.deterministic)}\t{e.threshold:.2f}\t{e.pattern}")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str, benign_name: str = "benign") -> "FamilyRegistry":
        entries = []
        for line in text.splitlines():
            if not line.strip() or line.startswith("#"):
                continue
            family, det, thr, pattern = line.split("\t")
            entries.append(
                FamilyRegex.parse(
                    family,
                    pattern,
                    deterministic=det == "1",
                    threshold=float(thr),
                    is_benign=family == benign_name,
                )
            )
        return cls(entries)


def matcher_pick(
    probs: np.ndarray,
    d: DomainName | str,
    registry: FamilyRegistry,
    discarded: frozenset[str] | set[str] = frozenset(),
) -> tuple[str, bool, frozenset[str]]:
    """Highest-probability family, not yet discarded, whose regex matches ``d``.

    Every higher-ranked family that is skipped because its regex does not
    match is added to the returned discard set. Ties rank the lower label
    index first. Falls back to the benign label.
    """
    probs = np.asarray(probs, dtype=float)
    # stable sort on -p keeps lower indices first among equal probabilities
    order = np.argsort(-probs, kind="stable")
    raw_top = registry.entries[int(order[0])].family
    new_discards = set(discarded)
    picked = registry.benign.family
    for idx in order:
        entry = registry.entries[int(idx)]
        if entry.family in new_discards:
            continue
        if entry.matches(d):
            picked = entry.family
            break
        if not entry.is_benign:
            new_discards.add(entry.family)
    return picked, picked != raw_top, frozenset(new_discards)


def length_filter(slds: Sequence[str], min_fraction: float = 0.05) -> list[bool]:
    """Keep-mask: drop SLDs whose length is rarer than ``min_fraction`` of the modal length count."""
    counts = Counter(len(s) for s in slds)
    if not counts:
        return []
    modal = max(counts.values())
    return [counts[len(s)] >= min_fraction * modal for s in slds]


def extract_regex(domains: Sequence[DomainName], min_fraction: float = 0.05) -> ExtractedRegex:
    slds = [d.sld for d in domains]
    keep = length_filter(slds, min_fraction)
    survivors = [d for d, k in zip(domains, keep) if k]
    if not survivors:
        raise EmptyInput("no domains to extract a regex from")
    chars = set()
    for d in survivors:
        chars.update(d.sld)
    lens = [len(d.sld) for d in survivors]
    return ExtractedRegex(
        charclass=frozenset(chars),
        min_len=min(lens),
        max_len=max(lens),
        tlds=tuple(sorted({d.tld for d in survivors})),
        dropped=len(domains) - len(survivors),
    )


def regex_agreement(extracted: ExtractedRegex, family_rx: FamilyRegex) -> dict[str, bool]:
    if family_rx.charset is None:
        # catch-all pattern: everything is within it
        return {"charclass_subset": True, "length_within": True, "tlds_subset": True}
    return {
        "charclass_subset": extracted.charclass <= family_rx.charset,
        "length_within": family_rx.min_len <= extracted.min_len and extracted.max_len <= family_rx.max_len,
        "tlds_subset": set(extracted.tlds) <= set(family_rx.tlds),
    }
