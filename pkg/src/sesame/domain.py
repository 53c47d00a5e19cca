"""Domain-name parsing, validation, subdomain stripping and integer encoding."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_LEN = 59
MIN_LEN = 4

# Code 0 is padding; the alphabet maps to 1..38 in this order.
ALPHABET = "abcdefghijklmnopqrstuvwxyz0123456789-."
CHAR_TO_CODE = {ch: i + 1 for i, ch in enumerate(ALPHABET)}
CODE_TO_CHAR = {i: ch for ch, i in CHAR_TO_CODE.items()}
N_CODES = len(ALPHABET) + 1

# Characters the sandbox-log preprocessing discards outright.
INVALID_CHARS = frozenset('!"§$%&_;,<>/()=?{[]}\'#+*@|~')


class InvalidDomain(ValueError):
    """Raised by :func:`normalize`; ``reason`` is one of no-dot, bad-char, too-short."""

    def __init__(self, raw: str, reason: str, detail: str = ""):
        self.raw = raw
        self.reason = reason
        self.detail = detail
        msg = f"{raw!r}: {reason}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class UnknownCharacter(ValueError):
    pass


@dataclass(frozen=True)
class DomainName:
    raw: str
    normalized: str

    @property
    def labels(self) -> list[str]:
        return self.normalized.split(".")

    @property
    def tld(self) -> str:
        return self.normalized.rsplit(".", 1)[1]

    @property
    def sld(self) -> str:
        return self.labels[-2]

    @property
    def truncated(self) -> bool:
        return len(self.normalized) > MAX_LEN

    def __str__(self) -> str:
        return self.normalized


@dataclass(frozen=True)
class EncodedDomain:
    codes: tuple[int, ...]
    length: int

    def as_array(self) -> np.ndarray:
        return np.asarray(self.codes, dtype=np.int8)


def normalize(raw: str) -> DomainName:
    text = raw.strip().lower()
    for ch in text:
        if ch in INVALID_CHARS or ch.isspace():
            raise InvalidDomain(raw, "bad-char", repr(ch))
    # anything else outside the encoding alphabet (IDN, control chars, ...)
    for ch in text:
        if ch not in CHAR_TO_CODE:
            raise InvalidDomain(raw, "bad-char", repr(ch))
    if "." not in text:
        if len(text) < MIN_LEN:
            raise InvalidDomain(raw, "too-short")
        raise InvalidDomain(raw, "no-dot")
    if len(text) < MIN_LEN:
        raise InvalidDomain(raw, "too-short")
    if any(label == "" for label in text.split(".")):
        # empty labels cannot be stripped to sld.tld
        raise InvalidDomain(raw, "no-dot", "empty label")
    return DomainName(raw=raw, normalized=text)


def strip_subdomains(d: DomainName) -> DomainName:
    labels = d.labels
    if len(labels) <= 2:
        return d
    return DomainName(raw=d.raw, normalized=".".join(labels[-2:]))


def prepare(raw: str) -> DomainName:
    """normalize + strip_subdomains: the form used for classification and lookups."""
    return strip_subdomains(normalize(raw))


def encode(d: DomainName | str) -> EncodedDomain:
    text = d.normalized if isinstance(d, DomainName) else d
    text = text[:MAX_LEN]
    try:
        codes = [CHAR_TO_CODE[ch] for ch in text]
    except KeyError as exc:
        raise UnknownCharacter(str(exc)) from None
    length = len(codes)
    codes.extend([0] * (MAX_LEN - length))
    return EncodedDomain(codes=tuple(codes), length=length)


def decode(e: EncodedDomain) -> str:
    return "".join(CODE_TO_CHAR[c] for c in e.codes[: e.length])
