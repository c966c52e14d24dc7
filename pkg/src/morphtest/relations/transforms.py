"""Function-based input transformations.

Every transformation has the signature ``fn(text, seed) -> str`` and is a pure
function of its arguments. New ones are added with :func:`register_transform`.
"""

from __future__ import annotations

import hashlib
import json
import random
import re
from functools import lru_cache
from importlib import resources
from typing import Callable

Transform = Callable[[str, int], str]

TRANSFORMS: dict[str, Transform] = {}

SPACE_RATE = 0.15
TYPO_RATE = 0.1
SYNONYM_RATE = 0.5

_WORD = re.compile(r"[A-Za-z]+")
_SENTENCE_SPLIT = re.compile(r"(?<=[.!?])\s+")
_TERMINAL = (".", "!", "?", '"', "'")


def register_transform(function_id: str) -> Callable[[Transform], Transform]:
    def deco(fn: Transform) -> Transform:
        TRANSFORMS[function_id] = fn
        return fn
    return deco


def derive_seed(*parts) -> int:
    """Stable unsigned 64-bit seed from arbitrary parts (independent of PYTHONHASHSEED)."""
    blob = "\x1f".join(str(p) for p in parts).encode("utf-8")
    return int.from_bytes(hashlib.blake2b(blob, digest_size=8).digest(), "big")


@lru_cache(maxsize=None)
def _bundled(name: str):
    return json.loads((resources.files("morphtest") / "data" / name).read_text(encoding="utf-8"))


def sentence_pool() -> tuple[str, ...]:
    return tuple(_bundled("sentences.json"))


def thesaurus() -> dict[str, list[str]]:
    return _bundled("thesaurus.json")


def _space_positions(text: str) -> list[int]:
    inner = [i for i in range(1, len(text))
             if not text[i - 1].isspace() and not text[i].isspace()]
    return inner or list(range(len(text) + 1))


@register_transform("insert_random_spaces")
def insert_random_spaces(text: str, seed: int, rate: float = SPACE_RATE) -> str:
    """Insert spaces at seeded positions, preferably inside words.

    Only spaces are added, so stripping whitespace from the result gives the
    same string as stripping it from the input. Non-empty input always gets at
    least one space.
    """
    if not text:
        return text
    candidates = _space_positions(text)
    k = max(1, round(rate * len(candidates)))
    chosen = sorted(random.Random(seed).sample(candidates, k))
    out, prev = [], 0
    for pos in chosen:
        out.append(text[prev:pos])
        out.append(" ")
        prev = pos
    out.append(text[prev:])
    return "".join(out)


def concat_separator(text: str) -> str:
    if not text or text[-1].isspace():
        return ""
    if text.endswith(_TERMINAL):
        return " "
    return ". "


@register_transform("concat_random_sentence")
def concat_random_sentence(text: str, seed: int) -> str:
    pool = sentence_pool()
    sentence = pool[random.Random(seed).randrange(len(pool))]
    return text + concat_separator(text) + sentence


# The transforms below are invented additions to the catalog, not taken from
# the published MR list.

@register_transform("to_uppercase")
def to_uppercase(text: str, seed: int) -> str:
    return text.upper()


def _match_case(word: str, replacement: str) -> str:
    if word.isupper() and len(word) > 1:
        return replacement.upper()
    if word[0].isupper():
        return replacement[0].upper() + replacement[1:]
    return replacement


@register_transform("substitute_synonyms")
def substitute_synonyms(text: str, seed: int, rate: float = SYNONYM_RATE) -> str:
    """Replace a seeded subset of thesaurus words with a synonym."""
    table = thesaurus()
    spots = [m for m in _WORD.finditer(text) if m.group(0).lower() in table]
    if not spots:
        return text
    rng = random.Random(seed)
    k = max(1, round(rate * len(spots)))
    picked = sorted(rng.sample(range(len(spots)), k))
    out, prev = [], 0
    for i in picked:
        m = spots[i]
        word = m.group(0)
        out.append(text[prev:m.start()])
        out.append(_match_case(word, rng.choice(table[word.lower()])))
        prev = m.end()
    out.append(text[prev:])
    return "".join(out)


@register_transform("inject_typos")
def inject_typos(text: str, seed: int, rate: float = TYPO_RATE) -> str:
    """Swap pairs of adjacent, distinct letters inside words."""
    candidates = [i for i in range(len(text) - 1)
                  if text[i].isalpha() and text[i + 1].isalpha() and text[i] != text[i + 1]]
    if not candidates:
        return text
    rng = random.Random(seed)
    n_words = max(1, len(_WORD.findall(text)))
    k = max(1, round(rate * n_words))
    rng.shuffle(candidates)
    chosen: list[int] = []
    for i in candidates:
        if len(chosen) == k:
            break
        if all(abs(i - j) > 1 for j in chosen):
            chosen.append(i)
    chars = list(text)
    for i in chosen:
        chars[i], chars[i + 1] = chars[i + 1], chars[i]
    return "".join(chars)


@register_transform("append_exclamation")
def append_exclamation(text: str, seed: int) -> str:
    body = text.rstrip()
    if not body:
        return text
    if body.endswith("."):
        body = body[:-1]
    return body + "!"


def split_sentences(text: str) -> list[str]:
    return [s for s in _SENTENCE_SPLIT.split(text.strip()) if s]


@register_transform("shuffle_sentences")
def shuffle_sentences(text: str, seed: int) -> str:
    """Reorder sentences with a seeded permutation other than the identity."""
    sentences = split_sentences(text)
    # an unterminated tail would fuse with whatever follows it, so it stays last
    tail = sentences.pop() if sentences and not sentences[-1].endswith((".", "!", "?")) else None
    if len(set(sentences)) < 2:
        return text
    rng = random.Random(seed)
    order = list(range(len(sentences)))
    while order == sorted(order):
        rng.shuffle(order)
    return " ".join([*(sentences[i] for i in order), *([tail] if tail else [])])
