"""From-scratch METEOR scorer (exact-match stage, classic parameters).

The variant is pinned for reproducibility: unigram exact matching,
Fmean = 10PR / (R + 9P), fragmentation penalty gamma * (chunks / m) ** beta
with gamma = 0.5 and beta = 3.  An optional built-in Porter stemming
stage keeps the scorer dependency-free.
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass

from freedet.errors import ValidationError

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

# above this many joint alignments the chunk search switches to greedy
_MAX_ALIGNMENTS = 50_000
_MAX_EXHAUSTIVE_MATCHES = 8


@dataclass(frozen=True)
class MeteorParams:
    gamma: float = 0.5
    beta: float = 3.0
    stemming: bool = False

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValidationError(f"gamma must be in [0, 1], got {self.gamma}")
        if self.beta <= 0:
            raise ValidationError(f"beta must be positive, got {self.beta}")


DEFAULT_PARAMS = MeteorParams()


def tokenize(text: str) -> list[str]:
    """Lowercase and split on whitespace/punctuation; punctuation is dropped."""
    return _TOKEN_RE.findall(text.lower())


def _chunk_count(pairs: list[tuple[int, int]]) -> int:
    pairs = sorted(pairs)
    chunks = 0
    prev = None
    for ci, ri in pairs:
        if prev is None or ci != prev[0] + 1 or ri != prev[1] + 1:
            chunks += 1
        prev = (ci, ri)
    return chunks


def _word_positions(tokens: list[str]) -> dict[str, list[int]]:
    positions: dict[str, list[int]] = {}
    for idx, tok in enumerate(tokens):
        positions.setdefault(tok, []).append(idx)
    return positions


def _greedy_alignment(
    cand: list[str], rpos: dict[str, list[int]], quota: dict[str, int]
) -> list[tuple[int, int]]:
    """In-order alignment: each candidate token takes the leftmost free
    reference occurrence while its word still has match quota."""
    remaining = {w: list(p) for w, p in rpos.items()}
    quota = dict(quota)
    pairs = []
    for ci, tok in enumerate(cand):
        if quota.get(tok, 0) > 0 and remaining.get(tok):
            pairs.append((ci, remaining[tok].pop(0)))
            quota[tok] -= 1
    return pairs


def _min_chunks(cand: list[str], ref: list[str]) -> tuple[int, int]:
    """(matches, minimal chunk count) over maximum-cardinality alignments.

    Exhaustive over all alignments when the joint option count is small;
    greedy in-order otherwise.  Labels are short noun phrases, so the
    exhaustive path dominates in practice.
    """
    cpos = _word_positions(cand)
    rpos = _word_positions(ref)
    shared = sorted(set(cpos) & set(rpos))
    quota = {w: min(len(cpos[w]), len(rpos[w])) for w in shared}
    m = sum(quota.values())
    if m == 0:
        return 0, 0

    n_options = 1
    if m <= _MAX_EXHAUSTIVE_MATCHES:
        for w in shared:
            c, r, k = len(cpos[w]), len(rpos[w]), quota[w]
            n_options *= math.comb(c, k) * math.perm(r, k)
            if n_options > _MAX_ALIGNMENTS:
                break
    if m > _MAX_EXHAUSTIVE_MATCHES or n_options > _MAX_ALIGNMENTS:
        return m, _chunk_count(_greedy_alignment(cand, rpos, quota))

    per_word_choices = []
    for w in shared:
        k = quota[w]
        choices = [
            list(zip(csub, rsel))
            for csub in itertools.combinations(cpos[w], k)
            for rsel in itertools.permutations(rpos[w], k)
        ]
        per_word_choices.append(choices)
    best = None
    for combo in itertools.product(*per_word_choices):
        pairs = [p for group in combo for p in group]
        chunks = _chunk_count(pairs)
        if best is None or chunks < best:
            best = chunks
            if best == 1:
                break
    return m, best


def meteor(candidate: str, reference: str, params: MeteorParams = DEFAULT_PARAMS) -> float:
    """METEOR similarity of a candidate phrase against one reference.

    Returns 0 when either side tokenizes to nothing or no unigram matches.
    """
    cand = tokenize(candidate)
    ref = tokenize(reference)
    if not cand or not ref:
        return 0.0
    if params.stemming:
        match_cand = [stem(t) for t in cand]
        match_ref = [stem(t) for t in ref]
    else:
        match_cand, match_ref = cand, ref
    m, chunks = _min_chunks(match_cand, match_ref)
    if m == 0:
        return 0.0
    precision = m / len(cand)
    recall = m / len(ref)
    fmean = 10.0 * precision * recall / (recall + 9.0 * precision)
    penalty = params.gamma * (chunks / m) ** params.beta
    return fmean * (1.0 - penalty)


# ---------------------------------------------------------------------------
# Porter stemmer (classic 1980 algorithm), used by the optional stemming stage.


def _is_cons(word: str, i: int) -> bool:
    ch = word[i]
    if ch in "aeiou":
        return False
    if ch == "y":
        return i == 0 or not _is_cons(word, i - 1)
    return True


def _measure(stem_part: str) -> int:
    """Number of vowel-consonant sequences in [C](VC)^m[V]."""
    forms = []
    for i in range(len(stem_part)):
        c = _is_cons(stem_part, i)
        if not forms or forms[-1] != c:
            forms.append(c)
    # drop an initial consonant run and a trailing vowel run
    if forms and forms[0]:
        forms = forms[1:]
    if forms and not forms[-1]:
        forms = forms[:-1]
    return len(forms) // 2


def _has_vowel(stem_part: str) -> bool:
    return any(not _is_cons(stem_part, i) for i in range(len(stem_part)))


def _ends_double_cons(word: str) -> bool:
    return len(word) >= 2 and word[-1] == word[-2] and _is_cons(word, len(word) - 1)


def _ends_cvc(word: str) -> bool:
    n = len(word)
    if n < 3:
        return False
    if not (_is_cons(word, n - 3) and not _is_cons(word, n - 2) and _is_cons(word, n - 1)):
        return False
    return word[-1] not in "wxy"


def _replace_suffix(word: str, suffix: str, replacement: str, min_measure: int) -> str | None:
    if not word.endswith(suffix):
        return None
    stem_part = word[: len(word) - len(suffix)]
    if _measure(stem_part) > min_measure - 1:
        return stem_part + replacement
    return word


_STEP2 = [
    ("ational", "ate"), ("tional", "tion"), ("enci", "ence"), ("anci", "ance"),
    ("izer", "ize"), ("abli", "able"), ("alli", "al"), ("entli", "ent"),
    ("eli", "e"), ("ousli", "ous"), ("ization", "ize"), ("ation", "ate"),
    ("ator", "ate"), ("alism", "al"), ("iveness", "ive"), ("fulness", "ful"),
    ("ousness", "ous"), ("aliti", "al"), ("iviti", "ive"), ("biliti", "ble"),
]

_STEP3 = [
    ("icate", "ic"), ("ative", ""), ("alize", "al"), ("iciti", "ic"),
    ("ical", "ic"), ("ful", ""), ("ness", ""),
]

_STEP4 = [
    "al", "ance", "ence", "er", "ic", "able", "ible", "ant", "ement",
    "ment", "ent", "ion", "ou", "ism", "ate", "iti", "ous", "ive", "ize",
]


def stem(word: str) -> str:
    """Porter stem of a lowercase word; words of length <= 2 pass through."""
    if len(word) <= 2:
        return word

    # step 1a
    if word.endswith("sses"):
        word = word[:-2]
    elif word.endswith("ies"):
        word = word[:-2]
    elif word.endswith("ss"):
        pass
    elif word.endswith("s"):
        word = word[:-1]

    # step 1b
    if word.endswith("eed"):
        if _measure(word[:-3]) > 0:
            word = word[:-1]
    else:
        stripped = None
        if word.endswith("ed") and _has_vowel(word[:-2]):
            stripped = word[:-2]
        elif word.endswith("ing") and _has_vowel(word[:-3]):
            stripped = word[:-3]
        if stripped is not None:
            word = stripped
            if word.endswith(("at", "bl", "iz")):
                word += "e"
            elif _ends_double_cons(word) and word[-1] not in "lsz":
                word = word[:-1]
            elif _measure(word) == 1 and _ends_cvc(word):
                word += "e"

    # step 1c
    if word.endswith("y") and _has_vowel(word[:-1]):
        word = word[:-1] + "i"

    # step 2
    for suffix, repl in _STEP2:
        out = _replace_suffix(word, suffix, repl, 1)
        if out is not None:
            word = out
            break

    # step 3
    for suffix, repl in _STEP3:
        out = _replace_suffix(word, suffix, repl, 1)
        if out is not None:
            word = out
            break

    # step 4
    for suffix in _STEP4:
        if word.endswith(suffix):
            stem_part = word[: len(word) - len(suffix)]
            if suffix == "ion" and (not stem_part or stem_part[-1] not in "st"):
                continue
            if _measure(stem_part) > 1:
                word = stem_part
            break

    # step 5a
    if word.endswith("e"):
        stem_part = word[:-1]
        m = _measure(stem_part)
        if m > 1 or (m == 1 and not _ends_cvc(stem_part)):
            word = stem_part

    # step 5b
    if _measure(word) > 1 and _ends_double_cons(word) and word.endswith("l"):
        word = word[:-1]

    return word
