"""Porter suffix-stripping stemmer, original 1980 rule set.

This is the original algorithm, not Porter2/Snowball and not the later
C reference release (which changed ``abli -> able`` to ``bli -> ble`` and
added ``logi -> log``). Within each step only the longest matching suffix
is considered; if its condition fails the step does nothing.
"""
from functools import lru_cache
import re

__all__ = ["porter_stem", "measure"]

_ALPHA = re.compile(r"^[a-z]+$")
_VOWELS = frozenset("aeiou")


def _is_consonant(word: str, i: int) -> bool:
    ch = word[i]
    if ch in _VOWELS:
        return False
    if ch == "y":
        return i == 0 or not _is_consonant(word, i - 1)
    return True


def measure(stem: str) -> int:
    """Number of VC sequences in ``[C](VC){m}[V]``."""
    m = 0
    prev_vowel = False
    for i in range(len(stem)):
        vowel = not _is_consonant(stem, i)
        if prev_vowel and not vowel:
            m += 1
        prev_vowel = vowel
    return m


def _has_vowel(stem: str) -> bool:
    return any(not _is_consonant(stem, i) for i in range(len(stem)))


def _double_consonant(stem: str) -> bool:
    return (
        len(stem) >= 2
        and stem[-1] == stem[-2]
        and _is_consonant(stem, len(stem) - 1)
    )


def _cvc(stem: str) -> bool:
    if len(stem) < 3:
        return False
    n = len(stem)
    return (
        _is_consonant(stem, n - 3)
        and not _is_consonant(stem, n - 2)
        and _is_consonant(stem, n - 1)
        and stem[-1] not in "wxy"
    )


def _m_gt(k):
    return lambda stem: measure(stem) > k


def _ion_condition(stem: str) -> bool:
    return measure(stem) > 1 and stem[-1:] in ("s", "t")


def _always(stem: str) -> bool:
    return True


def _apply_longest(word: str, rules) -> tuple[str, bool]:
    # rules are pre-sorted by suffix length, longest first
    for suffix, replacement, cond in rules:
        if word.endswith(suffix):
            stem = word[: len(word) - len(suffix)]
            if cond(stem):
                return stem + replacement, True
            return word, False
    return word, False


def _table(rows, cond):
    rules = [(s, r, cond) for s, r in rows]
    return sorted(rules, key=lambda rule: -len(rule[0]))


_STEP1A = _table([("sses", "ss"), ("ies", "i"), ("ss", "ss"), ("s", "")], _always)

_STEP2 = _table(
    [
        ("ational", "ate"), ("tional", "tion"), ("enci", "ence"), ("anci", "ance"),
        ("izer", "ize"), ("abli", "able"), ("alli", "al"), ("entli", "ent"),
        ("eli", "e"), ("ousli", "ous"), ("ization", "ize"), ("ation", "ate"),
        ("ator", "ate"), ("alism", "al"), ("iveness", "ive"), ("fulness", "ful"),
        ("ousness", "ous"), ("aliti", "al"), ("iviti", "ive"), ("biliti", "ble"),
    ],
    _m_gt(0),
)

_STEP3 = _table(
    [
        ("icate", "ic"), ("ative", ""), ("alize", "al"), ("iciti", "ic"),
        ("ical", "ic"), ("ful", ""), ("ness", ""),
    ],
    _m_gt(0),
)

_STEP4 = sorted(
    [
        (s, "", _ion_condition if s == "ion" else _m_gt(1))
        for s in (
            "al", "ance", "ence", "er", "ic", "able", "ible", "ant", "ement",
            "ment", "ent", "ion", "ou", "ism", "ate", "iti", "ous", "ive", "ize",
        )
    ],
    key=lambda rule: -len(rule[0]),
)


def _step1b(word: str) -> str:
    if word.endswith("eed"):
        stem = word[:-3]
        return stem + "ee" if measure(stem) > 0 else word
    for suffix in ("ed", "ing"):
        if word.endswith(suffix):
            stem = word[: -len(suffix)]
            if not _has_vowel(stem):
                return word
            return _step1b_tidy(stem)
    return word


def _step1b_tidy(stem: str) -> str:
    if stem.endswith(("at", "bl", "iz")):
        return stem + "e"
    if _double_consonant(stem) and stem[-1] not in "lsz":
        return stem[:-1]
    if measure(stem) == 1 and _cvc(stem):
        return stem + "e"
    return stem


def _step1c(word: str) -> str:
    if word.endswith("y") and _has_vowel(word[:-1]):
        return word[:-1] + "i"
    return word


def _step5(word: str) -> str:
    if word.endswith("e"):
        stem = word[:-1]
        m = measure(stem)
        if m > 1 or (m == 1 and not _cvc(stem)):
            word = stem
    if measure(word) > 1 and _double_consonant(word) and word.endswith("l"):
        word = word[:-1]
    return word


@lru_cache(maxsize=65536)
def porter_stem(word: str) -> str:
    """Stem a lowercase alphabetic word.

    >>> porter_stem("jumps"), porter_stem("lazy"), porter_stem("running")
    ('jump', 'lazi', 'run')
    """
    if not isinstance(word, str) or not _ALPHA.match(word):
        raise ValueError(f"porter_stem expects a lowercase alphabetic word, got {word!r}")
    word, _ = _apply_longest(word, _STEP1A)
    word = _step1b(word)
    word = _step1c(word)
    word, _ = _apply_longest(word, _STEP2)
    word, _ = _apply_longest(word, _STEP3)
    word, _ = _apply_longest(word, _STEP4)
    return _step5(word)
