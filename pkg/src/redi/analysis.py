"""Text analysis: tokenization, stopword removal, Porter stemming.

The analyzer is a pure function of (text, config): identical inputs always
produce identical token sequences.  Pipeline order is fixed:
lowercase -> ascii fold -> stopword removal -> stemming.
"""

from __future__ import annotations

import re
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources

# Maximal runs of Unicode letters/digits (word chars minus underscore).
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

_VOWELS = "aeiou"


class PorterStemmer:
    """The classical Porter (1980) suffix-stripping algorithm.

    Operates on lowercase words; input is lowercased defensively.  Words of
    length <= 2 are returned unchanged.
    """

    def stem(self, word: str) -> str:
        word = word.lower()
        if len(word) <= 2:
            return word
        word = self._step1a(word)
        word = self._step1b(word)
        word = self._step1c(word)
        word = self._step2(word)
        word = self._step3(word)
        word = self._step4(word)
        word = self._step5a(word)
        word = self._step5b(word)
        return word

    # -- character classes -------------------------------------------------

    def _is_consonant(self, word: str, i: int) -> bool:
        c = word[i]
        if c in _VOWELS:
            return False
        if c == "y":
            return i == 0 or not self._is_consonant(word, i - 1)
        return True

    def _measure(self, stem: str) -> int:
        """Number of VC sequences in the [C](VC)^m[V] form of the stem."""
        m = 0
        prev_cons = None
        for i in range(len(stem)):
            cons = self._is_consonant(stem, i)
            if cons and prev_cons is False:
                m += 1
            prev_cons = cons
        return m

    def _contains_vowel(self, stem: str) -> bool:
        return any(not self._is_consonant(stem, i) for i in range(len(stem)))

    def _ends_double_consonant(self, word: str) -> bool:
        return (
            len(word) >= 2
            and word[-1] == word[-2]
            and self._is_consonant(word, len(word) - 1)
        )

    def _ends_cvc(self, word: str) -> bool:
        if len(word) < 3:
            return False
        return (
            self._is_consonant(word, len(word) - 3)
            and not self._is_consonant(word, len(word) - 2)
            and self._is_consonant(word, len(word) - 1)
            and word[-1] not in "wxy"
        )

    # -- steps ---------------------------------------------------------------

    def _step1a(self, word: str) -> str:
        if word.endswith("sses"):
            return word[:-2]
        if word.endswith("ies"):
            return word[:-2]
        if word.endswith("ss"):
            return word
        if word.endswith("s"):
            return word[:-1]
        return word

    def _step1b(self, word: str) -> str:
        if word.endswith("eed"):
            if self._measure(word[:-3]) > 0:
                return word[:-1]
            return word
        removed = False
        if word.endswith("ed") and self._contains_vowel(word[:-2]):
            word = word[:-2]
            removed = True
        elif word.endswith("ing") and self._contains_vowel(word[:-3]):
            word = word[:-3]
            removed = True
        if not removed:
            return word
        if word.endswith(("at", "bl", "iz")):
            return word + "e"
        if self._ends_double_consonant(word) and word[-1] not in "lsz":
            return word[:-1]
        if self._measure(word) == 1 and self._ends_cvc(word):
            return word + "e"
        return word

    def _step1c(self, word: str) -> str:
        if word.endswith("y") and self._contains_vowel(word[:-1]):
            return word[:-1] + "i"
        return word

    _STEP2_RULES = (
        ("ational", "ate"),
        ("ization", "ize"),
        ("iveness", "ive"),
        ("fulness", "ful"),
        ("ousness", "ous"),
        ("tional", "tion"),
        ("biliti", "ble"),
        ("ation", "ate"),
        ("alism", "al"),
        ("aliti", "al"),
        ("iviti", "ive"),
        ("enci", "ence"),
        ("anci", "ance"),
        ("izer", "ize"),
        ("abli", "able"),
        ("alli", "al"),
        ("entli", "ent"),
        ("ousli", "ous"),
        ("ator", "ate"),
        ("eli", "e"),
    )

    _STEP3_RULES = (
        ("icate", "ic"),
        ("ative", ""),
        ("alize", "al"),
        ("iciti", "ic"),
        ("ical", "ic"),
        ("ful", ""),
        ("ness", ""),
    )

    _STEP4_SUFFIXES = (
        "ement", "ance", "ence", "able", "ible", "ment",
        "ant", "ent", "ion", "ism", "ate", "iti", "ous", "ive", "ize",
        "al", "er", "ic", "ou",
    )

    def _longest_suffix(self, word, suffixes):
        best = None
        for s in suffixes:
            if word.endswith(s) and (best is None or len(s) > len(best)):
                best = s
        return best

    def _step2(self, word: str) -> str:
        match = self._longest_suffix(word, [s for s, _ in self._STEP2_RULES])
        if match is None:
            return word
        repl = dict(self._STEP2_RULES)[match]
        stem = word[: -len(match)]
        if self._measure(stem) > 0:
            return stem + repl
        return word

    def _step3(self, word: str) -> str:
        match = self._longest_suffix(word, [s for s, _ in self._STEP3_RULES])
        if match is None:
            return word
        repl = dict(self._STEP3_RULES)[match]
        stem = word[: -len(match)]
        if self._measure(stem) > 0:
            return stem + repl
        return word

    def _step4(self, word: str) -> str:
        match = self._longest_suffix(word, self._STEP4_SUFFIXES)
        if match is None:
            return word
        stem = word[: -len(match)]
        if self._measure(stem) <= 1:
            return word
        if match == "ion" and not stem.endswith(("s", "t")):
            return word
        return stem

    def _step5a(self, word: str) -> str:
        if not word.endswith("e"):
            return word
        stem = word[:-1]
        m = self._measure(stem)
        if m > 1:
            return stem
        if m == 1 and not self._ends_cvc(stem):
            return stem
        return word

    def _step5b(self, word: str) -> str:
        if (
            self._measure(word) > 1
            and self._ends_double_consonant(word)
            and word.endswith("l")
        ):
            return word[:-1]
        return word


_PORTER = PorterStemmer()


def load_default_stopwords() -> frozenset[str]:
    """Bundled English stopword list (the Lucene EnglishAnalyzer default set)."""
    text = resources.files("redi.data").joinpath("stopwords_en.txt").read_text("utf-8")
    return frozenset(_parse_stopword_text(text))


def read_stopword_file(path) -> frozenset[str]:
    """Read a stopword list: one term per line, UTF-8, blank lines ignored."""
    with open(path, encoding="utf-8") as fh:
        return frozenset(_parse_stopword_text(fh.read()))


def _parse_stopword_text(text: str):
    return [line.strip() for line in text.splitlines() if line.strip()]


@dataclass(frozen=True)
class AnalyzerConfig:
    """Analysis settings shared by documents and retrieval-unit text."""

    lowercase: bool = True
    fold_ascii: bool = False
    stopwords: frozenset[str] = field(default_factory=load_default_stopwords)
    stemmer: str = "porter"  # "none" or "porter"

    def __post_init__(self):
        if self.stemmer not in ("none", "porter"):
            raise ValueError(f"unknown stemmer: {self.stemmer!r}")
        object.__setattr__(self, "stopwords", frozenset(self.stopwords))

    def to_dict(self) -> dict:
        return {
            "lowercase": self.lowercase,
            "fold_ascii": self.fold_ascii,
            "stopwords": sorted(self.stopwords),
            "stemmer": self.stemmer,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AnalyzerConfig":
        return cls(
            lowercase=d["lowercase"],
            fold_ascii=d["fold_ascii"],
            stopwords=frozenset(d["stopwords"]),
            stemmer=d["stemmer"],
        )


@dataclass(frozen=True)
class TokenSeq:
    """Analyzed token list plus its term-frequency map."""

    tokens: tuple[str, ...]
    tf: dict[str, int]

    def __len__(self) -> int:
        return len(self.tokens)

    @classmethod
    def from_tokens(cls, tokens) -> "TokenSeq":
        tokens = tuple(tokens)
        return cls(tokens=tokens, tf=dict(Counter(tokens)))


def _fold_ascii(token: str) -> str:
    decomposed = unicodedata.normalize("NFKD", token)
    return decomposed.encode("ascii", "ignore").decode("ascii")


def analyze(text: str, config: AnalyzerConfig) -> TokenSeq:
    """Tokenize and normalize text per config.

    Tokens are maximal alphanumeric runs; transforms apply in pipeline
    order.  Empty input yields an empty TokenSeq.
    """
    out = []
    for token in _TOKEN_RE.findall(text):
        if config.lowercase:
            token = token.lower()
        if config.fold_ascii:
            token = _fold_ascii(token)
            if not token:
                continue
        if token in config.stopwords:
            continue
        if config.stemmer == "porter":
            token = _PORTER.stem(token)
        out.append(token)
    return TokenSeq.from_tokens(out)
