"""
Distortion model: classifies a (source character, candidate character) pair
into one of five similarity types and scores it with a fixed probability table.
"""

import logging
import math
import os
import threading
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

import Levenshtein
from dotenv import load_dotenv

from exceptions import ResourceError, SliceLengthMismatch
from models import DISTORTION_PRECEDENCE, DistortionType, Token

# Load environment variables
load_dotenv()

logger = logging.getLogger(__name__)

RESOURCE_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'resources')

DEFAULT_TYPE_PROBABILITIES: Dict[DistortionType, float] = {
    DistortionType.IDENTICAL: 0.962,
    DistortionType.SAME_PINYIN: 0.023,
    DistortionType.SIMILAR_PINYIN: 0.008,
    DistortionType.SIMILAR_SHAPE: 0.004,
    DistortionType.UNRELATED: 0.003
}


class DistortionTable:
    """Probability of each distortion type; every entry lies in (0, 1]"""

    def __init__(self, probabilities: Optional[Mapping[DistortionType, float]] = None):
        probabilities = dict(DEFAULT_TYPE_PROBABILITIES if probabilities is None else probabilities)
        missing = [t.value for t in DistortionType if t not in probabilities]
        if missing:
            raise ValueError(f"Distortion table is missing types: {', '.join(missing)}")
        for distortion_type, probability in probabilities.items():
            if not 0.0 < probability <= 1.0:
                raise ValueError(f"Probability of {distortion_type.value} must lie in (0, 1], got {probability}")
        self.probabilities = probabilities
        self._log_probabilities = {t: math.log(p) for t, p in probabilities.items()}

    @classmethod
    def from_string(cls, spec: str) -> 'DistortionTable':
        """Parse 'p_identical,p_same_pinyin,p_similar_pinyin,p_similar_shape,p_unrelated'"""
        parts = [part.strip() for part in spec.split(',') if part.strip()]
        if len(parts) != len(DISTORTION_PRECEDENCE):
            raise ValueError(f"Expected {len(DISTORTION_PRECEDENCE)} comma-separated probabilities, got '{spec}'")
        return cls(dict(zip(DISTORTION_PRECEDENCE, (float(part) for part in parts))))

    def probability(self, distortion_type: DistortionType) -> float:
        return self.probabilities[distortion_type]

    def log_probability(self, distortion_type: DistortionType) -> float:
        return self._log_probabilities[distortion_type]

    def error_type_weights(self) -> Dict[DistortionType, float]:
        """Probabilities of the non-identical types, used by the corruption sampler"""
        return {t: self.probabilities[t] for t in DISTORTION_PRECEDENCE[1:]}

    def to_dict(self) -> Dict[str, float]:
        return {t.value: self.probabilities[t] for t in DISTORTION_PRECEDENCE}


class SimilarityResources:
    """
    Pinyin readings, shape-similar sets and fuzzy syllable pairs backing
    the pair classifier. Immutable after construction apart from internal
    memo caches.
    """

    def __init__(self,
                 pinyin: Optional[Mapping[str, Iterable[str]]] = None,
                 shape_sets: Optional[Mapping[str, Iterable[str]]] = None,
                 fuzzy_pairs: Optional[Iterable[Tuple[str, str]]] = None):
        self.pinyin: Dict[str, FrozenSet[str]] = {
            char: frozenset(syllable.lower() for syllable in syllables)
            for char, syllables in (pinyin or {}).items()
        }

        # symmetric closure of the shape relation
        closure: Dict[str, set] = {}
        for char, similar in (shape_sets or {}).items():
            for other in similar:
                if other == char:
                    continue
                closure.setdefault(char, set()).add(other)
                closure.setdefault(other, set()).add(char)
        self.shape_sets: Dict[str, FrozenSet[str]] = {char: frozenset(chars) for char, chars in closure.items()}

        pairs = set()
        for a, b in (fuzzy_pairs or ()):
            if a != b:
                pairs.add((a, b))
                pairs.add((b, a))
        self.fuzzy_pairs: FrozenSet[Tuple[str, str]] = frozenset(pairs)

        self.alphabet: Tuple[str, ...] = tuple(sorted(set(self.pinyin) | set(self.shape_sets)))

        self._syllable_cache: Dict[Tuple[str, str], bool] = {}
        self._relation_cache: Dict[Tuple[str, DistortionType], Tuple[str, ...]] = {}
        self._confusion_cache: Dict[str, Tuple[str, ...]] = {}
        self._lock = threading.Lock()

    @classmethod
    def empty(cls) -> 'SimilarityResources':
        return cls()

    def syllables(self, char: str) -> FrozenSet[str]:
        return self.pinyin.get(char, frozenset())

    def similar_syllables(self, first: str, second: str) -> bool:
        """Toneless syllables one edit apart or related by a fuzzy initial/final pair"""
        key = (first, second)
        cached = self._syllable_cache.get(key)
        if cached is None:
            cached = first != second and (
                Levenshtein.distance(first, second) == 1 or self._fuzzy_related(first, second)
            )
            self._syllable_cache[key] = cached
        return cached

    def _fuzzy_related(self, first: str, second: str) -> bool:
        for a, b in self.fuzzy_pairs:
            if first.startswith(a) and second == b + first[len(a):]:
                return True
            if first.endswith(a) and second == first[:len(first) - len(a)] + b:
                return True
        return False

    def summary(self) -> Dict[str, int]:
        return {
            'pinyin_entries': len(self.pinyin),
            'shape_entries': len(self.shape_sets),
            'fuzzy_pairs': len(self.fuzzy_pairs) // 2,
            'alphabet_size': len(self.alphabet)
        }


def classify_pair(a: str, b: str, res: SimilarityResources) -> DistortionType:
    """
    Similarity type of the pair (a, b).

    Precedence: Identical > SamePinyin > SimilarPinyin > SimilarShape > Unrelated.
    Characters unknown to every resource are Unrelated unless equal.
    """
    if a == b:
        return DistortionType.IDENTICAL

    syllables_a = res.syllables(a)
    syllables_b = res.syllables(b)
    if syllables_a and syllables_b:
        if syllables_a & syllables_b:
            return DistortionType.SAME_PINYIN
        for first in syllables_a:
            for second in syllables_b:
                if res.similar_syllables(first, second):
                    return DistortionType.SIMILAR_PINYIN

    if b in res.shape_sets.get(a, ()):
        return DistortionType.SIMILAR_SHAPE
    return DistortionType.UNRELATED


def distortion_logprob(a: str, b: str, table: DistortionTable, res: SimilarityResources) -> float:
    """ln p_DM(a | b) = ln table[type(a, b)]"""
    return table.log_probability(classify_pair(a, b, res))


def token_distortion_logprob(source_slice: Sequence[str], token: Token,
                             table: DistortionTable, res: SimilarityResources) -> float:
    """
    Log-probability of the source characters under a candidate token:
    the sum of per-character distortion log-probabilities.

    Raises:
        SliceLengthMismatch: the slice does not have the token's length
    """
    if len(source_slice) != len(token.chars):
        raise SliceLengthMismatch(
            f"Source slice has {len(source_slice)} characters, token '{token.chars}' has {len(token.chars)}"
        )
    return sum(
        distortion_logprob(source_char, token_char, table, res)
        for source_char, token_char in zip(source_slice, token.chars)
    )


def relation_set(char: str, distortion_type: DistortionType, res: SimilarityResources) -> Tuple[str, ...]:
    """Resource-alphabet characters c with classify_pair(c, char) == distortion_type, sorted"""
    key = (char, distortion_type)
    cached = res._relation_cache.get(key)
    if cached is not None:
        return cached
    members = tuple(
        other for other in res.alphabet
        if classify_pair(other, char, res) is distortion_type
    )
    with res._lock:
        res._relation_cache[key] = members
    return members


def confusion_set(char: str, res: SimilarityResources) -> Tuple[str, ...]:
    """Same-pinyin, then similar-pinyin, then similar-shape characters of `char`"""
    cached = res._confusion_cache.get(char)
    if cached is not None:
        return cached
    members: List[str] = []
    for distortion_type in (DistortionType.SAME_PINYIN, DistortionType.SIMILAR_PINYIN,
                            DistortionType.SIMILAR_SHAPE):
        members.extend(relation_set(char, distortion_type, res))
    result = tuple(members)
    with res._lock:
        res._confusion_cache[char] = result
    return result


def _read_resource_lines(path: str):
    if not os.path.exists(path):
        raise ResourceError(f"Resource file not found: {path}")
    try:
        with open(path, 'r', encoding='utf-8') as handle:
            for line_number, line in enumerate(handle, start=1):
                line = line.rstrip('\n').rstrip('\r')
                if not line.strip() or line.startswith('#'):
                    continue
                fields = line.split('\t')
                if len(fields) != 2 or not fields[0] or not fields[1]:
                    raise ResourceError(f"{path}:{line_number}: expected 'key TAB value'")
                yield line_number, fields[0], fields[1]
    except UnicodeDecodeError as e:
        raise ResourceError(f"{path}: not valid UTF-8 ({e.reason})") from e


def _single_char(path: str, line_number: int, value: str) -> str:
    if len(value) != 1:
        raise ResourceError(f"{path}:{line_number}: '{value}' is not a single character")
    return value


def load_pinyin_file(path: str) -> Dict[str, FrozenSet[str]]:
    """Lines 'char TAB syllable[,syllable...]', toneless and lowercase"""
    table: Dict[str, set] = {}
    for line_number, char, syllables in _read_resource_lines(path):
        _single_char(path, line_number, char)
        readings = {syllable.strip().lower() for syllable in syllables.split(',') if syllable.strip()}
        if not readings or not all(reading.isalpha() and reading.isascii() for reading in readings):
            raise ResourceError(f"{path}:{line_number}: syllables must be toneless ASCII letters")
        table.setdefault(char, set()).update(readings)
    return {char: frozenset(readings) for char, readings in table.items()}


def load_shape_file(path: str) -> Dict[str, FrozenSet[str]]:
    """Lines 'char TAB char[,char...]'"""
    table: Dict[str, set] = {}
    for line_number, char, similar in _read_resource_lines(path):
        _single_char(path, line_number, char)
        members = {_single_char(path, line_number, other.strip()) for other in similar.split(',') if other.strip()}
        table.setdefault(char, set()).update(members)
    return {char: frozenset(members) for char, members in table.items()}


def load_fuzzy_file(path: str) -> List[Tuple[str, str]]:
    """Lines 'a TAB b' of interchangeable syllable initials/finals"""
    return [(a.strip().lower(), b.strip().lower()) for _, a, b in _read_resource_lines(path)]


def load_resources(pinyin_path: str, shape_path: Optional[str] = None,
                   fuzzy_path: Optional[str] = None) -> SimilarityResources:
    """
    Load similarity resources from the documented file formats.

    Raises:
        ResourceError: a given file is missing or malformed (the message names it)
    """
    pinyin = load_pinyin_file(pinyin_path)
    shapes = load_shape_file(shape_path) if shape_path else {}
    fuzzy = load_fuzzy_file(fuzzy_path) if fuzzy_path else []
    resources = SimilarityResources(pinyin=pinyin, shape_sets=shapes, fuzzy_pairs=fuzzy)
    logger.info(f"Loaded similarity resources: {resources.summary()}")
    return resources


def default_resource_paths() -> Dict[str, str]:
    return {
        'pinyin_path': os.getenv('CSC_MIX_PINYIN_PATH', os.path.join(RESOURCE_DIR, 'pinyin.tsv')),
        'shape_path': os.getenv('CSC_MIX_SHAPE_PATH', os.path.join(RESOURCE_DIR, 'shape.tsv')),
        'fuzzy_path': os.getenv('CSC_MIX_FUZZY_PATH', os.path.join(RESOURCE_DIR, 'fuzzy.tsv'))
    }


class DistortionModel:
    """Distortion table and similarity resources bundled for the decoder"""

    def __init__(self, table: Optional[DistortionTable] = None,
                 resources: Optional[SimilarityResources] = None):
        self.table = table or DistortionTable()
        self.resources = resources or SimilarityResources.empty()

    def classify(self, a: str, b: str) -> DistortionType:
        return classify_pair(a, b, self.resources)

    def logprob(self, a: str, b: str) -> float:
        return distortion_logprob(a, b, self.table, self.resources)

    def token_logprob(self, source_slice: Sequence[str], token: Token) -> float:
        return token_distortion_logprob(source_slice, token, self.table, self.resources)

    def confusion_set(self, char: str) -> Tuple[str, ...]:
        return confusion_set(char, self.resources)
