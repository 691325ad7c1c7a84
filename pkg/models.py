import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Dict, FrozenSet, Optional, Tuple

from exceptions import ConfigError, CorpusFormatError, EmptySource, LengthMismatch

# log(0); any sum it enters stays -inf and the hypothesis drops out of ranking
NEG_INF = float('-inf')

# Tolerance for the ScoreBreakdown total/components identity
SCORE_TOLERANCE = 1e-9


class CorrectionInstance:
    """
    One line of a parallel corpus: a source sentence, an optional reference
    of the same length and an opaque identifier.

    Characters are Unicode scalar values, so len("水饺") == 2.
    """

    __slots__ = ('id', 'source', 'reference')

    def __init__(self, source: str, reference: Optional[str] = None, id: str = ''):
        self.id = id
        self.source = source
        self.reference = reference

    def __eq__(self, other):
        if not isinstance(other, CorrectionInstance):
            return NotImplemented
        return (self.id, self.source, self.reference) == (other.id, other.source, other.reference)

    def __hash__(self):
        return hash((self.id, self.source, self.reference))

    def __repr__(self):
        return f"CorrectionInstance(id={self.id!r}, source={self.source!r}, reference={self.reference!r})"

    @property
    def has_reference(self) -> bool:
        return self.reference is not None

    def to_dict(self) -> Dict[str, Any]:
        return {
            'id': self.id,
            'source': self.source,
            'reference': self.reference
        }


def validate_instance(inst: CorrectionInstance) -> CorrectionInstance:
    """
    Check the CorrectionInstance invariants and return the instance unchanged.

    Raises:
        EmptySource: the source has no characters
        LengthMismatch: reference length differs from source length
        CorpusFormatError: a newline is embedded in the source or reference
    """
    if len(inst.source) == 0:
        raise EmptySource(f"Instance '{inst.id}' has an empty source")
    if '\n' in inst.source or (inst.reference is not None and '\n' in inst.reference):
        raise CorpusFormatError(f"Instance '{inst.id}' contains a newline character")
    if inst.reference is not None and len(inst.reference) != len(inst.source):
        raise LengthMismatch(
            f"Instance '{inst.id}': reference has {len(inst.reference)} characters, "
            f"source has {len(inst.source)}"
        )
    return inst


@dataclass(frozen=True)
class Token:
    """A generative-scorer vocabulary entry covering one or more characters"""
    chars: str
    token_id: int

    def __post_init__(self):
        if len(self.chars) < 1:
            raise ValueError("A token must cover at least one character")

    def __len__(self) -> int:
        return len(self.chars)


@dataclass(frozen=True)
class ScoreBreakdown:
    """
    Accumulated decomposed score of a (partial) output.

    dm_log and sm_log hold the weighted terms, after alpha/beta and the
    faithfulness multiplier were applied.
    """
    lm_log: float = 0.0
    dm_log: float = 0.0
    sm_log: float = 0.0
    total: float = 0.0

    @classmethod
    def from_components(cls, lm_log: float, dm_log: float, sm_log: float) -> 'ScoreBreakdown':
        return cls(lm_log=lm_log, dm_log=dm_log, sm_log=sm_log, total=lm_log + dm_log + sm_log)

    def add(self, lm_term: float, dm_term: float, sm_term: float) -> 'ScoreBreakdown':
        return ScoreBreakdown.from_components(
            self.lm_log + lm_term,
            self.dm_log + dm_term,
            self.sm_log + sm_term
        )

    def is_consistent(self) -> bool:
        recomputed = self.lm_log + self.dm_log + self.sm_log
        if math.isinf(self.total) or math.isinf(recomputed):
            return self.total == recomputed
        return abs(recomputed - self.total) <= SCORE_TOLERANCE

    def to_dict(self) -> Dict[str, float]:
        return {
            'lm_log': self.lm_log,
            'dm_log': self.dm_log,
            'sm_log': self.sm_log,
            'total': self.total
        }


@dataclass(frozen=True)
class Hypothesis:
    """Beam-search state: a partial equal-length output and its score"""
    tokens: Tuple[Token, ...] = ()
    covered_chars: int = 0
    score: ScoreBreakdown = field(default_factory=ScoreBreakdown)
    generative_state: Any = None
    # faithfulness multiplier applied at each extension, kept for traces
    multipliers: Tuple[float, ...] = ()

    @property
    def output(self) -> str:
        return ''.join(token.chars for token in self.tokens)

    @property
    def token_ids(self) -> Tuple[int, ...]:
        return tuple(token.token_id for token in self.tokens)

    def rank_key(self):
        """Sort key: total descending, then output and token ids ascending"""
        return (-self.score.total, self.output, self.token_ids)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'output': self.output,
            'tokens': [token.chars for token in self.tokens],
            'covered_chars': self.covered_chars,
            'score': self.score.to_dict(),
            'fr_multipliers': list(self.multipliers)
        }


@dataclass(frozen=True)
class RankedOutput:
    """A complete hypothesis as returned by the decoder"""
    output: str
    score: ScoreBreakdown
    tokens: Tuple[Token, ...] = ()

    @classmethod
    def from_hypothesis(cls, hyp: Hypothesis) -> 'RankedOutput':
        return cls(output=hyp.output, score=hyp.score, tokens=hyp.tokens)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'output': self.output,
            'tokens': [token.chars for token in self.tokens],
            'score': self.score.to_dict()
        }


class DistortionType(Enum):
    """Similarity class of a (source, candidate) character pair"""
    IDENTICAL = 'Identical'
    SAME_PINYIN = 'SamePinyin'
    SIMILAR_PINYIN = 'SimilarPinyin'
    SIMILAR_SHAPE = 'SimilarShape'
    UNRELATED = 'Unrelated'

    @property
    def short_label(self) -> str:
        return _SHORT_LABELS[self]


_SHORT_LABELS = {
    DistortionType.IDENTICAL: 'Identical',
    DistortionType.SAME_PINYIN: 'SaP',
    DistortionType.SIMILAR_PINYIN: 'SiP',
    DistortionType.SIMILAR_SHAPE: 'SiS',
    DistortionType.UNRELATED: 'Others'
}

# Resolution order when several relations hold
DISTORTION_PRECEDENCE = (
    DistortionType.IDENTICAL,
    DistortionType.SAME_PINYIN,
    DistortionType.SIMILAR_PINYIN,
    DistortionType.SIMILAR_SHAPE,
    DistortionType.UNRELATED
)

ERROR_TYPES = DISTORTION_PRECEDENCE[1:]


@dataclass(frozen=True)
class CandidatePolicy:
    top_k_classifier: int = 8
    include_confusion: bool = True
    include_identity: bool = True
    max_candidates: int = 16

    def __post_init__(self):
        if self.top_k_classifier < 0:
            raise ConfigError("top_k_classifier must be >= 0")
        if self.max_candidates < 1:
            raise ConfigError("max_candidates must be >= 1")

    def to_dict(self) -> Dict[str, Any]:
        return {
            'top_k_classifier': self.top_k_classifier,
            'include_confusion': self.include_confusion,
            'include_identity': self.include_identity,
            'max_candidates': self.max_candidates
        }


@dataclass(frozen=True)
class MixtureConfig:
    """
    Weights and switches of the mixture decoder.

    alpha weights the distortion term, beta the position-classifier term,
    beam_size is K. Probabilities are always natural-log.
    """
    alpha: float = 0.5
    beta: float = 0.9
    beam_size: int = 12
    dm_enabled: bool = True
    fr_enabled: bool = True
    candidate_policy: CandidatePolicy = field(default_factory=CandidatePolicy)
    exhaustive_bound: int = 2_000_000

    def __post_init__(self):
        if self.beam_size < 1:
            raise ConfigError(f"beam_size must be >= 1, got {self.beam_size}")
        if not self.alpha >= 0:
            raise ConfigError(f"alpha must be >= 0, got {self.alpha}")
        if not self.beta >= 0:
            raise ConfigError(f"beta must be >= 0, got {self.beta}")

    @property
    def log_base(self) -> str:
        return 'e'

    def with_overrides(self, **changes) -> 'MixtureConfig':
        return replace(self, **changes)

    def sort_key(self):
        return (self.alpha, self.beta, self.beam_size, self.dm_enabled, self.fr_enabled)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'alpha': self.alpha,
            'beta': self.beta,
            'beam_size': self.beam_size,
            'dm_enabled': self.dm_enabled,
            'fr_enabled': self.fr_enabled,
            'candidate_policy': self.candidate_policy.to_dict(),
            'exhaustive_bound': self.exhaustive_bound
        }


# Named configurations matching the ablation rows
MIXTURE_PRESETS: Dict[str, Dict[str, Any]] = {
    'mixture': {'alpha': 0.5, 'beta': 0.9, 'dm_enabled': True, 'fr_enabled': True},
    'no-dm': {'alpha': 0.5, 'beta': 0.9, 'dm_enabled': False, 'fr_enabled': True},
    'no-fr': {'alpha': 0.5, 'beta': 0.9, 'dm_enabled': True, 'fr_enabled': False},
    'no-dm-no-fr': {'alpha': 0.5, 'beta': 0.9, 'dm_enabled': False, 'fr_enabled': False},
    'lm-only': {'alpha': 1.0, 'beta': 0.0, 'dm_enabled': True, 'fr_enabled': True},
}


def preset_config(name: str, base: Optional[MixtureConfig] = None) -> MixtureConfig:
    if name not in MIXTURE_PRESETS:
        raise ConfigError(f"Unknown preset '{name}'. Available: {', '.join(sorted(MIXTURE_PRESETS))}")
    base = base or MixtureConfig()
    return base.with_overrides(**MIXTURE_PRESETS[name])


@dataclass(frozen=True)
class CandidateSet:
    """Allowed output characters per source position"""
    per_position: Tuple[Tuple[str, ...], ...]

    def __len__(self) -> int:
        return len(self.per_position)

    def allows(self, position: int, char: str) -> bool:
        return char in self.per_position[position]

    def space_size(self) -> int:
        size = 1
        for chars in self.per_position:
            size *= len(chars)
        return size

    def to_dict(self) -> Dict[str, Any]:
        return {'per_position': [list(chars) for chars in self.per_position]}


@dataclass(frozen=True)
class TypeMetrics:
    """Character-level correction metrics restricted to one error type"""
    precision: float
    recall: float
    f1: float
    gold_edits: int
    predicted_edits: int
    correct_edits: int
    undefined: FrozenSet[str] = frozenset()

    @property
    def empty(self) -> bool:
        return self.gold_edits == 0 and self.predicted_edits == 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            'precision': self.precision,
            'recall': self.recall,
            'f1': self.f1,
            'gold_edits': self.gold_edits,
            'predicted_edits': self.predicted_edits,
            'correct_edits': self.correct_edits,
            'undefined': sorted(self.undefined),
            'empty': self.empty
        }


@dataclass(frozen=True)
class MetricReport:
    """
    Sentence- and character-level correction metrics plus FPR.

    Ratios with a zero denominator are reported as 0 and their name is added
    to `undefined`.
    """
    sentence_precision: float
    sentence_recall: float
    sentence_f1: float
    char_precision: float
    char_recall: float
    char_f1: float
    fpr: float
    counts: Dict[str, int] = field(default_factory=dict)
    undefined: FrozenSet[str] = frozenset()
    per_type: Optional[Dict[DistortionType, TypeMetrics]] = None

    def to_dict(self) -> Dict[str, Any]:
        data = {
            'sentence_precision': self.sentence_precision,
            'sentence_recall': self.sentence_recall,
            'sentence_f1': self.sentence_f1,
            'char_precision': self.char_precision,
            'char_recall': self.char_recall,
            'char_f1': self.char_f1,
            'fpr': self.fpr,
            'counts': dict(sorted(self.counts.items())),
            'undefined': sorted(self.undefined)
        }
        if self.per_type is not None:
            data['per_type'] = {
                error_type.short_label: metrics.to_dict()
                for error_type, metrics in self.per_type.items()
            }
        return data
