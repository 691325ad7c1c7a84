"""
Character n-gram language model with add-k smoothing, exposed through the
GenerativeScorer contract.

The vocabulary holds one token per alphabet symbol (the UNK symbol included)
plus optional multi-character tokens whose probability is the product of
their characters' conditionals, renormalized over the whole vocabulary.
"""

import json
import logging
import math
import threading
from collections import Counter
from typing import Dict, IO, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from exceptions import ConfigError, EmptyCorpus, ModelFormatError
from models import Token
from services.corpus_service import open_text
from services.scorer_contracts import UNK_SYMBOL, log_sum_exp

logger = logging.getLogger(__name__)

BOS_SYMBOL = '<s>'
# Character carried by the UNK vocabulary entry; the decoder substitutes the real character
UNK_CHAR = '\ufffd'
FORMAT_MAGIC = '#csc-mix-ngram'
FORMAT_VERSION = 'v1'

Context = Tuple[str, ...]


class NGramLM:
    """Add-k smoothed character n-gram model"""

    def __init__(self, order: int, k: float, alphabet: Sequence[str],
                 counts: Dict[Context, Dict[str, int]],
                 multi_tokens: Sequence[str] = (),
                 include_unk: bool = True):
        if order < 1:
            raise ConfigError(f"n-gram order must be >= 1, got {order}")
        if not k > 0:
            raise ConfigError(f"smoothing k must be > 0, got {k}")

        self.order = order
        self.k = k
        self.include_unk = include_unk
        symbols = sorted(set(alphabet) - {UNK_SYMBOL})
        if include_unk:
            symbols.append(UNK_SYMBOL)
        self.alphabet: Tuple[str, ...] = tuple(symbols)
        self._alphabet_set = frozenset(self.alphabet)
        self.counts: Dict[Context, Dict[str, int]] = {ctx: dict(c) for ctx, c in counts.items()}
        self.context_totals: Dict[Context, int] = {ctx: sum(c.values()) for ctx, c in self.counts.items()}
        self.multi_tokens: Tuple[str, ...] = tuple(sorted(set(multi_tokens)))

        vocabulary: List[Token] = []
        for symbol in self.alphabet:
            chars = UNK_CHAR if symbol == UNK_SYMBOL else symbol
            vocabulary.append(Token(chars=chars, token_id=len(vocabulary)))
        self.unk_token_id: Optional[int] = len(self.alphabet) - 1 if include_unk else None
        for chars in self.multi_tokens:
            vocabulary.append(Token(chars=chars, token_id=len(vocabulary)))
        self.vocabulary: Tuple[Token, ...] = tuple(vocabulary)

        self._symbol_index = {symbol: i for i, symbol in enumerate(self.alphabet)}
        self._distribution_cache: Dict[Context, np.ndarray] = {}
        self._lock = threading.Lock()

    # GenerativeScorer contract

    def initial_state(self) -> Context:
        return (BOS_SYMBOL,) * (self.order - 1)

    def step(self, state: Context, token_id: int) -> Context:
        return self._advance(state, self._token_symbols(self.vocabulary[token_id]))

    def distribution(self, state: Context) -> np.ndarray:
        cached = self._distribution_cache.get(state)
        if cached is not None:
            return cached

        raw = np.empty(len(self.vocabulary), dtype=np.float64)
        raw[:len(self.alphabet)] = self._conditional_vector(state)
        for token in self.vocabulary[len(self.alphabet):]:
            raw[token.token_id] = self._sequence_logprob(state, token.chars)
        distribution = raw - log_sum_exp(raw)
        distribution.setflags(write=False)

        with self._lock:
            self._distribution_cache[state] = distribution
        return distribution

    # Model internals

    def symbol(self, char: str) -> str:
        if char in self._alphabet_set and char != UNK_SYMBOL:
            return char
        if self.include_unk:
            return UNK_SYMBOL
        raise KeyError(f"'{char}' is outside the model alphabet")

    def _token_symbols(self, token: Token) -> List[str]:
        if token.token_id == self.unk_token_id:
            return [UNK_SYMBOL]
        return [self.symbol(char) for char in token.chars]

    def _advance(self, state: Context, symbols: Iterable[str]) -> Context:
        if self.order == 1:
            return ()
        return (*state, *symbols)[-(self.order - 1):]

    def conditional_logprob(self, state: Context, symbol: str) -> float:
        """ln p(symbol | context) = ln((count + k) / (total + k * |alphabet|))"""
        context_counts = self.counts.get(state, {})
        total = self.context_totals.get(state, 0)
        return math.log((context_counts.get(symbol, 0) + self.k) / (total + self.k * len(self.alphabet)))

    def _conditional_vector(self, state: Context) -> np.ndarray:
        context_counts = self.counts.get(state, {})
        denominator = self.context_totals.get(state, 0) + self.k * len(self.alphabet)
        numerators = np.full(len(self.alphabet), self.k, dtype=np.float64)
        for symbol, count in context_counts.items():
            numerators[self._symbol_index[symbol]] += count
        return np.log(numerators / denominator)

    def _sequence_logprob(self, state: Context, chars: str) -> float:
        total = 0.0
        for char in chars:
            symbol = self.symbol(char)
            total += self.conditional_logprob(state, symbol)
            state = self._advance(state, (symbol,))
        return total

    def sentence_logprob(self, sentence: str) -> float:
        """Character-level log-probability of a whole sentence"""
        return self._sequence_logprob(self.initial_state(), sentence)

    def token_for(self, chars: str) -> Optional[Token]:
        for token in self.vocabulary:
            if token.chars == chars and token.token_id != self.unk_token_id:
                return token
        return None

    def summary(self) -> Dict[str, Union[int, float]]:
        return {
            'order': self.order,
            'k': self.k,
            'alphabet_size': len(self.alphabet),
            'multi_tokens': len(self.multi_tokens),
            'contexts': len(self.counts)
        }


def ngram_train(corpus: Sequence[str], order: int = 3, k: float = 0.1,
                multi_tokens: int = 0, include_unk: bool = True) -> NGramLM:
    """
    Count order-n character events over the corpus and build the model.

    `multi_tokens` adds the N most frequent character bigrams as two-character
    vocabulary tokens (count descending, then lexicographic).

    Raises:
        EmptyCorpus: the corpus has no characters
    """
    sentences = [sentence for sentence in corpus if sentence]
    if not sentences:
        raise EmptyCorpus("Cannot train a language model on an empty corpus")
    if order < 1:
        raise ConfigError(f"n-gram order must be >= 1, got {order}")
    if not k > 0:
        raise ConfigError(f"smoothing k must be > 0, got {k}")

    counts: Dict[Context, Counter] = {}
    alphabet = set()
    bigrams: Counter = Counter()
    padding = (BOS_SYMBOL,) * (order - 1)
    for sentence in sentences:
        alphabet.update(sentence)
        padded = (*padding, *sentence)
        for t, char in enumerate(sentence):
            context = padded[t:t + order - 1]
            counts.setdefault(context, Counter())[char] += 1
        for first, second in zip(sentence, sentence[1:]):
            bigrams[first + second] += 1

    chosen = [pair for pair, _ in sorted(bigrams.items(), key=lambda item: (-item[1], item[0]))[:multi_tokens]]
    model = NGramLM(order=order, k=k, alphabet=sorted(alphabet), counts=counts,
                    multi_tokens=chosen, include_unk=include_unk)
    logger.info(f"Trained n-gram model on {len(sentences)} sentences: {model.summary()}")
    return model


def ngram_distribution(model: NGramLM, state: Context) -> np.ndarray:
    return model.distribution(state)


def ngram_perplexity(model: NGramLM, corpus: Sequence[str]) -> float:
    """Per-character perplexity of the model on a corpus"""
    total_logprob = 0.0
    total_chars = 0
    for sentence in corpus:
        total_logprob += model.sentence_logprob(sentence)
        total_chars += len(sentence)
    if total_chars == 0:
        raise EmptyCorpus("Cannot compute perplexity on an empty corpus")
    return math.exp(-total_logprob / total_chars)


def _dump_json(value) -> str:
    return json.dumps(value, ensure_ascii=False, separators=(',', ':'))


def ngram_save(model: NGramLM, path_or_stream: Union[str, IO[str]]) -> None:
    """
    Write the model as sorted UTF-8 lines:
    one header line, then 'context TAB symbol TAB count' per event.
    """
    with open_text(path_or_stream, 'w') as stream:
        header = [
            FORMAT_MAGIC,
            FORMAT_VERSION,
            f"order={model.order}",
            f"k={model.k!r}",
            f"unk={int(model.include_unk)}",
            f"alphabet={_dump_json(list(model.alphabet))}",
            f"tokens={_dump_json(list(model.multi_tokens))}"
        ]
        stream.write('\t'.join(header) + '\n')
        lines = []
        for context, context_counts in model.counts.items():
            encoded = _dump_json(list(context))
            for symbol, count in context_counts.items():
                lines.append((encoded, symbol, count))
        for encoded, symbol, count in sorted(lines):
            stream.write(f"{encoded}\t{symbol}\t{count}\n")


def ngram_load(path_or_stream: Union[str, IO[str]]) -> NGramLM:
    """
    Read a model written by ngram_save.

    Raises:
        ModelFormatError: wrong magic/version or a malformed line
    """
    with open_text(path_or_stream) as stream:
        header_line = stream.readline().rstrip('\n')
        fields = header_line.split('\t')
        if len(fields) != 7 or fields[0] != FORMAT_MAGIC:
            raise ModelFormatError("Not an n-gram model file (bad header)")
        if fields[1] != FORMAT_VERSION:
            raise ModelFormatError(f"Unsupported model format version '{fields[1]}'")
        try:
            settings = dict(field.split('=', 1) for field in fields[2:])
            order = int(settings['order'])
            k = float(settings['k'])
            include_unk = settings['unk'] == '1'
            alphabet = json.loads(settings['alphabet'])
            multi_tokens = json.loads(settings['tokens'])
        except (KeyError, ValueError) as e:
            raise ModelFormatError(f"Malformed model header: {e}") from e

        counts: Dict[Context, Dict[str, int]] = {}
        for line_number, line in enumerate(stream, start=2):
            line = line.rstrip('\n')
            if not line:
                continue
            parts = line.split('\t')
            if len(parts) != 3:
                raise ModelFormatError(f"Line {line_number}: expected 'context TAB symbol TAB count'")
            try:
                context = tuple(json.loads(parts[0]))
                count = int(parts[2])
            except ValueError as e:
                raise ModelFormatError(f"Line {line_number}: {e}") from e
            counts.setdefault(context, {})[parts[1]] = count

    return NGramLM(order=order, k=k, alphabet=alphabet, counts=counts,
                   multi_tokens=multi_tokens, include_unk=include_unk)
