"""
Test the add-k character n-gram model and its serialization.
"""

import io
import os
import sys
import math

import numpy as np
import pytest

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from exceptions import EmptyCorpus, ModelFormatError
from services.corpus_service import read_sentences
from services.distortion_service import RESOURCE_DIR
from services.ngram_lm_service import (
    UNK_CHAR, ngram_distribution, ngram_load, ngram_perplexity, ngram_save, ngram_train
)
from services.scorer_contracts import UNK_SYMBOL, check_generative_contract

CLEAN_CORPUS = os.path.join(RESOURCE_DIR, 'clean_corpus.txt')


def test_bigram_add_k_formula():
    """p(b | a) = (2 + 0.1) / (2 + 0.3) over the alphabet {a, b, UNK}"""
    model = ngram_train(['ab', 'ab'], order=2, k=0.1)
    assert model.alphabet == ('a', 'b', UNK_SYMBOL)
    assert math.exp(model.conditional_logprob(('a',), 'b')) == pytest.approx(2.1 / 2.3, abs=1e-12)

    distribution = ngram_distribution(model, ('a',))
    assert math.exp(distribution[1]) == pytest.approx(2.1 / 2.3, abs=1e-12)
    assert float(np.sum(np.exp(distribution))) == pytest.approx(1.0, abs=1e-9)


def test_unigram_add_k_formula():
    """p(a) = (1 + k) / (1 + 2k) over the alphabet {a, UNK}"""
    model = ngram_train(['a'], order=1, k=0.1)
    assert model.alphabet == ('a', UNK_SYMBOL)
    assert model.initial_state() == ()
    assert math.exp(model.distribution(())[0]) == pytest.approx(1.1 / 1.2, abs=1e-12)


def test_single_token_vocabulary():
    model = ngram_train(['a'], order=1, k=0.1, include_unk=False)
    assert len(model.vocabulary) == 1
    assert model.distribution(())[0] == pytest.approx(0.0, abs=1e-12)


def test_equal_counts_give_equal_logprobs():
    model = ngram_train(['ab', 'ac'], order=2, k=1e-9)
    distribution = model.distribution(('a',))
    b_id, c_id = model.token_for('b').token_id, model.token_for('c').token_id
    assert distribution[b_id] == pytest.approx(distribution[c_id], abs=1e-12)


def test_empty_corpus():
    with pytest.raises(EmptyCorpus):
        ngram_train([])
    with pytest.raises(EmptyCorpus):
        ngram_train(['', ''])


def test_multi_tokens_renormalized():
    """Two-character tokens score as the product of their conditionals, renormalized"""
    model = ngram_train(['abab', 'abc'], order=2, k=0.1, multi_tokens=1)
    assert model.multi_tokens == ('ab',)
    token = model.token_for('ab')
    state = model.initial_state()
    distribution = model.distribution(state)
    assert float(np.sum(np.exp(distribution))) == pytest.approx(1.0, abs=1e-9)

    raw_ab = model.conditional_logprob(state, 'a') + model.conditional_logprob(('a',), 'b')
    raw_a = model.conditional_logprob(state, 'a')
    # renormalization shifts every entry by the same constant
    assert distribution[token.token_id] - distribution[model.token_for('a').token_id] == pytest.approx(
        raw_ab - raw_a, abs=1e-12
    )
    assert model.step(state, token.token_id) == ('b',)


def test_unknown_characters_map_to_unk():
    model = ngram_train(['ab'], order=2, k=0.1)
    assert model.symbol('z') == UNK_SYMBOL
    assert model.vocabulary[model.unk_token_id].chars == UNK_CHAR
    assert model.step(model.initial_state(), model.unk_token_id) == (UNK_SYMBOL,)
    assert math.isfinite(model.sentence_logprob('azb'))


def test_generative_contract():
    model = ngram_train(read_sentences(CLEAN_CORPUS), order=3, k=0.01, multi_tokens=8)
    paths = [[], [0], [0, 1, 2], [len(model.vocabulary) - 1, 3], [model.unk_token_id, 5, 7]]
    assert check_generative_contract(model, paths) == 1 + 2 + 4 + 3 + 4


def test_perplexity_decreases_with_k():
    """On its own training corpus perplexity is finite and falls as k shrinks"""
    print("\n=== Testing perplexity against k ===")
    corpus = read_sentences(CLEAN_CORPUS)
    perplexities = [ngram_perplexity(ngram_train(corpus, order=3, k=k), corpus) for k in (1.0, 0.1, 0.01, 0.001)]
    print(f"Perplexities: {perplexities}")
    assert all(math.isfinite(p) for p in perplexities)
    assert perplexities == sorted(perplexities, reverse=True)
    assert len(set(perplexities)) == len(perplexities)


def test_save_load_round_trip():
    """Saving a loaded model reproduces the file byte for byte"""
    model = ngram_train(read_sentences(CLEAN_CORPUS), order=3, k=0.001, multi_tokens=16)
    first = io.StringIO()
    ngram_save(model, first)

    loaded = ngram_load(io.StringIO(first.getvalue()))
    second = io.StringIO()
    ngram_save(loaded, second)

    assert first.getvalue() == second.getvalue()
    assert loaded.vocabulary == model.vocabulary
    state = model.initial_state()
    assert np.array_equal(loaded.distribution(state), model.distribution(state))


def test_save_load_files(tmp_path):
    model = ngram_train(['水饺好吃', '我想睡觉'], order=2, k=0.1, multi_tokens=2)
    path = tmp_path / 'model.lm'
    ngram_save(model, str(path))
    loaded = ngram_load(str(path))
    assert loaded.summary() == model.summary()
    assert path.read_text(encoding='utf-8').startswith('#csc-mix-ngram\tv1\t')


def test_load_rejects_bad_files():
    with pytest.raises(ModelFormatError):
        ngram_load(io.StringIO('not a model\n'))
    with pytest.raises(ModelFormatError):
        ngram_load(io.StringIO('#csc-mix-ngram\tv9\torder=2\tk=0.1\tunk=1\talphabet=[]\ttokens=[]\n'))
    with pytest.raises(ModelFormatError):
        ngram_load(io.StringIO('#csc-mix-ngram\tv1\torder=2\tk=0.1\tunk=1\talphabet=["a"]\ttokens=[]\n'
                               '["a"]\tb\n'))
