"""
Test synthetic corpus generation from the shipped clean corpus.
"""

import os
import sys

import pytest

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from exceptions import ConfigError, EmptyCorpus
from models import DistortionType
from services.corpus_service import read_sentences
from services.distortion_service import (
    RESOURCE_DIR, DistortionTable, SimilarityResources, classify_pair, default_resource_paths, load_resources
)
from services.synth_service import CorruptionSampler, synthesize

CLEAN = read_sentences(os.path.join(RESOURCE_DIR, 'clean_corpus.txt'))
RESOURCES = load_resources(**default_resource_paths())


def test_zero_rate_copies_references():
    result = synthesize(CLEAN, resources=RESOURCES, error_rate=0.0, seed=7)
    assert all(inst.source == inst.reference for inst in result.instances)
    assert result.corrupted_chars == 0
    assert [inst.id for inst in result.instances[:2]] == ['synth-000000', 'synth-000001']


def test_same_seed_same_corpus():
    first = synthesize(CLEAN, resources=RESOURCES, error_rate=0.2, seed=11)
    second = synthesize(CLEAN, resources=RESOURCES, error_rate=0.2, seed=11)
    other = synthesize(CLEAN, resources=RESOURCES, error_rate=0.2, seed=12)
    assert first.instances == second.instances
    assert first.instances != other.instances


def test_achieved_rate_near_target():
    """Over at least 10^4 characters the achieved rate is within 0.01 of 0.1"""
    print("\n=== Testing achieved corruption rate ===")
    result = synthesize(CLEAN, resources=RESOURCES, error_rate=0.1, seed=42, target_sentences=1500)
    print(f"Stats: {result.to_dict()}")
    assert result.total_chars >= 10_000
    assert abs(result.achieved_rate - 0.1) <= 0.01
    assert result.skipped_chars == 0


def test_corruptions_are_typed_substitutions():
    result = synthesize(CLEAN, resources=RESOURCES, error_rate=0.3, seed=3, target_sentences=200)
    counted = {}
    for inst in result.instances:
        assert len(inst.source) == len(inst.reference)
        for src_char, ref_char in zip(inst.source, inst.reference):
            if src_char != ref_char:
                error_type = classify_pair(src_char, ref_char, RESOURCES)
                assert error_type is not DistortionType.IDENTICAL
                counted[error_type] = counted.get(error_type, 0) + 1
    assert sum(counted.values()) == result.corrupted_chars
    assert counted == {t: c for t, c in result.type_counts.items() if c}


def test_chars_without_relations_are_skipped():
    lonely = SimilarityResources(pinyin={'a': {'ma'}})
    sampler = CorruptionSampler(DistortionTable(), lonely, error_rate=1.0, seed=0)
    assert sampler.corrupt_char('a') == ('a', None, True)


def test_invalid_inputs():
    with pytest.raises(EmptyCorpus):
        synthesize(['', ''])
    with pytest.raises(ConfigError):
        synthesize(CLEAN, error_rate=1.5)


def test_stats_report_target_and_achieved_type_ratios():
    """Target ratio comes from the table; achieved ratio from the corrupted characters"""
    result = synthesize(CLEAN, resources=RESOURCES, error_rate=0.3, seed=5, target_sentences=200)
    stats = result.to_dict()

    mass = 0.023 + 0.008 + 0.004 + 0.003
    assert stats['target_type_ratio'] == pytest.approx(
        {'SaP': 0.023 / mass, 'SiP': 0.008 / mass, 'SiS': 0.004 / mass, 'Others': 0.003 / mass}, abs=1e-12
    )
    assert sum(stats['achieved_type_ratio'].values()) == pytest.approx(1.0, abs=1e-12)
    for label, count in stats['type_counts'].items():
        assert stats['achieved_type_ratio'][label] == pytest.approx(count / result.corrupted_chars, abs=1e-12)


def test_type_ratios_without_corruption():
    result = synthesize(CLEAN, resources=RESOURCES, error_rate=0.0, seed=5)
    assert set(result.achieved_type_ratio().values()) == {0.0}
    assert sum(result.target_type_ratio().values()) == pytest.approx(1.0, abs=1e-12)
