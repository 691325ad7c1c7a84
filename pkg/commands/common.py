"""Argument groups, component construction and artifact helpers shared by the subcommands"""

import argparse
import json
import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence

from config import CONFIG_KEYS, RunConfig, parse_bool, resolve_run_config
from exceptions import ConfigError
from models import MIXTURE_PRESETS
from services.batch_correction_service import batch_correction_service
from services.corpus_service import open_text, read_sentences
from services.decoder_service import MixtureDecoder, TraceSink
from services.distortion_service import DistortionModel, DistortionTable, SimilarityResources, load_resources
from services.ngram_lm_service import NGramLM, ngram_load, ngram_train
from services.noisy_channel_classifier_service import NoisyChannelClassifier, classifier_train

logger = logging.getLogger(__name__)


def add_config_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--config', help='flat key=value config file (lowest precedence above defaults)')
    parser.add_argument('--log-level', dest='log_level', help='DEBUG, INFO, WARNING or ERROR (default INFO)')
    parser.add_argument('--quiet', dest='quiet', action='store_const', const=True, default=None,
                        help='disable progress bars')
    parser.add_argument('--max-workers', dest='max_workers', type=int, help='decoding worker threads (default 4)')


def add_resource_arguments(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group('similarity resources')
    group.add_argument('--pinyin', dest='pinyin_path', help='pinyin table (char TAB syllables)')
    group.add_argument('--shape', dest='shape_path', help="shape-similar sets; '' disables")
    group.add_argument('--fuzzy', dest='fuzzy_path', help="fuzzy syllable pairs; '' disables")
    group.add_argument('--distortion-table', dest='distortion_table',
                       help='five comma-separated type probabilities (default 0.962,0.023,0.008,0.004,0.003)')


def add_model_arguments(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group('scorers')
    group.add_argument('--lm', dest='lm_path', help='saved n-gram model (trained from --lm-corpus when omitted)')
    group.add_argument('--lm-corpus', dest='lm_corpus', help='plain-text corpus for training the n-gram model')
    group.add_argument('--lm-order', dest='lm_order', type=int, help='n-gram order (default 3)')
    group.add_argument('--lm-k', dest='lm_k', type=float, help='add-k smoothing constant (default 0.001)')
    group.add_argument('--lm-multi-tokens', dest='lm_multi_tokens', type=int,
                       help='number of two-character tokens (default 32)')
    group.add_argument('--classifier-corpus', dest='classifier_corpus',
                       help='corpus for the classifier prior (defaults to the LM corpus)')
    group.add_argument('--temperature', dest='temperature', type=float,
                       help='classifier channel temperature (default 1.0)')


def _bool_flag(value: str) -> bool:
    try:
        return parse_bool(value)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e))


def add_mixture_arguments(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group('mixture decoding')
    group.add_argument('--alpha', type=float, help='distortion weight (default 0.5)')
    group.add_argument('--beta', type=float, help='classifier weight (default 0.9)')
    group.add_argument('--beam-size', dest='beam_size', type=int, help='beam size K (default 12)')
    group.add_argument('--dm', dest='dm_enabled', type=_bool_flag, help='distortion model on/off (default on)')
    group.add_argument('--fr', dest='fr_enabled', type=_bool_flag, help='faithfulness reward on/off (default on)')
    group.add_argument('--top-k', dest='top_k_classifier', type=int,
                       help='classifier candidates per position (default 8)')
    group.add_argument('--confusion', dest='include_confusion', type=_bool_flag,
                       help='add confusion-set candidates (default on)')
    group.add_argument('--identity', dest='include_identity', type=_bool_flag,
                       help='always keep the source character as a candidate (default on)')
    group.add_argument('--max-candidates', dest='max_candidates', type=int,
                       help='candidate cap per position (default 16)')
    group.add_argument('--preset', choices=sorted(MIXTURE_PRESETS),
                       help='named weight/switch preset applied over the resolved values')


def run_config_from_args(args: argparse.Namespace, parameter_names: Sequence[str] = ()) -> RunConfig:
    """Split parsed arguments into config-key flags and subcommand parameters, then resolve"""
    namespace = vars(args)
    flags = {key: value for key, value in namespace.items() if key in CONFIG_KEYS}
    parameters = {name: namespace.get(name) for name in parameter_names}
    return resolve_run_config(args.command, flags=flags, config_path=namespace.get('config'),
                              parameters=parameters)


def apply_logging(run_config: RunConfig) -> None:
    logging.getLogger().setLevel(run_config.get('log_level'))
    batch_correction_service.quiet = run_config.get('quiet')


@dataclass
class Components:
    resources: SimilarityResources
    table: DistortionTable
    lm: NGramLM
    classifier: NoisyChannelClassifier

    def distortion(self) -> DistortionModel:
        return DistortionModel(self.table, self.resources)

    def decoder(self, run_config: RunConfig, preset: Optional[str] = None,
                trace_sink: Optional[TraceSink] = None) -> MixtureDecoder:
        return MixtureDecoder(self.lm, self.classifier, self.distortion(),
                              run_config.mixture_config(preset), trace_sink)


def build_resources(run_config: RunConfig) -> SimilarityResources:
    pinyin_path = run_config.get('pinyin_path')
    if not pinyin_path:
        raise ConfigError("A pinyin table is required (--pinyin or CSC_MIX_PINYIN_PATH)")
    return load_resources(pinyin_path, run_config.get('shape_path'), run_config.get('fuzzy_path'))


def build_components(run_config: RunConfig) -> Components:
    """Load resources, then load or train the LM and train the classifier prior"""
    resources = build_resources(run_config)
    table = run_config.distortion_table()

    lm_corpus = run_config.get('lm_corpus')
    if run_config.get('lm_path'):
        lm = ngram_load(run_config.get('lm_path'))
        logger.info(f"Loaded n-gram model from {run_config.get('lm_path')}: {lm.summary()}")
    else:
        if not lm_corpus:
            raise ConfigError("Either --lm or --lm-corpus is required")
        lm = ngram_train(read_sentences(lm_corpus), order=run_config.get('lm_order'),
                         k=run_config.get('lm_k'), multi_tokens=run_config.get('lm_multi_tokens'))

    classifier_corpus = run_config.get('classifier_corpus') or lm_corpus
    if not classifier_corpus:
        raise ConfigError("A classifier corpus is required when the LM is loaded from a file")
    classifier = classifier_train(read_sentences(classifier_corpus), table, resources,
                                  temperature=run_config.get('temperature'))
    return Components(resources=resources, table=table, lm=lm, classifier=classifier)


def write_json(payload: Dict[str, Any], path: str) -> None:
    with open_text(path, 'w') as stream:
        json.dump(payload, stream, ensure_ascii=False, indent=2, sort_keys=True)
        stream.write('\n')


def write_jsonl(records: List[Dict[str, Any]], path: str) -> None:
    with open_text(path, 'w') as stream:
        for record in records:
            stream.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + '\n')


def parse_list(text: str, cast, name: str) -> List[Any]:
    """Comma-separated flag value to a non-empty list"""
    try:
        values = [cast(part.strip()) for part in text.split(',') if part.strip()]
    except ValueError as e:
        raise ConfigError(f"--{name}: {e}") from e
    if not values:
        raise ConfigError(f"--{name} must list at least one value")
    return values
