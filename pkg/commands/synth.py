"""`synth`: corrupt a clean corpus into a parallel corpus with references"""

import json
import logging

from commands.common import (
    add_config_arguments, add_resource_arguments, apply_logging, build_resources, run_config_from_args
)
from services.batch_correction_service import batch_correction_service
from services.corpus_service import read_sentences, write_corpus
from services.synth_service import synthesize

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser('synth', help='generate a synthetic parallel corpus from clean sentences')
    parser.add_argument('clean', nargs='?', help='clean corpus, one sentence per line (default: the LM corpus)')
    parser.add_argument('-o', '--output', default='-', help="output corpus ('-' for stdout)")
    parser.add_argument('--seed', type=int, help='random seed (default 42)')
    parser.add_argument('--error-rate', dest='error_rate', type=float,
                        help='per-character corruption probability (default 0.1)')
    parser.add_argument('--target-sentences', dest='target_sentences', type=int,
                        help='cycle the clean corpus until this many sentences are produced')
    add_config_arguments(parser)
    add_resource_arguments(parser)
    parser.set_defaults(func=run)


def run(args) -> int:
    run_config = run_config_from_args(args, ('clean', 'output', 'target_sentences'))
    apply_logging(run_config)
    clean_path = args.clean or run_config.get('lm_corpus')

    result = synthesize(
        read_sentences(clean_path),
        table=run_config.distortion_table(),
        resources=build_resources(run_config),
        error_rate=run_config.get('error_rate'),
        seed=run_config.get('seed'),
        target_sentences=args.target_sentences,
        show_progress=not batch_correction_service.quiet
    )
    header = [
        f"run_config={json.dumps(run_config.to_dict(), ensure_ascii=False, sort_keys=True)}",
        f"stats={json.dumps(result.to_dict(), sort_keys=True)}"
    ]
    write_corpus(result.instances, args.output, header_comments=header)
    logger.info(f"Achieved corruption rate {result.achieved_rate:.4f} over {result.total_chars} characters")
    return 0
