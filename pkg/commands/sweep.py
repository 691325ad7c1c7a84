"""`sweep`: evaluate the cross product of alpha, beta and beam-size lists"""

import json
import logging
from itertools import product
from typing import List

from commands.common import (
    add_config_arguments, add_mixture_arguments, add_model_arguments, add_resource_arguments,
    apply_logging, build_components, parse_list, run_config_from_args, write_jsonl
)
from commands.evaluate import load_reference_corpus
from config import RunConfig
from services.batch_correction_service import SweepCell, batch_correction_service
from services.corpus_service import open_text

logger = logging.getLogger(__name__)

GRID_COLUMNS = (
    'alpha', 'beta', 'beam_size', 'dm_enabled', 'fr_enabled', 'status',
    'sentence_precision', 'sentence_recall', 'sentence_f1',
    'char_precision', 'char_recall', 'char_f1', 'fpr',
    'top1_total_sum', 'failed_records', 'error'
)


def register(subparsers) -> None:
    parser = subparsers.add_parser('sweep', help='evaluate a grid of mixture weights and beam sizes')
    parser.add_argument('corpus', help='corpus with references (id TAB source TAB reference)')
    parser.add_argument('--alphas', default='0.5', help='comma-separated alpha values')
    parser.add_argument('--betas', default='0.9', help='comma-separated beta values')
    parser.add_argument('--beam-sizes', dest='beam_sizes', default='12', help='comma-separated beam sizes')
    parser.add_argument('--grid', default='-', help="TAB-separated grid file ('-' for stdout)")
    parser.add_argument('--report', help='per-cell structured reports as JSON lines')
    add_config_arguments(parser)
    add_resource_arguments(parser)
    add_model_arguments(parser)
    add_mixture_arguments(parser)
    parser.set_defaults(func=run)


def format_grid(cells: List[SweepCell], run_config: RunConfig) -> str:
    """Grid file: a provenance comment, a header row, then one row per cell"""
    lines = [f"# run_config={json.dumps(run_config.to_dict(), ensure_ascii=False, sort_keys=True)}",
             '\t'.join(GRID_COLUMNS)]
    for cell in cells:
        row = {
            **cell.config.to_dict(),
            'status': cell.status,
            'top1_total_sum': cell.top1_total_sum,
            'failed_records': cell.failed_records,
            'error': cell.error
        }
        if cell.report is not None:
            row.update(cell.report.to_dict())
        lines.append('\t'.join('' if row.get(column) is None else str(row[column]) for column in GRID_COLUMNS))
    return '\n'.join(lines) + '\n'


def run(args) -> int:
    run_config = run_config_from_args(
        args, ('corpus', 'alphas', 'betas', 'beam_sizes', 'grid', 'report', 'preset')
    )
    apply_logging(run_config)
    alphas = parse_list(args.alphas, float, 'alphas')
    betas = parse_list(args.betas, float, 'betas')
    beam_sizes = parse_list(args.beam_sizes, int, 'beam-sizes')

    instances, skipped = load_reference_corpus(args.corpus)
    components = build_components(run_config)
    base_decoder = components.decoder(run_config, args.preset)
    grid = [
        base_decoder.config.with_overrides(alpha=alpha, beta=beta, beam_size=beam_size)
        for alpha, beta, beam_size in product(alphas, betas, beam_sizes)
    ]
    logger.info(f"Sweeping {len(grid)} cells over {len(instances)} records ({len(skipped)} skipped)")

    cells = batch_correction_service.run_sweep(instances, base_decoder, grid, components.resources,
                                               run_config.get('max_workers'))
    with open_text(args.grid, 'w') as stream:
        stream.write(format_grid(cells, run_config))

    if args.report:
        records = [{'record': 'run', 'run_config': run_config.to_dict(), 'skipped_records': skipped}]
        records.extend({'record': 'cell', **cell.to_dict()} for cell in cells)
        write_jsonl(records, args.report)

    failed = [cell for cell in cells if cell.status != 'success']
    if failed:
        logger.warning(f"{len(failed)} of {len(cells)} sweep cells failed")
    return 0
