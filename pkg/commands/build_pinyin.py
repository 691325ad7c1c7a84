"""`build-pinyin`: write a pinyin table covering every character of the given corpora"""

import logging

from commands.common import add_config_arguments, apply_logging, run_config_from_args
from services.corpus_service import iter_lines
from services.resource_builder_service import build_pinyin_file

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser('build-pinyin', help='generate a pinyin table with pypinyin')
    parser.add_argument('inputs', nargs='+', help='text files whose characters the table must cover')
    parser.add_argument('-o', '--output', required=True, help='pinyin table to write')
    add_config_arguments(parser)
    parser.set_defaults(func=run)


def run(args) -> int:
    run_config = run_config_from_args(args, ('inputs', 'output'))
    apply_logging(run_config)
    chars = set()
    for path in args.inputs:
        for line in iter_lines(path):
            chars.update(line.replace('\t', ''))
    stats = build_pinyin_file(chars, args.output)
    print(f"Wrote {stats['written']} characters to {args.output} ({stats['missing']} without a reading)")
    return 0
