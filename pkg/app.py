import argparse
import logging
import os
import sys
from typing import List, Optional

from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

# Configure logging early so we can use logger everywhere; stderr keeps stdout clean for corrections
logging.basicConfig(
    level=os.getenv('CSC_MIX_LOG_LEVEL', 'INFO').upper(),
    format='%(asctime)s %(levelname)s %(name)s: %(message)s',
    stream=sys.stderr
)
logger = logging.getLogger(__name__)

from commands import register_all  # noqa: E402
from exceptions import CorrectionError  # noqa: E402

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INTERNAL = 3


class UsageArgumentParser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage; usage errors here exit with 1"""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = UsageArgumentParser(
        prog='csc-mix',
        description='Mixture beam-search decoding for Chinese spelling correction'
    )
    subparsers = parser.add_subparsers(dest='command', metavar='COMMAND', parser_class=UsageArgumentParser)
    subparsers.required = True
    register_all(subparsers)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CorrectionError as e:
        logger.debug("Command failed", exc_info=True)
        print(f"csc-mix {args.command}: {type(e).__name__}: {e}", file=sys.stderr)
        return e.exit_code
    except BrokenPipeError:
        return EXIT_OK
    except Exception as e:
        logger.exception(f"Unexpected failure in {args.command}")
        print(f"csc-mix {args.command}: internal error: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == '__main__':
    sys.exit(main())
