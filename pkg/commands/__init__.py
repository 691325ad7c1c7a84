"""Subcommand modules; each exposes register(subparsers)"""

from commands import build_pinyin, compare, correct, evaluate, sweep, synth, train_lm

COMMAND_MODULES = (correct, evaluate, sweep, synth, train_lm, build_pinyin, compare)


def register_all(subparsers) -> None:
    for module in COMMAND_MODULES:
        module.register(subparsers)
