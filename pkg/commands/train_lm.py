"""`train-lm`: train and save the character n-gram model"""

import logging

from commands.common import add_config_arguments, apply_logging, run_config_from_args
from services.corpus_service import read_sentences
from services.ngram_lm_service import ngram_perplexity, ngram_save, ngram_train

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser('train-lm', help='train a character n-gram model and save it')
    parser.add_argument('corpus', nargs='?', help='training corpus, one sentence per line (default: the LM corpus)')
    parser.add_argument('-o', '--output', required=True, help='model file')
    parser.add_argument('--heldout', help='report per-character perplexity on this corpus')
    parser.add_argument('--lm-order', dest='lm_order', type=int, help='n-gram order (default 3)')
    parser.add_argument('--lm-k', dest='lm_k', type=float, help='add-k smoothing constant (default 0.001)')
    parser.add_argument('--lm-multi-tokens', dest='lm_multi_tokens', type=int,
                        help='number of two-character tokens (default 32)')
    add_config_arguments(parser)
    parser.set_defaults(func=run)


def run(args) -> int:
    run_config = run_config_from_args(args, ('corpus', 'output', 'heldout'))
    apply_logging(run_config)
    sentences = read_sentences(args.corpus or run_config.get('lm_corpus'))
    model = ngram_train(sentences, order=run_config.get('lm_order'), k=run_config.get('lm_k'),
                        multi_tokens=run_config.get('lm_multi_tokens'))
    ngram_save(model, args.output)
    logger.info(f"Saved model to {args.output}")

    print(f"Training perplexity: {ngram_perplexity(model, sentences):.4f}")
    if args.heldout:
        print(f"Held-out perplexity: {ngram_perplexity(model, read_sentences(args.heldout)):.4f}")
    return 0
