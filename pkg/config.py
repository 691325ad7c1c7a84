"""
Run configuration resolution.

Precedence per key: command-line flag > CSC_MIX_* environment variable
(a local .env is loaded first) > --config key=value file > built-in default.
"""

import logging
import os
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Mapping, Optional

from dotenv import dotenv_values, load_dotenv

from exceptions import ConfigError
from models import CandidatePolicy, MixtureConfig, preset_config
from services.distortion_service import RESOURCE_DIR, DistortionTable

# Load environment variables
load_dotenv()

logger = logging.getLogger(__name__)

ENV_PREFIX = 'CSC_MIX_'

TRUE_VALUES = {'true', '1', 'yes', 'on'}
FALSE_VALUES = {'false', '0', 'no', 'off'}


def parse_bool(value: Any) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in TRUE_VALUES:
        return True
    if text in FALSE_VALUES:
        return False
    raise ValueError(f"'{value}' is not a boolean")


def _optional_str(value: Any) -> Optional[str]:
    if value is None:
        return None
    text = str(value).strip()
    return text or None


def _log_level(value: Any) -> str:
    level = str(value).strip().upper()
    if level not in ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL'):
        raise ValueError(f"'{value}' is not a log level")
    return level


# key -> (parser, default)
CONFIG_KEYS: Dict[str, tuple] = {
    'alpha': (float, 0.5),
    'beta': (float, 0.9),
    'beam_size': (int, 12),
    'dm_enabled': (parse_bool, True),
    'fr_enabled': (parse_bool, True),
    'top_k_classifier': (int, 8),
    'include_confusion': (parse_bool, True),
    'include_identity': (parse_bool, True),
    'max_candidates': (int, 16),
    'lm_order': (int, 3),
    'lm_k': (float, 0.001),
    'lm_multi_tokens': (int, 32),
    'temperature': (float, 1.0),
    'max_workers': (int, 4),
    'exhaustive_bound': (int, 2_000_000),
    'seed': (int, 42),
    'error_rate': (float, 0.1),
    'distortion_table': (_optional_str, None),
    'pinyin_path': (_optional_str, os.path.join(RESOURCE_DIR, 'pinyin.tsv')),
    'shape_path': (_optional_str, os.path.join(RESOURCE_DIR, 'shape.tsv')),
    'fuzzy_path': (_optional_str, os.path.join(RESOURCE_DIR, 'fuzzy.tsv')),
    'lm_path': (_optional_str, None),
    'lm_corpus': (_optional_str, os.path.join(RESOURCE_DIR, 'clean_corpus.txt')),
    'classifier_corpus': (_optional_str, None),
    'log_level': (_log_level, 'INFO'),
    'quiet': (parse_bool, False),
}


def env_name(key: str) -> str:
    return ENV_PREFIX + key.upper()


def _parse(key: str, value: Any, source: str) -> Any:
    parser: Callable[[Any], Any] = CONFIG_KEYS[key][0]
    try:
        return parser(value)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Invalid value for '{key}' from {source}: {e}") from e


def read_config_file(path: str) -> Dict[str, str]:
    """
    Flat key=value file. Keys may be bare ('alpha') or prefixed ('CSC_MIX_ALPHA').

    Raises:
        ConfigError: missing file or unknown key
    """
    if not os.path.exists(path):
        raise ConfigError(f"Config file not found: {path}")
    values: Dict[str, str] = {}
    for raw_key, value in dotenv_values(path).items():
        key = raw_key.strip()
        if key.upper().startswith(ENV_PREFIX):
            key = key[len(ENV_PREFIX):]
        key = key.lower()
        if key not in CONFIG_KEYS:
            raise ConfigError(f"{path}: unknown config key '{raw_key}'")
        values[key] = value if value is not None else ''
    return values


@dataclass(frozen=True)
class RunConfig:
    """
    Fully resolved configuration of one run. `sources` records where each
    value came from (flag, env, file or default); `parameters` holds the
    subcommand's own flags (input paths, grid lists).
    """
    subcommand: str
    values: Dict[str, Any]
    sources: Dict[str, str]
    parameters: Dict[str, Any] = field(default_factory=dict)

    def get(self, key: str) -> Any:
        return self.values[key]

    def candidate_policy(self) -> CandidatePolicy:
        return CandidatePolicy(
            top_k_classifier=self.values['top_k_classifier'],
            include_confusion=self.values['include_confusion'],
            include_identity=self.values['include_identity'],
            max_candidates=self.values['max_candidates']
        )

    def mixture_config(self, preset: Optional[str] = None) -> MixtureConfig:
        config = MixtureConfig(
            alpha=self.values['alpha'],
            beta=self.values['beta'],
            beam_size=self.values['beam_size'],
            dm_enabled=self.values['dm_enabled'],
            fr_enabled=self.values['fr_enabled'],
            candidate_policy=self.candidate_policy(),
            exhaustive_bound=self.values['exhaustive_bound']
        )
        return preset_config(preset, config) if preset else config

    def distortion_table(self) -> DistortionTable:
        spec = self.values['distortion_table']
        if not spec:
            return DistortionTable()
        try:
            return DistortionTable.from_string(spec)
        except ValueError as e:
            raise ConfigError(f"Invalid distortion_table '{spec}': {e}") from e

    def to_dict(self) -> Dict[str, Any]:
        return {
            'subcommand': self.subcommand,
            'values': dict(sorted(self.values.items())),
            'sources': dict(sorted(self.sources.items())),
            'parameters': dict(sorted(self.parameters.items()))
        }


def resolve_run_config(subcommand: str, flags: Optional[Mapping[str, Any]] = None,
                       config_path: Optional[str] = None,
                       environ: Optional[Mapping[str, str]] = None,
                       parameters: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """
    Resolve every config key. `flags` holds command-line values, with None
    meaning the flag was not given.

    Raises:
        ConfigError: an unparsable value or an unknown config-file key
    """
    flags = {key: value for key, value in (flags or {}).items() if value is not None}
    environ = os.environ if environ is None else environ
    file_values = read_config_file(config_path) if config_path else {}

    values: Dict[str, Any] = {}
    sources: Dict[str, str] = {}
    for key, (_, default) in CONFIG_KEYS.items():
        if key in flags:
            values[key], sources[key] = _parse(key, flags[key], 'flag'), 'flag'
        elif env_name(key) in environ:
            values[key], sources[key] = _parse(key, environ[env_name(key)], env_name(key)), 'env'
        elif key in file_values:
            values[key], sources[key] = _parse(key, file_values[key], config_path), 'file'
        else:
            values[key], sources[key] = default, 'default'

    unknown = set(flags) - set(CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"Unknown configuration keys: {', '.join(sorted(unknown))}")

    run_config = RunConfig(subcommand=subcommand, values=values, sources=sources,
                           parameters=dict(parameters or {}))
    logger.debug(f"Resolved run config: {run_config.to_dict()}")
    return run_config
