"""
Settings resolution: static/data/config.yaml < YAML file < TOKOMPILER_SEED < command-line flags.
"""

import logging
from argparse import Namespace
from pathlib import Path
from typing import Any, Dict, Optional

import yaml
from pydantic import ValidationError

from tokompiler.errors import ConfigError, RootNotFound
from tokompiler.models import DEFAULT_SEED, RunConfig, TokompilerConfig

logger = logging.getLogger(__name__)

# flag dest -> (settings section, field)
_OVERRIDES = {
    "scope": ("anonymizer", "scope"),
    "range_lo": ("anonymizer", "range_lo"),
    "range_hi": ("anonymizer", "range_hi"),
    "min_tokens": ("filter", "min_tokens"),
    "max_bytes": ("filter", "max_bytes"),
    "token_counter": ("filter", "token_counter"),
    "target_size": ("bpe", "target_size"),
    "sample_fraction": ("bpe", "sample_fraction"),
    "order": ("ngram", "order"),
    "normalizer": ("ngram", "normalizer"),
}


DEFAULT_CONFIG = Path(__file__).parent.parent / "static" / "data" / "config.yaml"


def load_settings(path: Optional[Path] = None) -> TokompilerConfig:
    """Read a YAML settings file; no path means static/data/config.yaml.

    Without a path and without the bundled file, the built-in defaults apply.
    """
    if path is None:
        if not DEFAULT_CONFIG.is_file():
            logger.debug("No bundled config at %s, using built-in defaults", DEFAULT_CONFIG)
            return TokompilerConfig()
        path = DEFAULT_CONFIG
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f) or {}
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError(f"Failed to load config from {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping at the top level")
    try:
        return TokompilerConfig(**data)
    except ValidationError as e:
        raise ConfigError(f"Invalid config {path}: {e}") from e


def apply_overrides(settings: TokompilerConfig, args: Namespace) -> TokompilerConfig:
    data: Dict[str, Any] = settings.model_dump()
    for dest, (section, name) in _OVERRIDES.items():
        value = getattr(args, dest, None)
        if value is not None:
            data[section][name] = value
    if getattr(args, "no_number_range", False):
        data["vocab"]["include_number_range"] = False
    try:
        merged = TokompilerConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"Invalid command-line settings: {e}") from e
    if merged.anonymizer.range_lo > merged.anonymizer.range_hi:
        raise ConfigError(
            f"range_lo {merged.anonymizer.range_lo} exceeds range_hi {merged.anonymizer.range_hi}"
        )
    return merged


def _existing(path: Optional[Path], what: str) -> Optional[Path]:
    if path is not None and not Path(path).exists():
        raise ConfigError(f"{what} {path} does not exist")
    return path


def resolve_run_config(args: Namespace) -> RunConfig:
    """Validate every path and setting before any work starts."""
    settings = apply_overrides(load_settings(args.config), args)

    if args.input is None or not Path(args.input).exists():
        raise RootNotFound(f"Input {args.input} does not exist")
    if args.out is None:
        raise ConfigError("--out is required")

    try:
        run = RunConfig(
            subcommand=args.command,
            languages=args.lang or ["c", "cpp", "fortran"],
            seed=DEFAULT_SEED if args.seed is None else args.seed,
            input=args.input,
            out=args.out,
            vocab_file=_existing(getattr(args, "vocab", None), "Vocabulary file"),
            dict_dir=_existing(getattr(args, "dicts", None), "Dictionary directory"),
            bpe_file=_existing(getattr(args, "bpe", None), "BPE model"),
            strict=args.strict,
            jobs=args.jobs,
            log_every=args.log_every,
            settings=settings,
        )
    except ValidationError as e:
        raise ConfigError(f"Invalid run settings: {e}") from e

    if run.settings.filter.token_counter == "bpe" and run.bpe_file is None and run.subcommand == "corpus":
        raise ConfigError("token_counter 'bpe' needs --bpe")
    logger.debug("Resolved run config: %s", run.model_dump_json())
    return run
