"""
Shared CLI plumbing: run configuration, loss loading, output and error handling.
"""
import functools
import json
import logging
import sys
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterable, List, Optional

import click
from marshmallow import Schema, ValidationError, fields, validate, validates_schema

from ..config.config import Config, get_config
from ..engine.lossdsl import MAX_OUTCOMES
from ..engine.losses import BUILTINS, builtin, from_spec
from ..models.loss import LossHandle
from ..utils.errors import BadConfig, MixgeoError, UsageError
from ..utils.serializers import (dump_json, rows_csv, text_summary, to_jsonable, write_atomic,
                                 write_sidecar)

logger = logging.getLogger(__name__)

FORMATS = ('json', 'csv', 'text')


class RunConfigSchema(Schema):
    """CLI flag validation."""
    loss = fields.String(load_default=None, allow_none=True)
    spec = fields.String(load_default=None, allow_none=True)
    base = fields.String(load_default='log', validate=validate.OneOf(BUILTINS))
    n = fields.Integer(load_default=2, validate=validate.Range(min=2, max=MAX_OUTCOMES))
    eta = fields.Float(load_default=None, allow_none=True,
                       validate=validate.Range(min=0.0, min_inclusive=False))
    grid = fields.Integer(load_default=None, allow_none=True, validate=validate.Range(min=11))
    margin = fields.Float(load_default=None, allow_none=True,
                          validate=validate.Range(min=0.0, max=0.1, min_inclusive=False, max_inclusive=False))
    format = fields.String(load_default=None, allow_none=True, validate=validate.OneOf(FORMATS))
    out = fields.String(load_default=None, allow_none=True)
    seed = fields.Integer(load_default=None, allow_none=True)

    @validates_schema
    def validate_source(self, data, **kwargs):
        if (data.get('loss') is None) == (data.get('spec') is None):
            raise ValidationError("give exactly one of --loss or --spec", 'loss')


@dataclass
class RunConfig:
    """Validated flags plus the settings object every analysis receives."""
    loss: Optional[str]
    spec: Optional[str]
    base: str
    n: int
    eta: Optional[float]
    grid: Optional[int]
    margin: Optional[float]
    format: Optional[str]
    out: Optional[str]
    seed: Optional[int]
    settings: Config = field(default_factory=get_config)

    def set_outcomes(self, n: int) -> None:
        """Record the outcome count and point --grid at the matching resolution."""
        self.n = n
        if self.grid is None:
            return
        if n == 2:
            self.settings.BINARY_RESOLUTION = self.grid
        else:
            self.settings.LATTICE_RESOLUTION = {**self.settings.LATTICE_RESOLUTION, n: self.grid}

    def to_dict(self) -> Dict[str, Any]:
        flags = {k: getattr(self, k) for k in ('loss', 'spec', 'base', 'n', 'eta', 'grid', 'margin', 'seed')}
        return {"flags": flags, "defaults": self.settings.as_dict()}


def build_run_config(**flags) -> RunConfig:
    """Validate CLI flags and apply them over `get_config()`.

    Raises:
        BadConfig: When a flag fails validation.
    """
    try:
        data = RunConfigSchema().load(flags)
    except ValidationError as e:
        logger.warning(f"Run configuration rejected: {e.messages}")
        raise BadConfig("invalid run configuration", errors=e.messages)

    settings = get_config()
    if data['margin'] is not None:
        settings.MARGIN = data['margin']
    if data['seed'] is not None:
        settings.SEED = data['seed']
    cfg = RunConfig(settings=settings, **data)
    cfg.set_outcomes(cfg.n)
    return cfg


def load_loss(cfg: RunConfig) -> LossHandle:
    """The loss named by --loss, or built from the JSON file given by --spec."""
    if cfg.loss is not None:
        return builtin(cfg.loss, {'n': cfg.n})
    try:
        with open(cfg.spec) as handle:
            spec = json.load(handle)
    except (OSError, json.JSONDecodeError) as e:
        raise BadConfig(f"cannot read loss specification {cfg.spec}: {e}")
    if not isinstance(spec, dict):
        raise BadConfig(f"loss specification {cfg.spec} must be a JSON object")
    h = from_spec(spec)
    cfg.set_outcomes(h.n)
    return h


def load_base(cfg: RunConfig) -> LossHandle:
    return builtin(cfg.base, {'n': cfg.n})


def flatten(value: Any, prefix: str = '') -> List[Dict[str, Any]]:
    """Scalar leaves of a nested report as `key,value` rows."""
    value = to_jsonable(value)
    if isinstance(value, dict):
        rows = []
        for k, v in value.items():
            rows.extend(flatten(v, f"{prefix}.{k}" if prefix else k))
        return rows
    if isinstance(value, list) and any(isinstance(v, (dict, list)) for v in value):
        rows = []
        for i, v in enumerate(value):
            rows.extend(flatten(v, f"{prefix}[{i}]"))
        return rows
    if isinstance(value, list):
        value = ' '.join(repr(v) if isinstance(v, float) else str(v) for v in value)
    return [{"key": prefix, "value": value}]


def emit(command: str, cfg: RunConfig, result: Dict[str, Any], lines: Iterable[str],
         csv_text: Optional[str] = None, default_format: str = 'json') -> None:
    """Render the result in the requested format to --out or stdout."""
    fmt = cfg.format or default_format
    if fmt == 'json':
        text = dump_json(command, cfg.to_dict(), result)
    elif fmt == 'csv':
        text = csv_text if csv_text is not None else rows_csv(flatten(result), ['key', 'value'])
    else:
        text = text_summary(f"mixgeo {command}", lines)

    if cfg.out:
        from .. import __version__
        write_atomic(cfg.out, text)
        write_sidecar(cfg.out, __version__, cfg.settings.ENV_NAME, cfg.settings.THREADS, command)
        logger.info(f"{command} report written to {cfg.out}")
    else:
        click.echo(text, nl=False)


def mark(flag: Optional[bool]) -> str:
    if flag is None:
        return '-'
    return '✓' if flag else '✗'


def run_options(fn: Callable) -> Callable:
    """Flags shared by every command."""
    options = [
        click.option('--loss', default=None, help=f"Built-in loss: {', '.join(BUILTINS)}."),
        click.option('--spec', default=None, type=click.Path(dir_okay=False),
                     help="JSON loss specification file."),
        click.option('--base', default='log', show_default=True, help="Base loss for quotients and pencils."),
        click.option('--n', 'n', default=2, type=int, show_default=True, help="Number of outcomes."),
        click.option('--eta', default=None, type=float, help="Mixability level to test."),
        click.option('--grid', default=None, type=int, help="Grid points per axis."),
        click.option('--margin', default=None, type=float, help="Distance ε of the grid from the boundary."),
        click.option('--format', 'format', default=None, type=click.Choice(FORMATS), help="Output format."),
        click.option('--out', default=None, type=click.Path(dir_okay=False), help="Write output here."),
        click.option('--seed', default=None, type=int, help="Seed for sampled checks."),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def handle_errors(command: str) -> Callable:
    """Turn library errors into a logged payload on stderr and the family's exit code."""
    def decorator(fn: Callable) -> Callable:
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                return fn(*args, **kwargs)
            except MixgeoError as e:
                logger.error(f"{command} failed: {type(e).__name__}: {e.message}")
                click.echo(json.dumps(to_jsonable(e.to_dict()), sort_keys=True), err=True)
                click.get_current_context().exit(e.exit_code)
        return wrapper
    return decorator


class MixgeoGroup(click.Group):
    """Command group whose click usage errors exit with the usage code."""

    def main(self, args=None, prog_name=None, complete_var=None, standalone_mode=True, **extra):
        try:
            rv = super().main(args, prog_name, complete_var, standalone_mode=False, **extra)
        except click.ClickException as e:
            if isinstance(e, click.UsageError):
                e.exit_code = UsageError.exit_code
            if not standalone_mode:
                raise
            e.show()
            sys.exit(e.exit_code)
        except click.Abort:
            if not standalone_mode:
                raise
            click.echo("Aborted!", err=True)
            sys.exit(1)
        if standalone_mode:
            sys.exit(rv if isinstance(rv, int) else 0)
        return rv
