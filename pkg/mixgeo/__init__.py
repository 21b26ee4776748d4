"""
Command group factory module.
"""
import logging

import click

from .utils.logger import configure_logging
from .config.config import get_config

__version__ = '0.1.0'

logger = logging.getLogger(__name__)


def create_cli() -> click.Group:
    """Command group factory for the mixgeo CLI.

    Returns:
        The click group with every command registered.
    """
    # deferred so importing the package stays light
    from .cli.common import MixgeoGroup
    from .cli.analyze import analyze_cmd
    from .cli.profile import profile_cmd
    from .cli.verify import verify_cmd
    from .cli.links import canonical_link_cmd
    from .cli.convexity import decompose_cmd, slide_check_cmd

    config = get_config()

    @click.group(cls=MixgeoGroup)
    @click.version_option(__version__, prog_name='mixgeo')
    def cli():
        """Geometric analysis of proper loss functions."""
        configure_logging('mixgeo', config.LOG_LEVEL)

    # Register commands
    for command in (analyze_cmd, profile_cmd, verify_cmd, canonical_link_cmd, decompose_cmd, slide_check_cmd):
        cli.add_command(command)
    logger.debug(f"mixgeo CLI ready ({config.ENV_NAME})")

    return cli
