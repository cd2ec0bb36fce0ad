#!/usr/bin/env python3
"""
DnIRB Command Line
==================

Entry point for `python -m dnirb`. Subcommands live in dnirb.commands, one
module per workflow:
1. add-noise, noise-hist       (noise_commands)
2. train, gradcheck            (train_commands)
3. denoise, eval               (eval_commands)
4. patches, rerun              (data_commands)

Option values come from, in order of precedence: command-line flags, the
--config key=value file, built-in defaults. Library errors are logged and
mapped to exit codes (2 usage, 3 data, 4 numeric abort, 5 checkpoint).
"""

import logging
from pathlib import Path
from typing import Optional

import click

from dnirb import __version__
from dnirb.commands.data_commands import patches_command, rerun_command
from dnirb.commands.eval_commands import denoise_command, eval_command
from dnirb.commands.noise_commands import add_noise_command, noise_hist_command
from dnirb.commands.train_commands import gradcheck_command, train_command
from dnirb.config import load_config_file, settings
from dnirb.errors import EXIT_DATA, DnIRBError

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def configure_logging(level: str, log_file: Optional[str] = None) -> None:
    handlers = [logging.StreamHandler()]
    if log_file:
        handlers.append(logging.FileHandler(log_file))
    logging.basicConfig(level=getattr(logging, level.upper(), logging.INFO), format=LOG_FORMAT, handlers=handlers)


class DnIRBGroup(click.Group):
    """click group that turns library errors into logged, coded exits"""

    def invoke(self, ctx: click.Context):
        try:
            return super().invoke(ctx)
        except DnIRBError as e:
            logger.error(f"{type(e).__name__}: {e}")
            click.echo(f"Error: {e}", err=True)
            ctx.exit(e.exit_code)
        except OSError as e:
            logger.error(f"I/O error: {e}")
            click.echo(f"Error: {e}", err=True)
            ctx.exit(EXIT_DATA)


@click.group(cls=DnIRBGroup, context_settings={"help_option_names": ["-h", "--help"]})
@click.option("--config", "config_file", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="key=value file supplying option defaults")
@click.option("--threads", type=click.IntRange(min=1), default=None,
              help="Worker threads for training and evaluation (default: DNIRB_THREADS or 1)")
@click.option("-v", "--verbose", is_flag=True, help="Debug logging")
@click.version_option(__version__, prog_name="dnirb")
@click.pass_context
def cli(ctx: click.Context, config_file: Optional[Path], threads: Optional[int], verbose: bool) -> None:
    """Train, run and evaluate DnIRB thermal image denoisers."""
    configure_logging("DEBUG" if verbose else settings.log_level, settings.log_file)
    ctx.ensure_object(dict)
    file_values = load_config_file(config_file) if config_file else {}
    if threads is None:
        threads = int(file_values.get("threads", settings.threads))
    ctx.obj["threads"] = threads
    ctx.obj["config_file"] = str(config_file) if config_file else None
    # one flat key=value namespace, offered to every subcommand
    ctx.default_map = {name: dict(file_values) for name in ctx.command.commands}
    logger.debug(f"dnirb {__version__}: threads={threads}, config={config_file}")


cli.add_command(add_noise_command)
cli.add_command(noise_hist_command)
cli.add_command(train_command)
cli.add_command(gradcheck_command)
cli.add_command(denoise_command)
cli.add_command(eval_command)
cli.add_command(patches_command)
cli.add_command(rerun_command)


def main() -> None:
    cli(prog_name="dnirb", obj={})


if __name__ == "__main__":
    main()
