"""Command-line entry point: export-embeddings."""

from __future__ import annotations

import logging
import sys

import click

from . import __version__
from .exporter import (DEFAULT_BATCH, DEFAULT_MODEL, ModelUnavailableError,
                       export)


@click.command("export-embeddings")
@click.version_option(__version__)
@click.option("--keywords", "keywords_path", required=True,
              type=click.Path(dir_okay=False),
              help="Keyword list, one canonical keyword per line.")
@click.option("--model", "model_name", default=DEFAULT_MODEL,
              show_default=True,
              help="Sentence-encoder model name or local path.")
@click.option("--out", "out_path", required=True, type=click.Path(),
              help="Embedding file destination (line-delimited JSON).")
@click.option("--batch", "batch_size", default=DEFAULT_BATCH,
              show_default=True, help="Encoding batch size.")
def main(keywords_path: str, model_name: str, out_path: str,
         batch_size: int) -> None:
    """Encode a keyword list and write the embedding file the forecasting
    core consumes."""
    logging.basicConfig(level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        summary = export(keywords_path, model_name, out_path, batch_size)
    except ModelUnavailableError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    except (OSError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    click.echo(f"exported {summary.count} keywords (dim {summary.dim}, "
               f"model {summary.model}, {summary.duplicates_dropped} "
               f"duplicates dropped) to {out_path}")


if __name__ == "__main__":
    main()
