"""The ``extract`` command: corpus XML + checkpoint in, embedding file out."""

from __future__ import annotations

import logging
import sys
from pathlib import Path

import click

from senseknn.corpus import Split, parse_lexical_sample
from senseknn.embedstore import LayerPolicy
from senseknn.errors import SenseknnError

from .extract import ExtractionSpec, extract

_LAYERS = {"final": LayerPolicy.FINAL_LAYER, "concat4": LayerPolicy.CONCAT_LAST4}


@click.command("extract")
@click.option("--model", "model_id", required=True,
              help="Checkpoint identifier or local path.")
@click.option("--layer", type=click.Choice(sorted(_LAYERS)), default="final",
              show_default=True, help="Hidden-state policy for the head vector.")
@click.option("--xml", "xml_path", required=True, help="Lexical-sample XML.")
@click.option("--key", "key_path", default=None, help="Answer key file.")
@click.option("--out", "out_path", required=True, help="Output .cwe file.")
@click.option("--split", type=click.Choice(["train", "test"]), default="train",
              show_default=True)
@click.option("--max-len", type=int, default=512, show_default=True)
@click.option("--batch-size", type=int, default=8, show_default=True)
@click.option("--device", default="cpu", show_default=True)
@click.option("--debug-jsonl", "debug_path", default=None,
              help="Also dump records as line-delimited JSON.")
def cli(model_id, layer, xml_path, key_path, out_path, split, max_len,
        batch_size, device, debug_path) -> None:
    """Dump one contextual vector per annotated head into the binary store."""
    logging.basicConfig(level=logging.WARNING, format="%(message)s")
    xml = Path(xml_path)
    if not xml.is_file():
        raise click.UsageError(f"XML file not found: {xml_path}")
    key_bytes = None
    if key_path:
        key = Path(key_path)
        if not key.is_file():
            raise click.UsageError(f"key file not found: {key_path}")
        key_bytes = key.read_bytes()

    corpus = parse_lexical_sample(xml.read_bytes(), key_bytes, Split(split))
    spec = ExtractionSpec(
        model_id=model_id,
        layer_policy=_LAYERS[layer],
        max_length=max_len,
        device=device,
        batch_size=batch_size,
    )
    summary = extract(spec, corpus, out_path, debug_path)
    click.echo(
        f"wrote {summary.written} records (dim {summary.dim}) to {out_path}; "
        f"{summary.windowed} windowed, {len(summary.failures)} failed"
    )
    for inst_id, message in summary.failures:
        click.echo(f"  failed {inst_id}: {message}", err=True)


def main(argv: list[str] | None = None) -> None:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        sys.exit(exc.exit_code)
    except click.UsageError as exc:
        exc.show()
        sys.exit(4)
    except SenseknnError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    except Exception as exc:  # model load/runtime failures: nonzero exit
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


if __name__ == "__main__":
    main()
