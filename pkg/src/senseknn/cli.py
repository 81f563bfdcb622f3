"""Command-line entry point wiring the whole workflow.

Subcommands: stats, evaluate, tsne, mfs, inspect-embeddings.  Exit codes:
0 success, 2 input/parse problems, 3 data-consistency problems, 4 bad user
arguments.  The SENSEKNN_OUT environment variable overrides --out.
"""

from __future__ import annotations

import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import click

from . import classifier, corpus, embedstore, evaluation, tsne
from .errors import (
    ClassifierError,
    ConsistencyError,
    CorpusParseError,
    EmbeddingFormatError,
    EmptySelectionError,
    InputError,
    ProjectionError,
    SenseknnError,
    UserArgumentError,
    VectorValidationError,
    ZeroNormError,
)

DEFAULT_KS = (1, 3, 5, 7, 10, 11)

_EXIT_CODES = [
    ((InputError, CorpusParseError), 2),
    (
        (
            ConsistencyError,
            EmbeddingFormatError,
            VectorValidationError,
            ZeroNormError,
            ClassifierError,
            ProjectionError,
        ),
        3,
    ),
    ((UserArgumentError, EmptySelectionError), 4),
]


def _read_file(path: str, kind: str) -> bytes:
    p = Path(path)
    if not p.is_file():
        raise InputError(f"{kind} file not found: {path}")
    return p.read_bytes()


def _parse_ks(text: str) -> list[int]:
    try:
        ks = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise UserArgumentError(f"cannot parse k list {text!r}") from None
    if not ks or any(k < 1 for k in ks):
        raise UserArgumentError(f"k values must be positive integers, got {text!r}")
    return ks


def _resolve_out(out: str | None) -> Path | None:
    env = os.environ.get("SENSEKNN_OUT")
    chosen = env or out
    if chosen is None:
        return None
    path = Path(chosen)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_corpus(
    xml_path: str, key_path: str | None, split: corpus.Split
) -> corpus.Corpus:
    xml_bytes = _read_file(xml_path, f"{split.value} XML")
    key_bytes = _read_file(key_path, f"{split.value} key") if key_path else None
    return corpus.parse_lexical_sample(xml_bytes, key_bytes, split)


def _load_store(path: str, kind: str):
    _read_file(path, kind)  # existence check with a friendly message
    return embedstore.read_embeddings_path(path)


@dataclass
class RunConfig:
    train_xml: str | None = None
    test_xml: str | None = None
    train_key: str | None = None
    test_key: str | None = None
    train_emb: str | None = None
    test_emb: str | None = None
    ks: tuple[int, ...] = DEFAULT_KS
    out: Path | None = None
    seed: int = 0
    min_freq: int = 3


@click.group()
def cli() -> None:
    """Word sense disambiguation by cosine-kNN over stored embeddings."""


@cli.command("stats")
@click.option("--train-xml", type=str, default=None, help="Train split XML path.")
@click.option("--train-key", type=str, default=None, help="Train answer key path.")
@click.option("--test-xml", type=str, default=None, help="Test split XML path.")
@click.option("--test-key", type=str, default=None, help="Test answer key path.")
@click.option("--out", type=str, default=None, help="Directory for artifacts.")
@click.option("--json", "as_json", is_flag=True, help="Print JSON instead of a table.")
def cmd_stats(train_xml, train_key, test_xml, test_key, out, as_json) -> None:
    """Dataset overview counts for the given split files."""
    rows: list[tuple[str, corpus.StatsReport]] = []
    if train_xml:
        c = _load_corpus(train_xml, train_key, corpus.Split.TRAIN)
        rows.append(("train", corpus.corpus_stats(c)))
    if test_xml:
        c = _load_corpus(test_xml, test_key, corpus.Split.TEST)
        rows.append(("test", corpus.corpus_stats(c)))
    if not rows:
        raise UserArgumentError("stats needs --train-xml and/or --test-xml")

    table = corpus.stats_table(rows)
    payload = json.dumps(
        {"rows": [{"dataset": label, **corpus.stats_to_dict(rep)} for label, rep in rows]},
        sort_keys=True,
        indent=2,
    ) + "\n"
    click.echo(payload if as_json else table, nl=False)

    out_dir = _resolve_out(out)
    if out_dir is not None:
        (out_dir / "stats.txt").write_text(table, encoding="utf-8")
        (out_dir / "stats.json").write_text(payload, encoding="utf-8")


def _evaluate_knn(
    cfg: RunConfig, dataset: str, as_json: bool
) -> None:
    train = _load_corpus(cfg.train_xml, cfg.train_key, corpus.Split.TRAIN)
    test = _load_corpus(cfg.test_xml, cfg.test_key, corpus.Split.TEST)
    mfs_f1 = evaluation.score(evaluation.mfs_predictions(train, test), test).f1

    train_header, train_store = _load_store(cfg.train_emb, "train embeddings")
    test_header, test_store = _load_store(cfg.test_emb, "test embeddings")
    if train_header.dim != test_header.dim:
        raise ConsistencyError(
            f"train embeddings have dim {train_header.dim} but test embeddings "
            f"have dim {test_header.dim}"
        )
    if train_header.model_tag != test_header.model_tag:
        click.echo(
            f"warning: model tags differ (train {train_header.model_tag!r}, "
            f"test {test_header.model_tag!r})",
            err=True,
        )

    train_join = embedstore.join(train, train_store)
    test_join = embedstore.join(test, test_store)
    for label, joined in (("train", train_join), ("test", test_join)):
        if joined.missing_ids:
            click.echo(
                f"warning: {len(joined.missing_ids)} {label} instance(s) have no "
                "stored vector; they stay unscored",
                err=True,
            )

    index = classifier.build_index(train_join.pairs)
    preds_by_k = {}
    rows = []
    for k in cfg.ks:
        run = classifier.classify_all(index, test_join.pairs, k)
        for inst_id, message in run.errors:
            click.echo(f"warning: {inst_id}: {message}", err=True)
        preds_by_k[k] = run.predictions
        rows.append((k, evaluation.score(run.predictions, test)))
    table = evaluation.SweepTable(
        rows=tuple(rows), best_k=min(rows, key=lambda r: (-r[1].f1, r[0]))[0]
    )

    pos_k = min(cfg.ks, key=lambda k: (k != 1, k))  # k=1 when present
    breakdown = evaluation.pos_breakdown(preds_by_k[pos_k], test)

    text, payload = evaluation.report_render(
        table, breakdown, train_header.model_tag, dataset, mfs_f1
    )
    click.echo(payload if as_json else text, nl=False)

    if cfg.out is not None:
        tag = train_header.model_tag or "model"
        (cfg.out / f"report_{tag}.txt").write_text(text, encoding="utf-8")
        (cfg.out / f"report_{tag}.json").write_text(payload, encoding="utf-8")
        (cfg.out / f"report_{tag}.csv").write_text(
            evaluation.report_csv(table), encoding="utf-8"
        )
        from .plotting import render_f1_curve

        (cfg.out / f"f1_vs_k_{tag}.svg").write_bytes(
            render_f1_curve(table, tag, dataset, mfs_f1)
        )
        by_id = test.by_id()
        for k in cfg.ks:
            lines = classifier.answer_lines(preds_by_k[k], by_id)
            (cfg.out / f"answers_{tag}_k{k}.txt").write_text(
                "\n".join(lines) + "\n", encoding="utf-8"
            )


def _evaluate_mfs_only(cfg: RunConfig, dataset: str, as_json: bool) -> None:
    train = _load_corpus(cfg.train_xml, cfg.train_key, corpus.Split.TRAIN)
    test = _load_corpus(cfg.test_xml, cfg.test_key, corpus.Split.TEST)
    preds = evaluation.mfs_predictions(train, test)
    report = evaluation.score(preds, test)
    breakdown = evaluation.pos_breakdown(preds, test)
    payload = json.dumps(
        {
            "dataset": dataset,
            "mfs_f1": float(evaluation.format_pct(report.f1)),
            "attempted": report.attempted,
            "total": report.total,
            "correct": report.correct,
            "pos": [
                {
                    "pos": pos.label,
                    "correct": row.correct,
                    "total": row.total,
                    "acc": float(evaluation.format_pct(row.accuracy)),
                }
                for pos, row in breakdown.rows.items()
            ],
        },
        sort_keys=True,
        indent=2,
    ) + "\n"
    text = (
        f"dataset: {dataset}\n"
        f"MFS baseline F1: {evaluation.format_pct(report.f1)} "
        f"({report.correct}/{report.total})\n"
    )
    click.echo(payload if as_json else text, nl=False)
    if cfg.out is not None:
        (cfg.out / "mfs.json").write_text(payload, encoding="utf-8")
        (cfg.out / "mfs.txt").write_text(text, encoding="utf-8")


@cli.command("evaluate")
@click.option("--train-xml", type=str, required=True)
@click.option("--train-key", type=str, default=None)
@click.option("--test-xml", type=str, required=True)
@click.option("--test-key", type=str, default=None)
@click.option("--train-emb", type=str, default=None)
@click.option("--test-emb", type=str, default=None)
@click.option("--k", "k_list", type=str, default="1,3,5,7,10,11", show_default=True)
@click.option("--out", type=str, default=None, help="Directory for artifacts.")
@click.option("--dataset", type=str, default=None, help="Dataset label for reports.")
@click.option("--json", "as_json", is_flag=True)
@click.option("--mfs-only", is_flag=True, help="Score only the MFS baseline.")
def cmd_evaluate(
    train_xml, train_key, test_xml, test_key, train_emb, test_emb,
    k_list, out, dataset, as_json, mfs_only,
) -> None:
    """Sweep k, score micro-F1, break down by POS, report the MFS baseline."""
    cfg = RunConfig(
        train_xml=train_xml,
        test_xml=test_xml,
        train_key=train_key,
        test_key=test_key,
        train_emb=train_emb,
        test_emb=test_emb,
        ks=tuple(_parse_ks(k_list)),
        out=_resolve_out(out),
    )
    label = dataset or Path(test_xml).stem
    if mfs_only:
        _evaluate_mfs_only(cfg, label, as_json)
        return
    if not cfg.train_emb or not cfg.test_emb:
        raise UserArgumentError(
            "evaluate needs --train-emb and --test-emb (or --mfs-only)"
        )
    _evaluate_knn(cfg, label, as_json)


@cli.command("mfs")
@click.option("--train-xml", type=str, required=True)
@click.option("--train-key", type=str, default=None)
@click.option("--test-xml", type=str, required=True)
@click.option("--test-key", type=str, default=None)
@click.option("--out", type=str, default=None)
@click.option("--dataset", type=str, default=None)
@click.option("--json", "as_json", is_flag=True)
def cmd_mfs(train_xml, train_key, test_xml, test_key, out, dataset, as_json) -> None:
    """Score the most-frequent-sense baseline on the test split."""
    cfg = RunConfig(
        train_xml=train_xml,
        test_xml=test_xml,
        train_key=train_key,
        test_key=test_key,
        out=_resolve_out(out),
    )
    _evaluate_mfs_only(cfg, dataset or Path(test_xml).stem, as_json)


@cli.command("tsne")
@click.option("--train-xml", type=str, required=True)
@click.option("--train-key", type=str, default=None)
@click.option("--train-emb", type=str, required=True)
@click.option("--lexelt", "lexelts", type=str, multiple=True, required=True,
              help="Lexelt key such as bank.n; repeatable.")
@click.option("--min-freq", type=int, default=3, show_default=True,
              help="Minimum sense frequency to plot.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--perplexity", type=float, default=None)
@click.option("--iterations", type=int, default=1000, show_default=True)
@click.option("--labels", "labels_path", type=str, default=None,
              help="JSON file mapping sense keys to short labels.")
@click.option("--out", type=str, default=None)
def cmd_tsne(
    train_xml, train_key, train_emb, lexelts, min_freq, seed,
    perplexity, iterations, labels_path, out,
) -> None:
    """Project one or more lexelts' training embeddings to 2D sense maps."""
    train = _load_corpus(train_xml, train_key, corpus.Split.TRAIN)
    header, store = _load_store(train_emb, "train embeddings")
    label_map = {}
    if labels_path:
        label_map = json.loads(_read_file(labels_path, "labels").decode("utf-8"))

    available = {l.key: l for l in train.lexelts}
    out_dir = _resolve_out(out) or Path(".")
    config = tsne.ProjectionConfig(
        perplexity=perplexity, iterations=iterations, seed=seed
    )

    for key in lexelts:
        lexelt = available.get(key)
        if lexelt is None:
            raise UserArgumentError(
                f"unknown lexelt {key!r}; available: "
                + ", ".join(sorted(available))
            )
        data = tsne.build_plot_data(
            train, store, lexelt, config,
            min_freq=min_freq, model_tag=header.model_tag, labels=label_map,
        )
        svg_path = out_dir / f"{key}.svg"
        json_path = out_dir / f"{key}.json"
        svg_path.write_bytes(tsne.emit_plot(data, "svg"))
        json_path.write_bytes(tsne.emit_plot(data, "json"))
        click.echo(f"{key}: {len(data.points)} points -> {svg_path}, {json_path}")


@cli.command("inspect-embeddings")
@click.argument("emb_path", type=str)
@click.option("--head", type=int, default=5, show_default=True,
              help="How many record ids to list.")
@click.option("--json", "as_json", is_flag=True)
def cmd_inspect(emb_path, head, as_json) -> None:
    """Validate an embedding file and describe its contents."""
    header, store = _load_store(emb_path, "embeddings")
    ids = list(store)[:head]
    if as_json:
        click.echo(
            json.dumps(
                {
                    "dim": header.dim,
                    "count": header.count,
                    "model_tag": header.model_tag,
                    "layer_policy": header.layer_policy.name.lower(),
                    "first_ids": ids,
                },
                sort_keys=True,
                indent=2,
            )
        )
        return
    click.echo(f"model_tag:    {header.model_tag}")
    click.echo(f"layer_policy: {header.layer_policy.name.lower()}")
    click.echo(f"dim:          {header.dim}")
    click.echo(f"records:      {header.count}")
    for instance_id in ids:
        click.echo(f"  {instance_id}")


def main(argv: list[str] | None = None) -> None:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        sys.exit(exc.exit_code)
    except click.Abort:
        sys.exit(1)
    except click.UsageError as exc:
        exc.show()
        sys.exit(4)
    except SenseknnError as exc:
        click.echo(f"error: {exc}", err=True)
        for types, code in _EXIT_CODES:
            if isinstance(exc, types):
                sys.exit(code)
        sys.exit(3)


if __name__ == "__main__":
    main()
