"""Command-line entry point wiring ingest, synthesis, training emission,
grid enumeration, evaluation, the comparison matrix, annotation serving,
and report re-rendering.

Every command takes ``--config`` (TOML) plus repeatable ``--set
key=value`` overrides, and ``--print-config`` to echo the resolved
configuration without running. Commands that produce artifacts write a
``resolved_config.json`` snapshot beside them sufficient to re-run the
command identically.

Exit codes: 0 success; 2 usage or configuration error; 1 runtime
failure; 3 partial success (matrix runs skipped).
"""

from __future__ import annotations

import functools
import sys
from pathlib import Path

import click

from . import __version__
from .annotation import (
    MODE_PARTITIONED,
    MODES,
    AnnotationStore,
    build_annotation_items,
    create_app,
    serve,
)
from .config import apply_overrides, get_path, load_config, require_type
from .corpus import (
    load_jsonl_corpus,
    load_squad_json,
    read_corpus_jsonl,
    read_gold_jsonl,
    sample_contexts,
    write_corpus_jsonl,
    write_gold_jsonl,
)
from .errors import ConfigError, QasynthError
from .experiment import (
    evaluate_predictions,
    paper_matrix,
    read_predictions,
    render_report,
    report_from_json,
    run_matrix,
)
from .gateway import (
    DEFAULT_API_KEY_ENV,
    ChatGateway,
    GenerationParams,
    HttpChatBackend,
    MockBackend,
    MockRule,
)
from .jsonio import canonical_dumps, iter_jsonl
from .metrics import HashEmbeddingProvider, HttpEmbeddingProvider
from .synthesis import (
    SynthesisSettings,
    ValidationPolicy,
    read_synthesis_file,
    synthesize_dataset,
)
from .train import (
    PAPER_GRID_SETS,
    emit_hyperparam_grid,
    emit_training_file,
    write_grid_file,
)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2
EXIT_PARTIAL = 3


class _Exit(click.ClickException):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.exit_code = code


def _guarded(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as exc:
            raise _Exit(str(exc), EXIT_CONFIG) from exc
        except QasynthError as exc:
            raise _Exit(str(exc), EXIT_RUNTIME) from exc

    return wrapper


def _config_options(fn):
    fn = click.option(
        "--print-config",
        is_flag=True,
        help="Print the resolved configuration as JSON and exit.",
    )(fn)
    fn = click.option(
        "--set",
        "overrides",
        multiple=True,
        metavar="KEY=VALUE",
        help="Override a config value by dotted key; value parsed as JSON when possible.",
    )(fn)
    fn = click.option(
        "--config",
        "config_path",
        type=click.Path(exists=True, dir_okay=False, path_type=Path),
        default=None,
        help="TOML configuration file.",
    )(fn)
    return fn


def _resolve(config_path: Path | None, overrides, print_config: bool) -> dict:
    config = load_config(config_path) if config_path else {}
    merged = apply_overrides(config, overrides)
    if print_config:
        click.echo(canonical_dumps(merged))
        sys.exit(EXIT_OK)
    return merged


def _snapshot(out_dir: Path, command: str, config: dict, args: dict):
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {
        "command": command,
        "version": __version__,
        "config": config,
        "args": {key: str(value) if isinstance(value, Path) else value for key, value in args.items()},
    }
    (out_dir / "resolved_config.json").write_text(
        canonical_dumps(payload) + "\n", encoding="utf-8"
    )


def _out_dir(config: dict, out_dir: Path | None) -> Path:
    if out_dir is not None:
        return out_dir
    return Path(require_type(config, "output.dir", str))


# -- shared builders --------------------------------------------------------


def _generation_params(config: dict) -> GenerationParams:
    return GenerationParams(
        model_id=require_type(config, "gateway.model_id", str, "gpt-3.5-turbo-0613"),
        temperature=require_type(config, "gateway.temperature", float, 1.0),
        max_output_tokens=require_type(config, "gateway.max_output_tokens", int, 1024),
        timeout=require_type(config, "gateway.timeout", float, 60.0),
        seed=get_path(config, "gateway.seed", None),
    )


def _mock_backend(path: Path) -> MockBackend:
    backend = MockBackend()
    for lineno, obj in iter_jsonl(path):
        rule = MockRule(
            response=obj.get("response", ""),
            failures=tuple(obj.get("failures", ())),
            prompt_tokens=obj.get("prompt_tokens"),
            completion_tokens=obj.get("completion_tokens"),
        )
        match = obj.get("match", "default")
        if match == "default":
            backend.set_default(rule)
        elif match == "digest":
            backend.script_digest(obj["key"], rule)
        elif match == "contains":
            backend.script_contains(obj["key"], rule)
        elif match == "exact":
            backend.script_exact(obj["key"], rule)
        else:
            raise ConfigError(f"{path}:{lineno}", f"unknown mock match kind {match!r}")
    return backend


def _gateway(config: dict, mock_path: Path | None) -> ChatGateway:
    if mock_path is not None:
        backend = _mock_backend(mock_path)
    else:
        backend = HttpChatBackend(
            base_url=require_type(config, "gateway.base_url", str),
            api_key_env=require_type(config, "gateway.api_key_env", str, DEFAULT_API_KEY_ENV),
        )
    return ChatGateway(
        backend,
        max_attempts=require_type(config, "gateway.max_attempts", int, 3),
        rpm=get_path(config, "gateway.rpm", None),
        max_in_flight=get_path(config, "gateway.max_in_flight", None),
    )


def _policy(config: dict) -> ValidationPolicy:
    return ValidationPolicy(
        max_question_chars=require_type(config, "validation.max_question_chars", int, 500),
        max_answer_chars=require_type(config, "validation.max_answer_chars", int, 1000),
        grounding_enabled=require_type(config, "validation.grounding_enabled", bool, False),
        grounding_threshold=require_type(config, "validation.grounding_threshold", float, 0.3),
    )


def _settings(config: dict) -> SynthesisSettings:
    return SynthesisSettings(
        generation=_generation_params(config),
        n=require_type(config, "synthesis.n", int, 1),
        prompt_mode=require_type(config, "synthesis.prompt_mode", str, "zero_shot"),
        template=require_type(config, "synthesis.template", str, "ja/v1"),
        policy=_policy(config),
        concurrency=require_type(config, "synthesis.concurrency", int, 1),
    )


def _provider(config: dict):
    endpoint = get_path(config, "metrics.embedding_endpoint", None)
    if endpoint:
        return HttpEmbeddingProvider(
            endpoint,
            model_id=require_type(config, "metrics.embedding_model", str),
            layer=require_type(config, "metrics.embedding_layer", int),
        )
    return HashEmbeddingProvider(require_type(config, "metrics.embedding_dimension", int, 8))


def _metric_args(config: dict) -> dict:
    return {
        "tokenizer": require_type(config, "metrics.tokenizer", str, "char"),
        "smoothing": require_type(config, "metrics.smoothing", str, "none"),
        "smooth_value": get_path(config, "metrics.smooth_value", None),
    }


def _price_table(config: dict) -> dict | None:
    prices = get_path(config, "gateway.prices", None)
    if prices is None:
        return None
    table = {}
    for model_id, pair in prices.items():
        if not isinstance(pair, list) or len(pair) != 2:
            raise ConfigError(
                f"gateway.prices.{model_id}", "expected [input_per_1k, output_per_1k]"
            )
        table[model_id] = (float(pair[0]), float(pair[1]))
    return table


# -- commands ---------------------------------------------------------------


@click.group()
@click.version_option(__version__, message="%(version)s")
def cli():
    """Synthetic QA dataset construction and evaluation."""


@cli.command()
@_config_options
@click.option("--out-dir", type=click.Path(file_okay=False, path_type=Path), default=None)
@_guarded
def ingest(config_path, overrides, print_config, out_dir):
    """Load a raw corpus, truncate, sample, and write contexts (+ gold QA)."""
    config = _resolve(config_path, overrides, print_config)
    corpus_format = require_type(config, "corpus.format", str)
    corpus_path = require_type(config, "corpus.path", str)
    limit = require_type(config, "corpus.truncate_limit", int, 300)
    out = _out_dir(config, out_dir)

    gold = []
    if corpus_format == "squad":
        docs, gold = load_squad_json(corpus_path, truncate_limit=limit)
    elif corpus_format == "jsonl":
        docs = load_jsonl_corpus(
            corpus_path,
            source=require_type(config, "corpus.source", str),
            truncate_limit=limit,
        )
    else:
        raise ConfigError("corpus.format", f"unknown format {corpus_format!r}")

    k = get_path(config, "corpus.sample_k", None)
    if k is not None:
        docs = sample_contexts(docs, k, require_type(config, "corpus.sample_seed", int, 0))

    out.mkdir(parents=True, exist_ok=True)
    n_docs = write_corpus_jsonl(docs, out / "contexts.jsonl")
    message = f"wrote {n_docs} contexts to {out / 'contexts.jsonl'}"
    if gold:
        n_gold = write_gold_jsonl(gold, out / "gold.jsonl")
        message += f" and {n_gold} gold QA pairs to {out / 'gold.jsonl'}"
    _snapshot(out, "ingest", config, {"out_dir": out})
    click.echo(message)


@cli.command()
@_config_options
@click.option("--contexts", "contexts_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), default=None)
@click.option("--mock", "mock_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), default=None, help="Scripted mock backend (JSONL of match rules) instead of a live endpoint.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False, path_type=Path), default=None)
@_guarded
def synthesize(config_path, overrides, print_config, contexts_path, mock_path, out_path):
    """Generate QA pairs for every context; appends records, resumable."""
    config = _resolve(config_path, overrides, print_config)
    if contexts_path is None:
        contexts_path = Path(require_type(config, "corpus.contexts_file", str))
    docs = read_corpus_jsonl(contexts_path)
    out = out_path if out_path is not None else _out_dir(config, None) / "synthesis.jsonl"
    out.parent.mkdir(parents=True, exist_ok=True)
    gateway = _gateway(config, mock_path)
    stats = synthesize_dataset(
        docs, gateway, _settings(config), out, price_table=_price_table(config)
    )
    _snapshot(
        out.parent,
        "synthesize",
        config,
        {"contexts": contexts_path, "mock": mock_path, "out": out},
    )
    click.echo(
        f"processed {stats.contexts_processed} contexts -> {stats.pairs_accepted} pairs "
        f"({canonical_dumps(dict(sorted(stats.status_counts.items())))}) in {out}"
    )


@cli.command(name="emit-train")
@_config_options
@click.option("--synthesis", "synthesis_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), default=None, help="Synthesis records to emit training data from.")
@click.option("--gold", "gold_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), default=None, help="Gold QA file for the human-baseline training set.")
@click.option("--contexts", "contexts_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False, path_type=Path), default=None)
@_guarded
def emit_train(config_path, overrides, print_config, synthesis_path, gold_path, contexts_path, out_path):
    """Emit prompt/response fine-tuning JSONL from synthesis records or gold QA."""
    config = _resolve(config_path, overrides, print_config)
    if (synthesis_path is None) == (gold_path is None):
        raise ConfigError("emit-train", "pass exactly one of --synthesis or --gold")
    docs = read_corpus_jsonl(contexts_path)
    if synthesis_path is not None:
        records, _ = read_synthesis_file(synthesis_path)
        source: object = records
        default_name = "train.jsonl"
    else:
        source = read_gold_jsonl(gold_path)
        default_name = "train_human.jsonl"
    out = out_path if out_path is not None else _out_dir(config, None) / default_name
    out.parent.mkdir(parents=True, exist_ok=True)
    count = emit_training_file(source, docs, out)
    _snapshot(
        out.parent,
        "emit-train",
        config,
        {"synthesis": synthesis_path, "gold": gold_path, "contexts": contexts_path, "out": out},
    )
    click.echo(f"wrote {count} training examples to {out}")


@cli.command()
@_config_options
@click.option("--paper-faithful/--no-paper-faithful", default=True, help="Use the published search ranges (270 configs).")
@click.option("--out", "out_path", type=click.Path(dir_okay=False, path_type=Path), default=None)
@_guarded
def grid(config_path, overrides, print_config, paper_faithful, out_path):
    """Enumerate the LoRA hyperparameter grid as JSONL."""
    config = _resolve(config_path, overrides, print_config)
    if paper_faithful:
        sets = PAPER_GRID_SETS
    else:
        sets = {name: get_path(config, f"grid.{name}", list(values)) for name, values in PAPER_GRID_SETS.items()}
    configs = emit_hyperparam_grid(sets)
    out = out_path if out_path is not None else _out_dir(config, None) / "grid.jsonl"
    out.parent.mkdir(parents=True, exist_ok=True)
    count = write_grid_file(configs, out)
    _snapshot(out.parent, "grid", config, {"paper_faithful": paper_faithful, "out": out})
    click.echo(f"wrote {count} configs to {out}")


@cli.command()
@_config_options
@click.option("--predictions", "predictions_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True)
@click.option("--gold", "gold_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True)
@click.option("--label", default="run", show_default=True)
@click.option("--out-dir", type=click.Path(file_okay=False, path_type=Path), default=None)
@_guarded
def evaluate(config_path, overrides, print_config, predictions_path, gold_path, label, out_dir):
    """Score one predictions file against gold answers (BLEU + embedding F1)."""
    config = _resolve(config_path, overrides, print_config)
    eval_set = read_gold_jsonl(gold_path)
    report = evaluate_predictions(
        label,
        read_predictions(predictions_path),
        eval_set,
        _provider(config),
        **_metric_args(config),
    )
    out = _out_dir(config, out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(render_report([report], "json") + "\n", encoding="utf-8")
    _snapshot(out, "evaluate", config, {"predictions": predictions_path, "gold": gold_path, "label": label})
    click.echo(render_report([report], "markdown"))


@cli.command()
@_config_options
@click.option("--predictions-dir", type=click.Path(exists=True, file_okay=False, path_type=Path), required=True)
@click.option("--gold", "gold_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True)
@click.option("--out-dir", type=click.Path(file_okay=False, path_type=Path), default=None)
@_guarded
def matrix(config_path, overrides, print_config, predictions_dir, gold_path, out_dir):
    """Run the 14-row comparison matrix from per-run predictions files."""
    config = _resolve(config_path, overrides, print_config)
    eval_set = read_gold_jsonl(gold_path)
    result = run_matrix(
        paper_matrix(),
        eval_set,
        predictions_dir,
        _provider(config),
        **_metric_args(config),
    )
    out = _out_dir(config, out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if result.reports:
        for fmt, name in (("json", "report.json"), ("markdown", "report.md"), ("csv", "report.csv")):
            rendered = render_report(result.reports, fmt, skipped=result.skipped)
            (out / name).write_text(rendered + ("\n" if fmt == "json" else ""), encoding="utf-8")
        click.echo(render_report(result.reports, "markdown", skipped=result.skipped))
    _snapshot(out, "matrix", config, {"predictions_dir": predictions_dir, "gold": gold_path})
    if result.skipped:
        for skip in result.skipped:
            click.echo(f"skipped {skip.label}: {skip.reason}", err=True)
        sys.exit(EXIT_PARTIAL)
    click.echo(f"evaluated {len(result.reports)} runs")


@cli.command(name="annotate-serve")
@_config_options
@click.option("--log", "log_path", type=click.Path(dir_okay=False, path_type=Path), default=None, help="Event log file (created if missing).")
@click.option("--gold", "gold_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), default=None)
@click.option("--contexts", "contexts_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), default=None)
@click.option("--predictions", "predictions_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), default=None, help="Answers to judge; omit to judge the gold answers themselves.")
@click.option("--system-label", default=None, help="Label stored (never shown to judges) for the judged system.")
@click.option("--judges", default=None, help="Comma-separated judge ids for a new session.")
@click.option("--sample-size", type=int, default=None)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--mode", type=click.Choice(MODES), default=MODE_PARTITIONED, show_default=True)
@click.option("--session-id", default=None)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8787, show_default=True)
@click.option("--create-only", is_flag=True, help="Create the session and exit without serving.")
@_guarded
def annotate_serve(
    config_path, overrides, print_config, log_path, gold_path, contexts_path,
    predictions_path, system_label, judges, sample_size, seed, mode, session_id,
    host, port, create_only,
):
    """Serve the judging API, optionally creating a session from files first."""
    import os

    config = _resolve(config_path, overrides, print_config)
    if log_path is None:
        log_path = Path(require_type(config, "annotation.log_path", str))
    store = AnnotationStore(log_path)

    if judges is not None:
        if gold_path is None or contexts_path is None:
            raise ConfigError("annotate-serve", "--judges needs --gold and --contexts")
        eval_set = read_gold_jsonl(gold_path)
        contexts = {d.id: d for d in read_corpus_jsonl(contexts_path)}
        if predictions_path is not None:
            answers = read_predictions(predictions_path)
            label = system_label or predictions_path.stem
        else:
            answers = {g.question_id: g.answers[0] for g in eval_set}
            label = system_label or "gold"
        items = build_annotation_items(eval_set, contexts, answers, label)
        session = store.create_session(
            items,
            judges=[j.strip() for j in judges.split(",") if j.strip()],
            sample_size=sample_size,
            seed=seed,
            mode=mode,
            session_id=session_id,
        )
        click.echo(f"created session {session.session_id} with {len(session.items)} items")

    _snapshot(log_path.parent, "annotate-serve", config, {"log": log_path})
    if create_only:
        return
    token = os.environ.get("QASYNTH_JUDGE_TOKEN") or None
    click.echo(f"serving on http://{host}:{port} (log: {log_path})")
    serve(store, host=host, port=port, judge_token=token)


@cli.command()
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True, help="A report.json produced by evaluate or matrix.")
@click.option("--format", "fmt", type=click.Choice(["markdown", "csv", "json"]), default="markdown", show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False, path_type=Path), default=None)
@_guarded
def report(input_path, fmt, out_path):
    """Re-render a stored report in another format."""
    import json as _json

    payload = _json.loads(Path(input_path).read_text(encoding="utf-8"))
    reports = [report_from_json(obj) for obj in payload["reports"]]
    from .experiment import SkippedRun

    skipped = [SkippedRun(s["label"], s["reason"]) for s in payload.get("skipped", [])]
    rendered = render_report(reports, fmt, skipped=skipped)
    if out_path is not None:
        Path(out_path).write_text(rendered + ("\n" if fmt == "json" else ""), encoding="utf-8")
        click.echo(f"wrote {out_path}")
    else:
        click.echo(rendered)


def main(argv=None):
    return cli(args=argv)


if __name__ == "__main__":
    main()
