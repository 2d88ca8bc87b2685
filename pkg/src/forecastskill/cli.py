"""Command-line entry point.

Every subcommand writes a report: one header line echoing the command, its
configuration, the seed and a hash of the inputs, followed by one JSON object
per line (``--format jsonl``) or aligned tables (``--format text``).

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import os
import sys
import warnings
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

from . import __version__
from .corpus import (
    CorpusError,
    CorpusFilterConfig,
    Domain,
    ForecastRecord,
    apply_filters,
    read_corpus,
)
from .extract import (
    PatternSyntaxError,
    earliest_forecast,
    evaluate_extraction,
    extract_eps,
    load_gold,
    load_patterns,
)
from .metrics import (
    COGNITIVE_METRICS,
    FINANCIAL_METRICS,
    METRIC_NAMES,
    TEXTUAL_METRICS,
    Lexicons,
    author_aggregate,
    compute_many,
)
from .model import (
    ModelFormatError,
    TrainConfig,
    crossval_accuracy,
    design_matrix,
    early_identification,
    financial_split,
    fit_text_classifier,
    label_extremes,
    load_model,
    save_model,
    top_features,
)
from .scoring import (
    analyst_error_table,
    assign_groups,
    calibration_curve,
    rank_forecasters,
    score_corpus,
    select_groups,
    ForecasterProfile,
    Group,
)
from .stats import compare_groups
from .synth import SynthConfig, generate_corpus, generate_eps_notes, write_truth
from .textproc import LexiconFormatError


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------------------
# Reports


@dataclass
class RunConfig:
    """What a run was asked to do; echoed at the top of every report."""

    command: str
    config: dict[str, Any]
    seed: int
    inputs: list[tuple[str, bytes]] = field(default_factory=list)

    def input_hash(self) -> str:
        h = hashlib.sha256()
        for name, data in self.inputs:
            h.update(name.encode("utf-8") + b"\0")
            h.update(hashlib.sha256(data).digest())
        return h.hexdigest()

    def header(self) -> dict:
        return {
            "_type": "header",
            "command": self.command,
            "version": __version__,
            "config": self.config,
            "seed": self.seed,
            "input_sha256": self.input_hash(),
        }


_NOT_ECHOED = {"command", "func", "threads", "output", "format", "seed"}
_PATH_ARGS = {"input", "truth", "gold", "patterns", "model", "model_out",
              "liwc", "function_lexicon", "hedges", "connectives", "sentiment", "financial", "easy_words"}


def _run_config(args) -> RunConfig:
    cfg = {}
    for k, v in sorted(vars(args).items()):
        if k in _NOT_ECHOED:
            continue
        if k in _PATH_ARGS and v is not None and v != "-":
            v = str(Path(v).resolve())
        cfg[k] = list(v) if isinstance(v, tuple) else v
    return RunConfig(args.command, cfg, args.seed)


def _dumps(row: dict) -> str:
    return json.dumps(row, sort_keys=True, ensure_ascii=False)


def _fmt(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, bool):
        return "yes" if v else "no"
    if isinstance(v, float):
        return f"{v:.4g}"
    if isinstance(v, (list, dict)):
        return json.dumps(v, sort_keys=True)
    return str(v)


def _table(rows: Sequence[dict], columns: Sequence[str]) -> list[str]:
    cells = [list(columns)] + [[_fmt(r.get(c)) for c in columns] for r in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(columns))]
    out = []
    for n, row in enumerate(cells):
        out.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
        if n == 0:
            out.append("  ".join("-" * w for w in widths))
    return out


def _comparison_table(rows: Sequence[dict]) -> list[str]:
    """Group comparison with arrows for p thresholds and * for Bonferroni survivors."""
    shown = [
        {
            "metric": r["metric"],
            "top": r["mean_top"],
            "bottom": r["mean_bottom"],
            "p": r["p_value"],
            "sig": r["arrows"] + ("*" if r["passes_bonferroni"] else ""),
        }
        for r in rows
    ]
    return _table(shown, ["metric", "top", "bottom", "p", "sig"])


def render_text(header: dict, rows: Sequence[dict]) -> str:
    lines = [f"# {header['command']} (forecastskill {header['version']})",
             f"# seed: {header['seed']}",
             f"# input_sha256: {header['input_sha256']}",
             f"# config: {json.dumps(header['config'], sort_keys=True)}"]
    blocks: dict[str, list[dict]] = {}
    for r in rows:
        blocks.setdefault(r["_type"], []).append(r)
    for kind, block in blocks.items():
        lines.append("")
        lines.append(f"[{kind}]")
        if kind == "comparison":
            lines.extend(_comparison_table(block))
            lines.append("arrows: direction of top vs bottom mean; 3/2/1 for p < 0.001/0.01/0.05; * passes Bonferroni")
            continue
        columns = []
        for r in block:
            columns.extend(k for k in r if k != "_type" and k not in columns)
        lines.extend(_table(block, columns))
    return "\n".join(lines) + "\n"


def render(run: RunConfig, rows: Sequence[dict], fmt: str) -> str:
    header = run.header()
    if fmt == "text":
        return render_text(header, rows)
    return "".join(_dumps(r) + "\n" for r in [header, *rows])


# ---------------------------------------------------------------------------
# Input


def _read_input(args, run: RunConfig, path: str | None = None, label: str = "input") -> str:
    path = args.input if path is None else path
    if path is None or path == "-":
        data = sys.stdin.buffer.read()
    else:
        try:
            data = Path(path).read_bytes()
        except OSError as exc:
            raise DataError(f"cannot read {path}: {exc.strerror}") from None
    run.inputs.append((label, data))
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise DataError(f"{path or '<stdin>'}: not UTF-8 ({exc.reason})") from None


def _input_format(args, text: str) -> str:
    if getattr(args, "input_format", None):
        return args.input_format
    if args.input and str(args.input).lower().endswith(".csv"):
        return "csv"
    first = next((ln for ln in text.splitlines() if ln.strip()), "")
    return "jsonl" if first.lstrip().startswith("{") or not first else "csv"


def _load_records(args, run: RunConfig, allow_errors: bool = False):
    text = _read_input(args, run)
    records, errors = read_corpus(io.StringIO(text, newline=""), _input_format(args, text))
    if errors and not allow_errors:
        for e in errors[:10]:
            print(f"error: {e}", file=sys.stderr)
        more = " (first 10 shown)" if len(errors) > 10 else ""
        raise DataError(f"{len(errors)} invalid record(s) in input{more}")
    return records, errors


def _json_rows(text: str) -> list[dict]:
    rows = []
    for n, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"line {n}: invalid JSON ({exc.msg})") from None
        if not isinstance(row, dict):
            raise DataError(f"line {n}: expected a JSON object")
        rows.append(row)
    return rows


def _int_list(text: str) -> tuple[int, ...]:
    try:
        values = tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _name_list(text: str) -> tuple[str, ...]:
    return tuple(x.strip() for x in text.split(",") if x.strip())


# ---------------------------------------------------------------------------
# Shared pipeline pieces


def _filter_config(args) -> CorpusFilterConfig:
    return CorpusFilterConfig(
        min_tokens_per_justification=args.min_tokens,
        max_quote_ratio=args.max_quote_ratio,
        min_forecasts_per_author=args.min_forecasts,
        require_english=not args.no_english_check,
    )


def _maybe_filter(args, records, rows: list[dict]):
    if args.no_filter:
        return list(records)
    kept, report = apply_filters(records, _filter_config(args))
    rows.append({"_type": "filter_report", **report.as_dict()})
    return kept


def _lexicons(args) -> Lexicons:
    paths = {
        "liwc": args.liwc,
        "function": args.function_lexicon,
        "hedges": args.hedges,
        "connectives": args.connectives,
        "sentiment": args.sentiment,
        "financial": args.financial,
        "easy_words": args.easy_words,
    }
    if all(v is None for v in paths.values()):
        return Lexicons.default()
    return Lexicons.with_overrides(paths)


def _domain(records: Sequence[ForecastRecord], requested: str) -> Domain:
    if requested != "auto":
        return Domain(requested)
    kinds = {r.domain_tag for r in records}
    if kinds == {Domain.EPS}:
        return Domain.EPS
    return Domain.BINARY


def _ranked_profiles(records: Sequence[ForecastRecord]) -> tuple[list, list[ForecasterProfile]]:
    binary = [r for r in records if r.domain_tag is Domain.BINARY and r.justification.strip()]
    scored, _ = score_corpus(binary)
    if not scored:
        raise DataError("no resolved binary forecasts with justifications to score")
    z = {s.record_id: s.z for s in scored}
    return binary, rank_forecasters(binary, z)


def _skill_groups(args, records, rows):
    """Filtered records, top-K and bottom-K author ids for the binary domain."""
    kept = _maybe_filter(args, [r for r in records if r.domain_tag is Domain.BINARY], rows)
    kept, profiles = _ranked_profiles(kept)
    top, bottom = select_groups(profiles, args.k)
    rows.append({"_type": "groups", "k": args.k, "n_ranked": len(profiles),
                 "top": [p.author_id for p in top], "bottom": [p.author_id for p in bottom]})
    return kept, [p.author_id for p in top], [p.author_id for p in bottom]


def _eps_labels(args, records, rows) -> tuple[list[ForecastRecord], dict[str, int]]:
    eps = [r for r in records if r.domain_tag is Domain.EPS]
    table, excluded = analyst_error_table(eps, trim=args.trim, min_n=args.min_analyst_forecasts)
    if not table:
        raise DataError("no analyst has enough resolved EPS forecasts")
    labels = label_extremes({e.record_id: e.std_error for e in table}, args.k)
    rows.append({"_type": "eps_labels", "k": args.k, "n_errors": len(table), "excluded": excluded,
                 "n_accurate": sum(labels.values()), "n_inaccurate": len(labels) - sum(labels.values())})
    return eps, labels


def _by_author(records) -> dict[str, list[ForecastRecord]]:
    out: dict[str, list[ForecastRecord]] = defaultdict(list)
    for r in records:
        out[r.author_id].append(r)
    for recs in out.values():
        recs.sort(key=lambda r: (r.timestamp, r.record_id))
    return out


def _dense_names(features: Sequence[str]) -> tuple[str, ...]:
    names: list[str] = []
    for f in features:
        if f == "textual":
            names.extend(TEXTUAL_METRICS)
        elif f == "cognitive":
            names.extend(COGNITIVE_METRICS)
        elif f == "financial":
            names.extend(FINANCIAL_METRICS)
        elif f != "ngrams":
            raise UsageError(f"unknown feature group {f!r} (choose from ngrams, textual, cognitive, financial)")
    return tuple(names)


def _train_config(args) -> TrainConfig:
    return TrainConfig(learning_rate=args.lr, l2=args.l2, epochs=args.epochs, tol=args.tol, seed=args.seed)


def _author_dataset(args, records, rows, dense_names=None):
    """One combined document per top/bottom author, plus author metric rows."""
    kept, top, bottom = _skill_groups(args, records, rows)
    groups = _by_author(kept)
    authors = sorted(top) + sorted(bottom)
    docs = [[r.justification for r in groups[a]] for a in authors]
    labels = [1] * len(top) + [0] * len(bottom)
    if dense_names is None:
        dense_names = _dense_names(args.features)
    dense_rows = None
    if dense_names:
        lex = _lexicons(args)
        dense_rows = []
        for a in authors:
            vecs = compute_many([r.justification for r in groups[a]], lex, args.threads)
            dense_rows.append(author_aggregate(vecs).as_dict())
    return authors, docs, labels, dense_rows, dense_names


def _eps_dataset(args, records, rows, dense_names=None):
    eps, labels = _eps_labels(args, records, rows)
    train, dev, test = financial_split(eps, labels, eval_frac=args.eval_frac, seed=args.seed)
    if dense_names is None:
        dense_names = _dense_names(args.features)
    lex = _lexicons(args) if dense_names else None

    def part(recs):
        docs = [r.justification for r in recs]
        dense = [v.as_dict() for v in compute_many(docs, lex, args.threads)] if dense_names else None
        return docs, [labels[r.record_id] for r in recs], dense

    return part(train), part(dev), part(test), dense_names


def _accuracy(model, docs, labels, dense) -> float:
    X = design_matrix(docs, model.space, dense)
    pred = model.predict(X)
    return float(sum(int(p == y) for p, y in zip(pred, labels)) / len(labels))


# ---------------------------------------------------------------------------
# Subcommands


def cmd_ingest(args, run):
    records, errors = _load_records(args, run, allow_errors=True)
    rows = [{"_type": "record", **r.to_dict()} for r in records]
    rows += [{"_type": "error", "line": e.line, "message": e.message} for e in errors]
    if errors:
        warnings.warn(f"{len(errors)} invalid record(s) reported as error rows")
    return rows, (2 if errors and not args.allow_errors else 0)


def cmd_filter(args, run):
    records, _ = _load_records(args, run)
    kept, report = apply_filters(records, _filter_config(args))
    rows = [{"_type": "record", **r.to_dict()} for r in kept]
    rows.append({"_type": "filter_report", **report.as_dict()})
    return rows, 0


def cmd_score(args, run):
    records, _ = _load_records(args, run)
    rows: list[dict] = []
    binary = [r for r in records if r.domain_tag is Domain.BINARY]
    if not args.score_all_forecasts:
        binary = [r for r in binary if r.justification.strip()]
    scored, degenerate = score_corpus(binary)
    has_text = {r.record_id: bool(r.justification.strip()) for r in binary}
    for s in scored:
        rows.append({"_type": "score", "record_id": s.record_id, "author_id": s.author_id,
                     "target_id": s.target_id, "brier": s.brier, "z": s.z,
                     "has_justification": has_text[s.record_id]})
    rows += [{"_type": "degenerate_question", "target_id": q} for q in degenerate]
    eps = [r for r in records if r.domain_tag is Domain.EPS]
    if eps:
        table, excluded = analyst_error_table(eps, trim=args.trim, min_n=args.min_analyst_forecasts)
        rows += [{"_type": "eps_error", "record_id": e.record_id, "analyst_id": e.analyst_id,
                  "raw_error": e.raw_error, "std_error": e.std_error} for e in table]
        rows.append({"_type": "eps_exclusions", **excluded})
    if not scored and not any(r["_type"] == "eps_error" for r in rows):
        raise DataError("nothing to score: no resolved forecasts")
    return rows, 0


def cmd_rank(args, run):
    text = _read_input(args, run)
    fmt = _input_format(args, text)
    scores = [r for r in _json_rows(text) if r.get("_type") == "score"] if fmt == "jsonl" else []
    if scores:
        try:
            z = {r["record_id"]: float(r["z"]) for r in scores if r.get("has_justification", True)}
            owners = [argparse.Namespace(record_id=r["record_id"], author_id=r["author_id"]) for r in scores]
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed score row: {exc}") from None
        profiles = rank_forecasters(owners, z)
    else:
        records, errors = read_corpus(io.StringIO(text, newline=""), fmt)
        if errors:
            raise DataError(f"{len(errors)} invalid record(s) in input; first: {errors[0]}")
        _, profiles = _ranked_profiles(records)
    if args.k is not None:
        profiles = assign_groups(profiles, args.k)
    rows = [{"_type": "profile", "author_id": p.author_id, "n_forecasts": p.n_forecasts,
             "mean_std_brier": p.mean_std_brier, "rank": p.rank, "group": p.group.value} for p in profiles]
    return rows, 0


def cmd_metrics(args, run):
    records, _ = _load_records(args, run)
    vectors = compute_many([r.justification for r in records], _lexicons(args), args.threads)
    if args.per_record:
        return [{"_type": "record_metrics", "record_id": r.record_id, "author_id": r.author_id, **v.as_dict()}
                for r, v in zip(records, vectors)], 0
    per_author: dict[str, list] = defaultdict(list)
    for r, v in zip(records, vectors):
        per_author[r.author_id].append(v)
    return [{"_type": "author_metrics", "author_id": a, "n_records": len(per_author[a]),
             **author_aggregate(per_author[a]).as_dict()} for a in sorted(per_author)], 0


def cmd_compare(args, run):
    records, _ = _load_records(args, run)
    rows: list[dict] = []
    lex = _lexicons(args)
    domain = _domain(records, args.domain)
    if domain is Domain.EPS:
        eps, labels = _eps_labels(args, records, rows)
        chosen = [r for r in eps if r.record_id in labels]
        vecs = compute_many([r.justification for r in chosen], lex, args.threads)
        top = [v.as_dict() for r, v in zip(chosen, vecs) if labels[r.record_id] == 1]
        bottom = [v.as_dict() for r, v in zip(chosen, vecs) if labels[r.record_id] == 0]
        default_metrics = METRIC_NAMES
    else:
        kept, top_ids, bottom_ids = _skill_groups(args, records, rows)
        groups = _by_author(kept)

        def author_rows(ids):
            out = []
            for a in ids:
                vecs = compute_many([r.justification for r in groups[a]], lex, args.threads)
                out.append(author_aggregate(vecs).as_dict())
            return out

        top, bottom = author_rows(top_ids), author_rows(bottom_ids)
        default_metrics = TEXTUAL_METRICS + COGNITIVE_METRICS
    metrics = args.metrics or default_metrics
    unknown = [m for m in metrics if m not in METRIC_NAMES]
    if unknown:
        raise UsageError(f"unknown metric(s): {', '.join(unknown)}")
    with warnings.catch_warnings():
        warnings.simplefilter("always")
        results = compare_groups(top, bottom, metrics, args.bootstrap, args.seed, args.alpha,
                                 args.bonferroni_m, args.threads)
    for c in results:
        rows.append({"_type": "comparison", "metric": c.metric, "mean_top": c.mean_top,
                     "mean_bottom": c.mean_bottom, "direction": c.direction.value, "p_value": c.p_value,
                     "arrows": c.arrows, "passes_bonferroni": c.passes_bonferroni,
                     "n_top": c.n_top, "n_bottom": c.n_bottom, "n_bootstrap": c.n_bootstrap})
    return rows, 0


def cmd_train(args, run):
    records, _ = _load_records(args, run)
    rows: list[dict] = []
    config = _train_config(args)
    use_ngrams = "ngrams" in args.features
    if _domain(records, args.domain) is Domain.EPS:
        (docs, labels, dense), dev, test, dense_names = _eps_dataset(args, records, rows)
        model = fit_text_classifier(docs, labels, args.ngram, args.min_count, config, dense, dense_names, use_ngrams)
        extra = {"dev_accuracy": _accuracy(model, *dev), "test_accuracy": _accuracy(model, *test),
                 "n_dev": len(dev[0]), "n_test": len(test[0])}
    else:
        _, docs, labels, dense, dense_names = _author_dataset(args, records, rows)
        model = fit_text_classifier(docs, labels, args.ngram, args.min_count, config, dense, dense_names, use_ngrams)
        extra = {"train_accuracy": _accuracy(model, docs, labels, dense)}
    if args.model_out:
        save_model(model, args.model_out)
    rows.append({"_type": "train_summary", "n_train": len(docs), "n_features": model.space.n_features,
                 "epochs_run": len(model.loss_history) - 1, "final_loss": model.loss_history[-1],
                 "grad_norm": model.grad_norm, "provenance_sha256": model.provenance,
                 "vocab_sha256": model.space.vocab_hash(), **extra})
    if use_ngrams and args.top_features:
        n = min(args.top_features, model.space.n_sparse)
        high, low = top_features(model, n)
        rows += [{"_type": "feature", "side": "high", "rank": i + 1, "ngram": g, "weight": w}
                 for i, (g, w) in enumerate(high)]
        rows += [{"_type": "feature", "side": "low", "rank": i + 1, "ngram": g, "weight": w}
                 for i, (g, w) in enumerate(low)]
    return rows, 0


def cmd_evaluate(args, run):
    records, _ = _load_records(args, run)
    rows: list[dict] = []
    config = _train_config(args)
    use_ngrams = "ngrams" in args.features
    saved_dense = None
    if args.model:
        model = load_model(args.model)
        run.inputs.append(("model", Path(args.model).read_bytes()))
        saved_dense = model.space.dense.names if model.space.dense is not None else ()
    if _domain(records, args.domain) is Domain.EPS:
        train, dev, test, dense_names = _eps_dataset(args, records, rows, saved_dense)
        if not args.model:
            model = fit_text_classifier(*train[:2], args.ngram, args.min_count, config, train[2], dense_names,
                                        use_ngrams)
        for name, part in (("dev", dev), ("test", test)):
            rows.append({"_type": "split_accuracy", "split": name, "n": len(part[0]),
                         "accuracy": _accuracy(model, *part)})
        return rows, 0
    authors, docs, labels, dense, dense_names = _author_dataset(args, records, rows, saved_dense)
    if args.model:
        rows.append({"_type": "split_accuracy", "split": "all", "n": len(docs),
                     "accuracy": _accuracy(model, docs, labels, dense)})
        return rows, 0
    cv = crossval_accuracy(docs, labels, args.folds, args.seed, args.ngram, args.min_count, config, dense,
                           dense_names, use_ngrams)
    rows.append({"_type": "cv", "folds": args.folds, "n": len(docs), "mean_accuracy": cv.mean_accuracy,
                 "fold_accuracies": list(cv.fold_accuracies), "features": list(args.features)})
    return rows, 0


def cmd_early(args, run):
    records, _ = _load_records(args, run)
    rows: list[dict] = []
    kept = _maybe_filter(args, [r for r in records if r.domain_tag is Domain.BINARY], rows)
    kept, profiles = _ranked_profiles(kept)
    scored, _ = score_corpus(kept)
    z = {s.record_id: s.z for s in scored}
    ranking = [p.author_id for p in sorted(profiles, key=lambda p: p.rank)]
    res = early_identification(kept, z, ranking, args.n, args.seed, args.ngram, args.min_count, _train_config(args))
    for n, m, b, v in zip(res.ns, res.model_precision, res.baseline_precision, res.validation_precision):
        rows.append({"_type": "precision_at_n", "n": n, "model": m, "baseline": b, "validation": v})
    rows.append({"_type": "early_summary", "n_train": res.n_train, "n_validation": res.n_validation,
                 "n_test": res.n_test, "n_test_top": res.n_test_top})
    return rows, 0


def cmd_split_financial(args, run):
    records, _ = _load_records(args, run)
    rows: list[dict] = []
    eps, labels = _eps_labels(args, records, rows)
    parts = financial_split(eps, labels, eval_frac=args.eval_frac, seed=args.seed)
    for name, part in zip(("train", "dev", "test"), parts):
        rows += [{"_type": "split_assignment", "record_id": r.record_id, "split": name,
                  "label": labels[r.record_id], "company": r.target_id, "year": r.timestamp.year} for r in part]
    return rows, 0


def _extract_all(args, records):
    patterns = load_patterns(args.patterns)
    out = []
    for r in records:
        found = extract_eps(r.justification, patterns, record_id=r.record_id)
        if args.earliest:
            best = earliest_forecast(found, tuple(args.years))
            found = [best] if best is not None else []
        out.extend(found)
    return out


def cmd_extract_eps(args, run):
    records, _ = _load_records(args, run)
    return [{"_type": "eps_estimate", **e.as_dict()} for e in _extract_all(args, records)], 0


def cmd_eval_eps(args, run):
    records, _ = _load_records(args, run)
    gold = load_gold(args.gold)
    run.inputs.append(("gold", Path(args.gold).read_bytes()))
    predicted = _extract_all(args, records)
    precision, recall = evaluate_extraction(predicted, gold)
    return [{"_type": "extraction_eval", "precision": precision, "recall": recall,
             "n_predicted": len(predicted), "n_gold": len(gold)}], 0


def cmd_calibration(args, run):
    records, _ = _load_records(args, run)
    rows: list[dict] = []
    groups: list[tuple[str, list[ForecastRecord]]] = [("all", records)]
    if args.k is not None:
        _, profiles = _ranked_profiles(records)
        labelled = {p.author_id: p.group for p in assign_groups(profiles, args.k)}
        for g in (Group.TOP, Group.BOTTOM):
            groups.append((g.value, [r for r in records if labelled.get(r.author_id) is g]))
    for name, recs in groups:
        curve = calibration_curve(recs, args.bins)
        for i in range(curve.n_bins):
            rows.append({"_type": "calibration_bin", "group": name, "bin": i, "lo": curve.edges[i],
                         "hi": curve.edges[i + 1], "count": curve.counts[i],
                         "mean_estimate": curve.mean_estimate[i], "frequency": curve.frequency[i]})
    return rows, 0


def cmd_synth(args, run):
    if args.domain == "eps":
        records, gold = generate_eps_notes(args.analysts, args.companies, args.notes, seed=args.seed)
        if args.gold:
            with open(args.gold, "w", encoding="utf-8") as fh:
                fh.write("record_id\ttime_label\tvalue\n")
                for rid, label, value in gold:
                    fh.write(f"{rid}\t{label}\t{value!r}\n")
    else:
        lo, hi = args.forecasts if len(args.forecasts) == 2 else (args.forecasts[0],) * 2
        config = SynthConfig(n_authors=args.authors, forecasts_per_author=(lo, hi), n_questions=args.questions,
                             skill_dist=args.skill_dist, skill_params=args.skill_params or SynthConfig.skill_params,
                             sigma=args.sigma, seed=args.seed)
        records, truth = generate_corpus(config)
        if args.truth:
            with open(args.truth, "w", encoding="utf-8", newline="\n") as fh:
                write_truth(truth, fh)
    return [{"_type": "record", **r.to_dict()} for r in records], 0


# ---------------------------------------------------------------------------
# Argument parsing


def _common(p: argparse.ArgumentParser, reads_input: bool = True) -> None:
    p.add_argument("--seed", type=int, default=0, help="seed for every random draw (echoed in the report)")
    p.add_argument("--threads", type=int, default=1, help="worker threads; never changes results")
    p.add_argument("--format", choices=("jsonl", "text"), default="jsonl", help="report format")
    p.add_argument("-o", "--output", help="write the report here instead of stdout")
    if reads_input:
        p.add_argument("input", nargs="?", help="input file (default: stdin)")
        p.add_argument("--corpus", dest="input", help="same as the positional input")
        p.add_argument("--input-format", choices=("jsonl", "csv"), help="input format (default: guessed)")


def _filter_flags(p, toggle: bool = True) -> None:
    d = CorpusFilterConfig()
    p.add_argument("--min-tokens", type=int, default=d.min_tokens_per_justification)
    p.add_argument("--max-quote-ratio", type=float, default=d.max_quote_ratio)
    p.add_argument("--min-forecasts", type=int, default=d.min_forecasts_per_author)
    p.add_argument("--no-english-check", action="store_true")
    if toggle:
        p.add_argument("--no-filter", action="store_true", help="skip the corpus filters")


def _lexicon_flags(p) -> None:
    for flag, dest in (("--liwc", "liwc"), ("--function-lexicon", "function_lexicon"), ("--hedges", "hedges"),
                       ("--connectives", "connectives"), ("--sentiment", "sentiment"),
                       ("--financial", "financial"), ("--easy-words", "easy_words")):
        p.add_argument(flag, dest=dest, metavar="PATH", help="replace the bundled lexicon")


def _eps_flags(p) -> None:
    p.add_argument("--trim", type=float, default=0.9, help="share of smallest errors used for moments")
    p.add_argument("--min-analyst-forecasts", type=int, default=100)


def _model_flags(p) -> None:
    d = TrainConfig()
    p.add_argument("--ngram", type=_int_list, default=(1, 2), help="n-gram sizes, e.g. 1,2")
    p.add_argument("--min-count", type=int, default=2)
    p.add_argument("--lr", type=float, default=d.learning_rate)
    p.add_argument("--l2", type=float, default=d.l2)
    p.add_argument("--epochs", type=int, default=d.epochs)
    p.add_argument("--tol", type=float, default=d.tol)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="forecastskill", description="Measure forecasting skill from text.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("ingest", help="validate a corpus and normalize it to JSONL")
    _common(p)
    p.add_argument("--allow-errors", action="store_true", help="exit 0 even if some records are invalid")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("filter", help="apply the justification and author filters")
    _common(p)
    _filter_flags(p, toggle=False)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("score", help="Brier / standardized Brier and EPS errors")
    _common(p)
    p.add_argument("--score-all-forecasts", action="store_true",
                   help="standardize over forecasts without justification too (rank still ignores them)")
    _eps_flags(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("rank", help="rank forecasters by mean standardized Brier")
    _common(p)
    p.add_argument("--k", type=int, help="label top-K and bottom-K groups")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("metrics", help="linguistic metrics per author or per record")
    _common(p)
    p.add_argument("--per-record", action="store_true")
    _lexicon_flags(p)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("compare", help="bootstrap comparison of top-K vs bottom-K groups")
    _common(p)
    p.add_argument("--k", type=int, default=50)
    p.add_argument("--bootstrap", type=int, default=10000, help="bootstrap replicates per metric")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--bonferroni-m", type=int, help="number of tests (default: metrics tested)")
    p.add_argument("--metrics", type=_name_list, help="comma-separated metric names")
    p.add_argument("--domain", choices=("auto", "binary", "eps"), default="auto")
    _filter_flags(p)
    _lexicon_flags(p)
    _eps_flags(p)
    p.set_defaults(func=cmd_compare)

    for name, func, text in (("train", cmd_train, "fit the text classifier"),
                             ("evaluate", cmd_evaluate, "cross-validate or apply a saved classifier")):
        p = sub.add_parser(name, help=text)
        _common(p)
        p.add_argument("--k", type=int, default=50)
        p.add_argument("--features", type=_name_list, default=("ngrams",),
                       help="comma-separated groups: ngrams, textual, cognitive, financial")
        p.add_argument("--domain", choices=("auto", "binary", "eps"), default="auto")
        p.add_argument("--eval-frac", type=float, default=0.2)
        _model_flags(p)
        _filter_flags(p)
        _lexicon_flags(p)
        _eps_flags(p)
        if name == "train":
            p.add_argument("--model-out", help="save the fitted model here")
            p.add_argument("--top-features", type=int, default=20)
        else:
            p.add_argument("--folds", type=int, default=5)
            p.add_argument("--model", help="evaluate this saved model instead of cross-validating")
        p.set_defaults(func=func)

    p = sub.add_parser("early", help="Precision@N from each author's first justification")
    _common(p)
    p.add_argument("--n", type=_int_list, default=(1, 5, 10), help="comma-separated N values")
    _model_flags(p)
    _filter_flags(p)
    p.set_defaults(func=cmd_early)

    p = sub.add_parser("split-financial", help="company/time split of labelled EPS forecasts")
    _common(p)
    p.add_argument("--k", type=int, default=100)
    p.add_argument("--eval-frac", type=float, default=0.2)
    _eps_flags(p)
    p.set_defaults(func=cmd_split_financial)

    for name, func, text in (("extract-eps", cmd_extract_eps, "extract EPS estimates from notes"),
                             ("eval-eps", cmd_eval_eps, "precision/recall of extraction against gold")):
        p = sub.add_parser(name, help=text)
        _common(p)
        p.add_argument("--patterns", help="pattern file (default: bundled)")
        p.add_argument("--earliest", action="store_true", help="keep only the earliest-year estimate per note")
        p.add_argument("--years", type=_int_list, default=(2014, 2018), help="year range for --earliest")
        if name == "eval-eps":
            p.add_argument("--gold", required=True, help="TSV of record_id, time_label, value")
        p.set_defaults(func=func)

    p = sub.add_parser("calibration", help="per-bin calibration table")
    _common(p)
    p.add_argument("--bins", type=int, default=10)
    p.add_argument("--k", type=int, help="also report top-K and bottom-K groups")
    p.set_defaults(func=cmd_calibration)

    p = sub.add_parser("synth", help="generate a synthetic corpus with known skill")
    _common(p, reads_input=False)
    d = SynthConfig()
    p.add_argument("--domain", choices=("binary", "eps"), default="binary")
    p.add_argument("--authors", type=int, default=d.n_authors)
    p.add_argument("--forecasts", type=_int_list, default=d.forecasts_per_author, help="N or LOW,HIGH per author")
    p.add_argument("--questions", type=int, default=d.n_questions)
    p.add_argument("--sigma", type=float, default=d.sigma)
    p.add_argument("--skill-dist", choices=("levels", "uniform", "beta"), default=d.skill_dist)
    p.add_argument("--skill-params", type=_float_list)
    p.add_argument("--truth", help="write author_id/skill TSV here")
    p.add_argument("--analysts", type=int, default=20)
    p.add_argument("--companies", type=int, default=30)
    p.add_argument("--notes", type=int, default=120, help="notes per analyst (eps domain)")
    p.add_argument("--gold", help="write gold EPS estimates here (eps domain)")
    p.set_defaults(func=cmd_synth, input=None)
    return parser


def _show_warning(message, category, filename, lineno, file=None, line=None):
    print(f"warning: {message}", file=sys.stderr)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.threads < 1:
            raise UsageError("--threads must be at least 1")
        if getattr(args, "forecasts", None) is not None and len(args.forecasts) > 2:
            raise UsageError("--forecasts takes N or LOW,HIGH")
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1

    run = _run_config(args)
    old_show = warnings.showwarning
    warnings.showwarning = _show_warning
    try:
        rows, code = args.func(args, run)
        report = render(run, rows, args.format)
        if args.output:
            Path(args.output).write_text(report, encoding="utf-8", newline="\n")
        else:
            sys.stdout.write(report)
            sys.stdout.flush()
        return code
    except BrokenPipeError:
        sys.stdout = open(os.devnull, "w")
        return 0
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (DataError, CorpusError, ModelFormatError, LexiconFormatError, PatternSyntaxError,
            ValueError, KeyError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return 2
    finally:
        warnings.showwarning = old_show


if __name__ == "__main__":
    sys.exit(main())
