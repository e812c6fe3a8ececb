"""Command-line pipeline: synth, sample, label, align, score, evaluate, prc, compare.

Stages compose through JSONL files only — any stage can be rerun in
isolation. Every artifact line (and every report) embeds the 12-hex
config hash of the settings that produced it.

Exit codes: 0 success, 1 validation/input error, 2 backend or endpoint
failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import alignment as alignment_mod
from . import evaluation as eval_mod
from .config import RunConfig, _FIELD_TO_SECTION, config_hash, load_config
from .entropy import score_record
from .errors import BackendError, ValidationError
from .records import (
    GenerationConfig,
    attach_samples,
    load_dataset,
    load_labels_file,
    load_results_file,
    load_samples_file,
    write_jsonl,
)
from .sampling import RetryPolicy, SamplingJob, run_sampling
from .synth import generate_synthetic


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems as validation errors (exit 1)."""

    def error(self, message):
        raise ValidationError(message)


def _add_config_flag(parser) -> None:
    parser.add_argument("-c", "--config", default=None, help="YAML config file")


def _overrides_from(args) -> dict:
    return {
        name: value
        for name, value in vars(args).items()
        if name in _FIELD_TO_SECTION and value is not None
    }


def _load_config(args) -> RunConfig:
    return load_config(getattr(args, "config", None), _overrides_from(args))


def _parse_estimators(value):
    if value is None:
        return None
    return tuple(part.strip() for part in value.split(",") if part.strip())


def _require_file(path, what: str, produced_by: str | None = None) -> str:
    """Fail early, naming the stage that produces a missing input artifact."""
    hint = f" (run `sementropy {produced_by}` first)" if produced_by else ""
    if not path:
        raise ValidationError(f"missing upstream artifact: no {what} given{hint}")
    if not os.path.exists(path):
        raise ValidationError(
            f"missing upstream artifact: {what} not found at {path}{hint}"
        )
    return path


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_synth(args) -> int:
    cfg = _load_config(args)
    paths = generate_synthetic(
        out_dir=args.out_dir or cfg.output_dir,
        seed=cfg.seed,
        n_grounded=cfg.n_grounded,
        n_hallucinated=cfg.n_hallucinated,
        n_samples=cfg.n_samples,
        name=args.name,
        paired=cfg.paired,
    )
    for split, split_paths in paths.items():
        for kind, path in split_paths.items():
            print(f"{split}/{kind}: {path}")
    return 0


def cmd_sample(args) -> int:
    cfg = _load_config(args)
    _require_file(cfg.dataset_path, "dataset file", produced_by="synth")
    gen = GenerationConfig(
        greedy_temperature=cfg.greedy_temperature,
        sample_temperature=cfg.sample_temperature,
        n_samples=cfg.n_samples,
        top_k=cfg.top_k,
        top_p=cfg.top_p,
        prompt_template=cfg.prompt_template,
        model_name=cfg.model_name,
        endpoint_url=cfg.endpoint_url,
    )
    job = SamplingJob(
        dataset_path=cfg.dataset_path,
        output_path=args.out,
        generation_config=gen,
        concurrency=cfg.concurrency,
        retry=RetryPolicy(max_attempts=cfg.max_attempts, backoff_base=cfg.backoff_base),
    )
    summary = run_sampling(job)
    print(json.dumps(summary.to_json_dict(), sort_keys=True, indent=2))
    return 2 if summary.failures else 0


def cmd_label(args) -> int:
    cfg = _load_config(args)
    _require_file(cfg.dataset_path, "dataset file", produced_by="synth")
    _require_file(cfg.samples_path, "samples file", produced_by="sample")
    records = attach_samples(
        load_dataset(cfg.dataset_path, schema="dataset"),
        load_samples_file(cfg.samples_path),
    )
    labels = eval_mod.label_hallucinations(
        records, label_threshold=cfg.label_threshold, tokenizer_mode=cfg.tokenizer_mode
    )
    h = config_hash(cfg)
    rows = [{**lab.to_json_dict(), "config_hash": h} for lab in labels]
    count = write_jsonl(args.out, rows)
    flagged = sum(1 for lab in labels if lab.is_hallucination)
    print(f"labeled {count} records ({flagged} hallucinations) -> {args.out}")
    return 0


def _alignment_backend(cfg: RunConfig, variant: str):
    """Return a callable (record_id, question, samples) -> alpha vector."""
    if cfg.alignment_backend == "scorer_service":
        if not cfg.scorer_url:
            raise ValidationError("alignment_backend=scorer_service requires scorer_url")
        client = alignment_mod.ScorerServiceClient(cfg.scorer_url)

        def from_service(record_id, question, samples):
            return client.alphas_for_record(
                question, samples, variant, gamma=cfg.gamma, lambda_=cfg.lambda_
            )

        return from_service

    path = dict(cfg.alignment_files).get(variant)
    if not path:
        raise ValidationError(
            f"missing upstream artifact: no alignment file for variant {variant!r} "
            f"(generate one with `sementropy align` or pass --alignment-{variant})"
        )
    _require_file(path, f"alignment file for variant {variant!r}", produced_by="align")
    pre = alignment_mod.PrecomputedAlignments(path)

    def from_file(record_id, question, samples):
        return pre.alphas_for(
            record_id, variant, len(samples), gamma=cfg.gamma, lambda_=cfg.lambda_
        )

    return from_file


def cmd_align(args) -> int:
    cfg = _load_config(args)
    variant = args.variant
    _require_file(cfg.dataset_path, "dataset file", produced_by="synth")
    _require_file(cfg.samples_path, "samples file", produced_by="sample")
    records = attach_samples(
        load_dataset(cfg.dataset_path, schema="dataset"),
        load_samples_file(cfg.samples_path),
    )
    backend = _alignment_backend(cfg, variant)
    h = config_hash(cfg)
    rows = []
    for rec in records:
        alpha = backend(rec.id, rec.question, rec.samples)
        rows.append(
            {
                "id": rec.id,
                "variant": variant,
                "alpha": [float(a) for a in alpha],
                "config_hash": h,
            }
        )
    count = write_jsonl(args.out, rows)
    print(f"wrote {count} {variant} alignment rows -> {args.out}")
    return 0


def cmd_score(args) -> int:
    cfg = _load_config(args)
    estimators = cfg.estimators
    qa_variants = [e.removeprefix("qa_snne_") for e in estimators if e.startswith("qa_snne_")]
    with_dse = "dse" in estimators

    _require_file(cfg.samples_path, "samples file", produced_by="sample")
    sample_sets = list(load_samples_file(cfg.samples_path))

    questions: dict[str, str] = {}
    if cfg.alignment_backend == "scorer_service" and qa_variants:
        if not cfg.dataset_path:
            raise ValidationError(
                "scoring QA variants via the scorer service needs dataset_path for questions"
            )
        _require_file(cfg.dataset_path, "dataset file", produced_by="synth")
        questions = {r.id: r.question for r in load_dataset(cfg.dataset_path, schema="dataset")}

    backends = {v: _alignment_backend(cfg, v) for v in qa_variants}

    nli_backend = None
    if with_dse and cfg.cluster_method == "entailment_bidirectional":
        if not cfg.scorer_url:
            raise ValidationError(
                "entailment_bidirectional clustering requires scorer_url"
            )
        nli_backend = alignment_mod.ScorerServiceClient(cfg.scorer_url)

    h = config_hash(cfg)
    rows = []
    for ss in sample_sets:
        aligns = {}
        for variant, backend in backends.items():
            alpha = backend(ss.id, questions.get(ss.id, ""), ss.samples)
            aligns[variant] = alignment_mod.AlignmentScores.from_alpha(
                variant, alpha, beta=cfg.beta, gamma=cfg.gamma, lambda_=cfg.lambda_
            )
        result = score_record(
            record_id=ss.id,
            samples=ss.samples,
            alignments=aligns or None,
            tau=cfg.tau,
            weight_scale=cfg.weight_scale,
            with_dse=with_dse,
            cluster_method=cfg.cluster_method,
            cluster_threshold=cfg.cluster_threshold,
            nli_backend=nli_backend,
            tokenizer_mode=cfg.tokenizer_mode,
            config_hash=h,
        )
        rows.append(result.to_json_dict())
    count = write_jsonl(args.out, rows)
    print(f"scored {count} records with {', '.join(estimators)} -> {args.out}")
    return 0


def _labels_from_rows(rows) -> list:
    return [
        eval_mod.HallucinationLabel(
            id=str(row["id"]),
            is_hallucination=bool(row["is_hallucination"]),
            rouge_f=float(row["rouge_f"]),
            label_threshold=float(row.get("label_threshold", 0.5)),
            bleu=row.get("bleu"),
        )
        for row in rows
    ]


def _dataset_info(args) -> dict:
    manifest_path = getattr(args, "manifest", None)
    if not manifest_path:
        return {}
    with open(manifest_path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    return {
        key: manifest[key]
        for key in ("name", "split", "paired_with", "record_count")
        if key in manifest
    }


def cmd_evaluate(args) -> int:
    cfg = _load_config(args)
    _require_file(cfg.labels_path, "labels file", produced_by="label")
    _require_file(cfg.scores_path, "scores file", produced_by="score")
    if getattr(args, "manifest", None):
        _require_file(args.manifest, "dataset manifest")
    labels = _labels_from_rows(load_labels_file(cfg.labels_path))
    scores = list(load_results_file(cfg.scores_path))
    estimators = args.estimators
    report = eval_mod.build_report(
        labels,
        scores,
        estimators=estimators,
        theta_star=cfg.theta_star,
        config=cfg.to_json_dict(),
        config_hash=config_hash(cfg),
        dataset=_dataset_info(args),
        allow_dse=cfg.allow_dse_detection,
    )
    out_dir = args.out_dir or cfg.output_dir
    os.makedirs(out_dir, exist_ok=True)
    report_json = os.path.join(out_dir, "report.json")
    report_txt = os.path.join(out_dir, "report.txt")
    eval_mod.save_report_json(report, report_json)
    text = eval_mod.render_report_text(report)
    with open(report_txt, "w", encoding="utf-8") as fh:
        fh.write(text)
    for est, points in report.prc.items():
        eval_mod.write_prc_csv(
            os.path.join(out_dir, f"prc_{est}.csv"),
            [eval_mod.PrcPoint(**p) for p in points],
        )
    print(text, end="")
    print(f"report -> {report_json}")
    return 0


def cmd_prc(args) -> int:
    cfg = _load_config(args)
    _require_file(cfg.labels_path, "labels file", produced_by="label")
    _require_file(cfg.scores_path, "scores file", produced_by="score")
    labels = _labels_from_rows(load_labels_file(cfg.labels_path))
    scores = list(load_results_file(cfg.scores_path))
    estimator = args.estimator
    field = eval_mod.ESTIMATOR_FIELDS.get(estimator)
    if field is None:
        raise ValidationError(f"unknown estimator {estimator!r}")
    by_id = {row["id"]: row for row in scores}
    utilities, uncertainties = [], []
    for lab in labels:
        row = by_id.get(lab.id)
        if row is None or field not in row:
            raise ValidationError(f"record {lab.id}: no {estimator} score available")
        utilities.append(lab.rouge_f)
        uncertainties.append(float(row[field]))
    points = eval_mod.prc(utilities, uncertainties)
    eval_mod.write_prc_csv(args.out, points)
    print(f"{'reject':>6}  {'retained':>8}  {'mean_rouge_l':>12}")
    for p in points:
        mean = "-" if p.mean_rouge_l is None else f"{p.mean_rouge_l:.4f}"
        print(f"{p.rejection_fraction:>6.2f}  {p.retained_count:>8}  {mean:>12}")
    print(f"curve -> {args.out}")
    return 0


def cmd_compare(args) -> int:
    _require_file(args.report_in, "input-split report", produced_by="evaluate")
    _require_file(args.report_out, "output-split report", produced_by="evaluate")
    report_in = eval_mod.load_report_json(args.report_in)
    report_out = eval_mod.load_report_json(args.report_out)
    result = eval_mod.compare_splits(
        report_in,
        report_out,
        alert_margin=args.alert_margin,
        allow_unpaired=args.allow_unpaired,
    )
    print(eval_mod.render_compare_text(result), end="")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(result.to_json_dict(), fh, ensure_ascii=False, sort_keys=True, indent=2)
            fh.write("\n")
        print(f"deltas -> {args.out}")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="sementropy",
        description=(
            "Uncertainty scoring and hallucination detection for sampled model answers"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a deterministic synthetic dataset")
    _add_config_flag(p)
    p.add_argument("--out-dir", default=None, dest="out_dir")
    p.add_argument("--name", default="synth")
    p.add_argument("--seed", type=int, default=None, dest="seed")
    p.add_argument("--grounded", type=int, default=None, dest="n_grounded")
    p.add_argument("--hallucinated", type=int, default=None, dest="n_hallucinated")
    p.add_argument("--n-samples", type=int, default=None, dest="n_samples")
    p.add_argument("--paired", action="store_const", const=True, default=None, dest="paired")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("sample", help="collect greedy + sampled answers from an endpoint")
    _add_config_flag(p)
    p.add_argument("--dataset", dest="dataset_path", default=None)
    p.add_argument("--out", required=True, help="samples JSONL output path")
    p.add_argument("--endpoint-url", dest="endpoint_url", default=None)
    p.add_argument("--model", dest="model_name", default=None)
    p.add_argument("--n-samples", type=int, default=None, dest="n_samples")
    p.add_argument("--concurrency", type=int, default=None, dest="concurrency")
    p.add_argument("--max-attempts", type=int, default=None, dest="max_attempts")
    p.add_argument("--backoff-base", type=float, default=None, dest="backoff_base")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("label", help="derive hallucination labels from greedy answers")
    _add_config_flag(p)
    p.add_argument("--dataset", dest="dataset_path", default=None)
    p.add_argument("--samples", dest="samples_path", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--label-threshold", type=float, default=None, dest="label_threshold")
    p.add_argument("--tokenizer-mode", default=None, dest="tokenizer_mode")
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("align", help="compute question-alignment scores per sample")
    _add_config_flag(p)
    p.add_argument("--dataset", dest="dataset_path", default=None)
    p.add_argument("--samples", dest="samples_path", default=None)
    p.add_argument("--variant", required=True, choices=alignment_mod.VARIANTS)
    p.add_argument("--backend", dest="alignment_backend", default=None)
    p.add_argument("--scorer-url", dest="scorer_url", default=None)
    p.add_argument("--alignment-file", default=None, help="variant-specific input payloads")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("score", help="compute uncertainty scores per record")
    _add_config_flag(p)
    p.add_argument("--dataset", dest="dataset_path", default=None)
    p.add_argument("--samples", dest="samples_path", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--estimators", default=None, help="comma list, e.g. snne,qa_snne_emb,dse")
    p.add_argument("--alignment-emb", default=None)
    p.add_argument("--alignment-ent", default=None)
    p.add_argument("--alignment-crosse", default=None)
    p.add_argument("--backend", dest="alignment_backend", default=None)
    p.add_argument("--scorer-url", dest="scorer_url", default=None)
    p.add_argument("--tau", type=float, default=None, dest="tau")
    p.add_argument("--beta", type=float, default=None, dest="beta")
    p.add_argument("--gamma", type=float, default=None, dest="gamma")
    p.add_argument("--lambda", type=float, default=None, dest="lambda_")
    p.add_argument("--weight-scale", default=None, dest="weight_scale")
    p.add_argument("--tokenizer-mode", default=None, dest="tokenizer_mode")
    p.add_argument("--cluster-method", default=None, dest="cluster_method")
    p.add_argument("--cluster-threshold", type=float, default=None, dest="cluster_threshold")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("evaluate", help="compute the metric suite and write reports")
    _add_config_flag(p)
    p.add_argument("--labels", dest="labels_path", default=None)
    p.add_argument("--scores", dest="scores_path", default=None)
    p.add_argument("--out-dir", default=None, dest="out_dir")
    p.add_argument("--estimators", default=None)
    p.add_argument("--theta-star", type=float, default=None, dest="theta_star")
    p.add_argument("--manifest", default=None, help="dataset manifest for report provenance")
    p.add_argument(
        "--allow-dse",
        action="store_const",
        const=True,
        default=None,
        dest="allow_dse_detection",
    )
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("prc", help="performance-rejection curve for one estimator")
    _add_config_flag(p)
    p.add_argument("--labels", dest="labels_path", default=None)
    p.add_argument("--scores", dest="scores_path", default=None)
    p.add_argument("--estimator", required=True)
    p.add_argument("--out", required=True, help="CSV output path")
    p.set_defaults(func=cmd_prc)

    p = sub.add_parser("compare", help="metric deltas between paired split reports")
    p.add_argument("--report-in", required=True)
    p.add_argument("--report-out", required=True)
    p.add_argument("--alert-margin", type=float, default=0.05)
    p.add_argument("--allow-unpaired", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_compare)

    return parser


def _collect_alignment_files(args) -> None:
    """Fold --alignment-* flags into the alignment_files mapping override."""
    files = {}
    for variant in alignment_mod.VARIANTS:
        path = getattr(args, f"alignment_{variant}", None)
        if path:
            files[variant] = path
    single = getattr(args, "alignment_file", None)
    if single:
        files[getattr(args, "variant")] = single
    if files:
        setattr(args, "alignment_files", files)


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        _collect_alignment_files(args)
        if isinstance(getattr(args, "estimators", None), str):
            args.estimators = _parse_estimators(args.estimators)
        return args.func(args) or 0
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        # Anything file-shaped that slipped past the explicit checks
        # (unreadable config, permission problems) is still an input error.
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
