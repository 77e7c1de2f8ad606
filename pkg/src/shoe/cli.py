"""``shoe`` command line: build-sim, eval, agreement, tune-weight,
audit-screening.

Exit codes: 0 success, 1 usage/runtime error, 2 input schema violation,
3 unresolvable synset in strict mode.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import numpy as np

from . import agreement as agr
from .evaluation import EvalConfig, evaluate
from .io import (
    ResolutionError,
    Resolver,
    SchemaError,
    read_class_subset,
    read_ground_truth,
    read_metric_scores,
    read_predictions,
    read_ratings,
    read_synset_list,
    read_tuning_samples,
)
from .raters import RaterGateway, gateway_from_config
from .simtable import (
    DEFAULT_TEMPLATE,
    Journal,
    PairRater,
    SimilarityTable,
    TableError,
    audit_screening,
    canonical_pair,
    ensemble_average,
    pearson_between_raters,
    rate_pairs,
    screen_pairs,
    template_hash,
)
from .wordnet import Pos, WordnetError, load_wordnet

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

logger = logging.getLogger("shoe")

EXIT_SCHEMA = 2
EXIT_UNRESOLVED = 3


class UsageError(Exception):
    pass


def load_config(path: "str | None") -> dict:
    if not path:
        return {}
    p = Path(path)
    if p.suffix == ".toml":
        with open(p, "rb") as fh:
            return tomllib.load(fh)
    with open(p, encoding="utf-8") as fh:
        return json.load(fh)


def _merged(args: argparse.Namespace, section: str) -> dict:
    """Config-file values (top level, then the subcommand's section)
    overridden by flags given on the command line."""
    cfg = load_config(args.config)
    out = {k: v for k, v in cfg.items() if not isinstance(v, dict) and not isinstance(v, list)}
    out.update(cfg.get(section, {}) if isinstance(cfg.get(section), dict) else {})
    for k in ("raters", "screener"):
        if k in cfg:
            out.setdefault(k, cfg[k])
    for k, v in vars(args).items():
        if v is not None and k not in ("config", "func", "command"):
            out[k.replace("-", "_")] = v
    return out


def _write(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path


def _matrix_csv(names: Sequence[str], m: np.ndarray) -> str:
    rows = [",".join([""] + list(names))]
    for n, row in zip(names, m):
        rows.append(",".join([n] + ["" if np.isnan(v) else f"{v:.6f}" for v in row]))
    return "\n".join(rows) + "\n"


def _r(x, nd=6):
    if x is None:
        return None
    x = float(x)
    return None if np.isnan(x) else round(x, nd)


# -- eval --------------------------------------------------------------------

EVAL_KEYS = ("theta", "delta", "tau", "agg", "weight", "mode", "fn_accounting", "fp_scope",
             "exact", "workers", "seed", "strict")


def cmd_eval(args: argparse.Namespace) -> int:
    opts = _merged(args, "eval")
    for req in ("gt", "pred"):
        if not opts.get(req):
            raise UsageError(f"--{req} is required")
    config = EvalConfig(**{k: opts[k] for k in EVAL_KEYS if k in opts})
    graph = load_wordnet(opts["wordnet"]) if opts.get("wordnet") else None
    resolver = Resolver(graph, strict=config.strict)
    gts = read_ground_truth(opts["gt"], resolver)
    preds = read_predictions(opts["pred"], resolver)
    resolver.raise_if_failed()

    if config.exact:
        verb_table, object_table = SimilarityTable.identity(Pos.VERB), SimilarityTable.identity(Pos.NOUN)
    else:
        if not opts.get("verb_table") or not opts.get("object_table"):
            raise UsageError("--verb-table and --object-table are required unless --exact is given")
        verb_table = SimilarityTable.load(opts["verb_table"])
        object_table = SimilarityTable.load(opts["object_table"])
    subset = read_class_subset(opts["classes"]) if opts.get("classes") else None

    report = evaluate(gts, preds, verb_table, object_table, config, subset, resolver.exclusions)
    report.config.update({
        "verb_table": opts.get("verb_table"),
        "object_table": opts.get("object_table"),
        "wordnet": opts.get("wordnet"),
        "classes": opts.get("classes"),
    })

    sys.stdout.write(report.table_text())
    out_dir = Path(opts["out_dir"]) if opts.get("out_dir") else None
    if opts.get("out"):
        _write(Path(opts["out"]), report.to_json())
    if out_dir:
        _write(out_dir / "report.json", report.to_json())
        _write(out_dir / "per_class.csv", report.per_class_csv())
        if opts.get("figures") and report.curves:
            from .plotting import plot_pr_curves
            plot_pr_curves(report.curves, out_dir / "pr_curves.png")
    if not opts.get("out") and not out_dir:
        sys.stdout.write(report.to_json())
    return 0


# -- build-sim / audit ---------------------------------------------------------

def _gateways(opts: dict) -> tuple[list[RaterGateway], str]:
    seed = int(opts.get("seed", 0))
    if opts.get("mock"):
        n = int(opts["mock"])
        cfgs = [{"name": f"mock-{i}", "kind": "mock", "seed": seed + i,
                 "zero_fraction": 0.7 if i == 0 else 0.2} for i in range(n)]
        screener = opts.get("screener") or "mock-0"
    else:
        cfgs = opts.get("raters") or []
        screener = opts.get("screener") or (cfgs[0]["name"] if cfgs else None)
    if not cfgs:
        raise UsageError("no raters configured (use --mock N or a config file with [[raters]])")
    names = [c["name"] for c in cfgs]
    if len(set(names)) != len(names):
        raise UsageError("rater names must be unique")
    if screener not in names:
        raise UsageError(f"screener {screener!r} is not among the configured raters")
    return [gateway_from_config(c, seed) for c in cfgs], screener


def _template(opts: dict) -> str:
    if opts.get("template"):
        return Path(opts["template"]).read_text(encoding="utf-8")
    return DEFAULT_TEMPLATE


def _created() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    ts = datetime.fromtimestamp(int(epoch), timezone.utc) if epoch else datetime.now(timezone.utc)
    return ts.strftime("%Y-%m-%dT%H:%M:%SZ")


def candidate_pairs(graph, pos: Pos, targets: Sequence[str], candidates: "Sequence[str] | None",
                    depth: int) -> list[tuple[str, str]]:
    """targets x candidates, or targets x their WordNet neighborhood when no
    candidate list is given; identity pairs dropped, order-normalized."""
    seen: dict[tuple[str, str], None] = {}
    for t in targets:
        pool = candidates if candidates is not None else [s.key for s in graph.expand_neighborhood(t, depth)]
        for c in pool:
            if c != t:
                seen.setdefault(canonical_pair(t, c), None)
    return list(seen)


def cmd_build_sim(args: argparse.Namespace) -> int:
    opts = _merged(args, "build_sim")
    for req in ("wordnet", "targets", "out"):
        if not opts.get(req):
            raise UsageError(f"--{req.replace('_', '-')} is required")
    pos = Pos.parse(opts.get("pos", "verb"))
    graph = load_wordnet(opts["wordnet"])
    targets = read_synset_list(opts["targets"])
    candidates = read_synset_list(opts["candidates"]) if opts.get("candidates") else None
    bad = [k for k in targets + (candidates or []) if k not in graph or graph.synset(k).pos is not pos]
    if bad:
        raise ResolutionError([f"invalid {pos.label} candidate synset {k!r}" for k in bad])

    gateways, screener_name = _gateways(opts)
    by_name = {g.name: g for g in gateways}
    screener = by_name[screener_name]
    refiners = [g for g in gateways if g.name != screener_name]
    subset = opts["raters_subset"].split(",") if opts.get("raters_subset") else [g.name for g in gateways]
    unknown = [n for n in subset if n not in by_name]
    if unknown:
        raise UsageError(f"--raters names unknown rater(s): {', '.join(unknown)}")

    template = _template(opts)
    out = Path(opts["out"])
    journal = Journal(opts.get("journal") or out.with_suffix(".journal.jsonl"))
    engine = PairRater(graph.synset, template, workers=int(opts.get("workers", 8)), journal=journal)
    done = journal.load()

    pairs = candidate_pairs(graph, pos, targets, candidates, int(opts.get("depth", 2)))
    t0 = time.monotonic()
    screen = screen_pairs(pairs, screener, engine, done)
    rated = rate_pairs(sorted(screen.nonzero), refiners, engine, done)
    ratings = screen.ratings + rated
    manifest = {
        "raters": subset,
        "screener": screener_name,
        "prompt_hash": template_hash(template),
        "created": _created(),
        "candidate_pairs": len(pairs),
        "screened_out": len(screen.screened_out),
        "unrated": sum(1 for r in ratings if r.rating is None),
    }
    if opts.get("audit"):
        audit_engine = PairRater(graph.synset, template, workers=engine.workers)
        manifest["audit"] = {
            "sample_size": int(opts["audit"]),
            "seed": int(opts.get("seed", 0)),
            "disagreement_pct": {
                k: _r(v, 3) for k, v in audit_screening(
                    screen.screened_out, int(opts["audit"]), refiners, int(opts.get("seed", 0)), audit_engine
                ).items()
            },
        }
    table = ensemble_average(ratings, subset, pos, manifest)
    table.save(out)
    logger.info("wrote %s (%d entries) in %.1fs", out, len(table), time.monotonic() - t0)

    corr = pearson_between_raters(ratings)
    names = sorted(corr)
    m = np.array([[np.nan if corr[a][b] is None else corr[a][b] for b in names] for a in names])
    _write(out.with_suffix(".pearson.csv"), _matrix_csv(names, m))
    if opts.get("figures") and names:
        from .plotting import plot_heatmap
        plot_heatmap(names, m, out.with_suffix(".pearson.png"), f"Pearson r between raters ({pos.label})")
    print(json.dumps({
        "table": str(out),
        "entries": len(table),
        "candidate_pairs": len(pairs),
        "screening_calls": screen.calls,
        "nonzero": len(screen.nonzero),
        "screened_out": len(screen.screened_out),
        "unrated": manifest["unrated"],
    }, indent=2))
    return 0


def cmd_audit_screening(args: argparse.Namespace) -> int:
    opts = _merged(args, "audit_screening")
    for req in ("wordnet", "journal", "sample"):
        if not opts.get(req):
            raise UsageError(f"--{req} is required")
    graph = load_wordnet(opts["wordnet"])
    gateways, screener_name = _gateways(opts)
    done = Journal(opts["journal"]).load()
    zeroed = sorted({(a, b) for (a, b, rater), r in done.items() if rater == screener_name and r.rating == 0})
    refiners = [g for g in gateways if g.name != screener_name]
    engine = PairRater(graph.synset, _template(opts), workers=int(opts.get("workers", 8)))
    pct = audit_screening(zeroed, int(opts["sample"]), refiners, int(opts.get("seed", 0)), engine)
    print(json.dumps({
        "screener": screener_name,
        "screened_out": len(zeroed),
        "sample_size": int(opts["sample"]),
        "seed": int(opts.get("seed", 0)),
        "disagreement_pct": {k: _r(v, 3) for k, v in pct.items()},
    }, indent=2))
    return 0


# -- agreement / tune-weight -----------------------------------------------------

def cmd_agreement(args: argparse.Namespace) -> int:
    opts = _merged(args, "agreement")
    if not opts.get("ratings"):
        raise UsageError("--ratings is required")
    records = read_ratings(opts["ratings"])
    report: dict = {"n_ratings": len(records)}
    report["mean_pairwise_agreement_pct"] = _r(agr.mean_pairwise_agreement(records), 2)
    try:
        report["krippendorff_alpha"] = _r(agr.krippendorff_alpha(records))
    except agr.AgreementError as exc:
        report["krippendorff_alpha"] = None
        report.setdefault("warnings", []).append(f"krippendorff_alpha: {exc}")
    try:
        sigma, se = agr.rating_se(records)
        report["within_item_sd"], report["standard_error"] = _r(sigma), _r(se)
    except agr.AgreementError as exc:
        report.setdefault("warnings", []).append(f"standard_error: {exc}")

    out_dir = Path(opts["out_dir"]) if opts.get("out_dir") else None
    matrices = {}
    for stat in ("spearman", "pearson", "qwk"):
        names, m = agr.annotator_matrix(records, stat)
        matrices[stat] = (names, m)
        report[f"{stat}_matrix"] = {"annotators": names, "values": [[_r(v) for v in row] for row in m]}
        off = m[~np.eye(len(names), dtype=bool)]
        report[f"mean_{stat}"] = _r(np.nanmean(off)) if off.size and not np.all(np.isnan(off)) else None

    if opts.get("metric_scores"):
        scores = read_metric_scores(opts["metric_scores"])
        means = agr.human_means(records)
        items = sorted(set(scores) & set(means))
        metric = {"items": len(items), "agreement_pct": _r(agr.metric_agreement(scores, means), 2)}
        if len(items) >= 3:
            x = [scores[i] for i in items]
            y = [means[i] for i in items]
            rho = agr.spearman_rho(x, y)
            metric["spearman_rho"] = _r(rho)
            if opts.get("ci") and len(items) > 3 and abs(rho) < 1:
                lo, hi = agr.spearman_fisher_ci(rho, len(items), float(opts["ci"]))
                metric["fisher_ci"] = {"level": float(opts["ci"]), "low": _r(lo), "high": _r(hi)}
            if opts.get("permutations"):
                metric["permutation"] = {
                    "trials": int(opts["permutations"]),
                    "seed": int(opts.get("seed", 0)),
                    "p_value": _r(agr.permutation_test(x, y, int(opts["permutations"]), int(opts.get("seed", 0)))),
                }
        report["metric"] = metric

    text = json.dumps(report, indent=2) + "\n"
    if out_dir:
        _write(out_dir / "agreement.json", text)
        for stat, (names, m) in matrices.items():
            _write(out_dir / f"{stat}_matrix.csv", _matrix_csv(names, m))
            if opts.get("figures"):
                from .plotting import plot_heatmap
                title = {"spearman": "Pairwise Spearman rho", "pearson": "Pairwise Pearson r",
                         "qwk": "Pairwise quadratic weighted kappa"}[stat]
                plot_heatmap(names, m, out_dir / f"{stat}_heatmap.png", title)
    sys.stdout.write(text)
    return 0


def cmd_tune_weight(args: argparse.Namespace) -> int:
    opts = _merged(args, "tune_weight")
    if not opts.get("samples"):
        raise UsageError("--samples is required")
    samples = read_tuning_samples(opts["samples"])
    cats = sorted({s.category for s in samples}) if not opts.get("categories") else \
        [int(c) for c in str(opts["categories"]).split(",")]
    fits = agr.tune_weight(samples, float(opts.get("grid_step", 0.001)), cats)
    report = {
        "grid_step": float(opts.get("grid_step", 0.001)),
        "categories": {
            str(c): {
                "n": f.n,
                "w_star": _r(f.w_grid),
                "mae_at_w_star": _r(f.mae_grid),
                "w_exact": _r(f.w_exact),
                "mae_exact": _r(f.mae_exact),
                "exact_minimizers": [_r(w) for w in f.exact_minimizers],
            }
            for c, f in fits.items()
        },
    }
    text = json.dumps(report, indent=2) + "\n"
    if opts.get("out_dir"):
        out_dir = Path(opts["out_dir"])
        _write(out_dir / "tune_weight.json", text)
        grid = next(iter(fits.values())).grid
        lines = ["w," + ",".join(f"mae_category_{c}" for c in fits)]
        for i, w in enumerate(grid):
            lines.append(f"{w:.6f}," + ",".join(f"{fits[c].mae[i]:.6f}" for c in fits))
        _write(out_dir / "mae_curves.csv", "\n".join(lines) + "\n")
        if opts.get("figures"):
            from .plotting import plot_mae_curves
            plot_mae_curves(fits, out_dir / "mae_curves.png")
    sys.stdout.write(text)
    return 0


# -- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="shoe", description="Semantic HOI evaluation with soft matching.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="TOML or JSON file of option defaults")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--workers", type=int)
        sp.add_argument("--out-dir", dest="out_dir")
        sp.add_argument("--figures", action="store_true", default=None, help="render PNG figures into --out-dir")

    e = sub.add_parser("eval", help="score predictions against ground truth")
    common(e)
    e.add_argument("--wordnet")
    e.add_argument("--gt")
    e.add_argument("--pred")
    e.add_argument("--verb-table", dest="verb_table")
    e.add_argument("--object-table", dest="object_table")
    e.add_argument("--theta", type=float)
    e.add_argument("--delta", type=float)
    e.add_argument("--tau", type=float)
    e.add_argument("--agg", choices=["arithmetic", "geometric", "minimum"])
    e.add_argument("--weight", type=float)
    e.add_argument("--mode", choices=["ranked", "free"])
    e.add_argument("--exact", action="store_true", default=None, help="exact-label matching (identity tables)")
    e.add_argument("--fn-accounting", dest="fn_accounting", choices=["shortfall-fp", "shortfall-fn"])
    e.add_argument("--fp-scope", dest="fp_scope", choices=["image", "global"])
    e.add_argument("--classes", help="class subset file (e.g. a rare split)")
    e.add_argument("--out", help="write the JSON report here")
    strict = e.add_mutually_exclusive_group()
    strict.add_argument("--strict", dest="strict", action="store_true", default=None)
    strict.add_argument("--lenient", dest="strict", action="store_false")
    e.set_defaults(func=cmd_eval)

    b = sub.add_parser("build-sim", help="build a similarity table from rater judgements")
    common(b)
    b.add_argument("--wordnet")
    b.add_argument("--pos", choices=["verb", "noun"])
    b.add_argument("--targets", help="synset keys to score (e.g. dataset verbs)")
    b.add_argument("--candidates", help="synset keys to compare against; default: WordNet neighborhood")
    b.add_argument("--depth", type=int, help="neighborhood hops when no candidate list is given")
    b.add_argument("--mock", type=int, help="use N deterministic mock raters")
    b.add_argument("--screener")
    b.add_argument("--raters", dest="raters_subset", help="comma-separated rater subset to average")
    b.add_argument("--template", help="prompt template file")
    b.add_argument("--journal")
    b.add_argument("--audit", type=int, help="re-rate N screened-out pairs with the refinement raters")
    b.add_argument("--out")
    b.set_defaults(func=cmd_build_sim)

    a = sub.add_parser("audit-screening", help="re-rate a sample of screened-out pairs")
    common(a)
    a.add_argument("--wordnet")
    a.add_argument("--journal")
    a.add_argument("--mock", type=int)
    a.add_argument("--screener")
    a.add_argument("--template")
    a.add_argument("--sample", type=int)
    a.set_defaults(func=cmd_audit_screening)

    g = sub.add_parser("agreement", help="inter-annotator and metric-vs-human statistics")
    common(g)
    g.add_argument("--ratings")
    g.add_argument("--metric-scores", dest="metric_scores")
    g.add_argument("--ci", type=float, help="Fisher interval level for metric Spearman, e.g. 0.95")
    g.add_argument("--permutations", type=int, help="permutation-test resamples")
    g.set_defaults(func=cmd_agreement)

    t = sub.add_parser("tune-weight", help="MAE-optimal verb weight per category")
    common(t)
    t.add_argument("--samples")
    t.add_argument("--grid-step", dest="grid_step", type=float)
    t.add_argument("--categories", help="comma-separated subset of 1,2,3")
    t.set_defaults(func=cmd_tune_weight)
    return p


def main(argv: "Sequence[str] | None" = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    del args.verbose
    try:
        return args.func(args)
    except SchemaError as exc:
        for d in exc.diagnostics:
            print(f"schema error: {d}", file=sys.stderr)
        return EXIT_SCHEMA
    except ResolutionError as exc:
        for d in exc.diagnostics:
            print(f"unresolved: {d}", file=sys.stderr)
        return EXIT_UNRESOLVED
    except (UsageError, WordnetError, TableError, ValueError, OSError) as exc:
        print(f"shoe: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
