"""Command-line entry point exposing the full pipeline with seeded runs.

Subcommands: build-index, explain, classify, bt, sdt, map-labels.

Exit codes are a stable contract: 0 success, 1 usage or parse failure,
2 induction produced no explanation, 3 statistical estimator failure.
Every report starts with a header echoing tool version, resolved config,
and seed; two runs with identical headers produce identical bodies (no
timestamps anywhere).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .analysis import (
    PairwiseTally,
    fit_bradley_terry,
    load_sdt_rows,
    load_tally_rows,
    sdt_estimate,
    split_components,
)
from .classifier import (
    TagVectorizer,
    confusion_groups,
    kfold_eval,
    load_items,
    prepare_dataset,
    sample_group,
)
from .errors import (
    ConceptDiffError,
    EstimatorError,
    InsufficientConceptsError,
    NoExplanationError,
    ParseError,
)
from .explain import (
    MAX_CONCEPTS,
    alphabetize,
    assemble_machine_explanation,
    load_concreteness,
    semi_random_baseline,
)
from .induction import induce
from .membership import AnnotateClient, MembershipIndex, map_labels, parse_membership_pairs
from .seeding import CLASS_BALANCE, GROUP_SAMPLE, KFOLD_SHUFFLE, derive_seed
from .store import load_index, save_index
from .taxonomy import ClosureIndex, break_cycles, load_edges, materialize_closure

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NO_EXPLANATION = 2
EXIT_ESTIMATOR = 3

COMPARISONS = ("fp_vs_tn", "tp_vs_fn", "tp_vs_fp", "fn_vs_tn")


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on usage errors; the contract wants 1
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _header_lines(subcommand: str, config: dict) -> list[str]:
    cfg = " ".join(f"{k}={v}" for k, v in sorted(config.items()))
    return [
        f"# tool=conceptdiff version={__version__}",
        f"# subcommand={subcommand}",
        f"# config: {cfg}",
        f"# seed={config.get('seed', '-')}",
    ]


def _meta(subcommand: str, config: dict) -> dict:
    return {
        "tool": "conceptdiff",
        "version": __version__,
        "subcommand": subcommand,
        "config": {k: config[k] for k in sorted(config)},
        "seed": config.get("seed"),
    }


def _emit(path: str | None, text: str):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _read_lines(path) -> list[str]:
    out = []
    seen = set()
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line not in seen:
                seen.add(line)
                out.append(line)
    return out


def _load_config_file(path) -> dict[str, str]:
    out: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ParseError(path, line_no, "expected key=value")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


def _resolve(flag_value, cfg: dict, key: str, default, cast):
    if flag_value is not None:
        return flag_value
    if key in cfg:
        return cast(cfg[key])
    return default


# --- build-index ------------------------------------------------------------

def cmd_build_index(args) -> None:
    edges = load_edges(args.edges)
    taxonomy = break_cycles(edges)
    individuals, pairs = parse_membership_pairs(
        args.memberships, taxonomy.concepts, strict=not args.intern_unknown
    )
    closure = materialize_closure(taxonomy, n_concepts=len(taxonomy.concepts))
    membership = MembershipIndex.from_pairs(pairs, individuals, closure)
    save_index(args.out, taxonomy, closure, membership)

    predicted = ClosureIndex.predicted_memory_bytes(closure.n_concepts, closure.total_entries)
    print(f"concepts={closure.n_concepts}")
    print(f"individuals={membership.n_individuals}")
    print(f"edges_loaded={len(edges)}")
    print(f"dag_edges={len(taxonomy.dag_edges)}")
    print(f"removed_cycle_edges={len(taxonomy.removed_edges)}")
    print(f"duplicates_collapsed={taxonomy.duplicates_collapsed}")
    print(f"closure_entries={closure.total_entries}")
    print(f"closure_memory_predicted_bytes={predicted}")
    print(f"closure_memory_actual_bytes={closure.memory_bytes}")
    print(f"index_file={args.out}")


# --- explain -----------------------------------------------------------------

def cmd_explain(args) -> None:
    bundle = load_index(args.index)
    membership = bundle.membership

    cfg = _load_config_file(args.config) if args.config else {}
    metric = _resolve(args.metric, cfg, "metric", "f1", str)
    max_conjuncts = _resolve(args.max_conjuncts, cfg, "max_conjuncts", 2, int)
    max_disjuncts = _resolve(args.max_disjuncts, cfg, "max_disjuncts", 3, int)
    beam_width = _resolve(args.beam_width, cfg, "beam_width", 64, int)
    top_k = _resolve(args.top_k, cfg, "top_k", 7, int)
    alpha = _resolve(args.alpha, cfg, "alpha", 0.5, float)

    pos_iris = _read_lines(args.positives)
    neg_iris = _read_lines(args.negatives)
    if not pos_iris or not neg_iris:
        raise ParseError(args.positives if not pos_iris else args.negatives, 1,
                         "example file lists no individuals")

    def to_ids(iris, path):
        ids = []
        for iri in iris:
            ident = membership.individuals.get(iri)
            if ident is None:
                raise ParseError(path, 1, f"individual {iri!r} is not in the membership index")
            ids.append(ident)
        return ids

    pos_ids = to_ids(pos_iris, args.positives)
    neg_ids = to_ids(neg_iris, args.negatives)

    kind = "induced"
    seed_used = None
    if args.baseline_seed is not None:
        pos_ids, neg_ids = semi_random_baseline(pos_ids, neg_ids, args.baseline_seed)
        kind = "semi_random"
        seed_used = args.baseline_seed

    table = load_concreteness(args.concreteness) if args.concreteness else None
    # with filtering on, ask the ranking for extra candidates so seven survive
    n_candidates = max(top_k, 64) if table is not None else top_k
    ranking = induce(
        pos_ids, neg_ids, membership, metric=metric, max_conjuncts=max_conjuncts,
        max_disjuncts=max_disjuncts, beam_width=beam_width, top_k=n_candidates,
        alpha=alpha,
    )
    if not ranking:
        raise NoExplanationError("no concept covers any positive example")

    explanation = assemble_machine_explanation(
        ranking, k=min(top_k, MAX_CONCEPTS), table=table, threshold=args.threshold,
        kind=kind, metric=metric, seed=seed_used,
    )
    if args.alphabetize:
        explanation = alphabetize(explanation)

    config = {
        "metric": metric, "max_conjuncts": max_conjuncts,
        "max_disjuncts": max_disjuncts, "beam_width": beam_width,
        "top_k": top_k, "alpha": alpha, "threshold": args.threshold,
        "concreteness": args.concreteness or "-",
        "alphabetize": args.alphabetize,
        "seed": seed_used if seed_used is not None else "-",
        "kind": kind, "index": args.index,
        "positives": args.positives, "negatives": args.negatives,
    }
    lines = _header_lines("explain", config)
    lines.append(explanation.to_line())
    lines.append("# rank\tlabel\ttp\tfp\tprecision\trecall\tf1\thybrid")
    for rank, sc in enumerate(ranking, start=1):
        s = sc.scores
        lines.append(
            f"# {rank}\t{sc.label}\t{s.tp}\t{s.fp}\t{s.precision:.6f}"
            f"\t{s.recall:.6f}\t{s.f1:.6f}\t{s.hybrid:.6f}"
        )
    _emit(args.out_text, "\n".join(lines) + "\n")

    if args.out_json:
        payload = {
            "meta": _meta("explain", config),
            "explanation": explanation.to_json_obj(),
            "ranking": [
                {
                    "label": sc.label,
                    "tp": sc.scores.tp, "fp": sc.scores.fp,
                    "fn": sc.scores.fn, "tn": sc.scores.tn,
                    "precision": sc.scores.precision, "recall": sc.scores.recall,
                    "f1": sc.scores.f1, "hybrid": sc.scores.hybrid,
                }
                for sc in ranking
            ],
        }
        _emit(args.out_json, json.dumps(payload, sort_keys=True, indent=2) + "\n")


# --- classify ----------------------------------------------------------------

def cmd_classify(args) -> None:
    items = load_items(args.items)
    selected, y = prepare_dataset(
        items, args.target, min_tags=args.min_tags,
        seed=derive_seed(args.seed, CLASS_BALANCE),
    )
    vectorizer = TagVectorizer().fit([it.tags for it in selected])
    X = vectorizer.transform([it.tags for it in selected])
    folds = kfold_eval(
        X, y, k=args.k_folds, seed=derive_seed(args.seed, KFOLD_SHUFFLE),
        l2=args.l2, max_iter=args.max_iter, tol=args.tol,
    )
    ids = [it.item_id for it in selected]
    groups = confusion_groups(folds.pred, y, ids=ids)
    by_group = groups.as_dict()

    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    config = {
        "target": args.target, "k_folds": args.k_folds, "l2": args.l2,
        "max_iter": args.max_iter, "tol": args.tol, "min_tags": args.min_tags,
        "sample_cap": args.sample_cap, "seed": args.seed, "items": args.items,
    }
    group_of = {}
    for name, members in by_group.items():
        for m in members:
            group_of[m] = name
    lines = _header_lines("classify", config)
    lines.append("item_id,truth,pred,prob,group")
    for i, item_id in enumerate(ids):
        lines.append(
            f"{item_id},{y[i]},{folds.pred[i]},{folds.proba[i]:.6f},{group_of[item_id]}"
        )
    (outdir / "predictions.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    pair_sets = {
        "fp_vs_tn": (groups.fp, groups.tn),
        "tp_vs_fn": (groups.tp, groups.fn),
        "tp_vs_fp": (groups.tp, groups.fp),
        "fn_vs_tn": (groups.fn, groups.tn),
    }
    for comp in COMPARISONS:
        pos, neg = pair_sets[comp]
        for side, members in (("positives", pos), ("negatives", neg)):
            if not members:
                print(f"warning: empty group for {comp} ({side})", file=sys.stderr)
            path = outdir / f"{comp}.{side}.txt"
            path.write_text("".join(f"{m}\n" for m in sorted(members)), encoding="utf-8")

    for idx, name in enumerate(("tp", "tn", "fp", "fn")):
        sample = sample_group(
            by_group[name], cap=args.sample_cap,
            seed=derive_seed(args.seed, GROUP_SAMPLE, idx),
        )
        (outdir / f"sample_{name}.txt").write_text(
            "".join(f"{m}\n" for m in sample), encoding="utf-8"
        )

    n = len(ids)
    correct = len(groups.tp) + len(groups.tn)
    print(f"items={n} tp={len(groups.tp)} tn={len(groups.tn)} "
          f"fp={len(groups.fp)} fn={len(groups.fn)} accuracy={correct / n:.4f}")
    print(f"outputs={outdir}")


# --- bt / sdt ----------------------------------------------------------------

def _resolve_reference(name: str | None, items) -> str:
    if name is None:
        return sorted(items)[0]
    if name in items:
        return name
    suffix = [it for it in items if it.endswith(name)]
    if len(suffix) == 1:
        return suffix[0]
    raise ValueError(
        f"reference {name!r} does not name an item in component {sorted(items)}"
    )


def cmd_bt(args) -> None:
    rows = load_tally_rows(args.tally)
    if not rows:
        raise ParseError(args.tally, 1, "tally file lists no comparisons")
    config = {
        "reference": args.reference or "-", "penalty": args.penalty,
        "tol": args.tol, "max_iter": args.max_iter, "tally": args.tally,
        "seed": "-",
    }
    fits = []
    for comp_rows in split_components(rows):
        tally = PairwiseTally.from_pairs(comp_rows)
        reference = _resolve_reference(args.reference, tally.items)
        fit = fit_bradley_terry(
            tally, reference, penalty=args.penalty, tol=args.tol, max_iter=args.max_iter
        )
        fits.append(fit)

    lines = _header_lines("bt", config)
    for idx, fit in enumerate(fits):
        cells = " ".join(
            f"{item}={fit.ability(item):.6f}" for item in fit.items
        )
        lines.append(
            f"component {idx}: reference={fit.reference} {cells} "
            f"loglik={fit.loglik:.6f} converged={str(fit.converged).lower()}"
        )
    _emit(args.out, "\n".join(lines) + "\n")

    if args.out_csv:
        csv_lines = _header_lines("bt", config)
        csv_lines.append("component,item,ability,is_reference,converged,loglik")
        for idx, fit in enumerate(fits):
            for item in fit.items:
                csv_lines.append(
                    f"{idx},{item},{fit.ability(item):.6f},"
                    f"{int(item == fit.reference)},{int(fit.converged)},{fit.loglik:.6f}"
                )
        _emit(args.out_csv, "\n".join(csv_lines) + "\n")


def cmd_sdt(args) -> None:
    rows = load_sdt_rows(args.counts)
    if not rows:
        raise ParseError(args.counts, 1, "counts file lists no rows")
    config = {"correction": args.correction, "counts": args.counts, "seed": "-"}
    estimates = [sdt_estimate(*row, correction=args.correction) for row in rows]

    lines = _header_lines("sdt", config)
    lines.append("row,hits,misses,false_alarms,correct_rejections,d_prime,c,corrected")
    for idx, est in enumerate(estimates):
        lines.append(
            f"{idx},{est.hits},{est.misses},{est.false_alarms},"
            f"{est.correct_rejections},{est.d_prime:.6f},{est.c:.6f},{int(est.corrected)}"
        )
    _emit(args.out, "\n".join(lines) + "\n")


# --- map-labels ----------------------------------------------------------------

def cmd_map_labels(args) -> None:
    labels = _read_lines(args.labels)
    client = None
    if args.service_url:
        client = AnnotateClient(
            args.service_url, param=args.query_param,
            politeness_delay=args.delay,
        )
    mappings, unmapped = map_labels(
        labels, args.mapfile, client=client, cache_path=args.cache
    )
    config = {
        "mapfile": args.mapfile, "service_url": args.service_url or "-",
        "cache": args.cache or "-", "labels": args.labels, "seed": "-",
    }
    lines = _header_lines("map-labels", config)
    for m in mappings:
        for concept in m.concepts:
            lines.append(f"{m.label}\t{concept}\t{m.source}")
    _emit(args.out, "\n".join(lines) + "\n")
    for label in unmapped:
        print(f"unmapped: {label}", file=sys.stderr)
    if client is not None:
        print(f"service_calls={client.calls}", file=sys.stderr)


# --- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="conceptdiff", description=__doc__)
    parser.add_argument("--version", action="version", version=f"conceptdiff {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    p = sub.add_parser("build-index", help="repair a hierarchy and serialize the indexes")
    p.add_argument("edges", help="child<TAB>parent edge file")
    p.add_argument("memberships", help="individual<TAB>concept membership file")
    p.add_argument("out", help="output index file")
    p.add_argument("--intern-unknown", action="store_true",
                   help="intern membership concepts missing from the hierarchy "
                        "instead of failing")
    p.set_defaults(func=cmd_build_index)

    p = sub.add_parser("explain", help="induce an explanation for two example sets")
    p.add_argument("index", help="index file from build-index")
    p.add_argument("positives", help="file with one positive individual IRI per line")
    p.add_argument("negatives", help="file with one negative individual IRI per line")
    p.add_argument("--metric", choices=["f1", "precision", "recall", "hybrid"])
    p.add_argument("--max-conjuncts", type=int)
    p.add_argument("--max-disjuncts", type=int)
    p.add_argument("--beam-width", type=int)
    p.add_argument("--top-k", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--config", help="key=value file supplying defaults for the flags above")
    p.add_argument("--concreteness", help="word,rating CSV enabling the concreteness filter")
    p.add_argument("--threshold", type=float, default=3.5,
                   help="keep concepts rated at or above this (default 3.5)")
    p.add_argument("--alphabetize", action="store_true")
    p.add_argument("--baseline-seed", type=int,
                   help="shuffle the two sets first (semi-random baseline)")
    p.add_argument("--out-text", default="-", help="text report path (default stdout)")
    p.add_argument("--out-json", help="JSON report path")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("classify", help="cross-validate the tag classifier and group errors")
    p.add_argument("items", help="item_id<TAB>label<TAB>tag1;tag2;... file")
    p.add_argument("target", help="target scene label")
    p.add_argument("outdir", help="directory for predictions and example files")
    p.add_argument("--k-folds", type=int, default=10)
    p.add_argument("--l2", type=float, default=1.0)
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--min-tags", type=int, default=6,
                   help="keep items with at least this many tags (default 6)")
    p.add_argument("--sample-cap", type=int, default=9,
                   help="display-sample size per confusion group (default 9)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("bt", help="fit pairwise preference abilities")
    p.add_argument("tally", help="item_a,item_b,wins_a,wins_b CSV")
    p.add_argument("--reference", help="item pinned to ability 0 "
                                       "(exact name or unique suffix per component)")
    p.add_argument("--penalty", type=float, default=0.0)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iter", type=int, default=10000)
    p.add_argument("--out", default="-", help="report path (default stdout)")
    p.add_argument("--out-csv", help="machine-readable CSV path")
    p.set_defaults(func=cmd_bt)

    p = sub.add_parser("sdt", help="estimate discriminability and bias")
    p.add_argument("counts", help="hits,misses,false_alarms,correct_rejections CSV")
    p.add_argument("--correction", choices=["loglinear", "none"], default="loglinear")
    p.add_argument("--out", default="-", help="report path (default stdout)")
    p.set_defaults(func=cmd_sdt)

    p = sub.add_parser("map-labels", help="resolve free-text labels to concept IRIs")
    p.add_argument("labels", help="file with one label per line")
    p.add_argument("mapfile", help="label<TAB>concept_iri TSV")
    p.add_argument("--service-url", help="annotate endpoint for unresolved labels")
    p.add_argument("--query-param", default="text")
    p.add_argument("--cache", help="sidecar cache TSV path")
    p.add_argument("--delay", type=float, default=0.05,
                   help="politeness delay between service calls (seconds)")
    p.add_argument("--out", default="-", help="mapping TSV path (default stdout)")
    p.set_defaults(func=cmd_map_labels)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (NoExplanationError, InsufficientConceptsError) as exc:
        print(f"no explanation: {exc}", file=sys.stderr)
        return EXIT_NO_EXPLANATION
    except EstimatorError as exc:
        print(f"estimator failure: {exc}", file=sys.stderr)
        return EXIT_ESTIMATOR
    except (ConceptDiffError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK
