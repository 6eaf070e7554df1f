import argparse
import logging
import os
import sys
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import scipy
import sklearn

import strainscope
from strainscope import reports, utils
from strainscope.graph.behaviors import SCOPES, check_scope
from strainscope.graph.spread import pattern_shares
from strainscope.ledger.ledger_store import LedgerIndex, load_ledger, load_seeds, group_seeds, filter_low_labelled, \
    seed_census
from strainscope.ledger.synth_ledger import standard_campaign, write_fixture
from strainscope.pipeline import FamilyResult, STAGES, run_families, compare_families
from strainscope.similarity.family_similarity import FamilySimilarity
from strainscope.similarity.tools_similarity import DEFAULT_LAMBDA_PCTS

logger = logging.getLogger(__name__)

THREADS_ENV = "STRAINSCOPE_THREADS"
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def _env_threads() -> int:
    value = os.environ.get(THREADS_ENV)
    if value is None or not value.strip():
        return 1
    try:
        threads = int(value)
    except ValueError:
        raise ValueError(THREADS_ENV + " should be a positive integer, got " + repr(value) + ".")
    if threads < 1:
        raise ValueError(THREADS_ENV + " should be a positive integer, got " + repr(value) + ".")
    return threads


@dataclass
class RunConfig:
    """
    Settings of a pipeline run.

    Attributes
    ----------
    ledger_path, seeds_path : str
        transactions.jsonl and seeds.csv.

    out_dir : str
        Directory the reports are written to; created if needed.

    steps : int, default=2
        Number of steps of the family graphs.

    degree_scope : {"ledger", "graph"}, default="ledger"
        Where the behavior degrees are counted ("full-ledger" and "in-graph" are accepted aliases).

    lambda_pcts : tuple of float, default=(1, 2, 3, 4, 5, 10)
        Cluster thresholds as percentages of d_max.

    threads : int or None, default=None
        Families analysed concurrently; None reads STRAINSCOPE_THREADS, then falls back to 1.

    max_seeds : int or None, default=None
        Keeps only families with fewer seeds than this.

    export_graph : bool, default=False
        Also writes nodes.csv and edges.csv in the report.
    """
    ledger_path: str
    seeds_path: str
    out_dir: str
    steps: int = 2
    degree_scope: str = "ledger"
    lambda_pcts: Tuple[float, ...] = DEFAULT_LAMBDA_PCTS
    threads: Optional[int] = None
    max_seeds: Optional[int] = None
    export_graph: bool = False

    def __post_init__(self):
        utils.validate_number(self.steps, int, "positive", "steps")
        self.degree_scope = check_scope(self.degree_scope)
        self.lambda_pcts = tuple(self.lambda_pcts)
        if not self.lambda_pcts:
            raise ValueError("At least one lambda_pct is required.")
        for lambda_pct in self.lambda_pcts:
            utils.validate_number(lambda_pct, float, "percentage", "lambda_pct")
        if self.threads is None:
            self.threads = _env_threads()
        utils.validate_number(self.threads, int, "positive", "threads")
        if self.max_seeds is not None:
            utils.validate_number(self.max_seeds, int, "positive", "max_seeds")

    def manifest_config(self) -> dict:
        """
        Settings that shape the outputs; out_dir and threads are left out so manifests compare across runs.
        """
        config = asdict(self)
        for key in ("out_dir", "threads", "ledger_path", "seeds_path"):
            config.pop(key)
        config["lambda_pcts"] = [float(x) for x in self.lambda_pcts]
        return config


def library_versions() -> Dict[str, str]:
    return {"strainscope": strainscope.version, "numpy": np.__version__, "scipy": scipy.__version__,
            "scikit-learn": sklearn.__version__, "pandas": pd.__version__}


class Run(object):
    """
    Loads the inputs of a RunConfig once and runs the requested stages over every family.
    """

    def __init__(self, config: RunConfig):
        self.config = config
        self.out_dir = Path(config.out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.index: LedgerIndex = load_ledger(config.ledger_path)
        seeds = load_seeds(config.seeds_path)
        self.seeds = filter_low_labelled(seeds, config.max_seeds)
        self.groups = group_seeds(self.seeds)
        self.outputs: List[Path] = []

    def families(self, stages: Sequence[str]) -> List[FamilyResult]:
        return run_families(self.index, self.groups, self.config.steps, self.config.degree_scope, stages,
                            self.config.threads)

    def similarity(self, results: Sequence[FamilyResult], needed: int = 2) -> FamilySimilarity:
        fitted = compare_families(results, self.config.lambda_pcts)
        n_profiles = 0 if fitted is None else len(fitted.profiles_)
        if n_profiles < needed:
            raise ValueError("At least " + str(needed) + " family profiles are required, got " + str(n_profiles)
                             + ".")
        return fitted

    def write(self, *paths):
        for p in paths:
            if isinstance(p, (list, tuple)):
                self.outputs.extend(p)
            else:
                self.outputs.append(p)


def _cmd_ingest_check(run: Run) -> None:
    present = [s for s in run.seeds if s.address in run.index.addr_pos]
    summary = {"transactions": len(run.index),
               "addresses": run.index.num_addresses,
               "families": len(run.groups),
               "seeds": len(run.seeds),
               "seeds_in_ledger": len(present),
               "missing_seeds": sorted(s.family + "," + s.address for s in run.seeds
                                       if s.address not in run.index.addr_pos),
               "census": [{k: reports.numpy_safe(v) for k, v in row.items()}
                          for row in seed_census(run.seeds).to_dict("records")]}
    run.write(reports.write_json(summary, run.out_dir / "ledger_summary.json"))


def _cmd_build_graph(run: Run) -> None:
    run.write(reports.write_graph(run.families(("graph",)), run.out_dir))


def _write_spread(run: Run, results: Sequence[FamilyResult]) -> None:
    run.write(reports.write_spread(results, run.out_dir))
    if run.config.steps == 2:
        run.write(reports.write_pattern_shares(pattern_shares({r.family: r.pattern for r in results}), run.out_dir))
    else:
        logger.warning("Spreading patterns are defined for 2-step graphs, the pattern column is left empty.")


def _cmd_spread(run: Run) -> None:
    _write_spread(run, run.families(("graph", "spread")))


def _cmd_behaviors(run: Run) -> None:
    run.write(reports.write_behaviors(run.families(("graph", "behaviors")), run.config.degree_scope, run.out_dir))


def _profiles(run: Run) -> List[FamilyResult]:
    return run.families(("graph", "behaviors", "profile"))


def _cmd_profile(run: Run) -> None:
    results = _profiles(run)
    run.write(reports.write_profiles([r.profile for r in results if r.profile is not None], run.out_dir))


def _cmd_distances(run: Run) -> None:
    fitted = run.similarity(_profiles(run))
    run.write(reports.write_distances(fitted.distance_matrix_, run.out_dir))


def _cmd_pca(run: Run) -> None:
    fitted = run.similarity(_profiles(run), needed=3)
    run.write(reports.write_pca(fitted.pca_, run.out_dir))


def _cmd_cluster(run: Run) -> None:
    fitted = run.similarity(_profiles(run))
    run.write(reports.write_clusters(fitted.cluster_reports(), run.out_dir),
              reports.write_cluster_table(fitted.cluster_table(), run.out_dir))


def _cmd_report(run: Run) -> None:
    results = run.families(STAGES)
    failures = {r.family: list(r.errors) for r in results}
    if run.config.export_graph:
        run.write(reports.write_graph(results, run.out_dir))
    _write_spread(run, results)
    run.write(reports.write_behaviors(results, run.config.degree_scope, run.out_dir),
              reports.write_profiles([r.profile for r in results if r.profile is not None], run.out_dir))
    fitted = compare_families(results, run.config.lambda_pcts)
    if fitted is None:
        failures["*"] = ["family comparison needs at least 2 profiles"]
    else:
        run.write(reports.write_distances(fitted.distance_matrix_, run.out_dir),
                  reports.write_clusters(fitted.cluster_reports(), run.out_dir),
                  reports.write_cluster_table(fitted.cluster_table(), run.out_dir))
        if fitted.pca_ is None:
            failures["*"] = ["PCA needs at least 3 profiles"]
        else:
            run.write(reports.write_pca(fitted.pca_, run.out_dir))
    manifest = reports.run_manifest({"ledger": run.config.ledger_path, "seeds": run.config.seeds_path},
                                    run.config.manifest_config(), library_versions(), list(run.groups),
                                    failures, run.outputs)
    reports.write_json(manifest, run.out_dir / "manifest.json")


COMMANDS: Dict[str, Tuple[Callable[[Run], None], str]] = {
    "ingest-check": (_cmd_ingest_check, "validate the inputs and write ledger_summary.json"),
    "build-graph": (_cmd_build_graph, "write the family graphs as nodes.csv and edges.csv"),
    "spread": (_cmd_spread, "write spread.csv, blockheights.csv and pattern_shares.csv"),
    "behaviors": (_cmd_behaviors, "write behaviors.csv"),
    "profile": (_cmd_profile, "write profiles.csv"),
    "distances": (_cmd_distances, "write distances.csv"),
    "pca": (_cmd_pca, "write pca.csv"),
    "cluster": (_cmd_cluster, "write clusters.json and cluster_table.csv"),
    "report": (_cmd_report, "run the full pipeline and write every report plus manifest.json"),
}


def _run_synth(args: argparse.Namespace) -> None:
    campaigns = [standard_campaign("family" + str(i).zfill(2), num_seeds=args.seeds_per_family,
                                   motifs_per_kind=args.motifs_per_kind, filler_tx_count=args.filler,
                                   rng_seed=args.rng_seed + i, reach_padding=args.padding + 10 * i,
                                   base_height=1000 + 100 * i)
                 for i in range(args.families)]
    paths = write_fixture(args.out, campaigns)
    logger.info("Fixture is written to %s.", ", ".join(str(p) for p in paths.values()))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="strainscope",
                                     description="Ransomware family analysis over a blockchain ledger.")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="warnings and errors only")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--ledger", required=True, help="transactions.jsonl")
    common.add_argument("--seeds", required=True, help="seeds.csv")
    common.add_argument("--out", required=True, help="output directory")
    common.add_argument("--steps", type=int, default=2, help="graph steps (default: 2)")
    common.add_argument("--scope", choices=sorted(SCOPES), default="ledger",
                        help="where behavior degrees are counted (default: ledger)")
    common.add_argument("--lambda-pct", type=float, action="append", dest="lambda_pcts",
                        help="cluster threshold in percent of d_max, repeatable (default: 1 2 3 4 5 10)")
    common.add_argument("--threads", type=int, default=None,
                        help="families analysed concurrently (default: $" + THREADS_ENV + " or 1)")
    common.add_argument("--max-seeds", type=int, default=None,
                        help="only analyse families with fewer seeds than this")
    common.add_argument("--export-graph", action="store_true", help="report also writes nodes.csv and edges.csv")

    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_text)
    synth = sub.add_parser("synth", help="write a synthetic fixture with planted behaviors")
    synth.add_argument("--out", required=True, help="output directory")
    synth.add_argument("--families", type=int, default=3)
    synth.add_argument("--seeds-per-family", type=int, default=2)
    synth.add_argument("--motifs-per-kind", type=int, default=1)
    synth.add_argument("--filler", type=int, default=0, help="unrelated transactions per family")
    synth.add_argument("--padding", type=int, default=0,
                       help="extra addresses paid by the first seed; family i gets 10 * i more")
    synth.add_argument("--rng-seed", type=int, default=0)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    return RunConfig(ledger_path=args.ledger, seeds_path=args.seeds, out_dir=args.out, steps=args.steps,
                     degree_scope=args.scope,
                     lambda_pcts=tuple(args.lambda_pcts) if args.lambda_pcts else DEFAULT_LAMBDA_PCTS,
                     threads=args.threads, max_seeds=args.max_seeds, export_graph=args.export_graph)


def run(command: str, config: RunConfig) -> int:
    """
    Runs one subcommand. Returns 0 on success and 2 when an input cannot be read or is invalid, with the
    diagnostic on stderr.
    """
    if command not in COMMANDS:
        raise ValueError("Subcommand " + repr(command) + " is not implemented.")
    handler, _ = COMMANDS[command]
    try:
        handler(Run(config))
    except (ValueError, OSError) as e:
        print("strainscope: error: " + str(e), file=sys.stderr)
        return 2
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Command line entry point. Returns 0 on success and 2 on invalid input, with the diagnostic on stderr.
    """
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT)
    logging.getLogger().setLevel(level)
    if args.command != "synth":
        try:
            config = config_from_args(args)
        except (TypeError, ValueError) as e:
            print("strainscope: error: " + str(e), file=sys.stderr)
            return 2
        return run(args.command, config)
    try:
        _run_synth(args)
    except (ValueError, OSError) as e:
        print("strainscope: error: " + str(e), file=sys.stderr)
        return 2
    return 0
