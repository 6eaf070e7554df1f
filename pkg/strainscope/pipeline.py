import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime
from typing import List, Mapping, Optional, Sequence

import pandas as pd

from strainscope.graph.behaviors import behavior_frame, assignments_from_frame
from strainscope.graph.graph_builder import AddressTxGraph, build_n_step, merge_family
from strainscope.graph.spread import SpreadingPattern, TemporalProfile, classify_spreading, temporal_profile
from strainscope.ledger.ledger_store import LedgerIndex
from strainscope.similarity.family_similarity import FamilySimilarity
from strainscope.similarity.tools_similarity import FamilyProfile, profile

logger = logging.getLogger(__name__)

STAGES = ("graph", "spread", "behaviors", "profile")


@dataclass
class FamilyResult:
    """
    Outcome of the per-family stages. Stages that failed or were not requested are None; failures are listed in
    errors.
    """
    family: str
    seeds: List[str]
    graph: Optional[AddressTxGraph] = None
    pattern: Optional[SpreadingPattern] = None
    temporal: Optional[TemporalProfile] = None
    behaviors: Optional[pd.DataFrame] = None
    profile: Optional[FamilyProfile] = None
    errors: List[str] = field(default_factory=list)


def analyze_family(index: LedgerIndex, family: str, seeds: Sequence[str], steps: int = 2, scope: str = "ledger",
                   stages: Sequence[str] = STAGES) -> FamilyResult:
    """
    Builds the merged family graph from one graph per seed, then runs the requested stages on it.
    Value errors of a stage are recorded in the result instead of being raised.
    """
    t0 = datetime.now()
    result = FamilyResult(family, list(seeds))
    result.graph = merge_family([build_n_step(index, [s], steps) for s in seeds]) if seeds else \
        build_n_step(index, [], steps)
    if "spread" in stages:
        if steps == 2:
            result.pattern = classify_spreading(result.graph)
        result.temporal = temporal_profile(result.graph, index, list(seeds), family)
    if "behaviors" in stages or "profile" in stages:
        result.behaviors = behavior_frame(result.graph, scope)
    if "profile" in stages:
        try:
            result.profile = profile(family, assignments_from_frame(result.behaviors), result.graph)
        except ValueError as e:
            logger.warning("Profile of family %s is skipped: %s", family, e)
            result.errors.append(str(e))
    logger.info("Family %s is analysed: %d addresses, %d transactions. Time: %s", family,
                result.graph.num_addresses, result.graph.num_transactions, datetime.now() - t0)
    return result


def run_families(index: LedgerIndex, groups: Mapping[str, Sequence[str]], steps: int = 2, scope: str = "ledger",
                 stages: Sequence[str] = STAGES, threads: int = 1) -> List[FamilyResult]:
    """
    Analyses every family, concurrently when threads > 1. Results follow the order of groups whatever the
    scheduling.
    """
    families = list(groups)

    def task(family: str) -> FamilyResult:
        return analyze_family(index, family, groups[family], steps, scope, stages)

    if threads <= 1:
        return [task(f) for f in families]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(task, families))


def compare_families(results: Sequence[FamilyResult], lambda_pcts: Sequence[float]) -> Optional[FamilySimilarity]:
    """
    Fits FamilySimilarity on the families that have a profile; None when fewer than 2 have one.
    """
    profiles = [r.profile for r in results if r.profile is not None]
    if len(profiles) < 2:
        logger.warning("Family comparison needs at least 2 profiles, got %d.", len(profiles))
        return None
    return FamilySimilarity(lambda_pcts).fit(profiles)
