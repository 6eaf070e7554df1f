import bisect
import logging
from dataclasses import dataclass, field
from enum import IntEnum
from typing import List, Mapping, Optional, Tuple

import numpy as np
import pandas as pd
from numpy import ndarray

from strainscope.ledger.check_tools import check_tools_verify_number
from strainscope.ledger.ledger_store import LedgerIndex
from .graph_builder import AddressTxGraph, seed_transaction

logger = logging.getLogger(__name__)

# lower bounds of Moderate, Fast and ExFast; each boundary belongs to the faster class
PATTERN_THRESHOLDS = (500, 50_000, 500_000)


class StepCountError(ValueError):
    pass


class SpreadingPattern(IntEnum):
    SLOW = 0
    MODERATE = 1
    FAST = 2
    EX_FAST = 3

    @property
    def label(self) -> str:
        return ("slow", "moderate", "fast", "exFast")[self.value]


@dataclass
class TemporalProfile:
    """
    Block-height profile of the transactions of a family graph relative to its earliest seed transaction.

    Attributes
    ----------
    tx_heights : array-like
        Sorted block heights of all transaction nodes.

    seed_tx_heights : list of int
        Height of the seed transaction of each seed that has one, in seed order.

    seed_txids : list of str
        The matching seed transactions.

    pre_count, at_count, post_count : int or None
        Transactions strictly below, equal to and strictly above the anchor height; None when not anchored.

    span : tuple of int or None
        (min height, max height) of the transaction nodes.

    anchored : bool
        False when no seed has a seed transaction, in which case the pre/post split is undefined.
    """
    family: str
    tx_heights: ndarray
    seed_tx_heights: List[int] = field(default_factory=list)
    seed_txids: List[str] = field(default_factory=list)
    pre_count: Optional[int] = None
    at_count: Optional[int] = None
    post_count: Optional[int] = None
    span: Optional[Tuple[int, int]] = None
    anchored: bool = False

    @property
    def anchor_height(self) -> Optional[int]:
        return min(self.seed_tx_heights) if self.seed_tx_heights else None

    @property
    def block_span(self) -> int:
        return 0 if self.span is None else self.span[1] - self.span[0]

    @property
    def post_share(self) -> Optional[float]:
        if not self.anchored or self.tx_heights.size == 0:
            return None
        return self.post_count / self.tx_heights.size


def spreading_pattern(num_addresses: int) -> SpreadingPattern:
    """
    Maps a distinct-address count to its spreading pattern over the half-open intervals
    [0, 500), [500, 50,000), [50,000, 500,000), [500,000, inf).
    """
    check_tools_verify_number(num_addresses, int, "non-negative", "The number of addresses")
    return SpreadingPattern(bisect.bisect_right(PATTERN_THRESHOLDS, num_addresses))


def classify_spreading(graph: AddressTxGraph) -> SpreadingPattern:
    """
    Classifies a 2-step family graph by its number of distinct address nodes, seeds included.

    Raises
    ------
    StepCountError
        If the graph was not built with n=2.
    """
    if graph.steps != 2:
        raise StepCountError("Spreading patterns are defined for 2-step graphs, got n=" + str(graph.steps) + ".")
    return spreading_pattern(graph.num_addresses)


def temporal_profile(graph: AddressTxGraph, index: LedgerIndex, seeds: List[str],
                     family: str = "") -> TemporalProfile:
    """
    Computes the block-height profile of a family graph against the earliest seed transaction of its seeds.

    Parameters
    ----------
    graph : AddressTxGraph
        Family graph.

    index : LedgerIndex
        Ledger index the graph was built from.

    seeds : list of str
        Seed addresses of the family.

    family : str
        Family name.

    Returns
    -------
    profile : TemporalProfile
        Profile; anchored is False if none of the seeds has a seed transaction.
    """
    heights = np.sort(index.block[graph.tx_ids])
    profile = TemporalProfile(family=family, tx_heights=heights)
    if heights.size:
        profile.span = (int(heights[0]), int(heights[-1]))
    for s in seeds:
        txid = seed_transaction(index, s)
        if txid is not None:
            profile.seed_txids.append(txid)
            profile.seed_tx_heights.append(index.block_height(txid))
    if not profile.seed_tx_heights:
        logger.warning("Family %s has no seed transaction, the pre/post split is undefined.", family)
        return profile
    anchor = profile.anchor_height
    profile.pre_count = int(np.searchsorted(heights, anchor, side="left"))
    profile.post_count = int(heights.size - np.searchsorted(heights, anchor, side="right"))
    profile.at_count = int(heights.size - profile.pre_count - profile.post_count)
    profile.anchored = True
    return profile


def pattern_shares(patterns: Mapping[str, SpreadingPattern]) -> pd.DataFrame:
    """
    Census of families per spreading pattern.

    Returns
    -------
    shares : DataFrame
        One row per pattern (slow to exFast) with columns pattern, num_families, share_pct, families.
    """
    total = len(patterns)
    rows = []
    for p in SpreadingPattern:
        members = sorted(f for f, v in patterns.items() if v == p)
        rows.append({"pattern": p.label, "num_families": len(members),
                     "share_pct": 100.0 * len(members) / total if total else 0.0,
                     "families": ", ".join(members)})
    return pd.DataFrame(rows, columns=["pattern", "num_families", "share_pct", "families"])
