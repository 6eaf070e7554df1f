import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Mapping, Optional, Tuple

import numpy as np
import pandas as pd
from numpy import ndarray

from strainscope import utils
from strainscope.ledger.ledger_store import LedgerIndex
from .graph_builder import AddressTxGraph
from .tools_graph import gather_rows, row_flag_counts

logger = logging.getLogger(__name__)

SCOPES = {"ledger": "ledger", "full-ledger": "ledger", "graph": "graph", "in-graph": "graph"}


class Behavior(Enum):
    COLLECTOR = "Collector"
    EXP = "EXP"
    MA = "MA"
    BRANCH = "BRANCH"
    SA = "SA"
    HUB = "HUB"
    DIVERSIFICATION = "Diversification"

    @property
    def family(self) -> str:
        return "A" if self in A_BEHAVIORS else "B"


# profile component order
BEHAVIORS = tuple(Behavior)
A_BEHAVIORS = (Behavior.COLLECTOR, Behavior.EXP, Behavior.MA, Behavior.BRANCH)
B_BEHAVIORS = (Behavior.SA, Behavior.HUB, Behavior.DIVERSIFICATION)
NONE_LABEL = "None"


@dataclass(frozen=True)
class DegreeContext:
    """
    Local degree structure of an address.

    Attributes
    ----------
    preds : tuple of (int, int)
        (Np, Mp) per distinct transaction paying the address: its distinct input and output address counts.

    succs : tuple of (int, int)
        (Ns, Ms) per distinct transaction spending from the address.
    """
    preds: Tuple[Tuple[int, int], ...] = ()
    succs: Tuple[Tuple[int, int], ...] = ()

    @property
    def N(self) -> int:
        return len(self.preds)

    @property
    def M(self) -> int:
        return len(self.succs)


@dataclass(frozen=True)
class BehaviorAssignment:
    a_label: Optional[Behavior] = None
    b_label: Optional[Behavior] = None

    def __post_init__(self):
        if self.a_label is not None and self.a_label not in A_BEHAVIORS:
            raise ValueError(str(self.a_label) + " is not an A-family behavior.")
        if self.b_label is not None and self.b_label not in B_BEHAVIORS:
            raise ValueError(str(self.b_label) + " is not a B-family behavior.")

    @property
    def is_none(self) -> bool:
        return self.a_label is None and self.b_label is None

    @property
    def labels(self) -> Tuple[Behavior, ...]:
        return tuple(b for b in (self.a_label, self.b_label) if b is not None)


def check_scope(scope: str) -> str:
    utils.validate_choice(scope, SCOPES, "Degree scope")
    return SCOPES[scope]


def degree_context(address: str, scope: str, graph: AddressTxGraph,
                   index: Optional[LedgerIndex] = None) -> DegreeContext:
    """
    Collects N, M and the degrees of the neighbouring transactions of an address node.

    Parameters
    ----------
    address : str
        Address node of the graph.

    scope : {"ledger", "graph"}
        "ledger" counts every ledger transaction of the address, "graph" only the transactions of the graph.

    graph : AddressTxGraph
        Graph holding the address.

    index : LedgerIndex or None
        Ledger index, defaults to the one the graph was built from.

    Raises
    ------
    KeyError
        If the address is not a node of the graph.
    """
    scope = check_scope(scope)
    index = graph.ledger if index is None else index
    if not graph.contains_address(address):
        raise KeyError("Address " + repr(address) + " is not a node of the graph.")
    pos = index.addr_pos.get(address)
    if pos is None:
        return DegreeContext()
    rows = np.array([pos], dtype=np.int64)
    pred_tx = gather_rows(index.fund_ptr, index.fund_tx, rows)
    succ_tx = gather_rows(index.spend_ptr, index.spend_tx, rows)
    if scope == "graph":
        mask = graph.tx_mask()
        pred_tx, succ_tx = pred_tx[mask[pred_tx]], succ_tx[mask[succ_tx]]
    preds = tuple(sorted((int(index.tx_in_count[t]), int(index.tx_out_count[t])) for t in pred_tx))
    succs = tuple(sorted((int(index.tx_in_count[t]), int(index.tx_out_count[t])) for t in succ_tx))
    return DegreeContext(preds, succs)


def classify_a(ctx: DegreeContext) -> Optional[Behavior]:
    """
    Assigns the A-family behavior, checking Collector, EXP, MA and BRANCH in this order.
    Per-transaction conditions hold when at least one predecessor/successor meets them; the Ms condition of
    Collector is vacuous when the address spends nowhere.
    """
    n, m = ctx.N, ctx.M
    multi_input_pred = any(np_ > 3 for np_, _ in ctx.preds)
    if n > 0 and multi_input_pred and m < 2 and (m == 0 or ctx.succs[0][1] < 3):
        return Behavior.COLLECTOR
    if m > 0 and any(ms > 3 for _, ms in ctx.succs) and n > 0 and multi_input_pred:
        return Behavior.EXP
    if m < 2 and any(np_ > 3 and mp > 3 for np_, mp in ctx.preds):
        return Behavior.MA
    if m > 0 and any(ms < 3 for _, ms in ctx.succs) and n > 0 and multi_input_pred:
        return Behavior.BRANCH
    return None


def classify_b(ctx: DegreeContext) -> Optional[Behavior]:
    """
    Assigns the B-family behavior from r = M/N, compared exactly: r < 0.5 is SA, 0.5 <= r <= 1.5 is HUB,
    r > 1.5 is Diversification. Addresses with N = 0 get none.
    """
    n, m = ctx.N, ctx.M
    if n == 0:
        return None
    if 2 * m < n:
        return Behavior.SA
    if 2 * m <= 3 * n:
        return Behavior.HUB
    return Behavior.DIVERSIFICATION


def _label_arrays(graph: AddressTxGraph, scope: str) -> Tuple[ndarray, ndarray, ndarray, ndarray]:
    """
    Vectorised classification of the ledger-backed address nodes of a graph.

    Returns
    -------
    n, m : array-like
        Input and output degree per node of graph.address_ids.

    a_code, b_code : array-like
        Index into BEHAVIORS, -1 for no label.
    """
    index = graph.ledger
    rows = graph.address_ids
    mask = graph.tx_mask() if scope == "graph" else None
    multi_input = index.tx_in_count > 3
    mixing = multi_input & (index.tx_out_count > 3)
    multi_output = index.tx_out_count > 3
    few_output = index.tx_out_count < 3
    n, any_multi_input, any_mixing = row_flag_counts(index.fund_ptr, index.fund_tx, rows,
                                                     (multi_input, mixing), mask)
    m, any_multi_output, any_few_output = row_flag_counts(index.spend_ptr, index.spend_tx, rows,
                                                          (multi_output, few_output), mask)
    has_pred = (n > 0) & (any_multi_input > 0)
    collector = has_pred & (m < 2) & ((m == 0) | (any_few_output > 0))
    exp = (m > 0) & (any_multi_output > 0) & has_pred
    ma = (m < 2) & (any_mixing > 0)
    branch = (m > 0) & (any_few_output > 0) & has_pred
    a_code = np.select([collector, exp, ma, branch], [0, 1, 2, 3], default=-1)
    return n, m, a_code, ratio_codes(n, m)


def ratio_codes(n: ndarray, m: ndarray) -> ndarray:
    """
    B-family codes (index into BEHAVIORS) for arrays of input and output degrees, -1 where N = 0.
    """
    return np.select([n == 0, 2 * m < n, 2 * m <= 3 * n], [-1, 4, 5], default=6)


def behavior_frame(graph: AddressTxGraph, scope: str = "ledger") -> pd.DataFrame:
    """
    Labels every address node of a graph.

    Returns
    -------
    frame : DataFrame
        Columns address, a_label, b_label, N, M sorted by address; absent labels are empty strings.
    """
    scope = check_scope(scope)
    n, m, a_code, b_code = _label_arrays(graph, scope)
    names = np.array([b.value for b in BEHAVIORS] + [""], dtype=object)
    frame = pd.DataFrame({
        "address": [graph.ledger.addresses_[i] for i in graph.address_ids] + list(graph.missing_seeds),
        "a_label": np.concatenate([names[a_code], [""] * len(graph.missing_seeds)]),
        "b_label": np.concatenate([names[b_code], [""] * len(graph.missing_seeds)]),
        "N": np.concatenate([n, np.zeros(len(graph.missing_seeds), dtype=np.int64)]),
        "M": np.concatenate([m, np.zeros(len(graph.missing_seeds), dtype=np.int64)]),
    })
    return frame.sort_values("address", kind="mergesort").reset_index(drop=True)


def classify_graph(graph: AddressTxGraph, scope: str = "ledger") -> Dict[str, BehaviorAssignment]:
    """
    Assigns at most one A-family and at most one B-family behavior to every address node of the graph, seeds
    included. Transaction nodes stay unlabelled.

    Parameters
    ----------
    graph : AddressTxGraph
        Graph to label.

    scope : {"ledger", "graph"}, default="ledger"
        Where the degrees are counted.

    Returns
    -------
    assignments : dict
        Address -> BehaviorAssignment, ordered by address.
    """
    return assignments_from_frame(behavior_frame(graph, scope))


def assignments_from_frame(frame: pd.DataFrame) -> Dict[str, BehaviorAssignment]:
    """
    Converts a behavior_frame into the address -> BehaviorAssignment mapping.
    """
    by_value = {b.value: b for b in BEHAVIORS}
    cache = {}
    assignments = {}
    for addr, a, b in zip(frame["address"], frame["a_label"], frame["b_label"]):
        key = (a, b)
        if key not in cache:
            cache[key] = BehaviorAssignment(by_value.get(a), by_value.get(b))
        assignments[addr] = cache[key]
    return assignments


def behavior_counts(assignments: Mapping[str, BehaviorAssignment]) -> Dict[str, int]:
    """
    Number of addresses carrying each behavior, plus the count of unlabelled ("None") addresses.
    """
    counts = {b.value: 0 for b in BEHAVIORS}
    counts[NONE_LABEL] = 0
    for assignment in assignments.values():
        if assignment.is_none:
            counts[NONE_LABEL] += 1
        for b in assignment.labels:
            counts[b.value] += 1
    return counts
