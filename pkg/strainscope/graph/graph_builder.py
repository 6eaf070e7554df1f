import logging
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Set, Tuple, Union

import numpy as np
import pandas as pd
from numpy import ndarray

from strainscope.ledger.check_tools import check_tools_verify_number
from strainscope.ledger.ledger_store import LedgerIndex
from .tools_graph import gather_rows, row_owner

logger = logging.getLogger(__name__)

ADDR_TO_TX = "addr->tx"
TX_TO_ADDR = "tx->addr"


class AddressTxGraph(object):
    """
    Directed bipartite address-transaction graph extracted from a ledger index.

    Address and transaction nodes are kept as sorted arrays of ledger ids. Every transaction of the graph brings
    all of its input and output addresses with it, so the edge set is the set of input/output slots of the graph
    transactions (repeated slots of one address in one transaction collapse into one edge).

    Parameters
    ----------
    ledger : LedgerIndex
        Index the graph was built from.

    address_ids : array-like of int
        Sorted ledger ids of the address nodes.

    address_hop : array-like of int
        Step at which each address entered the graph (0 for seeds).

    tx_ids : array-like of int
        Sorted ledger ids of the transaction nodes.

    tx_hop : array-like of int
        Step k in [1, n] at which each transaction entered the graph.

    seed_addresses : tuple of str
        Seeds the graph was grown from.

    missing_seeds : tuple of str
        Seeds absent from the ledger; they are isolated address nodes.

    steps : int
        Number of steps n.
    """

    def __init__(self, ledger: LedgerIndex, address_ids: ndarray, address_hop: ndarray, tx_ids: ndarray,
                 tx_hop: ndarray, seed_addresses: Tuple[str, ...], missing_seeds: Tuple[str, ...], steps: int):
        self.ledger = ledger
        self.address_ids = address_ids
        self.address_hop = address_hop
        self.tx_ids = tx_ids
        self.tx_hop = tx_hop
        self.seed_addresses = tuple(seed_addresses)
        self.missing_seeds = tuple(missing_seeds)
        self.steps = steps

    @property
    def num_addresses(self) -> int:
        return int(self.address_ids.size) + len(self.missing_seeds)

    @property
    def num_transactions(self) -> int:
        return int(self.tx_ids.size)

    @property
    def num_edges(self) -> int:
        ledger = self.ledger
        return int(sum(self._slot_edges(ptr, idx, idx)[0].size
                       for ptr, idx in ((ledger.in_ptr, ledger.in_addr), (ledger.out_ptr, ledger.out_addr))))

    @property
    def address_nodes(self) -> Set[str]:
        names = self.ledger.addresses_
        return {names[i] for i in self.address_ids} | set(self.missing_seeds)

    @property
    def tx_nodes(self) -> Set[str]:
        return {self.ledger.txids[i] for i in self.tx_ids}

    @property
    def hop_of_tx(self) -> Dict[str, int]:
        return {self.ledger.txids[i]: int(h) for i, h in zip(self.tx_ids, self.tx_hop)}

    @property
    def edges(self) -> Set[Tuple[str, str, str]]:
        """
        Edges as (source, target, kind) triples, kind being "addr->tx" or "tx->addr".
        """
        table = self.edge_table()
        return set(zip(table["src_id"], table["dst_id"], table["kind"]))

    def contains_address(self, addr: str) -> bool:
        if addr in self.missing_seeds:
            return True
        pos = self.ledger.addr_pos.get(addr)
        if pos is None:
            return False
        i = np.searchsorted(self.address_ids, pos)
        return bool(i < self.address_ids.size and self.address_ids[i] == pos)

    def tx_mask(self) -> ndarray:
        """
        Boolean mask over ledger transactions, set for the transaction nodes of the graph.
        """
        mask = np.zeros(len(self.ledger), dtype=bool)
        mask[self.tx_ids] = True
        return mask

    def _slot_edges(self, ptr: ndarray, slot_addr: ndarray, slot_value: ndarray) -> Tuple[ndarray, ndarray, ndarray]:
        n_addr = max(self.ledger.num_addresses, 1)
        owner = self.tx_ids[row_owner(ptr, self.tx_ids)]
        addrs = gather_rows(ptr, slot_addr, self.tx_ids)
        values = gather_rows(ptr, slot_value, self.tx_ids)
        keys, inverse = np.unique(owner * n_addr + addrs, return_inverse=True)
        amount = np.zeros(keys.size, dtype=np.int64)
        np.add.at(amount, inverse, values)
        return keys // n_addr, keys % n_addr, amount

    def edge_table(self) -> pd.DataFrame:
        """
        Edge list with columns src_id, dst_id, kind, amount, block, time, sorted by (src_id, dst_id, kind).
        Amounts of repeated slots are summed.
        """
        ledger = self.ledger
        names = np.array(ledger.addresses_, dtype=object)
        txids = np.array(ledger.txids, dtype=object)
        in_tx, in_addr, in_amount = self._slot_edges(ledger.in_ptr, ledger.in_addr, ledger.in_value)
        out_tx, out_addr, out_amount = self._slot_edges(ledger.out_ptr, ledger.out_addr, ledger.out_value)
        table = pd.DataFrame({
            "src_id": np.concatenate([names[in_addr], txids[out_tx]]),
            "dst_id": np.concatenate([txids[in_tx], names[out_addr]]),
            "kind": [ADDR_TO_TX] * in_tx.size + [TX_TO_ADDR] * out_tx.size,
            "amount": np.concatenate([in_amount, out_amount]),
            "block": ledger.block[np.concatenate([in_tx, out_tx])],
            "time": ledger.time[np.concatenate([in_tx, out_tx])],
        })
        return table.sort_values(["src_id", "dst_id", "kind"], kind="mergesort").reset_index(drop=True)

    def node_table(self) -> pd.DataFrame:
        """
        Node list with columns id, kind ("address" or "tx"), is_seed, hop, sorted by (kind, id).
        """
        seeds = set(self.seed_addresses)
        names = [self.ledger.addresses_[i] for i in self.address_ids] + list(self.missing_seeds)
        addr = pd.DataFrame({"id": names, "kind": "address", "is_seed": [n in seeds for n in names],
                             "hop": np.concatenate([self.address_hop, np.zeros(len(self.missing_seeds),
                                                                               dtype=np.int64)])})
        tx = pd.DataFrame({"id": [self.ledger.txids[i] for i in self.tx_ids], "kind": "tx", "is_seed": False,
                           "hop": self.tx_hop})
        table = pd.concat([addr, tx], ignore_index=True)
        return table.sort_values(["kind", "id"], kind="mergesort").reset_index(drop=True)


def _unique_seeds(seeds: Iterable[str]) -> List[str]:
    out = []
    for s in seeds:
        if s not in out:
            out.append(s)
    return out


def build_n_step(index: LedgerIndex, seeds: Iterable[str], n: int) -> AddressTxGraph:
    """
    Builds the n-step address-transaction graph of a set of seeds.

    At step k every transaction paying or spending from a frontier address that is not yet in the graph enters
    with hop k, together with all of its input and output addresses; the addresses new at step k form the next
    frontier. Addresses already visited never re-expand, so every path from a seed crosses at most n transactions.

    Parameters
    ----------
    index : LedgerIndex
        Ledger index.

    seeds : iterable of str
        Seed addresses. Seeds absent from the ledger stay in the graph as isolated nodes.

    n : int
        Number of steps, n >= 1.

    Returns
    -------
    graph : AddressTxGraph
        The n-step graph.
    """
    check_tools_verify_number(n, int, "positive", "The number of steps")
    seeds = _unique_seeds(seeds)
    known = [index.addr_pos[s] for s in seeds if s in index.addr_pos]
    missing = tuple(s for s in seeds if s not in index.addr_pos)
    if missing:
        logger.warning("Seeds absent from the ledger are kept as isolated nodes: %s", ", ".join(missing))
    addr_hop = np.full(index.num_addresses, -1, dtype=np.int64)
    tx_hop = np.zeros(len(index), dtype=np.int64)
    frontier = np.unique(np.array(known, dtype=np.int64))
    addr_hop[frontier] = 0
    for k in range(1, n + 1):
        if frontier.size == 0:
            break
        candidates = np.unique(np.concatenate([gather_rows(index.fund_ptr, index.fund_tx, frontier),
                                               gather_rows(index.spend_ptr, index.spend_tx, frontier)]))
        new_tx = candidates[tx_hop[candidates] == 0]
        tx_hop[new_tx] = k
        touched = np.unique(np.concatenate([gather_rows(index.in_ptr, index.in_addr, new_tx),
                                            gather_rows(index.out_ptr, index.out_addr, new_tx)]))
        frontier = touched[addr_hop[touched] < 0]
        addr_hop[frontier] = k
        logger.debug("Step %d: %d transactions and %d addresses added.", k, new_tx.size, frontier.size)
    address_ids = np.flatnonzero(addr_hop >= 0)
    tx_ids = np.flatnonzero(tx_hop)
    return AddressTxGraph(index, address_ids, addr_hop[address_ids], tx_ids, tx_hop[tx_ids], tuple(seeds),
                          missing, n)


def _min_hop_union(ids: List[ndarray], hops: List[ndarray]) -> Tuple[ndarray, ndarray]:
    all_ids = np.concatenate(ids)
    all_hops = np.concatenate(hops)
    order = np.lexsort((all_hops, all_ids))
    all_ids, all_hops = all_ids[order], all_hops[order]
    first = np.ones(all_ids.size, dtype=bool)
    first[1:] = all_ids[1:] != all_ids[:-1]
    return all_ids[first], all_hops[first]


def merge_family(graphs: List[AddressTxGraph]) -> AddressTxGraph:
    """
    Merges per-seed graphs of one family into a single graph: node and edge union, seed union, and for every
    node the minimum hop across the inputs.

    Raises
    ------
    ValueError
        If the list is empty or the graphs come from different ledgers or step counts.
    """
    if not graphs:
        raise ValueError("At least one graph is required.")
    first = graphs[0]
    if len(graphs) == 1:
        return first
    if any(g.ledger is not first.ledger for g in graphs):
        raise ValueError("Graphs should be built over the same ledger index.")
    if any(g.steps != first.steps for g in graphs):
        raise ValueError("Graphs should be built with the same number of steps.")
    address_ids, address_hop = _min_hop_union([g.address_ids for g in graphs], [g.address_hop for g in graphs])
    tx_ids, tx_hop = _min_hop_union([g.tx_ids for g in graphs], [g.tx_hop for g in graphs])
    seeds = _unique_seeds(s for g in graphs for s in g.seed_addresses)
    missing = tuple(_unique_seeds(s for g in graphs for s in g.missing_seeds))
    return AddressTxGraph(first.ledger, address_ids, address_hop, tx_ids, tx_hop, tuple(seeds), missing,
                          first.steps)


def seed_transaction(index: LedgerIndex, seed_address: str) -> Optional[str]:
    """
    Returns the transaction in which the seed appears for the first time: the lowest block height among the
    transactions paying or spending from it, ties broken by the lexicographically smaller txid. None if the seed
    never appears in the ledger.
    """
    pos = index.addr_pos.get(seed_address)
    if pos is None:
        return None
    candidates = np.concatenate([index.fund_tx[index.fund_ptr[pos]:index.fund_ptr[pos + 1]],
                                 index.spend_tx[index.spend_ptr[pos]:index.spend_ptr[pos + 1]]])
    if candidates.size == 0:
        return None
    best = min(candidates.tolist(), key=lambda t: (int(index.block[t]), index.txids[t]))
    return index.txids[best]


def export_graph(graph: AddressTxGraph, out_dir: Union[str, Path]) -> Tuple[Path, Path]:
    """
    Writes nodes.csv (id, kind, is_seed, hop) and edges.csv (src_id, dst_id, kind, amount, block, time) of a graph.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    nodes, edges = out_dir / "nodes.csv", out_dir / "edges.csv"
    graph.node_table().to_csv(nodes, index=False)
    graph.edge_table().to_csv(edges, index=False)
    return nodes, edges
