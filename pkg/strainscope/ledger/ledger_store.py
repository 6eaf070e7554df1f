import json
import logging
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Set, Tuple, Union

import numpy as np
import pandas as pd
from numpy import ndarray

from .check_tools import LedgerFormatError, DuplicateTransactionError, SeedFileError, check_record, check_address

logger = logging.getLogger(__name__)

Slot = Tuple[str, int]


@dataclass(frozen=True)
class TransactionRecord:
    """
    One ledger transaction. Amounts are integer base-units; inputs are empty for coinbase transactions.
    """
    txid: str
    block_height: int
    timestamp: int
    inputs: Tuple[Slot, ...]
    outputs: Tuple[Slot, ...]

    @classmethod
    def from_json(cls, obj: dict) -> "TransactionRecord":
        """
        Builds a record from a transactions.jsonl object
        ({"txid", "block", "time", "inputs": [{"addr", "value"}], "outputs": [...]}).
        """
        if not isinstance(obj, dict):
            raise ValueError("record should be a JSON object.")
        missing = [k for k in ("txid", "block", "time", "inputs", "outputs") if k not in obj]
        if missing:
            raise ValueError("missing field(s) " + ", ".join(missing) + ".")
        try:
            inputs = tuple((s["addr"], s["value"]) for s in obj["inputs"])
            outputs = tuple((s["addr"], s["value"]) for s in obj["outputs"])
        except (KeyError, TypeError):
            raise ValueError("inputs/outputs should be lists of {\"addr\", \"value\"} objects.")
        return cls(obj["txid"], obj["block"], obj["time"], inputs, outputs)

    def to_json(self) -> dict:
        return {"txid": self.txid, "block": self.block_height, "time": self.timestamp,
                "inputs": [{"addr": a, "value": v} for a, v in self.inputs],
                "outputs": [{"addr": a, "value": v} for a, v in self.outputs]}


@dataclass(frozen=True)
class SeedRecord:
    family: str
    address: str
    year: int


def _slot_csr(owner_ptr: ndarray, slot_addr: ndarray, n_rows: int, n_cols: int) -> Tuple[ndarray, ndarray]:
    """
    Inverts a tx -> address slot table into a deduplicated address -> tx adjacency in CSR form.

    Returns
    -------
    ptr : array of shape (n_cols + 1,)
        Row pointers over addresses.

    idx : array
        Sorted distinct tx indices per address.
    """
    owner = np.repeat(np.arange(n_rows, dtype=np.int64), np.diff(owner_ptr))
    keys = np.unique(slot_addr.astype(np.int64) * max(n_rows, 1) + owner)
    col = keys // max(n_rows, 1)
    idx = keys % max(n_rows, 1)
    ptr = np.zeros(n_cols + 1, dtype=np.int64)
    np.cumsum(np.bincount(col, minlength=n_cols), out=ptr[1:])
    return ptr, idx


def _distinct_per_row(owner_ptr: ndarray, slot_addr: ndarray, n_rows: int, n_cols: int) -> ndarray:
    owner = np.repeat(np.arange(n_rows, dtype=np.int64), np.diff(owner_ptr))
    keys = np.unique(owner * max(n_cols, 1) + slot_addr.astype(np.int64))
    return np.bincount(keys // max(n_cols, 1), minlength=n_rows).astype(np.int64)


class LedgerIndex(object):
    """
    Immutable indexed ledger. Transactions and addresses are interned to integer ids and every adjacency is held
    in CSR arrays, so the index is safe to share between threads once built.

    Attributes
    ----------
    txids : list
        Transaction id per tx index.

    addresses_ : list
        Address string per address index.

    block : array-like
        Block height per tx index.

    time : array-like
        Timestamp per tx index.

    in_ptr, in_addr, in_value : array-like
        Ordered input slots per transaction (CSR).

    out_ptr, out_addr, out_value : array-like
        Ordered output slots per transaction (CSR).

    fund_ptr, fund_tx : array-like
        Distinct transactions paying each address (CSR), the funding sets.

    spend_ptr, spend_tx : array-like
        Distinct transactions spending from each address (CSR), the spending sets.

    tx_in_count, tx_out_count : array-like
        Distinct input/output addresses per transaction.
    """

    def __init__(self, txids: List[str], addresses: List[str], block: ndarray, time: ndarray,
                 in_ptr: ndarray, in_addr: ndarray, in_value: ndarray,
                 out_ptr: ndarray, out_addr: ndarray, out_value: ndarray):
        self.txids = txids
        self.addresses_ = addresses
        self.tx_pos = {t: i for i, t in enumerate(txids)}
        self.addr_pos = {a: i for i, a in enumerate(addresses)}
        self.block = block
        self.time = time
        self.in_ptr, self.in_addr, self.in_value = in_ptr, in_addr, in_value
        self.out_ptr, self.out_addr, self.out_value = out_ptr, out_addr, out_value
        n_tx, n_addr = len(txids), len(addresses)
        self.fund_ptr, self.fund_tx = _slot_csr(out_ptr, out_addr, n_tx, n_addr)
        self.spend_ptr, self.spend_tx = _slot_csr(in_ptr, in_addr, n_tx, n_addr)
        self.tx_in_count = _distinct_per_row(in_ptr, in_addr, n_tx, n_addr)
        self.tx_out_count = _distinct_per_row(out_ptr, out_addr, n_tx, n_addr)
        for arr in (block, time, in_ptr, in_addr, in_value, out_ptr, out_addr, out_value, self.fund_ptr,
                    self.fund_tx, self.spend_ptr, self.spend_tx, self.tx_in_count, self.tx_out_count):
            arr.setflags(write=False)

    def __len__(self) -> int:
        return len(self.txids)

    def __contains__(self, txid: str) -> bool:
        return txid in self.tx_pos

    @property
    def num_addresses(self) -> int:
        return len(self.addresses_)

    def addresses(self) -> List[str]:
        return list(self.addresses_)

    def _txs(self, ptr: ndarray, idx: ndarray, addr: str) -> Set[str]:
        pos = self.addr_pos.get(addr)
        if pos is None:
            return set()
        return {self.txids[i] for i in idx[ptr[pos]:ptr[pos + 1]]}

    def txs_paying_to(self, addr: str) -> Set[str]:
        """
        Returns the txids having addr among their outputs (empty set for unknown addresses).
        """
        return self._txs(self.fund_ptr, self.fund_tx, addr)

    def txs_spending_from(self, addr: str) -> Set[str]:
        """
        Returns the txids having addr among their inputs (empty set for unknown addresses).
        """
        return self._txs(self.spend_ptr, self.spend_tx, addr)

    def input_degree(self, addr: str) -> int:
        pos = self.addr_pos.get(addr)
        return 0 if pos is None else int(self.fund_ptr[pos + 1] - self.fund_ptr[pos])

    def output_degree(self, addr: str) -> int:
        pos = self.addr_pos.get(addr)
        return 0 if pos is None else int(self.spend_ptr[pos + 1] - self.spend_ptr[pos])

    def tx_input_count(self, txid: str) -> int:
        return int(self.tx_in_count[self.tx_pos[txid]])

    def tx_output_count(self, txid: str) -> int:
        return int(self.tx_out_count[self.tx_pos[txid]])

    def block_height(self, txid: str) -> int:
        return int(self.block[self.tx_pos[txid]])

    def transaction(self, txid: str) -> TransactionRecord:
        """
        Rebuilds the TransactionRecord stored under txid.

        Raises
        ------
        KeyError
            If txid is not in the ledger.
        """
        i = self.tx_pos[txid]
        inputs = tuple((self.addresses_[a], int(v)) for a, v in
                       zip(self.in_addr[self.in_ptr[i]:self.in_ptr[i + 1]],
                           self.in_value[self.in_ptr[i]:self.in_ptr[i + 1]]))
        outputs = tuple((self.addresses_[a], int(v)) for a, v in
                        zip(self.out_addr[self.out_ptr[i]:self.out_ptr[i + 1]],
                            self.out_value[self.out_ptr[i]:self.out_ptr[i + 1]]))
        return TransactionRecord(txid, int(self.block[i]), int(self.time[i]), inputs, outputs)


def _build_index(numbered: Iterable[Tuple[int, TransactionRecord]], source: str) -> LedgerIndex:
    txids = []
    seen = set()
    addr_pos = {}
    block, time = [], []
    in_ptr, in_addr, in_value = [0], [], []
    out_ptr, out_addr, out_value = [0], [], []
    for line, record in numbered:
        try:
            check_record(record)
        except (TypeError, ValueError) as e:
            raise LedgerFormatError(source, line, str(e))
        if record.txid in seen:
            raise DuplicateTransactionError(source, line, record.txid)
        seen.add(record.txid)
        txids.append(record.txid)
        block.append(record.block_height)
        time.append(record.timestamp)
        for addr, value in record.inputs:
            in_addr.append(addr_pos.setdefault(addr, len(addr_pos)))
            in_value.append(value)
        for addr, value in record.outputs:
            out_addr.append(addr_pos.setdefault(addr, len(addr_pos)))
            out_value.append(value)
        in_ptr.append(len(in_addr))
        out_ptr.append(len(out_addr))
    addresses = [None] * len(addr_pos)
    for addr, pos in addr_pos.items():
        addresses[pos] = addr
    index = LedgerIndex(txids, addresses, np.array(block, dtype=np.int64), np.array(time, dtype=np.int64),
                        np.array(in_ptr, dtype=np.int64), np.array(in_addr, dtype=np.int64),
                        np.array(in_value, dtype=np.int64), np.array(out_ptr, dtype=np.int64),
                        np.array(out_addr, dtype=np.int64), np.array(out_value, dtype=np.int64))
    logger.info("Ledger %s is indexed: %d transactions, %d addresses.", source, len(index), index.num_addresses)
    return index


def ingest(records: Iterable[TransactionRecord], source: str = "<stream>") -> LedgerIndex:
    """
    Builds the ledger index in one pass.

    Parameters
    ----------
    records : iterable of TransactionRecord
        Transactions in any order; the resulting query answers do not depend on it.

    source : str
        Label used in error messages.

    Returns
    -------
    index : LedgerIndex
        Immutable index.

    Raises
    ------
    LedgerFormatError
        If a record is malformed (the line is its 1-based position in the stream).

    DuplicateTransactionError
        If a txid is repeated.
    """
    return _build_index(enumerate(records, start=1), source)


def read_transactions(path: Union[str, Path]) -> Iterator[Tuple[int, TransactionRecord]]:
    """
    Reads transactions.jsonl lazily, yielding (line number, record). Blank lines are skipped.

    Raises
    ------
    LedgerFormatError
        If a line is not valid JSON or lacks the required fields.
    """
    with open(path, "rb") as f:
        for line_no, raw in enumerate(f, start=1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw.decode("utf-8"))
                yield line_no, TransactionRecord.from_json(obj)
            except UnicodeDecodeError as e:
                raise LedgerFormatError(str(path), line_no, "invalid UTF-8 at byte " + str(e.start) + ".")
            except json.JSONDecodeError as e:
                raise LedgerFormatError(str(path), line_no, "invalid JSON (" + e.msg + ").")
            except ValueError as e:
                raise LedgerFormatError(str(path), line_no, str(e))


def load_ledger(path: Union[str, Path]) -> LedgerIndex:
    """
    Parses and indexes a transactions.jsonl dump; diagnostics carry file line numbers.
    """
    return _build_index(read_transactions(path), str(path))


def load_seeds(path: Union[str, Path]) -> List[SeedRecord]:
    """
    Loads and validates a seeds.csv file with header family,address,year.

    Returns
    -------
    seeds : list of SeedRecord
        Seeds in file order.

    Raises
    ------
    SeedFileError
        If a column is missing, a row has a blank family/address or a non-integer year, or a (family, address)
        pair is repeated.
    """
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        raise SeedFileError(str(path), None, "empty file, expected header family,address,year.")
    missing = [c for c in ("family", "address", "year") if c not in df.columns]
    if missing:
        raise SeedFileError(str(path), None, "missing column(s) " + ", ".join(missing) + ".")
    seeds = []
    seen = set()
    for i, (family, address, year) in enumerate(zip(df["family"], df["address"], df["year"])):
        row = i + 2
        family, address = family.strip(), address.strip()
        if not family:
            raise SeedFileError(str(path), row, "blank family.")
        try:
            check_address(address)
        except ValueError:
            raise SeedFileError(str(path), row, "blank address.")
        try:
            year = int(year)
        except ValueError:
            raise SeedFileError(str(path), row, "year should be an integer, got " + repr(year) + ".")
        if (family, address) in seen:
            raise SeedFileError(str(path), row, "duplicate seed " + family + "," + address + ".")
        seen.add((family, address))
        seeds.append(SeedRecord(family, address, year))
    logger.info("%d seeds of %d families are loaded.", len(seeds), len({s.family for s in seeds}))
    return seeds


def group_seeds(seeds: Iterable[SeedRecord]) -> "OrderedDict[str, List[str]]":
    """
    Groups seed addresses per family. Families are sorted by name, addresses keep file order.
    """
    groups: Dict[str, List[str]] = {}
    for s in seeds:
        groups.setdefault(s.family, []).append(s.address)
    return OrderedDict((f, groups[f]) for f in sorted(groups))


def filter_low_labelled(seeds: List[SeedRecord], max_seeds: Optional[int] = 10) -> List[SeedRecord]:
    """
    Keeps the seeds of low-labelled families, i.e. families with fewer than max_seeds labelled addresses.
    max_seeds=None keeps every family.
    """
    if max_seeds is None:
        return list(seeds)
    groups = group_seeds(seeds)
    kept = [s for s in seeds if len(groups[s.family]) < max_seeds]
    dropped = len(groups) - len({s.family for s in kept})
    if dropped:
        logger.info("%d families with %d or more seeds are excluded.", dropped, max_seeds)
    return kept


def seed_census(seeds: List[SeedRecord]) -> pd.DataFrame:
    """
    Groups families by year (earliest seed year of the family) and number of seeds.

    Returns
    -------
    census : DataFrame
        Columns year, num_seeds, families (sorted, comma-separated), sorted by year and num_seeds.
    """
    columns = ["year", "num_seeds", "families"]
    if not seeds:
        return pd.DataFrame(columns=columns)
    df = pd.DataFrame([(s.family, s.year) for s in seeds], columns=["family", "year"])
    fam = df.groupby("family").agg(year=("year", "min"), num_seeds=("year", "size")).reset_index()
    census = (fam.sort_values("family")
              .groupby(["year", "num_seeds"])["family"].agg(", ".join)
              .reset_index()
              .rename(columns={"family": "families"}))
    return census[columns].sort_values(["year", "num_seeds"]).reset_index(drop=True)
