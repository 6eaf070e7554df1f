from typing import Any, Optional

import numpy as np

from strainscope import utils

INT64_MAX = int(np.iinfo(np.int64).max)


class LedgerFormatError(ValueError):
    """
    Malformed transaction record.

    Attributes:
    - source (str): The file name or stream label.
    - line (int): 1-based line (or record position) of the offending record.
    """

    def __init__(self, source: str, line: int, message: str):
        self.source = source
        self.line = line
        super().__init__(str(source) + ":" + str(line) + ": " + message)


class DuplicateTransactionError(LedgerFormatError):
    """
    A txid was seen twice while building the ledger index.
    """

    def __init__(self, source: str, line: int, txid: str):
        self.txid = txid
        super().__init__(source, line, "duplicate txid " + repr(txid) + ".")


class SeedFileError(ValueError):
    """
    Invalid seeds file. The row is the 1-based file line (the header is line 1), None for file-level problems.
    """

    def __init__(self, source: str, row: Optional[int], message: str):
        self.source = source
        self.row = row
        where = str(source) if row is None else str(source) + ":" + str(row)
        super().__init__(where + ": " + message)


class CampaignConflictError(ValueError):
    pass


def check_tools_verify_number(x: Any, num_type: type, num_cl: str, name: str = "The parameter"):
    """
    Wrapper for validate_number from utils.
    Validates the type and classification of a numeric parameter.

    Raises:
    - TypeError: If the parameter is not of the specified numeric type.
    - ValueError: If the parameter does not match the specified classification.
    """
    return utils.validate_number(x, num_type, num_cl, name)


def check_address(addr: Any, what: str = "address"):
    if not isinstance(addr, str) or not addr:
        raise ValueError(what + " should be a non-empty string, got " + repr(addr) + ".")


def check_slots(slots: Any, kind: str):
    """
    Validates a list of (address, amount) pairs of a transaction.

    Raises:
    - ValueError: If a slot is not a pair, has an empty address or a negative/non-integer amount.
    """
    for pos, slot in enumerate(slots):
        if len(slot) != 2:
            raise ValueError(kind + "[" + str(pos) + "] should be an (address, amount) pair.")
        addr, amount = slot
        check_address(addr, kind + "[" + str(pos) + "] address")
        if isinstance(amount, bool) or not isinstance(amount, int) or amount < 0:
            raise ValueError(kind + "[" + str(pos) + "] amount should be a non-negative integer, got "
                             + repr(amount) + ".")
        check_int64(amount, kind + "[" + str(pos) + "] amount")


def check_int64(x: int, name: str):
    if x > INT64_MAX:
        raise ValueError(name + " " + str(x) + " exceeds the 64-bit integer range.")


def check_record(record: Any):
    """
    Validates a transaction record against the ledger invariants: non-empty txid, non-negative block height,
    integer timestamp, non-empty outputs, non-negative integer amounts. Inputs may be empty (coinbase).

    Raises:
    - TypeError or ValueError: On the first violated rule.
    """
    check_address(record.txid, "txid")
    check_tools_verify_number(record.block_height, int, "non-negative", "block height")
    check_tools_verify_number(record.timestamp, int, "non-negative", "timestamp")
    check_int64(record.block_height, "block height")
    check_int64(record.timestamp, "timestamp")
    if len(record.outputs) == 0:
        raise ValueError("transaction " + repr(record.txid) + " has no outputs.")
    check_slots(record.inputs, "inputs")
    check_slots(record.outputs, "outputs")
