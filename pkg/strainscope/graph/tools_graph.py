import numpy as np
from numpy import ndarray
from typing import Tuple


def gather_rows(ptr: ndarray, idx: ndarray, rows: ndarray) -> ndarray:
    """
    Concatenates the CSR rows of the given row ids.

    Parameters
    ----------
    ptr : array-like of shape (n_rows + 1,)
        Row pointers.

    idx : array-like
        Column values.

    rows : array-like of int
        Rows to gather, in output order.

    Returns
    -------
    values : array-like
        idx[ptr[r]:ptr[r + 1]] for every r in rows, concatenated.
    """
    rows = np.asarray(rows, dtype=np.int64)
    starts = ptr[rows]
    lengths = ptr[rows + 1] - starts
    total = int(lengths.sum())
    if total == 0:
        return np.empty(0, dtype=idx.dtype)
    offsets = np.repeat(starts - np.cumsum(lengths) + lengths, lengths)
    return idx[offsets + np.arange(total, dtype=np.int64)]


def row_owner(ptr: ndarray, rows: ndarray) -> ndarray:
    """
    Position in rows of every element returned by gather_rows(ptr, idx, rows).
    """
    rows = np.asarray(rows, dtype=np.int64)
    return np.repeat(np.arange(rows.size, dtype=np.int64), ptr[rows + 1] - ptr[rows])


def row_flag_counts(ptr: ndarray, idx: ndarray, rows: ndarray, flags: Tuple[ndarray, ...],
                    mask: ndarray = None) -> Tuple[ndarray, ...]:
    """
    Per row, counts its members and its members carrying each flag.

    Parameters
    ----------
    mask : array-like of bool or None
        If given, only members with mask[member] set are counted.

    Returns
    -------
    counts : tuple of arrays of shape (len(rows),)
        Member count followed by one count per flag array.
    """
    members = gather_rows(ptr, idx, rows)
    owner = row_owner(ptr, rows)
    if mask is not None:
        keep = mask[members]
        members, owner = members[keep], owner[keep]
    n = np.asarray(rows).size
    out = [np.bincount(owner, minlength=n)]
    for flag in flags:
        out.append(np.bincount(owner[flag[members]], minlength=n))
    return tuple(out)
