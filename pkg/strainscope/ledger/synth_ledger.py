import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .check_tools import CampaignConflictError, check_tools_verify_number, check_address
from .ledger_store import SeedRecord, TransactionRecord
from strainscope.graph.spread import spreading_pattern

logger = logging.getLogger(__name__)

MOTIF_KINDS = ("collector", "exp", "mixed-address", "branching", "suspicious", "hub", "diversification", "none")
GENESIS_TIME = 1231006505
BLOCK_INTERVAL = 600
PADDING_CHUNK = 1000

# canonical planted parameters: (N, Np, Mp, M, Ns, Ms)
_PLANTED = {"collector": (1, 4, 1, 0, 1, 1),
            "exp": (1, 4, 1, 1, 1, 4),
            "mixed-address": (1, 4, 4, 1, 1, 3),
            "branching": (1, 4, 1, 2, 1, 2),
            "suspicious": (4, 1, 1, 1, 1, 1),
            "hub": (2, 1, 1, 2, 1, 1),
            "diversification": (1, 1, 1, 3, 1, 1),
            "none": (0, 1, 1, 1, 1, 1)}
_TARGET_A = {"collector": "Collector", "exp": "EXP", "mixed-address": "MA", "branching": "BRANCH"}
_TARGET_B = {"suspicious": "SA", "hub": "HUB", "diversification": "Diversification"}


@dataclass(frozen=True)
class MotifSpec:
    """
    A planted topology around a center address: n_preds funding transactions with pred_inputs distinct inputs
    and pred_outputs distinct outputs (the center among them), and m_succs spending transactions with
    succ_inputs distinct inputs (the center among them) and succ_outputs distinct outputs.
    Transactions get heights from block_height_schedule in order (funding first), cycling if it is short.
    """
    kind: str
    center_address: str
    n_preds: int
    pred_inputs: int
    pred_outputs: int
    m_succs: int
    succ_inputs: int
    succ_outputs: int
    block_height_schedule: Tuple[int, ...] = ()

    @classmethod
    def planted(cls, kind: str, center_address: str, block_height_schedule: Sequence[int] = ()) -> "MotifSpec":
        """
        Motif with the canonical parameters of a kind.
        """
        if kind not in _PLANTED:
            raise ValueError("Motif kind " + repr(kind) + " is not implemented.")
        return cls(kind, center_address, *_PLANTED[kind], block_height_schedule=tuple(block_height_schedule))


@dataclass(frozen=True)
class CampaignSpec:
    """
    A synthetic family: its seeds, the motifs attached to them, unrelated filler transactions and the number of
    extra addresses paid by the first seed (reach_padding), which sizes the 2-step reach exactly.
    """
    family: str
    seeds: Tuple[str, ...]
    motifs: Tuple[MotifSpec, ...] = ()
    filler_tx_count: int = 0
    rng_seed: int = 0
    reach_padding: int = 0
    year: int = 2020
    base_height: int = 1000


def planted_labels(motif: MotifSpec) -> Tuple[Optional[str], Optional[str]]:
    """
    Labels implied by the planted parameters, read directly off the degree inequalities.
    """
    n, m = motif.n_preds, motif.m_succs
    funded = n > 0 and motif.pred_inputs > 3
    if funded and m < 2 and (m == 0 or motif.succ_outputs < 3):
        a = "Collector"
    elif m > 0 and motif.succ_outputs > 3 and funded:
        a = "EXP"
    elif m < 2 and funded and motif.pred_outputs > 3:
        a = "MA"
    elif m > 0 and motif.succ_outputs < 3 and funded:
        a = "BRANCH"
    else:
        a = None
    if n == 0:
        b = None
    elif 2 * m < n:
        b = "SA"
    elif 2 * m <= 3 * n:
        b = "HUB"
    else:
        b = "Diversification"
    return a, b


def check_motif(motif: MotifSpec):
    """
    Validates a motif and checks that its parameters plant exactly the behavior its kind names.

    Raises
    ------
    ValueError
        If a parameter is out of range or the parameters plant another behavior.
    """
    if motif.kind not in MOTIF_KINDS:
        raise ValueError("Motif kind " + repr(motif.kind) + " is not implemented.")
    check_address(motif.center_address, "center address")
    for name in ("n_preds", "m_succs"):
        check_tools_verify_number(getattr(motif, name), int, "non-negative", name)
    for name in ("pred_inputs", "pred_outputs", "succ_inputs", "succ_outputs"):
        check_tools_verify_number(getattr(motif, name), int, "positive", name)
    for h in motif.block_height_schedule:
        check_tools_verify_number(h, int, "non-negative", "block height")
    if motif.n_preds == 0 and motif.m_succs == 0:
        raise ValueError("Motif " + motif.center_address + " has no transaction.")
    a, b = planted_labels(motif)
    if motif.kind in _TARGET_A:
        ok = a == _TARGET_A[motif.kind]
    elif motif.kind in _TARGET_B:
        ok = a is None and b == _TARGET_B[motif.kind]
    else:
        ok = a is None and b is None
    if not ok:
        raise ValueError("Motif " + motif.center_address + " parameters plant (" + str(a) + ", " + str(b)
                         + "), not " + motif.kind + ".")


def _slug(family: str) -> str:
    return re.sub(r"[^0-9A-Za-z]", "", family) or "family"


class _CampaignWriter(object):

    def __init__(self, spec: CampaignSpec, owners: Dict[str, str], txids: set):
        self.spec = spec
        self.slug = _slug(spec.family)
        self.owners = owners
        self.txids = txids
        self.records: List[TransactionRecord] = []
        self.family_addresses = set()
        self.family_heights: List[int] = []
        self.seed_heights: Dict[str, int] = {}
        self.rng = np.random.default_rng(spec.rng_seed)
        self.tx_counter = 0

    def claim(self, addr: str, family_member: bool = True) -> str:
        if addr in self.owners:
            raise CampaignConflictError("Address " + addr + " is generated twice (families " + self.owners[addr]
                                        + " and " + self.spec.family + ").")
        self.owners[addr] = self.spec.family
        if family_member:
            self.family_addresses.add(addr)
        return addr

    def emit(self, inputs: List[str], outputs: List[str], height: int, family_member: bool = True):
        txid = self.slug + "t" + str(self.tx_counter).zfill(7)
        self.tx_counter += 1
        if txid in self.txids:
            raise CampaignConflictError("Transaction id " + txid + " is generated by two campaigns.")
        self.txids.add(txid)
        values = self.rng.integers(1, 10 ** 8, size=len(inputs) + len(outputs))
        record = TransactionRecord(txid, int(height), GENESIS_TIME + BLOCK_INTERVAL * int(height),
                                   tuple((a, int(v)) for a, v in zip(inputs, values[:len(inputs)])),
                                   tuple((a, int(v)) for a, v in zip(outputs, values[len(inputs):])))
        self.records.append(record)
        if family_member:
            self.family_heights.append(int(height))
            for addr in set(inputs) | set(outputs):
                if addr in self.seed_heights:
                    self.seed_heights[addr] = min(self.seed_heights[addr], int(height))

    def plant(self, j: int, motif: MotifSpec, seed: str) -> Tuple[Optional[str], Optional[str]]:
        check_motif(motif)
        center = motif.center_address
        if center in self.spec.seeds:
            raise ValueError("Motif center " + center + " is also a seed.")
        self.claim(center)
        fresh = iter(range(10 ** 9))

        def new_addr() -> str:
            return self.claim(self.slug + "m" + str(j) + "a" + str(next(fresh)))

        schedule = motif.block_height_schedule or (self.spec.base_height,)
        k = 0
        for i in range(motif.n_preds):
            first = [seed] if i == 0 else []
            inputs = first + [new_addr() for _ in range(motif.pred_inputs - len(first))]
            outputs = [center] + [new_addr() for _ in range(motif.pred_outputs - 1)]
            self.emit(inputs, outputs, schedule[k % len(schedule)])
            k += 1
        for i in range(motif.m_succs):
            inputs = [center] + [new_addr() for _ in range(motif.succ_inputs - 1)]
            first = [seed] if i == 0 and motif.n_preds == 0 else []
            outputs = first + [new_addr() for _ in range(motif.succ_outputs - len(first))]
            self.emit(inputs, outputs, schedule[k % len(schedule)])
            k += 1
        return planted_labels(motif)

    def pad(self):
        seed = self.spec.seeds[0]
        for start in range(0, self.spec.reach_padding, PADDING_CHUNK):
            stop = min(start + PADDING_CHUNK, self.spec.reach_padding)
            outputs = [self.claim(self.slug + "p" + str(i)) for i in range(start, stop)]
            self.emit([seed], outputs, self.spec.base_height)

    def fill(self):
        count = self.spec.filler_tx_count
        if count == 0:
            return
        pool = max(4, count // 2 + 2)
        n_in = self.rng.integers(0, 4, size=count)
        n_out = self.rng.integers(1, 4, size=count)
        picks = self.rng.integers(0, pool, size=int(n_in.sum() + n_out.sum()))
        heights = np.clip(self.rng.integers(self.spec.base_height - 500, self.spec.base_height + 500, size=count),
                          0, None)
        names = [self.slug + "f" + str(i) for i in range(pool)]
        for name in names:
            self.claim(name, family_member=False)
        pos = 0
        for i in range(count):
            inputs = [names[p] for p in picks[pos:pos + n_in[i]]]
            pos += n_in[i]
            outputs = [names[p] for p in picks[pos:pos + n_out[i]]]
            pos += n_out[i]
            self.emit(inputs, outputs, heights[i], family_member=False)


def _check_campaign(spec: CampaignSpec):
    if not spec.family or re.search(r"[,\n\r]", spec.family):
        raise ValueError("Family name " + repr(spec.family) + " should be non-empty without commas or newlines.")
    for s in spec.seeds:
        check_address(s, "seed")
        if not s.isalnum():
            raise ValueError("Seed " + repr(s) + " should be alphanumeric.")
    if len(set(spec.seeds)) != len(spec.seeds):
        raise ValueError("Seeds of family " + spec.family + " are repeated.")
    if (spec.motifs or spec.reach_padding) and not spec.seeds:
        raise ValueError("Family " + spec.family + " needs at least one seed to attach motifs.")
    check_tools_verify_number(spec.filler_tx_count, int, "non-negative", "filler_tx_count")
    check_tools_verify_number(spec.reach_padding, int, "non-negative", "reach_padding")
    check_tools_verify_number(spec.base_height, int, "non-negative", "base_height")


def generate_records(campaigns: Sequence[CampaignSpec]) -> Tuple[List[TransactionRecord], List[SeedRecord], dict]:
    """
    Generates the ledger, the seed list and the ground-truth manifest of a list of campaigns.

    Returns
    -------
    records : list of TransactionRecord
        Ledger transactions, campaign by campaign.

    seeds : list of SeedRecord
        Seeds of every campaign.

    manifest : dict
        {"addresses": {center: {"a_label", "b_label"}}, "families": {family: {"expected_pattern",
        "expected_distinct_addresses", "expected_tx_count", "expected_pre_count", "expected_at_count",
        "expected_post_count"}}}.

    Raises
    ------
    CampaignConflictError
        If two campaigns generate the same txid or address.
    """
    owners: Dict[str, str] = {}
    txids: set = set()
    records, seeds = [], []
    manifest = {"addresses": {}, "families": {}}
    for spec in campaigns:
        _check_campaign(spec)
        if spec.family in manifest["families"]:
            raise CampaignConflictError("Family " + spec.family + " is generated twice.")
        writer = _CampaignWriter(spec, owners, txids)
        for s in spec.seeds:
            writer.claim(s)
            writer.seed_heights[s] = np.iinfo(np.int64).max
            seeds.append(SeedRecord(spec.family, s, spec.year))
        for j, motif in enumerate(spec.motifs):
            a, b = writer.plant(j, motif, spec.seeds[j % len(spec.seeds)])
            manifest["addresses"][motif.center_address] = {"a_label": a, "b_label": b}
        writer.pad()
        writer.fill()
        heights = np.array(writer.family_heights, dtype=np.int64)
        anchored = [h for h in writer.seed_heights.values() if h != np.iinfo(np.int64).max]
        entry = {"expected_pattern": spreading_pattern(len(writer.family_addresses)).label,
                 "expected_distinct_addresses": len(writer.family_addresses),
                 "expected_tx_count": int(heights.size),
                 "expected_pre_count": None, "expected_at_count": None, "expected_post_count": None}
        if anchored:
            anchor = min(anchored)
            entry.update({"expected_pre_count": int((heights < anchor).sum()),
                          "expected_at_count": int((heights == anchor).sum()),
                          "expected_post_count": int((heights > anchor).sum())})
        manifest["families"][spec.family] = entry
        records.extend(writer.records)
        logger.debug("Campaign %s: %d transactions.", spec.family, len(writer.records))
    return records, seeds, manifest


def generate(campaigns: Sequence[CampaignSpec]) -> Tuple[str, str, dict]:
    """
    Generates a synthetic fixture. The output is a pure function of the campaigns, byte for byte.

    Returns
    -------
    transactions : str
        transactions.jsonl content.

    seeds : str
        seeds.csv content.

    manifest : dict
        Ground-truth manifest, see generate_records.
    """
    records, seeds, manifest = generate_records(campaigns)
    transactions = "".join(json.dumps(r.to_json(), separators=(",", ":")) + "\n" for r in records)
    seeds_csv = "family,address,year\n" + "".join(s.family + "," + s.address + "," + str(s.year) + "\n"
                                                  for s in seeds)
    logger.info("Synthetic ledger is generated: %d transactions, %d families.", len(records), len(campaigns))
    return transactions, seeds_csv, manifest


def write_fixture(out_dir: Union[str, Path], campaigns: Sequence[CampaignSpec]) -> Dict[str, Path]:
    """
    Writes transactions.jsonl, seeds.csv and ground_truth.json to out_dir.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    transactions, seeds_csv, manifest = generate(campaigns)
    paths = {"ledger": out_dir / "transactions.jsonl", "seeds": out_dir / "seeds.csv",
             "ground_truth": out_dir / "ground_truth.json"}
    paths["ledger"].write_text(transactions, encoding="utf-8")
    paths["seeds"].write_text(seeds_csv, encoding="utf-8")
    paths["ground_truth"].write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return paths


def standard_campaign(family: str, num_seeds: int = 2, motifs_per_kind: int = 1, filler_tx_count: int = 0,
                      rng_seed: int = 0, reach_padding: int = 0, year: int = 2020,
                      base_height: int = 1000) -> CampaignSpec:
    """
    Campaign with motifs_per_kind canonical motifs of every kind, centers heights spread around base_height.
    """
    check_tools_verify_number(num_seeds, int, "positive", "num_seeds")
    check_tools_verify_number(motifs_per_kind, int, "non-negative", "motifs_per_kind")
    slug = _slug(family)
    seeds = tuple(slug + "s" + str(i) for i in range(num_seeds))
    motifs = []
    for r in range(motifs_per_kind):
        for kind in MOTIF_KINDS:
            j = len(motifs)
            schedule = (base_height + j % 7, base_height + 10 + j % 5)
            motifs.append(MotifSpec.planted(kind, slug + "c" + str(j), schedule))
    return CampaignSpec(family, seeds, tuple(motifs), filler_tx_count, rng_seed, reach_padding, year, base_height)


def random_ledger(num_txs: int, num_addresses: int, rng_seed: int = 0, max_inputs: int = 3, max_outputs: int = 3,
                  coinbase_share: float = 0.1) -> List[TransactionRecord]:
    """
    Unstructured random ledger over addresses a0..a{num_addresses-1}; a share of the transactions are coinbase.
    Addresses may repeat inside one transaction.
    """
    check_tools_verify_number(num_txs, int, "non-negative", "num_txs")
    check_tools_verify_number(num_addresses, int, "positive", "num_addresses")
    rng = np.random.default_rng(rng_seed)
    n_in = rng.integers(1, max_inputs + 1, size=num_txs)
    n_in[rng.random(num_txs) < coinbase_share] = 0
    n_out = rng.integers(1, max_outputs + 1, size=num_txs)
    picks = rng.integers(0, num_addresses, size=int(n_in.sum() + n_out.sum()))
    values = rng.integers(0, 10 ** 8, size=picks.size)
    heights = rng.integers(0, 10 * max(num_txs, 1), size=num_txs)
    records = []
    pos = 0
    for i in range(num_txs):
        slots = [("a" + str(p), int(v)) for p, v in zip(picks[pos:pos + n_in[i] + n_out[i]],
                                                       values[pos:pos + n_in[i] + n_out[i]])]
        pos += n_in[i] + n_out[i]
        records.append(TransactionRecord("t" + str(i), int(heights[i]), GENESIS_TIME + int(heights[i]),
                                         tuple(slots[:n_in[i]]), tuple(slots[n_in[i]:])))
    return records
