import hashlib
import json
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from strainscope.graph.behaviors import BEHAVIORS
from strainscope.similarity.tools_similarity import ClusterReport, DistanceMatrix, PcaProjection, FamilyProfile
from strainscope.pipeline import FamilyResult

FLOAT_FORMAT = "%.6f"

PathLike = Union[str, Path]


def _write_csv(frame: pd.DataFrame, path: PathLike, index: bool = False) -> Path:
    path = Path(path)
    frame.to_csv(path, index=index, float_format=FLOAT_FORMAT)
    return path


def write_json(obj: object, path: PathLike) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def file_digest(path: PathLike) -> str:
    sha = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            sha.update(chunk)
    return sha.hexdigest()


def write_graph(results: Sequence[FamilyResult], out_dir: PathLike) -> List[Path]:
    """
    Writes nodes.csv (family, id, kind, is_seed, hop) and edges.csv (family, src_id, dst_id, kind, amount, block,
    time) for every family graph.
    """
    out_dir = Path(out_dir)
    nodes, edges = [], []
    for r in results:
        if r.graph is None:
            continue
        nodes.append(r.graph.node_table().assign(family=r.family))
        edges.append(r.graph.edge_table().assign(family=r.family))
    node_cols = ["family", "id", "kind", "is_seed", "hop"]
    edge_cols = ["family", "src_id", "dst_id", "kind", "amount", "block", "time"]
    nodes = pd.concat(nodes, ignore_index=True)[node_cols] if nodes else pd.DataFrame(columns=node_cols)
    edges = pd.concat(edges, ignore_index=True)[edge_cols] if edges else pd.DataFrame(columns=edge_cols)
    return [_write_csv(nodes, out_dir / "nodes.csv"), _write_csv(edges, out_dir / "edges.csv")]


def spread_frame(results: Sequence[FamilyResult]) -> pd.DataFrame:
    rows = []
    for r in results:
        t = r.temporal
        rows.append({"family": r.family,
                     "distinct_addresses": r.graph.num_addresses,
                     "pattern": r.pattern.label if r.pattern is not None else "",
                     "tx_count": r.graph.num_transactions,
                     "pre_count": t.pre_count if t is not None else None,
                     "at_count": t.at_count if t is not None else None,
                     "post_count": t.post_count if t is not None else None,
                     "min_height": t.span[0] if t is not None and t.span else None,
                     "max_height": t.span[1] if t is not None and t.span else None})
    columns = ["family", "distinct_addresses", "pattern", "tx_count", "pre_count", "at_count", "post_count",
               "min_height", "max_height"]
    frame = pd.DataFrame(rows, columns=columns)
    for c in columns[3:]:
        frame[c] = frame[c].astype("Int64")
    return frame


def write_spread(results: Sequence[FamilyResult], out_dir: PathLike) -> List[Path]:
    """
    Writes spread.csv and blockheights.csv (family, txid, block_height, is_seed_tx).
    """
    out_dir = Path(out_dir)
    heights = []
    for r in results:
        ledger = r.graph.ledger
        seed_txs = set(r.temporal.seed_txids) if r.temporal is not None else set()
        txids = [ledger.txids[i] for i in r.graph.tx_ids]
        heights.append(pd.DataFrame({"family": r.family, "txid": txids, "block_height": ledger.block[r.graph.tx_ids],
                                     "is_seed_tx": [t in seed_txs for t in txids]}))
    columns = ["family", "txid", "block_height", "is_seed_tx"]
    heights = pd.concat(heights, ignore_index=True) if heights else pd.DataFrame(columns=columns)
    heights = heights.sort_values(["family", "block_height", "txid"], kind="mergesort")
    return [_write_csv(spread_frame(results), out_dir / "spread.csv"),
            _write_csv(heights[columns], out_dir / "blockheights.csv")]


def write_pattern_shares(shares: pd.DataFrame, out_dir: PathLike) -> Path:
    return _write_csv(shares, Path(out_dir) / "pattern_shares.csv")


def write_behaviors(results: Sequence[FamilyResult], scope: str, out_dir: PathLike) -> Path:
    """
    Writes behaviors.csv: family, address, a_label, b_label, N, M, scope.
    """
    columns = ["family", "address", "a_label", "b_label", "N", "M", "scope"]
    frames = [r.behaviors.assign(family=r.family, scope=scope) for r in results if r.behaviors is not None]
    frame = pd.concat(frames, ignore_index=True)[columns] if frames else pd.DataFrame(columns=columns)
    return _write_csv(frame, Path(out_dir) / "behaviors.csv")


def profiles_frame(profiles: Sequence[FamilyProfile]) -> pd.DataFrame:
    columns = ["family"] + [b.value for b in BEHAVIORS] + ["denominator"]
    rows = [[p.family] + list(p.p) + [p.denominator] for p in profiles]
    return pd.DataFrame(rows, columns=columns)


def write_profiles(profiles: Sequence[FamilyProfile], out_dir: PathLike) -> Path:
    return _write_csv(profiles_frame(profiles), Path(out_dir) / "profiles.csv")


def write_distances(matrix: DistanceMatrix, out_dir: PathLike) -> Path:
    frame = matrix.to_frame()
    frame.index.name = "family"
    return _write_csv(frame, Path(out_dir) / "distances.csv", index=True)


def write_pca(pca: PcaProjection, out_dir: PathLike) -> Path:
    """
    Writes pca.csv: a "# explained_variance,<pc1>,<pc2>" line followed by family, pc1, pc2 rows.
    """
    path = Path(out_dir) / "pca.csv"
    frame = pd.DataFrame({"family": list(pca.families), "pc1": pca.coords[:, 0], "pc2": pca.coords[:, 1]})
    header = "# explained_variance," + ",".join(FLOAT_FORMAT % v for v in pca.explained_variance) + "\n"
    path.write_text(header + frame.to_csv(index=False, float_format=FLOAT_FORMAT), encoding="utf-8")
    return path


def write_clusters(reports: Sequence[ClusterReport], out_dir: PathLike) -> Path:
    """
    Writes clusters.json as a list with one {lambda_pct, lambda, clusters, isolated, stats} object per threshold.
    """
    return write_json([r.to_json() for r in reports], Path(out_dir) / "clusters.json")


def write_cluster_table(table: pd.DataFrame, out_dir: PathLike) -> Path:
    return _write_csv(table, Path(out_dir) / "cluster_table.csv")


def run_manifest(inputs: Dict[str, Optional[PathLike]], config: Dict[str, object], versions: Dict[str, str],
                 families: Sequence[str], failures: Dict[str, List[str]], outputs: Sequence[Path]) -> dict:
    """
    Run manifest: input digests, configuration, library versions, analysed families, per-family failures and the
    written files.
    """
    return {"inputs": {k: {"path": str(v), "sha256": file_digest(v)} for k, v in inputs.items() if v is not None},
            "config": config,
            "versions": versions,
            "families": list(families),
            "failures": {k: v for k, v in sorted(failures.items()) if v},
            "outputs": sorted(p.name for p in outputs)}


def numpy_safe(obj: object) -> object:
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj
