import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np
import pandas as pd
from numpy import ndarray
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial.distance import pdist, squareform
from sklearn.decomposition import PCA

from strainscope import utils
from strainscope.graph.behaviors import BEHAVIORS, BehaviorAssignment
from strainscope.graph.graph_builder import AddressTxGraph

logger = logging.getLogger(__name__)

COMPONENTS = tuple(b.value for b in BEHAVIORS)
DEFAULT_LAMBDA_PCTS = (1, 2, 3, 4, 5, 10)


class EmptyGraphError(ValueError):
    pass


@dataclass(frozen=True)
class FamilyProfile:
    """
    Behavior distribution of a family on the percent scale.

    Attributes
    ----------
    p : tuple of float
        Share (0-100) of address nodes carrying Collector, EXP, MA, BRANCH, SA, HUB, Diversification. An address
        with both an A and a B label counts in both components, so the sum may exceed 100.

    denominator : int
        Number of address nodes of the family graph, unlabelled ones included.
    """
    family: str
    p: Tuple[float, ...]
    denominator: int

    def as_array(self) -> ndarray:
        return np.array(self.p, dtype=float)


@dataclass
class DistanceMatrix:
    families: Tuple[str, ...]
    d: ndarray
    d_max: float

    def index(self, family: str) -> int:
        return self.families.index(family)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.d, index=list(self.families), columns=list(self.families))


@dataclass
class PcaProjection:
    """
    Attributes
    ----------
    coords : array-like of shape (n_families, 2)
        Projection of the centred profiles on the two principal axes.

    explained_variance : array-like of shape (2,)
        Sample variance along each axis, non-increasing.

    components : array-like of shape (2, 7)
        Orthonormal principal axes; the largest-magnitude entry of each axis is positive.
    """
    families: Tuple[str, ...]
    coords: ndarray
    explained_variance: ndarray
    components: ndarray
    mean: ndarray


@dataclass
class ClusterReport:
    lambda_pct: float
    lambda_: float
    d_max: float
    clusters: List[List[str]] = field(default_factory=list)
    isolated: List[str] = field(default_factory=list)

    @property
    def stats(self) -> Dict[str, float]:
        sizes = [len(c) for c in self.clusters]
        return {"clusters_number": len(sizes),
                "clusters_avg_population": float(np.mean(sizes)) if sizes else 0.0,
                "clusters_max_population": max(sizes) if sizes else 0,
                "clusters_min_population": min(sizes) if sizes else 0,
                "clustered_strains": int(sum(sizes)),
                "isolated_strains": len(self.isolated)}

    def to_json(self) -> dict:
        return {"lambda_pct": self.lambda_pct, "lambda": round(self.lambda_, 6), "clusters": self.clusters,
                "isolated": self.isolated, "stats": self.stats}


def profile(family: str, assignments: Mapping[str, BehaviorAssignment], graph: AddressTxGraph) -> FamilyProfile:
    """
    Rescales the behavior counts of a family graph by its number of address nodes.

    Parameters
    ----------
    family : str
        Family name.

    assignments : dict
        Address -> BehaviorAssignment for every address node of the graph.

    graph : AddressTxGraph
        Family graph.

    Returns
    -------
    profile : FamilyProfile
        Percent-scale 7-dimensional profile.

    Raises
    ------
    EmptyGraphError
        If the graph has no address node.
    ValueError
        If the assignments do not cover the address nodes of the graph.
    """
    denominator = graph.num_addresses
    if denominator == 0:
        raise EmptyGraphError("Family " + family + " has an empty graph, its profile is undefined.")
    if len(assignments) != denominator:
        raise ValueError("Assignments cover " + str(len(assignments)) + " addresses, the graph of family " + family
                         + " has " + str(denominator) + ".")
    position = {b: i for i, b in enumerate(BEHAVIORS)}
    counts = np.zeros(len(BEHAVIORS), dtype=np.int64)
    for assignment in assignments.values():
        for b in assignment.labels:
            counts[position[b]] += 1
    return FamilyProfile(family, tuple(float(v) for v in 100.0 * counts / denominator), denominator)


def distance(p: FamilyProfile, q: FamilyProfile) -> float:
    """
    Euclidean distance between two profiles over their 7 percent-scale components.
    """
    return float(np.sqrt(np.sum((q.as_array() - p.as_array()) ** 2)))


def distance_matrix(profiles: Sequence[FamilyProfile]) -> DistanceMatrix:
    """
    Pairwise Euclidean distances between family profiles, in the given family order.

    Raises
    ------
    ValueError
        If fewer than 2 profiles are given.
    """
    if len(profiles) < 2:
        raise ValueError("At least 2 profiles are required, got " + str(len(profiles)) + ".")
    x = np.vstack([pr.as_array() for pr in profiles])
    d = squareform(pdist(x, metric="euclidean"))
    return DistanceMatrix(tuple(pr.family for pr in profiles), d, float(d.max()))


def pca_2d(profiles: Sequence[FamilyProfile]) -> PcaProjection:
    """
    Projects the profiles on the two leading principal axes of their sample covariance (centred, not
    standardised, since every component shares the percent unit).

    Raises
    ------
    ValueError
        If fewer than 3 profiles are given.
    """
    if len(profiles) < 3:
        raise ValueError("At least 3 profiles are required, got " + str(len(profiles)) + ".")
    x = np.vstack([pr.as_array() for pr in profiles])
    pca = PCA(n_components=2, svd_solver="full")
    pca.fit(x)
    components = pca.components_.copy()
    pivot = np.argmax(np.abs(components), axis=1)
    signs = np.sign(components[np.arange(2), pivot])
    signs[signs == 0] = 1.0
    components *= signs[:, np.newaxis]
    coords = (x - pca.mean_) @ components.T
    return PcaProjection(tuple(pr.family for pr in profiles), coords, pca.explained_variance_.copy(), components,
                         pca.mean_.copy())


def within(matrix: DistanceMatrix, lambda_pct: float) -> ndarray:
    """
    Boolean matrix of the pairs with d <= lambda_pct * d_max / 100, compared as 100 * d <= lambda_pct * d_max so
    that a pair at d_max stays within 100%.
    """
    return 100 * matrix.d <= lambda_pct * matrix.d_max


def cluster(matrix: DistanceMatrix, lambda_pct: float) -> ClusterReport:
    """
    Groups families whose distance is at most lambda = lambda_pct * d_max / 100. Clusters are the connected
    components with two or more families of the threshold graph; the remaining families are isolated.

    Parameters
    ----------
    matrix : DistanceMatrix
        Pairwise distances.

    lambda_pct : float
        Threshold as a percentage of d_max, in (0, 100].

    Returns
    -------
    report : ClusterReport
        Clusters (families sorted by name, clusters sorted by their first family) and isolated families.
    """
    utils.validate_number(lambda_pct, float, "percentage", "lambda_pct")
    lambda_pct = float(lambda_pct)
    adjacency = within(matrix, lambda_pct)
    np.fill_diagonal(adjacency, False)
    _, labels = connected_components(csr_matrix(adjacency), directed=False)
    groups: Dict[int, List[str]] = {}
    for family, label in zip(matrix.families, labels):
        groups.setdefault(int(label), []).append(family)
    clusters = sorted(sorted(g) for g in groups.values() if len(g) >= 2)
    isolated = sorted(g[0] for g in groups.values() if len(g) == 1)
    return ClusterReport(lambda_pct, lambda_pct * matrix.d_max / 100, matrix.d_max, clusters, isolated)


def cluster_table(matrix: DistanceMatrix, lambda_pcts: Sequence[float] = DEFAULT_LAMBDA_PCTS) -> pd.DataFrame:
    """
    Cluster statistics for a range of thresholds, one row per lambda_pct.
    """
    rows = []
    for lambda_pct in lambda_pcts:
        report = cluster(matrix, lambda_pct)
        row = {"lambda_pct": report.lambda_pct, "lambda": report.lambda_}
        row.update(report.stats)
        rows.append(row)
    return pd.DataFrame(rows)


def close_families(matrix: DistanceMatrix, family: str, lam: float) -> Tuple[List[str], List[str]]:
    """
    Splits the other families into close (d <= lam) and distant (d > lam) ones, each sorted by distance then name.
    """
    i = matrix.index(family)
    return split_by(matrix, i, matrix.d[i] <= lam)


def split_by(matrix: DistanceMatrix, i: int, close_mask: ndarray) -> Tuple[List[str], List[str]]:
    others = sorted((float(matrix.d[i, j]), f, bool(close_mask[j])) for j, f in enumerate(matrix.families) if j != i)
    close = [f for _, f, c in others if c]
    distant = [f for _, f, c in others if not c]
    return close, distant
