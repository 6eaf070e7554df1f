import logging
from datetime import datetime
from typing import List, Sequence, Tuple

import pandas as pd

from strainscope import utils
from .tools_similarity import FamilyProfile, ClusterReport, DEFAULT_LAMBDA_PCTS, distance_matrix, pca_2d, cluster, \
    cluster_table, split_by, within

logger = logging.getLogger(__name__)


class FamilySimilarity(object):
    """
    FamilySimilarity compares the behavior distributions of ransomware families: it computes their pairwise
    Euclidean distances, a 2-D principal component projection and threshold-based cluster reports.

    Parameters
    ----------
    lambda_pcts : sequence of float, default=(1, 2, 3, 4, 5, 10)
        Distance thresholds, as percentages of the maximum pairwise distance, used by cluster_table.

    Attributes
    ----------
    profiles_ : list of FamilyProfile
        Profiles the instance was fitted on, sorted by family name.

    distance_matrix_ : DistanceMatrix
        Pairwise distances between the profiles.

    pca_ : PcaProjection or None
        2-D projection; None when fewer than 3 families are fitted.
    """

    def __init__(self, lambda_pcts: Sequence[float] = DEFAULT_LAMBDA_PCTS):
        for lambda_pct in lambda_pcts:
            utils.validate_number(lambda_pct, float, "percentage", "lambda_pct")
        self.lambda_pcts = tuple(lambda_pcts)
        self.profiles_ = None
        self.distance_matrix_ = None
        self.pca_ = None

    def fit(self, profiles: Sequence[FamilyProfile]):
        """
        Fits FamilySimilarity instance.

        Parameters
        ----------
        profiles : sequence of FamilyProfile
            At least 2 family profiles with distinct family names.

        Returns
        -------
        self : FamilySimilarity instance
            Fitted instance.
        """
        families = [pr.family for pr in profiles]
        if len(set(families)) != len(families):
            raise ValueError("Family names should be unique.")
        t0 = datetime.now()
        self.profiles_ = sorted(profiles, key=lambda pr: pr.family)
        self.distance_matrix_ = distance_matrix(self.profiles_)
        if len(self.profiles_) >= 3:
            self.pca_ = pca_2d(self.profiles_)
        else:
            self.pca_ = None
            logger.warning("PCA needs at least 3 families, got %d.", len(self.profiles_))
        logger.info("%d families compared, d_max = %.6f. Fitting time: %s", len(self.profiles_),
                    self.distance_matrix_.d_max, datetime.now() - t0)
        return self

    def _check_fitted(self):
        if self.distance_matrix_ is None:
            raise ValueError("FamilySimilarity is not fitted.")

    def cluster(self, lambda_pct: float) -> ClusterReport:
        """
        Cluster report at lambda = lambda_pct * d_max / 100.
        """
        self._check_fitted()
        return cluster(self.distance_matrix_, lambda_pct)

    def cluster_reports(self) -> List[ClusterReport]:
        self._check_fitted()
        return [cluster(self.distance_matrix_, lambda_pct) for lambda_pct in self.lambda_pcts]

    def cluster_table(self) -> pd.DataFrame:
        """
        Cluster statistics, one row per threshold of lambda_pcts.
        """
        self._check_fitted()
        return cluster_table(self.distance_matrix_, self.lambda_pcts)

    def close_families(self, family: str, lambda_pct: float) -> Tuple[List[str], List[str]]:
        """
        Families within and beyond lambda_pct percent of d_max from the given family.
        """
        self._check_fitted()
        utils.validate_number(lambda_pct, float, "percentage", "lambda_pct")
        matrix = self.distance_matrix_
        i = matrix.index(family)
        return split_by(matrix, i, within(matrix, lambda_pct)[i])
