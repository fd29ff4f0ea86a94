"""The two-feature Fever/Cough AND models and their derived expectations.

Features are coded 0 = No, 1 = Yes and split at 0.5, so ``x <= 0.5`` is the
No branch. Each model has four leaves of cover 1, matching a dataset with
exactly one point per leaf whose label is the leaf value.
"""

from __future__ import annotations

import json

import numpy as np

from .model import LEAF, Dataset, Tree, TreeEnsemble

FEVER, COUGH = 0, 1
NAMES = ("Fever", "Cough")
YES_YES = np.array([1.0, 1.0])


def _two_level(root_feature, other_feature, leaves):
    # node 0 splits root_feature; nodes 1/2 split other_feature; leaves 3..6
    return Tree(
        values=[np.nan, np.nan, np.nan, *leaves],
        left=[1, 3, 5, LEAF, LEAF, LEAF, LEAF],
        right=[2, 4, 6, LEAF, LEAF, LEAF, LEAF],
        thresholds=[0.5, 0.5, 0.5, np.nan, np.nan, np.nan, np.nan],
        features=[root_feature, other_feature, other_feature, LEAF, LEAF, LEAF, LEAF],
        covers=[4.0, 2.0, 2.0, 1.0, 1.0, 1.0, 1.0],
    )


def model_a() -> TreeEnsemble:
    """Fever at the root; output 80 only when both are Yes."""
    return TreeEnsemble([_two_level(FEVER, COUGH, [0.0, 0.0, 0.0, 80.0])], 0.0, 2, NAMES)


def model_b() -> TreeEnsemble:
    """Cough at the root; the AND of model A plus 10 whenever Cough is Yes."""
    return TreeEnsemble([_two_level(COUGH, FEVER, [0.0, 0.0, 10.0, 90.0])], 0.0, 2, NAMES)


def cover_faithful_data() -> Dataset:
    """One row per leaf (all four Fever/Cough combinations)."""
    return Dataset(np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=np.float64), NAMES)


# values below were derived by hand-walking the trees and confirmed with the
# brute-force subset enumeration in treeattr.oracle
EXPECTATIONS = {
    "model_a": {
        "expected_value": 20.0,
        "output_yes_yes": 80.0,
        "treeshap_yes_yes": [30.0, 30.0],
        "saabas_yes_yes": [20.0, 40.0],
        "interactions_yes_yes": [[20.0, 10.0], [10.0, 20.0]],
        "split_count": [1, 2],
    },
    "model_b": {
        "expected_value": 25.0,
        "output_yes_yes": 90.0,
        "treeshap_yes_yes": [30.0, 35.0],
        "saabas_yes_yes": [40.0, 25.0],
        "split_count": [2, 1],
    },
}


def expectations_json() -> str:
    return json.dumps({"features": list(NAMES), **EXPECTATIONS}, indent=1)
