"""Shared fixtures: a small on-disk phantom dataset and a fast train config.

The tiny dataset is session-scoped and cached in tmp_path_factory space;
trained-model acceptance tests use the separate artifact cache in
acceptance_artifacts.py instead.
"""

from __future__ import annotations

import pytest

from mcmsr.phantom import PhantomSpec, generate_dataset, list_case_ids, make_splits


TINY_CHANNELS = [2, 4, 6, 8, 12]


@pytest.fixture(scope="session")
def tiny_data(tmp_path_factory):
    """Six phantom cases on disk plus a 2-fold split plan."""
    root = tmp_path_factory.mktemp("tinydata")
    ids = generate_dataset(PhantomSpec(seed=7), 6, root)
    plan = make_splits(ids, num_folds=2, seed=7)
    (root / "splits.json").write_text(plan.to_json())
    return {"dir": root, "ids": ids, "plan": plan}


@pytest.fixture(scope="session")
def tiny_split(tiny_data):
    return tiny_data["plan"].folds[0]


def tiny_config(variant="filter_scaling", **overrides):
    from mcmsr.training import TrainConfig

    base = dict(
        variant=variant,
        channels=list(TINY_CHANNELS),
        epochs=2,
        batch_size=4,
        n_values=(16, 24, 32),
        val_n_values=(24,),
        augment=False,
        seed=11,
    )
    base.update(overrides)
    return TrainConfig(**base)
