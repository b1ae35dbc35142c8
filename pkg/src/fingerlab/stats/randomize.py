"""Pocock-Simon minimization over BBT and age tertiles."""
from __future__ import annotations

import numpy as np

from ..core import as_generator
from ..defaults import DEFAULTS
from ..errors import InvalidArgument
from ..patient import GROUPS

_RAND = DEFAULTS["randomization"]
BIASED_COIN = _RAND["biased_coin"]
FACTORS = ("bbt", "age")


def tertile(value: float, cutpoints) -> int:
    return int(np.searchsorted(np.asarray(cutpoints, dtype=float), value, side="right"))


def covariate_levels(profile, bbt_cut=tuple(_RAND["bbt_cutpoints"]), age_cut=tuple(_RAND["age_cutpoints"])) -> dict:
    return {"bbt": tertile(profile.baseline_bbt, bbt_cut), "age": tertile(profile.age, age_cut)}


class Tallies:
    """Running per-factor, per-level group counts."""

    def __init__(self, groups=GROUPS, factors=FACTORS, n_levels: int = 3):
        self.groups = tuple(groups)
        self.counts = {f: np.zeros((n_levels, len(self.groups)), dtype=int) for f in factors}

    def add(self, levels: dict, group: str) -> None:
        j = self.groups.index(group)
        for f, lev in levels.items():
            self.counts[f][lev, j] += 1

    def imbalance(self, levels: dict) -> np.ndarray:
        """Sum over factors of the count range if the participant joined each group."""
        out = np.zeros(len(self.groups))
        for j in range(len(self.groups)):
            for f, lev in levels.items():
                row = self.counts[f][lev].copy()
                row[j] += 1
                out[j] += row.max() - row.min()
        return out


def rank_probabilities(n_groups: int, p_best: float) -> np.ndarray:
    """Probability per imbalance rank: ``p_best`` for the best, the rest shared equally."""
    if not 0.0 <= p_best <= 1.0:
        raise InvalidArgument("biased-coin probability must lie in [0, 1]")
    if n_groups == 1:
        return np.ones(1)
    probs = np.full(n_groups, (1.0 - p_best) / (n_groups - 1))
    probs[0] = p_best
    return probs


def assignment_probabilities(imbalance, p_best: float = BIASED_COIN) -> np.ndarray:
    """Group probabilities from imbalance scores; tied groups share their ranks' probability."""
    imb = np.asarray(imbalance, dtype=float)
    order = np.argsort(imb, kind="stable")
    by_rank = rank_probabilities(imb.size, p_best)
    probs = np.empty(imb.size)
    probs[order] = by_rank
    for value in np.unique(imb):
        tied = imb == value
        probs[tied] = probs[tied].mean()
    return probs


def minimization_randomize(profile, tallies: Tallies, rng, p_best: float = BIASED_COIN) -> str:
    """Assign ``profile`` to a group and record it in ``tallies``."""
    levels = covariate_levels(profile)
    probs = assignment_probabilities(tallies.imbalance(levels), p_best)
    g = as_generator(rng)
    group = tallies.groups[int(g.choice(len(probs), p=probs))]
    tallies.add(levels, group)
    return group
