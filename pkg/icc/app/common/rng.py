"""随机数子流"""
from __future__ import annotations

import numpy as np


# 命名子流，所有随机性都从同一个64位种子派生
STREAMS = {
    "init": 1,
    "resample": 2,
    "synthetic": 3,
    "gmm": 4,
    "cv": 5,
}


def substream(seed: int, name: str, *index: int) -> np.random.Generator:
    """命名子流的Generator，额外下标选出相互独立的子流（如第i次重采样）"""
    if name not in STREAMS:
        raise KeyError(f"unknown random stream: {name}")
    key = (STREAMS[name], *(int(i) for i in index))
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=key))


__all__ = ["STREAMS", "substream"]
