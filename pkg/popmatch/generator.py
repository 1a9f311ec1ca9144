"""Seeded random instances for corpora and acceptance runs"""

import logging
from typing import Dict, List, Literal, Optional, Sequence, Tuple, TypeVar

from pydantic import BaseModel, ConfigDict, Field, model_validator

from popmatch.models import (
    Independent,
    Layers,
    MarketInstance,
    MarketModel,
    PreferenceList,
    Robust,
)

logger = logging.getLogger(__name__)

MASK64 = (1 << 64) - 1
T = TypeVar("T")


class SplitMix64:
    """splitmix64 stream; identical seeds give identical streams on every platform"""

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        """Integer in [0, n); modulo reduction"""
        if n <= 0:
            raise ValueError(f"range must be positive, got {n}")
        return self.next() % n

    def between(self, low: int, high: int) -> int:
        """Integer in [low, high]"""
        return low + self.below(high - low + 1)

    def shuffled(self, items: Sequence[T]) -> List[T]:
        """Fisher-Yates from the back"""
        result = list(items)
        for i in range(len(result) - 1, 0, -1):
            j = self.below(i + 1)
            result[i], result[j] = result[j], result[i]
        return result


class GeneratorConfig(BaseModel):
    """Shape of a random instance; the same config always yields the same instance"""

    model_config = ConfigDict(frozen=True)

    seed: int = 0
    model: MarketModel = MarketModel.TWO_SIDED
    n_a: int = Field(default=3, ge=0)
    n_b: int = Field(default=3, ge=0)
    list_len_min: int = Field(default=1, ge=0)
    list_len_max: Optional[int] = None
    flavor: Literal["layers", "independent", "robust"] = "layers"
    layers: int = Field(default=1, ge=1)
    set_size: int = Field(default=2, ge=1)
    uncertain_agents: Optional[int] = Field(
        default=None, ge=0, description="agents with more than one list; all if unset"
    )
    k: int = Field(default=1, ge=0)
    cap_min: int = Field(default=1, ge=1)
    cap_max: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def _consistent(self) -> "GeneratorConfig":
        longest = self.n_b if self.list_len_max is None else self.list_len_max
        if self.list_len_min > longest and self.n_b > 0:
            raise ValueError(f"list_len_min {self.list_len_min} exceeds list_len_max {longest}")
        if longest > self.n_b:
            raise ValueError(f"lists of length {longest} need at least {longest} agents on side B")
        if self.cap_min > self.cap_max:
            raise ValueError("cap_min exceeds cap_max")
        if self.model == MarketModel.TWO_SIDED and self.cap_max != 1:
            raise ValueError("two-sided markets have unit capacities")
        return self

    @property
    def longest(self) -> int:
        return self.n_b if self.list_len_max is None else self.list_len_max


def _ids(prefix: str, n: int) -> Tuple[str, ...]:
    return tuple(f"{prefix}{i}" for i in range(1, n + 1))


def _acceptable_sets(config: GeneratorConfig, rng: SplitMix64, agents_a, agents_b) -> Dict[str, List[str]]:
    neighbors: Dict[str, List[str]] = {}
    for a in agents_a:
        length = rng.between(min(config.list_len_min, config.longest), config.longest) if agents_b else 0
        neighbors[a] = sorted(rng.shuffled(agents_b)[:length])
    if config.model == MarketModel.TWO_SIDED:
        for b in agents_b:
            neighbors[b] = sorted(a for a in agents_a if b in neighbors[a])
    return neighbors


def _profile(rng: SplitMix64, neighbors: Dict[str, List[str]]) -> Dict[str, PreferenceList]:
    return {
        u: PreferenceList(owner=u, ranking=tuple(rng.shuffled(partners))) for u, partners in sorted(neighbors.items())
    }


def generate_instance(config: GeneratorConfig) -> MarketInstance:
    """
    Draw a random instance

    Acceptable sets are drawn first, then one ranking per layer, per possible
    list or for the robust base, always in sorted agent order.
    """
    rng = SplitMix64(config.seed)
    agents_a, agents_b = _ids("a", config.n_a), _ids("b", config.n_b)
    neighbors = _acceptable_sets(config, rng, agents_a, agents_b)

    if config.flavor == "layers":
        scenario = Layers(profiles=tuple(_profile(rng, neighbors) for _ in range(config.layers)))
    elif config.flavor == "independent":
        uncertain = len(neighbors) if config.uncertain_agents is None else config.uncertain_agents
        sets = {}
        for i, u in enumerate(sorted(neighbors)):
            size = config.set_size if i < uncertain else 1
            sets[u] = tuple(PreferenceList(owner=u, ranking=tuple(rng.shuffled(neighbors[u]))) for _ in range(size))
        scenario = Independent(sets=sets)
    else:
        scenario = Robust(k=config.k, profile=_profile(rng, neighbors))

    capacities = {}
    if config.model == MarketModel.HA:
        capacities = {b: rng.between(config.cap_min, config.cap_max) for b in agents_b}
    instance = MarketInstance(
        model=config.model,
        agents_a=agents_a,
        agents_b=agents_b,
        capacities=capacities,
        scenario=scenario,
    )
    logger.debug(f"Generated {config.flavor} {config.model.value} instance from seed {config.seed}")
    return instance
