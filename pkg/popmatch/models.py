"""Market data types: preference lists, scenario flavors, instances, matchings, verdicts"""

import logging
from enum import Enum
from typing import Annotated, Dict, FrozenSet, Iterable, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, field_validator, model_validator

logger = logging.getLogger(__name__)

# Reserved ids; never valid as user agent ids
UNMATCHED = "__unmatched__"
LAST_RESORT = "__last_resort__"

Edge = Tuple[str, str]


class MarketModel(str, Enum):
    """Two-sided marriage market or capacitated house allocation"""

    TWO_SIDED = "two-sided"
    HA = "ha"


class PreferenceList(BaseModel):
    """Strict ranking of acceptable partners, most preferred first"""

    model_config = ConfigDict(frozen=True)

    owner: str
    ranking: Tuple[str, ...] = ()

    _positions: Dict[str, int] = PrivateAttr(default_factory=dict)

    @field_validator("ranking")
    @classmethod
    def _no_duplicates(cls, ranking: Tuple[str, ...]) -> Tuple[str, ...]:
        if len(set(ranking)) != len(ranking):
            raise ValueError(f"ranking contains duplicates: {list(ranking)}")
        if UNMATCHED in ranking:
            raise ValueError(f"{UNMATCHED} is reserved and cannot be ranked")
        return ranking

    def model_post_init(self, __context) -> None:
        self._positions = {partner: i for i, partner in enumerate(self.ranking)}

    def __len__(self) -> int:
        return len(self.ranking)

    def __contains__(self, partner: object) -> bool:
        return partner in self._positions

    def position(self, partner: str) -> int:
        """0-based rank of partner; KeyError if not acceptable"""
        return self._positions[partner]

    def prefers(self, x: str, y: str) -> bool:
        """True iff x is strictly above y; unmatched sits below every entry"""
        if x == y or x == UNMATCHED:
            return False
        if y == UNMATCHED:
            return True
        return self._positions[x] < self._positions[y]

    def __str__(self) -> str:
        return ">".join(self.ranking)


Profile = Dict[str, PreferenceList]


def _check_profile_owners(profile: Profile) -> None:
    for agent, plist in profile.items():
        if plist.owner != agent:
            raise ValueError(f"list stored under {agent} is owned by {plist.owner}")


class Layers(BaseModel):
    """A list of full preference profiles over the same graph"""

    model_config = ConfigDict(frozen=True)

    type: Literal["layers"] = "layers"
    profiles: Tuple[Profile, ...]

    @model_validator(mode="after")
    def _same_agents_everywhere(self) -> "Layers":
        if not self.profiles:
            raise ValueError("layers scenario needs at least one profile")
        agents = set(self.profiles[0])
        for i, profile in enumerate(self.profiles):
            _check_profile_owners(profile)
            if set(profile) != agents:
                raise ValueError(f"layer {i} does not cover the same agents as layer 0")
            for agent, plist in profile.items():
                if set(plist.ranking) != set(self.profiles[0][agent].ranking):
                    raise ValueError(f"layer {i} ranks a different neighbor set for {agent}")
        return self


class Independent(BaseModel):
    """Per-agent sets of possible preference lists, chosen independently"""

    model_config = ConfigDict(frozen=True)

    type: Literal["independent"] = "independent"
    sets: Dict[str, Tuple[PreferenceList, ...]]

    @model_validator(mode="after")
    def _lists_are_permutations(self) -> "Independent":
        for agent, lists in self.sets.items():
            if not lists:
                raise ValueError(f"agent {agent} has an empty set of possible lists")
            acceptable = set(lists[0].ranking)
            for plist in lists:
                if plist.owner != agent:
                    raise ValueError(f"list stored under {agent} is owned by {plist.owner}")
                if set(plist.ranking) != acceptable:
                    raise ValueError(f"possible lists of {agent} are not permutations of one set")
        return self


class Robust(BaseModel):
    """Base profile plus a per-agent budget of adjacent swaps"""

    model_config = ConfigDict(frozen=True)

    type: Literal["robust"] = "robust"
    k: int = Field(ge=0)
    profile: Profile

    @model_validator(mode="after")
    def _owners(self) -> "Robust":
        _check_profile_owners(self.profile)
        return self


ScenarioSet = Annotated[Union[Layers, Independent, Robust], Field(discriminator="type")]


class MarketInstance(BaseModel):
    """Bipartite market bundled with its preference uncertainty"""

    model_config = ConfigDict(frozen=True)

    model: MarketModel
    agents_a: Tuple[str, ...]
    agents_b: Tuple[str, ...]
    capacities: Dict[str, int] = Field(default_factory=dict)
    scenario: ScenarioSet
    last_resort: Optional[str] = None

    _edges: FrozenSet[Edge] = PrivateAttr(default=frozenset())
    _neighbors: Dict[str, Tuple[str, ...]] = PrivateAttr(default_factory=dict)
    _lists: Dict[str, Tuple[PreferenceList, ...]] = PrivateAttr(default_factory=dict)
    _a_side: FrozenSet[str] = PrivateAttr(default=frozenset())

    @model_validator(mode="after")
    def _validate_market(self) -> "MarketInstance":
        ids = list(self.agents_a) + list(self.agents_b)
        if len(set(ids)) != len(ids):
            raise ValueError("agent ids must be unique across both sides")
        if UNMATCHED in ids:
            raise ValueError(f"{UNMATCHED} is a reserved id")
        if LAST_RESORT in self.agents_b and self.last_resort != LAST_RESORT:
            raise ValueError(f"{LAST_RESORT} may only appear as the flagged last-resort house")
        for house in self.agents_b:
            q = self.capacities.get(house, 1)
            if q <= 0:
                raise ValueError(f"capacity of {house} must be positive, got {q}")
            if self.model == MarketModel.TWO_SIDED and q != 1:
                raise ValueError(f"two-sided markets have unit capacities, {house} has {q}")
        unknown_caps = set(self.capacities) - set(self.agents_b)
        if unknown_caps:
            raise ValueError(f"capacities given for unknown houses: {sorted(unknown_caps)}")

        ranked_agents = set(self.agents_a)
        if self.model == MarketModel.TWO_SIDED:
            ranked_agents |= set(self.agents_b)
        for agent, lists in self._all_lists().items():
            if agent not in ranked_agents:
                raise ValueError(f"preference lists given for {agent}, which does not rank anyone")
        missing = ranked_agents - set(self._all_lists())
        if missing:
            raise ValueError(f"no preference list for {sorted(missing)}")

        a_side, b_side = set(self.agents_a), set(self.agents_b)
        edges = set()
        neighbors: Dict[str, Tuple[str, ...]] = {}
        for agent, lists in self._all_lists().items():
            partners = lists[0].ranking
            other = b_side if agent in a_side else a_side
            stray = [p for p in partners if p not in other]
            if stray:
                raise ValueError(f"{agent} ranks ids that are not on the other side: {stray}")
            neighbors[agent] = tuple(sorted(partners))
            if agent in a_side:
                edges.update((agent, b) for b in partners)
        if self.model == MarketModel.TWO_SIDED:
            b_edges = {(a, b) for b in self.agents_b for a in neighbors[b]}
            if b_edges != edges:
                diff = sorted(b_edges ^ edges)
                raise ValueError(f"acceptability is not mutual on edges {diff}")
        else:
            for b in self.agents_b:
                neighbors[b] = tuple(sorted(a for a, h in edges if h == b))

        if self.last_resort is not None:
            self._check_last_resort(self.last_resort)

        self._edges = frozenset(edges)
        self._lists = self._all_lists()
        self._neighbors = neighbors
        self._a_side = frozenset(self.agents_a)
        return self

    def _check_last_resort(self, house: str) -> None:
        if self.model != MarketModel.HA:
            raise ValueError("last-resort house only exists in house allocation markets")
        if house not in self.agents_b:
            raise ValueError(f"last-resort house {house} is not a house")
        if self.capacities.get(house, 1) != len(self.agents_a) and self.agents_a:
            raise ValueError(f"last-resort house {house} must have capacity |A|")
        for agent, lists in self._all_lists().items():
            for plist in lists:
                if not plist.ranking or plist.ranking[-1] != house:
                    raise ValueError(f"last-resort house is not last in a list of {agent}")

    def _all_lists(self) -> Dict[str, Tuple[PreferenceList, ...]]:
        scenario = self.scenario
        if isinstance(scenario, Layers):
            return {agent: tuple(p[agent] for p in scenario.profiles) for agent in scenario.profiles[0]}
        if isinstance(scenario, Independent):
            return dict(scenario.sets)
        return {agent: (plist,) for agent, plist in scenario.profile.items()}

    @property
    def edges(self) -> FrozenSet[Edge]:
        return self._edges

    @property
    def is_ha(self) -> bool:
        return self.model == MarketModel.HA

    @property
    def flavor(self) -> str:
        return self.scenario.type

    @property
    def ranking_agents(self) -> Tuple[str, ...]:
        """Agents that carry preferences, in lexicographic order"""
        if self.is_ha:
            return tuple(sorted(self.agents_a))
        return tuple(sorted(self.agents_a + self.agents_b))

    def capacity(self, house: str) -> int:
        return self.capacities.get(house, 1)

    def neighbors(self, agent: str) -> Tuple[str, ...]:
        if agent not in self._neighbors:
            raise KeyError(f"unknown agent {agent}")
        return self._neighbors[agent]

    def is_a(self, agent: str) -> bool:
        return agent in self._a_side

    def lists_of(self, agent: str) -> Tuple[PreferenceList, ...]:
        """Listed lists for an agent: every layer's, P_u, or the robust base"""
        if agent not in self._lists:
            raise KeyError(f"agent {agent} carries no preferences")
        return self._lists[agent]

    def base_list(self, agent: str) -> PreferenceList:
        return self.lists_of(agent)[0]

    def check_matching(self, matching: "Matching") -> None:
        """Raise ValueError unless matching respects edges and capacities"""
        load: Dict[str, int] = {}
        seen_a = set()
        for a, b in matching.pairs:
            if (a, b) not in self._edges:
                raise ValueError(f"pair ({a}, {b}) is not an edge of the instance")
            if a in seen_a:
                raise ValueError(f"agent {a} is matched more than once")
            seen_a.add(a)
            load[b] = load.get(b, 0) + 1
            if load[b] > self.capacity(b):
                raise ValueError(f"house {b} exceeds its capacity {self.capacity(b)}")


class Matching(BaseModel):
    """Set of (a, b) pairs; a-side agents appear at most once"""

    model_config = ConfigDict(frozen=True)

    pairs: FrozenSet[Edge] = frozenset()

    @classmethod
    def of(cls, pairs: Iterable[Edge]) -> "Matching":
        return cls(pairs=frozenset((a, b) for a, b in pairs))

    def __len__(self) -> int:
        return len(self.pairs)

    def __contains__(self, pair: object) -> bool:
        return pair in self.pairs

    def sorted_pairs(self) -> List[Edge]:
        return sorted(self.pairs)

    def partner_map(self) -> Dict[str, str]:
        """a -> b and (unit-capacity) b -> a lookup"""
        result: Dict[str, str] = {}
        for a, b in self.pairs:
            result[a] = b
            result[b] = a
        return result

    def house_of(self) -> Dict[str, str]:
        return {a: b for a, b in self.pairs}

    def occupants(self, house: str) -> Tuple[str, ...]:
        return tuple(sorted(a for a, b in self.pairs if b == house))

    def without_house(self, house: str) -> "Matching":
        return Matching.of((a, b) for a, b in self.pairs if b != house)

    def __str__(self) -> str:
        return "{" + ", ".join(f"({a},{b})" for a, b in self.sorted_pairs()) + "}"


class Verdict(BaseModel):
    """Verification outcome; failures carry a witness and the scenario it arises in"""

    model_config = ConfigDict(frozen=True)

    holds: bool
    witness: Optional[Union[Matching, Tuple[str, str]]] = None
    scenario: Optional[str] = None
    reason: Optional[str] = None

    @model_validator(mode="after")
    def _witness_iff_failure(self) -> "Verdict":
        if self.holds and self.witness is not None:
            raise ValueError("a holding verdict carries no witness")
        if not self.holds and self.witness is None:
            raise ValueError("a failing verdict needs a witness")
        return self

    @classmethod
    def ok(cls) -> "Verdict":
        return cls(holds=True)

    @classmethod
    def fail(
        cls,
        witness: Union[Matching, Tuple[str, str]],
        scenario: Optional[str] = None,
        reason: Optional[str] = None,
    ) -> "Verdict":
        return cls(holds=False, witness=witness, scenario=scenario, reason=reason)


def describe_profile(profile: Profile, agents: Optional[Iterable[str]] = None) -> str:
    """Readable 'a1: b2>b1; a2: b1>b2' description of (part of) a profile"""
    chosen = sorted(agents) if agents is not None else sorted(profile)
    return "; ".join(f"{agent}: {profile[agent]}" for agent in chosen if agent in profile)
