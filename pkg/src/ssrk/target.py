"""Duplicate-rank targeting: a pluggable finder whose baseline combines
direct collision observation with a lexicographic epidemic on the
(found, target) pair."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .core import AgentState, ConfigurationError


def target_init(a: AgentState) -> None:
    a.target = 1
    a.ft_found = 0


def target_step(ini: AgentState, res: AgentState) -> None:
    """Baseline finder step. A same-rank meeting locks both agents onto that
    rank; otherwise the lexicographically largest (found, target) pair wins."""
    if ini.rank is not None and ini.rank == res.rank:
        ini.ft_found = 1
        res.ft_found = 1
        ini.target = ini.rank
        res.target = res.rank
    if (ini.ft_found, ini.target or 0) > (res.ft_found, res.target or 0):
        res.ft_found = ini.ft_found
        res.target = ini.target


@dataclass(frozen=True)
class TargetFinder:
    """Finder plug-in: an init hook run at mode-F entry and a pair step."""

    name: str
    init: Callable[[AgentState], None]
    step: Callable[[AgentState, AgentState], None]


BASELINE = TargetFinder("baseline", target_init, target_step)

_REGISTRY: dict[str, TargetFinder] = {BASELINE.name: BASELINE}


def get_target_finder(name: str) -> TargetFinder:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown target finder {name!r}; available: {sorted(_REGISTRY)}"
        ) from None


def register_target_finder(finder: TargetFinder) -> None:
    _REGISTRY[finder.name] = finder
