from __future__ import annotations

from dataclasses import asdict, dataclass
from enum import StrEnum
from typing import Literal


class Step1Class(StrEnum):
    """Which transformed vector removes (S, R) from the likelihood."""
    PURE_GAUSSIAN = "pure_gaussian"
    LOCATION = "location"
    SCALE = "scale"
    LOCATION_SCALE = "location_scale"


TailClass = Literal["AD", "AI"]


@dataclass(frozen=True)
class TailProfile:
    upper: TailClass
    lower: TailClass
    note: str = ""


# Tail classes by variant; SM5 depends on the sign of gamma.
_TAILS: dict[str, TailProfile] = {
    "gaussian": TailProfile("AI", "AI"),
    "lm1": TailProfile("AD", "AI"),
    "lm2": TailProfile("AD", "AD"),
    "sm1": TailProfile("AI", "AI"),
    "sm2": TailProfile("AI", "AI"),
    "sm3": TailProfile("AD", "AD"),
    "sm4": TailProfile("AD", "AD"),
    "sm5": TailProfile("AD", "AD", note="AD for gamma > 0, AI otherwise"),
    "lsm1": TailProfile("AD", "AI", note="upper tail AD for lambda < 1, AI otherwise"),
    "lsm2": TailProfile("AD", "AD", note="each tail AD when its rate is < 1"),
}


def tail_profile(name: str) -> dict:
    """Upper/lower tail dependence class of a catalogue variant."""
    key = name.lower()
    if key not in _TAILS:
        return asdict(TailProfile("AI", "AI", note=f"Unknown variant: {name}"))
    return asdict(_TAILS[key])
