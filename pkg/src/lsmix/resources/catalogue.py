from __future__ import annotations

from ..core.classification import tail_profile
from ..stats.mixing import MIXING_MODELS


def catalogue() -> dict:
    """
    Returns every mixing variant with its parameters and defaults, Step-1
    class and the dependence class of each tail.
    """
    items = []
    for name, cls in MIXING_MODELS.items():
        default = cls()
        items.append({
            "name": name,
            "params": default.params(),
            "latent": list(cls.latent_names),
            "step1_class": str(cls.step1_class),
            "location_support": cls.location_support,
            "has_scale": cls.has_scale,
            "tails": tail_profile(name),
            "doc": (cls.__doc__ or "").strip().splitlines()[0] if cls.__doc__ else "",
        })
    return {"total": len(items), "items": items}
