"""Plain-text run configuration.

Grammar: one ``key=value`` assignment per line, ``#`` comments.  Keys are
dotted paths (``flow.kind=shear``); values are scalars, or comma lists
for ``eps.list``.  Environment variables prefixed ``LAYERLAB_`` override
keys, with ``__`` standing for the dot (``LAYERLAB_FLOW__KIND=shear``).
"""

from __future__ import annotations

import hashlib
import os

from .sweep import SweepPlan

ENV_PREFIX = "LAYERLAB_"

DEFAULTS = {
    "regime": "concave-shear",
    "L": "1.0",
    "K_a": "1",
    "K_r": "1",
    "resolution": "40",
    "seed": "0",
    "workers": "1",
    "s0": "2.0",
    "inflow": "blasius",
    "eps.list": "4e-3,2e-3,1e-3,5e-4",
    "flow.kind": "shear",
    "flow.profile": "constant",
    "flow.value": "1.0",
    "h.kind": "cosine-bump",
    "h.amplitude": "0.04",
    "h.center": "0.0",
    "h.width": "0.4",
    "out": "layerlab-out",
}


class ConfigError(ValueError):
    pass


def parse_config_text(text):
    items = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        items[key.strip()] = value.strip()
    return items


def load_config(path=None, overrides=None):
    """Merge defaults, file, environment, and explicit overrides."""
    items = dict(DEFAULTS)
    if path is not None:
        if not os.path.exists(path):
            raise ConfigError(f"config file not found: {path}")
        with open(path) as fh:
            items.update(parse_config_text(fh.read()))
    for env_key, value in os.environ.items():
        if env_key.startswith(ENV_PREFIX):
            key = env_key[len(ENV_PREFIX):].lower().replace("__", ".")
            items[key] = value
    if overrides:
        items.update({k: str(v) for k, v in overrides.items() if v is not None})
    return items


def config_hash(items):
    canon = "\n".join(f"{k}={items[k]}" for k in sorted(items))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _subdict(items, prefix):
    out = {}
    plen = len(prefix) + 1
    for k, v in items.items():
        if k.startswith(prefix + "."):
            out[k[plen:]] = v
    return out


def plan_from_config(items, **plan_overrides):
    """Build a SweepPlan, enforcing the regime invariants."""
    regime = items["regime"]
    flow_spec = _subdict(items, "flow")
    inflow = items.get("inflow", "blasius")
    if regime == "concave-shear":
        if flow_spec.get("kind", "shear") != "shear" or inflow != "blasius":
            raise ConfigError("regime=concave-shear requires flow.kind=shear "
                              "and inflow=blasius")
    eps_list = tuple(float(t) for t in items["eps.list"].split(",") if t.strip())
    kwargs = dict(
        eps_list=eps_list,
        regime=regime,
        K_a=int(items["K_a"]),
        K_r=int(items["K_r"]),
        L=float(items["L"]),
        flow_spec=flow_spec,
        h_spec=_subdict(items, "h"),
        resolution=int(items["resolution"]),
        s0=float(items["s0"]),
        inflow=inflow,
        seed=int(items["seed"]),
        workers=int(items["workers"]),
    )
    kwargs.update(plan_overrides)
    return SweepPlan(**kwargs)
