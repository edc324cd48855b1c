"""JSON scenario and run-configuration files.

Both formats are strict: unknown keys raise :class:`ConfigError` so a typo
never silently falls back to a default.

Scenario::

    {"name": "...",
     "users": [{"id": "w1", "x": 0.0, "y": 0.0}, ...],
     "aps": [{"id": "f1", "x": 0.0, "y": 0.0}, ...],
     "rings": [{"radius_m": 30, "rate_bps": 3e8}, ...],      # optional
     "rates": [[...], ...],                                  # optional, W x F bit/s
     "profile": [{"ap": "f1", "users": ["w1"], "payoff": 1.0}, ...]}  # optional

Config::

    {"sharing": {"family": "identity" | "power" | "custom", "alphas": {"w1": 0.5},
                 "utility": "log1p", "parameter": 1.0},
     "control": {"family": "gaussian" | "none", "sigma": 0.3 | [...], "qhat": "auto" | [...]},
     "loadbalance": {"policy": "equal-split"},
     "mac": {"policy": "lowest-rate" | "fixed", "table": "802.11n", "downlink": true,
             "beta_fixed": null},
     "quota": {"caps": "auto" | [...]}}
"""
from __future__ import annotations

import json
from importlib import resources
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .control import DEFAULT_SIGMA, ControlSpec
from .mac80211 import DEFAULT_TABLES, MacConfig
from .matching import SharingRule
from .model import DEFAULT_RINGS, PlayerId, RateMatrix, Scenario


class ConfigError(ValueError):
    pass


def _only(obj: dict, allowed: set[str], where: str) -> dict:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} must be an object")
    extra = set(obj) - allowed
    if extra:
        raise ConfigError(f"unknown field(s) in {where}: {sorted(extra)}")
    return obj


@dataclass(frozen=True)
class ExplicitProfile:
    n_users: int
    n_aps: int
    entries: tuple[tuple[int, tuple[int, ...], float], ...]


@dataclass(frozen=True)
class ScenarioFile:
    scenario: Scenario
    profile: ExplicitProfile | None = None


def _ids(items, kind: str, where: str) -> list[int]:
    out = []
    for i, it in enumerate(items):
        pid = PlayerId.parse(it.get("id", f"{kind}{i + 1}"))
        if pid.kind.value != kind or pid.index != i + 1:
            raise ConfigError(f"{where}[{i}] must have id {kind}{i + 1}")
        out.append(i)
    return out


def scenario_from_dict(d: dict) -> ScenarioFile:
    _only(d, {"name", "users", "aps", "rings", "rates", "profile"}, "scenario")
    users = d.get("users", [])
    aps = d.get("aps", [])
    for i, u in enumerate(users):
        _only(u, {"id", "x", "y"}, f"users[{i}]")
    for i, a in enumerate(aps):
        _only(a, {"id", "x", "y", "quota"}, f"aps[{i}]")
    _ids(users, "w", "users")
    _ids(aps, "f", "aps")
    rings = DEFAULT_RINGS
    if "rings" in d:
        for i, r in enumerate(d["rings"]):
            _only(r, {"radius_m", "rate_bps"}, f"rings[{i}]")
        rings = tuple((float(r["radius_m"]), float(r["rate_bps"])) for r in d["rings"])
    rates = None
    if d.get("rates") is not None:
        rates = RateMatrix(np.asarray(d["rates"], dtype=float).reshape(len(users), len(aps)))
    quota = tuple(a.get("quota") for a in aps)
    sc = Scenario(
        user_xy=np.array([[u.get("x", 0.0), u.get("y", 0.0)] for u in users], dtype=float).reshape(-1, 2),
        ap_xy=np.array([[a.get("x", 0.0), a.get("y", 0.0)] for a in aps], dtype=float).reshape(-1, 2),
        rings=rings,
        explicit_rates=rates,
        ap_quota=quota if any(q is not None for q in quota) else None,
        name=str(d.get("name", "")),
    )
    prof = None
    if d.get("profile") is not None:
        entries = []
        for i, e in enumerate(d["profile"]):
            _only(e, {"ap", "users", "payoff"}, f"profile[{i}]")
            f = PlayerId.parse(e["ap"]).index - 1
            us = tuple(PlayerId.parse(w).index - 1 for w in e["users"])
            entries.append((f, us, float(e["payoff"])))
        prof = ExplicitProfile(len(users), len(aps), tuple(entries))
    return ScenarioFile(sc, prof)


def scenario_to_dict(sc: Scenario) -> dict:
    d: dict[str, Any] = {"name": sc.name}
    d["users"] = [{"id": f"w{i + 1}", "x": float(x), "y": float(y)} for i, (x, y) in enumerate(sc.user_xy)]
    aps = []
    for f, (x, y) in enumerate(sc.ap_xy):
        a = {"id": f"f{f + 1}", "x": float(x), "y": float(y)}
        if sc.ap_quota is not None and sc.ap_quota[f] is not None:
            a["quota"] = int(sc.ap_quota[f])
        aps.append(a)
    d["aps"] = aps
    d["rings"] = [{"radius_m": r, "rate_bps": t} for r, t in sc.rings]
    if sc.explicit_rates is not None:
        d["rates"] = sc.explicit_rates.to_list()
    return d


def fixture_path(name: str) -> Path:
    """Path of a scenario shipped with the package, e.g. ``fixture_path("campus")``."""
    path = Path(str(resources.files("wlanmatch") / "data" / f"{name}.json"))
    if not path.exists():
        raise ConfigError(f"no packaged fixture named {name!r}")
    return path


def load_scenario(path: str | Path) -> ScenarioFile:
    try:
        return scenario_from_dict(json.loads(Path(path).read_text()))
    except (KeyError, TypeError) as e:
        raise ConfigError(f"malformed scenario {path}: {e}") from None


@dataclass(frozen=True)
class RunConfig:
    sharing: SharingRule = field(default_factory=SharingRule)
    control_family: str = "gaussian"
    sigma: tuple[float, ...] = (DEFAULT_SIGMA,)
    qhat: tuple[float, ...] | None = None  # None means computed by load balancing
    loadbalance: str = "equal-split"
    mac: MacConfig = field(default_factory=MacConfig)
    caps: tuple[int, ...] | None = None

    def control_for(self, qhat) -> ControlSpec:
        if self.control_family == "none":
            return ControlSpec.none()
        q = self.qhat if self.qhat is not None else qhat
        return ControlSpec.gaussian(q, self.sigma if len(self.sigma) > 1 else self.sigma[0])


def config_from_dict(d: dict) -> RunConfig:
    _only(d, {"sharing", "control", "loadbalance", "mac", "quota"}, "config")
    sh = _only(d.get("sharing", {}), {"family", "alphas", "utility", "parameter"}, "sharing")
    alphas = sh.get("alphas", {})
    ua: dict[int, float] = {}
    aa: dict[int, float] = {}
    for label, a in alphas.items():
        pid = PlayerId.parse(label)
        (ua if pid.kind.value == "w" else aa)[pid.index - 1] = float(a)

    def dense(m):
        return tuple(m.get(i, 1.0) for i in range(max(m) + 1)) if m else ()

    try:
        sharing = SharingRule(sh.get("family", "identity"), dense(ua), dense(aa),
                              sh.get("utility", "log1p"), float(sh.get("parameter", 1.0)))
        ct = _only(d.get("control", {}), {"family", "sigma", "qhat"}, "control")
        family = ct.get("family", "gaussian")
        if family not in ("gaussian", "none"):
            raise ConfigError(f"unknown control family {family!r}")
        sigma = ct.get("sigma", DEFAULT_SIGMA)
        sigma = (float(sigma),) if np.isscalar(sigma) else tuple(float(s) for s in sigma)
        qhat = ct.get("qhat", "auto")
        qhat = None if qhat == "auto" else tuple(float(q) for q in qhat)
        lb = _only(d.get("loadbalance", {}), {"policy"}, "loadbalance")
        policy = lb.get("policy", "equal-split")
        if policy != "equal-split":
            raise ConfigError(f"unknown load-balancing policy {policy!r}")
        mc = _only(d.get("mac", {}), {"policy", "table", "downlink", "beta_fixed"}, "mac")
        mac = MacConfig(dict(DEFAULT_TABLES), mc.get("policy", "lowest-rate"), mc.get("table"),
                        bool(mc.get("downlink", True)), mc.get("beta_fixed"))
        qt = _only(d.get("quota", {}), {"caps"}, "quota")
        caps = qt.get("caps", "auto")
        caps = None if caps == "auto" else tuple(int(c) for c in caps)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    return RunConfig(sharing, family, sigma, qhat, policy, mac, caps)


def config_to_dict(cfg: RunConfig) -> dict:
    sh: dict[str, Any] = {"family": cfg.sharing.family}
    alphas = {f"w{i + 1}": a for i, a in enumerate(cfg.sharing.user_alpha)}
    alphas.update({f"f{i + 1}": a for i, a in enumerate(cfg.sharing.ap_alpha)})
    if alphas:
        sh["alphas"] = alphas
    if cfg.sharing.family == "custom":
        sh["utility"] = cfg.sharing.utility
        sh["parameter"] = cfg.sharing.parameter
    return {
        "sharing": sh,
        "control": {"family": cfg.control_family,
                    "sigma": cfg.sigma[0] if len(cfg.sigma) == 1 else list(cfg.sigma),
                    "qhat": "auto" if cfg.qhat is None else list(cfg.qhat)},
        "loadbalance": {"policy": cfg.loadbalance},
        "mac": {"policy": cfg.mac.policy, "table": cfg.mac.fixed, "downlink": cfg.mac.downlink,
                "beta_fixed": cfg.mac.beta_fixed},
        "quota": {"caps": "auto" if cfg.caps is None else list(cfg.caps)},
    }


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    return config_from_dict(json.loads(Path(path).read_text()))
