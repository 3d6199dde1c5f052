"""Scenario files: the full game description in a TOML document.

A scenario names every body (exactly one evader, exactly one asset, any
number of pursuers), the engagement radii and time bounds, the algorithm
parameters, and optional atmosphere table overrides. The four bundled
example scenarios live in ``assetguard/scenarios/``.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import atmosphere as atmo_mod
from .dynamics import PlayerSpec
from .transcription import EngagementParams, SubproblemWeights

__all__ = ["Scenario", "parse_scenario", "serialize_scenario", "bundled_scenario_path"]

_PLAYER_KEYS = {"name", "role", "mass_slugs", "ref_area_ft2", "u_max_g",
                "mach_min", "node_count", "position_ft", "velocity_fts"}
_ENGAGEMENT_KEYS = {"capture_radius_ft", "evasion_radius_ft", "asset_deadline_s",
                    "min_final_time_s", "max_final_time_s", "pursuer_margin_s",
                    "threat_persistence"}
_ALGORITHM_KEYS = {"n_scp", "n_ibr", "w_vc", "w_tr", "eps_vc", "eps_tr", "evasion_memory", "guidance_threats"}
_ATMOSPHERE_KEYS = {"density", "speed_of_sound", "drag_coeff"}
_TOP_KEYS = {"name", "output_dir", "players", "engagement", "algorithm", "atmosphere"}


class ScenarioError(ValueError):
    """Scenario validation failure; message names the offending key path."""


@dataclass
class Scenario:
    name: str
    evader: PlayerSpec
    asset: PlayerSpec
    pursuers: list[PlayerSpec]
    params: EngagementParams
    weights: SubproblemWeights
    n_scp: int = 20
    n_ibr: int = 20
    evasion_memory: int = 2      # threat-set iterations the evader remembers
    guidance_threats: bool = True  # include guided flyout tubes in the threat set
    atmosphere_paths: dict = field(default_factory=dict)
    output_dir: str | None = None
    _atmo: object = field(default=None, repr=False, compare=False)

    @property
    def players(self) -> list[PlayerSpec]:
        return [self.evader, self.asset, *self.pursuers]

    @property
    def asset_position(self) -> np.ndarray:
        # the data model would admit a prescribed asset trajectory; only the
        # stationary case is exercised
        return self.asset.x0[:3]

    def atmosphere(self):
        if self._atmo is None:
            self._atmo = atmo_mod.load_atmosphere(
                self.atmosphere_paths.get("density"),
                self.atmosphere_paths.get("speed_of_sound"),
                self.atmosphere_paths.get("drag_coeff"),
            )
        return self._atmo


def _require(cond, msg):
    if not cond:
        raise ScenarioError(msg)


def _check_keys(table, allowed, where):
    unknown = set(table) - allowed
    _require(not unknown, f"{where}: unknown key(s) {sorted(unknown)}")


def _player_from_table(tbl, idx) -> PlayerSpec:
    where = f"players[{idx}]"
    _check_keys(tbl, _PLAYER_KEYS, where)
    for key in ("name", "role", "position_ft"):
        _require(key in tbl, f"{where}: missing required key {key!r}")
    pos = tbl["position_ft"]
    vel = tbl.get("velocity_fts", [0.0, 0.0, 0.0])
    _require(len(pos) == 3, f"{where}.position_ft: need three components")
    _require(len(vel) == 3, f"{where}.velocity_fts: need three components")
    try:
        return PlayerSpec(
            name=str(tbl["name"]),
            role=str(tbl["role"]),
            mass=float(tbl.get("mass_slugs", 1000.0)),
            ref_area=float(tbl.get("ref_area_ft2", np.pi / 4.0 * 25.0)),
            u_max_g=float(tbl.get("u_max_g", 0.0)),
            mach_min=float(tbl.get("mach_min", 0.0)),
            node_count=int(tbl.get("node_count", 30)),
            x0=np.array([*pos, *vel], dtype=float),
        )
    except ValueError as exc:
        raise ScenarioError(f"{where}: {exc}") from exc


def parse_scenario(path) -> Scenario:
    """Parse and validate a scenario file; unknown keys are rejected."""
    path = Path(path)
    with open(path, "rb") as fh:
        doc = tomllib.load(fh)
    _check_keys(doc, _TOP_KEYS, str(path))
    _require("players" in doc and doc["players"], f"{path}: no players defined")

    players = [_player_from_table(t, i) for i, t in enumerate(doc["players"])]
    evaders = [p for p in players if p.role == "evader"]
    assets = [p for p in players if p.role == "asset"]
    pursuers = [p for p in players if p.role == "pursuer"]
    _require(len(evaders) == 1, f"{path}: need exactly one evader, found {len(evaders)}")
    _require(len(assets) == 1, f"{path}: need exactly one asset, found {len(assets)}")

    eng = doc.get("engagement", {})
    _check_keys(eng, _ENGAGEMENT_KEYS, "engagement")
    _require("capture_radius_ft" in eng, "engagement: missing capture_radius_ft")
    _require("evasion_radius_ft" in eng, "engagement: missing evasion_radius_ft")
    try:
        params = EngagementParams(
            r_capture=float(eng["capture_radius_ft"]),
            r_evade=float(eng["evasion_radius_ft"]),
            t_asset=float(eng.get("asset_deadline_s", 60.0)),
            t_lo=float(eng.get("min_final_time_s", 1.0)),
            t_hi=float(eng.get("max_final_time_s", 60.0)),
            t_margin=float(eng.get("pursuer_margin_s", 0.1)),
            threat_persistence=bool(eng.get("threat_persistence", False)),
        )
    except ValueError as exc:
        raise ScenarioError(f"engagement: {exc}") from exc
    _require(params.r_capture > 0.0, "engagement.capture_radius_ft: must be positive")
    _require(params.r_evade > 0.0, "engagement.evasion_radius_ft: must be positive")
    _require(params.t_lo > 0.0, "engagement.min_final_time_s: must be positive")

    alg = doc.get("algorithm", {})
    _check_keys(alg, _ALGORITHM_KEYS, "algorithm")
    try:
        weights = SubproblemWeights(
            w_vc=float(alg.get("w_vc", 1.0e5)),
            w_tr=float(alg.get("w_tr", 1.0)),
            eps_vc=float(alg.get("eps_vc", 1.0e-2)),
            eps_tr=float(alg.get("eps_tr", 1.0e-5)),
        )
    except ValueError as exc:
        raise ScenarioError(f"algorithm: {exc}") from exc
    n_scp = int(alg.get("n_scp", 20))
    n_ibr = int(alg.get("n_ibr", 20))
    memory = int(alg.get("evasion_memory", 2))
    guidance_threats = bool(alg.get("guidance_threats", True))
    _require(n_scp >= 1 and n_ibr >= 1, "algorithm: iteration counts must be >= 1")
    _require(memory >= 1, "algorithm.evasion_memory: must be >= 1")

    atm = doc.get("atmosphere", {})
    _check_keys(atm, _ATMOSPHERE_KEYS, "atmosphere")
    atm_paths = {}
    for key, val in atm.items():
        p = Path(val)
        if not p.is_absolute():
            p = path.parent / p
        atm_paths[key] = str(p)

    return Scenario(
        name=str(doc.get("name", path.stem)),
        evader=evaders[0],
        asset=assets[0],
        pursuers=pursuers,
        params=params,
        weights=weights,
        n_scp=n_scp,
        n_ibr=n_ibr,
        evasion_memory=memory,
        guidance_threats=guidance_threats,
        atmosphere_paths=atm_paths,
        output_dir=doc.get("output_dir"),
    )


def _toml_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise TypeError(f"cannot serialize {type(v)}")


def serialize_scenario(scn: Scenario, path):
    """Write a scenario back to TOML; parse(serialize(s)) == s field-wise."""
    lines = [f"name = {_toml_value(scn.name)}"]
    if scn.output_dir is not None:
        lines.append(f"output_dir = {_toml_value(scn.output_dir)}")
    lines += [
        "",
        "[engagement]",
        f"capture_radius_ft = {_toml_value(scn.params.r_capture)}",
        f"evasion_radius_ft = {_toml_value(scn.params.r_evade)}",
        f"asset_deadline_s = {_toml_value(scn.params.t_asset)}",
        f"min_final_time_s = {_toml_value(scn.params.t_lo)}",
        f"max_final_time_s = {_toml_value(scn.params.t_hi)}",
        f"pursuer_margin_s = {_toml_value(scn.params.t_margin)}",
        f"threat_persistence = {_toml_value(scn.params.threat_persistence)}",
        "",
        "[algorithm]",
        f"n_scp = {_toml_value(scn.n_scp)}",
        f"n_ibr = {_toml_value(scn.n_ibr)}",
        f"w_vc = {_toml_value(scn.weights.w_vc)}",
        f"w_tr = {_toml_value(scn.weights.w_tr)}",
        f"eps_vc = {_toml_value(scn.weights.eps_vc)}",
        f"eps_tr = {_toml_value(scn.weights.eps_tr)}",
        f"evasion_memory = {_toml_value(scn.evasion_memory)}",
        f"guidance_threats = {_toml_value(scn.guidance_threats)}",
    ]
    if scn.atmosphere_paths:
        lines += ["", "[atmosphere]"]
        for key, val in sorted(scn.atmosphere_paths.items()):
            lines.append(f"{key} = {_toml_value(val)}")
    for p in scn.players:
        lines += [
            "",
            "[[players]]",
            f"name = {_toml_value(p.name)}",
            f"role = {_toml_value(p.role)}",
            f"mass_slugs = {_toml_value(p.mass)}",
            f"ref_area_ft2 = {_toml_value(p.ref_area)}",
            f"u_max_g = {_toml_value(p.u_max_g)}",
            f"mach_min = {_toml_value(p.mach_min)}",
            f"node_count = {_toml_value(p.node_count)}",
            f"position_ft = {_toml_value(p.x0[:3])}",
            f"velocity_fts = {_toml_value(p.x0[3:6])}",
        ]
    Path(path).write_text("\n".join(lines) + "\n")


def bundled_scenario_path(name: str) -> Path:
    """Path of a scenario shipped with the package (e.g. 'example1')."""
    return Path(resources.files("assetguard").joinpath("scenarios", f"{name}.toml"))
