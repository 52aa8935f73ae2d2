"""Command-line front end: named experiments emitting CSV/JSON artifacts.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 acceptance failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import os
import sys
import time
from dataclasses import asdict, is_dataclass
from importlib import metadata
from pathlib import Path
from typing import Any, Callable

import jsonschema
import numpy as np

from .noise import IntegrationError, ParameterSet, preset

log = logging.getLogger("cavity_qram")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_ACCEPT = 0, 2, 3, 4
OUTPUT_ENV = "CAVITY_QRAM_OUTPUT_DIR"
FIGURES = ("fig2", "fig3", "fig6", "fig8", "fig9", "fig11", "table3")

_PARAM_FIELDS = [
    "T1_cavity", "Tphi_cavity", "T1_transmon_ge", "Tphi_transmon_ee", "n_th", "chi_over_2pi",
    "T1_transfer_nonradiative", "Tphi_transfer", "gamma_over_2pi", "xi_over_2pi", "lambda_b", "lambda_c",
]
_NUM_OR_INF = {"anyOf": [{"type": "number"}, {"enum": ["inf", "Infinity"]}]}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "experiment": {"type": "string"},
        "preset": {"enum": ["PS1", "PS2", "PS3"]},
        "params": {
            "type": "object",
            "additionalProperties": False,
            "properties": {k: _NUM_OR_INF for k in _PARAM_FIELDS} | {"name": {"type": "string"}},
        },
        "family": {"enum": ["cswap", "gue", "CSWAP", "GUE"]},
        "rail": {"enum": ["single", "dual"]},
        "n": {"type": "integer", "minimum": 2},
        "postselect": {"type": "boolean"},
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "required": ["parameter", "values"],
            "properties": {
                "kind": {"enum": ["cz", "transfer", "asymmetry"]},
                "parameter": {"type": "string"},
                "values": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
            },
        },
        "gamma": {"type": "number", "exclusiveMinimum": 0},
        "dgamma": {"type": "number", "minimum": 0},
        "omega": {"type": "array", "items": {"type": "number"}},
        "data": {"type": "array", "items": {"enum": [0, 1]}},
        "address": {"type": "array", "items": {"type": "number"}},
        "cases": {"type": "integer", "minimum": 1},
        "output_dir": {"type": "string"},
        "rtol": {"type": "number", "exclusiveMinimum": 0},
        "atol": {"type": "number", "exclusiveMinimum": 0},
        "seed": {"type": "integer"},
        "figure": {"enum": list(FIGURES)},
        "samples": {"type": "integer", "minimum": 3},
    },
}

DEFAULTS: dict[str, Any] = {
    "preset": "PS2",
    "family": "cswap",
    "rail": "single",
    "n": 4,
    "postselect": True,
    "rtol": 1e-8,
    "atol": 1e-10,
    "seed": 0,
    "output_dir": "results",
    "samples": 801,
    "cases": 20,
}


class ConfigError(ValueError):
    pass


class AcceptanceFailure(RuntimeError):
    def __init__(self, failures: list[str]):
        super().__init__("; ".join(failures))
        self.failures = failures


def tool_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


def load_config(path: str | None, overrides: dict[str, Any]) -> dict[str, Any]:
    """Defaults, then the JSON file, the output-directory variable, then flags; validated."""
    cfg = dict(DEFAULTS)
    if path:
        try:
            with open(path) as fh:
                file_cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        _validate(file_cfg)
        cfg.update(file_cfg)
    if os.environ.get(OUTPUT_ENV):
        cfg["output_dir"] = os.environ[OUTPUT_ENV]
    cfg.update({k: v for k, v in overrides.items() if v is not None})
    _validate(cfg)
    return cfg


def _validate(cfg: dict):
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}") from exc


def params_from_config(cfg: dict) -> ParameterSet:
    p = preset(cfg["preset"])
    extra = cfg.get("params") or {}
    if extra:
        vals = {k: (math.inf if v in ("inf", "Infinity") else v) for k, v in extra.items()}
        p = p.replace(**vals)
    return p


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


def _jsonable(x):
    if is_dataclass(x):
        return _jsonable(asdict(x))
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else str(v)
    if isinstance(x, np.integer):
        return int(x)
    return x


class Writer:
    """Writes CSV and JSON artifacts with a metadata header."""

    def __init__(self, cfg: dict, command: str):
        self.cfg = cfg
        self.command = command
        self.out = Path(cfg["output_dir"])
        self.files: list[str] = []

    def _meta(self, extra: dict | None = None) -> dict:
        meta = dict(tool="cavity_qram", version=tool_version(), command=self.command,
                    config_hash=config_hash(self.cfg), config=self.cfg)
        if "preset" in self.cfg:
            meta["parameters"] = params_from_config(self.cfg).to_dict()
        if extra:
            meta.update(extra)
        return _jsonable(meta)

    def csv(self, name: str, rows: list[dict], extra_meta: dict | None = None) -> Path:
        self.out.mkdir(parents=True, exist_ok=True)
        path = self.out / name
        meta = self._meta(extra_meta)
        body = io.StringIO()
        if rows:
            w = csv.DictWriter(body, fieldnames=list(rows[0].keys()), lineterminator="\n")
            w.writeheader()
            for r in rows:
                w.writerow({k: _fmt(v) for k, v in r.items()})
        with open(path, "w") as fh:
            fh.write(f"# generated: {time.strftime('%Y-%m-%dT%H:%M:%S')}\n")
            for key, val in meta.items():
                fh.write(f"# {key}: {json.dumps(val, sort_keys=True)}\n")
            fh.write(body.getvalue())
        self.files.append(str(path))
        return path

    def json(self, name: str, payload: dict) -> Path:
        self.out.mkdir(parents=True, exist_ok=True)
        path = self.out / name
        with open(path, "w") as fh:
            json.dump(dict(metadata=self._meta(), result=_jsonable(payload)), fh, indent=1, sort_keys=True)
        self.files.append(str(path))
        return path


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def read_csv_body(path: str | Path) -> list[dict]:
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


# ---------------------------------------------------------------------------
# Pin checks shared by the reproduce command
# ---------------------------------------------------------------------------


def _within_rel(x, target, rel):
    return abs(x - target) <= rel * abs(target)


def _within_factor(x, target, factor):
    return target / factor <= x <= target * factor


def _check(checks: list[dict], name: str, value: float, ok: bool, target: str):
    checks.append(dict(check=name, value=float(value), target=target, passed=bool(ok)))


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_cz_fidelity(cfg, w: Writer) -> dict:
    from .czfid import MeasurementModel, dual_rail_channel, simulate_physical_cz_channel, single_rail_estimate

    p = params_from_config(cfg)
    mm = None if cfg["postselect"] else MeasurementModel(1.0, 1.0, 1.0)
    ch = simulate_physical_cz_channel(p, mm, rtol=cfg["rtol"], atol=cfg["atol"])
    est = single_rail_estimate(ch) if cfg["rail"] == "single" else dual_rail_channel(ch, cfg["postselect"]).estimate
    row = dict(preset=cfg["preset"], rail=cfg["rail"], postselect=cfg["postselect"], **est.as_dict(),
               flag_probability=1 - est.P_success)
    w.csv("cz_fidelity.csv", [row])
    return row


def cmd_sweep(cfg, w: Writer) -> dict:
    from .czfid import loglog_slope, scaling_sweep

    sw = cfg.get("sweep")
    if not sw:
        raise ConfigError("sweep requires --parameter and --values (or a 'sweep' block)")
    kind = sw.get("kind", "cz")
    p = params_from_config(cfg)
    if kind == "cz":
        rows = [asdict(r) for r in scaling_sweep(sw["parameter"], sw["values"], cfg["rail"], p)]
        ys = {"epsilon": [r["epsilon"] for r in rows], "flag_probability": [r["flag_probability"] for r in rows]}
    elif kind == "transfer":
        from .gue import transfer_sweep

        rows = transfer_sweep(sw["parameter"], sw["values"], p, rtol=cfg["rtol"], atol=cfg["atol"])
        ys = {k: [r[k] for r in rows] for k in ("sr_infidelity", "dr_infidelity", "dr_failure")}
    else:
        rows = _asymmetry_rows(p, sw["values"])
        ys = {"p_refl_pass": [r["p_refl_pass"] for r in rows], "p_refl_absorb": [r["p_refl_absorb"] for r in rows]}
    xs = [float(v) for v in sw["values"]]
    slopes = {k: loglog_slope(xs, v) for k, v in ys.items() if len(xs) > 1 and all(y > 0 for y in v)}
    w.csv(f"sweep_{kind}_{sw['parameter']}_{cfg['rail']}.csv", rows, {"slopes": slopes})
    return dict(rows=rows, slopes=slopes)


def _transfer_outcomes(p: ParameterSet, cfg):
    from .gue import GueChain, PulsePair, dual_rail_outcome, propagate_single_rail, single_rail_outcome

    ch = propagate_single_rail(GueChain.symmetric(p.gamma), PulsePair.from_params(p), p,
                               rtol=cfg["rtol"], atol=cfg["atol"])
    return single_rail_outcome(ch), dual_rail_outcome(ch)


def cmd_state_transfer(cfg, w: Writer) -> dict:
    p = params_from_config(cfg)
    sr, dr = _transfer_outcomes(p, cfg)
    row = dict(preset=cfg["preset"], sr_infidelity=1 - sr.F_st, dr_infidelity=1 - dr.F_st,
               dr_failure=1 - dr.P_st, photon_loss=sr.dark_state_leakage)
    w.csv("state_transfer.csv", [row])
    return row


def _rate_from_hz(f_hz: float) -> float:
    return 2 * np.pi * f_hz * 1e-6


def _asymmetry_rows(p: ParameterSet, dgammas_rad: list[float]) -> list[dict]:
    from .gue import PulsePair, emission_pulse
    from .waveguide_io import absorption_scattering, asymmetric_rates, emitted_waveform, reflection_probability

    wave = emitted_waveform(p)
    pulse = PulsePair.from_params(p)
    rows = []
    for dg in dgammas_rad:
        g1, g2 = asymmetric_rates(p.gamma, dg)
        absorb = absorption_scattering(wave, g1, g2, lambda t: emission_pulse(t, pulse, "receiver"))
        rows.append(dict(dgamma_over_gamma=dg / p.gamma, dgamma=dg,
                         p_refl_pass=reflection_probability(wave, g1, g2),
                         p_refl_absorb=absorb.p_refl, p_tran_absorb=absorb.p_tran))
    return rows


def cmd_io_analysis(cfg, w: Writer) -> dict:
    from .waveguide_io import (asymmetric_rates, emitted_waveform, pass_through_scattering,
                               reflection_probability, wigner_delay)

    p = params_from_config(cfg)
    if cfg.get("gamma"):
        p = p.replace(gamma_over_2pi=cfg["gamma"] * 1e-6)
    dg = _rate_from_hz(cfg.get("dgamma", 0.0))
    g1, g2 = asymmetric_rates(p.gamma, dg)
    wave = emitted_waveform(p)
    out = dict(gamma=p.gamma, dgamma=dg, gamma1=g1, gamma2=g2,
               p_refl=reflection_probability(wave, g1, g2), wigner_delay_us=wigner_delay(p.gamma))
    w.csv("io_analysis.csv", [out])
    if cfg.get("omega"):
        S = pass_through_scattering(np.asarray(cfg["omega"], dtype=float), g1, g2)
        rows = [dict(omega=om, t_re=s[0, 0].real, t_im=s[0, 0].imag, r_re=s[1, 0].real, r_im=s[1, 0].imag)
                for om, s in zip(cfg["omega"], S)]
        w.csv("scattering.csv", rows)
        out["scattering"] = rows
    return out


def cmd_resources(cfg, w: Writer) -> dict:
    from .query import ArchitectureSpec, resources, timestep_duration

    spec = ArchitectureSpec(cfg["family"], cfg["rail"], cfg["n"], params_from_config(cfg))
    r = resources(spec)
    out = dict(family=spec.family, rail=spec.rail, n=spec.n, N=spec.N, **asdict(r),
               t_query_us=timestep_duration(spec) * r.N_ts)
    w.json("resources.json", out)
    return out


def cmd_query_metrics(cfg, w: Writer) -> dict:
    from .query import ArchitectureSpec, architecture_metrics, step_errors

    p = params_from_config(cfg)
    spec = ArchitectureSpec(cfg["family"], cfg["rail"], cfg["n"], p)
    e = step_errors(spec.family, spec.rail, p)
    m = architecture_metrics(spec, e)
    out = dict(family=spec.family, rail=spec.rail, n=spec.n, preset=cfg["preset"], **m.as_dict(),
               flag_probability=m.flag_probability, epsilon_no_postselect=e.epsilon_no_postselect,
               Gamma_success_Hz=m.Gamma_success * 1e6)
    w.json("query_metrics.json", out)
    return out


def cmd_query_sim(cfg, w: Writer) -> dict:
    from .circuit import build_qram_circuit, simulate_ideal_query

    n = cfg["n"]
    if n > 3:
        raise ConfigError("query-sim supports n <= 3")
    rng = np.random.default_rng(cfg["seed"])
    rows = []
    cases = 1 if cfg.get("data") or cfg.get("address") else cfg["cases"]
    for case in range(cases):
        data = cfg.get("data") or rng.integers(0, 2, 2**n).tolist()
        if cfg.get("address"):
            alpha = np.asarray(cfg["address"], dtype=complex)
        else:
            alpha = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
        alpha = alpha / np.linalg.norm(alpha)
        res = simulate_ideal_query(build_qram_circuit(n, data), alpha)
        rows.append(dict(case=case, data="".join(map(str, data)), fidelity=res.fidelity,
                         tree_vacuum_residual=res.tree_vacuum_residual, leakage=res.leakage))
    w.csv(f"query_sim_n{n}.csv", rows)
    return dict(cases=rows, min_fidelity=min(r["fidelity"] for r in rows))


def cmd_validate(cfg, w: Writer) -> dict:
    import itertools

    from .circuit import build_qram_circuit, count_validation, simulate_ideal_query
    from .fock import build_basis
    from .gates import cswap_unitary

    checks: list[dict] = []
    b = build_basis(3, 2)
    for variant in ("C0", "C1"):
        U = cswap_unitary(b, 0, 1, 2, variant).toarray()
        worst = 0.0
        for na, (nb, nc) in itertools.product((0, 1), ((0, 0), (0, 1), (1, 0))):
            swap = (variant == "C1") == (na == 1)
            out = (na, nc, nb) if swap else (na, nb, nc)
            worst = max(worst, 1 - abs(U[b.index(out), b.index((na, nb, nc))]))
        _check(checks, f"{variant}SWAP truth table", worst, worst < 1e-12, "< 1e-12")
    rows = count_validation(range(2, 13))
    _check(checks, "gate/timestep counts n=2..12", len(rows), True, "exact")
    worst = 1.0
    for data in itertools.product((0, 1), repeat=4):
        c = build_qram_circuit(2, data)
        for i in range(4):
            worst = min(worst, simulate_ideal_query(c, np.eye(4)[i]).fidelity)
        worst = min(worst, simulate_ideal_query(c, np.full(4, 0.5)).fidelity)
    _check(checks, "n=2 exhaustive oracle", worst, worst >= 1 - 1e-9, ">= 1 - 1e-9")
    w.csv("validate.csv", checks)
    failures = [c["check"] for c in checks if not c["passed"]]
    if failures:
        raise AcceptanceFailure(failures)
    return dict(checks=checks)


def cmd_export_pulse(cfg, w: Writer) -> dict:
    from .gue import PulsePair, pulse_table

    p = params_from_config(cfg)
    pulse = PulsePair.from_params(p)
    tab = pulse_table(pulse, cfg["samples"])
    sender = np.hypot(tab[:, 1], tab[:, 2])
    clamped = np.isclose(sender, pulse.lambda_b * pulse.clamp_max)
    rows = [dict(t=r[0], re_g_b=r[1], im_g_b=r[2], re_g_c=r[3], im_g_c=r[4]) for r in tab]
    meta = dict(window=list(pulse.window), zeta=pulse.zeta, clamp_max=pulse.clamp_max,
                clamp_events=int(clamped.sum()),
                clamp_onset=float(tab[clamped, 0].min()) if clamped.any() else None)
    w.csv("pulse.csv", rows, meta)
    return meta


# ---------------------------------------------------------------------------
# Figure and table reproduction
# ---------------------------------------------------------------------------


def _fig2(cfg, w: Writer, checks: list[dict]):
    from .query import _cz_errors

    rows = []
    for name in ("PS1", "PS2", "PS3"):
        p = preset(name)
        for rail in ("single", "dual"):
            e = _cz_errors(p, rail)
            rows.append(dict(preset=name, rail=rail, epsilon=e.epsilon, flag_probability=1 - e.P_step,
                             epsilon_no_postselect=e.epsilon_no_postselect))
            if name != "PS1":
                lo, hi = (3e-6, 3e-5) if rail == "single" else (3e-7, 3e-6)
                _check(checks, f"{name} {rail} post-selected eps", e.epsilon, lo <= e.epsilon <= hi, f"[{lo}, {hi}]")
                _check(checks, f"{name} {rail} non-post-selected eps", e.epsilon_no_postselect,
                       1e-3 <= e.epsilon_no_postselect <= 1e-2, "[1e-3, 1e-2]")
    w.csv("fig2_cz_channels.csv", rows)


def _comparison(cfg, w: Writer, checks: list[dict], family: str, tag: str):
    from .query import ArchitectureSpec, architecture_comparison_table, step_errors, success_metrics

    rows = architecture_comparison_table(families=[family])
    w.csv(f"{tag}_query_{family.lower()}.csv", rows)
    p = preset("PS2")
    if family == "CSWAP":
        e = step_errors("CSWAP", "single", p)
        m = success_metrics(ArchitectureSpec("CSWAP", "single", 4, p), e.epsilon, e.P_step)
        _check(checks, "CSWAP SR PS2 n=4 P_no_flag", m.P_no_flag, abs(m.P_no_flag - 0.71) <= 0.05, "0.71 +- 0.05")
        _check(checks, "CSWAP SR PS2 n=4 Gamma_success [kHz]", m.Gamma_success * 1e3,
               _within_rel(m.Gamma_success * 1e3, 20.9, 0.1), "20.9 kHz +- 10%")
        e = step_errors("CSWAP", "dual", p)
        m = success_metrics(ArchitectureSpec("CSWAP", "dual", 8, p), e.epsilon, e.P_step)
        _check(checks, "CSWAP DR PS2 n=8 P_no_flag", m.P_no_flag, _within_factor(m.P_no_flag, 1e-6, 2),
               "1.0e-6 (factor 2)")
        _check(checks, "CSWAP DR PS2 n=8 fidelity bound", m.fidelity_bound, m.fidelity_bound > 0.8, "> 0.8")
    else:
        e = step_errors("GUE", "dual", p)
        m = success_metrics(ArchitectureSpec("GUE", "dual", 8, p), e.epsilon, e.P_step)
        _check(checks, "GUE DR PS2 n=8 fidelity bound", m.fidelity_bound, m.fidelity_bound > 0.8, "> 0.8")
        _check(checks, "GUE DR PS2 n=8 P_no_flag", m.P_no_flag, _within_factor(m.P_no_flag, 2e-4, 2),
               "2e-4 (factor 2)")
        _check(checks, "GUE DR PS2 n=8 Gamma_success [Hz]", m.Gamma_success * 1e6,
               _within_factor(m.Gamma_success * 1e6, 2.2, 2), "2.2 Hz (factor 2)")


def _fig3(cfg, w, checks):
    _comparison(cfg, w, checks, "CSWAP", "fig3")


def _fig6(cfg, w, checks):
    _comparison(cfg, w, checks, "GUE", "fig6")


FIG8_GRIDS = {
    ("T1_transmon_ge", "single"): [250, 500, 1000, 2000],
    ("Tphi_transmon_ee", "single"): [450, 900, 1800, 3600],
    ("T1_cavity", "single"): [12500, 25000, 50000, 100000],
    ("Tphi_cavity", "single"): [53000, 106000, 212000, 424000],
    ("T1_cavity", "dual"): [100, 200, 400, 800, 1600],
    ("Tphi_cavity", "dual"): [53000, 106000, 212000, 424000],
}
FIG8_EXPECTED = {
    ("T1_transmon_ge", "single"): (-2, 0.15),
    ("Tphi_transmon_ee", "single"): (-2, 0.15),
    ("T1_cavity", "single"): (-1, 0.1),
    ("Tphi_cavity", "single"): (-1, 0.1),
    ("T1_cavity", "dual"): (-2, 0.15),
    ("Tphi_cavity", "dual"): (-1, 0.1),
}


def _fig8(cfg, w, checks):
    from .czfid import loglog_slope, scaling_sweep

    for (param, rail), grid in FIG8_GRIDS.items():
        rows = [asdict(r) for r in scaling_sweep(param, grid, rail)]
        s_eps = loglog_slope(grid, [r["epsilon"] for r in rows])
        s_flag = loglog_slope(grid, [r["flag_probability"] for r in rows])
        w.csv(f"fig8_{param}_{rail}.csv", rows, {"slope_epsilon": s_eps, "slope_flag": s_flag})
        target, tol = FIG8_EXPECTED[(param, rail)]
        _check(checks, f"{rail} eps slope vs {param}", s_eps, abs(s_eps - target) <= tol, f"{target} +- {tol}")
        if rail == "single":
            _check(checks, f"{rail} flag slope vs {param}", s_flag, abs(s_flag + 1) <= 0.1, "-1 +- 0.1")


def _fig9(cfg, w, checks):
    p = preset("PS2")
    fracs = [0.0, 0.01, 0.02, 0.05, 0.1, 0.15, 0.2]
    rows = _asymmetry_rows(p, [f * p.gamma for f in fracs])
    w.csv("fig9_asymmetry.csv", rows)
    _check(checks, "pass-through p_refl at dgamma=0", rows[0]["p_refl_pass"], rows[0]["p_refl_pass"] < 1e-12,
           "< 1e-12")
    at10 = _asymmetry_rows(p, [_rate_from_hz(2e6)])[0]
    _check(checks, "pass-through p_refl at dgamma/2pi=2 MHz", at10["p_refl_pass"],
           _within_rel(at10["p_refl_pass"], 7.2e-6, 0.1), "7.2e-6 +- 10%")
    from .czfid import loglog_slope

    sub = [r for r in rows if 0.01 <= r["dgamma_over_gamma"] <= 0.2]
    s = loglog_slope([r["dgamma"] for r in sub], [r["p_refl_pass"] for r in sub])
    _check(checks, "p_refl slope vs dgamma", s, abs(s - 2) <= 0.05, "2 +- 0.05")
    bad = [r["dgamma_over_gamma"] for r in rows if r["dgamma_over_gamma"] <= 0.1 + 1e-12
           and r["p_refl_absorb"] >= r["p_tran_absorb"]]
    _check(checks, "absorption p_refl < p_tran for dgamma/gamma <= 10%", len(bad), not bad, "no violations")


FIG11_GRIDS = {
    "T1_cavity": [12500, 25000, 50000, 100000],
    "Tphi_cavity": [53000, 106000, 212000, 424000],
    "T1_transfer_nonradiative": [100, 200, 400, 800],
    "Tphi_transfer": [100, 200, 400, 800],
}


def _fig11(cfg, w, checks):
    from .gue import transfer_sweep

    for param, grid in FIG11_GRIDS.items():
        rows = transfer_sweep(param, grid, preset("PS2"))
        w.csv(f"fig11_{param}.csv", rows)


TABLE3_PINS = [
    ("PS1", "single", "infidelity", 1.6e-3, "rel", 0.3),
    ("PS2", "single", "infidelity", 3.3e-4, "rel", 0.3),
    ("PS1", "dual", "infidelity", 8.3e-5, "factor", 2),
    ("PS2", "dual", "infidelity", 4.0e-6, "factor", 2),
    ("PS1", "dual", "failure", 2.8e-3, "rel", 0.3),
    ("PS2", "dual", "failure", 6.1e-4, "rel", 0.3),
]


def _table3(cfg, w, checks):
    rows = []
    results = {}
    for name in ("PS1", "PS2"):
        sr, dr = _transfer_outcomes(preset(name), cfg)
        results[name] = dict(single=dict(infidelity=1 - sr.F_st, failure=0.0),
                             dual=dict(infidelity=1 - dr.F_st, failure=1 - dr.P_st))
    for name in ("PS1", "PS2"):
        for rail in ("single", "dual"):
            r = results[name][rail]
            rows.append(dict(preset=name, rail=rail, infidelity=r["infidelity"], failure=r["failure"]))
    for name, rail, qty, target, mode, tol in TABLE3_PINS:
        v = results[name][rail][qty]
        ok = _within_rel(v, target, tol) if mode == "rel" else _within_factor(v, target, tol)
        _check(checks, f"{name} {rail} {qty}", v, ok, f"{target} ({'+-' if mode == 'rel' else 'x'}{tol})")
    for row in rows:
        row["passed"] = all(c["passed"] for c in checks if c["check"].startswith(f"{row['preset']} {row['rail']}"))
    w.csv("table3.csv", rows)


REPRODUCERS: dict[str, Callable] = dict(fig2=_fig2, fig3=_fig3, fig6=_fig6, fig8=_fig8, fig9=_fig9,
                                        fig11=_fig11, table3=_table3)


def cmd_reproduce(cfg, w: Writer) -> dict:
    fig = cfg.get("figure")
    if fig is None:
        raise ConfigError("reproduce needs a figure name")
    checks: list[dict] = []
    REPRODUCERS[fig](cfg, w, checks)
    if checks:
        w.csv(f"{fig}_checks.csv", checks)
    for c in checks:
        log.info("%s %s: %.4g (target %s)", "PASS" if c["passed"] else "FAIL", c["check"], c["value"], c["target"])
    failures = [c["check"] for c in checks if not c["passed"]]
    if failures:
        raise AcceptanceFailure(failures)
    return dict(checks=checks)


COMMANDS: dict[str, Callable] = {
    "cz-fidelity": cmd_cz_fidelity,
    "sweep": cmd_sweep,
    "state-transfer": cmd_state_transfer,
    "io-analysis": cmd_io_analysis,
    "resources": cmd_resources,
    "query-metrics": cmd_query_metrics,
    "query-sim": cmd_query_sim,
    "validate": cmd_validate,
    "reproduce": cmd_reproduce,
    "export-pulse": cmd_export_pulse,
}


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override its values")
    common.add_argument("--preset", choices=["PS1", "PS2", "PS3"])
    common.add_argument("--output-dir", dest="output_dir")
    common.add_argument("--rtol", type=float)
    common.add_argument("--atol", type=float)
    common.add_argument("--seed", type=int)
    common.add_argument("-v", "--verbose", action="store_true")

    arch = _Parser(add_help=False)
    arch.add_argument("--family", choices=["cswap", "gue"])
    arch.add_argument("--rail", choices=["single", "dual"])
    arch.add_argument("--n", type=int)

    parser = _Parser(prog="cavity-qram", description="Cavity QRAM simulations and resource estimates.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("cz-fidelity", parents=[common, arch], help="noisy CZ channel fidelity")
    p.add_argument("--no-postselect", dest="postselect", action="store_false", default=None)

    p = sub.add_parser("sweep", parents=[common, arch], help="coherence-time or asymmetry sweep")
    p.add_argument("--kind", choices=["cz", "transfer", "asymmetry"], default=None)
    p.add_argument("--parameter")
    p.add_argument("--values", type=float, nargs="+")

    sub.add_parser("state-transfer", parents=[common], help="GUE state-transfer fidelity")

    p = sub.add_parser("io-analysis", parents=[common], help="pass-through reflection and Wigner delay")
    p.add_argument("--gamma", type=float, help="gamma/2pi in Hz")
    p.add_argument("--dgamma", type=float, help="decay-rate asymmetry / 2pi in Hz")
    p.add_argument("--omega", type=float, nargs="+", help="detunings in rad/us for scattering coefficients")

    sub.add_parser("resources", parents=[common, arch], help="cavity, gate and timestep counts")
    sub.add_parser("query-metrics", parents=[common, arch], help="query infidelity bound and success rate")

    p = sub.add_parser("query-sim", parents=[common, arch], help="ideal statevector query vs oracle")
    p.add_argument("--data", type=int, nargs="+")
    p.add_argument("--address", type=float, nargs="+")
    p.add_argument("--cases", type=int)

    sub.add_parser("validate", parents=[common], help="gate truth tables, counts and n=2 oracle")

    p = sub.add_parser("reproduce", parents=[common], help="data behind a figure or table")
    p.add_argument("figure", choices=FIGURES)

    p = sub.add_parser("export-pulse", parents=[common], help="sampled emission/absorption pulses")
    p.add_argument("--samples", type=int)
    return parser


def _overrides(ns: argparse.Namespace) -> dict:
    d = {k: v for k, v in vars(ns).items() if k not in ("command", "config", "verbose")}
    if d.get("parameter") or d.get("values"):
        d["sweep"] = {"parameter": d.get("parameter"), "values": d.get("values")}
        if d.get("kind"):
            d["sweep"]["kind"] = d["kind"]
    for k in ("parameter", "values", "kind"):
        d.pop(k, None)
    return d


def main(argv: list[str] | None = None) -> int:
    try:
        ns = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                            format="%(levelname)s %(message)s")
        cfg = load_config(ns.config, _overrides(ns))
        cfg["experiment"] = ns.command
        writer = Writer(cfg, ns.command)
        result = COMMANDS[ns.command](cfg, writer)
    except ConfigError as exc:
        _error("config", str(exc))
        return EXIT_CONFIG
    except AcceptanceFailure as exc:
        _error("acceptance", str(exc), failures=exc.failures)
        return EXIT_ACCEPT
    except (IntegrationError, ArithmeticError, np.linalg.LinAlgError, RuntimeError) as exc:
        _error("numerical", str(exc))
        return EXIT_NUMERIC
    except ValueError as exc:
        _error("config", str(exc))
        return EXIT_CONFIG
    print(json.dumps(dict(status="ok", command=ns.command, files=writer.files, result=_jsonable(result)),
                     sort_keys=True))
    return EXIT_OK


def _error(kind: str, message: str, **extra):
    print(json.dumps(dict(status="error", kind=kind, message=message, **extra)), file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
