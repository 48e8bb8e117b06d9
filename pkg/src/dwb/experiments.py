"""Evaluation drivers: beampatterns, power sweeps and end-to-end deception runs."""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import svgplot
from .beamformer import DwbProblem, constraint_residuals, solve_dwb, solve_nulling
from .config import ScenarioConfig, trial_rng
from .qp_core import RankDeficientError
from .radar import (SymbolKnowledge, collect_frame, find_peak, range_doppler_map, remove_symbols,
                    write_map_csv)
from .signal_model import (ArrayGeometry, Bearings, ChannelRealization, ofdm_demod, qam_nearest,
                           simulate_rx, steering_matrix, steering_vector, SPEED_OF_LIGHT)

log = logging.getLogger(__name__)

POWER_SWEEP_HEADER = ["trial_id", "n_t", "n_c", "n_e", "snr_db", "dwb_power_w",
                      "dwb_relaxed_power_w", "nulling_power_w", "errors", "seed"]
ARRAY_RESPONSE_HEADER = ["angle_deg", "magnitude_db", "scheme"]
SUMMARY_HEADER = ["n_t", "n_c", "n_e", "snr_db", "n_ok", "errors",
                  "dwb_mean_w", "dwb_ci95_w", "dwb_relaxed_mean_w", "dwb_relaxed_ci95_w",
                  "nulling_mean_w", "nulling_ci95_w", "saving_pct"]

MIN_SEPARATION_DEG = 2.0


@dataclass
class ArrayResponse:
    angles_rad: np.ndarray
    magnitude_db: np.ndarray

    @property
    def angles_deg(self) -> np.ndarray:
        return np.rad2deg(self.angles_rad)


@dataclass
class TrialRecord:
    trial_id: int
    n_t: int
    n_c: int
    n_e: int
    snr_db: float
    dwb_power_w: float
    nulling_power_w: float
    dwb_relaxed_power_w: float
    psl_db_dwb: float = math.nan
    psl_db_nulling: float = math.nan
    deception_range_err_m: float = math.nan
    deception_doppler_err_hz: float = math.nan
    seed: int = 0
    errors: int = 0
    comm_residual: float = math.nan


def default_angle_grid(step_deg: float = 0.25) -> np.ndarray:
    n = int(round(180.0 / step_deg)) + 1
    return np.deg2rad(np.linspace(0.0, 180.0, n))


def array_response(S, geometry: ArrayGeometry, angle_grid=None) -> ArrayResponse:
    """Radiated pattern ``|a(theta)^T s_1|`` of the first time sample, peak at 0 dB."""
    angle_grid = default_angle_grid() if angle_grid is None else np.asarray(angle_grid, float)
    s1 = np.asarray(S)[:, 0]
    if not np.any(s1):
        raise ValueError("first column of S is zero; pattern undefined")
    B = np.abs(steering_matrix(geometry, angle_grid) @ s1)
    with np.errstate(divide="ignore"):
        db = 20 * np.log10(B / B.max())
    return ArrayResponse(angle_grid, np.maximum(db, -400.0))


def _local_maxima(m: np.ndarray) -> np.ndarray:
    n = m.size
    idx = []
    for i in range(n):
        left = m[i - 1] if i > 0 else -np.inf
        right = m[i + 1] if i < n - 1 else -np.inf
        if m[i] >= left and m[i] >= right and (m[i] > left or m[i] > right):
            idx.append(i)
    return np.array(idx, dtype=int)


def psl_db(response: ArrayResponse) -> float:
    """Main peak minus largest sidelobe, in dB; ``inf`` without sidelobes.

    The main lobe is the contiguous region around the peak that stays within
    3 dB of it; any local maximum outside it counts as a sidelobe.
    """
    m = np.asarray(response.magnitude_db, float)
    k = int(np.argmax(m))
    lo = k
    while lo > 0 and m[lo - 1] >= m[k] - 3.0:
        lo -= 1
    hi = k
    while hi < m.size - 1 and m[hi + 1] >= m[k] - 3.0:
        hi += 1
    peaks = [i for i in _local_maxima(m) if i < lo or i > hi]
    if not peaks:
        return math.inf
    return float(m[k] - max(m[i] for i in peaks))


def random_topology(rng: np.random.Generator, n_c: int, n_e: int,
                    min_separation_deg: float = MIN_SEPARATION_DEG, max_tries: int = 1000):
    """Uniform bearings in [0, 180] deg and distances in [1, 100] m.

    Draws are repeated until all bearings are at least ``min_separation_deg``
    apart. Returns ``(bearings, comm_distances_m, eve_distances_m)``.
    """
    if n_c < 0 or n_e < 0:
        raise ValueError("counts must be non-negative")
    n = n_c + n_e
    for _ in range(max_tries):
        ang = rng.uniform(0.0, 180.0, n)
        if n < 2 or np.min(np.diff(np.sort(ang))) >= min_separation_deg:
            break
    else:
        raise RuntimeError(f"could not place {n} bearings {min_separation_deg} deg apart")
    dist = rng.uniform(1.0, 100.0, n)
    return Bearings.from_degrees(ang[:n_c], ang[n_c:]), dist[:n_c], dist[n_c:]


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    return "nan" if math.isnan(x) else repr(x)


def _sweep_points(config: ScenarioConfig):
    for n_t in config.sweep.n_t:
        for n_c in config.sweep.n_c:
            for n_e in config.sweep.n_e:
                for snr in config.snr_sweep:
                    yield int(n_t), int(n_c), int(n_e), float(snr)


def run_trial(config: ScenarioConfig, trial_id: int) -> List[TrialRecord]:
    """One random topology, solved at every sweep point (paired comparison)."""
    rng = trial_rng(config.seed, trial_id)
    max_c, max_e = max(config.sweep.n_c), max(config.sweep.n_e)
    bearings, _, _ = random_topology(rng, max_c, max_e)
    grid = config.ofdm_grid()
    const = config.constellation()
    comm = const.random_symbols(rng, (max_c, grid.n_subcarriers))
    records = []
    for n_t, n_c, n_e, snr in _sweep_points(config):
        if n_c + n_e == 0:
            continue
        b = Bearings(bearings.comm_angles_rad[:n_c], bearings.eve_angles_rad[:n_e])
        problem = DwbProblem(config.geometry(n_t), b, grid, const, config.spoof_profile(),
                             comm[:n_c], snr, config.noise_var, 0)
        rec = TrialRecord(trial_id, n_t, n_c, n_e, snr, math.nan, math.nan, math.nan, seed=config.seed)
        try:
            dwb = solve_dwb(problem, tol=config.solver.tol, max_iter=config.solver.max_iter,
                            resolve_after_rounding=config.solver.resolve_after_rounding)
            null = solve_nulling(problem)
        except RankDeficientError as exc:
            log.debug("trial %d point %s failed: %s", trial_id, (n_t, n_c, n_e, snr), exc)
            rec.errors = 1
        else:
            rec.dwb_power_w = dwb.power_w
            rec.dwb_relaxed_power_w = dwb.relaxed_power_w
            rec.nulling_power_w = null.power_w
            rec.comm_residual = max(constraint_residuals(problem, dwb.tx_signal, None)[0],
                                    constraint_residuals(problem, null.tx_signal, None)[0])
            if n_c:
                rec.psl_db_dwb = psl_db(array_response(dwb.tx_signal, problem.geometry))
                rec.psl_db_nulling = psl_db(array_response(null.tx_signal, problem.geometry))
        records.append(rec)
    return records


def power_sweep(config: ScenarioConfig, out_dir=None, write_plot: bool = True) -> List[TrialRecord]:
    """Monte-Carlo power comparison of DWB against nulling.

    Writes ``power_sweep.csv`` (one row per trial and sweep point, sorted by
    trial), ``power_sweep_summary.csv`` and optionally ``power_sweep.svg``.
    """
    records: List[TrialRecord] = []
    for t in range(config.n_trials):
        records.extend(run_trial(config, t))
        if (t + 1) % 10 == 0:
            log.info("power sweep: %d/%d trials", t + 1, config.n_trials)
    records.sort(key=lambda r: (r.trial_id, r.n_t, r.n_c, r.n_e, r.snr_db))
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_power_csv(records, out / "power_sweep.csv")
        summary = summarize(records)
        write_summary_csv(summary, out / "power_sweep_summary.csv")
        if write_plot:
            plot_summary(summary, out / "power_sweep.svg")
    return records


def write_power_csv(records: List[TrialRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(POWER_SWEEP_HEADER)
        for r in records:
            w.writerow([_fmt(r.trial_id), _fmt(r.n_t), _fmt(r.n_c), _fmt(r.n_e), _fmt(r.snr_db),
                        _fmt(r.dwb_power_w), _fmt(r.dwb_relaxed_power_w), _fmt(r.nulling_power_w),
                        _fmt(r.errors), _fmt(r.seed)])


def _mean_ci(x: np.ndarray):
    if x.size == 0:
        return math.nan, math.nan
    if x.size == 1:
        return float(x[0]), math.nan
    return float(x.mean()), float(1.96 * x.std(ddof=1) / math.sqrt(x.size))


def summarize(records: List[TrialRecord]) -> List[dict]:
    """Mean and normal-approximation 95% CI per sweep point, over successful trials."""
    keys = sorted({(r.n_t, r.n_c, r.n_e, r.snr_db) for r in records})
    rows = []
    for key in keys:
        group = [r for r in records if (r.n_t, r.n_c, r.n_e, r.snr_db) == key]
        ok = [r for r in group if not r.errors]
        dwb = np.array([r.dwb_power_w for r in ok])
        rel = np.array([r.dwb_relaxed_power_w for r in ok])
        nul = np.array([r.nulling_power_w for r in ok])
        d_m, d_ci = _mean_ci(dwb)
        r_m, r_ci = _mean_ci(rel)
        n_m, n_ci = _mean_ci(nul)
        saving = 100.0 * (n_m - d_m) / d_m if ok and d_m > 0 else math.nan
        rows.append(dict(n_t=key[0], n_c=key[1], n_e=key[2], snr_db=key[3], n_ok=len(ok),
                         errors=len(group) - len(ok), dwb_mean_w=d_m, dwb_ci95_w=d_ci,
                         dwb_relaxed_mean_w=r_m, dwb_relaxed_ci95_w=r_ci,
                         nulling_mean_w=n_m, nulling_ci95_w=n_ci, saving_pct=saving))
    return rows


def write_summary_csv(rows: List[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        for row in rows:
            w.writerow([_fmt(row[k]) for k in SUMMARY_HEADER])


def plot_summary(rows: List[dict], path) -> None:
    """Mean power versus N_e, one DWB and one nulling curve per (N_T, N_c, SNR)."""
    series = []
    groups = sorted({(r["n_t"], r["n_c"], r["snr_db"]) for r in rows})
    for n_t, n_c, snr in groups:
        sel = sorted((r for r in rows if (r["n_t"], r["n_c"], r["snr_db"]) == (n_t, n_c, snr)),
                     key=lambda r: r["n_e"])
        x = [r["n_e"] for r in sel]
        tag = f"NT={n_t} Nc={n_c} {snr:g}dB"
        series.append((f"DWB {tag}", x, [r["dwb_mean_w"] for r in sel]))
        series.append((f"null {tag}", x, [r["nulling_mean_w"] for r in sel]))
    svgplot.line_plot(series, path, title="Mean transmit power", xlabel="number of eavesdroppers N_e",
                      ylabel="power (W), log10", logy=True, width=860)


def single_symbol_problem(config: ScenarioConfig, rng: Optional[np.random.Generator] = None) -> DwbProblem:
    """Single-symbol problem on the configured (or a random) topology."""
    rng = trial_rng(config.seed, 0) if rng is None else rng
    bearings = config.fixed_bearings()
    if bearings is None:
        bearings, _, _ = random_topology(rng, config.sweep.n_c[0], config.sweep.n_e[0])
    grid = config.ofdm_grid()
    const = config.constellation()
    comm = const.random_symbols(rng, (bearings.n_comm, grid.n_subcarriers))
    return DwbProblem(config.geometry(), bearings, grid, const, config.spoof_profile(), comm,
                      config.snr_sweep[0], config.noise_var, 0)


def array_response_experiment(config: ScenarioConfig, out_dir=None) -> dict:
    """Beampatterns of DWB and nulling on one instance, plus PSL figures."""
    problem = single_symbol_problem(config)
    dwb = solve_dwb(problem, tol=config.solver.tol, max_iter=config.solver.max_iter,
                    resolve_after_rounding=config.solver.resolve_after_rounding)
    null = solve_nulling(problem)
    grid = default_angle_grid()
    resp = {"dwb": array_response(dwb.tx_signal, problem.geometry, grid),
            "nulling": array_response(null.tx_signal, problem.geometry, grid)}
    result = {
        "problem": problem,
        "dwb": dwb,
        "nulling": null,
        "responses": resp,
        "psl_db": {k: psl_db(v) for k, v in resp.items()},
        "peak_deg": {k: float(v.angles_deg[np.argmax(v.magnitude_db)]) for k, v in resp.items()},
        "comm_residual": {
            "dwb": constraint_residuals(problem, dwb.tx_signal, None)[0],
            "nulling": constraint_residuals(problem, null.tx_signal, None)[0],
        },
    }
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "array_response.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(ARRAY_RESPONSE_HEADER)
            for scheme, r in resp.items():
                for a, m in zip(r.angles_deg, r.magnitude_db):
                    w.writerow([f"{a:.4f}", _fmt(m), scheme])
        svgplot.line_plot([(k, v.angles_deg, v.magnitude_db) for k, v in resp.items()],
                          out / "array_response.svg", title="Array response |B(theta)|",
                          xlabel="angle (deg)", ylabel="magnitude (dB)", ylim=(-80.0, 0.0))
    return result


def deception_demo(config: ScenarioConfig, out_dir=None, eve_index: int = 0,
                   rng: Optional[np.random.Generator] = None) -> dict:
    """End-to-end run: DWB per OFDM symbol, eavesdropper radar on what it receives.

    The designated eavesdropper sits at ``config.target`` (true range and
    velocity). Its estimate is compared with the spoofed position
    ``(R + R_sp, f_D + f_sp)`` and with the true one.
    """
    rng = trial_rng(config.seed, 0) if rng is None else rng
    grid = config.ofdm_grid()
    const = config.constellation()
    spoof = config.spoof_profile()
    bearings = config.fixed_bearings()
    if bearings is None:
        bearings, _, _ = random_topology(rng, max(config.sweep.n_c[0], 1), max(config.sweep.n_e[0], 1))
    if not 0 <= eve_index < bearings.n_eve:
        raise ValueError("deception demo needs a designated eavesdropper")
    geometry = config.geometry()
    tgt = config.target
    eve_channel = ChannelRealization(path_gain=tgt.path_gain, range_m=tgt.range_m,
                                     velocity_mps=tgt.velocity_mps, carrier_hz=grid.carrier_hz,
                                     noise_var=tgt.noise_var)
    clean = ChannelRealization(noise_var=0.0, carrier_hz=grid.carrier_hz)
    a_eve = steering_vector(geometry, bearings.eve_angles_rad[eve_index])

    rx_eve, known, comm_errors, max_res, powers = [], [], 0, 0.0, []
    scaled = None
    for m in range(grid.n_symbols):
        comm = const.random_symbols(rng, (bearings.n_comm, grid.n_subcarriers))
        problem = DwbProblem(geometry, bearings, grid, const, spoof, comm, config.snr_sweep[0],
                             config.noise_var, m)
        scaled = problem.scaled_constellation
        sol = solve_dwb(problem, tol=config.solver.tol, max_iter=config.solver.max_iter,
                        resolve_after_rounding=config.solver.resolve_after_rounding)
        powers.append(sol.power_w)
        rc, _ = constraint_residuals(problem, sol.tx_signal, None)
        max_res = max(max_res, rc)
        y = simulate_rx(sol.tx_signal, a_eve, eve_channel, grid, m,
                        rng_seed=np.random.SeedSequence([config.seed, 1, m]))
        rx_eve.append(ofdm_demod(y))
        known.append(sol.deceptive_symbols_rounded[eve_index])
        # legitimate receivers: noiseless unit channel, nearest-point decisions
        for i, ang in enumerate(bearings.comm_angles_rad):
            yc = simulate_rx(sol.tx_signal, steering_vector(geometry, ang), clean, grid, m)
            dec = qam_nearest(ofdm_demod(yc), scaled)
            comm_errors += int(np.count_nonzero(dec != qam_nearest(np.sqrt(scaled.symbol_power_w) * comm[i], scaled)))

    frame = collect_frame(grid, rx_eve)
    X_known = np.stack(known, axis=1)
    pad_r, pad_d = config.radar.pad_range, config.radar.pad_doppler
    maps, estimates = {}, {}
    for mode in ("known", "blind"):
        knowledge = SymbolKnowledge("known", X_known) if mode == "known" else SymbolKnowledge("blind")
        Z = remove_symbols(frame, knowledge, scaled, config.radar.blind_equalization)
        maps[mode] = range_doppler_map(Z, grid, pad_r, pad_d)
        estimates[mode] = find_peak(maps[mode])

    f_d = eve_channel.doppler_hz
    spoofed = (tgt.range_m + spoof.fake_range_m, f_d + spoof.fake_doppler_hz)
    true = (tgt.range_m, f_d)
    P, Q = pad_r * grid.n_subcarriers, pad_d * grid.n_symbols
    half_range_bin = SPEED_OF_LIGHT / (2 * P * grid.subcarrier_spacing_hz)
    half_doppler_bin = 1.0 / (2 * Q * grid.symbol_duration_s)
    report = {
        "true_range_m": true[0], "true_doppler_hz": true[1],
        "spoofed_range_m": spoofed[0], "spoofed_doppler_hz": spoofed[1],
        "half_range_bin_m": half_range_bin, "half_doppler_bin_hz": half_doppler_bin,
        "comm_symbol_errors": comm_errors,
        "comm_symbols_total": grid.n_symbols * grid.n_subcarriers * bearings.n_comm,
        "max_comm_residual": max_res,
        "mean_power_w": float(np.mean(powers)),
    }
    for mode, est in estimates.items():
        report[f"{mode}_range_m"] = est.range_m
        report[f"{mode}_doppler_hz"] = est.doppler_hz
        report[f"{mode}_peak_to_floor_db"] = est.peak_to_floor_db
        report[f"{mode}_range_err_m"] = est.range_m - spoofed[0]
        report[f"{mode}_doppler_err_hz"] = est.doppler_hz - spoofed[1]
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_map_csv(maps["known"], out / "range_doppler_map.csv")
        with open(out / "deception_report.json", "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
    report["maps"] = maps
    return report


def solve_instance(config: ScenarioConfig, out_dir=None) -> dict:
    """Solve one instance and dump ``S``, ``X_e`` and diagnostics."""
    problem = single_symbol_problem(config)
    dwb = solve_dwb(problem, tol=config.solver.tol, max_iter=config.solver.max_iter,
                    resolve_after_rounding=config.solver.resolve_after_rounding)
    null = solve_nulling(problem)
    rc, re = constraint_residuals(problem, dwb.tx_signal, dwb.deceptive_symbols_rounded)
    diag = {
        "comm_angles_deg": list(np.rad2deg(problem.bearings.comm_angles_rad)),
        "eve_angles_deg": list(np.rad2deg(problem.bearings.eve_angles_rad)),
        "symbol_power_w": problem.symbol_power,
        "dwb_power_w": dwb.power_w,
        "dwb_relaxed_power_w": dwb.relaxed_power_w,
        "nulling_power_w": null.power_w,
        "comm_residual": rc,
        "eve_residual": re,
        **{f"solver_{k}": v for k, v in dwb.solver_diag.items()},
    }
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        np.savez(out / "solve.npz", S=dwb.tx_signal, X_e_relaxed=dwb.deceptive_symbols_relaxed,
                 X_e_rounded=dwb.deceptive_symbols_rounded, S_nulling=null.tx_signal,
                 S_relaxed=dwb.relaxed_tx_signal)
        with open(out / "solve.json", "w") as fh:
            json.dump(diag, fh, indent=2, sort_keys=True, default=float)
            fh.write("\n")
    return {"problem": problem, "dwb": dwb, "nulling": null, "diagnostics": diag}
