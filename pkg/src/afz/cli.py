"""Command-line surface: ``afz <command> <config>``.

Exit codes: 0 ok, 2 configuration error, 3 numerical failure,
4 verification failure.
"""
from __future__ import annotations

import functools
import sys
import warnings

import click
import numpy as np

from . import config as cfgmod
from .converter import power_split, voltage_transfer
from .design import design_converter
from .errors import AFZError, ConfigError, IntervalOverlap, VerificationFailed
from .fits import TABLE_IX
from .io import ResultBundle, Table, bode_table, emit_csv, event_table, fmt, waveform_table
from .planner import derive_design_spec, enumerate_configs, scenario_points, Shading
from .reset import (estimate_conduction_losses, interval_times, ripple, solve_reset, stresses,
                    synthesize_waveforms)
from .smallsignal import bode as tf_bode, build_model
from .verify import (log_freqs, reset_limit, run_suite, small_signal_settings,
                     small_signal_setup)

TF_NAMES = {"gvd": "Gvd", "gvv": "Gvv", "zo": "Zo"}


def _load(path, overrides=()):
    try:
        cfg = cfgmod.load_config(path)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    for section, key, value in overrides:
        if value is not None:
            cfg = cfg.override(section, key, value)
    return cfg


def _guard(fn):
    """Map workbench errors to exit codes, with the message on stderr."""
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except AFZError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(exc.exit_code)
    return wrapper


class _Warnings:
    """Collects warnings raised inside the block into a bundle and onto stderr."""

    def __init__(self, bundle: ResultBundle):
        self.bundle = bundle

    def __enter__(self):
        self._cm = warnings.catch_warnings(record=True)
        self.caught = self._cm.__enter__()
        warnings.simplefilter("always")
        return self

    def __exit__(self, *exc):
        self._cm.__exit__(*exc)
        for w in self.caught:
            self.bundle.warn(f"{w.category.__name__}: {w.message}")
        return False


def _text_table(columns, rows) -> str:
    cells = [list(columns)] + [[c if isinstance(c, str) else fmt(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(columns))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def _kv(title, items) -> str:
    width = max(len(k) for k, _, _ in items)
    body = [f"  {k.ljust(width)}  {fmt(v) if not isinstance(v, str) else v} {u}".rstrip()
            for k, v, u in items]
    return "\n".join([title] + body)


def _finish(bundle, csv_dir, metadata, prefix=""):
    for d in bundle.diagnostics:
        click.echo(f"warning: {d}", err=True)
    if csv_dir:
        for path in emit_csv(bundle, csv_dir, include_metadata=metadata, prefix=prefix):
            click.echo(f"wrote {path}", err=True)


_csv_opt = click.option("--csv", "csv_dir", type=click.Path(file_okay=False),
                        help="Also write CSV tables into this directory.")
_meta_opt = click.option("--metadata/--no-metadata", default=True,
                         help="Prefix CSV files with the run-metadata header.")


@click.group()
@click.version_option(package_name="artifact")
def main():
    """AFZ converter workbench."""


# -------------------------------------------------------------------- analyze


@main.command()
@click.argument("cfg_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--model", type=click.Choice(["circuit", "paper"]), default=None,
              help="Reset energy-balance formulation (overrides reset_model).")
@_csv_opt
@_meta_opt
@_guard
def analyze(cfg_path, model, csv_dir, metadata):
    """Steady-state report for the configured operating point."""
    cfg = _load(cfg_path, [("operating-point", "reset_model", model)])
    p = cfg.converter_params()
    op = cfg.operating_point()
    model = cfg.section("operating-point")["reset_model"]
    bundle = ResultBundle.start(cfg.digest())
    out = []
    with _Warnings(bundle):
        D_max = reset_limit(p)
        out.append(_kv("Operating point", [
            ("V_i", op.V_i, "V"), ("D", op.D, ""), ("V_o", op.V_o, "V"),
            ("P_o", op.P_o, "W"), ("I_L", op.I_L, "A"), ("R_load", op.R_load, "Ohm"),
            ("D_max (resonant reset)", D_max, "")]))
        r = ripple(p, op)
        out.append(_kv("Ripple", [("dI_L", r.dI_L, "A"), ("I_L_min", r.I_L_min, "A"),
                                  ("dI_Lm", r.dI_Lm, "A"),
                                  ("mode", "DCM" if r.dcm else "CCM", "")]))
        ps = power_split(op.P_o, p.n)
        out.append(_kv("Power split", [("P_mag", ps.P_mag, "W"), ("P_noMag", ps.P_noMag, "W"),
                                       ("P_mag / P", ps.mag_ratio, ""),
                                       ("P_noMag / P", ps.noMag_ratio, "")]))
        rows = [("V_o", op.V_o), ("dI_L", r.dI_L), ("dI_Lm", r.dI_Lm),
                ("P_mag", ps.P_mag), ("P_noMag", ps.P_noMag), ("D_max", D_max)]
        if op.D >= D_max:
            bundle.warn(f"D={op.D:.4g} exceeds the resonant-reset limit D_max={D_max:.4g}: "
                        "the magnetizing current is not reset before turn-on")
            out.append("Reset solution\n  not available: incomplete reset at this duty cycle")
        else:
            if model == "paper":
                bundle.warn("literal energy balance selected: with nominal component values it "
                            "does not reproduce the published Scenario 1 solution; the fitted "
                            f"set is C_d={TABLE_IX.C_d:.4g} F, C_oss={TABLE_IX.C_oss:.4g} F, "
                            f"L_k={TABLE_IX.L_k:.4g} H")
            sol = solve_reset(p, op, model)
            for note in sol.notes:
                bundle.warn(note)
            out.append(_kv(f"Reset solution ({model})", [
                ("I_Lm_min", sol.I_Lm_min, "A"), ("I_Lm_max", sol.I_Lm_max, "A"),
                ("V_Cd_min", sol.V_Cd_min, "V"), ("V_Cd_t2", sol.V_Cd_t2, "V"),
                ("V_Cd_t3", sol.V_Cd_t3, "V"),
                ("max |residual|", float(np.max(np.abs(sol.residuals))), "")]))
            rows += [(k, getattr(sol, k)) for k in ("I_Lm_min", "I_Lm_max", "V_Cd_min",
                                                     "V_Cd_t2", "V_Cd_t3")]
            try:
                times = interval_times(p, op, sol)
                out.append(_kv("Interval times", [(f"t{i}", t, "s")
                                                  for i, t in enumerate(times.as_tuple())]))
                rows += [(f"t{i}", t) for i, t in enumerate(times.as_tuple())]
            except IntervalOverlap as exc:
                times = None
                bundle.warn(str(exc))
            st = stresses(p, op, sol, times)
            out.append(_kv("Stresses", [
                ("V_DS_max", st.V_DS_max, "V"), ("V_D1_max", st.V_D1_max, "V"),
                ("V_D2 (on)", st.V_D2_on, "V"), ("I_S (mean)", st.I_S, "A"),
                ("I_D1 (mean)", st.I_D1, "A"), ("I_D2 (mean)", st.I_D2, "A")]))
            rows += [("V_DS_max", st.V_DS_max), ("V_D1_max", st.V_D1_max)]
            if times is not None:
                wf = synthesize_waveforms(p, op, sol, times)
                loss = estimate_conduction_losses(p, op, sol, wf)
                out.append(_kv("Conduction loss (upper-bound efficiency)",
                               [(k, v, "W") for k, v in loss.breakdown.items()]
                               + [("total", loss.P_loss, "W"), ("eta_cond", loss.eta_cond, "")]))
                rows += [("P_loss_cond", loss.P_loss), ("eta_cond", loss.eta_cond)]
                bundle.add("waveforms", waveform_table(wf))
        bundle.add("analysis", Table(("quantity", "value"), tuple(rows)))
    click.echo("\n\n".join(out))
    if bundle.diagnostics:
        click.echo("\nWarnings\n" + "\n".join(f"  {d}" for d in bundle.diagnostics))
    _finish(bundle, csv_dir, metadata, prefix="analyze_")


# -------------------------------------------------------------------- simulate


@main.command()
@click.argument("cfg_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--periods", type=int, default=None, help="Switching periods to integrate.")
@click.option("--dt-max", type=float, default=None, help="Largest integration step (s).")
@click.option("--record", type=int, default=1, show_default=True,
              help="Trailing periods written to the waveform CSV.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=".",
              show_default=True, help="Directory for waveforms.csv and events.csv.")
@_meta_opt
@_guard
def simulate(cfg_path, periods, dt_max, record, out_dir, metadata):
    """Transient run; writes the waveform and event-log CSVs."""
    from .sim.transient import run_transient

    cfg = _load(cfg_path, [("simulation", "periods", periods), ("simulation", "dt_max", dt_max)])
    p = cfg.converter_params()
    op = cfg.operating_point()
    n_periods = cfg.get("simulation", "periods")
    dt = cfg.get("simulation", "dt_max") or None
    bundle = ResultBundle.start(cfg.digest())
    with _Warnings(bundle):
        wf, log, final = run_transient(p, op, n_periods=n_periods, dt_max=dt,
                                       n_record=min(record, n_periods),
                                       settings=cfg.sim_settings())
    from .waveforms import CHANNELS
    bundle.add("waveforms", waveform_table(wf, CHANNELS))
    bundle.add("events", event_table(log))
    click.echo(_kv("Transient", [("periods", n_periods, ""), ("samples", len(wf.time), ""),
                                 ("events", len(log.events), ""),
                                 ("mean v_o (last)", wf.mean("v_o"), "V"),
                                 ("final v_o", final.v_Co, "V"),
                                 ("sequence", " ".join(log.period_sequence()), "")]))
    _finish(bundle, out_dir, metadata)


# ------------------------------------------------------------------------ bode


@main.command()
@click.argument("cfg_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--tf", "tf_name", type=click.Choice(sorted(TF_NAMES)), required=True)
@click.option("--simulate", "with_sim", is_flag=True,
              help="Add AC-sweep columns from the switching simulator.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
              help="Write bode_<tf>.csv here instead of printing it.")
@_meta_opt
@_guard
def bode(cfg_path, tf_name, with_sim, out_dir, metadata):
    """Analytical Bode data, optionally overlaid with the AC sweep."""
    from .sim.transient import ac_sweep

    cfg = _load(cfg_path)
    p = cfg.converter_params()
    op = cfg.operating_point()
    target = TF_NAMES[tf_name]
    freqs = log_freqs(cfg.get("sweep", "f_min"), cfg.get("sweep", "f_max"),
                      cfg.get("sweep", "points"))
    bundle = ResultBundle.start(cfg.digest())
    with _Warnings(bundle):
        _, tfs = build_model(p, op)
        rows = tf_bode(tfs[target], freqs)
        sim = None
        if with_sim:
            q = small_signal_setup(p, op)
            if q.C_d != p.C_d:
                bundle.warn(f"simulated with C_d={q.C_d:.4g} F so that D={op.D:.4g} resets")
            amp = cfg.get("sweep", "amplitude") or None
            sim = ac_sweep(q, op, target, freqs, amplitude=amp,
                           settings=small_signal_settings(cfg.sim_settings()),
                           min_window=cfg.get("sweep", "min_window"))
            # unwrap the simulated phase along the analytical branch
            sim = _SimRows.align(sim, rows)
    name = f"bode_{tf_name}"
    bundle.add(name, bode_table(rows, sim))
    if out_dir:
        _finish(bundle, out_dir, metadata)
    else:
        for d in bundle.diagnostics:
            click.echo(f"warning: {d}", err=True)
        click.echo(bundle.render(name, metadata), nl=False)


class _SimRows:
    def __init__(self, mag_db, phase_deg):
        self.mag_db = mag_db
        self.phase_deg = phase_deg

    @classmethod
    def align(cls, points, reference):
        out = []
        for pt, ref in zip(points, reference):
            ph = pt.phase_deg
            ph += 360.0 * round((ref.phase_deg - ph) / 360.0)
            out.append(cls(pt.mag_db, ph))
        return out


# ---------------------------------------------------------------------- design


@main.command()
@click.argument("cfg_path", type=click.Path(exists=True, dir_okay=False))
@_csv_opt
@_meta_opt
@_guard
def design(cfg_path, csv_dir, metadata):
    """Turns ratio, reset-capacitor bound and component stresses."""
    cfg = _load(cfg_path)
    p = cfg.converter_params()
    sc = cfg.section("scenario") if cfg.has("scenario") else cfg.section_defaults("scenario")
    scenarios = _scenarios(cfg)
    bundle = ResultBundle.start(cfg.digest())
    with _Warnings(bundle):
        res = design_converter(p, scenarios, D_max=sc["d_max"], tolerance=sc["tolerance"],
                               n_step=sc["n_step"])
    rows = [(r.component, r.quantity, r.value, r.unit) for r in res.requirements]
    click.echo(_text_table(("component", "requirement", "value", "unit"), rows))
    bundle.add("design", Table(("component", "requirement", "value", "unit"), tuple(rows)))
    _finish(bundle, csv_dir, metadata)


# ------------------------------------------------------------- plan / scenario


@main.command()
@click.argument("cfg_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--limit", type=int, default=10, show_default=True)
@_csv_opt
@_meta_opt
@_guard
def plan(cfg_path, limit, csv_dir, metadata):
    """Ranked string configurations."""
    cfg = _load(cfg_path)
    rows = _plan_rows(cfg, limit)
    cols = ("strings", "panels_per_string", "total_panels", "v_out_v", "delta_v_v")
    text_rows = [(str(c.strings), str(c.panels_per_string), str(c.total),
                  f"{c.V_out:.2f}", f"{c.dV:.2f}") for c in rows]
    click.echo(_text_table(cols, text_rows))
    bundle = ResultBundle.start(cfg.digest())
    bundle.add("plan", Table(cols, tuple((c.strings, c.panels_per_string, c.total, c.V_out, c.dV)
                                         for c in rows)))
    _finish(bundle, csv_dir, metadata)


def _plan_rows(cfg, limit=None):
    pl = cfg.section("plant")
    return enumerate_configs(cfg.plant_spec(), limit, extra_panels=pl["extra_panels"],
                             panels_range=(pl["panels_per_string_min"],
                                           pl["panels_per_string_max"]))


def _scenarios(cfg):
    spec = cfg.plant_spec()
    best = _plan_rows(cfg, 1)
    if not best:
        raise ConfigError("no string configuration satisfies the [plant] section")
    s0 = scenario_points(best[0], spec, Shading(), name="Scenario 0")
    out = [s0]
    shading = cfg.shading()
    if shading.fraction > 0:
        out.append(scenario_points(best[0], spec, shading, name="Scenario 1"))
    return out


@main.command()
@click.argument("cfg_path", type=click.Path(exists=True, dir_okay=False))
@_csv_opt
@_meta_opt
@_guard
def scenario(cfg_path, csv_dir, metadata):
    """Per-class operating points and the converter specification envelope."""
    cfg = _load(cfg_path)
    p = cfg.converter_params()
    sc = cfg.section("scenario") if cfg.has("scenario") else cfg.section_defaults("scenario")
    scenarios = _scenarios(cfg)
    names = [s.name for s in scenarios]
    rows = []
    for label in ("non-shaded", "shaded"):
        for qty, attr in (("P_MIC (W)", "P_MIC"), ("V_in (V)", "V_in"),
                          ("V_out (V)", "V_out"), ("I_string (A)", "I_string")):
            vals = []
            for s in scenarios:
                try:
                    vals.append(f"{getattr(s.by_label(label), attr):.6g}")
                except KeyError:
                    vals.append("N/A")
            if all(v == "N/A" for v in vals):
                continue
            rows.append((label, qty, *vals))
    click.echo(_text_table(("converter", "parameter", *names), rows))
    spec = derive_design_spec(scenarios, n=p.n, D_max=sc["d_max"], tolerance=sc["tolerance"])
    env = [("V_i (V)", *spec.V_i), ("V_o (V)", *spec.V_o),
           ("V_o band (V)", *spec.V_o_band), ("D", *spec.D), ("P (W)", *spec.P)]
    click.echo("")
    click.echo(_text_table(("specification", "min", "max"),
                           [(k, f"{a:.6g}", f"{b:.6g}") for k, a, b in env]))
    click.echo(f"D_max {spec.D_max:g}, output tolerance +/-{spec.tolerance * 100:g} %")
    bundle = ResultBundle.start(cfg.digest())
    bundle.add("scenario", Table(
        ("scenario", "converter", "count", "p_mic_w", "v_in_v", "v_out_v", "i_string_a"),
        tuple((s.name, c.label, c.count, c.P_MIC, c.V_in, c.V_out, c.I_string)
              for s in scenarios for c in s.classes)))
    bundle.add("envelope", Table(("specification", "min", "max"), tuple(env)))
    _finish(bundle, csv_dir, metadata)


# ---------------------------------------------------------------------- verify


@main.command()
@click.argument("cfg_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--quick", is_flag=True, help="Fewer points and frequencies.")
@_guard
def verify(cfg_path, quick):
    """Cross-validate the analytical models against the simulator."""
    cfg = _load(cfg_path)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        checks = run_suite(cfg, quick=quick, log=click.echo)
    failed = [c for c in checks if not c.passed]
    click.echo(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    if failed:
        raise VerificationFailed(", ".join(c.name for c in failed))


if __name__ == "__main__":
    main()
