//! Result files written by `momt run`.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use momt_core::grid::Grid;
use momt_core::omt::SolveReport;
use nalgebra::DVector;
use serde::Serialize;

use crate::config::{Baseline, Config};
use crate::peaks::Peak;
use crate::run::{Outcome, Track};
use crate::scenario::Role;

/// Grid coordinates followed by the value, 17 significant digits.
pub fn spectrum_csv(grid: &Grid, values: &DVector<f64>, column: &str) -> String {
    let mut s = String::new();
    for k in 0..grid.dim() {
        let _ = write!(s, "x{k},");
    }
    s.push_str(column);
    s.push('\n');
    for i in 0..grid.len() {
        for x in grid.point(i) {
            let _ = write!(s, "{x:.16e},");
        }
        let _ = writeln!(s, "{:.16e}", values[i]);
    }
    s
}

#[derive(Serialize)]
struct PeaksFile<'a> {
    times: Vec<PeaksAtTime<'a>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tracks: Option<Vec<Track>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    coupling_tracks: Option<Vec<Track>>,
}

#[derive(Serialize)]
struct PeaksAtTime<'a> {
    t: usize,
    peaks: &'a [Peak],
    truth: &'a [Vec<f64>],
    /// Distance from each true source to the nearest peak.
    errors: &'a [f64],
}

#[derive(Serialize)]
struct ReportFile<'a> {
    config: &'a Config,
    marginals: Vec<MarginalInfo>,
    solver: &'a SolveReport,
}

#[derive(Serialize)]
struct MarginalInfo {
    index: usize,
    role: String,
    file: String,
    mass: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    constraint_residual: Option<f64>,
}

#[derive(Serialize)]
struct TimingFile {
    build_seconds: f64,
    solve_seconds: f64,
}

fn json<T: Serialize>(v: &T) -> io::Result<String> {
    let mut s = serde_json::to_string_pretty(v).map_err(io::Error::other)?;
    s.push('\n');
    Ok(s)
}

fn marginal_file(role: Role) -> String {
    match role {
        Role::State { t } => format!("marginal_t{t}.csv"),
        Role::Observed { t, j } => format!("marginal_t{t}_a{j}.csv"),
    }
}

/// Writes every result file. Everything except `timing.json` is a
/// deterministic function of the configuration.
pub fn write_outputs(o: &Outcome, dir: &Path) -> Result<(), Box<dyn std::error::Error>> {
    fs::create_dir_all(dir)?;
    let sc = &o.scenario;
    let cfg = &sc.config;

    let residuals = o.constraint_residuals();
    let mut info = Vec::new();
    for (i, m) in o.marginals.iter().enumerate() {
        let file = marginal_file(sc.roles[i]);
        fs::write(dir.join(&file), spectrum_csv(sc.grid_of(i), m, "mass"))?;
        info.push(MarginalInfo {
            index: i,
            role: format!("{:?}", sc.roles[i]),
            file,
            mass: m.sum(),
            gamma: sc.constraints[i].as_ref().map(|c| c.gamma()),
            constraint_residual: residuals[i],
        });
    }
    if sc.push.is_some() {
        for (t, s) in o.spatial.iter().enumerate() {
            fs::write(
                dir.join(format!("spatial_t{t}.csv")),
                spectrum_csv(&sc.spatial, s, "mass"),
            )?;
        }
    }

    let errors = o.peak_errors();
    let (tracks, coupling_tracks) = if cfg.times > 1 {
        (o.tracks(), o.coupling_tracks()?)
    } else {
        (None, None)
    };
    let peaks = PeaksFile {
        times: (0..cfg.times)
            .map(|t| PeaksAtTime {
                t,
                peaks: &o.peaks[t],
                truth: &sc.truth[t],
                errors: &errors[t],
            })
            .collect(),
        tracks,
        coupling_tracks,
    };
    fs::write(dir.join("peaks.json"), json(&peaks)?)?;

    if cfg.output.interp > 0 && cfg.times > 1 {
        for t in 0..cfg.times - 1 {
            match o.interpolations(t, cfg.output.interp)? {
                Some(frames) => {
                    for (k, (_, mass, lost)) in frames.iter().enumerate() {
                        if *lost > 0.0 {
                            log::warn!("interpolation t{t}+{k}: mass {lost:e} left the grid");
                        }
                        let name = format!("interp_t{t}_{k}.csv");
                        fs::write(dir.join(name), spectrum_csv(&sc.spatial, mass, "mass"))?;
                    }
                }
                None => log::warn!("state grid too large for interpolation; skipped"),
            }
        }
    }

    if cfg.output.baseline == Some(Baseline::Mvdr) {
        for (t, per_array) in o.mvdr()?.iter().enumerate() {
            for (j, s) in per_array.iter().enumerate() {
                let name = format!("mvdr_t{t}_a{j}.csv");
                fs::write(dir.join(name), spectrum_csv(&sc.spatial, s, "power"))?;
            }
        }
    }

    if cfg.output.gnuplot {
        fs::write(dir.join("plot.gp"), gnuplot_script(o))?;
    }

    let report = ReportFile {
        config: cfg,
        marginals: info,
        solver: o.report(),
    };
    fs::write(dir.join("report.json"), json(&report)?)?;
    let timing = TimingFile {
        build_seconds: o.build_seconds,
        solve_seconds: o.solve_seconds,
    };
    fs::write(dir.join("timing.json"), json(&timing)?)?;
    Ok(())
}

fn gnuplot_script(o: &Outcome) -> String {
    let sc = &o.scenario;
    let prefix = if sc.push.is_some() {
        "spatial"
    } else {
        "marginal"
    };
    let mut s = String::from("set datafile separator ','\nset key autotitle columnhead\n");
    match sc.spatial.dim() {
        1 => {
            s.push_str("set xlabel 'x'\nset ylabel 'mass'\nplot ");
            let files: Vec<String> = (0..sc.config.times)
                .map(|t| format!("'{prefix}_t{t}.csv' using 1:2 with lines title 't={t}'"))
                .collect();
            s.push_str(&files.join(", \\\n     "));
            s.push('\n');
        }
        _ => {
            s.push_str("set view map\nset size ratio -1\n");
            let file =
                if sc.push.is_some() || sc.config.kind == crate::config::ScenarioKind::Tracking {
                    format!("{prefix}_t0.csv")
                } else {
                    "marginal_t0.csv".to_string()
                };
            let _ = writeln!(s, "splot '{file}' using 1:2:3 with image notitle");
        }
    }
    s
}
