use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::info;
use serde_json::json;

use super::{
    amplitude_sweep, calibrate_force, lower_bound_search, monotonicity_violations, sensitivity_campaign, squeeze_sweep,
    LowerBoundResult, RunRecord, Scenario, SqueezeSettings,
};
use crate::config::RunConfig;
use crate::io::{atomic_write, key_value_text};
use crate::physics::static_force;
use crate::rng::derive_seed;
use crate::svg::{LinePlot, Series};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Campaign {
    Calibrate,
    SweepAmplitude,
    SweepSqueeze,
    LowerBound,
    Sensitivity,
}

impl Campaign {
    pub const ALL: [Campaign; 5] =
        [Campaign::Calibrate, Campaign::SweepAmplitude, Campaign::SweepSqueeze, Campaign::LowerBound, Campaign::Sensitivity];

    pub fn name(self) -> &'static str {
        match self {
            Campaign::Calibrate => "calibrate",
            Campaign::SweepAmplitude => "sweep-amplitude",
            Campaign::SweepSqueeze => "sweep-squeeze",
            Campaign::LowerBound => "lower-bound",
            Campaign::Sensitivity => "sensitivity",
        }
    }

    fn stream(self) -> u64 {
        Campaign::ALL.iter().position(|c| *c == self).unwrap() as u64 + 100
    }
}

impl fmt::Display for Campaign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Campaign {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Campaign::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown campaign {s:?}; expected one of calibrate, sweep-amplitude, sweep-squeeze, lower-bound, sensitivity")))
    }
}

/// Data products of one campaign run.
#[derive(Debug, Clone)]
pub struct CampaignOutput {
    pub campaign: Campaign,
    pub record: RunRecord,
    pub csv: String,
    pub summary: String,
    pub svg: Option<String>,
}

impl CampaignOutput {
    /// Writes `<name>.json`, `.csv`, `.summary.txt` and optionally `.svg`.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let name = self.campaign.name();
        let mut paths = vec![dir.join(format!("{name}.json"))];
        super::persist_run(&self.record, &paths[0])?;
        for (ext, body) in [("csv", Some(&self.csv)), ("summary.txt", Some(&self.summary)), ("svg", self.svg.as_ref())] {
            if let Some(body) = body {
                let p = dir.join(format!("{name}.{ext}"));
                atomic_write(&p, body.as_bytes())?;
                paths.push(p);
            }
        }
        Ok(paths)
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

fn csv_text(header: &[&str], rows: Vec<Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| Error::Parse(e.to_string()))?;
    for r in rows {
        w.write_record(&r).map_err(|e| Error::Parse(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn to_json<T: serde::Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("results serialize")
}

struct Parts {
    results: serde_json::Value,
    csv: String,
    summary: Vec<(String, String)>,
    svg: Option<LinePlot>,
}

fn kv(k: &str, v: impl fmt::Display) -> (String, String) {
    (k.to_string(), v.to_string())
}

fn series(label: &str, x: Vec<f64>, y: Vec<f64>, err: Option<Vec<f64>>, markers: bool) -> Series {
    Series { label: label.into(), x, y, err, markers }
}

fn calibrate(sc: &Scenario) -> Result<Parts> {
    let dc: Vec<(f64, f64)> = sc.config.experiment.dc_measurements.iter().map(|m| (m[0], m[1])).collect();
    let k = calibrate_force(&sc.objects.trap, &dc)?;
    let apv = sc.config.physics.drive.amplitude_per_volt;
    let rows = dc
        .iter()
        .map(|(v, z)| vec![format!("{v:e}"), format!("{z:e}"), format!("{:e}", static_force(&sc.objects.trap, *z))])
        .collect();
    let csv = csv_text(&["voltage_v", "displacement_m", "force_n"], rows)?;
    let summary = vec![
        kv("force_per_volt_n_per_v", format!("{k:e}")),
        kv("amplitude_per_volt_m_per_v", format!("{apv:e}")),
        kv("amplitude_per_force_m_per_n", format!("{:e}", apv / k)),
    ];
    let results = json!({"force_per_volt": k, "amplitude_per_volt": apv, "amplitude_per_force": apv / k, "points": dc});
    Ok(Parts { results, csv, summary, svg: None })
}

fn sweep_amplitude(sc: &Scenario, seed: u64) -> Result<Parts> {
    let e = &sc.config.experiment;
    let rec = amplitude_sweep(sc, &e.amplitude_voltages, e.trials, seed)?;
    let rows = rec
        .points
        .iter()
        .map(|p| {
            vec![
                format!("{:e}", p.voltage),
                opt(p.mean_amplitude),
                opt(p.std_amplitude),
                format!("{:e}", p.mean_true_amplitude),
                p.locked_trials.to_string(),
                p.fitted_trials.to_string(),
                p.trials.to_string(),
            ]
        })
        .collect();
    let csv = csv_text(&["voltage_v", "amplitude_m", "amplitude_std_m", "true_amplitude_m", "locked_trials", "fitted_trials", "trials"], rows)?;
    let r = &rec.regression;
    let summary = vec![
        kv("force_per_volt_n_per_v", format!("{:e}", rec.force_per_volt)),
        kv("amplitude_per_volt_m_per_v", format!("{:e}", rec.amplitude_per_volt)),
        kv("amplitude_per_volt_err_m_per_v", format!("{:e}", r.slope_err)),
        kv("amplitude_per_force_m_per_n", format!("{:e}", rec.amplitude_per_force)),
        kv("free_running_amplitude_m", format!("{:e}", rec.free_running_amplitude)),
        kv("r_squared", r.r_squared),
        kv("excluded_voltages", rec.excluded_voltages.len()),
    ];
    let fitted: Vec<_> = rec.points.iter().filter(|p| p.mean_amplitude.is_some()).collect();
    let xs: Vec<f64> = fitted.iter().map(|p| p.voltage * 1e3).collect();
    let plot = LinePlot::new("Amplitude against injection voltage", "V_i (mV)", "A (µm)")
        .with_series(series(
            "fitted",
            xs.clone(),
            fitted.iter().map(|p| p.mean_amplitude.unwrap() * 1e6).collect(),
            Some(fitted.iter().map(|p| p.std_amplitude.unwrap_or(0.0) * 1e6).collect()),
            true,
        ))
        .with_series(series(
            "regression",
            xs.clone(),
            xs.iter().map(|v| (r.intercept + r.slope * v * 1e-3) * 1e6).collect(),
            None,
            false,
        ));
    Ok(Parts { results: to_json(&rec), csv, summary, svg: Some(plot) })
}

fn sweep_squeeze(sc: &Scenario, seed: u64) -> Result<Parts> {
    let e = &sc.config.experiment;
    let grid: Vec<(f64, f64)> = e.squeeze_phases.iter().flat_map(|p| e.squeeze_gains.iter().map(move |g| (*g, *p))).collect();
    let settings = SqueezeSettings { trials: e.squeeze_trials, periods: e.squeeze_periods, bootstrap_resamples: e.bootstrap_resamples };
    let pts = squeeze_sweep(sc, &grid, &settings, seed)?;
    let rows = pts
        .iter()
        .map(|p| {
            vec![
                format!("{:e}", p.gain),
                format!("{:e}", p.phase),
                format!("{:e}", p.product),
                p.unstable.to_string(),
                opt(p.theory_y),
                opt(p.relative_variance_y),
                opt(p.bootstrap_err_y),
                opt(p.theory_x),
                opt(p.relative_variance_x),
                opt(p.bootstrap_err_x),
                p.trials.to_string(),
            ]
        })
        .collect();
    let csv = csv_text(
        &["gain", "phase_rad", "g_cos_2phi", "unstable", "theory_y", "relative_variance_y", "bootstrap_err_y", "theory_x", "relative_variance_x", "bootstrap_err_x", "trials"],
        rows,
    )?;
    let worst = pts.iter().filter_map(|p| p.deviation_sigma_y()).fold(0.0f64, f64::max);
    let summary = vec![
        kv("grid_points", pts.len()),
        kv("unstable_points", pts.iter().filter(|p| p.unstable).count()),
        kv("max_deviation_sigma_y", worst),
    ];
    let mut plot = LinePlot::new("Relative variance of Y", "g", "var(Y) / var(Y; g = 0)");
    for phi in &e.squeeze_phases {
        let sel: Vec<_> = pts.iter().filter(|p| p.phase == *phi && p.relative_variance_y.is_some()).collect();
        let g: Vec<f64> = sel.iter().map(|p| p.gain).collect();
        plot = plot
            .with_series(series(
                &format!("simulated φ = {phi:.3}"),
                g.clone(),
                sel.iter().map(|p| p.relative_variance_y.unwrap()).collect(),
                Some(sel.iter().map(|p| p.bootstrap_err_y.unwrap_or(0.0)).collect()),
                true,
            ))
            .with_series(series(&format!("theory φ = {phi:.3}"), g, sel.iter().map(|p| p.theory_y.unwrap_or(f64::NAN)).collect(), None, false));
    }
    Ok(Parts { results: to_json(&pts), csv, summary, svg: Some(plot) })
}

fn lower_bound(sc: &Scenario, seed: u64) -> Result<Parts> {
    let e = &sc.config.experiment;
    let k = e.lower_bound_force_per_volt.unwrap_or(sc.objects.drive.force_per_volt);
    let plain = sc.objects.lock.clone();
    let mut squeezed = plain.clone();
    squeezed.drive = squeezed.drive.with_squeeze(e.lower_bound_squeeze_gain, e.lower_bound_squeeze_phase);
    info!("lower-bound: {} voltages × {} trials without squeezing", e.lower_bound_voltages.len(), e.lower_bound_trials);
    let a = lower_bound_search(&plain, &e.lower_bound_voltages, e.lower_bound_trials, k, seed)?;
    info!("lower-bound: critical voltage {:e} V; repeating with squeezing", a.critical_voltage);
    let b = lower_bound_search(&squeezed, &e.lower_bound_voltages, e.lower_bound_trials, k, seed)?;
    let rows = [&a, &b]
        .iter()
        .flat_map(|r| {
            r.points.iter().map(move |p| {
                vec![
                    r.squeezing_enabled.to_string(),
                    format!("{:e}", p.voltage),
                    format!("{:e}", p.probability),
                    format!("{:e}", p.std_error),
                    p.locked.to_string(),
                    p.trials.to_string(),
                ]
            })
        })
        .collect();
    let csv = csv_text(&["squeezing", "voltage_v", "lock_probability", "std_error", "locked", "trials"], rows)?;
    let summary = vec![
        kv("critical_voltage_v", format!("{:e}", a.critical_voltage)),
        kv("critical_force_n", format!("{:e}", a.critical_force)),
        kv("critical_voltage_squeezed_v", format!("{:e}", b.critical_voltage)),
        kv("critical_force_squeezed_n", format!("{:e}", b.critical_force)),
        kv("ratio", a.critical_voltage / b.critical_voltage),
        kv("force_per_volt_n_per_v", format!("{k:e}")),
        kv("monotonicity_violations", monotonicity_violations(&a.points, 3.0).len() + monotonicity_violations(&b.points, 3.0).len()),
    ];
    let curve = |r: &LowerBoundResult, label: &str| {
        series(
            label,
            r.points.iter().map(|p| p.voltage * 1e3).collect(),
            r.points.iter().map(|p| p.probability).collect(),
            Some(r.points.iter().map(|p| p.std_error).collect()),
            true,
        )
    };
    let mut plot = LinePlot::new("Lock probability", "V_i (mV)", "P(lock)")
        .with_series(curve(&a, "no squeezing"))
        .with_series(curve(&b, "squeezing"));
    plot.log_x = true;
    Ok(Parts { results: json!({"unsqueezed": a, "squeezed": b}), csv, summary, svg: Some(plot) })
}

fn sensitivity_parts(sc: &Scenario, seed: u64) -> Result<Parts> {
    let e = &sc.config.experiment;
    let r = sensitivity_campaign(sc, e.sensitivity_voltage, e.trials, seed)?;
    let csv = csv_text(
        &["voltage_v", "delta_a_m", "mean_amplitude_m", "tau_s", "slope_m_per_n", "sensitivity_n_per_rthz", "repetitions", "locked_repetitions"],
        vec![vec![
            format!("{:e}", r.voltage),
            format!("{:e}", r.delta_a),
            format!("{:e}", r.mean_amplitude),
            format!("{:e}", r.tau),
            format!("{:e}", r.slope),
            format!("{:e}", r.sensitivity),
            r.repetitions.to_string(),
            r.locked_repetitions.to_string(),
        ]],
    )?;
    let summary = vec![
        kv("delta_a_m", format!("{:e}", r.delta_a)),
        kv("mean_fit_error_m", format!("{:e}", r.mean_fit_error)),
        kv("tau_s", r.tau),
        kv("slope_m_per_n", format!("{:e}", r.slope)),
        kv("sensitivity_n_per_rthz", format!("{:e}", r.sensitivity)),
        kv("sensitivity_yn_per_rthz", r.sensitivity * 1e24),
    ];
    Ok(Parts { results: to_json(&r), csv, summary, svg: None })
}

/// Runs a campaign on a validated config; every random stream derives from
/// `config.seed`.
pub fn run_campaign(config: &RunConfig, campaign: Campaign) -> Result<CampaignOutput> {
    let sc = Scenario::from_config(config.clone())?;
    let seed = derive_seed(config.seed, campaign.stream());
    info!("campaign {campaign}: config {}", &sc.hash[..12]);
    let parts = match campaign {
        Campaign::Calibrate => calibrate(&sc)?,
        Campaign::SweepAmplitude => sweep_amplitude(&sc, seed)?,
        Campaign::SweepSqueeze => sweep_squeeze(&sc, seed)?,
        Campaign::LowerBound => lower_bound(&sc, seed)?,
        Campaign::Sensitivity => sensitivity_parts(&sc, seed)?,
    };
    let mut summary = vec![kv("campaign", campaign), kv("config_hash", &sc.hash), kv("seed", config.seed)];
    summary.extend(parts.summary);
    let svg = if config.output.svg { parts.svg.map(|p| p.render()) } else { None };
    Ok(CampaignOutput {
        campaign,
        record: RunRecord::new(campaign.name(), config, parts.results),
        csv: parts.csv,
        summary: key_value_text(&summary),
        svg,
    })
}
