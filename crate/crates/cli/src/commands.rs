use std::fmt::Write as _;
use std::path::Path;

use isac_core::error::IsacError;
use isac_core::experiments::{
    benchmark_comparison, detection_table, mse_mi_boundary, rate_grid, rate_mi_boundary, rate_mi_boundary_at,
    to_csv, validate_detection, validate_estimation, RegionPoint, TrialPlan,
};
use isac_core::optimizer::{solve, DesignSolution, Scenario};
use serde::Serialize;

use crate::config::{ConfigError, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Core(IsacError),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

impl From<IsacError> for Failure {
    fn from(e: IsacError) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Core(e) if e.is_infeasible() => 3,
            Failure::Core(IsacError::OutOfRange { .. }) => 2,
            Failure::Core(_) => 4,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "config error: {m}"),
            Failure::Core(e) if e.is_infeasible() => write!(f, "infeasible: {e}"),
            Failure::Core(e) => write!(f, "numerical failure: {e}"),
        }
    }
}

pub type Outcome = Result<String, Failure>;

fn json<T: Serialize>(value: &T) -> Outcome {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Failure::Config(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn scenario(cfg: &RunConfig) -> Result<Scenario, Failure> {
    Ok(Scenario::from_params(&cfg.params)?)
}

pub fn design(cfg: &RunConfig, format: Format) -> Outcome {
    let sc = scenario(cfg)?;
    let sol = solve(&sc)?;
    match format {
        Format::Json => json(&sol),
        Format::Csv => Ok(format!(
            "L,p_t,objective,rate,threshold,pd_at_mean_gain\n{},{},{},{},{},{}\n",
            sol.len, sol.p_t, sol.objective, sol.rate, sol.threshold, sol.pd_at_mean_gain
        )),
    }
}

fn points_out(points: &[RegionPoint], format: Format) -> Outcome {
    match format {
        Format::Csv => Ok(to_csv(points)),
        Format::Json => json(&points),
    }
}

fn lengths(cfg: &RunConfig) -> Vec<usize> {
    cfg.region
        .lengths
        .clone()
        .unwrap_or_else(|| (1..cfg.params.t_coherence).collect())
}

pub fn region_mse_mi(cfg: &RunConfig, format: Format) -> Outcome {
    let sc = scenario(cfg)?;
    let mut points = Vec::new();
    for len in lengths(cfg) {
        points.extend(mse_mi_boundary(&sc, cfg.region.power, len, cfg.region.n_points)?);
    }
    points_out(&points, format)
}

pub fn region_rate_mi(cfg: &RunConfig, format: Format) -> Outcome {
    let sc = scenario(cfg)?;
    let grid = rate_grid(&sc, cfg.region.n_points);
    let points = match &cfg.region.lengths {
        None => rate_mi_boundary(&sc, &grid)?,
        Some(lens) => {
            let mut all = Vec::new();
            for &len in lens {
                all.extend(rate_mi_boundary_at(&sc, len, &grid)?);
            }
            all
        }
    };
    points_out(&points, format)
}

pub fn compare_pilots(cfg: &RunConfig, format: Format) -> Outcome {
    let sc = scenario(cfg)?;
    let c = &cfg.compare;
    let table = benchmark_comparison(&sc, &c.kinds, cfg.compare_len(), c.n_points, c.draws, cfg.params.seed)?;
    match format {
        Format::Json => json(&table),
        Format::Csv => {
            let mut out = String::from("series,sweep_param,axis_x,axis_y,L\n");
            for p in &table.upa {
                let _ = writeln!(out, "upa,{},{},{},{}", p.sweep_param, p.axis_x, p.axis_y, p.len);
            }
            for k in &table.kinds {
                let name = serde_json::to_value(k.kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
                for p in &k.points {
                    let _ = writeln!(out, "{name},{},{},{},{}", p.sweep_param, p.axis_x, p.axis_y, p.len);
                }
            }
            Ok(out)
        }
    }
}

pub fn validate_detect(cfg: &RunConfig, format: Format) -> Outcome {
    let d = &cfg.detection;
    let plan = TrialPlan::new(d.trials, cfg.params.seed, "detection");
    let rep = validate_detection(&cfg.params, d.len, &plan, &d.pfa_grid, &d.s2_grid)?;
    match format {
        Format::Json => json(&rep),
        Format::Csv => {
            let mut out = String::from("quantity,pfa_target,threshold,noncentrality,trials,analytic,empirical,sigma,pass\n");
            for c in &rep.checks {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{}",
                    c.quantity, c.pfa_target, c.threshold, c.noncentrality, c.trials, c.analytic, c.empirical, c.sigma, c.pass
                );
            }
            Ok(out)
        }
    }
}

pub fn validate_estimate(cfg: &RunConfig, format: Format) -> Outcome {
    let sc = scenario(cfg)?;
    let e = &cfg.estimation;
    let plan = TrialPlan::new(e.trials, cfg.params.seed, "estimation");
    let rep = validate_estimation(&sc, cfg.estimation_len(), &plan)?;
    match format {
        Format::Json => json(&rep),
        Format::Csv => {
            let mut out = String::from("case,analytic,empirical,relative_error,standard_error,pass\n");
            for c in &rep.cases {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    c.label, c.analytic, c.empirical, c.relative_error, c.standard_error, c.pass
                );
            }
            Ok(out)
        }
    }
}

pub fn load_design(path: &Path) -> Result<DesignSolution, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("cannot read design {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Config(format!("design {}: {e}", path.display())))
}

pub fn detect_eval(cfg: &RunConfig, design_path: Option<&Path>, format: Format) -> Outcome {
    let sc = scenario(cfg)?;
    let path = design_path.or(cfg.detect_eval.design.as_deref());
    let design = match path {
        Some(p) => {
            let d = load_design(p)?;
            let chk = sc.check(&d)?;
            if !chk.passed {
                return Err(Failure::Config(format!(
                    "design {} violates the constraints of this config (energy {} of {}, rate {} vs floor {})",
                    p.display(),
                    chk.energy,
                    chk.budget,
                    chk.rate,
                    chk.rate_min
                )));
            }
            d
        }
        None => solve(&sc)?,
    };
    let plan = TrialPlan::new(cfg.detect_eval.trials, cfg.params.seed, "detect-eval");
    let rows = detection_table(&sc, &design, &cfg.detect_eval.pfa_grid, &plan)?;
    match format {
        Format::Json => json(&rows),
        Format::Csv => {
            let mut out = String::from("pfa,threshold,pd_mean_gain,pd_average\n");
            for r in &rows {
                let _ = writeln!(out, "{},{},{},{}", r.pfa, r.threshold, r.pd_mean_gain, r.pd_average);
            }
            Ok(out)
        }
    }
}
