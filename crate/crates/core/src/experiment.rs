//! End-to-end pipelines behind the command-line verbs. Every function here
//! is deterministic given the configuration, and every artifact it writes
//! carries the configuration that produced it.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, ValidationKind};
use crate::error::{Error, Result};
use crate::excitation::{constant_grid, pulse, Multisine, MultisineSpec, Signal};
use crate::ident::static_stage::{iv_csv, iv_curve, max_static_error};
use crate::ident::{
    assemble_model, estimate_frf, fit_dataset, fit_rational, order_scan, recover_ga, run_dynamic_stage,
    run_static_stage, DynamicStageConfig, EquilibriumDataset, FitOptions, FrfEstimate, IdentifiedModel,
    SimulatedPlant, StaticFit, StaticStageConfig,
};
use crate::lti::{check_circle_condition, check_positive_real, default_grid, RationalTF};
use crate::lure::{closed_loop_tf, lumped_tf, LureModel};
use crate::nonlinearity::{BasisFn, NlTerm};
use crate::sim::{derive_seed, simulate_plant, Controller, LurePlant, SampledRecord, SimConfig};
use crate::validation::{
    double_scroll_check, lobe_threshold, nrmse, spike_match, window_memory_test, DoubleScrollReport,
    MemoryTestResult, SpikeReport,
};

/// Seed stream of the validation input.
const VALIDATION_STREAM: u64 = 3;

/// Run `f` on a pool of `workers` threads (all cores when zero).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    pool.install(f)
}

fn write_json(dir: &Path, name: &str, value: &Value) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), text)?;
    Ok(())
}

fn read_json(dir: &Path, name: &str) -> Result<Value> {
    let path = dir.join(name);
    let text = std::fs::read_to_string(&path).map_err(|_| Error::MissingArtifact(path.display().to_string()))?;
    Ok(serde_json::from_str(&text)?)
}

/// Snapshot written next to the artifacts of every pipeline.
fn write_snapshot(cfg: &ExperimentConfig) -> Result<()> {
    write_text(&cfg.output_dir, "config.toml", &cfg.to_toml()?)
}

// ---------------------------------------------------------------- model info

#[derive(Clone, Debug, Serialize)]
pub struct ModelInfo {
    pub name: String,
    pub g: String,
    pub h: String,
    pub dc_gain: f64,
    pub sector: Option<[f64; 2]>,
    pub positive_real: bool,
    pub min_re: f64,
    /// Circle condition on `G` for the unshifted sector, when it straddles zero.
    pub circle_ok: Option<bool>,
    /// `(k, rho1 + k > 0)` for the configured gain.
    pub shifted_sector_ok: Option<(f64, bool)>,
    pub g_a: String,
    pub g_k: Option<String>,
}

pub fn model_info(name: &str, model: &LureModel, k: Option<f64>) -> Result<ModelInfo> {
    let pr = check_positive_real(model.g(), &default_grid())?;
    let sector = model.h().declared_sector();
    let circle_ok = match sector {
        Some(s) if s.rho1 < 0.0 && s.rho2 > 0.0 => Some(check_circle_condition(model.g(), s, &default_grid())?.ok),
        _ => None,
    };
    let a1 = model.h().a1();
    let g_k = match k {
        Some(k) => Some(closed_loop_tf(model.g(), a1, k)?.to_string()),
        None => None,
    };
    Ok(ModelInfo {
        name: name.to_string(),
        g: model.g().to_string(),
        h: model.h().to_string(),
        dc_gain: model.dc_gain(),
        sector: sector.map(|s| [s.rho1, s.rho2]),
        positive_real: pr.ok,
        min_re: pr.min_re,
        circle_ok,
        shifted_sector_ok: k.zip(sector).map(|(k, s)| (k, s.rho1 + k > 0.0)),
        g_a: lumped_tf(model.g(), a1)?.to_string(),
        g_k,
    })
}

impl std::fmt::Display for ModelInfo {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "model        {}", self.name)?;
        writeln!(f, "G(s)         {}", self.g)?;
        writeln!(f, "h(v)         {}", self.h)?;
        writeln!(f, "G(0)         {}", self.dc_gain)?;
        match self.sector {
            Some([a, b]) => writeln!(f, "sector       ({a}, {b})")?,
            None => writeln!(f, "sector       undeclared")?,
        }
        writeln!(f, "positive real {} (min Re G(jw) = {:.3e})", self.positive_real, self.min_re)?;
        if let Some(ok) = self.circle_ok {
            writeln!(f, "circle cond. {ok}")?;
        }
        if let Some((k, ok)) = self.shifted_sector_ok {
            writeln!(f, "rho1 + k > 0 {ok} (k = {k})")?;
        }
        writeln!(f, "G_a(s)       {}", self.g_a)?;
        if let Some(gk) = &self.g_k {
            writeln!(f, "G_k(s)       {gk}")?;
        }
        Ok(())
    }
}

// --------------------------------------------------------------- static stage

/// Coefficients `(1/G(0) + a1, c_2, ..., c_J)` of the true `i_∞` in the given
/// bases, or `None` when `h` has terms outside them.
pub fn true_coefficients(model: &LureModel, bases: &[BasisFn]) -> Option<Vec<f64>> {
    let mut w = vec![1.0 / model.dc_gain() + model.h().a1()];
    let mut used = vec![false; model.h().terms().len()];
    for b in bases {
        let mut c = 0.0;
        for (j, t) in model.h().terms().iter().enumerate() {
            if &t.basis == b {
                c += t.coeff;
                used[j] = true;
            }
        }
        w.push(c);
    }
    used.iter().all(|&u| u).then_some(w)
}

/// The true characteristic expressed as a fit, for the ablation that skips stage one.
pub fn truth_as_fit(model: &LureModel, bases: &[BasisFn]) -> Result<StaticFit> {
    let w_hat = true_coefficients(model, bases)
        .ok_or_else(|| Error::invalid("true nonlinearity is not spanned by the configured bases"))?;
    Ok(StaticFit {
        w_hat,
        bases: bases.to_vec(),
        residual_norm: 0.0,
        condition: 1.0,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StaticOutcome {
    pub dataset: EquilibriumDataset,
    pub fit: StaticFit,
    pub truth: Option<Vec<f64>>,
    /// Largest `|i_∞ - î_∞|` over the grid span.
    pub max_error: f64,
    pub order_scan: Vec<(usize, f64)>,
}

fn sim_config(cfg: &ExperimentConfig) -> SimConfig {
    SimConfig::new(cfg.ts, cfg.ts).with_sigma(cfg.sigma, cfg.seed)
}

pub fn iv_grid(cfg: &ExperimentConfig) -> Vec<f64> {
    let s = &cfg.static_stage;
    (0..=200).map(|i| s.v_min + (s.v_max - s.v_min) * i as f64 / 200.0).collect()
}

pub fn run_static(cfg: &ExperimentConfig) -> Result<StaticOutcome> {
    let model = cfg.model.build()?;
    let s = &cfg.static_stage;
    let stage = StaticStageConfig {
        k: s.k,
        grid: constant_grid(&s.grid())?,
        settle_time: s.settle_time,
        n_avg: s.n_avg,
    };
    let source = SimulatedPlant::new(&model, sim_config(cfg))?;
    let dataset = run_static_stage(&source, &stage, model.h().declared_sector())?;
    let fit = fit_dataset(&dataset, &s.bases)?;
    Ok(StaticOutcome {
        truth: true_coefficients(&model, &s.bases),
        max_error: max_static_error(&fit, &model, &iv_grid(cfg)),
        order_scan: order_scan(&dataset, &s.bases)?,
        dataset,
        fit,
    })
}

/// Writes `iv_curve.csv` and `static_fit.json`.
pub fn static_pipeline(cfg: &ExperimentConfig) -> Result<StaticOutcome> {
    let out = with_workers(cfg.workers, || run_static(cfg))?;
    let model = cfg.model.build()?;
    let dir = &cfg.output_dir;
    write_snapshot(cfg)?;
    write_text(dir, "iv_curve.csv", &iv_csv(&iv_curve(&out.fit, Some(&model), &iv_grid(cfg))))?;
    write_json(dir, "static_fit.json", &json!({ "config": cfg.to_json(), "static": out }))?;
    Ok(out)
}

// -------------------------------------------------------------- dynamic stage

#[derive(Clone, Debug)]
pub struct DynamicOutcome {
    pub frf: FrfEstimate,
    pub model: IdentifiedModel,
    /// `G / (1 + a1 G)` of the ground truth.
    pub true_g_a: RationalTF,
    /// Largest relative coefficient error of `Ĝ_a` against `true_g_a`.
    pub g_a_coeff_error: Option<f64>,
}

/// Largest `|a - b| / |b|` over matching monic coefficients, `None` on an order mismatch.
pub fn coefficient_error(est: &RationalTF, truth: &RationalTF) -> Option<f64> {
    if est.num().len() != truth.num().len() || est.den().len() != truth.den().len() {
        return None;
    }
    let pairs = est.num().iter().zip(truth.num()).chain(est.den().iter().zip(truth.den()));
    Some(pairs.map(|(a, b)| (a - b).abs() / b.abs().max(1e-12)).fold(0.0, f64::max))
}

pub fn dynamic_stage_config(cfg: &ExperimentConfig) -> Result<DynamicStageConfig> {
    Ok(DynamicStageConfig {
        k: cfg.dynamic_stage.k,
        multisine: cfg.multisine_spec()?,
        realizations: cfg.dynamic_stage.realizations,
    })
}

pub fn run_dynamic(cfg: &ExperimentConfig, fit: &StaticFit) -> Result<DynamicOutcome> {
    let truth = cfg.model.build()?;
    let d = &cfg.dynamic_stage;
    let stage = dynamic_stage_config(cfg)?;
    let spec = &stage.multisine;
    let source = SimulatedPlant::new(&truth, sim_config(cfg).with_mode(d.mode))?;
    let records = run_dynamic_stage(&source, &fit.nonlinear_terms(), &stage)?;
    let frf = estimate_frf(&records, spec.n()?, spec.n_f()?)?;
    let g_k = fit_rational(&frf, d.n_poles, d.n_zeros, &FitOptions::default())?;
    let g_a = recover_ga(&g_k, d.k)?;
    let model = assemble_model(g_a, g_k, fit, d.k, Some(&frf))?;
    let true_g_a = lumped_tf(truth.g(), truth.h().a1())?;
    Ok(DynamicOutcome {
        g_a_coeff_error: coefficient_error(&model.g_a, &true_g_a),
        frf,
        model,
        true_g_a,
    })
}

fn load_static_fit(dir: &Path) -> Result<StaticFit> {
    let v = read_json(dir, "static_fit.json")?;
    Ok(serde_json::from_value(v["static"]["fit"].clone())?)
}

/// Writes `frf.csv`, `G_k_hat.json`, `G_a_hat.json` and `identified_model.json`.
/// With `use_truth` the true nonlinearity replaces the static fit.
pub fn dynamic_pipeline(cfg: &ExperimentConfig, use_truth: bool) -> Result<DynamicOutcome> {
    let fit = if use_truth {
        truth_as_fit(&cfg.model.build()?, &cfg.static_stage.bases)?
    } else {
        load_static_fit(&cfg.output_dir)?
    };
    let out = with_workers(cfg.workers, || run_dynamic(cfg, &fit))?;
    let dir = &cfg.output_dir;
    let snap = cfg.to_json();
    write_snapshot(cfg)?;
    write_text(dir, "frf.csv", &out.frf.to_csv())?;
    write_json(dir, "G_k_hat.json", &json!({ "config": snap, "tf": out.model.g_k }))?;
    write_json(
        dir,
        "G_a_hat.json",
        &json!({
            "config": snap,
            "tf": out.model.g_a,
            "truth": out.true_g_a,
            "coefficient_error": out.g_a_coeff_error,
            "stable": out.model.g_a.is_hurwitz()?,
        }),
    )?;
    write_json(
        dir,
        "identified_model.json",
        &json!({ "config": snap, "use_truth": use_truth, "model": out.model }),
    )?;
    Ok(out)
}

pub fn load_identified_model(dir: &Path) -> Result<IdentifiedModel> {
    let v = read_json(dir, "identified_model.json")?;
    Ok(serde_json::from_value(v["model"].clone())?)
}

// ----------------------------------------------------------------- validation

/// The ground truth in the same lumped form as an identified model.
pub fn truth_as_model(model: &LureModel) -> Result<IdentifiedModel> {
    let a1 = model.h().a1();
    let g_a = lumped_tf(model.g(), a1)?;
    let fit = StaticFit {
        w_hat: std::iter::once(1.0 / model.dc_gain() + a1)
            .chain(model.h().terms().iter().map(|t| t.coeff))
            .collect(),
        bases: model.h().terms().iter().map(|t| t.basis.clone()).collect(),
        residual_norm: 0.0,
        condition: 1.0,
    };
    assemble_model(g_a.clone(), g_a, &fit, 0.0, None)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReplayReport {
    pub nrmse: f64,
    /// NRMSE restricted to samples at or after the last missed spike.
    pub nrmse_after_last_miss: Option<f64>,
    pub spikes: SpikeReport,
    pub window: [f64; 2],
}

#[derive(Clone, Debug)]
pub struct Replay {
    pub report: ReplayReport,
    pub t: Vec<f64>,
    pub input: Vec<f64>,
    pub v: Vec<f64>,
    pub v_hat: Vec<f64>,
}

impl Replay {
    /// Header `t,i,v,v_hat,error`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,i,v,v_hat,error\n");
        for n in 0..self.t.len() {
            let _ = writeln!(
                s,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                self.t[n],
                self.input[n],
                self.v[n],
                self.v_hat[n],
                self.v[n] - self.v_hat[n]
            );
        }
        s
    }
}

/// Validation input: the configured mean plus a random-phase multisine.
pub fn replay_input(cfg: &ExperimentConfig) -> Result<Signal> {
    let v = &cfg.validation;
    let spec = MultisineSpec {
        period: v.warmup + v.duration,
        ts: cfg.ts,
        f_max: v.input_f_max,
        u_bar: 1.0,
        seed: derive_seed(cfg.seed, VALIDATION_STREAM, 0),
        periods: 1,
    }
    .with_rms(v.input_rms)?;
    Ok(Signal::Sum(vec![
        Signal::Constant(v.input_mean),
        Signal::multisine(Multisine::new(&spec)?),
    ]))
}

/// Open-loop noiseless replay of one input through both models.
pub fn replay(cfg: &ExperimentConfig, truth: &IdentifiedModel, model: &IdentifiedModel) -> Result<Replay> {
    let v = &cfg.validation;
    let input = replay_input(cfg)?;
    let sim = SimConfig::new(cfg.ts, v.warmup + v.duration).with_truth();
    let ctrl = Controller::OpenLoop { input };
    let run = |m: &IdentifiedModel| simulate_plant(&m.plant()?, &ctrl, &sim);
    let (a, b) = rayon::join(|| run(truth), || run(model));
    let (a, b): (SampledRecord, SampledRecord) = (a?, b?);
    let skip = (v.warmup / cfg.ts).round() as usize;
    let y = &a.output()[skip..];
    let y_hat = &b.output()[skip..];
    let spikes = spike_match(y, y_hat, cfg.ts, v.spike_threshold, v.min_separation)?;
    let nrmse_after_last_miss = match spikes.missed_at.last() {
        Some(&t) => {
            let from = ((t + v.min_separation) / cfg.ts).round() as usize;
            (from + 2 < y.len())
                .then(|| nrmse(&y[from..], &y_hat[from..]).ok())
                .flatten()
        }
        None => None,
    };
    let report = ReplayReport {
        nrmse: nrmse(y, y_hat)?,
        nrmse_after_last_miss,
        spikes: SpikeReport {
            reference: shift(&spikes.reference, v.warmup),
            model: shift(&spikes.model, v.warmup),
            missed_at: shift(&spikes.missed_at, v.warmup),
            ..spikes
        },
        window: [v.warmup, v.warmup + v.duration],
    };
    Ok(Replay {
        report,
        t: a.times()[skip..].to_vec(),
        input: a.i.as_ref().map(|i| i[skip..].to_vec()).unwrap_or_default(),
        v: y.to_vec(),
        v_hat: y_hat.to_vec(),
    })
}

fn shift(t: &[f64], by: f64) -> Vec<f64> {
    t.iter().map(|t| t + by).collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AttractorReport {
    pub truth: DoubleScrollReport,
    pub model: DoubleScrollReport,
    pub x0: Vec<f64>,
    pub duration: f64,
}

#[derive(Clone, Debug)]
pub struct Attractor {
    pub report: AttractorReport,
    pub ts: f64,
    pub truth: Vec<Vec<f64>>,
    pub model: Vec<Vec<f64>>,
}

impl Attractor {
    /// Header `t,x,y,z,x_hat,y_hat,z_hat` for third-order models, `x1..`
    /// names otherwise.
    pub fn to_csv(&self) -> String {
        let n = self.truth.first().map_or(0, Vec::len);
        let names: Vec<String> = if n == 3 {
            ["x", "y", "z"].iter().map(|s| s.to_string()).collect()
        } else {
            (1..=n).map(|i| format!("x{i}")).collect()
        };
        let mut s = String::from("t");
        for c in &names {
            let _ = write!(s, ",{c}");
        }
        for c in &names {
            let _ = write!(s, ",{c}_hat");
        }
        s.push('\n');
        for (k, (a, b)) in self.truth.iter().zip(&self.model).enumerate() {
            let _ = write!(s, "{:.16e}", k as f64 * self.ts);
            for x in a.iter().chain(b) {
                let _ = write!(s, ",{x:.16e}");
            }
            s.push('\n');
        }
        s
    }
}

/// Autonomous runs of both models in modal coordinates from the same state.
pub fn attractor(cfg: &ExperimentConfig, truth: &IdentifiedModel, model: &IdentifiedModel) -> Result<Attractor> {
    let v = &cfg.validation;
    let mut sim = SimConfig::new(v.attractor_ts, v.attractor_duration);
    sim.record_state = true;
    sim.x0 = Some(v.x0.clone());
    let ctrl = Controller::OpenLoop { input: Signal::zero() };
    let run = |m: &IdentifiedModel| -> Result<(Vec<Vec<f64>>, DoubleScrollReport)> {
        let plant = m.modal_plant()?;
        let rec = simulate_plant(&plant, &ctrl, &sim)?;
        let states = rec.states.unwrap_or_default();
        let thr = lobe_threshold(&m.g_a, &m.h)?;
        let report = double_scroll_check(&states, thr)?;
        Ok((states, report))
    };
    let (a, b) = rayon::join(|| run(truth), || run(model));
    let ((sa, ra), (sb, rb)) = (a?, b?);
    Ok(Attractor {
        report: AttractorReport {
            truth: ra,
            model: rb,
            x0: v.x0.clone(),
            duration: v.attractor_duration,
        },
        ts: v.attractor_ts,
        truth: sa,
        model: sb,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ValidationReport {
    Replay(ReplayReport),
    Attractor(AttractorReport),
}

/// Validate `model` against the configured ground truth; returns the report
/// and the CSV body of the underlying trajectories.
pub fn validate_model(cfg: &ExperimentConfig, model: &IdentifiedModel) -> Result<(ValidationReport, String)> {
    let truth = truth_as_model(&cfg.model.build()?)?;
    Ok(match cfg.validation.kind {
        ValidationKind::Replay => {
            let r = replay(cfg, &truth, model)?;
            (ValidationReport::Replay(r.report.clone()), r.to_csv())
        }
        ValidationKind::Attractor => {
            let a = attractor(cfg, &truth, model)?;
            (ValidationReport::Attractor(a.report.clone()), a.to_csv())
        }
    })
}

/// Writes `validation.json` and `validation.csv` (replay) or `attractor.csv`.
pub fn validate_pipeline(cfg: &ExperimentConfig) -> Result<ValidationReport> {
    let model = load_identified_model(&cfg.output_dir)?;
    let (report, csv) = with_workers(cfg.workers, || validate_model(cfg, &model))?;
    let dir = &cfg.output_dir;
    write_snapshot(cfg)?;
    let name = match report {
        ValidationReport::Replay(_) => "validation.csv",
        ValidationReport::Attractor(_) => "attractor.csv",
    };
    write_text(dir, name, &csv)?;
    write_json(dir, "validation.json", &json!({ "config": cfg.to_json(), "report": report }))?;
    Ok(report)
}

// ---------------------------------------------------------------- memory test

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MemoryReport {
    pub open_loop: MemoryTestResult,
    pub closed_loop: MemoryTestResult,
    pub k: f64,
}

/// Window test for the open loop under the pulse input and for the loop closed
/// with `i = k (v_r - v)` under the same signal as reference.
pub fn memory_test(cfg: &ExperimentConfig) -> Result<MemoryReport> {
    let m = &cfg.memory;
    let model = cfg.model.build()?;
    let plant = LurePlant::from_model(&model)?;
    let u = pulse(m.t1, m.t2, m.amplitude)?;
    let last = m.probes.iter().copied().fold(0.0, f64::max);
    let sim = SimConfig::new(m.ts, ((last / m.ts).round() + 1.0) * m.ts);
    let open = |s: &Signal| -> Result<Vec<f64>> {
        Ok(simulate_plant(&plant, &Controller::OpenLoop { input: s.clone() }, &sim)?.v_m)
    };
    let closed = |s: &Signal| -> Result<Vec<f64>> {
        Ok(simulate_plant(&plant, &Controller::linear(m.k, s.clone()), &sim)?.v_m)
    };
    let open_loop = window_memory_test(open, &u, m.ts, &m.eta, &m.probes, m.epsilon)?;
    let closed_loop = window_memory_test(closed, &u, m.ts, &m.eta, &m.probes, m.epsilon)?;
    Ok(MemoryReport {
        open_loop,
        closed_loop,
        k: m.k,
    })
}

/// Writes `memory_test.json`.
pub fn memory_pipeline(cfg: &ExperimentConfig) -> Result<MemoryReport> {
    let report = with_workers(cfg.workers, || memory_test(cfg))?;
    write_snapshot(cfg)?;
    write_json(&cfg.output_dir, "memory_test.json", &json!({ "config": cfg.to_json(), "report": report }))?;
    Ok(report)
}

// ------------------------------------------------------------------- simulate

/// Single run of the configured model; writes `simulation.csv` and its sidecar.
pub fn simulate_pipeline(cfg: &ExperimentConfig) -> Result<SampledRecord> {
    let s = &cfg.simulate;
    let model = cfg.model.build()?;
    let signal = match s.input.as_str() {
        "constant" => Signal::Constant(s.level),
        "pulse" => pulse(cfg.memory.t1, cfg.memory.t2, s.level)?,
        "multisine" => Signal::multisine(Multisine::new(&cfg.multisine_spec()?)?),
        other => return Err(Error::Config(format!("unknown input '{other}'"))),
    };
    let ctrl = match s.controller.as_str() {
        "open" => Controller::OpenLoop { input: signal },
        "linear" => Controller::linear(s.k.unwrap_or(cfg.static_stage.k), signal),
        "feedlin" => {
            let fit = truth_as_fit(&model, &cfg.static_stage.bases)?;
            Controller::feedlin(s.k.unwrap_or(cfg.dynamic_stage.k), fit.nonlinear_terms(), signal)?
        }
        other => return Err(Error::Config(format!("unknown controller '{other}'"))),
    };
    let mut sim = SimConfig::new(cfg.ts, s.duration).with_sigma(cfg.sigma, cfg.seed).with_truth();
    sim.x0 = s.x0.clone();
    let mut rec = simulate_plant(&LurePlant::from_model(&model)?, &ctrl, &sim)?;
    rec.meta.insert("config".into(), cfg.to_json());
    write_snapshot(cfg)?;
    rec.write(&cfg.output_dir, "simulation")?;
    Ok(rec)
}

/// Nonlinear terms of a model in the configured bases.
pub fn feedlin_terms(model: &LureModel, bases: &[BasisFn]) -> Result<Vec<NlTerm>> {
    Ok(truth_as_fit(model, bases)?.nonlinear_terms())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn true_coefficients_match_hand_values() {
        let fhn = LureModel::builtin("fhn").unwrap();
        let w = true_coefficients(&fhn, &[BasisFn::Monomial(2), BasisFn::Monomial(3)]).unwrap();
        // 1 / 0.75 - 1 = 1/3.
        assert!((w[0] - 1.0 / 3.0).abs() < 1e-14);
        assert_eq!(&w[1..], &[0.0, 1.0 / 3.0]);
        assert!(true_coefficients(&fhn, &[BasisFn::Monomial(2)]).is_none());
        let chua = LureModel::builtin("chua").unwrap();
        let w = true_coefficients(&chua, &[BasisFn::HingePos(1.0), BasisFn::HingeNeg(1.0)]).unwrap();
        // G(0) = 1 / r with r = 0.7.
        assert!((w[0] - (0.7 - 4.0)).abs() < 1e-12);
        assert_eq!(&w[1..], &[3.9, -3.9]);
    }

    #[test]
    fn model_info_reports() {
        let fhn = LureModel::builtin("fhn").unwrap();
        let info = model_info("fhn", &fhn, Some(1.5)).unwrap();
        assert!((info.dc_gain - 0.75).abs() < 1e-15);
        assert!(info.positive_real);
        assert_eq!(info.shifted_sector_ok, Some((1.5, true)));
        let chua = LureModel::builtin("chua").unwrap();
        let info = model_info("chua", &chua, Some(5.0)).unwrap();
        assert_eq!(info.sector, Some([-4.0, -0.1]));
        assert!(info.to_string().contains("G(0)"));
    }

    #[test]
    fn identity_self_validation() {
        let mut cfg = ExperimentConfig::preset("desk-fhn").unwrap();
        cfg.validation.duration = 20.0;
        let truth = truth_as_model(&cfg.model.build().unwrap()).unwrap();
        let r = replay(&cfg, &truth, &truth).unwrap();
        assert_eq!(r.report.nrmse, 1.0);
        assert_eq!(r.report.spikes.missed, 0);
    }

    #[test]
    fn truth_lumped_form_matches_published_values() {
        let truth = truth_as_model(&LureModel::builtin("fhn").unwrap()).unwrap();
        assert_eq!(truth.g_a.den(), &[1.0, -19.25, 5.0]);
        assert_eq!(truth.h.terms().len(), 1);
    }

    #[test]
    fn coefficient_error_detects_order_mismatch() {
        let a = RationalTF::new(vec![1.0], vec![1.0, 2.0]).unwrap();
        let b = RationalTF::new(vec![1.0], vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(coefficient_error(&a, &a), Some(0.0));
        assert_eq!(coefficient_error(&a, &b), None);
    }

    #[test]
    fn missing_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_identified_model(dir.path()), Err(Error::MissingArtifact(_))));
        assert!(matches!(load_static_fit(dir.path()), Err(Error::MissingArtifact(_))));
    }
}
