//! The five pipeline stages as pure functions from inputs to artifacts.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use hyperent::analyzers::{
    stabilizer_settings, tomography_plan_with, tomography_settings, AnalyzerSetting,
    ProjectorSetting, STABILIZER_NAMES,
};
use hyperent::counts::{
    expected_setting, expected_settings, sample_setting, sample_settings, CountRecord, Exposure,
    RunSeed,
};
use hyperent::device;
use hyperent::hilbert::{CMatrix, DensityMatrix};
use hyperent::metrics::{self, DofPoint, FringeFit, MeritReport};
use hyperent::state::{self, Dof};
use hyperent::tomo::{
    self, mc_error, mle_reconstruct, stabilizer_mc_error, ErrorEstimate, MleOptions, Observation,
    Resampling, TomoError, TomographyInput,
};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::{CountMode, ExperimentConfig, Resolved};
use crate::error::{CliError, Result};
use crate::io::{self, SweepRow};

/// Prefix that separates stabilizer rows from tomography rows in the counts file.
pub const STABILIZER_PREFIX: &str = "W:";

const STREAM_TOMOGRAPHY: u64 = 1;
const STREAM_STABILIZERS: u64 = 10;
const STREAM_SWEEP: u64 = 20;
const STREAM_MC_TOMOGRAPHY: u64 = 100;
const STREAM_MC_STABILIZERS: u64 = 110;

fn dof_index(dof: Dof) -> u64 {
    match dof {
        Dof::TimeBin => 0,
        Dof::FrequencyBin => 1,
    }
}

fn model_err(e: impl std::fmt::Display) -> CliError {
    CliError::other(e)
}

fn exposure(resolved: &Resolved, t: f64) -> Exposure {
    Exposure {
        pair_rate_hz: resolved.detected_pair_rate_hz,
        integration_time_s: t,
        car: resolved.car,
    }
}

fn count_settings(
    cfg: &ExperimentConfig,
    resolved: &Resolved,
    rho: &DensityMatrix,
    settings: &[AnalyzerSetting],
    t: f64,
    seed: RunSeed,
) -> Result<Vec<(ProjectorSetting, CountRecord)>> {
    let e = exposure(resolved, t);
    match cfg.measurement.mode {
        CountMode::Sampled => sample_settings(rho, settings, &resolved.analyzer, &e, seed),
        CountMode::Noiseless => expected_settings(rho, settings, &resolved.analyzer, &e),
    }
    .map_err(model_err)
}

/// Every count row of a run: tomography of each configured DoF, then the
/// stabilizer settings.
pub fn simulate(cfg: &ExperimentConfig) -> Result<Vec<CountRecord>> {
    let resolved = cfg.resolve()?;
    let rho = state::noisy_he_state(&resolved.noise).map_err(model_err)?;
    let t = cfg.measurement.integration_time_s;
    let mut rows = Vec::new();
    for &dof in &cfg.measurement.dofs {
        let marginal = state::marginal(&rho, dof).map_err(model_err)?;
        let seed = RunSeed::new(cfg.run.seed, STREAM_TOMOGRAPHY + dof_index(dof));
        let counted = count_settings(
            cfg,
            &resolved,
            &marginal,
            &tomography_settings(dof),
            t,
            seed,
        )?;
        rows.extend(counted.into_iter().map(|(_, r)| r));
    }
    if cfg.measurement.stabilizers {
        for k in 0..4 {
            let settings = stabilizer_settings(k);
            let marginal = state::marginal(&rho, settings[0].dof()).map_err(model_err)?;
            let seed = RunSeed::new(cfg.run.seed, STREAM_STABILIZERS + k as u64);
            for (_, mut r) in count_settings(cfg, &resolved, &marginal, &settings, t, seed)? {
                r.setting_label = format!("{STABILIZER_PREFIX}{}", r.setting_label);
                rows.push(r);
            }
        }
    }
    Ok(rows)
}

/// Phase of sweep point `k` of `n`.
pub fn sweep_phase(k: usize, n: usize) -> f64 {
    TAU * k as f64 / n as f64
}

/// Two-photon fringes: the signal analyzer phase is stepped, the idler stays at 0.
pub fn sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    let Some(section) = &cfg.measurement.sweep else {
        return Err(CliError::Schema(
            "sweep requested but [measurement.sweep] is missing".into(),
        ));
    };
    let resolved = cfg.resolve()?;
    let rho = state::noisy_he_state(&resolved.noise).map_err(model_err)?;
    let e = exposure(&resolved, section.integration_time_s);
    let mut rows = Vec::new();
    for &dof in &cfg.measurement.dofs {
        let marginal = state::marginal(&rho, dof).map_err(model_err)?;
        let base = RunSeed::new(cfg.run.seed, STREAM_SWEEP + dof_index(dof));
        for k in 0..section.points {
            let phase = sweep_phase(k, section.points);
            let setting = AnalyzerSetting::interferometric(dof, phase, 0.0);
            let projectors = setting.projectors(&resolved.analyzer).map_err(model_err)?;
            let records = match cfg.measurement.mode {
                CountMode::Sampled => {
                    sample_setting(&marginal, &projectors, &e, base.child(k as u64))
                }
                CountMode::Noiseless => expected_setting(&marginal, &projectors, &e),
            }
            .map_err(model_err)?;
            rows.extend(records.into_iter().map(|record| SweepRow {
                dof,
                phase_rad: phase,
                record,
            }));
        }
    }
    Ok(rows)
}

/// Count rows matched back to the projectors that produced them.
#[derive(Debug, Clone)]
pub struct CountData {
    pub tomography: Vec<TomographyInput>,
    pub stabilizers: Option<[Vec<Observation>; 4]>,
}

impl CountData {
    pub fn input(&self, dof: Dof) -> Option<&TomographyInput> {
        self.tomography.iter().find(|i| i.dof() == dof)
    }
}

pub fn organize(cfg: &ExperimentConfig, rows: &[CountRecord]) -> Result<CountData> {
    let resolved = cfg.resolve()?;
    let mut tomo_lookup: BTreeMap<String, ProjectorSetting> = BTreeMap::new();
    for &dof in &cfg.measurement.dofs {
        for p in tomography_plan_with(dof, &resolved.analyzer).map_err(model_err)? {
            tomo_lookup.insert(p.label(), p);
        }
    }
    let mut stab_lookup: BTreeMap<String, (usize, ProjectorSetting)> = BTreeMap::new();
    let mut stab_expected = [0usize; 4];
    if cfg.measurement.stabilizers {
        for (k, n) in stab_expected.iter_mut().enumerate() {
            for s in stabilizer_settings(k) {
                for p in s.projectors(&resolved.analyzer).map_err(model_err)? {
                    stab_lookup.insert(format!("{STABILIZER_PREFIX}{}", p.label()), (k, p));
                    *n += 1;
                }
            }
        }
    }

    let mut per_dof: BTreeMap<Dof, Vec<Observation>> = BTreeMap::new();
    let mut groups: [Vec<Observation>; 4] = Default::default();
    for r in rows {
        let label = format!("{}:{}", r.setting_label, r.outcome_label);
        if let Some(p) = tomo_lookup.get(&label) {
            per_dof
                .entry(p.dof)
                .or_default()
                .push(Observation::from_record(p.clone(), r));
        } else if let Some((k, p)) = stab_lookup.get(&label) {
            groups[*k].push(Observation::from_record(p.clone(), r));
        } else {
            return Err(CliError::Incomplete(format!("unrecognized row {label}")));
        }
    }

    let mut tomography = Vec::new();
    for &dof in &cfg.measurement.dofs {
        let obs = per_dof.remove(&dof).unwrap_or_default();
        let input = TomographyInput::new(dof, obs, resolved.car).map_err(|e| match e {
            TomoError::IncompletePlan { .. } | TomoError::DuplicateSetting(_) => {
                CliError::Incomplete(e.to_string())
            }
            other => CliError::other(other),
        })?;
        tomography.push(input);
    }
    let stabilizers = if cfg.measurement.stabilizers {
        for (k, g) in groups.iter().enumerate() {
            let mut labels: Vec<String> = g.iter().map(|o| o.setting.label()).collect();
            labels.sort();
            labels.dedup();
            if labels.len() != g.len() || g.len() != stab_expected[k] {
                return Err(CliError::Incomplete(format!(
                    "stabilizer {} needs {} distinct rows, found {}",
                    STABILIZER_NAMES[k],
                    stab_expected[k],
                    g.len()
                )));
            }
        }
        Some(groups)
    } else {
        None
    };
    Ok(CountData {
        tomography,
        stabilizers,
    })
}

/// Reconstructed two-qubit state of one DoF and its convergence record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DofReconstruction {
    pub dof: Dof,
    /// Row-major.
    pub rho_real: Vec<Vec<f64>>,
    pub rho_imag: Vec<Vec<f64>>,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    pub normalization_rate_hz: f64,
    pub total_counts: f64,
    pub fidelity: f64,
    pub purity: f64,
    pub s_parameter: f64,
}

impl DofReconstruction {
    pub fn density_matrix(&self) -> Result<DensityMatrix> {
        let m = CMatrix::from_fn(4, 4, |r, c| {
            Complex64::new(self.rho_real[r][c], self.rho_imag[r][c])
        });
        DensityMatrix::new(m, self.dof.layout())
            .map_err(|e| CliError::Incomplete(format!("stored {} matrix: {e}", self.dof)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionFile {
    pub config: String,
    pub reconstructions: Vec<DofReconstruction>,
}

impl ReconstructionFile {
    pub fn get(&self, dof: Dof) -> Option<&DofReconstruction> {
        self.reconstructions.iter().find(|r| r.dof == dof)
    }
}

fn split(m: &CMatrix) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let re = (0..4)
        .map(|r| (0..4).map(|c| m[(r, c)].re).collect())
        .collect();
    let im = (0..4)
        .map(|r| (0..4).map(|c| m[(r, c)].im).collect())
        .collect();
    (re, im)
}

pub fn reconstruct(cfg: &ExperimentConfig, data: &CountData) -> Result<ReconstructionFile> {
    let mut out = Vec::new();
    for input in &data.tomography {
        let rec = mle_reconstruct(input, &MleOptions::default()).map_err(|e| match e {
            TomoError::AllZeroCounts => CliError::Incomplete(e.to_string()),
            other => CliError::other(other),
        })?;
        let point = metrics::dof_point(rec.rho()).map_err(model_err)?;
        let (rho_real, rho_imag) = split(rec.rho().matrix());
        out.push(DofReconstruction {
            dof: input.dof(),
            rho_real,
            rho_imag,
            log_likelihood: rec.log_likelihood,
            iterations: rec.iterations,
            converged: rec.converged,
            normalization_rate_hz: rec.normalization_rate,
            total_counts: input.total_counts(),
            fidelity: point.fidelity,
            purity: point.purity,
            s_parameter: point.s_parameter,
        });
    }
    Ok(ReconstructionFile {
        config: cfg.to_toml(),
        reconstructions: out,
    })
}

/// Figures of merit of the generating state, for comparison with the estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelValues {
    #[serde(rename = "TB")]
    pub tb: DofPoint,
    #[serde(rename = "FB")]
    pub fb: DofPoint,
    pub stabilizers: [f64; 4],
    pub witness: f64,
}

pub fn model_values(resolved: &Resolved) -> Result<ModelValues> {
    let rho = state::noisy_he_state(&resolved.noise).map_err(model_err)?;
    let point = |dof| {
        state::marginal(&rho, dof)
            .map_err(model_err)
            .and_then(|m| metrics::dof_point(&m).map_err(model_err))
    };
    let stabilizers = metrics::stabilizer_values(&rho).map_err(model_err)?;
    Ok(ModelValues {
        tb: point(Dof::TimeBin)?,
        fb: point(Dof::FrequencyBin)?,
        stabilizers,
        witness: metrics::witness(&stabilizers, 2).map_err(model_err)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DofFringe {
    pub dof: Dof,
    #[serde(flatten)]
    pub fit: FringeFit,
}

/// Cosine fit of each DoF's sweep, on raw coincidence rates (accidentals included).
pub fn fit_fringes(rows: &[SweepRow]) -> Result<Vec<DofFringe>> {
    let mut out = Vec::new();
    for dof in Dof::BOTH {
        let samples: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.dof == dof)
            .map(|r| {
                (
                    r.phase_rad,
                    r.record.coincidences / r.record.integration_time_s,
                )
            })
            .collect();
        if samples.is_empty() {
            continue;
        }
        let fit = metrics::visibility_from_fringe(&samples)
            .map_err(|e| CliError::Incomplete(format!("{dof} sweep: {e}")))?;
        out.push(DofFringe { dof, fit });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsFile {
    pub config: String,
    pub resampling: Resampling,
    pub merit_report: MeritReport,
    pub model: ModelValues,
    pub fringes: Vec<DofFringe>,
}

pub fn compute_metrics(
    cfg: &ExperimentConfig,
    data: &CountData,
    recon: &ReconstructionFile,
    sweep_rows: Option<&[SweepRow]>,
) -> Result<MetricsFile> {
    let resolved = cfg.resolve()?;
    let missing = |what: &str| CliError::Incomplete(format!("metrics need {what}"));
    let rec_tb = recon
        .get(Dof::TimeBin)
        .ok_or_else(|| missing("a TB reconstruction"))?;
    let rec_fb = recon
        .get(Dof::FrequencyBin)
        .ok_or_else(|| missing("an FB reconstruction"))?;
    let in_tb = data
        .input(Dof::TimeBin)
        .ok_or_else(|| missing("TB tomography counts"))?;
    let in_fb = data
        .input(Dof::FrequencyBin)
        .ok_or_else(|| missing("FB tomography counts"))?;
    let groups = data
        .stabilizers
        .as_ref()
        .ok_or_else(|| missing("stabilizer counts"))?;

    let resampling = match cfg.measurement.mode {
        CountMode::Sampled => Resampling::Poisson,
        CountMode::Noiseless => Resampling::Fixed,
    };
    let n = cfg.run.resamples;
    let opts = MleOptions::default();
    let mc = |input: &TomographyInput| {
        let seed = RunSeed::new(cfg.run.seed, STREAM_MC_TOMOGRAPHY + dof_index(input.dof()));
        mc_error(input, n, seed, resampling, &opts).map_err(model_err)
    };
    let err_tb = mc(in_tb)?;
    let err_fb = mc(in_fb)?;
    let stab = stabilizer_mc_error(
        groups,
        resolved.car,
        n,
        RunSeed::new(cfg.run.seed, STREAM_MC_STABILIZERS),
        resampling,
    )
    .map_err(|e| match e {
        TomoError::EmptyStabilizer(_) => CliError::Incomplete(e.to_string()),
        other => CliError::other(other),
    })?;
    let errors = ErrorEstimate {
        tb: err_tb,
        fb: err_fb,
        stabilizers: stab.stds,
        witness: stab.witness_std,
        resamples: n,
    };
    let mut report = metrics::merit_report_with_stabilizers(
        &rec_tb.density_matrix()?,
        &rec_fb.density_matrix()?,
        stab.values,
        &errors,
    )
    .map_err(model_err)?;
    let fringes = match sweep_rows {
        Some(rows) => fit_fringes(rows)?,
        None => Vec::new(),
    };
    for f in &fringes {
        match f.dof {
            Dof::TimeBin => report.tb.visibility = Some(f.fit.visibility),
            Dof::FrequencyBin => report.fb.visibility = Some(f.fit.visibility),
        }
    }
    Ok(MetricsFile {
        config: cfg.to_toml(),
        resampling,
        merit_report: report,
        model: model_values(&resolved)?,
        fringes,
    })
}

/// Published figures used as comparison columns in the report.
pub mod published {
    /// (fidelity, std, purity, std, S, std)
    pub const TB: [f64; 6] = [0.949, 0.006, 0.921, 0.006, 2.669, 0.013];
    pub const FB: [f64; 6] = [0.906, 0.011, 0.837, 0.013, 2.55, 0.02];
    pub const STABILIZERS: [f64; 4] = [0.905, 0.981, 0.720, 0.994];
    pub const STABILIZER_STDS: [f64; 4] = [0.005, 0.004, 0.007, 0.001];
    pub const WITNESS: f64 = -0.60;
    pub const WITNESS_STD: f64 = 0.01;
    pub const VISIBILITY_TB: f64 = 0.93;
    pub const VISIBILITY_FB: f64 = 0.834;
    pub const PAIR_RATE_HZ: f64 = 4700.0;
    /// Claimed ratio of frequency-bin spacing to resonance linewidth.
    pub const SPACING_TO_LINEWIDTH: f64 = 100.0;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub dof: Dof,
    pub fidelity: f64,
    pub fidelity_std: f64,
    pub purity: f64,
    pub purity_std: f64,
    pub s_parameter: f64,
    pub s_std: f64,
    pub violation_stds_chsh: Option<f64>,
    pub visibility: Option<f64>,
    pub model: DofPoint,
    pub published: PublishedRow,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PublishedRow {
    pub fidelity: f64,
    pub fidelity_std: f64,
    pub purity: f64,
    pub purity_std: f64,
    pub s_parameter: f64,
    pub s_std: f64,
    pub visibility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessSummary {
    pub stabilizer_names: [String; 4],
    pub stabilizers: [f64; 4],
    pub stabilizer_stds: [f64; 4],
    pub witness: f64,
    pub witness_std: f64,
    pub violation_stds: Option<f64>,
    pub hyperentangled: bool,
    pub model_stabilizers: [f64; 4],
    pub model_witness: f64,
    pub published_stabilizers: [f64; 4],
    pub published_stabilizer_stds: [f64; 4],
    pub published_witness: f64,
    pub published_witness_std: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceSummary {
    pub fsr_ghz: f64,
    pub linewidth_ghz: f64,
    /// Frequency-bin spacing, equal to the RF drive frequency.
    pub bin_spacing_ghz: f64,
    pub spacing_to_linewidth: f64,
    pub published_spacing_to_linewidth: f64,
    /// False when the computed ratio is not within a factor 2 of the published claim.
    pub spacing_claim_consistent: bool,
    pub bin_crosstalk: f64,
    pub time_bandwidth_product: f64,
    pub dofs_distinct: bool,
    pub regime: device::PumpRegime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSummary {
    pub convention: String,
    pub budget: device::PairRates,
    pub published_chip_rate_hz: f64,
    /// Budget rate over the published rate.
    pub budget_to_published: f64,
    pub simulated_chip_rate_hz: f64,
    pub simulated_detected_rate_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config: String,
    pub table: Vec<TableRow>,
    pub witness: WitnessSummary,
    pub device: DeviceSummary,
    pub rates: RateSummary,
    pub files: Vec<String>,
}

pub fn device_summary(cfg: &ExperimentConfig) -> DeviceSummary {
    let ring = &cfg.device.ring_a;
    let pump = &cfg.device.pump;
    let lw = device::linewidth(ring);
    let spacing = pump.rf_frequency_ghz;
    let ratio = spacing / lw;
    let tbp = device::time_bandwidth_product(pump);
    DeviceSummary {
        fsr_ghz: device::fsr(ring),
        linewidth_ghz: lw,
        bin_spacing_ghz: spacing,
        spacing_to_linewidth: ratio,
        published_spacing_to_linewidth: published::SPACING_TO_LINEWIDTH,
        spacing_claim_consistent: (ratio / published::SPACING_TO_LINEWIDTH - 1.0).abs() < 0.5
            || (published::SPACING_TO_LINEWIDTH / ratio - 1.0).abs() < 0.5,
        bin_crosstalk: device::bin_crosstalk(lw, spacing),
        time_bandwidth_product: tbp.product,
        dofs_distinct: tbp.distinct,
        regime: pump.regime(),
    }
}

pub fn rate_summary(cfg: &ExperimentConfig, resolved: &Resolved) -> RateSummary {
    let d = &cfg.device;
    let budget = device::pair_rate_budget(&d.pump, &d.ring_a, &d.budget);
    RateSummary {
        convention: "generated = brightness * peak_power^2 * linewidth * (2 * pulse_width * \
                     repetition_rate) * 2 rings; detected = generated * (facet * analyzer * \
                     detector)^2 per pair"
            .into(),
        budget,
        published_chip_rate_hz: published::PAIR_RATE_HZ,
        budget_to_published: budget.generated_hz / published::PAIR_RATE_HZ,
        simulated_chip_rate_hz: resolved.pair_rate_hz,
        simulated_detected_rate_hz: resolved.detected_pair_rate_hz,
    }
}

/// Name and contents of one report file.
pub type ReportFile = (String, String);

pub fn report(
    cfg: &ExperimentConfig,
    recon: &ReconstructionFile,
    metrics_file: &MetricsFile,
    sweep_rows: Option<&[SweepRow]>,
) -> Result<Vec<ReportFile>> {
    let resolved = cfg.resolve()?;
    let mut files: Vec<ReportFile> = Vec::new();
    for r in &recon.reconstructions {
        files.push((
            format!("rho_{}_real.csv", r.dof),
            io::matrix_csv(&r.rho_real),
        ));
        files.push((
            format!("rho_{}_imag.csv", r.dof),
            io::matrix_csv(&r.rho_imag),
        ));
    }
    if let Some(rows) = sweep_rows {
        for f in &metrics_file.fringes {
            let mut text = String::from("phase_rad,counts,rate_hz,expected_rate_hz,fit_rate_hz\n");
            for r in rows.iter().filter(|r| r.dof == f.dof) {
                let fit = f.fit.mean
                    * (1.0 + f.fit.visibility * (r.phase_rad + f.fit.phase_offset).cos());
                text.push_str(&format!(
                    "{},{},{},{},{}\n",
                    r.phase_rad,
                    r.record.coincidences,
                    r.record.coincidences / r.record.integration_time_s,
                    r.record.expected_rate,
                    fit
                ));
            }
            files.push((format!("fringe_{}.csv", f.dof), text));
        }
    }

    let m = &metrics_file.merit_report;
    let model = &metrics_file.model;
    let row = |dof: Dof| {
        let (d, p, mdl, vis) = match dof {
            Dof::TimeBin => (&m.tb, published::TB, model.tb, published::VISIBILITY_TB),
            Dof::FrequencyBin => (&m.fb, published::FB, model.fb, published::VISIBILITY_FB),
        };
        TableRow {
            dof,
            fidelity: d.fidelity,
            fidelity_std: d.fidelity_std,
            purity: d.purity,
            purity_std: d.purity_std,
            s_parameter: d.s_parameter,
            s_std: d.s_std,
            violation_stds_chsh: d.violation_stds_chsh,
            visibility: d.visibility,
            model: mdl,
            published: PublishedRow {
                fidelity: p[0],
                fidelity_std: p[1],
                purity: p[2],
                purity_std: p[3],
                s_parameter: p[4],
                s_std: p[5],
                visibility: vis,
            },
        }
    };
    let table = vec![row(Dof::FrequencyBin), row(Dof::TimeBin)];
    let witness = WitnessSummary {
        stabilizer_names: STABILIZER_NAMES.map(String::from),
        stabilizers: m.stabilizers,
        stabilizer_stds: m.stabilizer_stds,
        witness: m.witness,
        witness_std: m.witness_std,
        violation_stds: m.violation_stds_witness,
        hyperentangled: m.hyperentangled,
        model_stabilizers: model.stabilizers,
        model_witness: model.witness,
        published_stabilizers: published::STABILIZERS,
        published_stabilizer_stds: published::STABILIZER_STDS,
        published_witness: published::WITNESS,
        published_witness_std: published::WITNESS_STD,
    };
    let device = device_summary(cfg);
    let rates = rate_summary(cfg, &resolved);

    let mut names: Vec<String> = files.iter().map(|f| f.0.clone()).collect();
    names.push("summary.txt".into());
    names.push("summary.json".into());
    let summary = Summary {
        config: cfg.to_toml(),
        table,
        witness,
        device,
        rates,
        files: names,
    };
    files.push(("summary.txt".into(), summary_text(&summary)));
    files.push(("summary.json".into(), io::json_text(&summary)));
    Ok(files)
}

fn opt(v: Option<f64>, prec: usize) -> String {
    match v {
        Some(x) => format!("{x:.prec$}"),
        None => "n/a".into(),
    }
}

pub fn summary_text(s: &Summary) -> String {
    let mut out = String::new();
    out.push_str("Figures of merit of the reduced density matrices\n");
    out.push_str(
        "DoF | fidelity        | purity          | S               | (S-2)/std | visibility\n",
    );
    for r in &s.table {
        out.push_str(&format!(
            "{:<3} | {:.4} ± {:.4} | {:.4} ± {:.4} | {:.4} ± {:.4} | {:>9} | {}\n",
            r.dof.tag(),
            r.fidelity,
            r.fidelity_std,
            r.purity,
            r.purity_std,
            r.s_parameter,
            r.s_std,
            opt(r.violation_stds_chsh, 1),
            opt(r.visibility, 4),
        ));
    }
    out.push_str("published:\n");
    for r in &s.table {
        let p = &r.published;
        out.push_str(&format!(
            "{:<3} | {:.3} ± {:.3}   | {:.3} ± {:.3}   | {:.3} ± {:.3}   |           | {:.3}\n",
            r.dof.tag(),
            p.fidelity,
            p.fidelity_std,
            p.purity,
            p.purity_std,
            p.s_parameter,
            p.s_std,
            p.visibility,
        ));
    }
    out.push_str("model state:\n");
    for r in &s.table {
        out.push_str(&format!(
            "{:<3} | {:.4}          | {:.4}          | {:.4}\n",
            r.dof.tag(),
            r.model.fidelity,
            r.model.purity,
            r.model.s_parameter
        ));
    }

    let w = &s.witness;
    out.push_str("\nHyperentanglement witness W = 3 - (S1 + S2 + S3 + S4)\n");
    for k in 0..4 {
        out.push_str(&format!(
            "{:<6} measured {:.4} ± {:.4}   model {:.4}   published {:.3} ± {:.3}\n",
            w.stabilizer_names[k],
            w.stabilizers[k],
            w.stabilizer_stds[k],
            w.model_stabilizers[k],
            w.published_stabilizers[k],
            w.published_stabilizer_stds[k],
        ));
    }
    out.push_str(&format!(
        "W      measured {:.4} ± {:.4}   model {:.4}   published {:.2} ± {:.2}\n",
        w.witness, w.witness_std, w.model_witness, w.published_witness, w.published_witness_std
    ));
    out.push_str(&format!(
        "violation: {} standard deviations below 0; hyperentangled: {}\n",
        opt(w.violation_stds, 1),
        w.hyperentangled
    ));

    let d = &s.device;
    out.push_str("\nDevice\n");
    out.push_str(&format!("free spectral range     {:.2} GHz\n", d.fsr_ghz));
    out.push_str(&format!(
        "resonance linewidth     {:.4} GHz\n",
        d.linewidth_ghz
    ));
    out.push_str(&format!(
        "bin spacing             {:.2} GHz\n",
        d.bin_spacing_ghz
    ));
    out.push_str(&format!(
        "spacing / linewidth     {:.2} (published claim ~{:.0}: {})\n",
        d.spacing_to_linewidth,
        d.published_spacing_to_linewidth,
        if d.spacing_claim_consistent {
            "consistent"
        } else {
            "INCONSISTENT"
        }
    ));
    out.push_str(&format!(
        "bin crosstalk           {:.3e}\n",
        d.bin_crosstalk
    ));
    out.push_str(&format!(
        "time-bandwidth product  {:.2} (distinct DoFs: {})\n",
        d.time_bandwidth_product, d.dofs_distinct
    ));

    let r = &s.rates;
    out.push_str("\nPair rates\n");
    out.push_str(&format!("convention: {}\n", r.convention));
    out.push_str(&format!(
        "budget generated        {:.4e} Hz (detected {:.4e} Hz)\n",
        r.budget.generated_hz, r.budget.detected_hz
    ));
    out.push_str(&format!(
        "published chip output   {:.4e} Hz (budget / published = {:.1})\n",
        r.published_chip_rate_hz, r.budget_to_published
    ));
    out.push_str(&format!(
        "simulated               {:.4e} Hz at chip, {:.4e} Hz detected\n",
        r.simulated_chip_rate_hz, r.simulated_detected_rate_hz
    ));
    out
}

/// Stabilizer point values straight from the count rows, used by tests and the acceptance suite.
pub fn stabilizer_point_values(data: &CountData, car: f64) -> Option<[f64; 4]> {
    let groups = data.stabilizers.as_ref()?;
    let mut out = [0.0; 4];
    for (o, g) in out.iter_mut().zip(groups) {
        *o = tomo::estimate_stabilizer(g, car)?;
    }
    Some(out)
}
