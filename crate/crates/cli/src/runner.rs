//! Runs a validated experiment and writes its artifacts and manifest.

use std::fs;
use std::path::{Path, PathBuf};

use hawkes_scaling::grid::Grid;
use hawkes_scaling::hawkes::{
    compensator_martingale, rescale_path, simulate_cluster, simulate_thinning, HawkesParams, HawkesPath,
};
use hawkes_scaling::kernel::{BernsteinTriplet, Kernel, LevyMeasure, Matrix, NearlyUnstableFamily};
use hawkes_scaling::limits::{
    cir_correspondence, limit_empirical_law, sample_regime_limit, solve_cir, solve_sve, CirParams, FractionalNormalization, LimitKernelSpec,
    Regime,
};
use hawkes_scaling::meanfield::{
    check_dominance, empirical_snapshot, mean_field_series, simulate_coupled_auxiliary, simulate_particles,
    MeanFieldParams,
};
use hawkes_scaling::resolvent::{resolvent_grid, scaled_resolvent_measure, verify_laplace_identity};
use hawkes_scaling::rng::{ensemble, StreamFactory};
use hawkes_scaling::stats::{mean_estimate, qv_identity_check, variance_estimate, wasserstein1_distance, TestReport};
use nalgebra::DVector;
use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::acceptance::{self, Artifact};
use crate::config::{ExperimentConfig, FamilyConfig, Kind, LimitSource, Method};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{context}: {source}")]
    Model {
        context: String,
        #[source]
        source: hawkes_scaling::Error,
    },
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

trait Context<T> {
    fn context(self, what: &str) -> Result<T, RunError>;
}

impl<T> Context<T> for hawkes_scaling::Result<T> {
    fn context(self, what: &str) -> Result<T, RunError> {
        self.map_err(|source| RunError::Model { context: what.to_string(), source })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ArtifactEntry {
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Tool {
    pub name: &'static str,
    pub version: &'static str,
    pub core_version: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub tool: Tool,
    pub kind: &'static str,
    pub seed: u64,
    pub config_sha256: String,
    pub config: ExperimentConfig,
    pub derived: Map<String, Value>,
    pub warnings: Vec<String>,
    pub reports: Vec<TestReport>,
    pub pass: bool,
    pub artifacts: Vec<ArtifactEntry>,
}

#[derive(Debug)]
pub struct RunOutput {
    pub dir: PathBuf,
    pub manifest: Manifest,
    /// Human-readable summary lines (acceptance lines carry timings).
    pub lines: Vec<String>,
}

impl RunOutput {
    pub fn pass(&self) -> bool {
        self.manifest.pass
    }
}

#[derive(Default)]
struct Outcome {
    artifacts: Vec<Artifact>,
    reports: Vec<TestReport>,
    derived: Map<String, Value>,
    warnings: Vec<String>,
    lines: Vec<String>,
}

impl Outcome {
    fn csv(&mut self, name: &str, (header, rows): (Vec<String>, Vec<Vec<f64>>)) -> Result<(), RunError> {
        let contents = hawkes_scaling::export::table_string(&header, &rows).context(name)?;
        self.artifacts.push(Artifact { name: format!("{name}.csv"), contents });
        Ok(())
    }

    fn report(&mut self, description: impl Into<String>, statistic: f64, threshold: f64, pass: bool, sizes: Vec<usize>) {
        self.reports.push(TestReport {
            description: description.into(),
            statistic,
            p_value: None,
            threshold: Some(threshold),
            sizes,
            pass,
        });
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Normal quantile for a two-sided level split across `comparisons` tests.
fn bonferroni_z(level: f64, comparisons: usize) -> f64 {
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    normal.inverse_cdf(1.0 - level / (2.0 * comparisons.max(1) as f64))
}

/// At most ~100 evenly spaced node indices, always including the last node.
fn report_nodes(grid: &Grid) -> Vec<usize> {
    let stride = grid.cells().div_ceil(100).max(1);
    let mut nodes: Vec<usize> = (0..grid.nodes()).step_by(stride).collect();
    if *nodes.last().expect("grid has nodes") != grid.cells() {
        nodes.push(grid.cells());
    }
    nodes
}

fn z_score(value: f64, target: f64, se: f64) -> f64 {
    // a deterministic node has a standard error at rounding level
    if (value - target).abs() <= 1e-12 * target.abs().max(1.0) {
        0.0
    } else if se > 0.0 {
        (value - target) / se
    } else {
        f64::INFINITY
    }
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutput, RunError> {
    let grid = Grid::new(config.grid.horizon, config.grid.h).context("grid")?;
    let streams = StreamFactory::new(config.seed).domain(config.kind.name());
    let outcome = match config.kind {
        Kind::Resolvent => run_resolvent(config, &grid)?,
        Kind::Hawkes => run_hawkes(config, &grid, &streams)?,
        Kind::Meanfield => run_meanfield(config, &grid, &streams)?,
        Kind::Limit => run_limit(config, &grid, &streams)?,
        Kind::RegimeCompare => run_regime_compare(config, &grid, &streams)?,
        Kind::AcceptanceSuite => run_acceptance(config),
    };
    write_outputs(config, outcome)
}

fn write_outputs(config: &ExperimentConfig, outcome: Outcome) -> Result<RunOutput, RunError> {
    let dir = config.output.clone();
    fs::create_dir_all(&dir).map_err(|source| RunError::Io { path: dir.clone(), source })?;
    let mut entries = Vec::with_capacity(outcome.artifacts.len());
    for a in &outcome.artifacts {
        let path = dir.join(&a.name);
        fs::write(&path, a.contents.as_bytes()).map_err(|source| RunError::Io { path: path.clone(), source })?;
        entries.push(ArtifactEntry { file: a.name.clone(), sha256: sha256_hex(a.contents.as_bytes()), bytes: a.contents.len() });
    }
    let config_json = serde_json::to_string(config).expect("config serializes");
    let pass = outcome.reports.iter().all(|r| r.pass);
    let manifest = Manifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        tool: Tool { name: "hscale", version: env!("CARGO_PKG_VERSION"), core_version: hawkes_scaling::VERSION },
        kind: config.kind.name(),
        seed: config.seed,
        config_sha256: sha256_hex(config_json.as_bytes()),
        config: config.clone(),
        derived: outcome.derived,
        warnings: outcome.warnings,
        reports: outcome.reports,
        pass,
        artifacts: entries,
    };
    let path = dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(&path, text).map_err(|source| RunError::Io { path, source })?;
    Ok(RunOutput { dir, manifest, lines: outcome.lines })
}

fn build_family(f: &FamilyConfig) -> Result<NearlyUnstableFamily, RunError> {
    let base = f.base.build().context("family.base")?;
    let a = if f.a.len() == 1 { DVector::from_element(base.dim(), f.a[0]) } else { DVector::from_vec(f.a.clone()) };
    NearlyUnstableFamily::with_gap_exponent(base, f.c, f.gap_exponent, f.schedule, a).context("family")
}

fn family_derived(family: &NearlyUnstableFamily, f: &FamilyConfig, out: &mut Outcome) {
    if let Ok(triplet) = family.limit_triplet() {
        if let Some((m, lambda, alpha)) = triplet.closed_form() {
            out.derived.insert("limit_triplet".into(), json!({"m": m, "lambda": lambda, "alpha": alpha}));
            if (alpha - 1.0).abs() < 1e-12 {
                if let Ok(cir) = cir_correspondence(m, lambda, f.a[0]) {
                    out.derived.insert(
                        "cir_correspondence".into(),
                        json!({"b": cir.b, "a": cir.a, "sigma": cir.sigma, "xi0": cir.xi0}),
                    );
                }
            }
        }
    }
}

fn matrix_json(m: &Matrix) -> Value {
    json!((0..m.nrows()).map(|i| m.row(i).iter().copied().collect::<Vec<f64>>()).collect::<Vec<_>>())
}

fn kernel_derived(label: &str, kernel: &Kernel, out: &mut Outcome) {
    match kernel.l1_and_stability() {
        Ok(s) => {
            out.derived.insert(
                format!("{label}stability"),
                json!({"l1": matrix_json(&s.l1), "spectral_radius": s.spectral_radius, "stable": s.stable}),
            );
            if !s.stable {
                out.warnings.push(format!("{label}spectral radius {} >= 1", s.spectral_radius));
            }
        }
        Err(e) => out.warnings.push(format!("{label}{e}")),
    }
}

/// Largest entry of `‖ψ‖_{L¹(0,∞)} = (I - L)^{-1} - I`, if stable.
fn total_resolvent_mass(kernel: &Kernel) -> Option<f64> {
    let s = kernel.l1_and_stability().ok()?;
    if !s.stable {
        return None;
    }
    let d = kernel.dim();
    let inv = (Matrix::identity(d, d) - &s.l1).try_inverse()?;
    Some((inv - Matrix::identity(d, d)).iter().cloned().fold(0.0, f64::max))
}

fn resolvent_checks(label: &str, kernel: &Kernel, grid: &Grid, zs: &[f64], out: &mut Outcome) -> Result<(), RunError> {
    let table = resolvent_grid(kernel, grid).context("resolvent")?;
    out.warnings.extend(table.warnings.iter().map(|w| format!("{label}{w}")));
    out.csv(&format!("{label}resolvent"), table.columns())?;
    let residual = table.discrete_residual(kernel);
    let scale = (0..grid.cells()).flat_map(|k| table.psi_cell(k).iter().copied()).fold(1.0, f64::max);
    out.report(
        format!("{label}discrete resolvent equation residual (relative to max psi)"),
        residual / scale,
        1e-12,
        residual <= 1e-12 * scale,
        vec![grid.cells()],
    );
    if let Some(total) = total_resolvent_mass(kernel) {
        let dd = kernel.dim() * kernel.dim();
        let partial = (0..dd).map(|e| table.cumnorm_at(grid.end()).map(|m| m[e])).collect::<Result<Vec<_>, _>>().context("resolvent")?;
        let tail = (total - partial.iter().cloned().fold(0.0, f64::max)).max(0.0);
        for r in verify_laplace_identity(kernel, &table, zs).context("Laplace identity")? {
            let tol = grid.step() * (1.0 + total).powi(2) + (-r.z * grid.end()).exp() * tail;
            match r.residual {
                Some(v) => out.report(
                    format!("{label}Laplace identity residual at z = {}", r.z),
                    v,
                    tol,
                    v <= tol,
                    vec![grid.cells()],
                ),
                None => out.warnings.push(format!("{label}I - L_phi({}) is singular", r.z)),
            }
        }
    } else {
        out.warnings.push(format!("{label}Laplace identity skipped: kernel is not stable"));
    }
    // closed form for scalar exponential kernels: ψ(t) = α e^{-(β-α)t}
    if let hawkes_scaling::kernel::KernelForm::Exponential { alpha, beta } = kernel.form() {
        if kernel.dim() == 1 {
            let (a, b) = (alpha[(0, 0)], beta[(0, 0)]);
            let rows: Vec<Vec<f64>> = (0..grid.cells())
                .map(|k| {
                    let t = grid.midpoint(k);
                    let psi = table.psi_cell(k)[0];
                    let exact = a * (-(b - a) * t).exp();
                    vec![t, psi, exact, (psi - exact).abs()]
                })
                .collect();
            let max_err = rows.iter().map(|r| r[3]).fold(0.0, f64::max);
            let tol = grid.step() * a * b.max(1.0) * (1.0 + ((a - b) * grid.end()).exp().max(1.0));
            out.report(
                format!("{label}max |psi_grid - alpha e^(-(beta-alpha)t)|"),
                max_err,
                tol,
                max_err <= tol,
                vec![grid.cells()],
            );
            out.csv(&format!("{label}resolvent_error"), (["t", "psi", "exact", "abs_error"].map(String::from).to_vec(), rows))?;
        }
    }
    Ok(())
}

fn run_resolvent(config: &ExperimentConfig, grid: &Grid) -> Result<Outcome, RunError> {
    let mut out = Outcome::default();
    if let Some(spec) = &config.kernel {
        let kernel = spec.build().context("kernel")?;
        kernel_derived("", &kernel, &mut out);
        resolvent_checks("", &kernel, grid, &config.z, &mut out)?;
    }
    if let Some(f) = &config.family {
        let family = build_family(f)?;
        family_derived(&family, f, &mut out);
        let mut members = Vec::new();
        for &n in &f.n {
            let label = format!("n{n}_");
            let table = scaled_resolvent_measure(&family, n, grid).context(&format!("family member n = {n}"))?;
            let member = family.member(n).context("family")?;
            let scaled = table.scaled.as_ref().expect("scaled measure attached");
            members.push(json!({
                "n": n, "a_n": member.a_n, "b_n": member.b_n, "beta_n": member.beta_n, "l2_bound": scaled.l2_bound,
                // geometric series value next to the asymptotically equivalent 1 / (1 - a_n)
                "psi_l1": member.a_n / member.beta_n, "psi_l1_alternative": 1.0 / member.beta_n,
            }));
            out.warnings.extend(table.warnings.iter().map(|w| format!("{label}{w}")));
            out.csv(&format!("{label}scaled_resolvent"), table.columns())?;
        }
        out.derived.insert("members".into(), Value::Array(members));
    }
    Ok(out)
}

struct HawkesCase {
    label: String,
    params: HawkesParams,
    beta: Option<f64>,
}

fn hawkes_cases(config: &ExperimentConfig, out: &mut Outcome) -> Result<Vec<HawkesCase>, RunError> {
    let horizon = config.grid.horizon;
    if let Some(spec) = &config.kernel {
        let kernel = spec.build().context("kernel")?;
        let d = kernel.dim();
        let mu = if config.baseline.len() == 1 {
            DVector::from_element(d, config.baseline[0])
        } else {
            DVector::from_vec(config.baseline.clone())
        };
        kernel_derived("", &kernel, out);
        let params = HawkesParams::new(mu, kernel, horizon).context("hawkes parameters")?;
        return Ok(vec![HawkesCase { label: String::new(), params, beta: None }]);
    }
    let f = config.family.as_ref().expect("validated: kernel or family");
    let family = build_family(f)?;
    family_derived(&family, f, out);
    f.n.iter()
        .map(|&n| {
            let member = family.member(n).context(&format!("family member n = {n}"))?;
            let label = format!("n{n}_");
            kernel_derived(&label, &member.kernel, out);
            let params = HawkesParams::new(member.mu.clone(), member.kernel.clone(), horizon).context("hawkes parameters")?;
            Ok(HawkesCase { label, params, beta: Some(member.beta_n) })
        })
        .collect()
}

/// Number of paths on which the O(N²) pathwise identities are checked.
const IDENTITY_PATHS: usize = 200;

fn run_hawkes(config: &ExperimentConfig, grid: &Grid, streams: &StreamFactory) -> Result<Outcome, RunError> {
    let mut out = Outcome::default();
    let nodes = report_nodes(grid);
    for case in hawkes_cases(config, &mut out)? {
        let params = &case.params;
        out.warnings.extend(params.warnings().into_iter().map(|w| format!("{}{w}", case.label)));
        let d = params.dim();
        let simulate = |rng: &mut _| -> hawkes_scaling::Result<HawkesPath> {
            match config.method {
                Method::Thinning => simulate_thinning(params, rng),
                Method::Cluster => simulate_cluster(params, rng),
            }
        };
        let case_streams = streams.domain(&case.label);
        struct PathSummary {
            lambda: Vec<f64>,
            terminal: Vec<u64>,
            qv: Option<f64>,
            rescaled: Option<f64>,
        }
        let results: Vec<hawkes_scaling::Result<(PathSummary, Option<HawkesPath>)>> =
            ensemble(&case_streams, config.paths, |i, rng| {
                let path = simulate(rng)?;
                let series = compensator_martingale(params, &path, grid)?;
                let lambda = nodes.iter().flat_map(|&k| (0..d).map(move |j| (k, j))).map(|(k, j)| series.at(&series.intensity, k, j)).collect();
                let check = i < IDENTITY_PATHS;
                let qv = check.then(|| qv_identity_check(params, &path).statistic);
                let rescaled = match (check, case.beta) {
                    (true, Some(b)) => Some(rescale_path(&series, b)?.identity_residual()),
                    _ => None,
                };
                let terminal = path.counts_at(params.horizon());
                Ok((PathSummary { lambda, terminal, qv, rescaled }, (i == 0).then_some(path)))
            });
        let mut summaries = Vec::with_capacity(results.len());
        let mut first = None;
        for r in results {
            let (s, p) = r.context("hawkes simulation")?;
            if p.is_some() {
                first = p;
            }
            summaries.push(s);
        }
        let first = first.expect("at least one path");
        let series = compensator_martingale(params, &first, grid).context("compensator")?;
        out.csv(&format!("{}path0_events", case.label), first.event_columns())?;
        out.csv(&format!("{}path0_series", case.label), series.columns())?;
        if let Some(b) = case.beta {
            let triple = rescale_path(&series, b).context("rescaling")?;
            let header = ["t", "Lambda_n", "N_n", "M_n"].map(String::from).to_vec();
            let rows = (0..grid.nodes())
                .map(|k| {
                    let mut row = vec![grid.node(k)];
                    for field in [&triple.compensator, &triple.counts, &triple.martingale] {
                        row.extend_from_slice(&field[k * d..(k + 1) * d]);
                    }
                    row
                })
                .collect();
            let header: Vec<String> = std::iter::once(header[0].clone())
                .chain(header[1..].iter().flat_map(|h| (0..d).map(move |i| format!("{h}_{i}"))))
                .collect();
            out.csv(&format!("{}path0_rescaled", case.label), (header, rows))?;
        }

        // E λ(t) = (I + ‖ψ‖_{L¹_t}) μ
        let table = resolvent_grid(params.kernel(), grid).context("resolvent")?;
        let mu = DVector::from_column_slice(params.mu());
        let compared = (nodes.len() - 1) * d;
        let z_crit = bonferroni_z(0.01, compared);
        let mut worst: f64 = 0.0;
        let mut rows = Vec::new();
        for (slot, &k) in nodes.iter().enumerate() {
            let t = grid.node(k);
            let oracle = (Matrix::identity(d, d) + table.cumnorm_at(t).context("resolvent")?) * &mu;
            let mut row = vec![t];
            for i in 0..d {
                let xs: Vec<f64> = summaries.iter().map(|s| s.lambda[slot * d + i]).collect();
                let est = mean_estimate(&xs).context("ensemble mean")?;
                let z = z_score(est.value, oracle[i], est.std_error);
                if k > 0 {
                    worst = worst.max(z.abs());
                }
                row.extend([est.value, est.std_error, oracle[i], z]);
            }
            rows.push(row);
        }
        let mut header = vec!["t".to_string()];
        for i in 0..d {
            header.extend(["mean_lambda", "std_error", "oracle", "z_score"].map(|h| format!("{h}_{i}")));
        }
        out.csv(&format!("{}ensemble_intensity", case.label), (header, rows))?;
        out.report(
            format!("{}max |z| of mean intensity vs (I + |psi|_t) mu (Bonferroni level 0.01)", case.label),
            worst,
            z_crit,
            worst <= z_crit,
            vec![summaries.len(), compared],
        );
        let qv: Vec<f64> = summaries.iter().filter_map(|s| s.qv).collect();
        out.report(
            format!("{}max pathwise |[M_i, M_j] - 1{{i=j}} N_i|", case.label),
            qv.iter().cloned().fold(0.0, f64::max),
            1e-10,
            qv.iter().all(|v| *v <= 1e-10),
            vec![qv.len()],
        );
        if case.beta.is_some() {
            let r: Vec<f64> = summaries.iter().filter_map(|s| s.rescaled).collect();
            out.report(
                format!("{}max relative |N_n - Lambda_n - beta_n M_n|", case.label),
                r.iter().cloned().fold(0.0, f64::max),
                1e-10,
                r.iter().all(|v| *v <= 1e-10),
                vec![r.len()],
            );
        }
        let header: Vec<String> =
            std::iter::once("path".to_string()).chain((0..d).map(|i| format!("N_{i}_T"))).collect();
        let rows = summaries
            .iter()
            .enumerate()
            .map(|(p, s)| std::iter::once(p as f64).chain(s.terminal.iter().map(|c| *c as f64)).collect())
            .collect();
        out.csv(&format!("{}terminal_counts", case.label), (header, rows))?;
    }
    Ok(out)
}

struct MeanFieldCase {
    label: String,
    params: MeanFieldParams,
}

fn meanfield_cases(config: &ExperimentConfig, out: &mut Outcome) -> Result<Vec<MeanFieldCase>, RunError> {
    let mf = config.meanfield.as_ref().expect("validated");
    let horizon = config.grid.horizon;
    let family = match &config.family {
        Some(f) => {
            let fam = build_family(f)?;
            family_derived(&fam, f, out);
            Some(fam)
        }
        None => None,
    };
    let mut cases = Vec::new();
    let mut zetas = Vec::new();
    for &n in &mf.n {
        let (kernel, mu0, beta) = match (&family, &config.kernel) {
            (Some(fam), _) => {
                let m = fam.member(n as u64).context(&format!("family member n = {n}"))?;
                (m.kernel.clone(), m.mu[0], m.beta_n)
            }
            (None, Some(spec)) => (spec.build().context("kernel")?, mf.mu0.expect("validated"), mf.beta.unwrap_or(1.0)),
            (None, None) => unreachable!("validated: kernel or family"),
        };
        let label = format!("n{n}_");
        kernel_derived(&label, &kernel, out);
        let params = MeanFieldParams::new(n, mu0, kernel, mf.k, horizon, beta).context("meanfield parameters")?;
        zetas.push(json!({"n": n, "beta_n": beta, "mu0": mu0, "zeta_n": params.zeta_n()}));
        cases.push(MeanFieldCase { label, params });
    }
    out.derived.insert("particle_systems".into(), Value::Array(zetas));
    Ok(cases)
}

/// Mean aggregate count `E N̄(t) = μ₀ ∫_0^t (1 + ‖ψ‖_{L¹_s}) ds` on the nodes.
fn aggregate_mean(params: &MeanFieldParams, grid: &Grid) -> Result<Vec<f64>, RunError> {
    let table = resolvent_grid(&params.kernel, grid).context("resolvent")?;
    let h = grid.step();
    let mut acc = 0.0;
    let mut out = vec![0.0];
    for k in 0..grid.cells() {
        let (a, b) = (table.cumnorm_entry(k, 0, 0), table.cumnorm_entry(k + 1, 0, 0));
        acc += h * (1.0 + 0.5 * (a + b));
        out.push(params.mu0 * acc);
    }
    Ok(out)
}

fn run_meanfield(config: &ExperimentConfig, grid: &Grid, streams: &StreamFactory) -> Result<Outcome, RunError> {
    let mut out = Outcome::default();
    let mf = config.meanfield.as_ref().expect("validated");
    for case in meanfield_cases(config, &mut out)? {
        let params = &case.params;
        let s = streams.domain(&case.label);
        let last = grid.cells();
        let results: Vec<hawkes_scaling::Result<(f64, Option<(hawkes_scaling::meanfield::ParticleSystemPath,)>)>> =
            ensemble(&s.domain("particles"), config.paths, |i, rng| {
                let path = simulate_particles(params, rng)?;
                let total = path.aggregate.counts_at(params.horizon)[0] as f64;
                Ok((total, (i == 0).then_some((path,))))
            });
        let mut totals = Vec::with_capacity(results.len());
        let mut first = None;
        for r in results {
            let (t, p) = r.context("particle simulation")?;
            totals.push(t);
            if let Some((p,)) = p {
                first = Some(p);
            }
        }
        let first = first.expect("at least one path");
        let series = mean_field_series(params, &first, grid).context("mean-field series")?;
        out.csv(&format!("{}path0_series", case.label), series.columns())?;
        let snaps = empirical_snapshot(params, &first, &[params.horizon]).context("empirical measure")?;
        out.csv(&format!("{}path0_empirical_T", case.label), snaps[0].columns())?;
        let est = mean_estimate(&totals).context("ensemble mean")?;
        let oracle = aggregate_mean(params, grid)?[last];
        // the trapezoid rule on ‖ψ‖ adds O(h²) to the oracle
        let z = z_score(est.value, oracle, est.std_error);
        out.report(
            format!("{}E Nbar(T) vs mu0 int_0^T (1 + |psi|_s) ds, |z|", case.label),
            z.abs(),
            3.0,
            z.abs() <= 3.0,
            vec![totals.len()],
        );
        out.derived.insert(
            format!("{}aggregate_mean_T", case.label),
            json!({"estimate": est.value, "std_error": est.std_error, "oracle": oracle}),
        );
        if mf.coupled {
            let checks: Vec<hawkes_scaling::Result<(bool, bool, f64)>> =
                ensemble(&s.domain("coupled"), config.paths, |_, rng| {
                    let coupled = simulate_coupled_auxiliary(params, rng)?;
                    let c = check_dominance(params, &coupled, grid)?;
                    Ok((c.intensity_ok, c.counts_ok, c.min_gap))
                });
            let checks: Vec<(bool, bool, f64)> =
                checks.into_iter().collect::<hawkes_scaling::Result<_>>().context("coupled simulation")?;
            let bad = checks.iter().filter(|c| !(c.0 && c.1)).count();
            out.report(
                format!("{}paths violating theta <= lambda0 or tagged count dominance", case.label),
                bad as f64,
                0.0,
                bad == 0,
                vec![checks.len()],
            );
            let rows = checks
                .iter()
                .enumerate()
                .map(|(i, c)| vec![i as f64, f64::from(u8::from(c.0)), f64::from(u8::from(c.1)), c.2])
                .collect();
            out.csv(
                &format!("{}coupling", case.label),
                (["path", "intensity_ok", "counts_ok", "min_gap"].map(String::from).to_vec(), rows),
            )?;
        }
    }
    Ok(out)
}

enum LimitModel {
    Sve(LimitKernelSpec),
    Cir(CirParams),
}

fn limit_model(config: &ExperimentConfig, grid: &Grid, out: &mut Outcome) -> Result<LimitModel, RunError> {
    let lim = config.limit.as_ref().expect("validated");
    match lim.source {
        LimitSource::Triplet { m, lambda, alpha } => {
            let triplet = if (alpha - 1.0).abs() < 1e-12 {
                BernsteinTriplet::new(m, lambda, LevyMeasure::None)
            } else {
                LevyMeasure::stable_with_symbol(lambda, alpha).and_then(|l| BernsteinTriplet::new(m, 0.0, l))
            }
            .context("limit.triplet")?;
            if (alpha - 1.0).abs() < 1e-12 && m > 0.0 {
                let cir = cir_correspondence(m, lambda, lim.a[0]).context("CIR correspondence")?;
                out.derived.insert(
                    "cir_correspondence".into(),
                    json!({"b": cir.b, "a": cir.a, "sigma": cir.sigma, "xi0": cir.xi0}),
                );
            }
            Ok(LimitModel::Sve(LimitKernelSpec::from_triplet(&triplet, grid).context("limit kernel")?))
        }
        LimitSource::Fractional { alpha, normalization } => {
            let constant = match normalization {
                FractionalNormalization::GammaOneMinusAlpha => "gamma(1 - alpha)",
                FractionalNormalization::GammaAlpha => "gamma(alpha)",
            };
            out.derived.insert(
                "fractional_kernel".into(),
                json!({"alpha": alpha, "density": format!("t^(alpha - 1) / {constant}")}),
            );
            Ok(LimitModel::Sve(LimitKernelSpec::fractional(alpha, normalization, grid).context("limit kernel")?))
        }
        LimitSource::Cir { b, a, sigma, xi0 } => {
            let p = CirParams::new(b, a, sigma, xi0).context("limit.cir")?;
            out.warnings.extend(p.warnings(grid));
            Ok(LimitModel::Cir(p))
        }
    }
}

fn run_limit(config: &ExperimentConfig, grid: &Grid, streams: &StreamFactory) -> Result<Outcome, RunError> {
    let mut out = Outcome::default();
    let a = config.limit.as_ref().expect("validated").a.clone();
    let nodes = report_nodes(grid);
    let compared = nodes.len() - 1;
    let z_crit = bonferroni_z(0.01, compared);
    match limit_model(config, grid, &mut out)? {
        LimitModel::Sve(spec) => {
            out.csv("limit_kernel", spec.columns())?;
            out.report(
                "limit kernel consistency |F(t_k) - h sum f|",
                spec.consistency_error(),
                1e-9,
                spec.consistency_error() <= 1e-9,
                vec![grid.cells()],
            );
            // the raw scheme iterate has mean exactly F(t_k) a; the truncated Y⁺ adds a
            // small positive bias where Y is near zero, reported but not tested
            let paths: Vec<hawkes_scaling::Result<(Vec<(f64, f64)>, Option<hawkes_scaling::limits::SvePath>)>> =
                ensemble(streams, config.paths, |i, rng| {
                    let p = solve_sve(&spec, &a, rng)?;
                    let ys = nodes.iter().map(|&k| (p.y_raw[k], p.y_at(k, 0))).collect();
                    Ok((ys, (i == 0).then_some(p)))
                });
            let mut ys = Vec::with_capacity(paths.len());
            for r in paths {
                let (y, p) = r.context("SVE")?;
                if let Some(p) = p {
                    out.csv("path0", p.columns())?;
                }
                ys.push(y);
            }
            let mut rows = Vec::new();
            let mut worst: f64 = 0.0;
            for (slot, &k) in nodes.iter().enumerate() {
                let raw: Vec<f64> = ys.iter().map(|y| y[slot].0).collect();
                let truncated: Vec<f64> = ys.iter().map(|y| y[slot].1).collect();
                let est = mean_estimate(&raw).context("ensemble mean")?;
                let est_plus = mean_estimate(&truncated).context("ensemble mean")?;
                let target = spec.cdf_node(k)[0] * a[0];
                let z = z_score(est.value, target, est.std_error);
                if k > 0 {
                    worst = worst.max(z.abs());
                }
                rows.push(vec![grid.node(k), est.value, est.std_error, est_plus.value, target, z]);
            }
            out.csv(
                "moments",
                (["t", "mean_Y", "std_error", "mean_Y_plus", "F_t_a", "z_score"].map(String::from).to_vec(), rows),
            )?;
            out.report(
                "max |z| of mean Y(t) vs F(t) a (Bonferroni level 0.01)",
                worst,
                z_crit,
                worst <= z_crit,
                vec![ys.len(), compared],
            );
        }
        LimitModel::Cir(p) => {
            let paths: Vec<hawkes_scaling::Result<(Vec<f64>, Option<hawkes_scaling::limits::CirPath>)>> =
                ensemble(streams, config.paths, |i, rng| {
                    let path = solve_cir(&p, grid, rng)?;
                    let xs = nodes.iter().map(|&k| path.values[k]).collect();
                    Ok((xs, (i == 0).then_some(path)))
                });
            let mut xs = Vec::with_capacity(paths.len());
            for r in paths {
                let (x, path) = r.context("CIR")?;
                if let Some(path) = path {
                    let rows = (0..grid.nodes()).map(|k| vec![grid.node(k), path.values[k]]).collect();
                    out.csv("path0", (["t", "xi"].map(String::from).to_vec(), rows))?;
                }
                xs.push(x);
            }
            // Euler bias is O(h) in absolute terms, which early nodes with tiny
            // variance resolve; the closed forms are tested at T only
            let mut rows = Vec::new();
            let mut at_end = (0.0, 0.0);
            for (slot, &k) in nodes.iter().enumerate() {
                let t = grid.node(k);
                let sample: Vec<f64> = xs.iter().map(|x| x[slot]).collect();
                let m = mean_estimate(&sample).context("ensemble mean")?;
                let v = variance_estimate(&sample).context("ensemble variance")?;
                at_end = (z_score(m.value, p.mean(t), m.std_error), z_score(v.value, p.variance(t), v.std_error));
                rows.push(vec![t, m.value, m.std_error, p.mean(t), v.value, v.std_error, p.variance(t)]);
            }
            out.csv(
                "moments",
                (["t", "mean", "mean_se", "mean_exact", "variance", "variance_se", "variance_exact"].map(String::from).to_vec(), rows),
            )?;
            out.report("CIR mean at T vs closed form, |z|", at_end.0.abs(), 3.0, at_end.0.abs() <= 3.0, vec![xs.len()]);
            out.report("CIR variance at T vs closed form, |z|", at_end.1.abs(), 3.0, at_end.1.abs() <= 3.0, vec![xs.len()]);
        }
    }
    Ok(out)
}

fn run_regime_compare(config: &ExperimentConfig, grid: &Grid, streams: &StreamFactory) -> Result<Outcome, RunError> {
    let mut out = Outcome::default();
    let regime = config.regime.expect("validated");
    let a = config.limit.as_ref().expect("validated").a.clone();
    let LimitModel::Sve(spec) = limit_model(config, grid, &mut out)? else {
        unreachable!("validated: regime-compare needs an SVE limit")
    };
    let tagged = config.meanfield.as_ref().map(|m| m.k.max(1)).unwrap_or(1);
    let last = grid.cells();
    let draws: Vec<hawkes_scaling::Result<(f64, f64, bool, Option<hawkes_scaling::limits::RegimeLimitSample>)>> =
        ensemble(&streams.domain("limit"), config.paths, |i, rng| {
            let xbar = solve_sve(&spec, &a, rng)?.x_component(0);
            let s = sample_regime_limit(regime, grid, &xbar, tagged, rng)?;
            let exact = match regime {
                Regime::Zero => s.x.iter().all(|x| x == &xbar),
                Regime::Infinite => s.x.iter().chain(&s.z).all(|v| v.iter().all(|x| *x == 0.0)),
                Regime::Finite(_) => true,
            };
            Ok((s.x[0][last], xbar[last], exact, (i == 0).then_some(s)))
        });
    let mut pairs = Vec::with_capacity(draws.len());
    let mut exact_all = true;
    for d in draws {
        let (x, xb, exact, s) = d.context("regime limit")?;
        exact_all &= exact;
        pairs.push((x, xb));
        if let Some(s) = s {
            let mut header = vec!["t".to_string(), "Xbar".to_string()];
            header.extend((0..tagged).map(|i| format!("X_{i}")));
            header.extend((0..tagged).map(|i| format!("Z_{i}")));
            let rows = (0..grid.nodes())
                .map(|k| {
                    let mut row = vec![grid.node(k), s.xbar[k]];
                    row.extend(s.x.iter().map(|x| x[k]));
                    row.extend(s.z.iter().map(|z| z[k]));
                    row
                })
                .collect();
            out.csv("limit_path0", (header, rows))?;
        }
    }
    match regime {
        Regime::Zero => out.report("zero regime: X_i = Xbar on every draw", 0.0, 0.0, exact_all, vec![pairs.len()]),
        Regime::Infinite => out.report("infinite regime: X_i = Z_i = 0 on every draw", 0.0, 0.0, exact_all, vec![pairs.len()]),
        Regime::Finite(zeta) if pairs.len() > 1 => {
            let n = pairs.len() as f64;
            let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
            let mb = pairs.iter().map(|p| p.1).sum::<f64>() / n;
            let terms: Vec<f64> = pairs.iter().map(|(x, b)| (x - mx).powi(2) - (b - mb).powi(2) - zeta * b).collect();
            let gap = mean_estimate(&terms).context("dispersion")?;
            let value = gap.value * n / (n - 1.0) + zeta * mb / (n - 1.0);
            let z = z_score(value, 0.0, gap.std_error);
            out.report(
                "finite regime: Var X(T) - zeta E Xbar(T) - Var Xbar(T), |z|",
                z.abs(),
                3.0,
                z.abs() <= 3.0,
                vec![pairs.len()],
            );
        }
        Regime::Finite(_) => out.warnings.push("dispersion check needs at least two draws".into()),
    }

    if let (Some(f), Some(mf)) = (&config.family, &config.meanfield) {
        let family = build_family(f)?;
        family_derived(&family, f, &mut out);
        let horizon = config.grid.horizon;
        let mut rows = Vec::new();
        let mut means = Vec::new();
        for &n in &mf.n {
            let m = family.member(n as u64).context(&format!("family member n = {n}"))?;
            let params = MeanFieldParams::new(n, m.mu[0], m.kernel.clone(), mf.k, horizon, m.beta_n).context("meanfield")?;
            let w: Vec<hawkes_scaling::Result<(f64, f64)>> =
                ensemble(&streams.domain("particles").indexed(n as u64), config.paths, |_, rng| {
                    let path = simulate_particles(&params, rng)?;
                    let snap = empirical_snapshot(&params, &path, &[horizon])?.remove(0);
                    let xbar = snap.x_moments().0;
                    let limit = limit_empirical_law(regime, horizon, xbar, 10_000, rng)?;
                    Ok((
                        wasserstein1_distance(&snap.x_values(), &limit.x_values())?,
                        wasserstein1_distance(&snap.z_values(), &limit.z_values())?,
                    ))
                });
            let w: Vec<(f64, f64)> = w.into_iter().collect::<hawkes_scaling::Result<_>>().context("particle simulation")?;
            let wx = mean_estimate(&w.iter().map(|p| p.0).collect::<Vec<_>>()).context("W1")?;
            let wz = mean_estimate(&w.iter().map(|p| p.1).collect::<Vec<_>>()).context("W1")?;
            rows.push(vec![n as f64, params.zeta_n(), wx.value, wx.std_error, wz.value, wz.std_error]);
            means.push(wz.value);
        }
        out.csv(
            "empirical_w1",
            (["n", "zeta_n", "w1_PN", "w1_PN_se", "w1_PM", "w1_PM_se"].map(String::from).to_vec(), rows),
        )?;
        if means.len() > 1 {
            let decreasing = means.windows(2).all(|w| w[1] < w[0]);
            out.report(
                "W1(P_M(T), limit law) decreasing along meanfield.n",
                *means.last().expect("nonempty"),
                means[0],
                decreasing,
                vec![mf.n.len()],
            );
        }
    }
    Ok(out)
}

fn run_acceptance(config: &ExperimentConfig) -> Outcome {
    let mut out = Outcome::default();
    for o in acceptance::run_suite(config.seed, &config.criteria) {
        out.lines.push(o.line());
        out.reports.push(TestReport {
            description: format!("criterion {}: {}: {}", o.id, o.title, o.detail),
            statistic: if o.pass { 1.0 } else { 0.0 },
            p_value: None,
            threshold: None,
            sizes: Vec::new(),
            pass: o.pass,
        });
        out.artifacts.extend(o.artifacts);
    }
    out
}

pub fn artifact_paths(output: &RunOutput) -> Vec<PathBuf> {
    output.manifest.artifacts.iter().map(|a| output.dir.join(&a.file)).collect()
}

pub fn manifest_path(dir: &Path) -> PathBuf {
    dir.join("manifest.json")
}
