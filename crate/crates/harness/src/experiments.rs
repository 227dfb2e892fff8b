//! Experiment runners. Every runner is deterministic given its config:
//! all randomness flows from `derive_seed`, runs are collected in input
//! order and records are sorted before writing.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use reupload_core::diagnostics::{
    g_trajectory, gradient_variance, jacobian_qfim, jacobian_report, max_imaginary_fraction, max_qfim_rank,
    phase_lock_metric, quantile, spectral_knee, DiagnosticsReport, KNEE_THRESHOLD,
};
use reupload_core::fourier::{coefficient_jacobian, grid_gradients, uniform_grid};
use reupload_core::gradients::state_qfim;
use reupload_core::linalg::{numeric_rank, sym_eig_descending, Spectrum};
use reupload_core::training::{
    init_parameters, l_min, sample_dataset, sample_target, train, Dataset, MseObjective, TrainConfig,
};
use reupload_core::ArchitectureSpec;

use crate::config::{make_spec, ExperimentConfig, ExperimentKind};
use crate::error::{HarnessError, HarnessResult};
use crate::nottingham::load_nottingham;
use crate::records::{fmt_f64, ExperimentOutput, RunRecord, Table};
use crate::seed::{cell_index, derive_seed, experiment_tag};

/// Success threshold on test R².
pub const SUCCESS_R2: f64 = 0.95;

/// Run-time switches that do not belong in the config file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses rayon's default.
    pub threads: Option<usize>,
    /// Record wall-clock seconds in `runtime_s` (otherwise 0, keeping
    /// outputs byte-identical across reruns).
    pub timing: bool,
}

pub fn run_experiment(cfg: &ExperimentConfig, opts: RunOptions) -> HarnessResult<ExperimentOutput> {
    cfg.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = opts.threads {
        if t == 0 {
            return Err(HarnessError::Config("--threads must be >= 1".into()));
        }
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| HarnessError::Config(format!("cannot build worker pool: {e}")))?;
    pool.install(|| match cfg.experiment {
        ExperimentKind::FixedBudget => run_fixed_budget_sweep(cfg, opts),
        ExperimentKind::RankCeiling => run_rank_ceiling_sweep(cfg),
        ExperimentKind::PhaseLock => run_phase_lock_experiment(cfg),
        ExperimentKind::FmVsTbl => run_fm_vs_tbl_sweep(cfg, opts),
        ExperimentKind::DegreeSweep => run_degree_sweep(cfg, opts),
        ExperimentKind::GradVariance => run_gradient_variance(cfg),
        ExperimentKind::Realworld => run_realworld(cfg, opts),
        ExperimentKind::Diagnose => run_diagnose(cfg),
    })
}

fn warn(msg: &str) {
    eprintln!("warning: {msg}");
}

pub fn target_key(degree: usize, index: usize) -> String {
    format!("d{degree}-t{index}")
}

/// Synthetic dataset for target `index` of degree `degree`; shared by every
/// architecture in an experiment so comparisons are matched.
pub fn synthetic_dataset(cfg: &ExperimentConfig, degree: usize, index: usize) -> HarnessResult<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
        cfg.base_seed,
        experiment_tag("target"),
        degree as u64,
        index as u64,
    ));
    let target = sample_target(degree, &mut rng)?;
    let data_seed = derive_seed(cfg.base_seed, experiment_tag("dataset"), degree as u64, index as u64);
    Ok(sample_dataset(&target, cfg.n_train, cfg.n_test, data_seed)?)
}

/// Initialization seed for run `seed_index` of a cell.
pub fn init_seed(cfg: &ExperimentConfig, spec: &ArchitectureSpec, target_index: usize, seed_index: usize) -> u64 {
    derive_seed(
        cfg.base_seed,
        experiment_tag(cfg.experiment.name()),
        cell_index(spec.n_qubits(), spec.fm_layers(), spec.tbl()),
        ((target_index as u64) << 32) | seed_index as u64,
    )
}

/// One training run with its post-training diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedRun {
    pub record: RunRecord,
    /// Jacobian-QFIM eigenvalues at the final parameters, divided by the largest.
    pub normalized_spectrum: Vec<f64>,
}

pub fn train_and_diagnose(
    spec: &ArchitectureSpec,
    data: &Dataset,
    target_id: &str,
    seed: u64,
    train_cfg: &TrainConfig,
    timing: bool,
) -> HarnessResult<TrainedRun> {
    let start = Instant::now();
    let result = train(spec, data, train_cfg, seed)?;
    let report = jacobian_report(&coefficient_jacobian(spec, &result.final_theta)?)?;
    let objective = MseObjective::new(spec, &data.train_x, &data.train_y)?;
    let eig = sym_eig_descending(&jacobian_qfim(&objective.data_jacobian(&result.final_theta)?))?;
    let (knee, normalized_spectrum) = normalized_knee(&eig)?;
    Ok(TrainedRun {
        record: RunRecord {
            n_qubits: spec.n_qubits(),
            fm_layers: spec.fm_layers(),
            tbl: spec.tbl(),
            parameters: spec.parameter_count(),
            budget: spec.encoding_budget(),
            target_id: target_id.to_string(),
            seed,
            r2_train: result.r2_train,
            r2_test: result.r2_test,
            final_loss: result.final_loss,
            rank_j: report.rank,
            knee,
            kernel_dim: report.kernel_dim,
            runtime_s: if timing { start.elapsed().as_secs_f64() } else { 0.0 },
        },
        normalized_spectrum,
    })
}

fn normalized_knee(eig: &Spectrum) -> HarnessResult<(usize, Vec<f64>)> {
    let top = eig.largest();
    if top > 0.0 {
        Ok((spectral_knee(eig)?, eig.values().iter().map(|v| v / top).collect()))
    } else {
        Ok((0, vec![0.0; eig.len()]))
    }
}

fn untrained_record(spec: &ArchitectureSpec, seed: u64, report: &DiagnosticsReport) -> RunRecord {
    RunRecord {
        n_qubits: spec.n_qubits(),
        fm_layers: spec.fm_layers(),
        tbl: spec.tbl(),
        parameters: spec.parameter_count(),
        budget: spec.encoding_budget(),
        target_id: "none".into(),
        seed,
        r2_train: f64::NAN,
        r2_test: f64::NAN,
        final_loss: f64::NAN,
        rank_j: report.rank,
        knee: report.knee,
        kernel_dim: report.kernel_dim,
        runtime_s: 0.0,
    }
}

/// A training job; `data` keys into the shared dataset map.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Job {
    n: usize,
    l: usize,
    tbl: usize,
    data: String,
    seed: u64,
}

fn run_jobs(
    jobs: &[Job],
    datasets: &BTreeMap<String, Dataset>,
    cfg: &ExperimentConfig,
    opts: RunOptions,
) -> HarnessResult<BTreeMap<Job, TrainedRun>> {
    let train_cfg = cfg.train_config();
    let runs = jobs
        .par_iter()
        .map(|job| {
            let spec = make_spec(job.n, job.l, job.tbl)?;
            let data = &datasets[&job.data];
            train_and_diagnose(&spec, data, &job.data, job.seed, &train_cfg, opts.timing)
        })
        .collect::<HarnessResult<Vec<_>>>()?;
    Ok(jobs.iter().cloned().zip(runs).collect())
}

fn synthetic_jobs(
    cfg: &ExperimentConfig,
    spec: &ArchitectureSpec,
    degree: usize,
    datasets: &mut BTreeMap<String, Dataset>,
) -> HarnessResult<Vec<Job>> {
    let mut jobs = Vec::new();
    for t in 0..cfg.targets_per_cell {
        let key = target_key(degree, t);
        if !datasets.contains_key(&key) {
            datasets.insert(key.clone(), synthetic_dataset(cfg, degree, t)?);
        }
        for s in 0..cfg.seeds_per_target {
            jobs.push(Job {
                n: spec.n_qubits(),
                l: spec.fm_layers(),
                tbl: spec.tbl(),
                data: key.clone(),
                seed: init_seed(cfg, spec, t, s),
            });
        }
    }
    Ok(jobs)
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn success_rate(r2: &[f64]) -> f64 {
    r2.iter().filter(|&&r| r >= SUCCESS_R2).count() as f64 / r2.len() as f64
}

/// Elementwise mean of normalized spectra.
pub fn averaged_spectrum(spectra: &[&[f64]]) -> Vec<f64> {
    let len = spectra.iter().map(|s| s.len()).max().unwrap_or(0);
    (0..len)
        .map(|i| spectra.iter().map(|s| s.get(i).copied().unwrap_or(0.0)).sum::<f64>() / spectra.len() as f64)
        .collect()
}

/// Knee of an already-normalized spectrum.
pub fn knee_of_normalized(spectrum: &[f64]) -> usize {
    spectrum.iter().filter(|&&v| v > KNEE_THRESHOLD).count()
}

fn spectrum_table(name: String, spectrum: &[f64]) -> Table {
    let mut t = Table::new(name, &["rank_index", "lambda_over_lambda1"]);
    for (i, v) in spectrum.iter().enumerate() {
        t.push(vec![(i + 1).to_string(), fmt_f64(*v)]);
    }
    t
}

/// Fixed encoding budget, every divisor architecture, tbl sweep.
pub fn run_fixed_budget_sweep(cfg: &ExperimentConfig, opts: RunOptions) -> HarnessResult<ExperimentOutput> {
    let tbls = cfg.tbl.as_ref().map(|r| r.values()).unwrap_or_default();
    let mut datasets = BTreeMap::new();
    let mut cells = Vec::new();
    let mut jobs = Vec::new();
    for &e in &cfg.budgets {
        if cfg.qubit_counts.iter().any(|n| e % n != 0) {
            return Err(HarnessError::Config(format!("qubit counts must divide E = {e}")));
        }
        let degrees = if cfg.target_degrees.is_empty() { vec![e] } else { cfg.target_degrees.clone() };
        for &n in &cfg.qubit_counts {
            for &tbl in &tbls {
                let spec = make_spec(n, e / n, tbl)?;
                for &d in &degrees {
                    let cell_jobs = synthetic_jobs(cfg, &spec, d, &mut datasets)?;
                    cells.push((e, spec, d, cell_jobs.clone()));
                    jobs.extend(cell_jobs);
                }
            }
        }
    }
    let runs = run_jobs(&jobs, &datasets, cfg, opts)?;
    let mut table = Table::new(
        "success",
        &["E", "N", "L", "tbl", "P", "degree", "runs", "success_rate", "mean_r2_test"],
    );
    for (e, spec, d, cell_jobs) in &cells {
        let r2: Vec<f64> = cell_jobs.iter().map(|j| runs[j].record.r2_test).collect();
        table.push(vec![
            e.to_string(),
            spec.n_qubits().to_string(),
            spec.fm_layers().to_string(),
            spec.tbl().to_string(),
            spec.parameter_count().to_string(),
            d.to_string(),
            r2.len().to_string(),
            fmt_f64(success_rate(&r2)),
            fmt_f64(mean(&r2)),
        ]);
    }
    Ok(ExperimentOutput {
        records: runs.into_values().map(|r| r.record).collect(),
        tables: vec![table],
        primary_table: None,
    })
}

/// The tbl whose parameter count is nearest `target` (ties to the smaller).
pub fn nearest_tbl(n_qubits: usize, fm_layers: usize, target: usize) -> usize {
    let per_block = (fm_layers + 1) * 3 * n_qubits;
    let lo = (target / per_block).max(1);
    let hi = lo + 1;
    if target.abs_diff(hi * per_block) < target.abs_diff(lo * per_block) {
        hi
    } else {
        lo
    }
}

/// Rank of `J` over random initializations at `P ≈ 3E`.
pub fn run_rank_ceiling_sweep(cfg: &ExperimentConfig) -> HarnessResult<ExperimentOutput> {
    let mut cells = Vec::new();
    for &e in &cfg.budgets {
        for &n in &cfg.qubit_counts {
            if e % n != 0 {
                warn(&format!("rank-ceiling: skipping E = {e}, N = {n} (L = E/N is not an integer)"));
                continue;
            }
            let l = e / n;
            cells.push(make_spec(n, l, nearest_tbl(n, l, 3 * e))?);
        }
    }
    let mut table = Table::new(
        "ceiling",
        &[
            "E",
            "N",
            "L",
            "tbl",
            "P",
            "ceiling",
            "inits",
            "median_rank",
            "q1_rank",
            "q3_rank",
            "at_ceiling_fraction",
        ],
    );
    let mut records = Vec::new();
    for spec in &cells {
        let reports = (0..cfg.seeds_per_target)
            .into_par_iter()
            .map(|s| {
                let seed = init_seed(cfg, spec, 0, s);
                let theta = init_parameters(spec, seed);
                Ok((seed, jacobian_report(&coefficient_jacobian(spec, &theta)?)?))
            })
            .collect::<HarnessResult<Vec<_>>>()?;
        let mut ranks: Vec<f64> = reports.iter().map(|(_, r)| r.rank as f64).collect();
        ranks.sort_by(f64::total_cmp);
        let ceiling = reports[0].1.ceiling;
        let at = reports.iter().filter(|(_, r)| r.rank == ceiling).count();
        table.push(vec![
            spec.encoding_budget().to_string(),
            spec.n_qubits().to_string(),
            spec.fm_layers().to_string(),
            spec.tbl().to_string(),
            spec.parameter_count().to_string(),
            ceiling.to_string(),
            reports.len().to_string(),
            fmt_f64(quantile(&ranks, 0.5)),
            fmt_f64(quantile(&ranks, 0.25)),
            fmt_f64(quantile(&ranks, 0.75)),
            fmt_f64(at as f64 / reports.len() as f64),
        ]);
        records.extend(reports.iter().map(|(seed, r)| untrained_record(spec, *seed, r)));
    }
    Ok(ExperimentOutput {
        records,
        tables: vec![table],
        primary_table: None,
    })
}

/// Phase-lock statistics of one circuit at one parameter point.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseLockSummary {
    pub n_params: usize,
    pub active: usize,
    pub max_imaginary_fraction: f64,
    /// `(j, k, metric)` over active pairs `j < k`.
    pub pair_metrics: Vec<(usize, usize, f64)>,
    pub inactive: Vec<usize>,
    /// Median metric over pairs acting on different qubits (NaN if none).
    pub median_cross_qubit: f64,
    pub max_pair_metric: f64,
}

pub fn phase_lock_summary(spec: &ArchitectureSpec, theta: &[f64], xs: &[f64]) -> HarnessResult<PhaseLockSummary> {
    let traj = g_trajectory(spec, theta, xs)?;
    summarize_trajectory(spec, &traj)
}

fn summarize_trajectory(
    spec: &ArchitectureSpec,
    traj: &reupload_core::diagnostics::TrajectorySample,
) -> HarnessResult<PhaseLockSummary> {
    let p = traj.n_params();
    let active: Vec<usize> = (0..p).filter(|&j| traj.active[j]).collect();
    let inactive: Vec<usize> = (0..p).filter(|&j| !traj.active[j]).collect();
    let mut pair_metrics = Vec::new();
    let mut cross = Vec::new();
    for (a, &j) in active.iter().enumerate() {
        for &k in &active[a + 1..] {
            let m = match phase_lock_metric(traj, j, k) {
                Ok(m) => m,
                Err(reupload_core::Error::UndefinedMetric(_)) => continue,
                Err(e) => return Err(e.into()),
            };
            if spec.slot(j)?.qubit != spec.slot(k)?.qubit {
                cross.push(m);
            }
            pair_metrics.push((j, k, m));
        }
    }
    cross.sort_by(f64::total_cmp);
    Ok(PhaseLockSummary {
        n_params: p,
        active: active.len(),
        max_imaginary_fraction: max_imaginary_fraction(traj),
        max_pair_metric: pair_metrics.iter().map(|t| t.2).fold(0.0, f64::max),
        median_cross_qubit: if cross.is_empty() { f64::NAN } else { quantile(&cross, 0.5) },
        pair_metrics,
        inactive,
    })
}

/// Gradient-coefficient trajectories at one random initialization per circuit.
pub fn run_phase_lock_experiment(cfg: &ExperimentConfig) -> HarnessResult<ExperimentOutput> {
    let xs = uniform_grid(cfg.trajectory_points);
    let mut out = ExperimentOutput::default();
    let mut metrics = Table::new(
        "metrics",
        &["N", "L", "tbl", "j", "k", "qubit_j", "qubit_k", "cross_qubit", "metric", "status"],
    );
    let mut summary = Table::new(
        "summary",
        &[
            "N",
            "L",
            "tbl",
            "P",
            "active",
            "max_imag_fraction",
            "max_pair_metric",
            "median_cross_qubit_metric",
        ],
    );
    for arch in &cfg.architectures {
        for spec in arch.specs()? {
            let seed = init_seed(cfg, &spec, 0, 0);
            let theta = init_parameters(&spec, seed);
            let traj = g_trajectory(&spec, &theta, &xs)?;
            let s = summarize_trajectory(&spec, &traj)?;
            let coords = [spec.n_qubits(), spec.fm_layers(), spec.tbl()].map(|v| v.to_string());
            let mut trace = Table::new(
                format!("trajectory_N{}_L{}_tbl{}", coords[0], coords[1], coords[2]),
                &["x", "param_index", "re_g", "im_g"],
            );
            for (j, row) in traj.normalized_g.iter().enumerate() {
                for (x, g) in xs.iter().zip(row) {
                    trace.push(vec![fmt_f64(*x), j.to_string(), fmt_f64(g.re), fmt_f64(g.im)]);
                }
            }
            for &(j, k, m) in &s.pair_metrics {
                let (qj, qk) = (spec.slot(j)?.qubit, spec.slot(k)?.qubit);
                let mut row = coords.to_vec();
                row.extend([j, k, qj, qk].map(|v| v.to_string()));
                row.extend([(qj != qk).to_string(), fmt_f64(m), "ok".into()]);
                metrics.push(row);
            }
            for &j in &s.inactive {
                let qj = spec.slot(j)?.qubit;
                let mut row = coords.to_vec();
                row.extend([j.to_string(), String::new(), qj.to_string(), String::new()]);
                row.extend([String::new(), "NaN".into(), "inactive".into()]);
                metrics.push(row);
            }
            let mut row = coords.to_vec();
            row.extend([spec.parameter_count().to_string(), s.active.to_string()]);
            row.extend([s.max_imaginary_fraction, s.max_pair_metric, s.median_cross_qubit].map(fmt_f64));
            summary.push(row);
            out.tables.push(trace);
            let report = jacobian_report(&coefficient_jacobian(&spec, &theta)?)?;
            out.records.push(untrained_record(&spec, seed, &report));
        }
    }
    out.tables.insert(0, summary);
    out.tables.insert(1, metrics);
    Ok(out)
}

/// One sweep point on the FM or tbl route.
#[derive(Debug, Clone, PartialEq)]
struct RoutePoint {
    route: &'static str,
    degree: usize,
    l_min: usize,
    spec: ArchitectureSpec,
}

fn route_points(cfg: &ExperimentConfig) -> HarnessResult<Vec<RoutePoint>> {
    let mut points = Vec::new();
    for arch in &cfg.architectures {
        let degree = arch.degree.expect("validated");
        let n = arch.n_qubits;
        let lm = l_min(degree, n);
        for l in arch.fm_layers.values() {
            points.push(RoutePoint {
                route: "fm",
                degree,
                l_min: lm,
                spec: make_spec(n, l, 1)?,
            });
        }
        for t in arch.tbl.values() {
            points.push(RoutePoint {
                route: "tbl",
                degree,
                l_min: lm,
                spec: make_spec(n, lm, t)?,
            });
        }
    }
    Ok(points)
}

/// Minimal tbl with `(L_min + 1)·tbl·3N ≥ n_train`.
pub fn interpolation_tbl(n_qubits: usize, l_min: usize, n_train: usize) -> usize {
    n_train.div_ceil((l_min + 1) * 3 * n_qubits).max(1)
}

/// Both routes over a dataset family; `datasets_for(degree)` yields the
/// `(key, dataset)` pairs used at that degree.
fn route_sweep<F>(
    cfg: &ExperimentConfig,
    opts: RunOptions,
    n_train: usize,
    mut datasets_for: F,
) -> HarnessResult<ExperimentOutput>
where
    F: FnMut(usize) -> HarnessResult<Vec<(usize, String, Dataset)>>,
{
    let points = route_points(cfg)?;
    let mut datasets = BTreeMap::new();
    let mut by_degree: BTreeMap<usize, Vec<(usize, String)>> = BTreeMap::new();
    for p in &points {
        if !by_degree.contains_key(&p.degree) {
            let sets = datasets_for(p.degree)?;
            by_degree.insert(p.degree, sets.iter().map(|(t, k, _)| (*t, k.clone())).collect());
            for (_, k, d) in sets {
                datasets.insert(k, d);
            }
        }
    }
    let point_jobs: Vec<Vec<Job>> = points
        .iter()
        .map(|p| {
            by_degree[&p.degree]
                .iter()
                .flat_map(|(t, key)| {
                    (0..cfg.seeds_per_target).map(move |s| Job {
                        n: p.spec.n_qubits(),
                        l: p.spec.fm_layers(),
                        tbl: p.spec.tbl(),
                        data: key.clone(),
                        seed: init_seed(cfg, &p.spec, *t, s),
                    })
                })
                .collect()
        })
        .collect();
    let mut unique: Vec<Job> = point_jobs.iter().flatten().cloned().collect();
    unique.sort();
    unique.dedup();
    let runs = run_jobs(&unique, &datasets, cfg, opts)?;

    let mut out = ExperimentOutput::default();
    let mut point_table = Table::new(
        "points",
        &[
            "route",
            "N",
            "degree",
            "L_min",
            "L",
            "tbl",
            "P",
            "sub_expressive",
            "runs",
            "mean_r2_test",
            "success_rate",
            "knee",
        ],
    );
    // (N, degree) -> route -> first (P, L or tbl) reaching the threshold.
    let mut reached: BTreeMap<(usize, usize), BTreeMap<&str, (usize, usize)>> = BTreeMap::new();
    for (p, jobs) in points.iter().zip(&point_jobs) {
        let cell: Vec<&TrainedRun> = jobs.iter().map(|j| &runs[j]).collect();
        let r2: Vec<f64> = cell.iter().map(|r| r.record.r2_test).collect();
        let spectra: Vec<&[f64]> = cell.iter().map(|r| r.normalized_spectrum.as_slice()).collect();
        let avg = averaged_spectrum(&spectra);
        let knee = knee_of_normalized(&avg);
        let mean_r2 = mean(&r2);
        let s = &p.spec;
        point_table.push(vec![
            p.route.into(),
            s.n_qubits().to_string(),
            p.degree.to_string(),
            p.l_min.to_string(),
            s.fm_layers().to_string(),
            s.tbl().to_string(),
            s.parameter_count().to_string(),
            (s.fm_layers() < p.l_min).to_string(),
            r2.len().to_string(),
            fmt_f64(mean_r2),
            fmt_f64(success_rate(&r2)),
            knee.to_string(),
        ]);
        out.tables.push(spectrum_table(
            format!("spectrum_d{}_{}_N{}_L{}_tbl{}", p.degree, p.route, s.n_qubits(), s.fm_layers(), s.tbl()),
            &avg,
        ));
        let step = if p.route == "fm" { s.fm_layers() } else { s.tbl() };
        if mean_r2 >= SUCCESS_R2 && s.fm_layers() >= p.l_min {
            reached
                .entry((s.n_qubits(), p.degree))
                .or_default()
                .entry(p.route)
                .or_insert((s.parameter_count(), step));
        }
    }
    let mut interp = Table::new(
        "interpolation",
        &["N", "degree", "L_min", "P_base", "n_train", "tbl_interp", "P_interp"],
    );
    let mut eff = Table::new(
        "efficiency",
        &["N", "degree", "P_base", "L_star", "P_fm", "tbl_star", "P_tbl", "ratio"],
    );
    for arch in &cfg.architectures {
        let (n, d) = (arch.n_qubits, arch.degree.expect("validated"));
        let lm = l_min(d, n);
        let base = (lm + 1) * 3 * n;
        let ti = interpolation_tbl(n, lm, n_train);
        interp.push([n, d, lm, base, n_train, ti, ti * base].map(|v| v.to_string()).to_vec());
        let hit = reached.get(&(n, d));
        let fm = hit.and_then(|h| h.get("fm"));
        let tb = hit.and_then(|h| h.get("tbl"));
        let show = |v: Option<usize>| v.map_or("unreached".to_string(), |v| v.to_string());
        eff.push(vec![
            n.to_string(),
            d.to_string(),
            base.to_string(),
            show(fm.map(|v| v.1)),
            show(fm.map(|v| v.0)),
            show(tb.map(|v| v.1)),
            show(tb.map(|v| v.0)),
            match (fm, tb) {
                (Some(f), Some(t)) => fmt_f64(t.0 as f64 / f.0 as f64),
                _ => "unreached".into(),
            },
        ]);
    }
    out.tables.splice(0..0, [point_table, interp, eff]);
    out.records = runs.into_values().map(|r| r.record).collect();
    Ok(out)
}

/// FM route (tbl = 1, L sweep) vs tbl route (L = L_min).
pub fn run_fm_vs_tbl_sweep(cfg: &ExperimentConfig, opts: RunOptions) -> HarnessResult<ExperimentOutput> {
    route_sweep(cfg, opts, cfg.n_train, |degree| {
        (0..cfg.targets_per_cell)
            .map(|t| Ok((t, target_key(degree, t), synthetic_dataset(cfg, degree, t)?)))
            .collect()
    })
}

/// Both routes on the Nottingham series; architecture `degree` is the encoding budget.
pub fn run_realworld(cfg: &ExperimentConfig, opts: RunOptions) -> HarnessResult<ExperimentOutput> {
    let path = cfg.data_path.as_deref().expect("validated");
    let data = load_nottingham(path, cfg.split_seed)?.to_dataset();
    let n_train = data.train_x.len();
    route_sweep(cfg, opts, n_train, |_| Ok(vec![(0, "nottingham".to_string(), data.clone())]))
}

/// Mean test R² against target degree at `E = degree`, tbl = 1.
pub fn run_degree_sweep(cfg: &ExperimentConfig, opts: RunOptions) -> HarnessResult<ExperimentOutput> {
    let mut datasets = BTreeMap::new();
    let mut cells = Vec::new();
    let mut jobs = Vec::new();
    for &n in &cfg.qubit_counts {
        for &d in &cfg.target_degrees {
            let l = if d % n == 0 {
                d / n
            } else if d < n {
                1
            } else {
                warn(&format!("degree-sweep: skipping degree {d}, N = {n} (L = deg/N is not an integer)"));
                continue;
            };
            let spec = make_spec(n, l, 1)?;
            let cell_jobs = synthetic_jobs(cfg, &spec, d, &mut datasets)?;
            jobs.extend(cell_jobs.iter().cloned());
            cells.push((spec, d, cell_jobs));
        }
    }
    let runs = run_jobs(&jobs, &datasets, cfg, opts)?;
    let mut table = Table::new(
        "degree",
        &["N", "degree", "L", "tbl", "P", "runs", "mean_r2_test", "success_rate"],
    );
    for (spec, d, cell_jobs) in &cells {
        let r2: Vec<f64> = cell_jobs.iter().map(|j| runs[j].record.r2_test).collect();
        table.push(vec![
            spec.n_qubits().to_string(),
            d.to_string(),
            spec.fm_layers().to_string(),
            spec.tbl().to_string(),
            spec.parameter_count().to_string(),
            r2.len().to_string(),
            fmt_f64(mean(&r2)),
            fmt_f64(success_rate(&r2)),
        ]);
    }
    Ok(ExperimentOutput {
        records: runs.into_values().map(|r| r.record).collect(),
        tables: vec![table],
        primary_table: None,
    })
}

/// Per-parameter loss-gradient variance over initializations.
pub fn run_gradient_variance(cfg: &ExperimentConfig) -> HarnessResult<ExperimentOutput> {
    let degree = cfg.target_degrees.first().copied().unwrap_or(12);
    let data = synthetic_dataset(cfg, degree, 0)?;
    let mut specs = Vec::new();
    for arch in &cfg.architectures {
        specs.extend(arch.specs()?);
    }
    let stats = specs
        .par_iter()
        .map(|spec| {
            let seeds: Vec<u64> = (0..cfg.seeds_per_target).map(|s| init_seed(cfg, spec, 0, s)).collect();
            if seeds.len() < 2 {
                return Err(HarnessError::Config("grad-variance needs seeds_per_target >= 2".into()));
            }
            Ok(gradient_variance(spec, &data, &seeds)?)
        })
        .collect::<HarnessResult<Vec<_>>>()?;
    let mut primary = Table::new("variance", &["N", "L", "tbl", "P", "inits", "median", "q1", "q3"]);
    let mut per_param = Table::new("per_param", &["N", "L", "tbl", "param_index", "variance"]);
    for (spec, st) in specs.iter().zip(&stats) {
        let coords = [spec.n_qubits(), spec.fm_layers(), spec.tbl()].map(|v| v.to_string());
        let mut row = coords.to_vec();
        row.extend([spec.parameter_count(), cfg.seeds_per_target].map(|v| v.to_string()));
        row.extend([st.median, st.q1, st.q3].map(fmt_f64));
        primary.push(row);
        for (k, v) in st.per_param.iter().enumerate() {
            let mut row = coords.to_vec();
            row.extend([k.to_string(), fmt_f64(*v)]);
            per_param.push(row);
        }
    }
    Ok(ExperimentOutput {
        records: Vec::new(),
        tables: vec![per_param],
        primary_table: Some(primary),
    })
}

/// One-off Jacobian and QFIM report per architecture and initialization.
pub fn run_diagnose(cfg: &ExperimentConfig) -> HarnessResult<ExperimentOutput> {
    let mut out = ExperimentOutput::default();
    let mut summary = Table::new(
        "summary",
        &[
            "N",
            "L",
            "tbl",
            "P",
            "E",
            "seed",
            "rank_J",
            "ceiling",
            "kernel_dim",
            "knee_J",
            "grid_qfim_knee",
            "state_qfim_rank",
            "state_qfim_bound",
        ],
    );
    for arch in &cfg.architectures {
        for spec in arch.specs()? {
            for s in 0..cfg.seeds_per_target {
                let seed = init_seed(cfg, &spec, 0, s);
                let theta = init_parameters(&spec, seed);
                let report = jacobian_report(&coefficient_jacobian(&spec, &theta)?)?;
                let grid = grid_gradients(&spec, &theta)?;
                let (grid_knee, grid_spectrum) = normalized_knee(&sym_eig_descending(&jacobian_qfim(&grid))?)?;
                let qfim = sym_eig_descending(&state_qfim(&spec, &theta, 0.0)?)?;
                let qfim_rank = numeric_rank(&qfim, 1e-10 * qfim.largest().max(f64::MIN_POSITIVE));
                let mut row = [
                    spec.n_qubits(),
                    spec.fm_layers(),
                    spec.tbl(),
                    spec.parameter_count(),
                    spec.encoding_budget(),
                ]
                .map(|v| v.to_string())
                .to_vec();
                row.push(seed.to_string());
                row.extend(
                    [
                        report.rank,
                        report.ceiling,
                        report.kernel_dim,
                        report.knee,
                        grid_knee,
                        qfim_rank,
                        max_qfim_rank(spec.n_qubits()),
                    ]
                    .map(|v| v.to_string()),
                );
                summary.push(row);
                let top = report.singular_values.largest();
                let sq: Vec<f64> = report
                    .singular_values
                    .values()
                    .iter()
                    .map(|v| if top > 0.0 { (v / top).powi(2) } else { 0.0 })
                    .collect();
                let tag = format!("N{}_L{}_tbl{}_s{s}", spec.n_qubits(), spec.fm_layers(), spec.tbl());
                out.tables.push(spectrum_table(format!("jacobian_spectrum_{tag}"), &sq));
                out.tables.push(spectrum_table(format!("grid_qfim_spectrum_{tag}"), &grid_spectrum));
                out.records.push(untrained_record(&spec, seed, &report));
            }
        }
    }
    out.tables.insert(0, summary);
    Ok(out)
}

/// Forward evaluations a config will perform, per architecture.
fn planned_evaluations(cfg: &ExperimentConfig) -> HarnessResult<Vec<(ArchitectureSpec, f64)>> {
    let diag = |s: &ArchitectureSpec| (2 * s.n_qubits() * (s.fm_layers() + 1) + 1) as f64;
    let jac = |s: &ArchitectureSpec| diag(s) * 2.0 * s.parameter_count() as f64;
    let trained = |s: &ArchitectureSpec| cfg.steps as f64 * (jac(s) + diag(s)) + 2.0 * jac(s);
    let runs = (cfg.targets_per_cell * cfg.seeds_per_target) as f64;
    let mut plan = Vec::new();
    match cfg.experiment {
        ExperimentKind::FixedBudget => {
            let tbls = cfg.tbl.as_ref().map(|r| r.values()).unwrap_or_default();
            let degrees = cfg.target_degrees.len().max(1) as f64;
            for &e in &cfg.budgets {
                for &n in &cfg.qubit_counts {
                    for &t in &tbls {
                        let s = make_spec(n, e / n, t)?;
                        plan.push((s, trained(&s) * runs * degrees));
                    }
                }
            }
        }
        ExperimentKind::RankCeiling => {
            for &e in &cfg.budgets {
                for &n in cfg.qubit_counts.iter().filter(|&&n| e % n == 0) {
                    let s = make_spec(n, e / n, nearest_tbl(n, e / n, 3 * e))?;
                    plan.push((s, jac(&s) * cfg.seeds_per_target as f64));
                }
            }
        }
        ExperimentKind::DegreeSweep => {
            for &n in &cfg.qubit_counts {
                for &d in &cfg.target_degrees {
                    if d % n == 0 || d < n {
                        let s = make_spec(n, (d / n).max(1), 1)?;
                        plan.push((s, trained(&s) * runs));
                    }
                }
            }
        }
        ExperimentKind::FmVsTbl | ExperimentKind::Realworld => {
            let runs = if cfg.experiment == ExperimentKind::Realworld {
                cfg.seeds_per_target as f64
            } else {
                runs
            };
            for p in route_points(cfg)? {
                plan.push((p.spec, trained(&p.spec) * runs));
            }
        }
        ExperimentKind::GradVariance => {
            for a in &cfg.architectures {
                for s in a.specs()? {
                    plan.push((s, (jac(&s) + diag(&s)) * cfg.seeds_per_target as f64));
                }
            }
        }
        ExperimentKind::PhaseLock | ExperimentKind::Diagnose => {
            for a in &cfg.architectures {
                for s in a.specs()? {
                    let per = jac(&s) + cfg.trajectory_points as f64 * s.parameter_count() as f64;
                    plan.push((s, per * cfg.seeds_per_target as f64));
                }
            }
        }
    }
    Ok(plan)
}

/// Rough wall-clock estimate from a short calibration of the simulator.
pub fn estimate_runtime(cfg: &ExperimentConfig, threads: usize) -> HarnessResult<f64> {
    let ops = |s: &ArchitectureSpec| {
        let n = s.n_qubits();
        (((s.fm_layers() + 1) * s.tbl() * (2 * n - 1) + s.fm_layers() * n) << n) as f64
    };
    let probe = make_spec(2, 2, 1)?;
    let theta = init_parameters(&probe, 0);
    let reps = 2000;
    let start = Instant::now();
    let mut acc = 0.0;
    for i in 0..reps {
        acc += reupload_core::forward(&probe, &theta, i as f64 * 1e-3)?;
    }
    std::hint::black_box(acc);
    let per_op = start.elapsed().as_secs_f64() / (reps as f64 * ops(&probe));
    let total: f64 = planned_evaluations(cfg)?.iter().map(|(s, evals)| evals * ops(s) * per_op).sum();
    Ok(total / threads.max(1) as f64)
}

/// Default main output path for an experiment.
pub fn default_output(cfg: &ExperimentConfig, ext: &str) -> std::path::PathBuf {
    cfg.output
        .clone()
        .unwrap_or_else(|| Path::new(&format!("{}.{ext}", cfg.experiment)).to_path_buf())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_tbl_examples() {
        assert_eq!(nearest_tbl(1, 2, 6), 1);
        assert_eq!(nearest_tbl(1, 8, 24), 1);
        assert_eq!(nearest_tbl(2, 4, 24), 1);
        assert_eq!(nearest_tbl(1, 1, 12), 2);
        // 6 vs 12 around 9: tie resolves to the smaller count.
        assert_eq!(nearest_tbl(1, 1, 9), 1);
    }

    #[test]
    fn interpolation_table_arithmetic() {
        assert_eq!(interpolation_tbl(1, 12, 200), 6);
        assert_eq!(interpolation_tbl(2, 10, 200), 4);
        assert_eq!(interpolation_tbl(4, 7, 200), 3);
        assert_eq!(interpolation_tbl(6, 1, 200), 6);
    }

    #[test]
    fn averaged_spectrum_pads_and_averages() {
        let a = [1.0, 0.5];
        let b = [1.0, 0.1, 1e-7];
        assert_eq!(averaged_spectrum(&[&a, &b]), vec![1.0, 0.3, 5e-8]);
        assert_eq!(knee_of_normalized(&[1.0, 1e-6, 2e-6]), 2);
    }

    #[test]
    fn seeds_differ_across_cells_and_targets() {
        let cfg = ExperimentConfig::desk(ExperimentKind::FmVsTbl);
        let a = ArchitectureSpec::new(1, 3, 1).unwrap();
        let b = ArchitectureSpec::new(1, 3, 2).unwrap();
        assert_ne!(init_seed(&cfg, &a, 0, 0), init_seed(&cfg, &b, 0, 0));
        assert_ne!(init_seed(&cfg, &a, 0, 1), init_seed(&cfg, &a, 1, 0));
    }
}
