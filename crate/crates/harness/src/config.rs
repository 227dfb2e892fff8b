//! JSON experiment configs and the built-in desk/full presets.

use std::fmt;
use std::path::{Path, PathBuf};

use reupload_core::training::TrainConfig;
use reupload_core::ArchitectureSpec;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, HarnessResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    FixedBudget,
    RankCeiling,
    PhaseLock,
    FmVsTbl,
    DegreeSweep,
    GradVariance,
    Realworld,
    Diagnose,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        ExperimentKind::FixedBudget,
        ExperimentKind::RankCeiling,
        ExperimentKind::PhaseLock,
        ExperimentKind::FmVsTbl,
        ExperimentKind::DegreeSweep,
        ExperimentKind::GradVariance,
        ExperimentKind::Realworld,
        ExperimentKind::Diagnose,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::FixedBudget => "fixed-budget",
            ExperimentKind::RankCeiling => "rank-ceiling",
            ExperimentKind::PhaseLock => "phase-lock",
            ExperimentKind::FmVsTbl => "fm-vs-tbl",
            ExperimentKind::DegreeSweep => "degree-sweep",
            ExperimentKind::GradVariance => "grad-variance",
            ExperimentKind::Realworld => "realworld",
            ExperimentKind::Diagnose => "diagnose",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// An integer range in a config: a single value, an explicit list, or
/// `{"from": a, "to": b, "step": s}` (inclusive).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum IntRange {
    Single(usize),
    List(Vec<usize>),
    Span {
        from: usize,
        to: usize,
        #[serde(default = "one")]
        step: usize,
    },
}

impl IntRange {
    pub fn span(from: usize, to: usize, step: usize) -> Self {
        IntRange::Span { from, to, step }
    }

    pub fn values(&self) -> Vec<usize> {
        match self {
            IntRange::Single(v) => vec![*v],
            IntRange::List(v) => v.clone(),
            IntRange::Span { from, to, step } => (*from..=*to).step_by((*step).max(1)).collect(),
        }
    }

    fn validate(&self, what: &str) -> HarnessResult<()> {
        match self {
            IntRange::Span { from, to, step } if from > to || *step == 0 => Err(HarnessError::Config(format!(
                "{what}: range from {from} to {to} step {step} is empty or malformed"
            ))),
            _ if self.values().contains(&0) => Err(HarnessError::Config(format!("{what}: values must be >= 1"))),
            _ => Ok(()),
        }
    }
}

/// One architecture family entry. `degree` is the target degree (or the
/// encoding budget for real-world data) used by the route sweeps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectureRange {
    pub n_qubits: usize,
    pub fm_layers: IntRange,
    pub tbl: IntRange,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<usize>,
}

impl ArchitectureRange {
    pub fn new(n_qubits: usize, fm_layers: IntRange, tbl: IntRange, degree: Option<usize>) -> Self {
        Self {
            n_qubits,
            fm_layers,
            tbl,
            degree,
        }
    }

    /// Every `(L, tbl)` combination as a spec.
    pub fn specs(&self) -> HarnessResult<Vec<ArchitectureSpec>> {
        let mut out = Vec::new();
        for l in self.fm_layers.values() {
            for t in self.tbl.values() {
                out.push(make_spec(self.n_qubits, l, t)?);
            }
        }
        Ok(out)
    }
}

pub(crate) fn make_spec(n: usize, l: usize, tbl: usize) -> HarnessResult<ArchitectureSpec> {
    ArchitectureSpec::new(n, l, tbl).map_err(|e| HarnessError::Config(e.to_string()))
}

fn one() -> usize {
    1
}
fn default_n_train() -> usize {
    200
}
fn default_n_test() -> usize {
    100
}
fn default_learning_rate() -> f64 {
    1e-3
}
fn default_steps() -> usize {
    5000
}
fn default_trajectory_points() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub architectures: Vec<ArchitectureRange>,
    /// Encoding budgets `E` (fixed-budget, rank-ceiling).
    #[serde(default)]
    pub budgets: Vec<usize>,
    #[serde(default)]
    pub qubit_counts: Vec<usize>,
    /// Trainable-block range for fixed-budget sweeps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tbl: Option<IntRange>,
    #[serde(default)]
    pub target_degrees: Vec<usize>,
    #[serde(default = "one")]
    pub targets_per_cell: usize,
    /// Initializations per target (or per cell when there is no target).
    #[serde(default = "one")]
    pub seeds_per_target: usize,
    #[serde(default = "default_n_train")]
    pub n_train: usize,
    #[serde(default = "default_n_test")]
    pub n_test: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_path: Option<PathBuf>,
    /// Base seed of the real-world train/test split.
    #[serde(default)]
    pub split_seed: u64,
    #[serde(default = "default_trajectory_points")]
    pub trajectory_points: usize,
}

impl ExperimentConfig {
    /// Defaults for every optional key.
    pub fn new(experiment: ExperimentKind) -> Self {
        Self {
            experiment,
            architectures: Vec::new(),
            budgets: Vec::new(),
            qubit_counts: Vec::new(),
            tbl: None,
            target_degrees: Vec::new(),
            targets_per_cell: 1,
            seeds_per_target: 1,
            n_train: default_n_train(),
            n_test: default_n_test(),
            learning_rate: default_learning_rate(),
            steps: default_steps(),
            base_seed: 0,
            output: None,
            data_path: None,
            split_seed: 0,
            trajectory_points: default_trajectory_points(),
        }
    }

    pub fn from_json(text: &str) -> HarnessResult<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> HarnessResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            HarnessError::Config(m) => HarnessError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            steps: self.steps,
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> HarnessResult<()> {
        let fail = |m: String| Err(HarnessError::Config(format!("{}: {m}", self.experiment)));
        if self.seeds_per_target == 0 || self.targets_per_cell == 0 {
            return fail("seeds_per_target and targets_per_cell must be >= 1".into());
        }
        if !(self.learning_rate > 0.0) || self.steps == 0 {
            return fail("learning_rate must be > 0 and steps >= 1".into());
        }
        if self.n_train == 0 || self.n_test < 2 {
            return fail("n_train must be >= 1 and n_test >= 2".into());
        }
        if self.trajectory_points == 0 {
            return fail("trajectory_points must be >= 1".into());
        }
        if self.budgets.contains(&0) || self.qubit_counts.contains(&0) || self.target_degrees.contains(&0) {
            return fail("budgets, qubit_counts and target_degrees must be >= 1".into());
        }
        for a in &self.architectures {
            a.fm_layers.validate("fm_layers")?;
            a.tbl.validate("tbl")?;
            make_spec(a.n_qubits, 1, 1)?;
            if a.degree == Some(0) {
                return fail("architecture degree must be >= 1".into());
            }
        }
        if let Some(t) = &self.tbl {
            t.validate("tbl")?;
        }
        for &n in &self.qubit_counts {
            make_spec(n, 1, 1)?;
        }
        let need = |ok: bool, what: &str| if ok { Ok(()) } else { fail(format!("requires {what}")) };
        match self.experiment {
            ExperimentKind::FixedBudget => {
                need(!self.budgets.is_empty(), "budgets")?;
                need(!self.qubit_counts.is_empty(), "qubit_counts")?;
                need(self.tbl.is_some(), "tbl")?;
                for &e in &self.budgets {
                    for &n in &self.qubit_counts {
                        if e % n != 0 {
                            return fail(format!("N = {n} does not divide the encoding budget E = {e}"));
                        }
                    }
                }
            }
            ExperimentKind::RankCeiling => {
                need(!self.budgets.is_empty(), "budgets")?;
                need(!self.qubit_counts.is_empty(), "qubit_counts")?;
            }
            ExperimentKind::DegreeSweep => {
                need(!self.qubit_counts.is_empty(), "qubit_counts")?;
            }
            ExperimentKind::FmVsTbl | ExperimentKind::Realworld => {
                need(!self.architectures.is_empty(), "architectures")?;
                if self.architectures.iter().any(|a| a.degree.is_none()) {
                    return fail("every architecture needs a degree".into());
                }
                if self.experiment == ExperimentKind::Realworld {
                    need(self.data_path.is_some(), "data_path (or --data)")?;
                }
            }
            ExperimentKind::PhaseLock | ExperimentKind::GradVariance | ExperimentKind::Diagnose => {
                need(!self.architectures.is_empty(), "architectures")?;
            }
        }
        Ok(())
    }

    /// Small sweeps that finish in minutes on a laptop.
    pub fn desk(kind: ExperimentKind) -> Self {
        let mut c = Self::new(kind);
        match kind {
            ExperimentKind::FixedBudget => {
                c.budgets = vec![4];
                c.qubit_counts = vec![1, 2, 4];
                c.tbl = Some(IntRange::span(1, 3, 1));
                c.target_degrees = vec![4];
                c.seeds_per_target = 5;
                c.steps = 1500;
            }
            ExperimentKind::RankCeiling => {
                c.budgets = vec![2, 4, 6, 8];
                c.qubit_counts = vec![1, 2];
                c.seeds_per_target = 20;
            }
            ExperimentKind::PhaseLock => c.architectures = phase_lock_pair(),
            ExperimentKind::FmVsTbl => {
                c.architectures = vec![ArchitectureRange::new(
                    1,
                    IntRange::span(3, 6, 1),
                    IntRange::span(1, 4, 1),
                    Some(3),
                )];
                c.seeds_per_target = 3;
                c.steps = 1500;
            }
            ExperimentKind::DegreeSweep => {
                c.qubit_counts = vec![2];
                c.target_degrees = vec![2, 4, 6, 8];
                c.seeds_per_target = 3;
                c.steps = 1500;
            }
            ExperimentKind::GradVariance => {
                c.architectures = vec![ArchitectureRange::new(1, IntRange::Single(12), IntRange::span(1, 3, 1), None)];
                c.target_degrees = vec![12];
                c.seeds_per_target = 20;
            }
            ExperimentKind::Realworld => {
                c.architectures = realworld_routes(12, 2, 2);
                c.n_test = 40;
                c.seeds_per_target = 2;
                c.steps = 500;
            }
            ExperimentKind::Diagnose => {
                c.architectures = vec![ArchitectureRange::new(1, IntRange::Single(12), IntRange::Single(1), None)];
            }
        }
        c
    }

    /// The protocol sizes of the original study.
    pub fn full(kind: ExperimentKind) -> Self {
        let mut c = Self::new(kind);
        match kind {
            ExperimentKind::FixedBudget => {
                c.budgets = vec![12];
                c.qubit_counts = vec![1, 2, 3, 4, 6, 12];
                c.tbl = Some(IntRange::span(1, 6, 1));
                c.target_degrees = vec![12];
                c.targets_per_cell = 10;
            }
            ExperimentKind::RankCeiling => {
                c.budgets = vec![2, 4, 6, 8, 10, 12, 16];
                c.qubit_counts = vec![1, 2, 4];
                c.seeds_per_target = 100;
            }
            ExperimentKind::PhaseLock => c.architectures = phase_lock_pair(),
            ExperimentKind::FmVsTbl => {
                c.architectures = vec![
                    ArchitectureRange::new(1, IntRange::span(12, 89, 1), IntRange::span(1, 10, 1), Some(12)),
                    ArchitectureRange::new(2, IntRange::span(10, 40, 1), IntRange::span(1, 4, 1), Some(20)),
                    ArchitectureRange::new(4, IntRange::span(7, 32, 1), IntRange::span(1, 8, 1), Some(28)),
                    ArchitectureRange::new(6, IntRange::span(1, 21, 1), IntRange::span(1, 10, 1), Some(6)),
                ];
                c.targets_per_cell = 5;
                c.seeds_per_target = 10;
            }
            ExperimentKind::DegreeSweep => {
                c.qubit_counts = vec![1, 2, 4, 6];
                c.target_degrees = (2..=28).step_by(2).collect();
                c.targets_per_cell = 5;
                c.seeds_per_target = 10;
            }
            ExperimentKind::GradVariance => {
                c.architectures = vec![ArchitectureRange::new(1, IntRange::Single(12), IntRange::span(1, 3, 1), None)];
                c.target_degrees = vec![12];
                c.seeds_per_target = 100;
            }
            ExperimentKind::Realworld => {
                let mut routes = realworld_routes(12, 10, 20);
                routes.extend(realworld_routes(24, 10, 20));
                c.architectures = routes;
                c.n_test = 40;
                c.seeds_per_target = 10;
            }
            ExperimentKind::Diagnose => {
                c.architectures = vec![ArchitectureRange::new(1, IntRange::Single(12), IntRange::Single(1), None)];
                c.seeds_per_target = 100;
            }
        }
        c
    }
}

fn phase_lock_pair() -> Vec<ArchitectureRange> {
    vec![
        ArchitectureRange::new(1, IntRange::Single(4), IntRange::Single(1), None),
        ArchitectureRange::new(2, IntRange::Single(2), IntRange::Single(1), None),
    ]
}

/// FM and tbl routes for `N ∈ {1, 2, 4, 6}` at encoding budget `budget`,
/// with FM steps of 6, 3, 2, 1 layers.
fn realworld_routes(budget: usize, fm_points: usize, tbl_max: usize) -> Vec<ArchitectureRange> {
    [(1, 6), (2, 3), (4, 2), (6, 1)]
        .into_iter()
        .map(|(n, step)| {
            let l_min = budget.div_ceil(n);
            ArchitectureRange::new(
                n,
                IntRange::span(l_min, l_min + step * (fm_points - 1), step),
                IntRange::span(1, tbl_max, 1),
                Some(budget),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for kind in ExperimentKind::ALL {
            for mut c in [ExperimentConfig::desk(kind), ExperimentConfig::full(kind)] {
                if kind == ExperimentKind::Realworld {
                    assert!(c.validate().is_err());
                    c.data_path = Some("temps.csv".into());
                }
                c.validate().unwrap();
            }
        }
    }

    #[test]
    fn ranges_expand() {
        assert_eq!(IntRange::span(2, 8, 3).values(), vec![2, 5, 8]);
        assert_eq!(IntRange::Single(4).values(), vec![4]);
        assert!(IntRange::List(vec![]).values().is_empty());
        assert!(IntRange::span(3, 2, 1).validate("x").is_err());
        assert!(IntRange::List(vec![0]).validate("x").is_err());
    }

    #[test]
    fn json_round_trip_and_unknown_keys() {
        let c = ExperimentConfig::desk(ExperimentKind::FmVsTbl);
        assert_eq!(ExperimentConfig::from_json(&c.to_json()).unwrap(), c);
        let err = ExperimentConfig::from_json(r#"{"experiment": "rank-ceiling", "budgets": [2], "qubit_counts": [1], "bogus": 1}"#);
        assert!(matches!(err, Err(HarnessError::Config(_))));
    }

    #[test]
    fn range_forms_parse() {
        let c = ExperimentConfig::from_json(
            r#"{"experiment": "diagnose", "architectures": [
                {"n_qubits": 2, "fm_layers": {"from": 1, "to": 5, "step": 2}, "tbl": [1, 3]}]}"#,
        )
        .unwrap();
        let specs = c.architectures[0].specs().unwrap();
        assert_eq!(specs.len(), 6);
        assert_eq!((specs[5].fm_layers(), specs[5].tbl()), (5, 3));
    }

    #[test]
    fn fixed_budget_rejects_non_divisors() {
        let mut c = ExperimentConfig::desk(ExperimentKind::FixedBudget);
        c.qubit_counts = vec![3];
        assert!(matches!(c.validate(), Err(HarnessError::Config(_))));
    }

    #[test]
    fn zero_seeds_rejected() {
        let mut c = ExperimentConfig::desk(ExperimentKind::RankCeiling);
        c.seeds_per_target = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn realworld_routes_follow_step_table() {
        let r = realworld_routes(12, 3, 20);
        assert_eq!(r[0].fm_layers.values(), vec![12, 18, 24]);
        assert_eq!(r[3].fm_layers.values(), vec![2, 3, 4]);
        assert_eq!(r[2].tbl.values().len(), 20);
    }
}
