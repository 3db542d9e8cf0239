//! Sparse-recovery sweeps comparing the boxed augmented model against the
//! unconstrained one (linearized Bregman).
//!
//! Instances are drawn from a ChaCha8 stream: the matrix row-major from the
//! ziggurat standard normal sampler, then the support by
//! `rand::seq::index::sample`, then one fair coin per nonzero for its sign.
//! Each trial's seed is derived from `(base_seed, s, trial)` alone, so the
//! report does not depend on execution order or thread count.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::boxset::BoxSet;
use crate::dual::Problem;
use crate::error::{check_len, Error, Result};
use crate::linalg::{dist2, norm2, spectral_norm, DenseMatrix};
use crate::solvers::{auto_step, proshrink, SolverConfig, StepSize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InstanceSpec {
    pub m: usize,
    pub n: usize,
    pub sparsity: usize,
    pub amplitude: f64,
    pub seed: u64,
}

impl InstanceSpec {
    pub fn new(m: usize, n: usize, sparsity: usize, seed: u64) -> Self {
        Self {
            m,
            n,
            sparsity,
            amplitude: 1.0,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub a: DenseMatrix,
    pub x0: Vec<f64>,
    pub b: Vec<f64>,
}

pub fn generate_instance(spec: &InstanceSpec) -> Result<Instance> {
    if spec.m == 0 || spec.n == 0 {
        return Err(Error::InvalidMatrix(format!("shape {}x{}", spec.m, spec.n)));
    }
    if spec.sparsity == 0 || spec.sparsity > spec.n {
        return Err(Error::InvalidParameter {
            name: "sparsity",
            value: spec.sparsity as f64,
            reason: "must lie in 1..=n",
        });
    }
    if !(spec.amplitude > 0.0 && spec.amplitude.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "amplitude",
            value: spec.amplitude,
            reason: "must be positive and finite",
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let data: Vec<f64> = (0..spec.m * spec.n)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let a = DenseMatrix::new(spec.m, spec.n, data)?;
    let mut x0 = vec![0.0; spec.n];
    for pos in index::sample(&mut rng, spec.n, spec.sparsity) {
        x0[pos] = if rng.random_bool(0.5) {
            spec.amplitude
        } else {
            -spec.amplitude
        };
    }
    let b = a.matvec(&x0)?;
    Ok(Instance { a, x0, b })
}

/// Exact-recovery test `||x - x0|| / ||x0|| <= threshold`.
pub fn recovered(x: &[f64], x0: &[f64], threshold: f64) -> Result<bool> {
    check_len("recovered signal", x0.len(), x.len())?;
    let scale = norm2(x0);
    if scale == 0.0 {
        return Err(Error::Other("reference signal is zero".into()));
    }
    Ok(dist2(x, x0) / scale <= threshold)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of trial `trial` at sparsity `s`.
pub fn trial_seed(base_seed: u64, s: usize, trial: usize) -> u64 {
    let h = splitmix64(base_seed);
    let h = splitmix64(h ^ s as u64);
    splitmix64(h ^ (trial as u64).rotate_left(32))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum Execution {
    /// Trials fan out over the rayon pool when the `parallel` feature is on.
    #[default]
    Parallel,
    Sequential,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepConfig {
    pub m: usize,
    pub n: usize,
    pub sparsities: Vec<usize>,
    pub trials: usize,
    pub tau: f64,
    /// Box for the constrained arm; the baseline arm always uses `R^n`.
    pub set: BoxSet,
    pub solver: SolverConfig,
    pub base_seed: u64,
    pub threshold: f64,
    pub execution: Execution,
}

impl SweepConfig {
    /// `m x n` Gaussian sensing, box `[-1, 1]^n`, `tau = 10`.
    pub fn new(m: usize, n: usize, sparsities: Vec<usize>, trials: usize) -> Result<Self> {
        Ok(Self {
            m,
            n,
            sparsities,
            trials,
            tau: 10.0,
            set: BoxSet::symmetric(1.0, n)?,
            solver: SolverConfig {
                tol_feas: 1e-14,
                max_iter: 50_000,
                ..SolverConfig::default()
            },
            base_seed: 0,
            threshold: 1e-12,
            execution: Execution::Parallel,
        })
    }

    /// 200 x 400, s = 1..=80, 100 trials.
    pub fn paper_scale() -> Result<Self> {
        Self::new(200, 400, (1..=80).collect(), 100)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ArmOutcome {
    Recovered,
    Failed,
    Diverged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TrialOutcome {
    pub s: usize,
    pub trial: usize,
    pub proshrink: ArmOutcome,
    pub lbreg: ArmOutcome,
    pub proshrink_iterations: usize,
    pub lbreg_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub s: usize,
    pub trials: usize,
    pub recovered_proshrink: usize,
    pub recovered_lbreg: usize,
    pub diverged_proshrink: usize,
    pub diverged_lbreg: usize,
    pub rate_proshrink: f64,
    pub rate_lbreg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn row(&self, s: usize) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.s == s)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "s,trials,recovered_proshrink,recovered_lbreg,rate_proshrink,rate_lbreg\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{:?},{:?}\n",
                r.s,
                r.trials,
                r.recovered_proshrink,
                r.recovered_lbreg,
                r.rate_proshrink,
                r.rate_lbreg
            ));
        }
        out
    }
}

fn run_arm(
    problem: &Problem,
    cfg: &SolverConfig,
    x0: &[f64],
    threshold: f64,
    label: &str,
    seed: u64,
) -> (ArmOutcome, usize) {
    match proshrink(problem, cfg) {
        Ok(res) => {
            let ok = recovered(&res.x, x0, threshold).unwrap_or(false);
            (
                if ok {
                    ArmOutcome::Recovered
                } else {
                    ArmOutcome::Failed
                },
                res.iterations,
            )
        }
        Err(e) => {
            log::warn!("{label} arm failed on trial seed {seed:#x}: {e}");
            (ArmOutcome::Diverged, 0)
        }
    }
}

/// Generates and solves one trial on both arms.
pub fn run_trial(cfg: &SweepConfig, s: usize, trial: usize) -> Result<TrialOutcome> {
    let seed = trial_seed(cfg.base_seed, s, trial);
    let inst = generate_instance(&InstanceSpec::new(cfg.m, cfg.n, s, seed))?;
    let mut solver = cfg.solver.clone();
    if solver.step == StepSize::Auto {
        let est = spectral_norm(&inst.a, &solver.spectral)?;
        solver.step = StepSize::Fixed(auto_step(est.inflated(), cfg.tau, solver.step_safety));
    }
    let boxed = Problem::augmented(inst.a, inst.b, cfg.set.clone(), cfg.tau)?;
    let (proshrink_outcome, pi) = run_arm(&boxed, &solver, &inst.x0, cfg.threshold, "boxed", seed);
    let free = Problem::augmented(
        boxed.a().clone(),
        boxed.b().to_vec(),
        BoxSet::whole_space(cfg.n)?,
        cfg.tau,
    )?;
    let (lbreg_outcome, li) = run_arm(
        &free,
        &solver,
        &inst.x0,
        cfg.threshold,
        "unconstrained",
        seed,
    );
    Ok(TrialOutcome {
        s,
        trial,
        proshrink: proshrink_outcome,
        lbreg: lbreg_outcome,
        proshrink_iterations: pi,
        lbreg_iterations: li,
    })
}

pub fn sweep(cfg: &SweepConfig) -> Result<SweepReport> {
    check_len("box", cfg.n, cfg.set.len())?;
    if cfg.trials == 0 {
        return Err(Error::Other("trials must be at least 1".into()));
    }
    if let Some(&s) = cfg.sparsities.iter().find(|&&s| s == 0 || s > cfg.n) {
        return Err(Error::InvalidParameter {
            name: "sparsity",
            value: s as f64,
            reason: "must lie in 1..=n",
        });
    }
    let jobs: Vec<(usize, usize)> = cfg
        .sparsities
        .iter()
        .flat_map(|&s| (0..cfg.trials).map(move |t| (s, t)))
        .collect();
    let outcomes = run_jobs(cfg, &jobs)?;
    Ok(aggregate(cfg, &outcomes))
}

fn run_jobs(cfg: &SweepConfig, jobs: &[(usize, usize)]) -> Result<Vec<TrialOutcome>> {
    #[cfg(feature = "parallel")]
    if cfg.execution == Execution::Parallel {
        use rayon::prelude::*;
        return jobs
            .par_iter()
            .map(|&(s, t)| run_trial(cfg, s, t))
            .collect();
    }
    jobs.iter().map(|&(s, t)| run_trial(cfg, s, t)).collect()
}

fn aggregate(cfg: &SweepConfig, outcomes: &[TrialOutcome]) -> SweepReport {
    let rows = cfg
        .sparsities
        .iter()
        .map(|&s| {
            let at_s = outcomes.iter().filter(|o| o.s == s);
            let count = |f: &dyn Fn(&TrialOutcome) -> bool| at_s.clone().filter(|o| f(o)).count();
            let recovered_proshrink = count(&|o| o.proshrink == ArmOutcome::Recovered);
            let recovered_lbreg = count(&|o| o.lbreg == ArmOutcome::Recovered);
            SweepRow {
                s,
                trials: cfg.trials,
                recovered_proshrink,
                recovered_lbreg,
                diverged_proshrink: count(&|o| o.proshrink == ArmOutcome::Diverged),
                diverged_lbreg: count(&|o| o.lbreg == ArmOutcome::Diverged),
                rate_proshrink: recovered_proshrink as f64 / cfg.trials as f64,
                rate_lbreg: recovered_lbreg as f64 / cfg.trials as f64,
            }
        })
        .collect();
    SweepReport { rows }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instance_shape_and_cardinality() {
        let inst = generate_instance(&InstanceSpec::new(2, 4, 1, 7)).unwrap();
        assert_eq!(inst.x0.iter().filter(|v| **v != 0.0).count(), 1);
        assert_eq!(inst.x0.iter().map(|v| v.abs()).sum::<f64>(), 1.0);
        assert_eq!(inst.a.matvec(&inst.x0).unwrap(), inst.b);
        assert!(generate_instance(&InstanceSpec::new(2, 4, 0, 7)).is_err());
        assert!(generate_instance(&InstanceSpec::new(2, 4, 5, 7)).is_err());
    }

    #[test]
    fn instances_are_reproducible() {
        let spec = InstanceSpec::new(5, 9, 3, 42);
        assert_eq!(
            generate_instance(&spec).unwrap(),
            generate_instance(&spec).unwrap()
        );
        let other = InstanceSpec { seed: 43, ..spec };
        assert_ne!(
            generate_instance(&spec).unwrap().a,
            generate_instance(&other).unwrap().a
        );
    }

    #[test]
    fn gaussian_column_statistics() {
        let inst = generate_instance(&InstanceSpec::new(200, 400, 10, 1)).unwrap();
        let data = inst.a.data();
        let count = data.len() as f64;
        let mean = data.iter().sum::<f64>() / count;
        let var = data.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (count - 1.0);
        // standard errors: 1/sqrt(N) for the mean, sqrt(2/N) for the variance
        assert!(mean.abs() < 5.0 / count.sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() < 5.0 * (2.0 / count).sqrt(), "var {var}");
        for j in [0, 199, 399] {
            let col_mean = (0..200).map(|i| inst.a.get(i, j)).sum::<f64>() / 200.0;
            assert!(col_mean.abs() < 5.0 / 200f64.sqrt());
        }
    }

    #[test]
    fn recovery_threshold() {
        let x0 = vec![1.0, 0.0, -1.0];
        assert!(recovered(&x0, &x0, 1e-12).unwrap());
        let scaled: Vec<f64> = x0.iter().map(|v| v * (1.0 + 1e-10)).collect();
        assert!(!recovered(&scaled, &x0, 1e-12).unwrap());
        assert!(!recovered(&[0.0; 3], &x0, 1e-12).unwrap());
        assert!(recovered(&x0, &[0.0; 3], 1e-12).is_err());
        assert!(recovered(&x0[..2], &x0, 1e-12).is_err());
    }

    #[test]
    fn trial_seeds_are_distinct() {
        let mut seeds: Vec<u64> = (1..=20)
            .flat_map(|s| (0..50).map(move |t| trial_seed(9, s, t)))
            .collect();
        seeds.sort_unstable();
        seeds.dedup();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(trial_seed(9, 1, 2), trial_seed(9, 2, 1));
    }

    #[test]
    fn tiny_sweep_is_deterministic() {
        let mut cfg = SweepConfig::new(12, 24, vec![1, 2], 2).unwrap();
        cfg.base_seed = 3;
        let a = sweep(&cfg).unwrap();
        cfg.execution = Execution::Sequential;
        let b = sweep(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows.len(), 2);
        for r in &a.rows {
            assert!(r.recovered_proshrink <= r.trials && r.recovered_lbreg <= r.trials);
        }
        assert!(a.to_csv().starts_with(
            "s,trials,recovered_proshrink,recovered_lbreg,rate_proshrink,rate_lbreg\n1,2,"
        ));
    }

    #[test]
    fn sweep_rejects_bad_parameters() {
        let mut cfg = SweepConfig::new(4, 8, vec![9], 1).unwrap();
        assert!(sweep(&cfg).is_err());
        cfg.sparsities = vec![1];
        cfg.trials = 0;
        assert!(sweep(&cfg).is_err());
    }
}
