//! Randomized batteries for the operator identities, run by `proshrink check`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::boxset::{BoxSet, Interval};
use crate::dual::Problem;
use crate::experiments::{trial_seed, Execution};
use crate::linalg::{dist2, dot, norm2, DenseMatrix};
use crate::operators::{projected_shrink, prox_oracle_1d, shifted_projection, shrink, ProxSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct BatteryReport {
    pub name: &'static str,
    pub cases: usize,
    pub failures: usize,
    /// Replayable description of the first failing case.
    pub counterexample: Option<String>,
}

impl BatteryReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }

    fn from_results(name: &'static str, results: Vec<Option<String>>) -> Self {
        let cases = results.len();
        let failures = results.iter().filter(|r| r.is_some()).count();
        let counterexample = results.into_iter().flatten().next();
        Self {
            name,
            cases,
            failures,
            counterexample,
        }
    }
}

fn run_cases<F>(cases: usize, exec: Execution, case: F) -> Vec<Option<String>>
where
    F: Fn(usize) -> Option<String> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec == Execution::Parallel {
        use rayon::prelude::*;
        return (0..cases).into_par_iter().map(case).collect();
    }
    let _ = exec;
    (0..cases).map(case).collect()
}

fn case_rng(seed: u64, battery: usize, idx: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(trial_seed(seed, battery, idx))
}

fn log_uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

/// Which of the three interval classes to draw from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassPick {
    SignDefinite,
    Straddling,
    Boundary,
}

/// Draws a random interval of the requested class with endpoint magnitudes
/// spread over `1e-3..1e3`.
pub fn random_interval(rng: &mut impl Rng, class: ClassPick) -> Interval {
    random_interval_in(rng, class, 1e-3, 1e3)
}

/// As [`random_interval`] with endpoint magnitudes log-uniform in `lo..hi`.
pub fn random_interval_in(rng: &mut impl Rng, class: ClassPick, lo: f64, hi: f64) -> Interval {
    let mag = |rng: &mut _| log_uniform(rng, lo, hi);
    let neg = rng.random_bool(0.5);
    let (lo, hi) = match class {
        ClassPick::SignDefinite => {
            let c = mag(rng);
            let (lo, hi) = match rng.random_range(0..3) {
                0 => (c, f64::INFINITY),
                1 => (c, c + mag(rng)),
                _ => (c, c),
            };
            if neg {
                (-hi, -lo)
            } else {
                (lo, hi)
            }
        }
        ClassPick::Straddling => (-mag(rng), mag(rng)),
        ClassPick::Boundary => match rng.random_range(0..6) {
            0 => (0.0, mag(rng)),
            1 => (-mag(rng), 0.0),
            2 => (f64::NEG_INFINITY, f64::INFINITY),
            3 => (-mag(rng), f64::INFINITY),
            4 => (f64::NEG_INFINITY, mag(rng)),
            _ => {
                if neg {
                    (f64::NEG_INFINITY, 0.0)
                } else {
                    (0.0, f64::INFINITY)
                }
            }
        },
    };
    Interval::new(lo, hi).expect("generated interval is valid")
}

/// The library's projected shrinkage on a single coordinate.
pub fn projected_shrink_1d(interval: &Interval, tau: f64, q: f64) -> f64 {
    let set = BoxSet::new(vec![*interval]).expect("one coordinate");
    let spec = ProxSpec::new(tau, &set).expect("positive tau");
    projected_shrink(&[q], &spec).expect("length one")[0]
}

/// Projected shrinkage against the exact candidate-set prox oracle.
pub fn key_identity_battery<F>(cases: usize, seed: u64, exec: Execution, op: F) -> BatteryReport
where
    F: Fn(&Interval, f64, f64) -> f64 + Sync + Send,
{
    let classes = [
        ClassPick::SignDefinite,
        ClassPick::Straddling,
        ClassPick::Boundary,
    ];
    let results = run_cases(cases, exec, |idx| {
        let mut rng = case_rng(seed, 1, idx);
        let iv = random_interval(&mut rng, classes[idx % 3]);
        let tau = log_uniform(&mut rng, 1e-3, 1e3);
        let q = if rng.random_bool(0.5) {
            rng.random_range(-10.0 * tau..10.0 * tau)
        } else {
            rng.random_range(-1e4..1e4)
        };
        let lhs = op(&iv, tau, q);
        let rhs = prox_oracle_1d(&iv, tau, q).expect("valid oracle input");
        ((lhs - rhs).abs() > 1e-12 * q.abs().max(1.0)).then(|| {
            format!("interval {iv}, tau {tau:?}, q {q:?}: projected shrink {lhs:?}, oracle {rhs:?}")
        })
    });
    BatteryReport::from_results("key identity (projected shrink = prox)", results)
}

/// `[shrink(q)]_I = [q - sign(c)]_I` on sign-definite intervals.
pub fn shifted_projection_battery(cases: usize, seed: u64, exec: Execution) -> BatteryReport {
    let results = run_cases(cases, exec, |idx| {
        let mut rng = case_rng(seed, 2, idx);
        let iv = random_interval(&mut rng, ClassPick::SignDefinite);
        let q = if rng.random_bool(0.5) {
            rng.random_range(-3.0..3.0)
        } else {
            rng.random_range(-2e3..2e3)
        };
        let lhs = iv.project(shrink(q));
        let rhs = shifted_projection(&iv, q).expect("sign-definite");
        ((lhs - rhs).abs() > 1e-15 * lhs.abs().max(1.0))
            .then(|| format!("interval {iv}, q {q:?}: [shrink(q)] {lhs:?}, [q - sign(c)] {rhs:?}"))
    });
    BatteryReport::from_results("sign-definite shrink shift", results)
}

fn random_box(rng: &mut impl Rng, n: usize) -> BoxSet {
    let classes = [
        ClassPick::SignDefinite,
        ClassPick::Straddling,
        ClassPick::Boundary,
    ];
    let intervals = (0..n)
        .map(|_| {
            let class = classes[rng.random_range(0..3)];
            random_interval_in(rng, class, 0.05, 5.0)
        })
        .collect();
    BoxSet::new(intervals).expect("non-empty")
}

/// Firm nonexpansiveness and the Lipschitz bound of the projected shrinkage.
pub fn firm_nonexpansive_battery(cases: usize, seed: u64, exec: Execution) -> BatteryReport {
    let results = run_cases(cases, exec, |idx| {
        let mut rng = case_rng(seed, 3, idx);
        let n = rng.random_range(1..=8);
        let set = random_box(&mut rng, n);
        let tau = log_uniform(&mut rng, 1e-1, 1e1);
        let spec = ProxSpec::new(tau, &set).expect("positive tau");
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let pv = projected_shrink(&v, &spec).expect("dims");
        let pw = projected_shrink(&w, &spec).expect("dims");
        let dp: Vec<f64> = pv.iter().zip(&pw).map(|(a, b)| a - b).collect();
        let dv: Vec<f64> = v.iter().zip(&w).map(|(a, b)| a - b).collect();
        let lhs = dot(&dp, &dp);
        let inner = dot(&dv, &dp);
        let slack = 1e-12 * dot(&dv, &dv).max(1.0);
        let firm = lhs <= inner + slack;
        let lip = norm2(&dp) <= norm2(&dv) * (1.0 + 1e-12);
        (!(firm && lip)).then(|| {
            format!(
                "tau {tau:?}, box {:?}, v {v:?}, w {w:?}: |dp|^2 {lhs:?}, <dv,dp> {inner:?}",
                set.to_text()
            )
        })
    });
    BatteryReport::from_results("firm nonexpansiveness", results)
}

/// A random `m x n` problem with a mixed box, random anchor and `tau`.
pub fn random_problem(rng: &mut impl Rng, m: usize, n: usize) -> Problem {
    let data: Vec<f64> = (0..m * n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let a = DenseMatrix::new(m, n, data).expect("finite");
    let b: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
    let set = random_box(rng, n);
    let tau = log_uniform(rng, 0.5, 5.0);
    let u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    Problem::new(a, b, set, tau, u).expect("consistent")
}

/// Whether every coordinate of the primal map is at least `margin` away from
/// a shrink kink or a box endpoint at `y`.
pub fn away_from_kinks(p: &Problem, y: &[f64], margin: f64) -> bool {
    let aty = p.a().rmatvec(y).expect("dims");
    let tau = p.tau();
    p.set()
        .intervals()
        .iter()
        .zip(&aty)
        .zip(p.u())
        .all(|((iv, &g), &u)| {
            let w = u / tau + g;
            let t = tau * shrink(w);
            (w.abs() - 1.0).abs() > margin
                && (t - iv.lower()).abs() > margin * tau
                && (t - iv.upper()).abs() > margin * tau
        })
}

/// Central differences of the dual value against the analytic gradient.
pub fn dual_gradient_battery(cases: usize, seed: u64, exec: Execution) -> BatteryReport {
    let results = run_cases(cases, exec, |idx| {
        let mut rng = case_rng(seed, 4, idx);
        let p = random_problem(&mut rng, 10, 20);
        let y = (0..1000).find_map(|_| {
            let y: Vec<f64> = (0..10).map(|_| rng.random_range(-2.0..2.0)).collect();
            away_from_kinks(&p, &y, 1e-4).then_some(y)
        })?;
        let g = p.dual_gradient(&y).expect("dims");
        let step = 1e-6;
        let fd: Vec<f64> = (0..y.len())
            .map(|i| {
                let mut yp = y.clone();
                let mut ym = y.clone();
                yp[i] += step;
                ym[i] -= step;
                (p.dual_value(&yp).unwrap() - p.dual_value(&ym).unwrap()) / (2.0 * step)
            })
            .collect();
        let rel = dist2(&fd, &g) / norm2(&g).max(1e-12);
        (rel > 1e-5).then(|| format!("case {idx} (seed {seed}): y {y:?}, relative error {rel:e}"))
    });
    BatteryReport::from_results("dual gradient finite differences", results)
}

/// The full battery at the default sizes.
pub fn run_all(seed: u64, exec: Execution) -> Vec<BatteryReport> {
    run_all_with(seed, exec, projected_shrink_1d)
}

/// [`run_all`] with a substitute projected-shrink operator, used to confirm
/// the harness catches a broken implementation.
pub fn run_all_with<F>(seed: u64, exec: Execution, op: F) -> Vec<BatteryReport>
where
    F: Fn(&Interval, f64, f64) -> f64 + Sync + Send,
{
    vec![
        key_identity_battery(100_000, seed, exec, op),
        shifted_projection_battery(10_000, seed, exec),
        firm_nonexpansive_battery(10_000, seed, exec),
        dual_gradient_battery(100, seed, exec),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boxset::IntervalClass;

    fn class_of(pick: ClassPick) -> fn(IntervalClass) -> bool {
        match pick {
            ClassPick::SignDefinite => |c| matches!(c, IntervalClass::SignDefinite { .. }),
            ClassPick::Straddling => |c| c == IntervalClass::Straddling,
            ClassPick::Boundary => |c| c == IntervalClass::Boundary,
        }
    }

    #[test]
    fn generated_intervals_have_requested_class() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for pick in [
            ClassPick::SignDefinite,
            ClassPick::Straddling,
            ClassPick::Boundary,
        ] {
            for _ in 0..500 {
                let iv = random_interval(&mut rng, pick);
                assert!(class_of(pick)(iv.classify()), "{iv} not {pick:?}");
            }
        }
    }

    #[test]
    fn small_batteries_pass() {
        let exec = Execution::Sequential;
        assert!(key_identity_battery(3000, 5, exec, projected_shrink_1d).passed());
        assert!(shifted_projection_battery(3000, 5, exec).passed());
        assert!(firm_nonexpansive_battery(1000, 5, exec).passed());
        assert!(dual_gradient_battery(10, 5, exec).passed());
    }

    #[test]
    fn broken_operator_is_caught() {
        let broken = |iv: &Interval, tau: f64, q: f64| projected_shrink_1d(iv, 0.9 * tau, q);
        let r = key_identity_battery(3000, 5, Execution::Sequential, broken);
        assert!(!r.passed());
        let ce = r.counterexample.unwrap();
        assert!(ce.contains("tau") && ce.contains("oracle"), "{ce}");
    }
}
