//! Executes planned jobs and collects their reports.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use qtoroidal::distr::{
    partial_fraction_check, two_pole_series, verify_commutator, verify_contraction, verify_exchange, verify_limit,
    WindowSpec,
};
use qtoroidal::fock::{enumerate_basis, verify_heisenberg};
use qtoroidal::polyid::{quartic_bracket_identity, serre_polynomial_check};
use qtoroidal::qscalar::quantum_integer;
use qtoroidal::report::Report;
use qtoroidal::toroidal::{
    convention_sweep, h_bracket_value, verify_phi_x_factor, verify_phi_x_inverted, verify_relation,
};
use qtoroidal::vertexop::LimitKind;
use qtoroidal::{BasisState, Monomial, QScalar, Weight};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::plan::{Job, RelationMode, States};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub jobs: usize,
    pub seed: u64,
    /// Record wall-clock time per check; off by default so output is byte-stable.
    pub timing: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            jobs: 1,
            seed: 0,
            timing: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunReport {
    pub version: String,
    pub checks: Vec<Report>,
    pub pass: bool,
}

impl RunReport {
    pub fn mismatch_total(&self) -> u64 {
        self.checks.iter().map(|c| c.mismatch_total).sum()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            out.push_str(&c.to_string());
        }
        let failed = self.checks.iter().filter(|c| !c.pass).count();
        out.push_str(&format!(
            "{}: {} checks, {} failed, {} mismatches\n",
            if self.pass { "PASS" } else { "FAIL" },
            self.checks.len(),
            failed,
            self.mismatch_total()
        ));
        out
    }
}

const UNITS: [Monomial; 2] = [Monomial::ONE, Monomial::MINUS_ONE];
const PAIRS: [(i64, i64); 2] = [(0, 1), (1, 0)];

fn states(s: &States, rng: &mut ChaCha8Rng) -> Vec<BasisState> {
    let all = enumerate_basis(s.max_degree, s.lattice);
    match s.sample {
        Some(n) if n < all.len() => {
            let mut picks = rand::seq::index::sample(rng, all.len(), n).into_vec();
            picks.sort_unstable();
            picks.into_iter().map(|k| all[k].clone()).collect()
        }
        _ => all,
    }
}

fn states_param(report: &mut Report, s: &States, count: usize) {
    report.set_param("max_degree", s.max_degree);
    if s.lattice != 0 {
        report.set_param("lattice_range", s.lattice);
    }
    if let Some(n) = s.sample {
        report.set_param("sample", n);
    }
    report.set_param("states", count);
}

/// Folds `sub` into `into`, prefixing its mismatch locations with `label`.
fn absorb_labeled(into: &mut Report, label: &str, mut sub: Report) {
    for m in &mut sub.mismatches {
        m.location = format!("{label}: {}", m.location);
    }
    into.absorb(sub);
}

fn failed(id: &str, err: impl std::fmt::Display) -> Report {
    let mut r = Report::new(id);
    r.record_mismatch("evaluation".into(), format!("error: {err}"), "a completed check".into());
    r
}

fn random_monomial(rng: &mut ChaCha8Rng) -> Monomial {
    Monomial::new(rng.gen_bool(0.5), rng.gen_range(-8..=8))
}

fn partial_fractions(order: usize, pairs: &[(QScalar, QScalar)], random: usize, rng: &mut ChaCha8Rng) -> Report {
    let mut report = Report::new("partial_fractions")
        .param("order", order)
        .param("pairs", pairs.len())
        .param("random", random);
    let mut all = pairs.to_vec();
    while all.len() < pairs.len() + random {
        let (a, b) = (random_monomial(rng), random_monomial(rng));
        if a != b {
            all.push((a.to_scalar(), b.to_scalar()));
        }
    }
    if random > 0 {
        let drawn: Vec<String> = all[pairs.len()..].iter().map(|(a, b)| format!("[{a}, {b}]")).collect();
        report.note(format!("random pairs {}", drawn.join(" ")));
    }
    let (q, qinv) = (QScalar::q_pow(1), QScalar::q_pow(-1));
    for (a, b) in &all {
        match partial_fraction_check(a, b, order) {
            Ok(r) => absorb_labeled(&mut report, &format!("a={a} b={b}"), r),
            Err(e) => return failed("partial_fractions", e),
        }
        if (a, b) == (&q, &qinv) {
            report.note("(q, q^-1) coefficients checked against [n+1]");
            let series = two_pole_series(a, b, order);
            for (n, c) in series.iter().enumerate() {
                report.check(
                    || format!("a=q b=q^-1: z^{n} against [{}]", n + 1),
                    c,
                    &quantum_integer(n as i64 + 1),
                );
            }
        }
    }
    report
}

fn run_job(job: &Job, rng: &mut ChaCha8Rng) -> Report {
    let name = job.name();
    match job {
        Job::Heisenberg { modes, states: s } => {
            let st = states(s, rng);
            let mut r = verify_heisenberg(*modes, &st);
            states_param(&mut r, s, st.len());
            r
        }
        Job::Exchange { k, states: s } => {
            let st = states(s, rng);
            let mut report = Report::new(name.clone()).param("k", k);
            states_param(&mut report, s, st.len());
            let units = [
                Weight::new(1, 0),
                Weight::new(0, 1),
                Weight::new(-1, 0),
                Weight::new(0, -1),
            ];
            for alpha in units {
                for beta in units {
                    absorb_labeled(
                        &mut report,
                        &format!("alpha={alpha} beta={beta}"),
                        verify_exchange(alpha, beta, *k, &st),
                    );
                }
            }
            report
        }
        Job::Contraction { window, states: s } => {
            let st = states(s, rng);
            let mut report = Report::new(name.clone()).param("window", window);
            states_param(&mut report, s, st.len());
            let spec = WindowSpec::square(*window);
            for (i, j) in PAIRS {
                for (k, l) in PAIRS {
                    for a1 in UNITS {
                        for a2 in UNITS {
                            match verify_contraction((i, j, a1), (k, l, a2), &st, spec) {
                                Ok(r) => absorb_labeled(&mut report, &format!("X{i}{j}({a1}) X{k}{l}({a2})"), r),
                                Err(e) => return failed(&name, e),
                            }
                        }
                    }
                }
            }
            report
        }
        Job::Limits { window, states: s } => {
            let st = states(s, rng);
            let mut report = Report::new(name.clone()).param("window", window);
            states_param(&mut report, s, st.len());
            for kind in [LimitKind::U, LimitKind::V] {
                for (i, j) in PAIRS {
                    for a1 in UNITS {
                        match verify_limit(kind, i, j, a1, &st, *window) {
                            Ok(r) => absorb_labeled(&mut report, &format!("{kind:?} X{i}{j}({a1})"), r),
                            Err(e) => return failed(&name, e),
                        }
                    }
                }
            }
            report
        }
        Job::PartialFractions { order, pairs, random } => partial_fractions(*order, pairs, *random, rng),
        Job::Commutator { window, states: s } => {
            let st = states(s, rng);
            let mut report = Report::new(name.clone()).param("window", window);
            states_param(&mut report, s, st.len());
            let spec = WindowSpec::square(*window);
            for (i, j) in PAIRS {
                for a in UNITS {
                    match verify_commutator(i, j, a, a, &st, spec) {
                        Ok(r) => absorb_labeled(&mut report, &format!("X{i}{j}({a}) X{j}{i}({a})"), r),
                        Err(e) => return failed(&name, e),
                    }
                }
            }
            report
        }
        Job::HBracket { i, j, m, scale } => h_bracket_value(*i, *j, *m, scale).unwrap_or_else(|e| failed(&name, e)),
        Job::Relation { id, params, mode } => {
            let r = match mode {
                RelationMode::Single => verify_relation(*id, params),
                RelationMode::Sweep => convention_sweep(*id, params),
                RelationMode::Inverted => verify_phi_x_inverted(*id, params).map(|r| r.param("exponent", "inverted")),
            };
            r.unwrap_or_else(|e| failed(&name, e))
        }
        Job::PhiXFactor { params } => verify_phi_x_factor(params).unwrap_or_else(|e| failed(&name, e)),
        Job::SerrePolynomial => serre_polynomial_check(),
        Job::QuarticBracket => quartic_bracket_identity(),
    }
}

fn timed(job: &Job, index: usize, opts: &RunOptions) -> Report {
    // Each job gets its own stream so results do not depend on scheduling.
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(index as u64);
    let start = Instant::now();
    let mut r = run_job(job, &mut rng);
    r.millis = if opts.timing {
        start.elapsed().as_millis() as u64
    } else {
        0
    };
    r
}

pub fn run(jobs: &[Job], opts: &RunOptions) -> RunReport {
    let workers = opts.jobs.max(1).min(jobs.len().max(1));
    let checks: Vec<Report> = if workers == 1 {
        jobs.iter().enumerate().map(|(k, j)| timed(j, k, opts)).collect()
    } else {
        let next = AtomicUsize::new(0);
        let slots: Mutex<Vec<Option<Report>>> = Mutex::new(vec![None; jobs.len()]);
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let k = next.fetch_add(1, Ordering::Relaxed);
                    let Some(job) = jobs.get(k) else { break };
                    let r = timed(job, k, opts);
                    slots.lock().expect("no worker panicked")[k] = Some(r);
                });
            }
        });
        slots
            .into_inner()
            .expect("no worker panicked")
            .into_iter()
            .map(|r| r.expect("every job ran"))
            .collect()
    };
    RunReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        pass: checks.iter().all(|c| c.pass),
        checks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse;
    use crate::plan::{plan, Defaults};

    fn run_src(src: &str, opts: &RunOptions) -> RunReport {
        run(&plan(&parse(src).unwrap(), &Defaults::default()).unwrap(), opts)
    }

    #[test]
    fn empty_script_passes_with_no_checks() {
        let r = run_src("", &RunOptions::default());
        assert!(r.pass);
        assert!(r.checks.is_empty());
    }

    #[test]
    fn perturbed_constant_fails_with_both_sides() {
        let r = run_src("check h_bracket { i=1 j=1 m=1 scale=2 }", &RunOptions::default());
        assert!(!r.pass);
        assert_eq!(r.mismatch_total(), 1);
        let m = &r.checks[0].mismatches[0];
        assert!(!m.lhs.is_empty() && !m.rhs.is_empty() && m.lhs != m.rhs);
        assert!(r.to_text().contains("lhs = "));
    }

    #[test]
    fn parallel_output_matches_serial() {
        let src = "check partial_fractions { order=6 random=3 }\ncheck h_bracket { i=1 j=0 m=3 }\ncheck heisenberg { modes=3 states=basis(deg<=3) sample=4 }\ncheck R5 { modes=3 states=basis(deg<=2) }\n";
        let serial = run_src(
            src,
            &RunOptions {
                seed: 7,
                ..RunOptions::default()
            },
        );
        let parallel = run_src(
            src,
            &RunOptions {
                seed: 7,
                jobs: 3,
                ..RunOptions::default()
            },
        );
        assert!(serial.pass, "{}", serial.to_text());
        assert_eq!(
            serde_json::to_string(&serial).unwrap(),
            serde_json::to_string(&parallel).unwrap()
        );
        let names: Vec<&str> = serial.checks.iter().map(|c| c.id.as_str()).collect();
        assert_eq!(names, ["partial_fractions", "h_bracket", "heisenberg", "R5"]);
    }

    #[test]
    fn same_seed_reproduces_samples() {
        let src = "check heisenberg { modes=1 states=basis(deg<=4) sample=3 }";
        let a = run_src(
            src,
            &RunOptions {
                seed: 1,
                ..RunOptions::default()
            },
        );
        let b = run_src(
            src,
            &RunOptions {
                seed: 1,
                ..RunOptions::default()
            },
        );
        assert_eq!(a, b);
        assert_eq!(a.checks[0].params["states"], "3");
    }

    #[test]
    fn q_pair_reproduces_quantum_integers() {
        let r = run_src(
            "check partial_fractions { order=12 pairs=[[q, q^-1]] }",
            &RunOptions::default(),
        );
        assert!(r.pass, "{}", r.to_text());
        assert_eq!(r.checks[0].notes.len(), 1);
    }
}
