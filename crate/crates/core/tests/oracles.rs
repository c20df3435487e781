//! Monte Carlo paths checked against independent closed forms and against
//! themselves under reseeding, splitting, and parallel execution.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use erasim::analysis::{conditional_purity, ks_two_sample};
use erasim::dynamics::{master_rates_solve, Occupancy};
use erasim::engine::{
    parse_script, run_trials, run_trials_from, run_trials_serial, write_csv, write_jsonl, TrialRecord,
};
use erasim::rng::derive_seed;
use erasim::state::survival_probability;
use erasim::{PhysicsParams, StateBin};

const PREP: &str = "load 10 0.6 init=detect\nimage nondestructive\npump 20ms\nmicrowave 0.99 DPRIME M_MINUS\nimage error\nmeasure M_MINUS";

fn histogram(records: &[TrialRecord]) -> [f64; 14] {
    let mut h = [0.0; 14];
    for r in records {
        h[r.final_bin.index()] += 1.0;
    }
    h.map(|c| c / records.len() as f64)
}

#[test]
fn sampled_holds_match_master_equation() {
    let params = PhysicsParams::default();
    for (i, t) in [0.1, 1.0, 5.0].into_iter().enumerate() {
        let schedule = parse_script(&format!("load 10 1 init=Q_DOWN\nhold {t}s\nmeasure Q_DOWN")).unwrap();
        let records = run_trials(&schedule, 10_000, 40 + i as u64, &params).unwrap();
        let n = records.len() as f64;
        let oracle = master_rates_solve(&params, &Occupancy::pure(StateBin::QDown), t).unwrap();
        let observed = histogram(&records);
        for bin in StateBin::ALL {
            let p = oracle.get(bin);
            let sigma = (p * (1.0 - p) / n).sqrt().max(1.0 / n);
            let got = observed[bin.index()];
            assert!((got - p).abs() <= 3.0 * sigma, "t = {t}, {bin}: sampled {got}, oracle {p}");
        }
    }
}

#[test]
fn vacuum_loss_alone_gives_one_over_e_at_its_lifetime() {
    let mut params = PhysicsParams::default();
    params.blackbody.gamma_01 = 0.0;
    params.blackbody.gamma_01_detect = 0.0;
    params.blackbody.gamma_10 = 0.0;
    let lifetime = 1.0 / params.vacuum.gamma_vac;
    let schedule = parse_script(&format!("load 10 1 init=Q_DOWN\nhold {lifetime}s\nmeasure Q_DOWN")).unwrap();
    let records = run_trials(&schedule, 10_000, 3, &params).unwrap();
    let survival = survival_probability(&records).unwrap();
    let expect = (-1.0f64).exp();
    let sigma = (expect * (1.0 - expect) / records.len() as f64).sqrt();
    assert!((survival - expect).abs() < 3.0 * sigma, "{survival}");
}

fn bytes(records: &[TrialRecord]) -> (Vec<u8>, Vec<u8>) {
    let (mut csv, mut jsonl) = (Vec::new(), Vec::new());
    write_csv(records, &mut csv).unwrap();
    write_jsonl(records, &mut jsonl).unwrap();
    (csv, jsonl)
}

#[test]
fn same_seed_gives_identical_bytes_on_every_path() {
    let params = PhysicsParams::default();
    let schedule = parse_script(PREP).unwrap();
    let a = run_trials(&schedule, 2000, 7, &params).unwrap();
    let b = run_trials(&schedule, 2000, 7, &params).unwrap();
    let c = run_trials_serial(&schedule, 2000, 7, &params).unwrap();
    assert_eq!(bytes(&a), bytes(&b));
    assert_eq!(bytes(&a), bytes(&c));
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let d = pool.install(|| run_trials(&schedule, 2000, 7, &params).unwrap());
    assert_eq!(bytes(&a), bytes(&d));
    // Running the second half on its own reproduces the tail of the full run.
    let tail = run_trials_from(&schedule, 1000, 1000, 7, &params).unwrap();
    assert_eq!(bytes(&a[a.len() / 2..]), bytes(&tail));
    let other = run_trials(&schedule, 2000, 8, &params).unwrap();
    assert_ne!(bytes(&a), bytes(&other));
}

fn per_trial_flags(records: &[TrialRecord]) -> Vec<f64> {
    records.chunks(10).map(|trial| trial.iter().filter(|r| r.any_flag()).count() as f64).collect()
}

#[test]
fn split_runs_are_statistically_indistinguishable() {
    let params = PhysicsParams::default();
    let schedule = parse_script(PREP).unwrap();
    let whole = run_trials(&schedule, 4000, 11, &params).unwrap();
    let mut split = run_trials(&schedule, 2000, derive_seed(11, 0), &params).unwrap();
    split.extend(run_trials(&schedule, 2000, derive_seed(11, 1), &params).unwrap());
    let (_, p) = ks_two_sample(&per_trial_flags(&whole), &per_trial_flags(&split));
    assert!(p > 0.01, "KS p = {p}");
}

#[test]
fn conditional_purity_matches_sampled_frequency() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 100_000;
    for _ in 0..20 {
        let s: f64 = rng.random_range(0.05..1.0);
        let e01: f64 = rng.random_range(0.0..0.3);
        let e10: f64 = rng.random_range(0.0..0.3);
        let (mut kept, mut good) = (0u64, 0u64);
        for _ in 0..n {
            let correct = rng.random::<f64>() < s;
            let flagged = if correct { rng.random::<f64>() < e01 } else { rng.random::<f64>() >= e10 };
            if !flagged {
                kept += 1;
                good += correct as u64;
            }
        }
        let p = conditional_purity(s, e01, e10).unwrap();
        let sigma = (p * (1.0 - p) / kept as f64).sqrt().max(1.0 / kept as f64);
        let freq = good as f64 / kept as f64;
        assert!((freq - p).abs() <= 3.0 * sigma, "s={s} e01={e01} e10={e10}: {freq} vs {p}");
    }
}
