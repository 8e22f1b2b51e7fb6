//! Acceptance suite. Each test prints one `criterion N ... PASS|FAIL` line.
//! Tests hold a shared lock so wall-clock limits are measured without
//! contention from the rest of the suite.

use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::{Duration, Instant};

use rsvd_lab::adaptive::{AdaptiveConfig, AdaptiveStatus};
use rsvd_lab::bounds::{eta_constant, optimal_ell};
use rsvd_lab::densela::{exact_svd, gaussian_matrix, Matrix, RngSeed};
use rsvd_lab::experiments::{
    adaptive_run, deterministic_audit, deviation_mc, hager_adversarial, matvec_table, power_compare,
    rank_reveal_mc, tail_mc, AdaptiveRun, DeterministicAudit, DeviationMc, HagerAdversarial,
    MatvecTable, PowerCompare, RankRevealMc,
};
use rsvd_lab::testmat::{decay_matrix, DecaySpec};
use serde::Serialize;

static LOCK: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(id: u32, name: &str, pass: bool, detail: &str) {
    println!(
        "criterion {id:>2} {name:<32} {} {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

const TOLS: [f64; 3] = [1e-6, 1e-8, 1e-10];
const QS: [usize; 3] = [0, 2, 4];

fn run_c2() -> DeterministicAudit {
    deterministic_audit(64, 4, 12, &[0, 1, 3], &[0, 1, 2, 4], 100, RngSeed(2)).unwrap()
}

fn run_c3() -> DeviationMc {
    deviation_mc(64, 0.7, 4, 12, 4, 1, 0.1, 500, RngSeed(3)).unwrap()
}

fn run_c4() -> RankRevealMc {
    rank_reveal_mc(64, 5, 10, 0, 0.05, 200, RngSeed(4)).unwrap()
}

fn run_c7() -> HagerAdversarial {
    hager_adversarial(100, 1e10, 5, 20, RngSeed(7)).unwrap()
}

fn run_c8() -> PowerCompare {
    power_compare(500, 1.0, 20, RngSeed(8), 1e-8, 5, 400).unwrap()
}

fn run_c9() -> MatvecTable {
    matvec_table(500, 50, &TOLS, &QS, RngSeed(9)).unwrap()
}

fn run_c10() -> (AdaptiveRun, AdaptiveRun) {
    let d = decay_matrix(&DecaySpec::power_law(400, 2.0), RngSeed(10)).unwrap();
    let cfg = AdaptiveConfig::new(10, 1, 1e-6, 200, 10);
    let decay = adaptive_run("power_law", &d.matrix, &d.true_sigma, &cfg).unwrap();
    let eye = Matrix::identity(100);
    let cfg = AdaptiveConfig::new(10, 1, 1e-6, 60, 11);
    let flat = adaptive_run("identity", &eye, &[1.0; 100], &cfg).unwrap();
    (decay, flat)
}

macro_rules! cached {
    ($name:ident, $ty:ty, $run:expr) => {
        fn $name() -> &'static ($ty, Duration) {
            static CELL: OnceLock<($ty, Duration)> = OnceLock::new();
            CELL.get_or_init(|| timed($run))
        }
    };
}

cached!(c2, DeterministicAudit, run_c2);
cached!(c3, DeviationMc, run_c3);
cached!(c4, RankRevealMc, run_c4);
cached!(c7, HagerAdversarial, run_c7);
cached!(c8, PowerCompare, run_c8);
cached!(c9, MatvecTable, run_c9);
cached!(c10, (AdaptiveRun, AdaptiveRun), run_c10);

#[test]
fn criterion_01_oracle_fidelity() {
    let _g = serial();
    let mut worst_rec = 0.0f64;
    let mut worst_eig = 0.0f64;
    let ((), dt) = timed(|| {
        for i in 0..200u64 {
            let m = 1 + (i as usize * 7) % 64;
            let n = 1 + (i as usize * 13 + 5) % 64;
            let a = gaussian_matrix(m, n, RngSeed(1000 + i));
            let f = exact_svd(&a).unwrap();
            let recon = f.u.scale_columns(&f.sigma).matmul(&f.v.transpose()).unwrap();
            let fro = a.fro_norm();
            worst_rec = worst_rec.max(recon.max_abs_diff(&a).max(0.0) / fro);
            let rec_fro = recon.sub(&a).unwrap().fro_norm() / fro;
            worst_rec = worst_rec.max(rec_fro);
            let ata = a.t_matmul(&a).unwrap();
            let s1 = f.sigma[0];
            for (j, s) in f.sigma.iter().enumerate() {
                let v = f.v.column(j);
                let r: Vec<f64> = ata
                    .matvec(&v)
                    .unwrap()
                    .iter()
                    .zip(&v)
                    .map(|(x, y)| x - s * s * y)
                    .collect();
                worst_eig = worst_eig.max(r.iter().map(|x| x * x).sum::<f64>().sqrt() / (s1 * s1));
            }
        }
    });
    let pass = worst_rec <= 1e-10 && worst_eig <= 1e-10 && dt < Duration::from_secs(10);
    report(
        1,
        "oracle fidelity",
        pass,
        &format!("recon={worst_rec:.2e} eig={worst_eig:.2e} time={dt:.2?}"),
    );
    assert!(pass);
}

#[test]
fn criterion_02_deterministic_audit() {
    let _g = serial();
    let (r, dt) = c2();
    let pass = r.failures.is_empty() && r.skipped == 0 && *dt < Duration::from_secs(60);
    report(
        2,
        "deterministic bound audit",
        pass,
        &format!("runs={} failures={} skipped={} time={dt:.2?}", r.runs, r.failures.len(), r.skipped),
    );
    assert!(pass, "{:?}", r.failures);
}

#[test]
fn criterion_03_large_deviation() {
    let _g = serial();
    let (r, dt) = c3();
    let pass = r.ok && *dt < Duration::from_secs(120);
    report(
        3,
        "large-deviation violation rate",
        pass,
        &format!("rate={:.4} threshold={:.4} time={dt:.2?}", r.rate, r.threshold),
    );
    assert!(pass);
}

#[test]
fn criterion_04_rank_revealing() {
    let _g = serial();
    let (r, _) = c4();
    report(
        4,
        "rank-revealing pass rate",
        r.ok,
        &format!("rate={:.3} threshold={:.4} c_delta={:.2}", r.rate, r.threshold, r.c_delta),
    );
    assert!(r.ok);
}

#[test]
fn criterion_05_reverse_eckart_young() {
    let _g = serial();
    let names = ["reverse_ey_two", "reverse_ey_sv", "hoffman_wielandt"];
    let c2_bad = c2().0.failures.iter().filter(|f| names.contains(&f.claim.as_str())).count();
    let c3_bad = c3().0.deterministic_failures;
    let c4_bad = c4().0.deterministic_failures;
    let pass = c2_bad + c3_bad + c4_bad == 0;
    report(
        5,
        "reverse Eckart-Young + HW",
        pass,
        &format!("violations c2={c2_bad} c3={c3_bad} c4={c4_bad}"),
    );
    assert!(pass);
}

#[test]
fn criterion_06_tail_estimates() {
    let _g = serial();
    let (r, dt) = timed(|| {
        tail_mc(20, &[0, 1, 4], &[1.5, 2.0, 4.0], (60, 40), &[1.0, 2.0, 3.0], 10_000, RngSeed(6)).unwrap()
    });
    let worst = r
        .tails
        .iter()
        .flat_map(|t| &t.rows)
        .map(|row| row.rate - row.threshold)
        .fold(f64::NEG_INFINITY, f64::max);
    let pass = r.all_ok() && dt < Duration::from_secs(120);
    report(
        6,
        "tail and concentration MC",
        pass,
        &format!("worst tail excess={worst:.4} time={dt:.2?}"),
    );
    assert!(pass);
}

#[test]
fn criterion_07_hager_adversarial() {
    let _g = serial();
    let (r, dt) = c7();
    let pass = r.max_plain_ratio <= 1e-6 && r.min_randomized_ratio >= 0.1 && *dt < Duration::from_secs(5);
    report(
        7,
        "adversarial one-norm estimate",
        pass,
        &format!(
            "max plain/true={:.2e} min randomized/true={:.3} time={dt:.2?}",
            r.max_plain_ratio, r.min_randomized_ratio
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_08_power_compare() {
    let _g = serial();
    let (r, _) = c8();
    let pass = r.median_small_k <= r.median_power;
    report(
        8,
        "two-stage vs power method",
        pass,
        &format!(
            "median matvecs {} vs {} (steps {} vs {})",
            r.median_small_k, r.median_power, r.median_small_k_steps, r.median_power_steps
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_09_matvec_table() {
    let _g = serial();
    let (t, _) = c9();
    let mut pass = true;
    let mut row = Vec::new();
    for tol in TOLS {
        let mv: Vec<Option<usize>> = QS.iter().map(|&q| t.cell(q, tol).and_then(|c| c.matvecs)).collect();
        let q0 = mv[0];
        pass &= q0.is_some() && mv[1..].iter().all(|m| m.is_none_or(|m| q0.unwrap() < m));
        row.push(format!("{tol:.0e}:{mv:?}"));
    }
    report(9, "q = 0 cheapest per tolerance", pass, &row.join(" "));
    assert!(pass);
}

#[test]
fn criterion_10_adaptive() {
    let _g = serial();
    let ((decay, flat), _) = c10();
    let tau: f64 = 1e-6;
    let pass = decay.trace.status == AdaptiveStatus::Converged
        && decay.oracle_ratio <= tau.sqrt()
        && flat.trace.status == AdaptiveStatus::CeilingHit;
    report(
        10,
        "adaptive sampling",
        pass,
        &format!(
            "power-law ell={} oracle ratio={:.2e}; identity {:?}",
            decay.trace.final_ell(),
            decay.oracle_ratio,
            flat.trace.status
        ),
    );
    assert!(pass);
}

/// Largest root in `s = ℓ−p+1 ≥ 1` of `(s+p−1)/s + log(k/s)`, by plain
/// bisection on `[1, 64k]` (the function is positive at 1 for k ≥ 1 and
/// decreasing beyond it).
fn reference_root(k: usize, p: usize) -> f64 {
    let (kf, pf) = (k as f64, p as f64);
    let h = |s: f64| (s + pf - 1.0) / s + (kf / s).ln();
    let (mut lo, mut hi) = (1.0, 64.0 * kf + 64.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn criterion_11_optimal_ell() {
    let _g = serial();
    let e = std::f64::consts::E;
    let eta = eta_constant();
    let base = optimal_ell(1, 1, 1.0).map(|r| r.ell_opt);
    let mut pass = base.as_ref().is_ok_and(|v| (v - e).abs() <= 1e-8);
    let mut bad = Vec::new();
    for k in 1..=20usize {
        for p in 0..=4usize {
            let (kf, pf) = (k as f64, p as f64);
            let ok = match optimal_ell(k, p, 1.0) {
                Ok(r) => {
                    let s = r.ell_opt - pf + 1.0;
                    e * kf <= s + 1e-9 && s <= eta * (pf - 1.0 + kf) + 1e-9
                }
                Err(_) => false,
            };
            if !ok {
                bad.push(format!("(k={k},p={p},s*={:.3},ek={:.3})", reference_root(k, p), e * kf));
            }
        }
    }
    pass &= bad.is_empty();
    report(
        11,
        "optimal sample count bracket",
        pass,
        &format!(
            "k=1,p=1 -> {base:?}; {} of 100 (k,p) outside bracket {}",
            bad.len(),
            bad.iter().take(3).cloned().collect::<Vec<_>>().join(" ")
        ),
    );
    assert!(pass);
}

fn bytes<T: Serialize>(v: &T) -> Vec<u8> {
    serde_json::to_vec(v).unwrap()
}

#[test]
fn criterion_12_determinism() {
    let _g = serial();
    let mut diff = Vec::new();
    let mut check = |id: u32, a: Vec<u8>, b: Vec<u8>| {
        if a != b {
            diff.push(id);
        }
    };
    check(2, bytes(&c2().0), bytes(&run_c2()));
    check(3, bytes(&c3().0), bytes(&run_c3()));
    check(4, bytes(&c4().0), bytes(&run_c4()));
    check(7, bytes(&c7().0), bytes(&run_c7()));
    check(8, bytes(&c8().0), bytes(&run_c8()));
    check(9, bytes(&c9().0), bytes(&run_c9()));
    check(10, bytes(&c10().0), bytes(&run_c10()));
    let pass = diff.is_empty();
    report(12, "byte-identical reruns", pass, &format!("differing: {diff:?}"));
    assert!(pass);
}

#[test]
fn reference_root_matches_analytic_case() {
    assert!((reference_root(1, 1) - std::f64::consts::E).abs() < 1e-12);
    for (k, p) in [(3, 2), (10, 1), (5, 4)] {
        let r = optimal_ell(k, p, 1.0).unwrap();
        assert!((r.ell_opt - p as f64 + 1.0 - reference_root(k, p)).abs() < 1e-8);
    }
}
