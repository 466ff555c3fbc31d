//! Acceptance criteria 1-9. Prints one PASS/FAIL line per criterion.
//!
//! Criterion 8 cannot be met as stated: the transverse auxiliary exchange
//! operator does not commute with S², so its ground state has no definite
//! total spin. It is reported as FAIL and listed in `KNOWN_UNATTAINABLE`;
//! the process exits nonzero only for unexpected failures.

use klm::fock::{enumerate_basis, BosonParams, BosonSpace, ElectronBasis, Projection, Sector, Spin};
use klm::hamiltonians::build_hamiltonian;
use klm::linalg::{CsrMatrix, LinearOperator, ONE};
use klm::model::{example_model, validate, ExampleKind, ExampleParams, ValidatedModel};
use klm::spectra::{lowest_eigenpairs_with, Method};
use klm::transforms::verify_corollary_3_7;
use klm::verify::{
    check_cone_suite, check_correlation_signs, check_overlap_method, check_semigroup_domination, check_total_spin,
    check_uniqueness_at, CheckRecord, Status, VerifyConfig,
};
use std::time::{Duration, Instant};

const KNOWN_UNATTAINABLE: &[usize] = &[8];
const SEED: u64 = 20_240_601;

fn ex1(j: f64, u: f64, g: f64) -> ValidatedModel {
    let p = ExampleParams {
        t: 1.0,
        j,
        u,
        g,
        omega0: 1.0,
    };
    validate(&example_model(ExampleKind::Example1, 2, p).unwrap()).unwrap()
}

fn star() -> ValidatedModel {
    let p = ExampleParams {
        g: 0.5,
        ..Default::default()
    };
    validate(&example_model(ExampleKind::Star, 4, p).unwrap()).unwrap()
}

/// Star truncation: four phonon modes, so keep n_max small.
const STAR_BOSONS: BosonParams = BosonParams::Number { n_max: 2 };

/// J = ±1, U = 1, g ∈ {0, 0.5, 1}.
fn criterion1_models() -> Vec<(String, ValidatedModel)> {
    let mut out = Vec::new();
    for j in [1.0, -1.0] {
        for g in [0.0, 0.5, 1.0] {
            out.push((format!("J={j} g={g}"), ex1(j, 1.0, g)));
        }
    }
    out
}

fn cfg() -> VerifyConfig {
    VerifyConfig {
        bosons: BosonParams::Number { n_max: 6 },
        seed: SEED,
        ..Default::default()
    }
}

fn stat(r: &CheckRecord, k: &str) -> f64 {
    r.statistics.get(k).copied().unwrap_or(f64::NAN)
}

type Outcome = (bool, String);

fn criterion1() -> Outcome {
    let t = Instant::now();
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for (name, m) in criterion1_models() {
        let r = check_total_spin(&m, BosonParams::Number { n_max: 6 }, &cfg()).unwrap();
        worst = worst.max(stat(&r, "s2_error"));
        if r.status != Status::Pass {
            ok = false;
            println!("    {name}: {:?}", r.statistics);
        }
    }
    let el = t.elapsed();
    (ok && el < Duration::from_secs(30), format!("max |<S2> - S(S+1)| = {worst:.2e} over 6 models, {:.1}s", el.as_secs_f64()))
}

fn criterion2() -> Outcome {
    let t = Instant::now();
    let r = check_total_spin(&star(), STAR_BOSONS, &cfg()).unwrap();
    let el = t.elapsed();
    (
        r.status == Status::Pass && stat(&r, "s_predicted") == 1.0 && el < Duration::from_secs(120),
        format!(
            "star S measured {:.9} predicted {}, S2 error {:.2e}, {:.1}s",
            stat(&r, "s_measured"),
            stat(&r, "s_predicted"),
            stat(&r, "s2_error"),
            el.as_secs_f64()
        ),
    )
}

fn criterion3() -> Outcome {
    let trunc: Vec<BosonParams> = [4, 6, 8].iter().map(|&n| BosonParams::Number { n_max: n }).collect();
    let r = check_uniqueness_at(&ex1(1.0, 1.0, 1.0), &trunc, 1e-10);
    let gaps: Vec<f64> = (0..3).map(|i| stat(&r, &format!("gap[{i}]"))).collect();
    let e0s: Vec<f64> = (0..3).map(|i| stat(&r, &format!("e0[{i}]"))).collect();
    let above = gaps.iter().zip(&e0s).all(|(g, e)| *g > 1e-7 * (1.0 + e.abs()));
    let spread = stat(&r, "gap_relative_spread");
    (
        r.status == Status::Pass && above && spread < 0.1,
        format!("gaps {gaps:?} at n_max 4,6,8, relative spread {:.3}", spread),
    )
}

fn criterion4() -> Outcome {
    let mut ok = true;
    let mut min: f64 = f64::INFINITY;
    for (name, m) in criterion1_models() {
        let r = check_correlation_signs(&m, BosonParams::Number { n_max: 6 }, &cfg()).unwrap();
        let v = stat(&r, "min_lambda_pair").min(stat(&r, "min_omega_pair"));
        min = min.min(v);
        if !(v > 1e-10) {
            ok = false;
            println!("    {name}: {:?}", r.statistics);
        }
    }
    (ok, format!("smallest signed correlator {min:.4e}"))
}

/// Monotone decrease is required for g ∈ {0, 0.3, 0.5}. At g = 1 the
/// displacement reaches the truncation edge, so residuals are still
/// pre-asymptotic over n_max 4..8; they are printed but not gated.
fn criterion5() -> Outcome {
    let fmt = |res: &[f64]| res.iter().map(|r| format!("{r:.2e}")).collect::<Vec<_>>().join(" ");
    let mut ok = true;
    let mut lines = Vec::new();
    for g in [0.0, 0.3, 0.5, 1.0] {
        let table = verify_corollary_3_7(&ex1(1.0, 1.0, g), &[4, 6, 8]).unwrap();
        let res: Vec<f64> = table.rows.iter().map(|r| r.residual).collect();
        if g == 0.0 {
            ok &= res.iter().all(|&r| r < 1e-10);
        } else if g < 1.0 {
            ok &= res.windows(2).all(|w| w[1] < w[0]);
        }
        let tag = if g == 1.0 { " (not gated)" } else { "" };
        lines.push(format!("g={g}: [{}]{tag}", fmt(&res)));
    }
    (ok, lines.join("; "))
}

fn criterion6() -> Outcome {
    let t = Instant::now();
    let c = VerifyConfig {
        grid_points: 32,
        grid_extent: 7.0,
        n_samples: 1000,
        ..cfg()
    };
    let recs = check_cone_suite(&ex1(1.0, 1.0, 1.0), &c);
    let find = |name: &str| recs.iter().find(|r| r.name == name).cloned();
    let mut ok = true;
    let mut parts = Vec::new();
    for name in ["semigroup_pp[beta=0.5]", "semigroup_pp[beta=1]", "charge_bound"] {
        match find(name) {
            Some(r) => {
                let m = stat(&r, "min_statistic");
                ok &= m >= -1e-10 && r.status == Status::Pass;
                parts.push(format!("{name} min {m:.3e}"));
            }
            None => ok = false,
        }
    }
    match find("ergodicity") {
        Some(r) => {
            let m = stat(&r, "min_statistic");
            ok &= m > 1e-12 && r.status == Status::Pass;
            parts.push(format!("ergodicity min {m:.3e} (ground-state pairing {:.3e})", stat(&r, "min_ground_state_pairing")));
        }
        None => ok = false,
    }
    for r in &recs {
        if r.status != Status::Pass {
            println!("    {}: {:?} {:?}", r.name, r.status, r.note);
        }
    }
    let el = t.elapsed();
    ok &= el < Duration::from_secs(300);
    parts.push(format!("{:.1}s", el.as_secs_f64()));
    (ok, parts.join(", "))
}

fn criterion7() -> Outcome {
    let c = VerifyConfig {
        n_samples: 1000,
        ..cfg()
    };
    let a = check_semigroup_domination(&ex1(1.0, 1.0, 0.0), &c).unwrap();
    let b = check_semigroup_domination(&ex1(-1.0, 1.0, 0.0), &c).unwrap();
    (
        a.status == Status::Pass && b.status == Status::Pass,
        format!(
            "unprimed min {:.3e} (tol {:.1e}), primed min {:.3e} (tol {:.1e})",
            stat(&a, "min_statistic"),
            a.tolerances["tol"],
            stat(&b, "min_statistic"),
            b.tolerances["tol"]
        ),
    )
}

fn criterion8() -> Outcome {
    let mut ok = true;
    let mut min_overlap: f64 = f64::INFINITY;
    let mut worst_spin: f64 = 0.0;
    let mut completed_ok = true;
    let mut cases = criterion1_models()
        .into_iter()
        .map(|(n, m)| (n, m, BosonParams::Number { n_max: 6 }))
        .collect::<Vec<_>>();
    cases.push(("star".into(), star(), STAR_BOSONS));
    for (name, m, b) in cases {
        let r = check_overlap_method(&m, b, &cfg()).unwrap();
        let (o, sh, sa) = (stat(&r, "overlap_re"), stat(&r, "s_h"), stat(&r, "s_aux"));
        min_overlap = min_overlap.min(o);
        worst_spin = worst_spin.max((sh - sa).abs());
        completed_ok &= stat(&r, "completed_overlap_re") > 1e-8 && (stat(&r, "completed_s_aux") - sh).abs() < 1e-6;
        if r.status != Status::Pass {
            ok = false;
            println!(
                "    {name}: overlap {o:.4} S(H) {sh:.6} S(aux) {sa:.6}; isotropic completion: overlap {:.4} S {:.6}",
                stat(&r, "completed_overlap_re"),
                stat(&r, "completed_s_aux")
            );
        }
    }
    (
        ok,
        format!(
            "min overlap {min_overlap:.4e}, max |S(H) - S(aux)| {worst_spin:.4}; isotropic completion consistent: {completed_ok}"
        ),
    )
}

fn anticommutators_exact() -> (bool, usize) {
    let mut systems = 0;
    for (nl, no) in [(1, 0), (0, 1), (2, 0), (1, 1), (0, 2)] {
        let b = ElectronBasis::new(nl, no, Sector::Full, Projection::None).unwrap();
        let n = nl + no;
        let ladder = |dag: bool, site: usize, spin: Spin| -> CsrMatrix {
            let op = if dag { klm::fock::cdag(site, spin) } else { klm::fock::c(site, spin) };
            b.operator(&[(ONE, vec![op])])
        };
        let modes: Vec<(usize, Spin)> = (0..n).flat_map(|s| [(s, Spin::Up), (s, Spin::Down)]).collect();
        let id = CsrMatrix::identity(b.dim());
        for (i, &(si, pi)) in modes.iter().enumerate() {
            for (j, &(sj, pj)) in modes.iter().enumerate() {
                let ci = ladder(false, si, pi);
                let cj = ladder(false, sj, pj);
                let cdj = ladder(true, sj, pj);
                let expect = if i == j { id.clone() } else { CsrMatrix::zeros(b.dim(), b.dim()) };
                if ci.anticommutator(&cdj).add_scaled(-ONE, &expect).max_abs() != 0.0 {
                    return (false, systems);
                }
                if ci.anticommutator(&cj).max_abs() != 0.0 {
                    return (false, systems);
                }
            }
        }
        systems += 1;
    }
    (true, systems)
}

fn criterion9() -> Outcome {
    let mut ok = true;
    let mut worst: f64 = 0.0;
    let mut count = 0;
    let mut cases: Vec<(ValidatedModel, usize)> = Vec::new();
    for (_, m) in criterion1_models() {
        for n in [2, 4, 6] {
            cases.push((m.clone(), n));
        }
    }
    cases.push((star(), 1));
    for (m, n_max) in cases {
        let basis = enumerate_basis(&m, Projection::P0).unwrap();
        let bosons = BosonSpace::from_model(&m, BosonParams::Number { n_max }).unwrap();
        let h = build_hamiltonian(&m, &basis, &bosons).unwrap();
        if h.dim() > 2000 {
            continue;
        }
        let d = lowest_eigenpairs_with(&h, 2, 1e-10, Method::Dense, SEED).unwrap().ground_energy();
        let i = lowest_eigenpairs_with(&h, 2, 1e-10, Method::Iterative, SEED).unwrap().ground_energy();
        let rel = (d - i).abs() / d.abs().max(1e-300);
        worst = worst.max(rel);
        ok &= rel < 1e-9;
        count += 1;
    }
    let (anti, systems) = anticommutators_exact();
    (
        ok && anti,
        format!("{count} models, max relative E0 difference {worst:.2e}; anticommutators exact on {systems} systems: {anti}"),
    )
}

fn main() {
    let criteria: [(usize, &str, fn() -> Outcome); 9] = [
        (1, "total spin formula, chain", criterion1),
        (2, "total spin formula, star", criterion2),
        (3, "uniqueness at the critical line", criterion3),
        (4, "correlation signs", criterion4),
        (5, "conjugation identity", criterion5),
        (6, "cone suite", criterion6),
        (7, "semigroup domination", criterion7),
        (8, "overlap method", criterion8),
        (9, "oracle equivalence", criterion9),
    ];
    let filter: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut unexpected = Vec::new();
    for (n, title, f) in criteria {
        if filter.is_some_and(|k| k != n) {
            continue;
        }
        let t = Instant::now();
        let (pass, detail) = f();
        let tag = if pass { "PASS" } else { "FAIL" };
        let known = !pass && KNOWN_UNATTAINABLE.contains(&n);
        println!(
            "criterion {n}: {tag} [{title}] {detail} ({:.1}s){}",
            t.elapsed().as_secs_f64(),
            if known { " (known unattainable, see README)" } else { "" }
        );
        if !pass && !known {
            unexpected.push(n);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
