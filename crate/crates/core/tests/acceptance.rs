//! Acceptance criteria 1-10. Runs as a plain binary so every criterion prints
//! one PASS/FAIL line; exits non-zero if any criterion fails.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cmf_active::baselines::SelectorKind;
use cmf_active::fisher::{
    fisher_info, fisher_info_at, hessian_term, incremental_inverse_update, select_approx, select_fisher,
    trace_criterion, trace_objective, ApproxVariant,
};
use cmf_active::harness::{
    run_bounds, run_experiment, ExperimentConfig, ExperimentData, ExperimentOutput, Protocol, RelationMode,
};
use cmf_active::model::{grad_entity, grad_user, nll, refit_user_from, sigmoid, softplus, LatentMatrix};
use cmf_active::store::{generate_synthetic, EntityId, EntityKind, SyntheticConfig, SyntheticDataset};

const DATA_SEED: u64 = 2017;
const BASELINES: [SelectorKind; 4] = [
    SelectorKind::Uncertainty,
    SelectorKind::MaxModelChange,
    SelectorKind::MinModelChange,
    SelectorKind::Random,
];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn random_vec(rng: &mut ChaCha8Rng, k: usize, scale: f64) -> Vec<f64> {
    (0..k).map(|_| rng.random_range(-scale..scale)).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn random_phi(rng: &mut ChaCha8Rng, k: usize, n: usize) -> LatentMatrix {
    let mut phi = LatentMatrix::zeros(k, n);
    for i in 0..n {
        phi.set_vector(EntityId(i as u32), &random_vec(rng, k, 1.0)).unwrap();
    }
    phi
}

fn pool(n: u32) -> Vec<EntityId> {
    (1..=n).map(EntityId).collect()
}

fn c1_gradients() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let e = random_vec(&mut rng, 5, 1.5);
        let u = random_vec(&mut rng, 5, 1.5);
        let y = if rng.random_bool(0.5) { 1 } else { -1 };
        let mut fd_u = vec![0.0; 5];
        let mut fd_e = vec![0.0; 5];
        for j in 0..5 {
            let (mut up, mut dn) = (u.clone(), u.clone());
            up[j] += h;
            dn[j] -= h;
            fd_u[j] = (nll(y, &e, &up) - nll(y, &e, &dn)) / (2.0 * h);
            let (mut ep, mut em) = (e.clone(), e.clone());
            ep[j] += h;
            em[j] -= h;
            fd_e[j] = (nll(y, &ep, &u) - nll(y, &em, &u)) / (2.0 * h);
        }
        for (g, fd) in [(grad_user(y, &e, &u), fd_u), (grad_entity(y, &e, &u), fd_e)] {
            let diff: Vec<f64> = g.iter().zip(&fd).map(|(a, b)| a - b).collect();
            worst = worst.max(norm(&diff) / norm(&fd).max(1e-8));
        }
    }
    outcome(worst <= 1e-5, format!("max relative error {worst:.2e} (limit 1e-5)"))
}

fn c2_label_free_hessian() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst_gap, mut worst_eig) = (0.0f64, f64::INFINITY);
    for _ in 0..100 {
        let k = rng.random_range(2..8);
        let e = random_vec(&mut rng, k, 2.0);
        let u = random_vec(&mut rng, k, 2.0);
        let s: f64 = e.iter().zip(&u).map(|(a, b)| a * b).sum();
        let v = DVector::from_vec(e.clone());
        // d^2/du^2 of log(1 + exp(-y s)) = y^2 sigmoid(y s) sigmoid(-y s) e e^T
        let second = |y: f64| {
            let p = 1.0 / (1.0 + (-y * s).exp());
            &v * v.transpose() * (y * y * p * (1.0 - p))
        };
        let (pos, neg) = (second(1.0), second(-1.0));
        let h = hessian_term(&e, &u).unwrap();
        worst_gap = worst_gap
            .max((&pos - &neg).abs().max())
            .max((&h - &pos).abs().max());
        worst_eig = worst_eig.min(h.symmetric_eigen().eigenvalues.min());
    }
    outcome(
        worst_gap <= 1e-12 && worst_eig >= -1e-10,
        format!("max |H(+1) - H(-1)| {worst_gap:.1e}, min eigenvalue {worst_eig:.1e}"),
    )
}

fn c3_selection_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let lambda = 0.1;
    let user = EntityId(0);

    let mut singleton_ok = 0;
    for _ in 0..50 {
        let n = rng.random_range(3..15);
        let k = rng.random_range(1..6);
        let phi = random_phi(&mut rng, k, n as usize + 1);
        let p = pool(n);
        let got = select_fisher(&p, 1, &phi, user, lambda).unwrap().chosen[0];
        let best = p
            .iter()
            .map(|&e| (e, trace_objective(&[e], &p, &phi, user, lambda).unwrap()))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .unwrap()
            .0;
        singleton_ok += (got == best) as usize;
    }

    let mut subset_ok = 0;
    for _ in 0..50 {
        let phi = random_phi(&mut rng, 3, 7);
        let p = pool(6);
        let got = select_approx(&p, 2, &phi, user, lambda, ApproxVariant::MaxTrace).unwrap();
        let mut got_set = got.chosen.clone();
        got_set.sort();
        let mut best = (f64::NEG_INFINITY, vec![]);
        for i in 0..6 {
            for j in i + 1..6 {
                let q = [p[i], p[j]];
                let t = fisher_info(&q, &phi, user).unwrap().trace();
                if t > best.0 + 1e-15 {
                    best = (t, q.to_vec());
                }
            }
        }
        subset_ok += (got_set == best.1) as usize;
    }

    let k = 6;
    let b = DMatrix::from_fn(k, k, |_, _| rng.random_range(-1.0..1.0));
    let a = &b * b.transpose() + DMatrix::identity(k, k) * 0.5;
    let mut a_inv = a.clone().cholesky().unwrap().inverse();
    let mut a_direct = a;
    for _ in 0..20 {
        let v = random_vec(&mut rng, k, 1.0);
        let w = rng.random_range(0.01..0.25);
        a_inv = incremental_inverse_update(&a_inv, &v, w).unwrap();
        let vv = DVector::from_vec(v);
        a_direct += &vv * vv.transpose() * w;
    }
    let dev = (a_inv - a_direct.cholesky().unwrap().inverse()).abs().max();

    outcome(
        singleton_ok == 50 && subset_ok == 50 && dev <= 1e-8,
        format!("(a) {singleton_ok}/50 singleton, (b) {subset_ok}/50 subset, (c) chain deviation {dev:.1e}"),
    )
}

fn c4_greedy_dominance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let lambda = 0.1;
    let user = EntityId(0);
    let mut wins = 0;
    let mut worst_margin = f64::INFINITY;
    for _ in 0..20 {
        let phi = random_phi(&mut rng, 3, 11);
        let p = pool(10);
        let greedy = select_fisher(&p, 3, &phi, user, lambda).unwrap().objective_value;
        let mean: f64 = (0..1000)
            .map(|_| {
                let q: Vec<EntityId> = p.choose_multiple(&mut rng, 3).copied().collect();
                trace_objective(&q, &p, &phi, user, lambda).unwrap()
            })
            .sum::<f64>()
            / 1000.0;
        wins += (greedy <= mean) as usize;
        worst_margin = worst_margin.min(mean - greedy);
    }
    outcome(
        wins == 20,
        format!("{wins}/20 instances at or below the random-subset mean (smallest margin {worst_margin:.3e})"),
    )
}

/// Expected loss over `s` for user vector `phi_u` when labels follow the truth.
fn expected_loss(s: &[EntityId], truth: &LatentMatrix, user: EntityId, phi_u: &[f64]) -> f64 {
    let star = truth.vector(user);
    s.iter()
        .map(|&e| {
            let v = truth.vector(e);
            let p = sigmoid(v.iter().zip(star).map(|(a, b)| a * b).sum());
            let sc: f64 = v.iter().zip(phi_u).map(|(a, b)| a * b).sum();
            p * softplus(-sc) + (1.0 - p) * softplus(sc)
        })
        .sum::<f64>()
        / s.len() as f64
}

fn c5_excess_loss_ratio(data: &SyntheticDataset) -> Outcome {
    let lambda = 0.1;
    let truth = &data.truth;
    let reg = data.db.registry();
    let user = reg.ids_of(EntityKind::User).next().unwrap();
    let s: Vec<EntityId> = reg
        .ids_of(EntityKind::Business)
        .chain(reg.ids_of(EntityKind::Category))
        .collect();
    let star = truth.vector(user).to_vec();
    let base = expected_loss(&s, truth, user, &star);
    let is = fisher_info_at(&s, truth, &star).unwrap().matrix;

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut ratios = Vec::new();
    for m in [50usize, 100, 200] {
        let q: Vec<EntityId> = (0..m).map(|_| s[rng.random_range(0..s.len())]).collect();
        let probs: Vec<f64> = q.iter().map(|&e| truth.prob(e, user)).collect();
        let mut excess = 0.0;
        for _ in 0..200 {
            let labeled: Vec<(EntityId, i8)> = q
                .iter()
                .zip(&probs)
                .map(|(&e, &p)| (e, if rng.random::<f64>() < p { 1 } else { -1 }))
                .collect();
            let fit = refit_user_from(&star, &labeled, truth, lambda).unwrap();
            excess += expected_loss(&s, truth, user, &fit.phi_u) - base;
        }
        excess /= 200.0;
        let iq = fisher_info_at(&q, truth, &star).unwrap().matrix;
        let tau2 = 0.5 * trace_criterion(&iq, &is, lambda / m as f64).unwrap();
        ratios.push(excess / (tau2 / m as f64));
    }
    let in_band = ratios.iter().all(|r| (0.5..=1.5).contains(r));
    let trend = (ratios[2] - 1.0).abs() < (ratios[0] - 1.0).abs();
    outcome(
        in_band && trend,
        format!(
            "ratios M=50 {:.3}, M=100 {:.3}, M=200 {:.3} (band [0.5, 1.5], M=200 closer to 1: {trend})",
            ratios[0], ratios[1], ratios[2]
        ),
    )
}

fn synthetic_cfg(protocol: Protocol, relations: RelationMode) -> ExperimentConfig {
    ExperimentConfig {
        relations,
        ..ExperimentConfig::synthetic(protocol)
    }
}

fn c6_c7_lower_bound(data: &SyntheticDataset, relations: RelationMode, target: f64) -> Outcome {
    let ed = ExperimentData {
        db: &data.db,
        truth: Some(&data.truth),
    };
    let b = run_bounds(&synthetic_cfg(Protocol::Personalized, relations), &ed).unwrap();
    outcome(
        (b.lower - target).abs() <= 0.05,
        format!("lower bound {:.4} (target {target} +- 0.05), upper {:.4}", b.lower, b.upper),
    )
}

/// Fraction of iterations 5..=25 where Fisher's mean is at least the baseline's.
fn fisher_share(out: &ExperimentOutput, baseline: SelectorKind) -> f64 {
    let f = out.table.curve(SelectorKind::Fisher);
    let b = out.table.curve(baseline);
    let hits = (5..=25).filter(|&i| f[i] >= b[i]).count();
    hits as f64 / 21.0
}

fn c8_ordering(collective: &ExperimentOutput, r_only: &ExperimentOutput) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, out) in [("collective", collective), ("R-only", r_only)] {
        let shares: Vec<String> = BASELINES
            .iter()
            .map(|&b| {
                let s = fisher_share(out, b);
                pass &= s >= 0.8;
                format!("{b} {s:.2}")
            })
            .collect();
        parts.push(format!("{name}: {}", shares.join(", ")));
    }
    outcome(pass, format!("share of iterations 5-25 with Fisher >= baseline (need 0.80): {}", parts.join("; ")))
}

fn c9_cold_start(out: &ExperimentOutput) -> Outcome {
    let f = out.table.curve(SelectorKind::Fisher);
    let start_ok = (f[0] - 0.5).abs() <= 0.03;
    let reach_ok = f[2] >= 0.62;
    outcome(
        start_ok && reach_ok,
        format!(
            "iteration 0 F1 {:.4} (need 0.50 +- 0.03: {start_ok}), Fisher at iteration 2 {:.4} (need >= 0.62: {reach_ok})",
            f[0], f[2]
        ),
    )
}

fn c10_noise(noisy: &ExperimentOutput, clean: &ExperimentOutput) -> Outcome {
    let last = 25;
    let mut degrade_ok = true;
    let mut worst_gap = f64::NEG_INFINITY;
    for kind in SelectorKind::ALL {
        let gap = noisy.table.get(kind, last).unwrap().f1_mean - clean.table.get(kind, last).unwrap().f1_mean;
        worst_gap = worst_gap.max(gap);
        degrade_ok &= gap <= 0.01;
    }
    let fisher = noisy.table.get(SelectorKind::Fisher, last).unwrap().f1_mean;
    let best_baseline = BASELINES
        .iter()
        .map(|&b| (b, noisy.table.get(b, last).unwrap().f1_mean))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let top_ok = fisher >= best_baseline.1;
    let upper = noisy.bounds.unwrap().upper;
    let upper_ok = (upper - 0.80).abs() <= 0.05;
    outcome(
        degrade_ok && top_ok && upper_ok,
        format!(
            "max noisy - clean at iteration 25 {worst_gap:+.4} (need <= 0.01: {degrade_ok}); Fisher {fisher:.4} vs best baseline {} {:.4} (top: {top_ok}); upper bound {upper:.4} (0.80 +- 0.05: {upper_ok})",
            best_baseline.0, best_baseline.1
        ),
    )
}

fn main() {
    // libtest flags (--nocapture, filters) are accepted and ignored.
    let data = generate_synthetic(&SyntheticConfig::default(), DATA_SEED).unwrap();
    let ed = ExperimentData {
        db: &data.db,
        truth: Some(&data.truth),
    };
    let mut results: Vec<(u32, &str, Duration, Duration, Outcome)> = Vec::new();
    let mut run = |id: u32, name: &'static str, budget: Duration, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let o = f();
        let elapsed = t.elapsed();
        let line_ok = o.pass && elapsed <= budget;
        println!(
            "criterion {id:>2} {} {name}: {} [{:.2}s, budget {}s]",
            if line_ok { "PASS" } else { "FAIL" },
            o.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
        results.push((id, name, elapsed, budget, o));
    };

    let secs = Duration::from_secs;
    run(1, "gradient correctness", secs(1), &mut c1_gradients);
    run(2, "label-free Hessian", secs(60), &mut c2_label_free_hessian);
    run(3, "selection oracles", secs(60), &mut c3_selection_oracles);
    run(4, "greedy dominance", secs(60), &mut c4_greedy_dominance);
    run(5, "excess loss ratio", secs(120), &mut || c5_excess_loss_ratio(&data));
    run(6, "R-only lower bound", secs(300), &mut || {
        c6_c7_lower_bound(&data, RelationMode::ROnly, 0.60)
    });
    run(7, "collective lower bound", secs(600), &mut || {
        c6_c7_lower_bound(&data, RelationMode::Collective, 0.760)
    });

    let mut clean_r_only = None;
    run(8, "Fisher ordering", secs(900), &mut || {
        let collective = run_experiment(&synthetic_cfg(Protocol::Personalized, RelationMode::Collective), &ed).unwrap();
        let r_only = run_experiment(&synthetic_cfg(Protocol::Personalized, RelationMode::ROnly), &ed).unwrap();
        let o = c8_ordering(&collective, &r_only);
        clean_r_only = Some(r_only);
        o
    });
    run(9, "cold start", secs(600), &mut || {
        let out = run_experiment(&synthetic_cfg(Protocol::ColdStart, RelationMode::ROnly), &ed).unwrap();
        c9_cold_start(&out)
    });
    run(10, "noise degradation", secs(900), &mut || {
        let noisy = run_experiment(&synthetic_cfg(Protocol::Noisy, RelationMode::ROnly), &ed).unwrap();
        c10_noise(&noisy, clean_r_only.as_ref().unwrap())
    });

    let failed: Vec<u32> = results
        .iter()
        .filter(|(_, _, elapsed, budget, o)| !o.pass || elapsed > budget)
        .map(|r| r.0)
        .collect();
    println!(
        "acceptance: {} of {} criteria passed{}",
        results.len() - failed.len(),
        results.len(),
        if failed.is_empty() {
            String::new()
        } else {
            format!("; failed: {failed:?}")
        }
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
