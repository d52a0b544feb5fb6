//! Acceptance criteria 1-9. Runs without the libtest harness so every
//! criterion prints exactly one PASS/FAIL line; exits nonzero on any FAIL.

use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use num_rational::Ratio;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use groupauth::attacks::{self, AttackOptions, AttackReport};
use groupauth::cost::{self, per_user_cost, savings_ratio_exact, EnergyModel, HarnSlope, Scheme};
use groupauth::ec::{CurveParams, CurvePoint};
use groupauth::field::{lagrange_coeff_at, FieldElement, OpCounter, Prime};
use groupauth::harn::{harn_init, harn_release, harn_verify, HarnGroup, Released};
use groupauth::protocol::{
    decentralized_verify, gm_init, gm_verify, kdf_pairwise, make_public_share, run_key_agreement,
};
use groupauth::sim::{self, Scenario, SimScheme};
use groupauth::sss::{default_roster, issue_shares, reconstruct, sample_polynomial, verify_commitment, SssError};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(observed: f64, target: f64, rel: f64) -> bool {
    (observed - target).abs() <= rel * target
}

// ---------------------------------------------------------------- 1

const TEXT_HARN: (u64, u64) = (45, 1418);
const TABLE_HARN: (u64, u64) = (14, 1418);
const CHIEN: (u64, u64) = (7, 6785);

fn criterion_1() -> Outcome {
    for m in 1..=1000u64 {
        let got = [
            per_user_cost(Scheme::Proposed, m, HarnSlope::Text),
            per_user_cost(Scheme::Harn, m, HarnSlope::Text),
            per_user_cost(Scheme::Harn, m, HarnSlope::Table),
            per_user_cost(Scheme::Chien, m, HarnSlope::Text),
        ]
        .map(|r| r.map_err(|e| e.to_string()));
        let want = [
            29 * 41,
            TEXT_HARN.0 * m + TEXT_HARN.1,
            TABLE_HARN.0 * m + TABLE_HARN.1,
            CHIEN.0 * m + CHIEN.1,
        ];
        for (g, w) in got.into_iter().zip(want) {
            let g = g?;
            ensure(g == w, || format!("m={m}: got {g}, want {w}"))?;
        }
    }
    ensure(per_user_cost(Scheme::Proposed, 10, HarnSlope::Text) == Ok(1189), || "1189".into())?;
    Ok("proposed 1189, harn 45m+1418 / 14m+1418, chien 7m+6785 for m in 1..=1000".into())
}

// ---------------------------------------------------------------- 2

fn criterion_2() -> Outcome {
    let floor = Ratio::new(4u64, 5);
    let mut worst = (0u64, Ratio::from_integer(1u64));
    for m in 1..=1000u64 {
        let r = savings_ratio_exact(m).map_err(|e| e.to_string())?;
        // independent oracle: (chien - proposed) / chien from the literal formulas
        let chien = 7 * m + 6785;
        ensure(r == Ratio::new(chien - 1189, chien), || format!("m={m}: {r} disagrees with oracle"))?;
        if r < worst.1 {
            worst = (m, r);
        }
    }
    ensure(worst.1 >= floor, || format!("m={}: savings {} < 4/5", worst.0, worst.1))?;
    Ok(format!(
        "minimum savings {} = {:.4} at m={}",
        worst.1,
        *worst.1.numer() as f64 / *worst.1.denom() as f64,
        worst.0
    ))
}

// ---------------------------------------------------------------- 3

const PROPOSED_M50_TARGET_S: f64 = 6.9;
const TIME_TOL: f64 = 0.25;
const HARN_RATIO: f64 = 5.0;
const RATIO_TOL: f64 = 0.20;
const ENERGY_RATIO_MAX: f64 = 0.2;
const FROZEN_REL_TOL: f64 = 1e-9;

fn criterion_3() -> Outcome {
    let mut anchor = Scenario::new(SimScheme::ProposedCentralized, 10, 5);
    anchor.seed = 1;
    let cal = sim::calibrate(&anchor).map_err(|e| e.to_string())?;
    ensure(within(cal.compute_rate, sim::DEFAULT_COMPUTE_RATE, FROZEN_REL_TOL), || {
        format!("rate {} != frozen {}", cal.compute_rate, sim::DEFAULT_COMPUTE_RATE)
    })?;
    ensure(within(cal.joules_per_tmulq, sim::DEFAULT_JOULES_PER_TMULQ, FROZEN_REL_TOL), || {
        format!("J/T {} != frozen {}", cal.joules_per_tmulq, sim::DEFAULT_JOULES_PER_TMULQ)
    })?;
    let run = |scheme, m: usize| {
        let mut sc = Scenario::new(scheme, m, m / 2);
        sc.seed = 1;
        sc.compute_rate = cal.compute_rate;
        sc.joules_per_tmulq = cal.joules_per_tmulq;
        sim::run(&sc).map_err(|e| e.to_string())
    };
    let anchor_report = run(SimScheme::ProposedCentralized, 10)?;
    ensure(within(anchor_report.auth_time_s, 1.3, 1e-6), || {
        format!("anchor reproduces {} s", anchor_report.auth_time_s)
    })?;
    let p50 = run(SimScheme::ProposedCentralized, 50)?;
    let h10 = run(SimScheme::Harn, 10)?;
    let h50 = run(SimScheme::Harn, 50)?;
    for r in [&p50, &h10, &h50] {
        ensure(r.authenticated(), || format!("{:?} m={} did not authenticate", r.scheme, r.m))?;
    }
    ensure(within(p50.auth_time_s, PROPOSED_M50_TARGET_S, TIME_TOL), || {
        format!("proposed m=50 {:.3} s outside 6.9 s +-25%", p50.auth_time_s)
    })?;
    let ratio = h50.auth_time_s / h10.auth_time_s;
    ensure(within(ratio, HARN_RATIO, RATIO_TOL), || format!("harn ratio {ratio:.3} outside 5 +-20%"))?;

    let member = |r: &sim::SimReport| r.representative().cloned().ok_or("no member report".to_string());
    let (pm, hm) = (member(&p50)?, member(&h50)?);
    let model = EnergyModel::new(cal.joules_per_tmulq, cost::DEFAULT_TX_JOULES_PER_BYTE, cost::DEFAULT_RX_JOULES_PER_BYTE)
        .map_err(|e| e.to_string())?;
    let chien = cost::energy(Scheme::Chien, 50, HarnSlope::Text, &model, pm.bytes_tx, pm.bytes_rx)
        .map_err(|e| e.to_string())?
        .total_j;
    ensure(pm.total_j < chien && chien < hm.total_j, || {
        format!("energy order broken: proposed {} chien {} harn {}", pm.total_j, chien, hm.total_j)
    })?;
    let e_ratio = pm.total_j / hm.total_j;
    ensure(e_ratio <= ENERGY_RATIO_MAX, || format!("proposed/harn energy {e_ratio:.4} > 0.2"))?;
    Ok(format!(
        "proposed m=50 {:.3} s; harn {:.2} s -> {:.2} s (ratio {ratio:.3}); energy m=50 proposed {:.4} J < chien {:.4} J < harn {:.4} J (ratio {e_ratio:.3})",
        p50.auth_time_s, h10.auth_time_s, h50.auth_time_s, pm.total_j, chien, hm.total_j
    ))
}

// ---------------------------------------------------------------- 4

fn criterion_4() -> Outcome {
    let curve = CurveParams::builtin("test2017").map_err(|e| e.to_string())?;
    let ctx = OpCounter::disabled();
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let mut runs = 0;
    for n in 1..=12usize {
        for m in 1..=n {
            for t in 1..=m {
                let label = format!("t={t} m={m} n={n}");
                let (config, shares) = gm_init(t, n, &curve, &mut rng).map_err(|e| format!("{label}: {e}"))?;
                let mut active = shares.clone();
                active.shuffle(&mut rng);
                active.truncate(m);
                active.sort_by(|a, b| a.member_id.cmp(&b.member_id));
                let publics = active
                    .iter()
                    .map(|s| make_public_share(s, &config, &ctx))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| format!("{label}: {e}"))?;
                let central = gm_verify(&config, &shares, &publics, &ctx).map_err(|e| format!("{label}: {e}"))?;
                ensure(central.accepted(), || format!("{label}: centralized rejected"))?;
                let decentral = decentralized_verify(&config, &publics, &ctx).map_err(|e| format!("{label}: {e}"))?;
                ensure(decentral, || format!("{label}: decentralized rejected"))?;
                let keys = run_key_agreement(&config, &active, &mut rng).map_err(|e| format!("{label}: {e}"))?;
                ensure(keys.len() == m, || format!("{label}: {} keys", keys.len()))?;
                let first = keys.values().next().expect("m >= 1");
                ensure(keys.values().all(|k| k == first), || format!("{label}: keys differ"))?;
                ensure(verify_commitment(first, config.commitment()), || format!("{label}: H(s') != H(s)"))?;
                runs += 1;
            }
        }
    }
    Ok(format!("{runs} honest runs, zero failures"))
}

// ---------------------------------------------------------------- 5

fn criterion_5() -> Outcome {
    let q = 257u64;
    let field = Prime::from_u64(q).map_err(|e| e.to_string())?;
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let mut details = Vec::new();
    for t in 2..=3usize {
        let secret = FieldElement::random(&mut rng, &field);
        let poly = sample_polynomial(t, &secret, &mut rng).map_err(|e| e.to_string())?;
        let shares = issue_shares(&poly, &default_roster(t, &field)).map_err(|e| e.to_string())?;
        let known: Vec<u64> = shares[..t - 1]
            .iter()
            .map(|s| s.y.residue().try_into().expect("y < 257"))
            .collect();
        let e = attacks::threshold_enumeration(q, t, &known);
        ensure(e.consistent_any_degree == q && e.min_completions == 1 && e.max_completions == 1, || {
            format!("t={t}: {e:?}")
        })?;
        ensure(e.fresh_point_values == q, || format!("t={t}: fresh point values {}", e.fresh_point_values))?;
        // exact-degree family: one candidate is excluded
        ensure(e.consistent_exact_degree == q - 1, || format!("t={t}: exact degree {}", e.consistent_exact_degree))?;
        let below = reconstruct(&shares[..t - 1], t, &OpCounter::disabled());
        ensure(matches!(below, Err(SssError::BelowThreshold { .. })), || {
            format!("t={t}: reconstruction from t-1 shares returned {below:?}")
        })?;
        details.push(format!(
            "t={t}: {}/{q} candidates consistent (exact degree {})",
            e.consistent_any_degree, e.consistent_exact_degree
        ));
    }
    Ok(format!("q={q}; {}; t-1 reconstruction rejected", details.join("; ")))
}

// ---------------------------------------------------------------- 6

fn criterion_6() -> Outcome {
    let curve = CurveParams::builtin("secp160r1").map_err(|e| e.to_string())?;
    let group = HarnGroup::builtin("1024-160").map_err(|e| e.to_string())?;
    let mut rng = ChaCha20Rng::seed_from_u64(6);
    let mut harn_counts = Vec::new();
    for m in [10usize, 50, 200] {
        let (config, shares) = gm_init(m / 2, m, &curve, &mut rng).map_err(|e| e.to_string())?;
        for share in &shares {
            let ctx = OpCounter::new();
            make_public_share(share, &config, &ctx).map_err(|e| e.to_string())?;
            let n = ctx.snapshot().scalar_muls;
            ensure(n == 1, || format!("m={m} {}: {n} scalar multiplications", share.member_id))?;
        }
        let (params, tokens) = harn_init(m / 2, m, &group, &mut rng).map_err(|e| e.to_string())?;
        let xs: Vec<FieldElement> = tokens.iter().map(|t| t.x.clone()).collect();
        let ctx = OpCounter::new();
        harn_release(&tokens[0], &xs, &params, &ctx).map_err(|e| e.to_string())?;
        harn_counts.push((m, ctx.snapshot().total_field_muls()));
    }
    ensure(harn_counts.windows(2).all(|w| w[1].1 > w[0].1), || {
        format!("harn counts not increasing: {harn_counts:?}")
    })?;
    let shown: Vec<String> = harn_counts.iter().map(|(m, c)| format!("m={m}: {c}")).collect();
    Ok(format!("1 scalar mult per member at m=10/50/200; harn muls per member {}", shown.join(", ")))
}

// ---------------------------------------------------------------- 7

fn criterion_7() -> Outcome {
    let mut details = Vec::new();
    for (name, max_n) in [("tiny", 10usize), ("1024-160", 12)] {
        let group = HarnGroup::builtin(name).map_err(|e| e.to_string())?;
        let p = group.p().value().clone();
        let g = group.g().residue().clone();
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        for trial in 0..100 {
            let n = rng.gen_range(1..=max_n);
            let m = rng.gen_range(1..=n);
            let t = rng.gen_range(1..=m);
            let label = format!("{name} trial {trial} t={t} m={m} n={n}");
            let (params, mut tokens) = harn_init(t, n, &group, &mut rng).map_err(|e| format!("{label}: {e}"))?;
            tokens.shuffle(&mut rng);
            tokens.truncate(m);
            let ctx = OpCounter::disabled();
            let xs: Vec<FieldElement> = tokens.iter().map(|t| t.x.clone()).collect();
            let mut released = tokens
                .iter()
                .map(|tok| {
                    harn_release(tok, &xs, &params, &ctx).map(|e| Released {
                        member_id: tok.member_id.clone(),
                        e,
                    })
                })
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| format!("{label}: {e}"))?;
            // oracle: plain modular arithmetic on the residues
            let product = released
                .iter()
                .fold(BigUint::from(1u8), |acc, r| acc * r.e.residue() % &p);
            let expected = g.modpow(params.secret().residue(), &p);
            ensure(product == expected, || format!("{label}: product != g^s"))?;
            ensure(harn_verify(&released, &params, &ctx).map_err(|e| e.to_string())?, || {
                format!("{label}: honest release rejected")
            })?;
            let victim = rng.gen_range(0..released.len());
            let bumped = released[victim].e.mul(group.g()).map_err(|e| e.to_string())?;
            released[victim].e = bumped;
            ensure(!harn_verify(&released, &params, &ctx).map_err(|e| e.to_string())?, || {
                format!("{label}: corrupted e_{victim} accepted")
            })?;
        }
        details.push(format!("{name}: 100/100"));
    }
    Ok(format!("prod e_i = g^s and single corruption detected; {}", details.join(", ")))
}

// ---------------------------------------------------------------- 8

fn expect_finding(report: &AttackReport, check: &str, observed: &str) -> Result<(), String> {
    let finding = report
        .findings
        .iter()
        .find(|f| f.check == check)
        .ok_or_else(|| format!("{}: no finding {check:?}", report.scenario))?;
    ensure(finding.observed == observed, || {
        format!("{}: {check:?} observed {}, want {observed}", report.scenario, finding.observed)
    })
}

fn criterion_8() -> Outcome {
    let base = AttackOptions::new(8);
    let run = |name: &str, f: &dyn Fn(&mut AttackOptions)| {
        let mut opts = base.clone();
        f(&mut opts);
        let report = attacks::run_scenario(name, &opts).map_err(|e| e.to_string())?;
        ensure(report.all_matched, || format!("{name}: {}", report.to_json()))?;
        Ok::<_, String>(report)
    };

    let rotated = run("replay", &|o| o.rotate = true)?;
    expect_finding(&rotated, "confirmation accepts replayed public share", "false")?;

    let replay = run("replay", &|o| o.rotate = false)?;
    expect_finding(&replay, "confirmation accepts replayed public share", "true")?;
    expect_finding(&replay, "impostor decrypts honest ciphertexts", "0")?;
    expect_finding(&replay, "honest members reject the impostor's ciphertexts", &(base.n - 1).to_string())?;

    let dos_d = run("dos-invalid-share", &|o| o.centralized = false)?;
    expect_finding(&dos_d, "outcome", "Failed(DenialOfAuthentication)")?;
    let dos_c = run("dos-invalid-share", &|o| o.centralized = true)?;
    expect_finding(&dos_c, "outcome", "Authenticated")?;
    expect_finding(&dos_c, "culprits identified", "[U5]")?;

    let compromise = run("node-compromise", &|_| {})?;
    expect_finding(&compromise, "impersonator recovers the group key", "true")?;

    let eaves = run("eavesdrop", &|_| {})?;
    expect_finding(&eaves, "secret leaks in honest transcript", "0")?;
    expect_finding(&eaves, "negative control leak detected", "true")?;

    Ok("replay+rotation rejected; replay passes confirmation, fails key agreement; DoS denies decentralized, isolated centralized; compromise succeeds; secrecy scan clean, control flagged".into())
}

// ---------------------------------------------------------------- 9

const PROPERTY_CASES: u32 = 512;

fn prop_run<S: Strategy>(
    name: &str,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    let mut runner = TestRunner::new(Config {
        cases: PROPERTY_CASES,
        failure_persistence: None,
        ..Config::default()
    });
    runner.run(&strategy, test).map_err(|e| format!("{name}: {e}"))
}

fn big(bytes: Vec<u8>, modulus: &Prime) -> FieldElement {
    FieldElement::new(BigUint::from_bytes_be(&bytes), modulus)
}

fn tc<E: std::fmt::Display>(e: E) -> TestCaseError {
    TestCaseError::fail(e.to_string())
}

fn criterion_9() -> Outcome {
    let secp = CurveParams::builtin("secp160r1").map_err(|e| e.to_string())?;
    let tiny = CurveParams::builtin("test2017").map_err(|e| e.to_string())?;
    let p = secp.modulus().clone();
    let r = secp.subgroup_order().expect("subgroup").clone();
    let bytes = || proptest::collection::vec(any::<u8>(), 24);
    let ctx = OpCounter::disabled();

    prop_run("field axioms", (bytes(), bytes(), bytes()), |(a, b, c)| {
        let (a, b, c) = (big(a, &p), big(b, &p), big(c, &p));
        let zero = FieldElement::zero(&p);
        let one = FieldElement::one(&p);
        prop_assert_eq!(a.add(&b).map_err(tc)?, b.add(&a).map_err(tc)?);
        prop_assert_eq!(a.mul(&b).map_err(tc)?, b.mul(&a).map_err(tc)?);
        prop_assert_eq!(
            a.add(&b).map_err(tc)?.add(&c).map_err(tc)?,
            a.add(&b.add(&c).map_err(tc)?).map_err(tc)?
        );
        prop_assert_eq!(
            a.mul(&b).map_err(tc)?.mul(&c).map_err(tc)?,
            a.mul(&b.mul(&c).map_err(tc)?).map_err(tc)?
        );
        prop_assert_eq!(
            a.mul(&b.add(&c).map_err(tc)?).map_err(tc)?,
            a.mul(&b).map_err(tc)?.add(&a.mul(&c).map_err(tc)?).map_err(tc)?
        );
        prop_assert_eq!(a.add(&zero).map_err(tc)?, a.clone());
        prop_assert_eq!(a.mul(&one).map_err(tc)?, a.clone());
        prop_assert!(a.add(&a.neg()).map_err(tc)?.is_zero());
        if !a.is_zero() {
            prop_assert!(a.mul(&a.inv().map_err(tc)?).map_err(tc)?.is_one());
        }
        // oracle: plain BigUint arithmetic
        let pv = p.value();
        let ab = a.mul(&b).map_err(tc)?;
        prop_assert_eq!(ab.residue(), &(a.residue() * b.residue() % pv));
        Ok(())
    })?;

    let g = tiny.generator().clone();
    prop_run("group law vs repeated addition", (0u64..120, 0u64..37, 0u64..37), |(k, i, j)| {
        let pt = tiny.scalar_mul(&BigUint::from(i + 1), &g, &ctx).map_err(tc)?;
        let mut acc = CurvePoint::Infinity;
        for _ in 0..k {
            acc = tiny.add(&acc, &pt, &ctx).map_err(tc)?;
        }
        prop_assert_eq!(tiny.scalar_mul(&BigUint::from(k), &pt, &ctx).map_err(tc)?, acc);
        let q = tiny.scalar_mul(&BigUint::from(j), &g, &ctx).map_err(tc)?;
        prop_assert_eq!(tiny.add(&pt, &q, &ctx).map_err(tc)?, tiny.add(&q, &pt, &ctx).map_err(tc)?);
        prop_assert_eq!(tiny.double(&pt, &ctx).map_err(tc)?, tiny.add(&pt, &pt, &ctx).map_err(tc)?);
        prop_assert!(tiny.add(&pt, &pt.negate(), &ctx).map_err(tc)?.is_infinity());
        Ok(())
    })?;

    let gen = secp.generator().clone();
    prop_run("scalar-mul additivity", (bytes(), bytes()), |(a, b)| {
        let (a, b) = (BigUint::from_bytes_be(&a), BigUint::from_bytes_be(&b));
        let lhs = secp.scalar_mul(&(&a + &b), &gen, &ctx).map_err(tc)?;
        let ap = secp.scalar_mul(&a, &gen, &ctx).map_err(tc)?;
        let bp = secp.scalar_mul(&b, &gen, &ctx).map_err(tc)?;
        prop_assert_eq!(lhs, secp.add(&ap, &bp, &ctx).map_err(tc)?);
        Ok(())
    })?;

    prop_run(
        "lagrange partition of unity",
        (proptest::collection::btree_set(1u64..1_000_000, 1..12), bytes()),
        |(xs, at)| {
            let xs: Vec<FieldElement> = xs.into_iter().map(|x| FieldElement::from_u64(x, &r)).collect();
            let at = big(at, &r);
            let mut sum = FieldElement::zero(&r);
            for i in 0..xs.len() {
                sum = sum.add(&lagrange_coeff_at(i, &xs, &at, &ctx).map_err(tc)?).map_err(tc)?;
            }
            prop_assert!(sum.is_one());
            Ok(())
        },
    )?;

    prop_run("ECDH symmetry", (bytes(), bytes()), |(a, b)| {
        let (a, b) = (BigUint::from_bytes_be(&a) + 1u8, BigUint::from_bytes_be(&b) + 1u8);
        let pa = secp.scalar_mul(&a, &gen, &ctx).map_err(tc)?;
        let pb = secp.scalar_mul(&b, &gen, &ctx).map_err(tc)?;
        let k_ab = secp.scalar_mul(&a, &pb, &ctx).map_err(tc)?;
        let k_ba = secp.scalar_mul(&b, &pa, &ctx).map_err(tc)?;
        prop_assert_eq!(&k_ab, &k_ba);
        let ids = groupauth::sss::MemberId::new("U1").map_err(tc)?;
        let other = groupauth::sss::MemberId::new("U2").map_err(tc)?;
        prop_assert!(kdf_pairwise(&k_ab, &ids, &other) == kdf_pairwise(&k_ba, &other, &ids));
        Ok(())
    })?;

    Ok(format!("5 suites x {PROPERTY_CASES} cases, zero failures"))
}

// ---------------------------------------------------------------- driver

struct Criterion {
    id: u32,
    title: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

const CRITERIA: [Criterion; 9] = [
    Criterion { id: 1, title: "cost model", budget: Duration::from_secs(1), run: criterion_1 },
    Criterion { id: 2, title: "savings >= 0.80", budget: Duration::from_secs(1), run: criterion_2 },
    Criterion { id: 3, title: "simulation calibration", budget: Duration::from_secs(30), run: criterion_3 },
    Criterion { id: 4, title: "completeness sweep", budget: Duration::from_secs(60), run: criterion_4 },
    Criterion { id: 5, title: "threshold soundness", budget: Duration::from_secs(30), run: criterion_5 },
    Criterion { id: 6, title: "constant member cost", budget: Duration::from_secs(10), run: criterion_6 },
    Criterion { id: 7, title: "harn identity", budget: Duration::from_secs(60), run: criterion_7 },
    Criterion { id: 8, title: "attack verdicts", budget: Duration::from_secs(60), run: criterion_8 },
    Criterion { id: 9, title: "property suites", budget: Duration::from_secs(60), run: criterion_9 },
];

fn main() -> ExitCode {
    let filter: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for c in CRITERIA.iter().filter(|c| filter.is_empty() || filter.contains(&c.id)) {
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(c.run))
            .unwrap_or_else(|p| Err(format!("panicked: {:?}", p.downcast_ref::<String>().map(String::as_str).or(p.downcast_ref::<&str>().copied()))));
        let elapsed = start.elapsed();
        let result = result.and_then(|detail| {
            if elapsed <= c.budget {
                Ok(detail)
            } else {
                Err(format!("{detail}; took {elapsed:.2?}, budget {:?}", c.budget))
            }
        });
        match result {
            Ok(detail) => println!("criterion {} PASS ({}, {elapsed:.2?}): {detail}", c.id, c.title),
            Err(why) => {
                failed += 1;
                println!("criterion {} FAIL ({}, {elapsed:.2?}): {why}", c.id, c.title);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
