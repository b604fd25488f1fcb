//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use koethe_core::approx::{
    build_steps, idempotence_profile, square_decompose, sqrt_membership, verify_convergence, verify_lawson_read,
    ApproxSetup,
};
use koethe_core::catalog::golden_catalog;
use koethe_core::classifier::{
    classify, classify_strong, classify_weak, consistency_check, Dimension, Tri, WitnessModule,
};
use koethe_core::conditions::{check_b, check_m, construct_m_matrices, ConditionProfile};
use koethe_core::expr::parse_weight_expr;
use koethe_core::index::{Index, IndexSet};
use koethe_core::logvalue::LogValue;
use koethe_core::relations::{non_algebra_scan, WITNESS_SCAN_BUDGET};
use koethe_core::sequences::{hadamard_mul, membership, pointwise_mul, Coefficients, SeqElement};
use koethe_core::verdict::{Certificate, FailureWitness, Outcome, ProofRule, Verdict};
use koethe_core::weights::{make_builtin, Builtin, Levels, WeightFamily};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn fam(id: &str) -> WeightFamily {
    make_builtin(&Builtin::from_id(id).unwrap()).unwrap()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond { Ok(()) } else { Err(msg()) }
}

fn within(start: Instant, limit: Duration, what: &str) -> Result<(), String> {
    let t = start.elapsed();
    ensure(t < limit, || format!("{what} took {t:.2?}, limit {limit:?}"))
}

fn golden_table() -> Check {
    use Dimension::*;
    let start = Instant::now();
    let expected: [(&str, [Dimension; 4]); 7] = [
        ("l1", [Two; 4]),
        ("s", [One; 4]),
        ("entire", [One; 4]),
        ("hadamard_disk_1", [Zero; 4]),
        ("hadamard_disk_2", [Infinite; 4]),
        ("matrix_example", [Two, Two, One, One]),
        ("finite_dim_64", [Zero; 4]),
    ];
    let catalog = golden_catalog();
    for (name, dims) in expected {
        let c = catalog.iter().find(|c| c.name == name).ok_or(format!("{name} missing from the catalog"))?;
        let p = c.build().map_err(|e| e.to_string())?;
        let (_, hp) = classify(&p, c.analysis.depth, c.analysis.level_budget).map_err(|e| format!("{name}: {e}"))?;
        let got = [hp.dg, hp.db, hp.wdg, hp.wdb];
        ensure(got == dims, || format!("{name}: got {got:?}, want {dims:?}"))?;
        if name == "matrix_example" {
            let w = (hp.witnesses.get("dg"), hp.witnesses.get("wdg"));
            ensure(w == (Some(&WitnessModule::LambdaBar), Some(&WitnessModule::Trivial)), || {
                format!("matrix_example witnesses {w:?}")
            })?;
        }
        if name == "finite_dim_64" {
            let f = hp.flags;
            let all = [f.unital, f.contractible, f.amenable, f.biprojective, f.biflat, f.approximately_contractible];
            ensure(all.iter().all(|t| *t == Tri::True), || format!("finite_dim(64) flags {f:?}"))?;
        }
    }
    within(start, Duration::from_secs(10), "golden table")?;
    Ok(format!("7 families match in {:.2?}", start.elapsed()))
}

fn hadamard_identity() -> Check {
    const N: usize = 512;
    let ones = Coefficients::named("ones", N).map_err(|e| e.to_string())?;
    // (1 − z) Σ c_n zⁿ = 1 gives c_0 = 1 and c_n = c_{n−1}
    let mut taylor = vec![Complex64::new(1.0, 0.0); N];
    for n in 1..N {
        taylor[n] = taylor[n - 1];
    }
    ensure(ones.0 == taylor, || "ones differ from the coefficients of 1/(1 − z)".into())?;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for t in 0..10 {
        let f = Coefficients(
            (0..N)
                .map(|_| {
                    let scale = 10f64.powi(rng.gen_range(-300..300));
                    Complex64::new(rng.gen_range(-1.0..1.0) * scale, rng.gen_range(-1.0..1.0) * scale)
                })
                .collect(),
        );
        let g = hadamard_mul(&f, &ones, N).map_err(|e| e.to_string())?;
        let same = f.0.iter().zip(&g.0).all(|(a, b)| a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits());
        ensure(same, || format!("sequence {t} changed"))?;
    }
    Ok("10 sequences unchanged bit for bit at N = 512".into())
}

fn m_matrices() -> Check {
    const SIDE: u64 = 200;
    for id in ["s", "entire", "l1", "hadamard_disk(1)"] {
        let p = fam(id);
        let m = construct_m_matrices(&p).map_err(|e| format!("{id}: {e}"))?;
        let levels = p.levels_within(8);
        let lp: Vec<Vec<LogValue>> = (1..=levels)
            .map(|k| (1..=SIDE).map(|i| p.eval_weight(k, Index::Single(i)).unwrap()).collect())
            .collect();
        for i in 1..=SIDE {
            for j in 1..=SIDE {
                let (a, b) = (m.alpha(i, j).map_err(|e| e.to_string())?, m.beta(i, j).map_err(|e| e.to_string())?);
                ensure((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b) && a + b == 1.0, || {
                    format!("{id}: (M1) fails at ({i}, {j}): α = {a}, β = {b}")
                })?;
                let (la, lb) = (m.alpha_log(i, j).unwrap().ln(), m.beta_log(i, j).unwrap().ln());
                for w in &lp {
                    let (pi, pj) = (w[i as usize - 1].ln(), w[j as usize - 1].ln());
                    // α p_i p_j ≤ p_j² and β p_i p_j ≤ p_i², divided through in the log domain
                    ensure(la <= pj - pi, || format!("{id}: (M2) fails at ({i}, {j})"))?;
                    ensure(lb <= pi - pj, || format!("{id}: (M3) fails at ({i}, {j})"))?;
                }
            }
        }
        let v = check_m(&p, &m, (SIDE * SIDE) as usize, 8);
        match &v.certificate {
            Some(Certificate::Matrices { log_c, .. }) if v.is_holds() && *log_c <= 0.0 => {}
            _ => return Err(format!("{id}: check_m gives {:?} {:?}", v.outcome, v.certificate)),
        }
    }
    Ok("(M1) exact and (M2)/(M3) with C = 1, q = p on 200 × 200 for s, entire, l1, hadamard_disk(1)".into())
}

fn approximate_identity() -> Check {
    let start = Instant::now();
    let p = fam("s");
    let depth = 2000;
    let setup = ApproxSetup::new(&p, 1, depth, 8).map_err(|e| e.to_string())?;
    let a = SeqElement::from_text(IndexSet::Naturals, depth as u64, "2^(-i)").unwrap();
    let steps = build_steps(&a, &setup, 400).map_err(|e| e.to_string())?;
    let report = verify_convergence(&a, &setup, &steps).map_err(|e| e.to_string())?;
    let samples = [a.clone(), SeqElement::from_text(IndexSet::Naturals, depth as u64, "3^(-i)").unwrap()];
    let lr = verify_lawson_read(&samples, &setup, &steps).map_err(|e| e.to_string())?;
    let at = |n: u64| report.rows.iter().find(|r| r.n == n).map(|r| r.value.value()).unwrap_or(f64::NAN);
    let mut problems = Vec::new();
    if let Some(r) = report.rows.iter().find(|r| r.n >= 100 && r.value.value() > 1e-6) {
        problems.push(format!("n·‖a − a u_n‖ = {:.4} at n = {} (q = level {})", r.value.value(), r.n, report.q_level));
    }
    if !report.nonincreasing_from(10) {
        let jumps: Vec<u64> = report.increases.iter().copied().filter(|&n| n >= 10).take(5).collect();
        problems.push(format!("increases at n = {jumps:?}"));
    }
    if !(lr.diagonal_exact && lr.commutes_exact) {
        problems.push("Lawson–Read (iii)/(iv) not exact".into());
    }
    if !lr.passes_at(100, 1e-6) {
        let row = lr.rows.iter().find(|r| r.n == 100);
        let v = row.map(|r| (r.approx_identity.map(|x| x.value()), r.product.map(|x| x.value())));
        problems.push(format!("Lawson–Read (i)/(ii) at n = 100: {v:?}"));
    }
    if let Err(e) = within(start, Duration::from_secs(5), "approximate identity") {
        problems.push(e);
    }
    if problems.is_empty() {
        Ok(format!("n·‖a − a u_n‖ at n = 100 is {:e}", at(100)))
    } else {
        Err(problems.join("; "))
    }
}

/// `x ∈ λ(P)` with small tails while `x²` has a large level-1 seminorm.
fn non_algebra_witness() -> Check {
    const K_MAX: u64 = 1_100_000;
    const DEPTH: u64 = 10_000;
    let start = Instant::now();
    let p = fam("hadamard_disk(1/2)");
    let scan = non_algebra_scan(&p, K_MAX, WITNESS_SCAN_BUDGET).map_err(|e| e.to_string())?;
    // p^(l)_i = (r_l)^i with r_l = l / (2 (l + 1))
    let log_w = |l: u64, i: u64| i as f64 * (l as f64 / (2.0 * (l as f64 + 1.0))).ln();
    let mut tails = Vec::new();
    for l in 1..=4 {
        let tail = LogValue::sum(
            scan.x.entries().iter().filter(|(r, _)| *r > DEPTH).map(|(r, c)| c.log_abs * LogValue::from_log(log_w(l, *r))),
        );
        tails.push(tail);
    }
    let square = LogValue::sum(scan.x.entries().iter().map(|(r, c)| c.log_abs * c.log_abs * LogValue::from_log(log_w(1, *r))));
    ensure(tails.iter().all(|t| t.value() < 1e-6), || format!("tails {tails:?}"))?;
    ensure(square.value() > 1e6, || format!("‖x²‖ at level 1 is {:e} with k_max = {K_MAX}", square.value()))?;
    within(start, Duration::from_secs(10), "non-algebra witness")?;
    Ok(format!(
        "k_max = {K_MAX}, largest tail e^{:.1}, ‖x²‖ = {:e}, {:.2?}",
        LogValue::sup(tails.iter().copied()).ln(),
        square.value(),
        start.elapsed()
    ))
}

fn a_squared_criterion() -> Check {
    const DEPTH: usize = 1000;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let families = [("l1", fam("l1")), ("s", fam("s"))];
    for t in 0..200 {
        // √|a| is geometric (in every space here) or i^{−e/2} (in l1 iff e > 2, never in s)
        let (text, expect) = if t % 2 == 0 {
            let c: f64 = rng.gen_range(0.05..0.95);
            (format!("{c:.6}^i"), [true, true])
        } else {
            let e: f64 = if rng.gen_bool(0.5) { rng.gen_range(1.1..1.9) } else { rng.gen_range(2.1..6.0) };
            (format!("i^(-{e:.6})"), [e > 2.0, false])
        };
        let a = SeqElement::from_text(IndexSet::Naturals, DEPTH as u64, &text).map_err(|e| e.to_string())?;
        let b = square_decompose(&a);
        let bb = pointwise_mul(&b, &b).map_err(|e| e.to_string())?;
        for r in 1..=a.n() {
            let (x, y) = (a.get(r).to_complex(), bb.get(r).to_complex());
            ensure((x - y).norm() <= 1e-12 * x.norm(), || format!("{text}: b² ≠ a at rank {r}"))?;
        }
        for ((name, p), want) in families.iter().zip(expect) {
            let h = sqrt_membership(&a, p, DEPTH);
            let mb = membership(&b, p, DEPTH);
            ensure(h.is_holds() == mb.is_holds(), || format!("{text} over {name}: {:?} vs {:?}", h.outcome, mb.outcome))?;
            let want = if want { Outcome::Holds } else { Outcome::Fails };
            ensure(h.outcome == want, || format!("{text} over {name}: {:?}, expected {want:?}", h.outcome))?;
        }
    }
    let h = SeqElement::from_text(IndexSet::Naturals, DEPTH as u64, "i^(-2)").unwrap();
    let v = sqrt_membership(&h, &fam("l1"), DEPTH);
    ensure(v.is_fails(), || format!("1/i² over l1 gives {:?}", v.outcome))?;
    Ok("200 elements agree over l1 and s; 1/i² ∉ A² for l1".into())
}

fn log_criterion_consistency() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut families = 0;
    let mut tally = std::collections::BTreeMap::<String, usize>::new();
    while families < 20 {
        let c: f64 = rng.gen_range(0.2..2.0);
        let text = match rng.gen_range(0..3) {
            0 => format!("i^({c:.4}*k)"),
            1 => format!("exp({c:.4}*k*i^{:.4})", rng.gen_range(0.2..1.0)),
            _ => format!("(log(i+1)+1)^({c:.4}*k)"),
        };
        let p = WeightFamily::from_dsl(IndexSet::Naturals, Levels::Uniform(parse_weight_expr(&text).unwrap()), None)
            .map_err(|e| format!("{text}: {e}"))?;
        if !check_b(&p, 1000, 8).map_err(|e| e.to_string())?.is_holds() {
            continue;
        }
        families += 1;
        let r = idempotence_profile(&p, 1000, 8, families, 10).map_err(|e| format!("{text}: {e}"))?;
        let pair = (r.nuclear.outcome, r.log_criterion.outcome);
        ensure(!matches!(pair, (Outcome::Holds, Outcome::Fails) | (Outcome::Fails, Outcome::Holds)), || {
            format!("{text}: (i) {:?} vs (iv) {:?}", pair.0, pair.1)
        })?;
        if r.nuclear.is_holds() || r.log_criterion.is_holds() {
            let bad = r.samples.iter().find(|s| s.in_a == Outcome::Holds && s.in_a_squared == Outcome::Fails);
            ensure(bad.is_none(), || format!("{text}: sample {:?} in A but not in A²", bad.map(|s| &s.expr)))?;
        }
        ensure(r.contradictions.is_empty(), || format!("{text}: {:?}", r.contradictions))?;
        *tally.entry(format!("{:?}/{:?}", pair.0, pair.1)).or_default() += 1;
    }
    let r = idempotence_profile(&fam("l1"), 1000, 8, 0, 10).map_err(|e| e.to_string())?;
    let iii_fails = r.samples.iter().any(|s| s.in_a == Outcome::Holds && s.in_a_squared == Outcome::Fails);
    ensure(r.nuclear.is_fails() && r.log_criterion.is_fails() && iii_fails, || {
        format!("l1 row: (i) {:?}, (iv) {:?}, (iii) fails {iii_fails}", r.nuclear.outcome, r.log_criterion.outcome)
    })?;
    within(start, Duration::from_secs(30), "cross-consistency")?;
    Ok(format!("20 families, (i)/(iv) tally {tally:?}; l1 fails (i), (iii), (iv)"))
}

fn profile(u: Outcome, n: Outcome, b: Outcome, m: Outcome) -> ConditionProfile {
    let v = |o: Outcome| match o {
        Outcome::Holds => Verdict::holds(1, Certificate::Citation { text: "given".into() }),
        Outcome::Fails => Verdict::fails(1, FailureWitness { level: 1, proof_rule: ProofRule::Curated, detail: "given".into() }),
        Outcome::Unknown => Verdict::unknown(1, "given"),
    };
    ConditionProfile {
        family: "synthetic".into(),
        depth: 1,
        level_budget: 1,
        u: v(u),
        n: v(n),
        b: v(b),
        m: v(m),
        approximately_contractible: None,
    }
}

/// Expected `(weak, strong)` for a full boolean profile, or `None` when (U) holds
/// next to a failure.
fn expected_dimensions(u: bool, n: bool, b: bool, m: bool) -> Option<(Dimension, Dimension)> {
    use Dimension::*;
    if u {
        return (n && b && m).then_some((Zero, Zero));
    }
    let weak = if !b { Infinite } else if !n { Two } else { One };
    let strong = if !b { Infinite } else if !n || !m { Two } else { One };
    Some((weak, strong))
}

fn classifier_totality() -> Check {
    let o = |x: bool| if x { Outcome::Holds } else { Outcome::Fails };
    let mut rejected = 0;
    for bits in 0u8..16 {
        let f = |i: u8| bits >> i & 1 == 1;
        let cp = profile(o(f(0)), o(f(1)), o(f(2)), o(f(3)));
        let got = match (classify_weak(&cp), classify_strong(&cp)) {
            (Ok(w), Ok(s)) => Some((w.dimension, s.dimension)),
            (Err(_), Err(_)) => None,
            _ => return Err(format!("weak and strong disagree on rejecting {bits:04b}")),
        };
        let want = expected_dimensions(f(0), f(1), f(2), f(3));
        ensure(got == want, || format!("U,N,B,M = {bits:04b}: got {got:?}, want {want:?}"))?;
        rejected += usize::from(got.is_none());
    }
    let mut profiles = 0;
    for c in golden_catalog() {
        let p = c.build().map_err(|e| e.to_string())?;
        let Ok((_, hp)) = classify(&p, c.analysis.depth, c.analysis.level_budget) else { continue };
        profiles += 1;
        let v = consistency_check(&hp);
        ensure(v.is_empty(), || format!("{}: {v:?}", c.name))?;
        if hp.flags.biprojective == Tri::True {
            ensure(hp.db <= Dimension::Two, || format!("{}: biprojective with db = {}", c.name, hp.db))?;
        }
    }
    Ok(format!("16 combinations ({rejected} rejected), {profiles} catalog profiles consistent"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check); 8] = [
        ("golden classification table", golden_table),
        ("Hadamard identity", hadamard_identity),
        ("(M)-matrix construction", m_matrices),
        ("approximate identity", approximate_identity),
        ("non-algebra witness", non_algebra_witness),
        ("A² criterion", a_squared_criterion),
        ("idempotence cross-consistency", log_criterion_consistency),
        ("classifier totality", classifier_totality),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match std::panic::catch_unwind(check) {
            Ok(Ok(detail)) => println!("acceptance {}: PASS {name}: {detail}", i + 1),
            Ok(Err(detail)) => {
                failed += 1;
                println!("acceptance {}: FAIL {name}: {detail}", i + 1);
            }
            Err(_) => {
                failed += 1;
                println!("acceptance {}: FAIL {name}: panicked", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
