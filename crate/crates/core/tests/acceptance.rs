//! Acceptance run: one PASS/FAIL line per criterion, with the measured values.
//!
//! Criteria that miss their bands are reported as FAIL and left that way. The
//! process exits 0 so the rest of the workspace suite still runs; set
//! `SHELTERQ_ACCEPTANCE_STRICT=1` to exit 1 when any criterion fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shelterq::desim::ScenarioConfig;
use shelterq::erlang::{erlang_a_metrics, p_ab_given_wait_closed_form, SystemParams};
use shelterq::experiments::{run_replications, sweep, verify_traces, Replications, SweepParameter, SweepSpec};
use shelterq::population::{
    class_arrival_rates, group_of, group_shares, sample_profile, AttributeModel, CombinationTable, GroupingMode,
};
use shelterq::staffing::{staff_ed, staff_qd, staff_qed, QosTargets};
use shelterq::thresholds::{
    calibrate_thresholds_by_simulation, cumulative_loads, thresholds_for_wait_caps, CalibrationCaps,
    DegeneracyHandling, ThresholdPolicy,
};

const SEED: u64 = 20240601;
const REPS: usize = 100;

struct Check {
    ok: bool,
    notes: Vec<String>,
}

impl Check {
    fn new() -> Check {
        Check { ok: true, notes: Vec::new() }
    }

    fn expect(&mut self, ok: bool, note: String) {
        self.ok &= ok;
        self.notes.push(format!("{}{note}", if ok { "" } else { "!" }));
    }

    fn within(&mut self, name: &str, got: f64, target: f64, tol: f64) {
        self.expect((got - target).abs() <= tol, format!("{name}={} (want {}±{})", num(got), num(target), num(tol)));
    }

    fn at_most(&mut self, name: &str, got: f64, limit: f64) {
        self.expect(got <= limit, format!("{name}={} (want <= {})", num(got), num(limit)));
    }

    fn faster(&mut self, name: &str, took: Duration, limit: Duration) {
        self.expect(took < limit, format!("{name} {:.3?} (limit {limit:?})", took));
    }
}

fn num(x: f64) -> String {
    if x != 0.0 && x.abs() < 1e-3 {
        format!("{x:.2e}")
    } else {
        format!("{:.4}", x).trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn baseline() -> SystemParams {
    SystemParams::new(4.44, 0.016, 0.5).unwrap()
}

fn shelter(beds: u32, k_f: u32) -> ScenarioConfig {
    ScenarioConfig::shelter(baseline(), beds).with_policy(ThresholdPolicy::lowest_class_only(6, k_f))
}

fn reps(config: &ScenarioConfig) -> Replications {
    run_replications(config, REPS, SEED).unwrap()
}

fn pct(r: &Replications, metric: &str) -> f64 {
    100.0 * r.summary.mean(metric)
}

fn c1() -> Check {
    let mut c = Check::new();
    let p = SystemParams::new(1.0, 1.0, 1.0).unwrap();
    let e = (-1.0f64).exp();
    let m = erlang_a_metrics(1, &p).unwrap();
    c.within("pAb", m.p_ab, e, 1e-9);
    c.within("pWait", m.p_wait, 1.0 - e, 1e-9);
    let took = (0..20)
        .map(|_| {
            let t = Instant::now();
            std::hint::black_box(erlang_a_metrics(1, &p).unwrap());
            t.elapsed()
        })
        .min()
        .unwrap();
    c.faster("call", took, Duration::from_millis(1));
    c
}

fn c2() -> Check {
    let mut c = Check::new();
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut points = 0;
    // 8 server counts x 5 loads x 5 patience ratios
    for &n in &[1u32, 3, 10, 30, 75, 150, 270, 400] {
        for &rho in &[0.2, 0.5, 0.8, 1.0, 1.3] {
            for &ratio in &[0.5, 2.0, 5.0, 20.0, 50.0] {
                let mu = 1.0;
                let p = SystemParams::new(rho * n as f64 * mu, mu, ratio * mu).unwrap();
                let chain = erlang_a_metrics(n, &p).unwrap().p_ab_given_wait;
                let closed = p_ab_given_wait_closed_form(n, &p).unwrap();
                worst = worst.max(((chain - closed) / chain).abs());
                points += 1;
            }
        }
    }
    c.expect(points == 200, format!("{points} points"));
    c.at_most("max rel diff", worst, 1e-8);
    c.faster("grid", start.elapsed(), Duration::from_secs(5));
    c
}

fn c3() -> Check {
    let mut c = Check::new();
    let p = baseline();
    let r = p.offered_load();
    let qed = staff_qed(0.04, &p).unwrap().beds;
    c.expect((265..=280).contains(&qed), format!("QED N={qed} (want 265..=280)"));
    let qd = staff_qd(&p, 0.04).unwrap().beds;
    let ed = staff_ed(&p, 0.04).unwrap().beds;
    // 277.5 * 1.04 = 288.6 and 277.5 * 0.96 = 266.4
    c.expect(qd == 289 && (qd as f64) >= r * 1.04, format!("QD N={qd} (want 289)"));
    c.expect(ed == 267 && (ed as f64) >= r * 0.96, format!("ED N={ed} (want 267)"));
    c
}

fn c4() -> Check {
    let mut c = Check::new();
    let start = Instant::now();
    let r = reps(&shelter(164, 0));
    c.within("abandonment%", pct(&r, "abandonment"), 31.16, 3.0);
    c.within("utilization%", pct(&r, "utilization"), 99.26, 1.5);
    c.within("abandoners", r.summary.mean("abandoned"), 498.0, 50.0);
    c.faster("100 reps", start.elapsed(), Duration::from_secs(60));
    c
}

fn c5() -> Check {
    let mut c = Check::new();
    let r = reps(&shelter(270, 0));
    c.within("abandonment%", pct(&r, "abandonment"), 2.46, 1.0);
    c.within("utilization%", pct(&r, "utilization"), 86.21, 3.0);
    c.within("abandoners", r.summary.mean("abandoned"), 39.0, 12.0);
    c
}

fn high_risk_checks(c: &mut Check, r: &Replications) {
    c.at_most("high-risk abandoners", r.summary.mean("high_risk_abandoned"), 3.0);
    for label in ["A", "B", "C", "D", "E"] {
        c.at_most(&format!("wait[{label}]"), r.summary.mean(&format!("mean_wait[{label}]")), 0.02);
    }
}

fn c6() -> Check {
    let mut c = Check::new();
    let r = reps(&shelter(270, 25));
    c.within("abandonment%", pct(&r, "abandonment"), 2.47, 1.0);
    c.within("abandonment[F]%", pct(&r, "abandonment[F]"), 19.75, 4.0);
    high_risk_checks(&mut c, &r);
    c
}

fn c7() -> Check {
    let mut c = Check::new();
    let ed = reps(&shelter(250, 51));
    c.within("ED abandonment%", pct(&ed, "abandonment"), 4.77, 1.5);
    c.within("ED utilization%", pct(&ed, "utilization"), 91.03, 3.0);
    let qd = reps(&shelter(298, 0));
    c.at_most("QD abandonment%", pct(&qd, "abandonment"), 0.5);
    c.at_most("QD wait", qd.summary.mean("mean_wait"), 0.02);
    c
}

fn monotone(values: &[f64], increasing: bool) -> bool {
    values.windows(2).all(|w| if increasing { w[1] >= w[0] } else { w[1] <= w[0] })
}

fn c8() -> Check {
    let mut c = Check::new();
    let base = shelter(270, 25);
    let series = |parameter, values: Vec<f64>| {
        let points = sweep(&base, &SweepSpec { parameter, values }, REPS, SEED).unwrap();
        let col = |m: &str| points.iter().map(|p| p.replications.summary.mean(m)).collect::<Vec<_>>();
        (col("abandonment"), col("utilization"), col("mean_wait"))
    };

    let (ab, util, wait) = series(SweepParameter::Lambda, vec![3.55, 4.0, 4.44, 4.88, 5.33]);
    c.within("lambda=5.33 abandonment%", 100.0 * ab[4], 8.0, 2.0);
    c.within("lambda=5.33 utilization%", 100.0 * util[4], 95.0, 2.0);
    c.expect(monotone(&ab, true) && monotone(&util, true) && monotone(&wait, true), "lambda monotone".into());

    let (ab, util, wait) = series(SweepParameter::Mu, vec![0.014, 0.016, 0.018, 0.021]);
    c.at_most("mu=0.014 utilization%", 100.0 * util[0], 90.0 - f64::EPSILON);
    c.expect(monotone(&ab, false) && monotone(&util, false) && monotone(&wait, false), "mu monotone".into());

    let (ab, util, wait) = series(SweepParameter::Theta, vec![0.0, 0.33, 0.5, 1.0]);
    c.within("theta=0 wait", wait[0], 2.5, 0.5);
    c.expect(monotone(&ab, true) && monotone(&util, false) && monotone(&wait, false), "theta monotone".into());
    c
}

fn c9() -> Check {
    let mut c = Check::new();
    let model = AttributeModel::default();
    let table = CombinationTable::builtin();
    let mut seen = BTreeMap::new();
    for row in table.rows() {
        *seen.entry(row.attributes).or_insert(0) += 1;
    }
    let all_once = seen.len() == 32 && seen.values().all(|&k| k == 1);
    let agrees = table.rows().iter().all(|row| group_of(row.attributes) == row.group);
    c.expect(all_once && agrees, format!("{} rows, each combination once and mapped as listed", table.rows().len()));

    // exact shares summed independently from the rows
    let mut exact = [0.0; 6];
    for row in table.rows() {
        exact[row.group.index()] += model.probability_of(row.attributes);
    }
    let printed = [20.0, 24.0, 16.8, 5.29, 21.56, 12.35];
    let library = group_shares(&model, GroupingMode::CombinationTable);
    let table_gap = (0..6).map(|j| (100.0 * exact[j] - printed[j]).abs()).fold(0.0, f64::max);
    let library_gap = (0..6).map(|j| (library[j] - exact[j]).abs()).fold(0.0, f64::max);
    c.at_most("table share gap pp", table_gap, 0.005);
    c.at_most("library share gap", library_gap, 1e-12);

    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut counts = [0u32; 6];
    let draws = 1_000_000;
    for _ in 0..draws {
        counts[sample_profile(&model, &mut rng).group.index()] += 1;
    }
    let worst = (0..6).map(|j| (100.0 * counts[j] as f64 / draws as f64 - printed[j]).abs()).fold(0.0, f64::max);
    c.at_most("sampled share gap pp", worst, 0.5);

    let rates = class_arrival_rates(4.44, &model).rates;
    let rounded = [0.89, 1.07, 0.75, 0.24, 0.96, 0.55];
    let gap = rates.iter().zip(rounded).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    c.at_most("rate gap", gap, 0.02);
    c
}

fn c10() -> Check {
    let mut c = Check::new();
    let p = baseline();
    let qos = QosTargets::shelter_baseline();
    let mix = class_arrival_rates(p.lambda, &AttributeModel::default());
    let analytic = |beds: u32| {
        let loads = cumulative_loads(&mix.rates, beds, p.mu).unwrap();
        let pw = erlang_a_metrics(beds, &p).unwrap().p_wait;
        thresholds_for_wait_caps(&loads, &qos.per_class_wait_caps, pw, DegeneracyHandling::Clamp).unwrap()
    };
    let qed = analytic(270);
    let k = qed.policy.thresholds().to_vec();
    c.expect(k[..5].iter().all(|&x| x == 0), format!("analytic K={k:?} degenerate={}", qed.analytically_degenerate));

    let caps = CalibrationCaps::wait_caps(&qos);
    let calibrate = |beds: u32| {
        calibrate_thresholds_by_simulation(&ScenarioConfig::shelter(p, beds), &caps, 100, REPS, SEED).unwrap()
    };
    let at_qed = calibrate(270);
    let k_qed = at_qed.policy.max_threshold();
    c.expect((15..=40).contains(&k_qed), format!("calibrated K_F={k_qed} (want 15..=40)"));
    let r = reps(&ScenarioConfig::shelter(p, 270).with_policy(at_qed.policy.clone()));
    c.at_most("high-risk abandoners", r.summary.mean("high_risk_abandoned"), 3.0);
    let k_ed = calibrate(250).policy.max_threshold();
    c.expect(k_ed > k_qed, format!("calibrated K_F(ED)={k_ed} > K_F(QED)={k_qed}"));
    let analytic_ed = analytic(250).policy.max_threshold();
    c.notes.push(format!("analytic K_F(ED)={analytic_ed} vs K_F(QED)={}", qed.policy.max_threshold()));
    c
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn run_cli(out: &Path, args: &[&str]) -> i32 {
    let mut argv = vec!["shelterq".to_string(), "--out-dir".into(), out.display().to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    shelterq::cli::main_with(argv, &mut Vec::new(), &mut Vec::new())
}

fn read_tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                files.insert(path.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&path).unwrap());
            }
        }
    }
    files
}

fn c11() -> Check {
    let mut c = Check::new();
    let comparison = scenario("comparison.toml").display().to_string();
    let baseline = scenario("baseline.toml").display().to_string();
    let sweep = scenario("sweep_theta.toml").display().to_string();
    let invocations: Vec<Vec<&str>> = vec![
        vec!["analyze", &baseline],
        vec!["staff", &baseline],
        vec!["thresholds", &baseline],
        vec!["simulate", &comparison],
        vec!["--format", "csv", "simulate", &baseline],
        vec!["--reps", "20", "sweep", &sweep],
    ];
    for args in invocations {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let codes = (run_cli(a.path(), &args), run_cli(b.path(), &args));
        let (ta, tb) = (read_tree(a.path()), read_tree(b.path()));
        let name: Vec<&str> = args.iter().map(|s| Path::new(s).file_name().unwrap().to_str().unwrap()).collect();
        let name = name.join(" ");
        c.expect(
            codes == (0, 0) && !ta.is_empty() && ta == tb,
            format!("{name}: {} files identical", ta.len()),
        );
    }
    c
}

fn c12() -> Check {
    let mut c = Check::new();
    for (name, beds, k_f) in [("current", 164, 0), ("expanded", 270, 0), ("base", 270, 25), ("ED", 250, 51), ("QD", 298, 0)] {
        let res = verify_traces(&shelter(beds, k_f), REPS, SEED, 0);
        c.expect(res.is_ok(), format!("{name}: {}", res.map(|_| format!("{REPS} traces ok")).unwrap_or_else(|e| e.to_string())));
    }
    c
}

fn main() {
    type Criterion = (&'static str, fn() -> Check);
    let criteria: [Criterion; 12] = [
        ("closed-form M/M/1+M oracle", c1),
        ("closed form vs stationary chain", c2),
        ("QED/QD/ED staffing", c3),
        ("current system, 164 beds", c4),
        ("expanded model, 270 beds", c5),
        ("base model, K_F=25", c6),
        ("ED and QD regimes", c7),
        ("sensitivity sweeps", c8),
        ("population model", c9),
        ("threshold policy", c10),
        ("CLI determinism", c11),
        ("trace verification", c12),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let check = f();
        if !check.ok {
            failed += 1;
        }
        println!(
            "criterion {:>2} {}: {name}  [{}]",
            i + 1,
            if check.ok { "PASS" } else { "FAIL" },
            check.notes.join("; ")
        );
    }
    println!("{} of {} criteria pass ('!' marks the failing measurements)", criteria.len() - failed, criteria.len());
    if failed > 0 && std::env::var_os("SHELTERQ_ACCEPTANCE_STRICT").is_some_and(|v| v == "1") {
        std::process::exit(1);
    }
}
