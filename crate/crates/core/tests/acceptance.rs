//! Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
//! failed. Runs without the libtest harness so that every criterion is
//! reported even when an earlier one fails.

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use heatcontent::derivatives::{fd_derivative, sign_pattern, DEFAULT_LEVELS};
use heatcontent::engines::{
    hc_bruteforce_pairs, hc_closed, hc_closed_interval, hc_d2_semigroup, hc_grid,
};
use heatcontent::geometry::AxisBox;
use heatcontent::inequalities::{
    build_case, compare_constants, default_t_grid, geometric_grid, normalized_heat_content,
    sharpness_compare, verify, CaseId, TolerancePolicy, Verdict,
};
use heatcontent::kernel::kernel_dt_bound_check;
use heatcontent::{Domain, Engine, GridConfig};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn standard() -> Vec<(&'static str, Domain)> {
    vec![
        ("interval1", Domain::interval(1.0).unwrap()),
        ("box12", Domain::boxed(vec![1.0, 2.0]).unwrap()),
        ("disk", Domain::ball(vec![0.0, 0.0], 1.0).unwrap()),
        ("cube", Domain::boxed(vec![1.0, 1.0, 1.0]).unwrap()),
        (
            "union",
            Domain::box_union(vec![
                AxisBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap(),
                AxisBox::new(vec![2.0, 2.0], vec![1.0, 1.0]).unwrap(),
            ])
            .unwrap(),
        ),
    ]
}

fn write_domains(dir: &Path) -> Vec<String> {
    standard()
        .into_iter()
        .map(|(id, d)| {
            let p = dir.join(format!("{id}.json"));
            fs::write(&p, d.to_json()).unwrap();
            p.to_string_lossy().into_owned()
        })
        .collect()
}

fn heatcontent(args: &[&str]) -> (i32, String, String) {
    let o = Command::new(env!("CARGO_BIN_EXE_heatcontent"))
        .args(args)
        .output()
        .unwrap();
    (
        o.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&o.stdout).into_owned(),
        String::from_utf8_lossy(&o.stderr).into_owned(),
    )
}

fn verify_all_args(files: &[String], out: &str) -> Vec<String> {
    let mut args = vec!["verify".to_string()];
    for f in files {
        args.push("--domain".into());
        args.push(f.clone());
    }
    args.extend(["--cases", "all", "--out", out].map(String::from));
    args
}

fn oracle_agreement() -> Outcome {
    let start = Instant::now();
    let r = Domain::interval(1.0).unwrap().rasterize(1e-3).unwrap();
    let mut worst = 0.0f64;
    for t in [0.01, 0.1, 1.0, 10.0] {
        let c = hc_closed_interval(1.0, t).unwrap().value;
        let b = hc_bruteforce_pairs(&r, t).unwrap().value;
        let rel = ((b - c) / c).abs();
        worst = worst.max(rel);
        ensure(rel < 1e-5, || {
            format!("t={t}: brute {b} vs closed {c}, rel {rel:.2e}")
        })?;
    }
    let took = start.elapsed();
    ensure(took < Duration::from_secs(30), || format!("took {took:?}"))?;
    Ok(format!("worst rel {worst:.2e}"))
}

fn semigroup_identity() -> Outcome {
    let mut worst = 0.0f64;
    for d in [
        Domain::interval(1.0).unwrap().rasterize(1e-3).unwrap(),
        Domain::ball(vec![0.0, 0.0], 1.0)
            .unwrap()
            .rasterize(0.05)
            .unwrap(),
    ] {
        for t in [0.05, 0.1, 0.25, 0.5, 1.0] {
            let b = hc_bruteforce_pairs(&d, 2.0 * t).unwrap();
            let g = hc_grid(&d, 2.0 * t, &GridConfig::default()).unwrap();
            let budget = b.error_bound + g.error_bound;
            worst = worst.max((b.value - g.value).abs() / budget);
            ensure(b.agrees_with(&g), || {
                format!(
                    "{d} t={t}: {} ± {} vs {} ± {}",
                    b.value, b.error_bound, g.value, g.error_bound
                )
            })?;
        }
    }
    Ok(format!("largest |diff|/budget {worst:.3}"))
}

fn transparent_second_derivative() -> Outcome {
    let mut worst = 0.0f64;
    for d in [
        Domain::interval(1.0).unwrap(),
        Domain::boxed(vec![1.0, 1.0]).unwrap(),
    ] {
        for t in [0.25, 0.5, 1.0] {
            let field = hc_d2_semigroup(&d, t, &GridConfig::default()).unwrap();
            let fd = fd_derivative(|s| hc_closed(&d, s), 2.0 * t, 2, DEFAULT_LEVELS)
                .unwrap()
                .value;
            let rel = ((field - fd) / fd).abs();
            worst = worst.max(rel);
            ensure(rel < 1e-3, || {
                format!("{d} t={t}: {field} vs {fd}, rel {rel:.2e}")
            })?;
        }
    }
    Ok(format!("worst rel {worst:.2e}"))
}

fn kernel_bound() -> Outcome {
    let mut least = f64::INFINITY;
    for m in 1..=3 {
        for ratio in [1.0, 2.0, 10.0] {
            let c = kernel_dt_bound_check(m, ratio, 1.0).map_err(|e| e.to_string())?;
            least = least.min(c.margin);
            ensure(c.margin >= 0.0, || {
                format!(
                    "m={m} t/diam²={ratio}: margin {} at r²={}",
                    c.margin, c.worst_r2
                )
            })?;
        }
    }
    Ok(format!("least margin {least:.3e}"))
}

fn inequality_suite() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let files = write_domains(dir.path());
    let out = dir.path().join("report.csv");
    let args = verify_all_args(&files, &out.to_string_lossy());
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    let start = Instant::now();
    let (code, _, stderr) = heatcontent(&args);
    let took = start.elapsed();
    let csv = fs::read_to_string(&out).unwrap_or_default();
    let mut failing: Vec<String> = Vec::new();
    for line in csv.lines().filter(|l| l.ends_with(",fail")) {
        let mut f = line.split(',');
        let key = format!("{}/{}", f.next().unwrap(), f.next().unwrap());
        if !failing.contains(&key) {
            failing.push(key);
        }
    }
    let rows = csv
        .lines()
        .filter(|l| !l.starts_with('#'))
        .count()
        .saturating_sub(1);
    ensure(took < Duration::from_secs(300), || format!("took {took:?}"))?;
    ensure(code == 0, || {
        format!(
            "exit {code}; {} failing rows of {rows}; case/domain: {}{}",
            csv.lines().filter(|l| l.ends_with(",fail")).count(),
            failing.join(" "),
            if failing.is_empty() {
                format!(" stderr: {stderr}")
            } else {
                String::new()
            }
        )
    })?;
    Ok(format!("{rows} rows in {took:.1?}"))
}

fn constants_table() -> Outcome {
    let rows = compare_constants::<f64>(1..=20);
    for r in &rows {
        ensure(r.ratio_mono > 1.0 && r.ratio_conv > 1.0, || {
            format!("m={}: ratios {} {}", r.m, r.ratio_mono, r.ratio_conv)
        })?;
    }
    let m1 = rows[0];
    ensure(m1.ratio_conv == 4.0, || {
        format!("m=1 conv ratio {}", m1.ratio_conv)
    })?;
    let expect = 0.25 * 24.0 * 0.25f64.exp();
    ensure((m1.ratio_mono - expect).abs() < 1e-9, || {
        format!("m=1 mono ratio {} vs {expect}", m1.ratio_mono)
    })?;
    Ok(format!("m=1 mono ratio {:.9}", m1.ratio_mono))
}

fn sharpness() -> Outcome {
    for m in 1..=20 {
        let v = sharpness_compare::<f64>(m);
        ensure(v.integrated_sharper == (m >= 2), || {
            format!("m={m}: {}", v.integrated_sharper)
        })?;
    }
    Ok("crossover between m=1 and m=2".into())
}

fn monotonicity_signs() -> Outcome {
    let grid = geometric_grid(1e-2, 1e2, 25);
    for d in [
        Domain::interval(1.0).unwrap(),
        Domain::boxed(vec![1.0, 2.0]).unwrap(),
    ] {
        let rep = sign_pattern(|t| hc_closed(&d, t), &grid).map_err(|e| e.to_string())?;
        ensure(rep.passed(), || format!("{d}: {:?}", rep.violations))?;
    }
    Ok("50 rows, no violations".into())
}

fn asymptotic_sandwich() -> Outcome {
    let floor = (-0.125f64).exp();
    let tol = 1e-9;
    let mut least = f64::INFINITY;
    for (id, d) in standard() {
        let engine = Engine::default_for(&d);
        let set = engine.prepare(&d).unwrap();
        let (m, vol) = (set.dimension(), set.volume());
        let grid = geometric_grid(
            2.0 * set.diameter_squared(),
            200.0 * set.diameter_squared(),
            20,
        );
        let mut prev = 0.0;
        for t in grid {
            let e = engine.heat_content(&set, t).unwrap();
            let n = normalized_heat_content(e.value, m, t, vol);
            let err = normalized_heat_content(e.error_bound, m, t, vol) + tol;
            least = least.min(n);
            ensure(n >= floor - err && n <= 1.0 + err, || {
                format!("{id} t={t}: {n} outside [{floor}, 1]")
            })?;
            ensure(n >= prev - err, || format!("{id} t={t}: {n} after {prev}"))?;
            prev = n;
        }
        ensure(1.0 - prev < 1e-2, || {
            format!("{id}: {prev} at the end of the grid")
        })?;
    }
    Ok(format!("smallest normalized value {least:.6}"))
}

fn scaling_law() -> Outcome {
    let mut worst = 0.0f64;
    for l in [vec![1.3], vec![1.0, 2.0], vec![0.7, 1.0, 1.9]] {
        let m = l.len() as i32;
        let d = Domain::boxed(l).unwrap();
        for s in [0.5, 2.0] {
            for t in [1e-3, 0.1, 1.0, 30.0] {
                let a = hc_closed(&d.scaled(s).unwrap(), s * s * t).unwrap().value;
                let b = s.powi(m) * hc_closed(&d, t).unwrap().value;
                let rel = ((a - b) / b).abs();
                worst = worst.max(rel);
                ensure(rel < 1e-6, || format!("{d} s={s} t={t}: {a} vs {b}"))?;
            }
        }
    }
    Ok(format!("worst rel {worst:.2e}"))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let files = write_domains(dir.path());
    let mut csvs = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let out = dir.path().join(name);
        let args = verify_all_args(&files, &out.to_string_lossy());
        let mut args: Vec<&str> = args.iter().map(String::as_str).collect();
        args.extend(["--seed", "24301"]);
        let (code, _, stderr) = heatcontent(&args);
        ensure(code == 0 || code == 1, || format!("exit {code}: {stderr}"))?;
        csvs.push(fs::read(&out).unwrap());
    }
    ensure(!csvs[0].is_empty() && csvs[0] == csvs[1], || {
        "CSV outputs differ".into()
    })?;
    Ok(format!("{} identical bytes", csvs[0].len()))
}

fn raster_volume_refinement() -> Outcome {
    let mut domains: Vec<(&str, Domain)> = standard();
    domains.push((
        "box(1.0217,1.4992,2.5784)",
        Domain::boxed(vec![
            1.0217314947644474,
            1.4992479322230994,
            2.5784490342075044,
        ])
        .unwrap(),
    ));
    for (id, d) in domains {
        let h0 = d.smallest_feature() / 4.0;
        let errs: Vec<f64> = (0..3)
            .map(|k| (d.rasterize(h0 / f64::from(1u32 << k)).unwrap().volume() - d.volume()).abs())
            .collect();
        ensure(errs.windows(2).all(|w| w[1] <= w[0]), || {
            format!("{id}: volume errors {errs:?}")
        })?;
    }
    Ok("volume error non-increasing over 3 dyadic levels".into())
}

fn small_time_convexity() -> Outcome {
    let policy = TolerancePolicy::default();
    let mut bad = Vec::new();
    for id in [CaseId::I010, CaseId::I011] {
        let case = build_case::<f64>(id);
        for (name, d) in standard() {
            let engine = Engine::default_for(&d);
            let set = engine.prepare(&d).unwrap();
            let grid = default_t_grid(&case, set.diameter_squared(), 20);
            let rep = verify(&case, &set, &grid, &engine, &policy).map_err(|e| e.to_string())?;
            for r in rep.rows.iter().filter(|r| r.verdict == Verdict::Fail) {
                bad.push(format!("{id}/{name} t={:.4} margin {:.3e}", r.t, r.margin));
            }
        }
    }
    ensure(bad.is_empty(), || bad.join("; "))?;
    Ok("margins non-negative on (0.05, 2]·diam²".into())
}

fn richardson_levels() -> Outcome {
    for d in [
        Domain::interval(1.0).unwrap(),
        Domain::boxed(vec![1.0, 2.0]).unwrap(),
    ] {
        for order in [1, 2] {
            for t in [0.1, 1.0, 10.0] {
                let errs: Vec<f64> = (1..=3)
                    .map(|l| {
                        fd_derivative(|s| hc_closed(&d, s), t, order, l)
                            .unwrap()
                            .error_estimate
                    })
                    .collect();
                ensure(errs.windows(2).all(|w| w[1] < w[0]), || {
                    format!("{d} order {order} t={t}: error estimates {errs:?}")
                })?;
            }
        }
    }
    Ok("error estimate decreases from 1 to 3 levels".into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 14] = [
        ("1 oracle agreement", oracle_agreement),
        ("2 semigroup identity", semigroup_identity),
        (
            "3 transparent second derivative",
            transparent_second_derivative,
        ),
        ("4 pointwise kernel bound", kernel_bound),
        (
            "5 inequality suite on the standard domains",
            inequality_suite,
        ),
        ("6 constants table", constants_table),
        ("7 sharpness crossover", sharpness),
        ("8 complete-monotonicity signs", monotonicity_signs),
        ("9 asymptotic sandwich", asymptotic_sandwich),
        ("10 scaling law", scaling_law),
        ("11 determinism", determinism),
        (
            "invariant: raster volume error monotone under refinement",
            raster_volume_refinement,
        ),
        (
            "invariant: small-time convexity bounds",
            small_time_convexity,
        ),
        ("invariant: Richardson levels 1 to 3", richardson_levels),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, f) in criteria {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .unwrap_or_else(|| "panicked".into()))
        });
        let took = start.elapsed();
        match outcome {
            Ok(detail) => println!("PASS {name} [{took:.1?}]: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name} [{took:.1?}]: {detail}");
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
