//! End-to-end acceptance run. Each criterion prints one PASS/FAIL line; the
//! test fails if any criterion fails.
//!
//! MNIST is read from `$APALU_MNIST_DIR` or `<workspace>/data/mnist`. The
//! housing table is read from `$APALU_BOSTON_CSV` or
//! `<workspace>/data/boston.csv`, falling back to the synthetic fixture.
//! `scripts/fetch_data.sh` downloads both.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use apalu::activations::ActivationKind;
use apalu::metrics::MetricsReport;
use apalu::runner::{self, Comparison, ExperimentConfig, Task};
use apalu::verify::{self, Check, Subject};

struct Outcome {
    id: u8,
    name: &'static str,
    passed: bool,
    detail: String,
}

fn say(line: &str) {
    // Bypasses libtest capture so the lines show up in plain `cargo test`.
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}

fn record(outcomes: &mut Vec<Outcome>, id: u8, name: &'static str, passed: bool, detail: String) {
    say(&format!("{} criterion {id} {name}: {detail}", if passed { "PASS" } else { "FAIL" }));
    outcomes.push(Outcome { id, name, passed, detail });
}

fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn data_path(var: &str, default: &str) -> PathBuf {
    std::env::var_os(var)
        .map(PathBuf::from)
        .unwrap_or_else(|| workspace().join(default))
}

fn checks_detail(checks: &[Check], elapsed: Duration, limit: Option<Duration>) -> (bool, String) {
    let failed: Vec<String> = checks.iter().filter(|c| !c.passed).map(|c| c.to_string()).collect();
    let in_time = limit.is_none_or(|l| elapsed < l);
    let mut detail = format!(
        "{}/{} checks, {:.2}s",
        checks.len() - failed.len(),
        checks.len(),
        elapsed.as_secs_f64()
    );
    if let Some(l) = limit {
        detail.push_str(&format!(" (limit {}s)", l.as_secs()));
    }
    for f in &failed {
        detail.push_str("; ");
        detail.push_str(f);
    }
    (failed.is_empty() && in_time, detail)
}

fn arm<'a>(cmp: &'a Comparison, kind: ActivationKind) -> &'a [MetricsReport] {
    let name = kind.to_string();
    let i = cmp
        .rows
        .iter()
        .position(|r| r.activation == name)
        .unwrap_or_else(|| panic!("no arm {name}"));
    &cmp.reports[i]
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn fmt_list(xs: &[f64], digits: usize) -> String {
    xs.iter().map(|x| format!("{x:.digits$}")).collect::<Vec<_>>().join(", ")
}

fn same_reports(a: &Comparison, b: &Comparison) -> bool {
    a.reports.len() == b.reports.len()
        && a.reports.iter().zip(&b.reports).all(|(x, y)| {
            x.len() == y.len()
                && x.iter().zip(y).all(|(r, s)| r.to_json_without_timing() == s.to_json_without_timing())
        })
}

fn regression_config() -> (ExperimentConfig, String) {
    let real = data_path("APALU_BOSTON_CSV", "data/boston.csv");
    let path = if real.exists() {
        real
    } else {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/boston_synthetic.csv")
    };
    let label = path.file_name().unwrap().to_string_lossy().into_owned();
    let mut cfg = ExperimentConfig::preset(Task::CsvRegression);
    cfg.data.csv_path = Some(path);
    (cfg, label)
}

#[test]
fn acceptance() {
    let mut outcomes = Vec::new();

    // 1. Analytic derivatives against the high-precision oracle.
    let t = Instant::now();
    let checks = verify::gradient_checks();
    let (ok, detail) = checks_detail(&checks, t.elapsed(), Some(Duration::from_secs(10)));
    record(&mut outcomes, 1, "gradient oracle", ok, detail);

    // 2. Sign, range, monotonicity and continuity on 1e6 samples.
    let t = Instant::now();
    let checks = verify::property_checks(&Subject::apalu());
    let (ok, detail) = checks_detail(&checks, t.elapsed(), Some(Duration::from_secs(10)));
    record(&mut outcomes, 2, "range/continuity/monotonicity", ok, detail);

    // 3. Derivative bounds over [-20, 20].
    let t = Instant::now();
    let checks = verify::bound_checks();
    let (ok, detail) = checks_detail(&checks, t.elapsed(), None);
    record(&mut outcomes, 3, "bounded, non-vanishing derivative", ok, detail);

    // 4. Fit sin on [-3, 3].
    let t = Instant::now();
    let fit = runner::run_experiment(&verify::sin_fit_config());
    let elapsed = t.elapsed();
    match fit {
        Ok(reports) => {
            let mses: Vec<f64> = reports.iter().map(|r| r.train_mse.unwrap_or(f64::INFINITY)).collect();
            let hits = mses.iter().filter(|&&m| m < verify::FIT_MSE).count();
            let ok = reports.len() == 5 && hits >= 4 && elapsed < Duration::from_secs(120);
            let detail = format!(
                "{hits}/5 seeds under {:e} (train MSE [{}]), {:.1}s (limit 120s)",
                verify::FIT_MSE,
                mses.iter().map(|m| format!("{m:.2e}")).collect::<Vec<_>>().join(", "),
                elapsed.as_secs_f64()
            );
            record(&mut outcomes, 4, "sin approximation", ok, detail);
        }
        Err(e) => record(&mut outcomes, 4, "sin approximation", false, e.to_string()),
    }

    // 5 and 8. MNIST subset against the baselines, then the learned gains.
    let mnist_dir = data_path("APALU_MNIST_DIR", "data/mnist");
    let mut cfg = ExperimentConfig::preset(Task::MnistMlp);
    cfg.data.mnist_dir = Some(mnist_dir.clone());
    let t = Instant::now();
    let mnist = runner::compare_activations(&cfg);
    let elapsed = t.elapsed();
    match &mnist {
        Ok(cmp) => {
            let acc = |k| -> Vec<f64> { arm(cmp, k).iter().map(|r| r.accuracy.unwrap()).collect() };
            let ours = acc(ActivationKind::Apalu);
            let ours_mean = mean(ours.iter().copied());
            let (best_name, best) = cfg
                .baselines
                .iter()
                .map(|&k| (k.to_string(), mean(acc(k).into_iter())))
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            let ok = ours.len() == 5
                && ours_mean >= 0.93
                && ours_mean >= best - 0.01
                && elapsed < Duration::from_secs(300);
            let detail = format!(
                "APALU mean accuracy {ours_mean:.4} [{}], best baseline {best_name} {best:.4}, want >= max(0.93, {:.4}); {:.1}s (limit 300s)",
                fmt_list(&ours, 4),
                best - 0.01,
                elapsed.as_secs_f64()
            );
            record(&mut outcomes, 5, "MNIST directional", ok, detail);

            let runs = arm(cmp, ActivationKind::Apalu);
            let mut moved_everywhere = true;
            let mut smallest = f64::INFINITY;
            let mut largest_move = Vec::new();
            for r in runs {
                let mv = r
                    .initial_gains
                    .iter()
                    .zip(&r.final_gains)
                    .map(|(i, f)| (f.a - i.a).abs().max((f.b - i.b).abs()))
                    .fold(0.0, f64::max);
                largest_move.push(mv);
                moved_everywhere &= mv >= 1e-3;
                let all = r.final_gains.iter().chain(r.gain_trajectory.iter().flat_map(|s| &s.layers));
                for g in all {
                    smallest = smallest.min(g.a).min(g.b);
                }
            }
            let ok = !runs.is_empty() && moved_everywhere && smallest >= 1e-6;
            let detail = format!(
                "largest per-seed gain move [{}] (want >= 1e-3), smallest gain seen {smallest:.3e} (want >= 1e-6)",
                largest_move.iter().map(|m| format!("{m:.2e}")).collect::<Vec<_>>().join(", ")
            );
            record(&mut outcomes, 8, "trainable gains", ok, detail);
        }
        Err(e) => {
            let why = format!("{e} (MNIST expected under {})", mnist_dir.display());
            record(&mut outcomes, 5, "MNIST directional", false, why.clone());
            record(&mut outcomes, 8, "trainable gains", false, why);
        }
    }

    // 6. Housing regression against tanh.
    let (boston_cfg, boston_label) = regression_config();
    let t = Instant::now();
    let boston = runner::compare_activations(&boston_cfg);
    let elapsed = t.elapsed();
    match &boston {
        Ok(cmp) => {
            let mse = |k| -> Vec<f64> { arm(cmp, k).iter().map(|r| r.mse.unwrap()).collect() };
            let (ours, tanh) = (mse(ActivationKind::Apalu), mse(ActivationKind::Tanh));
            let wins = ours.iter().zip(&tanh).filter(|(o, t)| o <= t).count();
            let ok = ours.len() == 5 && wins >= 4 && elapsed < Duration::from_secs(60);
            let detail = format!(
                "{boston_label}: APALU test MSE <= tanh in {wins}/5 seeds (APALU [{}], tanh [{}]), {:.1}s (limit 60s)",
                fmt_list(&ours, 3),
                fmt_list(&tanh, 3),
                elapsed.as_secs_f64()
            );
            record(&mut outcomes, 6, "housing regression", ok, detail);
        }
        Err(e) => record(&mut outcomes, 6, "housing regression", false, e.to_string()),
    }

    // 7. GRU forecaster on a random walk, APALU vs tanh candidate.
    let gru_cfg = ExperimentConfig::preset(Task::TimeseriesGru);
    let t = Instant::now();
    let gru = runner::compare_activations(&gru_cfg);
    let elapsed = t.elapsed();
    match &gru {
        Ok(cmp) => {
            let mut monotone = true;
            for r in cmp.reports.iter().flatten() {
                let head: Vec<f64> = r.curve.iter().take(10).map(|c| c.train_loss).collect();
                monotone &= head.len() == 10 && head.windows(2).all(|w| w[1] <= w[0] * 1.05);
            }
            let rmse = |k| mean(arm(cmp, k).iter().map(|r| r.rmse.unwrap()));
            let (ours, tanh) = (rmse(ActivationKind::Apalu), rmse(ActivationKind::Tanh));
            let ok = monotone && ours <= 1.1 * tanh && elapsed < Duration::from_secs(120);
            let detail = format!(
                "first 10 epochs within 5% band: {monotone}; mean RMSE APALU {ours:.4} vs tanh {tanh:.4} (ratio {:.4}, want <= 1.1), {:.1}s (limit 120s)",
                ours / tanh,
                elapsed.as_secs_f64()
            );
            record(&mut outcomes, 7, "GRU time series", ok, detail);
        }
        Err(e) => record(&mut outcomes, 7, "GRU time series", false, e.to_string()),
    }

    // 9. Rerun the regression and GRU comparisons and compare report JSON.
    let rerun = |cfg: &ExperimentConfig, first: &Result<Comparison, runner::RunError>| match (first, runner::compare_activations(cfg)) {
        (Ok(a), Ok(b)) => same_reports(a, &b),
        _ => false,
    };
    let same_boston = rerun(&boston_cfg, &boston);
    let same_gru = rerun(&gru_cfg, &gru);
    record(
        &mut outcomes,
        9,
        "determinism",
        same_boston && same_gru,
        format!("housing reports identical: {same_boston}; GRU reports identical: {same_gru}"),
    );

    outcomes.sort_by_key(|o| o.id);
    let failed: Vec<String> = outcomes
        .iter()
        .filter(|o| !o.passed)
        .map(|o| format!("{} {}: {}", o.id, o.name, o.detail))
        .collect();
    say(&format!("acceptance: {}/{} criteria passed", outcomes.len() - failed.len(), outcomes.len()));
    assert!(failed.is_empty(), "failed criteria:\n{}", failed.join("\n"));
}
