use std::path::Path;

use anyhow::Context;
use nsni_core::checks;
use nsni_core::coeffs::{self, CoefficientSet, Kind};
use nsni_core::config::RunConfig;
use nsni_core::constellation::Format;
use nsni_core::link::{GainMode, Link};
use nsni_core::mc::McEstimate;
use nsni_core::mi::mutual_information;
use nsni_core::ssfm::{self, ExperimentResult};
use nsni_core::units;
use nsni_core::variance::{self, Optimum, SnrCurve, SnrPoint};
use serde::{Deserialize, Serialize};

use crate::output::{self, Manifest};
use crate::{Outcome, Suite};

const UNBOUNDED: &str = "noiseless: compensated SNR unbounded";

/// Coefficients on disk, keyed to the link and sampling options that
/// produced them.
#[derive(Serialize, Deserialize)]
struct CoefficientCache {
    key: String,
    power_dbm: f64,
    coefficients: CoefficientSet,
}

fn cache_key(link: &Link, cfg: &RunConfig) -> anyhow::Result<String> {
    let text = serde_json::to_string(&(link, cfg.coefficient_options()))?;
    Ok(output::sha256_hex(text.as_bytes()))
}

#[derive(Serialize)]
struct CoefficientRow {
    term: String,
    value: f64,
    stderr: f64,
    relative_stderr: f64,
    above_target: bool,
}

fn coefficient_rows(c: &CoefficientSet, target: f64) -> Vec<CoefficientRow> {
    let mut terms: Vec<(String, McEstimate)> = vec![
        (Kind::X1.label(), c.x1),
        (Kind::X2.label(), c.x2),
        (Kind::X3.label(), c.x3),
    ];
    if let Some(x4) = c.x4 {
        terms.push((Kind::X4.label(), x4));
    }
    terms.push((Kind::X5.label(), c.x5));
    terms.push(("RotationRe".into(), c.rotation.re));
    terms.push(("RotationIm".into(), c.rotation.im));
    terms.push((Kind::Chi1.label(), c.chi1));
    terms.push((Kind::Chi2.label(), c.chi2));
    terms.push((Kind::Chi3.label(), c.chi3));
    for t in &c.xpm {
        let s = t.channel;
        terms.push((Kind::X1Xpm(s).label(), t.x1));
        terms.push((Kind::X3Xpm(s).label(), t.x3));
        terms.push((Kind::Chi1Xpm(s).label(), t.chi1));
        terms.push((Kind::Chi3Xpm(s).label(), t.chi3));
    }
    for f in &c.fwm {
        let (s, s2) = f.pair;
        terms.push((Kind::X1Fwm(s, s2).label(), f.x1));
        terms.push((Kind::Chi1Fwm(s, s2).label(), f.chi1));
        if let Some(x2) = f.x2 {
            terms.push((Kind::X2Fwm(s).label(), x2));
        }
        if let Some(chi2) = f.chi2 {
            terms.push((Kind::Chi2Fwm(s).label(), chi2));
        }
    }
    terms
        .into_iter()
        .map(|(term, e)| {
            let rel = e.relative_error();
            CoefficientRow { term, value: e.value, stderr: e.stderr, relative_stderr: rel, above_target: rel > target }
        })
        .collect()
}

pub fn coeffs(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let dir = output::directory(cfg)?;
    let link = cfg.to_link()?;
    let power_dbm = cfg.powers()?[0];
    let profile = link.profile(units::dbm_to_watts(power_dbm));
    let set = coeffs::compute(&link, &profile, &cfg.coefficient_options())?;
    let rows = coefficient_rows(&set, cfg.mc.stderr_target);
    for r in rows.iter().filter(|r| r.above_target) {
        eprintln!("warning: {} relative stderr {:.3} exceeds target {}", r.term, r.relative_stderr, cfg.mc.stderr_target);
    }
    output::write_csv(&dir.join("coeffs.csv"), &rows)?;
    let cache = CoefficientCache { key: cache_key(&link, cfg)?, power_dbm, coefficients: set };
    output::write_json(&dir.join("coeffs.json"), &cache)?;
    Manifest::new("coeffs", cfg).write(&dir, &["coeffs.csv", "coeffs.json"])?;
    println!("{} coefficients at {power_dbm} dBm written to {}", rows.len(), dir.display());
    Ok(Outcome::Ok)
}

fn cached_curve(cfg: &RunConfig, link: &Link, path: &Path) -> anyhow::Result<SnrCurve> {
    if link.gain_mode != GainMode::Gain {
        return Err(nsni_core::Error::Config("cached coefficients apply to constant-gain links only".into()).into());
    }
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let cache: CoefficientCache = serde_json::from_str(&text)
        .map_err(|e| nsni_core::Error::Config(format!("{}: {e}", path.display())))?;
    if cache.key != cache_key(link, cfg)? {
        return Err(nsni_core::Error::Config(format!(
            "{} was computed for a different link or sampling setup",
            path.display()
        ))
        .into());
    }
    let b = variance::brackets(&cache.coefficients, &cfg.format.moments()?, &cfg.assembly);
    let points = cfg
        .powers()?
        .into_iter()
        .map(|dbm| SnrPoint { power_dbm: dbm, budget: variance::budget(link, &link.profile(units::dbm_to_watts(dbm)), &b) })
        .collect();
    Ok(SnrCurve { points })
}

fn analytic_curve(cfg: &RunConfig, link: &Link) -> anyhow::Result<SnrCurve> {
    let moments = cfg.format.moments()?;
    Ok(variance::snr_curve(link, &cfg.powers()?, &moments, &cfg.coefficient_options(), &cfg.assembly)?)
}

#[derive(Serialize)]
struct SnrRow {
    #[serde(rename = "P_dBm")]
    power_dbm: f64,
    snr_u_db: f64,
    snr_c_db: f64,
    sigma2_ase: f64,
    sigma2_ss: f64,
    sigma2_ns: f64,
}

fn describe(label: &str, opt: Option<Optimum>) {
    match opt {
        Some(o) if o.interior => println!("{label} optimum: {:.2} dB at {:.2} dBm", o.snr_db, o.power_dbm),
        Some(o) => println!("{label} maximum on grid edge: {:.2} dB at {:.2} dBm", o.snr_db, o.power_dbm),
        None => println!("{label} optimum: none"),
    }
}

pub fn snr(cfg: &RunConfig, cache: Option<&Path>) -> anyhow::Result<Outcome> {
    let dir = output::directory(cfg)?;
    let link = cfg.to_link()?;
    let curve = match cache {
        Some(path) => cached_curve(cfg, &link, path)?,
        None => analytic_curve(cfg, &link)?,
    };
    let rows: Vec<SnrRow> = curve
        .points
        .iter()
        .map(|p| SnrRow {
            power_dbm: p.power_dbm,
            snr_u_db: p.snr_u_db(),
            snr_c_db: p.snr_c_db(),
            sigma2_ase: p.budget.sigma2_ase,
            sigma2_ss: p.budget.sigma2_ss,
            sigma2_ns: p.budget.sigma2_ns,
        })
        .collect();
    output::write_csv(&dir.join("snr.csv"), &rows)?;
    Manifest::new("snr", cfg).write(&dir, &["snr.csv"])?;
    describe("SNR_U", curve.optimum_uncompensated());
    if rows.iter().any(|r| r.snr_c_db.is_infinite()) {
        eprintln!("note: {UNBOUNDED}");
    } else {
        describe("SNR_C", curve.optimum_compensated());
    }
    Ok(Outcome::Ok)
}

#[derive(Serialize)]
struct SsfmRow {
    #[serde(rename = "P_dBm")]
    power_dbm: f64,
    snr_u_db: f64,
    snr_u_stderr_db: f64,
    snr_c_db: Option<f64>,
    snr_c_stderr_db: Option<f64>,
    sigma2_total: f64,
    sigma2_compensated: Option<f64>,
    runs: usize,
}

#[derive(Serialize)]
struct SsfmRunRow {
    #[serde(rename = "P_dBm")]
    power_dbm: f64,
    run: usize,
    data_seed: u64,
    noise_seed: u64,
    steps: usize,
    snr_u_db: f64,
    snr_c_db: Option<f64>,
}

fn simulate(cfg: &RunConfig) -> anyhow::Result<ExperimentResult> {
    Ok(ssfm::run_experiment(&cfg.to_link()?, &cfg.format, &cfg.powers()?, &cfg.ssfm)?)
}

pub fn ssfm(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let dir = output::directory(cfg)?;
    let res = simulate(cfg)?;
    let rows: Vec<SsfmRow> = res
        .summaries
        .iter()
        .map(|s| SsfmRow {
            power_dbm: s.power_dbm,
            snr_u_db: s.snr_u_db.mean,
            snr_u_stderr_db: s.snr_u_db.stderr,
            snr_c_db: s.snr_c_db.map(|c| c.mean),
            snr_c_stderr_db: s.snr_c_db.map(|c| c.stderr),
            sigma2_total: s.sigma2_total,
            sigma2_compensated: s.sigma2_compensated,
            runs: s.snr_u_db.n,
        })
        .collect();
    let runs: Vec<SsfmRunRow> = res
        .records
        .iter()
        .map(|r| SsfmRunRow {
            power_dbm: r.power_dbm,
            run: r.run,
            data_seed: r.data_seed,
            noise_seed: r.noise_seed,
            steps: r.steps,
            snr_u_db: units::linear_to_db(r.snr_u),
            snr_c_db: r.snr_c.map(units::linear_to_db),
        })
        .collect();
    output::write_csv(&dir.join("ssfm.csv"), &rows)?;
    output::write_csv(&dir.join("ssfm_runs.csv"), &runs)?;
    let mut manifest = Manifest::new("ssfm", cfg);
    manifest.samples_per_symbol = Some(res.samples_per_symbol);
    manifest.write(&dir, &["ssfm.csv", "ssfm_runs.csv"])?;
    println!(
        "{} powers × {} runs at {} samples/symbol written to {}",
        rows.len(),
        cfg.ssfm.runs,
        res.samples_per_symbol,
        dir.display()
    );
    Ok(Outcome::Ok)
}

pub fn mi_at(format: &Format, snr_db: f64) -> anyhow::Result<Outcome> {
    let bits = mutual_information(format, units::db_to_linear(snr_db))?;
    println!("{bits:.3}");
    Ok(Outcome::Ok)
}

#[derive(Serialize)]
struct MiRow {
    #[serde(rename = "P_dBm")]
    power_dbm: f64,
    snr_u_db: f64,
    snr_c_db: f64,
    mi_u_bits: f64,
    mi_c_bits: f64,
}

pub fn mi(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let dir = output::directory(cfg)?;
    let curve = analytic_curve(cfg, &cfg.to_link()?)?;
    let rows = curve
        .points
        .iter()
        .map(|p| {
            Ok(MiRow {
                power_dbm: p.power_dbm,
                snr_u_db: p.snr_u_db(),
                snr_c_db: p.snr_c_db(),
                mi_u_bits: mutual_information(&cfg.format, p.budget.snr_u())?,
                mi_c_bits: mutual_information(&cfg.format, p.budget.snr_c())?,
            })
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    output::write_csv(&dir.join("mi.csv"), &rows)?;
    Manifest::new("mi", cfg).write(&dir, &["mi.csv"])?;
    if let Some(best) = rows.iter().max_by(|a, b| a.mi_c_bits.total_cmp(&b.mi_c_bits)) {
        println!("{}: peak compensated MI {:.3} bits at {} dBm", cfg.format.name(), best.mi_c_bits, best.power_dbm);
    }
    Ok(Outcome::Ok)
}

/// One named check with its measured value and bound.
#[derive(Serialize)]
struct Check {
    suite: &'static str,
    name: &'static str,
    value: f64,
    bound: f64,
    pass: bool,
}

fn below(suite: &'static str, name: &'static str, value: f64, bound: f64) -> Check {
    Check { suite, name, value, bound, pass: value < bound }
}

pub fn validate(cfg: &RunConfig, suite: Suite, points: usize) -> anyhow::Result<Outcome> {
    let dir = output::directory(cfg)?;
    let link = cfg.to_link()?;
    let power = units::dbm_to_watts(cfg.powers()?[0]);
    let opts = cfg.coefficient_options();
    let wanted = |s: Suite| suite == Suite::All || suite == s;
    let mut checks = Vec::new();
    if wanted(Suite::ClosedForms) {
        let r = checks::closed_forms(&link, power, points, cfg.mc.seed);
        checks.push(below("closed-forms", "single", r.single, 1e-9));
        checks.push(below("closed-forms", "nested", r.nested, 1e-8));
        checks.push(below("closed-forms", "diagonal", r.diagonal, 1e-12));
    }
    if wanted(Suite::Limits) {
        let r = checks::limits(&link, power, &opts)?;
        checks.push(below("limits", "gaussian_residual", r.gaussian_residual, 1e-12));
        checks.push(below("limits", "linear_deviation", r.linear_deviation, 1e-12));
        checks.push(Check {
            suite: "limits",
            name: "noiseless_ase_and_ns",
            value: r.noiseless_ase.max(r.noiseless_ns),
            bound: 0.0,
            pass: r.noiseless_ase == 0.0 && r.noiseless_ns == 0.0,
        });
        checks.push(Check {
            suite: "limits",
            name: "noiseless_ss_finite",
            value: r.noiseless_ss,
            bound: f64::INFINITY,
            pass: r.noiseless_ss.is_finite() && r.noiseless_ss > 0.0 && r.noiseless_snr_c.is_infinite(),
        });
    }
    if wanted(Suite::Scaling) {
        let r = checks::scaling(&link, power, 10.0, &cfg.format.moments()?, &opts)?;
        checks.push(below("scaling", "ss_p2", r.ss, 1e-12));
        checks.push(below("scaling", "ns_p1", r.ns, 1e-12));
        checks.push(below("scaling", "ase_inverse_p", r.ase, 1e-12));
    }
    output::write_json(&dir.join("validate.json"), &checks)?;
    Manifest::new("validate", cfg).write(&dir, &["validate.json"])?;
    for c in &checks {
        println!("{} {}/{}: {:.3e} (bound {:.0e})", if c.pass { "PASS" } else { "FAIL" }, c.suite, c.name, c.value, c.bound);
    }
    Ok(if checks.iter().all(|c| c.pass) { Outcome::Ok } else { Outcome::Failed })
}

#[derive(Serialize)]
struct CompareRow {
    #[serde(rename = "P_dBm")]
    power_dbm: f64,
    analytic_snr_u_db: f64,
    ssfm_snr_u_db: f64,
    ssfm_snr_u_stderr_db: f64,
    delta_u_db: f64,
    in_window_u: bool,
    analytic_snr_c_db: f64,
    ssfm_snr_c_db: Option<f64>,
    ssfm_snr_c_stderr_db: Option<f64>,
    delta_c_db: Option<f64>,
    in_window_c: bool,
}

/// Whether `p` lies in [optimum − 6 dB, optimum].
fn in_window(p: f64, opt: Option<Optimum>) -> bool {
    opt.is_some_and(|o| p >= o.power_dbm - 6.0 - 1e-9 && p <= o.power_dbm + 1e-9)
}

pub fn compare(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let dir = output::directory(cfg)?;
    let link = ssfm::simulated_link(&cfg.to_link()?, &cfg.ssfm);
    let curve = analytic_curve(cfg, &link)?;
    let opt_u = curve.optimum_uncompensated();
    let opt_c = curve.optimum_compensated();
    let sim = simulate(cfg)?;
    let rows: Vec<CompareRow> = curve
        .points
        .iter()
        .zip(&sim.summaries)
        .map(|(a, s)| {
            let ssfm_c = s.snr_c_db.map(|c| c.mean);
            CompareRow {
                power_dbm: a.power_dbm,
                analytic_snr_u_db: a.snr_u_db(),
                ssfm_snr_u_db: s.snr_u_db.mean,
                ssfm_snr_u_stderr_db: s.snr_u_db.stderr,
                delta_u_db: s.snr_u_db.mean - a.snr_u_db(),
                in_window_u: in_window(a.power_dbm, opt_u),
                analytic_snr_c_db: a.snr_c_db(),
                ssfm_snr_c_db: ssfm_c,
                ssfm_snr_c_stderr_db: s.snr_c_db.map(|c| c.stderr),
                delta_c_db: ssfm_c.map(|c| c - a.snr_c_db()),
                in_window_c: ssfm_c.is_some() && in_window(a.power_dbm, opt_c),
            }
        })
        .collect();
    output::write_csv(&dir.join("compare.csv"), &rows)?;
    let mut manifest = Manifest::new("compare", cfg);
    manifest.samples_per_symbol = Some(sim.samples_per_symbol);
    manifest.write(&dir, &["compare.csv"])?;

    let tol = cfg.compare_tolerance_db;
    println!("{:>7} {:>9} {:>9} {:>7} {:>9} {:>9} {:>7}", "P_dBm", "U_ana", "U_sim", "ΔU", "C_ana", "C_sim", "ΔC");
    let mut failures = 0;
    for r in &rows {
        let mut mark = |window: bool, d: Option<f64>| match d {
            Some(d) if window && d.abs() > tol => {
                failures += 1;
                "!"
            }
            _ if window => "*",
            _ => " ",
        };
        let mu = mark(r.in_window_u, Some(r.delta_u_db));
        let mc = mark(r.in_window_c, r.delta_c_db);
        let opt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.2}"));
        println!(
            "{:>7.2} {:>9.2} {:>9.2} {:>6.2}{mu} {:>9.2} {:>9} {:>6}{mc}",
            r.power_dbm,
            r.analytic_snr_u_db,
            r.ssfm_snr_u_db,
            r.delta_u_db,
            r.analytic_snr_c_db,
            opt(r.ssfm_snr_c_db),
            opt(r.delta_c_db)
        );
    }
    for (label, o) in [("SNR_U", opt_u), ("SNR_C", opt_c)] {
        if o.is_some_and(|o| !o.interior) {
            eprintln!("note: analytic {label} maximum lies on the edge of the power grid");
        }
    }
    if rows.iter().any(|r| r.analytic_snr_c_db.is_infinite()) {
        eprintln!("note: {UNBOUNDED}");
    }
    println!("* inside [optimum − 6 dB, optimum]; ! outside tolerance {tol} dB");
    if failures > 0 {
        println!("FAIL: {failures} point(s) exceed {tol} dB");
        Ok(Outcome::Failed)
    } else {
        println!("PASS");
        Ok(Outcome::Ok)
    }
}
