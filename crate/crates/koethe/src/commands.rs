//! Each command returns the text for stdout and writes its artifacts under `out`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use koethe_core::approx::{build_steps, idempotence_profile, non_idempotent_witness, verify_convergence, ApproxSetup, IdempotenceReport};
use koethe_core::catalog::{file_stem, Analysis, SpaceConfig};
use koethe_core::classifier::{check_m_constructed, classify, consistency_check, Classification, HomologicalProfile};
use koethe_core::conditions::{check_b, check_log_criterion, check_n, check_u, outcomes, ConditionProfile};
use koethe_core::relations::non_algebra_witness;
use koethe_core::sequences::{hadamard_mul, Coefficients, SeqElement};
use koethe_core::verdict::Verdict;
use serde::Serialize;

use crate::config::build_validated;
use crate::csvio;
use crate::error::CliError;

/// Number of (iii)-samples in the idempotence section of a profile.
pub const IDEMPOTENCE_SAMPLES: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Clone, Debug)]
pub struct Settings {
    pub depth: Option<usize>,
    pub levels: Option<u64>,
    pub epsilon: Option<f64>,
    pub out: PathBuf,
    pub format: Format,
    pub seed: u64,
}

impl Settings {
    pub fn new(out: impl Into<PathBuf>) -> Settings {
        Settings { depth: None, levels: None, epsilon: None, out: out.into(), format: Format::Json, seed: 0 }
    }

    /// Command-line values override the config's analysis block.
    pub fn analysis(&self, config: &SpaceConfig) -> Analysis {
        Analysis {
            depth: self.depth.unwrap_or(config.analysis.depth),
            level_budget: self.levels.unwrap_or(config.analysis.level_budget),
            epsilon: self.epsilon.unwrap_or(config.analysis.epsilon),
        }
    }

    fn write(&self, file: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        fs::create_dir_all(&self.out)?;
        let path = self.out.join(file);
        fs::write(&path, bytes)?;
        Ok(path)
    }
}

fn to_json(v: &impl Serialize) -> Result<Vec<u8>, CliError> {
    let mut s = serde_json::to_vec_pretty(v)?;
    s.push(b'\n');
    Ok(s)
}

pub fn validate(config: &SpaceConfig, settings: &Settings) -> Result<String, CliError> {
    let a = settings.analysis(config);
    let p = build_validated(config, a.depth)?;
    let levels = p.level_count().map_or("infinitely many".to_string(), |n| n.to_string());
    Ok(format!("{}: valid ({} levels, family {})\n", config.name, levels, p.name()))
}

#[derive(Serialize)]
struct Cases {
    strong: &'static str,
    weak: &'static str,
}

/// The document written to `<name>.profile.json`.
#[derive(Serialize)]
struct ProfileDoc<'a> {
    name: &'a str,
    homological: &'a HomologicalProfile,
    conditions: &'a ConditionProfile,
    cases: Cases,
    consistency: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    idempotence: Option<IdempotenceReport>,
}

fn case_line(label: &str, c: &Classification) -> String {
    format!("{label}: {} ({})\n", c.dimension, c.case.text())
}

pub fn classify_cmd(config: &SpaceConfig, settings: &Settings) -> Result<String, CliError> {
    let a = settings.analysis(config);
    let p = build_validated(config, a.depth)?;
    let (cp, hp) = classify(&p, a.depth, a.level_budget)?;
    let violations = consistency_check(&hp);
    // only families with 1 ≤ p_n ≤ p_{n+1} and (B) qualify
    let idempotence = idempotence_profile(&p, a.depth, a.level_budget, settings.seed, IDEMPOTENCE_SAMPLES).ok();
    let doc = ProfileDoc {
        name: &config.name,
        homological: &hp,
        conditions: &cp,
        cases: Cases { strong: hp.strong.case.text(), weak: hp.weak.case.text() },
        consistency: violations.clone(),
        idempotence,
    };
    let path = match settings.format {
        Format::Json => settings.write(&format!("{}.profile.json", config.name), &to_json(&doc)?)?,
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.serialize(ProfileRow::new(&config.name, &hp, &cp))?;
            let bytes = w.into_inner().map_err(|e| CliError::Config(e.to_string()))?;
            settings.write(&format!("{}.profile.csv", config.name), &bytes)?
        }
    };
    if !violations.is_empty() {
        return Err(CliError::Consistency(violations));
    }
    let mut out = hp.report();
    if !out.ends_with('\n') {
        out.push('\n');
    }
    out += &case_line("strong", &hp.strong);
    out += &case_line("weak", &hp.weak);
    out += &format!("wrote {}\n", path.display());
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum ConditionArg {
    #[value(name = "U")]
    U,
    #[value(name = "N")]
    N,
    #[value(name = "B")]
    B,
    #[value(name = "M")]
    M,
    #[value(name = "log")]
    Log,
}

impl ConditionArg {
    fn label(self) -> &'static str {
        match self {
            ConditionArg::U => "U",
            ConditionArg::N => "N",
            ConditionArg::B => "B",
            ConditionArg::M => "M",
            ConditionArg::Log => "log",
        }
    }
}

pub fn check_cmd(config: &SpaceConfig, cond: ConditionArg, settings: &Settings) -> Result<String, CliError> {
    let a = settings.analysis(config);
    let p = build_validated(config, a.depth)?;
    let v: Verdict = match cond {
        ConditionArg::U => check_u(&p, a.depth),
        ConditionArg::N => check_n(&p, a.depth, a.level_budget),
        ConditionArg::B => check_b(&p, a.depth, a.level_budget)?,
        ConditionArg::M => check_m_constructed(&p, a.depth, a.level_budget),
        ConditionArg::Log => check_log_criterion(&p, a.depth)?,
    };
    let path = settings.write(&format!("{}.check_{}.json", config.name, cond.label()), &to_json(&v)?)?;
    let mut out = format!("({}) {:?} [{:?}] at depth {}\n", cond.label(), v.outcome, v.tier, v.depth);
    if !v.note.is_empty() {
        out += &format!("note: {}\n", v.note);
    }
    if let Some(w) = &v.witness {
        out += &format!("witness at level {}: {}\n", w.level, w.detail);
    }
    out += &format!("wrote {}\n", path.display());
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum WitnessKind {
    NonAlgebra,
    NonIdempotent,
}

pub fn witness_cmd(config: &SpaceConfig, kind: WitnessKind, k_max: u64, settings: &Settings) -> Result<String, CliError> {
    let a = settings.analysis(config);
    let p = build_validated(config, a.depth)?;
    match kind {
        WitnessKind::NonAlgebra => {
            let x = non_algebra_witness(&p, k_max)?;
            let path = settings.write(&format!("{}.non_algebra.json", config.name), &to_json(&x)?)?;
            Ok(format!("x has {} nonzero entries up to rank {}\nwrote {}\n", x.entries().len(), x.n(), path.display()))
        }
        WitnessKind::NonIdempotent => {
            let w = non_idempotent_witness(&p, a.depth, a.level_budget, k_max)?;
            let path = settings.write(&format!("{}.non_idempotent.json", config.name), &to_json(&w)?)?;
            Ok(format!(
                "k = {:?}\nlevels bounded: {}, fourth roots grow: {}\nwrote {}\n",
                w.k,
                w.levels_bounded(),
                w.fourth_roots_grow(),
                path.display()
            ))
        }
    }
}

#[derive(Serialize)]
struct StepDoc {
    n: u64,
    q_level: u64,
    j_prime: Vec<u64>,
    j_doubleprime: Vec<u64>,
}

#[derive(Serialize)]
struct ApproxDoc {
    name: String,
    element: String,
    p_level: u64,
    q_level: u64,
    epsilon: f64,
    first_below_epsilon: Option<u64>,
    increases: Vec<u64>,
    steps: Vec<StepDoc>,
}

pub fn approx_id(
    config: &SpaceConfig,
    level: u64,
    steps: u64,
    element: &str,
    settings: &Settings,
) -> Result<String, CliError> {
    let a = settings.analysis(config);
    let p = build_validated(config, a.depth)?;
    let n = p.index_set().len().map_or(a.depth as u64, |len| len.min(a.depth as u64));
    let x = SeqElement::from_text(p.index_set(), n, element)?;
    let setup = ApproxSetup::new(&p, level, a.depth, a.level_budget)?;
    let built = build_steps(&x, &setup, steps)?;
    let report = verify_convergence(&x, &setup, &built)?;
    let doc = ApproxDoc {
        name: config.name.clone(),
        element: element.to_string(),
        p_level: report.p_level,
        q_level: report.q_level,
        epsilon: a.epsilon,
        first_below_epsilon: report.first_below(a.epsilon),
        increases: report.increases.clone(),
        steps: built
            .iter()
            .map(|s| StepDoc { n: s.n, q_level: s.q_level, j_prime: s.j_prime.clone(), j_doubleprime: s.j_doubleprime.clone() })
            .collect(),
    };
    let json = settings.write(&format!("{}.approx.json", config.name), &to_json(&doc)?)?;
    let mut buf = Vec::new();
    csvio::write_convergence(&mut buf, &report)?;
    let csv_path = settings.write(&format!("{}.convergence.csv", config.name), &buf)?;
    let last = report.rows.last().map(|r| r.value.value()).unwrap_or(f64::NAN);
    Ok(format!(
        "p = level {}, q = level {}\nn·‖a − a·u_n‖ at n = {}: {:e}\nfirst n below {:e}: {}\nwrote {}\nwrote {}\n",
        report.p_level,
        report.q_level,
        steps,
        last,
        a.epsilon,
        doc.first_below_epsilon.map_or("none".to_string(), |n| n.to_string()),
        json.display(),
        csv_path.display()
    ))
}

/// A builtin series name or a coefficient CSV path.
pub fn load_series(spec: &str, n: usize) -> Result<Coefficients, CliError> {
    match Coefficients::named(spec, n) {
        Ok(c) => Ok(c),
        Err(_) => {
            let file = fs::File::open(spec).map_err(|e| CliError::Config(format!("{spec}: not a builtin series and not readable: {e}")))?;
            let mut c = csvio::read_coefficients(file)?;
            // missing trailing coefficients are zero
            if c.len() < n {
                c.0.resize(n, num_complex::Complex64::new(0.0, 0.0));
            }
            Ok(c)
        }
    }
}

pub fn hadamard_cmd(f: &str, g: &str, n: usize, settings: &Settings) -> Result<String, CliError> {
    let prod = hadamard_mul(&load_series(f, n)?, &load_series(g, n)?, n)?;
    let path = match settings.format {
        Format::Csv => {
            let mut buf = Vec::new();
            csvio::write_coefficients(&mut buf, &prod)?;
            settings.write("hadamard.csv", &buf)?
        }
        Format::Json => settings.write("hadamard.json", &to_json(&prod)?)?,
    };
    Ok(format!("{n} coefficients\nwrote {}\n", path.display()))
}

/// One line of the aggregated table.
#[derive(Clone, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct ProfileRow {
    pub name: String,
    pub dg: String,
    pub db: String,
    pub wdg: String,
    pub wdb: String,
    #[serde(rename = "U")]
    pub u: String,
    #[serde(rename = "N")]
    pub n: String,
    #[serde(rename = "B")]
    pub b: String,
    #[serde(rename = "M")]
    pub m: String,
    pub case: String,
}

impl ProfileRow {
    fn new(name: &str, hp: &HomologicalProfile, cp: &ConditionProfile) -> ProfileRow {
        let o = outcomes(cp).map(|o| format!("{o:?}"));
        let [u, n, b, m] = o;
        ProfileRow {
            name: name.to_string(),
            dg: hp.dg.to_string(),
            db: hp.db.to_string(),
            wdg: hp.wdg.to_string(),
            wdb: hp.wdb.to_string(),
            u,
            n,
            b,
            m,
            case: hp.strong.case.text().to_string(),
        }
    }
}

fn row_from_value(v: &serde_json::Value) -> Result<ProfileRow, CliError> {
    let hp: HomologicalProfile = serde_json::from_value(v["homological"].clone())?;
    let cp: ConditionProfile = serde_json::from_value(v["conditions"].clone())?;
    let name = v["name"].as_str().ok_or_else(|| CliError::Config("profile without a name".into()))?;
    Ok(ProfileRow::new(name, &hp, &cp))
}

/// Reads every `*.profile.json` in `dir`, sorted by file name.
pub fn collect_profiles(dir: &Path) -> Result<Vec<ProfileRow>, CliError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.to_str().is_some_and(|s| s.ends_with(".profile.json")))
        .collect();
    files.sort();
    files
        .iter()
        .map(|f| {
            let text = fs::read_to_string(f)?;
            let v: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", f.display())))?;
            row_from_value(&v).map_err(|e| CliError::Config(format!("{}: {e}", f.display())))
        })
        .collect()
}

pub fn report_cmd(dir: &Path, settings: &Settings) -> Result<String, CliError> {
    let rows = collect_profiles(dir)?;
    let path = match settings.format {
        Format::Json => settings.write("report.json", &to_json(&rows)?)?,
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in &rows {
                w.serialize(r)?;
            }
            let bytes = w.into_inner().map_err(|e| CliError::Config(e.to_string()))?;
            settings.write("report.csv", &bytes)?
        }
    };
    let width = rows.iter().map(|r| r.name.chars().count()).max().unwrap_or(4).max(4);
    let mut out = format!("{:width$}  dg  db  wdg wdb  U       N       B       M\n", "name");
    for r in &rows {
        let line = format!(
            "{:width$}  {:3} {:3} {:3} {:3}  {:7} {:7} {:7} {:7}",
            r.name, r.dg, r.db, r.wdg, r.wdb, r.u, r.n, r.b, r.m
        );
        out += line.trim_end();
        out.push('\n');
    }
    out += &format!("wrote {}\n", path.display());
    Ok(out)
}

/// Shipped config files keyed by file name.
pub fn catalog_files() -> BTreeMap<String, String> {
    koethe_core::catalog::golden_catalog()
        .into_iter()
        .map(|c| {
            let text = serde_json::to_string_pretty(&c).expect("configs serialize") + "\n";
            (format!("{}.json", file_stem(&c.name)), text)
        })
        .collect()
}

