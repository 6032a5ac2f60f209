//! Command-line front end.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::cartan::{classify, normalize_params, AmbientGroup, AmbientKind};
use crate::eigenspace::oracle_row;
use crate::error::{Error, Result};
use crate::measure::{family_of_group, MeasureFamily};
use crate::modarith::{rat_to_string, Rat};
use crate::problem::{AmbientSpec, ProblemSpec};
use crate::subgroup::{close, index_and_level, smaller_level, Budget, FiniteSubgroup};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_SPEC: i32 = 2;
pub const EXIT_RESOURCE: i32 = 3;
pub const EXIT_MISMATCH: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "eigenmeasure",
    version,
    about = "Haar measures of 1-eigenspace strata in subgroups of GL2(Z_l)"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Normalize the ambient parameters and describe the ambient group.
    Classify(CommonArgs),
    /// Compute the measure family and a table of sample values.
    Measure {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        range: RangeArgs,
        /// Write the CSV table here instead of stdout.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Compare the family against brute-force counting.
    Verify {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        range: RangeArgs,
    },
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Problem file (JSON).
    pub file: PathBuf,
    /// Worker threads for counting scans.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Maximum number of matrix entries held in memory; overrides the file.
    #[arg(long)]
    pub budget: Option<u64>,
    /// Write the canonical form of the problem file to this path.
    #[arg(long, value_name = "PATH")]
    pub dump_spec: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RangeArgs {
    #[arg(long, default_value_t = 2)]
    pub a_max: u32,
    #[arg(long, default_value_t = 3)]
    pub b_max: u32,
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Spec(_) | Error::InvalidRing(_) | Error::Domain(_) | Error::Precondition(_) | Error::Precision(_) => {
            EXIT_SPEC
        }
        Error::Resource { .. } => EXIT_RESOURCE,
        Error::Partition(_) | Error::Internal(_) => EXIT_FAILURE,
    }
}

pub fn load(path: &Path) -> Result<ProblemSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Spec(format!("{}: {e}", path.display())))?;
    ProblemSpec::from_json(&text)
}

fn ambient_report(amb: &AmbientGroup, out: &mut String) -> Result<()> {
    let tc = amb.tangent_cards();
    let tangent = format!("T=({},{},{})", tc.t_all, tc.t_units, tc.t_sing_nonzero);
    let base = match amb.kind() {
        AmbientKind::Gl2 => amb,
        _ => &amb.cartan_part().expect("Cartan ambients have a Cartan part"),
    };
    let order1 = base.order(1)?;
    match (amb.kind(), amb.params(), amb.cartan_type()) {
        (AmbientKind::Gl2, _, _) => writeln!(out, "GL2, #GL2(1)={order1}, {tangent}").unwrap(),
        (_, Some(p), Some(t)) => {
            writeln!(out, "{t}, #C(1)={order1}, {tangent}").unwrap();
            writeln!(out, "parameters: {p}").unwrap();
            let rep = amb
                .coset_representative(1)?
                .expect("Cartan ambients have a coset representative");
            writeln!(out, "normalizer coset representative: {rep}").unwrap();
        }
        _ => unreachable!("Cartan ambients always carry parameters and a type"),
    }
    writeln!(out, "ambient: {amb}").unwrap();
    Ok(())
}

/// Classification report. Cartan parameters are normalized first, so any
/// `(c, d)` with `c^2 + 4d` nonzero is accepted.
pub fn classify_report(spec: &ProblemSpec, budget: &Budget) -> Result<String> {
    let ell = spec.prime()?;
    let amb = match spec.ambient {
        AmbientSpec::Gl2 => AmbientGroup::gl2(ell),
        AmbientSpec::Cartan { c, d } | AmbientSpec::Normalizer { c, d } => {
            let p = normalize_params(c, d, ell)?;
            debug_assert_eq!(Some(classify(&p, ell)), AmbientGroup::cartan(p, ell).cartan_type());
            if matches!(spec.ambient, AmbientSpec::Cartan { .. }) {
                AmbientGroup::cartan(p, ell)
            } else {
                AmbientGroup::normalizer(p, ell)
            }
        }
    };
    let mut out = String::new();
    ambient_report(&amb, &mut out)?;
    if spec.ambient_group().map(|a| a == amb).unwrap_or(false) {
        let sub = spec.subgroup_spec()?;
        let g = close(&sub, budget)?;
        let (index, level) = index_and_level(&g)?;
        writeln!(out, "subgroup: order {} at level {level}, index {index}", g.len()).unwrap();
        if let Some(n) = smaller_level(&g)? {
            writeln!(out, "level {level} is not minimal: level {n} describes the same group").unwrap();
        }
    }
    Ok(out)
}

/// One JSON record per cell.
pub fn cells_report(fam: &MeasureFamily) -> String {
    let law = fam.law();
    let mut out = String::new();
    for c in fam.cells() {
        let rec = json!({
            "a_set": c.region.a_set.to_string(),
            "b_set": c.region.b_set.to_string(),
            "constant": rat_to_string(&c.constant),
            "law": law,
            "provenance": c.provenance,
        });
        writeln!(out, "{rec}").unwrap();
    }
    out
}

/// `a,b,mu` rows in lexicographic order.
pub fn csv_table(fam: &MeasureFamily, a_max: u32, b_max: u32) -> Result<String> {
    let mut out = String::from("a,b,mu\n");
    for a in 0..=a_max {
        for b in 0..=b_max {
            writeln!(out, "{a},{b},{}", rat_to_string(&fam.evaluate(a, b)?)).unwrap();
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerifyRow {
    pub a: u32,
    pub b: u32,
    pub family: Rat,
    pub oracle: Rat,
}

impl VerifyRow {
    pub fn passed(&self) -> bool {
        self.family == self.oracle
    }
}

pub fn verify_family(
    g: &FiniteSubgroup,
    fam: &MeasureFamily,
    a_max: u32,
    b_max: u32,
    budget: &Budget,
) -> Result<Vec<VerifyRow>> {
    let mut rows = Vec::new();
    for a in 0..=a_max {
        let oracle = oracle_row(g, a, b_max, budget)?;
        for (b, o) in (0..=b_max).zip(oracle) {
            rows.push(VerifyRow {
                a,
                b,
                family: fam.evaluate(a, b)?,
                oracle: o,
            });
        }
    }
    Ok(rows)
}

pub fn verify_report(rows: &[VerifyRow]) -> String {
    let mut out = String::new();
    for r in rows {
        let status = if r.passed() { "PASS" } else { "FAIL" };
        writeln!(
            out,
            "{status} ({}, {}) family={} oracle={}",
            r.a,
            r.b,
            rat_to_string(&r.family),
            rat_to_string(&r.oracle)
        )
        .unwrap();
    }
    let failed = rows.iter().filter(|r| !r.passed()).count();
    writeln!(out, "{} of {} pairs agree", rows.len() - failed, rows.len()).unwrap();
    out
}

fn prepare(common: &CommonArgs) -> Result<(ProblemSpec, Budget)> {
    if let Some(j) = common.jobs {
        // Only the first call can configure the global pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build_global();
    }
    let spec = load(&common.file)?;
    let budget = common.budget.map(Budget::new).unwrap_or_else(|| spec.budget());
    if let Some(path) = &common.dump_spec {
        let canon = ProblemSpec::canonical(&spec.subgroup_spec()?, spec.budget);
        std::fs::write(path, canon.to_json() + "\n").map_err(|e| Error::Spec(format!("{}: {e}", path.display())))?;
    }
    Ok((spec, budget))
}

fn family_for(spec: &ProblemSpec, budget: &Budget) -> Result<(FiniteSubgroup, MeasureFamily)> {
    let g = close(&spec.subgroup_spec()?, budget)?;
    let fam = family_of_group(&g, budget)?;
    Ok((g, fam))
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Result<i32> {
    let io = |e: std::io::Error| Error::Internal(format!("write failed: {e}"));
    match &cli.command {
        Command::Classify(common) => {
            let (spec, budget) = prepare(common)?;
            out.write_all(classify_report(&spec, &budget)?.as_bytes()).map_err(io)?;
            Ok(EXIT_OK)
        }
        Command::Measure { common, range, csv } => {
            let (spec, budget) = prepare(common)?;
            let (_, fam) = family_for(&spec, &budget)?;
            let table = csv_table(&fam, range.a_max, range.b_max)?;
            out.write_all(cells_report(&fam).as_bytes()).map_err(io)?;
            match csv {
                Some(path) => {
                    std::fs::write(path, table).map_err(|e| Error::Spec(format!("{}: {e}", path.display())))?
                }
                None => write!(out, "\n{table}").map_err(io)?,
            }
            Ok(EXIT_OK)
        }
        Command::Verify { common, range } => {
            let (spec, budget) = prepare(common)?;
            let (g, fam) = family_for(&spec, &budget)?;
            let rows = verify_family(&g, &fam, range.a_max, range.b_max, &budget)?;
            out.write_all(verify_report(&rows).as_bytes()).map_err(io)?;
            Ok(if rows.iter().all(VerifyRow::passed) {
                EXIT_OK
            } else {
                EXIT_MISMATCH
            })
        }
    }
}

/// Runs a parsed command line and returns the process exit status.
pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match execute(cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}
