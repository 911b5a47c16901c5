//! `zplie` — command-line front end for the lattice toolkit.
//!
//! Every verb reads a lattice file (explicit brackets or a family
//! shorthand), runs one library operation and prints JSON. Exit codes:
//! 0 success, 2 validation/parse errors, 3 inconclusive verdicts.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use zplie_core::families::{construct, recognize, FamilyTag};
use zplie_core::padic::{PContext, Val};
use zplie_core::selfsim::{
    certify, decide_ss_index_3dim, hereditary_3dim, shss_classify, simplicity, witness_nonss,
    SimplicityConfig, SimplicityVerdict, VirtualEndo,
};
use zplie_core::zmodlin::Submodule;
use zplie_core::{oracle, LieLattice};

#[derive(Parser)]
#[command(name = "zplie", version, about = "Zp-Lie lattice toolkit")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
    /// human-readable summary instead of JSON
    #[arg(long, global = true)]
    text: bool,
    /// worker threads for the exhaustive search (default: JOBS env or all cores)
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Verb {
    /// Recognize the family of a rank-3 solvable lattice
    Classify { input: PathBuf },
    /// Decide the least self-similarity index (p or p^2) with a certificate
    Decide { input: PathBuf },
    /// Emit an explicit simple virtual endomorphism of index p^k
    Certify {
        input: PathBuf,
        /// index exponent k
        #[arg(long, default_value_t = 1)]
        index: i64,
    },
    /// Validate an endomorphism file against a lattice and test simplicity
    Verify {
        input: PathBuf,
        /// JSON file with "U" and "F" column matrices
        #[arg(long)]
        endo: PathBuf,
    },
    /// Is every finite-index subalgebra self-similar of index p?
    Hereditary { input: PathBuf },
    /// Classify strong hereditary self-similarity (chain lattices)
    Shss { input: PathBuf },
    /// Produce a subalgebra of a chain lattice that is not self-similar of index p
    Witness { input: PathBuf },
    /// Finite-level coverage search over all index-p subalgebras
    Exhaust {
        input: PathBuf,
        /// p-adic precision of the search
        #[arg(long, default_value_t = 2)]
        level: u32,
    },
    /// List the index-p submodule shapes and which ones are subalgebras
    #[command(name = "enum")]
    Enumerate { input: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let jobs = cli
        .jobs
        .or_else(|| std::env::var("JOBS").ok().and_then(|j| j.parse().ok()));
    if let Some(jobs) = jobs {
        // only the exhaustive search fans out; ignore double-init in tests
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    match run(&cli) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn read_json(path: &PathBuf) -> Result<Value, String> {
    let text =
        fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

/// Family-shorthand files carry "family" and "p"; anything else must be an
/// explicit bracket table.
fn parse_lattice_file(path: &PathBuf) -> Result<LieLattice, String> {
    let v = read_json(path)?;
    if v.get("family").is_some() {
        let (ctx, tag) = parse_tag(&v)?;
        construct(&ctx, &tag).map_err(|e| e.to_string())
    } else {
        LieLattice::from_json(&v).map_err(|e| e.to_string())
    }
}

fn parse_tag(v: &Value) -> Result<(PContext, FamilyTag), String> {
    let p = v
        .get("p")
        .and_then(Value::as_u64)
        .ok_or("family shorthand needs a prime \"p\"")?;
    let ctx = PContext::new(p).map_err(|e| e.to_string())?;
    let tag = FamilyTag::from_json(&ctx, v).map_err(|e| e.to_string())?;
    Ok((ctx, tag))
}

fn endo_json(endo: &VirtualEndo) -> Value {
    let mut v = endo.to_json();
    v["index_exp"] = json!(endo.index_exp());
    v
}

fn submodule_json(m: &Submodule) -> Value {
    m.basis().to_json_columns()
}

fn emit(text_mode: bool, v: &Value, summary: String) {
    if text_mode {
        println!("{summary}");
    } else {
        println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
    }
}

fn run(cli: &Cli) -> Result<ExitCode, String> {
    let ok = ExitCode::SUCCESS;
    match &cli.verb {
        Verb::Classify { input } => {
            let l = parse_lattice_file(input)?;
            let rec = recognize(&l).map_err(|e| e.to_string())?;
            let v = json!({
                "tag": rec.tag.to_json(),
                "iso": rec.iso.to_json_columns(),
            });
            emit(cli.text, &v, format!("family: {}", rec.tag.to_json()));
            Ok(ok)
        }
        Verb::Decide { input } => {
            let l = parse_lattice_file(input)?;
            let d = decide_ss_index_3dim(&l).map_err(|e| e.to_string())?;
            let sigma = if d.index_exp == 1 { "p" } else { "p^2" };
            let v = json!({
                "sigma": sigma,
                "tag": d.tag.to_json(),
                "certificate": endo_json(&d.endo),
                "obstruction": d.obstruction,
            });
            emit(
                cli.text,
                &v,
                format!(
                    "self-similarity index: {sigma}{}",
                    d.obstruction
                        .as_deref()
                        .map(|o| format!(" ({o})"))
                        .unwrap_or_default()
                ),
            );
            Ok(ok)
        }
        Verb::Certify { input, index } => {
            let v = read_json(input)?;
            let (ctx, tag) = parse_tag(&v)?;
            let endo = certify(&ctx, &tag, *index).map_err(|e| e.to_string())?;
            let verdict = simplicity(&endo, SimplicityConfig::default());
            let v = json!({
                "tag": tag.to_json(),
                "certificate": endo_json(&endo),
                "simplicity": verdict.to_json(),
            });
            emit(
                cli.text,
                &v,
                format!(
                    "certificate of index p^{}: {}",
                    endo.index_exp(),
                    verdict.to_json()["status"]
                ),
            );
            Ok(ok)
        }
        Verb::Verify { input, endo } => {
            let l = parse_lattice_file(input)?;
            let ev = read_json(endo)?;
            let endo = VirtualEndo::from_json(&l, &ev).map_err(|e| e.to_string())?;
            let verdict = simplicity(&endo, SimplicityConfig::default());
            let v = json!({
                "valid": true,
                "index_exp": endo.index_exp(),
                "simplicity": verdict.to_json(),
            });
            emit(
                cli.text,
                &v,
                format!(
                    "valid endomorphism of index p^{}; simplicity: {}",
                    endo.index_exp(),
                    verdict.to_json()["status"]
                ),
            );
            if matches!(verdict, SimplicityVerdict::Inconclusive { .. }) {
                Ok(ExitCode::from(3))
            } else {
                Ok(ok)
            }
        }
        Verb::Hereditary { input } => {
            let l = parse_lattice_file(input)?;
            let r = hereditary_3dim(&l).map_err(|e| e.to_string())?;
            let v = json!({
                "hereditary": r.hereditary,
                "tag": r.tag.to_json(),
                "witness": r.witness.as_ref().map(submodule_json),
            });
            emit(cli.text, &v, format!("hereditary: {}", r.hereditary));
            Ok(ok)
        }
        Verb::Shss { input } => {
            let l = parse_lattice_file(input)?;
            let r = shss_classify(&l).map_err(|e| e.to_string())?;
            let s = r.s.map(|s| match s {
                Val::Infinity => json!("infinity"),
                Val::Finite(v) => json!(v),
            });
            let v = json!({
                "shss": r.s.is_some(),
                "s": s,
                "witness": r.witness.as_ref().map(submodule_json),
            });
            emit(cli.text, &v, format!("strongly hereditary: {}", r.s.is_some()));
            Ok(ok)
        }
        Verb::Witness { input } => {
            let l = parse_lattice_file(input)?;
            let w = witness_nonss(&l).map_err(|e| e.to_string())?;
            let v = json!({"witness": submodule_json(&w)});
            emit(
                cli.text,
                &v,
                format!("witness subalgebra of index exponent {:?}", {
                    let exps: i64 = w.pivot_exps().iter().sum();
                    exps
                }),
            );
            Ok(ok)
        }
        Verb::Exhaust { input, level } => {
            let l = parse_lattice_file(input)?;
            let report = oracle::exhaust(&l, *level, &[]).map_err(|e| e.to_string())?;
            let v = report.to_json();
            emit(
                cli.text,
                &v,
                format!(
                    "level {}: covered={} refuted={}",
                    report.level, report.covered, report.refuted
                ),
            );
            Ok(ok)
        }
        Verb::Enumerate { input } => {
            let l = parse_lattice_file(input)?;
            let ctx = l.ctx();
            let shapes = oracle::enum_index_p(ctx, l.rank());
            let subs = oracle::subalgebra_filter(&l, &shapes).map_err(|e| e.to_string())?;
            let v = json!({
                "p": ctx.p(),
                "rank": l.rank(),
                "index_p_count": shapes.len(),
                "subalgebra_count": subs.len(),
                "subalgebras": subs.iter().map(|s| s.to_json()).collect::<Vec<_>>(),
            });
            emit(
                cli.text,
                &v,
                format!(
                    "{} index-p submodules, {} subalgebras",
                    shapes.len(),
                    subs.len()
                ),
            );
            Ok(ok)
        }
    }
}
