use std::fmt::Write as _;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use afflab_core::affine::RawAffine;
use afflab_core::construction::build_x;
use afflab_core::experiments::{
    alon_roichman_trial, conjecture_scan, lmr_norm, lmr_survey, min_invariant_set, GroupSpec, S3Elem, TrialConfig,
};
use afflab_core::resistance::{
    admissible_a_len, expansion_profile, invariance_defects, resist_certificate, CertificateOptions,
};
use afflab_core::spectral::{averaged_operator, meanzero_indicator, rayleigh_quotient};
use afflab_core::{
    ConstructionParams, Epsilon, Error, FpElem, FpSubset, GeneratorSet, IrrepId, NormOptions, PrimeField,
};
use clap::{Args, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::output::{to_value, usage, Failure, Run, EXIT_FAIL, EXIT_OK};
use crate::GlobalOpts;

type CmdResult = Result<Run, Failure>;

fn norm_options(g: &GlobalOpts) -> NormOptions {
    NormOptions {
        tol: g.tol,
        seed: g.seed,
        ..Default::default()
    }
}

fn parse_generators(p: u64, raw: &[String]) -> Result<GeneratorSet, Failure> {
    let pairs = raw
        .iter()
        .map(|s| s.parse::<RawAffine>().map(|r| (r.a, r.b)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(GeneratorSet::from_pairs(p, &pairs)?)
}

#[derive(Args, Debug, Serialize)]
pub struct ConstructArgs {
    /// Prime modulus.
    #[arg(short = 'p', long)]
    pub p: u64,
    /// Comma-separated nonzero residues.
    #[arg(short = 'A', long = "a-set", value_delimiter = ',', required = true)]
    pub a: Vec<u64>,
    /// Invariance level, as a decimal or a fraction.
    #[arg(short = 'e', long)]
    pub epsilon: Epsilon,
}

pub fn construct(args: &ConstructArgs, g: &GlobalOpts) -> CmdResult {
    let params = ConstructionParams::new(args.p, &args.a, args.epsilon)?.with_resource_cap(g.resource_cap as u128);
    let result = build_x(&params)?;
    let defects = invariance_defects(params.field(), &result.x, params.a(), params.epsilon())?;
    let (outcome, code) = match (defects.pass, g.require_invariance) {
        (true, _) => ("pass", EXIT_OK),
        (false, true) => ("fail", EXIT_FAIL),
        (false, false) => ("fail", EXIT_OK),
    };
    let mut csv = String::from("a,mult_defect,add_defect,allowed\n");
    for d in &defects.per_element {
        let allowed = args.epsilon.numer() as u128 * defects.x_len as u128 / args.epsilon.denom() as u128;
        let _ = writeln!(csv, "{},{},{},{allowed}", d.a, d.mult_defect, d.add_defect);
    }
    Ok(Run::new(json!({ "construction": result, "defects": defects }), outcome, code).with_plot(csv))
}

#[derive(Args, Debug, Serialize)]
pub struct VerifyArgs {
    /// A JSON report written by `construct` or `resist`; supplies p, A, ε and X.
    #[arg(long, conflicts_with_all = ["p", "a", "epsilon", "elements", "dump"])]
    pub report: Option<PathBuf>,
    #[arg(short = 'p', long)]
    pub p: Option<u64>,
    #[arg(short = 'A', long = "a-set", value_delimiter = ',')]
    pub a: Option<Vec<u64>>,
    #[arg(short = 'e', long)]
    pub epsilon: Option<Epsilon>,
    /// Comma-separated elements of X.
    #[arg(long, conflicts_with = "dump")]
    pub elements: Option<String>,
    /// Bitset dump of X.
    #[arg(long)]
    pub dump: Option<PathBuf>,
}

fn read_dump(path: &Path) -> Result<FpSubset, Failure> {
    Ok(FpSubset::read_dump(BufReader::new(File::open(path).map_err(Error::from)?))?)
}

/// A set as emitted in a report: listed elements or a dump path.
fn set_from_report(v: &Value, base: &Path) -> Result<FpSubset, Failure> {
    let p = v["p"].as_u64().ok_or_else(|| usage("set without p"))?;
    if let Some(elems) = v["elements"].as_array() {
        let elems = elems
            .iter()
            .map(|e| e.as_u64().ok_or_else(|| usage("set element is not an integer")))
            .collect::<Result<Vec<_>, _>>()?;
        return Ok(FpSubset::from_elements(p, elems)?);
    }
    let dump = v["dump"].as_str().ok_or_else(|| usage("set has neither elements nor dump"))?;
    let direct = PathBuf::from(dump);
    let path = if direct.exists() { direct } else { base.join(dump) };
    let set = read_dump(&path)?;
    if set.p() != p {
        return Err(usage(format!("dump {} is for p = {}, report says {p}", path.display(), set.p())));
    }
    Ok(set)
}

fn json_elem_list(v: &Value) -> Result<Vec<u64>, Failure> {
    v.as_array()
        .ok_or_else(|| usage("expected a list of residues"))?
        .iter()
        .map(|e| e.as_u64().ok_or_else(|| usage("residue is not an integer")))
        .collect()
}

pub fn verify(args: &VerifyArgs, g: &GlobalOpts) -> CmdResult {
    if let Some(path) = &args.report {
        return verify_report(path, g);
    }
    let (p, a, epsilon) = match (args.p, &args.a, args.epsilon) {
        (Some(p), Some(a), Some(e)) => (p, a, e),
        _ => return Err(usage("verify needs --report, or -p, -A and -e")),
    };
    let field = PrimeField::new(p)?;
    let x = match (&args.elements, &args.dump) {
        (Some(list), _) => {
            let elems = list
                .split(',')
                .map(|t| t.trim().parse::<u64>().map_err(|_| usage(format!("bad element {t:?}"))))
                .collect::<Result<Vec<_>, _>>()?;
            FpSubset::from_elements(p, elems)?
        }
        (None, Some(path)) => read_dump(path)?,
        (None, None) => return Err(usage("verify needs --elements or --dump")),
    };
    if x.p() != p {
        return Err(usage(format!("set is for p = {}, not {p}", x.p())));
    }
    let a = a.iter().map(|&v| field.elem(v)).collect::<Result<Vec<FpElem>, _>>()?;
    let defects = invariance_defects(&field, &x, &a, epsilon)?;
    let (outcome, code) = if defects.pass { ("pass", EXIT_OK) } else { ("fail", EXIT_FAIL) };
    Ok(Run::new(json!({ "x_len": x.len(), "defects": defects }), outcome, code))
}

/// Recomputes defects, and for certificates the Rayleigh quotient, from a
/// saved report and compares them with the recorded values.
fn verify_report(path: &Path, g: &GlobalOpts) -> CmdResult {
    let text = std::fs::read_to_string(path).map_err(Error::from)?;
    let doc: Value = serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let report = &doc["report"];
    let base = path.parent().unwrap_or(Path::new("."));
    let (construction, recorded_defects, certificate) = if report["construction"].is_object() {
        (&report["construction"], &report["defects"], None)
    } else if report["certificate"].is_object() {
        let c = &report["certificate"];
        (&c["construction"], &c["defects"], Some(c))
    } else {
        return Err(usage("report holds neither a construction nor a certificate"));
    };
    if construction.is_null() {
        return Err(usage("certificate has no construction to verify (trivial generator set)"));
    }
    let p = construction["p"].as_u64().ok_or_else(|| usage("construction without p"))?;
    let field = PrimeField::new(p)?;
    let epsilon: Epsilon = serde_json::from_value(construction["epsilon"].clone())
        .map_err(|e| usage(format!("bad epsilon: {e}")))?;
    let a = json_elem_list(&construction["a"])?
        .into_iter()
        .map(|v| field.elem(v))
        .collect::<Result<Vec<FpElem>, _>>()?;
    let x = set_from_report(&construction["x_set"], base)?;
    let defects = invariance_defects(&field, &x, &a, epsilon)?;
    let defects_match = to_value(&defects) == *recorded_defects;

    let mut out = json!({
        "source": path.display().to_string(),
        "x_len": x.len(),
        "defects": defects,
        "defects_match": defects_match,
    });
    let mut agree = defects_match;
    if let Some(c) = certificate {
        let gens: GeneratorSet = serde_json::from_value(c["generators"].clone())
            .map_err(|e| usage(format!("bad generators: {e}")))?;
        let recomputed = rayleigh_quotient(&averaged_operator(&gens), &meanzero_indicator(&x)?)?;
        let recorded = c["rayleigh_bound"].as_f64().ok_or_else(|| usage("certificate without rayleigh_bound"))?;
        let ok = (recomputed - recorded).abs() <= g.tol;
        agree &= ok;
        out["rayleigh"] = json!({ "recomputed": recomputed, "recorded": recorded, "agree": ok });
    }
    let pass = agree && defects.pass;
    let (outcome, code) = if pass { ("pass", EXIT_OK) } else { ("fail", EXIT_FAIL) };
    Ok(Run::new(out, outcome, code))
}

#[derive(Args, Debug, Serialize)]
pub struct ResistArgs {
    #[arg(short = 'p', long)]
    pub p: u64,
    /// Generators as "a,b" pairs, for x ↦ ax + b.
    #[arg(short = 'S', long = "generators", num_args = 1.., required = true)]
    pub s: Vec<String>,
    /// Target level: certify a norm of at least 1 − ε.
    #[arg(short = 'e', long)]
    pub epsilon: Epsilon,
    /// Iteration cap of the corroborating norm estimate.
    #[arg(long, default_value_t = 5_000)]
    pub corroboration_max_iter: usize,
}

pub fn resist(args: &ResistArgs, g: &GlobalOpts) -> CmdResult {
    let s = parse_generators(args.p, &args.s)?;
    let opts = CertificateOptions {
        norm: norm_options(g),
        corroboration_max_iter: args.corroboration_max_iter,
        resource_cap: g.resource_cap as u128,
    };
    let admissible = admissible_a_len(args.p, args.epsilon)?;
    let cert = resist_certificate(&s, args.epsilon, &opts)?;
    let (outcome, code) = if cert.certified {
        ("certified", EXIT_OK)
    } else {
        ("not_certified", EXIT_FAIL)
    };
    let mut csv = String::from("generator,shift_defect\n");
    for (gi, d) in s.maps().iter().zip(&cert.shift_defects) {
        let _ = writeln!(csv, "\"{gi}\",{d}");
    }
    Ok(Run::new(
        json!({
            "certificate": cert,
            "admissible_a_len": admissible,
            "admissible_generators": admissible / 2,
        }),
        outcome,
        code,
    )
    .with_plot(csv))
}

#[derive(Args, Debug, Serialize)]
pub struct ExpandArgs {
    #[arg(short = 'p', long)]
    pub p: u64,
    /// Generators as "a,b" pairs, for x ↦ ax + b.
    #[arg(short = 'S', long = "generators", num_args = 1.., required = true)]
    pub s: Vec<String>,
}

pub fn expand(args: &ExpandArgs, g: &GlobalOpts) -> CmdResult {
    let s = parse_generators(args.p, &args.s)?;
    let profile = expansion_profile(&s, norm_options(g))?;
    let mut csv = String::from("irrep,dimension,norm\n");
    for irrep in IrrepId::all_nontrivial(args.p) {
        let name = match irrep {
            IrrepId::Character(j) => format!("character_{j}"),
            IrrepId::StandardRep => "standard".into(),
        };
        let norm = profile.norm_of(irrep).expect("every nontrivial irrep is profiled");
        let _ = writeln!(csv, "{name},{},{norm}", irrep.dimension(args.p));
    }
    Ok(Run::new(to_value(&profile), "ok", EXIT_OK).with_plot(csv))
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupKind {
    Cyclic,
    Affine,
}

#[derive(Args, Debug, Serialize)]
pub struct AlonRoichmanArgs {
    #[arg(long, value_enum)]
    pub group: GroupKind,
    /// Group parameter: n for Z/nZ, the prime p for Aff(F_p).
    #[arg(short = 'n', long)]
    pub n: u64,
    /// Generators per trial.
    #[arg(short = 'k', long)]
    pub k: usize,
    #[arg(long, default_value_t = 50)]
    pub trials: usize,
}

pub fn alon_roichman(args: &AlonRoichmanArgs, g: &GlobalOpts) -> CmdResult {
    let group = match args.group {
        GroupKind::Cyclic => GroupSpec::Cyclic { n: args.n },
        GroupKind::Affine => GroupSpec::Affine { p: args.n },
    };
    let cfg = TrialConfig {
        master_seed: g.seed,
        trials: args.trials,
        group,
        k: args.k,
        tol: g.tol,
    };
    let trials = alon_roichman_trial(&cfg)?;
    let max = trials.iter().map(|t| t.max_norm).fold(0.0, f64::max);
    let mean = trials.iter().map(|t| t.max_norm).sum::<f64>() / trials.len() as f64;
    let mut csv = String::from("trial,stream_seed,max_norm\n");
    for t in &trials {
        let _ = writeln!(csv, "{},{},{}", t.trial, t.stream_seed, t.max_norm);
    }
    let report = json!({
        "status": "empirical",
        "config": cfg,
        "trials": trials,
        "max_over_trials": max,
        "mean_over_trials": mean,
    });
    Ok(Run::new(report, "ok", EXIT_OK).with_plot(csv).with_trials(trials))
}

#[derive(Args, Debug, Serialize)]
pub struct LmrArgs {
    /// Tensor lengths; several values give one survey row each.
    #[arg(short = 'n', long, value_delimiter = ',', required = true)]
    pub n: Vec<usize>,
    /// Tuples per average.
    #[arg(short = 'k', long, default_value_t = 2)]
    pub k: usize,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    /// Explicit tuples: ';' between tuples, ',' between coordinates, e.g.
    /// "(123),(12);e,(13)". Skips the survey.
    #[arg(long)]
    pub elements: Option<String>,
    /// Every trial averages k copies of one tuple.
    #[arg(long)]
    pub force_equal: bool,
}

fn parse_tuples(s: &str) -> Result<Vec<Vec<S3Elem>>, Failure> {
    s.split(';')
        .map(|t| t.split(',').map(|e| Ok(e.parse::<S3Elem>()?)).collect())
        .collect()
}

pub fn lmr(args: &LmrArgs, g: &GlobalOpts) -> CmdResult {
    if let Some(spec) = &args.elements {
        let tuples = parse_tuples(spec)?;
        if tuples.len() != args.k {
            return Err(usage(format!("-k {} but {} tuples given", args.k, tuples.len())));
        }
        if args.n.len() != 1 || tuples.iter().any(|t| t.len() != args.n[0]) {
            return Err(usage("every tuple must have length n"));
        }
        let est = lmr_norm(&tuples, norm_options(g))?;
        let report = json!({ "n": args.n[0], "k": args.k, "elements": tuples, "norm": est });
        return Ok(Run::new(report, "ok", EXIT_OK));
    }
    let mut rows = Vec::new();
    let mut csv = String::from("n,k,trial,norm\n");
    let mut per_trial = Vec::new();
    for &n in &args.n {
        let cfg = TrialConfig {
            master_seed: g.seed,
            trials: args.trials,
            group: GroupSpec::S3Tensor { n },
            k: args.k,
            tol: g.tol,
        };
        let row = lmr_survey(&cfg, args.force_equal)?;
        for (t, v) in row.norms.iter().enumerate() {
            let _ = writeln!(csv, "{n},{},{t},{v}", args.k);
            per_trial.push(json!({ "n": n, "k": args.k, "trial": t, "norm": v }));
        }
        rows.push(row);
    }
    let report = json!({
        "status": "empirical",
        "threshold": afflab_core::experiments::LMR_ONE_THRESHOLD,
        "rows": rows,
    });
    Ok(Run::new(report, "ok", EXIT_OK).with_plot(csv).with_trials(per_trial))
}

#[derive(Args, Debug, Serialize)]
pub struct OracleArgs {
    #[arg(short = 'p', long)]
    pub p: u64,
    #[arg(short = 'A', long = "a-set", value_delimiter = ',', required = true)]
    pub a: Vec<u64>,
    #[arg(short = 'e', long)]
    pub epsilon: Epsilon,
    /// Cap on the number of subsets examined.
    #[arg(long)]
    pub budget: Option<u64>,
}

pub fn oracle(args: &OracleArgs, _g: &GlobalOpts) -> CmdResult {
    let r = min_invariant_set(args.p, &args.a, args.epsilon, args.budget)?;
    let outcome = if r.exhausted { "ok" } else { "budget_exhausted" };
    let csv = format!(
        "p,min_size,exhausted,nodes_searched\n{},{},{},{}\n",
        r.p, r.min_size, r.exhausted, r.nodes_searched
    );
    let mut report = to_value(&r);
    report["status"] = "empirical".into();
    Ok(Run::new(report, outcome, EXIT_OK).with_plot(csv))
}

#[derive(Args, Debug, Serialize)]
pub struct ScanArgs {
    #[arg(short = 'p', long)]
    pub p: u64,
    /// Size of each random A.
    #[arg(short = 'k', long)]
    pub k: usize,
    #[arg(short = 'e', long)]
    pub epsilon: Epsilon,
    #[arg(long, default_value_t = 20)]
    pub samples: usize,
    /// Cap on subsets examined per sample.
    #[arg(long)]
    pub budget: Option<u64>,
}

pub fn scan(args: &ScanArgs, g: &GlobalOpts) -> CmdResult {
    let r = conjecture_scan(args.p, args.k, args.epsilon, args.samples, g.seed, args.budget)?;
    let mut csv = String::from("sample,a,min_size,exhausted,nodes_searched\n");
    for row in &r.rows {
        let a: Vec<String> = row.result.a.iter().map(u64::to_string).collect();
        let _ = writeln!(
            csv,
            "{},\"{}\",{},{},{}",
            row.sample,
            a.join(" "),
            row.result.min_size,
            row.result.exhausted,
            row.result.nodes_searched
        );
    }
    let outcome = if r.all_exhausted { "ok" } else { "budget_exhausted" };
    let mut report = to_value(&r);
    report["status"] = "empirical".into();
    Ok(Run::new(report, outcome, EXIT_OK).with_plot(csv).with_trials(r.rows))
}
