//! Run manifests, large-set dumps, table rendering and exit codes.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use afflab_core::{Error, FpSubset};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::{Format, GlobalOpts};

/// Sets with more elements than this are written to a bitset file.
pub const SET_LIST_LIMIT: usize = 10_000;

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAIL: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_RESOURCE: u8 = 3;
pub const EXIT_NOT_CERTIFIABLE: u8 = 4;

/// A finished command: its report, and the outcome label and exit code it
/// maps to.
pub struct Run {
    pub report: Value,
    pub outcome: &'static str,
    pub code: u8,
    pub plot_csv: Option<String>,
    pub trials: Vec<Value>,
}

impl Run {
    pub fn new(report: Value, outcome: &'static str, code: u8) -> Self {
        Run {
            report,
            outcome,
            code,
            plot_csv: None,
            trials: Vec::new(),
        }
    }

    pub fn with_plot(mut self, csv: String) -> Self {
        self.plot_csv = Some(csv);
        self
    }

    pub fn with_trials<T: Serialize>(mut self, trials: impl IntoIterator<Item = T>) -> Self {
        self.trials = trials.into_iter().map(|t| to_value(&t)).collect();
        self
    }
}

#[derive(Debug)]
pub enum Failure {
    Core(Error),
    Usage(String),
}

pub fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

pub fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

#[derive(Serialize)]
struct RunManifest<'a> {
    subcommand: &'a str,
    params: Value,
    global: &'a GlobalOpts,
    master_seed: u64,
    tol: f64,
    version: &'a str,
    wall_time_ms: u128,
    outcome: &'a str,
    exit_code: u8,
    dumps: Vec<String>,
}

fn failure_parts(f: &Failure) -> (&'static str, u8, Value) {
    match f {
        Failure::Usage(msg) => ("usage_error", EXIT_USAGE, json!({ "kind": "usage", "message": msg })),
        Failure::Core(e) => {
            let message = e.to_string();
            match e {
                Error::InvalidArgument(_) | Error::NotPrime(_) => (
                    "usage_error",
                    EXIT_USAGE,
                    json!({ "kind": "invalid_argument", "message": message }),
                ),
                Error::ResourceLimit {
                    what,
                    estimate,
                    cap,
                    size_bound,
                } => (
                    "resource_limit",
                    EXIT_RESOURCE,
                    json!({
                        "kind": "resource_limit",
                        "message": message,
                        "what": what,
                        "estimate": estimate,
                        "cap": cap.to_string(),
                        "size_bound": size_bound,
                    }),
                ),
                Error::NotCertifiable {
                    p,
                    x_len,
                    advisory_min_p,
                } => (
                    "not_certifiable",
                    EXIT_NOT_CERTIFIABLE,
                    json!({
                        "kind": "not_certifiable",
                        "message": message,
                        "p": p,
                        "x_len": x_len,
                        "advisory_min_p": advisory_min_p,
                    }),
                ),
                Error::Io(_) => ("io_error", EXIT_FAIL, json!({ "kind": "io", "message": message })),
            }
        }
    }
}

/// Prints the document, writes side files, and returns the exit code.
pub fn emit(subcommand: &str, params: Value, g: &GlobalOpts, start: Instant, result: Result<Run, Failure>) -> u8 {
    let mut dumps = Vec::new();
    let (body_key, mut body, outcome, mut code, plot, trials) = match result {
        Ok(run) => ("report", run.report, run.outcome, run.code, run.plot_csv, run.trials),
        Err(f) => {
            let (outcome, code, err) = failure_parts(&f);
            eprintln!("afflab {subcommand}: {}", err["message"].as_str().unwrap_or_default());
            ("error", err, outcome, code, None, Vec::new())
        }
    };
    let mut side_error = None;
    if let Err(e) = externalize_sets(&mut body, subcommand, &mut Vec::new(), &g.dump_dir, &mut dumps) {
        side_error = Some(e);
    }
    if let (Some(path), Some(csv)) = (&g.emit_plot_data, &plot) {
        if let Err(e) = std::fs::write(path, csv) {
            side_error = Some(e.into());
        }
    }
    if let Some(path) = &g.emit_trials {
        if let Err(e) = write_jsonl(path, &trials) {
            side_error = Some(e);
        }
    }
    if let Some(e) = side_error {
        eprintln!("afflab {subcommand}: {e}");
        code = EXIT_FAIL;
    }
    let manifest = RunManifest {
        subcommand,
        params,
        global: g,
        master_seed: g.seed,
        tol: g.tol,
        version: env!("CARGO_PKG_VERSION"),
        wall_time_ms: start.elapsed().as_millis(),
        outcome,
        exit_code: code,
        dumps,
    };
    let mut doc = Map::new();
    doc.insert("manifest".into(), to_value(&manifest));
    doc.insert(body_key.into(), body);
    let doc = Value::Object(doc);
    match g.format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&doc).expect("json")),
        Format::Table => print!("{}", render_table(&doc)),
    }
    code
}

fn write_jsonl(path: &Path, rows: &[Value]) -> Result<(), Error> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in rows {
        writeln!(w, "{}", serde_json::to_string(r).expect("json"))?;
    }
    w.flush()?;
    Ok(())
}

/// An `FpSubset` serializes as exactly `{p, elements}`.
fn as_set(v: &Value) -> Option<(u64, &Vec<Value>)> {
    let obj = v.as_object()?;
    if obj.len() != 2 {
        return None;
    }
    Some((obj.get("p")?.as_u64()?, obj.get("elements")?.as_array()?))
}

/// Adds `len` to every set, and moves the elements of large sets into
/// bitset files under `dir`.
fn externalize_sets(v: &mut Value, stem: &str, path: &mut Vec<String>, dir: &Path, dumps: &mut Vec<String>) -> Result<(), Error> {
    if let Some((p, elems)) = as_set(v) {
        let len = elems.len();
        let mut obj = Map::new();
        obj.insert("p".into(), p.into());
        obj.insert("len".into(), len.into());
        if len > SET_LIST_LIMIT {
            let set = FpSubset::from_elements(p, elems.iter().filter_map(Value::as_u64))?;
            let file = dir.join(format!("{stem}-{}.fpset", path.join("-")));
            set.write_dump(BufWriter::new(File::create(&file)?))?;
            let shown = file.display().to_string();
            obj.insert("dump".into(), shown.clone().into());
            dumps.push(shown);
        } else {
            obj.insert("elements".into(), v["elements"].take());
        }
        *v = Value::Object(obj);
        return Ok(());
    }
    match v {
        Value::Object(map) => {
            for (k, child) in map.iter_mut() {
                path.push(k.clone());
                externalize_sets(child, stem, path, dir, dumps)?;
                path.pop();
            }
        }
        Value::Array(items) => {
            for (i, child) in items.iter_mut().enumerate() {
                path.push(i.to_string());
                externalize_sets(child, stem, path, dir, dumps)?;
                path.pop();
            }
        }
        _ => {}
    }
    Ok(())
}

const TABLE_LIST_MAX: usize = 24;

fn scalar(v: &Value) -> Option<String> {
    match v {
        Value::Null => Some("-".into()),
        Value::Bool(b) => Some(b.to_string()),
        Value::Number(n) => Some(n.to_string()),
        Value::String(s) => Some(s.clone()),
        _ => None,
    }
}

/// Flattened `key  value` lines; long lists are summarized.
pub fn render_table(doc: &Value) -> String {
    let mut rows = Vec::new();
    flatten(doc, String::new(), &mut rows);
    let width = rows.iter().map(|(k, _)| k.chars().count()).max().unwrap_or(0);
    rows.iter()
        .map(|(k, v)| format!("{k:<width$}  {v}\n"))
        .collect()
}

fn flatten(v: &Value, prefix: String, rows: &mut Vec<(String, String)>) {
    let join = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(map) => {
            for (k, child) in map {
                flatten(child, join(k), rows);
            }
        }
        Value::Array(items) if items.iter().all(|x| scalar(x).is_some()) => {
            let shown: Vec<String> = items.iter().take(TABLE_LIST_MAX).filter_map(scalar).collect();
            let more = if items.len() > TABLE_LIST_MAX {
                format!(" … ({} total)", items.len())
            } else {
                String::new()
            };
            rows.push((prefix, format!("[{}]{more}", shown.join(", "))));
        }
        Value::Array(items) => {
            for (i, child) in items.iter().enumerate().take(TABLE_LIST_MAX) {
                flatten(child, format!("{prefix}[{i}]"), rows);
            }
            if items.len() > TABLE_LIST_MAX {
                rows.push((prefix, format!("… ({} total)", items.len())));
            }
        }
        _ => rows.push((prefix, scalar(v).unwrap_or_default())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn large_sets_are_dumped_and_small_ones_listed() {
        let dir = tempfile::tempdir().unwrap();
        let big = FpSubset::from_elements(40_009, 0..12_000).unwrap();
        let small = FpSubset::from_elements(7, [0, 3]).unwrap();
        let mut v = json!({ "outer": { "x_set": big }, "w": [small] });
        let mut dumps = Vec::new();
        externalize_sets(&mut v, "t", &mut Vec::new(), dir.path(), &mut dumps).unwrap();
        assert_eq!(v["w"][0], json!({ "p": 7, "len": 2, "elements": [0, 3] }));
        assert_eq!(v["outer"]["x_set"]["len"], 12_000);
        assert_eq!(dumps.len(), 1);
        assert!(dumps[0].ends_with("t-outer-x_set.fpset"));
        let back = FpSubset::read_dump(File::open(&dumps[0]).unwrap()).unwrap();
        assert_eq!(back, big);
    }

    #[test]
    fn table_flattens() {
        let t = render_table(&json!({ "a": { "b": 1, "c": [1, 2] }, "d": [{ "e": true }] }));
        assert_eq!(t, "a.b     1\na.c     [1, 2]\nd[0].e  true\n");
    }

    #[test]
    fn exit_codes_follow_error_kind() {
        assert_eq!(failure_parts(&usage("x")).1, EXIT_USAGE);
        assert_eq!(failure_parts(&Failure::Core(Error::NotPrime(9))).1, EXIT_USAGE);
        let nc = Error::NotCertifiable {
            p: 101,
            x_len: None,
            advisory_min_p: afflab_core::SizeBound::Overflow,
        };
        assert_eq!(failure_parts(&Failure::Core(nc)).1, EXIT_NOT_CERTIFIABLE);
    }
}
